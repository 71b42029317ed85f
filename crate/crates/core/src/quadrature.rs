//! Gauss–Legendre rules and the `β = ±γ⁵` half-line quadrature.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Points per panel of the composite rules.
pub const PANEL_ORDER: usize = 8;

/// A composite rule: nodes with their weights.
#[derive(Clone, Debug, Default)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// Gauss–Legendre on each interval `[edges[i], edges[i+1]]`.
    pub fn from_edges(edges: &[f64]) -> Self {
        let (x, w) = gauss_legendre(PANEL_ORDER);
        let mut rule = Self::default();
        for p in edges.windows(2) {
            let (a, b) = (p[0], p[1]);
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            for (xi, wi) in x.iter().zip(&w) {
                rule.nodes.push(m + r * xi);
                rule.weights.push(r * wi);
            }
        }
        rule
    }

    pub fn integrate(&self, f: impl Fn(f64) -> C64) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(*x) * *w).sum()
    }
}

/// Panel edges on `[0, end]`: geometric refinement `end·2^{-k}` toward zero
/// for the first panel, then panels whose width keeps the phase increment
/// `rate(γ)·width` below `2π/depth`.
pub fn phase_limited_edges(end: f64, depth: usize, rate: impl Fn(f64) -> f64) -> Vec<f64> {
    let budget = 2.0 * PI / depth.max(1) as f64;
    let mut edges = vec![0.0];
    let mut g = 0.0;
    while g < end {
        let mut w = budget / rate(g).max(1e-12);
        // Shrink until the rate at the far end also fits the budget.
        for _ in 0..60 {
            if rate((g + w).min(end)) * w <= budget {
                break;
            }
            w *= 0.5;
        }
        g = (g + w).min(end);
        if end - g < 1e-3 * w {
            g = end;
        }
        edges.push(g);
    }
    let first = edges[1];
    let mut refined = vec![0.0];
    for k in (1..=GEOMETRIC_LEVELS).rev() {
        refined.push(first * 0.5f64.powi(k as i32));
    }
    refined.extend_from_slice(&edges[1..]);
    refined
}

const GEOMETRIC_LEVELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Upper limit of the `γ` interval.
    pub gamma_max: f64,
    /// Panels per unit of `γ` at the coarsest level.
    pub depth: usize,
    /// Absolute floor below which a stalled refinement is accepted.
    pub floor: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { gamma_max: 40.0, depth: 2, floor: 1e-13 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
}

/// `∫_0^{γ_max} f(γ) dγ` by composite Gauss–Legendre at depths `d, 2d, 4d`.
/// The error estimate is the last difference; a difference that grows
/// instead of shrinking (above the floor) is an accuracy failure.
pub fn halfline_gauss_legendre(f: impl Fn(f64) -> C64, opts: QuadOptions) -> Result<QuadResult> {
    let at = |d: usize| {
        let n = (opts.gamma_max * d as f64).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=n).map(|i| opts.gamma_max * i as f64 / n as f64).collect();
        let first = edges[1];
        let mut refined = vec![0.0];
        for k in (1..=GEOMETRIC_LEVELS).rev() {
            refined.push(first * 0.5f64.powi(k as i32));
        }
        refined.extend(edges.drain(1..));
        CompositeRule::from_edges(&refined).integrate(&f)
    };
    let d = opts.depth.max(1);
    let i1 = at(d);
    let i2 = at(2 * d);
    let i4 = at(4 * d);
    let e1 = (i2 - i1).norm();
    let e2 = (i4 - i2).norm();
    let scale = opts.floor * (1.0 + i4.norm());
    if e2 > e1 && e2 > scale {
        return Err(Error::Accuracy {
            message: "depth doubling does not shrink the quadrature difference".into(),
            estimates: vec![e1, e2],
        });
    }
    Ok(QuadResult { value: i4, error: e2 })
}

/// `∫_{sign·[0,∞)} f(β) dβ` after the substitution `β = sign·γ⁵`,
/// `dβ = 5γ⁴ dγ`, which turns the `|β|^{-1/5}`, `|β|^{-2/5}` endpoint
/// behaviour of the boundary kernels into a polynomial factor.
pub fn oscillatory_quadrature(f: impl Fn(f64) -> C64, sign: Sign, opts: QuadOptions) -> Result<QuadResult> {
    let sg = sign.value();
    // On the negative half-line the map reverses orientation twice
    // (limits and differential), so both signs share one form.
    halfline_gauss_legendre(|g| f(sg * g.powi(5)) * (5.0 * g.powi(4)), opts)
}
