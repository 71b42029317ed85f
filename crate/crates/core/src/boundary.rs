//! The boundary potential: the solution of `u_t + ∂_x⁵u = 0` on `x > 0` with
//! zero initial datum and prescribed `u, u_x, u_xx` at `x = 0`.
//!
//! For every real `β ≠ 0` the symbol `iβ + r⁵` has exactly three roots with
//! `Re r ≤ 0`. Writing `ĥ_j` for the time transforms of the data, the
//! potential is
//!
//! ```text
//! u(x,t) = (2π)^{-1/2} ∫ e^{iβt} Σ_k c_k(β) E_k(β,x) dβ,
//! ```
//!
//! with `c(β)` solving the Vandermonde system `Σ c_k r_k^m = ĥ_{m+1}` and
//! `E_k = e^{r_k x}` for the purely imaginary root, `ρ(|β|^{1/5}x) e^{r_k x}`
//! for the two decaying ones (the collar keeps them bounded on `x < 0`).
//!
//! The β-integral is split with the weight `χ(β) = exp(-(β/β₀)⁸)`:
//! * `χ·(…)` carries the branch point at `β = 0` and is integrated with
//!   Gauss–Legendre in `γ = |β|^{1/5}`;
//! * `(1-χ)·(…)` vanishes to eighth order at the origin, is smooth, and is
//!   integrated by the trapezoidal rule on a uniform β grid, which is one
//!   inverse FFT per `x` and yields every time node at once.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::rho_with_collar;
use crate::error::{domain, structural, Error, Result};
use crate::par;
use crate::quadrature::{phase_limited_edges, CompositeRule};
use crate::spectral::{fft_plan, SpaceTimeField, TimeSeries, UniformGrid, INV_SQRT_2PI};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// The three roots of `iβ + r⁵ = 0` in the closed left half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootTriple {
    pub beta: f64,
    pub r: [C64; 3],
}

/// Arguments of the roots, in units of `π`, for `β < 0` and `β > 0`.
pub const PHASES_NEGATIVE: [f64; 3] = [0.5, 0.9, 1.3];
pub const PHASES_POSITIVE: [f64; 3] = [0.7, 1.1, 1.5];

fn unit(phase_over_pi: f64) -> C64 {
    // Exact values on the imaginary axis keep Re r = 0 there.
    if phase_over_pi == 0.5 {
        C64::new(0.0, 1.0)
    } else if phase_over_pi == 1.5 {
        C64::new(0.0, -1.0)
    } else {
        C64::from_polar(1.0, phase_over_pi * PI)
    }
}

impl RootTriple {
    /// Index of the purely imaginary root.
    pub fn oscillatory(&self) -> usize {
        if self.beta < 0.0 {
            0
        } else {
            2
        }
    }

    /// `max_k |iβ + r_k⁵|`.
    pub fn residual(&self) -> f64 {
        self.r.iter().map(|r| (C64::new(0.0, self.beta) + r.powu(5)).norm()).fold(0.0, f64::max)
    }

    /// `γ = |β|^{1/5}`.
    pub fn gamma(&self) -> f64 {
        self.beta.abs().powf(0.2)
    }
}

/// Closed-form roots: the positive real fifth root of `|β|` times fixed phases.
pub fn roots_of_symbol(beta: f64) -> Result<RootTriple> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(domain(format!("roots need a finite β ≠ 0, got {beta}")));
    }
    let g = beta.abs().powf(0.2);
    let phases = if beta < 0.0 { PHASES_NEGATIVE } else { PHASES_POSITIVE };
    Ok(RootTriple { beta, r: phases.map(|p| unit(p) * g) })
}

/// `(r₃ - r₂)(r₃ - r₁)(r₂ - r₁)`.
pub fn vandermonde_det(r: &[C64; 3]) -> C64 {
    (r[2] - r[1]) * (r[2] - r[0]) * (r[1] - r[0])
}

/// Solution of `Σ c_k = h̃₁`, `Σ c_k r_k = h̃₂`, `Σ c_k r_k² = h̃₃`.
#[derive(Clone, Copy, Debug)]
pub struct CoefficientTriple {
    pub beta: f64,
    pub c: [C64; 3],
    pub rhs: [C64; 3],
}

impl CoefficientTriple {
    /// Largest equation residual relative to the right-hand side scale.
    pub fn residual(&self, r: &[C64; 3]) -> f64 {
        let mut worst: f64 = 0.0;
        let scale = self.rhs.iter().map(|h| h.norm()).fold(0.0, f64::max).max(1e-300);
        for m in 0..3 {
            let lhs: C64 = (0..3).map(|k| self.c[k] * r[k].powu(m as u32)).sum();
            worst = worst.max((lhs - self.rhs[m]).norm() / scale);
        }
        worst
    }
}

/// Cramer's rule with the product form of the determinant. Each numerator
/// determinant factors as a root difference times a quadratic in the data.
pub(crate) fn cramer(r: &[C64; 3], h: &[C64; 3]) -> [C64; 3] {
    let det = vandermonde_det(r);
    let q = |a: C64, b: C64| h[2] - (a + b) * h[1] + a * b * h[0];
    [
        (r[2] - r[1]) * q(r[1], r[2]) / det,
        -(r[2] - r[0]) * q(r[0], r[2]) / det,
        (r[1] - r[0]) * q(r[0], r[1]) / det,
    ]
}

/// Degeneracy threshold on `|det| / max|r|³`.
pub const DEGENERACY_TOL: f64 = 1e-13;

pub fn solve_coefficients(roots: &RootTriple, rhs: [C64; 3]) -> Result<CoefficientTriple> {
    let det = vandermonde_det(&roots.r);
    let scale = roots.r.iter().map(|r| r.norm()).fold(0.0, f64::max).powi(3);
    if !(det.norm() >= DEGENERACY_TOL * scale) || scale == 0.0 {
        return Err(Error::Numerical(format!(
            "near-degenerate roots at β = {}: |det| = {:.3e}",
            roots.beta,
            det.norm()
        )));
    }
    Ok(CoefficientTriple { beta: roots.beta, c: cramer(&roots.r, &rhs), rhs })
}

/// Boundary values `h₁ = u(0,t)`, `h₂ = u_x(0,t)`, `h₃ = u_xx(0,t)`.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub h: [TimeSeries; 3],
}

impl BoundaryData {
    pub fn new(h1: TimeSeries, h2: TimeSeries, h3: TimeSeries) -> Result<Self> {
        h1.grid.require_same(&h2.grid, "boundary data")?;
        h1.grid.require_same(&h3.grid, "boundary data")?;
        Ok(Self { h: [h1, h2, h3] })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        Self { h: [TimeSeries::zeros(grid), TimeSeries::zeros(grid), TimeSeries::zeros(grid)] }
    }

    pub fn grid(&self) -> UniformGrid {
        self.h[0].grid
    }

    pub fn max_abs(&self) -> f64 {
        self.h.iter().map(|h| h.max_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            h: [self.h[0].sub(&other.h[0])?, self.h[1].sub(&other.h[1])?, self.h[2].sub(&other.h[2])?],
        })
    }

    pub fn scale_in_time(&self, w: impl Fn(f64) -> f64) -> Self {
        let f = |h: &TimeSeries| {
            let g = h.grid;
            TimeSeries::from_parts(g, h.values.iter().enumerate().map(|(i, v)| v * w(g.point(i))).collect())
        };
        Self { h: [f(&self.h[0]), f(&self.h[1]), f(&self.h[2])] }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryOptions {
    /// Quadrature depth: near-zero panels hold a phase of `2π/depth`, and the
    /// far-field period is `period_per_depth · depth`.
    pub depth: usize,
    /// Scale `β₀` of the near/far partition.
    pub split: f64,
    pub period_per_depth: f64,
    /// Largest relative spectrum level allowed near the Nyquist frequency
    /// (the resolution check).
    pub spectral_floor: f64,
    /// Relative level below which the data spectrum counts as zero; sets
    /// the truncation radius `B`.
    pub truncation: f64,
    /// Width `w` of the collar `ρ` (support in `[-w, ∞)`).
    pub collar: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self { depth: 4, split: 4.0, period_per_depth: 16.0, spectral_floor: 1e-12, truncation: 1e-13, collar: 2.0 }
    }
}

/// Quadrature node shared by the near and far parts.
#[derive(Clone, Copy, Debug)]
struct Node {
    beta: f64,
    gamma: f64,
    r: [C64; 3],
    /// Coefficients with all quadrature weights folded in.
    c: [C64; 3],
    /// Weight applied to the data transform (for piece diagnostics).
    w: f64,
    hhat: [C64; 3],
    osc: usize,
}

impl Node {
    fn build(beta: f64, w: f64, hhat: [C64; 3]) -> Self {
        let roots = roots_of_symbol(beta).expect("nonzero β");
        let c = cramer(&roots.r, &hhat).map(|c| c * w);
        Self { beta, gamma: roots.gamma(), r: roots.r, c, w, hhat, osc: roots.oscillatory() }
    }

    /// `∂_x^m Σ_k c_k E_k(x)` for the selected pieces.
    #[inline]
    fn kernel(&self, x: f64, m: u32, collar: f64, sel: Piece) -> C64 {
        let mut acc = ZERO;
        let coeffs = match sel {
            Piece::All => self.c,
            Piece::Single { data, oscillatory: _ } => {
                let mut e = [ZERO; 3];
                e[data] = self.hhat[data] * self.w;
                cramer(&self.r, &e)
            }
        };
        for k in 0..3 {
            let is_osc = k == self.osc;
            if let Piece::Single { oscillatory, .. } = sel {
                if oscillatory != is_osc {
                    continue;
                }
            }
            let r = self.r[k];
            let cut = if is_osc { 1.0 } else { rho_with_collar(self.gamma * x, collar) };
            if cut == 0.0 {
                continue;
            }
            let re = r.re * x;
            if re < -700.0 {
                continue;
            }
            let e = C64::from_polar(re.exp() * cut, r.im * x);
            acc += coeffs[k] * r.powu(m) * e;
        }
        acc
    }
}

/// Which kernel pieces to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    All,
    /// Contribution of `h_{data+1}` through the oscillatory root or through
    /// the two decaying roots.
    Single { data: usize, oscillatory: bool },
}

/// Near/far partition weight `exp(-(β/β₀)⁸)`.
fn near_weight(beta: f64, b0: f64) -> f64 {
    (-(beta / b0).powi(8)).exp()
}

/// Where the potential will be evaluated; sizes the near-zero panels.
#[derive(Clone, Copy, Debug)]
pub struct EvalExtent {
    pub x_abs_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// Precomputed quadrature of the boundary potential for fixed data.
#[derive(Clone, Debug)]
pub struct BoundaryPotential {
    opts: BoundaryOptions,
    data_grid: UniformGrid,
    near: Vec<Node>,
    far: Vec<(usize, Node)>,
    n_beta: usize,
    dbeta: f64,
    /// Truncation radius in β.
    pub b_max: f64,
    zero: bool,
}

/// Diagnostic summary of an assembly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryDiagnostic {
    #[serde(rename = "B")]
    pub b_max: f64,
    pub depth: usize,
    pub near_nodes: usize,
    pub far_nodes: usize,
    pub period: f64,
    /// Maxima of the six kernel pieces: `(h₁, h₂, h₃) × (oscillatory, decaying)`.
    pub piece_max: [[f64; 2]; 3],
    pub trace_errors: [f64; 3],
}

impl BoundaryPotential {
    pub fn new(data: &BoundaryData, opts: BoundaryOptions, extent: EvalExtent) -> Result<Self> {
        let grid = data.grid();
        let dt = grid.step;
        if opts.depth == 0 || !(opts.split > 0.0) || !(opts.collar > 0.0) || !(opts.truncation >= 0.0) {
            return Err(domain("boundary options: depth, split and collar must be positive, truncation non-negative"));
        }
        let hmax = data.max_abs();
        let period = opts.period_per_depth * opts.depth as f64;
        let n_beta = ((period / dt).ceil() as usize).max(grid.count).next_power_of_two();
        let dbeta = 2.0 * PI / (n_beta as f64 * dt);
        let mut me = Self {
            opts,
            data_grid: grid,
            near: Vec::new(),
            far: Vec::new(),
            n_beta,
            dbeta,
            b_max: 0.0,
            zero: hmax == 0.0,
        };
        if me.zero {
            return Ok(me);
        }
        // Support in t > 0.
        let before: f64 = (0..grid.count)
            .filter(|&i| grid.point(i) < -0.5 * dt)
            .map(|i| data.h.iter().map(|h| h.values[i].norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if before > 1e-12 * hmax {
            return Err(Error::Precondition(format!(
                "boundary data must vanish for t < 0 (found {before:.3e} against max {hmax:.3e})"
            )));
        }
        let shift = (grid.origin / dt).round();
        if (grid.origin / dt - shift).abs() > 1e-9 {
            return Err(structural("boundary data grid must contain t = 0 as a node"));
        }
        let shift = shift as i64;

        // Far part: DTFT of the data on the uniform β grid by one FFT each.
        let plan = fft_plan(n_beta, false);
        let hhat: Vec<Vec<C64>> = data
            .h
            .iter()
            .map(|h| {
                let mut buf = vec![ZERO; n_beta];
                for (i, v) in h.values.iter().enumerate() {
                    let g = (shift + i as i64).rem_euclid(n_beta as i64) as usize;
                    buf[g] += v;
                }
                plan.process(&mut buf);
                buf.iter().map(|c| c * (dt * INV_SQRT_2PI)).collect()
            })
            .collect();
        let freq = |k: usize| -> f64 {
            let m = if k < n_beta / 2 { k as f64 } else { k as f64 - n_beta as f64 };
            m * dbeta
        };
        let mag = |k: usize| hhat.iter().map(|h| h[k].norm()).fold(0.0, f64::max);
        let peak = (0..n_beta).map(mag).fold(0.0, f64::max);
        let nyq = PI / dt;
        let tail = (0..n_beta).filter(|&k| freq(k).abs() >= 0.95 * nyq).map(mag).fold(0.0, f64::max);
        if tail > opts.spectral_floor * peak {
            return Err(Error::Precondition(format!(
                "boundary data are not resolved: spectrum near the Nyquist frequency is {:.3e} of its peak \
                 (floor {:.1e}); refine the time grid or smooth the data",
                tail / peak,
                opts.spectral_floor
            )));
        }
        me.b_max = (0..n_beta)
            .filter(|&k| mag(k) > opts.truncation * peak)
            .map(|k| freq(k).abs())
            .fold(0.0, f64::max)
            + dbeta;
        let b0 = opts.split;
        let scale = dbeta * INV_SQRT_2PI;
        me.far = (0..n_beta)
            .filter_map(|k| {
                let beta = freq(k);
                let w = 1.0 - near_weight(beta, b0);
                if beta == 0.0 || beta.abs() > me.b_max || w < 1e-18 {
                    return None;
                }
                Some((k, Node::build(beta, w * scale, [hhat[0][k], hhat[1][k], hhat[2][k]])))
            })
            .collect();

        // Near part: Gauss–Legendre in γ over |β| ≤ β₀·40^{1/8}, where the
        // partition weight drops below e^{-40}.
        let gamma_end = (b0 * 40f64.powf(0.125)).powf(0.2);
        let (ds, de) = support(data);
        let t_span = (extent.t_max - ds).abs().max((extent.t_min - de).abs()).max(de - ds);
        let x_span = extent.x_abs_max;
        let edges = phase_limited_edges(gamma_end, opts.depth, |g| 5.0 * g.powi(4) * t_span + x_span + 1.0);
        let rule = CompositeRule::from_edges(&edges);
        let times: Vec<f64> = grid.points();
        for sign in [-1.0, 1.0] {
            let nodes: Vec<Node> = par::map_range(rule.nodes.len(), |i| {
                let g = rule.nodes[i];
                let beta = sign * g.powi(5);
                let w = rule.weights[i] * 5.0 * g.powi(4) * near_weight(beta, b0) * INV_SQRT_2PI;
                let hh = [0, 1, 2].map(|j| dtft(&data.h[j].values, &times, beta, dt));
                Node::build(beta, w, hh)
            });
            me.near.extend(nodes);
        }
        Ok(me)
    }

    pub fn options(&self) -> &BoundaryOptions {
        &self.opts
    }

    pub fn node_counts(&self) -> (usize, usize) {
        (self.near.len(), self.far.len())
    }

    pub fn beta_spacing(&self) -> f64 {
        self.dbeta
    }

    pub fn period(&self) -> f64 {
        self.n_beta as f64 * self.data_grid.step
    }

    /// `∂_x^m u(x, t)` at a single point (`m > 0` requires `x ≥ 0`).
    pub fn value_at(&self, x: f64, t: f64, m: u32) -> Result<C64> {
        if m > 0 && x < 0.0 {
            return Err(domain("x-derivatives of the potential are only available for x ≥ 0"));
        }
        if self.zero {
            return Ok(ZERO);
        }
        let collar = self.opts.collar;
        let near: C64 = self
            .near
            .iter()
            .map(|n| n.kernel(x, m, collar, Piece::All) * C64::from_polar(1.0, n.beta * t))
            .sum();
        let far: C64 = self
            .far
            .iter()
            .map(|(_, n)| n.kernel(x, m, collar, Piece::All) * C64::from_polar(1.0, n.beta * t))
            .sum();
        Ok(near + far)
    }

    /// Columns `∂_x^m u(x_i, ·)` at the given times, all of which must be
    /// nodes of the data grid.
    pub fn columns(&self, xs: &[f64], times: &[f64], m: u32, sel: Piece) -> Result<Vec<Vec<C64>>> {
        if m > 0 && xs.iter().any(|x| *x < 0.0) {
            return Err(domain("x-derivatives of the potential are only available for x ≥ 0"));
        }
        if self.zero {
            return Ok(vec![vec![ZERO; times.len()]; xs.len()]);
        }
        let dt = self.data_grid.step;
        let nb = self.n_beta;
        let slots: Vec<usize> = times
            .iter()
            .map(|t| {
                let r = t / dt;
                if (r - r.round()).abs() > 1e-6 {
                    Err(structural(format!("time {t} is not a node of the boundary data grid")))
                } else {
                    Ok((r.round() as i64).rem_euclid(nb as i64) as usize)
                }
            })
            .collect::<Result<_>>()?;
        let phases: Vec<Vec<C64>> = times
            .iter()
            .map(|t| self.near.iter().map(|n| C64::from_polar(1.0, n.beta * t)).collect())
            .collect();
        let plan = fft_plan(nb, true);
        let collar = self.opts.collar;
        Ok(par::map_range(xs.len(), |i| {
            let x = xs[i];
            let mut buf = vec![ZERO; nb];
            for (k, n) in &self.far {
                buf[*k] = n.kernel(x, m, collar, sel);
            }
            plan.process(&mut buf);
            let a: Vec<C64> = self.near.iter().map(|n| n.kernel(x, m, collar, sel)).collect();
            slots
                .iter()
                .zip(&phases)
                .map(|(s, ph)| buf[*s] + a.iter().zip(ph).map(|(a, p)| a * p).sum::<C64>())
                .collect()
        }))
    }

    /// The potential on a space-time grid. Rows whose time lies outside
    /// `window` are left at zero.
    pub fn assemble(&self, xgrid: UniformGrid, tgrid: UniformGrid, window: Option<(f64, f64)>) -> Result<SpaceTimeField> {
        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let rows: Vec<usize> = (0..tgrid.count).filter(|&i| (lo..=hi).contains(&tgrid.point(i))).collect();
        let times: Vec<f64> = rows.iter().map(|&i| tgrid.point(i)).collect();
        let cols = self.columns(&xgrid.points(), &times, 0, Piece::All)?;
        let mut field = SpaceTimeField::zeros(xgrid, tgrid);
        let nx = xgrid.count;
        for (ix, col) in cols.iter().enumerate() {
            for (r, v) in rows.iter().zip(col) {
                field.values[r * nx + ix] = *v;
            }
        }
        Ok(field)
    }

    /// `∂_x^j u(0, t)` on `tgrid`, differentiating the kernels analytically.
    pub fn traces(&self, j: u32, tgrid: UniformGrid) -> Result<TimeSeries> {
        if j > 2 {
            return Err(domain(format!("trace order j = {j} must be 0, 1 or 2")));
        }
        let col = self.columns(&[0.0], &tgrid.points(), j, Piece::All)?.remove(0);
        Ok(TimeSeries::from_parts(tgrid, col))
    }

    /// Trace errors against the data and maxima of the six pieces over the
    /// sample points `xs` and the times `window` of the data grid.
    pub fn diagnostic(&self, data: &BoundaryData, xs: &[f64], window: (f64, f64)) -> Result<BoundaryDiagnostic> {
        let g = self.data_grid;
        let times: Vec<f64> = g.points().into_iter().filter(|t| (window.0..=window.1).contains(t)).collect();
        let mut trace_errors = [0.0; 3];
        for (j, e) in trace_errors.iter_mut().enumerate() {
            let tr = self.traces(j as u32, g)?;
            *e = tr
                .values
                .iter()
                .zip(&data.h[j].values)
                .enumerate()
                .filter(|(i, _)| (window.0..=window.1).contains(&g.point(*i)))
                .map(|(_, (a, b))| (a - b).norm())
                .fold(0.0, f64::max);
        }
        let mut piece_max = [[0.0; 2]; 3];
        for (j, row) in piece_max.iter_mut().enumerate() {
            for (o, v) in row.iter_mut().enumerate() {
                let cols = self.columns(xs, &times, 0, Piece::Single { data: j, oscillatory: o == 0 })?;
                *v = cols.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            }
        }
        let (near_nodes, far_nodes) = self.node_counts();
        Ok(BoundaryDiagnostic {
            b_max: self.b_max,
            depth: self.opts.depth,
            near_nodes,
            far_nodes,
            period: self.period(),
            piece_max,
            trace_errors,
        })
    }
}

/// `(dt/√2π) Σ h_n e^{-iβ t_n}`: the transform of the samples, evaluated off grid.
fn dtft(h: &[C64], times: &[f64], beta: f64, dt: f64) -> C64 {
    let mut acc = ZERO;
    for (v, t) in h.iter().zip(times) {
        if v.re != 0.0 || v.im != 0.0 {
            acc += v * C64::from_polar(1.0, -beta * t);
        }
    }
    acc * (dt * INV_SQRT_2PI)
}

/// Smallest interval of times holding all nonzero samples.
fn support(data: &BoundaryData) -> (f64, f64) {
    let g = data.grid();
    let nz: Vec<usize> =
        (0..g.count).filter(|&i| data.h.iter().any(|h| h.values[i].norm() > 0.0)).collect();
    match (nz.first(), nz.last()) {
        (Some(a), Some(b)) => (g.point(*a), g.point(*b)),
        _ => (0.0, 0.0),
    }
}

/// Assembles the potential on `(xgrid, tgrid)` with default window (all times).
pub fn assemble_boundary_potential(
    data: &BoundaryData,
    xgrid: UniformGrid,
    tgrid: UniformGrid,
    opts: BoundaryOptions,
) -> Result<SpaceTimeField> {
    let extent = EvalExtent {
        x_abs_max: xgrid.origin.abs().max(xgrid.end().abs()),
        t_min: tgrid.origin,
        t_max: tgrid.end(),
    };
    BoundaryPotential::new(data, opts, extent)?.assemble(xgrid, tgrid, None)
}

/// Traces `∂_x^j u(0,·)` of the potential for the given data.
pub fn boundary_potential_traces(
    data: &BoundaryData,
    j: u32,
    opts: BoundaryOptions,
) -> Result<TimeSeries> {
    let g = data.grid();
    let extent = EvalExtent { x_abs_max: 0.0, t_min: g.origin, t_max: g.end() };
    BoundaryPotential::new(data, opts, extent)?.traces(j, g)
}
