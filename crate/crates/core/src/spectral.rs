//! Uniform grids, sampled functions and the discrete Fourier machinery.
//!
//! Continuum convention: `f̂(ξ) = (2π)^{-1/2} ∫ f(x) e^{-iξx} dx`. The discrete
//! transform is the trapezoidal quadrature of that integral on a periodic
//! grid, including the phase of the grid origin, so that
//! `Σ|f|² dx = Σ|f̂|² dξ` holds exactly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::marker::PhantomData;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, structural, Result};
use crate::par;

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cached FFT plan of the given size; `inverse` selects the `e^{+i}` kernel.
pub(crate) fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Uniform periodic grid `origin + k·step`, `k = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !origin.is_finite() {
            return Err(structural(format!("grid step must be positive and finite, got {step}")));
        }
        if count < 2 {
            return Err(structural(format!("grid needs at least 2 points, got {count}")));
        }
        Ok(Self { origin, step, count })
    }

    /// Grid of the given length centred on zero. With an even count the point
    /// zero is a grid node.
    pub fn centered(length: f64, count: usize) -> Result<Self> {
        Self::new(-0.5 * length, length / count as f64, count)
    }

    pub fn length(&self) -> f64 {
        self.step * self.count as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        self.origin + self.step * k as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    /// Spacing of the dual frequency grid.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * PI / self.length()
    }

    /// Signed frequency of FFT bin `k` (bins at and above `count/2` are negative).
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.count as i64;
        let k = k as i64;
        let m = if k < (n + 1) / 2 { k } else { k - n };
        m as f64 * self.freq_spacing()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.frequency(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.step
    }

    /// Index of the node at `x`, if `x` lies on the grid up to a relative
    /// tolerance of `1e-9` steps.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let r = (x - self.origin) / self.step;
        let k = r.round();
        if (r - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.count {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Bin of the given signed frequency, if it lies on the dual grid.
    pub fn frequency_index(&self, xi: f64) -> Option<usize> {
        let m = xi / self.freq_spacing();
        let mr = m.round();
        if (m - mr).abs() > 1e-9 {
            return None;
        }
        let n = self.count as i64;
        let mi = mr as i64;
        let k = mi.rem_euclid(n) as usize;
        (self.frequency(k) - xi).abs().lt(&(1e-9 * self.freq_spacing())).then_some(k)
    }

    pub(crate) fn same_as(&self, other: &UniformGrid) -> bool {
        self.count == other.count
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && (self.origin - other.origin).abs() <= 1e-12 * self.step.max(self.origin.abs())
    }

    pub(crate) fn require_same(&self, other: &UniformGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(structural(format!("{what}: grids differ ({self:?} vs {other:?})")))
        }
    }
}

/// Marker for the axis a sampled function lives on.
pub trait Axis: Copy + Default + std::fmt::Debug + Send + Sync + 'static {
    const NAME: &'static str;
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Space;
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Time;

impl Axis for Space {
    const NAME: &'static str = "x";
}
impl Axis for Time {
    const NAME: &'static str = "t";
}

/// Complex samples on a uniform grid of one axis.
#[derive(Clone, Debug)]
pub struct Sampled<A: Axis> {
    pub grid: UniformGrid,
    pub values: Vec<C64>,
    axis: PhantomData<A>,
}

/// A function of `x`.
pub type GridFunction = Sampled<Space>;
/// A function of `t`.
pub type TimeSeries = Sampled<Time>;

impl<A: Axis> Sampled<A> {
    pub fn new(grid: UniformGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(structural(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.count
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(structural("non-finite sample"));
        }
        Ok(Self { grid, values, axis: PhantomData })
    }

    pub(crate) fn from_parts(grid: UniformGrid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.count);
        Self { grid, values, axis: PhantomData }
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        Self::from_parts(grid, vec![C64::new(0.0, 0.0); grid.count])
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> C64) -> Self {
        Self::from_parts(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn from_real_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.require_same(&other.grid, "add")?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.require_same(&other.grid, "sub")?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete L² norm `(Σ|f|² step)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step).sqrt()
    }

    /// Value at a grid node.
    pub fn at(&self, coordinate: f64) -> Option<C64> {
        self.grid.index_of(coordinate).map(|k| self.values[k])
    }

    pub fn axis_name(&self) -> &'static str {
        A::NAME
    }
}

/// Discrete spectrum in FFT bin order, tied to the grid it came from.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: UniformGrid,
    pub coeffs: Vec<C64>,
}

impl Spectrum {
    pub fn spacing(&self) -> f64 {
        self.grid.freq_spacing()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.grid.frequency(k)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.grid.frequencies()
    }

    /// `(Σ w(ξ)² |f̂|² dξ)^{1/2}`.
    pub fn weighted_norm(&self, w: impl Fn(f64) -> f64) -> f64 {
        let dxi = self.spacing();
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let wk = w(self.frequency(k));
                wk * wk * c.norm_sqr()
            })
            .sum();
        (s * dxi).sqrt()
    }

    /// Exact evaluation of the trigonometric interpolant at `x`.
    pub fn evaluate(&self, x: f64) -> C64 {
        let sum: C64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * C64::from_polar(1.0, self.frequency(k) * x))
            .sum();
        sum * (self.spacing() * INV_SQRT_2PI)
    }
}

/// `f̂_k = (step/√2π) e^{-iξ_k x₀} Σ_n f_n e^{-2πikn/N}`.
pub fn forward_transform<A: Axis>(f: &Sampled<A>) -> Spectrum {
    let n = f.grid.count;
    let mut buf = f.values.clone();
    fft_plan(n, false).process(&mut buf);
    let scale = f.grid.step * INV_SQRT_2PI;
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= C64::from_polar(scale, -f.grid.frequency(k) * f.grid.origin);
    }
    Spectrum { grid: f.grid, coeffs: buf }
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform<A: Axis>(spec: &Spectrum) -> Sampled<A> {
    let n = spec.grid.count;
    let scale = spec.spacing() * INV_SQRT_2PI;
    let mut buf: Vec<C64> = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * C64::from_polar(scale, spec.grid.frequency(k) * spec.grid.origin))
        .collect();
    fft_plan(n, true).process(&mut buf);
    Sampled::from_parts(spec.grid, buf)
}

/// Rejects negative or non-finite regularity indices.
pub(crate) fn check_index(s: f64, what: &str) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain(format!("{what} must be a finite number ≥ 0, got {s}")));
    }
    Ok(())
}

/// `⟨ξ⟩ = 1 + |ξ|`.
#[inline]
pub fn bracket(xi: f64) -> f64 {
    1.0 + xi.abs()
}

/// `(Σ ⟨ξ⟩^{2s} |f̂(ξ)|² dξ)^{1/2}`.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> Result<f64> {
    check_index(s, "Sobolev index")?;
    Ok(forward_transform(f).weighted_norm(|xi| bracket(xi).powf(s)))
}

/// The same weighted norm for a function of time.
pub fn fractional_time_norm(h: &TimeSeries, r: f64) -> Result<f64> {
    check_index(r, "time Sobolev index")?;
    Ok(forward_transform(h).weighted_norm(|b| bracket(b).powf(r)))
}

/// Upper bound for the half-line norm of `f` (samples at `x ≥ 0` are used):
/// the whole-line norm of one concrete extension. The true half-line norm is
/// an infimum over all extensions and is never larger.
pub fn halfline_norm_upper(
    f: &GridFunction,
    s: f64,
    method: crate::cutoffs::ExtensionMethod,
) -> Result<f64> {
    let ext = crate::cutoffs::extend_initial_datum(f, s, method)?;
    Ok(ext.norm)
}

/// Bessel potential `(⟨D⟩^s f)^ = ⟨ξ⟩^s f̂`.
pub fn bessel_potential<A: Axis>(f: &Sampled<A>, s: f64) -> Sampled<A> {
    let mut spec = forward_transform(f);
    for k in 0..spec.coeffs.len() {
        let w = bracket(spec.frequency(k)).powf(s);
        spec.coeffs[k] *= w;
    }
    inverse_transform(&spec)
}

/// Spectral derivative `∂^m`, multiplier `(iξ)^m`.
pub fn spectral_derivative<A: Axis>(f: &Sampled<A>, m: u32) -> Sampled<A> {
    let mut spec = forward_transform(f);
    for k in 0..spec.coeffs.len() {
        let xi = spec.frequency(k);
        spec.coeffs[k] *= C64::new(0.0, xi).powu(m);
    }
    inverse_transform(&spec)
}

/// Complex samples on a space-time grid, stored as consecutive time slices:
/// `values[it * nx + ix]`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub xgrid: UniformGrid,
    pub tgrid: UniformGrid,
    pub values: Vec<C64>,
}

impl SpaceTimeField {
    pub fn new(xgrid: UniformGrid, tgrid: UniformGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != xgrid.count * tgrid.count {
            return Err(structural(format!(
                "field has {} values, grids need {}",
                values.len(),
                xgrid.count * tgrid.count
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(structural("non-finite field value"));
        }
        Ok(Self { xgrid, tgrid, values })
    }

    pub fn zeros(xgrid: UniformGrid, tgrid: UniformGrid) -> Self {
        Self { xgrid, tgrid, values: vec![C64::new(0.0, 0.0); xgrid.count * tgrid.count] }
    }

    pub fn from_fn(
        xgrid: UniformGrid,
        tgrid: UniformGrid,
        f: impl Fn(f64, f64) -> C64 + Sync + Send,
    ) -> Self {
        let nx = xgrid.count;
        let mut field = Self::zeros(xgrid, tgrid);
        par::for_each_chunk(&mut field.values, nx, |it, row| {
            let t = tgrid.point(it);
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(xgrid.point(ix), t);
            }
        });
        field
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.xgrid.count
    }

    #[inline]
    pub fn nt(&self) -> usize {
        self.tgrid.count
    }

    #[inline]
    pub fn at(&self, ix: usize, it: usize) -> C64 {
        self.values[it * self.xgrid.count + ix]
    }

    pub fn slice(&self, it: usize) -> &[C64] {
        let nx = self.nx();
        &self.values[it * nx..(it + 1) * nx]
    }

    pub fn slice_mut(&mut self, it: usize) -> &mut [C64] {
        let nx = self.nx();
        &mut self.values[it * nx..(it + 1) * nx]
    }

    /// Spatial slice at time index `it`.
    pub fn time_slice(&self, it: usize) -> GridFunction {
        GridFunction::from_parts(self.xgrid, self.slice(it).to_vec())
    }

    /// Time series at spatial index `ix`.
    pub fn column(&self, ix: usize) -> TimeSeries {
        let nx = self.nx();
        TimeSeries::from_parts(self.tgrid, (0..self.nt()).map(|it| self.values[it * nx + ix]).collect())
    }

    fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        self.xgrid.require_same(&other.xgrid, what)?;
        self.tgrid.require_same(&other.tgrid, what)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "field add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "field sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            xgrid: self.xgrid,
            tgrid: self.tgrid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            xgrid: self.xgrid,
            tgrid: self.tgrid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Multiplies each time slice by `w(t)`.
    pub fn scale_in_time(&self, w: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        let nx = self.nx();
        for it in 0..self.nt() {
            let c = w(self.tgrid.point(it));
            for v in &mut out.values[it * nx..(it + 1) * nx] {
                *v *= c;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Space-time L² norm `(Σ|u|² dx dt)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.xgrid.step * self.tgrid.step)
            .sqrt()
    }

    /// L² norm over the nodes with `x ∈ [x0, x1]` and `t ∈ [t0, t1]`.
    pub fn l2_norm_window(&self, x0: f64, x1: f64, t0: f64, t1: f64) -> f64 {
        let tol = 1e-9;
        let mut s = 0.0;
        for it in 0..self.nt() {
            let t = self.tgrid.point(it);
            if t < t0 - tol * self.tgrid.step || t > t1 + tol * self.tgrid.step {
                continue;
            }
            for ix in 0..self.nx() {
                let x = self.xgrid.point(ix);
                if x < x0 - tol * self.xgrid.step || x > x1 + tol * self.xgrid.step {
                    continue;
                }
                s += self.at(ix, it).norm_sqr();
            }
        }
        (s * self.xgrid.step * self.tgrid.step).sqrt()
    }

    /// Spatial spectra of every time slice, same layout as the field.
    pub fn spatial_spectra(&self) -> Vec<C64> {
        let nx = self.nx();
        let plan = fft_plan(nx, false);
        let g = self.xgrid;
        let phase: Vec<C64> = (0..nx)
            .map(|k| C64::from_polar(g.step * INV_SQRT_2PI, -g.frequency(k) * g.origin))
            .collect();
        let mut out = self.values.clone();
        par::for_each_chunk(&mut out, nx, |_, row| {
            plan.process(row);
            for (c, p) in row.iter_mut().zip(&phase) {
                *c *= p;
            }
        });
        out
    }

    /// Inverse of [`SpaceTimeField::spatial_spectra`].
    pub fn from_spatial_spectra(xgrid: UniformGrid, tgrid: UniformGrid, mut spectra: Vec<C64>) -> Self {
        let nx = xgrid.count;
        let plan = fft_plan(nx, true);
        let phase: Vec<C64> = (0..nx)
            .map(|k| C64::from_polar(xgrid.freq_spacing() * INV_SQRT_2PI, xgrid.frequency(k) * xgrid.origin))
            .collect();
        par::for_each_chunk(&mut spectra, nx, |_, row| {
            for (c, p) in row.iter_mut().zip(&phase) {
                *c *= p;
            }
            plan.process(row);
        });
        Self { xgrid, tgrid, values: spectra }
    }

    /// Two-dimensional transform `û(ξ,τ) = (2π)^{-1} ∫∫ u e^{-i(xξ+tτ)}`.
    pub fn spectrum(&self) -> SpaceTimeSpectrum {
        let (nx, nt) = (self.nx(), self.nt());
        let spatial = self.spatial_spectra();
        let mut cols = transpose(&spatial, nt, nx);
        let plan = fft_plan(nt, false);
        let g = self.tgrid;
        let phase: Vec<C64> = (0..nt)
            .map(|k| C64::from_polar(g.step * INV_SQRT_2PI, -g.frequency(k) * g.origin))
            .collect();
        par::for_each_chunk(&mut cols, nt, |_, col| {
            plan.process(col);
            for (c, p) in col.iter_mut().zip(&phase) {
                *c *= p;
            }
        });
        SpaceTimeSpectrum { xgrid: self.xgrid, tgrid: self.tgrid, coeffs: transpose(&cols, nx, nt) }
    }
}

/// Spectrum of a [`SpaceTimeField`], layout `coeffs[kτ * nx + kξ]`.
#[derive(Clone, Debug)]
pub struct SpaceTimeSpectrum {
    pub xgrid: UniformGrid,
    pub tgrid: UniformGrid,
    pub coeffs: Vec<C64>,
}

impl SpaceTimeSpectrum {
    pub fn cell(&self) -> f64 {
        self.xgrid.freq_spacing() * self.tgrid.freq_spacing()
    }

    /// Visits `(ξ, τ, coefficient)` for every bin.
    pub fn for_each(&self, mut f: impl FnMut(f64, f64, C64)) {
        let nx = self.xgrid.count;
        let xi: Vec<f64> = self.xgrid.frequencies();
        for kt in 0..self.tgrid.count {
            let tau = self.tgrid.frequency(kt);
            for kx in 0..nx {
                f(xi[kx], tau, self.coeffs[kt * nx + kx]);
            }
        }
    }

    /// Back to physical space.
    pub fn to_field(&self) -> SpaceTimeField {
        let (nx, nt) = (self.xgrid.count, self.tgrid.count);
        let mut cols = transpose(&self.coeffs, nt, nx);
        let plan = fft_plan(nt, true);
        let g = self.tgrid;
        let phase: Vec<C64> = (0..nt)
            .map(|k| C64::from_polar(g.freq_spacing() * INV_SQRT_2PI, g.frequency(k) * g.origin))
            .collect();
        par::for_each_chunk(&mut cols, nt, |_, col| {
            for (c, p) in col.iter_mut().zip(&phase) {
                *c *= p;
            }
            plan.process(col);
        });
        SpaceTimeField::from_spatial_spectra(self.xgrid, self.tgrid, transpose(&cols, nx, nt))
    }
}

/// Transposes a row-major `rows × cols` matrix.
pub(crate) fn transpose(a: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len()];
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
    out
}
