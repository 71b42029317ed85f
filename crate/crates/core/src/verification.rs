//! Independent checks: a whole-line split-step reference, PDE and weak-form
//! residuals, extension independence and the smoothing harness.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryData, BoundaryPotential, Piece};
use crate::bourgain::{NormIndices, Range};
use crate::cutoffs::{extend_initial_datum, ExtensionMethod};
use crate::error::{domain, structural, Error, Result};
use crate::par;
use crate::solver::{picard_solve, ProblemData, Solution, SolverConfig};
use crate::spectral::{
    fft_plan, forward_transform, inverse_transform, sobolev_norm, GridFunction, SpaceTimeField, Spectrum,
    TimeSeries, UniformGrid, INV_SQRT_2PI,
};

/// One named check of a verification report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    /// Passes when `value < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value < tolerance }
    }

    /// Passes when `value ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }
}

/// Split-step reference for `u_t + ∂_x⁵u + u u_x = 0` on the periodic box.
pub struct SplitStep {
    grid: UniformGrid,
    xi: Vec<f64>,
    keep: Vec<bool>,
}

impl SplitStep {
    pub fn new(grid: UniformGrid) -> Self {
        let xi = grid.frequencies();
        // Two-thirds rule for the quadratic term.
        let cut = 2.0 / 3.0 * grid.nyquist();
        let keep = xi.iter().map(|k| k.abs() <= cut).collect();
        Self { grid, xi, keep }
    }

    fn burgers(&self, coeffs: &[C64]) -> Vec<C64> {
        let n = self.grid.count;
        let inv = fft_plan(n, true);
        let fwd = fft_plan(n, false);
        let mut u: Vec<C64> = coeffs.iter().zip(&self.keep).map(|(c, k)| if *k { *c } else { C64::new(0.0, 0.0) }).collect();
        inv.process(&mut u);
        for v in &mut u {
            // Unnormalised inverse: the square carries n².
            *v = *v * *v / (n as f64 * n as f64);
        }
        fwd.process(&mut u);
        u.iter()
            .zip(&self.xi)
            .zip(&self.keep)
            .map(|((c, k), keep)| if *keep { c * C64::new(0.0, -0.5 * k) } else { C64::new(0.0, 0.0) })
            .collect()
    }

    /// One Strang step of length `dt` on the raw FFT coefficients.
    fn step(&self, c: &mut [C64], dt: f64) {
        let half: Vec<C64> = self.xi.iter().map(|k| C64::from_polar(1.0, -0.5 * dt * k.powi(5))).collect();
        for (v, p) in c.iter_mut().zip(&half) {
            *v *= p;
        }
        let k1 = self.burgers(c);
        let mid: Vec<C64> = c.iter().zip(&k1).map(|(a, b)| a + b * (0.5 * dt)).collect();
        let k2 = self.burgers(&mid);
        for ((v, k), p) in c.iter_mut().zip(&k2).zip(&half) {
            *v = (*v + k * dt) * p;
        }
    }

    /// Evolves `g` and records it at every node `t ≥ 0` of `tgrid` up to
    /// `t_end`; other rows are zero. `substeps` steps per grid step.
    pub fn run(&self, g: &GridFunction, tgrid: UniformGrid, t_end: f64, substeps: usize) -> Result<SpaceTimeField> {
        self.grid.require_same(&g.grid, "oracle")?;
        if substeps == 0 {
            return Err(domain("substeps must be positive"));
        }
        let i0 = tgrid.index_of(0.0).ok_or_else(|| structural("oracle: time grid must contain 0"))?;
        let n = self.grid.count;
        let fwd = fft_plan(n, false);
        let inv = fft_plan(n, true);
        let mut c = g.values.clone();
        fwd.process(&mut c);
        let mut field = SpaceTimeField::zeros(self.grid, tgrid);
        let dt = tgrid.step / substeps as f64;
        let mut it = i0;
        loop {
            let mut row = c.clone();
            inv.process(&mut row);
            for (dst, v) in field.slice_mut(it).iter_mut().zip(&row) {
                *dst = v / n as f64;
            }
            if it + 1 >= tgrid.count || tgrid.point(it + 1) > t_end + 1e-12 {
                break;
            }
            for _ in 0..substeps {
                self.step(&mut c, dt);
            }
            it += 1;
        }
        Ok(field)
    }
}

/// Reference trajectory with a step-halving self-check: the run with twice
/// the substeps must agree to `tol` in space-time L².
pub fn whole_line_oracle(
    g: &GridFunction,
    tgrid: UniformGrid,
    t_end: f64,
    substeps: usize,
    tol: f64,
) -> Result<(SpaceTimeField, f64)> {
    let ss = SplitStep::new(g.grid);
    let coarse = ss.run(g, tgrid, t_end, substeps)?;
    let fine = ss.run(g, tgrid, t_end, 2 * substeps)?;
    let change = fine.sub(&coarse)?.l2_norm();
    if change >= tol {
        return Err(Error::Accuracy {
            message: format!("oracle step halving changes the output by {change:.3e} (limit {tol:.1e})"),
            estimates: vec![change],
        });
    }
    Ok((fine, change))
}

/// `∂_x^j v(0, t)` of every row of a periodic field.
pub fn spectral_traces(v: &SpaceTimeField) -> [TimeSeries; 3] {
    let nx = v.nx();
    let spectra = v.spatial_spectra();
    let xi = v.xgrid.frequencies();
    let scale = v.xgrid.freq_spacing() * INV_SQRT_2PI;
    let rows: Vec<[C64; 3]> = par::map_range(v.nt(), |it| {
        let row = &spectra[it * nx..(it + 1) * nx];
        [0u32, 1, 2].map(|j| row.iter().zip(&xi).map(|(c, k)| c * C64::new(0.0, *k).powu(j)).sum::<C64>() * scale)
    });
    [0, 1, 2].map(|j| TimeSeries::from_parts(v.tgrid, rows.iter().map(|r| r[j]).collect()))
}

/// Half-line problem manufactured from a whole-line solution: `g = G`,
/// `h_{j+1} = ∂_x^j v(0,·)` on `[0, t_end]` (zero elsewhere).
pub struct Manufactured {
    pub data: ProblemData,
    pub oracle: SpaceTimeField,
    pub oracle_change: f64,
}

pub fn manufactured_problem(
    big_g: &GridFunction,
    tgrid: UniformGrid,
    t_end: f64,
    substeps: usize,
    tol: f64,
) -> Result<Manufactured> {
    let (oracle, oracle_change) = whole_line_oracle(big_g, tgrid, t_end, substeps, tol)?;
    let h = spectral_traces(&oracle);
    let data = ProblemData { g: big_g.clone(), h: BoundaryData { h } };
    Ok(Manufactured { data, oracle, oracle_change })
}

/// Space-time rectangle `[x0, x1] × [t0, t1]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
}

/// L² norm over `window` of `u_t + ∂_x⁵u (+ u u_x) - forcing`, with `u_t`
/// from the centred fourth-order difference and `∂_x` spectral. Nodes
/// within two cells of the window or grid edges are excluded.
pub fn pde_residual(u: &SpaceTimeField, forcing: Option<&SpaceTimeField>, nonlinear: bool, window: Window) -> Result<f64> {
    if let Some(f) = forcing {
        f.xgrid.require_same(&u.xgrid, "forcing")?;
        f.tgrid.require_same(&u.tgrid, "forcing")?;
    }
    let (nx, nt) = (u.nx(), u.nt());
    let xi = u.xgrid.frequencies();
    let mut d5 = u.spatial_spectra();
    let mut d1 = d5.clone();
    par::for_each_chunk(&mut d5, nx, |_, row| {
        for (c, k) in row.iter_mut().zip(&xi) {
            *c *= C64::new(0.0, *k).powu(5);
        }
    });
    par::for_each_chunk(&mut d1, nx, |_, row| {
        for (c, k) in row.iter_mut().zip(&xi) {
            *c *= C64::new(0.0, *k);
        }
    });
    let d5 = SpaceTimeField::from_spatial_spectra(u.xgrid, u.tgrid, d5);
    let d1 = SpaceTimeField::from_spatial_spectra(u.xgrid, u.tgrid, d1);
    let dt = u.tgrid.step;
    let inside = |i: usize, n: usize, p: f64, lo: f64, hi: f64, h: f64| {
        i >= 2 && i + 2 < n && p >= lo + 2.0 * h - 1e-12 && p <= hi - 2.0 * h + 1e-12
    };
    let mut sum = 0.0;
    for it in 0..nt {
        let t = u.tgrid.point(it);
        if !inside(it, nt, t, window.t0, window.t1, dt) {
            continue;
        }
        for ix in 0..nx {
            let x = u.xgrid.point(ix);
            if !inside(ix, nx, x, window.x0, window.x1, u.xgrid.step) {
                continue;
            }
            let ut = ddt4(|k| u.at(ix, k), it, dt);
            let mut r = ut + d5.at(ix, it);
            if nonlinear {
                r += u.at(ix, it) * d1.at(ix, it);
            }
            if let Some(f) = forcing {
                r -= f.at(ix, it);
            }
            sum += r.norm_sqr();
        }
    }
    Ok((sum * dt * u.xgrid.step).sqrt())
}

/// Centred fourth-order first derivative at node `i`.
fn ddt4(f: impl Fn(usize) -> C64, i: usize, h: f64) -> C64 {
    ((f(i + 1) - f(i - 1)) * 8.0 - (f(i + 2) - f(i - 2))) / (12.0 * h)
}

/// `‖u_t + ∂_x⁵u‖` for a boundary potential on `x ∈ xs` (all ≥ 0), at the
/// data-grid nodes inside `[t0, t1]`: analytic `∂_x⁵`, centred fourth-order `u_t`.
pub fn boundary_potential_residual(bp: &BoundaryPotential, data_grid: UniformGrid, xs: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let dt = data_grid.step;
    let times: Vec<f64> = data_grid.points().into_iter().filter(|t| *t >= t0 - 2.5 * dt && *t <= t1 + 2.5 * dt).collect();
    if times.len() < 5 {
        return Err(domain("residual window holds fewer than five time nodes"));
    }
    let u = bp.columns(xs, &times, 0, Piece::All)?;
    let u5 = bp.columns(xs, &times, 5, Piece::All)?;
    let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
    let mut sum = 0.0;
    for (col, col5) in u.iter().zip(&u5) {
        for k in 2..times.len() - 2 {
            if times[k] < t0 - 1e-12 || times[k] > t1 + 1e-12 {
                continue;
            }
            let ut = ddt4(|i| col[i], k, dt);
            sum += (ut + col5[k]).norm_sqr();
        }
    }
    Ok((sum * dt * dx).sqrt())
}

/// Test function `φ(x,t) = (x/w)^{2+k}(1-(x/w)²)⁶ · (T-t) · (t/T)^m` on `[0,w]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TestFunction {
    pub k: u32,
    pub width: f64,
    pub m: u32,
}

impl TestFunction {
    /// `∂_x^n` of the spatial factor.
    pub fn space(&self, x: f64, n: u32) -> f64 {
        if !(0.0..=self.width).contains(&x) {
            return 0.0;
        }
        // Expand y^{2+k}(1-y²)⁶ = Σ_i C(6,i)(-1)^i y^{2+k+2i}.
        let y = x / self.width;
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=6u32 {
            let p = 2 + self.k + 2 * i;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            if p >= n {
                let mut fall = 1.0;
                for q in 0..n {
                    fall *= (p - q) as f64;
                }
                acc += sign * binom * fall * y.powi((p - n) as i32);
            }
            binom = binom * (6 - i) as f64 / (i + 1) as f64;
        }
        acc / self.width.powi(n as i32)
    }

    /// Time factor and its derivative.
    pub fn time(&self, t: f64, horizon: f64) -> (f64, f64) {
        let r = t / horizon;
        let rm = r.powi(self.m as i32);
        let drm = if self.m == 0 { 0.0 } else { self.m as f64 * r.powi(self.m as i32 - 1) / horizon };
        ((horizon - t) * rm, -rm + (horizon - t) * drm)
    }
}

/// The default family: `k ∈ {0,1,2}`, two widths, `m ∈ {0,1}`.
pub fn default_test_family(widths: [f64; 2]) -> Vec<TestFunction> {
    let mut v = Vec::new();
    for &width in &widths {
        for k in 0..3 {
            for m in 0..2 {
                v.push(TestFunction { k, width, m });
            }
        }
    }
    v
}

/// Fourth-order Gregory weights for `n` equally spaced nodes.
fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n < 8 {
        // Composite trapezoid for very short ranges.
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        return w;
    }
    let c = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for i in 0..3 {
        w[i] = c[i] * h;
        w[n - 1 - i] = c[i] * h;
    }
    w
}

/// Left-hand side of the generalized-solution identity for every member of
/// `family`, over `x ∈ [0, w]`, `t ∈ [0, T]`. Returns the maximum modulus.
pub fn weak_form_residual(
    u: &SpaceTimeField,
    data: &ProblemData,
    horizon: f64,
    family: &[TestFunction],
) -> Result<f64> {
    let (xg, tg) = (u.xgrid, u.tgrid);
    let ix0 = xg.index_of(0.0).ok_or_else(|| structural("weak form: x-grid must contain 0"))?;
    let it0 = tg.index_of(0.0).ok_or_else(|| structural("weak form: t-grid must contain 0"))?;
    let it1 = tg.index_of(horizon).ok_or_else(|| structural("weak form: T must be a time node"))?;
    data.h.grid().require_same(&tg, "weak form data")?;
    let nt = it1 - it0 + 1;
    let wt = gregory_weights(nt, tg.step);
    let mut worst: f64 = 0.0;
    for phi in family {
        // Constraint checks on the family itself.
        if phi.space(0.0, 0).abs() > 1e-12 || phi.space(0.0, 1).abs() > 1e-12 || phi.time(horizon, horizon).0.abs() > 1e-12 {
            return Err(structural(format!("test function {phi:?} violates the vanishing constraints")));
        }
        let ix1 = xg.index_of(phi.width).ok_or_else(|| structural(format!("weak form: width {} must be a grid node", phi.width)))?;
        let nxw = ix1 - ix0 + 1;
        let wx = gregory_weights(nxw, xg.step);
        let xs: Vec<f64> = (ix0..=ix1).map(|i| xg.point(i)).collect();
        let s0: Vec<f64> = xs.iter().map(|&x| phi.space(x, 0)).collect();
        let s1: Vec<f64> = xs.iter().map(|&x| phi.space(x, 1)).collect();
        let s5: Vec<f64> = xs.iter().map(|&x| phi.space(x, 5)).collect();
        let mut total = C64::new(0.0, 0.0);
        for (kt, it) in (it0..=it1).enumerate() {
            let t = tg.point(it);
            let (tf, dtf) = phi.time(t, horizon);
            let mut row = C64::new(0.0, 0.0);
            for (kx, ix) in (ix0..=ix1).enumerate() {
                let v = u.at(ix, it);
                let val = v * (dtf * s0[kx] + tf * s5[kx]) + v * v * (0.5 * tf * s1[kx]);
                row += val * wx[kx];
            }
            let bnd = data.h.h[0].values[it] * phi.space(0.0, 4) - data.h.h[1].values[it] * phi.space(0.0, 3)
                + data.h.h[2].values[it] * phi.space(0.0, 2);
            total += (row + bnd * tf) * wt[kt];
        }
        let (tf0, _) = phi.time(0.0, horizon);
        let init: C64 = (ix0..=ix1).enumerate().map(|(kx, ix)| data.g.values[ix] * (s0[kx] * tf0 * wx[kx])).sum();
        total += init;
        worst = worst.max(total.norm());
    }
    Ok(worst)
}

/// Smooth random field of unit maximum (sum of random Gaussians), for
/// sensitivity controls.
pub fn smooth_random_field(xgrid: UniformGrid, tgrid: UniformGrid, seed: u64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<[f64; 5]> = (0..8)
        .map(|_| {
            [
                rng.gen_range(0.0..0.4 * xgrid.length()),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
            ]
        })
        .collect();
    let f = SpaceTimeField::from_fn(xgrid, tgrid, move |x, t| {
        let v: f64 = bumps
            .iter()
            .map(|&[x0, t0, w, a, k]| a * (-((x - x0) / w).powi(2) - (t - t0).powi(2)).exp() * (k * x).cos())
            .sum();
        C64::new(v, 0.0)
    });
    let m = f.max_abs();
    f.scale(C64::new(1.0 / m, 0.0))
}

/// L² distance of two fields over `[0, x1] × [0, T]`.
pub fn restricted_distance(a: &SpaceTimeField, b: &SpaceTimeField, x1: f64, horizon: f64) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm_window(0.0, x1, 0.0, horizon))
}

/// A solver run labelled by its extension method and collar.
pub struct ExtensionRun {
    pub label: String,
    pub solution: Solution,
}

/// Solves once per `(method, collar)` pair and returns the largest pairwise
/// L² distance of the restrictions to `[0, x1] × [0, T]`.
pub fn extension_independence(
    data: &ProblemData,
    cfg: &SolverConfig,
    variants: &[(ExtensionMethod, f64)],
    x1: f64,
) -> Result<(f64, Vec<ExtensionRun>)> {
    if variants.len() < 2 {
        return Err(domain("extension independence needs at least two variants"));
    }
    let mut runs = Vec::new();
    let mut horizon = cfg.horizon;
    for (method, collar) in variants {
        let mut c = cfg.clone();
        c.extension = *method;
        c.boundary.collar = *collar;
        let (solver, solution) = picard_solve(data, &c)?;
        horizon = solver.horizon();
        runs.push(ExtensionRun { label: format!("{method:?}, collar {collar}"), solution });
    }
    let mut worst: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            worst = worst.max(restricted_distance(&runs[i].solution.u, &runs[j].solution.u, x1, horizon)?);
        }
    }
    Ok((worst, runs))
}

/// Least-squares slope of `log|f̂(ξ)|` against `log⟨ξ⟩` over `band`, using
/// the per-octave RMS of the spectrum (robust to individual zeros).
pub fn tail_slope(spec: &Spectrum, band: (f64, f64)) -> Result<f64> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo) {
        return Err(domain("tail band must satisfy 0 < lo < hi"));
    }
    let bins = 12usize;
    let ratio = (hi / lo).ln() / bins as f64;
    let mut pts = Vec::new();
    for b in 0..bins {
        let a = lo * (ratio * b as f64).exp();
        let c = lo * (ratio * (b + 1) as f64).exp();
        let vals: Vec<f64> = (0..spec.coeffs.len())
            .filter(|&k| {
                let x = spec.frequency(k).abs();
                x >= a && x < c
            })
            .map(|k| spec.coeffs[k].norm_sqr())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let rms = (vals.iter().sum::<f64>() / vals.len() as f64).sqrt();
        if rms > 0.0 {
            let mid = (a * c).sqrt();
            pts.push(((1.0 + mid).ln(), rms.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(domain("tail band holds fewer than three populated bins"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `H^σ(R⁺)` upper-bound norm of a time slice: zero outside `x ≥ 0`, then
/// extended with `method` and measured on the whole line.
pub fn halfline_upper(f: &GridFunction, sigma: f64, method: ExtensionMethod) -> Result<f64> {
    // Regularity exclusions do not apply to measurement indices.
    let s_ext = if (sigma - 0.5).abs() < 1e-9 || (sigma - 1.5).abs() < 1e-9 { sigma + 1e-6 } else { sigma };
    let ext = extend_initial_datum(f, s_ext.min(2.7), method)?;
    sobolev_norm(&ext.extension, sigma)
}

/// One row of the smoothing table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub a: f64,
    pub admissible: bool,
    /// `sup_t ‖N(t)‖_{H^{s+a}(R⁺)}` (upper-bound norm).
    pub nonlinear_norm: f64,
    pub linear_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub s: f64,
    pub rows: Vec<SmoothingRow>,
    pub band: (f64, f64),
    /// Fitted slopes; absent when the spectrum is empty in the band.
    pub slope_initial: Option<f64>,
    pub slope_nonlinear: Option<f64>,
    /// `slope_initial - slope_nonlinear ≥ 0.8·a` for the largest admissible `a`.
    pub slope_gain_holds: bool,
}

/// Evaluates the smoothing table. `linear` and `nonlinear` are the two parts
/// of a solution; time samples are the nodes in `[0, T]` with stride `stride`.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_report(
    g: &GridFunction,
    linear: &SpaceTimeField,
    nonlinear: &SpaceTimeField,
    indices: &NormIndices,
    horizon: f64,
    a_grid: &[f64],
    band: (f64, f64),
    stride: usize,
) -> Result<SmoothingReport> {
    let s = indices.s;
    let tg = nonlinear.tgrid;
    let method = ExtensionMethod::Reflection { collar: ExtensionMethod::DEFAULT_COLLAR };
    let rows_t: Vec<usize> =
        (0..tg.count).filter(|&i| tg.point(i) >= -1e-12 && tg.point(i) <= horizon + 1e-12).step_by(stride.max(1)).collect();
    let i0 = nonlinear.xgrid.index_of(0.0).ok_or_else(|| structural("smoothing: x-grid must contain 0"))?;
    let half = |f: &GridFunction| {
        let mut v = f.values.clone();
        for c in &mut v[..i0] {
            *c = C64::new(0.0, 0.0);
        }
        GridFunction::new(f.grid, v)
    };
    let mut rows = Vec::new();
    for &a in a_grid {
        let mut idx = *indices;
        idx.a = a;
        let admissible = idx.admissible(Range::SmoothingLow) || idx.admissible(Range::SmoothingGeneral);
        let mut nn: f64 = 0.0;
        let mut ln: f64 = 0.0;
        for &it in &rows_t {
            nn = nn.max(halfline_upper(&half(&nonlinear.time_slice(it))?, s + a, method)?);
            ln = ln.max(halfline_upper(&half(&linear.time_slice(it))?, s + a, method)?);
        }
        rows.push(SmoothingRow { a, admissible, nonlinear_norm: nn, linear_norm: ln });
    }
    let slope_initial = tail_slope(&forward_transform(g), band).ok();
    let last = *rows_t.last().ok_or_else(|| domain("no time samples in [0, T]"))?;
    let n_ext = extend_initial_datum(&half(&nonlinear.time_slice(last))?, 1.0, method)?;
    let slope_nonlinear = tail_slope(&forward_transform(&n_ext.extension), band).ok();
    let a_max = rows.iter().filter(|r| r.admissible).map(|r| r.a).fold(0.0, f64::max);
    let slope_gain_holds = match (slope_initial, slope_nonlinear) {
        (Some(si), Some(sn)) => si - sn >= 0.8 * a_max,
        _ => false,
    };
    Ok(SmoothingReport { s, rows, band, slope_initial, slope_nonlinear, slope_gain_holds })
}

/// Band-limited rough profile: spectrum `⟨ξ⟩^{-s-0.55}` with random phases
/// on `|ξ| ≤ band`, times a Gaussian envelope centred at `x0`. The scale is
/// fixed by the `|ξ| ≤ 1` part alone, so widening `band` only adds tail:
/// `amplitude = (2π)^{-1/2} Σ_{|ξ|≤1} |ĝ| dξ` before the envelope.
pub fn rough_tail_profile(grid: UniformGrid, s: f64, amplitude: f64, band: f64, x0: f64, width: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = |xi: f64| (1.0 + xi.abs()).powf(-s - 0.55);
    let low: f64 = (0..grid.count).map(|k| grid.frequency(k)).filter(|xi| xi.abs() <= 1.0).map(weight).sum::<f64>()
        * grid.freq_spacing()
        * INV_SQRT_2PI;
    let coeffs: Vec<C64> = (0..grid.count)
        .map(|k| {
            let xi = grid.frequency(k);
            // Draw for every mode so phases do not depend on `band`.
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            if xi.abs() <= band {
                C64::from_polar(amplitude / low * weight(xi), ph)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let raw: GridFunction = inverse_transform(&Spectrum { grid, coeffs });
    GridFunction::from_parts(
        grid,
        raw.values
            .iter()
            .zip(grid.points())
            .map(|(v, x)| C64::new(v.re * (-((x - x0) / width).powi(2) / 2.0).exp(), 0.0))
            .collect(),
    )
}

/// Random band-limited datum: coefficients uniform in the unit square
/// times `(1 - (ξ/band)²)⁴` on `|ξ| < band`. Coefficients are drawn in
/// frequency order, so the function depends on the box length but not on
/// the number of nodes.
pub fn random_band_limited(grid: UniformGrid, band: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dxi = grid.freq_spacing();
    let m = (band / dxi).ceil() as i64;
    let mut coeffs = vec![C64::new(0.0, 0.0); grid.count];
    for j in -m..=m {
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let y = j as f64 * dxi / band;
        if y.abs() < 1.0 {
            if let Some(k) = grid.frequency_index(j as f64 * dxi) {
                coeffs[k] = c * (1.0 - y * y).powi(4);
            }
        }
    }
    inverse_transform(&Spectrum { grid, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::PropagatorPlan;

    #[test]
    fn test_function_derivatives_match_differences() {
        let phi = TestFunction { k: 1, width: 5.0, m: 1 };
        let h = 1e-4;
        for x in [0.7, 2.0, 4.1] {
            for n in 0..5 {
                let fd = (phi.space(x + h, n) - phi.space(x - h, n)) / (2.0 * h);
                assert!((fd - phi.space(x, n + 1)).abs() < 1e-5 * (1.0 + fd.abs()), "n={n} x={x}");
            }
        }
        assert_eq!(phi.space(0.0, 0), 0.0);
        assert_eq!(phi.space(0.0, 1), 0.0);
        assert!(phi.space(5.0, 5).abs() < 1e-10);
        assert_eq!(phi.time(0.3, 0.3).0, 0.0);
    }

    #[test]
    fn gregory_is_exact_for_cubics() {
        let n = 21;
        let h = 0.1;
        let w = gregory_weights(n, h);
        let s: f64 = (0..n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
        assert!((s - 16.0f64 / 4.0 * 1.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn oracle_zero_and_first_order_regime() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(2.0, 256).unwrap();
        let z = SplitStep::new(xg).run(&GridFunction::zeros(xg), tg, 0.5, 4).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        // Small data: v - W g ≈ D(-½∂_x (W g)²) up to O(amplitude³).
        let g = GridFunction::from_real_fn(xg, |x| 1e-3 * (-x * x / 4.0).exp());
        let v = SplitStep::new(xg).run(&g, tg, 0.5, 4).unwrap();
        let plan = PropagatorPlan::new(xg);
        let free = plan.group_field(&g, tg).unwrap();
        let f = SpaceTimeField::from_fn(xg, tg, |_, _| C64::new(0.0, 0.0));
        let sq = free.zip_map(&f, |a, _| a * a);
        let spec = sq.spatial_spectra();
        let xi = xg.frequencies();
        let spec: Vec<C64> =
            spec.chunks(xg.count).flat_map(|row| row.iter().zip(&xi).map(|(c, k)| c * C64::new(0.0, -0.5 * k)).collect::<Vec<_>>()).collect();
        let forcing = SpaceTimeField::from_spatial_spectra(xg, tg, spec);
        let first = plan.duhamel_field(&forcing).unwrap();
        let it = tg.index_of(0.5).unwrap();
        let nl = v.time_slice(it).sub(&free.time_slice(it)).unwrap();
        let predicted = first.time_slice(it);
        let err = nl.sub(&predicted).unwrap().max_abs();
        assert!(predicted.max_abs() > 1e-8);
        assert!(err < 1e-2 * predicted.max_abs(), "{err} vs {}", predicted.max_abs());
    }

    #[test]
    fn oracle_is_second_order() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(2.0, 64).unwrap();
        let g = GridFunction::from_real_fn(xg, |x| 0.1 * (-x * x / 2.0).exp());
        let ss = SplitStep::new(xg);
        let runs: Vec<_> = [1, 2, 4].iter().map(|&m| ss.run(&g, tg, 0.5, m).unwrap()).collect();
        let e1 = runs[0].sub(&runs[1]).unwrap().l2_norm();
        let e2 = runs[1].sub(&runs[2]).unwrap().l2_norm();
        assert!((e1 / e2 - 4.0).abs() < 1.2, "{}", e1 / e2);
    }

    #[test]
    fn weak_form_of_zero_is_zero() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(4.0, 256).unwrap();
        let data = ProblemData { g: GridFunction::zeros(xg), h: BoundaryData::zeros(tg) };
        let u = SpaceTimeField::zeros(xg, tg);
        let r = weak_form_residual(&u, &data, 0.5, &default_test_family([5.0, 10.0])).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn weak_form_rejects_misplaced_width() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(4.0, 256).unwrap();
        let data = ProblemData { g: GridFunction::zeros(xg), h: BoundaryData::zeros(tg) };
        let u = SpaceTimeField::zeros(xg, tg);
        let fam = [TestFunction { k: 0, width: 5.1, m: 0 }];
        assert!(matches!(weak_form_residual(&u, &data, 0.5, &fam), Err(Error::Structural(_))));
    }

    #[test]
    fn smoothing_of_zero_data_is_zero() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(4.0, 256).unwrap();
        let z = SpaceTimeField::zeros(xg, tg);
        let idx = NormIndices::new(0.3, 0.46, 0.47, 0.51, 0.15);
        let rep = smoothing_report(&GridFunction::zeros(xg), &z, &z, &idx, 0.5, &[0.0, 0.15, 0.7], (0.5, 2.0), 8).unwrap();
        assert!(rep.rows.iter().all(|r| r.nonlinear_norm == 0.0 && r.linear_norm == 0.0));
        assert!(rep.rows[1].admissible);
        assert!(!rep.rows[2].admissible);
        assert!(rep.slope_initial.is_none());
    }

    #[test]
    fn free_field_residual_is_tiny() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(2.0, 2048).unwrap();
        let g = GridFunction::from_real_fn(xg, |x| (-x * x / 8.0).exp());
        let f = PropagatorPlan::new(xg).group_field(&g, tg).unwrap();
        let w = Window { x0: -15.0, x1: 15.0, t0: -0.8, t1: 0.8 };
        let r = pde_residual(&f, None, false, w).unwrap();
        // Fourth-order differences in t dominate.
        assert!(r < 1e-8, "{r}");
        let noise = smooth_random_field(xg, tg, 1);
        assert!(pde_residual(&noise, None, false, w).unwrap() > 1e-1);
    }

    #[test]
    fn tail_slope_of_power_law() {
        let grid = UniformGrid::centered(200.0, 4096).unwrap();
        let spec = Spectrum {
            grid,
            coeffs: (0..grid.count).map(|k| C64::new((1.0 + grid.frequency(k).abs()).powf(-1.3), 0.0)).collect(),
        };
        let s = tail_slope(&spec, (2.0, 20.0)).unwrap();
        assert!((s + 1.3).abs() < 0.02, "{s}");
    }
}
