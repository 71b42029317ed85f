//! The free group `e^{-t∂_x⁵}`, the Duhamel integral and traces at `x = 0`.

use num_complex::Complex64 as C64;

use crate::cutoffs::eta;
use crate::error::{domain, structural, Result};
use crate::par;
use crate::spectral::{
    forward_transform, fractional_time_norm, inverse_transform, sobolev_norm, transpose, GridFunction,
    SpaceTimeField, Spectrum, TimeSeries, UniformGrid, INV_SQRT_2PI,
};

/// Symbol data for one spatial grid.
#[derive(Clone, Debug)]
pub struct PropagatorPlan {
    pub grid: UniformGrid,
    pub xi: Vec<f64>,
    pub xi5: Vec<f64>,
    /// Modes with `|ξ|` above this value are zeroed before any multiplier.
    pub cap: Option<f64>,
}

impl PropagatorPlan {
    /// Plan without spectral truncation.
    pub fn new(grid: UniformGrid) -> Self {
        let xi = grid.frequencies();
        let xi5 = xi.iter().map(|x| x.powi(5)).collect();
        Self { grid, xi, xi5, cap: None }
    }

    /// Plan that drops modes above `fraction × Nyquist`.
    pub fn with_cap_fraction(grid: UniformGrid, fraction: f64) -> Self {
        let mut p = Self::new(grid);
        p.cap = Some(fraction * grid.nyquist());
        p
    }

    #[inline]
    pub fn keeps(&self, k: usize) -> bool {
        self.cap.map_or(true, |c| self.xi[k].abs() <= c)
    }

    /// Zeroes the modes above the cap.
    pub fn truncate(&self, coeffs: &mut [C64]) {
        for (k, c) in coeffs.iter_mut().enumerate() {
            if !self.keeps(k) {
                *c = C64::new(0.0, 0.0);
            }
        }
    }

    /// `W(t)g`: multiplies each mode by `e^{-itξ⁵}`.
    pub fn apply_group(&self, g: &GridFunction, t: f64) -> Result<GridFunction> {
        self.grid.require_same(&g.grid, "apply_group")?;
        let mut spec = forward_transform(g);
        self.evolve_spectrum(&mut spec.coeffs, t);
        Ok(inverse_transform(&spec))
    }

    pub(crate) fn evolve_spectrum(&self, coeffs: &mut [C64], t: f64) {
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = if self.keeps(k) { *c * C64::from_polar(1.0, -t * self.xi5[k]) } else { C64::new(0.0, 0.0) };
        }
    }

    /// `W(t)g` sampled on every node of `tgrid`.
    pub fn group_field(&self, g: &GridFunction, tgrid: UniformGrid) -> Result<SpaceTimeField> {
        self.grid.require_same(&g.grid, "group_field")?;
        let spec = forward_transform(g);
        let nx = self.grid.count;
        let mut spectra = vec![C64::new(0.0, 0.0); nx * tgrid.count];
        par::for_each_chunk(&mut spectra, nx, |it, row| {
            row.copy_from_slice(&spec.coeffs);
            self.evolve_spectrum(row, tgrid.point(it));
        });
        Ok(SpaceTimeField::from_spatial_spectra(self.grid, tgrid, spectra))
    }

    /// `∫_0^t W(t - t')F(t') dt'` on every node of `F`'s time grid
    /// (negative times integrate backwards from 0).
    pub fn duhamel_field(&self, f: &SpaceTimeField) -> Result<SpaceTimeField> {
        let spectra = self.duhamel_spectra(f)?;
        Ok(SpaceTimeField::from_spatial_spectra(self.grid, f.tgrid, spectra))
    }

    /// Spatial spectra of the Duhamel field, layout of [`SpaceTimeField`].
    pub(crate) fn duhamel_spectra(&self, f: &SpaceTimeField) -> Result<Vec<C64>> {
        self.grid.require_same(&f.xgrid, "duhamel")?;
        let tg = f.tgrid;
        let i0 = tg.index_of(0.0).ok_or_else(|| structural("duhamel: the time grid must contain t = 0"))?;
        let (nx, nt) = (f.nx(), f.nt());
        let spectra = f.spatial_spectra();
        let mut modes = transpose(&spectra, nt, nx);
        let spline = SplineFactor::new(nt);
        par::for_each_chunk(&mut modes, nt, |k, series| {
            if !self.keeps(k) {
                series.fill(C64::new(0.0, 0.0));
                return;
            }
            let out = duhamel_mode(series, self.xi5[k], tg.step, i0, &spline);
            series.copy_from_slice(&out);
        });
        Ok(transpose(&modes, nx, nt))
    }

    /// Duhamel integral at a single time `t` inside `F`'s time grid.
    pub fn duhamel(&self, f: &SpaceTimeField, t: f64) -> Result<GridFunction> {
        self.grid.require_same(&f.xgrid, "duhamel")?;
        let tg = f.tgrid;
        if t < tg.origin || t > tg.end() {
            return Err(domain(format!("duhamel: t = {t} outside [{}, {}]", tg.origin, tg.end())));
        }
        let i0 = tg.index_of(0.0).ok_or_else(|| structural("duhamel: the time grid must contain t = 0"))?;
        let (nx, nt) = (f.nx(), f.nt());
        let spectra = f.spatial_spectra();
        let modes = transpose(&spectra, nt, nx);
        let spline = SplineFactor::new(nt);
        let h = tg.step;
        let coeffs: Vec<C64> = par::map_range(nx, |k| {
            if !self.keeps(k) {
                return C64::new(0.0, 0.0);
            }
            let series = &modes[k * nt..(k + 1) * nt];
            let omega = self.xi5[k];
            let d = duhamel_mode(series, omega, h, i0, &spline);
            let r = (t - tg.origin) / h;
            let mut n = r.floor() as usize;
            if n >= nt - 1 {
                n = nt - 2;
            }
            let tau = t - tg.point(n);
            if tau.abs() < 1e-14 * h {
                return d[n];
            }
            let m = spline.second_derivatives(series, h);
            let c = panel_poly(series[n], series[n + 1], m[n], m[n + 1], h);
            let lam = tau / h;
            // D(t_n + τ) = e^{-iωτ} D(t_n) + ∫_0^τ e^{-iω(τ-s)} S(s) ds.
            let g = moment_set(C64::new(0.0, -omega * tau));
            let mut acc = C64::new(0.0, 0.0);
            let mut lp = 1.0;
            for (ck, gk) in c.iter().zip(&g) {
                acc += ck * gk * lp;
                lp *= lam;
            }
            d[n] * C64::from_polar(1.0, -omega * tau) + acc * tau
        });
        Ok(inverse_transform(&Spectrum { grid: self.grid, coeffs }))
    }
}

/// Factorization of the natural cubic spline system on a uniform grid.
pub(crate) struct SplineFactor {
    cprime: Vec<f64>,
    denom: Vec<f64>,
}

impl SplineFactor {
    pub(crate) fn new(n: usize) -> Self {
        // Interior unknowns M_1..M_{n-2}: M_{i-1} + 4M_i + M_{i+1} = rhs_i.
        let m = n.saturating_sub(2);
        let mut cprime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        for i in 0..m {
            let prev = if i == 0 { 0.0 } else { cprime[i - 1] };
            denom[i] = 4.0 - prev;
            cprime[i] = 1.0 / denom[i];
        }
        Self { cprime, denom }
    }

    /// Second derivatives of the natural cubic spline through `y`.
    pub(crate) fn second_derivatives(&self, y: &[C64], h: f64) -> Vec<C64> {
        let n = y.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        if n < 3 {
            return out;
        }
        let m = n - 2;
        let scale = 6.0 / (h * h);
        let mut d = vec![C64::new(0.0, 0.0); m];
        for i in 0..m {
            let rhs = (y[i + 2] - y[i + 1] * 2.0 + y[i]) * scale;
            let prev = if i == 0 { C64::new(0.0, 0.0) } else { d[i - 1] };
            d[i] = (rhs - prev) / self.denom[i];
        }
        for i in (0..m).rev() {
            let next = if i + 1 < m { out[i + 2] } else { C64::new(0.0, 0.0) };
            out[i + 1] = d[i] - next * self.cprime[i];
        }
        out
    }
}

/// `G_k(z) = ∫_0^1 e^{z(1-u)} u^k du` for `k = 0..3`.
pub(crate) fn moment_set(z: C64) -> [C64; 4] {
    // E_j(z) = ∫_0^1 e^{zφ} φ^j dφ.
    let mut e = [C64::new(0.0, 0.0); 4];
    if z.norm() < 1.0 {
        let mut term = C64::new(1.0, 0.0);
        for m in 0..30 {
            for (j, ej) in e.iter_mut().enumerate() {
                *ej += term / (m + j + 1) as f64;
            }
            term = term * z / (m + 1) as f64;
        }
    } else {
        let ez = z.exp();
        e[0] = (ez - 1.0) / z;
        for j in 1..4 {
            e[j] = (ez - e[j - 1] * j as f64) / z;
        }
    }
    [
        e[0],
        e[0] - e[1],
        e[0] - e[1] * 2.0 + e[2],
        e[0] - e[1] * 3.0 + e[2] * 3.0 - e[3],
    ]
}

/// Power-basis coefficients of the spline on one panel in `θ = s/h`.
fn panel_poly(y0: C64, y1: C64, m0: C64, m1: C64, h: f64) -> [C64; 4] {
    let h2 = h * h;
    [y0, y1 - y0 - (m0 * 2.0 + m1) * (h2 / 6.0), m0 * (h2 / 2.0), (m1 - m0) * (h2 / 6.0)]
}

/// Mode-wise Duhamel integral on all nodes: exact phase, cubic-spline source.
fn duhamel_mode(y: &[C64], omega: f64, h: f64, i0: usize, spline: &SplineFactor) -> Vec<C64> {
    let n = y.len();
    let m = spline.second_derivatives(y, h);
    let g = moment_set(C64::new(0.0, -omega * h));
    let rot = C64::from_polar(1.0, -omega * h);
    let panel = |k: usize| -> C64 {
        let c = panel_poly(y[k], y[k + 1], m[k], m[k + 1], h);
        (c[0] * g[0] + c[1] * g[1] + c[2] * g[2] + c[3] * g[3]) * h
    };
    let mut d = vec![C64::new(0.0, 0.0); n];
    for k in i0..n - 1 {
        d[k + 1] = d[k] * rot + panel(k);
    }
    let back = rot.conj();
    for k in (0..i0).rev() {
        d[k] = (d[k + 1] - panel(k)) * back;
    }
    d
}

/// Anything whose spatial spectrum can be sampled at a given time.
pub trait TraceSource {
    fn spectrum_at(&self, t: f64) -> Result<Spectrum>;
}

/// `W(t)g` with the spectrum of `g` computed once.
pub struct FreeEvolution<'a> {
    plan: &'a PropagatorPlan,
    ghat: Spectrum,
}

impl<'a> FreeEvolution<'a> {
    pub fn new(plan: &'a PropagatorPlan, g: &GridFunction) -> Result<Self> {
        plan.grid.require_same(&g.grid, "free evolution")?;
        Ok(Self { plan, ghat: forward_transform(g) })
    }
}

impl TraceSource for FreeEvolution<'_> {
    fn spectrum_at(&self, t: f64) -> Result<Spectrum> {
        let mut s = self.ghat.clone();
        self.plan.evolve_spectrum(&mut s.coeffs, t);
        Ok(s)
    }
}

impl TraceSource for SpaceTimeField {
    fn spectrum_at(&self, t: f64) -> Result<Spectrum> {
        let it = self
            .tgrid
            .index_of(t)
            .ok_or_else(|| domain(format!("field has no time node at t = {t}")))?;
        Ok(forward_transform(&self.time_slice(it)))
    }
}

/// `η(t) ∂_x^j u(0, t)` by exact spectral summation.
pub fn trace_at_origin(
    source: &impl TraceSource,
    plan: &PropagatorPlan,
    j: u32,
    tgrid: UniformGrid,
) -> Result<TimeSeries> {
    if j > 2 {
        return Err(domain(format!("trace order j = {j} must be 0, 1 or 2")));
    }
    let values = (0..tgrid.count)
        .map(|it| {
            let t = tgrid.point(it);
            let w = eta(t);
            if w == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            let spec = source.spectrum_at(t)?;
            Ok(spectral_trace(plan, &spec.coeffs, j) * w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeSeries::from_parts(tgrid, values))
}

/// `∂_x^j u(0)` from the spatial spectrum.
pub(crate) fn spectral_trace(plan: &PropagatorPlan, coeffs: &[C64], j: u32) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        if plan.keeps(k) {
            acc += c * C64::new(0.0, plan.xi[k]).powu(j);
        }
    }
    acc * (plan.grid.freq_spacing() * INV_SQRT_2PI)
}

/// Traces of `η(t)∂^j_x` for all three orders from a field's spatial spectra
/// (layout of [`SpaceTimeField`]).
pub(crate) fn traces_from_spectra(
    plan: &PropagatorPlan,
    spectra: &[C64],
    tgrid: UniformGrid,
) -> [TimeSeries; 3] {
    let nx = plan.grid.count;
    let rows: Vec<[C64; 3]> = par::map_range(tgrid.count, |it| {
        let w = eta(tgrid.point(it));
        if w == 0.0 {
            return [C64::new(0.0, 0.0); 3];
        }
        let row = &spectra[it * nx..(it + 1) * nx];
        [0, 1, 2].map(|j| spectral_trace(plan, row, j) * w)
    });
    [0, 1, 2].map(|j| TimeSeries::from_parts(tgrid, rows.iter().map(|r| r[j]).collect()))
}

/// `‖η ∂_x^j W(·)g (0)‖_{H^{(s+2-j)/5}(R_t)} / ‖g‖_{H^s}`.
pub fn kato_smoothing_ratio(
    plan: &PropagatorPlan,
    g: &GridFunction,
    s: f64,
    j: u32,
    tgrid: UniformGrid,
) -> Result<f64> {
    crate::spectral::check_index(s, "Sobolev index")?;
    let den = sobolev_norm(g, s)?;
    if den == 0.0 {
        return Err(domain("Kato ratio of the zero function"));
    }
    let trace = trace_at_origin(&FreeEvolution::new(plan, g)?, plan, j, tgrid)?;
    Ok(fractional_time_norm(&trace, (s + 2.0 - j as f64) / 5.0)? / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mode_grid() -> UniformGrid {
        UniformGrid::new(0.0, 2.0 * PI / 32.0, 32).unwrap()
    }

    #[test]
    fn identity_at_time_zero_and_single_mode_phase() {
        let g = mode_grid();
        let plan = PropagatorPlan::new(g);
        let f = GridFunction::from_fn(g, |x| C64::from_polar(1.0, 2.0 * x));
        let same = plan.apply_group(&f, 0.0).unwrap();
        assert!(same.sub(&f).unwrap().max_abs() < 1e-14);
        let out = plan.apply_group(&f, 0.01).unwrap();
        let expect = f.scale(C64::from_polar(1.0, -0.32));
        assert!(out.sub(&expect).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn isometry_on_gaussian() {
        let g = UniformGrid::centered(80.0, 2048).unwrap();
        let plan = PropagatorPlan::new(g);
        let f = GridFunction::from_real_fn(g, |x| (-x * x / 2.0).exp());
        for s in [0.0, 0.3, 1.0, 2.6] {
            let a = sobolev_norm(&f, s).unwrap();
            let b = sobolev_norm(&plan.apply_group(&f, 0.37).unwrap(), s).unwrap();
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    fn const_source(xg: UniformGrid, tg: UniformGrid, xi0: f64) -> SpaceTimeField {
        SpaceTimeField::from_fn(xg, tg, move |x, _| C64::from_polar(1.0, xi0 * x))
    }

    #[test]
    fn duhamel_of_constant_in_x_is_t() {
        let xg = mode_grid();
        let tg = UniformGrid::centered(4.0, 128).unwrap();
        let plan = PropagatorPlan::new(xg);
        let f = const_source(xg, tg, 0.0);
        for t in [0.0, 0.3, 1.234, 1.9] {
            let d = plan.duhamel(&f, t).unwrap();
            assert!(d.values.iter().all(|v| (v - t).norm() < 1e-12), "t={t}");
        }
        assert!(plan.duhamel(&f, 3.0).is_err());
    }

    #[test]
    fn duhamel_single_mode_closed_form() {
        let xg = mode_grid();
        let tg = UniformGrid::centered(4.0, 256).unwrap();
        let plan = PropagatorPlan::new(xg);
        let xi0: f64 = 2.0;
        let f = const_source(xg, tg, xi0);
        let w = xi0.powi(5);
        let field = plan.duhamel_field(&f).unwrap();
        for t in [0.25, 0.7, 1.3, 1.98] {
            let exact = C64::from_polar(1.0, -t * w) * (C64::from_polar(1.0, t * w) - 1.0) / C64::new(0.0, w);
            let d = plan.duhamel(&f, t).unwrap();
            let x1 = xg.point(3);
            let got = d.values[3] * C64::from_polar(1.0, -xi0 * x1);
            assert!((got - exact).norm() < 1e-9, "t={t}: {got} vs {exact}");
            if let Some(it) = tg.index_of(t) {
                let g2 = field.at(3, it) * C64::from_polar(1.0, -xi0 * x1);
                assert!((g2 - exact).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn duhamel_residual_is_small_for_smooth_forcing() {
        let xg = UniformGrid::centered(40.0, 256).unwrap();
        let tg = UniformGrid::centered(4.0, 512).unwrap();
        let plan = PropagatorPlan::new(xg);
        let f = SpaceTimeField::from_fn(xg, tg, |x, t| {
            C64::new((-(x * x) / 8.0).exp() * (-(t - 0.4) * (t - 0.4) * 4.0).exp(), 0.0)
        });
        let delta = 1e-3;
        let t = 0.5;
        let d = |s: f64| plan.duhamel(&f, s).unwrap();
        let dt = d(t - 2.0 * delta)
            .scale(C64::new(1.0 / (12.0 * delta), 0.0))
            .sub(&d(t - delta).scale(C64::new(8.0 / (12.0 * delta), 0.0)))
            .unwrap()
            .add(&d(t + delta).scale(C64::new(8.0 / (12.0 * delta), 0.0)))
            .unwrap()
            .sub(&d(t + 2.0 * delta).scale(C64::new(1.0 / (12.0 * delta), 0.0)))
            .unwrap();
        let d5 = crate::spectral::spectral_derivative(&d(t), 5);
        let ft = GridFunction::from_real_fn(xg, |x| (-(x * x) / 8.0).exp() * (-(t - 0.4f64).powi(2) * 4.0).exp());
        let res = dt.add(&d5).unwrap().sub(&ft).unwrap();
        assert!(res.l2_norm() < 1e-6, "{}", res.l2_norm());
    }

    #[test]
    fn spline_reproduces_cubics_in_the_interior() {
        let n = 40;
        let h = 0.1;
        let y: Vec<C64> = (0..n).map(|k| C64::new((k as f64 * h).powi(2), 0.0)).collect();
        let m = SplineFactor::new(n).second_derivatives(&y, h);
        assert!((m[n / 2].re - 2.0).abs() < 1e-6);
        assert_eq!(m[0].norm(), 0.0);
    }

    #[test]
    fn moments_agree_across_branches() {
        let a = moment_set(C64::new(0.0, 0.999_999));
        let b = moment_set(C64::new(0.0, 1.000_001));
        for k in 0..4 {
            assert!((a[k] - b[k]).norm() < 1e-5);
        }
        let m = moment_set(C64::new(0.0, 0.0));
        for k in 0..4 {
            assert!((m[k].re - 1.0 / (k + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn traces_of_gaussian_and_single_mode() {
        let xg = UniformGrid::centered(80.0, 2048).unwrap();
        let tg = UniformGrid::centered(8.0, 1024).unwrap();
        let plan = PropagatorPlan::new(xg);
        let g = GridFunction::from_real_fn(xg, |x| (-(x - 0.3) * (x - 0.3)).exp());
        let tr = trace_at_origin(&FreeEvolution::new(&plan, &g).unwrap(), &plan, 0, tg).unwrap();
        assert!((tr.at(0.0).unwrap().re - (-0.09f64).exp()).abs() < 1e-13);
        assert!(trace_at_origin(&FreeEvolution::new(&plan, &g).unwrap(), &plan, 3, tg).is_err());

        let mg = mode_grid();
        let mplan = PropagatorPlan::new(mg);
        let xi = 3.0;
        let f = GridFunction::from_fn(mg, |x| C64::from_polar(1.0, xi * x));
        let tr = trace_at_origin(&FreeEvolution::new(&mplan, &f).unwrap(), &mplan, 1, tg).unwrap();
        for (it, v) in tr.values.iter().enumerate() {
            let t = tg.point(it);
            let exact = C64::new(0.0, xi) * C64::from_polar(eta(t), -t * xi.powi(5));
            assert!((v - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn kato_ratio_is_scale_invariant() {
        let xg = UniformGrid::centered(80.0, 1024).unwrap();
        let tg = UniformGrid::centered(8.0, 1024).unwrap();
        let plan = PropagatorPlan::new(xg);
        let g = GridFunction::from_real_fn(xg, |x| (-x * x / 2.0).exp());
        let r = kato_smoothing_ratio(&plan, &g, 0.0, 0, tg).unwrap();
        let rc = kato_smoothing_ratio(&plan, &g.scale(C64::new(-3.0, 2.0)), 0.0, 0, tg).unwrap();
        assert!((r - rc).abs() < 1e-10 * r);
        assert!((r - KATO_GAUSSIAN_00).abs() < 1e-6, "{r}");
        assert!(kato_smoothing_ratio(&plan, &GridFunction::zeros(xg), 0.0, 0, tg).is_err());
    }
    const KATO_GAUSSIAN_00: f64 = 0.945_859_880_773_943_7;

    proptest! {
        #[test]
        fn group_law(t1 in -2.0f64..2.0, t2 in -2.0f64..2.0, c in 0.5f64..3.0) {
            let g = UniformGrid::centered(40.0, 256).unwrap();
            let plan = PropagatorPlan::new(g);
            let f = GridFunction::from_fn(g, |x| C64::new((-x * x / c).exp(), x * (-x * x).exp()));
            let a = plan.apply_group(&plan.apply_group(&f, t1).unwrap(), t2).unwrap();
            let b = plan.apply_group(&f, t1 + t2).unwrap();
            prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        }

        #[test]
        fn traces_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let xg = UniformGrid::centered(40.0, 256).unwrap();
            let tg = UniformGrid::centered(4.0, 64).unwrap();
            let plan = PropagatorPlan::new(xg);
            let f = GridFunction::from_real_fn(xg, |x| (-x * x).exp());
            let g = GridFunction::from_real_fn(xg, |x| x * (-x * x / 3.0).exp());
            let comb = f.scale(C64::new(a, 0.0)).add(&g.scale(C64::new(b, 0.0))).unwrap();
            for j in 0..3 {
                let tf = trace_at_origin(&FreeEvolution::new(&plan, &f).unwrap(), &plan, j, tg).unwrap();
                let tgg = trace_at_origin(&FreeEvolution::new(&plan, &g).unwrap(), &plan, j, tg).unwrap();
                let tc = trace_at_origin(&FreeEvolution::new(&plan, &comb).unwrap(), &plan, j, tg).unwrap();
                let lin = tf.scale(C64::new(a, 0.0)).add(&tgg.scale(C64::new(b, 0.0))).unwrap();
                prop_assert!(tc.sub(&lin).unwrap().max_abs() < 1e-12);
            }
        }
    }
}
