//! The integral operator `Γ_T`, its Picard iteration and the split of the
//! fixed point into linear and nonlinear parts.
//!
//! ```text
//! Γ_T u = η(t) W(t) g_l + η(t) ∫_0^t W(t-t') F_T(u)(t') dt' + η(t) W_0(h - p)
//! F_T(u) = η(t/2T) (-½ ∂_x u²)
//! p_{j+1}(t) = ∂_x^j [η W g_l + η ∫ W F_T(u)](0, t) = q_{j+1} + r_{j+1}
//! ```
//!
//! The boundary data `h - p` are continued by zero to `t < 0` and multiplied
//! by `η(t/2T)` before the potential is assembled. Since `W_0` is linear,
//! `Γ_T u = L + N(u)` with the fixed linear part `L = η W g_l + η W_0(h - q)`
//! and `N(u) = η D(F_T u) - η W_0(r)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryData, BoundaryOptions, BoundaryPotential, EvalExtent};
use crate::bourgain::{xsba_norm, NormIndices, Range};
use crate::cutoffs::{
    check_compatibility, check_regularity, eta, extend_initial_datum, zero_extend_time, BumpSide, BumpSpec,
    CompatibilityReport, ExtensionMethod, ExtensionReport,
};
use crate::error::{domain, structural, Error, Result};
use crate::par;
use crate::propagator::{traces_from_spectra, PropagatorPlan};
use crate::spectral::{
    forward_transform, fractional_time_norm, sobolev_norm, GridFunction, SpaceTimeField, TimeSeries, UniformGrid,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub indices: NormIndices,
    /// Horizon `T ∈ (0, 1/2]`, snapped to the time step.
    pub horizon: f64,
    pub max_iter: usize,
    /// Target for `‖u_{k+1} - u_k‖` in `X^{s,b,α}`.
    pub fp_tol: f64,
    /// Spatial cap as a fraction of the Nyquist frequency.
    pub cap_fraction: f64,
    /// Fraction of the time Nyquist frequency that `ξ⁵` may reach below the cap.
    pub time_cap_fraction: f64,
    /// Width of the band near each end of the x-box where `F_T` is tapered off.
    pub taper: f64,
    pub extension: ExtensionMethod,
    pub boundary: BoundaryOptions,
    pub xgrid: UniformGrid,
    pub tgrid: UniformGrid,
}

impl SolverConfig {
    pub fn new(indices: NormIndices, horizon: f64, xgrid: UniformGrid, tgrid: UniformGrid) -> Self {
        Self {
            indices,
            horizon,
            max_iter: 40,
            fp_tol: 1e-9,
            cap_fraction: 0.75,
            time_cap_fraction: 0.5,
            taper: xgrid.length() / 8.0,
            extension: ExtensionMethod::default_for(indices.s),
            // Duhamel traces kink at t = 0, so their time spectra decay only
            // like τ⁻²; the floor guards against gross under-resolution.
            boundary: BoundaryOptions { spectral_floor: 1e-4, ..Default::default() },
            xgrid,
            tgrid,
        }
    }

    /// Checks the index ranges and grid layout, snapping `T` to the time step.
    pub fn validate(&mut self) -> Result<()> {
        check_regularity(self.indices.s)?;
        self.indices.require(Range::Contraction)?;
        if !(self.horizon > 0.0 && self.horizon <= 0.5) {
            return Err(domain(format!("horizon T = {} must lie in (0, 1/2]", self.horizon)));
        }
        if self.max_iter == 0 || !(self.fp_tol > 0.0) {
            return Err(domain("max_iter and fp_tol must be positive"));
        }
        if !(self.cap_fraction > 0.0 && self.cap_fraction <= 1.0)
            || !(self.time_cap_fraction > 0.0 && self.time_cap_fraction <= 1.0)
        {
            return Err(domain("cap fractions must lie in (0, 1]"));
        }
        let (xg, tg) = (self.xgrid, self.tgrid);
        if xg.index_of(0.0).is_none() || tg.index_of(0.0).is_none() {
            return Err(structural("both grids must contain 0 as a node"));
        }
        if tg.origin > -1.0 - tg.step || tg.end() < 1.0 + tg.step {
            return Err(structural("the time grid must cover the support [-1, 1] of the cutoff with room to spare"));
        }
        if !(self.taper >= 0.0 && self.taper < 0.25 * xg.length()) {
            return Err(domain("taper must lie in [0, L/4)"));
        }
        let steps = (self.horizon / tg.step).round();
        if steps < 1.0 {
            return Err(domain(format!("horizon T = {} is below the time step {}", self.horizon, tg.step)));
        }
        self.horizon = steps * tg.step;
        Ok(())
    }

    /// Spatial frequency cap of the nonlinear term.
    pub fn cap(&self) -> f64 {
        (self.cap_fraction * self.xgrid.nyquist()).min((self.time_cap_fraction * self.tgrid.nyquist()).powf(0.2))
    }
}

/// Initial datum (samples on the whole x-grid, only `x ≥ 0` is read) and
/// boundary data on the solver's time grid.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub g: GridFunction,
    pub h: BoundaryData,
}

/// Observability of the Picard iteration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `‖u_k‖_{X^{s,b,α}}` for `k = 1, 2, …`.
    pub norms: Vec<f64>,
    /// `‖u_{k+1} - u_k‖_{X^{s,b,α}}`.
    pub diffs: Vec<f64>,
    /// `diffs[k] / diffs[k-1]`.
    pub factors: Vec<f64>,
    /// `‖u - Γ_T u‖_{X^{s,b,α}}` for the returned iterate.
    pub residual: Option<f64>,
    pub converged: bool,
}

/// `p_{j+1} = q_{j+1} + r_{j+1}`: traces of the free and Duhamel terms.
#[derive(Clone, Debug)]
pub struct TraceDecomposition {
    pub q: [TimeSeries; 3],
    pub r: [TimeSeries; 3],
    pub p: [TimeSeries; 3],
}

impl TraceDecomposition {
    fn new(q: [TimeSeries; 3], r: [TimeSeries; 3]) -> Result<Self> {
        let p = [q[0].add(&r[0])?, q[1].add(&r[1])?, q[2].add(&r[2])?];
        Ok(Self { q, r, p })
    }
}

/// One evaluation of `Γ_T`.
#[derive(Clone, Debug)]
pub struct GammaEval {
    pub total: SpaceTimeField,
    pub nonlinear: SpaceTimeField,
    pub r: [TimeSeries; 3],
    /// Trace of `∂_x^j Γ_T u` at `x = 0`.
    pub traces: [TimeSeries; 3],
    pub zero_extension_warnings: Vec<String>,
}

/// Precomputed pieces that do not depend on the iterate.
pub struct Solver {
    pub cfg: SolverConfig,
    pub data: ProblemData,
    pub plan: PropagatorPlan,
    pub extension: ExtensionReport,
    pub compatibility: CompatibilityReport,
    pub linear: SpaceTimeField,
    pub q: [TimeSeries; 3],
    linear_traces: [TimeSeries; 3],
    taper: Vec<f64>,
    extent: EvalExtent,
    warnings: Vec<String>,
}

/// `F_T(u) = η(t/2T)(-½ ∂_x(w u²))` with the plan's cap applied to `u` and
/// to the result; `w` is a spatial taper (pass all ones for none).
pub fn nonlinearity_ft(u: &SpaceTimeField, horizon: f64, plan: &PropagatorPlan, taper: &[f64]) -> Result<SpaceTimeField> {
    plan.grid.require_same(&u.xgrid, "nonlinearity")?;
    if taper.len() != u.nx() {
        return Err(structural("taper length must match the x-grid"));
    }
    let nx = u.nx();
    let tg = u.tgrid;
    let fwd = u.spatial_spectra();
    let mut spectra = fwd;
    par::for_each_chunk(&mut spectra, nx, |_, row| plan.truncate(row));
    let mut sq = SpaceTimeField::from_spatial_spectra(u.xgrid, tg, spectra);
    par::for_each_chunk(&mut sq.values, nx, |it, row| {
        let w = eta(tg.point(it) / (2.0 * horizon));
        for (v, tw) in row.iter_mut().zip(taper) {
            *v = if w == 0.0 { C64::new(0.0, 0.0) } else { *v * *v * (tw * w) };
        }
    });
    let mut spec = sq.spatial_spectra();
    par::for_each_chunk(&mut spec, nx, |_, row| {
        for (k, c) in row.iter_mut().enumerate() {
            *c = if plan.keeps(k) { *c * C64::new(0.0, -0.5 * plan.xi[k]) } else { C64::new(0.0, 0.0) };
        }
    });
    Ok(SpaceTimeField::from_spatial_spectra(u.xgrid, tg, spec))
}

fn scale_rows_by_eta(f: &mut SpaceTimeField) {
    let nx = f.nx();
    let tg = f.tgrid;
    par::for_each_chunk(&mut f.values, nx, |it, row| {
        let w = eta(tg.point(it));
        for v in row.iter_mut() {
            *v *= w;
        }
    });
}

impl Solver {
    pub fn new(data: ProblemData, mut cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let (xg, tg) = (cfg.xgrid, cfg.tgrid);
        data.g.grid.require_same(&xg, "initial datum")?;
        data.h.grid().require_same(&tg, "boundary data")?;
        let s = cfg.indices.s;
        let compatibility = check_compatibility(&data.g, [&data.h.h[0], &data.h.h[1], &data.h.h[2]], s)?;
        if !compatibility.pass {
            return Err(Error::Precondition(format!(
                "corner compatibility fails for s = {s}: gaps {:?} exceed {:.1e}",
                compatibility.measured_gaps, compatibility.tolerance
            )));
        }
        let extension = extend_initial_datum(&data.g, s, cfg.extension)?;
        let mut plan = PropagatorPlan::new(xg);
        plan.cap = Some(cfg.cap());

        let taper = if cfg.taper > 0.0 {
            let half = 0.5 * xg.length();
            let bump = BumpSpec::new(half - cfg.taper, half - 0.25 * cfg.taper, BumpSide::TwoSided)?;
            xg.points().iter().map(|&x| bump.value(x)).collect()
        } else {
            vec![1.0; xg.count]
        };
        let extent = EvalExtent { x_abs_max: xg.origin.abs().max(xg.end().abs()), t_min: -1.0, t_max: 1.0 };

        // Free part and its traces.
        let ghat = forward_transform(&extension.extension);
        let nx = xg.count;
        let mut spectra = vec![C64::new(0.0, 0.0); nx * tg.count];
        par::for_each_chunk(&mut spectra, nx, |it, row| {
            row.copy_from_slice(&ghat.coeffs);
            plan.evolve_spectrum(row, tg.point(it));
        });
        let q = traces_from_spectra(&plan, &spectra, tg);
        let mut free = SpaceTimeField::from_spatial_spectra(xg, tg, spectra);
        scale_rows_by_eta(&mut free);

        let mut me = Self {
            cfg,
            data,
            plan,
            extension,
            compatibility,
            linear: free,
            q: q.clone(),
            linear_traces: q.clone(),
            taper,
            extent,
            warnings: Vec::new(),
        };
        let hq = me.data.h.sub(&BoundaryData { h: q })?;
        let (w_lin, w_traces, warn) = me.boundary_term(&hq)?;
        me.warnings = warn;
        me.linear = me.linear.add(&w_lin)?;
        me.linear_traces = [0, 1, 2].map(|j| me.q[j].add(&w_traces[j]).expect("same grid"));
        Ok(me)
    }

    pub fn horizon(&self) -> f64 {
        self.cfg.horizon
    }

    pub fn taper(&self) -> &[f64] {
        &self.taper
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Traces `∂_x^j L(0, t)` of the linear part.
    pub fn linear_traces(&self) -> &[TimeSeries; 3] {
        &self.linear_traces
    }

    /// Zero extension, the `η(t/2T)` window, assembly and the outer `η(t)`.
    /// Returns the field and the traces `η(t) ∂_x^j W_0(·)(0, t)`.
    fn boundary_term(&self, data: &BoundaryData) -> Result<(SpaceTimeField, [TimeSeries; 3], Vec<String>)> {
        let s = self.cfg.indices.s;
        let t2 = 2.0 * self.cfg.horizon;
        let mut warnings = Vec::new();
        let mut ext = Vec::with_capacity(3);
        for (j, h) in data.h.iter().enumerate() {
            let z = zero_extend_time(h, (s + 2.0 - j as f64) / 5.0)?;
            if let Some(w) = z.warning {
                warnings.push(format!("h{} - p{}: {w}", j + 1, j + 1));
            }
            ext.push(z.series);
        }
        let corrected = BoundaryData { h: [ext[0].clone(), ext[1].clone(), ext[2].clone()] }
            .scale_in_time(|t| eta(t / t2));
        let tg = self.cfg.tgrid;
        let bp = BoundaryPotential::new(&corrected, self.cfg.boundary, self.extent)?;
        let mut field = bp.assemble(self.cfg.xgrid, tg, Some((-1.0, 1.0)))?;
        scale_rows_by_eta(&mut field);
        let traces = [0u32, 1, 2].map(|j| -> Result<TimeSeries> {
            let raw = bp.traces(j, tg)?;
            Ok(TimeSeries::from_parts(
                tg,
                raw.values.iter().enumerate().map(|(i, v)| v * eta(tg.point(i))).collect(),
            ))
        });
        let [a, b, c] = traces;
        Ok((field, [a?, b?, c?], warnings))
    }

    pub fn nonlinearity(&self, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        nonlinearity_ft(u, self.cfg.horizon, &self.plan, &self.taper)
    }

    /// `Γ_T u` with its nonlinear part and traces.
    pub fn apply(&self, u: &SpaceTimeField) -> Result<GammaEval> {
        u.xgrid.require_same(&self.cfg.xgrid, "iterate")?;
        u.tgrid.require_same(&self.cfg.tgrid, "iterate")?;
        let f = self.nonlinearity(u)?;
        let spectra = self.plan.duhamel_spectra(&f)?;
        let r = traces_from_spectra(&self.plan, &spectra, self.cfg.tgrid);
        let mut duh = SpaceTimeField::from_spatial_spectra(self.cfg.xgrid, self.cfg.tgrid, spectra);
        scale_rows_by_eta(&mut duh);
        let (w_r, w_traces, warnings) = self.boundary_term(&BoundaryData { h: r.clone() })?;
        let nonlinear = duh.sub(&w_r)?;
        let total = self.linear.add(&nonlinear)?;
        let traces = [0, 1, 2].map(|j| {
            let nl = r[j].sub(&w_traces[j]).expect("same grid");
            self.linear_traces[j].add(&nl).expect("same grid")
        });
        Ok(GammaEval { total, nonlinear, r, traces, zero_extension_warnings: warnings })
    }

    pub fn norm(&self, u: &SpaceTimeField) -> f64 {
        let i = &self.cfg.indices;
        xsba_norm(u, i.s, i.b, i.alpha)
    }

    /// Picard iteration from `u₀ = 0`.
    pub fn solve(&self) -> Result<Solution> {
        let mut trace = IterationTrace::default();
        let mut u = SpaceTimeField::zeros(self.cfg.xgrid, self.cfg.tgrid);
        let mut last: Option<GammaEval> = None;
        let mut stalled = 0;
        for _ in 0..self.cfg.max_iter {
            let next = self.apply(&u)?;
            let diff = self.norm(&next.total.sub(&u)?);
            trace.norms.push(self.norm(&next.total));
            if let Some(prev) = trace.diffs.last() {
                let factor = if *prev > 0.0 { diff / prev } else { 0.0 };
                trace.factors.push(factor);
                stalled = if factor >= 1.0 { stalled + 1 } else { 0 };
            }
            trace.diffs.push(diff);
            log::debug!("picard iteration {}: diff {diff:.3e}", trace.diffs.len());
            u = next.total.clone();
            last = Some(next);
            if stalled >= 3 {
                return Err(Error::NonContraction {
                    message: "contraction factor ≥ 1 on three consecutive iterations; reduce T or the data".into(),
                    trace: Box::new(trace),
                });
            }
            if diff < self.cfg.fp_tol {
                trace.converged = true;
                break;
            }
        }
        let eval = last.expect("max_iter ≥ 1");
        let check = self.apply(&u)?;
        trace.residual = Some(self.norm(&check.total.sub(&u)?));
        let decomposition = TraceDecomposition::new(self.q.clone(), eval.r.clone())?;
        let mut warnings = self.warnings.clone();
        warnings.extend(eval.zero_extension_warnings.iter().cloned());
        Ok(Solution {
            u: eval.total,
            nonlinear: eval.nonlinear,
            traces: eval.traces,
            trace,
            decomposition,
            warnings,
        })
    }

    /// `max_{t ∈ [0, T]} |∂_x^j u(0,t) - h_{j+1}(t)|` for `j = 0, 1, 2`.
    pub fn trace_errors(&self, traces: &[TimeSeries; 3]) -> [f64; 3] {
        let tg = self.cfg.tgrid;
        let t_end = self.cfg.horizon + 1e-12;
        [0, 1, 2].map(|j| {
            (0..tg.count)
                .filter(|&i| (-1e-12..=t_end).contains(&tg.point(i)))
                .map(|i| (traces[j].values[i] - self.data.h.h[j].values[i]).norm())
                .fold(0.0, f64::max)
        })
    }
}

/// Fixed point of `Γ_T` with its decomposition.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: SpaceTimeField,
    /// `η D(F_T u_prev) - η W_0(r)`; `u = linear + nonlinear` exactly.
    pub nonlinear: SpaceTimeField,
    pub traces: [TimeSeries; 3],
    pub trace: IterationTrace,
    pub decomposition: TraceDecomposition,
    pub warnings: Vec<String>,
}

/// `Γ_T u` for the given data.
pub fn gamma_operator(u: &SpaceTimeField, data: &ProblemData, cfg: &SolverConfig) -> Result<SpaceTimeField> {
    Ok(Solver::new(data.clone(), cfg.clone())?.apply(u)?.total)
}

/// Runs the Picard iteration, returning the solver (for its linear part) and the solution.
pub fn picard_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<(Solver, Solution)> {
    let solver = Solver::new(data.clone(), cfg.clone())?;
    let sol = solver.solve()?;
    Ok((solver, sol))
}

/// The nonlinear part `u - L`.
pub fn nonlinear_part(sol: &Solution) -> &SpaceTimeField {
    &sol.nonlinear
}

/// Horizon picked from the contraction condition.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HorizonChoice {
    pub horizon: f64,
    /// `1/2 - 2 C R T^{b*-b}` at the returned horizon.
    pub margin: f64,
}

pub const HORIZON_FLOOR: f64 = 1e-4;

/// Largest `T ≤ 1/2` with `2 C R T^{b*-b} ≤ 1/2`.
pub fn choose_t(radius: f64, c_emp: f64, b: f64, bstar: f64) -> Result<HorizonChoice> {
    if !(radius > 0.0) || !(c_emp > 0.0) || !(bstar > b) {
        return Err(domain("choose_T needs R > 0, C > 0 and b* > b"));
    }
    let e = bstar - b;
    let t = (1.0 / (4.0 * c_emp * radius)).powf(1.0 / e).min(0.5);
    if t < HORIZON_FLOOR {
        return Err(domain(format!(
            "no admissible horizon above {HORIZON_FLOOR:.0e} (T would be {t:.3e}); use smaller data"
        )));
    }
    Ok(HorizonChoice { horizon: t, margin: 0.5 - 2.0 * c_emp * radius * t.powf(e) })
}

/// `R = 2C (‖g_l‖_{H^s} + Σ_j ‖h_{j+1}‖_{H^{(s+2-j)/5}})`, the ball radius.
pub fn data_radius(g_l: &GridFunction, h: &BoundaryData, s: f64, c_emp: f64) -> Result<f64> {
    let mut sum = sobolev_norm(g_l, s)?;
    for (j, hj) in h.h.iter().enumerate() {
        sum += fractional_time_norm(hj, (s + 2.0 - j as f64) / 5.0)?;
    }
    Ok(2.0 * c_emp * sum)
}
