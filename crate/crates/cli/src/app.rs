//! Runs a scenario and writes its products into an output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kdv5::boundary::{BoundaryData, BoundaryPotential, EvalExtent};
use kdv5::cutoffs::{check_compatibility, ExtensionMethod};
use kdv5::io::{field_to_csv, series_to_csv, write_json, Envelope, FieldEnvelope};
use kdv5::bourgain::probe_bilinear;
use kdv5::solver::{IterationTrace, ProblemData, Solution, Solver, SolverConfig};
use kdv5::spectral::{SpaceTimeField, TimeSeries, UniformGrid};
use kdv5::verification::{
    boundary_potential_residual, default_test_family, extension_independence, manufactured_problem,
    restricted_distance, smooth_random_field, smoothing_report, weak_form_residual, CheckResult,
};
use kdv5::{Error, Result, C64};
use serde::Serialize;

use crate::plots;
use crate::scenario::{BoundarySpec, CheckSpec, Pipeline, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    ProbeBilinear,
}

/// Command-line overrides of scenario fields.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub depth: Option<usize>,
}

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub checks: Vec<CheckResult>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    name: &'a str,
    pipeline: Pipeline,
    indices: kdv5::bourgain::NormIndices,
    horizon: f64,
    nonlinear_cap: f64,
    extension: ExtensionMethod,
    extension_norm: f64,
    extension_ratio: f64,
    iteration: Option<&'a IterationTrace>,
    trace_errors: [f64; 3],
    oracle_halving_change: Option<f64>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    checks: BTreeMap<&'a str, bool>,
    errors: BTreeMap<&'a str, String>,
    all_pass: bool,
}

/// Problem data plus the reference solution when the data are manufactured.
struct Prepared {
    cfg: SolverConfig,
    data: ProblemData,
    oracle: Option<(SpaceTimeField, f64)>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir.join("plots"))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, v)
    }

    fn text(&mut self, name: &str, s: String) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, s)?;
        Ok(())
    }

    fn series(&mut self, stem: &str, f: &TimeSeries) -> Result<()> {
        self.text(&format!("{stem}.csv"), series_to_csv(f)?)?;
        self.json(&format!("{stem}.json"), &Envelope::of(f))
    }

    fn field(&mut self, stem: &str, f: &SpaceTimeField, sc: &Scenario) -> Result<()> {
        let (sx, st) = (sc.output.stride_x.max(1), sc.output.stride_t.max(1));
        let file = format!("{stem}.csv");
        self.text(&file, field_to_csv(f, sx, st)?)?;
        self.json(
            &format!("{stem}.json"),
            &FieldEnvelope { xgrid: f.xgrid, tgrid: f.tgrid, stride_x: sx, stride_t: st, file },
        )
    }
}

/// Applies the overrides and validates what `cmd` needs.
pub fn load(path: &Path, cmd: Command, ov: Overrides) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    if let Some(seed) = ov.seed {
        sc.seed = seed;
    }
    if let Some(depth) = ov.depth {
        if depth == 0 {
            return Err(Error::Validation { field: "--depth".into(), message: "depth must be at least 1".into() });
        }
        sc.depth = Some(depth);
    }
    sc.validate()?;
    match cmd {
        Command::Solve if sc.pipeline != Pipeline::BoundaryOnly => {
            sc.solver_config()?;
        }
        Command::Verify if sc.checks.iter().any(|c| c.needs_solution()) => {
            sc.solver_config()?;
        }
        Command::ProbeBilinear => {
            sc.validate_probe()?;
        }
        _ => {}
    }
    Ok(sc)
}

fn prepare(sc: &Scenario) -> Result<Prepared> {
    let cfg = sc.solver_config()?;
    let g = sc.initial_datum()?;
    match &sc.boundary {
        BoundarySpec::Profiles { .. } => {
            let h = sc.boundary_profiles()?.expect("profile data");
            Ok(Prepared { cfg, data: ProblemData { g, h }, oracle: None })
        }
        BoundarySpec::Manufactured { substeps, halving_tolerance } => {
            // Traces run to 2T so the η(t/2T) window sees smooth data.
            let m = manufactured_problem(&g, cfg.tgrid, 2.0 * cfg.horizon, *substeps, *halving_tolerance)?;
            Ok(Prepared { cfg, data: m.data, oracle: Some((m.oracle, m.oracle_change)) })
        }
    }
}

/// Boundary data without solver validation (for the boundary-only stages).
fn boundary_data(sc: &Scenario) -> Result<BoundaryData> {
    match &sc.boundary {
        BoundarySpec::Profiles { .. } => Ok(sc.boundary_profiles()?.expect("profile data")),
        BoundarySpec::Manufactured { .. } => Ok(prepare(sc)?.data.h),
    }
}

fn boundary_options(sc: &Scenario) -> kdv5::boundary::BoundaryOptions {
    let mut o = kdv5::boundary::BoundaryOptions::default();
    if let Some(d) = sc.depth {
        o.depth = d;
    }
    o
}

/// Nodes of `grid` in `[lo, hi]`, every `stride`-th.
fn nodes_in(grid: UniformGrid, lo: f64, hi: f64, stride: usize) -> Vec<f64> {
    grid.points().into_iter().filter(|x| *x >= lo - 1e-12 && *x <= hi + 1e-12).step_by(stride.max(1)).collect()
}

fn standalone_potential(sc: &Scenario, h: &BoundaryData, x_max: f64) -> Result<BoundaryPotential> {
    BoundaryPotential::new(h, boundary_options(sc), EvalExtent { x_abs_max: x_max, t_min: -1.0, t_max: 1.0 })
}

/// Runs `cmd` on a validated scenario, writing into `out`.
pub fn run(cmd: Command, sc: &Scenario, out: &Path) -> Result<Outcome> {
    let mut w = Writer::new(out)?;
    w.json("scenario.json", sc)?;
    let checks = match cmd {
        Command::Solve => {
            solve(sc, &mut w)?;
            if sc.pipeline == Pipeline::VerifyAll {
                verify(sc, &mut w)?
            } else {
                Vec::new()
            }
        }
        Command::Verify => verify(sc, &mut w)?,
        Command::ProbeBilinear => {
            probe(sc, &mut w)?;
            Vec::new()
        }
    };
    Ok(Outcome { checks, files: w.files })
}

fn probe(sc: &Scenario, w: &mut Writer) -> Result<()> {
    let p = sc.validate_probe()?;
    let xg = p.grids.x.grid("probe.grids.x")?;
    let tg = p.grids.t.grid("probe.grids.t")?;
    let report = probe_bilinear(&sc.indices, p.mode, &p.ensemble, p.ensemble_size, sc.seed, xg, tg)?;
    w.json("probe.json", &report)
}

fn solve(sc: &Scenario, w: &mut Writer) -> Result<()> {
    if sc.pipeline == Pipeline::BoundaryOnly {
        let xg = sc.xgrid()?;
        let h = boundary_data(sc)?;
        let x_max = xg.origin.abs().max(xg.end().abs());
        let bp = standalone_potential(sc, &h, x_max)?;
        let xs = nodes_in(xg, 0.0, 0.25 * x_max, 4);
        w.json("boundary_diagnostic.json", &bp.diagnostic(&h, &xs, (0.0, sc.horizon))?)?;
        let field = bp.assemble(xg, h.grid(), Some((-1.0, 1.0)))?;
        w.field("boundary_potential", &field, sc)?;
        for j in 0..3 {
            let tr = bp.traces(j as u32, h.grid())?;
            w.series(&format!("trace_{j}"), &tr)?;
            plots::trace(&w.path(&format!("plots/trace_{j}.dat")), j, &tr, &h.h[j])?;
        }
        return Ok(());
    }
    let prep = prepare(sc)?;
    let solver = Solver::new(prep.data.clone(), prep.cfg.clone())?;
    w.json("compatibility.json", &solver.compatibility)?;
    let (field, traces, solution): (&SpaceTimeField, &[TimeSeries; 3], Option<Solution>) =
        if sc.pipeline == Pipeline::LinearOnly {
            (&solver.linear, solver.linear_traces(), None)
        } else {
            (&solver.linear, solver.linear_traces(), Some(solver.solve()?))
        };
    let (field, traces) = match &solution {
        Some(s) => (&s.u, &s.traces),
        None => (field, traces),
    };
    w.field("solution", field, sc)?;
    for (j, tr) in traces.iter().enumerate() {
        w.series(&format!("trace_{j}"), tr)?;
        plots::trace(&w.path(&format!("plots/trace_{j}.dat")), j, tr, &prep.data.h.h[j])?;
    }
    let it_end = prep.cfg.tgrid.index_of(solver.horizon()).expect("horizon is a node");
    plots::spectrum(&w.path("plots/spectrum_initial.dat"), "g", &solver.extension.extension)?;
    plots::spectrum(&w.path("plots/spectrum_final.dat"), "u(T)", &field.time_slice(it_end))?;
    let warnings = match &solution {
        Some(s) => s.warnings.clone(),
        None => solver.warnings().to_vec(),
    };
    let report = SolveReport {
        name: &sc.name,
        pipeline: sc.pipeline,
        indices: solver.cfg.indices,
        horizon: solver.horizon(),
        nonlinear_cap: solver.cfg.cap(),
        extension: solver.extension.method,
        extension_norm: solver.extension.norm,
        extension_ratio: solver.extension.ratio,
        iteration: solution.as_ref().map(|s| &s.trace),
        trace_errors: solver.trace_errors(traces),
        oracle_halving_change: prep.oracle.as_ref().map(|o| o.1),
        warnings: &warnings,
    };
    w.json("solve_report.json", &report)?;
    // The potential of the raw data, for the diagnostic only.
    let xg = prep.cfg.xgrid;
    let x_max = xg.origin.abs().max(xg.end().abs());
    let bp = standalone_potential(sc, &prep.data.h, x_max)?;
    let xs = nodes_in(xg, 0.0, 0.25 * x_max, 4);
    w.json("boundary_diagnostic.json", &bp.diagnostic(&prep.data.h, &xs, (0.0, solver.horizon()))?)
}

/// Lazily computed solver state shared by the checks.
struct Cache<'a> {
    sc: &'a Scenario,
    prep: Option<Prepared>,
    solved: Option<(Solver, Solution)>,
}

impl Cache<'_> {
    fn prep(&mut self) -> Result<&Prepared> {
        if self.prep.is_none() {
            self.prep = Some(prepare(self.sc)?);
        }
        Ok(self.prep.as_ref().expect("just set"))
    }

    fn solved(&mut self) -> Result<&(Solver, Solution)> {
        if self.solved.is_none() {
            let p = self.prep()?;
            let solver = Solver::new(p.data.clone(), p.cfg.clone())?;
            let sol = solver.solve()?;
            self.solved = Some((solver, sol));
        }
        Ok(self.solved.as_ref().expect("just set"))
    }
}

fn verify(sc: &Scenario, w: &mut Writer) -> Result<Vec<CheckResult>> {
    let mut cache = Cache { sc, prep: None, solved: None };
    let mut results = Vec::new();
    let mut errors = BTreeMap::new();
    for spec in &sc.checks {
        match evaluate(spec, &mut cache, w) {
            Ok(r) => results.push(r),
            Err(e @ Error::Validation { .. }) => return Err(e),
            Err(e) => {
                // A numerical failure is a failed check, not a crash.
                errors.insert(spec.name(), e.to_string());
                results.push(CheckResult { name: spec.name().into(), value: f64::NAN, tolerance: spec.tolerance(), pass: false });
            }
        }
    }
    w.json("verification.json", &results)?;
    let summary = Summary {
        name: &sc.name,
        checks: results.iter().zip(&sc.checks).map(|(r, s)| (s.name(), r.pass)).collect(),
        errors,
        all_pass: results.iter().all(|r| r.pass),
    };
    w.json("summary.json", &summary)?;
    Ok(results)
}

fn evaluate(spec: &CheckSpec, cache: &mut Cache, w: &mut Writer) -> Result<CheckResult> {
    let sc = cache.sc;
    let name = spec.name();
    let tol = spec.tolerance();
    Ok(match spec {
        CheckSpec::Compatibility { .. } => {
            let g = sc.initial_datum()?;
            let h = boundary_data(sc)?;
            let rep = check_compatibility(&g, [&h.h[0], &h.h[1], &h.h[2]], sc.indices.s)?;
            let gap = rep.measured_gaps.iter().copied().fold(0.0, f64::max);
            w.json("compatibility.json", &rep)?;
            CheckResult::below(name, gap, tol)
        }
        CheckSpec::BoundaryTraces { .. } => {
            let xg = sc.xgrid()?;
            let h = boundary_data(sc)?;
            let x_max = xg.origin.abs().max(xg.end().abs());
            let bp = standalone_potential(sc, &h, x_max)?;
            let diag = bp.diagnostic(&h, &nodes_in(xg, 0.0, 0.25 * x_max, 4), (0.0, sc.horizon))?;
            w.json("boundary_diagnostic.json", &diag)?;
            CheckResult::below(name, diag.trace_errors.iter().copied().fold(0.0, f64::max), tol)
        }
        CheckSpec::BoundaryResidual { x_max, .. } => {
            let h = boundary_data(sc)?;
            let bp = standalone_potential(sc, &h, *x_max + 1.0)?;
            let xs: Vec<f64> = (0..).map(|k| 0.5 + 0.25 * k as f64).take_while(|x| *x <= *x_max).collect();
            CheckResult::below(name, boundary_potential_residual(&bp, h.grid(), &xs, 0.0, sc.horizon)?, tol)
        }
        CheckSpec::SolutionTraces { .. } => {
            let (solver, sol) = cache.solved()?;
            CheckResult::below(name, solver.trace_errors(&sol.traces).iter().copied().fold(0.0, f64::max), tol)
        }
        CheckSpec::FixedPointResidual { .. } => {
            let (_, sol) = cache.solved()?;
            CheckResult::below(name, sol.trace.residual.unwrap_or(f64::INFINITY), tol)
        }
        CheckSpec::Contraction { .. } => {
            let (_, sol) = cache.solved()?;
            CheckResult::below(name, sol.trace.factors.iter().copied().fold(0.0, f64::max), tol)
        }
        CheckSpec::OracleAgreement { x_max, .. } => {
            if cache.prep()?.oracle.is_none() {
                return Err(Error::Validation {
                    field: "checks.oracle_agreement".into(),
                    message: "needs manufactured boundary data".into(),
                });
            }
            cache.solved()?;
            let (solver, sol) = cache.solved.as_ref().expect("solved");
            let oracle = &cache.prep.as_ref().expect("prepared").oracle.as_ref().expect("checked").0;
            CheckResult::below(name, restricted_distance(&sol.u, oracle, *x_max, solver.horizon())?, tol)
        }
        CheckSpec::WeakForm { widths, .. } => {
            let (solver, sol) = cache.solved()?;
            CheckResult::below(name, weak_form_residual(&sol.u, &solver.data, solver.horizon(), &default_test_family(*widths))?, tol)
        }
        CheckSpec::WeakFormSensitivity { widths, amplitude, .. } => {
            let (solver, sol) = cache.solved()?;
            let family = default_test_family(*widths);
            let base = weak_form_residual(&sol.u, &solver.data, solver.horizon(), &family)?;
            let noise = smooth_random_field(sol.u.xgrid, sol.u.tgrid, sc.seed).scale(C64::new(*amplitude, 0.0));
            let bumped = weak_form_residual(&sol.u.add(&noise)?, &solver.data, solver.horizon(), &family)?;
            CheckResult::at_least(name, bumped / base.max(f64::MIN_POSITIVE), tol)
        }
        CheckSpec::ExtensionIndependence { collars, x_max, .. } => {
            let p = cache.prep()?;
            let variants = [
                (ExtensionMethod::Zero, collars[0]),
                (ExtensionMethod::Zero, collars[1]),
                (ExtensionMethod::Reflection { collar: collars[0] }, collars[0]),
                (ExtensionMethod::Reflection { collar: collars[1] }, collars[1]),
            ];
            let (worst, _) = extension_independence(&p.data, &p.cfg, &variants, *x_max)?;
            CheckResult::below(name, worst, tol)
        }
        CheckSpec::SmoothingSlopeGain { a_grid, band, stride, .. } => {
            let (solver, sol) = cache.solved()?;
            let rep = smoothing_report(
                &solver.data.g,
                &solver.linear,
                &sol.nonlinear,
                &solver.cfg.indices,
                solver.horizon(),
                a_grid,
                *band,
                *stride,
            )?;
            w.json("smoothing.json", &rep)?;
            let dir = w.dir.join("plots");
            plots::smoothing(&dir, &rep)?;
            for row in &rep.rows {
                w.files.push(dir.join(format!("smoothing_a{:.3}.dat", row.a)));
            }
            let gain = match (rep.slope_initial, rep.slope_nonlinear) {
                (Some(a), Some(b)) => a - b,
                _ => f64::NAN,
            };
            CheckResult::at_least(name, gain, tol)
        }
    })
}
