//! Scenario documents: one JSON file describing data, indices, grids, the
//! pipeline to run and the checks (each with its own tolerance).

use std::path::Path;

use kdv5::boundary::BoundaryData;
use kdv5::bourgain::{BilinearMode, NormIndices, PacketEnsemble, Range};
use kdv5::cutoffs::{check_regularity, BumpSide, BumpSpec, ExtensionMethod};
use kdv5::solver::SolverConfig;
use kdv5::spectral::{GridFunction, TimeSeries, UniformGrid};
use kdv5::verification::rough_tail_profile;
use kdv5::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub length: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn grid(&self, field: &str) -> Result<UniformGrid> {
        UniformGrid::centered(self.length, self.count)
            .map_err(|e| Error::Validation { field: field.into(), message: e.to_string() })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub t: AxisSpec,
}

/// Named data profiles. Every profile is real-valued.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// Smooth plateau bump: 1 within `inner` of the centre, 0 beyond `outer`.
    Bump { amplitude: f64, center: f64, inner: f64, outer: f64 },
    /// Band-limited power-law spectrum `⟨ξ⟩^{-s-0.55}` under a Gaussian envelope.
    RoughTail { s: f64, amplitude: f64, band: f64, center: f64, width: f64 },
}

impl Profile {
    fn check(&self, field: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation { field: field.into(), message: m.into() });
        match *self {
            Profile::Gaussian { amplitude, center, width } => {
                if !(amplitude.is_finite() && center.is_finite() && width > 0.0) {
                    return bad("gaussian needs finite amplitude and centre and width > 0");
                }
            }
            Profile::Bump { amplitude, center, inner, outer } => {
                if !(amplitude.is_finite() && center.is_finite() && inner > 0.0 && outer > inner) {
                    return bad("bump needs 0 < inner < outer");
                }
            }
            Profile::RoughTail { s, amplitude, band, center, width } => {
                if !(s >= 0.0 && amplitude.is_finite() && band > 0.0 && center.is_finite() && width > 0.0) {
                    return bad("rough_tail needs s ≥ 0, band > 0 and width > 0");
                }
            }
        }
        Ok(())
    }

    /// Samples on `grid`. `seed` feeds the random phases of `rough_tail`.
    pub fn sample_x(&self, grid: UniformGrid, seed: u64) -> GridFunction {
        match *self {
            Profile::RoughTail { s, amplitude, band, center, width } => {
                rough_tail_profile(grid, s, amplitude, band, center, width, seed)
            }
            _ => GridFunction::from_real_fn(grid, |x| self.value(x)),
        }
    }

    pub fn sample_t(&self, grid: UniformGrid, seed: u64) -> TimeSeries {
        match self {
            Profile::RoughTail { .. } => {
                let g = self.sample_x(grid, seed);
                TimeSeries::new(grid, g.values).expect("finite samples")
            }
            _ => TimeSeries::from_real_fn(grid, |t| self.value(t)),
        }
    }

    fn value(&self, y: f64) -> f64 {
        match *self {
            Profile::Gaussian { amplitude, center, width } => amplitude * (-((y - center) / width).powi(2) / 2.0).exp(),
            Profile::Bump { amplitude, center, inner, outer } => {
                amplitude * BumpSpec { inner_radius: inner, outer_radius: outer, side: BumpSide::TwoSided }.value(y - center)
            }
            Profile::RoughTail { .. } => unreachable!("sampled spectrally"),
        }
    }
}

/// Boundary data: explicit profiles (empty list = zero) or the traces of the
/// whole-line reference solution started from `initial`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Profiles { h1: Vec<Profile>, h2: Vec<Profile>, h3: Vec<Profile> },
    Manufactured {
        /// Split-step substeps per output step.
        substeps: usize,
        /// Limit for the step-halving self-check.
        halving_tolerance: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    LinearOnly,
    BoundaryOnly,
    #[default]
    FullSolve,
    VerifyAll,
}

/// A requested check. `tolerance` is an upper bound unless noted.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Largest corner-condition gap.
    Compatibility { tolerance: f64 },
    /// Boundary potential of the data: trace error on `[0, T]`.
    BoundaryTraces { tolerance: f64 },
    /// Boundary potential of the data: `‖u_t + ∂_x⁵u‖` on `(0, x_max] × [0, T]`.
    BoundaryResidual { tolerance: f64, x_max: f64 },
    /// Solution traces against the data on `[0, T]`.
    SolutionTraces { tolerance: f64 },
    /// `‖u - Γ_T u‖` in the solver norm.
    FixedPointResidual { tolerance: f64 },
    /// Largest observed contraction factor from the second iteration on.
    Contraction { tolerance: f64 },
    /// L² distance to the whole-line reference on `[0, x_max] × [0, T]`
    /// (needs manufactured boundary data).
    OracleAgreement { tolerance: f64, x_max: f64 },
    WeakForm { tolerance: f64, widths: [f64; 2] },
    /// Ratio of the perturbed to the unperturbed weak-form residual; passes
    /// when the ratio is at least `tolerance`.
    WeakFormSensitivity { tolerance: f64, widths: [f64; 2], amplitude: f64 },
    ExtensionIndependence { tolerance: f64, collars: [f64; 2], x_max: f64 },
    /// Fitted slope gain of the nonlinear part over the datum; passes when
    /// the gain is at least `tolerance`.
    SmoothingSlopeGain { tolerance: f64, a_grid: Vec<f64>, band: (f64, f64), stride: usize },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Compatibility { .. } => "compatibility",
            CheckSpec::BoundaryTraces { .. } => "boundary_traces",
            CheckSpec::BoundaryResidual { .. } => "boundary_residual",
            CheckSpec::SolutionTraces { .. } => "solution_traces",
            CheckSpec::FixedPointResidual { .. } => "fixed_point_residual",
            CheckSpec::Contraction { .. } => "contraction",
            CheckSpec::OracleAgreement { .. } => "oracle_agreement",
            CheckSpec::WeakForm { .. } => "weak_form",
            CheckSpec::WeakFormSensitivity { .. } => "weak_form_sensitivity",
            CheckSpec::ExtensionIndependence { .. } => "extension_independence",
            CheckSpec::SmoothingSlopeGain { .. } => "smoothing_slope_gain",
        }
    }

    pub fn tolerance(&self) -> f64 {
        match *self {
            CheckSpec::Compatibility { tolerance }
            | CheckSpec::BoundaryTraces { tolerance }
            | CheckSpec::BoundaryResidual { tolerance, .. }
            | CheckSpec::SolutionTraces { tolerance }
            | CheckSpec::FixedPointResidual { tolerance }
            | CheckSpec::Contraction { tolerance }
            | CheckSpec::OracleAgreement { tolerance, .. }
            | CheckSpec::WeakForm { tolerance, .. }
            | CheckSpec::WeakFormSensitivity { tolerance, .. }
            | CheckSpec::ExtensionIndependence { tolerance, .. }
            | CheckSpec::SmoothingSlopeGain { tolerance, .. } => tolerance,
        }
    }

    /// Checks that need the Picard solution.
    pub fn needs_solution(&self) -> bool {
        !matches!(self, CheckSpec::Compatibility { .. } | CheckSpec::BoundaryTraces { .. } | CheckSpec::BoundaryResidual { .. })
    }
}

/// Bilinear probe request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub mode: BilinearMode,
    pub ensemble_size: usize,
    #[serde(default)]
    pub ensemble: PacketEnsemble,
    pub grids: GridSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Keep every `stride_x`-th node in field CSV files.
    #[serde(default = "one")]
    pub stride_x: usize,
    #[serde(default = "one")]
    pub stride_t: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { stride_x: 1, stride_t: 1 }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: Pipeline,
    pub indices: NormIndices,
    pub grids: GridSpec,
    #[serde(default = "half")]
    pub horizon: f64,
    /// Boundary quadrature depth (library default when absent).
    #[serde(default)]
    pub depth: Option<usize>,
    /// Initial datum as a sum of profiles; only `x ≥ 0` is data, the rest
    /// feeds the whole-line reference of manufactured scenarios.
    #[serde(default)]
    pub initial: Vec<Profile>,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub extension: Option<ExtensionMethod>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Scenario {
    /// Parses a scenario; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::Validation { field: format!("line {} column {}", e.line(), e.column()), message: e.to_string() })?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn xgrid(&self) -> Result<UniformGrid> {
        self.grids.x.grid("grids.x")
    }

    pub fn tgrid(&self) -> Result<UniformGrid> {
        self.grids.t.grid("grids.t")
    }

    /// Solver configuration; validates indices, horizon and grids.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.indices, self.horizon, self.xgrid()?, self.tgrid()?);
        if let Some(d) = self.depth {
            cfg.boundary.depth = d;
        }
        if let Some(m) = self.extension {
            cfg.extension = m;
        }
        let invalid = |field: &str, e: Error| Error::Validation { field: field.into(), message: e.to_string() };
        check_regularity(self.indices.s).map_err(|e| invalid("indices.s", e))?;
        self.indices.require(Range::Contraction).map_err(|e| invalid("indices", e))?;
        if !(self.horizon > 0.0 && self.horizon <= 0.5) {
            return Err(Error::Validation {
                field: "horizon".into(),
                message: format!("T = {} must satisfy 0 < T ≤ 1/2", self.horizon),
            });
        }
        cfg.validate().map_err(|e| invalid("grids", e))?;
        Ok(cfg)
    }

    /// Checks what every command needs; [`Scenario::solver_config`] and
    /// [`Scenario::validate_probe`] cover the command-specific parts.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation { field: "name".into(), message: "must not be empty".into() });
        }
        self.xgrid()?;
        self.tgrid()?;
        for (i, p) in self.initial.iter().enumerate() {
            p.check(&format!("initial[{i}]"))?;
        }
        match &self.boundary {
            BoundarySpec::Profiles { h1, h2, h3 } => {
                for (j, list) in [h1, h2, h3].iter().enumerate() {
                    for (i, p) in list.iter().enumerate() {
                        p.check(&format!("boundary.h{}[{i}]", j + 1))?;
                    }
                }
            }
            BoundarySpec::Manufactured { substeps, halving_tolerance } => {
                if *substeps == 0 || !(*halving_tolerance > 0.0) {
                    return Err(Error::Validation {
                        field: "boundary".into(),
                        message: "manufactured data need substeps ≥ 1 and halving_tolerance > 0".into(),
                    });
                }
            }
        }
        for c in &self.checks {
            if !(c.tolerance() > 0.0) || !c.tolerance().is_finite() {
                return Err(Error::Validation {
                    field: format!("checks.{}", c.name()),
                    message: "tolerance must be positive and finite".into(),
                });
            }
        }
        Ok(())
    }

    /// The probe section and the bilinear range of the indices.
    pub fn validate_probe(&self) -> Result<&ProbeSpec> {
        let p = self.probe.as_ref().ok_or_else(|| Error::Validation {
            field: "probe".into(),
            message: "probe-bilinear needs a `probe` section".into(),
        })?;
        p.grids.x.grid("probe.grids.x")?;
        p.grids.t.grid("probe.grids.t")?;
        if p.ensemble_size == 0 {
            return Err(Error::Validation { field: "probe.ensemble_size".into(), message: "must be at least 1".into() });
        }
        self.indices
            .require(p.mode.range())
            .map_err(|e| Error::Validation { field: "indices".into(), message: e.to_string() })?;
        Ok(p)
    }

    /// Initial datum on the solver grid.
    pub fn initial_datum(&self) -> Result<GridFunction> {
        let xg = self.xgrid()?;
        let mut g = GridFunction::zeros(xg);
        for (i, p) in self.initial.iter().enumerate() {
            g = g.add(&p.sample_x(xg, self.seed.wrapping_add(i as u64)))?;
        }
        Ok(g)
    }

    /// Explicit boundary profiles on the time grid, with samples at `t < 0` set to zero.
    pub fn boundary_profiles(&self) -> Result<Option<BoundaryData>> {
        let BoundarySpec::Profiles { h1, h2, h3 } = &self.boundary else {
            return Ok(None);
        };
        let tg = self.tgrid()?;
        let build = |list: &Vec<Profile>| -> Result<TimeSeries> {
            let mut h = TimeSeries::zeros(tg);
            for (i, p) in list.iter().enumerate() {
                h = h.add(&p.sample_t(tg, self.seed.wrapping_add(100 + i as u64)))?;
            }
            let values = h.values.iter().enumerate().map(|(k, v)| if tg.point(k) < 0.0 { 0.0.into() } else { *v }).collect();
            TimeSeries::new(tg, values)
        };
        Ok(Some(BoundaryData::new(build(h1)?, build(h2)?, build(h3)?)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "zero",
        "indices": {"s": 0.3, "b": 0.45, "bstar": 0.47, "alpha": 0.51, "a": 0.0},
        "grids": {"x": {"length": 40, "count": 64}, "t": {"length": 4, "count": 256}},
        "boundary": {"kind": "profiles", "h1": [], "h2": [], "h3": []}
    }"#;

    #[test]
    fn minimal_scenario_parses_and_validates() {
        let sc = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(sc.pipeline, Pipeline::FullSolve);
        sc.validate().unwrap();
        assert_eq!(sc.initial_datum().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let bad = MINIMAL.replace("\"name\": \"zero\",", "\"name\": \"zero\", \"colour\": 1,");
        match Scenario::from_json(&bad) {
            Err(Error::Validation { field, message }) => {
                assert!(field.starts_with("line 2"), "{field}");
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn b_at_one_half_names_the_range() {
        let bad = MINIMAL.replace("\"b\": 0.45", "\"b\": 0.5");
        let sc = Scenario::from_json(&bad).unwrap();
        sc.validate().unwrap();
        match sc.solver_config() {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "indices");
                assert!(message.contains("max{s/5 - 1/20, 2/5} < b < b* < 1/2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_profiles_vanish_before_zero() {
        let text = MINIMAL.replace(
            "\"h1\": []",
            "\"h1\": [{\"profile\": \"gaussian\", \"amplitude\": 1.0, \"center\": 0.0, \"width\": 0.5}]",
        );
        let sc = Scenario::from_json(&text).unwrap();
        let h = sc.boundary_profiles().unwrap().unwrap();
        let tg = sc.tgrid().unwrap();
        assert!(h.h[0].values.iter().enumerate().all(|(k, v)| tg.point(k) >= 0.0 || v.norm() == 0.0));
        assert_eq!(h.h[0].at(0.0).unwrap().re, 1.0);
    }
}
