//! Scenario files: TOML with a fixed schema. Unknown keys are errors.

use std::path::{Path, PathBuf};

use chbohm_core::bohm::{AssignmentRule, SamplerKind, StepControl};
use chbohm_core::geometry::{Segment, Vec2};
use chbohm_core::histories::{Completion, FamilyKind, Variant};
use chbohm_core::scan::{DetectorSpec, Sampling};
use chbohm_core::wavefield::{FieldConfig, FieldMode, PacketLabel, PacketParams};
use chbohm_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Claim the scenario reproduces; copied into every experiment report
    /// that does not state its own.
    #[serde(default)]
    pub paper_claim: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub variant: Variant,
    pub completion: Completion,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            variant: Variant::Plain,
            completion: Completion::Canonical,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub mode: FieldMode,
    pub sigma0: f64,
    pub c_center: [f64; 2],
    pub c_velocity: [f64; 2],
    pub d_center: [f64; 2],
    pub d_velocity: [f64; 2],
    /// Real beam amplitudes `(w_c, w_d)`.
    pub weights: [f64; 2],
    pub symmetric: bool,
}

impl Default for FieldSpec {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            mode: FieldMode::Coherent,
            sigma0: 2.0,
            c_center: [0.0, 20.0],
            c_velocity: [10.0, -5.0],
            d_center: [0.0, -20.0],
            d_velocity: [10.0, 5.0],
            weights: [h, h],
            symmetric: true,
        }
    }
}

impl FieldSpec {
    pub fn build(&self) -> Result<FieldConfig, ScenarioError> {
        let p = |c: [f64; 2], v: [f64; 2], l| PacketParams::new(c.into(), v.into(), self.sigma0, l);
        FieldConfig::new(
            p(self.c_center, self.c_velocity, PacketLabel::C),
            p(self.d_center, self.d_velocity, PacketLabel::D),
            self.mode,
            [
                C64::new(self.weights[0], 0.0),
                C64::new(self.weights[1], 0.0),
            ],
            self.symmetric,
        )
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative paths resolve against the working directory.
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    HistoriesReport(HistoriesReportSpec),
    ConditionalProbabilities(ConditionalSpec),
    FringeProfile(FringeSpec),
    TrajectoryBundle(BundleSpec),
    DetectorSweep(SweepSpec),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::HistoriesReport(_) => "histories-report",
            Experiment::ConditionalProbabilities(_) => "conditional-probabilities",
            Experiment::FringeProfile(_) => "fringe-profile",
            Experiment::TrajectoryBundle(_) => "trajectory-bundle",
            Experiment::DetectorSweep(_) => "detector-sweep",
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Experiment::HistoriesReport(s) => s.label.as_deref(),
            Experiment::ConditionalProbabilities(s) => s.label.as_deref(),
            Experiment::FringeProfile(s) => s.label.as_deref(),
            Experiment::TrajectoryBundle(s) => s.label.as_deref(),
            Experiment::DetectorSweep(s) => s.label.as_deref(),
        }
    }

    pub fn paper_claim(&self) -> Option<&str> {
        match self {
            Experiment::HistoriesReport(s) => s.paper_claim.as_deref(),
            Experiment::ConditionalProbabilities(s) => s.paper_claim.as_deref(),
            Experiment::FringeProfile(s) => s.paper_claim.as_deref(),
            Experiment::TrajectoryBundle(s) => s.paper_claim.as_deref(),
            Experiment::DetectorSweep(s) => s.paper_claim.as_deref(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HistoriesReportSpec {
    pub label: Option<String>,
    pub paper_claim: Option<String>,
    pub family: FamilyKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Also evaluate under the other unitary completion and report the
    /// largest difference.
    #[serde(default)]
    pub compare_completions: bool,
    #[serde(default)]
    pub expect: HistoriesExpect,
}

fn default_tol() -> f64 {
    chbohm_core::histories::DEFAULT_TOL
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HistoriesExpect {
    pub weights: Option<Vec<f64>>,
    pub consistent: Option<bool>,
    pub offdiag_max_abs: Option<f64>,
    pub max_completion_difference: Option<f64>,
    #[serde(default = "default_check_tol")]
    pub tol: f64,
}

fn default_check_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalSpec {
    pub label: Option<String>,
    pub paper_claim: Option<String>,
    pub family: FamilyKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_check_tol")]
    pub check_tol: f64,
    #[serde(rename = "query")]
    pub queries: Vec<QuerySpec>,
}

/// `Pr(given | condition)`. Events are written `name@time`; `condition`
/// may be `"all"` to condition on the initial state only.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub given: String,
    pub condition: String,
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Expectation {
    Value(f64),
    /// `"undefined"` (zero-probability condition) or `"inconsistent"`.
    Outcome(String),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSpec {
    pub label: Option<String>,
    pub paper_claim: Option<String>,
    pub from: [f64; 2],
    pub to: [f64; 2],
    /// Defaults to the beam crossing time.
    pub t: Option<f64>,
    #[serde(default = "default_samples")]
    pub n: usize,
    #[serde(default)]
    pub expect: CurveExpect,
}

fn default_samples() -> usize {
    241
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CurveExpect {
    pub min_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
    /// Expected mean spacing of the four central nodes.
    pub node_spacing: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub spacing_rel_tol: f64,
    pub max_rate_ratio: Option<f64>,
}

fn default_rel_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub label: Option<String>,
    pub paper_claim: Option<String>,
    pub from: [f64; 2],
    pub to: [f64; 2],
    #[serde(default = "default_samples")]
    pub n: usize,
    pub aperture: f64,
    /// Instantaneous sampling time. Exclusive with `window`; if neither is
    /// given the beam crossing time is used.
    pub t: Option<f64>,
    /// Time-averaging window `[start, end]`.
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub expect: CurveExpect,
}

impl SweepSpec {
    pub fn detector(&self, f: &FieldConfig) -> Result<DetectorSpec, ScenarioError> {
        let sampling = match (self.t, self.window) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Invalid(
                    "detector-sweep: `t` and `window` are mutually exclusive".into(),
                ))
            }
            (Some(t), None) => Sampling::Instant { t },
            (None, Some([start, end])) => Sampling::Window { start, end },
            (None, None) => Sampling::Instant {
                t: f.crossing_time(),
            },
        };
        let d = DetectorSpec {
            center: Vec2::ZERO,
            aperture: self.aperture,
            sampling,
        };
        d.validate()
            .map_err(|e| ScenarioError::Invalid(format!("detector-sweep: {e}")))?;
        Ok(d)
    }

    pub fn line(&self) -> Segment {
        Segment::new(self.from.into(), self.to.into())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub label: Option<String>,
    pub paper_claim: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub assignment: AssignmentSpec,
    /// Polylines written to `trajectories.csv` and drawn in the overlay.
    #[serde(default = "default_keep")]
    pub keep_paths: usize,
    /// Time of the density slice under the overlay; defaults to the
    /// crossing time.
    pub heatmap_time: Option<f64>,
    /// Times at which the ensemble histogram is compared with the density.
    #[serde(default)]
    pub equivariance_times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub equivariance_bins: usize,
    #[serde(default)]
    pub step: StepControl,
    #[serde(default)]
    pub expect: BundleExpect,
}

fn default_keep() -> usize {
    60
}

fn default_bins() -> usize {
    40
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentSpec {
    #[default]
    Proportional,
    C,
    D,
}

impl From<AssignmentSpec> for AssignmentRule {
    fn from(a: AssignmentSpec) -> Self {
        match a {
            AssignmentSpec::Proportional => AssignmentRule::Proportional,
            AssignmentSpec::C => AssignmentRule::All(PacketLabel::C),
            AssignmentSpec::D => AssignmentRule::All(PacketLabel::D),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BundleExpect {
    pub axis_crossings: Option<usize>,
    /// Overall decided fraction ending on the C side, with tolerance.
    pub c_side_fraction: Option<f64>,
    #[serde(default = "default_fraction_tol")]
    pub c_side_tol: f64,
    /// Decided fraction of beam-c launches ending on the D side.
    pub launch_c_d_side_fraction: Option<f64>,
    pub max_undecided_fraction: Option<f64>,
    pub max_tv: Option<f64>,
    /// Above this fraction of truncated or failed trajectories the run is
    /// a numerical failure.
    #[serde(default = "default_max_truncated")]
    pub max_truncated_fraction: f64,
}

impl Default for BundleExpect {
    fn default() -> Self {
        Self {
            axis_crossings: None,
            c_side_fraction: None,
            c_side_tol: default_fraction_tol(),
            launch_c_d_side_fraction: None,
            max_undecided_fraction: None,
            max_tv: None,
            max_truncated_fraction: default_max_truncated(),
        }
    }
}

fn default_fraction_tol() -> f64 {
    0.033
}

fn default_max_truncated() -> f64 {
    0.01
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl Scenario {
    /// Parses scenario text. `origin` names the source in error messages.
    pub fn parse(src: &str, origin: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map(|sp| line_col(src, sp.start)).unwrap_or((0, 0));
            ScenarioError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let src = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&src, &path.display().to_string())
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(ScenarioError::Invalid("scenario name is empty".into()));
        }
        if self.experiments.is_empty() {
            return Err(ScenarioError::Invalid(format!(
                "scenario `{}` lists no experiments",
                self.name
            )));
        }
        let f = self.field.build()?;
        for e in &self.experiments {
            match e {
                Experiment::DetectorSweep(s) => {
                    s.detector(&f)?;
                    if s.n < 3 {
                        return Err(ScenarioError::Invalid("detector-sweep needs n >= 3".into()));
                    }
                }
                Experiment::FringeProfile(s) if s.n < 3 => {
                    return Err(ScenarioError::Invalid("fringe-profile needs n >= 3".into()));
                }
                Experiment::TrajectoryBundle(b) => {
                    if b.n == 0 {
                        return Err(ScenarioError::Invalid(
                            "trajectory-bundle needs n >= 1".into(),
                        ));
                    }
                    if b.t1.partial_cmp(&b.t0) != Some(std::cmp::Ordering::Greater) {
                        return Err(ScenarioError::Invalid(format!(
                            "trajectory-bundle: t1 = {} must exceed t0 = {}",
                            b.t1, b.t0
                        )));
                    }
                }
                Experiment::ConditionalProbabilities(c) if c.queries.is_empty() => {
                    return Err(ScenarioError::Invalid(
                        "conditional-probabilities lists no [[experiment.query]]".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}
