//! Consistent-histories calculus on the discrete interferometer model.
//!
//! The model space is spanned by `sCD` (particle at the source, both
//! detectors ready), `cCD` / `dCD` (particle in arm c / d) and `C*D` / `CD*`
//! (detector C / D has fired). A history is a chain of projectors at model
//! times, starting with the initial-state projector at `t0`.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{
    self, apply, check_unitary, inner, projector_from, Basis, HilbertError, Operator, StateVector,
    C64,
};

/// Default threshold for consistency and probability checks.
pub const DEFAULT_TOL: f64 = 1e-10;

pub const BASIS_LABELS: [&str; 5] = ["sCD", "cCD", "dCD", "C*D", "CD*"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("time label `{0}` is not a model time")]
    TimeLabelUnknown(String),
    #[error("history times {0:?} are not an ordered subsequence of the model times")]
    TimesOutOfOrder(Vec<String>),
    #[error("histories do not share time labels")]
    TimesMismatch,
    #[error("projectors `{a}` and `{b}` at {time} are not orthogonal (max |PQ| = {overlap:e})")]
    NonOrthogonalSet {
        time: String,
        a: String,
        b: String,
        overlap: f64,
    },
    #[error("family is inconsistent (max off-diagonal |D| = {offdiag:e})")]
    InconsistentFamily { offdiag: f64 },
    #[error("conditioning event has zero probability ({probability:e})")]
    ZeroProbabilityCondition { probability: f64 },
    #[error("no projector `{name}` at time {time} in this family")]
    UnknownEvent { time: String, name: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, HistoryError>;

/// Which discrete setup to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Times t0 < t1 < t2, detectors in the arms' exit lines.
    Plain,
    /// Adds an idle intermediate time t3 between t1 and t2.
    WithT3,
    /// Arms are mixed 50/50 between t1 and t3 before detection at t2,
    /// modelling a detector placed inside the overlap region.
    Recombined,
}

/// Choice of how the partially specified preparation/detection maps are
/// extended to full unitaries. History weights must not depend on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    #[default]
    Canonical,
    Alternate,
}

#[derive(Clone, Debug)]
pub struct Model {
    basis: Basis,
    initial_state: StateVector,
    times: Vec<String>,
    /// `unitaries[i]` evolves from `times[i]` to `times[i + 1]`.
    unitaries: Vec<Operator>,
}

impl Model {
    pub fn new(
        initial_state: StateVector,
        times: Vec<String>,
        unitaries: Vec<Operator>,
    ) -> Result<Self> {
        if !initial_state.is_normalized(1e-12) {
            return Err(HistoryError::InvalidModel(format!(
                "initial state has norm {}",
                initial_state.norm()
            )));
        }
        if times.is_empty() || unitaries.len() + 1 != times.len() {
            return Err(HistoryError::InvalidModel(format!(
                "{} times need {} unitaries, got {}",
                times.len(),
                times.len().saturating_sub(1),
                unitaries.len()
            )));
        }
        let distinct: BTreeSet<&String> = times.iter().collect();
        if distinct.len() != times.len() {
            return Err(HistoryError::InvalidModel("repeated time label".into()));
        }
        for (i, u) in unitaries.iter().enumerate() {
            if u.basis() != initial_state.basis() {
                return Err(HilbertError::DimensionMismatch(format!(
                    "unitary {} -> {} acts on another basis",
                    times[i],
                    times[i + 1]
                ))
                .into());
            }
            if !check_unitary(u, hilbert::TAG_TOL) {
                return Err(HilbertError::NotUnitary {
                    deviation: u.unitarity_deviation(),
                }
                .into());
            }
        }
        Ok(Self {
            basis: initial_state.basis().clone(),
            initial_state,
            times,
            unitaries,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn space_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn has_time(&self, label: &str) -> bool {
        self.times.iter().any(|t| t == label)
    }

    pub fn time_index(&self, label: &str) -> Result<usize> {
        self.times
            .iter()
            .position(|t| t == label)
            .ok_or_else(|| HistoryError::TimeLabelUnknown(label.to_string()))
    }

    /// The single-segment evolution `U(times[i+1], times[i])`.
    pub fn segment(&self, i: usize) -> &Operator {
        &self.unitaries[i]
    }

    /// `U(to, from)` as a product of segment unitaries.
    pub fn propagator(&self, from: &str, to: &str) -> Result<Operator> {
        let a = self.time_index(from)?;
        let b = self.time_index(to)?;
        if b < a {
            return Err(HistoryError::TimesOutOfOrder(vec![from.into(), to.into()]));
        }
        let mut u = Operator::identity(self.basis.clone());
        for seg in &self.unitaries[a..b] {
            u = seg.compose(&u)?;
        }
        Ok(u)
    }

    /// Unprojected (Born) state at a model time.
    pub fn state_at(&self, label: &str) -> Result<StateVector> {
        let u = self.propagator(&self.times[0], label)?;
        Ok(apply(&u, &self.initial_state)?)
    }

    /// Projector onto the initial state, for use at `t0`.
    pub fn initial_projector(&self) -> Result<Projector> {
        Projector::onto("psi0", &self.initial_state)
    }
}

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn combo(basis: &Basis, terms: &[(&str, C64)]) -> StateVector {
    StateVector::from_labels(basis.clone(), terms).expect("standard labels")
}

fn images(basis: &Basis, cols: [Vec<(&str, C64)>; 5]) -> Operator {
    let imgs: Vec<StateVector> = cols.iter().map(|t| combo(basis, t)).collect();
    Operator::from_images(basis.clone(), &imgs)
        .and_then(Operator::into_unitary)
        .expect("standard completion is unitary")
}

/// `U(t1, t0)`: source ket into the balanced superposition of the arms.
fn preparation(basis: &Basis, completion: Completion) -> Operator {
    let h = FRAC_1_SQRT_2;
    match completion {
        Completion::Canonical => images(
            basis,
            [
                vec![("cCD", r(h)), ("dCD", r(h))],
                vec![("cCD", r(h)), ("dCD", r(-h))],
                vec![("sCD", r(1.0))],
                vec![("C*D", r(1.0))],
                vec![("CD*", r(1.0))],
            ],
        ),
        Completion::Alternate => {
            let ph = C64::from_polar(h, std::f64::consts::FRAC_PI_3);
            images(
                basis,
                [
                    vec![("cCD", r(h)), ("dCD", r(h))],
                    vec![("sCD", C64::i())],
                    vec![("cCD", -ph), ("dCD", ph)],
                    vec![("CD*", r(1.0))],
                    vec![("C*D", r(-1.0))],
                ],
            )
        }
    }
}

/// Arm c triggers C, arm d triggers D.
fn detection(basis: &Basis, completion: Completion) -> Operator {
    match completion {
        Completion::Canonical => images(
            basis,
            [
                vec![("sCD", r(1.0))],
                vec![("C*D", r(1.0))],
                vec![("CD*", r(1.0))],
                vec![("cCD", r(1.0))],
                vec![("dCD", r(1.0))],
            ],
        ),
        Completion::Alternate => images(
            basis,
            [
                vec![("dCD", r(-1.0))],
                vec![("C*D", r(1.0))],
                vec![("CD*", r(1.0))],
                vec![("sCD", C64::i())],
                vec![("cCD", r(1.0))],
            ],
        ),
    }
}

/// Balanced mixing of the two arms; identity elsewhere.
fn mixing(basis: &Basis, completion: Completion) -> Operator {
    let h = FRAC_1_SQRT_2;
    let d_image = match completion {
        Completion::Canonical => vec![("cCD", r(h)), ("dCD", r(-h))],
        Completion::Alternate => vec![("cCD", C64::new(0.0, h)), ("dCD", C64::new(0.0, -h))],
    };
    images(
        basis,
        [
            vec![("sCD", r(1.0))],
            vec![("cCD", r(h)), ("dCD", r(h))],
            d_image,
            vec![("C*D", r(1.0))],
            vec![("CD*", r(1.0))],
        ],
    )
}

pub fn standard_basis() -> Basis {
    Basis::new(BASIS_LABELS).expect("non-empty")
}

pub fn build_standard_model(variant: Variant) -> Model {
    build_standard_model_with(variant, Completion::Canonical)
}

pub fn build_standard_model_with(variant: Variant, completion: Completion) -> Model {
    let basis = standard_basis();
    let psi0 = basis.ket("sCD").expect("standard label");
    let prep = preparation(&basis, completion);
    let det = detection(&basis, completion);
    let (times, unitaries) = match variant {
        Variant::Plain => (vec!["t0", "t1", "t2"], vec![prep, det]),
        Variant::WithT3 => (
            vec!["t0", "t1", "t3", "t2"],
            vec![prep, Operator::identity(basis.clone()), det],
        ),
        Variant::Recombined => (
            vec!["t0", "t1", "t3", "t2"],
            vec![prep, mixing(&basis, completion), det],
        ),
    };
    Model::new(
        psi0,
        times.into_iter().map(String::from).collect(),
        unitaries,
    )
    .expect("standard model is valid")
}

/// A named orthogonal projector.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    name: String,
    op: Operator,
}

impl Projector {
    pub fn new(name: impl Into<String>, op: Operator) -> Result<Self> {
        let op = match op.kind() {
            hilbert::OperatorKind::Projector => op,
            _ => op.into_projector()?,
        };
        Ok(Self {
            name: name.into(),
            op,
        })
    }

    /// Rank-one projector onto a normalized state.
    pub fn onto(name: impl Into<String>, state: &StateVector) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            op: projector_from(state)?,
        })
    }

    /// `I - self`.
    pub fn complement(&self, name: impl Into<String>) -> Result<Self> {
        let op = Operator::identity(self.op.basis().clone()).sub(&self.op)?;
        Self::new(name, op)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }
}

/// Projectors of the discrete model by name: `psi0`, `c`, `d`, `c+d`,
/// `C*`, `D*` and the unfired-detector projectors `C = I - C*`, `D = I - D*`.
pub fn standard_projector(name: &str) -> Result<Projector> {
    let basis = standard_basis();
    let h = FRAC_1_SQRT_2;
    match name {
        "psi0" => Projector::onto(name, &basis.ket("sCD")?),
        "c" => Projector::onto(name, &basis.ket("cCD")?),
        "d" => Projector::onto(name, &basis.ket("dCD")?),
        "c+d" => Projector::onto(name, &combo(&basis, &[("cCD", r(h)), ("dCD", r(h))])),
        "C*" => Projector::onto(name, &basis.ket("C*D")?),
        "D*" => Projector::onto(name, &basis.ket("CD*")?),
        "C" => standard_projector("C*")?.complement(name),
        "D" => standard_projector("D*")?.complement(name),
        other => Err(HistoryError::UnknownEvent {
            time: "-".into(),
            name: other.into(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub time: String,
    pub projector: Projector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    initial: Projector,
    steps: Vec<Step>,
}

impl History {
    pub fn new(initial: Projector, steps: Vec<Step>) -> Self {
        Self { initial, steps }
    }

    pub fn initial(&self) -> &Projector {
        &self.initial
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn times(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.time.as_str())
    }

    pub fn projector_at(&self, time: &str) -> Option<&Projector> {
        self.steps
            .iter()
            .find(|s| s.time == time)
            .map(|s| &s.projector)
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.initial.name)?;
        for s in &self.steps {
            write!(f, " (x) {}@{}", s.projector.name, s.time)?;
        }
        Ok(())
    }
}

/// `P_n U(t_n, t_{n-1}) ... P_1 U(t_1, t_0) P_0 |psi0>`, not normalized.
pub fn chain_vector(m: &Model, h: &History) -> Result<StateVector> {
    let mut v = apply(h.initial.op(), m.initial_state())?;
    let mut prev = 0usize;
    for step in &h.steps {
        let idx = m.time_index(&step.time)?;
        if idx <= prev {
            return Err(HistoryError::TimesOutOfOrder(
                h.times().map(String::from).collect(),
            ));
        }
        let u = m.propagator(&m.times()[prev], &step.time)?;
        v = apply(step.projector.op(), &apply(&u, &v)?)?;
        prev = idx;
    }
    Ok(v)
}

pub fn weight(m: &Model, h: &History) -> Result<f64> {
    Ok(chain_vector(m, h)?.norm_sqr())
}

/// `D(h1, h2) = <C_h2 | C_h1>`.
pub fn decoherence_functional(m: &Model, h1: &History, h2: &History) -> Result<C64> {
    if !h1.times().eq(h2.times()) {
        return Err(HistoryError::TimesMismatch);
    }
    let a = chain_vector(m, h1)?;
    let b = chain_vector(m, h2)?;
    Ok(inner(&b, &a)?)
}

/// Exclusive histories built from one projector choice per time slot.
#[derive(Clone, Debug)]
pub struct Family {
    slots: Vec<(String, Vec<Projector>)>,
    histories: Vec<History>,
    choices: Vec<Vec<usize>>,
}

impl Family {
    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn slots(&self) -> &[(String, Vec<Projector>)] {
        &self.slots
    }

    /// Per slot: do the projectors sum to the identity (within `tol`)?
    pub fn completeness(&self, tol: f64) -> Vec<bool> {
        self.slots
            .iter()
            .map(|(_, set)| {
                let Some(first) = set.first() else {
                    return false;
                };
                let basis = first.op().basis().clone();
                let sum = set
                    .iter()
                    .try_fold(Operator::zero(basis.clone()), |acc, p| acc.add(p.op()))
                    .expect("family projectors share a basis");
                sum.max_abs_diff(&Operator::identity(basis))
                    .map(|d| d < tol)
                    .unwrap_or(false)
            })
            .collect()
    }
}

/// Cartesian product of per-time projector sets, first slot varying slowest.
pub fn enumerate_family_histories(
    initial: Projector,
    slots: Vec<(String, Vec<Projector>)>,
) -> Result<Family> {
    for (time, set) in &slots {
        for (i, a) in set.iter().enumerate() {
            for b in &set[i + 1..] {
                let overlap = a.op().compose(b.op())?.max_abs();
                if overlap > hilbert::TAG_TOL {
                    return Err(HistoryError::NonOrthogonalSet {
                        time: time.clone(),
                        a: a.name.clone(),
                        b: b.name.clone(),
                        overlap,
                    });
                }
            }
        }
    }
    let mut choices: Vec<Vec<usize>> = vec![Vec::new()];
    for (_, set) in &slots {
        choices = choices
            .into_iter()
            .flat_map(|prefix| {
                (0..set.len()).map(move |k| {
                    let mut c = prefix.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    let histories = choices
        .iter()
        .map(|choice| {
            let steps = choice
                .iter()
                .zip(&slots)
                .map(|(&k, (time, set))| Step {
                    time: time.clone(),
                    projector: set[k].clone(),
                })
                .collect();
            History::new(initial.clone(), steps)
        })
        .collect();
    Ok(Family {
        slots,
        histories,
        choices,
    })
}

/// The named families used throughout the analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `{c, d}` at t1 times `{C*, D*}` at t2.
    WhichPath,
    /// `{c+d}` at t3 times `{C*, D*}` at t2.
    Superposition,
    /// `{c, d}` at t1 times `{C*, C}` at t2 (C fired or not).
    Converse,
    /// `{c, d}` at t1 with the single final projector `C*`.
    WhichPathAtDetector,
}

pub fn standard_family(m: &Model, kind: FamilyKind) -> Result<Family> {
    let p = |n: &str| standard_projector(n);
    let slots = match kind {
        FamilyKind::WhichPath => vec![
            ("t1".to_string(), vec![p("c")?, p("d")?]),
            ("t2".to_string(), vec![p("C*")?, p("D*")?]),
        ],
        FamilyKind::Superposition => {
            if !m.has_time("t3") {
                return Err(HistoryError::TimeLabelUnknown("t3".into()));
            }
            vec![
                ("t3".to_string(), vec![p("c+d")?]),
                ("t2".to_string(), vec![p("C*")?, p("D*")?]),
            ]
        }
        FamilyKind::Converse => vec![
            ("t1".to_string(), vec![p("c")?, p("d")?]),
            ("t2".to_string(), vec![p("C*")?, p("C")?]),
        ],
        FamilyKind::WhichPathAtDetector => vec![
            ("t1".to_string(), vec![p("c")?, p("d")?]),
            ("t2".to_string(), vec![p("C*")?]),
        ],
    };
    for (t, _) in &slots {
        m.time_index(t)?;
    }
    enumerate_family_histories(m.initial_projector()?, slots)
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryWeight {
    pub history: String,
    pub weight: f64,
    pub dynamically_impossible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub tol: f64,
    pub weights: Vec<HistoryWeight>,
    /// Full decoherence matrix as `[re, im]` pairs, `D[i][j] = D(h_i, h_j)`.
    pub decoherence: Vec<Vec<[f64; 2]>>,
    pub offdiag_max_abs: f64,
    pub offdiag_max_realpart: f64,
    /// Largest `|D(h, h') + D(h', h)|`: the additivity defect of a pair.
    pub max_interference: f64,
    pub consistent_medium: bool,
    pub consistent_weak: bool,
    /// Per time slot, whether the projectors resolve the identity.
    pub complete: Vec<bool>,
}

impl ConsistencyReport {
    pub fn weight_of(&self, history: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|w| w.history == history)
            .map(|w| w.weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().map(|w| w.weight).sum()
    }
}

pub fn decoherence_matrix(m: &Model, f: &Family) -> Result<Vec<Vec<C64>>> {
    let chains = f
        .histories
        .iter()
        .map(|h| chain_vector(m, h))
        .collect::<Result<Vec<_>>>()?;
    chains
        .iter()
        .map(|a| {
            chains
                .iter()
                .map(|b| Ok(inner(b, a)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

pub fn consistency_report(m: &Model, f: &Family, tol: f64) -> Result<ConsistencyReport> {
    let dm = decoherence_matrix(m, f)?;
    let mut offdiag_max_abs: f64 = 0.0;
    let mut offdiag_max_realpart: f64 = 0.0;
    let mut max_interference: f64 = 0.0;
    for (i, row) in dm.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            if i != j {
                offdiag_max_abs = offdiag_max_abs.max(d.norm());
                offdiag_max_realpart = offdiag_max_realpart.max(d.re.abs());
                max_interference = max_interference.max((d + dm[j][i]).norm());
            }
        }
    }
    let weights = f
        .histories
        .iter()
        .zip(&dm)
        .enumerate()
        .map(|(i, (h, row))| HistoryWeight {
            history: h.to_string(),
            weight: row[i].re,
            dynamically_impossible: row[i].re < tol,
        })
        .collect();
    Ok(ConsistencyReport {
        tol,
        weights,
        decoherence: dm
            .iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
        offdiag_max_abs,
        offdiag_max_realpart,
        max_interference,
        consistent_medium: offdiag_max_abs < tol,
        consistent_weak: offdiag_max_realpart < tol,
        complete: f.completeness(1e-12),
    })
}

/// A union of whole histories of one family, stored as history indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Event(BTreeSet<usize>);

impl Event {
    /// Histories whose projector at `time` is named `name`.
    pub fn projector(f: &Family, time: &str, name: &str) -> Result<Self> {
        let unknown = || HistoryError::UnknownEvent {
            time: time.into(),
            name: name.into(),
        };
        let slot = f
            .slots
            .iter()
            .position(|(t, _)| t == time)
            .ok_or_else(unknown)?;
        let k = f.slots[slot]
            .1
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(unknown)?;
        Ok(Self(
            f.choices
                .iter()
                .enumerate()
                .filter(|(_, c)| c[slot] == k)
                .map(|(i, _)| i)
                .collect(),
        ))
    }

    /// Every history of the family; conditioning on it is conditioning on
    /// the initial state alone.
    pub fn all(f: &Family) -> Self {
        Self((0..f.len()).collect())
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        Self(indices.into_iter().collect())
    }

    pub fn and(&self, other: &Event) -> Self {
        Self(self.0.intersection(&other.0).copied().collect())
    }

    pub fn or(&self, other: &Event) -> Self {
        Self(self.0.union(&other.0).copied().collect())
    }

    pub fn not(&self, f: &Family) -> Self {
        Self((0..f.len()).filter(|i| !self.0.contains(i)).collect())
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

/// Probability of an event in a consistent family.
pub fn probability(m: &Model, f: &Family, event: &Event, tol: f64) -> Result<f64> {
    let report = consistency_report(m, f, tol)?;
    if !report.consistent_medium {
        return Err(HistoryError::InconsistentFamily {
            offdiag: report.offdiag_max_abs,
        });
    }
    Ok(event.indices().map(|i| report.weights[i].weight).sum())
}

/// `Pr(given | condition)` within one consistent family.
pub fn conditional_probability(
    m: &Model,
    f: &Family,
    given: &Event,
    condition: &Event,
    tol: f64,
) -> Result<f64> {
    let report = consistency_report(m, f, tol)?;
    if !report.consistent_medium {
        return Err(HistoryError::InconsistentFamily {
            offdiag: report.offdiag_max_abs,
        });
    }
    let w = |e: &Event| -> f64 { e.indices().map(|i| report.weights[i].weight).sum() };
    let denom = w(condition);
    if denom < tol {
        return Err(HistoryError::ZeroProbabilityCondition { probability: denom });
    }
    Ok(w(&given.and(condition)) / denom)
}
