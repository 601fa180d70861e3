//! Small-aperture detector swept along a line through the beams.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::locate_nodes;
pub use crate::curve::{ScanCurve, NODE_TOL};
use crate::geometry::{Segment, Vec2};
use crate::histories::HistoryError;
use crate::quadrature::{composite_nodes, integrate_rect};
use crate::wavefield::{FieldConfig, FieldMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("invalid detector: {0}")]
    InvalidDetector(String),
    #[error("need at least 3 sweep positions, got {0}")]
    TooFewSamples(usize),
}

/// When the detector integrates the density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sampling {
    Instant {
        t: f64,
    },
    /// Time average over `[start, end]`.
    Window {
        start: f64,
        end: f64,
    },
}

/// Square top-hat detector of half-width `aperture`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub center: Vec2,
    pub aperture: f64,
    pub sampling: Sampling,
}

impl DetectorSpec {
    pub fn instant(center: Vec2, aperture: f64, t: f64) -> Self {
        Self {
            center,
            aperture,
            sampling: Sampling::Instant { t },
        }
    }

    pub fn window(center: Vec2, aperture: f64, start: f64, end: f64) -> Self {
        Self {
            center,
            aperture,
            sampling: Sampling::Window { start, end },
        }
    }

    pub fn at(&self, center: Vec2) -> Self {
        Self { center, ..*self }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if !(self.aperture > 0.0) {
            return Err(ScanError::InvalidDetector(format!(
                "aperture must be positive, got {}",
                self.aperture
            )));
        }
        if let Sampling::Window { start, end } = self.sampling {
            if !(end > start) || start < 0.0 {
                return Err(ScanError::InvalidDetector(format!(
                    "bad time window [{start}, {end}]"
                )));
            }
        }
        Ok(())
    }

    /// Warning text when the aperture is too wide to register fringe nodes.
    pub fn resolution_warning(&self, f: &FieldConfig) -> Option<String> {
        let spacing = f.fringe_spacing();
        (self.aperture >= spacing / 4.0).then(|| {
            format!(
                "aperture {} is not below a quarter fringe spacing ({:.4}); nodes will be smeared",
                self.aperture,
                spacing / 4.0
            )
        })
    }
}

/// Aperture integrals of the two beam densities, their overlap and the
/// total coherent density, each integrated independently.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ApertureTerms {
    pub diag_c: f64,
    pub diag_d: f64,
    /// `integral conj(w_c psi_c) (w_d psi_d)`
    pub overlap: C64,
    /// `integral |w_c psi_c + w_d psi_d|^2`
    pub coherent: f64,
}

impl AddAssign for ApertureTerms {
    fn add_assign(&mut self, o: Self) {
        self.diag_c += o.diag_c;
        self.diag_d += o.diag_d;
        self.overlap += o.overlap;
        self.coherent += o.coherent;
    }
}

impl Mul<f64> for ApertureTerms {
    type Output = Self;
    fn mul(self, w: f64) -> Self {
        Self {
            diag_c: self.diag_c * w,
            diag_d: self.diag_d * w,
            overlap: self.overlap * w,
            coherent: self.coherent * w,
        }
    }
}

fn local_terms(f: &FieldConfig, x: Vec2, t: f64) -> ApertureTerms {
    let (a, b) = f.components(x, t);
    ApertureTerms {
        diag_c: a.norm_sqr(),
        diag_d: b.norm_sqr(),
        overlap: a.conj() * b,
        coherent: (a + b).norm_sqr(),
    }
}

fn spatial_terms(f: &FieldConfig, d: &DetectorSpec, t: f64) -> ApertureTerms {
    let cell = f.resolution(t).min(d.aperture);
    let (c, a) = (d.center, d.aperture);
    integrate_rect(c.x - a, c.x + a, c.y - a, c.y + a, cell, |x, y| {
        local_terms(f, Vec2::new(x, y), t)
    })
}

/// Aperture terms at the detector's sampling time (or averaged over its
/// window).
pub fn aperture_terms(f: &FieldConfig, d: &DetectorSpec) -> ApertureTerms {
    match d.sampling {
        Sampling::Instant { t } => spatial_terms(f, d, t),
        Sampling::Window { start, end } => {
            let dt = f.resolution(start) / f.beam_speed().max(1e-12);
            let mut acc = ApertureTerms::default();
            for (t, w) in composite_nodes(start, end, dt) {
                acc += spatial_terms(f, d, t) * w;
            }
            acc * (1.0 / (end - start))
        }
    }
}

/// Probability-per-unit-time proxy for the detector firing: the aperture
/// integral of the density.
pub fn count_rate(f: &FieldConfig, d: &DetectorSpec) -> f64 {
    let t = aperture_terms(f, d);
    match f.mode {
        FieldMode::Coherent => t.coherent,
        FieldMode::Incoherent => t.diag_c + t.diag_d,
    }
}

/// Aperture overlap of the two beams. Its magnitude measures how badly
/// "which beam" histories fail to decohere at this detector.
pub fn aperture_decoherence(f: &FieldConfig, d: &DetectorSpec) -> C64 {
    aperture_terms(f, d).overlap
}

/// `Pr(beam c | detector fires)` treating the two beams as the histories
/// of a which-path family restricted to the aperture.
///
/// Fails with `ZeroProbabilityCondition` where the rate is below
/// `zero_tol`, then with `InconsistentFamily` where the overlap exceeds
/// `rel_tol` times the diagonal sum.
pub fn which_path_given_detection(
    f: &FieldConfig,
    d: &DetectorSpec,
    zero_tol: f64,
    rel_tol: f64,
) -> Result<f64, HistoryError> {
    let t = aperture_terms(f, d);
    let rate = count_rate(f, d);
    if rate < zero_tol {
        return Err(HistoryError::ZeroProbabilityCondition { probability: rate });
    }
    let diag = t.diag_c + t.diag_d;
    if f.mode == FieldMode::Coherent && t.overlap.norm() > rel_tol * diag {
        return Err(HistoryError::InconsistentFamily {
            offdiag: t.overlap.norm() / diag,
        });
    }
    Ok(t.diag_c / diag)
}

/// Count rates at `n` detector positions along `line`.
pub fn sweep(
    f: &FieldConfig,
    line: Segment,
    template: &DetectorSpec,
    n: usize,
) -> Result<ScanCurve, ScanError> {
    if n < 3 {
        return Err(ScanError::TooFewSamples(n));
    }
    template.validate()?;
    let positions = line.arc_positions(n);
    let points: Vec<Vec2> = positions.iter().map(|&s| line.at(s)).collect();
    let terms: Vec<ApertureTerms> = points
        .par_iter()
        .map(|&p| aperture_terms(f, &template.at(p)))
        .collect();
    let rate_of = |t: &ApertureTerms| match f.mode {
        FieldMode::Coherent => t.coherent,
        FieldMode::Incoherent => t.diag_c + t.diag_d,
    };
    let rates: Vec<f64> = terms.iter().map(rate_of).collect();
    let overlaps =
        (f.mode == FieldMode::Coherent).then(|| terms.iter().map(|t| t.overlap.norm()).collect());
    let nodes = locate_nodes(&positions, &rates, NODE_TOL, |s| {
        count_rate(f, &template.at(line.at(s)))
    });
    Ok(ScanCurve {
        line,
        positions,
        points,
        rates,
        overlaps,
        nodes,
        node_tol: NODE_TOL,
        fringe_free: f.mode == FieldMode::Incoherent,
        warnings: template.resolution_warning(f).into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> FieldConfig {
        FieldConfig::symmetric_default()
    }

    #[test]
    fn wide_detector_on_one_beam_sees_half() {
        let f = field();
        let d = DetectorSpec::instant(f.c.center0, 12.0, 0.0);
        assert!((count_rate(&f, &d) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn detector_validation() {
        let d = DetectorSpec::instant(Vec2::ZERO, 0.0, 0.0);
        assert!(d.validate().is_err());
        let d = DetectorSpec::window(Vec2::ZERO, 0.1, 2.0, 1.0);
        assert!(d.validate().is_err());
        let f = field();
        assert!(DetectorSpec::instant(Vec2::ZERO, 0.2, 0.0)
            .resolution_warning(&f)
            .is_some());
        assert!(DetectorSpec::instant(Vec2::ZERO, 0.01, 0.0)
            .resolution_warning(&f)
            .is_none());
    }

    #[test]
    fn sweep_needs_three_positions() {
        let f = field();
        let seg = Segment::new(Vec2::new(40.0, -1.0), Vec2::new(40.0, 1.0));
        let d = DetectorSpec::instant(Vec2::ZERO, 0.01, 4.0);
        assert_eq!(
            sweep(&f, seg, &d, 2).unwrap_err(),
            ScanError::TooFewSamples(2)
        );
    }

    #[test]
    fn node_rate_is_tiny() {
        let f = field();
        let t = f.crossing_time();
        let node = Vec2::new(40.0, std::f64::consts::PI / 10.0);
        let peak = count_rate(&f, &DetectorSpec::instant(f.crossing_point(), 1e-3, t));
        let at_node = count_rate(&f, &DetectorSpec::instant(node, 1e-3, t));
        assert!(at_node <= 1e-4 * peak, "{at_node} vs {peak}");
    }

    #[test]
    fn which_path_inference_by_region() {
        let f = field();
        let t = f.crossing_time();
        // before the overlap region, on beam c
        let before = DetectorSpec::instant(f.c.center0, 0.05, 0.0);
        let p = which_path_given_detection(&f, &before, 1e-12, 1e-6).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
        // antinode inside the overlap
        let anti = DetectorSpec::instant(f.crossing_point(), 0.05, t);
        assert!(matches!(
            which_path_given_detection(&f, &anti, 1e-12, 1e-6),
            Err(HistoryError::InconsistentFamily { .. })
        ));
        // node inside the overlap
        let node = DetectorSpec::instant(Vec2::new(40.0, std::f64::consts::PI / 10.0), 0.005, t);
        let peak = count_rate(&f, &node.at(f.crossing_point()));
        assert!(matches!(
            which_path_given_detection(&f, &node, NODE_TOL * peak, 1e-6),
            Err(HistoryError::ZeroProbabilityCondition { .. })
        ));
    }
}
