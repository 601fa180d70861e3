//! Detector sweeps through and around the overlap region.

use std::f64::consts::PI;

use chbohm_core::geometry::{Segment, Vec2};
use chbohm_core::histories::HistoryError;
use chbohm_core::scan::*;
use chbohm_core::wavefield::*;
use proptest::prelude::*;

fn field() -> FieldConfig {
    FieldConfig::symmetric_default()
}

fn region_line() -> Segment {
    Segment::new(Vec2::new(40.0, -3.0), Vec2::new(40.0, 3.0))
}

fn pre_line() -> Segment {
    Segment::new(Vec2::new(10.0, 15.0), Vec2::new(25.0, 7.5))
}

#[test]
fn rate_is_flat_before_the_overlap() {
    let f = field();
    let d = DetectorSpec::window(Vec2::ZERO, 0.05, 0.0, 2.0 * f.crossing_time());
    let curve = sweep(&f, pre_line(), &d, 41).unwrap();
    assert!(curve.rate_ratio() < 1.05, "ratio {}", curve.rate_ratio());
    assert!(curve.nodes.is_empty());
    // the far tail of beam d leaves only a negligible cross term here
    let worst = curve
        .overlaps
        .as_ref()
        .unwrap()
        .iter()
        .zip(&curve.rates)
        .map(|(o, r)| o / r)
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn sweep_through_the_overlap_finds_fringe_nodes() {
    let f = field();
    let d = DetectorSpec::instant(Vec2::ZERO, 0.005, f.crossing_time());
    let curve = sweep(&f, region_line(), &d, 241).unwrap();
    assert!(curve.nodes.len() >= 4);
    let spacing = curve.central_node_spacing(3.0, 4).unwrap();
    assert!((spacing - PI / 5.0).abs() < 0.05 * PI / 5.0);
    assert!(curve.warnings.is_empty());

    // same minima as the point-density profile, within one scan step
    let prof = fringe_profile(&f, region_line(), f.crossing_time(), 241).unwrap();
    let step = region_line().length() / 240.0;
    assert_eq!(prof.nodes.len(), curve.nodes.len());
    for (a, b) in prof.nodes.iter().zip(&curve.nodes) {
        assert!((a - b).abs() < step);
    }
}

#[test]
fn incoherent_sweep_has_no_nodes() {
    let f = field().with_mode(FieldMode::Incoherent);
    let d = DetectorSpec::instant(Vec2::ZERO, 0.005, f.crossing_time());
    let curve = sweep(&f, region_line(), &d, 241).unwrap();
    assert!(curve.nodes.is_empty());
    assert!(curve.fringe_free);
    assert!(curve.overlaps.is_none());
}

#[test]
fn incoherent_rate_at_a_node_is_ordinary() {
    let coh = field();
    let inc = coh.with_mode(FieldMode::Incoherent);
    let t = coh.crossing_time();
    let node = Vec2::new(40.0, PI / 10.0);
    let at = |f: &FieldConfig, y: f64| {
        count_rate(f, &DetectorSpec::instant(Vec2::new(40.0, y), 0.005, t))
    };
    let neighbours = 0.5 * (at(&inc, 0.0) + at(&inc, PI / 5.0));
    let r = count_rate(&inc, &DetectorSpec::instant(node, 0.005, t));
    assert!((r - neighbours).abs() < 0.2 * neighbours);
    let small = |y: f64| count_rate(&coh, &DetectorSpec::instant(Vec2::new(40.0, y), 1e-3, t));
    assert!(small(node.y) < 1e-4 * small(0.0));
}

#[test]
fn overlap_diagnostic_by_region() {
    let f = field();
    let t = f.crossing_time();
    let before = DetectorSpec::instant(f.c.center_at(0.5), 0.1, 0.5);
    assert!(aperture_decoherence(&f, &before).norm() < 1e-10);
    let after = DetectorSpec::instant(f.c.center_at(8.0), 0.1, 8.0);
    assert!(aperture_decoherence(&f, &after).norm() < 1e-10);
    let anti = DetectorSpec::instant(f.crossing_point(), 0.05, t);
    let terms = aperture_terms(&f, &anti);
    assert!(terms.overlap.norm() > 0.5 * terms.diag_c.max(terms.diag_d));
}

#[test]
fn conditioning_on_a_dark_detector_is_undefined() {
    let f = field();
    let t = f.crossing_time();
    let d = DetectorSpec::instant(Vec2::new(40.0, PI / 10.0), 0.005, t);
    let peak = count_rate(&f, &d.at(f.crossing_point()));
    assert!(matches!(
        which_path_given_detection(&f, &d, NODE_TOL * peak, 1e-6),
        Err(HistoryError::ZeroProbabilityCondition { .. })
    ));
}

#[test]
fn rate_additivity_across_the_sweep() {
    let f = field();
    let t = f.crossing_time();
    let line = Segment::new(Vec2::new(30.0, 8.0), Vec2::new(50.0, -8.0));
    for s in line.arc_positions(50) {
        for d in [
            DetectorSpec::instant(line.at(s), 0.05, t),
            DetectorSpec::window(line.at(s), 0.05, t - 0.1, t + 0.1),
        ] {
            let terms = aperture_terms(&f, &d);
            let rate = count_rate(&f, &d);
            let sum = terms.diag_c + terms.diag_d + 2.0 * terms.overlap.re;
            assert!((rate - sum).abs() < 1e-10, "{rate} vs {sum}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_nonnegative_and_additive(
        x in 30.0..50.0f64,
        y in -5.0..5.0f64,
        a in 0.001..0.5f64,
        t in 3.0..5.0f64,
    ) {
        let f = field();
        let d = DetectorSpec::instant(Vec2::new(x, y), a, t);
        let terms = aperture_terms(&f, &d);
        let rate = count_rate(&f, &d);
        prop_assert!(rate >= 0.0);
        prop_assert!((rate - (terms.diag_c + terms.diag_d + 2.0 * terms.overlap.re)).abs() < 1e-10);
        // Cauchy-Schwarz on the aperture
        prop_assert!(terms.overlap.norm() <= (terms.diag_c * terms.diag_d).sqrt() * (1.0 + 1e-9) + 1e-300);
    }
}
