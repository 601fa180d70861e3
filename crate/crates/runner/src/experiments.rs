//! Execution of each experiment kind.

use chbohm_core::bohm::{
    equivariance_tv, support_box, trajectory_bundle, AssignmentRule, BundleOptions, GuidanceField,
    Sampler,
};
use chbohm_core::curve::ScanCurve;
use chbohm_core::geometry::Segment;
use chbohm_core::histories::{
    build_standard_model_with, conditional_probability, consistency_report, standard_family,
    Completion, Event, Family, HistoryError, Model,
};
use chbohm_core::scan::sweep;
use chbohm_core::wavefield::{fringe_profile, FieldConfig, FieldMode, PacketLabel};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{RunError, ScenarioError};
use crate::plot;
use crate::report::Check;
use crate::scenario::*;

/// Everything an experiment produces before it is written out.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
    /// `(file suffix, contents)`; the runner prefixes the experiment id.
    pub files: Vec<(String, Vec<u8>)>,
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub field: FieldConfig,
    pub seed: u64,
}

fn invalid(e: impl std::fmt::Display) -> RunError {
    RunError::Scenario(ScenarioError::Invalid(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn run(ctx: &Context, id: &str, e: &Experiment) -> Result<Outcome, RunError> {
    match e {
        Experiment::HistoriesReport(s) => histories_report(ctx, s),
        Experiment::ConditionalProbabilities(s) => conditionals(ctx, s),
        Experiment::FringeProfile(s) => fringe(ctx, s),
        Experiment::DetectorSweep(s) => detector_sweep(ctx, s),
        Experiment::TrajectoryBundle(s) => bundle(ctx, id, s),
    }
}

fn model_and_family(
    ctx: &Context,
    completion: Completion,
    kind: chbohm_core::histories::FamilyKind,
) -> Result<(Model, Family), RunError> {
    let m = build_standard_model_with(ctx.scenario.model.variant, completion);
    let f = standard_family(&m, kind).map_err(invalid)?;
    Ok((m, f))
}

fn histories_report(ctx: &Context, s: &HistoriesReportSpec) -> Result<Outcome, RunError> {
    let completion = ctx.scenario.model.completion;
    let (m, f) = model_and_family(ctx, completion, s.family)?;
    let report = consistency_report(&m, &f, s.tol).map_err(invalid)?;
    let mut checks = Vec::new();
    let ex = &s.expect;
    if let Some(want) = &ex.weights {
        if want.len() != report.weights.len() {
            return Err(invalid(format!(
                "expected {} weights, family has {} histories",
                want.len(),
                report.weights.len()
            )));
        }
        for (w, &v) in report.weights.iter().zip(want) {
            checks.push(Check::close(
                format!("weight {}", w.history),
                w.weight,
                v,
                ex.tol,
            ));
        }
    }
    if let Some(c) = ex.consistent {
        checks.push(Check::equals(
            "consistent (medium)",
            report.consistent_medium,
            c,
        ));
    }
    if let Some(v) = ex.offdiag_max_abs {
        checks.push(Check::close(
            "max |off-diagonal D|",
            report.offdiag_max_abs,
            v,
            ex.tol,
        ));
    }
    let mut completion_difference = Value::Null;
    if s.compare_completions {
        let other = match completion {
            Completion::Canonical => Completion::Alternate,
            Completion::Alternate => Completion::Canonical,
        };
        let (m2, f2) = model_and_family(ctx, other, s.family)?;
        let r2 = consistency_report(&m2, &f2, s.tol).map_err(invalid)?;
        let mut diff = (report.offdiag_max_abs - r2.offdiag_max_abs).abs();
        for (a, b) in report.weights.iter().zip(&r2.weights) {
            diff = diff.max((a.weight - b.weight).abs());
        }
        if report.consistent_medium != r2.consistent_medium {
            diff = f64::INFINITY;
        }
        completion_difference = diff.into();
        if let Some(max) = ex.max_completion_difference {
            checks.push(Check::below("difference between completions", diff, max));
        }
    }
    Ok(Outcome {
        checks,
        result: json!({
            "variant": ctx.scenario.model.variant,
            "completion": completion,
            "family": s.family,
            "report": to_json(&report),
            "completion_difference": completion_difference,
        }),
        files: Vec::new(),
    })
}

/// `"name@time"`, `"a@t1 & b@t2"` or `"all"`.
fn parse_event(f: &Family, text: &str) -> Result<Event, RunError> {
    if text.trim() == "all" {
        return Ok(Event::all(f));
    }
    let mut ev = Event::all(f);
    for part in text.split('&') {
        let (name, time) = part
            .trim()
            .rsplit_once('@')
            .ok_or_else(|| invalid(format!("event `{part}` is not of the form name@time")))?;
        ev = ev.and(&Event::projector(f, time.trim(), name.trim()).map_err(invalid)?);
    }
    Ok(ev)
}

fn conditionals(ctx: &Context, s: &ConditionalSpec) -> Result<Outcome, RunError> {
    let (m, f) = model_and_family(ctx, ctx.scenario.model.completion, s.family)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for q in &s.queries {
        let given = parse_event(&f, &q.given)?;
        let cond = parse_event(&f, &q.condition)?;
        let label = format!("Pr({} | {})", q.given, q.condition);
        let (value, outcome, detail) = match conditional_probability(&m, &f, &given, &cond, s.tol) {
            Ok(p) => (Some(p), "defined", String::new()),
            Err(e @ HistoryError::ZeroProbabilityCondition { .. }) => {
                (None, "undefined", e.to_string())
            }
            Err(e @ HistoryError::InconsistentFamily { .. }) => {
                (None, "inconsistent", e.to_string())
            }
            Err(e) => return Err(invalid(e)),
        };
        match (&q.expect, value) {
            (Some(Expectation::Value(want)), Some(v)) => {
                checks.push(Check::close(label.clone(), v, *want, s.check_tol))
            }
            (Some(Expectation::Value(want)), None) => checks.push(Check {
                name: label.clone(),
                value: outcome.into(),
                expected: format!("{want}"),
                pass: false,
            }),
            (Some(Expectation::Outcome(want)), _) => checks.push(Check::equals(
                label.clone(),
                outcome.to_string(),
                want.clone(),
            )),
            (None, _) => {}
        }
        rows.push(json!({
            "given": q.given,
            "condition": q.condition,
            "value": value,
            "outcome": outcome,
            "detail": detail,
        }));
    }
    Ok(Outcome {
        checks,
        result: json!({
            "variant": ctx.scenario.model.variant,
            "family": s.family,
            "queries": rows,
        }),
        files: Vec::new(),
    })
}

fn curve_checks(curve: &ScanCurve, ex: &CurveExpect) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(n) = ex.min_nodes {
        checks.push(Check::count_at_least("nodes", curve.nodes.len(), n));
    }
    if let Some(n) = ex.max_nodes {
        checks.push(Check::count_at_most("nodes", curve.nodes.len(), n));
    }
    if let Some(want) = ex.node_spacing {
        let centre = 0.5 * curve.line.length();
        let got = curve.central_node_spacing(centre, 4).unwrap_or(f64::NAN);
        checks.push(Check {
            name: "central node spacing".into(),
            value: if got.is_finite() {
                got.into()
            } else {
                Value::Null
            },
            expected: format!("{want} +- {}%", ex.spacing_rel_tol * 100.0),
            pass: (got - want).abs() <= ex.spacing_rel_tol * want,
        });
    }
    if let Some(max) = ex.max_rate_ratio {
        checks.push(Check::below("max/min rate", curve.rate_ratio(), max));
    }
    checks
}

fn curve_summary(curve: &ScanCurve) -> Value {
    json!({
        "line": curve.line,
        "samples": curve.positions.len(),
        "max_rate": curve.max_rate(),
        "min_rate": curve.min_rate(),
        "rate_ratio": curve.rate_ratio(),
        "nodes": curve.nodes,
        "node_points": curve.node_points(),
        "node_spacings": curve.node_spacings(),
        "node_tol": curve.node_tol,
        "fringe_free": curve.fringe_free,
        "warnings": curve.warnings,
    })
}

fn curve_svg(title: &str, ylabel: &str, curve: &ScanCurve) -> Vec<u8> {
    plot::line_plot(
        title,
        "position along line",
        ylabel,
        &curve.positions,
        &curve.rates,
        &curve.nodes,
    )
    .into_bytes()
}

fn fringe(ctx: &Context, s: &FringeSpec) -> Result<Outcome, RunError> {
    let f = &ctx.field;
    let t = s.t.unwrap_or_else(|| f.crossing_time());
    let line = Segment::new(s.from.into(), s.to.into());
    let curve = fringe_profile(f, line, t, s.n).map_err(invalid)?;
    let csv = csv_bytes(
        &["s", "x", "y", "density"],
        curve
            .positions
            .iter()
            .zip(&curve.points)
            .zip(&curve.rates)
            .map(|((s, p), r)| {
                vec![
                    s.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    r.to_string(),
                ]
            }),
    );
    let svg = curve_svg(&format!("density at t = {t}"), "density", &curve);
    let mut result = curve_summary(&curve);
    result["t"] = t.into();
    result["fringe_spacing"] = f.fringe_spacing().into();
    Ok(Outcome {
        checks: curve_checks(&curve, &s.expect),
        result,
        files: vec![("profile.csv".into(), csv), ("profile.svg".into(), svg)],
    })
}

fn detector_sweep(ctx: &Context, s: &SweepSpec) -> Result<Outcome, RunError> {
    let f = &ctx.field;
    let d = s.detector(f)?;
    let curve = sweep(f, s.line(), &d, s.n).map_err(invalid)?;
    let overlaps = curve.overlaps.clone();
    let csv = csv_bytes(
        &["s", "x", "y", "rate", "overlap_abs"],
        curve
            .positions
            .iter()
            .zip(&curve.points)
            .zip(&curve.rates)
            .enumerate()
            .map(|(i, ((s, p), r))| {
                let o = overlaps
                    .as_ref()
                    .map_or(String::new(), |o| o[i].to_string());
                vec![
                    s.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    r.to_string(),
                    o,
                ]
            }),
    );
    let svg = curve_svg("detector count rate", "rate", &curve);
    let mut result = curve_summary(&curve);
    result["detector"] = to_json(&d);
    result["max_overlap_abs"] = overlaps.as_ref().map_or(Value::Null, |o| {
        o.iter().copied().fold(0.0, f64::max).into()
    });
    Ok(Outcome {
        checks: curve_checks(&curve, &s.expect),
        result,
        files: vec![("sweep.csv".into(), csv), ("sweep.svg".into(), svg)],
    })
}

/// Density an ensemble with this assignment should follow, if any.
fn reference_density(f: &FieldConfig, a: AssignmentRule) -> Option<FieldConfig> {
    match (a, f.mode) {
        (AssignmentRule::Proportional, _) => Some(*f),
        (AssignmentRule::All(l), FieldMode::Incoherent) => Some(FieldConfig::single(*f.packet(l))),
        (AssignmentRule::All(_), FieldMode::Coherent) => None,
    }
}

fn bundle(ctx: &Context, id: &str, s: &BundleSpec) -> Result<Outcome, RunError> {
    let f = ctx.field;
    let g = GuidanceField::new(f);
    let assignment: AssignmentRule = s.assignment.into();
    let opts = BundleOptions {
        n: s.n,
        t0: s.t0,
        t1: s.t1,
        sampler: Sampler::new(s.sampler, assignment, ctx.seed),
        ctrl: s.step,
        snapshot_times: s.equivariance_times.clone(),
        keep_paths: s.keep_paths,
    };
    let report = trajectory_bundle(&g, &opts).map_err(|e| RunError::Numerical {
        experiment: id.to_string(),
        message: e.to_string(),
    })?;
    let lost = (report.truncated + report.failed) as f64 / report.n as f64;
    if lost > s.expect.max_truncated_fraction {
        return Err(RunError::Numerical {
            experiment: id.to_string(),
            message: format!(
                "{} of {} trajectories truncated or failed at nodes (limit {})",
                report.truncated + report.failed,
                report.n,
                s.expect.max_truncated_fraction
            ),
        });
    }

    let mut tv = Vec::new();
    if let Some(reference) = reference_density(&f, assignment) {
        for &t in &s.equivariance_times {
            let Some(snap) = report
                .snapshot_at(t)
                .or_else(|| (t == s.t1).then(|| report.snapshots.last()).flatten())
            else {
                continue;
            };
            let (lo, hi) = support_box(&reference, t, 4.0);
            let d = equivariance_tv(
                &reference,
                &snap.positions,
                report.n,
                t,
                s.equivariance_bins,
                lo,
                hi,
            );
            tv.push(json!({ "t": t, "bins": s.equivariance_bins, "tv": d }));
        }
    }

    let mut checks = Vec::new();
    let ex = &s.expect;
    if let Some(n) = ex.axis_crossings {
        checks.push(Check::equals(
            "symmetry-axis crossings",
            report.axis_crossings,
            n,
        ));
    }
    if let Some(want) = ex.c_side_fraction {
        checks.push(Check::close(
            "decided fraction ending C_side",
            report.overall.decided_fraction_c_side,
            want,
            ex.c_side_tol,
        ));
    }
    if let Some(want) = ex.launch_c_d_side_fraction {
        let got = report
            .launched(PacketLabel::C)
            .map_or(f64::NAN, |b| b.decided_fraction_d_side);
        checks.push(Check::close(
            "beam-c launches ending D_side",
            got,
            want,
            1e-12,
        ));
    }
    if let Some(max) = ex.max_undecided_fraction {
        checks.push(Check::below(
            "undecided fraction",
            report.overall.undecided_fraction,
            max,
        ));
    }
    if let Some(max) = ex.max_tv {
        if tv.is_empty() {
            checks.push(Check {
                name: "equivariance TV".into(),
                value: Value::Null,
                expected: format!("< {max}"),
                pass: false,
            });
        }
        for v in &tv {
            let d = v["tv"].as_f64().unwrap_or(f64::NAN);
            checks.push(Check::below(
                format!("equivariance TV at t = {}", v["t"]),
                d,
                max,
            ));
        }
    }

    let traj_csv = csv_bytes(
        &["path", "launch", "t", "x", "y", "density"],
        report.paths.iter().enumerate().flat_map(|(i, tr)| {
            let launch = label_str(tr.launch);
            tr.points.iter().map(move |p| {
                vec![
                    i.to_string(),
                    launch.to_string(),
                    p.t.to_string(),
                    p.pos.x.to_string(),
                    p.pos.y.to_string(),
                    p.density.to_string(),
                ]
            })
        }),
    );
    let end_csv = csv_bytes(
        &["particle", "launch", "x", "y", "class"],
        report.endpoints.iter().enumerate().map(|(i, (p, l, c))| {
            vec![
                i.to_string(),
                label_str(*l).to_string(),
                p.x.to_string(),
                p.y.to_string(),
                serde_json::to_value(c)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
            ]
        }),
    );

    let heat_t = s.heatmap_time.unwrap_or_else(|| f.crossing_time());
    let paths: Vec<Vec<(f64, f64)>> = report
        .paths
        .iter()
        .map(|tr| tr.points.iter().map(|p| (p.pos.x, p.pos.y)).collect())
        .collect();
    let (mut lo, mut hi) = support_box(&f, s.t0, 3.0);
    let (lo1, hi1) = support_box(&f, s.t1, 3.0);
    lo = chbohm_core::Vec2::new(lo.x.min(lo1.x), lo.y.min(lo1.y));
    hi = chbohm_core::Vec2::new(hi.x.max(hi1.x), hi.y.max(hi1.y));
    let svg = plot::overlay(
        &format!("trajectories over |psi|^2 at t = {heat_t}"),
        (lo.x, lo.y),
        (hi.x, hi.y),
        (180, 110),
        |x, y| f.density(chbohm_core::Vec2::new(x, y), heat_t),
        &paths,
    );

    Ok(Outcome {
        checks,
        result: json!({
            "n": s.n,
            "t0": s.t0,
            "t1": s.t1,
            "seed": ctx.seed,
            "sampler": s.sampler,
            "assignment": s.assignment,
            "mode": f.mode,
            "report": to_json(&report),
            "equivariance": tv,
        }),
        files: vec![
            ("trajectories.csv".into(), traj_csv),
            ("endpoints.csv".into(), end_csv),
            ("overlay.svg".into(), svg.into_bytes()),
        ],
    })
}

fn label_str(l: Option<PacketLabel>) -> &'static str {
    match l {
        Some(PacketLabel::C) => "c",
        Some(PacketLabel::D) => "d",
        None => "",
    }
}
