//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero
//! exit if any fails. Thresholds are fixed here, not read from scenarios.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use chbohm_core::bohm::{
    integrate_trajectory, AssignmentRule, EndpointClass, GuidanceField, Sampler, SamplerKind,
    StepControl,
};
use chbohm_core::geometry::{Segment, Vec2};
use chbohm_core::histories::{
    build_standard_model_with, conditional_probability, consistency_report, standard_family,
    Completion, Event, FamilyKind, Variant,
};
use chbohm_core::quadrature::integrate_rect;
use chbohm_core::scan::{aperture_terms, count_rate, sweep, DetectorSpec};
use chbohm_core::wavefield::{FieldConfig, FieldMode, PacketLabel, PacketParams};
use chbohm_core::C64;
use chbohm_runner::{catalog, runner, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const EXACT: f64 = 1e-12;
const NORM_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-5;
const SPACING_REL_TOL: f64 = 0.05;
const FLAT_RATIO: f64 = 1.05;
const FRINGE_SECONDS: f64 = 10.0;
const SPLIT_TOL: f64 = 0.033;
const MAX_UNDECIDED: f64 = 0.01;
const STRAIGHT_TOL: f64 = 1e-3;
const MAX_TV: f64 = 0.05;
const EQUIVARIANCE_SECONDS: f64 = 120.0;
const Q_REL_TOL: f64 = 1e-5;
const Q_CENTRE_TOL: f64 = 1e-10;
const ADDITIVITY_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(parts: Vec<(bool, String)>) -> Outcome {
    Outcome {
        pass: parts.iter().all(|(p, _)| *p),
        detail: parts
            .into_iter()
            .map(|(p, d)| if p { d } else { format!("{d} [x]") })
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn failed(e: impl std::fmt::Display) -> Outcome {
    Outcome {
        pass: false,
        detail: format!("error: {e}"),
    }
}

fn weight(report: &chbohm_core::histories::ConsistencyReport, h: &str) -> f64 {
    report.weight_of(h).unwrap_or(f64::NAN)
}

fn history_weights() -> Outcome {
    let m = build_standard_model_with(Variant::Plain, Completion::Canonical);
    let f = standard_family(&m, FamilyKind::WhichPath).unwrap();
    let r = consistency_report(&m, &f, EXACT).unwrap();
    let mut parts = Vec::new();
    for (h, want) in [
        ("psi0 (x) c@t1 (x) C*@t2", 0.5),
        ("psi0 (x) c@t1 (x) D*@t2", 0.0),
        ("psi0 (x) d@t1 (x) C*@t2", 0.0),
        ("psi0 (x) d@t1 (x) D*@t2", 0.5),
    ] {
        let w = weight(&r, h);
        parts.push(((w - want).abs() <= EXACT, format!("{h} = {w:.3e}")));
    }
    outcome(parts)
}

fn conditional(
    variant: Variant,
    completion: Completion,
    kind: FamilyKind,
    given: (&str, &str),
    cond: (&str, &str),
) -> f64 {
    let m = build_standard_model_with(variant, completion);
    let f = standard_family(&m, kind).unwrap();
    let g = Event::projector(&f, given.0, given.1).unwrap();
    let c = Event::projector(&f, cond.0, cond.1).unwrap();
    conditional_probability(&m, &f, &g, &c, EXACT).unwrap_or(f64::NAN)
}

fn conditionals(completion: Completion) -> [f64; 3] {
    [
        conditional(
            Variant::Plain,
            completion,
            FamilyKind::WhichPath,
            ("t1", "c"),
            ("t2", "C*"),
        ),
        conditional(
            Variant::Plain,
            completion,
            FamilyKind::WhichPath,
            ("t1", "d"),
            ("t2", "D*"),
        ),
        conditional(
            Variant::Plain,
            completion,
            FamilyKind::Converse,
            ("t1", "c"),
            ("t2", "C"),
        ),
    ]
}

fn conditional_probabilities() -> Outcome {
    let [a, b, c] = conditionals(Completion::Canonical);
    outcome(vec![
        ((a - 1.0).abs() <= EXACT, format!("Pr(c|C*) = {a}")),
        ((b - 1.0).abs() <= EXACT, format!("Pr(d|D*) = {b}")),
        (c.abs() <= EXACT, format!("Pr(c|C) = {c}")),
    ])
}

/// Offdiag magnitude, medium consistency and weights of the three
/// classified families under one completion.
fn classification(completion: Completion) -> Vec<(f64, bool, Vec<f64>)> {
    [
        (Variant::Plain, FamilyKind::WhichPath),
        (Variant::WithT3, FamilyKind::Superposition),
        (Variant::Recombined, FamilyKind::WhichPath),
    ]
    .into_iter()
    .map(|(v, k)| {
        let m = build_standard_model_with(v, completion);
        let f = standard_family(&m, k).unwrap();
        let r = consistency_report(&m, &f, EXACT).unwrap();
        (
            r.offdiag_max_abs,
            r.consistent_medium,
            r.weights.iter().map(|w| w.weight).collect(),
        )
    })
    .collect()
}

fn consistency_classification() -> Outcome {
    let c = classification(Completion::Canonical);
    let (plain, sup, rec) = (&c[0], &c[1], &c[2]);
    outcome(vec![
        (
            plain.1 && plain.0 < EXACT,
            format!("which-path consistent, |D| = {:.1e}", plain.0),
        ),
        (
            sup.1 && sup.2.len() == 2 && sup.2.iter().all(|w| (w - 0.5).abs() <= EXACT),
            format!("superposition consistent={} weights {:?}", sup.1, sup.2),
        ),
        (
            !rec.1 && (rec.0 - 0.5).abs() <= EXACT,
            format!("recombined consistent={} |D| = {}", rec.1, rec.0),
        ),
    ])
}

fn completion_independence() -> Outcome {
    let a = classification(Completion::Canonical);
    let b = classification(Completion::Alternate);
    let mut diff: f64 = 0.0;
    let mut same_class = true;
    for (x, y) in a.iter().zip(&b) {
        diff = diff.max((x.0 - y.0).abs());
        same_class &= x.1 == y.1;
        for (u, v) in x.2.iter().zip(&y.2) {
            diff = diff.max((u - v).abs());
        }
    }
    for (u, v) in conditionals(Completion::Canonical)
        .iter()
        .zip(conditionals(Completion::Alternate))
    {
        diff = diff.max((u - v).abs());
    }
    outcome(vec![
        (
            same_class,
            format!("classification unchanged: {same_class}"),
        ),
        (diff < EXACT, format!("max difference {diff:.1e}")),
    ])
}

/// Sixth-order central differences.
fn d1(f: impl Fn(f64) -> C64, x: f64, h: f64) -> C64 {
    let c = [(1.0, 3.0 / 4.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 60.0)];
    c.iter()
        .map(|&(k, w)| (f(x + k * h) - f(x - k * h)) * w)
        .sum::<C64>()
        / h
}

fn d2(f: impl Fn(f64) -> C64, x: f64, h: f64) -> C64 {
    let c = [(1.0, 3.0 / 2.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 90.0)];
    (f(x) * (-49.0 / 18.0)
        + c.iter()
            .map(|&(k, w)| (f(x + k * h) + f(x - k * h)) * w)
            .sum::<C64>())
        / (h * h)
}

fn psi(f: &FieldConfig, x: Vec2, t: f64) -> C64 {
    let (a, b) = f.components(x, t);
    a + b
}

fn near_beams(rng: &mut ChaCha8Rng, f: &FieldConfig, t: f64, spread: f64) -> Vec2 {
    let p = if rng.random::<bool>() { &f.c } else { &f.d };
    p.center_at(t)
        + Vec2::new(
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        ) * p.sigma_at(t)
}

fn wavefield_normalization() -> Outcome {
    let f = FieldConfig::symmetric_default();
    let big_t = f.crossing_time();
    let mut parts = Vec::new();
    for t in [0.0, 0.5 * big_t, big_t, 2.0 * big_t] {
        let (lo, hi) = chbohm_core::bohm::support_box(&f, t, 9.0);
        let total: f64 = integrate_rect(lo.x, hi.x, lo.y, hi.y, 0.5, |x, y| {
            f.density(Vec2::new(x, y), t)
        });
        parts.push((
            (total - 1.0).abs() <= NORM_TOL,
            format!("P(t={t}) - 1 = {:.1e}", total - 1.0),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random_range(0.0..2.0 * big_t);
        let x = near_beams(&mut rng, &f, t, 2.5);
        let h = 1e-3;
        let dt = d1(|s| psi(&f, x, s), t, h);
        let lap = d2(|s| psi(&f, Vec2::new(s, x.y), t), x.x, h)
            + d2(|s| psi(&f, Vec2::new(x.x, s), t), x.y, h);
        worst = worst.max((C64::i() * dt + lap * 0.5).norm());
    }
    parts.push((worst < RESIDUAL_TOL, format!("max residual {worst:.1e}")));
    outcome(parts)
}

fn fringe_structure() -> Outcome {
    let start = Instant::now();
    let f = FieldConfig::symmetric_default();
    let big_t = f.crossing_time();
    let region = Segment::new(Vec2::new(40.0, -3.0), Vec2::new(40.0, 3.0));
    let d = DetectorSpec::instant(Vec2::ZERO, 0.005, big_t);
    let curve = match sweep(&f, region, &d, 241) {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    let spacing = curve
        .central_node_spacing(0.5 * region.length(), 4)
        .unwrap_or(f64::NAN);
    let want = PI / 5.0;
    let pre = Segment::new(Vec2::new(10.0, 15.0), Vec2::new(25.0, 7.5));
    let flat = sweep(
        &f,
        pre,
        &DetectorSpec::window(Vec2::ZERO, 0.05, 0.0, 2.0 * big_t),
        41,
    )
    .unwrap();
    let inc = sweep(&f.with_mode(FieldMode::Incoherent), region, &d, 241).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(vec![
        (
            curve.nodes.len() >= 4,
            format!("{} nodes", curve.nodes.len()),
        ),
        (
            (spacing - want).abs() <= SPACING_REL_TOL * want,
            format!("spacing {spacing:.4} vs {want:.4}"),
        ),
        (
            flat.rate_ratio() < FLAT_RATIO,
            format!("pre-region ratio {:.4}", flat.rate_ratio()),
        ),
        (
            inc.nodes.is_empty(),
            format!("incoherent nodes {}", inc.nodes.len()),
        ),
        (secs < FRINGE_SECONDS, format!("{secs:.2} s")),
    ])
}

fn run_bundled(name: &str, dir: &Path) -> Result<Vec<Value>, String> {
    let s = catalog::load(name).map_err(|e| e.to_string())?;
    let o = runner::run_scenario(
        &s,
        &RunOptions {
            out: Some(dir.join(name)),
            seed: None,
        },
    )
    .map_err(|e| e.to_string())?;
    o.report
        .experiments
        .iter()
        .map(|e| {
            let p = o.dir.join(format!("{}.json", e.experiment));
            let text = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
            serde_json::from_str(&text).map_err(|e| e.to_string())
        })
        .collect()
}

fn bundle_result(reports: &[Value]) -> Option<&Value> {
    reports
        .iter()
        .find(|r| r["kind"] == "trajectory-bundle")
        .map(|r| &r["result"])
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn no_crossing(dir: &Path) -> Outcome {
    let reports = match run_bundled("figure3", dir) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let Some(b) = bundle_result(&reports) else {
        return failed("no bundle in figure3");
    };
    let r = &b["report"];
    let n = num(&r["n"]);
    let from_c = r["by_launch"]
        .as_array()
        .and_then(|v| v.iter().find(|l| l["launch"] == "c"))
        .cloned()
        .unwrap_or(Value::Null);
    let d_side = num(&from_c["decided_fraction_d_side"]);
    let undecided = num(&r["overall"]["undecided_fraction"]);
    let split = num(&r["overall"]["decided_fraction_c_side"]);
    outcome(vec![
        (n == 2000.0, format!("n = {n}")),
        (
            r["axis_crossings"] == 0,
            format!("axis crossings {}", r["axis_crossings"]),
        ),
        (
            (d_side - 1.0).abs() <= EXACT,
            format!("c launches ending D_side {d_side}"),
        ),
        (undecided < MAX_UNDECIDED, format!("undecided {undecided}")),
        (
            (split - 0.5).abs() <= SPLIT_TOL,
            format!("C_side split {split:.4}"),
        ),
    ])
}

fn straight_through(dir: &Path) -> Outcome {
    let reports = match run_bundled("decohered", dir) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let Some(b) = bundle_result(&reports) else {
        return failed("no bundle in decohered");
    };
    let frac = num(&b["report"]["overall"]["decided_fraction_c_side"]);
    let undecided = num(&b["report"]["overall"]["undecided_fraction"]);

    // per-trajectory deviation from the free path of beam c
    let f = FieldConfig::symmetric_default().with_mode(FieldMode::Incoherent);
    let g = GuidanceField::new(f);
    let p: PacketParams = f.c;
    let starts = Sampler::new(
        SamplerKind::Stratified,
        AssignmentRule::All(PacketLabel::C),
        8,
    )
    .draw(&f, 200, 0.0);
    let ctrl = StepControl::default();
    let mut worst: f64 = 0.0;
    let mut c_side = 0;
    for (x0, _) in &starts {
        let tr = match integrate_trajectory(&g, *x0, Some(PacketLabel::C), 0.0, 8.0, &ctrl) {
            Ok(t) => t,
            Err(e) => return failed(e),
        };
        c_side += usize::from(tr.endpoint_class == EndpointClass::CSide);
        let off = *x0 - p.center0;
        for pt in tr
            .points
            .iter()
            .filter(|pt| (pt.pos - *x0).norm() > p.sigma0)
        {
            let want = p.center_at(pt.t) + off * (p.sigma_at(pt.t) / p.sigma0);
            worst = worst.max((pt.pos - want).norm());
        }
    }
    // the centre path is a geometric straight line
    let centre =
        integrate_trajectory(&g, p.center0, Some(PacketLabel::C), 0.0, 8.0, &ctrl).unwrap();
    let line_dev = centre
        .points
        .iter()
        .map(|pt| (pt.pos - (p.center0 + p.velocity * pt.t)).norm())
        .fold(0.0, f64::max);
    outcome(vec![
        (
            (frac - 1.0).abs() <= EXACT && undecided == 0.0,
            format!("scenario C_side fraction {frac}"),
        ),
        (
            c_side == starts.len(),
            format!("{c_side}/{} sampled paths end C_side", starts.len()),
        ),
        (
            worst < STRAIGHT_TOL,
            format!("max deviation from free path {worst:.1e}"),
        ),
        (
            line_dev < STRAIGHT_TOL,
            format!("centre path off its line by {line_dev:.1e}"),
        ),
    ])
}

fn equivariance(dir: &Path) -> Outcome {
    let start = Instant::now();
    let reports = match run_bundled("equivariance", dir) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let secs = start.elapsed().as_secs_f64();
    let Some(b) = bundle_result(&reports) else {
        return failed("no bundle in equivariance");
    };
    let n = num(&b["n"]);
    let mut parts = vec![(n == 20000.0, format!("n = {n}"))];
    let tvs = b["equivariance"].as_array().cloned().unwrap_or_default();
    let big_t = FieldConfig::symmetric_default().crossing_time();
    let at_crossing = tvs.iter().any(|v| num(&v["t"]) == big_t);
    parts.push((at_crossing, format!("histogram at T = {big_t}")));
    for v in &tvs {
        let tv = num(&v["tv"]);
        parts.push((tv < MAX_TV, format!("TV(t={}) = {tv:.4}", v["t"])));
    }
    parts.push((secs < EQUIVARIANCE_SECONDS, format!("{secs:.1} s")));
    outcome(parts)
}

fn amplitude(f: &FieldConfig, x: Vec2, t: f64) -> f64 {
    psi(f, x, t).norm()
}

/// `-(1/2) lap R / R` by fourth-order central differences of `R`.
fn q_by_differences(f: &FieldConfig, x: Vec2, t: f64, h: f64) -> f64 {
    let r = |p: Vec2| amplitude(f, p, t);
    let mut lap = -60.0 * r(x);
    for e in [Vec2::new(h, 0.0), Vec2::new(0.0, h)] {
        lap += 16.0 * (r(x + e) + r(x - e)) - (r(x + e * 2.0) + r(x - e * 2.0));
    }
    -0.5 * lap / (12.0 * h * h * r(x))
}

fn quantum_potential_oracle() -> Outcome {
    let f = FieldConfig::symmetric_default();
    let g = GuidanceField::new(f);
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 200 {
        let t = rng.random_range(0.0..2.0 * f.crossing_time());
        let x = near_beams(&mut rng, &f, t, 3.0);
        if amplitude(&f, x, t) <= 1e-3 * f.peak_density(t).sqrt() {
            continue;
        }
        let q = match g.quantum_potential(x, t, None) {
            Ok(q) => q.q,
            Err(e) => return failed(e),
        };
        let oracle = q_by_differences(&f, x, t, 1e-4);
        let s = f.c.sigma_at(t).min(f.d.sigma_at(t));
        worst = worst.max((q - oracle).abs() / oracle.abs().max(1.0 / (2.0 * s * s)));
        checked += 1;
    }
    let sigma = f.c.sigma0;
    let p = PacketParams::new(Vec2::ZERO, Vec2::ZERO, sigma, PacketLabel::C);
    let q0 = GuidanceField::new(FieldConfig::single(p))
        .quantum_potential(Vec2::ZERO, 0.0, None)
        .unwrap()
        .q;
    let closed = 1.0 / (2.0 * sigma * sigma);
    outcome(vec![
        (
            worst < Q_REL_TOL,
            format!("max relative error {worst:.1e} at 200 points"),
        ),
        (
            (q0 - closed).abs() < Q_CENTRE_TOL,
            format!("centre Q {q0} vs {closed}"),
        ),
    ])
}

fn rate_additivity() -> Outcome {
    let f = FieldConfig::symmetric_default();
    let t = f.crossing_time();
    let line = Segment::new(Vec2::new(40.0, -3.0), Vec2::new(40.0, 3.0));
    let mut worst: f64 = 0.0;
    for s in line.arc_positions(50) {
        let d = DetectorSpec::instant(line.at(s), 0.005, t);
        let terms = aperture_terms(&f, &d);
        let rate = count_rate(&f, &d);
        worst = worst.max((rate - (terms.diag_c + terms.diag_d + 2.0 * terms.overlap.re)).abs());
    }
    outcome(vec![(
        worst < ADDITIVITY_TOL,
        format!("max defect {worst:.1e} at 50 positions"),
    )])
}

fn reproducibility(dir: &Path) -> Outcome {
    let rows = match runner::check_bundled(&dir.join("check")) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let total = catalog::names().count();
    let mut parts = vec![(
        rows.len() == total,
        format!("{} of {total} scenarios checked", rows.len()),
    )];
    for r in &rows {
        let ok = r.error.is_none() && r.reproducible;
        let detail = match (&r.error, r.mismatched.is_empty()) {
            (Some(e), _) => format!("{}: {e}", r.scenario),
            (None, false) => format!("{}: differs in {}", r.scenario, r.mismatched.join(",")),
            (None, true) => format!("{} identical", r.scenario),
        };
        parts.push((ok, detail));
    }
    outcome(parts)
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("history weights", Box::new(history_weights)),
        (
            "conditional probabilities",
            Box::new(conditional_probabilities),
        ),
        (
            "consistency classification",
            Box::new(consistency_classification),
        ),
        ("completion independence", Box::new(completion_independence)),
        ("wavefield normalization", Box::new(wavefield_normalization)),
        ("fringe structure", Box::new(fringe_structure)),
        ("no axis crossing", Box::new(|| no_crossing(dir))),
        (
            "decohered straight-through",
            Box::new(|| straight_through(dir)),
        ),
        ("equivariance", Box::new(|| equivariance(dir))),
        (
            "quantum potential oracle",
            Box::new(quantum_potential_oracle),
        ),
        ("rate additivity", Box::new(rate_additivity)),
        ("reproducibility", Box::new(|| reproducibility(dir))),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let mark = if o.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!o.pass);
        println!(
            "{mark} {:02} {name} ({:.1} s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
