//! Ensembles of trajectories sampled from the initial density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{
    integrate_with_stops, EndpointClass, StepControl, Trajectory, TrajectoryStatus,
};
use super::{BohmError, GuidanceField};
use crate::geometry::Vec2;
use crate::quadrature::integrate_rect;
use crate::wavefield::{FieldConfig, FieldMode, PacketLabel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Randomly shifted Halton points pushed through Box-Muller.
    #[default]
    Stratified,
    /// Independent draws, one counter-based stream per particle.
    Iid,
}

/// How particles are split between the two beams.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentRule {
    /// `round(n |w_c|^2)` particles in beam c, the rest in beam d.
    #[default]
    Proportional,
    /// Every particle starts in (and in incoherent mode is guided by) one beam.
    All(PacketLabel),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub kind: SamplerKind,
    pub assignment: AssignmentRule,
    pub seed: u64,
}

impl Sampler {
    pub fn new(kind: SamplerKind, assignment: AssignmentRule, seed: u64) -> Self {
        Self {
            kind,
            assignment,
            seed,
        }
    }

    /// Labelled starting points at `t0`. Each beam's share is drawn from
    /// that beam's Gaussian density, so the result follows `|psi(t0)|^2`
    /// only while the beams do not overlap.
    pub fn draw(&self, f: &FieldConfig, n: usize, t0: f64) -> Vec<(Vec2, PacketLabel)> {
        let n_c = match self.assignment {
            AssignmentRule::Proportional => {
                ((n as f64 * f.weights[0].norm_sqr()).round() as usize).min(n)
            }
            AssignmentRule::All(PacketLabel::C) => n,
            AssignmentRule::All(PacketLabel::D) => 0,
        };
        let mut out = Vec::with_capacity(n);
        for (label, count, offset) in [(PacketLabel::C, n_c, 0), (PacketLabel::D, n - n_c, n_c)] {
            let p = f.packet(label);
            let centre = p.center_at(t0);
            let s = p.sigma_at(t0);
            let units = self.uniforms(label, count, offset);
            out.extend(units.into_iter().map(|(u1, u2)| {
                let r = (-2.0 * (1.0 - u1).ln()).sqrt();
                let th = std::f64::consts::TAU * u2;
                (centre + Vec2::new(r * th.cos(), r * th.sin()) * s, label)
            }));
        }
        out
    }

    fn uniforms(&self, label: PacketLabel, count: usize, offset: usize) -> Vec<(f64, f64)> {
        match self.kind {
            SamplerKind::Stratified => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(label as u64);
                let shift: (f64, f64) = (rng.random(), rng.random());
                (1..=count)
                    .map(|i| {
                        (
                            (radical_inverse(i, 2) + shift.0).fract(),
                            (radical_inverse(i, 3) + shift.1).fract(),
                        )
                    })
                    .collect()
            }
            SamplerKind::Iid => (0..count)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    rng.set_stream((offset + i) as u64);
                    (rng.random(), rng.random())
                })
                .collect(),
        }
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleOptions {
    pub n: usize,
    pub t0: f64,
    pub t1: f64,
    pub sampler: Sampler,
    pub ctrl: StepControl,
    /// Extra times (in `(t0, t1]`) at which ensemble positions are recorded.
    pub snapshot_times: Vec<f64>,
    /// Number of full polylines kept in the report, taken at an even
    /// stride through the (beam c first) start order.
    pub keep_paths: usize,
}

impl BundleOptions {
    pub fn new(n: usize, t0: f64, t1: f64, seed: u64) -> Self {
        Self {
            n,
            t0,
            t1,
            sampler: Sampler::new(SamplerKind::Stratified, AssignmentRule::Proportional, seed),
            ctrl: StepControl::default(),
            snapshot_times: Vec::new(),
            keep_paths: 0,
        }
    }
}

/// Ensemble positions at one time. Particles that were truncated before
/// `t` are missing.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<Vec2>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LaunchBreakdown {
    pub launch: Option<PacketLabel>,
    pub n: usize,
    pub c_side: usize,
    pub d_side: usize,
    pub undecided: usize,
    /// `c_side / (c_side + d_side)`
    pub decided_fraction_c_side: f64,
    pub decided_fraction_d_side: f64,
    pub undecided_fraction: f64,
}

impl LaunchBreakdown {
    fn tally(launch: Option<PacketLabel>, classes: impl Iterator<Item = EndpointClass>) -> Self {
        let mut b = Self {
            launch,
            ..Self::default()
        };
        for c in classes {
            b.n += 1;
            match c {
                EndpointClass::CSide => b.c_side += 1,
                EndpointClass::DSide => b.d_side += 1,
                EndpointClass::Undecided => b.undecided += 1,
            }
        }
        let decided = (b.c_side + b.d_side) as f64;
        if decided > 0.0 {
            b.decided_fraction_c_side = b.c_side as f64 / decided;
            b.decided_fraction_d_side = b.d_side as f64 / decided;
        }
        if b.n > 0 {
            b.undecided_fraction = b.undecided as f64 / b.n as f64;
        }
        b
    }

    pub fn fraction_c_side(&self) -> f64 {
        self.c_side as f64 / self.n.max(1) as f64
    }

    pub fn fraction_d_side(&self) -> f64 {
        self.d_side as f64 / self.n.max(1) as f64
    }
}

/// Turning of the velocity relative to launch, over the bundle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KinkStats {
    pub mean_max_turning_angle: f64,
    pub max_turning_angle: f64,
    /// Trajectories whose transverse velocity changes sign at least once.
    pub with_reversal: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BundleReport {
    pub n: usize,
    pub completed: usize,
    pub truncated: usize,
    /// Starts the guidance could not be evaluated at.
    pub failed: usize,
    pub overall: LaunchBreakdown,
    pub by_launch: Vec<LaunchBreakdown>,
    pub axis_crossings: usize,
    pub trajectories_crossing_axis: usize,
    pub kinks: KinkStats,
    pub min_relative_density: f64,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    #[serde(skip)]
    pub paths: Vec<Trajectory>,
    #[serde(skip)]
    pub endpoints: Vec<(Vec2, Option<PacketLabel>, EndpointClass)>,
}

impl BundleReport {
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }

    pub fn launched(&self, label: PacketLabel) -> Option<&LaunchBreakdown> {
        self.by_launch.iter().find(|b| b.launch == Some(label))
    }
}

enum Outcome {
    Ok(Trajectory, Vec<Vec2>),
    Failed,
}

/// Integrates `opts.n` trajectories from starts drawn by `opts.sampler`.
///
/// Per-trajectory failures are counted, not fatal. The result does not
/// depend on the number of worker threads.
pub fn trajectory_bundle(
    g: &GuidanceField,
    opts: &BundleOptions,
) -> Result<BundleReport, BohmError> {
    if opts.n == 0 {
        return Err(BohmError::EmptyBundle);
    }
    if !(opts.t1 > opts.t0) {
        return Err(BohmError::BadInterval {
            t0: opts.t0,
            t1: opts.t1,
        });
    }
    let mut stops: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > opts.t0 && t < opts.t1)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(opts.t1);

    let f = g.field();
    let starts = opts.sampler.draw(f, opts.n, opts.t0);
    let stride = if opts.keep_paths == 0 {
        usize::MAX
    } else {
        opts.n.div_ceil(opts.keep_paths)
    };
    let keep = |i: usize| i.is_multiple_of(stride);
    let lean = StepControl {
        record: false,
        ..opts.ctrl
    };
    let outcomes: Vec<Outcome> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &(x, label))| {
            let ctrl = if keep(i) { &opts.ctrl } else { &lean };
            match integrate_with_stops(g, x, Some(label), opts.t0, &stops, ctrl) {
                Ok((tr, snaps)) => Outcome::Ok(tr, snaps),
                Err(BohmError::NodeRegion { .. }) => Outcome::Failed,
                Err(e) => panic!("bundle integration rejected valid input: {e}"),
            }
        })
        .collect();

    let mut snapshots: Vec<Snapshot> = stops
        .iter()
        .map(|&t| Snapshot {
            t,
            positions: Vec::new(),
        })
        .collect();
    let mut paths = Vec::new();
    let mut endpoints = Vec::with_capacity(opts.n);
    let (mut completed, mut truncated, mut failed) = (0, 0, 0);
    let (mut crossings, mut crossing_trajs) = (0, 0);
    let mut kinks = KinkStats::default();
    let mut turn_sum = 0.0;
    let mut min_rel = f64::INFINITY;
    for (i, o) in outcomes.into_iter().enumerate() {
        let (x0, label) = starts[i];
        match o {
            Outcome::Failed => {
                failed += 1;
                endpoints.push((x0, Some(label), EndpointClass::Undecided));
            }
            Outcome::Ok(tr, snaps) => {
                match tr.status {
                    TrajectoryStatus::Complete => completed += 1,
                    TrajectoryStatus::Truncated { .. } => truncated += 1,
                }
                for (s, p) in snapshots.iter_mut().zip(snaps) {
                    s.positions.push(p);
                }
                crossings += tr.axis_crossings;
                crossing_trajs += usize::from(tr.axis_crossings > 0);
                turn_sum += tr.max_turning_angle;
                kinks.max_turning_angle = kinks.max_turning_angle.max(tr.max_turning_angle);
                kinks.with_reversal += usize::from(tr.transverse_reversals > 0);
                min_rel = min_rel.min(tr.min_relative_density);
                endpoints.push((tr.end(), Some(label), tr.endpoint_class));
                if keep(i) {
                    paths.push(tr);
                }
            }
        }
    }
    kinks.mean_max_turning_angle = turn_sum / (completed + truncated).max(1) as f64;
    let overall = LaunchBreakdown::tally(None, endpoints.iter().map(|e| e.2));
    let by_launch = [PacketLabel::C, PacketLabel::D]
        .into_iter()
        .map(|l| {
            LaunchBreakdown::tally(
                Some(l),
                endpoints.iter().filter(|e| e.1 == Some(l)).map(|e| e.2),
            )
        })
        .filter(|b| b.n > 0)
        .collect();

    Ok(BundleReport {
        n: opts.n,
        completed,
        truncated,
        failed,
        overall,
        by_launch,
        axis_crossings: crossings,
        trajectories_crossing_axis: crossing_trajs,
        kinks,
        min_relative_density: min_rel,
        snapshots,
        paths,
        endpoints,
    })
}

/// Bounding box of both beams at `t`, `nsigma` packet widths around each
/// centre. Beams with zero weight are ignored.
pub fn support_box(f: &FieldConfig, t: f64, nsigma: f64) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for l in [PacketLabel::C, PacketLabel::D] {
        if f.weight(l).norm_sqr() == 0.0 {
            continue;
        }
        let p = f.packet(l);
        let c = p.center_at(t);
        let r = nsigma * p.sigma_at(t);
        lo = Vec2::new(lo.x.min(c.x - r), lo.y.min(c.y - r));
        hi = Vec2::new(hi.x.max(c.x + r), hi.y.max(c.y + r));
    }
    (lo, hi)
}

/// Total-variation distance between the empirical distribution of
/// `positions` (out of `n_total` particles) and `|psi(t)|^2`, over a
/// `bins x bins` grid on `[lo, hi]` plus one bin for everything outside.
///
/// Particles missing from `positions` count as mass in no bin. In
/// incoherent mode the reference is the summed beam density.
pub fn equivariance_tv(
    f: &FieldConfig,
    positions: &[Vec2],
    n_total: usize,
    t: f64,
    bins: usize,
    lo: Vec2,
    hi: Vec2,
) -> f64 {
    let (wx, wy) = ((hi.x - lo.x) / bins as f64, (hi.y - lo.y) / bins as f64);
    let cell = f.resolution(t);
    let reference: Vec<f64> = (0..bins * bins)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / bins, k % bins);
            let x0 = lo.x + i as f64 * wx;
            let y0 = lo.y + j as f64 * wy;
            integrate_rect(x0, x0 + wx, y0, y0 + wy, cell, |x, y| {
                f.density(Vec2::new(x, y), t)
            })
        })
        .collect();
    let mut counts = vec![0usize; bins * bins];
    let mut outside = n_total.saturating_sub(positions.len());
    for p in positions {
        let i = ((p.x - lo.x) / wx).floor();
        let j = ((p.y - lo.y) / wy).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < bins && (j as usize) < bins {
            counts[i as usize * bins + j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let total = match f.mode {
        FieldMode::Coherent | FieldMode::Incoherent => 1.0,
    };
    let n = n_total as f64;
    let inside_ref: f64 = reference.iter().sum();
    let mut tv = (outside as f64 / n - (total - inside_ref)).abs();
    for (c, r) in counts.iter().zip(&reference) {
        tv += (*c as f64 / n - r).abs();
    }
    0.5 * tv
}
