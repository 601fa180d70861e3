//! Adaptive classical fourth-order Runge-Kutta along the guidance field.
//!
//! The local error is estimated by step doubling: one step of size `h`
//! against two of size `h/2`, with Richardson correction of the accepted
//! result.

use serde::{Deserialize, Serialize};

use super::{BohmError, GuidanceField, Guide};
use crate::geometry::Vec2;
use crate::wavefield::PacketLabel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// Maximum accepted local position error per step.
    pub tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Below this the step controller gives up and truncates.
    pub min_step: f64,
    /// Halve the step while any stage sees density below this fraction of
    /// the peak...
    pub hazard_density: f64,
    /// ...or speed above this multiple of the beam speed.
    pub hazard_speed: f64,
    /// The hazard rule does not shrink steps below this size.
    pub hazard_min_step: f64,
    /// Keep every accepted point (otherwise only start and end).
    pub record: bool,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            initial_step: 1e-3,
            max_step: 0.05,
            min_step: 1e-12,
            hazard_density: 1e-6,
            hazard_speed: 10.0,
            hazard_min_step: 1e-4,
            record: true,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub pos: Vec2,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EndpointClass {
    #[serde(rename = "C_side")]
    CSide,
    #[serde(rename = "D_side")]
    DSide,
    #[serde(rename = "undecided")]
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Complete,
    /// Step control could not keep the particle out of a node region.
    Truncated {
        t: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub start: Vec2,
    /// Beam the particle was launched in (and, in incoherent mode, the beam
    /// that guides it).
    pub launch: Option<PacketLabel>,
    pub endpoint_class: EndpointClass,
    pub status: TrajectoryStatus,
    pub min_density_seen: f64,
    /// `min_density_seen` relative to the instantaneous peak.
    pub min_relative_density: f64,
    /// Sign changes of the transverse coordinate about the mirror axis.
    pub axis_crossings: usize,
    /// Largest angle between the launch velocity and any later velocity.
    pub max_turning_angle: f64,
    /// Sign changes of the transverse velocity component.
    pub transverse_reversals: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn end(&self) -> Vec2 {
        self.points.last().map(|p| p.pos).unwrap_or(self.start)
    }

    pub fn end_time(&self) -> f64 {
        self.points.last().map(|p| p.t).unwrap_or(f64::NAN)
    }

    pub fn is_complete(&self) -> bool {
        self.status == TrajectoryStatus::Complete
    }
}

struct Stepper<'a> {
    g: &'a GuidanceField,
    assignment: Option<PacketLabel>,
    hazard_density: f64,
    hazard_speed: f64,
}

struct StageInfo {
    min_rel_density: f64,
    max_speed: f64,
}

impl StageInfo {
    fn observe(&mut self, g: &Guide) {
        self.min_rel_density = self.min_rel_density.min(g.density / g.peak);
        self.max_speed = self.max_speed.max(g.velocity().norm());
    }
}

impl Stepper<'_> {
    fn eval(&self, x: Vec2, t: f64, info: &mut StageInfo) -> Result<Vec2, BohmError> {
        let g = self.g.guide(x, t, self.assignment)?;
        info.observe(&g);
        Ok(g.velocity())
    }

    /// One RK4 step from `(x, t)` with the initial slope `k1` already known.
    fn rk4(
        &self,
        x: Vec2,
        t: f64,
        h: f64,
        k1: Vec2,
        info: &mut StageInfo,
    ) -> Result<Vec2, BohmError> {
        let k2 = self.eval(x + k1 * (0.5 * h), t + 0.5 * h, info)?;
        let k3 = self.eval(x + k2 * (0.5 * h), t + 0.5 * h, info)?;
        let k4 = self.eval(x + k3 * h, t + h, info)?;
        Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
    }

    /// Step doubling; returns the corrected position and the error estimate.
    fn trial(&self, x: Vec2, t: f64, h: f64, k1: Vec2) -> Result<(Vec2, f64, bool), BohmError> {
        let mut info = StageInfo {
            min_rel_density: f64::INFINITY,
            max_speed: k1.norm(),
        };
        let full = self.rk4(x, t, h, k1, &mut info)?;
        let mid = self.rk4(x, t, 0.5 * h, k1, &mut info)?;
        let k1_mid = self.eval(mid, t + 0.5 * h, &mut info)?;
        let half = self.rk4(mid, t + 0.5 * h, 0.5 * h, k1_mid, &mut info)?;
        let diff = half - full;
        let hazard =
            info.min_rel_density < self.hazard_density || info.max_speed > self.hazard_speed;
        Ok((half + diff * (1.0 / 15.0), diff.norm() / 15.0, hazard))
    }
}

/// Integrates from `t0`, landing exactly on each time in `stops` (ascending,
/// all greater than `t0`; the last one is the final time). Returns the
/// trajectory and its position at every stop reached.
pub fn integrate_with_stops(
    g: &GuidanceField,
    start: Vec2,
    assignment: Option<PacketLabel>,
    t0: f64,
    stops: &[f64],
    ctrl: &StepControl,
) -> Result<(Trajectory, Vec<Vec2>), BohmError> {
    let t1 = *stops.last().ok_or(BohmError::BadInterval { t0, t1: t0 })?;
    if !(t1 > t0) || stops.windows(2).any(|w| w[1] <= w[0]) || stops[0] <= t0 {
        return Err(BohmError::BadInterval { t0, t1 });
    }
    let field = g.field();
    let axis = field.axis();
    let c_side_sign = {
        let s = axis.transverse(field.c.center0).signum();
        if s == 0.0 {
            1.0
        } else {
            s
        }
    };
    let deadband = field.c.sigma0 / 10.0;
    let stepper = Stepper {
        g,
        assignment,
        hazard_density: ctrl.hazard_density,
        hazard_speed: ctrl.hazard_speed * field.beam_speed(),
    };

    let first = g.guide(start, t0, assignment)?;
    let mut x = start;
    let mut t = t0;
    let mut k1 = first.velocity();
    let v_launch = k1;
    let mut points = vec![TrajectoryPoint {
        t,
        pos: x,
        density: first.density,
    }];
    let mut min_density = first.density;
    let mut min_rel = first.density / first.peak;
    let mut side = axis.transverse(x).signum();
    let mut crossings = 0usize;
    let mut vt_sign = 0.0f64;
    let mut reversals = 0usize;
    let vt_threshold = 1e-9 * field.beam_speed();
    let mut max_turn: f64 = 0.0;
    let mut h = ctrl.initial_step.min(ctrl.max_step);
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut next_stop = 0usize;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut status = TrajectoryStatus::Complete;

    let observe_vt = |v: Vec2, vt_sign: &mut f64, reversals: &mut usize| {
        let vt = axis.direction.cross(v);
        if vt.abs() > vt_threshold {
            let s = vt.signum();
            if *vt_sign != 0.0 && s != *vt_sign {
                *reversals += 1;
            }
            *vt_sign = s;
        }
    };
    observe_vt(k1, &mut vt_sign, &mut reversals);

    while next_stop < stops.len() {
        if accepted + rejected >= ctrl.max_steps {
            status = TrajectoryStatus::Truncated { t };
            break;
        }
        let target = stops[next_stop];
        let lands = h >= target - t;
        let step = if lands { target - t } else { h };
        match stepper.trial(x, t, step, k1) {
            Ok((x_new, err, hazard)) => {
                if hazard && step > ctrl.hazard_min_step {
                    rejected += 1;
                    h = 0.5 * step;
                    continue;
                }
                if err > ctrl.tol && step > ctrl.min_step {
                    rejected += 1;
                    let factor = (0.9 * (ctrl.tol / err).powf(0.2)).clamp(0.1, 0.5);
                    h = step * factor;
                    if h < ctrl.min_step {
                        status = TrajectoryStatus::Truncated { t };
                        break;
                    }
                    continue;
                }
                let t_new = if lands { target } else { t + step };
                let guide = match g.guide(x_new, t_new, assignment) {
                    Ok(gd) => gd,
                    Err(_) => {
                        rejected += 1;
                        h = 0.5 * step;
                        if h < ctrl.min_step {
                            status = TrajectoryStatus::Truncated { t };
                            break;
                        }
                        continue;
                    }
                };
                accepted += 1;
                x = x_new;
                t = t_new;
                k1 = guide.velocity();
                min_density = min_density.min(guide.density);
                min_rel = min_rel.min(guide.density / guide.peak);
                let s = axis.transverse(x).signum();
                if s != 0.0 {
                    if side != 0.0 && s != side {
                        crossings += 1;
                    }
                    side = s;
                }
                observe_vt(k1, &mut vt_sign, &mut reversals);
                max_turn = max_turn.max(v_launch.angle_to(k1));
                if ctrl.record || lands && next_stop + 1 == stops.len() {
                    points.push(TrajectoryPoint {
                        t,
                        pos: x,
                        density: guide.density,
                    });
                }
                if lands {
                    snapshots.push(x);
                    next_stop += 1;
                }
                let grow = if err > 0.0 {
                    (0.9 * (ctrl.tol / err).powf(0.2)).clamp(0.2, 4.0)
                } else {
                    4.0
                };
                h = (step * grow).min(ctrl.max_step);
                if lands {
                    // a short landing step must not throttle the next one
                    h = h.max(ctrl.initial_step.min(ctrl.max_step));
                }
            }
            Err(BohmError::NodeRegion { .. }) => {
                rejected += 1;
                h = 0.5 * step;
                if h < ctrl.min_step {
                    status = TrajectoryStatus::Truncated { t };
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }

    if !ctrl.record && !matches!(status, TrajectoryStatus::Complete) {
        points.push(TrajectoryPoint {
            t,
            pos: x,
            density: g.guiding_density(x, t, assignment),
        });
    }

    let endpoint_class = match status {
        TrajectoryStatus::Complete => {
            let tr = axis.transverse(x);
            if tr.abs() <= deadband {
                EndpointClass::Undecided
            } else if tr.signum() == c_side_sign {
                EndpointClass::DSide
            } else {
                EndpointClass::CSide
            }
        }
        TrajectoryStatus::Truncated { .. } => EndpointClass::Undecided,
    };

    Ok((
        Trajectory {
            points,
            start,
            launch: assignment,
            endpoint_class,
            status,
            min_density_seen: min_density,
            min_relative_density: min_rel,
            axis_crossings: crossings,
            max_turning_angle: max_turn,
            transverse_reversals: reversals,
            accepted_steps: accepted,
            rejected_steps: rejected,
        },
        snapshots,
    ))
}

/// Bohm trajectory from `start` at `t0` to `t1`.
///
/// Endpoints are classified by the side of the mirror axis they end on:
/// the side opposite beam c's launch is the C detector's half-plane. A dead
/// band of `sigma0 / 10` around the axis is `Undecided`.
pub fn integrate_trajectory(
    g: &GuidanceField,
    start: Vec2,
    assignment: Option<PacketLabel>,
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
) -> Result<Trajectory, BohmError> {
    integrate_with_stops(g, start, assignment, t0, &[t1], ctrl).map(|(tr, _)| tr)
}
