//! Bohm guidance on the closed-form wavefield.
//!
//! Velocities are `Im(grad psi / psi)` and the quantum potential is
//! `-(1/2) lap R / R` with `psi = R exp(iS)`, both evaluated from analytic
//! packet derivatives.

mod bundle;
mod integrate;

pub use bundle::{
    equivariance_tv, support_box, trajectory_bundle, AssignmentRule, BundleOptions, BundleReport,
    KinkStats, LaunchBreakdown, Sampler, SamplerKind, Snapshot,
};
pub use integrate::{
    integrate_trajectory, integrate_with_stops, EndpointClass, StepControl, Trajectory,
    TrajectoryPoint, TrajectoryStatus,
};

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::wavefield::{FieldConfig, FieldMode, PacketLabel};

/// Guidance is undefined below this fraction of the instantaneous peak
/// density.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BohmError {
    #[error("density {density:e} below floor {floor:e} at ({}, {}), t = {t}", at.x, at.y)]
    NodeRegion {
        density: f64,
        floor: f64,
        at: Vec2,
        t: f64,
    },
    #[error("incoherent guidance needs a packet assignment")]
    MissingAssignment,
    #[error("integration interval [{t0}, {t1}] is empty")]
    BadInterval { t0: f64, t1: f64 },
    #[error("bundle needs at least one trajectory")]
    EmptyBundle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantumPotentialSample {
    pub q: f64,
    pub at: Vec2,
    pub t: f64,
}

/// Logarithmic derivatives of the guiding wave at a point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Guide {
    grad_log: [C64; 2],
    lap_over_psi: C64,
    density: f64,
    peak: f64,
}

impl Guide {
    fn velocity(&self) -> Vec2 {
        Vec2::new(self.grad_log[0].im, self.grad_log[1].im)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GuidanceField {
    field: FieldConfig,
    density_floor: f64,
}

impl GuidanceField {
    pub fn new(field: FieldConfig) -> Self {
        Self {
            field,
            density_floor: DENSITY_FLOOR,
        }
    }

    pub fn with_density_floor(mut self, relative: f64) -> Self {
        self.density_floor = relative;
        self
    }

    pub fn field(&self) -> &FieldConfig {
        &self.field
    }

    pub fn density_floor(&self) -> f64 {
        self.density_floor
    }

    pub(crate) fn guide(
        &self,
        x: Vec2,
        t: f64,
        assignment: Option<PacketLabel>,
    ) -> Result<Guide, BohmError> {
        let f = &self.field;
        let (grad_log, lap_over_psi, density, peak) = match f.mode {
            FieldMode::Coherent => {
                let ec = f.c.eval(x, t);
                let ed = f.d.eval(x, t);
                let a = f.weights[0] * ec.psi;
                let b = f.weights[1] * ed.psi;
                let psi = a + b;
                let density = psi.norm_sqr();
                let peak = f.peak_density(t);
                if !(density > self.density_floor * peak) {
                    return Err(self.node(density, peak, x, t));
                }
                let inv = psi.inv();
                (
                    [
                        (a * ec.grad_log[0] + b * ed.grad_log[0]) * inv,
                        (a * ec.grad_log[1] + b * ed.grad_log[1]) * inv,
                    ],
                    (a * ec.lap_over_psi + b * ed.lap_over_psi) * inv,
                    density,
                    peak,
                )
            }
            FieldMode::Incoherent => {
                let label = assignment.ok_or(BohmError::MissingAssignment)?;
                let p = f.packet(label);
                let e = p.eval(x, t);
                let w2 = f.weight(label).norm_sqr();
                let density = w2 * e.psi.norm_sqr();
                let peak = w2 * p.peak_density(t);
                if !(density > self.density_floor * peak) {
                    return Err(self.node(density, peak, x, t));
                }
                (e.grad_log, e.lap_over_psi, density, peak)
            }
        };
        Ok(Guide {
            grad_log,
            lap_over_psi,
            density,
            peak,
        })
    }

    fn node(&self, density: f64, peak: f64, at: Vec2, t: f64) -> BohmError {
        BohmError::NodeRegion {
            density,
            floor: self.density_floor * peak,
            at,
            t,
        }
    }

    /// Guidance velocity. `assignment` selects the guiding beam in
    /// incoherent mode and is ignored in coherent mode.
    pub fn velocity(
        &self,
        x: Vec2,
        t: f64,
        assignment: Option<PacketLabel>,
    ) -> Result<Vec2, BohmError> {
        Ok(self.guide(x, t, assignment)?.velocity())
    }

    pub fn quantum_potential(
        &self,
        x: Vec2,
        t: f64,
        assignment: Option<PacketLabel>,
    ) -> Result<QuantumPotentialSample, BohmError> {
        let g = self.guide(x, t, assignment)?;
        // lap R / R = Re(lap psi / psi) + |grad S|^2
        let v = g.velocity();
        let lap_r_over_r = g.lap_over_psi.re + v.norm_sqr();
        Ok(QuantumPotentialSample {
            q: -0.5 * lap_r_over_r,
            at: x,
            t,
        })
    }

    /// Density of the wave that guides a particle with this assignment.
    pub fn guiding_density(&self, x: Vec2, t: f64, assignment: Option<PacketLabel>) -> f64 {
        let f = &self.field;
        match (f.mode, assignment) {
            (FieldMode::Incoherent, Some(l)) => {
                (f.weight(l) * f.packet(l).amplitude(x, t)).norm_sqr()
            }
            _ => f.density(x, t),
        }
    }
}

/// Free function form of [`GuidanceField::velocity`].
pub fn velocity(
    g: &GuidanceField,
    x: Vec2,
    t: f64,
    assignment: Option<PacketLabel>,
) -> Result<Vec2, BohmError> {
    g.velocity(x, t, assignment)
}

/// Free function form of [`GuidanceField::quantum_potential`].
pub fn quantum_potential(
    g: &GuidanceField,
    x: Vec2,
    t: f64,
    assignment: Option<PacketLabel>,
) -> Result<QuantumPotentialSample, BohmError> {
    g.quantum_potential(x, t, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::PacketParams;

    fn default_guide() -> GuidanceField {
        GuidanceField::new(FieldConfig::symmetric_default())
    }

    #[test]
    fn packet_centre_moves_with_group_velocity() {
        let f = FieldConfig::symmetric_default();
        let g = GuidanceField::new(FieldConfig::single(f.c));
        for t in [0.0, 1.3, 4.0] {
            let v = g.velocity(f.c.center_at(t), t, None).unwrap();
            assert!((v - Vec2::new(10.0, -5.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn axis_has_no_transverse_velocity() {
        let g = default_guide();
        for i in 0..50 {
            let t = 0.5 + 7.0 * i as f64 / 49.0;
            let x = 5.0 + 85.0 * ((i * 37) % 50) as f64 / 49.0;
            match g.velocity(Vec2::new(x, 0.0), t, None) {
                Ok(v) => assert!(v.y.abs() < 1e-10, "v_y = {} at x = {x}, t = {t}", v.y),
                Err(BohmError::NodeRegion { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn incoherent_needs_assignment_and_uses_own_beam() {
        let f = FieldConfig::symmetric_default().with_mode(FieldMode::Incoherent);
        let g = GuidanceField::new(f);
        let x = Vec2::new(40.3, 0.4);
        assert_eq!(g.velocity(x, 4.0, None), Err(BohmError::MissingAssignment));
        let v = g.velocity(x, 4.0, Some(PacketLabel::C)).unwrap();
        let lone = GuidanceField::new(FieldConfig::single(f.c));
        let w = lone.velocity(x, 4.0, None).unwrap();
        assert!((v - w).norm() < 1e-12);
    }

    #[test]
    fn node_region_is_reported() {
        let g = default_guide();
        let node = Vec2::new(40.0, std::f64::consts::PI / 10.0);
        assert!(matches!(
            g.velocity(node, 4.0, None),
            Err(BohmError::NodeRegion { .. })
        ));
    }

    #[test]
    fn quantum_potential_of_a_gaussian() {
        // Q = (4 s^2 - r^2) / (8 s^4) for R = exp(-r^2 / 4 s^2)
        let s = 2.0;
        let p = PacketParams::new(Vec2::new(1.0, 2.0), Vec2::ZERO, s, PacketLabel::C);
        let g = GuidanceField::new(FieldConfig::single(p));
        let q0 = g.quantum_potential(p.center0, 0.0, None).unwrap().q;
        assert!((q0 - 0.125).abs() < 1e-14);
        let off = Vec2::new(1.5, -0.5);
        let q = g.quantum_potential(p.center0 + off, 0.0, None).unwrap().q;
        let want = (4.0 * s * s - off.norm_sqr()) / (8.0 * s.powi(4));
        assert!((q - want).abs() < 1e-13);
    }

    #[test]
    fn potential_spikes_near_nodes() {
        // Off the crossing time the two beams have unequal moduli, so the
        // first dark fringe has a small nonzero R and a sharp curvature.
        let g = default_guide();
        let (t, x) = (3.6, 36.0);
        let y_min = (0..=2000)
            .map(|i| 0.2 + 0.25 * i as f64 / 2000.0)
            .min_by(|a, b| {
                let da = g.field().density(Vec2::new(x, *a), t);
                let db = g.field().density(Vec2::new(x, *b), t);
                da.total_cmp(&db)
            })
            .unwrap();
        let anti = g.quantum_potential(Vec2::new(x, 0.0), t, None).unwrap().q;
        let near = g.quantum_potential(Vec2::new(x, y_min), t, None).unwrap().q;
        assert!(near.abs() > 100.0 * anti.abs(), "{near} vs {anti}");
    }
}
