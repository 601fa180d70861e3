//! Closed-form two-beam wavefield (units with hbar = m = 1).
//!
//! Each beam is a freely evolving 2D Gaussian packet. In coherent mode the
//! field is the weighted superposition `w_c psi_c + w_d psi_d`; in incoherent
//! mode the two weighted amplitudes are kept apart and only their densities
//! add.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{locate_nodes, ScanCurve, NODE_TOL};
use crate::geometry::{Axis, Segment, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid field configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 3 samples along a profile, got {0}")]
    TooFewSamples(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketLabel {
    C,
    D,
}

impl PacketLabel {
    pub fn other(self) -> Self {
        match self {
            PacketLabel::C => PacketLabel::D,
            PacketLabel::D => PacketLabel::C,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Coherent,
    Incoherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    pub center0: Vec2,
    /// Group velocity, equal to the mean wavevector when hbar = m = 1.
    pub velocity: Vec2,
    pub sigma0: f64,
    pub label: PacketLabel,
}

/// Packet value with its logarithmic derivatives.
#[derive(Clone, Copy, Debug)]
pub struct PacketEval {
    pub psi: C64,
    /// `grad(psi) / psi`
    pub grad_log: [C64; 2],
    /// `laplacian(psi) / psi`
    pub lap_over_psi: C64,
}

impl PacketParams {
    pub fn new(center0: Vec2, velocity: Vec2, sigma0: f64, label: PacketLabel) -> Self {
        Self {
            center0,
            velocity,
            sigma0,
            label,
        }
    }

    fn alpha(&self, t: f64) -> C64 {
        C64::new(1.0, t / (2.0 * self.sigma0 * self.sigma0))
    }

    pub fn center_at(&self, t: f64) -> Vec2 {
        self.center0 + self.velocity * t
    }

    /// Standard deviation of `|psi|^2` along each axis at time `t`.
    pub fn sigma_at(&self, t: f64) -> f64 {
        self.sigma0 * self.alpha(t).norm()
    }

    /// `max |psi|^2` at time `t`.
    pub fn peak_density(&self, t: f64) -> f64 {
        let s = self.sigma_at(t);
        1.0 / (2.0 * PI * s * s)
    }

    pub fn eval(&self, x: Vec2, t: f64) -> PacketEval {
        let s2 = self.sigma0 * self.sigma0;
        let alpha = self.alpha(t);
        let inv_width = (C64::new(2.0 * s2, 0.0) * alpha).inv(); // 1 / (2 s^2 alpha)
        let mut exponent = C64::new(0.0, 0.0);
        let mut grad_log = [C64::new(0.0, 0.0); 2];
        let mut lap = C64::new(0.0, 0.0);
        let axes = [
            (x.x, self.center0.x, self.velocity.x),
            (x.y, self.center0.y, self.velocity.y),
        ];
        for (k, (xi, x0, v)) in axes.into_iter().enumerate() {
            let u = xi - x0 - v * t;
            exponent += -(u * u) * 0.5 * inv_width + C64::new(0.0, v * (xi - x0) - 0.5 * v * v * t);
            let g = -u * inv_width + C64::new(0.0, v);
            grad_log[k] = g;
            lap += g * g - inv_width;
        }
        let prefactor = 1.0 / (2.0 * PI * s2).sqrt();
        PacketEval {
            psi: exponent.exp() * prefactor / alpha,
            grad_log,
            lap_over_psi: lap,
        }
    }

    pub fn amplitude(&self, x: Vec2, t: f64) -> C64 {
        self.eval(x, t).psi
    }
}

/// Exact free Gaussian packet value at `(x, t)`.
pub fn packet_amplitude(p: &PacketParams, x: Vec2, t: f64) -> C64 {
    p.amplitude(x, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub c: PacketParams,
    pub d: PacketParams,
    pub mode: FieldMode,
    /// Complex weights of (c, d).
    pub weights: [C64; 2],
    /// Geometry is the mirror image of itself about [`FieldConfig::axis`].
    pub symmetric: bool,
}

impl FieldConfig {
    pub fn new(
        c: PacketParams,
        d: PacketParams,
        mode: FieldMode,
        weights: [C64; 2],
        symmetric: bool,
    ) -> Result<Self, FieldError> {
        let f = Self {
            c: PacketParams {
                label: PacketLabel::C,
                ..c
            },
            d: PacketParams {
                label: PacketLabel::D,
                ..d
            },
            mode,
            weights,
            symmetric,
        };
        f.validate()?;
        Ok(f)
    }

    /// Beams from (0, +-20) with velocities (10, -+5) and width 2, crossing
    /// at (40, 0) at t = 4.
    pub fn symmetric_default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            PacketParams::new(
                Vec2::new(0.0, 20.0),
                Vec2::new(10.0, -5.0),
                2.0,
                PacketLabel::C,
            ),
            PacketParams::new(
                Vec2::new(0.0, -20.0),
                Vec2::new(10.0, 5.0),
                2.0,
                PacketLabel::D,
            ),
            FieldMode::Coherent,
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            true,
        )
        .expect("default scenario is valid")
    }

    /// A lone packet `p` (the second beam has zero weight).
    pub fn single(p: PacketParams) -> Self {
        Self {
            c: PacketParams {
                label: PacketLabel::C,
                ..p
            },
            d: PacketParams {
                label: PacketLabel::D,
                ..p
            },
            mode: FieldMode::Coherent,
            weights: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            symmetric: false,
        }
    }

    pub fn with_mode(mut self, mode: FieldMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        for p in [&self.c, &self.d] {
            if !(p.sigma0 > 0.0) || !p.center0.is_finite() || !p.velocity.is_finite() {
                return Err(FieldError::InvalidConfig(format!(
                    "packet {:?} needs finite geometry and sigma0 > 0",
                    p.label
                )));
            }
        }
        let total: f64 = self.weights.iter().map(|w| w.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FieldError::InvalidConfig(format!(
                "beam weights must satisfy |w_c|^2 + |w_d|^2 = 1, got {total}"
            )));
        }
        if self.symmetric {
            let ax = self.axis();
            let scale = 1.0 + self.c.center0.norm() + self.c.velocity.norm();
            let tol = 1e-12 * scale;
            let ok = (ax.mirror(self.c.center0) - self.d.center0).norm() < tol
                && (ax.mirror_vector(self.c.velocity) - self.d.velocity).norm() < tol
                && self.c.sigma0 == self.d.sigma0
                && (self.weights[0].norm() - self.weights[1].norm()).abs() < 1e-12;
            if !ok {
                return Err(FieldError::InvalidConfig(
                    "symmetric flag set but beams are not mirror images".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn packet(&self, label: PacketLabel) -> &PacketParams {
        match label {
            PacketLabel::C => &self.c,
            PacketLabel::D => &self.d,
        }
    }

    pub fn weight(&self, label: PacketLabel) -> C64 {
        match label {
            PacketLabel::C => self.weights[0],
            PacketLabel::D => self.weights[1],
        }
    }

    /// Mirror axis between the beams: through the midpoint of the launch
    /// centres along the mean velocity.
    pub fn axis(&self) -> Axis {
        let origin = (self.c.center0 + self.d.center0) * 0.5;
        let dir = self.c.velocity + self.d.velocity;
        let dir = if dir.norm() > 0.0 {
            dir
        } else {
            self.c.velocity
        };
        Axis::new(origin, dir)
    }

    /// Time of closest approach of the two packet centres.
    pub fn crossing_time(&self) -> f64 {
        let dx = self.c.center0 - self.d.center0;
        let dv = self.c.velocity - self.d.velocity;
        if dv.norm_sqr() == 0.0 {
            return 0.0;
        }
        (-dx.dot(dv) / dv.norm_sqr()).max(0.0)
    }

    pub fn crossing_point(&self) -> Vec2 {
        let t = self.crossing_time();
        (self.c.center_at(t) + self.d.center_at(t)) * 0.5
    }

    pub fn beam_speed(&self) -> f64 {
        self.c.velocity.norm().max(self.d.velocity.norm())
    }

    /// Plane-wave fringe period `2 pi / |k_c - k_d|`.
    pub fn fringe_spacing(&self) -> f64 {
        let dk = (self.c.velocity - self.d.velocity).norm();
        if dk == 0.0 {
            f64::INFINITY
        } else {
            2.0 * PI / dk
        }
    }

    /// Upper bound on the instantaneous peak density.
    pub fn peak_density(&self, t: f64) -> f64 {
        let (wc, wd) = (self.weights[0].norm(), self.weights[1].norm());
        let (pc, pd) = (self.c.peak_density(t), self.d.peak_density(t));
        match self.mode {
            FieldMode::Coherent => {
                let a = wc * pc.sqrt() + wd * pd.sqrt();
                a * a
            }
            FieldMode::Incoherent => (wc * wc * pc).max(wd * wd * pd),
        }
    }

    /// Cell size for quadrature that resolves both envelopes and fringes.
    pub fn resolution(&self, t: f64) -> f64 {
        let s = self.c.sigma_at(t).min(self.d.sigma_at(t));
        0.5 * s.min(self.fringe_spacing())
    }

    /// Weighted amplitudes `(w_c psi_c, w_d psi_d)`.
    pub fn components(&self, x: Vec2, t: f64) -> (C64, C64) {
        (
            self.weights[0] * self.c.amplitude(x, t),
            self.weights[1] * self.d.amplitude(x, t),
        )
    }

    pub fn density(&self, x: Vec2, t: f64) -> f64 {
        let (a, b) = self.components(x, t);
        match self.mode {
            FieldMode::Coherent => (a + b).norm_sqr(),
            FieldMode::Incoherent => a.norm_sqr() + b.norm_sqr(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldPsi {
    Coherent(C64),
    /// Weighted amplitudes of the c and d beams.
    Incoherent {
        c: C64,
        d: C64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub psi: FieldPsi,
    pub density: f64,
    pub at: Vec2,
    pub t: f64,
}

pub fn field_amplitude(f: &FieldConfig, x: Vec2, t: f64) -> FieldSample {
    let (a, b) = f.components(x, t);
    let (psi, density) = match f.mode {
        FieldMode::Coherent => (FieldPsi::Coherent(a + b), (a + b).norm_sqr()),
        FieldMode::Incoherent => (
            FieldPsi::Incoherent { c: a, d: b },
            a.norm_sqr() + b.norm_sqr(),
        ),
    };
    FieldSample {
        psi,
        density,
        at: x,
        t,
    }
}

/// Point densities along `line` at time `t`, with located minima.
pub fn fringe_profile(
    f: &FieldConfig,
    line: Segment,
    t: f64,
    n: usize,
) -> Result<ScanCurve, FieldError> {
    if n < 3 {
        return Err(FieldError::TooFewSamples(n));
    }
    let positions = line.arc_positions(n);
    let points: Vec<Vec2> = positions.iter().map(|&s| line.at(s)).collect();
    let rates: Vec<f64> = points.iter().map(|&p| f.density(p, t)).collect();
    let nodes = locate_nodes(&positions, &rates, NODE_TOL, |s| f.density(line.at(s), t));
    Ok(ScanCurve {
        line,
        positions,
        points,
        rates,
        overlaps: None,
        nodes,
        node_tol: NODE_TOL,
        fringe_free: f.mode == FieldMode::Incoherent,
        warnings: Vec::new(),
    })
}
