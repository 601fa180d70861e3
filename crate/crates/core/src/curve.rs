//! Sampled curves along a line (fringe profiles and detector sweeps).

use serde::Serialize;

use crate::geometry::{Segment, Vec2};

/// A minimum counts as a node when it falls below this fraction of the
/// curve maximum.
pub const NODE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct ScanCurve {
    pub line: Segment,
    /// Arc length of each sample from `line.start`.
    pub positions: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Point density (profiles) or detector count rate (sweeps).
    pub rates: Vec<f64>,
    /// `|aperture overlap|` per position, coherent sweeps only.
    pub overlaps: Option<Vec<f64>>,
    /// Arc-length positions of located nodes, ascending.
    pub nodes: Vec<f64>,
    pub node_tol: f64,
    /// Set when the underlying field carries no interference term.
    pub fringe_free: bool,
    pub warnings: Vec<String>,
}

impl ScanCurve {
    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max / min` over the samples.
    pub fn rate_ratio(&self) -> f64 {
        self.max_rate() / self.min_rate()
    }

    pub fn node_points(&self) -> Vec<Vec2> {
        self.nodes.iter().map(|&s| self.line.at(s)).collect()
    }

    pub fn node_spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Mean spacing of the `count` consecutive nodes closest to arc length
    /// `centre`, or `None` with fewer than two nodes.
    pub fn central_node_spacing(&self, centre: f64, count: usize) -> Option<f64> {
        if self.nodes.len() < 2 {
            return None;
        }
        let count = count.clamp(2, self.nodes.len());
        let nearest = self
            .nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - centre).abs().total_cmp(&(b.1 - centre).abs()))
            .map(|(i, _)| i)?;
        let lo = nearest
            .saturating_sub(count / 2)
            .min(self.nodes.len() - count);
        let sel = &self.nodes[lo..lo + count];
        Some((sel[count - 1] - sel[0]) / (count - 1) as f64)
    }

    /// Indices of interior sample minima.
    pub fn local_minima(&self) -> Vec<usize> {
        interior_minima(&self.rates)
    }

    /// Interior minima deeper than `ratio` times the smaller of the
    /// neighbouring maxima.
    pub fn deep_minima(&self, ratio: f64) -> Vec<usize> {
        let r = &self.rates;
        interior_minima(r)
            .into_iter()
            .filter(|&i| {
                let left = r[..i].iter().copied().fold(0.0, f64::max);
                let right = r[i + 1..].iter().copied().fold(0.0, f64::max);
                r[i] < ratio * left.min(right)
            })
            .collect()
    }
}

fn interior_minima(r: &[f64]) -> Vec<usize> {
    (1..r.len().saturating_sub(1))
        .filter(|&i| r[i] < r[i - 1] && r[i] <= r[i + 1])
        .collect()
}

/// Golden-section minimisation of `f` on `[a, b]`.
fn golden_min(mut a: f64, mut b: f64, f: &impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Refines every interior sample minimum with `f` and keeps those whose
/// refined value is below `tol * max(rates)`.
pub(crate) fn locate_nodes(
    positions: &[f64],
    rates: &[f64],
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let max = rates.iter().copied().fold(0.0, f64::max);
    let mut nodes: Vec<f64> = Vec::new();
    for i in interior_minima(rates) {
        let (x, v) = golden_min(positions[i - 1], positions[i + 1], &f);
        if v < tol * max {
            let step = positions[i] - positions[i - 1];
            if nodes.last().is_none_or(|&prev| x - prev > 0.5 * step) {
                nodes.push(x);
            }
        }
    }
    nodes
}
