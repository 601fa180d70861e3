//! Composite Gauss-Legendre rules on intervals and axis-aligned rectangles.

use std::sync::OnceLock;

/// Points per cell and per axis.
pub const ORDER: usize = 8;

/// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Nodes and weights of a composite rule on `[a, b]` with cells no wider
/// than `max_cell`.
pub fn composite_nodes(a: f64, b: f64, max_cell: f64) -> Vec<(f64, f64)> {
    let (x, w) = rule();
    let cells = (((b - a) / max_cell).ceil() as usize).max(1);
    let h = (b - a) / cells as f64;
    let mut out = Vec::with_capacity(cells * ORDER);
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Integral over `[x0, x1] x [y0, y1]`; `f` may return any additive type.
pub fn integrate_rect<T, F>(x0: f64, x1: f64, y0: f64, y1: f64, max_cell: f64, f: F) -> T
where
    T: Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    F: Fn(f64, f64) -> T,
{
    let xs = composite_nodes(x0, x1, max_cell);
    let ys = composite_nodes(y0, y1, max_cell);
    let mut acc = T::default();
    for &(x, wx) in &xs {
        let mut row = T::default();
        for &(y, wy) in &ys {
            row += f(x, y) * wy;
        }
        acc += row * wx;
    }
    acc
}
