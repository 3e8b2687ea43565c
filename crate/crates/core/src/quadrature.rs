//! Composite Gauss–Legendre rules on intervals and rectangles.

use std::f64::consts::PI;

/// Nodes per panel of the composite rule.
pub const PANEL_NODES: usize = 16;

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule: points with weights. Points are stored with two
/// coordinates; 1-D rules leave the second at zero.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integral of `f` against the rule.
    pub fn integrate<F: Fn(&[f64; 2]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Multiplies every weight by `density(point)`.
    pub fn with_density<F: Fn(&[f64; 2]) -> f64>(mut self, density: F) -> Self {
        for (p, w) in self.points.iter().zip(self.weights.iter_mut()) {
            *w *= density(p);
        }
        self
    }
}

/// Composite rule on [lo, hi] with at least `min_nodes` nodes, built from
/// equal panels of [`PANEL_NODES`] nodes.
pub fn composite_interval(lo: f64, hi: f64, min_nodes: usize) -> Rule {
    let panels = min_nodes.max(PANEL_NODES).div_ceil(PANEL_NODES);
    let (x, w) = gauss_legendre(PANEL_NODES);
    let width = (hi - lo) / panels as f64;
    let mut points = Vec::with_capacity(panels * PANEL_NODES);
    let mut weights = Vec::with_capacity(panels * PANEL_NODES);
    for p in 0..panels {
        let a = lo + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            points.push([a + 0.5 * width * (xi + 1.0), 0.0]);
            weights.push(0.5 * width * wi);
        }
    }
    Rule { points, weights }
}

/// Tensor-product composite rule on [0, a] x [0, b].
pub fn composite_rectangle(a: f64, b: f64, min_nodes_per_dim: usize) -> Rule {
    let rx = composite_interval(0.0, a, min_nodes_per_dim);
    let ry = composite_interval(0.0, b, min_nodes_per_dim);
    let mut points = Vec::with_capacity(rx.len() * ry.len());
    let mut weights = Vec::with_capacity(rx.len() * ry.len());
    for (px, wx) in rx.points.iter().zip(&rx.weights) {
        for (py, wy) in ry.points.iter().zip(&ry.weights) {
            points.push([px[0], py[0]]);
            weights.push(wx * wy);
        }
    }
    Rule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64] {
            let (_, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let n = 8;
        let (x, w) = gauss_legendre(n);
        for deg in 0..(2 * n) {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "deg {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn composite_integrates_oscillatory() {
        let r = composite_interval(0.0, 1.0, 512);
        let v = r.integrate(|p| (40.0 * PI * p[0]).sin().powi(2));
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn rectangle_area() {
        let r = composite_rectangle(2.0, 3.0, 16);
        assert!((r.integrate(|_| 1.0) - 6.0).abs() < 1e-12);
    }
}
