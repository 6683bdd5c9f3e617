//! Gauss-Legendre rules, composite panel rules and deterministic summation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let terms: Vec<f64> = self.on_interval(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite rule: `panels` equal panels per gap between consecutive
/// breakpoints, `order` Gauss points per panel.
pub fn composite_rule(breaks: &[f64], panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order);
    let mut out = Vec::with_capacity(breaks.len().saturating_sub(1) * panels * order);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + h * p as f64;
            out.extend(gl.on_interval(lo, lo + h));
        }
    }
    out
}

/// Sorted, deduplicated breakpoints on [lo, hi] including the endpoints and
/// every interior interface that falls strictly inside.
pub fn breakpoints(lo: f64, hi: f64, interfaces: &[f64]) -> Vec<f64> {
    let mut b = vec![lo, hi];
    b.extend(interfaces.iter().copied().filter(|&x| x > lo && x < hi));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    b
}

/// Pairwise (cascade) summation; order-deterministic.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Resolution of the tensor quadrature used for forms over the inner disk
/// `r <= r_in` times the transverse interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Gauss points per panel.
    pub order: usize,
    /// Radial panels per gap between radial interfaces.
    pub radial_panels: usize,
    /// Angular trapezoid nodes (periodic, spectrally accurate).
    pub angular_nodes: usize,
    /// Transverse panels per gap between transverse interfaces.
    pub transverse_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 8,
            radial_panels: 16,
            angular_nodes: 48,
            transverse_panels: 8,
        }
    }
}

impl QuadratureSpec {
    /// Twice the panels and angular nodes; used for error estimates.
    pub fn refined(&self) -> Self {
        Self {
            order: self.order,
            radial_panels: self.radial_panels * 2,
            angular_nodes: self.angular_nodes * 2,
            transverse_panels: self.transverse_panels * 2,
        }
    }

    pub fn angular_rule(&self) -> Vec<(f64, f64)> {
        let n = self.angular_nodes.max(1);
        let w = 2.0 * PI / n as f64;
        (0..n).map(|k| ((k as f64 + 0.5) * w, w)).collect()
    }
}

/// Dyadic refinement controls for square tensor quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementSpec {
    pub order: usize,
    pub initial_panels: usize,
    pub max_refinements: usize,
    /// Absolute tolerance between successive refinements.
    pub tolerance: f64,
}

impl Default for RefinementSpec {
    fn default() -> Self {
        Self {
            order: 8,
            initial_panels: 4,
            max_refinements: 7,
            tolerance: 1e-8,
        }
    }
}
