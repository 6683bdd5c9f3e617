//! Tensor grids: a mapped lateral axis (uniform core, exponentially
//! stretched tail) and a uniform transverse axis.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lateral condition at the truncation boundary |q^mu| = R_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LateralBc {
    Dirichlet,
    Neumann,
}

/// Grid description for the truncated layer [-R, R]^2 x (-a, a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Half-side R_max of the lateral square.
    pub r_max: f64,
    /// Half-width of the uniform core; defaults to the surface support radius.
    pub core_half_width: Option<f64>,
    /// Nodes per lateral axis, including both boundary nodes.
    pub nodes: usize,
    /// Fraction of the reference coordinate spent on the uniform core.
    pub core_fraction: f64,
    /// Interior transverse nodes (the walls u = +-a are not unknowns).
    pub transverse_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_max: 10.0,
            core_half_width: None,
            nodes: 81,
            core_fraction: 0.6,
            transverse_nodes: 8,
        }
    }
}

impl GridSpec {
    /// Dyadic refinement: halves every lateral and transverse spacing.
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes - 1,
            transverse_nodes: 2 * self.transverse_nodes + 1,
            ..*self
        }
    }
}

/// One lateral axis x_0 < ... < x_{n-1}, symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub nodes: Vec<f64>,
}

impl Axis {
    /// x(xi) = (L/xi0) xi on |xi| <= xi0, continued with matching slope by
    /// L + (L/xi0)(e^{beta(|xi| - xi0)} - 1)/beta so that x(1) = R.
    pub fn mapped(r_max: f64, core: f64, n: usize, core_fraction: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Validation {
                field: "solve.grid.nodes".into(),
                constraint: format!("need at least 3 nodes, got {n}"),
            });
        }
        if !(core > 0.0 && core <= r_max) {
            return Err(Error::Validation {
                field: "solve.grid.core_half_width".into(),
                constraint: format!("need 0 < core = {core} <= r_max = {r_max}"),
            });
        }
        if !(core_fraction > 0.0 && core_fraction <= 1.0) {
            return Err(Error::Validation {
                field: "solve.grid.core_fraction".into(),
                constraint: format!("must lie in (0, 1], got {core_fraction}"),
            });
        }
        let slope = core / core_fraction;
        let w = 1.0 - core_fraction;
        let target = (r_max - core) / slope;
        let beta = if w <= 0.0 {
            if (r_max - core).abs() > 1e-12 * r_max {
                return Err(Error::Validation {
                    field: "solve.grid.core_fraction".into(),
                    constraint: "a fraction of 1 requires core_half_width = r_max".into(),
                });
            }
            0.0
        } else {
            solve_growth(w, target)
        };
        let tail = |s: f64| {
            if beta.abs() < 1e-12 {
                s
            } else {
                (beta * s).exp_m1() / beta
            }
        };
        let map = |xi: f64| {
            let a = xi.abs();
            let x = if a <= core_fraction {
                slope * a
            } else {
                core + slope * tail(a - core_fraction)
            };
            x.copysign(xi)
        };
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| map(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
            .collect();
        nodes[0] = -r_max;
        nodes[n - 1] = r_max;
        for i in 0..n / 2 {
            let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -v;
            nodes[n - 1 - i] = v;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dual-cell widths (x_{i+1} - x_{i-1})/2, halved cells at the ends.
    pub fn dual_widths(&self) -> Vec<f64> {
        let x = &self.nodes;
        let n = x.len();
        (0..n)
            .map(|i| {
                let lo = if i == 0 { x[0] } else { x[i - 1] };
                let hi = if i + 1 == n { x[n - 1] } else { x[i + 1] };
                0.5 * (hi - lo)
            })
            .collect()
    }

    /// Largest spacing among cells that intersect [-r, r].
    pub fn max_spacing_within(&self, r: f64) -> f64 {
        self.nodes
            .windows(2)
            .filter(|w| w[1] > -r && w[0] < r)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// beta with (e^{beta w} - 1)/beta = target, by bisection on a monotone map.
fn solve_growth(w: f64, target: f64) -> f64 {
    let f = |b: f64| {
        if b.abs() < 1e-12 {
            w - target
        } else {
            (b * w).exp_m1() / b - target
        }
    };
    let (mut lo, mut hi) = (-200.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Full tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub axis: Axis,
    pub half_width: f64,
    /// Interior transverse nodes u_k = -a + k du, k = 1..=n_u.
    pub transverse_nodes: usize,
    pub bc: LateralBc,
}

impl Grid {
    pub fn new(spec: &GridSpec, support_radius: f64, half_width: f64, bc: LateralBc) -> Result<Self> {
        if !(spec.r_max > 0.0) || !spec.r_max.is_finite() {
            return Err(Error::Validation {
                field: "solve.grid.r_max".into(),
                constraint: format!("must be finite and > 0, got {}", spec.r_max),
            });
        }
        if spec.transverse_nodes == 0 {
            return Err(Error::Validation {
                field: "solve.grid.transverse_nodes".into(),
                constraint: "need at least one interior transverse node".into(),
            });
        }
        let core = spec.core_half_width.unwrap_or(support_radius.min(spec.r_max));
        Ok(Self {
            axis: Axis::mapped(spec.r_max, core, spec.nodes, spec.core_fraction)?,
            half_width,
            transverse_nodes: spec.transverse_nodes,
            bc,
        })
    }

    pub fn du(&self) -> f64 {
        2.0 * self.half_width / (self.transverse_nodes + 1) as f64
    }

    pub fn u(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.du()
    }

    /// Range of lateral node indices that carry unknowns.
    pub fn active(&self) -> std::ops::Range<usize> {
        match self.bc {
            LateralBc::Neumann => 0..self.axis.len(),
            LateralBc::Dirichlet => 1..self.axis.len() - 1,
        }
    }

    pub fn active_len(&self) -> usize {
        self.active().len()
    }

    pub fn dim(&self) -> usize {
        self.active_len().pow(2) * self.transverse_nodes
    }

    /// Flattened index of lateral node (i, j) and u level k (1-based).
    pub fn index(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let r = self.active();
        if !r.contains(&i) || !r.contains(&j) || k == 0 || k > self.transverse_nodes {
            return None;
        }
        let m = self.active_len();
        Some(((i - r.start) * m + (j - r.start)) * self.transverse_nodes + (k - 1))
    }
}
