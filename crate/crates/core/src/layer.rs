//! Layer metric G_ij of the region {p(q) + u n(q) : |u| < a}.

use crate::error::{Error, Result};
use crate::geometry::{compute_curvature, inverse2, CurvatureData, CurvatureJet, Mat2, Point, Surface};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Half-width a and mollifier radius r0 of the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub a: f64,
    pub r0: f64,
}

impl LayerConfig {
    pub fn new(a: f64, r0: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Validation {
                field: "layer.a".into(),
                constraint: format!("must be finite and > 0, got {a}"),
            });
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::Validation {
                field: "certify.r0".into(),
                constraint: format!("must be finite and > 0, got {r0}"),
            });
        }
        Ok(Self { a, r0 })
    }

    pub fn width(&self) -> f64 {
        2.0 * self.a
    }

    /// First transverse wave number pi/d.
    pub fn kappa1(&self) -> f64 {
        PI / self.width()
    }

    pub fn threshold(&self) -> f64 {
        self.kappa1().powi(2)
    }
}

/// Sampling grid for the curvature supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Nodes per side of the first grid; successive grids halve the spacing.
    pub initial_nodes: usize,
    pub max_refinements: usize,
    pub rel_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            initial_nodes: 65,
            max_refinements: 5,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThicknessReport {
    /// Sampled supremum of |k_+-|.
    pub max_abs_curvature: f64,
    /// 1/max|k|; `None` when the surface is flat (rho_m infinite).
    pub rho_m: Option<f64>,
    pub valid: bool,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Spacing of the finest sampling grid.
    pub grid_spacing: f64,
    pub samples: usize,
    /// Relative change of the supremum over the last refinement.
    pub last_change: f64,
}

impl ThicknessReport {
    pub fn require_valid(&self, a: f64) -> Result<()> {
        match self.rho_m {
            Some(rho) if !self.valid => Err(Error::InvalidThickness {
                half_width: a,
                rho_m: rho,
            }),
            _ => Ok(()),
        }
    }
}

/// Estimates rho_m = 1/sup|k| on nested grids over the support square and
/// returns the sandwich constants C+- = (1 +- a/rho_m)^2.
pub fn validate_thickness<S: Surface + ?Sized>(
    surface: &S,
    a: f64,
    sampling: &GridSpec,
) -> Result<ThicknessReport> {
    use rayon::prelude::*;
    let r = surface.support_radius();
    if !r.is_finite() {
        return Err(Error::Domain(
            "thickness validation needs a compactly supported deformation".into(),
        ));
    }
    let kmax = |q: Point| -> Result<f64> {
        let c = compute_curvature(surface, q)?;
        Ok(c.k_plus.abs().max(c.k_minus.abs()))
    };
    let sample = |n: usize| -> Result<(f64, Point)> {
        let h = 2.0 * r / (n - 1) as f64;
        (0..n)
            .into_par_iter()
            .map(|i| -> Result<(f64, Point)> {
                let y = -r + h * i as f64;
                let mut m = (0.0, [0.0, y]);
                for j in 0..n {
                    let q = [-r + h * j as f64, y];
                    let k = kmax(q)?;
                    if k > m.0 {
                        m = (k, q);
                    }
                }
                Ok(m)
            })
            .try_reduce(|| (0.0, [0.0, 0.0]), |x, y| Ok(if y.0 > x.0 { y } else { x }))
    };
    let mut n = sampling.initial_nodes.max(3);
    let (mut best, mut arg) = sample(n)?;
    let mut samples = n * n;
    let mut change = f64::INFINITY;
    for _ in 0..sampling.max_refinements {
        n = 2 * n - 1;
        let (next, q) = sample(n)?;
        samples += n * n;
        change = if next > 0.0 { (next - best).abs() / next } else { 0.0 };
        if next > best {
            best = next;
            arg = q;
        }
        if change < sampling.rel_tol {
            break;
        }
    }
    // Compass search from the best node so the supremum is not limited by the grid.
    if best > 0.0 {
        let mut step = 2.0 * r / (n - 1) as f64;
        for _ in 0..500 {
            if step < 1e-13 * r {
                break;
            }
            let mut moved = false;
            for d in [[step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step]] {
                let q = [arg[0] + d[0], arg[1] + d[1]];
                if q[0].abs() > r || q[1].abs() > r {
                    continue;
                }
                let k = kmax(q)?;
                samples += 1;
                if k > best {
                    best = k;
                    arg = q;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
    }
    let rho_m = (best > 0.0).then(|| 1.0 / best);
    let ratio = a * best;
    Ok(ThicknessReport {
        max_abs_curvature: best,
        rho_m,
        valid: ratio < 1.0,
        c_plus: (1.0 + ratio).powi(2),
        c_minus: (1.0 - ratio).powi(2),
        grid_spacing: 2.0 * r / (n - 1) as f64,
        samples,
        last_change: change,
    })
}

/// Pointwise values of the layer metric (the G_33 = 1 block is implicit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerPoint {
    pub u: f64,
    /// G_{mu nu}.
    pub cov: Mat2,
    /// G^{mu nu}.
    pub contra: Mat2,
    /// det G_ij = g (1 - 2 M u + K u^2)^2.
    pub det: f64,
    /// 1 - 2 M u + K u^2.
    pub factor: f64,
}

impl LayerPoint {
    /// G^{1/2}.
    pub fn jacobian(&self) -> f64 {
        self.det.sqrt()
    }
}

/// 1 - 2 M u + K u^2, or MetricDegenerate when it is not positive.
pub fn layer_factor(c: &CurvatureData, u: f64) -> Result<f64> {
    let factor = 1.0 - 2.0 * c.mean * u + c.gauss * u * u;
    if !(factor > 0.0) {
        return Err(Error::MetricDegenerate {
            q1: c.q[0],
            q2: c.q[1],
            u,
            factor,
        });
    }
    Ok(factor)
}

/// G_{mu nu} = g_{mu nu} - 2u h_{mu nu} + u^2 h_{mu rho} g^{rho sigma} h_{sigma nu}.
pub fn layer_metric_at(c: &CurvatureData, u: f64) -> Result<LayerPoint> {
    let factor = layer_factor(c, u)?;
    let g_inv = c.g_inv();
    let hgh = c.h * g_inv * c.h;
    let cov = c.g - c.h * (2.0 * u) + hgh * (u * u);
    let cov = 0.5 * (cov + cov.transpose());
    let det = c.det_g * factor * factor;
    let contra = inverse2(&cov, det);
    Ok(LayerPoint {
        u,
        cov,
        contra,
        det,
        factor,
    })
}

/// Eigenvalues (min, max) of g^{-1/2} G g^{-1/2}, computed from the
/// symmetric congruence L^{-1} G L^{-T} with g = L L^T so that the
/// discriminant is a sum of squares.
pub fn sandwich_eigenvalues(c: &CurvatureData, p: &LayerPoint) -> (f64, f64) {
    let l00 = c.g[(0, 0)].sqrt();
    let l10 = c.g[(1, 0)] / l00;
    let l11 = (c.g[(1, 1)] - l10 * l10).sqrt();
    let linv = Mat2::new(1.0 / l00, 0.0, -l10 / (l00 * l11), 1.0 / l11);
    let m = linv * p.cov * linv.transpose();
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let disc = (0.5 * (m[(0, 0)] - m[(1, 1)])).hypot(0.5 * (m[(0, 1)] + m[(1, 0)]));
    (half_tr - disc, half_tr + disc)
}

/// Layer metric with its first q-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricGradient {
    pub point: LayerPoint,
    /// `d_cov[r]` = d G_{mu nu} / d q^r.
    pub d_cov: [Mat2; 2],
    /// d det G / d q^r.
    pub d_det: [f64; 2],
}

impl MetricGradient {
    /// G^{mu nu}_{,nu} = -G^{mu a} G_{ab,nu} G^{b nu}.
    pub fn contra_divergence(&self) -> [f64; 2] {
        let gi = self.point.contra;
        let mut out = [0.0; 2];
        for (mu, o) in out.iter_mut().enumerate() {
            for nu in 0..2 {
                let d = -gi * self.d_cov[nu] * gi;
                *o += d[(mu, nu)];
            }
        }
        out
    }
}

pub fn metric_gradient(jet: &CurvatureJet, u: f64) -> Result<MetricGradient> {
    let c = &jet.data;
    let point = layer_metric_at(c, u)?;
    let g_inv = c.g_inv();
    let mut d_cov = [Mat2::zeros(); 2];
    let mut d_det = [0.0; 2];
    for r in 0..2 {
        let dg = jet.dg[r];
        let dh = jet.dh[r];
        let d_ginv = -g_inv * dg * g_inv;
        let d_hgh = dh * g_inv * c.h + c.h * d_ginv * c.h + c.h * g_inv * dh;
        let d = dg - dh * (2.0 * u) + d_hgh * (u * u);
        d_cov[r] = 0.5 * (d + d.transpose());
        let d_det_g = adj_trace(&c.g, &dg);
        let d_factor = -2.0 * u * jet.d_mean[r] + u * u * jet.d_gauss[r];
        d_det[r] = d_det_g * point.factor * point.factor
            + 2.0 * c.det_g * point.factor * d_factor;
    }
    Ok(MetricGradient {
        point,
        d_cov,
        d_det,
    })
}

/// tr(adj(A) dA) = d det A.
fn adj_trace(a: &Mat2, da: &Mat2) -> f64 {
    a[(1, 1)] * da[(0, 0)] + a[(0, 0)] * da[(1, 1)] - a[(0, 1)] * da[(1, 0)] - a[(1, 0)] * da[(0, 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_jet, Orientation};
    use crate::surfaces::{CompactBump, Plane, SpherePatch};

    #[test]
    fn plane_is_flat_for_all_u() {
        let c = compute_curvature(&Plane, [0.3, 0.4]).unwrap();
        for u in [-0.9, 0.0, 0.5] {
            let p = layer_metric_at(&c, u).unwrap();
            assert_eq!(p.cov, Mat2::identity());
            assert_eq!(p.det, 1.0);
        }
        let t = validate_thickness(&Plane, 5.0, &GridSpec::default()).unwrap();
        assert!(t.valid && t.rho_m.is_none() && t.c_plus == 1.0 && t.c_minus == 1.0);
    }

    #[test]
    fn sphere_determinant_factorises() {
        let s = SpherePatch::new(1.0).unwrap();
        let c = compute_curvature(&s, [0.0, 0.0]).unwrap();
        let p = layer_metric_at(&c, 0.3).unwrap();
        assert!((p.det - c.det_g * 0.7f64.powi(4)).abs() < 1e-14);
        assert!((p.cov.determinant() - p.det).abs() < 1e-14);
    }

    #[test]
    fn degenerate_factor_is_reported() {
        let s = SpherePatch::new(1.0).unwrap();
        let c = compute_curvature(&s, [0.0, 0.0]).unwrap();
        assert!(matches!(
            layer_metric_at(&c, 1.0),
            Err(Error::MetricDegenerate { .. })
        ));
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let b = CompactBump::new(0.8, 2.0).unwrap();
        let q = [0.4, -0.7];
        let u = 0.2;
        let jet = curvature_jet(&b, q, Orientation::Standard).unwrap();
        let grad = metric_gradient(&jet, u).unwrap();
        let h = 1e-6;
        for r in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[r] += h;
            qm[r] -= h;
            let gp = layer_metric_at(&compute_curvature(&b, qp).unwrap(), u).unwrap();
            let gm = layer_metric_at(&compute_curvature(&b, qm).unwrap(), u).unwrap();
            let fd = (gp.cov - gm.cov) / (2.0 * h);
            assert!((fd - grad.d_cov[r]).norm() < 1e-7);
            let fd_det = (gp.det - gm.det) / (2.0 * h);
            assert!((fd_det - grad.d_det[r]).abs() < 1e-7);
        }
    }
}
