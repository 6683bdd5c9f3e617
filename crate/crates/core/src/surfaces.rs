//! Built-in surface families.

use crate::error::{Error, Result};
use crate::geometry::{Point, Surface, ThirdDerivatives, Vec3};
use std::collections::BTreeMap;
use std::sync::Arc;

/// p(q) = (q1, q2, 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct Plane;

impl Surface for Plane {
    fn evaluate(&self, q: Point) -> Vec3 {
        Vec3::new(q[0], q[1], 0.0)
    }
    fn jacobian(&self, _q: Point) -> [Vec3; 2] {
        [Vec3::x(), Vec3::y()]
    }
    fn hessian(&self, _q: Point) -> [[Vec3; 2]; 2] {
        [[Vec3::zeros(); 2]; 2]
    }
    fn third_derivatives(&self, _q: Point) -> Option<ThirdDerivatives> {
        Some([[[Vec3::zeros(); 2]; 2]; 2])
    }
    /// Nominal; there is no deformation.
    fn support_radius(&self) -> f64 {
        1.0
    }
}

/// Monge patch z = f(q) with analytic derivatives through third order.
trait Graph {
    /// f, f_i, f_ij, f_ijk.
    fn graph_jet(&self, q: Point) -> GraphJet;
}

#[derive(Debug, Clone, Copy, Default)]
struct GraphJet {
    f: f64,
    d1: [f64; 2],
    d2: [[f64; 2]; 2],
    d3: [[[f64; 2]; 2]; 2],
}

fn graph_jacobian(j: &GraphJet) -> [Vec3; 2] {
    [Vec3::new(1.0, 0.0, j.d1[0]), Vec3::new(0.0, 1.0, j.d1[1])]
}

fn graph_hessian(j: &GraphJet) -> [[Vec3; 2]; 2] {
    let e = |v: f64| Vec3::new(0.0, 0.0, v);
    [[e(j.d2[0][0]), e(j.d2[0][1])], [e(j.d2[1][0]), e(j.d2[1][1])]]
}

fn graph_third(j: &GraphJet) -> ThirdDerivatives {
    let mut out = [[[Vec3::zeros(); 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                out[a][b][c] = Vec3::new(0.0, 0.0, j.d3[a][b][c]);
            }
        }
    }
    out
}

macro_rules! graph_surface_methods {
    () => {
        fn evaluate(&self, q: Point) -> Vec3 {
            Vec3::new(q[0], q[1], self.graph_jet(q).f)
        }
        fn jacobian(&self, q: Point) -> [Vec3; 2] {
            graph_jacobian(&self.graph_jet(q))
        }
        fn hessian(&self, q: Point) -> [[Vec3; 2]; 2] {
            graph_hessian(&self.graph_jet(q))
        }
        fn third_derivatives(&self, q: Point) -> Option<ThirdDerivatives> {
            Some(graph_third(&self.graph_jet(q)))
        }
        fn jet(&self, q: Point) -> crate::geometry::SurfaceJet {
            let j = self.graph_jet(q);
            crate::geometry::SurfaceJet {
                p: Vec3::new(q[0], q[1], j.f),
                d1: graph_jacobian(&j),
                d2: graph_hessian(&j),
                d3: Some(graph_third(&j)),
            }
        }
    };
}

/// Radial jet builder: f = F(t) with t = |q|^2 * c, given F, F', F'', F'''.
fn radial_jet(q: Point, c: f64, e: [f64; 4]) -> GraphJet {
    let t1 = [2.0 * c * q[0], 2.0 * c * q[1]];
    let t2 = 2.0 * c;
    let delta = |i: usize, j: usize| if i == j { t2 } else { 0.0 };
    let mut out = GraphJet {
        f: e[0],
        ..Default::default()
    };
    for i in 0..2 {
        out.d1[i] = e[1] * t1[i];
        for j in 0..2 {
            out.d2[i][j] = e[2] * t1[i] * t1[j] + e[1] * delta(i, j);
            for k in 0..2 {
                out.d3[i][j][k] = e[3] * t1[i] * t1[j] * t1[k]
                    + e[2] * (delta(i, j) * t1[k] + delta(i, k) * t1[j] + delta(j, k) * t1[i]);
            }
        }
    }
    out
}

/// f(r) = h exp(1/((r/s)^2 - 1)) for r < s, 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactBump {
    pub height: f64,
    pub width: f64,
}

impl CompactBump {
    pub fn new(height: f64, width: f64) -> Result<Self> {
        if !height.is_finite() || height < 0.0 {
            return Err(Error::BadParams(format!("bump height must be finite and >= 0, got {height}")));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::BadParams(format!("bump width must be finite and > 0, got {width}")));
        }
        Ok(Self { height, width })
    }

    /// Radius where f'' vanishes and K changes sign: s 3^{-1/4}.
    pub fn inflection_radius(&self) -> f64 {
        self.width * 3f64.powf(-0.25)
    }

    /// Radial profile f and its first two r-derivatives.
    pub fn profile(&self, r: f64) -> [f64; 3] {
        let j = self.graph_jet([r, 0.0]);
        [j.f, j.d1[0], j.d2[0][0]]
    }
}

impl Graph for CompactBump {
    fn graph_jet(&self, q: Point) -> GraphJet {
        let c = 1.0 / (self.width * self.width);
        let t = (q[0] * q[0] + q[1] * q[1]) * c;
        if t >= 1.0 || self.height == 0.0 {
            return GraphJet::default();
        }
        let w = t - 1.0;
        let e = self.height * (1.0 / w).exp();
        if e == 0.0 {
            return GraphJet::default();
        }
        let p1 = -1.0 / (w * w);
        let p2 = 2.0 / (w * w * w);
        let p3 = -6.0 / (w * w * w * w);
        let e1 = e * p1;
        let e2 = e * (p2 + p1 * p1);
        let e3 = e * (p3 + 3.0 * p1 * p2 + p1 * p1 * p1);
        radial_jet(q, c, [e, e1, e2, e3])
    }
}

impl Surface for CompactBump {
    graph_surface_methods!();

    fn support_radius(&self) -> f64 {
        self.width
    }
    fn length_scale(&self) -> f64 {
        self.width
    }
    fn radial_interfaces(&self) -> Vec<f64> {
        vec![self.inflection_radius()]
    }
}

/// Lower spherical cap z = R - sqrt(R^2 - |q|^2), |q| < R. Test surface only:
/// it is not a compact deformation of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePatch {
    pub radius: f64,
}

impl SpherePatch {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::BadParams(format!("sphere radius must be > 0, got {radius}")));
        }
        Ok(Self { radius })
    }
}

impl Graph for SpherePatch {
    fn graph_jet(&self, q: Point) -> GraphJet {
        // F(t) = R - sqrt(R^2 - t), t = |q|^2
        let r2 = self.radius * self.radius;
        let t = q[0] * q[0] + q[1] * q[1];
        let w2 = r2 - t;
        let w = w2.max(0.0).sqrt();
        let e = [
            self.radius - w,
            0.5 / w,
            0.25 / (w * w2),
            0.375 / (w * w2 * w2),
        ];
        radial_jet(q, 1.0, e)
    }
}

impl Surface for SpherePatch {
    graph_surface_methods!();

    fn support_radius(&self) -> f64 {
        f64::INFINITY
    }
    fn length_scale(&self) -> f64 {
        self.radius
    }
}

pub const BUILTIN_FAMILIES: [&str; 3] = ["plane", "compact-bump", "sphere-patch-test"];

fn take_params(
    family: &str,
    params: &BTreeMap<String, f64>,
    allowed: &[&str],
) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::BadParams(format!(
                "`{family}` does not take parameter `{key}` (expected one of {allowed:?})"
            )));
        }
    }
    Ok(())
}

fn required(family: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::BadParams(format!("`{family}` requires parameter `{key}`")))
}

/// Instantiates a built-in family. Parameters: `compact-bump` takes `h`
/// (height) and `s` (support radius); `sphere-patch-test` takes `radius`.
pub fn builtin_surface(name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn Surface>> {
    match name {
        "plane" => {
            take_params(name, params, &[])?;
            Ok(Arc::new(Plane))
        }
        "compact-bump" => {
            take_params(name, params, &["h", "s"])?;
            let h = required(name, params, "h")?;
            let s = required(name, params, "s")?;
            Ok(Arc::new(CompactBump::new(h, s)?))
        }
        "sphere-patch-test" => {
            take_params(name, params, &["radius"])?;
            Ok(Arc::new(SpherePatch::new(required(name, params, "radius")?)?))
        }
        other => Err(Error::UnknownSurface(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_curvature;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn lookup_and_errors() {
        assert!(builtin_surface("plane", &params(&[])).is_ok());
        assert!(matches!(
            builtin_surface("torus", &params(&[])),
            Err(Error::UnknownSurface(_))
        ));
        assert!(matches!(
            builtin_surface("compact-bump", &params(&[("h", 1.0)])),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            builtin_surface("compact-bump", &params(&[("h", 1.0), ("s", -1.0)])),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            builtin_surface("compact-bump", &params(&[("h", 1.0), ("s", 1.0), ("x", 0.0)])),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn bump_is_flat_outside_support() {
        let b = CompactBump::new(0.5, 3.0).unwrap();
        for q in [[3.0, 0.0], [2.5, 2.5], [0.0, -3.2], [2.9999, 0.0]] {
            let c = compute_curvature(&b, q).unwrap();
            assert_eq!(c.gauss, 0.0);
            assert_eq!(c.mean, 0.0);
        }
    }

    #[test]
    fn gauss_curvature_changes_sign_at_inflection_radius() {
        let b = CompactBump::new(1.0, 2.0).unwrap();
        let rc = b.inflection_radius();
        let inside = compute_curvature(&b, [0.99 * rc, 0.0]).unwrap().gauss;
        let outside = compute_curvature(&b, [1.01 * rc, 0.0]).unwrap().gauss;
        assert!(inside > 0.0 && outside < 0.0);
        assert!(b.profile(rc)[2].abs() < 1e-12);
    }

    #[test]
    fn sphere_patch_apex() {
        let s = SpherePatch::new(2.0).unwrap();
        let c = compute_curvature(&s, [0.0, 0.0]).unwrap();
        assert!((c.gauss - 0.25).abs() < 1e-14);
        assert!((c.mean - 0.5).abs() < 1e-14);
        assert!(c.umbilic);
    }
}
