//! Fundamental forms, curvatures and total curvature of a parametrized
//! surface p: R^2 -> R^3.

use crate::error::{Error, Result};
use crate::quadrature::{breakpoints, composite_rule, GaussLegendre, RefinementSpec};
use nalgebra::{Matrix2, Vector2, Vector3};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type Vec3 = Vector3<f64>;
pub type Mat2 = Matrix2<f64>;
pub type Point = [f64; 2];
/// `d3[m][n][r]` = p_{,mnr}.
pub type ThirdDerivatives = [[[Vec3; 2]; 2]; 2];

/// Derivatives of p at one parameter point.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceJet {
    pub p: Vec3,
    pub d1: [Vec3; 2],
    pub d2: [[Vec3; 2]; 2],
    pub d3: Option<ThirdDerivatives>,
}

/// A regular parametrized surface that coincides with the plane
/// p = (q1, q2, 0) outside `support_radius`.
pub trait Surface: Send + Sync + fmt::Debug {
    fn evaluate(&self, q: Point) -> Vec3;
    fn jacobian(&self, q: Point) -> [Vec3; 2];
    fn hessian(&self, q: Point) -> [[Vec3; 2]; 2];

    fn third_derivatives(&self, _q: Point) -> Option<ThirdDerivatives> {
        None
    }

    /// Radius of a disk in the parameter plane containing the deformation.
    fn support_radius(&self) -> f64;

    /// Typical length used to scale finite-difference steps.
    fn length_scale(&self) -> f64 {
        1.0
    }

    /// Radii (about the origin) where integrands lose smoothness or change
    /// sign; used as quadrature breakpoints.
    fn radial_interfaces(&self) -> Vec<f64> {
        Vec::new()
    }

    fn jet(&self, q: Point) -> SurfaceJet {
        SurfaceJet {
            p: self.evaluate(q),
            d1: self.jacobian(q),
            d2: self.hessian(q),
            d3: self.third_derivatives(q),
        }
    }
}

impl<S: Surface + ?Sized> Surface for Arc<S> {
    fn evaluate(&self, q: Point) -> Vec3 {
        (**self).evaluate(q)
    }
    fn jacobian(&self, q: Point) -> [Vec3; 2] {
        (**self).jacobian(q)
    }
    fn hessian(&self, q: Point) -> [[Vec3; 2]; 2] {
        (**self).hessian(q)
    }
    fn third_derivatives(&self, q: Point) -> Option<ThirdDerivatives> {
        (**self).third_derivatives(q)
    }
    fn support_radius(&self) -> f64 {
        (**self).support_radius()
    }
    fn length_scale(&self) -> f64 {
        (**self).length_scale()
    }
    fn radial_interfaces(&self) -> Vec<f64> {
        (**self).radial_interfaces()
    }
    fn jet(&self, q: Point) -> SurfaceJet {
        (**self).jet(q)
    }
}

/// Which of the two unit normals is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Orientation {
    /// n = (p_1 x p_2)/|p_1 x p_2|.
    #[default]
    Standard,
    Flipped,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Flipped => -1.0,
        }
    }
}

fn cross_checked(q: Point, d1: &[Vec3; 2]) -> Result<(Vec3, f64)> {
    let c = d1[0].cross(&d1[1]);
    let norm = c.norm();
    if !(norm >= 1e-13 * d1[0].norm() * d1[1].norm()) || norm == 0.0 {
        return Err(Error::DegenerateParametrization {
            q1: q[0],
            q2: q[1],
            cross: norm,
        });
    }
    Ok((c, norm))
}

/// Unit normal (p_1 x p_2)/|p_1 x p_2|.
pub fn compute_normal<S: Surface + ?Sized>(surface: &S, q: Point) -> Result<Vec3> {
    let d1 = surface.jacobian(q);
    let (c, norm) = cross_checked(q, &d1)?;
    Ok(c / norm)
}

/// Pointwise geometric data of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureData {
    pub q: Point,
    pub normal: [f64; 3],
    pub g: Mat2,
    pub det_g: f64,
    pub h: Mat2,
    /// h_mu^nu = h_{mu rho} g^{rho nu}.
    pub weingarten: Mat2,
    pub gauss: f64,
    pub mean: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    /// g-orthonormal tangent eigenvectors (components T^mu) for k_plus, k_minus.
    pub principal_directions: [Vector2<f64>; 2],
    pub umbilic: bool,
    pub third_form: Mat2,
}

impl CurvatureData {
    pub fn g_inv(&self) -> Mat2 {
        inverse2(&self.g, self.det_g)
    }

    /// Shape operator S = g^{-1} h acting on tangent components.
    pub fn shape_operator(&self) -> Mat2 {
        self.g_inv() * self.h
    }
}

pub(crate) fn inverse2(m: &Mat2, det: f64) -> Mat2 {
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

fn adjugate2(m: &Mat2) -> Mat2 {
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

fn dot_matrix(a: &[Vec3; 2], b: &[Vec3; 2]) -> Mat2 {
    Mat2::new(a[0].dot(&b[0]), a[0].dot(&b[1]), a[1].dot(&b[0]), a[1].dot(&b[1]))
}

/// Derivatives n_{,mu} of the unit normal.
fn normal_derivatives(n: &Vec3, cnorm: f64, d1: &[Vec3; 2], d2: &[[Vec3; 2]; 2]) -> [Vec3; 2] {
    let mut out = [Vec3::zeros(); 2];
    for (mu, o) in out.iter_mut().enumerate() {
        let c_mu = d2[0][mu].cross(&d1[1]) + d1[0].cross(&d2[1][mu]);
        *o = (c_mu - n * n.dot(&c_mu)) / cnorm;
    }
    out
}

pub fn compute_curvature<S: Surface + ?Sized>(surface: &S, q: Point) -> Result<CurvatureData> {
    compute_curvature_oriented(surface, q, Orientation::Standard)
}

pub fn compute_curvature_oriented<S: Surface + ?Sized>(
    surface: &S,
    q: Point,
    orientation: Orientation,
) -> Result<CurvatureData> {
    let jet = surface.jet(q);
    curvature_from_jet(q, &jet, orientation).map(|(c, _)| c)
}

/// Curvature data plus the oriented normal and its derivatives.
pub(crate) fn curvature_from_jet(
    q: Point,
    jet: &SurfaceJet,
    orientation: Orientation,
) -> Result<(CurvatureData, [Vec3; 3])> {
    let (c, cnorm) = cross_checked(q, &jet.d1)?;
    let s = orientation.sign();
    let n = s * c / cnorm;
    let dn_raw = normal_derivatives(&(c / cnorm), cnorm, &jet.d1, &jet.d2);
    let dn = [s * dn_raw[0], s * dn_raw[1]];

    let g = dot_matrix(&jet.d1, &jet.d1);
    let g = 0.5 * (g + g.transpose());
    let det_g = g.determinant();
    let h = Mat2::new(
        n.dot(&jet.d2[0][0]),
        n.dot(&jet.d2[0][1]),
        n.dot(&jet.d2[1][0]),
        n.dot(&jet.d2[1][1]),
    );
    let h = 0.5 * (h + h.transpose());
    let g_inv = inverse2(&g, det_g);
    let weingarten = h * g_inv;
    let gauss = h.determinant() / det_g;
    let mean = 0.5 * weingarten.trace();
    let disc = (mean * mean - gauss).max(0.0);
    let root = disc.sqrt();
    let k_plus = mean + root;
    let k_minus = mean - root;
    let scale = k_plus.abs().max(k_minus.abs());
    let umbilic = root <= 1e-10 * scale + 1e-300;
    let third_form = dot_matrix(&dn, &dn);

    let principal_directions = if umbilic {
        g_orthonormal_pair(&g)
    } else {
        [
            principal_direction(&h, &g, k_plus),
            principal_direction(&h, &g, k_minus),
        ]
    };

    Ok((
        CurvatureData {
            q,
            normal: [n.x, n.y, n.z],
            g,
            det_g,
            h,
            weingarten,
            gauss,
            mean,
            k_plus,
            k_minus,
            principal_directions,
            umbilic,
            third_form,
        },
        [n, dn[0], dn[1]],
    ))
}

fn g_normalize(v: Vector2<f64>, g: &Mat2) -> Vector2<f64> {
    let len = (v.transpose() * g * v)[(0, 0)].sqrt();
    v / len
}

fn g_orthonormal_pair(g: &Mat2) -> [Vector2<f64>; 2] {
    let e1 = g_normalize(Vector2::new(1.0, 0.0), g);
    let e2 = Vector2::new(0.0, 1.0);
    let e2 = e2 - e1 * (e1.transpose() * g * e2)[(0, 0)];
    [e1, g_normalize(e2, g)]
}

/// Null vector of h - k g.
fn principal_direction(h: &Mat2, g: &Mat2, k: f64) -> Vector2<f64> {
    let a = h - g * k;
    let r0 = Vector2::new(-a[(0, 1)], a[(0, 0)]);
    let r1 = Vector2::new(-a[(1, 1)], a[(1, 0)]);
    let v = if r0.norm_squared() >= r1.norm_squared() { r0 } else { r1 };
    g_normalize(v, g)
}

/// Residuals of the characteristic equation of the Weingarten map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicResidual {
    /// max over +- of |k^2 - 2 M k + K|.
    pub scalar: f64,
    /// Frobenius norm of W^2 - 2 M W + K I.
    pub matrix: f64,
}

pub fn verify_characteristic_equation(c: &CurvatureData) -> CharacteristicResidual {
    let f = |k: f64| (k * k - 2.0 * c.mean * k + c.gauss).abs();
    let w = c.weingarten;
    let r = w * w - w * (2.0 * c.mean) + Mat2::identity() * c.gauss;
    CharacteristicResidual {
        scalar: f(c.k_plus).max(f(c.k_minus)),
        matrix: r.norm(),
    }
}

/// Frobenius residual of III = -K g + 2 M h.
pub fn third_form_residual(c: &CurvatureData) -> f64 {
    (c.third_form + c.g * c.gauss - c.h * (2.0 * c.mean)).norm()
}

/// Curvature data with first derivatives of g, h, K and M along q.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureJet {
    pub data: CurvatureData,
    /// `dg[r]` = d g_{mu nu} / d q^r.
    pub dg: [Mat2; 2],
    pub dh: [Mat2; 2],
    pub d_gauss: [f64; 2],
    pub d_mean: [f64; 2],
    /// True when taken from analytic third derivatives of p.
    pub analytic: bool,
}

/// Relative step for finite-difference curvature gradients.
pub const CURVATURE_FD_STEP: f64 = 1e-5;

pub fn curvature_jet<S: Surface + ?Sized>(
    surface: &S,
    q: Point,
    orientation: Orientation,
) -> Result<CurvatureJet> {
    let jet = surface.jet(q);
    let (data, nd) = curvature_from_jet(q, &jet, orientation)?;
    match jet.d3 {
        Some(d3) => Ok(analytic_jet(data, &jet, &d3, &nd)),
        None => fd_jet(surface, data, orientation),
    }
}

fn analytic_jet(
    data: CurvatureData,
    jet: &SurfaceJet,
    d3: &ThirdDerivatives,
    nd: &[Vec3; 3],
) -> CurvatureJet {
    let n = nd[0];
    let g_inv = data.g_inv();
    let mut dg = [Mat2::zeros(); 2];
    let mut dh = [Mat2::zeros(); 2];
    let mut d_gauss = [0.0; 2];
    let mut d_mean = [0.0; 2];
    for r in 0..2 {
        let n_r = nd[1 + r];
        for m in 0..2 {
            for k in 0..2 {
                dg[r][(m, k)] = jet.d2[m][r].dot(&jet.d1[k]) + jet.d1[m].dot(&jet.d2[k][r]);
                dh[r][(m, k)] = n_r.dot(&jet.d2[m][k]) + n.dot(&d3[m][k][r]);
            }
        }
        dg[r] = 0.5 * (dg[r] + dg[r].transpose());
        dh[r] = 0.5 * (dh[r] + dh[r].transpose());
        let d_det_g = (adjugate2(&data.g) * dg[r]).trace();
        let d_det_h = (adjugate2(&data.h) * dh[r]).trace();
        d_gauss[r] = (d_det_h - data.gauss * d_det_g) / data.det_g;
        let d_ginv = -g_inv * dg[r] * g_inv;
        d_mean[r] = 0.5 * (d_ginv * data.h + g_inv * dh[r]).trace();
    }
    CurvatureJet {
        data,
        dg,
        dh,
        d_gauss,
        d_mean,
        analytic: true,
    }
}

fn fd_jet<S: Surface + ?Sized>(
    surface: &S,
    data: CurvatureData,
    orientation: Orientation,
) -> Result<CurvatureJet> {
    let step = CURVATURE_FD_STEP * surface.length_scale();
    let q = data.q;
    let mut dg = [Mat2::zeros(); 2];
    let mut dh = [Mat2::zeros(); 2];
    let mut d_gauss = [0.0; 2];
    let mut d_mean = [0.0; 2];
    for r in 0..2 {
        let mut qp = q;
        let mut qm = q;
        qp[r] += step;
        qm[r] -= step;
        let cp = compute_curvature_oriented(surface, qp, orientation)?;
        let cm = compute_curvature_oriented(surface, qm, orientation)?;
        let inv = 0.5 / step;
        dg[r] = (cp.g - cm.g) * inv;
        dh[r] = (cp.h - cm.h) * inv;
        d_gauss[r] = (cp.gauss - cm.gauss) * inv;
        d_mean[r] = (cp.mean - cm.mean) * inv;
    }
    Ok(CurvatureJet {
        data,
        dg,
        dh,
        d_gauss,
        d_mean,
        analytic: false,
    })
}

type ValueFn = dyn Fn(Point) -> Vec3 + Send + Sync;

/// Wraps a value-only parametrization; derivatives by central differences.
///
/// First derivatives use a step of cbrt(eps) times the length scale.
/// Second derivatives use eps^(1/4), the optimal step for a second
/// difference quotient. No third derivatives are provided, so curvature
/// gradients fall back to differencing the curvature data.
pub struct FiniteDifferenceSurface {
    f: Box<ValueFn>,
    support_radius: f64,
    length_scale: f64,
}

impl fmt::Debug for FiniteDifferenceSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceSurface")
            .field("support_radius", &self.support_radius)
            .field("length_scale", &self.length_scale)
            .finish()
    }
}

impl FiniteDifferenceSurface {
    pub fn new<F>(f: F, support_radius: f64, length_scale: f64) -> Self
    where
        F: Fn(Point) -> Vec3 + Send + Sync + 'static,
    {
        Self {
            f: Box::new(f),
            support_radius,
            length_scale,
        }
    }

    fn shifted(&self, q: Point, a: f64, b: f64) -> Vec3 {
        (self.f)([q[0] + a, q[1] + b])
    }
}

impl Surface for FiniteDifferenceSurface {
    fn evaluate(&self, q: Point) -> Vec3 {
        (self.f)(q)
    }

    fn jacobian(&self, q: Point) -> [Vec3; 2] {
        let h = f64::EPSILON.cbrt() * self.length_scale;
        [
            (self.shifted(q, h, 0.0) - self.shifted(q, -h, 0.0)) / (2.0 * h),
            (self.shifted(q, 0.0, h) - self.shifted(q, 0.0, -h)) / (2.0 * h),
        ]
    }

    fn hessian(&self, q: Point) -> [[Vec3; 2]; 2] {
        let h = f64::EPSILON.powf(0.25) * self.length_scale;
        let p0 = (self.f)(q);
        let p11 = (self.shifted(q, h, 0.0) - 2.0 * p0 + self.shifted(q, -h, 0.0)) / (h * h);
        let p22 = (self.shifted(q, 0.0, h) - 2.0 * p0 + self.shifted(q, 0.0, -h)) / (h * h);
        let p12 = (self.shifted(q, h, h) - self.shifted(q, h, -h) - self.shifted(q, -h, h)
            + self.shifted(q, -h, -h))
            / (4.0 * h * h);
        [[p11, p12], [p12, p22]]
    }

    fn support_radius(&self) -> f64 {
        self.support_radius
    }

    fn length_scale(&self) -> f64 {
        self.length_scale
    }
}

/// Result of the total-curvature quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TotalCurvature {
    pub value: f64,
    /// |last - previous refinement|.
    pub delta: f64,
    /// Panels per side of the final square rule.
    pub panels: usize,
}

/// Integral of K g^{1/2} over the square [-r, r]^2 enclosing the support,
/// refined dyadically until successive values agree to the tolerance.
pub fn total_curvature<S: Surface + ?Sized>(
    surface: &S,
    spec: &RefinementSpec,
) -> Result<TotalCurvature> {
    let r = surface.support_radius();
    if !r.is_finite() {
        return Err(Error::Domain(
            "total curvature needs a compactly supported deformation".into(),
        ));
    }
    let gl = GaussLegendre::new(spec.order);
    let mut panels = spec.initial_panels.max(1);
    let mut prev = square_integral(surface, &gl, r, panels)?;
    let mut delta = f64::INFINITY;
    for _ in 0..spec.max_refinements {
        panels *= 2;
        let next = square_integral(surface, &gl, r, panels)?;
        delta = (next - prev).abs();
        prev = next;
        if delta < spec.tolerance {
            return Ok(TotalCurvature {
                value: next,
                delta,
                panels,
            });
        }
    }
    Err(Error::QuadratureDivergence {
        delta,
        tol: spec.tolerance,
    })
}

fn square_integral<S: Surface + ?Sized>(
    surface: &S,
    gl: &GaussLegendre,
    r: f64,
    panels: usize,
) -> Result<f64> {
    use rayon::prelude::*;
    let h = 2.0 * r / panels as f64;
    let rule: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let lo = -r + h * p as f64;
            gl.on_interval(lo, lo + h).collect::<Vec<_>>()
        })
        .collect();
    let rows: Vec<f64> = rule
        .par_iter()
        .map(|&(y, wy)| -> Result<f64> {
            let mut terms = Vec::with_capacity(rule.len());
            for &(x, wx) in &rule {
                let c = compute_curvature(surface, [x, y])?;
                terms.push(wx * c.gauss * c.det_g.sqrt());
            }
            Ok(wy * crate::quadrature::pairwise_sum(&terms))
        })
        .collect::<Result<_>>()?;
    Ok(crate::quadrature::pairwise_sum(&rows))
}

/// Positive and negative parts of the total curvature, integrated over the
/// support disk in polar coordinates with radial breakpoints at the
/// surface's declared interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSplit {
    pub positive: f64,
    pub negative: f64,
}

pub fn curvature_split<S: Surface + ?Sized>(
    surface: &S,
    radial_panels: usize,
    order: usize,
    angular_nodes: usize,
) -> Result<CurvatureSplit> {
    let r = surface.support_radius();
    if !r.is_finite() {
        return Err(Error::Domain("curvature split needs a finite support".into()));
    }
    let br = breakpoints(0.0, r, &surface.radial_interfaces());
    let radial = composite_rule(&br, radial_panels, order);
    let dth = 2.0 * std::f64::consts::PI / angular_nodes as f64;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &(rho, wr) in &radial {
        for k in 0..angular_nodes {
            let th = (k as f64 + 0.5) * dth;
            let c = compute_curvature(surface, [rho * th.cos(), rho * th.sin()])?;
            let v = wr * dth * rho * c.gauss * c.det_g.sqrt();
            if v >= 0.0 {
                pos.push(v);
            } else {
                neg.push(v);
            }
        }
    }
    Ok(CurvatureSplit {
        positive: crate::quadrature::pairwise_sum(&pos),
        negative: crate::quadrature::pairwise_sum(&neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Saddle;

    impl Surface for Saddle {
        fn evaluate(&self, q: Point) -> Vec3 {
            Vec3::new(q[0], q[1], q[0] * q[1])
        }
        fn jacobian(&self, q: Point) -> [Vec3; 2] {
            [Vec3::new(1.0, 0.0, q[1]), Vec3::new(0.0, 1.0, q[0])]
        }
        fn hessian(&self, _q: Point) -> [[Vec3; 2]; 2] {
            let z = Vec3::zeros();
            let e = Vec3::new(0.0, 0.0, 1.0);
            [[z, e], [e, z]]
        }
        fn support_radius(&self) -> f64 {
            f64::INFINITY
        }
    }

    #[test]
    fn saddle_at_origin() {
        let c = compute_curvature(&Saddle, [0.0, 0.0]).unwrap();
        assert!((c.gauss + 1.0).abs() < 1e-15);
        assert!(c.mean.abs() < 1e-15);
        assert!((c.k_plus - 1.0).abs() < 1e-15 && (c.k_minus + 1.0).abs() < 1e-15);
        assert!(!c.umbilic);
        let t = c.principal_directions[0];
        assert!((t[0].abs() - t[1].abs()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_parametrization_is_an_error() {
        let s = FiniteDifferenceSurface::new(|q| Vec3::new(q[0], q[0], 0.0), 1.0, 1.0);
        assert!(matches!(
            compute_normal(&s, [0.1, 0.2]),
            Err(Error::DegenerateParametrization { .. })
        ));
    }

    #[test]
    fn principal_directions_are_eigenvectors() {
        let c = compute_curvature(&Saddle, [0.3, -0.7]).unwrap();
        let s = c.shape_operator();
        for (t, k) in c.principal_directions.iter().zip([c.k_plus, c.k_minus]) {
            assert!((s * t - t * k).norm() < 1e-12);
        }
        let (a, b) = (c.principal_directions[0], c.principal_directions[1]);
        assert!((a.transpose() * c.g * b)[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn fd_surface_matches_analytic_saddle() {
        let s = FiniteDifferenceSurface::new(|q| Vec3::new(q[0], q[1], q[0] * q[1]), 1.0, 1.0);
        let a = compute_curvature(&Saddle, [0.2, 0.1]).unwrap();
        let b = compute_curvature(&s, [0.2, 0.1]).unwrap();
        assert!((a.gauss - b.gauss).abs() < 1e-6);
        assert!((a.mean - b.mean).abs() < 1e-6);
    }
}
