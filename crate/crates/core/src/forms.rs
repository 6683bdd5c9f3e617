//! Transverse modes, effective potentials and quadrature of the quadratic
//! forms q1, q2 and t = q1 + q2 - kappa1^2 |psi|^2 on the straightened layer.

use crate::bessel::{mollifier_exterior_ln_mass, mollifier_norm_sq};
use crate::error::{Error, Result};
use crate::geometry::{curvature_jet, CurvatureData, CurvatureJet, Orientation, Point, Surface};
use crate::layer::{layer_factor, layer_metric_at, metric_gradient, LayerConfig};
use crate::quadrature::{breakpoints, composite_rule, pairwise_sum, QuadratureSpec};
use serde::Serialize;
use std::f64::consts::PI;

/// Eigenfunction chi_n of -d^2/du^2 on (-a, a) with Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    pub n: usize,
    pub half_width: f64,
}

impl TransverseMode {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("transverse mode index starts at 1".into()));
        }
        if !(half_width > 0.0) {
            return Err(Error::Domain(format!("half-width must be > 0, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    /// kappa_n = pi n / d.
    pub fn kappa(&self) -> f64 {
        PI * self.n as f64 / self.width()
    }

    fn amplitude(&self) -> f64 {
        (2.0 / self.width()).sqrt()
    }

    pub fn value(&self, u: f64) -> f64 {
        let k = self.kappa();
        if self.n % 2 == 1 {
            self.amplitude() * (k * u).cos()
        } else {
            self.amplitude() * (k * u).sin()
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let k = self.kappa();
        if self.n % 2 == 1 {
            -self.amplitude() * k * (k * u).sin()
        } else {
            self.amplitude() * k * (k * u).cos()
        }
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        -self.kappa().powi(2) * self.value(u)
    }
}

/// (K - M^2)/(1 - 2Mu + Ku^2)^2.
pub fn potential_v2(c: &CurvatureData, u: f64) -> Result<f64> {
    let f = layer_factor(c, u)?;
    Ok((c.gauss - c.mean * c.mean) / (f * f))
}

/// Step (relative to the surface length scale) used to difference the
/// analytic gradient of det G into its Hessian.
pub const HESSIAN_STEP_ANALYTIC: f64 = 1e-5;
/// Outer step when the gradient itself comes from differences.
pub const HESSIAN_STEP_FD: f64 = 1e-4;

/// Curvature jets at q and at q +- h e_r, enough to evaluate V1 at any u.
#[derive(Debug, Clone)]
pub struct PotentialColumn {
    pub center: CurvatureJet,
    plus: [CurvatureJet; 2],
    minus: [CurvatureJet; 2],
    step: f64,
}

impl PotentialColumn {
    pub fn new<S: Surface + ?Sized>(surface: &S, q: Point, orientation: Orientation) -> Result<Self> {
        let center = curvature_jet(surface, q, orientation)?;
        let rel = if center.analytic {
            HESSIAN_STEP_ANALYTIC
        } else {
            HESSIAN_STEP_FD
        };
        let step = rel * surface.length_scale();
        let shifted = |r: usize, s: f64| {
            let mut p = q;
            p[r] += s * step;
            curvature_jet(surface, p, orientation)
        };
        Ok(Self {
            plus: [shifted(0, 1.0)?, shifted(1, 1.0)?],
            minus: [shifted(0, -1.0)?, shifted(1, -1.0)?],
            center,
            step,
        })
    }

    pub fn v2(&self, u: f64) -> Result<f64> {
        potential_v2(&self.center.data, u)
    }

    /// V1 = -3/16 G^-2 G_mu G^{mu nu} G_nu + 1/4 G^-1 G^{mu nu} G_{,mu nu}
    ///      + 1/4 G^-1 G_mu G^{mu nu}_{,nu}.
    pub fn v1(&self, u: f64) -> Result<f64> {
        let grad = metric_gradient(&self.center, u)?;
        let mut hess = [[0.0; 2]; 2];
        for s in 0..2 {
            let p = metric_gradient(&self.plus[s], u)?;
            let m = metric_gradient(&self.minus[s], u)?;
            for r in 0..2 {
                hess[r][s] = (p.d_det[r] - m.d_det[r]) / (2.0 * self.step);
            }
        }
        let mixed = 0.5 * (hess[0][1] + hess[1][0]);
        hess[0][1] = mixed;
        hess[1][0] = mixed;
        let gi = grad.point.contra;
        let det = grad.point.det;
        let dd = grad.d_det;
        let div = grad.contra_divergence();
        let mut quad = 0.0;
        let mut trace = 0.0;
        let mut drift = 0.0;
        for mu in 0..2 {
            drift += dd[mu] * div[mu];
            for nu in 0..2 {
                quad += dd[mu] * gi[(mu, nu)] * dd[nu];
                trace += gi[(mu, nu)] * hess[mu][nu];
            }
        }
        Ok(-3.0 / 16.0 * quad / (det * det) + 0.25 * trace / det + 0.25 * drift / det)
    }

    /// V = V1 + V2.
    pub fn potential(&self, u: f64) -> Result<f64> {
        Ok(self.v1(u)? + self.v2(u)?)
    }
}

/// V1(q, u) for a single point (builds a [`PotentialColumn`]).
pub fn potential_v1<S: Surface + ?Sized>(surface: &S, q: Point, u: f64) -> Result<f64> {
    PotentialColumn::new(surface, q, Orientation::Standard)?.v1(u)
}

/// Metric-agnostic V = F^i_{,i} + F_i F^i with F_i = (ln G^{1/4})_{,i},
/// evaluated by nested central differences of det G with the given
/// relative step. Used as an independent check of V1 + V2.
pub fn potential_generic<S: Surface + ?Sized>(
    surface: &S,
    q: Point,
    u: f64,
    rel_step: f64,
) -> Result<f64> {
    let h = rel_step * surface.length_scale();
    let ln_g4 = |x: [f64; 3]| -> Result<f64> {
        let c = crate::geometry::compute_curvature(surface, [x[0], x[1]])?;
        Ok(0.25 * layer_metric_at(&c, x[2])?.det.ln())
    };
    // F_i at x
    let f_low = |x: [f64; 3]| -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            *o = (ln_g4(xp)? - ln_g4(xm)?) / (2.0 * h);
        }
        Ok(out)
    };
    let contra = |x: [f64; 3]| -> Result<nalgebra::Matrix2<f64>> {
        let c = crate::geometry::compute_curvature(surface, [x[0], x[1]])?;
        Ok(layer_metric_at(&c, x[2])?.contra)
    };
    // F^i at x
    let f_up = |x: [f64; 3]| -> Result<[f64; 3]> {
        let fl = f_low(x)?;
        let gi = contra(x)?;
        Ok([
            gi[(0, 0)] * fl[0] + gi[(0, 1)] * fl[1],
            gi[(1, 0)] * fl[0] + gi[(1, 1)] * fl[1],
            fl[2],
        ])
    };
    let x = [q[0], q[1], u];
    let mut div = 0.0;
    for i in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        div += (f_up(xp)?[i] - f_up(xm)?[i]) / (2.0 * h);
    }
    let fl = f_low(x)?;
    let fu = f_up(x)?;
    Ok(div + fl.iter().zip(&fu).map(|(a, b)| a * b).sum::<f64>())
}

/// Closed-form contribution of a separable tail phi(r) chi_1(u) over the
/// flat region r > r_in, where G = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExteriorTail {
    /// int |phi'|^2 r dr dtheta; equals the tail's share of t exactly.
    pub kinetic: f64,
    /// ln int phi^2 r dr dtheta.
    pub ln_mass: f64,
}

/// Value and gradient (d_1, d_2, d_u) of a trial function.
pub type TrialValue = (f64, [f64; 3]);

/// A trial function on the straightened layer (q, u), |u| < a.
///
/// Inside the disk |q| <= `inner_radius` it is integrated numerically; outside
/// it must be a separable tail described by `exterior` (or vanish).
pub trait TrialFunction: Sync {
    /// Value and gradient at (q, u); `jet` is the curvature jet at q.
    fn eval(&self, q: Point, u: f64, jet: &CurvatureJet) -> Result<TrialValue>;

    fn inner_radius(&self) -> f64;

    fn exterior(&self) -> Result<Option<ExteriorTail>> {
        Ok(None)
    }

    /// Radii where the function is not smooth.
    fn radial_interfaces(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Transverse coordinates where the function is not smooth.
    fn transverse_interfaces(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// psi = phi(r) chi_1(u) with the Macdonald mollifier phi_sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifiedMode {
    pub sigma: f64,
    pub r0: f64,
    pub mode: TransverseMode,
}

impl MollifiedMode {
    pub fn new(sigma: f64, r0: f64, half_width: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(r0 > 0.0) {
            return Err(Error::Domain(format!(
                "mollifier needs sigma > 0 and r0 > 0, got sigma = {sigma}, r0 = {r0}"
            )));
        }
        Ok(Self {
            sigma,
            r0,
            mode: TransverseMode::new(1, half_width)?,
        })
    }

    /// phi_sigma(r), d/dr and d^2/dr^2.
    pub fn radial(&self, r: f64) -> [f64; 3] {
        if r <= self.r0 {
            return [1.0, 0.0, 0.0];
        }
        let (v, d) = crate::bessel::mollifier_profile(self.sigma, self.r0, r);
        // K0'' = K0 + K1/x in units of sigma^2
        let x = self.sigma * r;
        let k1_over_k0 = -d / (self.sigma * v);
        let d2 = self.sigma * self.sigma * v * (1.0 + k1_over_k0 / x);
        [v, d, d2]
    }
}

impl TrialFunction for MollifiedMode {
    fn eval(&self, q: Point, u: f64, _jet: &CurvatureJet) -> Result<TrialValue> {
        let r = q[0].hypot(q[1]);
        let [phi, dphi, _] = self.radial(r);
        let chi = self.mode.value(u);
        let (c, s) = if r > 0.0 { (q[0] / r, q[1] / r) } else { (0.0, 0.0) };
        Ok((
            phi * chi,
            [dphi * c * chi, dphi * s * chi, phi * self.mode.derivative(u)],
        ))
    }

    fn inner_radius(&self) -> f64 {
        self.r0
    }

    fn exterior(&self) -> Result<Option<ExteriorTail>> {
        Ok(Some(ExteriorTail {
            kinetic: mollifier_norm_sq(self.sigma, self.r0)?.value,
            ln_mass: mollifier_exterior_ln_mass(self.sigma, self.r0)?,
        }))
    }

    fn radial_interfaces(&self) -> Vec<f64> {
        vec![self.r0]
    }
}

/// psi = alpha f + beta g, with the exterior tail of `f` (g must vanish
/// outside the inner disk).
pub struct LinearCombination<'a> {
    pub alpha: f64,
    pub f: &'a dyn TrialFunction,
    pub beta: f64,
    pub g: &'a dyn TrialFunction,
}

impl TrialFunction for LinearCombination<'_> {
    fn eval(&self, q: Point, u: f64, jet: &CurvatureJet) -> Result<TrialValue> {
        let (a, da) = self.f.eval(q, u, jet)?;
        let (b, db) = self.g.eval(q, u, jet)?;
        Ok((
            self.alpha * a + self.beta * b,
            [
                self.alpha * da[0] + self.beta * db[0],
                self.alpha * da[1] + self.beta * db[1],
                self.alpha * da[2] + self.beta * db[2],
            ],
        ))
    }

    fn inner_radius(&self) -> f64 {
        self.f.inner_radius()
    }

    fn exterior(&self) -> Result<Option<ExteriorTail>> {
        let a2 = self.alpha * self.alpha;
        Ok(self.f.exterior()?.map(|e| ExteriorTail {
            kinetic: a2 * e.kinetic,
            ln_mass: a2.ln() + e.ln_mass,
        }))
    }

    fn radial_interfaces(&self) -> Vec<f64> {
        let mut v = self.f.radial_interfaces();
        v.extend(self.g.radial_interfaces());
        v
    }

    fn transverse_interfaces(&self) -> Vec<f64> {
        let mut v = self.f.transverse_interfaces();
        v.extend(self.g.transverse_interfaces());
        v
    }
}

/// Quadrature values of the forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormValues {
    pub q1: f64,
    pub q2: f64,
    pub norm_sq: f64,
    /// ln of `norm_sq`, finite even when the tail mass overflows.
    pub ln_norm_sq: f64,
    /// q1 + q2 - kappa1^2 norm_sq, accumulated pointwise to avoid cancellation.
    pub t: f64,
    /// Share of t from the closed-form exterior tail.
    pub exterior_t: f64,
    /// Largest |psi| found on the walls u = +-a.
    pub wall_trace: f64,
}

/// Tensor rule over the disk |q| <= r_in (polar) times (-a, a).
pub(crate) struct DiskRule {
    pub radial: Vec<(f64, f64)>,
    pub angular: Vec<(f64, f64)>,
    pub transverse: Vec<(f64, f64)>,
}

impl DiskRule {
    pub fn new(
        r_in: f64,
        a: f64,
        radial_interfaces: &[f64],
        transverse_interfaces: &[f64],
        quad: &QuadratureSpec,
    ) -> Self {
        let rb = breakpoints(0.0, r_in, radial_interfaces);
        let ub = breakpoints(-a, a, transverse_interfaces);
        Self {
            radial: composite_rule(&rb, quad.radial_panels, quad.order),
            angular: quad.angular_rule(),
            transverse: composite_rule(&ub, quad.transverse_panels, quad.order),
        }
    }

    /// Sums `f(q, jet, u-list)` over the disk; each call receives a point q
    /// with its curvature jet and returns the column integral over u
    /// (already weighted). Deterministic order.
    pub fn integrate_columns<S, F, const N: usize>(
        &self,
        surface: &S,
        orientation: Orientation,
        f: F,
    ) -> Result<[f64; N]>
    where
        S: Surface + ?Sized,
        F: Fn(Point, &CurvatureJet) -> Result<[f64; N]> + Sync,
    {
        use rayon::prelude::*;
        let rows: Vec<[f64; N]> = self
            .radial
            .par_iter()
            .map(|&(r, wr)| -> Result<[f64; N]> {
                let mut acc: Vec<[f64; N]> = Vec::with_capacity(self.angular.len());
                for &(th, wt) in &self.angular {
                    let q = [r * th.cos(), r * th.sin()];
                    let jet = curvature_jet(surface, q, orientation)?;
                    let col = f(q, &jet)?;
                    let w = wr * wt * r;
                    let mut v = [0.0; N];
                    for k in 0..N {
                        v[k] = w * col[k];
                    }
                    acc.push(v);
                }
                let mut out = [0.0; N];
                for (k, o) in out.iter_mut().enumerate() {
                    let xs: Vec<f64> = acc.iter().map(|a| a[k]).collect();
                    *o = pairwise_sum(&xs);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            let xs: Vec<f64> = rows.iter().map(|a| a[k]).collect();
            *o = pairwise_sum(&xs);
        }
        Ok(out)
    }
}

/// Tolerance on |psi(q, +-a)| for admissibility.
pub const WALL_TOLERANCE: f64 = 1e-10;

/// Inner-disk quadrature values of the forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteriorForms {
    pub q1: f64,
    pub q2: f64,
    pub norm_sq: f64,
    pub t: f64,
    pub wall_trace: f64,
}

/// Quadrature of the forms over the inner disk |q| <= `trial.inner_radius()`.
pub fn interior_forms<S: Surface + ?Sized>(
    surface: &S,
    layer: &LayerConfig,
    trial: &dyn TrialFunction,
    quad: &QuadratureSpec,
) -> Result<InteriorForms> {
    let a = layer.a;
    let k2 = layer.threshold();
    let r_in = trial.inner_radius();
    let mut radial = surface.radial_interfaces();
    radial.push(surface.support_radius());
    radial.extend(trial.radial_interfaces());
    let rule = DiskRule::new(r_in, a, &radial, &trial.transverse_interfaces(), quad);
    let [q1, q2, norm_sq, t] = rule.integrate_columns(surface, Orientation::Standard, |q, jet| {
        let mut parts = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for &(u, wu) in &rule.transverse {
            let m = layer_metric_at(&jet.data, u)?;
            let (psi, d) = trial.eval(q, u, jet)?;
            let gi = m.contra;
            let kin = d[0] * gi[(0, 0)] * d[0] + 2.0 * d[0] * gi[(0, 1)] * d[1] + d[1] * gi[(1, 1)] * d[1];
            let w = wu * m.jacobian();
            parts[0].push(w * kin);
            parts[1].push(w * d[2] * d[2]);
            parts[2].push(w * psi * psi);
            parts[3].push(w * (kin + d[2] * d[2] - k2 * psi * psi));
        }
        Ok(parts.map(|p| pairwise_sum(&p)))
    })?;
    let wall_trace = wall_trace(surface, trial, &rule, a)?;
    if wall_trace > WALL_TOLERANCE {
        return Err(Error::NonAdmissibleTrial { trace: wall_trace });
    }
    Ok(InteriorForms {
        q1,
        q2,
        norm_sq,
        t,
        wall_trace,
    })
}

impl FormValues {
    /// Adds a closed-form exterior tail to inner-disk values.
    pub fn combine(interior: &InteriorForms, tail: Option<ExteriorTail>, threshold: f64) -> Self {
        let n_in = interior.norm_sq;
        match tail {
            Some(tail) => {
                let mass = tail.ln_mass.exp();
                Self {
                    q1: interior.q1 + tail.kinetic,
                    q2: interior.q2 + threshold * mass,
                    norm_sq: n_in + mass,
                    ln_norm_sq: ln_add(n_in.ln(), tail.ln_mass),
                    t: interior.t + tail.kinetic,
                    exterior_t: tail.kinetic,
                    wall_trace: interior.wall_trace,
                }
            }
            None => Self {
                q1: interior.q1,
                q2: interior.q2,
                norm_sq: n_in,
                ln_norm_sq: n_in.ln(),
                t: interior.t,
                exterior_t: 0.0,
                wall_trace: interior.wall_trace,
            },
        }
    }
}

/// q1, q2, |psi|^2_G and t for a trial function; the inner disk by tensor
/// quadrature, the flat exterior tail in closed form.
pub fn quadratic_form_t<S: Surface + ?Sized>(
    surface: &S,
    layer: &LayerConfig,
    trial: &dyn TrialFunction,
    quad: &QuadratureSpec,
) -> Result<FormValues> {
    let interior = interior_forms(surface, layer, trial, quad)?;
    Ok(FormValues::combine(&interior, trial.exterior()?, layer.threshold()))
}

fn wall_trace<S: Surface + ?Sized>(
    surface: &S,
    trial: &dyn TrialFunction,
    rule: &DiskRule,
    a: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let stride = (rule.angular.len() / 8).max(1);
    for &(r, _) in &rule.radial {
        for &(th, _) in rule.angular.iter().step_by(stride) {
            let q = [r * th.cos(), r * th.sin()];
            let jet = curvature_jet(surface, q, Orientation::Standard)?;
            for u in [-a, a] {
                worst = worst.max(trial.eval(q, u, &jet)?.0.abs());
            }
        }
    }
    Ok(worst)
}

/// ln(e^x + e^y) without overflow.
pub(crate) fn ln_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Transverse averages at a point q: (<G^{1/2} |chi_1'|^2>_u - kappa_1^2 <G^{1/2} |chi_1|^2>_u)
/// by Gauss-Legendre on (-a, a), paired symmetrically so that odd powers of u
/// cancel exactly.
pub fn transverse_reduction(c: &CurvatureData, a: f64, order: usize) -> Result<f64> {
    let mode = TransverseMode::new(1, a)?;
    let k2 = mode.kappa().powi(2);
    let gl = crate::quadrature::GaussLegendre::new(order);
    let mut terms = Vec::with_capacity(order);
    let sqrt_g = c.det_g.sqrt();
    for (u, w) in gl.on_interval(-a, a) {
        if u < 0.0 {
            continue;
        }
        let even = if u == 0.0 {
            layer_factor(c, 0.0)?
        } else {
            0.5 * (layer_factor(c, u)? + layer_factor(c, -u)?)
        };
        let pair = if u == 0.0 { 1.0 } else { 2.0 };
        let chi = mode.value(u);
        let dchi = mode.derivative(u);
        terms.push(pair * w * sqrt_g * even * (dchi * dchi - k2 * chi * chi));
    }
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_curvature;
    use crate::surfaces::{CompactBump, Plane};

    #[test]
    fn modes_satisfy_their_equation() {
        for n in 1..5 {
            let m = TransverseMode::new(n, 0.7).unwrap();
            assert!(m.value(0.7).abs() < 1e-15 && m.value(-0.7).abs() < 1e-15);
            for u in [-0.5, 0.1, 0.33] {
                let h = 1e-4;
                let fd = (m.value(u + h) - 2.0 * m.value(u) + m.value(u - h)) / (h * h);
                assert!((fd - m.second_derivative(u)).abs() < 1e-5 * m.kappa().powi(2));
            }
        }
        assert!(TransverseMode::new(0, 1.0).is_err());
    }

    #[test]
    fn v2_vanishes_on_plane_and_matches_principal_form() {
        let c = compute_curvature(&Plane, [1.0, 2.0]).unwrap();
        assert_eq!(potential_v2(&c, 0.3).unwrap(), 0.0);
        let b = CompactBump::new(0.7, 2.0).unwrap();
        let c = compute_curvature(&b, [0.5, 0.9]).unwrap();
        let v = potential_v2(&c, 0.0).unwrap();
        assert!((v + 0.25 * (c.k_plus - c.k_minus).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn ln_add_is_stable() {
        assert!((ln_add(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(ln_add(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn mollifier_second_derivative() {
        let m = MollifiedMode::new(0.1, 1.5, 0.5).unwrap();
        let r = 4.0;
        let h = 1e-4;
        let fd = (m.radial(r + h)[1] - m.radial(r - h)[1]) / (2.0 * h);
        assert!((fd - m.radial(r)[2]).abs() < 1e-8);
    }
}
