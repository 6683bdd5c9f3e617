//! Variational certificate that the layer Hamiltonian has spectrum below
//! kappa_1^2: psi_sigma = phi_sigma chi_1 deformed by eps Theta with
//! Theta = j^2 (H - kappa_1^2) psi_sigma.

use crate::bessel::mollifier_norm_sq;
use crate::error::{Error, Result};
use crate::forms::{
    interior_forms, quadratic_form_t, DiskRule, FormValues, InteriorForms,
    LinearCombination, MollifiedMode, TransverseMode, TrialFunction, TrialValue,
};
use crate::geometry::{CurvatureJet, Orientation, Point, Surface};
use crate::layer::{layer_factor, layer_metric_at, metric_gradient, LayerConfig};
use crate::quadrature::{pairwise_sum, QuadratureSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One-dimensional plateau bump beta(t) = exp(1 - 1/(1 - t^{2p})) on |t| < 1.
fn plateau(t: f64, p: u32) -> (f64, f64) {
    let s = t.abs().powi(2 * p as i32);
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let v = (1.0 - 1.0 / (1.0 - s)).exp();
    if v == 0.0 {
        return (0.0, 0.0);
    }
    let ds = 2.0 * p as f64 * t.signum() * t.abs().powi(2 * p as i32 - 1);
    (v, -v * ds / ((1.0 - s) * (1.0 - s)))
}

/// Shape of the localization function j(q, u) = beta(|q - c|/r_j) beta(u/a_j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationSpec {
    pub center: [f64; 2],
    /// r_j; defaults to the surface support radius.
    pub radius: Option<f64>,
    /// a_j / a.
    pub transverse_fraction: f64,
    /// Plateau exponent p of beta; 1 is the standard bump.
    pub plateau: u32,
}

impl Default for LocalizationSpec {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: None,
            transverse_fraction: 0.9,
            plateau: 2,
        }
    }
}

/// Resolved localization function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localization {
    pub center: [f64; 2],
    pub radius: f64,
    pub half_height: f64,
    pub plateau: u32,
}

impl Localization {
    pub fn resolve<S: Surface + ?Sized>(
        spec: &LocalizationSpec,
        surface: &S,
        layer: &LayerConfig,
    ) -> Result<Self> {
        let radius = spec.radius.unwrap_or_else(|| surface.support_radius());
        let invalid = |field: &str, constraint: String| Error::Validation {
            field: format!("certify.localization.{field}"),
            constraint,
        };
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("radius", format!("must be finite and > 0, got {radius}")));
        }
        let reach = spec.center[0].hypot(spec.center[1]) + radius;
        if reach > layer.r0 * (1.0 + 1e-12) {
            return Err(invalid(
                "radius",
                format!("|center| + radius = {reach} must not exceed r0 = {}", layer.r0),
            ));
        }
        if !(spec.transverse_fraction > 0.0 && spec.transverse_fraction < 1.0) {
            return Err(invalid(
                "transverse_fraction",
                format!("must lie in (0, 1), got {}", spec.transverse_fraction),
            ));
        }
        if spec.plateau == 0 || spec.plateau > 8 {
            return Err(invalid("plateau", format!("must lie in 1..=8, got {}", spec.plateau)));
        }
        Ok(Self {
            center: spec.center,
            radius,
            half_height: spec.transverse_fraction * layer.a,
            plateau: spec.plateau,
        })
    }

    /// Radius of the disk about the origin containing supp j.
    pub fn reach(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.radius
    }

    /// j and (d_1 j, d_2 j, d_u j).
    pub fn eval(&self, q: Point, u: f64) -> TrialValue {
        let dx = q[0] - self.center[0];
        let dy = q[1] - self.center[1];
        let rho = dx.hypot(dy);
        let (br, dbr) = plateau(rho / self.radius, self.plateau);
        let (bu, dbu) = plateau(u / self.half_height, self.plateau);
        if br == 0.0 || bu == 0.0 {
            return (0.0, [0.0; 3]);
        }
        let (cx, cy) = if rho > 0.0 { (dx / rho, dy / rho) } else { (0.0, 0.0) };
        let gr = dbr / self.radius * bu;
        (
            br * bu,
            [gr * cx, gr * cy, br * dbu / self.half_height],
        )
    }
}

/// Theta(q, u) = j^2 pi (2/d)^{3/2} (Ku - M)/(1 - 2Mu + Ku^2) sin(kappa_1 u).
#[derive(Debug, Clone, Copy)]
pub struct Theta {
    pub j: Localization,
    pub mode: TransverseMode,
    inner_radius: f64,
}

impl Theta {
    pub fn new(j: Localization, layer: &LayerConfig) -> Result<Self> {
        Ok(Self {
            j,
            mode: TransverseMode::new(1, layer.a)?,
            inner_radius: j.reach(),
        })
    }

    /// Same function integrated over a larger disk (for combinations).
    pub fn with_inner_radius(mut self, r: f64) -> Self {
        self.inner_radius = r;
        self
    }
}

impl TrialFunction for Theta {
    fn eval(&self, q: Point, u: f64, jet: &CurvatureJet) -> Result<TrialValue> {
        let (j, dj) = self.j.eval(q, u);
        if j == 0.0 {
            return Ok((0.0, [0.0; 3]));
        }
        let c = &jet.data;
        let d = self.mode.width();
        let amp = PI * (2.0 / d).powf(1.5);
        let k = self.mode.kappa();
        let (sn, cs) = (k * u).sin_cos();
        let den = layer_factor(c, u)?;
        let num = c.gauss * u - c.mean;
        let f = num / den;
        let j2 = j * j;
        let mut grad = [0.0; 3];
        for r in 0..2 {
            let dnum = jet.d_gauss[r] * u - jet.d_mean[r];
            let dden = -2.0 * u * jet.d_mean[r] + u * u * jet.d_gauss[r];
            let df = (dnum * den - num * dden) / (den * den);
            grad[r] = amp * sn * (2.0 * j * dj[r] * f + j2 * df);
        }
        let df_u = (c.gauss * den - num * (2.0 * c.gauss * u - 2.0 * c.mean)) / (den * den);
        grad[2] = amp * (2.0 * j * dj[2] * f * sn + j2 * (df_u * sn + f * k * cs));
        Ok((amp * j2 * f * sn, grad))
    }

    fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    fn radial_interfaces(&self) -> Vec<f64> {
        vec![self.j.reach()]
    }

    fn transverse_interfaces(&self) -> Vec<f64> {
        vec![-self.j.half_height, self.j.half_height]
    }
}

/// The radial mollifier trial psi_sigma = phi_sigma chi_1 (phi is 1 on r <= r0).
pub fn build_mollifier(sigma: f64, r0: f64, a: f64) -> Result<MollifiedMode> {
    MollifiedMode::new(sigma, r0, a)
}

pub fn build_theta<S: Surface + ?Sized>(
    surface: &S,
    layer: &LayerConfig,
    spec: &LocalizationSpec,
) -> Result<Theta> {
    Theta::new(Localization::resolve(spec, surface, layer)?, layer)
}

/// (H - kappa_1^2) psi for psi = phi(r) chi_1(u), using the Laplace-Beltrami
/// split H = H_1 + H_2 and the analytic metric gradient.
pub fn shifted_action(
    mollifier: &MollifiedMode,
    q: Point,
    u: f64,
    jet: &CurvatureJet,
) -> Result<f64> {
    let grad = metric_gradient(jet, u)?;
    let gi = grad.point.contra;
    let r = q[0].hypot(q[1]);
    let [phi, dphi, d2phi] = mollifier.radial(r);
    let chi = mollifier.mode.value(u);
    let dchi = mollifier.mode.derivative(u);
    let mut h1 = 0.0;
    if dphi != 0.0 || d2phi != 0.0 {
        let x = [q[0] / r, q[1] / r];
        let div = grad.contra_divergence();
        for m in 0..2 {
            let phi_m = dphi * x[m];
            h1 -= div[m] * phi_m;
            for n in 0..2 {
                let delta = if m == n { 1.0 } else { 0.0 };
                let phi_mn = d2phi * x[m] * x[n] + dphi * (delta - x[m] * x[n]) / r;
                h1 -= gi[(m, n)] * phi_mn;
                h1 -= 0.5 / grad.point.det * grad.d_det[m] * gi[(m, n)] * dphi * x[n];
            }
        }
    }
    let c = &jet.data;
    let drift = (c.gauss * u - c.mean) / layer_factor(c, u)?;
    Ok(chi * h1 - 2.0 * drift * dchi * phi)
}

/// B = |j (H - kappa_1^2) psi_sigma|^2_G and the overlap (psi_sigma, Theta)_G,
/// integrated over supp j.
pub fn localized_terms<S: Surface + ?Sized>(
    surface: &S,
    mollifier: &MollifiedMode,
    theta: &Theta,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let j = theta.j;
    let mut radial = surface.radial_interfaces();
    radial.push(surface.support_radius());
    let rule = DiskRule::new(j.reach(), j.half_height, &radial, &[], quad);
    let [b, overlap] = rule.integrate_columns(surface, Orientation::Standard, |q, jet| {
        let mut bs = Vec::with_capacity(rule.transverse.len());
        let mut os = Vec::with_capacity(rule.transverse.len());
        for &(u, wu) in &rule.transverse {
            let (jv, _) = j.eval(q, u);
            if jv == 0.0 {
                continue;
            }
            let w = wu * layer_metric_at(&jet.data, u)?.jacobian();
            let x = shifted_action(mollifier, q, u, jet)?;
            bs.push(w * jv * jv * x * x);
            let (psi, _) = mollifier.eval(q, u, jet)?;
            let (th, _) = theta.eval(q, u, jet)?;
            os.push(w * psi * th);
        }
        Ok([pairwise_sum(&bs), pairwise_sum(&os)])
    })?;
    Ok((b, overlap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpsilonStatus {
    /// C > 0: exact vertex of the parabola.
    Minimized,
    /// B = 0: nothing to gain.
    NoImprovement,
    /// C <= 0 with B > 0: t decreases without bound along -Theta.
    UnboundedDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonResult {
    pub status: EpsilonStatus,
    pub eps_star: f64,
    pub t_min: f64,
}

/// Minimizes t0 + 2 eps B + eps^2 C over eps.
pub fn epsilon_minimize(t0: f64, b: f64, c: f64) -> EpsilonResult {
    if b == 0.0 {
        return EpsilonResult {
            status: EpsilonStatus::NoImprovement,
            eps_star: 0.0,
            t_min: t0,
        };
    }
    if c > 0.0 {
        let eps = -b / c;
        return EpsilonResult {
            status: EpsilonStatus::Minimized,
            eps_star: eps,
            t_min: t0 - b * b / c,
        };
    }
    // finite probe; the trial stays admissible for every finite eps
    let eps = -(t0.abs() + 1.0) / b;
    EpsilonResult {
        status: EpsilonStatus::UnboundedDirection,
        eps_star: eps,
        t_min: t0 + 2.0 * eps * b + eps * eps * c,
    }
}

/// Certifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifierConfig {
    /// Decreasing sigma values (1/length); empty selects the default grid
    /// sigma_k = r0^{-1} 10^{-k/2}, k = 2..=12.
    pub sigma_grid: Vec<f64>,
    pub localization: LocalizationSpec,
    pub quadrature: QuadratureSpec,
    /// Required margin in units of kappa_1^2.
    pub delta_min: f64,
}

impl Default for CertifierConfig {
    fn default() -> Self {
        Self {
            sigma_grid: Vec::new(),
            localization: LocalizationSpec::default(),
            quadrature: QuadratureSpec::default(),
            delta_min: 1e-8,
        }
    }
}

pub fn default_sigma_grid(r0: f64) -> Vec<f64> {
    (2..=12).map(|k| 10f64.powf(-(k as f64) / 2.0) / r0).collect()
}

impl CertifierConfig {
    pub fn sigma_values(&self, r0: f64) -> Result<Vec<f64>> {
        let grid = if self.sigma_grid.is_empty() {
            default_sigma_grid(r0)
        } else {
            self.sigma_grid.clone()
        };
        for (i, &s) in grid.iter().enumerate() {
            if !(s > 0.0) || !(s * r0 < 1.0) {
                return Err(Error::Validation {
                    field: "certify.sigma_grid".into(),
                    constraint: format!("entry {i} = {s}: need 0 < sigma r0 < 1"),
                });
            }
            if i > 0 && !(s < grid[i - 1]) {
                return Err(Error::Validation {
                    field: "certify.sigma_grid".into(),
                    constraint: "must be strictly decreasing".into(),
                });
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertificateStatus {
    Certified,
    NotCertified,
}

/// One row of the sigma sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub sigma_r0: f64,
    pub t0: f64,
    /// Closed-form kinetic norm of the mollifier tail.
    pub mollifier_norm_sq: f64,
    pub b: f64,
    pub eps_star: f64,
    pub t_min: f64,
    pub ln_norm_sq: f64,
    /// t_min / |psi_sigma + eps Theta|^2_G.
    pub energy_gap: f64,
    pub quadrature_error: f64,
    pub passes: bool,
    pub loss_of_precision: bool,
}

/// t at eps* by full quadrature against the quadratic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectCheck {
    pub t_direct: f64,
    pub t_expansion: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub status: CertificateStatus,
    pub threshold: f64,
    pub sigma_star: f64,
    pub eps_star: f64,
    pub epsilon_status: EpsilonStatus,
    pub t0: f64,
    pub b: f64,
    pub c: f64,
    pub t_min: f64,
    /// E_ub - kappa_1^2, kept separately because it can be far below the
    /// resolution of kappa_1^2 in floating point.
    pub energy_gap: f64,
    /// kappa_1^2 + energy_gap.
    pub e_ub: f64,
    pub ln_norm_sq: f64,
    pub quadrature_error: f64,
    /// delta_min in absolute units.
    pub margin: f64,
    pub theta_norm_sq: f64,
    /// Inner-disk value of t for psi_sigma (sigma independent).
    pub interior_t: f64,
    pub localization: Localization,
    pub direct_check: Option<DirectCheck>,
    pub sweep: Vec<SweepRow>,
}

struct ResolvedTerms {
    interior: InteriorForms,
    b: f64,
    c: f64,
    overlap: f64,
    theta_norm_sq: f64,
}

fn resolve_terms<S: Surface + ?Sized>(
    surface: &S,
    layer: &LayerConfig,
    sigma: f64,
    theta: &Theta,
    quad: &QuadratureSpec,
) -> Result<ResolvedTerms> {
    let psi = build_mollifier(sigma, layer.r0, layer.a)?;
    let interior = interior_forms(surface, layer, &psi, quad)?;
    let (b, overlap) = localized_terms(surface, &psi, theta, quad)?;
    let th = quadratic_form_t(surface, layer, theta, quad)?;
    Ok(ResolvedTerms {
        interior,
        b,
        c: th.t,
        overlap,
        theta_norm_sq: th.norm_sq,
    })
}

/// Runs the sigma sweep and returns the certificate.
///
/// The inner-disk part of t[psi_sigma], B and C do not depend on sigma
/// (phi_sigma = 1 on the disk), so they are computed once at the base and
/// refined quadrature; the refined values are reported and the difference
/// is the quadrature error estimate. The full sweep is always tabulated;
/// the reported optimum is the first sigma that certifies.
pub fn certify<S: Surface + ?Sized>(
    surface: &S,
    layer: &LayerConfig,
    cfg: &CertifierConfig,
) -> Result<Certificate> {
    let r0 = layer.r0;
    if !(r0 >= surface.support_radius()) {
        return Err(Error::Validation {
            field: "certify.r0".into(),
            constraint: format!(
                "r0 = {r0} must be at least the support radius {}",
                surface.support_radius()
            ),
        });
    }
    let sigmas = cfg.sigma_values(r0)?;
    let threshold = layer.threshold();
    let margin = cfg.delta_min * threshold;
    let theta = build_theta(surface, layer, &cfg.localization)?;

    let base = resolve_terms(surface, layer, sigmas[0], &theta, &cfg.quadrature)?;
    let fine = resolve_terms(surface, layer, sigmas[0], &theta, &cfg.quadrature.refined())?;
    let d_int = (fine.interior.t - base.interior.t).abs();
    let d_b = (fine.b - base.b).abs();
    let d_c = (fine.c - base.c).abs();
    let (b, c) = (fine.b, fine.c);

    let mut sweep = Vec::with_capacity(sigmas.len());
    for &sigma in &sigmas {
        let norm = mollifier_norm_sq(sigma, r0)?;
        let psi = build_mollifier(sigma, r0, layer.a)?;
        let forms = FormValues::combine(&fine.interior, psi.exterior()?, threshold);
        let t0 = forms.t;
        let eps = epsilon_minimize(t0, b, c);
        let e = eps.eps_star;
        let err = d_int + 2.0 * e.abs() * d_b + e * e * d_c + 1e-12 * norm.value.abs();
        // |psi + eps Theta|^2 = |psi|^2 + 2 eps (psi, Theta) + eps^2 |Theta|^2
        let extra = 2.0 * e * fine.overlap + e * e * fine.theta_norm_sq;
        let ln_norm = forms.ln_norm_sq + (extra * (-forms.ln_norm_sq).exp()).ln_1p();
        let gap = eps.t_min * (-ln_norm).exp();
        sweep.push(SweepRow {
            sigma,
            sigma_r0: sigma * r0,
            t0,
            mollifier_norm_sq: norm.value,
            b,
            eps_star: e,
            t_min: eps.t_min,
            ln_norm_sq: ln_norm,
            energy_gap: gap,
            quadrature_error: err,
            passes: eps.t_min + err < -margin && gap < 0.0,
            loss_of_precision: norm.loss_of_precision,
        });
    }

    let best_idx = sweep
        .iter()
        .position(|r| r.passes)
        .unwrap_or_else(|| {
            // no pass: report the smallest t_min + err
            let mut k = 0;
            for (i, r) in sweep.iter().enumerate() {
                if r.t_min + r.quadrature_error < sweep[k].t_min + sweep[k].quadrature_error {
                    k = i;
                }
            }
            k
        });
    let best = sweep[best_idx];
    let eps = epsilon_minimize(best.t0, b, c);

    let direct_check = if eps.eps_star != 0.0 {
        let psi = build_mollifier(best.sigma, r0, layer.a)?;
        let th = theta.with_inner_radius(r0);
        let combo = LinearCombination {
            alpha: 1.0,
            f: &psi,
            beta: eps.eps_star,
            g: &th,
        };
        let t_direct = quadratic_form_t(surface, layer, &combo, &cfg.quadrature.refined())?.t;
        let t_expansion = best.t0 + 2.0 * eps.eps_star * b + eps.eps_star * eps.eps_star * c;
        Some(DirectCheck {
            t_direct,
            t_expansion,
            relative_difference: (t_direct - t_expansion).abs() / t_expansion.abs().max(1e-300),
        })
    } else {
        None
    };

    Ok(Certificate {
        status: if best.passes {
            CertificateStatus::Certified
        } else {
            CertificateStatus::NotCertified
        },
        threshold,
        sigma_star: best.sigma,
        eps_star: eps.eps_star,
        epsilon_status: eps.status,
        t0: best.t0,
        b,
        c,
        t_min: best.t_min,
        energy_gap: best.energy_gap,
        e_ub: threshold + best.energy_gap,
        ln_norm_sq: best.ln_norm_sq,
        quadrature_error: best.quadrature_error,
        margin,
        theta_norm_sq: fine.theta_norm_sq,
        interior_t: fine.interior.t,
        localization: theta.j,
        direct_check,
        sweep,
    })
}
