//! Pointwise and one-dimensional identity checks with stated tolerances.

use crate::bessel::{bessel_k0, bessel_k1, mollifier_norm_sq};
use crate::error::{Error, Result};
use crate::forms::TransverseMode;
use crate::geometry::{compute_curvature, verify_characteristic_equation, third_form_residual, Surface};
use crate::layer::{layer_metric_at, sandwich_eigenvalues, ThicknessReport};
use crate::quadrature::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const THIRD_FORM_TOL: f64 = 1e-9;
pub const DET_G_TOL: f64 = 1e-10;
pub const CHARACTERISTIC_TOL: f64 = 1e-10;
pub const SANDWICH_SLACK: f64 = 1e-10;
pub const ORTHONORMALITY_TOL: f64 = 1e-12;
pub const TRANSVERSE_IDENTITY_TOL: f64 = 1e-10;
pub const MOLLIFIER_TOL: f64 = 1e-7;
/// Allowed deviation of consecutive ratios from the 1/|ln x| law.
pub const DECAY_RATIO_TOL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitySpec {
    /// Random (q, u) samples for the pointwise suite.
    pub samples: usize,
    pub seed: u64,
    /// Transverse modes 1..=n entering the orthonormality check.
    pub modes: usize,
    /// sigma r0 values compared against the quadrature oracle.
    pub mollifier_points: Vec<f64>,
    /// Decreasing sigma r0 values of the decay ratio test.
    pub decay_points: Vec<f64>,
}

impl Default for IdentitySpec {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0x1d,
            modes: 6,
            mollifier_points: vec![0.3, 0.1, 0.01],
            decay_points: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub samples: usize,
    pub seed: u64,
    /// max |III + K g - 2 M h|_F.
    pub third_form: Check,
    /// max |det G - g (1 - 2Mu + Ku^2)^2| / det G.
    pub det_g: Check,
    /// max over scalar and matrix residuals of the characteristic equation.
    pub characteristic: Check,
    /// max excess of the eigenvalues of g^{-1}G outside [C-, C+].
    pub sandwich: Check,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// Samples q uniformly on the support square (or on [-l/2, l/2]^2 for
/// surfaces without compact support) and u uniformly on (-a, a).
pub fn pointwise_suite<S: Surface + ?Sized>(
    surface: &S,
    a: f64,
    thickness: Option<&ThicknessReport>,
    spec: &IdentitySpec,
) -> Result<PointwiseReport> {
    if spec.samples == 0 {
        return Err(Error::Validation {
            field: "identities.samples".into(),
            constraint: "need at least one sample".into(),
        });
    }
    let r = surface.support_radius();
    let half = if r.is_finite() { r } else { 0.5 * surface.length_scale() };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut third, mut det, mut chr, mut sandwich) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut c_plus, mut c_minus) = (f64::NAN, f64::NAN);
    for _ in 0..spec.samples {
        let q = [rng.gen_range(-half..half), rng.gen_range(-half..half)];
        let u = rng.gen_range(-a..a);
        let c = compute_curvature(surface, q)?;
        third = third.max(third_form_residual(&c));
        let ch = verify_characteristic_equation(&c);
        chr = chr.max(ch.scalar).max(ch.matrix);
        let p = layer_metric_at(&c, u)?;
        let exact = c.det_g * p.factor * p.factor;
        det = det.max((p.cov.determinant() - exact).abs() / exact);
        let kmax = match thickness {
            Some(t) => t.max_abs_curvature,
            None => c.k_plus.abs().max(c.k_minus.abs()),
        };
        let (cp, cm) = ((1.0 + a * kmax).powi(2), (1.0 - a * kmax).powi(2));
        let (lo, hi) = sandwich_eigenvalues(&c, &p);
        sandwich = sandwich.max(cm - lo).max(hi - cp);
        c_plus = cp;
        c_minus = cm;
    }
    Ok(PointwiseReport {
        samples: spec.samples,
        seed: spec.seed,
        third_form: Check::new(third, THIRD_FORM_TOL),
        det_g: Check::new(det, DET_G_TOL),
        characteristic: Check::new(chr, CHARACTERISTIC_TOL),
        sandwich: Check::new(sandwich.max(0.0), SANDWICH_SLACK),
        c_plus,
        c_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseReport {
    pub modes: usize,
    /// max |<chi_m, chi_n> - delta_mn|.
    pub orthonormality: Check,
    /// <u^2 (|chi_1'|^2 - kappa_1^2 |chi_1|^2)>.
    pub moment: f64,
    pub moment_defect: Check,
}

/// Gauss-Legendre rule on (-a, a) exact for the trigonometric integrands
/// of the first `modes` modes to machine precision.
fn transverse_rule(a: f64, modes: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(16);
    let panels = 4 * modes.max(1);
    let h = 2.0 * a / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = -a + h * p as f64;
            gl.on_interval(lo, lo + h).collect::<Vec<_>>()
        })
        .collect()
}

pub fn transverse_suite(a: f64, modes: usize) -> Result<TransverseReport> {
    let n = modes.max(1);
    let chi: Vec<TransverseMode> = (1..=n).map(|k| TransverseMode::new(k, a)).collect::<Result<_>>()?;
    let rule = transverse_rule(a, n);
    let mut ortho = 0.0f64;
    for (i, m) in chi.iter().enumerate() {
        for (j, k) in chi.iter().enumerate() {
            let s: f64 = rule.iter().map(|&(u, w)| w * m.value(u) * k.value(u)).sum();
            let delta = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((s - delta).abs());
        }
    }
    let c1 = chi[0];
    let k2 = c1.kappa().powi(2);
    let moment: f64 = rule
        .iter()
        .map(|&(u, w)| w * u * u * (c1.derivative(u).powi(2) - k2 * c1.value(u).powi(2)))
        .sum();
    Ok(TransverseReport {
        modes: n,
        orthonormality: Check::new(ortho, ORTHONORMALITY_TOL),
        moment,
        moment_defect: Check::new((moment - 1.0).abs(), TRANSVERSE_IDENTITY_TOL),
    })
}

/// Adaptive Gauss-Legendre on [lo, hi]: a panel is accepted when the
/// 10-point value agrees with the sum over its halves.
fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, depth: u32) -> f64 {
    thread_local! {
        static GL: GaussLegendre = GaussLegendre::new(10);
    }
    let whole = GL.with(|g| g.integrate(lo, hi, f));
    let mid = 0.5 * (lo + hi);
    let left = GL.with(|g| g.integrate(lo, mid, f));
    let right = GL.with(|g| g.integrate(mid, hi, f));
    if depth == 0 || (left + right - whole).abs() <= tol * (left + right).abs().max(1e-300) {
        left + right
    } else {
        adaptive(f, lo, mid, tol, depth - 1) + adaptive(f, mid, hi, tol, depth - 1)
    }
}

/// 2 pi / K0(x)^2 int_x^inf t K1(t)^2 dt by adaptive quadrature, with the
/// integration range split geometrically below t = 1.
pub fn mollifier_norm_quadrature(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("oracle needs 0 < sigma r0 < 1, got {x}")));
    }
    let g = |t: f64| {
        let k1 = bessel_k1(t).unwrap_or(0.0);
        t * k1 * k1
    };
    let mut breaks = vec![x];
    let mut t = x;
    while t < 1.0 {
        t = (4.0 * t).min(1.0);
        breaks.push(t);
    }
    let mut t = 1.0;
    while t < 60.0 {
        t += 2.0;
        breaks.push(t);
    }
    let integral: f64 = breaks
        .windows(2)
        .map(|w| adaptive(&g, w[0], w[1], 1e-13, 30))
        .sum();
    Ok(2.0 * PI * integral / bessel_k0(x)?.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierRow {
    pub sigma_r0: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub relative_difference: Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub sigma_r0: f64,
    pub norm_sq: f64,
    /// norm_sq |ln x| / (2 pi), which tends to 1.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifierReport {
    pub rows: Vec<MollifierRow>,
    pub decay: Vec<DecayRow>,
    /// max |scaled_{k+1} / scaled_k - 1| over consecutive decay points.
    pub decay_ratio: Check,
}

/// The kinetic norm depends on sigma and r0 only through x = sigma r0, so
/// the suite is parametrized by x.
pub fn mollifier_suite(spec: &IdentitySpec) -> Result<MollifierReport> {
    let rows = spec
        .mollifier_points
        .iter()
        .map(|&x| -> Result<MollifierRow> {
            let closed = mollifier_norm_sq(x, 1.0)?.value;
            let quad = mollifier_norm_quadrature(x)?;
            Ok(MollifierRow {
                sigma_r0: x,
                closed_form: closed,
                quadrature: quad,
                relative_difference: Check::new((closed - quad).abs() / quad.abs(), MOLLIFIER_TOL),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decay = spec
        .decay_points
        .iter()
        .map(|&x| -> Result<DecayRow> {
            let v = mollifier_norm_sq(x, 1.0)?.value;
            Ok(DecayRow {
                sigma_r0: x,
                norm_sq: v,
                scaled: v * x.ln().abs() / (2.0 * PI),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = decay
        .windows(2)
        .map(|w| (w[1].scaled / w[0].scaled - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(MollifierReport {
        rows,
        decay,
        decay_ratio: Check::new(worst, DECAY_RATIO_TOL),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub pointwise: PointwiseReport,
    pub transverse: TransverseReport,
    pub mollifier: MollifierReport,
    pub all_pass: bool,
}

pub fn check_identities<S: Surface + ?Sized>(
    surface: &S,
    a: f64,
    thickness: Option<&ThicknessReport>,
    spec: &IdentitySpec,
) -> Result<IdentityReport> {
    let pointwise = pointwise_suite(surface, a, thickness, spec)?;
    let transverse = transverse_suite(a, spec.modes)?;
    let mollifier = mollifier_suite(spec)?;
    let all_pass = [
        pointwise.third_form,
        pointwise.det_g,
        pointwise.characteristic,
        pointwise.sandwich,
        transverse.orthonormality,
        transverse.moment_defect,
        mollifier.decay_ratio,
    ]
    .iter()
    .all(|c| c.pass)
        && mollifier.rows.iter().all(|r| r.relative_difference.pass);
    Ok(IdentityReport {
        pointwise,
        transverse,
        mollifier,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{CompactBump, Plane};

    #[test]
    fn plane_and_bump_pass_pointwise() {
        let spec = IdentitySpec {
            samples: 200,
            ..Default::default()
        };
        let p = pointwise_suite(&Plane, 1.0, None, &spec).unwrap();
        assert!(p.third_form.pass && p.det_g.pass && p.sandwich.pass);
        let b = CompactBump::new(0.5, 3.0).unwrap();
        let r = pointwise_suite(&b, 0.3, None, &spec).unwrap();
        assert!(r.third_form.pass && r.det_g.pass && r.characteristic.pass && r.sandwich.pass, "{r:?}");
    }

    #[test]
    fn transverse_moment_is_one() {
        for a in [0.1, 1.0, 3.0] {
            let t = transverse_suite(a, 5).unwrap();
            assert!(t.orthonormality.pass, "{t:?}");
            assert!(t.moment_defect.pass, "{t:?}");
        }
    }

    #[test]
    fn quadrature_oracle_agrees_with_closed_form() {
        let m = mollifier_suite(&IdentitySpec::default()).unwrap();
        for r in &m.rows {
            assert!(r.relative_difference.pass, "{r:?}");
        }
        assert!(m.decay_ratio.pass, "{:?}", m.decay);
    }
}
