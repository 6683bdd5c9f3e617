//! Macdonald functions (modified Bessel functions of the second kind)
//! K0, K1, K2 for real positive argument, and the closed-form kinetic norm
//! of the K0 mollifier.

use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
/// Beyond this argument exp(-x) underflows to a subnormal.
pub const UNDERFLOW_ARGUMENT: f64 = 705.0;
/// Below this argument the mollifier norm is reported with a precision flag.
pub const SMALL_ARGUMENT_FLAG: f64 = 1e-8;

/// Scaled pair (e^x K0(x), e^x x K1(x)).
///
/// `x K1` rather than `K1` keeps both members finite down to x ~ 1e-300.
pub(crate) fn k0_xk1_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_LIMIT {
        let (k0, xk1) = small_series(x);
        let e = x.exp();
        (k0 * e, xk1 * e)
    } else {
        let (k0s, k1s) = steed_cf2(x);
        (k0s, x * k1s)
    }
}

/// Power series with logarithmic term, valid and rapidly convergent on (0, 2].
fn small_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    // k-th terms: t^k/(k!)^2 and t^k/(k!(k+1)!)
    let mut a = 1.0;
    let mut b = 1.0;
    let mut harm = 0.0; // H_k
    let mut i0 = 0.0;
    let mut s0h = 0.0;
    let mut s1 = 0.0;
    let mut s1h = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        let harm_next = harm + 1.0 / (kf + 1.0);
        i0 += a;
        s0h += harm * a;
        s1 += b;
        s1h += (harm + harm_next) * b;
        if a < 1e-18 * i0 && k > 2 {
            break;
        }
        a *= t / ((kf + 1.0) * (kf + 1.0));
        b *= t / ((kf + 1.0) * (kf + 2.0));
        harm = harm_next;
    }
    let k0 = -lg * i0 + s0h;
    let xk1 = 1.0 + 0.5 * x * x * (lg * s1 - 0.5 * s1h);
    (k0, xk1)
}

/// Steed's continued fraction (Temme's CF2) for x > 2; returns e^x K0, e^x K1.
fn steed_cf2(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn check_argument(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel K requires finite x > 0, got {x}")));
    }
    Ok(())
}

/// K_0(x) or K_1(x). Returns 0 beyond [`UNDERFLOW_ARGUMENT`].
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(order, x)?;
    Ok(scaled * (-x).exp())
}

/// e^x K_n(x) for n in {0, 1}.
pub fn bessel_k_scaled(order: u32, x: f64) -> Result<f64> {
    check_argument(x)?;
    let (k0, xk1) = k0_xk1_scaled(x);
    match order {
        0 => Ok(k0),
        1 => Ok(xk1 / x),
        n => Err(Error::Domain(format!("only orders 0 and 1 are supported, got {n}"))),
    }
}

pub fn bessel_k0(x: f64) -> Result<f64> {
    bessel_k(0, x)
}

pub fn bessel_k1(x: f64) -> Result<f64> {
    bessel_k(1, x)
}

/// K0, K1 and K2 = K0 + (2/x) K1 at one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselEval {
    pub x: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// True when exp(-x) underflowed and the values were flushed to zero.
    pub underflow: bool,
}

impl BesselEval {
    pub fn new(x: f64) -> Result<Self> {
        check_argument(x)?;
        let (k0s, xk1s) = k0_xk1_scaled(x);
        let k1s = xk1s / x;
        let k2s = k0s + 2.0 * k1s / x;
        let e = (-x).exp();
        Ok(Self {
            x,
            k0: k0s * e,
            k1: k1s * e,
            k2: k2s * e,
            underflow: x > UNDERFLOW_ARGUMENT,
        })
    }
}

/// Kinetic norm of the mollifier, `int |d/dr phi_sigma|^2 r dr dtheta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierNorm {
    pub value: f64,
    /// sigma r0 below [`SMALL_ARGUMENT_FLAG`]: outside the validated range.
    pub loss_of_precision: bool,
}

/// Closed form `pi x^2 / K0(x)^2 [K0 K2 - K1^2](x)` with x = sigma r0.
pub fn mollifier_norm_sq(sigma: f64, r0: f64) -> Result<MollifierNorm> {
    if !(sigma > 0.0) || !(r0 > 0.0) {
        return Err(Error::Domain(format!(
            "mollifier needs sigma > 0 and r0 > 0, got sigma = {sigma}, r0 = {r0}"
        )));
    }
    let x = sigma * r0;
    check_argument(x)?;
    let (k0, xk1) = k0_xk1_scaled(x);
    // x^2 K0 K2 - x^2 K1^2 = x^2 K0^2 + 2 K0 (x K1) - (x K1)^2, everything scaled by e^{2x}
    let xk0 = x * k0;
    let bracket = xk0 * xk0 + 2.0 * k0 * xk1 - xk1 * xk1;
    Ok(MollifierNorm {
        value: PI * bracket / (k0 * k0),
        loss_of_precision: x < SMALL_ARGUMENT_FLAG,
    })
}

/// Natural log of `int_{r > r0} phi_sigma^2 r dr dtheta`
/// = ln( pi r0^2 [(K1/K0)^2 - 1](sigma r0) ).
pub fn mollifier_exterior_ln_mass(sigma: f64, r0: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(r0 > 0.0) {
        return Err(Error::Domain("mollifier needs sigma > 0 and r0 > 0".into()));
    }
    let x = sigma * r0;
    check_argument(x)?;
    let (k0, xk1) = k0_xk1_scaled(x);
    let xk0 = x * k0;
    let diff = (xk1 - xk0) * (xk1 + xk0);
    Ok((PI * r0 * r0).ln() + diff.ln() - 2.0 * xk0.ln())
}

/// Radial mollifier `min{1, K0(sigma r)/K0(sigma r0)}` and its r-derivative.
pub(crate) fn mollifier_profile(sigma: f64, r0: f64, r: f64) -> (f64, f64) {
    if r <= r0 {
        return (1.0, 0.0);
    }
    let x0 = sigma * r0;
    let x = sigma * r;
    let (k00, _) = k0_xk1_scaled(x0);
    let (k0, xk1) = k0_xk1_scaled(x);
    let decay = (x0 - x).exp();
    let value = decay * k0 / k00;
    let deriv = -sigma * decay * (xk1 / x) / k00;
    (value, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_errors() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k(2, 1.0).is_err());
        assert!(mollifier_norm_sq(0.0, 1.0).is_err());
    }

    #[test]
    fn series_and_continued_fraction_agree_at_the_seam() {
        for &x in &[1.9, 2.0, 2.1] {
            let (a0, a1) = small_series(x);
            let (c0, c1) = steed_cf2(x);
            let e = (-x).exp();
            assert!((a0 - c0 * e).abs() / a0 < 1e-13, "K0 at {x}");
            assert!((a1 / x - c1 * e).abs() / (a1 / x) < 1e-13, "K1 at {x}");
        }
    }

    #[test]
    fn recurrence_holds() {
        for &x in &[1e-3, 0.5, 1.0, 3.0, 20.0] {
            let b = BesselEval::new(x).unwrap();
            assert!((b.k2 - (b.k0 + 2.0 / x * b.k1)).abs() <= 1e-12 * b.k2);
            assert!(b.k0 > 0.0 && b.k1 > b.k0 && b.k2 > b.k1);
        }
    }

    #[test]
    fn underflow_is_flagged() {
        let b = BesselEval::new(800.0).unwrap();
        assert!(b.underflow);
        assert_eq!(b.k0, 0.0);
        assert!(!BesselEval::new(700.0).unwrap().underflow);
    }

    #[test]
    fn mollifier_profile_is_continuous_and_decreasing() {
        let (s, r0) = (0.05, 2.0);
        assert_eq!(mollifier_profile(s, r0, r0), (1.0, 0.0));
        let (v, _) = mollifier_profile(s, r0, r0 * (1.0 + 1e-12));
        assert!((v - 1.0).abs() < 1e-11);
        let mut prev = 1.0;
        for i in 1..200 {
            let r = r0 + 0.5 * i as f64;
            let (v, d) = mollifier_profile(s, r0, r);
            assert!(v < prev && d < 0.0);
            prev = v;
        }
    }
}
