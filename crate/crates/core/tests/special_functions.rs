// Reference values are quoted to the digits the oracle printed.
#![allow(clippy::excessive_precision)]

use proptest::prelude::*;
use qlayer::bessel::{bessel_k0, bessel_k1, mollifier_exterior_ln_mass, mollifier_norm_sq};
use qlayer::identities::mollifier_norm_quadrature;

// Reference values from 30-digit arbitrary precision evaluation.
const K_TABLE: [(f64, f64, f64); 11] = [
    (1e-8, 18.536612259610778409, 99999999.999999904817),
    (1e-3, 7.0236888005623813436, 999.99623815608557428),
    (0.1, 2.4270690247020166125, 9.8538447808706061348),
    (0.5, 0.92441907122766586178, 1.6564411200033008937),
    (1.0, 0.42102443824070833334, 0.60190723019723457474),
    (1.999, 0.11403383058923292414, 0.1400498420771096829),
    (2.001, 0.1137540987366846116, 0.13968218830176753496),
    (5.0, 0.0036910983340425942747, 0.0040446134454521642084),
    (20.0, 5.7412378153365242927e-10, 5.8830579695570381777e-10),
    (100.0, 4.6566282291759020189e-45, 4.6798537356369092866e-45),
    (700.0, 4.669776431685376881e-306, 4.6731107967079661091e-306),
];

// 2 pi / K0(x)^2 int_x^inf t K1(t)^2 dt at the same precision.
const NORM_TABLE: [(f64, f64); 7] = [
    (0.3, 3.07804840439813961796525474745),
    (0.1, 2.06453306634547062174682182762),
    (0.01, 1.18993184339628351282045261542),
    (1e-3, 0.830888437881338382535265856818),
    (1e-4, 0.637589307880102254304887248955),
    (1e-5, 0.517078369847297482853811682273),
    (1e-6, 0.434820854090647670271868677439),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn k0_k1_match_reference_values() {
    for (x, k0, k1) in K_TABLE {
        assert!(rel(bessel_k0(x).unwrap(), k0) < 1e-13, "K0({x})");
        assert!(rel(bessel_k1(x).unwrap(), k1) < 1e-13, "K1({x})");
    }
}

#[test]
fn mollifier_norm_matches_reference_values() {
    for (x, v) in NORM_TABLE {
        let n = mollifier_norm_sq(x / 1.5, 1.5).unwrap();
        assert!(rel(n.value, v) < 1e-12, "x = {x}: {} vs {v}", n.value);
        assert!(!n.loss_of_precision);
    }
}

#[test]
fn quadrature_oracle_matches_reference_values() {
    for (x, v) in NORM_TABLE {
        assert!(rel(mollifier_norm_quadrature(x).unwrap(), v) < 1e-9, "x = {x}");
    }
}

#[test]
fn exterior_mass_matches_reference_values() {
    for (s, r0, v) in [
        (0.1, 1.5, 4.1728480769539464896),
        (0.01, 2.0, 7.5599667384755385223),
        (1e-4, 1.5, 15.188635837478317467),
    ] {
        assert!((mollifier_exterior_ln_mass(s, r0).unwrap() - v).abs() < 1e-11);
    }
}

#[test]
fn tiny_arguments_are_flagged() {
    assert!(mollifier_norm_sq(1e-10, 1.0).unwrap().loss_of_precision);
    assert!(mollifier_norm_sq(0.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn norm_depends_only_on_the_product(x in 1e-7f64..0.9, r0 in 0.1f64..10.0) {
        let a = mollifier_norm_sq(x / r0, r0).unwrap().value;
        let b = mollifier_norm_sq(x, 1.0).unwrap().value;
        prop_assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn norm_decreases_to_zero_with_sigma(x in 1e-7f64..0.9, f in 0.05f64..0.95) {
        let a = mollifier_norm_sq(x, 1.0).unwrap().value;
        let b = mollifier_norm_sq(x * f, 1.0).unwrap().value;
        prop_assert!(b < a && b > 0.0);
    }

    #[test]
    fn k1_exceeds_k0_and_both_decrease(x in 1e-6f64..50.0, dx in 1e-3f64..1.0) {
        let (k0, k1) = (bessel_k0(x).unwrap(), bessel_k1(x).unwrap());
        prop_assert!(k1 > k0 && k0 > 0.0);
        prop_assert!(bessel_k0(x + dx).unwrap() < k0);
        prop_assert!(bessel_k1(x + dx).unwrap() < k1);
    }
}
