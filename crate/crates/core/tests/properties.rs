use kslab::analysis::{compute_sigma, fit_exponential, fit_power};
use kslab::domain::{Domain, Field};
use kslab::lorentz::{lorentz_quasinorm, lp_norm};
use kslab::snapshot::{decode_any, Snapshot, SnapshotField};
use kslab::{RadialField, RadialGrid, TorusDomain, TorusField, TorusGrid};
use proptest::prelude::*;

fn torus_field(values: Vec<f64>) -> TorusField {
    TorusField::new(TorusGrid::new(2, 8, 3.0).unwrap(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_is_minimum_and_homogeneous(n in 2usize..6, frac in 0.01f64..0.99, delta in 0.0f64..5.0) {
        let nf = n as f64;
        let p = nf * (1.0 + frac);
        let s = compute_sigma(p, n, delta).unwrap();
        prop_assert!(s.candidates.iter().all(|&c| s.sigma <= c));
        let s2 = compute_sigma(p, n, 2.0 * delta).unwrap();
        prop_assert!((s2.sigma - 2.0 * s.sigma).abs() <= 1e-12 * (1.0 + s.sigma.abs()));
    }

    #[test]
    fn fits_recover_pure_laws(rate in -3.0f64..3.0, pre in 0.01f64..100.0) {
        let pw: Vec<(f64, f64)> = (1..=20).map(|k| { let t = k as f64; (t, pre * t.powf(rate)) }).collect();
        let f = fit_power(&pw, (1.0, 20.0)).unwrap();
        prop_assert!((f.rate - rate).abs() < 1e-6);
        prop_assert!(f.r2 > 1.0 - 1e-9);
        let ex: Vec<(f64, f64)> = (0..20).map(|k| { let t = 0.25 * k as f64; (t, pre * (-rate * t).exp()) }).collect();
        let f = fit_exponential(&ex, (0.0, 5.0)).unwrap();
        prop_assert!((f.rate - rate).abs() < 1e-6);
    }

    #[test]
    fn diagonal_lorentz_equals_lebesgue(values in proptest::collection::vec(-4.0f64..4.0, 64), p in 1.0f64..6.0) {
        let f = torus_field(values);
        let b = lp_norm(&f, p);
        prop_assume!(b > 1e-12);
        let a = lorentz_quasinorm(&f, p, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn weak_norm_is_homogeneous(values in proptest::collection::vec(-4.0f64..4.0, 64), c in -10.0f64..10.0, p in 0.5f64..4.0) {
        let f = torus_field(values);
        let a = lorentz_quasinorm(&f.scaled(c), p, f64::INFINITY).unwrap();
        let b = c.abs() * lorentz_quasinorm(&f, p, f64::INFINITY).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn snapshots_round_trip_bit_exact(values in proptest::collection::vec(proptest::num::f64::NORMAL, 64), radial in proptest::collection::vec(proptest::num::f64::NORMAL, 20)) {
        let f = torus_field(values);
        let back = TorusField::decode(&f.encode()).unwrap();
        prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let r = RadialField::new(RadialGrid::new(3, 20, 12.0).unwrap(), radial).unwrap();
        match decode_any(&r.encode()).unwrap() {
            Snapshot::Radial(back) => prop_assert_eq!(back, r),
            Snapshot::Torus(_) => prop_assert!(false, "wrong geometry"),
        }
    }

    #[test]
    fn heat_flow_composes_and_keeps_mass(values in proptest::collection::vec(-1.0f64..1.0, 64), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let d = TorusDomain::new(TorusGrid::new(2, 8, 3.0).unwrap());
        let f = torus_field(values);
        let two = d.semigroup(&d.semigroup(&f, a).unwrap(), b).unwrap();
        let one = d.semigroup(&f, a + b).unwrap();
        prop_assert!(two.sub(&one).max_abs() < 1e-12);
        prop_assert!((one.integral() - f.integral()).abs() < 1e-12 * (1.0 + f.integral().abs() + lp_norm(&f, 1.0)));
    }
}
