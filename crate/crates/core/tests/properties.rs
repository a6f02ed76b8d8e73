use proptest::prelude::*;
use qcd::cli::format_number;
use qcd::decentralized::{design_mlr_quantizer, quantized_kl};
use qcd::detectors::{
    brute_force_cusum, posterior_update, CusumState, DeShiryaevState, ShiryaevLambdaState, ShiryaevRState,
    ShiryaevState, SrState,
};
use qcd::dist::{ChangePointLaw, DensityPair};
use qcd::rng::trial_rng;

const BIG: f64 = 1e300;

fn llr_path(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn posterior_stays_in_unit_interval(p in 0.0f64..=1.0, rho in 1e-6f64..0.5, y in -50.0f64..50.0) {
        let q = posterior_update(p, rho, y);
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert_eq!(posterior_update(1.0, rho, y), 1.0);
    }

    #[test]
    fn three_shiryaev_forms_agree(path in llr_path(60), rho in 1e-3f64..0.3) {
        let mut p = ShiryaevState::new(rho, 1.0 - 1e-12).unwrap();
        let mut lam = ShiryaevLambdaState::new(rho, BIG).unwrap();
        let mut r = ShiryaevRState::new(rho, BIG).unwrap();
        // p carries 1 − p to absolute precision only: after the path comes
        // close to 1 its relative error is about ε / (1 − p_max)
        let mut p_max: f64 = 0.0;
        for &y in &path {
            p.step(y).unwrap();
            lam.step(y).unwrap();
            r.step(y).unwrap();
            if p.is_stopped() {
                break;
            }
            p_max = p_max.max(p.posterior());
            let q = lam.posterior();
            let tol = 1e3 * f64::EPSILON / (1.0 - p_max) * q.min(1.0 - q);
            prop_assert!((q - p.posterior()).abs() <= tol, "{} vs {}", q, p.posterior());
            prop_assert!((r.r() * rho / lam.lambda() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shiryaev_forms_stop_together(path in llr_path(80), rho in 1e-3f64..0.3, a in 0.5f64..0.999) {
        let odds = a / (1.0 - a);
        let mut p = ShiryaevState::new(rho, a).unwrap();
        let mut lam = ShiryaevLambdaState::new(rho, odds).unwrap();
        let mut r = ShiryaevRState::new(rho, odds / rho).unwrap();
        for &y in &path {
            let sp = p.step(y).unwrap();
            let sl = lam.step(y).unwrap();
            let sr = r.step(y).unwrap();
            // near-ties may split by rounding; require agreement away from the boundary
            let margin = (lam.log_lambda() - odds.ln()).abs();
            if margin > 1e-9 {
                prop_assert_eq!(sp, sl);
                prop_assert_eq!(sl, sr);
            }
            if sp || sl || sr {
                break;
            }
        }
    }

    #[test]
    fn cusum_recursion_matches_enumeration(path in llr_path(200)) {
        let mut s = CusumState::new(BIG).unwrap();
        let brute = brute_force_cusum(&path);
        for (&y, &c) in path.iter().zip(&brute) {
            s.step(y).unwrap();
            prop_assert!(s.w() >= 0.0);
            prop_assert!(s.w() >= s.c());
            prop_assert!((s.c() - c).abs() < 1e-9 * (1.0 + c.abs()));
            prop_assert!((s.w() - c.max(0.0)).abs() < 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn sr_log_domain_matches_direct_recursion(path in llr_path(40), r0 in 0.0f64..10.0) {
        let mut s = SrState::with_head_start(r0, BIG).unwrap();
        let mut direct = r0;
        for &y in &path {
            s.step(y).unwrap();
            direct = (1.0 + direct) * y.exp();
            prop_assert!((s.r() / direct - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn de_with_zero_skip_threshold_is_shiryaev(path in llr_path(80), rho in 1e-3f64..0.3) {
        let mut de = DeShiryaevState::new(rho, 1.0 - 1e-12, 0.0).unwrap();
        let mut sh = ShiryaevState::new(rho, 1.0 - 1e-12).unwrap();
        for &y in &path {
            prop_assert!(de.take_next());
            let a = de.step(Some(y)).unwrap();
            let b = sh.step(y).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(de.posterior(), sh.posterior());
            if a {
                break;
            }
        }
    }

    #[test]
    fn de_posterior_bounded_and_skips_below_b(path in llr_path(80), rho in 1e-3f64..0.3, b in 0.0f64..1.0) {
        let mut de = DeShiryaevState::new(rho, 0.999, b).unwrap();
        let mut it = path.iter();
        while !de.is_stopped() {
            prop_assert_eq!(de.take_next(), de.posterior() >= b);
            let obs = if de.take_next() {
                match it.next() {
                    Some(&y) => Some(y),
                    None => break,
                }
            } else {
                None
            };
            de.step(obs).unwrap();
            prop_assert!((0.0..=1.0).contains(&de.posterior()));
            if de.steps() > 10_000 {
                break;
            }
        }
        prop_assert!(de.observations_used() <= de.steps());
    }

    #[test]
    fn kl_is_nonnegative(mu1 in -3.0f64..3.0, sigma in 0.2f64..3.0, p0 in 0.01f64..0.99, p1 in 0.01f64..0.99, l0 in 0.1f64..5.0, l1 in 0.1f64..5.0) {
        for pair in [
            DensityPair::gaussian(0.0, mu1, sigma).unwrap(),
            DensityPair::bernoulli(p0, p1).unwrap(),
            DensityPair::exponential(l0, l1).unwrap(),
        ] {
            prop_assert!(pair.kl() >= 0.0);
        }
    }

    #[test]
    fn quantization_never_increases_divergence(mu in 0.2f64..2.0, mut cuts in prop::collection::vec(-3.0f64..3.0, 1..6), extra in -3.0f64..3.0) {
        let model = DensityPair::gaussian(0.0, mu, 1.0).unwrap();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let coarse = quantized_kl(&model, &cuts).unwrap();
        prop_assert!(coarse <= model.kl() + 1e-12);
        if cuts.iter().all(|c| (c - extra).abs() > 1e-6) {
            let mut finer = cuts.clone();
            finer.push(extra);
            finer.sort_by(f64::total_cmp);
            prop_assert!(quantized_kl(&model, &finer).unwrap() >= coarse - 1e-12);
        }
    }

    #[test]
    fn geometric_change_point_is_at_least_one(rho in 1e-6f64..0.999, seed in any::<u64>()) {
        let law = ChangePointLaw::GeometricPrior { rho };
        let mut rng = trial_rng(seed, 0);
        for _ in 0..32 {
            prop_assert!(law.draw(&mut rng).unwrap() >= 1);
        }
        prop_assert_eq!(law.mass(0), 0.0);
    }

    #[test]
    fn printed_numbers_parse_back(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let s = format_number(x);
        prop_assert!(!s.contains(','));
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}

#[test]
fn designed_quantizer_kl_is_monotone_in_levels() {
    let model = DensityPair::gaussian(0.0, 1.0, 1.0).unwrap();
    let mut last = 0.0;
    for levels in [2, 3, 4, 8, 16] {
        let q = design_mlr_quantizer(&model, levels).unwrap();
        assert!(q.kl >= last - 1e-9 && q.kl <= model.kl(), "{levels}: {}", q.kl);
        last = q.kl;
    }
}
