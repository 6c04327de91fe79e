mod support;

use iwl_core::stats::{
    box_cox_transform, gaussian_pdf, shift_positive, skewness, trimmed_gaussian_fit,
};
use iwl_core::{compute_weights, IwlConfig, ScoreBatch};
use proptest::prelude::*;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand_distr::Exp;
use support::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn check_against_oracle(scores: &[f64]) {
    let cfg = IwlConfig::default();
    let got = compute_weights(&ScoreBatch::new(scores.to_vec()).unwrap(), &cfg).unwrap();
    let (want, cap) = weights_oracle(scores, cfg.epsilon, cfg.alpha, cfg.t0);
    assert!(rel_close(got.cap, cap, 1e-10), "cap {} vs {}", got.cap, cap);
    for (i, (g, w)) in got.weights.iter().zip(&want).enumerate() {
        assert!(rel_close(*g, *w, 1e-10), "w[{i}]: {g} vs {w}");
    }
}

#[test]
fn exponential_batch_matches_reference() {
    let mut r = rng(3);
    let scores: Vec<f64> = Exp::new(1.0).unwrap().sample_iter(&mut r).take(256).collect();
    check_against_oracle(&scores);
}

#[test]
fn mixed_family_batches_match_reference() {
    for trial in 0..18u64 {
        let mut r = rng(100 + trial);
        check_against_oracle(&mixed_batch(trial as usize, 256, &mut r));
    }
}

#[test]
fn constant_batch_gets_unit_weights() {
    let w = compute_weights(&ScoreBatch::new(vec![2.0; 4]).unwrap(), &IwlConfig::default()).unwrap();
    assert_eq!(w.weights, vec![1.0; 4]);
    assert_eq!(w.cap, 20.0);
}

#[test]
fn reweighting_lowers_skewness_on_average() {
    let cfg = IwlConfig::default();
    let mut raw_total = 0.0;
    let mut reweighted_total = 0.0;
    let trials = 100;
    for t in 0..trials {
        let mut r = rng(500 + t);
        let scores = mixed_batch(7, 256, &mut r);
        let raw = skewness(&scores).unwrap();
        assert!(raw > 0.5, "trial {t}: raw skew {raw}");
        let w = compute_weights(&ScoreBatch::new(scores.clone()).unwrap(), &cfg).unwrap();
        let pick = WeightedIndex::new(&w.weights).unwrap();
        let resampled: Vec<f64> = (0..4096).map(|_| scores[pick.sample(&mut r)]).collect();
        raw_total += raw;
        reweighted_total += skewness(&resampled).unwrap_or(0.0);
    }
    let (raw_mean, rw_mean) = (raw_total / trials as f64, reweighted_total / trials as f64);
    assert!(rw_mean < raw_mean, "reweighted {rw_mean} vs raw {raw_mean}");
}

fn positive_batch() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..1e3, 2..200)
}

fn any_batch() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e4f64..1e4, 2..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cap_law_and_nonnegativity(v in any_batch(), alpha in 0.01f64..10.0, t0 in 0.1f64..50.0) {
        let cfg = IwlConfig { alpha, t0, ..IwlConfig::default() };
        let w = compute_weights(&ScoreBatch::new(v.clone()).unwrap(), &cfg).unwrap();
        let expected_cap = match skewness(&v) {
            Ok(s) => (alpha * s.abs().max(cfg.epsilon)).min(t0),
            Err(_) => t0,
        };
        prop_assert_eq!(w.cap, expected_cap);
        prop_assert_eq!(w.weights.len(), v.len());
        for x in &w.weights {
            prop_assert!(x.is_finite() && *x >= 0.0 && *x <= w.cap);
        }
    }

    #[test]
    fn weights_are_deterministic(v in any_batch()) {
        let b = ScoreBatch::new(v).unwrap();
        let cfg = IwlConfig::default();
        let a = compute_weights(&b, &cfg).unwrap();
        let c = compute_weights(&b, &cfg).unwrap();
        prop_assert!(a.weights.iter().zip(&c.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn box_cox_preserves_rank(v in positive_batch(), lambda in -5.0f64..5.0) {
        let t = box_cox_transform(&ScoreBatch::new(v.clone()).unwrap(), lambda).unwrap();
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(t[i] <= t[j], "lambda {lambda}: {} -> {}, {} -> {}", v[i], t[i], v[j], t[j]);
                }
            }
        }
    }

    #[test]
    fn box_cox_near_zero_lambda_is_log(v in prop::collection::vec(0.1f64..10.0, 1..50)) {
        let t = box_cox_transform(&ScoreBatch::new(v.clone()).unwrap(), 1e-8).unwrap();
        for (s, b) in v.iter().zip(&t) {
            let l = s.ln();
            prop_assert!((b - l).abs() <= 1e-6 * l.abs().max(1e-12) || (b - l).abs() < 1e-7);
        }
    }

    #[test]
    fn mirrored_sample_has_zero_skew(half in prop::collection::vec(0.0f64..100.0, 1..100), center in -50.0f64..50.0) {
        let mut v: Vec<f64> = half.iter().map(|d| center + d).collect();
        v.extend(half.iter().map(|d| center - d));
        if let Ok(s) = skewness(&v) {
            prop_assert!(s.abs() < 1e-12, "skew {s}");
        }
    }

    #[test]
    fn pdf_positive_and_bounded(v in any_batch()) {
        let fit = trimmed_gaussian_fit(&v, 1e-4).unwrap();
        prop_assert!(fit.sigma2 > 0.0);
        let peak = 1.0 / (2.0 * std::f64::consts::PI * fit.sigma2).sqrt();
        for p in gaussian_pdf(&v, &fit) {
            prop_assert!(p > 0.0 && p <= peak);
        }
    }

    #[test]
    fn untrimmed_sample_fits_plain_moments(v in prop::collection::vec(-1.0f64..1.0, 3..100)) {
        let fit = trimmed_gaussian_fit(&v, 1e-4).unwrap();
        if v.iter().all(|&x| x <= fit.threshold) && !fit.fallback {
            let n = v.len() as f64;
            let mu = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            prop_assert_eq!(fit.mu, mu);
            prop_assert_eq!(fit.sigma2, var);
        }
    }

    #[test]
    fn shift_keeps_order_and_positivity(v in any_batch()) {
        let s = shift_positive(&ScoreBatch::new(v.clone()).unwrap(), 1e-4);
        for (i, x) in s.values().iter().enumerate() {
            prop_assert!(*x > 0.0);
            for j in 0..v.len() {
                prop_assert_eq!(v[i] < v[j], *x < s.values()[j]);
            }
        }
    }
}
