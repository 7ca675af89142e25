use maxconc::covariance::{cov_at, CovarianceModel, Permutation};
use maxconc::montecarlo::{summarize, NormKind};
use maxconc::normal::{cdf, mills_ratio_bounds, std_normal_quantile, u_p};
use maxconc::packing::{alpha_p, greedy_packing, n_tau, n_tau_model, packing_violations, r_q};
use maxconc::rates::{capstone_bound, g_beta, transform_rate, TransformKind, TransformSpec};
use maxconc::sampler::{max_of, min_of, transformed_max};
use proptest::prelude::*;

fn stationary() -> impl Strategy<Value = CovarianceModel> {
    prop_oneof![
        (0.1f64..4.0, 0.2f64..1.0).prop_map(|(g, c)| CovarianceModel::power_law(g, c).unwrap()),
        (0.1f64..4.0, 0.2f64..1.0).prop_map(|(nu, c)| CovarianceModel::log_decay(nu, c).unwrap()),
    ]
}

fn model() -> impl Strategy<Value = CovarianceModel> {
    prop_oneof![
        Just(CovarianceModel::Iid),
        stationary(),
        (stationary(), any::<u64>()).prop_map(|(m, s)| m.permuted(Permutation::Shuffle { seed: s })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_decays_with_lag(m in stationary(), p in 2usize..3000) {
        let mut prev = 1.0;
        for k in 0..p {
            let v = cov_at(&m, 0, k, p).unwrap();
            prop_assert!(v <= prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn n_tau_is_non_increasing_in_tau(m in model(), p in 2usize..300, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let law = m.at(p).unwrap();
        prop_assert!(n_tau(&law, hi).unwrap() <= n_tau(&law, lo).unwrap());
        prop_assert!(n_tau_model(&m, p as u64, hi).unwrap() <= n_tau_model(&m, p as u64, lo).unwrap());
    }

    #[test]
    fn packing_covers_and_separates(m in model(), p in 2usize..300, tau in 0.01f64..0.99) {
        let law = m.at(p).unwrap();
        let set = greedy_packing(&law, tau).unwrap();
        let n = n_tau(&law, tau).unwrap();
        prop_assert!(packing_violations(&law, &set, tau).is_empty());
        prop_assert!(set.len() * n >= p);
    }

    #[test]
    fn permutation_leaves_counts_unchanged(m in stationary(), seed in any::<u64>(), p in 2u64..5000, tau in 0.01f64..0.99) {
        let shuffled = m.clone().permuted(Permutation::Shuffle { seed });
        prop_assert_eq!(n_tau_model(&m, p, tau).unwrap(), n_tau_model(&shuffled, p, tau).unwrap());
    }

    #[test]
    fn alpha_lies_in_unit_interval(p in 2u64..1_000_000, frac in 0.0f64..1.0) {
        let n = 1 + ((p - 1) as f64 * frac) as u64;
        let a = alpha_p(n, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn mills_sandwich(u in 1e-3f64..1e3) {
        let b = mills_ratio_bounds(u).unwrap();
        prop_assert!(b.lower <= b.ratio && b.ratio <= b.upper);
    }

    #[test]
    fn quantile_inverts_cdf(q in 1e-12f64..(1.0 - 1e-12)) {
        let x = std_normal_quantile(q).unwrap();
        let back = if q < 0.5 { cdf(x) } else { 1.0 - maxconc::normal::sf(x) };
        prop_assert!((back - q).abs() <= 1e-12 * q.min(1.0 - q).max(1e-3), "{} {}", q, back);
    }

    #[test]
    fn capstone_is_monotone(p in 3.0f64..1e12, tau in 0.0f64..0.9, dt in 1e-6f64..0.05, n in 1.0f64..100.0, dn in 1.0f64..10.0) {
        let b = capstone_bound(p, tau, n).unwrap().total;
        prop_assert!(capstone_bound(p, tau + dt, n).unwrap().total > b);
        prop_assert!(capstone_bound(p, tau, n + dn).unwrap().total > b);
        prop_assert!(capstone_bound(p * 2.0, tau, n).unwrap().total < b);
    }

    #[test]
    fn g_beta_decreases(a in 1e-6f64..(1.0 - 1e-6), b in 1e-6f64..(1.0 - 1e-6)) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g_beta(lo).unwrap() > g_beta(hi).unwrap());
    }

    #[test]
    fn max_commutes_with_monotone_transforms(x in prop::collection::vec(-30.0f64..30.0, 1..50), l in 0.2f64..1.9) {
        let signed = [
            TransformSpec::IDENTITY,
            TransformSpec::EXP,
            TransformSpec::with_lambda(TransformKind::SignedPower, l).unwrap(),
            TransformSpec::with_lambda(TransformKind::ExpSignedPower, l).unwrap(),
        ];
        for f in signed {
            prop_assert_eq!(transformed_max(&x, &f), f.apply(max_of(&x)));
        }
        let even = [
            TransformSpec::SQUARE,
            TransformSpec::with_lambda(TransformKind::AbsPower, l).unwrap(),
            TransformSpec::with_lambda(TransformKind::ExpAbsPower, l).unwrap(),
        ];
        for f in even {
            prop_assert_eq!(transformed_max(&x, &f), f.apply(max_of(&x)).max(f.apply(min_of(&x))));
        }
    }

    #[test]
    fn tails_partition_the_exceedance(m in prop::collection::vec(0.0f64..6.0, 1..400), delta in 0.01f64..0.9) {
        let e = summarize(1000, &m, 3.0, delta, NormKind::Up, "test");
        prop_assert_eq!(e.prob, e.prob_above() + e.prob_below());
        prop_assert_eq!(e.count_above + e.count_below, m.iter().filter(|v| (*v / 3.0 - 1.0).abs() > delta).count() as u64);
    }
}

#[test]
fn up_tracks_sqrt_two_log_p() {
    // The ratio is about 0.867 at p = 1e4 and first exceeds 0.9 near p = 1e6.
    let ratios: Vec<f64> = (4..=15).map(|k| u_p(10u64.pow(k)).unwrap() / (2.0 * 10f64.powi(k as i32).ln()).sqrt()).collect();
    assert!(ratios.iter().all(|r| *r < 1.0), "{ratios:?}");
    assert!(ratios[2..].iter().all(|r| *r >= 0.9), "{ratios:?}");
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
}

#[test]
fn r_q_vanishes_along_a_schedule() {
    // τ(q) = 1/log q and n(q) = ⌈log q⌉, so α(q) and τ(q) both vanish.
    let mut prev = f64::INFINITY;
    for k in (10..=60).step_by(5) {
        let q = 1u64 << k;
        let lq = (q as f64).ln();
        let tau = 1.0 / lq;
        let n = lq.ceil() as u64;
        let r = r_q(q, tau, n).unwrap();
        let a = alpha_p(n, q).unwrap();
        let shape = a + tau + 2f64.powf(-(q as f64).powf(1.0 - a));
        assert!(r < prev, "R_q not decreasing at q = 2^{k}: {r} after {prev}");
        assert!((0.2..=5.0).contains(&(r / shape)), "R_q/shape = {} at q = 2^{k}", r / shape);
        prev = r;
    }
}

#[test]
fn exp_power_rate_approaches_its_asymptote() {
    // d*/(λ δ (2 log p)^{λ/2}) along δ = 1/log p. For λ = 1/2 the ratio is
    // already within 2% of 1; for λ ≥ 1 convergence is slow and only the
    // trend toward 1 is checked.
    let ratio = |l: f64, k: i32| {
        let p = 2f64.powi(k);
        let d = 1.0 / p.ln();
        let s = TransformSpec::with_lambda(TransformKind::ExpAbsPower, l).unwrap();
        transform_rate(&s, p, d).unwrap() / (l * d * (2.0 * p.ln()).powf(l / 2.0))
    };
    for k in [16, 20, 30, 40, 60] {
        assert!((ratio(0.5, k) - 1.0).abs() < 0.02, "p = 2^{k}: {}", ratio(0.5, k));
    }
    for l in [1.0, 1.5] {
        let dev: Vec<f64> = [16, 20, 30, 40, 60].iter().map(|&k| (ratio(l, k) - 1.0).abs()).collect();
        assert!(dev.windows(2).all(|w| w[1] < w[0]), "lambda = {l}: {dev:?}");
    }
}
