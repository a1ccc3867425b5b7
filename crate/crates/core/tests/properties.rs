use proptest::prelude::*;

use lecam::distances::tv_discrete;
use lecam::expansion::{expansion_order1, expansion_order2, log_ratio_exact};
use lecam::kernels::{apply_jitter, apply_round};
use lecam::lattice::{enumerate_support, in_truncated_set, support_size, ExperimentParams, LatticePoint};
use lecam::pmf::DiscreteLaw;
use lecam::rng::stream_rng;
use lecam::sum::log_sum_exp;

fn small_params() -> impl Strategy<Value = ExperimentParams> {
    (1usize..=3)
        .prop_flat_map(|d| prop::collection::vec(1u64..=12, d + 1))
        .prop_flat_map(|counts| {
            let population: u64 = counts.iter().sum();
            (Just(counts), 1..=population.min(10))
        })
        .prop_map(|(counts, sample)| {
            let population = counts.iter().sum();
            ExperimentParams::new(population, sample, counts).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn support_is_sorted_complete_and_feasible(p in small_params()) {
        let pts = enumerate_support(&p).unwrap();
        prop_assert_eq!(pts.len() as u128, support_size(&p));
        prop_assert!(pts.windows(2).all(|w| w[0].coords() < w[1].coords()));
        for k in &pts {
            prop_assert!(p.contains(k));
            prop_assert_eq!(k.all_counts().sum::<u64>(), p.sample());
        }
    }

    #[test]
    fn both_laws_normalize(p in small_params()) {
        for law in [DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial] {
            let logs: Vec<f64> = law.support(&p).unwrap().iter().map(|k| law.log_pmf(&p, k).ln()).collect();
            prop_assert!(log_sum_exp(&logs).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_set_grows_with_gamma(p in small_params(), g1 in 0.05f64..0.95, g2 in 0.05f64..0.95) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        for k in enumerate_support(&p).unwrap() {
            prop_assert!(!in_truncated_set(&p, &k, lo) || in_truncated_set(&p, &k, hi));
        }
    }

    #[test]
    fn single_draw_laws_agree(counts in prop::collection::vec(1u64..=50, 2..=4)) {
        let population = counts.iter().sum();
        let p = ExperimentParams::new(population, 1, counts).unwrap();
        for k in enumerate_support(&p).unwrap() {
            prop_assert!(log_ratio_exact(&p, &k).unwrap().abs() < 1e-12);
            prop_assert_eq!(expansion_order1(&p, &k), 0.0);
            prop_assert_eq!(expansion_order2(&p, &k), 0.0);
        }
        let tv = tv_discrete(&p, DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial).unwrap();
        prop_assert!(tv.value <= tv.error_estimate);
    }

    #[test]
    fn tv_is_symmetric_and_bounded(p in small_params()) {
        let ab = tv_discrete(&p, DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial).unwrap().value;
        let ba = tv_discrete(&p, DiscreteLaw::Multinomial, DiscreteLaw::Hypergeometric).unwrap().value;
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn round_inverts_jitter(k in prop::collection::vec(0u64..1_000_000, 1..=5), seed in any::<u64>()) {
        let total = k.iter().sum::<u64>() + 1;
        let point = LatticePoint::new(k, total).unwrap();
        let mut rng = stream_rng(seed, 0);
        let back = apply_round(&apply_jitter(&point, &mut rng));
        prop_assert!(back.iter().zip(point.coords()).all(|(&b, &c)| b == c as i64));
    }
}
