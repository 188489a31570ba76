use proptest::prelude::*;
use threshold_lab::seed::SeedSpec;
use threshold_lab::thresholds::{
    min_fractional_weight, min_fractional_weight_in, min_integer_weight, q_threshold, random_antichain, MonotoneFamily,
    Pool, ThresholdKind,
};

fn family(max_n: u32) -> impl Strategy<Value = MonotoneFamily> {
    (1..=max_n, 1usize..=7, any::<u64>())
        .prop_map(|(n, draws, seed)| random_antichain(n, draws, &SeedSpec::new(seed, 0)).unwrap())
}

/// Minimum of `w(G, p)` over every `G` whose upset contains the family.
fn brute_integer(f: &MonotoneFamily, p: f64) -> f64 {
    let n = f.n();
    let sets: Vec<u64> = (1u64..1 << n).collect();
    let minimal: Vec<u64> = f.minimal_sets().iter().map(|s| s.as_u64().unwrap()).collect();
    let mut best = f64::INFINITY;
    for pick in 1u64..1 << sets.len() {
        let chosen: Vec<u64> = (0..sets.len())
            .filter(|&i| pick >> i & 1 == 1)
            .map(|i| sets[i])
            .collect();
        if minimal.iter().all(|&s| chosen.iter().any(|&t| t & !s == 0)) {
            let w: f64 = chosen.iter().map(|t| p.powi(t.count_ones() as i32)).sum();
            best = best.min(w);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricting_the_pool_loses_nothing(f in family(5), p in 0.02f64..1.0) {
        let restricted = min_fractional_weight_in(&f, p, Pool::SubsetsOfMinimal).unwrap();
        let all = min_fractional_weight_in(&f, p, Pool::All).unwrap();
        prop_assert!((restricted.weight - all.weight).abs() <= 1e-9 * all.weight.max(1.0));
    }

    #[test]
    fn integer_search_is_optimal(f in family(4), p in 0.02f64..1.0) {
        let got = min_integer_weight(&f, p).unwrap();
        let want = brute_integer(&f, p);
        prop_assert!((got.weight - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", got.weight, want);
    }

    #[test]
    fn integer_dominates_fractional(f in family(7), p in 0.02f64..1.0) {
        let frac = min_fractional_weight(&f, p).unwrap();
        let int = min_integer_weight(&f, p).unwrap();
        prop_assert!(int.weight >= frac.weight - 1e-9);
        prop_assert!(frac.min_slack >= -1e-9);
        prop_assert!(frac.lower_bound <= frac.weight + 1e-9);
        // the witness is a cover: every minimal set holds a witness member
        for s in f.minimal_sets() {
            prop_assert!(int.witness.iter().any(|t| t.iter().all(|&e| s.contains(e))));
        }
    }

    #[test]
    fn minimum_weight_is_monotone_in_p(f in family(6), a in 0.02f64..1.0, b in 0.02f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for kind in [ThresholdKind::Integer, ThresholdKind::Fractional] {
            let wl = threshold_lab::thresholds::min_weight(&f, kind, lo).unwrap();
            let wh = threshold_lab::thresholds::min_weight(&f, kind, hi).unwrap();
            prop_assert!(wl <= wh + 1e-9);
        }
    }

    #[test]
    fn expectation_threshold_below_fractional(f in family(6)) {
        let q = q_threshold(&f, ThresholdKind::Integer, 1e-4).unwrap();
        let qf = q_threshold(&f, ThresholdKind::Fractional, 1e-4).unwrap();
        prop_assert!(q.lo <= qf.lo);
        prop_assert!(q.hi - q.lo <= 1e-4);
    }
}

#[test]
fn single_pair_thresholds() {
    let f = MonotoneFamily::from_json(r#"{"n":2,"minimal_sets":[[0,1]]}"#).unwrap();
    let q = q_threshold(&f, ThresholdKind::Integer, 1e-6).unwrap();
    let qf = q_threshold(&f, ThresholdKind::Fractional, 1e-6).unwrap();
    // both are p^2 <= 1/2 once the singletons stop paying off
    assert!((q.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    assert!((qf.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
}

#[test]
fn json_round_trip() {
    let f = random_antichain(7, 6, &SeedSpec::new(3, 3)).unwrap();
    assert_eq!(MonotoneFamily::from_json(&f.to_json()).unwrap(), f);
}
