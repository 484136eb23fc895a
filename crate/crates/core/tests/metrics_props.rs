mod oracles;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sizegate::eval::{evaluate, hit_ratio, EvalReport};

fn run(seed: u64, k: usize) -> (EvalReport, [f64; 10], Vec<Vec<String>>, Vec<String>) {
    let (rankings, truth, classes) = oracles::random_fixture(&mut ChaCha8Rng::seed_from_u64(seed));
    let r: Vec<Vec<&str>> = rankings.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let t: Vec<&str> = truth.iter().map(String::as_str).collect();
    let got = evaluate(&r, &t, &classes, k).unwrap();
    let want = oracles::report(&rankings, &truth, k);
    (got, want, rankings, truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluate_matches_brute_force(seed in any::<u64>(), k in 1usize..8) {
        let (got, want, ..) = run(seed, k);
        for (a, b) in got.values().iter().zip(want) {
            prop_assert!((a - b).abs() <= 1e-9, "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn measure_invariants(seed in any::<u64>()) {
        let (got, _, rankings, truth) = run(seed, 5);
        prop_assert!(got.values().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((got.hit_ratio - 5.0 * got.p_at_5).abs() <= 1e-12);
        let all_first = rankings.iter().zip(&truth).all(|(r, t)| &r[0] == t);
        prop_assert_eq!(got.ndcg_at_5 == 1.0, all_first);

        let r: Vec<Vec<&str>> = rankings.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let t: Vec<&str> = truth.iter().map(String::as_str).collect();
        prop_assert_eq!(hit_ratio(&r, &t, 1).unwrap(), got.top1_accuracy);
    }
}
