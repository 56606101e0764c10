use proptest::prelude::*;

use tokenpress::metrics::{ScoreSource, ScoreVector};
use tokenpress::spatial::{divprune_select, prune_topk, tome_merge, window_merge, Budget, DivDistance};
use tokenpress::{apply_plan, compose, TokenSet};

fn token_grid() -> impl Strategy<Value = TokenSet> {
    (1usize..=3, 2usize..=5, 2usize..=5, 1usize..=6).prop_flat_map(|(frames, rows, cols, dim)| {
        prop::collection::vec(-4.0f32..4.0, frames * rows * cols * dim)
            .prop_map(move |data| TokenSet::from_grid(data, dim, frames, rows, cols).unwrap())
    })
}

fn weighted_sum(t: &TokenSet) -> Vec<f64> {
    let mut out = vec![0.0; t.dim()];
    for (row, &w) in t.rows().zip(t.weights()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += w as f64 * v as f64;
        }
    }
    out
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_keeps_a_sorted_subset(tokens in token_grid(), k in 1usize..40) {
        let n = tokens.len();
        let plan = divprune_select(&tokens, Budget::Count(k), DivDistance::Cosine).unwrap();
        prop_assert_eq!(plan.retained(), k.min(n));
        prop_assert!(plan.kept.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(plan.budget_clamped, k > n);
        let out = apply_plan(&tokens, &plan).unwrap();
        prop_assert!(out.token_ids().iter().all(|id| *id < n));
        prop_assert_eq!(out.total_weight(), plan.retained() as u64);
    }

    #[test]
    fn topk_is_nested_in_budget(scores in prop::collection::vec(0.0f64..1.0, 1..50), a in 1usize..50, b in 1usize..50) {
        let sv = ScoreVector::new(scores, ScoreSource::ClsAttention);
        let (lo, hi) = (a.min(b), a.max(b));
        let small = prune_topk(&sv, Budget::Count(lo)).unwrap();
        let large = prune_topk(&sv, Budget::Count(hi)).unwrap();
        prop_assert!(small.kept.iter().all(|p| large.kept.contains(p)));
    }

    #[test]
    fn merging_conserves_mass_and_weighted_sum(tokens in token_grid(), steps in 1usize..3) {
        let n = tokens.len();
        let r = (n / (2 * steps)).max(1).min(n / 2);
        prop_assume!(r * steps < n);
        let plan = tome_merge(&tokens, r, steps).unwrap();
        let out = apply_plan(&tokens, &plan).unwrap();
        prop_assert_eq!(out.len(), n - r * steps);
        prop_assert_eq!(out.total_weight(), n as u64);
        prop_assert!(close(&weighted_sum(&out), &weighted_sum(&tokens), 1e-4));
    }

    #[test]
    fn composition_matches_sequential_application(tokens in token_grid(), k in 1usize..20, tau in 0.0f64..1.0) {
        let first = window_merge(&tokens, (2, 2), tau).unwrap();
        let mid = apply_plan(&tokens, &first).unwrap();
        let second = divprune_select(&mid, Budget::Count(k), DivDistance::Euclidean).unwrap();
        let sequential = apply_plan(&mid, &second).unwrap();
        let composed = compose(tokens.len(), &first, &second).unwrap();
        let direct = apply_plan(&tokens, &composed).unwrap();
        prop_assert_eq!(direct.token_ids(), sequential.token_ids());
        prop_assert_eq!(direct.weights(), sequential.weights());
        let (a, b): (Vec<f64>, Vec<f64>) = (
            direct.data().iter().map(|&v| v as f64).collect(),
            sequential.data().iter().map(|&v| v as f64).collect(),
        );
        prop_assert!(close(&a, &b, 1e-5));
    }
}
