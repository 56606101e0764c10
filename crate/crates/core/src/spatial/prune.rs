use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm, ScoreVector};
use crate::plan::{PlanMode, ReductionPlan};
use crate::tokens::TokenSet;

use super::divprune::{greedy_maxmin, DivDistance};
use super::{argmax, rank_desc, Budget};

fn check_scores(scores: &ScoreVector, n: usize) -> Result<(), ReduceError> {
    if scores.len() != n {
        return Err(ReduceError::ScoreLengthMismatch {
            scores: scores.len(),
            tokens: n,
        });
    }
    Ok(())
}

/// Keeps the `k` highest-scoring tokens.
pub fn prune_topk(scores: &ScoreVector, budget: Budget) -> Result<ReductionPlan, ReduceError> {
    let budget = budget.resolve(scores.len())?;
    let mut kept = rank_desc(&scores.scores);
    kept.truncate(budget.k);
    let mut plan = ReductionPlan::prune(kept);
    plan.budget_clamped = budget.clamped;
    Ok(plan)
}

/// Keeps the `k_dominant` best-scored tokens, then folds the leftovers into
/// `k_contextual` seeds picked by score; every other leftover joins its most
/// similar seed.
pub fn dominant_contextual(
    tokens: &TokenSet,
    scores: &ScoreVector,
    k_dominant: usize,
    k_contextual: usize,
) -> Result<ReductionPlan, ReduceError> {
    dominant_contextual_counted(tokens, scores, k_dominant, k_contextual, &mut OpCounters::default())
}

pub fn dominant_contextual_counted(
    tokens: &TokenSet,
    scores: &ScoreVector,
    k_dominant: usize,
    k_contextual: usize,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let n = tokens.len();
    check_scores(scores, n)?;
    if k_dominant + k_contextual > n {
        return Err(ReduceError::BudgetExceedsTokens {
            requested: k_dominant + k_contextual,
            available: n,
        });
    }
    if k_dominant + k_contextual == 0 {
        return Err(ReduceError::InvalidBudget("budget must keep at least one token".into()));
    }
    let order = rank_desc(&scores.scores);
    let leftovers = &order[k_dominant..];
    let (seeds, rest) = leftovers.split_at(k_contextual);

    let mut into: Vec<Option<usize>> = vec![None; n];
    let mut dropped = vec![false; n];
    if seeds.is_empty() {
        for &p in rest {
            dropped[p] = true;
        }
    } else {
        let mut seeds = seeds.to_vec();
        seeds.sort_unstable();
        let norms: Vec<f64> = tokens.rows().map(norm).collect();
        for &p in rest {
            let sims = seeds
                .iter()
                .map(|&s| cosine_with_norms(tokens.token(p), tokens.token(s), norms[p], norms[s]));
            into[p] = Some(seeds[argmax(sims).unwrap()]);
        }
        counters.similarity_evals += (rest.len() * seeds.len()) as u64;
    }
    let mode = if k_contextual == 0 {
        PlanMode::Prune
    } else {
        PlanMode::PruneThenMerge
    };
    Ok(ReductionPlan::from_assignment(n, &into, &dropped, mode))
}

/// Optionally re-attaches every token dropped by a prune plan to its most
/// similar survivor.
pub fn prune_then_merge(
    tokens: &TokenSet,
    keep_plan: &ReductionPlan,
    merge_dropped: bool,
) -> Result<ReductionPlan, ReduceError> {
    prune_then_merge_counted(tokens, keep_plan, merge_dropped, &mut OpCounters::default())
}

pub fn prune_then_merge_counted(
    tokens: &TokenSet,
    keep_plan: &ReductionPlan,
    merge_dropped: bool,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    if keep_plan.mode != PlanMode::Prune || !keep_plan.merges.is_empty() {
        return Err(ReduceError::NotPruneMode);
    }
    let n = tokens.len();
    keep_plan.validate(n)?;
    if !merge_dropped {
        return Ok(keep_plan.clone());
    }
    let dropped = keep_plan.dropped(n);
    let norms: Vec<f64> = tokens.rows().map(norm).collect();
    let mut into: Vec<Option<usize>> = vec![None; n];
    for &p in &dropped {
        let sims = keep_plan
            .kept
            .iter()
            .map(|&k| cosine_with_norms(tokens.token(p), tokens.token(k), norms[p], norms[k]));
        into[p] = Some(keep_plan.kept[argmax(sims).unwrap()]);
    }
    counters.similarity_evals += (dropped.len() * keep_plan.kept.len()) as u64;
    let mode = if dropped.is_empty() {
        PlanMode::Prune
    } else {
        PlanMode::PruneThenMerge
    };
    let mut plan = ReductionPlan::from_assignment(n, &into, &vec![false; n], mode);
    plan.budget_clamped = keep_plan.budget_clamped;
    Ok(plan)
}

/// Experimental attention+similarity hybrid: keep `k_important` tokens by
/// score, fill the rest of the budget with a max-min diverse subset of the
/// remainder.
pub fn vispruner_select(
    tokens: &TokenSet,
    scores: &ScoreVector,
    k_important: usize,
    budget: Budget,
) -> Result<ReductionPlan, ReduceError> {
    vispruner_select_counted(tokens, scores, k_important, budget, &mut OpCounters::default())
}

pub fn vispruner_select_counted(
    tokens: &TokenSet,
    scores: &ScoreVector,
    k_important: usize,
    budget: Budget,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let n = tokens.len();
    check_scores(scores, n)?;
    let budget = budget.resolve(n)?;
    if k_important > budget.k {
        return Err(ReduceError::BudgetExceedsTokens {
            requested: k_important,
            available: budget.k,
        });
    }
    let order = rank_desc(&scores.scores);
    let (important, remainder) = order.split_at(k_important);
    let mut remainder = remainder.to_vec();
    remainder.sort_unstable();
    let diverse = greedy_maxmin(tokens, &remainder, budget.k - k_important, DivDistance::Cosine, counters);
    let mut plan = ReductionPlan::prune(important.iter().copied().chain(diverse).collect());
    plan.budget_clamped = budget.clamped;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ScoreSource;
    use crate::plan::MergeGroup;

    fn scores(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec(), ScoreSource::ClsAttention)
    }

    fn tokens(vs: &[&[f32]]) -> TokenSet {
        TokenSet::from_vectors(&vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn topk_basic() {
        let plan = prune_topk(&scores(&[0.1, 0.5, 0.3]), Budget::Count(2)).unwrap();
        assert_eq!(plan.kept, vec![1, 2]);
        assert_eq!(plan.mode, PlanMode::Prune);
    }

    #[test]
    fn topk_ties_and_identity() {
        let plan = prune_topk(&scores(&[0.25; 4]), Budget::Count(2)).unwrap();
        assert_eq!(plan.kept, vec![0, 1]);
        let plan = prune_topk(&scores(&[0.25; 4]), Budget::Count(4)).unwrap();
        assert!(plan.is_identity(4));
    }

    #[test]
    fn topk_clamps_oversized_budget() {
        let plan = prune_topk(&scores(&[0.1, 0.2]), Budget::Count(10)).unwrap();
        assert!(plan.is_identity(2));
        assert!(plan.budget_clamped);
    }

    #[test]
    fn contextual_zero_is_pure_prune() {
        let t = tokens(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, -1.0]]);
        let s = scores(&[0.4, 0.1, 0.3, 0.2]);
        let dc = dominant_contextual(&t, &s, 2, 0).unwrap();
        let pt = prune_topk(&s, Budget::Count(2)).unwrap();
        assert_eq!(dc.kept, pt.kept);
        assert!(dc.merges.is_empty());
    }

    #[test]
    fn contextual_full_is_identity() {
        let t = tokens(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let plan = dominant_contextual(&t, &scores(&[0.3, 0.2, 0.1]), 0, 3).unwrap();
        assert!(plan.is_identity(3));
    }

    #[test]
    fn contextual_merges_duplicates() {
        // two high-score orthogonal tokens, two low-score duplicates
        let t = tokens(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        let plan = dominant_contextual(&t, &scores(&[0.4, 0.3, 0.1, 0.2]), 2, 1).unwrap();
        assert_eq!(plan.kept, vec![0, 1, 3]);
        assert_eq!(plan.merges, vec![MergeGroup { target: 3, sources: vec![2] }]);
        assert_eq!(plan.mode, PlanMode::PruneThenMerge);
    }

    #[test]
    fn contextual_budget_checked() {
        let t = tokens(&[&[1.0], &[2.0]]);
        assert_eq!(
            dominant_contextual(&t, &scores(&[0.1, 0.2]), 2, 1).unwrap_err(),
            ReduceError::BudgetExceedsTokens { requested: 3, available: 2 }
        );
    }

    #[test]
    fn reattach_dropped() {
        let t = tokens(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let keep = ReductionPlan::prune(vec![0, 1]);
        assert_eq!(prune_then_merge(&t, &keep, false).unwrap(), keep);
        let plan = prune_then_merge(&t, &keep, true).unwrap();
        assert_eq!(plan.merges, vec![MergeGroup { target: 0, sources: vec![2] }]);
    }

    #[test]
    fn reattach_orthogonal_goes_to_lowest_kept() {
        let t = tokens(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let keep = ReductionPlan::prune(vec![1, 3]);
        let plan = prune_then_merge(&t, &keep, true).unwrap();
        assert_eq!(plan.merges, vec![MergeGroup { target: 1, sources: vec![0, 2] }]);
    }

    #[test]
    fn reattach_needs_prune_plan() {
        let t = tokens(&[&[1.0], &[2.0]]);
        let merge = ReductionPlan {
            kept: vec![1],
            merges: vec![MergeGroup { target: 1, sources: vec![0] }],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        assert_eq!(prune_then_merge(&t, &merge, true).unwrap_err(), ReduceError::NotPruneMode);
    }

    #[test]
    fn vispruner_hybrid() {
        let t = tokens(&[&[1.0, 0.0], &[1.0, 0.01], &[0.0, 1.0], &[0.7, 0.7], &[-1.0, 0.0]]);
        let s = scores(&[0.5, 0.2, 0.1, 0.1, 0.1]);
        let plan = vispruner_select(&t, &s, 1, Budget::Count(3)).unwrap();
        assert!(plan.kept.contains(&0));
        assert_eq!(plan.kept.len(), 3);
        // remainder {1,2,3,4}: most distant pair under cosine distance is (1,4)
        assert_eq!(plan.kept, vec![0, 1, 4]);
    }
}
