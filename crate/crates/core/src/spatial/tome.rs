//! Progressive bipartite soft matching.
//!
//! Each step splits the current tokens into alternating sets A (even
//! positions) and B (odd positions), links every A token to its most similar B
//! token and merges the `r` strongest links. Merged values feed the next step,
//! and all steps fold into one plan over the input positions.

use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm};
use crate::plan::{apply_plan, compose, PlanMode, ReductionPlan};
use crate::tokens::TokenSet;

use super::argmax;

pub fn tome_merge(tokens: &TokenSet, r_per_step: usize, steps: usize) -> Result<ReductionPlan, ReduceError> {
    tome_merge_schedule(tokens, &vec![r_per_step; steps], &mut OpCounters::default())
}

pub fn tome_merge_counted(
    tokens: &TokenSet,
    r_per_step: usize,
    steps: usize,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    tome_merge_schedule(tokens, &vec![r_per_step; steps], counters)
}

/// Spreads the merges needed to go from `n` to `k` tokens evenly over `steps`,
/// front-loading the remainder. Fails when some step would have to merge more
/// than half of its tokens.
pub fn tome_schedule(n: usize, k: usize, steps: usize) -> Result<Vec<usize>, ReduceError> {
    if k == 0 || k > n {
        return Err(ReduceError::BudgetExceedsTokens { requested: k, available: n });
    }
    if steps == 0 {
        return if k == n {
            Ok(Vec::new())
        } else {
            Err(ReduceError::InvalidBudget("zero merge steps cannot reduce tokens".into()))
        };
    }
    let total = n - k;
    let (base, extra) = (total / steps, total % steps);
    let schedule: Vec<usize> = (0..steps).map(|s| base + usize::from(s < extra)).collect();
    let mut current = n;
    for &r in &schedule {
        if r > current / 2 {
            return Err(ReduceError::RTooLarge { r, n: current });
        }
        current -= r;
    }
    Ok(schedule)
}

pub fn tome_merge_schedule(
    tokens: &TokenSet,
    schedule: &[usize],
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let n = tokens.len();
    let mut plan = ReductionPlan::identity(n);
    plan.mode = PlanMode::Merge;
    let mut current = tokens.clone();
    for &r in schedule {
        if r == 0 {
            continue;
        }
        let step = bipartite_step(&current, r, counters)?;
        current = apply_plan(&current, &step)?;
        plan = compose(n, &plan, &step)?;
    }
    plan.mode = PlanMode::Merge;
    Ok(plan)
}

fn bipartite_step(tokens: &TokenSet, r: usize, counters: &mut OpCounters) -> Result<ReductionPlan, ReduceError> {
    let n = tokens.len();
    if r > n / 2 {
        return Err(ReduceError::RTooLarge { r, n });
    }
    let norms: Vec<f64> = tokens.rows().map(norm).collect();
    let side_b: Vec<usize> = (1..n).step_by(2).collect();
    let mut links: Vec<(usize, usize, f64)> = (0..n)
        .step_by(2)
        .map(|a| {
            let sims: Vec<f64> = side_b
                .iter()
                .map(|&b| cosine_with_norms(tokens.token(a), tokens.token(b), norms[a], norms[b]))
                .collect();
            let best = argmax(sims.iter().copied()).unwrap();
            (a, side_b[best], sims[best])
        })
        .collect();
    counters.similarity_evals += (n.div_ceil(2) * side_b.len()) as u64;

    links.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)));
    let mut into = vec![None; n];
    for &(a, b, _) in links.iter().take(r) {
        into[a] = Some(b);
    }
    Ok(ReductionPlan::from_assignment(n, &into, &vec![false; n], PlanMode::Merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::MergeGroup;

    fn tokens(vs: &[&[f32]]) -> TokenSet {
        TokenSet::from_vectors(&vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn duplicate_pair_merges_first() {
        let t = tokens(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let plan = tome_merge(&t, 1, 1).unwrap();
        assert_eq!(plan.kept, vec![1, 2, 3]);
        assert_eq!(plan.merges, vec![MergeGroup { target: 1, sources: vec![0] }]);
        assert_eq!(plan.mode, PlanMode::Merge);
    }

    #[test]
    fn zero_r_is_identity() {
        let t = tokens(&[&[1.0], &[2.0], &[3.0]]);
        assert!(tome_merge(&t, 0, 3).unwrap().is_identity(3));
    }

    #[test]
    fn two_identical_tokens_collapse() {
        let t = tokens(&[&[0.3, -0.2], &[0.3, -0.2]]);
        let plan = tome_merge(&t, 1, 1).unwrap();
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.token(0), t.token(0));
        assert_eq!(out.weights(), &[2]);
    }

    #[test]
    fn r_bounded_by_half() {
        let t = tokens(&[&[1.0], &[2.0], &[3.0]]);
        assert_eq!(tome_merge(&t, 2, 1).unwrap_err(), ReduceError::RTooLarge { r: 2, n: 3 });
        // second step sees 4 tokens
        let t = tokens(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0], &[6.0]]);
        assert_eq!(tome_merge(&t, 3, 2).unwrap_err(), ReduceError::RTooLarge { r: 3, n: 3 });
    }

    #[test]
    fn progressive_steps_compose() {
        let t = tokens(&[
            &[1.0, 0.0],
            &[0.9, 0.1],
            &[0.0, 1.0],
            &[0.1, 0.9],
            &[-1.0, 0.0],
            &[-0.9, -0.1],
            &[0.0, -1.0],
            &[0.1, -0.9],
        ]);
        let plan = tome_merge(&t, 2, 3).unwrap();
        assert_eq!(plan.kept.len(), 2);
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.total_weight(), 8);
    }

    #[test]
    fn schedule_spreads_merges() {
        assert_eq!(tome_schedule(576, 192, 2).unwrap(), vec![192, 192]);
        assert_eq!(tome_schedule(10, 3, 3).unwrap(), vec![3, 2, 2]);
        // one layer can merge at most half
        assert!(matches!(tome_schedule(576, 192, 1), Err(ReduceError::RTooLarge { .. })));
        assert_eq!(tome_schedule(5, 5, 0).unwrap(), Vec::<usize>::new());
    }
}
