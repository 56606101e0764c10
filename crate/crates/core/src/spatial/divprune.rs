use serde::{Deserialize, Serialize};

use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm};
use crate::plan::ReductionPlan;
use crate::tokens::TokenSet;

use super::{argmax, Budget};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivDistance {
    /// `1 - cosine similarity`
    #[default]
    Cosine,
    Euclidean,
}

impl DivDistance {
    pub(crate) fn between(self, a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
        match self {
            DivDistance::Cosine => 1.0 - cosine_with_norms(a, b, na, nb),
            DivDistance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Max-min diverse subset of `tokens` (farthest-point selection).
pub fn divprune_select(
    tokens: &TokenSet,
    budget: Budget,
    distance: DivDistance,
) -> Result<ReductionPlan, ReduceError> {
    divprune_select_counted(tokens, budget, distance, &mut OpCounters::default())
}

pub fn divprune_select_counted(
    tokens: &TokenSet,
    budget: Budget,
    distance: DivDistance,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let n = tokens.len();
    let budget = budget.resolve(n)?;
    let candidates: Vec<usize> = (0..n).collect();
    let kept = greedy_maxmin(tokens, &candidates, budget.k, distance, counters);
    let mut plan = ReductionPlan::prune(kept);
    plan.budget_clamped = budget.clamped;
    Ok(plan)
}

/// Greedy max-min selection of `k` positions among `candidates` (ascending).
///
/// Seeds with the most distant pair, then repeatedly adds the candidate whose
/// distance to its nearest selected token is largest. For `k == 1` the
/// highest-norm candidate is returned.
pub(crate) fn greedy_maxmin(
    tokens: &TokenSet,
    candidates: &[usize],
    k: usize,
    distance: DivDistance,
    counters: &mut OpCounters,
) -> Vec<usize> {
    let m = candidates.len();
    if k == 0 || m == 0 {
        return Vec::new();
    }
    if k >= m {
        return candidates.to_vec();
    }
    let norms: Vec<f64> = candidates.iter().map(|&p| norm(tokens.token(p))).collect();
    if k == 1 {
        return vec![candidates[argmax(norms.iter().copied()).unwrap()]];
    }

    let mut dist = vec![0f64; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = distance.between(
                tokens.token(candidates[i]),
                tokens.token(candidates[j]),
                norms[i],
                norms[j],
            );
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    counters.similarity_evals += (m * (m - 1) / 2) as u64;

    let mut seed = (0, 1);
    for i in 0..m {
        for j in i + 1..m {
            if dist[i * m + j] > dist[seed.0 * m + seed.1] {
                seed = (i, j);
            }
        }
    }

    let mut selected = vec![false; m];
    selected[seed.0] = true;
    selected[seed.1] = true;
    let mut nearest: Vec<f64> = (0..m)
        .map(|t| dist[t * m + seed.0].min(dist[t * m + seed.1]))
        .collect();
    let mut picked = vec![seed.0, seed.1];
    while picked.len() < k {
        let next = argmax((0..m).map(|t| if selected[t] { f64::NEG_INFINITY } else { nearest[t] })).unwrap();
        selected[next] = true;
        picked.push(next);
        for t in 0..m {
            nearest[t] = nearest[t].min(dist[t * m + next]);
        }
    }
    let mut out: Vec<usize> = picked.into_iter().map(|i| candidates[i]).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(vs: &[&[f32]]) -> TokenSet {
        TokenSet::from_vectors(&vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn euclidean_line() {
        let t = tokens(&[&[0.0], &[1.0], &[10.0]]);
        let plan = divprune_select(&t, Budget::Count(2), DivDistance::Euclidean).unwrap();
        assert_eq!(plan.kept, vec![0, 2]);
    }

    #[test]
    fn full_budget_is_identity() {
        let t = tokens(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        assert!(divprune_select(&t, Budget::Count(3), DivDistance::Cosine)
            .unwrap()
            .is_identity(3));
    }

    #[test]
    fn orthogonal_ties_pick_lowest_pair() {
        let t = tokens(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let plan = divprune_select(&t, Budget::Count(2), DivDistance::Cosine).unwrap();
        assert_eq!(plan.kept, vec![0, 1]);
    }

    #[test]
    fn single_token_falls_back_to_norm() {
        let t = tokens(&[&[1.0, 0.0], &[0.0, 3.0], &[2.0, 0.0]]);
        let plan = divprune_select(&t, Budget::Count(1), DivDistance::Cosine).unwrap();
        assert_eq!(plan.kept, vec![1]);
    }

    #[test]
    fn counts_pairwise_distances() {
        let t = tokens(&[&[0.0], &[1.0], &[2.0], &[5.0]]);
        let mut c = OpCounters::default();
        divprune_select_counted(&t, Budget::Count(2), DivDistance::Euclidean, &mut c).unwrap();
        assert_eq!(c.similarity_evals, 6);
    }
}
