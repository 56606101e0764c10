//! Declarative reduction plans and the single place they are applied.
//!
//! Every operator emits a [`ReductionPlan`] whose indices are positions in the
//! token set it was computed on. [`apply_plan`] is the only code that moves
//! embedding data.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::tokens::TokenSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanMode {
    Prune,
    Merge,
    PruneThenMerge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub target: usize,
    pub sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub kept: Vec<usize>,
    pub merges: Vec<MergeGroup>,
    pub mode: PlanMode,
    /// Set when the requested budget was larger than the token count and got clamped.
    #[serde(default)]
    pub budget_clamped: bool,
}

impl ReductionPlan {
    pub fn identity(n: usize) -> Self {
        Self {
            kept: (0..n).collect(),
            merges: Vec::new(),
            mode: PlanMode::Prune,
            budget_clamped: false,
        }
    }

    /// Prune plan from an arbitrary collection of kept positions.
    pub fn prune(mut kept: Vec<usize>) -> Self {
        kept.sort_unstable();
        kept.dedup();
        Self {
            kept,
            merges: Vec::new(),
            mode: PlanMode::Prune,
            budget_clamped: false,
        }
    }

    /// Builds a plan from a per-position merge map: `into[i] == Some(t)` means
    /// position `i` is absorbed by `t`; every other non-dropped position is kept.
    pub(crate) fn from_assignment(
        n: usize,
        into: &[Option<usize>],
        dropped: &[bool],
        mode: PlanMode,
    ) -> Self {
        let kept: Vec<usize> = (0..n).filter(|&i| into[i].is_none() && !dropped[i]).collect();
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, t) in into.iter().enumerate() {
            if let Some(t) = t {
                groups.entry(*t).or_default().push(i);
            }
        }
        Self {
            kept,
            merges: groups
                .into_iter()
                .map(|(target, sources)| MergeGroup { target, sources })
                .collect(),
            mode,
            budget_clamped: false,
        }
    }

    pub fn retained(&self) -> usize {
        self.kept.len()
    }

    pub fn is_identity(&self, n: usize) -> bool {
        self.merges.is_empty() && self.kept.len() == n && self.kept.iter().enumerate().all(|(i, &k)| i == k)
    }

    /// Positions that neither survive nor get merged.
    pub fn dropped(&self, n: usize) -> Vec<usize> {
        let mut used = vec![false; n];
        for &k in &self.kept {
            used[k] = true;
        }
        for g in &self.merges {
            for &s in &g.sources {
                used[s] = true;
            }
        }
        (0..n).filter(|&i| !used[i]).collect()
    }

    pub fn merged_sources(&self) -> usize {
        self.merges.iter().map(|g| g.sources.len()).sum()
    }

    /// Structural check against a set of `n` tokens.
    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        if self.kept.is_empty() {
            return Err(ModelError::EmptyResult);
        }
        let mut role = vec![0u8; n];
        let mut prev: Option<usize> = None;
        for &k in &self.kept {
            if k >= n {
                return Err(ModelError::IndexOutOfRange { index: k, len: n });
            }
            if prev.is_some_and(|p| p >= k) {
                return Err(ModelError::UnsortedKept);
            }
            prev = Some(k);
            role[k] = 1;
        }
        let mut seen_target = vec![false; n];
        for g in &self.merges {
            if g.target >= n {
                return Err(ModelError::IndexOutOfRange { index: g.target, len: n });
            }
            if role[g.target] != 1 {
                return Err(ModelError::TargetNotKept { index: g.target });
            }
            if std::mem::replace(&mut seen_target[g.target], true) {
                return Err(ModelError::OverlappingGroups { index: g.target });
            }
            for &s in &g.sources {
                if s >= n {
                    return Err(ModelError::IndexOutOfRange { index: s, len: n });
                }
                if role[s] != 0 {
                    return Err(ModelError::OverlappingGroups { index: s });
                }
                role[s] = 2;
            }
        }
        Ok(())
    }
}

/// Applies `plan` to `tokens`.
///
/// Survivors come out in ascending position order. A merge target becomes the
/// weight-weighted mean of itself and its sources and accumulates their weights.
pub fn apply_plan(tokens: &TokenSet, plan: &ReductionPlan) -> Result<TokenSet, ModelError> {
    let n = tokens.len();
    plan.validate(n)?;
    let dim = tokens.dim();

    let mut group_of: Vec<Option<usize>> = vec![None; n];
    for (g_idx, g) in plan.merges.iter().enumerate() {
        group_of[g.target] = Some(g_idx);
    }

    let mut data = Vec::with_capacity(plan.kept.len() * dim);
    let mut ids = Vec::with_capacity(plan.kept.len());
    let mut weights = Vec::with_capacity(plan.kept.len());
    let mut acc = vec![0f64; dim];
    for &k in &plan.kept {
        ids.push(tokens.token_ids()[k]);
        match group_of[k] {
            None => {
                data.extend_from_slice(tokens.token(k));
                weights.push(tokens.weights()[k]);
            }
            Some(g_idx) => {
                acc.iter_mut().for_each(|a| *a = 0.0);
                let mut mass = 0u64;
                for &p in std::iter::once(&k).chain(plan.merges[g_idx].sources.iter()) {
                    let w = tokens.weights()[p];
                    mass += w;
                    for (a, &x) in acc.iter_mut().zip(tokens.token(p)) {
                        *a += w as f64 * x as f64;
                    }
                }
                data.extend(acc.iter().map(|a| (a / mass as f64) as f32));
                weights.push(mass);
            }
        }
    }
    Ok(TokenSet::from_parts(tokens, data, ids, weights))
}

/// Composes `first` (over `n` tokens) with `second` (over the survivors of `first`)
/// into one plan over the original `n` positions.
///
/// Sources absorbed by a token that `second` later drops are dropped too.
pub fn compose(
    n: usize,
    first: &ReductionPlan,
    second: &ReductionPlan,
) -> Result<ReductionPlan, ModelError> {
    first.validate(n)?;
    second.validate(first.kept.len())?;

    let mut absorbed: Vec<Vec<usize>> = vec![Vec::new(); n];
    for g in &first.merges {
        absorbed[g.target] = g.sources.clone();
    }

    let mut into: Vec<Option<usize>> = vec![None; n];
    let mut dropped = vec![true; n];
    for &k2 in &second.kept {
        let orig = first.kept[k2];
        dropped[orig] = false;
        for &s in &absorbed[orig] {
            into[s] = Some(orig);
            dropped[s] = false;
        }
    }
    for g in &second.merges {
        let target = first.kept[g.target];
        for &s2 in &g.sources {
            let s = first.kept[s2];
            into[s] = Some(target);
            dropped[s] = false;
            for &ss in &absorbed[s] {
                into[ss] = Some(target);
                dropped[ss] = false;
            }
        }
    }
    let has_drop = dropped.iter().zip(&into).any(|(&d, t)| d && t.is_none());
    let has_merge = into.iter().any(Option::is_some);
    let mode = match (has_drop, has_merge) {
        (_, false) => PlanMode::Prune,
        (false, true) => PlanMode::Merge,
        (true, true) => PlanMode::PruneThenMerge,
    };
    let mut plan = ReductionPlan::from_assignment(n, &into, &dropped, mode);
    plan.budget_clamped = first.budget_clamped || second.budget_clamped;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: &[&[f32]]) -> TokenSet {
        TokenSet::from_vectors(&vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_plan_is_noop() {
        let t = set(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0]]);
        let out = apply_plan(&t, &ReductionPlan::identity(4)).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn merging_equal_vectors_is_fixed_point() {
        let t = set(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]]);
        let plan = ReductionPlan {
            kept: vec![1, 2, 3],
            merges: vec![MergeGroup { target: 1, sources: vec![0] }],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.token(0), &[1.0, 0.0]);
        assert_eq!(out.weights(), &[2, 1, 1]);
        assert_eq!(out.token_ids(), &[1, 2, 3]);
    }

    #[test]
    fn merge_uses_weighted_mean() {
        // (2*3 + 1*0) / 3 = 2
        let t = set(&[&[3.0, 0.0], &[0.0, 0.0]]).with_weights(vec![2, 1]).unwrap();
        let plan = ReductionPlan {
            kept: vec![1],
            merges: vec![MergeGroup { target: 1, sources: vec![0] }],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.token(0), &[2.0, 0.0]);
        assert_eq!(out.weights(), &[3]);
        assert_eq!(out.total_weight(), t.total_weight());
    }

    #[test]
    fn prune_keeps_vectors_bit_exact() {
        let t = set(&[&[0.1, 0.2], &[0.3, 0.4], &[0.7, 0.9]]);
        let out = apply_plan(&t, &ReductionPlan::prune(vec![2, 0])).unwrap();
        assert_eq!(out.token(0), t.token(0));
        assert_eq!(out.token(1), t.token(2));
        assert_eq!(out.token_ids(), &[0, 2]);
    }

    #[test]
    fn invalid_plans_rejected() {
        let t = set(&[&[0.0], &[1.0], &[2.0]]);
        let oob = ReductionPlan::prune(vec![0, 3]);
        assert_eq!(
            apply_plan(&t, &oob).unwrap_err(),
            ModelError::IndexOutOfRange { index: 3, len: 3 }
        );
        let empty = ReductionPlan::prune(vec![]);
        assert_eq!(apply_plan(&t, &empty).unwrap_err(), ModelError::EmptyResult);
        let overlap = ReductionPlan {
            kept: vec![0, 1],
            merges: vec![MergeGroup { target: 0, sources: vec![1] }],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        assert_eq!(
            apply_plan(&t, &overlap).unwrap_err(),
            ModelError::OverlappingGroups { index: 1 }
        );
        let twice = ReductionPlan {
            kept: vec![0, 1],
            merges: vec![
                MergeGroup { target: 0, sources: vec![2] },
                MergeGroup { target: 1, sources: vec![2] },
            ],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        assert_eq!(
            apply_plan(&t, &twice).unwrap_err(),
            ModelError::OverlappingGroups { index: 2 }
        );
        let orphan = ReductionPlan {
            kept: vec![0],
            merges: vec![MergeGroup { target: 1, sources: vec![2] }],
            mode: PlanMode::Merge,
            budget_clamped: false,
        };
        assert_eq!(
            apply_plan(&t, &orphan).unwrap_err(),
            ModelError::TargetNotKept { index: 1 }
        );
    }

    #[test]
    fn dropped_positions() {
        let plan = ReductionPlan {
            kept: vec![1, 3],
            merges: vec![MergeGroup { target: 3, sources: vec![4] }],
            mode: PlanMode::PruneThenMerge,
            budget_clamped: false,
        };
        assert_eq!(plan.dropped(5), vec![0, 2]);
    }
}
