use serde::{Deserialize, Serialize};

use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm};
use crate::plan::{PlanMode, ReductionPlan};
use crate::tokens::TokenSet;

use super::segment::SegmentPartition;

/// What happens to the tokens selected inside each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalAction {
    /// Fold each selected token into the same-slot token of the segment's first frame.
    Merge,
    /// Discard the selected tokens.
    Prune,
}

/// A non-anchor token chosen for removal and the anchor it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalCandidate {
    pub position: usize,
    pub anchor: usize,
    pub similarity: f64,
}

/// Picks, per segment, `floor(merge_rate * segment tokens)` tokens from frames
/// after the segment's first frame, ranked by similarity to the first-frame
/// token at the same slot. The count is capped by the number of such tokens,
/// which is why one merge rate gives different retention for different
/// segment lengths.
pub fn temporal_candidates(
    video: &TokenSet,
    partition: &SegmentPartition,
    merge_rate: f64,
    counters: &mut OpCounters,
) -> Result<Vec<TemporalCandidate>, ReduceError> {
    if !(0.0..1.0).contains(&merge_rate) {
        return Err(ReduceError::InvalidMergeRate(merge_rate));
    }
    if partition.frames() != video.frames() {
        return Err(ReduceError::InvalidPartition(format!(
            "partition covers {} frames, video has {}",
            partition.frames(),
            video.frames()
        )));
    }
    let per_frame = video.tokens_per_frame();
    let norms: Vec<f64> = video.rows().map(norm).collect();
    let mut selected = Vec::new();
    for seg in partition.segments() {
        let lo = video.token_ids().partition_point(|&id| id < seg.start * per_frame);
        let hi = video.token_ids().partition_point(|&id| id < seg.end * per_frame);
        // tolerance keeps products like 0.29 * 100 from flooring one short
        let quota = (merge_rate * (hi - lo) as f64 + 1e-9).floor() as usize;
        if quota == 0 {
            continue;
        }
        let mut pool: Vec<TemporalCandidate> = (lo..hi)
            .filter_map(|pos| {
                let id = video.token_ids()[pos];
                if id / per_frame == seg.start {
                    return None;
                }
                let anchor = video.position_of(seg.start * per_frame + id % per_frame)?;
                Some(TemporalCandidate {
                    position: pos,
                    anchor,
                    similarity: cosine_with_norms(video.token(pos), video.token(anchor), norms[pos], norms[anchor]),
                })
            })
            .collect();
        counters.similarity_evals += pool.len() as u64;
        pool.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.position.cmp(&b.position)));
        pool.truncate(quota);
        selected.extend(pool);
    }
    selected.sort_by_key(|c| c.position);
    Ok(selected)
}

fn temporal_plan(
    video: &TokenSet,
    partition: &SegmentPartition,
    merge_rate: f64,
    action: TemporalAction,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let n = video.len();
    let mut into = vec![None; n];
    let mut dropped = vec![false; n];
    for c in temporal_candidates(video, partition, merge_rate, counters)? {
        match action {
            TemporalAction::Merge => into[c.position] = Some(c.anchor),
            TemporalAction::Prune => dropped[c.position] = true,
        }
    }
    let mode = match action {
        TemporalAction::Merge => PlanMode::Merge,
        TemporalAction::Prune => PlanMode::Prune,
    };
    Ok(ReductionPlan::from_assignment(n, &into, &dropped, mode))
}

pub fn temporal_merge(video: &TokenSet, partition: &SegmentPartition, merge_rate: f64) -> Result<ReductionPlan, ReduceError> {
    temporal_plan(video, partition, merge_rate, TemporalAction::Merge, &mut OpCounters::default())
}

pub fn temporal_prune(video: &TokenSet, partition: &SegmentPartition, merge_rate: f64) -> Result<ReductionPlan, ReduceError> {
    temporal_plan(video, partition, merge_rate, TemporalAction::Prune, &mut OpCounters::default())
}

pub fn temporal_reduce_counted(
    video: &TokenSet,
    partition: &SegmentPartition,
    merge_rate: f64,
    action: TemporalAction,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    temporal_plan(video, partition, merge_rate, action, counters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::apply_plan;
    use crate::temporal::segment::segment_fixed;

    fn video(frames: &[Vec<Vec<f32>>]) -> TokenSet {
        let per_frame = frames[0].len();
        let dim = frames[0][0].len();
        let data: Vec<f32> = frames.iter().flatten().flatten().copied().collect();
        TokenSet::from_grid(data, dim, frames.len(), 1, per_frame).unwrap()
    }

    fn basis(i: usize, dim: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn duplicate_frames_fully_merge() {
        let f: Vec<Vec<f32>> = (0..4).map(|i| basis(i, 4)).collect();
        let v = video(&[f.clone(), f]);
        let part = SegmentPartition::single(2);
        let merge = temporal_merge(&v, &part, 0.5).unwrap();
        assert_eq!(merge.kept, vec![0, 1, 2, 3]);
        assert_eq!(merge.merged_sources(), 4);
        for g in &merge.merges {
            assert_eq!(g.sources, vec![g.target + 4]);
        }
        let prune = temporal_prune(&v, &part, 0.5).unwrap();
        assert_eq!(prune.kept, merge.kept);
        assert!(prune.merges.is_empty());
        let out = apply_plan(&v, &merge).unwrap();
        assert_eq!(out.len() * 2, v.len());
    }

    #[test]
    fn zero_rate_is_identity() {
        let f: Vec<Vec<f32>> = (0..2).map(|i| basis(i, 2)).collect();
        let v = video(&[f.clone(), f.clone(), f]);
        let part = segment_fixed(3, 2).unwrap();
        assert!(temporal_merge(&v, &part, 0.0).unwrap().is_identity(6));
        assert!(temporal_prune(&v, &part, 0.0).unwrap().is_identity(6));
    }

    #[test]
    fn identical_slots_dominate_ranking() {
        // 4 slots; slots 0,1 repeat, slots 2,3 become orthogonal in frame 2
        let f1: Vec<Vec<f32>> = (0..4).map(|i| basis(i, 8)).collect();
        let mut f2 = f1.clone();
        f2[2] = basis(6, 8);
        f2[3] = basis(7, 8);
        let v = video(&[f1, f2]);
        let plan = temporal_merge(&v, &SegmentPartition::single(2), 0.25).unwrap();
        let sources: Vec<usize> = plan.merges.iter().flat_map(|g| g.sources.clone()).collect();
        assert_eq!(sources, vec![4, 5]);
    }

    #[test]
    fn singleton_segments_cannot_merge() {
        let f: Vec<Vec<f32>> = (0..2).map(|i| basis(i, 2)).collect();
        let v = video(&[f.clone(), f]);
        let part = segment_fixed(2, 1).unwrap();
        assert!(temporal_merge(&v, &part, 0.9).unwrap().is_identity(4));
    }

    #[test]
    fn rejects_bad_inputs() {
        let f: Vec<Vec<f32>> = (0..2).map(|i| basis(i, 2)).collect();
        let v = video(&[f.clone(), f]);
        assert_eq!(
            temporal_merge(&v, &SegmentPartition::single(2), 1.0).unwrap_err(),
            ReduceError::InvalidMergeRate(1.0)
        );
        assert!(temporal_merge(&v, &SegmentPartition::single(3), 0.5).is_err());
    }
}
