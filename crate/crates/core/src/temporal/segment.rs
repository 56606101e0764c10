use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm};
use crate::tokens::TokenSet;

/// Similarity between consecutive frames: entry `i` is the mean cosine between
/// same-slot tokens of frames `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSimSeries {
    pub values: Vec<f64>,
}

impl FrameSimSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn frames(&self) -> usize {
        self.values.len() + 1
    }
}

pub fn frame_similarity(video: &TokenSet) -> Result<FrameSimSeries, ReduceError> {
    frame_similarity_counted(video, &mut OpCounters::default())
}

/// Slots missing from either frame (after an earlier reduction) are skipped; a
/// frame pair with no shared slot scores 0.
pub fn frame_similarity_counted(video: &TokenSet, counters: &mut OpCounters) -> Result<FrameSimSeries, ReduceError> {
    let frames = video.frames();
    if frames < 2 {
        return Err(ReduceError::SingleFrame);
    }
    let per_frame = video.tokens_per_frame();
    let mut sums = vec![0f64; frames - 1];
    let mut counts = vec![0usize; frames - 1];
    for (pos, &id) in video.token_ids().iter().enumerate() {
        let f = id / per_frame;
        if f + 1 >= frames {
            break;
        }
        if let Some(next) = video.position_of(id + per_frame) {
            let (a, b) = (video.token(pos), video.token(next));
            sums[f] += cosine_with_norms(a, b, norm(a), norm(b));
            counts[f] += 1;
        }
    }
    counters.similarity_evals += counts.iter().sum::<usize>() as u64;
    Ok(FrameSimSeries::new(
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect(),
    ))
}

/// Ordered, disjoint, non-empty frame ranges covering `0..frames`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPartition {
    segments: Vec<Range<usize>>,
}

impl SegmentPartition {
    pub fn new(segments: Vec<Range<usize>>) -> Result<Self, ReduceError> {
        if segments.is_empty() || segments[0].start != 0 {
            return Err(ReduceError::InvalidPartition("must start at frame 0".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if s.is_empty() {
                return Err(ReduceError::InvalidPartition(format!("segment {i} is empty")));
            }
            if i > 0 && segments[i - 1].end != s.start {
                return Err(ReduceError::InvalidPartition(format!("gap or overlap before segment {i}")));
            }
        }
        Ok(Self { segments })
    }

    /// Builds a partition of `frames` frames from sorted interior boundaries.
    pub fn from_boundaries(frames: usize, boundaries: &[usize]) -> Result<Self, ReduceError> {
        let mut segments = Vec::with_capacity(boundaries.len() + 1);
        let mut start = 0;
        for &b in boundaries.iter().chain(std::iter::once(&frames)) {
            segments.push(start..b);
            start = b;
        }
        Self::new(segments)
    }

    pub fn single(frames: usize) -> Self {
        Self {
            segments: std::iter::once(0..frames).collect(),
        }
    }

    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    pub fn frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    /// Interior boundaries (segment starts other than 0).
    pub fn boundaries(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Equal-length segments of `length` frames; the last may be shorter.
pub fn segment_fixed(frames: usize, length: usize) -> Result<SegmentPartition, ReduceError> {
    if frames == 0 || length == 0 {
        return Err(ReduceError::InvalidPartition("frames and segment length must be positive".into()));
    }
    let boundaries: Vec<usize> = (length..frames).step_by(length).collect();
    SegmentPartition::from_boundaries(frames, &boundaries)
}

/// Cuts after frame `i` whenever the similarity to frame `i + 1` drops below `tau`.
pub fn segment_threshold(series: &FrameSimSeries, tau: f64) -> SegmentPartition {
    let boundaries: Vec<usize> = series
        .values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s < tau)
        .map(|(i, _)| i + 1)
        .collect();
    SegmentPartition::from_boundaries(series.frames(), &boundaries).expect("threshold boundaries are sorted and interior")
}

/// Score of the segment `start..end`: the mean similarity of its consecutive
/// frame pairs, or 1 for a single frame.
pub fn segment_score(series: &FrameSimSeries, start: usize, end: usize) -> f64 {
    if end - start <= 1 {
        return 1.0;
    }
    let mut sum = 0.0;
    for &v in &series.values[start..end - 1] {
        sum += v;
    }
    sum / (end - start - 1) as f64
}

/// Sum of [`segment_score`] over the segments of `partition`, accumulated left to right.
pub fn partition_objective(series: &FrameSimSeries, partition: &SegmentPartition) -> f64 {
    let mut total = 0.0;
    for s in partition.segments() {
        total += segment_score(series, s.start, s.end);
    }
    total
}

/// Best value of a DP cell and the boundary list attaining it.
type DpCell = (f64, Vec<usize>);

pub fn segment_dp(series: &FrameSimSeries, max_segments: usize) -> Result<SegmentPartition, ReduceError> {
    segment_dp_counted(series, max_segments, &mut OpCounters::default())
}

/// Exact maximiser of [`partition_objective`] over partitions into at most
/// `max_segments` contiguous segments. Among optimal partitions the one with
/// the lexicographically smallest boundary list wins.
///
/// Each transition `(segments j, end e, start s)` evaluated counts as one DP cell.
pub fn segment_dp_counted(
    series: &FrameSimSeries,
    max_segments: usize,
    counters: &mut OpCounters,
) -> Result<SegmentPartition, ReduceError> {
    let frames = series.frames();
    if max_segments == 0 || max_segments > frames {
        return Err(ReduceError::InvalidPartition(format!(
            "max_segments {max_segments} outside 1..={frames}"
        )));
    }
    let mut score = vec![0f64; (frames + 1) * (frames + 1)];
    for s in 0..frames {
        for e in s + 1..=frames {
            score[s * (frames + 1) + e] = segment_score(series, s, e);
        }
    }

    // best[j][e]: optimum for frames 0..e split into exactly j segments,
    // with its boundary list.
    let mut best: Vec<Vec<Option<DpCell>>> = vec![vec![None; frames + 1]; max_segments + 1];
    best[0][0] = Some((0.0, Vec::new()));
    for j in 1..=max_segments {
        for e in j..=frames {
            let starts = if j == 1 { 0..1 } else { j - 1..e };
            let mut cell: Option<DpCell> = None;
            for s in starts {
                let Some((prev, prev_bounds)) = &best[j - 1][s] else {
                    continue;
                };
                counters.dp_cells += 1;
                let value = prev + score[s * (frames + 1) + e];
                let better = match &cell {
                    None => true,
                    Some((v, b)) => {
                        value > *v || (value == *v && lex_less_with(prev_bounds, s, b))
                    }
                };
                if better {
                    let mut bounds = prev_bounds.clone();
                    if s > 0 {
                        bounds.push(s);
                    }
                    cell = Some((value, bounds));
                }
            }
            best[j][e] = cell;
        }
    }

    let mut answer: Option<&DpCell> = None;
    for row in best.iter().skip(1) {
        if let Some(c) = &row[frames] {
            if answer.is_none_or(|(v, b)| c.0 > *v || (c.0 == *v && c.1 < *b)) {
                answer = Some(c);
            }
        }
    }
    let (_, bounds) = answer.expect("one segment is always feasible");
    SegmentPartition::from_boundaries(frames, bounds)
}

/// Whether `prefix ++ [s]` (omitting `s` when it is 0) sorts before `other`.
fn lex_less_with(prefix: &[usize], s: usize, other: &[usize]) -> bool {
    let mut candidate = prefix.to_vec();
    if s > 0 {
        candidate.push(s);
    }
    candidate.as_slice() < other
}

/// Closed-form number of DP cells visited by [`segment_dp_counted`].
pub fn dp_cell_count(frames: usize, max_segments: usize) -> u64 {
    let mut cells = frames as u64;
    for j in 2..=max_segments.min(frames) {
        let span = (frames - j + 1) as u64;
        cells += span * (span + 1) / 2;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(frames: &[&[&[f32]]]) -> TokenSet {
        let per_frame = frames[0].len();
        let dim = frames[0][0].len();
        let data: Vec<f32> = frames.iter().flat_map(|f| f.iter().flat_map(|t| t.iter().copied())).collect();
        TokenSet::from_grid(data, dim, frames.len(), 1, per_frame).unwrap()
    }

    #[test]
    fn frame_similarity_cases() {
        let a: &[&[f32]] = &[&[1.0, 0.0], &[0.0, 1.0]];
        let neg_a: &[&[f32]] = &[&[-1.0, 0.0], &[0.0, -1.0]];
        let b: &[&[f32]] = &[&[0.0, 1.0], &[1.0, 0.0]];
        assert_eq!(frame_similarity(&video(&[a, a])).unwrap().values, vec![1.0]);
        assert_eq!(frame_similarity(&video(&[a, neg_a])).unwrap().values, vec![-1.0]);
        assert_eq!(frame_similarity(&video(&[a, a, b])).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(frame_similarity(&video(&[a])).unwrap_err(), ReduceError::SingleFrame);
    }

    #[test]
    fn fixed_segments() {
        let p = segment_fixed(8, 4).unwrap();
        assert_eq!(p.segments(), &[0..4, 4..8]);
        assert_eq!(segment_fixed(7, 4).unwrap().segments(), &[0..4, 4..7]);
        assert_eq!(segment_fixed(3, 5).unwrap().boundaries(), Vec::<usize>::new());
        assert!(segment_fixed(3, 0).is_err());
    }

    #[test]
    fn threshold_segments() {
        let s = FrameSimSeries::new(vec![0.9, 0.2, 0.95]);
        assert_eq!(segment_threshold(&s, 0.5).segments(), &[0..2, 2..4]);
        assert_eq!(segment_threshold(&s, -1.0).boundaries(), Vec::<usize>::new());
        assert_eq!(segment_threshold(&s, 0.99).len(), 4);
    }

    #[test]
    fn dp_splits_at_scene_change() {
        // frames A,A,B,B with A orthogonal to B
        let s = FrameSimSeries::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(segment_dp(&s, 2).unwrap().segments(), &[0..2, 2..4]);
        assert_eq!(segment_dp(&s, 1).unwrap().boundaries(), Vec::<usize>::new());
    }

    #[test]
    fn dp_all_singletons_at_full_budget() {
        let s = FrameSimSeries::new(vec![0.3, 0.9, -0.2, 0.5]);
        assert_eq!(segment_dp(&s, 5).unwrap().boundaries(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn dp_ties_prefer_early_boundaries() {
        // every 2-split of identical frames scores 2
        let s = FrameSimSeries::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(segment_dp(&s, 2).unwrap().boundaries(), vec![1]);
    }

    #[test]
    fn dp_counts_cells() {
        let s = FrameSimSeries::new(vec![0.5; 7]);
        for m in 1..=8 {
            let mut c = OpCounters::default();
            segment_dp_counted(&s, m, &mut c).unwrap();
            assert_eq!(c.dp_cells, dp_cell_count(8, m), "m = {m}");
        }
    }

    #[test]
    fn dp_rejects_bad_budget() {
        let s = FrameSimSeries::new(vec![0.5; 3]);
        assert!(segment_dp(&s, 0).is_err());
        assert!(segment_dp(&s, 5).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(SegmentPartition::new(vec![0..2, 3..4]).is_err());
        assert!(SegmentPartition::new(std::iter::once(1..2).collect()).is_err());
        assert!(SegmentPartition::new(vec![0..2, 2..2]).is_err());
        assert!(SegmentPartition::new(vec![0..2, 2..5]).is_ok());
    }
}
