//! Exhaustive reference solvers for small instances.

use crate::spatial::DivDistance;
use crate::temporal::{FrameSimSeries, SegmentPartition};
use crate::tokens::TokenSet;

/// Objective values closer than this count as the same optimum.
pub const OBJECTIVE_TIE: f64 = 1e-12;

/// Distance between two tokens, computed directly from their coordinates.
pub fn reference_distance(a: &[f32], b: &[f32], distance: DivDistance) -> f64 {
    match distance {
        DivDistance::Euclidean => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        DivDistance::Cosine => {
            let (mut dot, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for (&x, &y) in a.iter().zip(b) {
                dot += x as f64 * y as f64;
                aa += x as f64 * x as f64;
                bb += y as f64 * y as f64;
            }
            let denom = aa.sqrt() * bb.sqrt();
            if denom < 1e-12 {
                1.0
            } else {
                1.0 - (dot / denom).clamp(-1.0, 1.0)
            }
        }
    }
}

/// Smallest pairwise distance among the positions in `set`.
pub fn min_pairwise_distance(tokens: &TokenSet, set: &[usize], distance: DivDistance) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            best = best.min(reference_distance(tokens.token(a), tokens.token(b), distance));
        }
    }
    best
}

/// The most distant pair, first in row-major order on ties.
pub fn farthest_pair(tokens: &TokenSet, distance: DivDistance) -> Option<(usize, usize)> {
    let n = tokens.len();
    let mut best: Option<((usize, usize), f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d = reference_distance(tokens.token(i), tokens.token(j), distance);
            if best.is_none_or(|(_, b)| d > b + OBJECTIVE_TIE) {
                best = Some(((i, j), d));
            }
        }
    }
    best.map(|(p, _)| p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityOptimum {
    pub objective: f64,
    /// Every `k`-subset (ascending) within [`OBJECTIVE_TIE`] of the optimum.
    pub optima: Vec<Vec<usize>>,
}

impl DiversityOptimum {
    pub fn contains_pair(&self, a: usize, b: usize) -> bool {
        self.optima.iter().any(|s| s.contains(&a) && s.contains(&b))
    }

    pub fn contains_set(&self, set: &[usize]) -> bool {
        self.optima.iter().any(|s| s == set)
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Maximises the minimum pairwise distance over every `k`-subset, `2 <= k <= n`.
pub fn divprune_exhaustive(tokens: &TokenSet, k: usize, distance: DivDistance) -> Option<DiversityOptimum> {
    let n = tokens.len();
    if k < 2 || k > n {
        return None;
    }
    let mut scored = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        scored.push((min_pairwise_distance(tokens, &c, distance), c.clone()));
        if !next_combination(&mut c, n) {
            break;
        }
    }
    let objective = scored.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    let optima = scored
        .into_iter()
        .filter(|(v, _)| *v >= objective - OBJECTIVE_TIE)
        .map(|(_, s)| s)
        .collect();
    Some(DiversityOptimum { objective, optima })
}

/// Mean of the adjacent-pair values inside `start..end`; a lone frame scores 1.
pub fn reference_segment_score(values: &[f64], start: usize, end: usize) -> f64 {
    if end - start == 1 {
        return 1.0;
    }
    let pairs = &values[start..end - 1];
    pairs.iter().fold(0.0, |acc, v| acc + v) / pairs.len() as f64
}

pub fn reference_objective(values: &[f64], frames: usize, boundaries: &[usize]) -> f64 {
    let mut cuts = vec![0];
    cuts.extend_from_slice(boundaries);
    cuts.push(frames);
    cuts.windows(2)
        .fold(0.0, |acc, w| acc + reference_segment_score(values, w[0], w[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationOptimum {
    pub objective: f64,
    pub partition: SegmentPartition,
}

/// Enumerates every boundary subset with at most `max_segments` segments and
/// keeps the best, lexicographically smallest boundary list on ties.
pub fn segmentation_exhaustive(series: &FrameSimSeries, max_segments: usize) -> Option<SegmentationOptimum> {
    let frames = series.frames();
    if frames == 0 || max_segments == 0 || max_segments > frames {
        return None;
    }
    let interior = frames - 1;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u64..(1u64 << interior) {
        if mask.count_ones() as usize + 1 > max_segments {
            continue;
        }
        let bounds: Vec<usize> = (0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        let value = reference_objective(&series.values, frames, &bounds);
        if best
            .as_ref()
            .is_none_or(|(v, b)| value > *v || (value == *v && bounds < *b))
        {
            best = Some((value, bounds));
        }
    }
    let (objective, bounds) = best?;
    Some(SegmentationOptimum {
        objective,
        partition: SegmentPartition::from_boundaries(frames, &bounds).ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_enumerate_all() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn square_corners_are_optimal() {
        let tokens = TokenSet::from_vectors(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let opt = divprune_exhaustive(&tokens, 4, DivDistance::Euclidean).unwrap();
        assert_eq!(opt.optima, vec![vec![0, 1, 2, 3]]);
        assert!((opt.objective - 1.0).abs() < 1e-12);
        assert_eq!(farthest_pair(&tokens, DivDistance::Euclidean), Some((0, 3)));
    }

    #[test]
    fn segmentation_prefers_cuts_at_dips() {
        let series = FrameSimSeries::new(vec![0.9, 0.1, 0.9]);
        let opt = segmentation_exhaustive(&series, 2).unwrap();
        assert_eq!(opt.partition.boundaries(), vec![2]);
        assert!((opt.objective - 1.8).abs() < 1e-12);
        assert!(segmentation_exhaustive(&series, 5).is_none());
    }
}
