//! Importance and redundancy scores.
//!
//! Attention-based scores come straight from dumped attention; similarity-based
//! scores come from the cosine geometry of the token embeddings. All consumers
//! are rank based, so scores are never renormalised.

use serde::{Deserialize, Serialize};

use crate::counters::OpCounters;
use crate::error::MetricError;
use crate::tokens::{AttentionBundle, TokenSet};

/// Below this norm a vector is treated as dissimilar to everything.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreSource {
    ClsAttention,
    TextAttention,
    Diversity,
    Redundancy,
}

/// Per-token importance; higher means more important.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub source: ScoreSource,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, source: ScoreSource) -> Self {
        Self { scores, source }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Restricts scores indexed by original token id to the survivors of `tokens`.
    pub fn gather(&self, tokens: &TokenSet) -> Self {
        if self.scores.len() == tokens.len() {
            return self.clone();
        }
        Self {
            scores: tokens.gather(&self.scores),
            source: self.source,
        }
    }
}

pub fn cls_scores(bundle: &AttentionBundle) -> Result<ScoreVector, MetricError> {
    let cls = bundle.cls_to_patch().ok_or(MetricError::MissingClsAttention)?;
    Ok(ScoreVector::new(
        cls.iter().map(|&v| v as f64).collect(),
        ScoreSource::ClsAttention,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextReduce {
    /// Column mean over all prompt rows.
    #[default]
    Mean,
    /// The final prompt row only.
    LastRow,
}

pub fn text_scores(bundle: &AttentionBundle, reduce: TextReduce) -> Result<ScoreVector, MetricError> {
    let text = bundle.text_to_visual().ok_or(MetricError::MissingTextAttention)?;
    let scores = match reduce {
        TextReduce::LastRow => text.row(text.n_text - 1).iter().map(|&v| v as f64).collect(),
        TextReduce::Mean => {
            let mut acc = vec![0f64; text.n_tokens];
            for r in 0..text.n_text {
                for (a, &v) in acc.iter_mut().zip(text.row(r)) {
                    *a += v as f64;
                }
            }
            acc.iter().map(|a| a / text.n_text as f64).collect()
        }
    };
    Ok(ScoreVector::new(scores, ScoreSource::TextAttention))
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Cosine similarity with precomputed norms; zero-norm vectors score 0.
pub(crate) fn cosine_with_norms(a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
    if na < ZERO_NORM || nb < ZERO_NORM {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity of two vectors; zero-norm vectors score 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    cosine_with_norms(a, b, norm(a), norm(b))
}

/// Dense symmetric cosine-similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Builds a matrix from raw values, checking symmetry and range.
    pub fn from_values(n: usize, values: Vec<f64>) -> Option<Self> {
        if values.len() != n * n {
            return None;
        }
        let m = Self { n, values };
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if !v.is_finite() || v.abs() > 1.0 + 1e-6 || (v - m.get(j, i)).abs() > 1e-12 {
                    return None;
                }
            }
        }
        Some(m)
    }
}

pub fn cosine_sim(tokens: &TokenSet) -> SimMatrix {
    cosine_sim_counted(tokens, &mut OpCounters::default())
}

pub fn cosine_sim_counted(tokens: &TokenSet, counters: &mut OpCounters) -> SimMatrix {
    let n = tokens.len();
    let norms: Vec<f64> = tokens.rows().map(norm).collect();
    let mut values = vec![0f64; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = cosine_with_norms(tokens.token(i), tokens.token(j), norms[i], norms[j]);
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    counters.similarity_evals += (n * n.saturating_sub(1) / 2) as u64;
    SimMatrix { n, values }
}

/// Scores each token by the negated similarity of its nearest neighbour, so
/// duplicated tokens rank lowest.
pub fn redundancy_scores(sim: &SimMatrix) -> ScoreVector {
    let n = sim.n();
    let scores = if n < 2 {
        vec![0.0; n]
    } else {
        (0..n)
            .map(|i| {
                let nearest = sim
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &s)| s)
                    .fold(f64::NEG_INFINITY, f64::max);
                -nearest
            })
            .collect()
    };
    ScoreVector::new(scores, ScoreSource::Redundancy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::TextAttention;

    fn tokens(vs: &[&[f32]]) -> TokenSet {
        TokenSet::from_vectors(&vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn text_bundle(rows: &[&[f32]]) -> AttentionBundle {
        let n_tokens = rows[0].len();
        AttentionBundle::new(
            None,
            Some(TextAttention {
                n_text: rows.len(),
                n_tokens,
                values: rows.concat(),
            }),
            5,
        )
        .unwrap()
    }

    #[test]
    fn cls_pass_through() {
        let b = AttentionBundle::new(Some(vec![0.1, 0.7, 0.2]), None, 0).unwrap();
        let s = cls_scores(&b).unwrap();
        assert_eq!(s.scores, vec![0.1f32 as f64, 0.7f32 as f64, 0.2f32 as f64]);
        assert_eq!(s.source, ScoreSource::ClsAttention);

        let uniform = AttentionBundle::new(Some(vec![0.25; 4]), None, 0).unwrap();
        let s = cls_scores(&uniform).unwrap();
        assert!(s.scores.windows(2).all(|w| w[0] == w[1]));

        assert_eq!(
            cls_scores(&AttentionBundle::empty()).unwrap_err(),
            MetricError::MissingClsAttention
        );
    }

    #[test]
    fn text_reducers() {
        let one = text_bundle(&[&[0.2, 0.8]]);
        let mean = text_scores(&one, TextReduce::Mean).unwrap();
        let last = text_scores(&one, TextReduce::LastRow).unwrap();
        assert_eq!(mean, last);
        assert_eq!(mean.scores, vec![0.2f32 as f64, 0.8f32 as f64]);

        let two = text_bundle(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(text_scores(&two, TextReduce::Mean).unwrap().scores, vec![0.5, 0.5]);
        assert_eq!(text_scores(&two, TextReduce::LastRow).unwrap().scores, vec![0.0, 1.0]);

        assert_eq!(
            text_scores(&AttentionBundle::empty(), TextReduce::Mean).unwrap_err(),
            MetricError::MissingTextAttention
        );
    }

    #[test]
    fn cosine_cases() {
        let same = cosine_sim(&tokens(&[&[0.6, 0.8], &[0.6, 0.8], &[0.6, 0.8]]));
        for i in 0..3 {
            for j in 0..3 {
                assert!((same.get(i, j) - 1.0).abs() < 1e-12);
            }
        }
        let basis = cosine_sim(&tokens(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(basis.row(0), &[1.0, 0.0]);
        assert_eq!(basis.row(1), &[0.0, 1.0]);

        let diag = cosine_sim(&tokens(&[&[1.0, 0.0], &[1.0, 1.0]]));
        assert!((diag.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn zero_rows_are_dissimilar() {
        let s = cosine_sim(&tokens(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]]));
        assert_eq!(s.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(s.get(2, 2), 1.0);
    }

    #[test]
    fn counts_pairs() {
        let mut c = OpCounters::default();
        cosine_sim_counted(&tokens(&[&[1.0], &[2.0], &[3.0], &[4.0]]), &mut c);
        assert_eq!(c.similarity_evals, 6);
    }

    #[test]
    fn redundancy_prefers_unique_tokens() {
        // t0 == t1, t2 orthogonal: rows give max off-diagonal 1, 1, 0
        let sim = cosine_sim(&tokens(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]));
        let r = redundancy_scores(&sim);
        assert_eq!(r.scores, vec![-1.0, -1.0, 0.0]);
        let best = (0..3).max_by(|&a, &b| r.scores[a].total_cmp(&r.scores[b])).unwrap();
        assert_eq!(best, 2);

        let ortho = redundancy_scores(&cosine_sim(&tokens(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])));
        assert!(ortho.scores.iter().all(|&s| s == ortho.scores[0]));

        let single = redundancy_scores(&cosine_sim(&tokens(&[&[3.0, 4.0]])));
        assert_eq!(single.scores, vec![0.0]);
    }

    #[test]
    fn sim_matrix_validation() {
        assert!(SimMatrix::from_values(2, vec![1.0, 0.5, 0.5, 1.0]).is_some());
        assert!(SimMatrix::from_values(2, vec![1.0, 0.5, 0.4, 1.0]).is_none());
        assert!(SimMatrix::from_values(2, vec![1.0, 1.5, 1.5, 1.0]).is_none());
    }
}
