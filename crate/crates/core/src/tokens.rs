//! Token containers shared by every reduction operator.
//!
//! A [`TokenSet`] is a frame-major grid of embeddings. Token `slot` of frame
//! `f` has global id `slot + f * rows * cols`, and reduced sets keep the ids of
//! their survivors so that frame and spatial position can always be recovered.

use crate::error::ModelError;

/// Spatial layout of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    data: Vec<f32>,
    dim: usize,
    frames: usize,
    grid: Option<Grid>,
    token_ids: Vec<usize>,
    weights: Vec<u64>,
    original_len: usize,
}

impl TokenSet {
    /// Builds a full (unreduced) set laid out as `frames` grids of `rows x cols`.
    pub fn from_grid(
        data: Vec<f32>,
        dim: usize,
        frames: usize,
        rows: usize,
        cols: usize,
    ) -> Result<Self, ModelError> {
        if dim == 0 || frames == 0 || rows == 0 || cols == 0 {
            return Err(ModelError::EmptyLayout);
        }
        let n = frames * rows * cols;
        if data.len() != n * dim {
            return Err(ModelError::ShapeMismatch {
                expected: n * dim,
                actual: data.len(),
            });
        }
        Ok(Self {
            data,
            dim,
            frames,
            grid: Some(Grid::new(rows, cols)),
            token_ids: (0..n).collect(),
            weights: vec![1; n],
            original_len: n,
        })
    }

    /// Builds a single-frame set with no spatial layout.
    pub fn from_rows(data: Vec<f32>, dim: usize) -> Result<Self, ModelError> {
        if dim == 0 || data.is_empty() {
            return Err(ModelError::EmptyLayout);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(ModelError::ShapeMismatch {
                expected: (data.len() / dim + 1) * dim,
                actual: data.len(),
            });
        }
        let n = data.len() / dim;
        Ok(Self {
            data,
            dim,
            frames: 1,
            grid: None,
            token_ids: (0..n).collect(),
            weights: vec![1; n],
            original_len: n,
        })
    }

    /// Convenience constructor from per-token vectors.
    pub fn from_vectors(vectors: &[Vec<f32>]) -> Result<Self, ModelError> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(ModelError::RaggedRows);
        }
        Self::from_rows(vectors.concat(), dim)
    }

    /// Replaces the merge mass of each token. Every weight must be at least one,
    /// and the lineage size becomes the weight total.
    pub fn with_weights(mut self, weights: Vec<u64>) -> Result<Self, ModelError> {
        if weights.len() != self.len() {
            return Err(ModelError::ShapeMismatch {
                expected: self.len(),
                actual: weights.len(),
            });
        }
        if weights.contains(&0) {
            return Err(ModelError::InvalidWeights);
        }
        let total: u64 = weights.iter().sum();
        self.original_len = self.original_len.max(total as usize);
        self.weights = weights;
        Ok(self)
    }

    pub(crate) fn from_parts(
        template: &TokenSet,
        data: Vec<f32>,
        token_ids: Vec<usize>,
        weights: Vec<u64>,
    ) -> Self {
        debug_assert_eq!(data.len(), token_ids.len() * template.dim);
        Self {
            data,
            dim: template.dim,
            frames: template.frames,
            grid: template.grid,
            token_ids,
            weights,
            original_len: template.original_len,
        }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    /// Token count of the unreduced set this one descends from.
    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Tokens per frame in the unreduced layout.
    pub fn tokens_per_frame(&self) -> usize {
        self.original_len / self.frames
    }

    /// True when no token has been removed since construction.
    pub fn is_complete(&self) -> bool {
        self.len() == self.original_len
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn token(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn token_ids(&self) -> &[usize] {
        &self.token_ids
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub fn frame_of(&self, id: usize) -> usize {
        id / self.tokens_per_frame()
    }

    pub fn slot_of(&self, id: usize) -> usize {
        id % self.tokens_per_frame()
    }

    /// Position of the token with original id `id`, if it survived.
    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.token_ids.binary_search(&id).ok()
    }

    /// Subsets a per-original-token vector to the survivors of this set.
    pub fn gather<T: Copy>(&self, per_original: &[T]) -> Vec<T> {
        self.token_ids.iter().map(|&id| per_original[id]).collect()
    }
}

/// Attention evidence dumped alongside a token set.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBundle {
    cls_to_patch: Option<Vec<f32>>,
    text_to_visual: Option<TextAttention>,
    pub source_layer: i32,
}

/// Row-major `n_text x n_tokens` attention from prompt tokens to visual tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAttention {
    pub n_text: usize,
    pub n_tokens: usize,
    pub values: Vec<f32>,
}

impl TextAttention {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.n_tokens..(r + 1) * self.n_tokens]
    }
}

/// Slack allowed on dumped softmax rows.
pub const ATTENTION_ROW_SLACK: f64 = 1e-4;

fn check_attention_row(row: &[f32], what: &'static str) -> Result<(), ModelError> {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ModelError::InvalidAttention {
            what,
            reason: "negative or non-finite entry".into(),
        });
    }
    let sum: f64 = row.iter().map(|&v| v as f64).sum();
    if !(sum > 0.0 && sum <= 1.0 + ATTENTION_ROW_SLACK) {
        return Err(ModelError::InvalidAttention {
            what,
            reason: format!("row sums to {sum}"),
        });
    }
    Ok(())
}

impl AttentionBundle {
    pub fn new(
        cls_to_patch: Option<Vec<f32>>,
        text_to_visual: Option<TextAttention>,
        source_layer: i32,
    ) -> Result<Self, ModelError> {
        if let Some(cls) = &cls_to_patch {
            check_attention_row(cls, "cls_to_patch")?;
        }
        if let Some(text) = &text_to_visual {
            if text.n_text == 0 || text.values.len() != text.n_text * text.n_tokens {
                return Err(ModelError::InvalidAttention {
                    what: "text_to_visual",
                    reason: "shape does not match n_text x n_tokens".into(),
                });
            }
            if let Some(cls) = &cls_to_patch {
                if cls.len() != text.n_tokens {
                    return Err(ModelError::ShapeMismatch {
                        expected: cls.len(),
                        actual: text.n_tokens,
                    });
                }
            }
            for r in 0..text.n_text {
                check_attention_row(text.row(r), "text_to_visual")?;
            }
        }
        Ok(Self {
            cls_to_patch,
            text_to_visual,
            source_layer,
        })
    }

    pub fn empty() -> Self {
        Self {
            cls_to_patch: None,
            text_to_visual: None,
            source_layer: 0,
        }
    }

    pub fn cls_to_patch(&self) -> Option<&[f32]> {
        self.cls_to_patch.as_deref()
    }

    pub fn text_to_visual(&self) -> Option<&TextAttention> {
        self.text_to_visual.as_ref()
    }

    /// Number of visual tokens the bundle describes, if any source is present.
    pub fn n_tokens(&self) -> Option<usize> {
        self.cls_to_patch
            .as_ref()
            .map(Vec::len)
            .or(self.text_to_visual.as_ref().map(|t| t.n_tokens))
    }

    /// Checks that the bundle covers exactly the original tokens of `tokens`.
    pub fn check_against(&self, tokens: &TokenSet) -> Result<(), ModelError> {
        match self.n_tokens() {
            Some(n) if n != tokens.original_len() => Err(ModelError::ShapeMismatch {
                expected: tokens.original_len(),
                actual: n,
            }),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_major_ids() {
        let t = TokenSet::from_grid(vec![0.0; 2 * 3 * 4], 1, 2, 3, 4).unwrap();
        assert_eq!(t.len(), 24);
        assert_eq!(t.tokens_per_frame(), 12);
        // slot 5 of frame 1
        assert_eq!(t.frame_of(5 + 12), 1);
        assert_eq!(t.slot_of(5 + 12), 5);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            TokenSet::from_grid(vec![0.0; 5], 1, 1, 2, 2),
            Err(ModelError::ShapeMismatch { .. })
        ));
        assert!(TokenSet::from_rows(vec![], 2).is_err());
        assert!(TokenSet::from_vectors(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn weights_must_be_positive() {
        let t = TokenSet::from_rows(vec![0.0; 4], 2).unwrap();
        assert!(matches!(
            t.clone().with_weights(vec![1, 0]),
            Err(ModelError::InvalidWeights)
        ));
        let t = t.with_weights(vec![2, 1]).unwrap();
        assert_eq!(t.total_weight(), 3);
        assert_eq!(t.original_len(), 3);
    }

    #[test]
    fn attention_rows_validated() {
        assert!(AttentionBundle::new(Some(vec![0.1, 0.7, 0.2]), None, 0).is_ok());
        // dumped softmax rows may overshoot by a hair
        assert!(AttentionBundle::new(Some(vec![0.5, 0.50005]), None, 0).is_ok());
        assert!(AttentionBundle::new(Some(vec![0.6, 0.6]), None, 0).is_err());
        assert!(AttentionBundle::new(Some(vec![0.0, 0.0]), None, 0).is_err());
        assert!(AttentionBundle::new(Some(vec![-0.1, 0.5]), None, 0).is_err());
        let text = TextAttention {
            n_text: 2,
            n_tokens: 2,
            values: vec![1.0, 0.0, 0.0, 1.0],
        };
        assert!(AttentionBundle::new(None, Some(text), 5).is_ok());
    }
}
