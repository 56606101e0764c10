//! Seeded stand-ins for dumped model features.
//!
//! Frames are built from a few prototype vectors so that neighbouring patches
//! are redundant, and consecutive frames drift slowly apart with occasional
//! scene cuts. Attention rows are softmax draws over the visual tokens.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::tokens::{AttentionBundle, TextAttention, TokenSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    /// Prompt tokens with text-to-visual attention; 0 leaves it out.
    pub text_queries: usize,
    /// Per-frame drift as a multiple of a unit Gaussian.
    pub noise: f64,
    /// Probability that a frame after the first starts a new scene.
    pub cut_prob: f64,
    /// Whether to emit [CLS]-to-patch attention.
    pub cls: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            frames: 1,
            rows: 6,
            cols: 6,
            dim: 16,
            text_queries: 0,
            noise: 0.05,
            cut_prob: 0.25,
            cls: true,
        }
    }
}

const PROTOTYPES: usize = 4;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn scene(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let protos: Vec<Vec<f64>> = (0..PROTOTYPES)
        .map(|_| (0..spec.dim).map(|_| gaussian(rng)).collect())
        .collect();
    let mut out = Vec::with_capacity(spec.rows * spec.cols * spec.dim);
    for _ in 0..spec.rows * spec.cols {
        let p = &protos[rng.random_range(0..PROTOTYPES)];
        out.extend(p.iter().map(|&v| v + 0.3 * gaussian(rng)));
    }
    out
}

fn softmax_row(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let logits: Vec<f64> = (0..n).map(|_| 2.0 * gaussian(rng)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / total) as f32).collect()
}

pub fn synthetic_input(spec: &SyntheticSpec, seed: u64) -> Result<(TokenSet, AttentionBundle), ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_frame = spec.rows * spec.cols * spec.dim;
    let mut data = Vec::with_capacity(spec.frames * per_frame);
    let mut current = scene(spec, &mut rng);
    for f in 0..spec.frames {
        if f > 0 {
            if rng.random_bool(spec.cut_prob.clamp(0.0, 1.0)) {
                current = scene(spec, &mut rng);
            } else {
                for v in current.iter_mut() {
                    *v += spec.noise * gaussian(&mut rng);
                }
            }
        }
        data.extend(current.iter().map(|&v| v as f32));
    }
    let tokens = TokenSet::from_grid(data, spec.dim, spec.frames, spec.rows, spec.cols)?;
    let n = tokens.len();
    let cls = spec.cls.then(|| softmax_row(n, &mut rng));
    let text = (spec.text_queries > 0).then(|| TextAttention {
        n_text: spec.text_queries,
        n_tokens: n,
        values: (0..spec.text_queries).flat_map(|_| softmax_row(n, &mut rng)).collect(),
    });
    let bundle = AttentionBundle::new(cls, text, 0)?;
    Ok((tokens, bundle))
}
