use serde::{Deserialize, Serialize};

use crate::quant::QuantSpec;

/// Analytic inference cost of a decoder-only language model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub hidden: u64,
    pub layers: u64,
    /// Multiplier on `n^2 d` per layer.
    pub c_attn: f64,
    /// Multiplier on `n d^2` per layer.
    pub c_mlp: f64,
    pub params: u64,
    /// Bytes of key and value cache per token across all layers.
    pub kv_bytes_per_token: u64,
}

impl CostModel {
    /// A 7B LLaMA-style model: 32 layers, hidden 4096, MLP width 11008,
    /// fp16 KV cache.
    pub fn llama_7b() -> Self {
        Self::from_shape(4096, 32, 11008, 6_738_415_616)
    }

    /// Coefficients derived from layer shapes, counting two FLOPs per
    /// multiply-accumulate. The four attention projections cost `8 n d^2`,
    /// scores and value mixing cost `4 n^2 d`, and a gated MLP costs
    /// `6 n d d_ff`.
    pub fn from_shape(hidden: u64, layers: u64, ffn: u64, params: u64) -> Self {
        Self {
            hidden,
            layers,
            c_attn: 4.0,
            c_mlp: 8.0 + 6.0 * ffn as f64 / hidden as f64,
            params,
            kv_bytes_per_token: 2 * layers * hidden * 2,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.hidden > 0
            && self.layers > 0
            && self.params > 0
            && self.kv_bytes_per_token > 0
            && self.c_attn > 0.0
            && self.c_mlp > 0.0
            && self.c_attn.is_finite()
            && self.c_mlp.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub attention_flops: f64,
    pub mlp_flops: f64,
    pub prefill_flops: f64,
    pub weight_bytes: f64,
    pub kv_bytes: f64,
}

impl CostEstimate {
    /// Share of weights plus KV cache taken by the weights.
    pub fn weight_fraction(&self) -> f64 {
        self.weight_bytes / (self.weight_bytes + self.kv_bytes)
    }
}

/// Prefill cost and memory footprint for `n_tokens` of context. Weights are
/// half precision unless a quantization spec says otherwise.
pub fn cost_estimate(model: &CostModel, n_tokens: u64, quant: Option<&QuantSpec>) -> CostEstimate {
    let n = n_tokens as f64;
    let d = model.hidden as f64;
    let l = model.layers as f64;
    let attention_flops = l * model.c_attn * n * n * d;
    let mlp_flops = l * model.c_mlp * n * d * d;
    let bits = quant.map_or(16.0, |q| q.bits as f64);
    CostEstimate {
        attention_flops,
        mlp_flops,
        prefill_flops: attention_flops + mlp_flops,
        weight_bytes: model.params as f64 * bits / 8.0,
        kv_bytes: n * model.kv_bytes_per_token as f64,
    }
}
