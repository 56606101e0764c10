//! Prefill FLOPs and memory for a 7B decoder across token budgets and weight formats.

use tokenpress::eval::{cost_estimate, CostModel};
use tokenpress::quant::QuantSpec;

fn main() {
    let model = CostModel::llama_7b();
    println!("{:>6} {:>8} {:>14} {:>12} {:>12}", "tokens", "weights", "prefill TFLOP", "weight MB", "kv MB");
    for n in [576u64, 192, 128, 64] {
        for (label, spec) in [("fp16", None), ("w4a16", Some(QuantSpec::w4a16())), ("w8a8", Some(QuantSpec::w8a8()))] {
            let c = cost_estimate(&model, n, spec.as_ref());
            println!(
                "{n:>6} {label:>8} {:>14.3} {:>12.1} {:>12.1}",
                c.prefill_flops / 1e12,
                c.weight_bytes / 1e6,
                c.kv_bytes / 1e6
            );
        }
    }
}
