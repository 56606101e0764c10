//! Attention-ranked pruning, dominant plus contextual tokens, window merging
//! and prune-then-merge on one synthetic image.

use tokenpress::metrics::{cls_scores, text_scores, TextReduce};
use tokenpress::pipeline::{synthetic_input, SyntheticSpec};
use tokenpress::spatial::{dominant_contextual, prune_then_merge, prune_topk, window_merge, Budget};
use tokenpress::{apply_plan, ReductionPlan, TokenSet};

fn describe(name: &str, tokens: &TokenSet, plan: &ReductionPlan) -> Result<(), Box<dyn std::error::Error>> {
    let out = apply_plan(tokens, plan)?;
    println!(
        "{name:<22} {:>3} -> {:>3} tokens, mode {:?}, {} merged sources, mass {}",
        tokens.len(),
        out.len(),
        plan.mode,
        plan.merged_sources(),
        out.total_weight()
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        rows: 12,
        cols: 12,
        text_queries: 4,
        ..SyntheticSpec::default()
    };
    let (tokens, bundle) = synthetic_input(&spec, 3)?;
    let cls = cls_scores(&bundle)?;
    let text = text_scores(&bundle, TextReduce::Mean)?;

    describe("cls top-k (1/3)", &tokens, &prune_topk(&cls, Budget::Ratio(1.0 / 3.0))?)?;
    describe("text top-k (32)", &tokens, &prune_topk(&text, Budget::Count(32))?)?;
    describe("dominant+contextual", &tokens, &dominant_contextual(&tokens, &cls, 40, 8)?)?;
    describe("window 2x2 @ 0.5", &tokens, &window_merge(&tokens, (2, 2), 0.5)?)?;
    let keep = prune_topk(&cls, Budget::Count(48))?;
    describe("prune then merge", &tokens, &prune_then_merge(&tokens, &keep, true)?)?;

    let clamped = prune_topk(&cls, Budget::Count(1000))?;
    println!("budget 1000 on {} tokens: kept {}, clamped {}", tokens.len(), clamped.retained(), clamped.budget_clamped);
    Ok(())
}
