//! Progressive bipartite merging with an explicit schedule.

use tokenpress::pipeline::{synthetic_input, SyntheticSpec};
use tokenpress::spatial::{tome_merge_schedule, tome_schedule};
use tokenpress::{apply_plan, OpCounters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (tokens, _) = synthetic_input(&SyntheticSpec::default(), 21)?;
    let n = tokens.len();
    for (k, steps) in [(24, 1), (18, 2), (12, 4)] {
        let schedule = tome_schedule(n, k, steps)?;
        let mut counters = OpCounters::default();
        let plan = tome_merge_schedule(&tokens, &schedule, &mut counters)?;
        let out = apply_plan(&tokens, &plan)?;
        let heaviest = out.weights().iter().max().copied().unwrap_or(0);
        println!(
            "{n} -> {:>2} tokens via {schedule:?}: mass {}, heaviest token absorbs {heaviest}, {} similarity evals",
            out.len(),
            out.total_weight(),
            counters.similarity_evals
        );
    }
    Ok(())
}
