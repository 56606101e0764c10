//! Segments a synthetic clip several ways, then merges or prunes it over time.

use tokenpress::pipeline::{synthetic_input, SyntheticSpec};
use tokenpress::temporal::{
    frame_similarity, partition_objective, rate_report, segment_dp, segment_fixed, segment_threshold, temporal_merge,
    temporal_prune, StageTimings,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        frames: 8,
        rows: 4,
        cols: 4,
        cut_prob: 0.3,
        ..SyntheticSpec::default()
    };
    let (video, _) = synthetic_input(&spec, 5)?;
    let series = frame_similarity(&video)?;
    let sims: Vec<String> = series.values.iter().map(|v| format!("{v:.3}")).collect();
    println!("adjacent-frame similarity: [{}]", sims.join(", "));

    let partitions = [
        ("fixed(3)", segment_fixed(video.frames(), 3)?),
        ("threshold(0.9)", segment_threshold(&series, 0.9)),
        ("dp(4)", segment_dp(&series, 4)?),
    ];
    for (name, partition) in &partitions {
        println!(
            "{name:<15} boundaries {:?}, objective {:.4}",
            partition.boundaries(),
            partition_objective(&series, partition)
        );
    }

    let (_, dp) = &partitions[2];
    for mr in [0.0, 0.25, 0.5, 0.75] {
        let merge = rate_report(&temporal_merge(&video, dp, mr)?, video.len(), mr, StageTimings::default());
        let prune = rate_report(&temporal_prune(&video, dp, mr)?, video.len(), mr, StageTimings::default());
        println!(
            "MR {mr:.2}: merge keeps {}/{} ({}), prune keeps {}/{}",
            merge.final_tokens, merge.original_tokens, merge.retention, prune.final_tokens, prune.original_tokens
        );
    }
    Ok(())
}
