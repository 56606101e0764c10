//! Video token reduction in two steps: split the frames into segments of
//! similar content, then merge or prune redundant tokens inside each segment.

mod rate;
mod reduce;
mod segment;

pub use rate::{rate_report, rate_report_from_counts, RateReport, StageTimings, TokenRatio};
pub use reduce::{
    temporal_candidates, temporal_merge, temporal_prune, temporal_reduce_counted, TemporalAction, TemporalCandidate,
};
pub use segment::{
    dp_cell_count, frame_similarity, frame_similarity_counted, partition_objective, segment_dp, segment_dp_counted,
    segment_fixed, segment_score, segment_threshold, FrameSimSeries, SegmentPartition,
};
