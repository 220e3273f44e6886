//! Vertex-matched scoring and the latency benchmark.

mod bench;
mod dataset;
mod matching;
mod metrics;

pub use bench::{bench, Pipelines, StageTiming, Stages, TimingReport, MIN_WARMUP};
pub use dataset::{evaluate_dataset, EvalReport, ImageReport};
pub use matching::{match_detections, vertex_cost, Match, MatchConfig, MatchResult, MatchStrategy};
pub use metrics::{compute_metrics, fscore, Metrics};
