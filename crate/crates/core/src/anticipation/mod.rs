//! Remaining-time targets, anticipation metrics and the training loss.

mod loss;
pub mod metrics;
mod targets;

pub use loss::{loss_on_tape, loss_plan, training_loss, FilterCounts, LossPlan, LossWeights};
pub use metrics::{e_mae, in_mae, p_mae, w_mae, Metric, MetricEntry, MetricReport};
pub use targets::{make_targets, remaining_time, AnticipationTarget, Interval, OccurrenceTrack, FRAMES_PER_MINUTE};
