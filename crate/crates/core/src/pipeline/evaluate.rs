//! Online evaluation.
//!
//! Each video is replayed frame by frame through the streaming predictor;
//! the measured time per frame covers graph assembly and the forward pass.
//! Final-stage predictions of all videos are pooled before computing the
//! metrics.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::anticipation::MetricReport;
use crate::error::{Error, Result};
use crate::graph::{frame_features, GraphTopology, NodeRoster};
use crate::network::{model_forward, ModelConfig, ModelParams, StreamingPredictor};
use crate::numerics::Tensor;
use crate::pipeline::{TaskSpec, VideoRecord};

/// Rejects parameters or configurations that do not fit the task.
pub(crate) fn check_compatible(params: &ModelParams, config: &ModelConfig, task: &TaskSpec, roster: &NodeRoster) -> Result<()> {
    if config.num_classes != task.classes.len() {
        return Err(Error::config(format!(
            "model predicts {} classes, {} task has {}",
            config.num_classes,
            task.kind,
            task.classes.len()
        )));
    }
    if config.nodes != roster.len() {
        return Err(Error::config(format!(
            "model expects {} nodes, roster has {}",
            config.nodes,
            roster.len()
        )));
    }
    ModelParams::from_named(
        config,
        params.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
    )
    .map_err(|e| Error::config(format!("parameters do not match the configuration: {e}")))?;
    Ok(())
}

/// Maps one frame of raw head output (`H·C`, horizon-major) to reported
/// predictions. A model trained on the longest horizon only reports
/// `min(pred_max, h)` at each horizon; otherwise every horizon reads its
/// own slice.
pub fn readout(config: &ModelConfig, row: &mut [f64]) {
    if !config.enabled_horizons.is_empty() {
        return;
    }
    let c = config.num_classes;
    let last = config.horizons.len() - 1;
    for (hi, &h) in config.horizons.iter().enumerate().take(last) {
        for ci in 0..c {
            row[hi * c + ci] = row[last * c + ci].min(h);
        }
    }
}

/// Reported final-stage predictions of a whole sequence, `T × H × C`.
pub(crate) fn batch_prediction(
    record: &VideoRecord,
    params: &ModelParams,
    config: &ModelConfig,
    topology: &GraphTopology,
) -> Result<Tensor> {
    let seq = record.sequence(&topology.roster)?;
    let mut pred = model_forward(&seq, params, config, topology)?
        .pop()
        .ok_or_else(|| Error::config("model has no output stage"))?;
    let w = config.output_width();
    for row in pred.data_mut().chunks_exact_mut(w) {
        readout(config, row);
    }
    Ok(pred)
}

fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::data("nothing to evaluate"))?;
    let tail = first.shape()[1..].to_vec();
    let frames: usize = parts.iter().map(|p| p.shape()[0]).sum();
    let data = parts.iter().flat_map(|p| p.data().iter().copied()).collect();
    let mut shape = vec![frames];
    shape.extend(tail);
    Tensor::new(shape, data)
}

/// Metrics over batch predictions, used for checkpoint selection.
pub(crate) fn batch_report(
    records: &[VideoRecord],
    params: &ModelParams,
    config: &ModelConfig,
    topology: &GraphTopology,
    task: &TaskSpec,
) -> Result<MetricReport> {
    let mut preds = Vec::with_capacity(records.len());
    let mut gts = Vec::with_capacity(records.len());
    for r in records {
        preds.push(batch_prediction(r, params, config, topology)?);
        gts.push(task.targets(r, &config.horizons)?.to_prediction_layout());
    }
    let pred = concat(&preds.iter().collect::<Vec<_>>())?;
    let gt = concat(&gts.iter().collect::<Vec<_>>())?;
    MetricReport::compute(&task.kind.to_string(), &task.classes, &config.horizons, &pred, &gt)
}

/// Online predictions for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoPrediction {
    pub video_id: String,
    /// Reported final-stage predictions, `T × H × C`.
    pub prediction: Tensor,
    /// Ground truth in the same layout.
    pub target: Tensor,
    /// Wall-clock seconds spent on graph assembly and forward passes.
    pub seconds: f64,
}

/// Replays `record` frame by frame through a fresh streaming predictor.
pub fn predict_video(
    record: &VideoRecord,
    params: &ModelParams,
    config: &ModelConfig,
    topology: &GraphTopology,
    task: &TaskSpec,
) -> Result<VideoPrediction> {
    let per_frame = record.detections_by_frame();
    let mut stream = StreamingPredictor::new(params, config, topology)?;
    let w = config.output_width();
    let mut data = Vec::with_capacity(record.frames * w);
    let mut seconds = 0.0;
    for dets in &per_frame {
        let start = Instant::now();
        let features = frame_features(dets, &topology.roster)?;
        let mut row = stream.step(&features)?.pop().expect("at least one stage");
        readout(config, &mut row);
        seconds += start.elapsed().as_secs_f64();
        data.extend_from_slice(&row);
    }
    Ok(VideoPrediction {
        video_id: record.video_id.clone(),
        prediction: Tensor::new(vec![record.frames, config.horizon_count(), config.num_classes], data)?,
        target: task.targets(record, &config.horizons)?.to_prediction_layout(),
        seconds,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    /// In the order of the input records.
    pub videos: Vec<VideoPrediction>,
}

/// Online evaluation over `records`. With `jobs > 1` videos are processed
/// on that many worker threads; results keep the input order.
pub fn evaluate(
    records: &[VideoRecord],
    params: &ModelParams,
    config: &ModelConfig,
    task: &TaskSpec,
    jobs: usize,
) -> Result<Evaluation> {
    let roster = NodeRoster::cholec80();
    check_compatible(params, config, task, &roster)?;
    let topology = GraphTopology::build(roster, config.topology, &config.hubs)?;
    let run = |r: &VideoRecord| predict_video(r, params, config, &topology, task);
    let videos: Vec<VideoPrediction> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| records.par_iter().map(run).collect::<Result<_>>())?
    } else {
        records.iter().map(run).collect::<Result<_>>()?
    };
    let pred = concat(&videos.iter().map(|v| &v.prediction).collect::<Vec<_>>())?;
    let gt = concat(&videos.iter().map(|v| &v.target).collect::<Vec<_>>())?;
    let mut report = MetricReport::compute(&task.kind.to_string(), &task.classes, &config.horizons, &pred, &gt)?;
    let frames = pred.shape()[0];
    report.latency_per_frame = Some(videos.iter().map(|v| v.seconds).sum::<f64>() / frames as f64);
    Ok(Evaluation { report, videos })
}

/// Per-frame curves: `video_id,frame,class,horizon,gt,pred`.
pub fn write_plot_data(videos: &[VideoPrediction], classes: &[String], horizons: &[f64], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "video_id,frame,class,horizon,gt,pred")?;
    for v in videos {
        let frames = v.prediction.shape()[0];
        for (ci, class) in classes.iter().enumerate() {
            for (hi, h) in horizons.iter().enumerate() {
                for f in 0..frames {
                    writeln!(
                        out,
                        "{},{},{class},{h},{},{}",
                        v.video_id,
                        f + 1,
                        v.target.at(&[f, hi, ci]),
                        v.prediction.at(&[f, hi, ci])
                    )?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anticipation::metrics::Metric;
    use crate::pipeline::{generate_synthetic, SyntheticSpec};

    fn small() -> ModelConfig {
        ModelConfig {
            gc_channels: 4,
            tcn_channels: 4,
            tcn_layers: 4,
            ..ModelConfig::default()
        }
    }

    fn videos() -> Vec<VideoRecord> {
        generate_synthetic(&SyntheticSpec {
            videos: 3,
            min_frames: 30,
            max_frames: 50,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn baseline_readout_clips_the_longest_horizon() {
        let cfg = ModelConfig {
            num_classes: 2,
            enabled_horizons: vec![],
            ..ModelConfig::default()
        };
        let mut row = vec![9.0, 9.0, 9.0, 9.0, 4.0, 1.5];
        readout(&cfg, &mut row);
        assert_eq!(row, vec![2.0, 1.5, 3.0, 1.5, 4.0, 1.5]);
        let mut row = vec![0.1; 6];
        readout(&ModelConfig { num_classes: 2, ..cfg.clone() }, &mut row);
        assert_eq!(row, vec![0.1; 6]);
        let full = ModelConfig {
            num_classes: 2,
            ..ModelConfig::default()
        };
        let mut row = vec![1.0, 1.0, 2.5, 2.5, 4.0, 4.0];
        readout(&full, &mut row);
        assert_eq!(row, vec![1.0, 1.0, 2.5, 2.5, 4.0, 4.0]);
    }

    #[test]
    fn online_equals_batch() {
        let cfg = small();
        let params = ModelParams::init(&cfg, 3).unwrap();
        let topo = GraphTopology::cholec80(cfg.topology);
        let task = TaskSpec::instrument();
        for r in videos() {
            let online = predict_video(&r, &params, &cfg, &topo, &task).unwrap();
            assert_eq!(online.prediction, batch_prediction(&r, &params, &cfg, &topo).unwrap());
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = small();
        let params = ModelParams::init(&cfg, 3).unwrap();
        let task = TaskSpec::instrument();
        let v = videos();
        let a = evaluate(&v, &params, &cfg, &task, 1).unwrap();
        let b = evaluate(&v, &params, &cfg, &task, 3).unwrap();
        assert_eq!(a.report.entries, b.report.entries);
        let ids: Vec<_> = b.videos.iter().map(|p| p.video_id.clone()).collect();
        assert_eq!(ids, vec!["synth001", "synth002", "synth003"]);
        for (x, y) in a.videos.iter().zip(&b.videos) {
            assert_eq!(x.prediction, y.prediction);
        }
    }

    #[test]
    fn phase_params_rejected_for_instruments() {
        let cfg = ModelConfig { num_classes: 6, ..small() };
        let params = ModelParams::init(&cfg, 0).unwrap();
        let r = evaluate(&videos(), &params, &cfg, &TaskSpec::instrument(), 1);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    /// A predictor stuck at `h` never enters the pMAE window, and its
    /// inMAE is the mean of `h − gt` over anticipating frames.
    #[test]
    fn constant_predictor_closed_form() {
        let gt = Tensor::new(vec![5, 1, 1], vec![2.0, 1.5, 1.0, 0.0, 2.0]).unwrap();
        let pred = Tensor::full(&[5, 1, 1], 2.0);
        let report = MetricReport::compute("instrument", &["c".to_string()], &[2.0], &pred, &gt).unwrap();
        assert_eq!(report.get("c", 2.0, Metric::PMae).unwrap().value, None);
        let in_mae = report.get("c", 2.0, Metric::InMae).unwrap().value.unwrap();
        assert!((in_mae - 0.75).abs() < 1e-12);
    }
}
