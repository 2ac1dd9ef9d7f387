//! Feeds a video to the streaming predictor one frame at a time, checks the
//! answers against whole-sequence inference and reports per-frame latency.
//!
//! ```text
//! cargo run --release --example streaming_inference
//! ```

use std::time::Instant;

use workflow_anticipation::graph::{frame_features, GraphTopology, NodeRoster, TopologyMode};
use workflow_anticipation::network::{model_forward, ModelConfig, ModelParams, StreamingPredictor};
use workflow_anticipation::pipeline::{generate_synthetic, SyntheticSpec};

fn main() -> workflow_anticipation::Result<()> {
    let config = ModelConfig::default();
    let topology = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
    let params = ModelParams::init(&config, 0)?;
    let video = generate_synthetic(&SyntheticSpec {
        videos: 1,
        ..SyntheticSpec::default()
    })?
    .remove(0);

    let mut stream = StreamingPredictor::new(&params, &config, &topology)?;
    let mut online = Vec::new();
    let start = Instant::now();
    for dets in video.detections_by_frame() {
        let features = frame_features(&dets, &NodeRoster::cholec80())?;
        online.extend(stream.step(&features)?.pop().expect("final stage"));
    }
    let per_frame = start.elapsed().as_secs_f64() / video.frames as f64;

    let batch = model_forward(&video.sequence(&topology.roster)?, &params, &config, &topology)?;
    let identical = batch.last().expect("final stage").data() == online.as_slice();
    println!(
        "{} frames, {} parameters, {:.3} ms per frame, {} rows buffered, streaming == batch: {identical}",
        video.frames,
        params.parameter_count(),
        per_frame * 1e3,
        stream.buffered_rows()
    );

    let w = config.output_width();
    let last = &online[online.len() - w..];
    for (hi, h) in config.horizons.iter().enumerate() {
        let row: Vec<String> = last[hi * config.num_classes..(hi + 1) * config.num_classes]
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect();
        println!("last frame, h={h}: [{}]", row.join(", "));
    }
    Ok(())
}
