//! Trains briefly, saves a checkpoint, reloads it and shows that the
//! reloaded model reproduces the evaluation report.
//!
//! ```text
//! cargo run --release --example checkpoint_roundtrip
//! ```

use workflow_anticipation::network::ModelConfig;
use workflow_anticipation::pipeline::{
    evaluate, generate_synthetic, load_checkpoint, save_checkpoint, train, Checkpoint, SyntheticSpec, TaskKind,
    TaskSpec, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let videos = generate_synthetic(&SyntheticSpec {
        videos: 3,
        min_frames: 100,
        max_frames: 140,
        ..SyntheticSpec::default()
    })?;
    let task = TaskSpec::new(TaskKind::Phase);
    let cfg = TrainConfig {
        epochs: 5,
        model: ModelConfig {
            num_classes: task.classes.len(),
            gc_channels: 8,
            tcn_channels: 8,
            tcn_layers: 6,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let outcome = train(&videos[..2], &[], &task, &cfg)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("phase.ckpt");
    let checkpoint = Checkpoint {
        task: task.kind,
        config: cfg.model.clone(),
        params: outcome.params,
    };
    save_checkpoint(&path, &checkpoint)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    let loaded = load_checkpoint(&path)?;
    println!("saved {bytes} bytes, reloaded identical: {}", loaded == checkpoint);

    let before = evaluate(&videos[2..], &checkpoint.params, &checkpoint.config, &task, 1)?;
    let after = evaluate(&videos[2..], &loaded.params, &loaded.config, &task, 1)?;
    println!("reports agree: {}", before.report.entries == after.report.entries);
    print!("{}", after.report.to_csv_string());
    Ok(())
}
