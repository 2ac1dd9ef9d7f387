//! Runs the nine-row component ablation on a small synthetic benchmark and
//! prints the resulting table.
//!
//! ```text
//! cargo run --release --example ablation [EPOCHS]
//! ```

use workflow_anticipation::network::ModelConfig;
use workflow_anticipation::pipeline::{generate_synthetic, run_ablation, standard_rows, SyntheticSpec, TaskSpec, TrainConfig};

fn main() -> workflow_anticipation::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let videos = generate_synthetic(&SyntheticSpec {
        videos: 4,
        min_frames: 150,
        max_frames: 200,
        ..SyntheticSpec::default()
    })?;
    let task = TaskSpec::instrument();
    let base = TrainConfig {
        epochs,
        model: ModelConfig {
            gc_channels: 16,
            tcn_channels: 16,
            tcn_layers: 8,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let rows = standard_rows(base.model.horizons.len());
    let table = run_ablation(&videos, &[], &videos, &task, &base, &rows, 1)?;
    let mut out = Vec::new();
    table.write_csv(&mut out).expect("write to memory");
    print!("{}", String::from_utf8_lossy(&out));
    println!("lowest mean inMAE: row {:?} (full model is row {:?})", table.best(), table.reference());
    Ok(())
}
