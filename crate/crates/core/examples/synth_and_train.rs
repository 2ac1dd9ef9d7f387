//! Generates a synthetic workflow dataset, trains a reduced-width model on
//! it and evaluates online on a held-out video.
//!
//! ```text
//! cargo run --release --example synth_and_train [EPOCHS]
//! ```

use workflow_anticipation::anticipation::metrics::Metric;
use workflow_anticipation::network::ModelConfig;
use workflow_anticipation::pipeline::{evaluate, generate_synthetic, train, SyntheticSpec, TaskSpec, TrainConfig};

fn main() -> workflow_anticipation::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);

    let videos = generate_synthetic(&SyntheticSpec {
        videos: 6,
        min_frames: 200,
        max_frames: 260,
        ..SyntheticSpec::default()
    })?;
    let (train_set, rest) = videos.split_at(4);
    let (val_set, test_set) = rest.split_at(1);

    let task = TaskSpec::instrument();
    let cfg = TrainConfig {
        epochs,
        model: ModelConfig {
            gc_channels: 16,
            tcn_channels: 16,
            tcn_layers: 8,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let outcome = train(train_set, val_set, &task, &cfg)?;
    println!(
        "loss {:.3} -> {:.3}, best validation epoch {:?}",
        outcome.initial_loss(),
        outcome.final_loss(),
        outcome.best_epoch
    );

    let eval = evaluate(test_set, &outcome.params, &cfg.model, &task, 1)?;
    for h in &cfg.model.horizons {
        let m = |metric| eval.report.aggregate(*h, metric).map_or("-".into(), |v| format!("{v:.3}"));
        println!(
            "h={h}: wMAE {} inMAE {} pMAE {} eMAE {}",
            m(Metric::WMae),
            m(Metric::InMae),
            m(Metric::PMae),
            m(Metric::EMae)
        );
    }
    Ok(())
}
