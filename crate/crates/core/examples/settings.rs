//! Resolves configuration from defaults, a config file and `key=value`
//! overrides, the same way the command-line tool does.
//!
//! ```text
//! cargo run --example settings
//! ```

use workflow_anticipation::pipeline::{Settings, SETTING_KEYS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let file = dir.path().join("run.conf");
    std::fs::write(&file, "# phase model, shorter horizons\ntask = phase\nmodel.horizons = 1,2,3\ntrain.epochs = 50\n")?;

    let overrides = ["model.enabled_horizons=none".to_string(), "train.seed=4".to_string()];
    let settings = Settings::resolve(Some(&file), &overrides)?;
    print!("{}", settings.to_config_string());
    println!("\n{} keys; the task sets model.num_classes = {}", SETTING_KEYS.len(), settings.train.model.num_classes);

    match Settings::resolve(None, &["model.horizons=3,2".to_string()]) {
        Ok(_) => println!("unexpected: decreasing horizons accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
