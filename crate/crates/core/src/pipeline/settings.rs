//! Plain-text run configuration: `key = value` lines, `#` comments.
//!
//! Every key has a default; unknown keys are errors. Lists are
//! comma-separated, and `none` stands for an empty list.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::TopologyMode;
use crate::network::ModelConfig;
use crate::pipeline::{SyntheticSpec, TaskKind, TaskSpec, TrainConfig};

/// Every accepted key with a one-line description, in help order.
pub const SETTING_KEYS: &[(&str, &str)] = &[
    ("task", "anticipation target: instrument or phase"),
    ("model.gc_layers", "graph convolution layers"),
    ("model.gc_channels", "graph convolution width"),
    ("model.tcn_stages", "temporal network stages"),
    ("model.tcn_layers", "dilated layers per stage (dilation 2^l)"),
    ("model.tcn_channels", "temporal network width"),
    ("model.kernel_size", "temporal kernel size"),
    ("model.horizons", "anticipation horizons in minutes"),
    ("model.use_gc", "graph convolution on (false feeds raw box features)"),
    ("model.use_tcn", "temporal network on (false maps each frame directly)"),
    ("model.enabled_horizons", "horizons with loss terms; none trains the longest horizon only"),
    ("model.topology", "prior (hub-based edges) or full (complete graph)"),
    ("model.hubs", "hub nodes of the prior topology"),
    ("model.feed_predictions", "later stages read predictions instead of features"),
    ("train.epochs", "training epochs"),
    ("train.learning_rate", "Adam learning rate"),
    ("train.beta1", "Adam first-moment decay"),
    ("train.beta2", "Adam second-moment decay"),
    ("train.epsilon", "Adam epsilon"),
    ("train.seed", "parameter initialization and shuffling seed"),
    ("loss.alpha", "wMAE weight"),
    ("loss.beta", "inMAE weight"),
    ("loss.gamma", "pMAE weight"),
    ("loss.delta", "eMAE weight"),
    ("split.train", "training video ids; none means all videos outside val and test"),
    ("split.val", "validation video ids used for checkpoint selection"),
    ("split.test", "test video ids"),
    ("synth.videos", "synthetic videos to generate"),
    ("synth.min_frames", "shortest synthetic video in frames"),
    ("synth.max_frames", "longest synthetic video in frames"),
    ("synth.dwell", "mean frames between instrument presence switches"),
    ("synth.noise", "box random-walk step size"),
    ("synth.seed", "synthetic data seed"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub task: TaskKind,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            task: TaskKind::Instrument,
            train: TrainConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list<T: Display>(values: &[T]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Value of a model key (without the `model.` prefix). Also knows the
/// derived `nodes` and `num_classes`, which checkpoints record.
pub(crate) fn get_model(m: &ModelConfig, key: &str) -> Option<String> {
    Some(match key {
        "nodes" => m.nodes.to_string(),
        "num_classes" => m.num_classes.to_string(),
        "gc_layers" => m.gc_layers.to_string(),
        "gc_channels" => m.gc_channels.to_string(),
        "tcn_stages" => m.tcn_stages.to_string(),
        "tcn_layers" => m.tcn_layers.to_string(),
        "tcn_channels" => m.tcn_channels.to_string(),
        "kernel_size" => m.kernel_size.to_string(),
        "horizons" => list(&m.horizons),
        "use_gc" => m.use_gc.to_string(),
        "use_tcn" => m.use_tcn.to_string(),
        "enabled_horizons" => list(&m.enabled_horizons),
        "topology" => m.topology.to_string(),
        "hubs" => list(&m.hubs),
        "feed_predictions" => m.feed_predictions.to_string(),
        _ => return None,
    })
}

pub(crate) fn set_model(m: &mut ModelConfig, key: &str, value: &str) -> Result<()> {
    let k = format!("model.{key}");
    match key {
        "nodes" => m.nodes = parse(&k, value)?,
        "num_classes" => m.num_classes = parse(&k, value)?,
        "gc_layers" => m.gc_layers = parse(&k, value)?,
        "gc_channels" => m.gc_channels = parse(&k, value)?,
        "tcn_stages" => m.tcn_stages = parse(&k, value)?,
        "tcn_layers" => m.tcn_layers = parse(&k, value)?,
        "tcn_channels" => m.tcn_channels = parse(&k, value)?,
        "kernel_size" => m.kernel_size = parse(&k, value)?,
        "horizons" => m.horizons = parse_list(&k, value)?,
        "use_gc" => m.use_gc = parse(&k, value)?,
        "use_tcn" => m.use_tcn = parse(&k, value)?,
        "enabled_horizons" => m.enabled_horizons = parse_list(&k, value)?,
        "topology" => m.topology = value.parse::<TopologyMode>()?,
        "hubs" => m.hubs = parse_list(&k, value)?,
        "feed_predictions" => m.feed_predictions = parse(&k, value)?,
        _ => return Err(Error::config(format!("unknown key {k}"))),
    }
    Ok(())
}

pub(crate) const MODEL_BLOCK_KEYS: [&str; 15] = [
    "nodes",
    "num_classes",
    "gc_layers",
    "gc_channels",
    "tcn_stages",
    "tcn_layers",
    "tcn_channels",
    "kernel_size",
    "horizons",
    "use_gc",
    "use_tcn",
    "enabled_horizons",
    "topology",
    "hubs",
    "feed_predictions",
];

impl Settings {
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let s = &self.synth;
        if let Some(k) = key.strip_prefix("model.") {
            return SETTING_KEYS
                .iter()
                .any(|(name, _)| *name == key)
                .then(|| get_model(&t.model, k))
                .flatten();
        }
        Some(match key {
            "task" => self.task.to_string(),
            "train.epochs" => t.epochs.to_string(),
            "train.learning_rate" => t.adam.learning_rate.to_string(),
            "train.beta1" => t.adam.beta1.to_string(),
            "train.beta2" => t.adam.beta2.to_string(),
            "train.epsilon" => t.adam.epsilon.to_string(),
            "train.seed" => t.seed.to_string(),
            "loss.alpha" => t.loss.alpha.to_string(),
            "loss.beta" => t.loss.beta.to_string(),
            "loss.gamma" => t.loss.gamma.to_string(),
            "loss.delta" => t.loss.delta.to_string(),
            "split.train" => list(&t.splits.train),
            "split.val" => list(&t.splits.val),
            "split.test" => list(&t.splits.test),
            "synth.videos" => s.videos.to_string(),
            "synth.min_frames" => s.min_frames.to_string(),
            "synth.max_frames" => s.max_frames.to_string(),
            "synth.dwell" => s.dwell.to_string(),
            "synth.noise" => s.noise.to_string(),
            "synth.seed" => s.seed.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !SETTING_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(format!("unknown key {key}")));
        }
        let value = value.trim();
        if let Some(k) = key.strip_prefix("model.") {
            return set_model(&mut self.train.model, k, value);
        }
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "task" => self.task = value.parse()?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.learning_rate" => t.adam.learning_rate = parse(key, value)?,
            "train.beta1" => t.adam.beta1 = parse(key, value)?,
            "train.beta2" => t.adam.beta2 = parse(key, value)?,
            "train.epsilon" => t.adam.epsilon = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "loss.alpha" => t.loss.alpha = parse(key, value)?,
            "loss.beta" => t.loss.beta = parse(key, value)?,
            "loss.gamma" => t.loss.gamma = parse(key, value)?,
            "loss.delta" => t.loss.delta = parse(key, value)?,
            "split.train" => t.splits.train = parse_list(key, value)?,
            "split.val" => t.splits.val = parse_list(key, value)?,
            "split.test" => t.splits.test = parse_list(key, value)?,
            "synth.videos" => s.videos = parse(key, value)?,
            "synth.min_frames" => s.min_frames = parse(key, value)?,
            "synth.max_frames" => s.max_frames = parse(key, value)?,
            "synth.dwell" => s.dwell = parse(key, value)?,
            "synth.noise" => s.noise = parse(key, value)?,
            "synth.seed" => s.seed = parse(key, value)?,
            _ => unreachable!("key table and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Applies one `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v)
    }

    /// Reads assignments from a config file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Defaults, then the file, then each override in order. The class
    /// count follows the task.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(p) = file {
            s.apply_file(p)?;
        }
        for o in overrides {
            s.assign(o)?;
        }
        s.sync();
        s.train.validate()?;
        Ok(s)
    }

    /// Re-derives values that depend on other keys.
    pub fn sync(&mut self) {
        self.train.model.num_classes = self.task_spec().classes.len();
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec::new(self.task)
    }

    /// Every key with its current value, in [`SETTING_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        SETTING_KEYS
            .iter()
            .map(|(k, _)| (*k, self.get(k).expect("every listed key has a value")))
            .collect()
    }

    pub fn to_config_string(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_training_setup() {
        let s = Settings::default();
        assert_eq!(s.get("train.epochs").unwrap(), "100");
        assert_eq!(s.get("train.learning_rate").unwrap(), "0.002");
        assert_eq!(s.get("model.horizons").unwrap(), "2,3,5");
        assert_eq!(s.get("model.tcn_layers").unwrap(), "14");
        assert_eq!(s.get("split.val").unwrap(), "none");
    }

    #[test]
    fn every_key_round_trips() {
        let s = Settings::default();
        let mut t = Settings {
            task: TaskKind::Phase,
            ..Settings::default()
        };
        for (k, v) in s.entries() {
            t.set(k, &v).unwrap();
        }
        assert_eq!(t, s);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut s = Settings::default();
        assert!(s.assign("model.depth=3").is_err());
        assert!(s.assign("model.nodes=3").is_err());
        assert!(s.assign("train.epochs").is_err());
        assert!(s.assign("train.epochs=many").is_err());
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "# run\ntask = phase\ntrain.epochs = 7  # short\nmodel.enabled_horizons = none\n").unwrap();
        let s = Settings::resolve(Some(&p), &["train.epochs=9".into()]).unwrap();
        assert_eq!(s.task, TaskKind::Phase);
        assert_eq!(s.train.epochs, 9);
        assert_eq!(s.train.model.num_classes, 6);
        assert!(s.train.model.enabled_horizons.is_empty());

        std::fs::write(&p, "task = phase\nbogus = 1\n").unwrap();
        assert!(matches!(Settings::resolve(Some(&p), &[]), Err(Error::Parse { line: 2, .. })));
    }
}
