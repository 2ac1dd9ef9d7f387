//! Whole-video training with Adam.
//!
//! One step per video: forward the full sequence, sum the composite loss
//! over stages, backpropagate through every frame and update. Videos are
//! visited in a seeded shuffled order each epoch.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anticipation::metrics::Metric;
use crate::anticipation::{loss_on_tape, training_loss, AnticipationTarget, FilterCounts, LossWeights};
use crate::error::{Error, Result};
use crate::graph::{GraphSequence, GraphTopology, NodeRoster};
use crate::network::{forward_on_tape, model_forward, ModelConfig, ModelParams};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor};
use crate::pipeline::evaluate::{batch_report, check_compatible};
use crate::pipeline::{TaskSpec, VideoRecord};

/// Video ids per split. An empty training list means every video not
/// named in the validation or test lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(Error::config(format!("video {id} appears in more than one split")));
            }
        }
        Ok(())
    }
}

/// Returns the (train, validation, test) records named by `splits`.
pub fn split_records(
    records: &[VideoRecord],
    splits: &Splits,
) -> Result<(Vec<VideoRecord>, Vec<VideoRecord>, Vec<VideoRecord>)> {
    splits.validate()?;
    let pick = |ids: &[String]| -> Result<Vec<VideoRecord>> {
        ids.iter()
            .map(|id| {
                records
                    .iter()
                    .find(|r| &r.video_id == id)
                    .cloned()
                    .ok_or_else(|| Error::config(format!("split names unknown video {id}")))
            })
            .collect()
    };
    let val = pick(&splits.val)?;
    let test = pick(&splits.test)?;
    let train = if splits.train.is_empty() {
        records
            .iter()
            .filter(|r| !splits.val.contains(&r.video_id) && !splits.test.contains(&r.video_id))
            .cloned()
            .collect()
    } else {
        pick(&splits.train)?
    };
    Ok((train, val, test))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub loss: LossWeights,
    pub model: ModelConfig,
    pub splits: Splits,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            adam: AdamConfig::default(),
            seed: 0,
            loss: LossWeights::default(),
            model: ModelConfig::default(),
            splits: Splits::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        self.splits.validate()?;
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::config("invalid Adam hyper-parameters"));
        }
        Ok(())
    }
}

/// One row of the loss trace. Epoch 0 is the initialization.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-video training loss. For epoch 0 it is evaluated at the
    /// initial parameters; afterwards it is accumulated during the epoch.
    pub train_loss: f64,
    /// Mean wMAE over classes and horizons on the validation videos.
    pub val_wmae: Option<f64>,
    pub counts: FilterCounts,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best parameters by validation wMAE, or the last ones without a
    /// validation split.
    pub params: ModelParams,
    pub final_params: ModelParams,
    pub best_epoch: usize,
    pub trace: Vec<EpochStats>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0].train_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |s| s.train_loss)
    }

    pub fn write_trace(&self, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,val_wmae,inside,outside,predicted,early,undefined_terms")?;
        for s in &self.trace {
            let val = s.val_wmae.map_or("undefined".to_string(), |v| v.to_string());
            let c = &s.counts;
            writeln!(
                out,
                "{},{},{val},{},{},{},{},{}",
                s.epoch, s.train_loss, c.inside, c.outside, c.predicted, c.early, c.undefined_terms
            )?;
        }
        Ok(())
    }
}

struct Prepared {
    id: String,
    seq: GraphSequence,
    target: AnticipationTarget,
    /// `target` in prediction layout, `T × H × C`.
    layout: Tensor,
}

fn prepare(records: &[VideoRecord], task: &TaskSpec, cfg: &ModelConfig, roster: &NodeRoster) -> Result<Vec<Prepared>> {
    records
        .iter()
        .map(|r| {
            let target = task.targets(r, &cfg.horizons)?;
            Ok(Prepared {
                id: r.video_id.clone(),
                seq: r.sequence(roster)?,
                layout: target.to_prediction_layout(),
                target,
            })
        })
        .collect()
}

fn step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    video: &Prepared,
    cfg: &TrainConfig,
    topology: &GraphTopology,
    trained: &[f64],
) -> Result<(f64, FilterCounts)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, true)?;
    let fwd = forward_on_tape(&mut tape, &vars, &cfg.model, topology, &video.seq)?;
    let (loss, counts) = loss_on_tape(
        &mut tape,
        &fwd.predictions,
        &video.layout,
        &cfg.model.horizons,
        trained,
        &cfg.loss,
    )?;
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Err(Error::numeric(format!("loss is {value}")));
    }
    let mut grads = tape.backward(loss)?;
    let g: Vec<Tensor> = vars
        .in_order()
        .iter()
        .zip(params.tensors())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    adam.step(params.tensors_mut(), &g)?;
    Ok((value, counts))
}

fn mean_loss(videos: &[Prepared], params: &ModelParams, cfg: &TrainConfig, topology: &GraphTopology, trained: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for v in videos {
        let preds = model_forward(&v.seq, params, &cfg.model, topology)?;
        total += training_loss(&preds, &v.target, &cfg.loss, trained)?;
    }
    Ok(total / videos.len() as f64)
}

/// Trains on `train` and selects the checkpoint by validation wMAE.
pub fn train(train: &[VideoRecord], val: &[VideoRecord], task: &TaskSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("no training videos"));
    }
    let roster = NodeRoster::cholec80();
    let topology = GraphTopology::build(roster.clone(), cfg.model.topology, &cfg.model.hubs)?;
    let mut params = ModelParams::init(&cfg.model, cfg.seed)?;
    check_compatible(&params, &cfg.model, task, &roster)?;
    let videos = prepare(train, task, &cfg.model, &roster)?;
    let trained = cfg.model.trained_horizons();

    let validate = |p: &ModelParams| -> Result<Option<f64>> {
        if val.is_empty() {
            return Ok(None);
        }
        Ok(batch_report(val, p, &cfg.model, &topology, task)?.mean_over_horizons(Metric::WMae))
    };

    let mut trace = vec![EpochStats {
        epoch: 0,
        train_loss: mean_loss(&videos, &params, cfg, &topology, &trained)?,
        val_wmae: validate(&params)?,
        counts: FilterCounts::default(),
    }];
    let mut best = (trace[0].val_wmae, 0usize, params.clone());

    let mut adam = AdamState::new(cfg.adam, params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..videos.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut counts = FilterCounts::default();
        for &i in &order {
            let (loss, c) = step(&mut params, &mut adam, &videos[i], cfg, &topology, &trained).map_err(|e| match e {
                Error::Numeric(m) => Error::numeric(format!(
                    "training diverged at epoch {epoch}, video {}: {m}",
                    videos[i].id
                )),
                other => other,
            })?;
            total += loss;
            counts.inside += c.inside;
            counts.outside += c.outside;
            counts.predicted += c.predicted;
            counts.early += c.early;
            counts.undefined_terms += c.undefined_terms;
        }
        let stats = EpochStats {
            epoch,
            train_loss: total / videos.len() as f64,
            val_wmae: validate(&params)?,
            counts,
        };
        let level = if epoch % 10 == 0 || epoch == cfg.epochs {
            log::Level::Info
        } else {
            log::Level::Debug
        };
        log::log!(
            level,
            "epoch {epoch}: loss {:.5}, val wMAE {}",
            stats.train_loss,
            stats.val_wmae.map_or("undefined".into(), |v| format!("{v:.4}"))
        );
        if let Some(v) = stats.val_wmae {
            if best.0.is_none_or(|b| v < b) {
                best = (Some(v), epoch, params.clone());
            }
        }
        trace.push(stats);
    }
    let (selected, best_epoch) = if val.is_empty() || best.0.is_none() {
        (params.clone(), cfg.epochs)
    } else {
        (best.2, best.1)
    };
    Ok(TrainOutcome {
        params: selected,
        final_params: params,
        best_epoch,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{generate_synthetic, SyntheticSpec};

    fn tiny() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            model: ModelConfig {
                gc_channels: 4,
                tcn_channels: 4,
                tcn_layers: 3,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn videos() -> Vec<VideoRecord> {
        generate_synthetic(&SyntheticSpec {
            videos: 3,
            min_frames: 40,
            max_frames: 60,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let cfg = TrainConfig { epochs: 0, ..tiny() };
        let out = train(&videos(), &[], &TaskSpec::instrument(), &cfg).unwrap();
        assert_eq!(out.params, ModelParams::init(&cfg.model, cfg.seed).unwrap());
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn seeded_runs_repeat() {
        let v = videos();
        let a = train(&v[..2], &v[2..], &TaskSpec::instrument(), &tiny()).unwrap();
        let b = train(&v[..2], &v[2..], &TaskSpec::instrument(), &tiny()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        assert!(a.trace.iter().all(|s| s.val_wmae.is_some()));
    }

    #[test]
    fn class_mismatch_is_config_error() {
        let mut cfg = tiny();
        cfg.model.num_classes = 6;
        assert!(matches!(
            train(&videos(), &[], &TaskSpec::instrument(), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn splits_must_be_disjoint_and_known() {
        let v = videos();
        let s = Splits {
            val: vec!["synth001".into()],
            test: vec!["synth001".into()],
            ..Splits::default()
        };
        assert!(split_records(&v, &s).is_err());
        let s = Splits {
            val: vec!["synth009".into()],
            ..Splits::default()
        };
        assert!(split_records(&v, &s).is_err());
        let s = Splits {
            test: vec!["synth002".into()],
            ..Splits::default()
        };
        let (tr, va, te) = split_records(&v, &s).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (2, 0, 1));
    }
}
