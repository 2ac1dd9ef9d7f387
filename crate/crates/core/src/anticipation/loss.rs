//! Composite training loss:
//! `Σ_stage Σ_h Σ_class α·wMAE + β·inMAE + γ·pMAE + δ·eMAE`.
//!
//! Each metric is a mean of `|pred − gt|` over a filter set, so the whole
//! loss is a weighted L1 with per-frame weights. The pMAE filter is taken
//! from the current predictions and held fixed while differentiating.
//! Undefined terms contribute zero.

use crate::anticipation::metrics::{e_filter, e_mae, in_filter, in_mae, out_filter, p_filter, p_mae, w_mae};
use crate::anticipation::AnticipationTarget;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.9,
            beta: 0.1,
            gamma: 0.8,
            delta: 0.3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.delta];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("loss weights must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Frames selected by each filter, summed over classes, horizons and
/// stages, plus the number of metric terms skipped as undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FilterCounts {
    pub inside: usize,
    pub outside: usize,
    pub predicted: usize,
    pub early: usize,
    pub undefined_terms: usize,
}

impl FilterCounts {
    fn merge(&mut self, other: FilterCounts) {
        self.inside += other.inside;
        self.outside += other.outside;
        self.predicted += other.predicted;
        self.early += other.early;
        self.undefined_terms += other.undefined_terms;
    }
}

/// Per-element loss weights for one stage's predictions.
#[derive(Clone, Debug)]
pub struct LossPlan {
    /// Same layout as the predictions, `T × H × C`.
    pub weights: Tensor,
    pub counts: FilterCounts,
}

fn check_layout(pred: &Tensor, target: &Tensor, horizons: &[f64]) -> Result<(usize, usize, usize)> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "predictions {:?} vs targets {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let [t, h, c] = target.shape()[..] else {
        return Err(Error::dim("targets must be T×H×C"));
    };
    if h != horizons.len() {
        return Err(Error::dim(format!("{h} target horizons, {} configured", horizons.len())));
    }
    if !pred.is_finite() {
        return Err(Error::numeric("NaN or infinity in predictions"));
    }
    Ok((t, h, c))
}

/// Weights such that `Σ w·|pred − gt|` equals the composite loss.
pub fn loss_plan(pred: &Tensor, target: &Tensor, horizons: &[f64], trained: &[f64], lw: &LossWeights) -> Result<LossPlan> {
    let (t, hn, c) = check_layout(pred, target, horizons)?;
    let mut weights = Tensor::zeros(&[t, hn, c]);
    let mut counts = FilterCounts::default();
    let idx = |f: usize, hi: usize, ci: usize| (f * hn + hi) * c + ci;
    for (hi, &h) in horizons.iter().enumerate() {
        if !trained.contains(&h) {
            continue;
        }
        for ci in 0..c {
            let mut n_in = 0usize;
            let mut n_out = 0usize;
            let mut n_p = 0usize;
            let mut n_e = 0usize;
            for f in 0..t {
                let g = target.data()[idx(f, hi, ci)];
                let p = pred.data()[idx(f, hi, ci)];
                n_in += in_filter(g, h) as usize;
                n_out += out_filter(g, h) as usize;
                n_p += p_filter(p, h) as usize;
                n_e += e_filter(g, h) as usize;
            }
            let w_defined = n_in > 0 && n_out > 0;
            counts.undefined_terms +=
                (!w_defined) as usize + (n_in == 0) as usize + (n_p == 0) as usize + (n_e == 0) as usize;
            if w_defined {
                counts.outside += n_out;
            }
            counts.inside += n_in;
            counts.predicted += n_p;
            counts.early += n_e;
            for f in 0..t {
                let g = target.data()[idx(f, hi, ci)];
                let p = pred.data()[idx(f, hi, ci)];
                let mut w = 0.0;
                if in_filter(g, h) {
                    w += lw.beta / n_in as f64;
                    if w_defined {
                        w += 0.5 * lw.alpha / n_in as f64;
                    }
                }
                if w_defined && out_filter(g, h) {
                    w += 0.5 * lw.alpha / n_out as f64;
                }
                if p_filter(p, h) {
                    w += lw.gamma / n_p as f64;
                }
                if e_filter(g, h) {
                    w += lw.delta / n_e as f64;
                }
                weights.data_mut()[idx(f, hi, ci)] = w;
            }
        }
    }
    Ok(LossPlan { weights, counts })
}

/// Loss value computed metric by metric from per-stage `T × H × C`
/// predictions.
pub fn training_loss(preds: &[Tensor], target: &AnticipationTarget, lw: &LossWeights, trained: &[f64]) -> Result<f64> {
    let gt = target.to_prediction_layout();
    let mut total = 0.0;
    for pred in preds {
        let (t, hn, c) = check_layout(pred, &gt, &target.horizons)?;
        for (hi, &h) in target.horizons.iter().enumerate() {
            if !trained.contains(&h) {
                continue;
            }
            for ci in 0..c {
                let col = |x: &Tensor| -> Vec<f64> { (0..t).map(|f| x.data()[(f * hn + hi) * c + ci]).collect() };
                let (p, g) = (col(pred), col(&gt));
                total += lw.alpha * w_mae(&p, &g, h).unwrap_or(0.0)
                    + lw.beta * in_mae(&p, &g, h).unwrap_or(0.0)
                    + lw.gamma * p_mae(&p, &g, h).unwrap_or(0.0)
                    + lw.delta * e_mae(&p, &g, h).unwrap_or(0.0);
            }
        }
    }
    Ok(total)
}

/// Records the loss over every stage prediction on `tape`.
/// `target` is in prediction layout (`T × H × C`).
pub fn loss_on_tape(
    tape: &mut Tape,
    preds: &[Var],
    target: &Tensor,
    horizons: &[f64],
    trained: &[f64],
    lw: &LossWeights,
) -> Result<(Var, FilterCounts)> {
    let mut counts = FilterCounts::default();
    let mut total: Option<Var> = None;
    for &p in preds {
        let pv = tape.value(p).clone();
        let plan = loss_plan(&pv, target, horizons, trained, lw)?;
        counts.merge(plan.counts);
        let shape = pv.shape().to_vec();
        let term = tape.weighted_abs(p, target.clone().reshape(&shape)?, plan.weights.reshape(&shape)?)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    let total = match total {
        Some(v) => v,
        None => tape.constant(Tensor::scalar(0.0))?,
    };
    Ok((total, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anticipation::AnticipationTarget;

    fn single(values: &[f64], h: f64) -> AnticipationTarget {
        AnticipationTarget {
            horizons: vec![h],
            values: vec![Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()],
        }
    }

    fn layout(values: &[f64]) -> Tensor {
        Tensor::new(vec![values.len(), 1, 1], values.to_vec()).unwrap()
    }

    #[test]
    fn worked_example_is_042() {
        let tgt = single(&[2.0, 1.0, 0.15, 0.0], 2.0);
        let pred = layout(&[1.8, 1.2, 0.35, 0.2]);
        let l = training_loss(&[pred.clone()], &tgt, &LossWeights::default(), &[2.0]).unwrap();
        assert!((l - 0.42).abs() < 1e-12, "{l}");

        let plan = loss_plan(&pred, &tgt.to_prediction_layout(), &[2.0], &[2.0], &LossWeights::default()).unwrap();
        let via_weights: f64 = plan
            .weights
            .data()
            .iter()
            .zip(pred.data().iter().zip(tgt.to_prediction_layout().data()))
            .map(|(w, (p, g))| w * (p - g).abs())
            .sum();
        assert!((via_weights - 0.42).abs() < 1e-12);
        // Frame with gt = 0 carries no weight.
        assert_eq!(plan.weights.data()[3], 0.0);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let tgt = single(&[2.0, 1.0, 0.15, 0.0], 2.0);
        let l = training_loss(&[tgt.to_prediction_layout()], &tgt, &LossWeights::default(), &[2.0]).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn untrained_horizon_contributes_nothing() {
        let tgt = single(&[2.0, 1.0, 0.15, 0.0], 2.0);
        let pred = layout(&[1.8, 1.2, 0.35, 0.2]);
        assert_eq!(training_loss(&[pred], &tgt, &LossWeights::default(), &[]).unwrap(), 0.0);
    }

    #[test]
    fn nan_is_rejected() {
        let tgt = single(&[2.0, 1.0], 2.0);
        let pred = layout(&[f64::NAN, 1.0]);
        assert!(matches!(
            training_loss(&[pred], &tgt, &LossWeights::default(), &[2.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn tape_loss_matches_metric_route() {
        let tgt = single(&[2.0, 1.0, 0.15, 0.0, 0.5], 2.0);
        let pred = layout(&[1.8, 1.2, 0.35, 0.2, 1.0]);
        let mut tape = Tape::new();
        let p = tape.leaf(pred.clone().reshape(&[5, 1]).unwrap(), true).unwrap();
        let (loss, counts) = loss_on_tape(
            &mut tape,
            &[p, p],
            &tgt.to_prediction_layout(),
            &[2.0],
            &[2.0],
            &LossWeights::default(),
        )
        .unwrap();
        let direct = training_loss(&[pred.clone(), pred], &tgt, &LossWeights::default(), &[2.0]).unwrap();
        assert!((tape.value(loss).data()[0] - direct).abs() < 1e-12);
        assert_eq!(counts.inside, 2 * 3);
        assert_eq!(counts.outside, 2);
    }
}
