//! Filtered mean-absolute-error metrics.
//!
//! Boundary conventions (thresholds are `h / 10` and `9h / 10`):
//! - inMAE: `0 < gt < h`
//! - wMAE: mean of the inMAE set and the out-of-horizon set `gt == h`
//! - pMAE: `h/10 < pred < 9h/10`
//! - eMAE: `0 < gt ≤ h/10`
//!
//! A metric whose filter selects no frame is undefined (`None`).

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    InMae,
    WMae,
    PMae,
    EMae,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::InMae, Metric::WMae, Metric::PMae, Metric::EMae];

    pub fn name(self) -> &'static str {
        match self {
            Metric::InMae => "inMAE",
            Metric::WMae => "wMAE",
            Metric::PMae => "pMAE",
            Metric::EMae => "eMAE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn low_threshold(h: f64) -> f64 {
    h / 10.0
}

pub fn high_threshold(h: f64) -> f64 {
    9.0 * h / 10.0
}

pub fn in_filter(gt: f64, h: f64) -> bool {
    gt > 0.0 && gt < h
}

pub fn out_filter(gt: f64, h: f64) -> bool {
    gt == h
}

pub fn p_filter(pred: f64, h: f64) -> bool {
    pred > low_threshold(h) && pred < high_threshold(h)
}

pub fn e_filter(gt: f64, h: f64) -> bool {
    gt > 0.0 && gt <= low_threshold(h)
}

/// Mean absolute error over frames where `keep(pred, gt)`, with the frame count.
fn filtered_mae(pred: &[f64], gt: &[f64], keep: impl Fn(f64, f64) -> bool) -> (Option<f64>, usize) {
    assert_eq!(pred.len(), gt.len(), "prediction and ground truth lengths differ");
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        if keep(p, g) {
            sum += (p - g).abs();
            n += 1;
        }
    }
    if n == 0 {
        (None, 0)
    } else {
        (Some(sum / n as f64), n)
    }
}

pub fn in_mae(pred: &[f64], gt: &[f64], h: f64) -> Option<f64> {
    filtered_mae(pred, gt, |_, g| in_filter(g, h)).0
}

pub fn w_mae(pred: &[f64], gt: &[f64], h: f64) -> Option<f64> {
    let inside = in_mae(pred, gt, h)?;
    let outside = filtered_mae(pred, gt, |_, g| out_filter(g, h)).0?;
    Some((inside + outside) / 2.0)
}

pub fn p_mae(pred: &[f64], gt: &[f64], h: f64) -> Option<f64> {
    filtered_mae(pred, gt, |p, _| p_filter(p, h)).0
}

pub fn e_mae(pred: &[f64], gt: &[f64], h: f64) -> Option<f64> {
    filtered_mae(pred, gt, |_, g| e_filter(g, h)).0
}

/// Value and filter size of one metric. For wMAE the count is the number of
/// frames in either of its two sets.
pub fn metric_with_count(metric: Metric, pred: &[f64], gt: &[f64], h: f64) -> (Option<f64>, usize) {
    match metric {
        Metric::InMae => filtered_mae(pred, gt, |_, g| in_filter(g, h)),
        Metric::PMae => filtered_mae(pred, gt, |p, _| p_filter(p, h)),
        Metric::EMae => filtered_mae(pred, gt, |_, g| e_filter(g, h)),
        Metric::WMae => {
            let n = gt.iter().filter(|&&g| in_filter(g, h) || out_filter(g, h)).count();
            (w_mae(pred, gt, h), n)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricEntry {
    pub class: String,
    pub horizon: f64,
    pub metric: Metric,
    pub value: Option<f64>,
    pub frames: usize,
}

/// Metrics per (class, horizon), pooled over every evaluated frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub task: String,
    pub entries: Vec<MetricEntry>,
    /// Mean seconds per frame of online inference, when measured.
    pub latency_per_frame: Option<f64>,
}

impl MetricReport {
    /// `pred` and `gt` are `T × H × C` tensors over pooled frames.
    pub fn compute(
        task: &str,
        classes: &[String],
        horizons: &[f64],
        pred: &crate::numerics::Tensor,
        gt: &crate::numerics::Tensor,
    ) -> Result<Self> {
        if pred.shape() != gt.shape() {
            return Err(Error::dim(format!(
                "prediction {:?} vs ground truth {:?}",
                pred.shape(),
                gt.shape()
            )));
        }
        let [t, h, c] = pred.shape()[..] else {
            return Err(Error::dim("metric inputs must be T×H×C"));
        };
        if h != horizons.len() || c != classes.len() {
            return Err(Error::dim(format!(
                "{h} horizons × {c} classes, expected {} × {}",
                horizons.len(),
                classes.len()
            )));
        }
        let column = |x: &crate::numerics::Tensor, hi: usize, ci: usize| -> Vec<f64> {
            (0..t).map(|f| x.data()[(f * h + hi) * c + ci]).collect()
        };
        let mut entries = Vec::new();
        for (ci, class) in classes.iter().enumerate() {
            for (hi, &horizon) in horizons.iter().enumerate() {
                let p = column(pred, hi, ci);
                let g = column(gt, hi, ci);
                for metric in Metric::ALL {
                    let (value, frames) = metric_with_count(metric, &p, &g, horizon);
                    entries.push(MetricEntry {
                        class: class.clone(),
                        horizon,
                        metric,
                        value,
                        frames,
                    });
                }
            }
        }
        Ok(MetricReport {
            task: task.to_string(),
            entries,
            latency_per_frame: None,
        })
    }

    pub fn get(&self, class: &str, horizon: f64, metric: Metric) -> Option<&MetricEntry> {
        self.entries
            .iter()
            .find(|e| e.class == class && e.horizon == horizon && e.metric == metric)
    }

    /// Unweighted mean over classes of the defined values.
    pub fn aggregate(&self, horizon: f64, metric: Metric) -> Option<f64> {
        let vals: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.horizon == horizon && e.metric == metric)
            .filter_map(|e| e.value)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn horizons(&self) -> Vec<f64> {
        let mut hs: Vec<f64> = Vec::new();
        for e in &self.entries {
            if !hs.contains(&e.horizon) {
                hs.push(e.horizon);
            }
        }
        hs
    }

    /// Mean of the class-aggregated metric over all horizons; undefined
    /// horizons are skipped.
    pub fn mean_over_horizons(&self, metric: Metric) -> Option<f64> {
        let vals: Vec<f64> = self
            .horizons()
            .into_iter()
            .filter_map(|h| self.aggregate(h, metric))
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Writes `task,class,horizon,metric,value,n_frames`, per-class rows
    /// followed by `mean` rows; undefined values are written as `undefined`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "task,class,horizon,metric,value,n_frames")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.task,
                e.class,
                e.horizon,
                e.metric,
                fmt_value(e.value),
                e.frames
            )?;
        }
        for h in self.horizons() {
            for metric in Metric::ALL {
                let frames: usize = self
                    .entries
                    .iter()
                    .filter(|e| e.horizon == h && e.metric == metric)
                    .map(|e| e.frames)
                    .sum();
                writeln!(
                    out,
                    "{},mean,{},{},{},{}",
                    self.task,
                    h,
                    metric,
                    fmt_value(self.aggregate(h, metric)),
                    frames
                )?;
            }
        }
        if let Some(l) = self.latency_per_frame {
            writeln!(out, "{},all,all,latency_s,{l:.9},0", self.task)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:?}"),
        None => "undefined".to_string(),
    }
}
