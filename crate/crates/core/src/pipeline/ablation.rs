//! Component ablation grid: graph convolution, prior-knowledge topology,
//! temporal network and per-horizon learning, switched on and off.

use std::io::Write;

use crate::anticipation::metrics::Metric;
use crate::anticipation::MetricReport;
use crate::error::{Error, Result};
use crate::graph::TopologyMode;
use crate::network::ModelConfig;
use crate::pipeline::{evaluate, train, TaskSpec, TrainConfig, VideoRecord};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AblationRow {
    pub use_gc: bool,
    /// Prior-knowledge topology; off means the complete graph.
    pub gpk: bool,
    pub use_tcn: bool,
    /// Horizon learning per configured horizon. All off trains the longest
    /// horizon only and clips it at the shorter ones.
    pub horizon_learning: Vec<bool>,
}

impl AblationRow {
    pub fn is_full(&self) -> bool {
        self.use_gc && self.gpk && self.use_tcn && self.horizon_learning.iter().all(|&b| b)
    }

    pub fn apply(&self, base: &ModelConfig) -> Result<ModelConfig> {
        if self.horizon_learning.len() != base.horizons.len() {
            return Err(Error::config(format!(
                "row has {} horizon switches for {} horizons",
                self.horizon_learning.len(),
                base.horizons.len()
            )));
        }
        Ok(ModelConfig {
            use_gc: self.use_gc,
            use_tcn: self.use_tcn,
            topology: if self.gpk {
                TopologyMode::PriorKnowledge
            } else {
                TopologyMode::FullyConnected
            },
            enabled_horizons: base
                .horizons
                .iter()
                .zip(&self.horizon_learning)
                .filter(|(_, &on)| on)
                .map(|(&h, _)| h)
                .collect(),
            ..base.clone()
        })
    }
}

/// The nine standard rows for three horizons: GC, GC+GPK, TC, GC+TC,
/// GC+GPK+TC, then one row per single horizon, then everything.
pub fn standard_rows(horizons: usize) -> Vec<AblationRow> {
    let row = |gc, gpk, tc, hl: Vec<bool>| AblationRow {
        use_gc: gc,
        gpk,
        use_tcn: tc,
        horizon_learning: hl,
    };
    let none = vec![false; horizons];
    let mut rows = vec![
        row(true, false, false, none.clone()),
        row(true, true, false, none.clone()),
        row(false, false, true, none.clone()),
        row(true, false, true, none.clone()),
        row(true, true, true, none.clone()),
    ];
    for h in 0..horizons {
        let mut hl = none.clone();
        hl[h] = true;
        rows.push(row(true, true, true, hl));
    }
    rows.push(row(true, true, true, vec![true; horizons]));
    rows
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub row: AblationRow,
    pub report: MetricReport,
    pub final_loss: f64,
}

#[derive(Clone, Debug)]
pub struct AblationTable {
    pub horizons: Vec<f64>,
    pub results: Vec<AblationResult>,
}

impl AblationTable {
    /// Class-averaged inMAE of row `i` at horizon `h`.
    pub fn in_mae(&self, i: usize, h: f64) -> Option<f64> {
        self.results[i].report.aggregate(h, Metric::InMae)
    }

    pub fn mean_in_mae(&self, i: usize) -> Option<f64> {
        self.results[i].report.mean_over_horizons(Metric::InMae)
    }

    pub fn reference(&self) -> Option<usize> {
        self.results.iter().position(|r| r.row.is_full())
    }

    /// Index of the row with the lowest mean inMAE; undefined rows lose.
    pub fn best(&self) -> Option<usize> {
        (0..self.results.len())
            .filter_map(|i| self.mean_in_mae(i).map(|m| (i, m)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut head = vec!["GC".to_string(), "GPK".into(), "TC".into()];
        head.extend(self.horizons.iter().map(|h| format!("HL_{h}")));
        head.extend(self.horizons.iter().map(|h| format!("inMAE_h{h}")));
        head.extend(["mean_inMAE".to_string(), "reference".into()]);
        writeln!(out, "{}", head.join(","))?;
        let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
        for (i, r) in self.results.iter().enumerate() {
            let flag = |b: bool| if b { "1" } else { "0" }.to_string();
            let mut cells = vec![flag(r.row.use_gc), flag(r.row.gpk), flag(r.row.use_tcn)];
            cells.extend(r.row.horizon_learning.iter().map(|&b| flag(b)));
            cells.extend(self.horizons.iter().map(|&h| fmt(self.in_mae(i, h))));
            cells.push(fmt(self.mean_in_mae(i)));
            cells.push(flag(r.row.is_full()));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Trains each row on `train_set` (selecting on `val_set`) and evaluates
/// it online on `eval_set`. Rows share the seed and every other setting.
pub fn run_ablation(
    train_set: &[VideoRecord],
    val_set: &[VideoRecord],
    eval_set: &[VideoRecord],
    task: &TaskSpec,
    base: &TrainConfig,
    rows: &[AblationRow],
    jobs: usize,
) -> Result<AblationTable> {
    let mut results = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cfg = TrainConfig {
            model: row.apply(&base.model)?,
            ..base.clone()
        };
        log::info!("ablation row {}/{}: {row:?}", i + 1, rows.len());
        let outcome = train(train_set, val_set, task, &cfg)?;
        let eval = evaluate(eval_set, &outcome.params, &cfg.model, task, jobs)?;
        results.push(AblationResult {
            row: row.clone(),
            report: eval.report,
            final_loss: outcome.final_loss(),
        });
    }
    Ok(AblationTable {
        horizons: base.model.horizons.clone(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_rows_with_one_reference() {
        let rows = standard_rows(3);
        assert_eq!(rows.len(), 9);
        assert_eq!(rows.iter().filter(|r| r.is_full()).count(), 1);
        assert!(rows[8].is_full());
        let gpk_off = rows[0].apply(&ModelConfig::default()).unwrap();
        assert_eq!(gpk_off.topology, TopologyMode::FullyConnected);
        assert!(gpk_off.enabled_horizons.is_empty());
        let tc_only = rows[2].apply(&ModelConfig::default()).unwrap();
        assert!(!tc_only.use_gc && tc_only.use_tcn);
        let hl2 = rows[5].apply(&ModelConfig::default()).unwrap();
        assert_eq!(hl2.enabled_horizons, vec![2.0]);
        assert_eq!(hl2.trained_horizons(), vec![2.0]);
    }
}
