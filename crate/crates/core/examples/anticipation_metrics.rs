//! Remaining-time targets for one instrument track and the four error
//! measures on a hand-made prediction.
//!
//! ```text
//! cargo run --example anticipation_metrics
//! ```

use workflow_anticipation::anticipation::{
    e_mae, in_mae, p_mae, remaining_time, training_loss, w_mae, AnticipationTarget, Interval, LossWeights,
};
use workflow_anticipation::numerics::Tensor;

fn show(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

fn main() -> workflow_anticipation::Result<()> {
    // Present from frame 300 to 360 of a 500-frame video.
    let h = 2.0;
    let r = remaining_time(&[Interval::new(300, 360)], 500, h)?;
    for t in [1, 180, 240, 299, 300, 330, 361, 400] {
        println!("t={t:>3}  remaining {:.3} min", r[t - 1]);
    }

    let gt = [2.0, 1.0, 0.15, 0.0];
    let pred = [1.8, 1.2, 0.35, 0.2];
    println!("\ngt {gt:?}\npred {pred:?}  h={h}");
    println!("inMAE {}", show(in_mae(&pred, &gt, h)));
    println!("wMAE  {}", show(w_mae(&pred, &gt, h)));
    println!("pMAE  {}", show(p_mae(&pred, &gt, h)));
    println!("eMAE  {}", show(e_mae(&pred, &gt, h)));

    let target = AnticipationTarget {
        horizons: vec![h],
        values: vec![Tensor::new(vec![4, 1], gt.to_vec())?],
    };
    let stage = Tensor::new(vec![4, 1, 1], pred.to_vec())?;
    let loss = training_loss(&[stage], &target, &LossWeights::default(), &[h])?;
    println!("weighted loss {loss:.4}");
    Ok(())
}
