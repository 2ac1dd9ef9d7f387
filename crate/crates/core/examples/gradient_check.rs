//! Checks the reverse-mode gradient of the full training loss against
//! central differences on a tiny random network.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workflow_anticipation::anticipation::{loss_on_tape, LossWeights};
use workflow_anticipation::graph::{GraphSequence, GraphTopology, NodeRoster, TopologyMode};
use workflow_anticipation::network::{forward_on_tape, ModelConfig, ModelParams};
use workflow_anticipation::numerics::{Tape, Tensor};

fn main() -> workflow_anticipation::Result<()> {
    let (t, n, c) = (12, 4, 2);
    let config = ModelConfig {
        nodes: n,
        num_classes: c,
        gc_channels: 3,
        tcn_layers: 2,
        tcn_channels: 4,
        ..ModelConfig::default()
    };
    let topology = GraphTopology::build(NodeRoster::new(["center", "a", "b", "c"])?, TopologyMode::PriorKnowledge, &[0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = GraphSequence::from_tensor(Tensor::new(vec![t, n, 4], (0..t * n * 4).map(|_| rng.gen()).collect())?)?;
    let h = &config.horizons;
    let target = Tensor::new(
        vec![t, h.len(), c],
        (0..t * h.len() * c).map(|i| rng.gen_range(0.0..h[(i / c) % h.len()])).collect(),
    )?;
    let lw = LossWeights::default();
    let loss = |params: &ModelParams, trainable: bool| -> workflow_anticipation::Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape, trainable)?;
        let fwd = forward_on_tape(&mut tape, &vars, &config, &topology, &seq)?;
        let (l, _) = loss_on_tape(&mut tape, &fwd.predictions, &target, h, h, &lw)?;
        let value = tape.value(l).data()[0];
        let grads = if trainable {
            let g = tape.backward(l)?;
            vars.in_order().iter().map(|&v| g.get(v).cloned().unwrap()).collect()
        } else {
            Vec::new()
        };
        Ok((value, grads))
    };

    let mut params = ModelParams::init(&config, 3)?;
    let (value, grads) = loss(&params, true)?;
    println!("loss {value:.6}, {} parameters", params.parameter_count());
    let eps = 1e-6;
    for k in 0..grads.len() {
        let mut worst = 0.0f64;
        for i in 0..grads[k].len() {
            let orig = params.tensors()[k].data()[i];
            params.tensors_mut()[k].data_mut()[i] = orig + eps;
            let plus = loss(&params, false)?.0;
            params.tensors_mut()[k].data_mut()[i] = orig - eps;
            let minus = loss(&params, false)?.0;
            params.tensors_mut()[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max((grads[k].data()[i] - numeric).abs());
        }
        println!("{:<28} max |analytic - numeric| {worst:.2e}", params.names()[k]);
    }
    Ok(())
}
