//! Whole-sequence forward pass built on the differentiation tape.

use crate::error::{Error, Result};
use crate::graph::{GraphSequence, GraphTopology};
use crate::network::params::{self, ModelParams, ParamVars};
use crate::network::ModelConfig;
use crate::numerics::{Tape, Tensor, Var};

/// One graph-convolution layer on `(T·N) × Cin` rows:
/// `Â · (X · W) + b`, then ReLU when `activate`.
pub(crate) fn gc_layer(tape: &mut Tape, x: Var, weight: Var, bias: Option<Var>, adj: &Tensor, activate: bool) -> Result<Var> {
    let xw = tape.matmul(x, weight)?;
    let mut out = tape.node_mix(xw, adj)?;
    if let Some(b) = bias {
        out = tape.add_bias(out, b)?;
    }
    if activate {
        out = tape.relu(out)?;
    }
    Ok(out)
}

/// Tape handles for one temporal stage.
pub(crate) struct StageVars {
    input_weight: Var,
    input_bias: Var,
    layers: Vec<[Var; 4]>,
}

impl StageVars {
    fn lookup(vars: &ParamVars, stage: usize, layers: usize) -> Result<Self> {
        Ok(StageVars {
            input_weight: vars.get(&params::stage_input_weight(stage))?,
            input_bias: vars.get(&params::stage_input_bias(stage))?,
            layers: (0..layers)
                .map(|l| {
                    Ok([
                        vars.get(&params::layer_param(stage, l, "conv.weight"))?,
                        vars.get(&params::layer_param(stage, l, "conv.bias"))?,
                        vars.get(&params::layer_param(stage, l, "proj.weight"))?,
                        vars.get(&params::layer_param(stage, l, "proj.bias"))?,
                    ])
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// 1×1 input projection, then residual layers
/// `x ← x + P(ReLU(conv_causal(x, dilation = 2^l)))`.
pub(crate) fn tcn_stage(tape: &mut Tape, x: Var, stage: &StageVars) -> Result<Var> {
    let projected = tape.matmul(x, stage.input_weight)?;
    let mut h = tape.add_bias(projected, stage.input_bias)?;
    for (l, [cw, cb, pw, pb]) in stage.layers.iter().enumerate() {
        let conv = tape.conv1d_causal(h, *cw, *cb, ModelConfig::dilation(l))?;
        let act = tape.relu(conv)?;
        let proj = tape.matmul(act, *pw)?;
        let branch = tape.add_bias(proj, *pb)?;
        h = tape.add(h, branch)?;
    }
    Ok(h)
}

/// Affine map to `T × (H·C)` followed by per-horizon `h · sigmoid`.
pub(crate) fn head(tape: &mut Tape, feature: Var, weight: Var, bias: Var, scales: Vec<f64>) -> Result<Var> {
    let lin = tape.matmul(feature, weight)?;
    let lin = tape.add_bias(lin, bias)?;
    tape.scaled_sigmoid(lin, scales)
}

/// Handles produced by [`forward_on_tape`].
pub struct ForwardVars {
    /// Per stage, `T × (H·C)` predictions.
    pub predictions: Vec<Var>,
    /// Per stage, the feature fed to the head.
    pub features: Vec<Var>,
}

fn check_inputs(seq: &GraphSequence, config: &ModelConfig, topology: &GraphTopology) -> Result<()> {
    if seq.frames() == 0 {
        return Err(Error::data("sequence has no frames"));
    }
    if seq.nodes() != config.nodes || topology.node_count() != config.nodes {
        return Err(Error::dim(format!(
            "sequence has {} nodes, topology {}, configuration {}",
            seq.nodes(),
            topology.node_count(),
            config.nodes
        )));
    }
    if config.in_channels != 4 {
        return Err(Error::config("node features have 4 channels"));
    }
    Ok(())
}

/// Full network on `tape`, reading parameters through `vars`.
pub fn forward_on_tape(
    tape: &mut Tape,
    vars: &ParamVars,
    config: &ModelConfig,
    topology: &GraphTopology,
    seq: &GraphSequence,
) -> Result<ForwardVars> {
    check_inputs(seq, config, topology)?;
    let t = seq.frames();
    let n = config.nodes;
    let input = tape.constant(seq.features().clone())?;
    let mut x = tape.reshape(input, &[t * n, config.in_channels])?;
    if config.use_gc {
        for l in 0..config.gc_layers {
            let w = vars.get(&params::gc_weight(l))?;
            let b = vars.get(&params::gc_bias(l))?;
            x = gc_layer(tape, x, w, Some(b), &topology.normalized, l + 1 < config.gc_layers)?;
        }
    }
    let flat = tape.reshape(x, &[t, config.flattened_width()])?;

    let head_w = vars.get(params::HEAD_WEIGHT)?;
    let head_b = vars.get(params::HEAD_BIAS)?;
    let scales = config.output_scales();
    let mut out = ForwardVars {
        predictions: Vec::new(),
        features: Vec::new(),
    };
    if !config.use_tcn {
        let pred = head(tape, flat, head_w, head_b, scales)?;
        out.predictions.push(pred);
        out.features.push(flat);
        return Ok(out);
    }
    let mut stage_in = flat;
    for s in 0..config.tcn_stages {
        let stage = StageVars::lookup(vars, s, config.tcn_layers)?;
        let feature = tcn_stage(tape, stage_in, &stage)?;
        let pred = head(tape, feature, head_w, head_b, scales.clone())?;
        stage_in = if config.feed_predictions { pred } else { feature };
        out.predictions.push(pred);
        out.features.push(feature);
    }
    Ok(out)
}

/// Per-stage predictions, each `T × H × C`.
pub fn model_forward(
    seq: &GraphSequence,
    params: &ModelParams,
    config: &ModelConfig,
    topology: &GraphTopology,
) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false)?;
    let fwd = forward_on_tape(&mut tape, &vars, config, topology, seq)?;
    let t = seq.frames();
    fwd.predictions
        .iter()
        .map(|&v| {
            tape.value(v)
                .clone()
                .reshape(&[t, config.horizon_count(), config.num_classes])
        })
        .collect()
}

/// Graph convolution over a `T × N × Cin` tensor.
pub fn gc_forward(
    features: &Tensor,
    topology: &GraphTopology,
    weight: &Tensor,
    bias: Option<&Tensor>,
    activate: bool,
) -> Result<Tensor> {
    let [t, n, cin] = features.shape()[..] else {
        return Err(Error::dim(format!("expected T×N×C features, got {:?}", features.shape())));
    };
    if n != topology.node_count() {
        return Err(Error::dim(format!(
            "features have {n} nodes, topology has {}",
            topology.node_count()
        )));
    }
    let cout = weight.dims2()?.1;
    let mut tape = Tape::new();
    let x = tape.constant(features.clone().reshape(&[t * n, cin])?)?;
    let w = tape.constant(weight.clone())?;
    let b = bias.map(|b| tape.constant(b.clone())).transpose()?;
    let out = gc_layer(&mut tape, x, w, b, &topology.normalized, activate)?;
    tape.value(out).clone().reshape(&[t, n, cout])
}

/// `T × N × C` → `T × (N·C)`, node-major within a frame.
pub fn flatten_nodes(x: &Tensor) -> Result<Tensor> {
    let [t, n, c] = x.shape()[..] else {
        return Err(Error::dim(format!("expected T×N×C, got {:?}", x.shape())));
    };
    x.clone().reshape(&[t, n * c])
}

pub fn unflatten_nodes(x: &Tensor, nodes: usize) -> Result<Tensor> {
    let (t, width) = x.dims2()?;
    if nodes == 0 || width % nodes != 0 {
        return Err(Error::dim(format!("{width} columns do not split into {nodes} nodes")));
    }
    x.clone().reshape(&[t, nodes, width / nodes])
}

/// One temporal stage of `params` applied to a `T × Cin` input.
pub fn tcn_stage_forward(x: &Tensor, params: &ModelParams, config: &ModelConfig, stage: usize) -> Result<Tensor> {
    let (t, _) = x.dims2()?;
    if t == 0 {
        return Err(Error::data("temporal stage needs at least one frame"));
    }
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false)?;
    let input = tape.constant(x.clone())?;
    let sv = StageVars::lookup(&vars, stage, config.tcn_layers)?;
    let out = tcn_stage(&mut tape, input, &sv)?;
    Ok(tape.value(out).clone())
}

/// Multi-horizon head on a `T × F` feature, returning `T × H × C`.
pub fn head_forward(
    feature: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    horizons: &[f64],
    classes: usize,
) -> Result<Tensor> {
    let (t, _) = feature.dims2()?;
    let scales: Vec<f64> = horizons
        .iter()
        .flat_map(|&h| std::iter::repeat_n(h, classes))
        .collect();
    let mut tape = Tape::new();
    let f = tape.constant(feature.clone())?;
    let w = tape.constant(weight.clone())?;
    let b = tape.constant(bias.clone())?;
    let out = head(&mut tape, f, w, b, scales)?;
    tape.value(out).clone().reshape(&[t, horizons.len(), classes])
}
