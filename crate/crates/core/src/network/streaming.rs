//! Frame-by-frame inference.
//!
//! Each temporal layer keeps a ring buffer of its last `(K−1)·2^l + 1`
//! inputs, so memory does not grow with video length. Arithmetic goes
//! through the same row kernels as the batch path; outputs match it bit for
//! bit.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::GraphTopology;
use crate::network::params::{self, ModelParams};
use crate::network::ModelConfig;
use crate::numerics::ops;
use crate::numerics::Tensor;

struct LayerState<'a> {
    conv_w: &'a Tensor,
    conv_b: &'a Tensor,
    proj_w: &'a Tensor,
    proj_b: &'a Tensor,
    dilation: usize,
    history: VecDeque<Vec<f64>>,
    capacity: usize,
}

struct StageState<'a> {
    input_w: &'a Tensor,
    input_b: &'a Tensor,
    layers: Vec<LayerState<'a>>,
}

pub struct StreamingPredictor<'a> {
    config: &'a ModelConfig,
    adjacency: &'a Tensor,
    gc: Vec<(&'a Tensor, &'a Tensor)>,
    stages: Vec<StageState<'a>>,
    head_w: &'a Tensor,
    head_b: &'a Tensor,
    scales: Vec<f64>,
    frames_seen: usize,
}

impl<'a> StreamingPredictor<'a> {
    pub fn new(params: &'a ModelParams, config: &'a ModelConfig, topology: &'a GraphTopology) -> Result<Self> {
        config.validate()?;
        if topology.node_count() != config.nodes {
            return Err(Error::dim(format!(
                "topology has {} nodes, configuration {}",
                topology.node_count(),
                config.nodes
            )));
        }
        let gc = if config.use_gc {
            (0..config.gc_layers)
                .map(|l| Ok((params.require(&params::gc_weight(l))?, params.require(&params::gc_bias(l))?)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let mut stages = Vec::new();
        if config.use_tcn {
            for s in 0..config.tcn_stages {
                let layers = (0..config.tcn_layers)
                    .map(|l| {
                        let dilation = ModelConfig::dilation(l);
                        Ok(LayerState {
                            conv_w: params.require(&params::layer_param(s, l, "conv.weight"))?,
                            conv_b: params.require(&params::layer_param(s, l, "conv.bias"))?,
                            proj_w: params.require(&params::layer_param(s, l, "proj.weight"))?,
                            proj_b: params.require(&params::layer_param(s, l, "proj.bias"))?,
                            dilation,
                            history: VecDeque::new(),
                            capacity: (config.kernel_size - 1) * dilation + 1,
                        })
                    })
                    .collect::<Result<_>>()?;
                stages.push(StageState {
                    input_w: params.require(&params::stage_input_weight(s))?,
                    input_b: params.require(&params::stage_input_bias(s))?,
                    layers,
                });
            }
        }
        Ok(StreamingPredictor {
            config,
            adjacency: &topology.normalized,
            gc,
            stages,
            head_w: params.require(params::HEAD_WEIGHT)?,
            head_b: params.require(params::HEAD_BIAS)?,
            scales: config.output_scales(),
            frames_seen: 0,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    /// Rows currently buffered across all temporal layers.
    pub fn buffered_rows(&self) -> usize {
        self.stages
            .iter()
            .flat_map(|s| &s.layers)
            .map(|l| l.history.len())
            .sum()
    }

    pub fn reset(&mut self) {
        for layer in self.stages.iter_mut().flat_map(|s| s.layers.iter_mut()) {
            layer.history.clear();
        }
        self.frames_seen = 0;
    }

    /// Consumes one frame of `N·4` node features and returns each stage's
    /// `H·C` predictions (horizon-major).
    pub fn step(&mut self, frame: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cfg = self.config;
        if frame.len() != cfg.nodes * cfg.in_channels {
            return Err(Error::dim(format!(
                "frame has {} values, expected {}",
                frame.len(),
                cfg.nodes * cfg.in_channels
            )));
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite frame feature"));
        }

        let mut x = frame.to_vec();
        let mut width = cfg.in_channels;
        for (l, (w, b)) in self.gc.iter().enumerate() {
            let cout = w.shape()[1];
            let mut xw = vec![0.0; cfg.nodes * cout];
            for (src, dst) in x.chunks_exact(width).zip(xw.chunks_exact_mut(cout)) {
                ops::matmul_row(src, w.data(), dst);
            }
            let mut mixed = vec![0.0; cfg.nodes * cout];
            ops::node_mix_frame(self.adjacency.data(), &xw, &mut mixed);
            for row in mixed.chunks_exact_mut(cout) {
                ops::add_bias_row(row, b.data());
            }
            if l + 1 < self.gc.len() {
                mixed.iter_mut().for_each(|v| *v = ops::relu(*v));
            }
            x = mixed;
            width = cout;
        }

        let mut outputs = Vec::new();
        if self.stages.is_empty() {
            outputs.push(self.head_row(&x));
        } else {
            let mut stage_in = x;
            for s in 0..self.stages.len() {
                let feature = Self::stage_step(&mut self.stages[s], &stage_in);
                let pred = self.head_row(&feature);
                stage_in = if cfg.feed_predictions { pred.clone() } else { feature };
                outputs.push(pred);
            }
        }
        if let Some(bad) = outputs.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite prediction {bad}")));
        }
        self.frames_seen += 1;
        Ok(outputs)
    }

    fn stage_step(stage: &mut StageState<'_>, input: &[f64]) -> Vec<f64> {
        let c = stage.input_b.len();
        let mut h = vec![0.0; c];
        ops::matmul_row(input, stage.input_w.data(), &mut h);
        ops::add_bias_row(&mut h, stage.input_b.data());
        let mut conv = vec![0.0; c];
        let mut branch = vec![0.0; c];
        for layer in &mut stage.layers {
            if layer.history.len() == layer.capacity {
                layer.history.pop_front();
            }
            layer.history.push_back(h);
            let k = layer.conv_w.shape()[0];
            let newest = layer.history.len() - 1;
            let taps: Vec<Option<&[f64]>> = (0..k)
                .map(|kk| {
                    let back = layer.dilation * (k - 1 - kk);
                    newest.checked_sub(back).map(|i| layer.history[i].as_slice())
                })
                .collect();
            ops::conv_row(&taps, layer.conv_w.data(), layer.conv_b.data(), &mut conv);
            conv.iter_mut().for_each(|v| *v = ops::relu(*v));
            ops::matmul_row(&conv, layer.proj_w.data(), &mut branch);
            ops::add_bias_row(&mut branch, layer.proj_b.data());
            let prev = layer.history.back().expect("just pushed");
            h = prev.iter().zip(&branch).map(|(a, b)| a + b).collect();
        }
        h
    }

    fn head_row(&self, feature: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.scales.len()];
        ops::matmul_row(feature, self.head_w.data(), &mut out);
        ops::add_bias_row(&mut out, self.head_b.data());
        for (v, s) in out.iter_mut().zip(&self.scales) {
            *v = s * ops::sigmoid(*v);
        }
        out
    }
}
