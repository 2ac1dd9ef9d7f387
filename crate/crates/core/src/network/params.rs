use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::ModelConfig;
use crate::numerics::{Tape, Tensor, Var};

/// Named trainable tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

pub(crate) fn gc_weight(layer: usize) -> String {
    format!("gc.{layer}.weight")
}
pub(crate) fn gc_bias(layer: usize) -> String {
    format!("gc.{layer}.bias")
}
pub(crate) fn stage_input_weight(stage: usize) -> String {
    format!("stage.{stage}.input.weight")
}
pub(crate) fn stage_input_bias(stage: usize) -> String {
    format!("stage.{stage}.input.bias")
}
pub(crate) fn layer_param(stage: usize, layer: usize, part: &str) -> String {
    format!("stage.{stage}.layer.{layer}.{part}")
}
pub(crate) const HEAD_WEIGHT: &str = "head.weight";
pub(crate) const HEAD_BIAS: &str = "head.bias";

/// `(name, shape, fan_in)` for every tensor implied by `config`.
fn layout(config: &ModelConfig) -> Vec<(String, Vec<usize>, usize)> {
    let mut out = Vec::new();
    if config.use_gc {
        let mut width = config.in_channels;
        for l in 0..config.gc_layers {
            out.push((gc_weight(l), vec![width, config.gc_channels], width));
            out.push((gc_bias(l), vec![config.gc_channels], width));
            width = config.gc_channels;
        }
    }
    if config.use_tcn {
        let c = config.tcn_channels;
        let k = config.kernel_size;
        for s in 0..config.tcn_stages {
            let w = config.stage_input_width(s);
            out.push((stage_input_weight(s), vec![w, c], w));
            out.push((stage_input_bias(s), vec![c], w));
            for l in 0..config.tcn_layers {
                out.push((layer_param(s, l, "conv.weight"), vec![k, c, c], k * c));
                out.push((layer_param(s, l, "conv.bias"), vec![c], k * c));
                out.push((layer_param(s, l, "proj.weight"), vec![c, c], c));
                out.push((layer_param(s, l, "proj.bias"), vec![c], c));
            }
        }
    }
    let f = config.head_input_width();
    out.push((HEAD_WEIGHT.to_string(), vec![f, config.output_width()], f));
    out.push((HEAD_BIAS.to_string(), vec![config.output_width()], f));
    out
}

impl ModelParams {
    /// Uniform `±1/√fan_in` initialization from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, fan_in) in layout(config) {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
            names.push(name);
            tensors.push(Tensor::new(shape, data)?);
        }
        Ok(ModelParams { names, tensors })
    }

    /// Builds from explicit tensors, checking names and shapes against `config`.
    pub fn from_named(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let expected = layout(config);
        if expected.len() != named.len() {
            return Err(Error::config(format!(
                "configuration needs {} tensors, got {}",
                expected.len(),
                named.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((want, shape, _), (name, tensor)) in expected.into_iter().zip(named) {
            if want != name || tensor.shape() != shape.as_slice() {
                return Err(Error::config(format!(
                    "expected {want} {shape:?}, got {name} {:?}",
                    tensor.shape()
                )));
            }
            names.push(name);
            tensors.push(tensor);
        }
        Ok(ModelParams { names, tensors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub(crate) fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::config(format!("missing parameter {name}")))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor as a leaf on `tape`.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Result<ParamVars> {
        let mut vars = HashMap::with_capacity(self.names.len());
        let mut order = Vec::with_capacity(self.names.len());
        for (name, t) in self.iter() {
            let v = tape.leaf(t.clone(), trainable)?;
            vars.insert(name.to_string(), v);
            order.push(v);
        }
        Ok(ParamVars { vars, order })
    }
}

/// Tape handles for a registered [`ModelParams`].
pub struct ParamVars {
    vars: HashMap<String, Var>,
    order: Vec<Var>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::config(format!("missing parameter {name}")))
    }

    /// Handles in the same order as [`ModelParams::tensors`].
    pub fn in_order(&self) -> &[Var] {
        &self.order
    }
}
