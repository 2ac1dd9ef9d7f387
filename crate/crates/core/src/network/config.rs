use crate::error::{Error, Result};
use crate::graph::{TopologyMode, DEFAULT_HUBS};

/// Architecture and ablation switches of the anticipation network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Graph nodes, center viewpoint included.
    pub nodes: usize,
    pub in_channels: usize,
    pub gc_layers: usize,
    pub gc_channels: usize,
    pub tcn_stages: usize,
    pub tcn_layers: usize,
    pub tcn_channels: usize,
    pub kernel_size: usize,
    /// Anticipation horizons in minutes, strictly increasing.
    pub horizons: Vec<f64>,
    pub num_classes: usize,
    pub use_gc: bool,
    pub use_tcn: bool,
    /// Horizons whose loss terms are trained. Empty means a single
    /// max-horizon regression read out at every horizon by clipping.
    pub enabled_horizons: Vec<f64>,
    pub topology: TopologyMode,
    pub hubs: Vec<usize>,
    /// Later stages take the previous stage's predictions instead of its
    /// features.
    pub feed_predictions: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            nodes: 8,
            in_channels: 4,
            gc_layers: 2,
            gc_channels: 64,
            tcn_stages: 2,
            tcn_layers: 14,
            tcn_channels: 64,
            kernel_size: 3,
            horizons: vec![2.0, 3.0, 5.0],
            num_classes: 5,
            use_gc: true,
            use_tcn: true,
            enabled_horizons: vec![2.0, 3.0, 5.0],
            topology: TopologyMode::PriorKnowledge,
            hubs: DEFAULT_HUBS.to_vec(),
            feed_predictions: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::config("need at least two graph nodes"));
        }
        if self.in_channels == 0 || self.num_classes == 0 {
            return Err(Error::config("in_channels and num_classes must be positive"));
        }
        if self.use_gc && (self.gc_layers == 0 || self.gc_channels == 0) {
            return Err(Error::config("graph convolution needs gc_layers ≥ 1 and gc_channels ≥ 1"));
        }
        if self.use_tcn && (self.tcn_stages == 0 || self.tcn_layers == 0 || self.tcn_channels == 0) {
            return Err(Error::config("temporal network needs stages, layers and channels ≥ 1"));
        }
        if self.kernel_size == 0 {
            return Err(Error::config("kernel_size must be ≥ 1"));
        }
        if self.tcn_layers > 40 {
            return Err(Error::config("tcn_layers above 40 overflows the dilation schedule"));
        }
        if self.horizons.is_empty() {
            return Err(Error::config("at least one horizon is required"));
        }
        if self.horizons.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::config("horizons must be positive"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("horizons must be strictly increasing"));
        }
        if let Some(h) = self.enabled_horizons.iter().find(|h| !self.horizons.contains(h)) {
            return Err(Error::config(format!("enabled horizon {h} is not in the horizon list")));
        }
        if let Some(h) = self.hubs.iter().find(|&&h| h >= self.nodes) {
            return Err(Error::config(format!("hub {h} outside {} nodes", self.nodes)));
        }
        Ok(())
    }

    pub fn horizon_count(&self) -> usize {
        self.horizons.len()
    }

    /// Width of one frame's head output, `H · C`.
    pub fn output_width(&self) -> usize {
        self.horizons.len() * self.num_classes
    }

    /// Per-column output bound, horizon-major: column `h·C + c` → horizon `h`.
    pub fn output_scales(&self) -> Vec<f64> {
        self.horizons
            .iter()
            .flat_map(|&h| std::iter::repeat_n(h, self.num_classes))
            .collect()
    }

    pub fn horizon_index(&self, horizon: f64) -> Option<usize> {
        self.horizons.iter().position(|&h| h == horizon)
    }

    pub fn is_horizon_enabled(&self, horizon: f64) -> bool {
        self.enabled_horizons.contains(&horizon)
    }

    /// Horizons that contribute to the training loss.
    pub fn trained_horizons(&self) -> Vec<f64> {
        if self.enabled_horizons.is_empty() {
            self.horizons.last().copied().into_iter().collect()
        } else {
            self.horizons
                .iter()
                .copied()
                .filter(|h| self.enabled_horizons.contains(h))
                .collect()
        }
    }

    pub fn dilation(layer: usize) -> usize {
        1usize << layer
    }

    /// Width of the flattened per-frame vector entering the temporal network.
    pub fn flattened_width(&self) -> usize {
        let per_node = if self.use_gc { self.gc_channels } else { self.in_channels };
        self.nodes * per_node
    }

    /// Input width of temporal stage `s`.
    pub fn stage_input_width(&self, stage: usize) -> usize {
        match stage {
            0 => self.flattened_width(),
            _ if self.feed_predictions => self.output_width(),
            _ => self.tcn_channels,
        }
    }

    pub fn head_input_width(&self) -> usize {
        if self.use_tcn {
            self.tcn_channels
        } else {
            self.flattened_width()
        }
    }

    /// Number of prediction tensors the model emits.
    pub fn stage_count(&self) -> usize {
        if self.use_tcn {
            self.tcn_stages
        } else {
            1
        }
    }

    /// Frames one temporal stage can see: `1 + (K−1)·(2^L − 1)`.
    pub fn stage_receptive_field(&self) -> usize {
        1 + (self.kernel_size - 1) * ((1usize << self.tcn_layers) - 1)
    }

    /// Closed-form trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        if self.use_gc {
            let mut width = self.in_channels;
            for _ in 0..self.gc_layers {
                total += width * self.gc_channels + self.gc_channels;
                width = self.gc_channels;
            }
        }
        if self.use_tcn {
            let c = self.tcn_channels;
            let per_layer = self.kernel_size * c * c + c + c * c + c;
            for s in 0..self.tcn_stages {
                total += self.stage_input_width(s) * c + c + self.tcn_layers * per_layer;
            }
        }
        total + self.head_input_width() * self.output_width() + self.output_width()
    }
}
