//! Spatial graph over instrument nodes and the per-frame node features.
//!
//! Node 0 is the center viewpoint, a fixed reference node; the remaining
//! nodes are instrument classes. Temporal (frame-to-frame) edges are not
//! materialized here: the temporal convolution runs over each node's feature
//! stream.

mod sequence;
mod topology;

pub use sequence::{frame_features, frames_to_sequence, Detection, GraphSequence, CENTER_FEATURE};
pub use topology::{normalize_adjacency, GraphTopology, TopologyMode, DEFAULT_HUBS};

use crate::error::{Error, Result};

/// Ordered node labels; index 0 is the center viewpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRoster {
    labels: Vec<String>,
}

impl NodeRoster {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::config("roster needs the center node and at least one instrument"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::config(format!("duplicate roster label {l:?}")));
            }
        }
        Ok(NodeRoster { labels })
    }

    /// Cholec80 instruments plus the center viewpoint.
    pub fn cholec80() -> Self {
        NodeRoster {
            labels: [
                "CenterViewpoint",
                "Grasper",
                "Bipolar",
                "Hook",
                "Scissors",
                "Clipper",
                "Irrigator",
                "SpecimenBag",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl Default for NodeRoster {
    fn default() -> Self {
        NodeRoster::cholec80()
    }
}
