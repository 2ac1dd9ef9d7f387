use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::NodeRoster;
use crate::numerics::Tensor;

/// Center viewpoint, grasper and hook.
pub const DEFAULT_HUBS: [usize; 3] = [0, 1, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyMode {
    /// Edges only between hub nodes and every other node.
    PriorKnowledge,
    FullyConnected,
}

impl fmt::Display for TopologyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyMode::PriorKnowledge => "prior",
            TopologyMode::FullyConnected => "full",
        })
    }
}

impl FromStr for TopologyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" | "prior-knowledge" => Ok(TopologyMode::PriorKnowledge),
            "full" | "fully-connected" => Ok(TopologyMode::FullyConnected),
            other => Err(Error::config(format!("unknown topology mode {other:?} (prior|full)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphTopology {
    pub roster: NodeRoster,
    pub mode: TopologyMode,
    pub hubs: Vec<usize>,
    /// Binary `N × N` adjacency, symmetric with a zero diagonal.
    pub adjacency: Tensor,
    /// `Λ^{-1/2} (A + I) Λ^{-1/2}`.
    pub normalized: Tensor,
}

impl GraphTopology {
    /// Builds the adjacency for `roster`. Hubs are ignored when fully connected.
    pub fn build(roster: NodeRoster, mode: TopologyMode, hubs: &[usize]) -> Result<Self> {
        let n = roster.len();
        if n == 0 {
            return Err(Error::config("empty roster"));
        }
        let hub_set: BTreeSet<usize> = hubs.iter().copied().collect();
        if let Some(bad) = hub_set.iter().find(|&&h| h >= n) {
            return Err(Error::config(format!("hub index {bad} outside roster of {n} nodes")));
        }
        let mut adjacency = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                let linked = i != j
                    && match mode {
                        TopologyMode::FullyConnected => true,
                        TopologyMode::PriorKnowledge => hub_set.contains(&i) || hub_set.contains(&j),
                    };
                if linked {
                    adjacency.set(&[i, j], 1.0);
                }
            }
        }
        let normalized = normalize_adjacency(&adjacency)?;
        Ok(GraphTopology {
            roster,
            mode,
            hubs: hub_set.into_iter().collect(),
            adjacency,
            normalized,
        })
    }

    pub fn cholec80(mode: TopologyMode) -> Self {
        GraphTopology::build(NodeRoster::cholec80(), mode, &DEFAULT_HUBS).expect("default roster is valid")
    }

    pub fn node_count(&self) -> usize {
        self.roster.len()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency.row(node).iter().filter(|&&v| v != 0.0).count()
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.adjacency
            .row(node)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Symmetric normalization with self loops: `Λ^{-1/2} (A + I) Λ^{-1/2}`,
/// `Λ_ii = Σ_j (A + I)_ij`.
pub fn normalize_adjacency(a: &Tensor) -> Result<Tensor> {
    let (n, m) = a.dims2()?;
    if n != m {
        return Err(Error::dim(format!("adjacency must be square, got {:?}", a.shape())));
    }
    for i in 0..n {
        if a.at(&[i, i]) != 0.0 {
            return Err(Error::config(format!("adjacency has a self loop at node {i}")));
        }
        for j in 0..i {
            if a.at(&[i, j]) != a.at(&[j, i]) {
                return Err(Error::config(format!("adjacency is not symmetric at ({i}, {j})")));
            }
        }
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let degree: f64 = a.row(i).iter().sum::<f64>() + 1.0;
            1.0 / degree.sqrt()
        })
        .collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let self_loop = if i == j { 1.0 } else { 0.0 };
            let v = inv_sqrt[i] * (a.at(&[i, j]) + self_loop) * inv_sqrt[j];
            out.set(&[i, j], v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster(n: usize) -> NodeRoster {
        NodeRoster::new((0..n).map(|i| format!("n{i}"))).unwrap()
    }

    #[test]
    fn two_node_complete_graph() {
        let t = GraphTopology::build(roster(2), TopologyMode::FullyConnected, &[]).unwrap();
        assert_eq!(t.adjacency.data(), &[0.0, 1.0, 1.0, 0.0]);
        for v in t.normalized.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_graph_normalizes_to_identity() {
        let a = Tensor::zeros(&[3, 3]);
        assert_eq!(normalize_adjacency(&a).unwrap(), Tensor::identity(3));
        // Prior-knowledge mode with no hubs has no edges either.
        let t = GraphTopology::build(roster(3), TopologyMode::PriorKnowledge, &[]).unwrap();
        assert_eq!(t.normalized, Tensor::identity(3));
    }

    #[test]
    fn path_graph_entry() {
        let a = Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let norm = normalize_adjacency(&a).unwrap();
        assert!((norm.at(&[0, 1]) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholec80_prior_topology() {
        let t = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
        let hubs = [0, 1, 3];
        for i in 0..8 {
            assert_eq!(t.adjacency.at(&[i, i]), 0.0);
            for j in 0..8 {
                let expected = i != j && (hubs.contains(&i) || hubs.contains(&j));
                assert_eq!(t.adjacency.at(&[i, j]) == 1.0, expected, "({i},{j})");
            }
        }
        assert_eq!(t.degree(2), 3);
        assert_eq!(t.degree(0), 7);
        for node in [2, 4, 5, 6, 7] {
            assert_eq!(t.neighbors(node), vec![0, 1, 3]);
        }
    }

    #[test]
    fn fully_connected_ignores_hubs() {
        let t = GraphTopology::build(roster(4), TopologyMode::FullyConnected, &[1]).unwrap();
        assert_eq!(t.degree(2), 3);
    }

    #[test]
    fn rejects_bad_hub_and_asymmetry() {
        assert!(matches!(
            GraphTopology::build(roster(3), TopologyMode::PriorKnowledge, &[3]),
            Err(Error::Config(_))
        ));
        let a = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_adjacency(&a), Err(Error::Config(_))));
    }

    #[test]
    fn mode_parses() {
        assert_eq!("prior".parse::<TopologyMode>().unwrap(), TopologyMode::PriorKnowledge);
        assert_eq!("full".parse::<TopologyMode>().unwrap(), TopologyMode::FullyConnected);
        assert!("ring".parse::<TopologyMode>().is_err());
    }
}
