//! Builds the eight-node instrument graph, prints its normalized adjacency
//! and the node features of one frame.
//!
//! ```text
//! cargo run --example build_graph
//! ```

use workflow_anticipation::graph::{frame_features, Detection, GraphTopology, TopologyMode};

fn main() -> workflow_anticipation::Result<()> {
    for mode in [TopologyMode::PriorKnowledge, TopologyMode::FullyConnected] {
        let topo = GraphTopology::cholec80(mode);
        println!("{mode:?}");
        for i in 0..topo.node_count() {
            let row: Vec<String> = (0..topo.node_count())
                .map(|j| format!("{:.3}", topo.normalized.at(&[i, j])))
                .collect();
            println!("  {:<16} deg {} | {}", topo.roster.labels()[i], topo.degree(i), row.join(" "));
        }
    }

    // Two hooks compete for one node; the more confident box is kept.
    let box_at = |class_id, cx, confidence| Detection {
        frame: 1,
        class_id,
        cx,
        cy: 0.4,
        w: 0.2,
        h: 0.1,
        confidence,
    };
    let detections = [box_at(1, 0.3, 0.9), box_at(3, 0.6, 0.5), box_at(3, 0.7, 0.8)];
    let topo = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
    let features = frame_features(&detections, &topo.roster)?;
    println!("\nframe features (cx, cy, w, h):");
    for (label, f) in topo.roster.labels().iter().zip(features.chunks(4)) {
        println!("  {label:<16} {f:?}");
    }
    Ok(())
}
