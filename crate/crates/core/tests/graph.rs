use proptest::prelude::*;
use workflow_anticipation::graph::{
    frames_to_sequence, normalize_adjacency, Detection, GraphTopology, NodeRoster, TopologyMode, CENTER_FEATURE,
};
use workflow_anticipation::numerics::Tensor;

/// Normalization computed entry by entry from degrees of `A + I`.
fn oracle(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + a[i].iter().sum::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let aij = a[i][j] + if i == j { 1.0 } else { 0.0 };
                    aij / (deg[i].sqrt() * deg[j].sqrt())
                })
                .collect()
        })
        .collect()
}

/// Symmetric, loop-free adjacency from the bits of `mask` over the upper triangle.
fn graph_from_mask(n: usize, mask: u32) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if mask >> bit & 1 == 1 {
                a[i][j] = 1.0;
                a[j][i] = 1.0;
            }
            bit += 1;
        }
    }
    a
}

fn assert_close(got: &Tensor, want: &[Vec<f64>]) {
    let n = want.len();
    for i in 0..n {
        for j in 0..n {
            let g = got.at(&[i, j]);
            assert!((g - want[i][j]).abs() < 1e-12, "[{i},{j}] {g} vs {}", want[i][j]);
        }
    }
}

#[test]
fn normalization_matches_oracle_on_every_small_graph() {
    for n in 1..=5 {
        let edges = n * (n - 1) / 2;
        for mask in 0..1u32 << edges {
            let a = graph_from_mask(n, mask);
            let got = normalize_adjacency(&Tensor::from_rows(&a).unwrap()).unwrap();
            assert_close(&got, &oracle(&a));
        }
    }
}

#[test]
fn cholec80_prior_graph() {
    let topo = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
    let hubs = [0usize, 1, 3];
    let mut a = vec![vec![0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            if i != j && (hubs.contains(&i) || hubs.contains(&j)) {
                a[i][j] = 1.0;
            }
        }
    }
    assert_close(&topo.adjacency, &a);
    assert_close(&topo.normalized, &oracle(&a));
    assert_eq!(topo.degree(0), 7);
    assert_eq!(topo.degree(2), 3);
    assert_eq!(topo.neighbors(2), vec![0, 1, 3]);
}

#[test]
fn fully_connected_is_uniform() {
    let topo = GraphTopology::cholec80(TopologyMode::FullyConnected);
    for v in topo.normalized.data() {
        assert!((v - 0.125).abs() < 1e-15);
    }
}

#[test]
fn asymmetric_adjacency_is_rejected() {
    let a = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    assert!(normalize_adjacency(&a).is_err());
    let roster = NodeRoster::new(["a", "b"]).unwrap();
    assert!(GraphTopology::build(roster, TopologyMode::PriorKnowledge, &[5]).is_err());
}

#[test]
fn missing_instruments_are_zero_and_center_is_fixed() {
    let roster = NodeRoster::cholec80();
    let dets = vec![
        Detection {
            frame: 2,
            class_id: 3,
            cx: 0.4,
            cy: 0.6,
            w: 0.1,
            h: 0.2,
            confidence: 0.7,
        },
        Detection {
            frame: 2,
            class_id: 3,
            cx: 0.9,
            cy: 0.9,
            w: 0.3,
            h: 0.3,
            confidence: 0.9,
        },
    ];
    let seq = frames_to_sequence(&dets, 3, &roster).unwrap();
    assert_eq!(seq.features().shape(), &[3, 8, 4]);
    for f in 1..=3 {
        assert_eq!(seq.node_feature(f, 0), CENTER_FEATURE);
    }
    assert_eq!(seq.node_feature(2, 3), [0.9, 0.9, 0.3, 0.3]);
    assert_eq!(seq.node_feature(1, 3), [0.0; 4]);
    assert_eq!(seq.node_feature(2, 5), [0.0; 4]);
}

#[test]
fn confidence_ties_keep_first_listed() {
    let roster = NodeRoster::cholec80();
    let a = Detection {
        frame: 1,
        class_id: 1,
        cx: 0.1,
        cy: 0.1,
        w: 0.1,
        h: 0.1,
        confidence: 0.5,
    };
    let b = Detection { cx: 0.8, ..a.clone() };
    let seq = frames_to_sequence(&[a.clone(), b.clone()], 1, &roster).unwrap();
    assert_eq!(seq.node_feature(1, 1), a.feature());
    let seq = frames_to_sequence(&[b.clone(), a], 1, &roster).unwrap();
    assert_eq!(seq.node_feature(1, 1), b.feature());
}

#[test]
fn invalid_detections_are_rejected() {
    let roster = NodeRoster::cholec80();
    let base = Detection {
        frame: 1,
        class_id: 2,
        cx: 0.5,
        cy: 0.5,
        w: 0.1,
        h: 0.1,
        confidence: 0.5,
    };
    for bad in [
        Detection { class_id: 0, ..base.clone() },
        Detection { class_id: 8, ..base.clone() },
        Detection { cx: 1.5, ..base.clone() },
        Detection { frame: 4, ..base.clone() },
    ] {
        assert!(frames_to_sequence(&[bad], 3, &roster).is_err());
    }
}

fn detection() -> impl Strategy<Value = Detection> {
    (1usize..6, 1usize..8, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(
        |(frame, class_id, cx, cy, w, h)| Detection {
            frame,
            class_id,
            cx,
            cy,
            w,
            h,
            confidence: 0.0,
        },
    )
}

proptest! {
    #[test]
    fn normalized_adjacency_is_symmetric_and_nonnegative(n in 1usize..9, mask in any::<u32>()) {
        let a = graph_from_mask(n, mask);
        let got = normalize_adjacency(&Tensor::from_rows(&a).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(got.at(&[i, j]) >= 0.0);
                prop_assert_eq!(got.at(&[i, j]), got.at(&[j, i]));
            }
        }
    }

    /// With distinct confidences the detection order is irrelevant.
    #[test]
    fn features_ignore_detection_order(dets in prop::collection::vec(detection(), 0..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let roster = NodeRoster::cholec80();
        let n = dets.len() as f64;
        let keyed: Vec<_> = dets
            .into_iter()
            .enumerate()
            .map(|(i, d)| Detection { confidence: (i as f64 + 1.0) / (n + 1.0), ..d })
            .collect();
        let base = frames_to_sequence(&keyed, 5, &roster).unwrap();
        let mut shuffled = keyed.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(frames_to_sequence(&shuffled, 5, &roster).unwrap(), base);
    }
}
