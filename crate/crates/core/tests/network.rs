use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workflow_anticipation::graph::{GraphSequence, GraphTopology, NodeRoster, TopologyMode};
use workflow_anticipation::network::{
    flatten_nodes, gc_forward, head_forward, model_forward, tcn_stage_forward, unflatten_nodes, ModelConfig,
    ModelParams, StreamingPredictor,
};
use workflow_anticipation::numerics::Tensor;

fn small_config(nodes: usize, classes: usize) -> ModelConfig {
    ModelConfig {
        nodes,
        num_classes: classes,
        gc_channels: 6,
        tcn_channels: 5,
        tcn_layers: 5,
        hubs: vec![0, 1],
        ..ModelConfig::default()
    }
}

fn topology(cfg: &ModelConfig) -> GraphTopology {
    let roster = NodeRoster::new((0..cfg.nodes).map(|i| format!("n{i}"))).unwrap();
    GraphTopology::build(roster, cfg.topology, &cfg.hubs).unwrap()
}

fn random_sequence(rng: &mut ChaCha8Rng, frames: usize, nodes: usize) -> GraphSequence {
    let data = (0..frames * nodes * 4).map(|_| rng.gen_range(0.0..1.0)).collect();
    GraphSequence::from_tensor(Tensor::new(vec![frames, nodes, 4], data).unwrap()).unwrap()
}

#[test]
fn gc_identity_without_edges() {
    let roster = NodeRoster::new(["a", "b", "c"]).unwrap();
    let topo = GraphTopology::build(roster, TopologyMode::PriorKnowledge, &[]).unwrap();
    let x = Tensor::new(vec![2, 3, 2], (0..12).map(f64::from).collect()).unwrap();
    let out = gc_forward(&x, &topo, &Tensor::identity(2), None, false).unwrap();
    assert_eq!(out, x);
}

#[test]
fn gc_two_node_average() {
    let roster = NodeRoster::new(["a", "b"]).unwrap();
    let topo = GraphTopology::build(roster, TopologyMode::FullyConnected, &[]).unwrap();
    let x = Tensor::new(vec![1, 2, 1], vec![2.0, 4.0]).unwrap();
    let out = gc_forward(&x, &topo, &Tensor::identity(1), None, false).unwrap();
    for v in out.data() {
        assert!((v - 3.0).abs() < 1e-12, "{v}");
    }
}

#[test]
fn gc_frames_are_independent() {
    let topo = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let frame: Vec<f64> = (0..32).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::new(vec![2, 8, 4], [frame.clone(), frame].concat()).unwrap();
    let w = Tensor::new(vec![4, 3], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let out = gc_forward(&x, &topo, &w, None, true).unwrap();
    assert_eq!(out.row(0), out.row(1));
}

#[test]
fn gc_rejects_node_mismatch() {
    let topo = GraphTopology::cholec80(TopologyMode::PriorKnowledge);
    let x = Tensor::zeros(&[1, 4, 4]);
    assert!(gc_forward(&x, &topo, &Tensor::identity(4), None, false).is_err());
}

#[test]
fn flatten_layout_and_inverse() {
    let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let flat = flatten_nodes(&x).unwrap();
    assert_eq!(flat.shape(), &[1, 4]);
    assert_eq!(flat.data(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(unflatten_nodes(&flat, 2).unwrap(), x);
    assert_eq!(flatten_nodes(&Tensor::zeros(&[3, 2, 2])).unwrap(), Tensor::zeros(&[3, 4]));
}

#[test]
fn zero_kernels_leave_projected_input() {
    let cfg = small_config(4, 2);
    let mut params = ModelParams::init(&cfg, 3).unwrap();
    for l in 0..cfg.tcn_layers {
        for part in ["conv.weight", "conv.bias", "proj.weight", "proj.bias"] {
            let t = params.get_mut(&format!("stage.0.layer.{l}.{part}")).unwrap();
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let width = cfg.stage_input_width(0);
    let x = Tensor::new(vec![7, width], (0..7 * width).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let out = tcn_stage_forward(&x, &params, &cfg, 0).unwrap();

    let w = params.get("stage.0.input.weight").unwrap();
    let b = params.get("stage.0.input.bias").unwrap();
    let mut expected = workflow_anticipation::numerics::matmul(&x, w).unwrap();
    for row in expected.data_mut().chunks_exact_mut(cfg.tcn_channels) {
        for (v, bb) in row.iter_mut().zip(b.data()) {
            *v += bb;
        }
    }
    assert_eq!(out, expected);
}

#[test]
fn stage_is_causal() {
    let cfg = small_config(4, 2);
    let params = ModelParams::init(&cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let width = cfg.stage_input_width(0);
    let x = Tensor::new(vec![30, width], (0..30 * width).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let base = tcn_stage_forward(&x, &params, &cfg, 0).unwrap();
    for t in [0, 5, 17, 29] {
        let mut p = x.clone();
        p.data_mut()[t * width] += 1.0;
        let out = tcn_stage_forward(&p, &params, &cfg, 0).unwrap();
        let c = cfg.tcn_channels;
        assert_eq!(&out.data()[..t * c], &base.data()[..t * c]);
        assert_ne!(out.row(t), base.row(t));
    }
}

/// A 14-layer stage sees exactly `2·(2^14 − 1) + 1` frames. The edge frame
/// reaches the output only through the farthest tap of every layer, so the
/// stage is given enough channels that some ReLU stays open at each one.
#[test]
fn stage_receptive_field() {
    let cfg = ModelConfig {
        nodes: 2,
        num_classes: 1,
        gc_channels: 1,
        tcn_channels: 8,
        hubs: vec![0],
        ..ModelConfig::default()
    };
    let params = ModelParams::init(&cfg, 21).unwrap();
    let width = cfg.stage_input_width(0);
    let frames = (1 << 15) + 8;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = Tensor::new(
        vec![frames, width],
        (0..frames * width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let base = tcn_stage_forward(&x, &params, &cfg, 0).unwrap();
    let t = frames - 1;
    let reach = cfg.stage_receptive_field() - 1;
    assert_eq!(reach, 2 * ((1 << 14) - 1));

    let perturb = |frame: usize| {
        let mut p = x.clone();
        for c in 0..width {
            p.data_mut()[frame * width + c] += 3.0;
        }
        tcn_stage_forward(&p, &params, &cfg, 0).unwrap()
    };
    let far = perturb(t - (1 << 15));
    assert_eq!(far.row(t), base.row(t));
    let just_outside = perturb(t - reach - 1);
    assert_eq!(just_outside.row(t), base.row(t));
    let edge = perturb(t - reach);
    assert_ne!(edge.row(t), base.row(t));
}

#[test]
fn head_output_contract() {
    let horizons = [2.0, 3.0, 5.0];
    let feature = Tensor::full(&[4, 6], 0.3);
    let zero = head_forward(&feature, &Tensor::zeros(&[6, 15]), &Tensor::zeros(&[15]), &horizons, 5).unwrap();
    assert_eq!(zero.shape(), &[4, 3, 5]);
    for f in 0..4 {
        for (hi, &h) in horizons.iter().enumerate() {
            for c in 0..5 {
                assert_eq!(zero.at(&[f, hi, c]), h / 2.0);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = Tensor::new(vec![6, 15], (0..90).map(|_| rng.gen_range(-30.0..30.0)).collect()).unwrap();
    let out = head_forward(&feature, &w, &Tensor::zeros(&[15]), &horizons, 5).unwrap();
    for f in 0..4 {
        for c in 0..5 {
            let v = out.at(&[f, 0, c]);
            assert!(v > 0.0 && v < 2.0, "{v}");
        }
    }
}

#[test]
fn default_model_has_two_stages_and_bounded_outputs() {
    let cfg = ModelConfig::default();
    let topo = GraphTopology::cholec80(cfg.topology);
    let params = ModelParams::init(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_sequence(&mut rng, 25, 8);
    let preds = model_forward(&seq, &params, &cfg, &topo).unwrap();
    assert_eq!(preds.len(), 2);
    for p in &preds {
        assert_eq!(p.shape(), &[25, 3, 5]);
        for f in 0..25 {
            for (hi, &h) in cfg.horizons.iter().enumerate() {
                for c in 0..5 {
                    let v = p.at(&[f, hi, c]);
                    assert!(v > 0.0 && v < h);
                }
            }
        }
    }
}

#[test]
fn prefix_predictions_match() {
    for (variant, cfg) in [
        ("default", small_config(4, 2)),
        (
            "feed predictions",
            ModelConfig {
                feed_predictions: true,
                ..small_config(4, 2)
            },
        ),
        (
            "no gc",
            ModelConfig {
                use_gc: false,
                ..small_config(4, 2)
            },
        ),
    ] {
        let topo = topology(&cfg);
        let params = ModelParams::init(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let seq = random_sequence(&mut rng, 40, 4);
        let full = model_forward(&seq, &params, &cfg, &topo).unwrap();
        for t in [1, 13, 39] {
            let part = model_forward(&seq.prefix(t), &params, &cfg, &topo).unwrap();
            for (a, b) in part.iter().zip(&full) {
                let w = a.row_width();
                assert_eq!(a.data(), &b.data()[..t * w], "{variant} prefix {t}");
            }
        }
    }
}

#[test]
fn streaming_matches_batch_exactly() {
    let variants = [
        ModelConfig::default(),
        ModelConfig {
            feed_predictions: true,
            ..small_config(4, 2)
        },
        ModelConfig {
            use_tcn: false,
            ..small_config(4, 2)
        },
        ModelConfig {
            use_gc: false,
            ..small_config(4, 2)
        },
    ];
    for cfg in variants {
        let topo = topology(&cfg);
        let params = ModelParams::init(&cfg, 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let seq = random_sequence(&mut rng, 70, cfg.nodes);
        let batch = model_forward(&seq, &params, &cfg, &topo).unwrap();
        let mut stream = StreamingPredictor::new(&params, &cfg, &topo).unwrap();
        for t in 0..seq.frames() {
            let rows = stream.step(seq.frame_row(t)).unwrap();
            assert_eq!(rows.len(), batch.len());
            for (row, b) in rows.iter().zip(&batch) {
                assert_eq!(&row[..], b.row(t), "frame {t}");
            }
        }
    }
}

#[test]
fn streaming_memory_is_bounded() {
    let cfg = ModelConfig {
        tcn_layers: 3,
        ..small_config(4, 2)
    };
    let topo = topology(&cfg);
    let params = ModelParams::init(&cfg, 1).unwrap();
    let mut stream = StreamingPredictor::new(&params, &cfg, &topo).unwrap();
    let frame = vec![0.5; 16];
    for _ in 0..200 {
        stream.step(&frame).unwrap();
    }
    // Per stage: (2·1+1) + (2·2+1) + (2·4+1) rows.
    assert_eq!(stream.buffered_rows(), 2 * (3 + 5 + 9));
}

#[test]
fn forward_is_deterministic() {
    let cfg = small_config(4, 3);
    let topo = topology(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = random_sequence(&mut rng, 20, 4);
    let a = model_forward(&seq, &ModelParams::init(&cfg, 4).unwrap(), &cfg, &topo).unwrap();
    let b = model_forward(&seq, &ModelParams::init(&cfg, 4).unwrap(), &cfg, &topo).unwrap();
    assert_eq!(a, b);
}

#[test]
fn without_tcn_head_reads_flattened_graph() {
    let cfg = ModelConfig {
        use_tcn: false,
        ..small_config(4, 2)
    };
    let topo = topology(&cfg);
    let params = ModelParams::init(&cfg, 1).unwrap();
    assert_eq!(params.get("head.weight").unwrap().shape(), &[4 * 6, 6]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let preds = model_forward(&random_sequence(&mut rng, 5, 4), &params, &cfg, &topo).unwrap();
    assert_eq!(preds.len(), 1);
}
