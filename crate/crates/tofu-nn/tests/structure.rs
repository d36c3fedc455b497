//! Structural guarantees: branch isolation, parameter bookkeeping,
//! checkpoint fidelity, and bitwise determinism of the whole training step.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tofu_core::{Extrinsics, Intrinsics};
use tofu_nn::loss::build_loss;
use tofu_nn::{
    checkpoint, Adam, FusionKind, FusionNet, NetConfig, NetOutputs, NodeId, Placement, Tape,
    Tensor, WarpContext, DECODER_WIDTHS, ENCODER_WIDTHS, RGB_CHANNELS, TOF_CHANNELS,
};

fn config(placement: Placement, kind: FusionKind) -> NetConfig {
    NetConfig {
        placement,
        kind,
        d_min: 0.1,
        d_max: 15.0,
    }
}

fn input(seed: u64, c: usize, h: usize, w: usize) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![c, h, w],
        (0..c * h * w).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
    )
    .unwrap()
}

fn gt(seed: u64, h: usize, w: usize) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![1, h, w],
        (0..h * w)
            .map(|_| {
                if rng.gen_bool(0.9) {
                    rng.gen_range(0.3f32..14.0)
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap()
}

fn ctx() -> WarpContext {
    WarpContext {
        k_tof: Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap(),
        k_rgb: Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap(),
        rgb_to_tof: Extrinsics::new(
            nalgebra::Matrix3::identity(),
            nalgebra::Vector3::new(0.05, 0.0, 0.0),
        )
        .unwrap(),
    }
}

/// Every tape node the given output depends on, found by walking parents.
fn ancestors(tape: &Tape<f32>, from: NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(tape.parents(id).iter().copied());
        }
    }
    seen
}

fn branch_reaches(outs: &NetOutputs, tape: &Tape<f32>, output: NodeId, prefix: &str) -> bool {
    let seen = ancestors(tape, output);
    outs.params
        .iter()
        .any(|(name, id)| name.starts_with(prefix) && seen.contains(&id))
}

#[test]
fn unfused_branches_are_fully_isolated() {
    let net = FusionNet::new(config(Placement::None, FusionKind::Gated)).unwrap();
    let params = net.init_params(5);
    let mut tape = Tape::<f32>::new();
    let outs = net
        .forward(&mut tape, &params, input(1, 3, 64, 64), input(2, 3, 64, 64), None)
        .unwrap();
    assert!(branch_reaches(&outs, &tape, outs.rgb_full(), "rgb."));
    assert!(!branch_reaches(&outs, &tape, outs.rgb_full(), "tof."));
    assert!(branch_reaches(&outs, &tape, outs.tof_full(), "tof."));
    assert!(!branch_reaches(&outs, &tape, outs.tof_full(), "rgb."));
    let seen = ancestors(&tape, outs.rgb_full());
    assert!(!seen.contains(&outs.tof_input));
    assert!(seen.contains(&outs.rgb_input));
}

#[test]
fn bottleneck_fusion_connects_the_branches_both_ways() {
    let net = FusionNet::new(config(Placement::Bottleneck, FusionKind::Gated)).unwrap();
    let params = net.init_params(5);
    let mut tape = Tape::<f32>::new();
    let outs = net
        .forward(&mut tape, &params, input(1, 3, 64, 64), input(2, 3, 64, 64), None)
        .unwrap();
    assert!(branch_reaches(&outs, &tape, outs.rgb_full(), "tof."));
    assert!(branch_reaches(&outs, &tape, outs.tof_full(), "rgb."));
    let seen = ancestors(&tape, outs.rgb_full());
    assert!(seen.contains(&outs.tof_input));
}

#[test]
fn the_depth_input_moves_the_rgb_prediction_only_when_fused() {
    let rgb = input(1, 3, 64, 64);
    let tof_a = input(2, 3, 64, 64);
    let mut tof_b = tof_a.clone();
    for v in tof_b.data_mut().iter_mut().take(64 * 64) {
        *v = (*v * 0.5) + 0.25;
    }
    for placement in [Placement::None, Placement::Bottleneck, Placement::All] {
        let net = FusionNet::new(config(placement, FusionKind::Gated)).unwrap();
        let params = net.init_params(5);
        let c = ctx();
        let (rgb_a, _) = net.infer(&params, &rgb, &tof_a, Some(&c)).unwrap();
        let (rgb_b, _) = net.infer(&params, &rgb, &tof_b, Some(&c)).unwrap();
        let moved = rgb_a
            .data()
            .iter()
            .zip(rgb_b.data())
            .any(|(a, b)| a != b);
        assert_eq!(moved, placement != Placement::None, "{placement:?}");
    }
}

/// Parameter totals recomputed from the layer widths, layer by layer.
fn expected_scalars(placement: Placement, kind: FusionKind) -> usize {
    let conv = |co: usize, ci: usize, k: usize| co * ci * k * k + co;
    let block = |c: usize| match kind {
        FusionKind::Gated => conv(c, c, 3) + conv(c, 2 * c, 3) + conv(c, c, 1),
        FusionKind::Attention => 4 * conv(c, c, 1),
    };
    let mut total = 0;
    for (branch_in, _) in [(RGB_CHANNELS, "rgb"), (TOF_CHANNELS, "tof")] {
        let mut prev = branch_in;
        for w in ENCODER_WIDTHS {
            total += conv(w, prev, 3) + conv(w, w, 3);
            prev = w;
        }
        let mut prev = ENCODER_WIDTHS[4];
        for (j, w) in DECODER_WIDTHS.into_iter().enumerate() {
            let skip = if j < 4 { ENCODER_WIDTHS[3 - j] } else { 0 };
            total += conv(w, prev, 3) + conv(w, w + skip, 3);
            prev = w;
        }
        for j in 1..5 {
            total += conv(1, DECODER_WIDTHS[j], 3);
        }
    }
    if placement != Placement::None {
        total += 2 * block(ENCODER_WIDTHS[4]);
    }
    if placement == Placement::All {
        total += conv(1, DECODER_WIDTHS[0], 3);
        total += block(DECODER_WIDTHS[0]) + block(DECODER_WIDTHS[1]) + block(DECODER_WIDTHS[2]);
    }
    total
}

#[test]
fn parameter_counts_match_the_architecture() {
    for placement in [Placement::None, Placement::Bottleneck, Placement::All] {
        for kind in [FusionKind::Gated, FusionKind::Attention] {
            let net = FusionNet::new(config(placement, kind)).unwrap();
            let store = net.init_params(0);
            assert_eq!(
                store.scalar_count(),
                expected_scalars(placement, kind),
                "{placement:?} {kind:?}"
            );
            let has_aux = store.iter().any(|(n, _)| n == "rgb.head16.w");
            assert_eq!(has_aux, placement == Placement::All);
            let bn = store.iter().filter(|(n, _)| n.starts_with("fuse.bn.")).count();
            assert_eq!(bn > 0, placement != Placement::None);
        }
    }
}

#[test]
fn initialisation_is_deterministic_and_seed_sensitive() {
    let net = FusionNet::new(config(Placement::All, FusionKind::Attention)).unwrap();
    let a = net.init_params(9);
    let b = net.init_params(9);
    assert_eq!(a.len(), b.len());
    for ((na, ta), (nb, tb)) in a.iter().zip(b.iter()) {
        assert_eq!(na, nb);
        for (x, y) in ta.data().iter().zip(tb.data()) {
            assert_eq!(x.to_bits(), y.to_bits(), "{na}");
        }
    }
    let c = net.init_params(10);
    let differs = a
        .iter()
        .zip(c.iter())
        .any(|((_, ta), (_, tc))| ta.data().iter().zip(tc.data()).any(|(x, y)| x != y));
    assert!(differs);
}

/// One full optimisation step, returning the updated parameters.
fn train_step(net: &FusionNet, seed: u64) -> tofu_nn::ParamStore {
    let mut params = net.init_params(seed);
    let rgb = input(21, 3, 64, 64);
    let tof = input(22, 3, 64, 64);
    let gt_rgb = gt(23, 64, 64);
    let gt_tof = gt(24, 64, 64);
    let c = ctx();
    let mut adam = Adam::new(1e-4);
    let mut tape = Tape::<f32>::new();
    let outs = net
        .forward(&mut tape, &params, rgb.clone(), tof.clone(), Some(&c))
        .unwrap();
    let loss = build_loss(&mut tape, &outs, &gt_rgb, &gt_tof, &rgb, 1e-3).unwrap();
    let grads = tape.backward(loss).unwrap();
    let by_name = outs
        .params
        .iter()
        .map(|(n, id)| (n.clone(), grads[id].clone().unwrap()))
        .collect();
    adam.apply(&mut params, &by_name).unwrap();
    params
}

#[test]
fn a_whole_training_step_is_bitwise_deterministic() {
    let net = FusionNet::new(config(Placement::All, FusionKind::Gated)).unwrap();
    let a = train_step(&net, 31);
    let b = train_step(&net, 31);
    for ((name, ta), (_, tb)) in a.iter().zip(b.iter()) {
        for (x, y) in ta.data().iter().zip(tb.data()) {
            assert_eq!(x.to_bits(), y.to_bits(), "{name}");
        }
    }
}

#[test]
fn a_reloaded_checkpoint_reproduces_the_forward_pass_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.tofw");
    let cfg = config(Placement::Bottleneck, FusionKind::Attention);
    let net = FusionNet::new(cfg).unwrap();
    let params = net.init_params(17);
    checkpoint::save(&path, &cfg, &params, &Adam::new(1e-4)).unwrap();

    let (cfg2, params2, _) = checkpoint::load(&path).unwrap();
    let net2 = FusionNet::new(cfg2).unwrap();
    let rgb = input(41, 3, 64, 64);
    let tof = input(42, 3, 64, 64);
    let (ra, ta) = net.infer(&params, &rgb, &tof, None).unwrap();
    let (rb, tb) = net2.infer(&params2, &rgb, &tof, None).unwrap();
    for (x, y) in ra.data().iter().zip(rb.data()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in ta.data().iter().zip(tb.data()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn oversized_bottlenecks_hit_the_attention_token_cap() {
    let net = FusionNet::new(config(Placement::Bottleneck, FusionKind::Attention)).unwrap();
    let params = net.init_params(3);
    // 32 x 32800 pixels collapse to 1 x 1025 bottleneck tokens, one over cap.
    let h = 32;
    let w = 32 * 1025;
    let rgb = Tensor::new(vec![3, h, w], vec![0.25; 3 * h * w]).unwrap();
    let tof = Tensor::new(vec![3, h, w], vec![0.5; 3 * h * w]).unwrap();
    let mut tape = Tape::<f32>::new();
    let err = net.forward(&mut tape, &params, rgb, tof, None).unwrap_err();
    assert!(matches!(
        err,
        tofu_nn::NnError::TokenCap { tokens: 1025, cap: 1024 }
    ));
}
