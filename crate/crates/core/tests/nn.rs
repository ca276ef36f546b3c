//! Network, optimizer and parameter-blob behaviour.

use approx::assert_relative_eq;
use ndarray::array;
use proptest::prelude::*;

use ctxtune::nn::snapshot::{self, Section, SectionHeader};
use ctxtune::nn::{
    clip_global_norm, clip_global_norm_many, soft_update, Activation, Adam, AdamConfig, GradBundle,
    Mlp,
};
use ctxtune::rng;

#[test]
fn forward_matches_a_hand_computed_network() {
    // 2 -> 2 (tanh) -> 1 (identity); each layer is row-major weights then bias
    let params = vec![0.5, -1.0, 0.25, 2.0, 0.1, -0.2, 1.5, -0.5, 0.3];
    let net = Mlp::from_params(&[2, 2, 1], Activation::Tanh, Activation::Identity, params).unwrap();
    let x = [0.4, -0.6];
    let h0 = (0.5 * 0.4 - 1.0 * -0.6 + 0.1f64).tanh();
    let h1 = (0.25 * 0.4 + 2.0 * -0.6 - 0.2f64).tanh();
    let y = 1.5 * h0 - 0.5 * h1 + 0.3;
    assert_relative_eq!(net.forward(&x).unwrap()[0], y, epsilon = 1e-15);

    let tape = net
        .forward_batch(array![[0.4, -0.6], [0.0, 0.0]].view())
        .unwrap();
    assert_relative_eq!(tape.output()[[0, 0]], y, epsilon = 1e-15);
    assert_eq!(tape.input().nrows(), 2);
}

#[test]
fn shape_errors_are_reported() {
    let net = Mlp::zeros(&[3, 4, 2], Activation::Tanh, Activation::Identity).unwrap();
    assert_eq!(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
    assert!(net.forward(&[1.0, 2.0]).is_err());
    assert!(Mlp::from_params(
        &[3, 4, 2],
        Activation::Tanh,
        Activation::Identity,
        vec![0.0; 5]
    )
    .is_err());
    assert!(Mlp::zeros(&[3], Activation::Tanh, Activation::Identity).is_err());
    let tape = net.forward_batch(array![[1.0, 2.0, 3.0]].view()).unwrap();
    let mut g = GradBundle::zeros(net.num_params());
    assert!(net
        .backward_batch(&tape, array![[1.0]].view(), &mut g)
        .is_err());
}

#[test]
fn backward_of_a_linear_layer_is_the_outer_product() {
    let net = Mlp::from_params(
        &[2, 1],
        Activation::Identity,
        Activation::Identity,
        vec![3.0, -1.0, 0.5],
    )
    .unwrap();
    let g = net.backward(&[2.0, 5.0], &[1.5]).unwrap();
    assert_eq!(g.values(), &[3.0, 7.5, 1.5]);
    assert_eq!(
        net.input_gradient(&[2.0, 5.0], &[1.5]).unwrap(),
        vec![4.5, -1.5]
    );
}

#[test]
fn adam_matches_the_textbook_update() {
    let cfg = AdamConfig::default();
    let mut opt = Adam::new(2, cfg);
    let mut p = vec![1.0, -1.0];
    let g1 = GradBundle::from_vec(vec![0.5, -2.0]);
    opt.step(&mut p, &g1, 0.1).unwrap();
    // first bias-corrected step moves each parameter by lr * g / (|g| + eps)
    assert_relative_eq!(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), epsilon = 1e-15);
    assert_relative_eq!(p[1], -1.0 + 0.1 * 2.0 / (2.0 + 1e-8), epsilon = 1e-15);

    let g2 = GradBundle::from_vec(vec![1.0, 0.0]);
    let before = p.clone();
    opt.step(&mut p, &g2, 0.1).unwrap();
    let m = 0.9 * 0.1 * 0.5 + 0.1 * 1.0;
    let v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
    let step = 0.1 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
    assert_relative_eq!(p[0], before[0] - step, epsilon = 1e-14);
    assert_eq!(opt.steps(), 2);

    assert!(opt.step(&mut p, &g2, 0.0).is_err());
    assert!(opt
        .step(&mut p, &GradBundle::from_vec(vec![f64::NAN, 0.0]), 0.1)
        .is_err());
}

#[test]
fn soft_update_blends_toward_online() {
    let online = [1.0, 2.0];
    let mut target = [0.0, 4.0];
    soft_update(&online, &mut target, 0.25);
    assert_eq!(target, [0.25, 3.5]);
    soft_update(&online, &mut target, 1.0);
    assert_eq!(target, online);
}

#[test]
fn joint_clipping_scales_all_bundles() {
    let mut a = GradBundle::from_vec(vec![3.0, 0.0]);
    let mut b = GradBundle::from_vec(vec![0.0, 4.0]);
    let norm = clip_global_norm_many(&mut [&mut a, &mut b], 1.0);
    assert_eq!(norm, 5.0);
    assert_relative_eq!(a.values()[0], 0.6, epsilon = 1e-15);
    assert_relative_eq!(b.values()[1], 0.8, epsilon = 1e-15);
    let mut small = GradBundle::from_vec(vec![0.1]);
    assert_relative_eq!(clip_global_norm(&mut small, 1.0), 0.1);
    assert_eq!(small.values(), &[0.1]);
}

#[test]
fn parameter_blobs_round_trip_and_reject_corruption() {
    let mut r = rng::seeded(4);
    let net = Mlp::new(&[3, 5, 2], Activation::Tanh, Activation::Tanh, &mut r).unwrap();
    let bytes = net.to_bytes();
    let back = Mlp::from_bytes(&bytes).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.to_bytes(), bytes);
    assert!(Mlp::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Mlp::from_bytes(b"nope").is_err());

    let sections = vec![Section {
        header: SectionHeader {
            name: "x".into(),
            len: 2,
            attrs: Default::default(),
        },
        data: vec![1.5, -0.0],
    }];
    let blob = snapshot::encode(&sections);
    let decoded = snapshot::decode(&blob).unwrap();
    assert_eq!(decoded[0].data[0], 1.5);
    assert!(decoded[0].data[1].is_sign_negative());
    assert!(snapshot::find(&decoded, "y").is_err());
}

#[test]
fn initialization_is_seeded() {
    let a = Mlp::new(
        &[4, 8, 1],
        Activation::Tanh,
        Activation::Identity,
        &mut rng::seeded(1),
    )
    .unwrap();
    let b = Mlp::new(
        &[4, 8, 1],
        Activation::Tanh,
        Activation::Identity,
        &mut rng::seeded(1),
    )
    .unwrap();
    let c = Mlp::new(
        &[4, 8, 1],
        Activation::Tanh,
        Activation::Identity,
        &mut rng::seeded(2),
    )
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn tanh_outputs_stay_in_range(x in prop::collection::vec(-50.0f64..50.0, 3), seed in any::<u64>()) {
        let net = Mlp::new(&[3, 6, 2], Activation::Tanh, Activation::Tanh, &mut rng::seeded(seed)).unwrap();
        for y in net.forward(&x).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn gradients_are_linear_in_the_upstream(seed in any::<u64>(), k in -3.0f64..3.0) {
        let net = Mlp::new(&[2, 4, 2], Activation::Tanh, Activation::Identity, &mut rng::seeded(seed)).unwrap();
        let g1 = net.backward(&[0.3, -0.7], &[1.0, -0.5]).unwrap();
        let gk = net.backward(&[0.3, -0.7], &[k, -0.5 * k]).unwrap();
        for (a, b) in g1.values().iter().zip(gk.values()) {
            prop_assert!((a * k - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
