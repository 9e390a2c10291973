use super::*;
use crate::colorcore::normalize;
use rand::Rng;

fn random_scene(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Scene {
    let pixels = (0..h * w * 3)
        .map(|_| rng.gen_range(0.05f32..1.0))
        .collect();
    let label = normalize([
        rng.gen_range(0.1..1.0),
        rng.gen_range(0.1..1.0),
        rng.gen_range(0.1..1.0),
    ])
    .unwrap();
    Scene::new(w, h, pixels, label).unwrap()
}

fn randomize_params(net: &mut Network, rng: &mut ChaCha8Rng, scale: f64) {
    for p in net.params_mut() {
        for w in p.iter_mut() {
            *w = rng.gen_range(-scale..scale);
        }
    }
}

fn mean_pool_net() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv3x3 {
            in_ch: 3,
            out_ch: 3,
        },
        LayerSpec::Relu,
        LayerSpec::Pointwise {
            in_ch: 3,
            out_ch: 4,
        },
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 4,
            outputs: 5,
        },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense {
            inputs: 5,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ]
}

fn max_pool_net() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv3x3 {
            in_ch: 3,
            out_ch: 4,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Dropout { rate: 0.4 },
        LayerSpec::Dense {
            inputs: 4,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ]
}

#[test]
fn rejects_malformed_stacks() {
    assert!(Network::init(
        vec![
            LayerSpec::Dense {
                inputs: 3,
                outputs: 3
            },
            LayerSpec::PositiveHead
        ],
        0
    )
    .is_err());
    assert!(Network::init(vec![LayerSpec::MeanPool], 0).is_err());
    assert!(Network::init(
        vec![
            LayerSpec::MeanPool,
            LayerSpec::Dropout { rate: 1.0 },
            LayerSpec::PositiveHead
        ],
        0
    )
    .is_err());
    assert!(Network::init(vec![LayerSpec::MeanPool, LayerSpec::PositiveHead], 0).is_ok());
}

#[test]
fn zero_dropout_mc_matches_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scene = random_scene(&mut rng, 5, 6);
    for arch in [Arch::GNet, Arch::MNet] {
        let net = arch
            .build(
                &ArchConfig {
                    dropout: 0.0,
                    ..Default::default()
                },
                3,
            )
            .unwrap();
        let det = net
            .forward(&scene, ForwardMode::Deterministic, PassSeed::new(0, 0))
            .unwrap();
        for pass in 0..5 {
            let mc = net
                .forward(&scene, ForwardMode::Mc, PassSeed::new(9, pass))
                .unwrap();
            assert_eq!(mc, det);
        }
    }
}

#[test]
fn same_seed_same_output_different_seed_differs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scene = random_scene(&mut rng, 6, 6);
    let net = Arch::MNet.build(&ArchConfig::default(), 5).unwrap();
    let a = net
        .forward(&scene, ForwardMode::Mc, PassSeed::new(11, 4))
        .unwrap();
    let b = net
        .forward(&scene, ForwardMode::Mc, PassSeed::new(11, 4))
        .unwrap();
    assert_eq!(
        a.to_array().map(f64::to_bits),
        b.to_array().map(f64::to_bits)
    );
    let outputs: Vec<_> = (0..8)
        .map(|p| {
            net.forward(&scene, ForwardMode::Mc, PassSeed::new(11, p))
                .unwrap()
        })
        .collect();
    assert!(outputs.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn hand_computed_forward_on_single_pixel() {
    let layers = vec![
        LayerSpec::Pointwise {
            in_ch: 3,
            out_ch: 2,
        },
        LayerSpec::Relu,
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 2,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ];
    let params = vec![
        vec![1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.25],
        vec![],
        vec![],
        vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, -1.0],
        vec![],
    ];
    let net = Network::from_parts(layers, params).unwrap();
    // Pixel (1, 2, 3) has mean 2, so the network sees (0.5, 1, 1.5).
    // Hidden = (0.5, -1 + 1.5 + 0.25) = (0.5, 0.75); logits = (0.5, 0.75, 0.25).
    let scene = Scene::new(1, 1, vec![1.0, 2.0, 3.0], Illuminant::NEUTRAL).unwrap();
    let out = net
        .forward(&scene, ForwardMode::Deterministic, PassSeed::new(0, 0))
        .unwrap();
    let e = [0.5f64.exp(), 0.75f64.exp(), 0.25f64.exp()];
    let n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
    for (got, want) in out.to_array().iter().zip(e.map(|v| v / n)) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
}

#[test]
fn loss_examples() {
    let a = normalize([0.3, 0.5, 0.2]).unwrap();
    assert!(loss(&a, &a).abs() < 1e-15);
    let x = normalize([1.0, 1e-9, 1e-9]).unwrap();
    let y = normalize([1e-9, 1.0, 1e-9]).unwrap();
    assert!((loss(&x, &y) - 1.0).abs() < 1e-8);
    let b = normalize([0.6, 0.2, 0.4]).unwrap();
    let theta = crate::colorcore::recovery_error(&a, &b).to_radians();
    assert!((loss(&a, &b) - (1.0 - theta.cos())).abs() < 1e-12);
}

/// Central differences over every parameter with the dropout masks held
/// fixed by the pass seed.
fn gradient_check(layers: Vec<LayerSpec>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(layers, seed).unwrap();
    randomize_params(&mut net, &mut rng, 0.8);
    let scene = random_scene(&mut rng, 3, 4);
    let gt = scene.label();
    let pass = PassSeed::new(seed, 1);
    let (_, grads) = net.backward(&scene, &gt, pass).unwrap();

    let eps = 1e-5;
    let eval = |n: &Network| -> f64 {
        let input = Tensor::from_scene(&scene);
        let out = n.run(input, ForwardMode::Train, pass, None).unwrap();
        1.0 - (out[0] * gt.r() + out[1] * gt.g() + out[2] * gt.b())
    };
    let mut checked = 0;
    for layer in 0..net.layers().len() {
        for k in 0..net.params()[layer].len() {
            let mut plus = net.clone();
            plus.params_mut()[layer][k] += eps;
            let mut minus = net.clone();
            minus.params_mut()[layer][k] -= eps;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            let analytic = grads.0[layer][k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / denom;
            assert!(
                rel < 1e-4,
                "layer {layer} param {k}: analytic {analytic} numeric {numeric}"
            );
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn gradients_match_finite_differences_mean_pool() {
    gradient_check(mean_pool_net(), 21);
}

#[test]
fn gradients_match_finite_differences_max_pool() {
    gradient_check(max_pool_net(), 22);
}

#[test]
fn gradients_match_finite_differences_stock_archs() {
    for (i, arch) in [Arch::GNet, Arch::MNet].iter().enumerate() {
        let cfg = ArchConfig {
            channels: 3,
            hidden: 4,
            dropout: 0.3,
        };
        gradient_check(arch.layers(&cfg), 30 + i as u64);
    }
}

#[test]
fn dropped_unit_gets_no_incoming_gradient() {
    // Dense(4 -> 6) followed by dropout: a dropped output unit must not
    // receive gradient on its incoming weights.
    let layers = vec![
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 3,
            outputs: 6,
        },
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense {
            inputs: 6,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = Network::init(layers, 4).unwrap();
    randomize_params(&mut net, &mut rng, 1.0);
    let scene = random_scene(&mut rng, 2, 2);
    let mut saw_drop = false;
    for pass in 0..10 {
        let seed = PassSeed::new(8, pass);
        let mask = dropout_mask(seed, 2, 0.5, 6);
        let (_, g) = net.backward(&scene, &scene.label(), seed).unwrap();
        for (unit, m) in mask.iter().enumerate() {
            if *m == 0.0 {
                saw_drop = true;
                assert!(g.0[1][unit * 3..unit * 3 + 3].iter().all(|v| *v == 0.0));
                assert_eq!(g.0[1][18 + unit], 0.0);
                assert!((0..3).all(|o| g.0[3][o * 6 + unit] == 0.0));
            }
        }
    }
    assert!(saw_drop);
}

#[test]
fn head_gradient_is_tangential_at_optimum() {
    // Single dense layer on a pooled input; set the bias so the output
    // equals the label, then the gradient wrt the logits is orthogonal to
    // the radial direction (and in fact zero).
    let layers = vec![
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 3,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ];
    let gt = normalize([0.5, 0.3, 0.2]).unwrap();
    let bias: Vec<f64> = gt.to_array().iter().map(|v| v.ln()).collect();
    let mut p = vec![0.0; 9];
    p.extend(bias);
    let net = Network::from_parts(layers, vec![vec![], p, vec![]]).unwrap();
    let scene = Scene::new(1, 1, vec![0.4, 0.5, 0.6], gt).unwrap();
    let (l, g) = net.backward(&scene, &gt, PassSeed::new(0, 0)).unwrap();
    assert!(l.abs() < 1e-15);
    assert!(g.0[1].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn inverted_dropout_preserves_expectation() {
    for rate in [0.25, 0.5] {
        let units = 5;
        let draws = 40_000;
        let mut sum = vec![0.0; units];
        for pass in 0..draws {
            let m = dropout_mask(PassSeed::new(77, pass), 3, rate, units);
            for (s, v) in sum.iter_mut().zip(m) {
                *s += v;
            }
        }
        for s in sum {
            let mean = s / draws as f64;
            assert!((mean - 1.0).abs() < 0.02, "rate {rate}: mean {mean}");
        }
    }
}

#[test]
fn head_outputs_positive_unit_vectors() {
    let layers = vec![
        LayerSpec::Pointwise {
            in_ch: 3,
            out_ch: 4,
        },
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 4,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = Network::init(layers, 5).unwrap();
    for _ in 0..100_000 {
        randomize_params(&mut net, &mut rng, 10.0);
        let px: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..5.0)).collect();
        let out = net
            .forward_tensor(
                Tensor::new(1, 1, 3, px),
                ForwardMode::Deterministic,
                PassSeed::new(0, 0),
            )
            .unwrap();
        let v = out.to_array();
        assert!(v.iter().all(|c| *c > 0.0));
        assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn head_survives_extreme_logits() {
    let y = positive_head(&[1e6, -1e6, 0.0]);
    assert!(y.iter().all(|v| *v > 0.0 && v.is_finite()));
}

#[test]
fn non_finite_activation_reports_layer() {
    let layers = vec![
        LayerSpec::MeanPool,
        LayerSpec::Dense {
            inputs: 3,
            outputs: 3,
        },
        LayerSpec::PositiveHead,
    ];
    let net = Network::from_parts(layers, vec![vec![], vec![f64::MAX; 12], vec![]]).unwrap();
    let scene = Scene::new(1, 1, vec![1.0, 1.0, 1.0], Illuminant::NEUTRAL).unwrap();
    match net.forward(&scene, ForwardMode::Deterministic, PassSeed::new(0, 0)) {
        Err(CoreError::Numeric { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn memorizes_a_single_scene() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scene = random_scene(&mut rng, 4, 4);
    let data: Vec<&Scene> = std::iter::repeat_n(&scene, 8).collect();
    let cfg = ArchConfig {
        channels: 4,
        hidden: 8,
        dropout: 0.0,
    };
    let net = Arch::GNet.build(&cfg, 6).unwrap();
    let tc = TrainConfig {
        epochs: 200,
        learning_rate: 0.05,
        batch_size: 1,
        seed: 6,
    };
    let out = train(net, &data, &tc).unwrap();
    let last = *out.loss_trace.last().unwrap();
    assert!(last < 1e-3, "final loss {last}");
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scenes: Vec<Scene> = (0..5).map(|_| random_scene(&mut rng, 4, 4)).collect();
    let refs: Vec<&Scene> = scenes.iter().collect();
    let net = Arch::MNet.build(&ArchConfig::default(), 7).unwrap();
    let tc = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        batch_size: 2,
        seed: 1,
    };
    let out = train(net.clone(), &refs, &tc).unwrap();
    assert_eq!(out.network, net);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scenes: Vec<Scene> = (0..12).map(|_| random_scene(&mut rng, 4, 4)).collect();
    let refs: Vec<&Scene> = scenes.iter().collect();
    let tc = TrainConfig {
        epochs: 4,
        learning_rate: 0.1,
        batch_size: 4,
        seed: 3,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            train(
                Arch::GNet.build(&ArchConfig::default(), 2).unwrap(),
                &refs,
                &tc,
            )
            .unwrap()
        })
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.network, b.network);
    assert_eq!(a.loss_trace, b.loss_trace);
}

#[test]
fn empty_dataset_is_rejected() {
    let net = Arch::GNet.build(&ArchConfig::default(), 0).unwrap();
    assert!(train(net, &[], &TrainConfig::default()).is_err());
}

#[test]
fn container_round_trip_is_bit_exact() {
    let net = Arch::MNet.build(&ArchConfig::default(), 12).unwrap();
    let bytes = io::encode_network(&net);
    let back = io::decode_network(&bytes, std::path::Path::new("mem")).unwrap();
    assert_eq!(io::encode_network(&back), bytes);
    assert_eq!(back, net);
    for cut in [0, 7, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(io::decode_network(&bytes[..cut], std::path::Path::new("mem")).is_err());
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(io::decode_network(&bad, std::path::Path::new("mem")).is_err());
}
