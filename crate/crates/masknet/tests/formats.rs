use std::path::Path;

use masknet::config::{RunConfig, TrainMode};
use masknet::dataset::balanced_subset;
use masknet::idx::{load_mnist_split, parse_idx, parse_images, parse_labels};
use masknet::maskfile::{decode_masks, encode_masks, load_masks, save_masks};
use masknet::model::{decode_model, encode_model, load_model, save_model, SavedModel};
use masknet::synth::{synth_teacher, SyntheticTeacherSpec};
use masknet::AppError;
use masknet_core::alternation::{sweep_masks, MaskPolicy, MaskThresholds};
use masknet_core::linalg::{ConvGeometry, Matrix};
use masknet_core::network::{forward_activation, LayerSpec, NetworkParams};
use masknet_core::{Nonlinearity, ThresholdVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn images_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x0803u32, count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn labels_bytes(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x0801u32, labels.len() as u32] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(labels);
    b
}

fn format_message(e: AppError) -> String {
    match e {
        AppError::Format(m) => m,
        other => panic!("expected a format error, got {other}"),
    }
}

#[test]
fn idx_parses_scales_and_one_hot_encodes() {
    let img = images_bytes(2, 2, 2, &[0, 255, 51, 0, 255, 255, 0, 0]);
    let data = parse_idx(&img, &labels_bytes(&[3, 9])).unwrap();
    assert_eq!((data.len(), data.input_dim(), data.target_dim()), (2, 4, 10));
    assert_eq!(data.input(0), &[0.0, 1.0, 0.2, 0.0]);
    assert_eq!(data.label(0), 3);
    assert_eq!(data.label(1), 9);
    assert_eq!(data.target(1).iter().sum::<f64>(), 1.0);
}

#[test]
fn idx_errors() {
    let good = images_bytes(2, 2, 2, &[0; 8]);
    let mut bad_magic = good.clone();
    bad_magic[3] = 0x01;
    assert!(format_message(parse_images(&bad_magic).unwrap_err()).contains("magic"));

    let msg = format_message(parse_images(&good[..good.len() - 3]).unwrap_err());
    assert!(msg.contains("expected 24 bytes") && msg.contains("found 21"), "{msg}");
    assert!(parse_images(&good[..10]).is_err());
    assert!(parse_labels(&labels_bytes(&[1, 2])[..9]).is_err());
    assert!(parse_labels(&labels_bytes(&[10])).is_err());

    let msg = format_message(parse_idx(&good, &labels_bytes(&[1, 2, 3])).unwrap_err());
    assert!(msg.contains("does not match"), "{msg}");
}

#[test]
fn mnist_files_when_present() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if !dir.join("train-images-idx3-ubyte").exists() {
        eprintln!("MNIST not found under {}; skipping the full-file check", dir.display());
        return;
    }
    let train = load_mnist_split(&dir, true).unwrap();
    assert_eq!((train.len(), train.input_dim()), (60_000, 784));
    let test = load_mnist_split(&dir, false).unwrap();
    assert_eq!(test.len(), 10_000);
    let sub = balanced_subset(&test, 1000, 3).unwrap();
    let mut counts = [0usize; 10];
    for i in 0..sub.len() {
        counts[sub.label(i)] += 1;
    }
    assert!(counts.iter().all(|&c| c == 100), "{counts:?}");
}

#[test]
fn balanced_subset_is_balanced_and_seeded() {
    let labels: Vec<u8> = (0..200).map(|i| if i < 150 { 0 } else { (i % 3) as u8 + 1 }).collect();
    let data = parse_idx(&images_bytes(200, 1, 1, &vec![7; 200]), &labels_bytes(&labels)).unwrap();
    let sub = balanced_subset(&data, 40, 5).unwrap();
    let mut counts = [0usize; 10];
    for i in 0..sub.len() {
        counts[sub.label(i)] += 1;
    }
    assert_eq!(&counts[..4], &[10, 10, 10, 10]);
    let again = balanced_subset(&data, 40, 5).unwrap();
    assert_eq!(sub.inputs(), again.inputs());
    assert_eq!(sub.targets(), again.targets());
    assert!(balanced_subset(&data, 201, 0).is_err());
}

fn mixed_net(rng: &mut ChaCha8Rng) -> NetworkParams {
    let g = ConvGeometry {
        in_height: 5,
        in_width: 5,
        channels_in: 1,
        channels_out: 2,
        kernel_height: 3,
        kernel_width: 3,
        stride: 2,
    };
    let specs = vec![
        LayerSpec::conv(g).unwrap(),
        LayerSpec::dense(g.output_dim(), 4),
        LayerSpec::dense(4, 3),
    ];
    let mut net = NetworkParams::random(&specs, 1.0, rng).unwrap();
    for l in 0..2 {
        let w = net.layer(l).beta().dim();
        let beta = (0..w).map(|_| rng.random_range(-0.5..0.5)).collect();
        net.set_beta(l, ThresholdVector::new(beta).unwrap()).unwrap();
    }
    net
}

#[test]
fn model_round_trip_is_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = mixed_net(&mut rng);
    let thresholds = MaskThresholds(vec![
        ThresholdVector::constant(net.hidden_widths()[0], 0.25).unwrap(),
        ThresholdVector::constant(4, 1e-300).unwrap(),
    ]);
    for sweep in [None, Some(thresholds)] {
        let model = SavedModel { net: net.clone(), sweep_thresholds: sweep };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let first = std::fs::read(&path).unwrap();
        assert_eq!(encode_model(&loaded), first);
        for _ in 0..20 {
            let x: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
            for nl in [Nonlinearity::Relu, Nonlinearity::Pht] {
                let a = forward_activation(&model.net, &x, nl).unwrap().0;
                let b = forward_activation(&loaded.net, &x, nl).unwrap().0;
                let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&a), bits(&b));
            }
        }
    }
}

#[test]
fn corrupted_models_are_rejected_without_panicking() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = SavedModel {
        net: mixed_net(&mut rng),
        sweep_thresholds: None,
    };
    let bytes = encode_model(&model);
    for n in 0..bytes.len() {
        assert!(decode_model(&bytes[..n]).is_err(), "prefix {n} accepted");
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(decode_model(&trailing).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_model(&magic).is_err());
    assert!(matches!(load_model(Path::new("/nonexistent/model.bin")), Err(AppError::Io { .. })));
}

#[test]
fn mask_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = NetworkParams::random(&NetworkParams::dense_specs(&[4, 7, 5, 2]), 1.0, &mut rng).unwrap();
    let x = Matrix::from_fn(4, 13, |_, _| rng.random_range(-1.0..1.0));
    let thresholds = MaskThresholds(vec![
        ThresholdVector::constant(7, 0.1).unwrap(),
        ThresholdVector::constant(5, 0.1).unwrap(),
    ]);
    for policy in [MaskPolicy::instance(Nonlinearity::Relu), MaskPolicy::batch(4, Nonlinearity::Relu)] {
        let mut store = sweep_masks(&net, &x, &policy, &thresholds, 9).unwrap();
        store.set_epoch(12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bits");
        save_masks(&path, &store).unwrap();
        let loaded = load_masks(&path).unwrap();
        assert_eq!(loaded, store);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(encode_masks(&loaded), bytes);
        for n in 0..bytes.len() {
            assert!(decode_masks(&bytes[..n]).is_err(), "prefix {n} accepted");
        }
    }
}

#[test]
fn config_round_trip_with_every_key_changed() {
    let mut c = RunConfig::default();
    for (k, v) in [
        ("mode", "b-alt"),
        ("widths", "10,3,2"),
        ("init_gain", "0.7"),
        ("activation", "pht"),
        ("loss", "least_squares"),
        ("learning_rate", "0.125"),
        ("momentum", "0"),
        ("batch_size", "3"),
        ("weight_decay", "1e-4"),
        ("warmup_epochs", "1"),
        ("plateau_window", "2"),
        ("plateau_rel_improvement", "0.01"),
        ("min_gap", "2"),
        ("max_gap", "9"),
        ("max_alternations", "5"),
        ("total_epochs", "11"),
        ("mask_batch_size", "8"),
        ("mask_rule", "gate"),
        ("mask_signal", "preactivation"),
        ("threshold_rule", "sqrt_two_beta"),
        ("majority_vote", "true"),
        ("beta_init", "network"),
        ("beta_percentile", "33.5"),
        ("curve_loss", "activation"),
        ("seed", "18446744073709551615"),
        ("wall_clock", "true"),
        ("train_limit", "12"),
        ("test_limit", "7"),
        ("mnist_dir", "/tmp/some dir"),
        ("curve_csv", "out/c.csv"),
        ("model_out", "out/m.bin"),
    ] {
        c.set(k, v).unwrap();
    }
    let text = c.to_text();
    assert_eq!(text.lines().count(), 31, "every key is written");
    let back = RunConfig::from_text(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_text(), text);
    assert_eq!(back.mode, TrainMode::BAlt);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.cfg");
    c.save(&path).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap().to_text(), text);
}

#[test]
fn config_validation() {
    for bad in [
        "widths = 5",
        "widths = 5,0,2",
        "momentum = 1",
        "batch_size = 0",
        "warmup_epochs = 30",
        "min_gap = 60",
        "beta_percentile = 101",
        "learning_rate = abc",
        "majority_vote = yes",
    ] {
        assert!(matches!(RunConfig::from_text(bad), Err(AppError::Config(_))), "{bad}");
    }
}

#[test]
fn synthetic_teacher_edge_densities() {
    let spec = |density| SyntheticTeacherSpec {
        widths: vec![5, 4, 3],
        density,
        samples: 30,
        seed: 4,
    };
    let full = synth_teacher(&spec(1.0)).unwrap();
    let linear = full.net.layer(1).weight().matmul(full.net.layer(0).weight()).unwrap();
    for n in 0..30 {
        let want = linear.matvec(full.data.input(n)).unwrap();
        let got = full.data.target(n);
        assert!(want.iter().zip(got).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
    let empty = synth_teacher(&spec(0.0)).unwrap();
    assert!(empty.data.targets().as_slice().iter().all(|&v| v == 0.0));
    let store = full.mask_store().unwrap();
    assert_eq!(store.densities(), vec![1.0]);
    assert!(synth_teacher(&spec(1.5)).is_err());
    assert!(synth_teacher(&SyntheticTeacherSpec { samples: 0, ..spec(0.5) }).is_err());
}
