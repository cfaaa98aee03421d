use super::*;
use crate::dataset::synthetic_blobs;
use crate::math::softmax;
use proptest::prelude::*;

fn tiny_images(n: usize, side: usize, seed: u64) -> LabeledDataset {
    let mut gen = RngStream::new(seed).rng();
    let pixels: Vec<f64> = (0..n * side * side)
        .map(|_| rand::Rng::random_range(&mut gen, 0.0..1.0))
        .collect();
    let labels = (0..n).map(|i| (i * 7 + 3) % 10).collect();
    LabeledDataset::new(side, side, pixels, labels, 10).unwrap()
}

#[test]
fn zero_linear_model_is_uniform() {
    let m = Model::zeros(Architecture::linear(784, 10)).unwrap();
    let p = m.forward(&vec![0.3; 784]).unwrap();
    assert!(p.as_slice().iter().all(|&v| (v - 0.1).abs() < 1e-15));
}

#[test]
fn linear_two_class_reduction() {
    let mut w = vec![-1e6; 20];
    w[..4].copy_from_slice(&[0.5, -0.25, -0.1, 0.3]);
    let m = Model::from_flat(Architecture::linear(2, 10), FlatParams(w)).unwrap();
    let p = m.forward(&[0.8, 0.4]).unwrap();
    // z0 = 0.3, z1 = 0.04: p0 = 1 / (1 + e^-0.26).
    assert!((p[0] - 0.564_636_291_803_029_2).abs() < 1e-12);
    assert!((p[1] - (1.0 - 0.564_636_291_803_029_2)).abs() < 1e-12);
    assert!(p.as_slice()[2..].iter().all(|&v| v == 0.0));
}

#[test]
fn forward_rejects_bad_shapes() {
    let m = Model::zeros(Architecture::linear(4, 3)).unwrap();
    match m.forward(&[0.0; 5]) {
        Err(Error::InvalidInput(msg)) => assert!(msg.contains('4') && msg.contains('5'), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(m.forward(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
}

#[test]
fn cross_entropy_examples() {
    let one = ProbVector::new(vec![0.0, 1.0]).unwrap();
    assert_eq!(cross_entropy(&[one.clone(), one], &[1, 1]).unwrap(), 0.0);
    let uniform = softmax(&[0.0; 10]).unwrap();
    let ce = cross_entropy(&vec![uniform; 3], &[0, 4, 9]).unwrap();
    assert!((ce - 10f64.ln()).abs() < 1e-12);
    let half = ProbVector::new(vec![0.5, 0.5]).unwrap();
    assert!((cross_entropy(&[half], &[0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!(cross_entropy(&[], &[]).is_err());
    let sat = ProbVector::new(vec![1.0, 0.0]).unwrap();
    assert!((cross_entropy(&[sat], &[1]).unwrap() - 1e-12f64.ln().abs()).abs() < 1e-9);
}

#[test]
fn perfect_linear_prediction_has_zero_gradient() {
    // One-hot images with a huge diagonal make softmax exactly one-hot.
    let pixels = vec![1.0, 0.0, 0.0, 1.0];
    let data = LabeledDataset::new(2, 1, pixels, vec![0, 1], 2).unwrap();
    let m = Model::from_flat(
        Architecture::linear(2, 2),
        FlatParams(vec![800.0, 0.0, 0.0, 800.0]),
    )
    .unwrap();
    let g = m.gradients(&data, &[0, 1], Exec::Sequential).unwrap();
    assert!(g.grad.iter().all(|&v| v == 0.0), "{:?}", g.grad);
    assert_eq!(g.loss, 0.0);
    assert_eq!(g.correct, 2);
    assert!(m.gradients(&data, &[], Exec::Sequential).is_err());
}

fn finite_difference_check(model: &Model, data: &LabeledDataset, coords: &[usize]) -> f64 {
    let batch: Vec<usize> = (0..data.len()).collect();
    let analytic = model.gradients(data, &batch, Exec::Sequential).unwrap().grad;
    let mut worst: f64 = 0.0;
    for &j in coords {
        let w = model.params()[j];
        let h = 1e-5 * w.abs().max(1.0);
        let mut plus = model.clone();
        plus.params_mut()[j] = w + h;
        let mut minus = model.clone();
        minus.params_mut()[j] = w - h;
        let fd = (plus.loss(data, &batch).unwrap() - minus.loss(data, &batch).unwrap()) / (2.0 * h);
        let err = (analytic[j] - fd).abs() / analytic[j].abs().max(fd.abs()).max(1e-4);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn small_models_match_finite_differences() {
    let data = tiny_images(4, 8, 1);
    for (arch, tol) in [
        (Architecture::linear(64, 10), 1e-6),
        (Architecture::mlp(64, 6, 10), 1e-4),
        (
            Architecture::Cnn {
                side: 8,
                kernels: 2,
                kernel_size: 3,
                stride: 1,
                padding: 1,
                pool: 2,
                classes: 10,
            },
            1e-4,
        ),
    ] {
        let m = Model::init(arch.clone(), &RngStream::new(9)).unwrap();
        let coords: Vec<usize> = (0..m.num_params()).collect();
        let err = finite_difference_check(&m, &data, &coords);
        assert!(err < tol, "{arch:?}: {err}");
    }
}

#[test]
fn gradients_agree_across_policies() {
    let data = tiny_images(70, 28, 2);
    let m = Model::init(Architecture::for_kind(ModelKind::Cnn, 28, 10), &RngStream::new(3)).unwrap();
    let idx: Vec<usize> = (0..70).collect();
    let a = m.gradients(&data, &idx, Exec::Sequential).unwrap();
    let b = m.gradients(&data, &idx, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tiny_cnn_geometry() {
    let arch = Architecture::for_kind(ModelKind::Cnn, 28, 10);
    let layout = arch.layout().unwrap();
    let lens: Vec<_> = layout.iter().map(|b| (b.name, b.len)).collect();
    assert_eq!(
        lens,
        vec![
            ("kernels", 200),
            ("gamma", 8),
            ("beta", 8),
            ("fc_weight", 10 * 8 * 12 * 12),
            ("fc_bias", 10)
        ]
    );
    let bad = Architecture::Cnn {
        side: 28,
        kernels: 8,
        kernel_size: 5,
        stride: 2,
        padding: 0,
        pool: 2,
        classes: 10,
    };
    assert!(matches!(bad.validate(), Err(Error::Config { .. })));
}

#[test]
fn accuracy_examples() {
    let pixels = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let data = LabeledDataset::new(2, 1, pixels, vec![0, 1, 0], 2).unwrap();
    let perfect = Model::from_flat(Architecture::linear(2, 2), FlatParams(vec![1.0, 0.0, 0.0, 1.0]))
        .unwrap();
    assert_eq!(accuracy(&perfect, &data, Exec::Sequential).unwrap(), 1.0);
    let zero = Model::zeros(Architecture::linear(2, 2)).unwrap();
    // Uniform output ties break to class 0.
    assert_eq!(accuracy(&zero, &data, Exec::Parallel).unwrap(), 2.0 / 3.0);

    let balanced = tiny_images(100, 2, 4);
    let zero = Model::zeros(Architecture::linear(4, 10)).unwrap();
    let share0 = balanced.class_counts()[0] as f64 / 100.0;
    assert_eq!(accuracy(&zero, &balanced, Exec::Sequential).unwrap(), share0);
    assert_eq!(share0, 0.1);
    let empty = balanced.select(&[]).unwrap();
    assert!(accuracy(&zero, &empty, Exec::Sequential).is_err());
}

#[test]
fn blobs_are_learned_by_the_linear_model() {
    let data = synthetic_blobs(2, 8, 100, 10.0, &RngStream::new(21)).unwrap();
    let arch = Architecture::linear(8, 2);
    let m = Model::init(arch, &RngStream::new(22)).unwrap();
    // 200 samples give few steps at the MNIST settings; smaller batches and a
    // larger step size let Adam move past the random initialization.
    let opts = TrainOptions {
        batch_size: 16,
        adam: AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        },
        ..TrainOptions::default()
    };
    let (trained, hist) = train(&m, &data, &opts, &RngStream::new(23)).unwrap();
    assert_eq!(hist.len(), 10);
    let acc = accuracy(&trained, &data, Exec::Sequential).unwrap();
    assert!(acc >= 0.99, "{acc} {hist:?}");
    for w in hist[1..].windows(2) {
        assert!(w[1].loss <= w[0].loss + 0.05, "{hist:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let data = tiny_images(50, 4, 5);
    let m = Model::init(Architecture::mlp(16, 5, 10), &RngStream::new(1)).unwrap();
    let opts = TrainOptions {
        epochs: 1,
        batch_size: 8,
        ..TrainOptions::default()
    };
    let (a, ha) = train(&m, &data, &opts, &RngStream::new(2)).unwrap();
    let seq = TrainOptions {
        exec: Exec::Sequential,
        ..opts
    };
    let (b, hb) = train(&m, &data, &seq, &RngStream::new(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let zero = TrainOptions {
        batch_size: 0,
        ..opts
    };
    assert!(train(&m, &data, &zero, &RngStream::new(2)).is_err());
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let m = Model::init(Architecture::for_kind(ModelKind::Mlp, 28, 10), &RngStream::new(4)).unwrap();
    let bytes = write_checkpoint(&m);
    assert_eq!(read_checkpoint(&bytes, Some(m.architecture())).unwrap(), m);
    let other = Architecture::for_kind(ModelKind::Linear, 28, 10);
    assert!(matches!(read_checkpoint(&bytes, Some(&other)), Err(Error::Config { .. })));
    assert!(read_checkpoint(&bytes[..bytes.len() - 1], None).is_err());
    assert!(read_checkpoint(b"garbage", None).is_err());
}

fn any_arch() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        (1usize..20, 2usize..6).prop_map(|(i, c)| Architecture::linear(i, c)),
        (1usize..20, 1usize..8, 2usize..6).prop_map(|(i, h, c)| Architecture::mlp(i, h, c)),
        (2usize..4, 2usize..5).prop_map(|(k, c)| Architecture::Cnn {
            side: 8,
            kernels: k,
            kernel_size: 3,
            stride: 1,
            padding: 0,
            pool: 2,
            classes: c,
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat_round_trip(arch in any_arch(), seed in any::<u64>()) {
        let m = Model::init(arch.clone(), &RngStream::new(seed)).unwrap();
        let back = Model::from_flat(arch, m.flat_params()).unwrap();
        prop_assert_eq!(&back, &m);
        let mut offset = 0;
        for b in m.layout() {
            prop_assert_eq!(b.offset, offset);
            prop_assert_eq!(m.block(b.name).unwrap(), &m.params()[offset..offset + b.len]);
            offset += b.len;
        }
        prop_assert_eq!(offset, m.num_params());
    }

    #[test]
    fn forward_is_a_distribution(arch in any_arch(), seed in any::<u64>(), scale in 0.1f64..20.0) {
        let mut m = Model::init(arch, &RngStream::new(seed)).unwrap();
        m.params_mut().iter_mut().for_each(|p| *p *= scale);
        let mut gen = RngStream::new(seed ^ 1).rng();
        let x: Vec<f64> = (0..m.input_dim()).map(|_| rand::Rng::random_range(&mut gen, 0.0..1.0)).collect();
        let p = m.forward(&x).unwrap();
        let s: f64 = p.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        prop_assert!(p.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
