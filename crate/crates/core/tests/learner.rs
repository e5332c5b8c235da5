mod support;

use pedal_core::features::{FeatureLayout, FeatureVector};
use pedal_core::learner::{EstimatorModel, Hyperparams, OnlineLearner, Standardizer};
use pedal_core::metrics::eval_stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout(n: usize) -> FeatureLayout {
    FeatureLayout::from_slots((0..n).map(|i| format!("x{i}")).collect())
}

fn fv(v: Vec<f64>) -> FeatureVector {
    FeatureVector::new(v).unwrap()
}

/// Noiseless linear stream: `y = bias + w . x` with `x` uniform in [0, 1).
fn linear_stream(seed: u64, dims: usize, steps: usize) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dims).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let bias = 0.6;
    (0..steps)
        .map(|_| {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
            let y = bias + w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            (x, y)
        })
        .collect()
}

#[test]
fn constant_target_with_arbitrary_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = EstimatorModel::new(layout(4), Hyperparams::default());
    for _ in 0..500 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        m.train(&fv(x), 0.4).unwrap();
    }
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = m.predict(&fv(x)).unwrap();
        assert!((p - 0.4).abs() < 0.01, "{p}");
    }
}

#[test]
fn one_feature_linear_stream() {
    // y = 0.5 x + 0.1; the optimum is exact, so late prequential error must vanish
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut learner = OnlineLearner::new(layout(1), Hyperparams::default());
    for _ in 0..10_000 {
        let x: f64 = rng.gen();
        learner.train_step(&fv(vec![x]), 0.5 * x + 0.1).unwrap();
    }
    let tail = &learner.log.entries()[9_000..];
    let mae = tail.iter().map(|(p, y)| (p - y).abs()).sum::<f64>() / tail.len() as f64;
    assert!(mae < 0.02, "{mae}");
}

#[test]
fn ten_feature_stream_converges() {
    for seed in [1, 2, 3] {
        let mut learner = OnlineLearner::new(layout(10), Hyperparams::default());
        for (x, y) in linear_stream(seed, 10, 10_000) {
            learner.train_step(&fv(x), y).unwrap();
        }
        let tail = &learner.log.entries()[9_000..];
        let (p, t): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
        let mse = eval_stats(&p, &t).unwrap().mse;
        assert!(mse < 1e-3, "seed {seed}: {mse}");
    }
}

#[test]
fn blind_prediction_depends_only_on_the_prefix() {
    let stream = linear_stream(5, 3, 300);
    let mut full = OnlineLearner::new(layout(3), Hyperparams::default());
    for (x, y) in &stream {
        full.train_step(&fv(x.clone()), *y).unwrap();
    }
    for i in [0, 1, 2, 17, 150, 299] {
        let mut prefix = EstimatorModel::new(layout(3), Hyperparams::default());
        for (x, y) in &stream[..i] {
            prefix.train(&fv(x.clone()), *y).unwrap();
        }
        let p = prefix.predict(&fv(stream[i].0.clone())).unwrap();
        assert_eq!(p.to_bits(), full.log.entries()[i].0.to_bits(), "sample {i}");
    }
}

#[test]
fn identical_streams_give_identical_models() {
    let run = || {
        let mut l = OnlineLearner::new(layout(10), Hyperparams::default());
        for (x, y) in linear_stream(9, 10, 1000) {
            l.train_step(&fv(x), y).unwrap();
        }
        l
    };
    let (a, b) = (run(), run());
    assert_eq!(a.model.snapshot(), b.model.snapshot());
    assert_eq!(a.log, b.log);
}

#[test]
fn predictions_stay_in_clamp_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut l = OnlineLearner::new(layout(3), Hyperparams::default());
    for _ in 0..2000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let y = rng.gen_range(0.0..10.0);
        let blind = l.train_step(&fv(x), y).unwrap();
        assert!((0.0..=2.0).contains(&blind));
    }
}

#[test]
fn standardizer_matches_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![rng.gen_range(-3.0..7.0), 1e4 + rng.gen::<f64>(), rng.gen::<f64>() * 1e-3])
        .collect();
    let mut s = Standardizer::new(3);
    for row in &data {
        s.update(row);
    }
    for i in 0..3 {
        let column: Vec<f64> = data.iter().map(|r| r[i]).collect();
        let (mean, var) = support::mean_var(&column);
        assert!(((s.mean(i) - mean) / mean).abs() < 1e-9);
        assert!(((s.variance(i) - var) / var).abs() < 1e-9);
    }
}

#[test]
fn anti_correlated_log_has_negative_one_rho() {
    let mut l = OnlineLearner::new(layout(1), Hyperparams::default());
    let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 / 10.0, 1.0 - i as f64 / 10.0)).collect();
    for (p, t) in &pairs {
        l.log.push(*p, *t);
    }
    let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let brute = support::kendall_brute(&p, &t).unwrap();
    let stats = l.prequential_stats().unwrap();
    assert_eq!(stats.spearman_rho, Some(-1.0));
    assert_eq!(stats.kendall_tau, Some(brute));
    assert_eq!(brute, -1.0);
}

#[test]
fn snapshot_restore_behaves_identically() {
    let stream = linear_stream(4, 5, 400);
    let mut m = EstimatorModel::new(layout(5), Hyperparams::default());
    for (x, y) in &stream[..200] {
        m.train(&fv(x.clone()), *y).unwrap();
    }
    let mut r = EstimatorModel::restore(&m.snapshot()).unwrap();
    for (x, y) in &stream[200..] {
        let a = m.train(&fv(x.clone()), *y).unwrap();
        let b = r.train(&fv(x.clone()), *y).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(m.snapshot(), r.snapshot());
}
