use qamcs::blocks::{block_partition, BlockGrid};
use qamcs::sampling::{gaussian_matrix, LinearOperator};
use qamcs::unfolded::{
    deblock, forward_with_correction, gradient_check, learned_denoiser_apply, reconstruct, sample_blocks, train_model,
    unfolded_forward, DeblockParams, LearnedDenoiser, ModelConfig, TrainConfig, UnfoldedModel,
};
use qamcs::ParametricMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(rows: usize, cols: usize, seed: u64) -> ParametricMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ParametricMap::from_fn(rows, cols, "", |_, _| rng.random_range(0.0..1.0)).unwrap()
}

/// Direct 3x3 cross-correlation with zero borders.
fn naive_conv(x: &[f64], rows: usize, cols: usize, k: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let mut acc = 0.0;
            for a in -1..=1isize {
                for b in -1..=1isize {
                    let (ii, jj) = (i + a, j + b);
                    if ii >= 0 && jj >= 0 && ii < rows as isize && jj < cols as isize {
                        acc += k[((a + 1) * 3 + b + 1) as usize] * x[(ii * cols as isize + jj) as usize];
                    }
                }
            }
            out[(i * cols as isize + j) as usize] = acc;
        }
    }
    out
}

fn random_model(cfg: &ModelConfig, gain_seed: u64) -> UnfoldedModel {
    let mut m = UnfoldedModel::init(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(gain_seed);
    for t in m.denoisers_mut() {
        t.conv2.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
    }
    if let Some(d) = m.deblockers_mut() {
        for p in d {
            p.gain = rng.random_range(-0.5..0.5);
        }
    }
    m
}

#[test]
fn denoiser_matches_naive_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = 3;
    let conv1: Vec<f64> = (0..9 * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let conv2: Vec<f64> = (0..9 * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta = LearnedDenoiser::new(c, conv1.clone(), conv2.clone()).unwrap();
    let x = random_map(6, 6, 3).map_values("", |v| v - 0.5).unwrap();
    let mut expected = vec![0.0; 36];
    for ch in 0..c {
        let h = naive_conv(x.data(), 6, 6, &conv1[ch * 9..(ch + 1) * 9]);
        let a: Vec<f64> = h.iter().map(|v| v.max(0.0)).collect();
        for (e, v) in expected
            .iter_mut()
            .zip(naive_conv(&a, 6, 6, &conv2[ch * 9..(ch + 1) * 9]))
        {
            *e += v;
        }
    }
    let got = learned_denoiser_apply(&x, &theta).unwrap();
    for (g, e) in got.data().iter().zip(&expected) {
        assert!((g - e).abs() < 1e-12);
    }
}

#[test]
fn deblock_examples() {
    let x = random_map(8, 8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut kernel = [0.0; 9];
    kernel.iter_mut().for_each(|k| *k = rng.random_range(-1.0..1.0));
    assert_eq!(deblock(&x, &DeblockParams { kernel, gain: 0.0 }).unwrap(), x);
    assert_eq!(
        deblock(
            &x,
            &DeblockParams {
                kernel: [0.0; 9],
                gain: 0.7
            }
        )
        .unwrap(),
        x
    );
    let out = deblock(&x, &DeblockParams { kernel, gain: 0.7 }).unwrap();
    let corr = naive_conv(x.data(), 8, 8, &kernel);
    for ((o, v), c) in out.data().iter().zip(x.data()).zip(&corr) {
        assert!((o - (v + 0.7 * c)).abs() < 1e-12);
    }
}

#[test]
fn oracle_correction_recovers_signal_in_one_step() {
    for seed in 0..20u64 {
        let cfg = ModelConfig {
            block_size: 4,
            ratio: 0.5,
            iterations: 1,
            channels: 2,
            seed,
            ..Default::default()
        };
        let mut model = UnfoldedModel::init(&cfg).unwrap();
        // arbitrary (non-orthonormal) matrix
        let a = gaussian_matrix(8, 16, seed + 100).unwrap();
        model = UnfoldedModel::new(4, a, false, model.denoisers().to_vec(), None).unwrap();
        let x = random_map(8, 8, seed);
        let (truth, _) = block_partition(&x, 4).unwrap();
        let (y, grid) = sample_blocks(&x, &model).unwrap();
        let oracle = |_: usize, b: usize, xk: &[f64]| -> Vec<f64> {
            truth[b].vectorized().iter().zip(xk).map(|(t, v)| t - v).collect()
        };
        let out = forward_with_correction(&y, &grid, &model, &oracle).unwrap();
        for (o, t) in out.iter().zip(&truth) {
            for (p, q) in o.iter().zip(t.vectorized()) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn zero_iterations_return_back_projection() {
    let a = gaussian_matrix(4, 16, 1).unwrap();
    let model = UnfoldedModel::new(4, a.clone(), false, vec![], None).unwrap();
    let x = random_map(8, 8, 9);
    let (y, grid) = sample_blocks(&x, &model).unwrap();
    let out = unfolded_forward(&y, &grid, &model, "").unwrap();
    let (_, g2) = block_partition(&x, 4).unwrap();
    assert_eq!(grid, g2);
    for (b, yb) in y.iter().enumerate() {
        let back = a.adjoint(yb);
        for (p, v) in back.iter().enumerate() {
            let r = (b / 2) * 4 + p / 4;
            let c = (b % 2) * 4 + p % 4;
            assert_eq!(out.get(r, c), *v);
        }
    }
}

#[test]
fn zero_denoiser_is_linear_iteration() {
    let a = gaussian_matrix(6, 16, 4).unwrap();
    let theta = vec![LearnedDenoiser::zeros(2); 3];
    let model = UnfoldedModel::new(4, a.clone(), false, theta, None).unwrap();
    let x = random_map(4, 4, 1);
    let (y, grid) = sample_blocks(&x, &model).unwrap();
    let out = unfolded_forward(&y, &grid, &model, "").unwrap();
    let mut xk = a.adjoint(&y[0]);
    for _ in 0..3 {
        let ax = a.forward(&xk);
        let z: Vec<f64> = y[0].iter().zip(&ax).map(|(p, q)| p - q).collect();
        let atz = a.adjoint(&z);
        xk = xk.iter().zip(&atz).map(|(p, q)| p + q).collect();
    }
    for (p, q) in out.data().iter().zip(&xk) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    for (trainable_a, deblock) in [(true, true), (false, true), (true, false)] {
        let cfg = ModelConfig {
            block_size: 4,
            ratio: 0.5,
            iterations: 2,
            channels: 4,
            trainable_a,
            deblock,
            seed: 3,
        };
        let model = random_model(&cfg, 17);
        // 10x10 exercises zero padding of the 4x4 blocks
        let sample = random_map(10, 10, 21);
        let err = gradient_check(&model, &sample, 1e-5).unwrap();
        assert!(err < 1e-4, "trainable_a={trainable_a} deblock={deblock}: {err}");
    }
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let cfg = ModelConfig {
        block_size: 4,
        ratio: 0.25,
        iterations: 2,
        channels: 2,
        trainable_a: true,
        deblock: true,
        seed: 1,
    };
    let model = UnfoldedModel::init(&cfg).unwrap();
    let data: Vec<ParametricMap> = (0..3).map(|s| random_map(8, 8, s)).collect();
    let report = train_model(
        &model,
        &data,
        &TrainConfig {
            batch_size: 2,
            learning_rate: 0.0,
            epochs: 1,
            seed: 0,
        },
    )
    .unwrap();
    assert_eq!(report.model, model);
    assert_eq!(report.losses.len(), 2);
}

#[test]
fn training_is_deterministic() {
    let cfg = ModelConfig {
        block_size: 4,
        ratio: 0.25,
        iterations: 2,
        channels: 2,
        trainable_a: true,
        deblock: true,
        seed: 1,
    };
    let model = UnfoldedModel::init(&cfg).unwrap();
    let data: Vec<ParametricMap> = (0..5).map(|s| random_map(8, 8, s)).collect();
    let tc = TrainConfig {
        batch_size: 2,
        learning_rate: 1e-3,
        epochs: 3,
        seed: 4,
    };
    let r1 = train_model(&model, &data, &tc).unwrap();
    let r2 = train_model(&model, &data, &tc).unwrap();
    assert_eq!(r1, r2);
    let bits = |r: &qamcs::unfolded::TrainReport| r.losses.iter().map(|l| l.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&r1), bits(&r2));
}

#[test]
fn training_rejects_mixed_shapes() {
    let model = UnfoldedModel::init(&ModelConfig {
        block_size: 4,
        iterations: 1,
        channels: 1,
        ..Default::default()
    })
    .unwrap();
    let data = vec![random_map(8, 8, 0), random_map(8, 4, 1)];
    assert!(train_model(&model, &data, &TrainConfig::default()).is_err());
    assert!(train_model(&model, &[], &TrainConfig::default()).is_err());
}

#[test]
fn reconstruct_keeps_shape() {
    let model = UnfoldedModel::init(&ModelConfig {
        block_size: 4,
        iterations: 2,
        channels: 2,
        deblock: true,
        ..Default::default()
    })
    .unwrap();
    let x = random_map(9, 7, 2);
    let out = reconstruct(&x, &model).unwrap();
    assert_eq!(out.shape(), (9, 7));
    assert_eq!(BlockGrid::new(9, 7, 4).unwrap().n_blocks(), 6);
}
