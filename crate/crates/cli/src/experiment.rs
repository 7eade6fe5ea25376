//! Pipeline stages shared by the subcommands: dataset generation, sampling,
//! reconstruction with each method and the comparison driver.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qamcs::amp::{reconstruct_map, AmpOptions, DenoiserSpec, Threshold};
use qamcs::metrics::{evaluate, MetricReport};
use qamcs::qamsim::{
    acquire_and_map, acquire_rf, generate_phantom, Acquisition, AcquisitionSettings, Phantom, PhantomSpec,
};
use qamcs::sampling::{
    apply_sampling, orthonormal_gaussian_matrix, random_mask, raster_mask, spiral_mask, CsProblem, Measurements,
    NoiseSpec, SamplingOperator,
};
use qamcs::unfolded::{self, ModelConfig, TrainConfig, TrainReport, UnfoldedModel};
use qamcs::{io, ParametricMap};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Method, SamplingKind};
use crate::error::CliError;
use crate::report::{export_report, per_phantom_text, PhantomRow, ReportRow};

pub const SOS_UNIT: &str = "m/s";

/// Independent seed streams derived from the experiment seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum SeedStream {
    TrainPhantoms = 1,
    TestPhantoms = 2,
    Sampling = 3,
    Model = 4,
    Training = 5,
    Noise = 6,
    Amp = 7,
    Acquisition = 8,
}

pub fn derive_seed(base: u64, stream: SeedStream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((stream as u64) << 32) ^ index);
    rng.next_u64()
}

/// Ground-truth maps in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<ParametricMap>,
    pub test: Vec<ParametricMap>,
}

pub fn phantom_spec(config: &ExperimentConfig) -> PhantomSpec {
    PhantomSpec {
        n_inclusions: config.phantom.n_inclusions,
        value_range: (config.phantom.value_min, config.phantom.value_max),
    }
}

pub fn acquisition_settings(config: &ExperimentConfig) -> AcquisitionSettings {
    let a = &config.acquisition;
    AcquisitionSettings {
        f0: a.f0,
        fractional_bandwidth: a.fractional_bandwidth,
        fs: a.fs,
        duration: a.duration,
        a1: a.a1,
        a2: a.a2,
        t1: a.t1,
        attenuation: a.attenuation,
        noise_std: a.noise_std,
        seed: derive_seed(config.experiment.seed, SeedStream::Acquisition, 0),
    }
}

pub fn generate_phantoms(
    config: &ExperimentConfig,
    stream: SeedStream,
    count: usize,
) -> Result<Vec<Phantom>, CliError> {
    let spec = phantom_spec(config);
    (0..count)
        .map(|i| {
            let seed = derive_seed(config.experiment.seed, stream, i as u64);
            Ok(generate_phantom(config.phantom.rows, config.phantom.cols, &spec, seed)?)
        })
        .collect()
}

/// Simulated raster scan of one phantom with the configured pulse.
pub fn acquire(config: &ExperimentConfig, phantom: &Phantom) -> Result<Acquisition, CliError> {
    let settings = acquisition_settings(config);
    let pulse = settings.pulse()?;
    Ok(acquire_and_map(phantom, &pulse, &settings)?)
}

pub fn export_rf(config: &ExperimentConfig, phantom: &Phantom, stem: &Path) -> Result<(), CliError> {
    let settings = acquisition_settings(config);
    let pulse = settings.pulse()?;
    acquire_rf(phantom, &pulse, &settings)?.save(stem)?;
    Ok(())
}

pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset, CliError> {
    let to_maps = |phantoms: Vec<Phantom>| -> Result<Vec<ParametricMap>, CliError> {
        phantoms
            .into_iter()
            .map(|p| {
                if config.acquisition.enabled {
                    Ok(acquire(config, &p)?.map)
                } else {
                    Ok(p.sos_map)
                }
            })
            .collect()
    };
    Ok(Dataset {
        train: to_maps(generate_phantoms(
            config,
            SeedStream::TrainPhantoms,
            config.phantom.train_count,
        )?)?,
        test: to_maps(generate_phantoms(
            config,
            SeedStream::TestPhantoms,
            config.phantom.test_count,
        )?)?,
    })
}

pub fn normalize(config: &ExperimentConfig, map: &ParametricMap) -> Result<ParametricMap, CliError> {
    let (o, s) = (config.normalize.offset, config.normalize.scale);
    Ok(map.map_values("normalized", |v| (v - o) / s)?)
}

pub fn denormalize(config: &ExperimentConfig, map: &ParametricMap) -> Result<ParametricMap, CliError> {
    let (o, s) = (config.normalize.offset, config.normalize.scale);
    Ok(map.map_values(SOS_UNIT, |v| v * s + o)?)
}

pub fn model_seed(config: &ExperimentConfig) -> u64 {
    derive_seed(config.experiment.seed, SeedStream::Model, 0)
}

fn block_measurements(config: &ExperimentConfig) -> usize {
    let n = config.sampling.block_size * config.sampling.block_size;
    ((config.sampling.ratio * n as f64).round() as usize).clamp(1, n)
}

/// Sampling operator used by the classical methods. The Gaussian block
/// matrix is the same one the unfolded models start from.
pub fn build_sampling(config: &ExperimentConfig) -> Result<SamplingOperator, CliError> {
    let (rows, cols) = (config.phantom.rows, config.phantom.cols);
    let ratio = config.sampling.ratio;
    Ok(match config.sampling.kind {
        SamplingKind::Gaussian => {
            let n = config.sampling.block_size * config.sampling.block_size;
            SamplingOperator::Matrix(orthonormal_gaussian_matrix(
                block_measurements(config),
                n,
                model_seed(config),
            )?)
        }
        SamplingKind::Spiral => SamplingOperator::Mask(spiral_mask(rows, cols, ratio)?),
        SamplingKind::Random => SamplingOperator::Mask(random_mask(
            rows,
            cols,
            ratio,
            derive_seed(config.experiment.seed, SeedStream::Sampling, 0),
        )?),
        SamplingKind::Raster => SamplingOperator::Mask(raster_mask(rows, cols, ratio)?),
    })
}

fn noise(config: &ExperimentConfig, index: usize) -> Option<NoiseSpec> {
    (config.sampling.noise_std > 0.0).then(|| NoiseSpec {
        std: config.sampling.noise_std,
        seed: derive_seed(config.experiment.seed, SeedStream::Noise, index as u64),
    })
}

pub fn amp_denoiser(config: &ExperimentConfig, method: Method) -> Result<DenoiserSpec, CliError> {
    let levels = config.amp.levels;
    match method {
        Method::AmpSoft => Ok(DenoiserSpec::SoftWavelet {
            threshold: Threshold::Scaled(config.amp.tau),
            levels,
        }),
        Method::AmpCauchy => Ok(DenoiserSpec::CauchyMap {
            gamma: None,
            sigma: None,
            levels,
        }),
        _ => Err(CliError::Config(format!("{} is not an AMP method", method.label()))),
    }
}

/// Samples `truth` (m/s) with `op` and reconstructs it with an AMP method.
pub fn reconstruct_amp(
    config: &ExperimentConfig,
    method: Method,
    op: &SamplingOperator,
    truth: &ParametricMap,
    index: usize,
) -> Result<(ParametricMap, Vec<Vec<f64>>), CliError> {
    let denoiser = amp_denoiser(config, method)?;
    let x = normalize(config, truth)?;
    let y = apply_sampling(&x, op, noise(config, index))?;
    let problem = CsProblem::new(op.clone(), y, config.sampling.noise_std)?;
    let options = AmpOptions {
        onsager: config.amp.onsager,
        tol: config.amp.tol,
        seed: derive_seed(config.experiment.seed, SeedStream::Amp, index as u64),
        record_iterates: false,
    };
    let rec = reconstruct_map(
        &problem,
        &denoiser,
        config.amp.max_iters,
        &options,
        config.experiment.parallel,
        "normalized",
    )?;
    Ok((denormalize(config, &rec.map)?, rec.traces))
}

pub fn model_config(config: &ExperimentConfig, method: Method) -> Result<ModelConfig, CliError> {
    if !method.is_unfolded() {
        return Err(CliError::Config(format!(
            "{} is not an unfolded method",
            method.label()
        )));
    }
    let learned = method == Method::UnfoldedTrainedA;
    Ok(ModelConfig {
        block_size: config.sampling.block_size,
        ratio: config.sampling.ratio,
        iterations: config.unfolded.iterations,
        channels: config.unfolded.channels,
        trainable_a: learned,
        deblock: learned,
        seed: model_seed(config),
    })
}

pub fn train_config(config: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        batch_size: config.train.batch_size,
        learning_rate: config.train.learning_rate,
        epochs: config.train.epochs,
        seed: derive_seed(config.experiment.seed, SeedStream::Training, 0),
    }
}

/// Initialises and trains an unfolded model on the (m/s) training maps.
pub fn train_unfolded(
    config: &ExperimentConfig,
    method: Method,
    train: &[ParametricMap],
) -> Result<TrainReport, CliError> {
    let model = UnfoldedModel::init(&model_config(config, method)?)?;
    let data = train
        .iter()
        .map(|m| normalize(config, m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(unfolded::train_model(&model, &data, &train_config(config))?)
}

pub fn reconstruct_unfolded(
    config: &ExperimentConfig,
    model: &UnfoldedModel,
    truth: &ParametricMap,
    index: usize,
) -> Result<ParametricMap, CliError> {
    let x = normalize(config, truth)?;
    let op = SamplingOperator::Matrix(model.matrix().clone());
    let Measurements::Blocks { grid, y } = apply_sampling(&x, &op, noise(config, index))? else {
        unreachable!("matrix sampling yields block measurements")
    };
    denormalize(config, &unfolded::unfolded_forward(&y, &grid, model, "normalized")?)
}

/// Label of the sampling scheme a method actually uses.
pub fn sampling_label(config: &ExperimentConfig, method: Method) -> &'static str {
    match method {
        Method::AmpSoft | Method::AmpCauchy => config.sampling.kind.label(),
        Method::Unfolded => "gaussian",
        Method::UnfoldedTrainedA => "learned",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub rows: Vec<ReportRow>,
    pub per_phantom: Vec<PhantomRow>,
    pub out_dir: PathBuf,
}

impl CompareOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method.label())
    }
}

struct MethodRun {
    ratio: f64,
    maps: Vec<ParametricMap>,
    scores: Vec<MetricReport>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn run_method(config: &ExperimentConfig, method: Method, data: &Dataset, out: &Path) -> Result<MethodRun, CliError> {
    let (ratio, maps) = if method.is_unfolded() {
        let report = train_unfolded(config, method, &data.train)?;
        let dir = out.join("checkpoints");
        std::fs::create_dir_all(&dir)?;
        unfolded::save_checkpoint(&report.model, dir.join(format!("{}.qamu", method.label())))?;
        std::fs::write(
            dir.join(format!("{}_loss.csv", method.label())),
            unfolded::loss_curve_csv(&report.losses),
        )?;
        let maps = data
            .test
            .iter()
            .enumerate()
            .map(|(i, t)| reconstruct_unfolded(config, &report.model, t, i))
            .collect::<Result<Vec<_>, _>>()?;
        (report.model.matrix().compression_ratio(), maps)
    } else {
        let op = build_sampling(config)?;
        let maps = data
            .test
            .iter()
            .enumerate()
            .map(|(i, t)| Ok(reconstruct_amp(config, method, &op, t, i)?.0))
            .collect::<Result<Vec<_>, CliError>>()?;
        (op.compression_ratio(), maps)
    };
    let scores = data
        .test
        .iter()
        .zip(&maps)
        .map(|(t, m)| Ok(evaluate(t, m, None)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(MethodRun { ratio, maps, scores })
}

/// Runs every configured method on the held-out phantoms and writes
/// `report.csv`, `per_phantom.csv`, reference and reconstructed maps, and
/// checkpoints under `config.experiment.out_dir`. A failing method yields a
/// row with `NaN` metrics and an entry in `errors.csv`; the others still run.
pub fn compare_methods(config: &ExperimentConfig) -> Result<CompareOutcome, CliError> {
    config.validate()?;
    let out = config.experiment.out_dir.clone();
    std::fs::create_dir_all(out.join("reference"))?;
    std::fs::write(out.join("config.toml"), config.to_toml())?;
    let data = build_dataset(config)?;
    for (i, t) in data.test.iter().enumerate() {
        io::save_map(t, out.join("reference").join(format!("test_{i:02}.qamp")))?;
    }
    let mut rows = Vec::new();
    let mut per_phantom = Vec::new();
    let mut errors = String::new();
    for &method in &config.experiment.methods {
        let label = method.label();
        let sampling = sampling_label(config, method);
        let start = Instant::now();
        match run_method(config, method, &data, &out) {
            Ok(run) => {
                let seconds = if config.experiment.record_timing {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                let dir = out.join("maps").join(label);
                std::fs::create_dir_all(&dir)?;
                for (i, m) in run.maps.iter().enumerate() {
                    io::save_map(m, dir.join(format!("test_{i:02}.qamp")))?;
                }
                for (i, s) in run.scores.iter().enumerate() {
                    per_phantom.push(PhantomRow {
                        method: label.into(),
                        sampling: sampling.into(),
                        ratio: run.ratio,
                        phantom: i,
                        psnr_db: s.psnr_db,
                        rmse: s.rmse,
                        ssim: s.ssim,
                    });
                }
                rows.push(ReportRow {
                    method: label.into(),
                    sampling: sampling.into(),
                    ratio: run.ratio,
                    psnr_db: mean(run.scores.iter().map(|s| s.psnr_db)),
                    rmse: mean(run.scores.iter().map(|s| s.rmse)),
                    ssim: mean(run.scores.iter().map(|s| s.ssim)),
                    seconds,
                    error: None,
                });
            }
            Err(e) => {
                errors.push_str(&format!("{label},{}\n", e.to_string().replace(['\n', ','], " ")));
                rows.push(ReportRow::failed(label, sampling, config.sampling.ratio, e.to_string()));
            }
        }
    }
    export_report(&rows, out.join("report.csv"))?;
    std::fs::write(out.join("per_phantom.csv"), per_phantom_text(&per_phantom))?;
    if !errors.is_empty() {
        std::fs::write(out.join("errors.csv"), format!("method,error\n{errors}"))?;
    }
    Ok(CompareOutcome {
        rows,
        per_phantom,
        out_dir: out,
    })
}
