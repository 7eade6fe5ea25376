//! Subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qamcs::metrics::{evaluate, format_float, REPORT_CSV_HEADER};
use qamcs::qamsim::{Phantom, DEFAULT_COUPLING_SPEED, DEFAULT_THICKNESS};
use qamcs::sampling::{apply_sampling, Measurements, SamplingOperator};
use qamcs::unfolded::{self, UnfoldedModel};
use qamcs::{amp, io, ParametricMap};

use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;
use crate::experiment::{self, SeedStream};

#[derive(Debug, Parser)]
#[command(
    name = "qamcs",
    version,
    about = "Compressive-sensing reconstruction of acoustic microscopy maps"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `experiment.out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict to one method.
    #[arg(long, global = true)]
    pub method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate training and test phantoms.
    Phantom,
    /// Simulate the raster scan and estimate speed-of-sound maps.
    Acquire {
        /// Map to use as the phantom instead of the generated test set.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build the sampling operator and sample a map.
    Sample {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sample and reconstruct a map with one method.
    Reconstruct {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Trained model for the unfolded methods.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train an unfolded model on the training phantoms.
    Train,
    /// Score a reconstruction against a reference map.
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// PSNR peak; defaults to the reference dynamic range.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Run every configured method and write the comparison report.
    Compare,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn parse_method(label: &str) -> Result<Method, CliError> {
    Method::from_label(label).ok_or_else(|| {
        let known: Vec<&str> = Method::ALL.iter().map(|m| m.label()).collect();
        CliError::Config(format!(
            "unknown method {label:?}; expected one of {}",
            known.join(", ")
        ))
    })
}

/// Loads the configuration and applies the command-line overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &global.out {
        config.experiment.out_dir = out.clone();
    }
    if let Some(seed) = global.seed {
        config.experiment.seed = seed;
    }
    if let Some(label) = &global.method {
        config.experiment.methods = vec![parse_method(label)?];
    }
    config.validate()?;
    Ok(config)
}

fn single_method(config: &ExperimentConfig, global: &GlobalArgs) -> Result<Method, CliError> {
    match (&global.method, config.experiment.methods.as_slice()) {
        (Some(label), _) => parse_method(label),
        (None, [m]) => Ok(*m),
        _ => Err(CliError::Config(
            "this command needs --method or a single configured method".into(),
        )),
    }
}

fn load_or_first_test(config: &ExperimentConfig, input: Option<&Path>) -> Result<ParametricMap, CliError> {
    match input {
        Some(path) => Ok(io::load_map(path)?),
        None => Ok(experiment::build_dataset(&ExperimentConfig {
            phantom: crate::config::PhantomSection {
                train_count: 0,
                test_count: 1,
                ..config.phantom.clone()
            },
            ..config.clone()
        })?
        .test
        .remove(0)),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli.global)?;
    let out = config.experiment.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    match cli.command {
        Command::Phantom => {
            let dir = out.join("phantoms");
            std::fs::create_dir_all(&dir)?;
            for (stream, prefix, count) in [
                (SeedStream::TrainPhantoms, "train", config.phantom.train_count),
                (SeedStream::TestPhantoms, "test", config.phantom.test_count),
            ] {
                for (i, p) in experiment::generate_phantoms(&config, stream, count)?
                    .iter()
                    .enumerate()
                {
                    io::save_map(&p.sos_map, dir.join(format!("{prefix}_{i:02}.qamp")))?;
                    std::fs::write(dir.join(format!("{prefix}_{i:02}.csv")), p.sos_map.to_csv())?;
                }
            }
            println!(
                "wrote {} phantoms to {}",
                config.phantom.train_count + config.phantom.test_count,
                dir.display()
            );
        }
        Command::Acquire { input } => {
            let dir = out.join("acquired");
            std::fs::create_dir_all(&dir)?;
            let phantoms = match input {
                Some(path) => vec![Phantom {
                    sos_map: io::load_map(path)?,
                    thickness: DEFAULT_THICKNESS,
                    c0: DEFAULT_COUPLING_SPEED,
                    inclusions: 0,
                }],
                None => experiment::generate_phantoms(&config, SeedStream::TestPhantoms, config.phantom.test_count)?,
            };
            let mut summary = String::from("phantom,unresolved\n");
            for (i, p) in phantoms.iter().enumerate() {
                let acq = experiment::acquire(&config, p)?;
                io::save_map(&acq.map, dir.join(format!("sos_{i:02}.qamp")))?;
                summary.push_str(&format!("{i},{}\n", acq.unresolved_count()));
                if i == 0 && config.acquisition.export_rf {
                    experiment::export_rf(&config, p, &dir.join("rf_00"))?;
                }
            }
            std::fs::write(dir.join("unresolved.csv"), &summary)?;
            print!("{summary}");
        }
        Command::Sample { input } => {
            let dir = out.join("sampling");
            std::fs::create_dir_all(&dir)?;
            let map = load_or_first_test(&config, input.as_deref())?;
            let op = experiment::build_sampling(&config)?;
            match &op {
                SamplingOperator::Matrix(a) => io::save_map(&a.to_map()?, dir.join("matrix.qamp"))?,
                SamplingOperator::Mask(m) => io::save_mask(&m.to_record(), dir.join("mask.qamp"))?,
            }
            let y = apply_sampling(&experiment::normalize(&config, &map)?, &op, None)?;
            let mut csv = String::from("block,index,value\n");
            match &y {
                Measurements::Blocks { y, .. } => {
                    for (b, yb) in y.iter().enumerate() {
                        for (i, v) in yb.iter().enumerate() {
                            csv.push_str(&format!("{b},{i},{v:?}\n"));
                        }
                    }
                }
                Measurements::Mask { y, .. } => {
                    for (i, v) in y.iter().enumerate() {
                        csv.push_str(&format!("0,{i},{v:?}\n"));
                    }
                }
            }
            std::fs::write(dir.join("measurements.csv"), csv)?;
            println!(
                "ratio {} with {} measurements",
                format_float(op.compression_ratio()),
                y.total_len()
            );
        }
        Command::Reconstruct { input, checkpoint } => {
            let method = single_method(&config, &cli.global)?;
            let dir = out.join("reconstruct");
            std::fs::create_dir_all(&dir)?;
            let map = load_or_first_test(&config, input.as_deref())?;
            let rec = if method.is_unfolded() {
                let path = checkpoint
                    .ok_or_else(|| CliError::Config("unfolded methods need --checkpoint (see `train`)".into()))?;
                let model: UnfoldedModel = unfolded::load_checkpoint(path)?;
                experiment::reconstruct_unfolded(&config, &model, &map, 0)?
            } else {
                let op = experiment::build_sampling(&config)?;
                let (rec, traces) = experiment::reconstruct_amp(&config, method, &op, &map, 0)?;
                std::fs::write(
                    dir.join(format!("{}_trace.csv", method.label())),
                    amp::trace_csv(&traces[0]),
                )?;
                rec
            };
            io::save_map(&rec, dir.join(format!("{}.qamp", method.label())))?;
            let r = evaluate(&map, &rec, None)?;
            println!(
                "{REPORT_CSV_HEADER}\n{}",
                r.csv_row(method.label(), &config.experiment.freq_label)
            );
        }
        Command::Train => {
            let method = single_method(&config, &cli.global)?;
            let dir = out.join("checkpoints");
            std::fs::create_dir_all(&dir)?;
            let data = experiment::build_dataset(&config)?;
            let report = experiment::train_unfolded(&config, method, &data.train)?;
            unfolded::save_checkpoint(&report.model, dir.join(format!("{}.qamu", method.label())))?;
            std::fs::write(
                dir.join(format!("{}_loss.csv", method.label())),
                unfolded::loss_curve_csv(&report.losses),
            )?;
            if let Some(last) = report.losses.last() {
                println!(
                    "trained {} for {} steps, final loss {}",
                    method.label(),
                    last.step + 1,
                    format_float(last.loss)
                );
            }
        }
        Command::Eval { reference, test, peak } => {
            let r = evaluate(&io::load_map(reference)?, &io::load_map(test)?, peak)?;
            let label = cli.global.method.as_deref().unwrap_or("eval");
            let text = format!(
                "{REPORT_CSV_HEADER}\n{}\n",
                r.csv_row(label, &config.experiment.freq_label)
            );
            std::fs::write(out.join("eval.csv"), &text)?;
            print!("{text}");
        }
        Command::Compare => {
            let outcome = experiment::compare_methods(&config)?;
            print!("{}", crate::report::report_text(&outcome.rows)?);
            let failures = outcome.failures();
            if failures > 0 {
                return Err(CliError::MethodFailures(failures));
            }
        }
    }
    Ok(())
}
