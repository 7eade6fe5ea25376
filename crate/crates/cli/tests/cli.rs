use std::path::Path;

use qamcs_cli::config::{ExperimentConfig, Method, SamplingKind};
use qamcs_cli::report::{parse_report, report_text};
use qamcs_cli::{compare_methods, export_report, main_with_args, ReportRow};

fn small_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.out_dir = out.to_path_buf();
    c.phantom.rows = 16;
    c.phantom.cols = 16;
    c.phantom.train_count = 3;
    c.phantom.test_count = 2;
    c.phantom.n_inclusions = 1;
    c.sampling.block_size = 8;
    c.unfolded.iterations = 2;
    c.unfolded.channels = 2;
    c.train.epochs = 2;
    c.amp.max_iters = 5;
    c
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

fn row(method: &str, psnr: f64) -> ReportRow {
    ReportRow {
        method: method.into(),
        sampling: "gaussian".into(),
        ratio: 0.25,
        psnr_db: psnr,
        rmse: 0.1 + 1e-17,
        ssim: 0.987654321012345,
        seconds: 0.0,
        error: None,
    }
}

#[test]
fn identity_sampling_without_threshold_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.experiment.methods = vec![Method::AmpSoft];
    c.sampling.kind = SamplingKind::Raster;
    c.sampling.ratio = 1.0;
    c.amp.tau = 0.0;
    c.normalize.offset = 0.0;
    c.normalize.scale = 1.0;
    let outcome = compare_methods(&c).unwrap();
    assert_eq!(outcome.rows.len(), 1);
    assert_eq!(outcome.rows[0].psnr_db, f64::INFINITY);
    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("amp-soft,raster,1.0,inf,0.0,1.0,"));
}

#[test]
fn repeated_runs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    compare_methods(&small_config(a.path())).unwrap();
    compare_methods(&small_config(b.path())).unwrap();
    for file in [
        "report.csv",
        "per_phantom.csv",
        "checkpoints/unfolded-trainedA.qamu",
        "checkpoints/unfolded.qamu",
        "checkpoints/unfolded_loss.csv",
        "maps/amp-cauchy/test_01.qamp",
        "maps/unfolded-trainedA/test_00.qamp",
    ] {
        let fa = std::fs::read(a.path().join(file)).unwrap();
        let fb = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs");
    }
    let per = std::fs::read_to_string(a.path().join("per_phantom.csv")).unwrap();
    assert_eq!(per.lines().count(), 1 + 4 * 2);
}

#[test]
fn different_seed_changes_the_phantoms() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small_config(a.path());
    ca.experiment.methods = vec![Method::AmpSoft];
    let mut cb = ca.clone();
    cb.experiment.out_dir = b.path().to_path_buf();
    cb.experiment.seed = 1;
    compare_methods(&ca).unwrap();
    compare_methods(&cb).unwrap();
    let ra = std::fs::read(a.path().join("reference/test_00.qamp")).unwrap();
    let rb = std::fs::read(b.path().join("reference/test_00.qamp")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn failing_method_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.experiment.methods = vec![Method::AmpSoft, Method::Unfolded];
    c.amp.levels = 4; // 8x8 blocks cannot be split four times
    let outcome = compare_methods(&c).unwrap();
    assert_eq!(outcome.failures(), 1);
    assert!(outcome.rows[0].error.is_some() && outcome.rows[0].psnr_db.is_nan());
    assert!(outcome.rows[1].error.is_none() && outcome.rows[1].psnr_db.is_finite());
    let errors = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(errors.lines().nth(1).unwrap().starts_with("amp-soft,"));
    let code = main_with_args([
        "qamcs",
        "compare",
        "--config",
        write_config(dir.path(), &c).to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn report_export_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    export_report(&[row("amp-soft", 31.5)], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(
        text.lines().next().unwrap(),
        "method,sampling,ratio,psnr_db,rmse,ssim,seconds"
    );

    let rows = vec![row("amp-soft", f64::INFINITY), row("unfolded", 1.0 / 3.0)];
    let parsed = parse_report(&report_text(&rows).unwrap()).unwrap();
    assert_eq!(parsed, rows);
    assert!(report_text(&rows).unwrap().contains(",inf,"));
    assert!(export_report(&[], &path).is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[sampling]\nratio = 2.0\n").unwrap();
    assert_eq!(
        main_with_args(["qamcs", "compare", "--config", bad.to_str().unwrap()]),
        2
    );
    assert_eq!(
        main_with_args([
            "qamcs",
            "compare",
            "--config",
            dir.path().join("missing.toml").to_str().unwrap()
        ]),
        2
    );
    assert_eq!(main_with_args(["qamcs", "frobnicate"]), 2);
    let mut c = small_config(&dir.path().join("out"));
    c.experiment.methods = vec![Method::AmpCauchy];
    let cfg = write_config(dir.path(), &c);
    assert_eq!(
        main_with_args(["qamcs", "compare", "--config", cfg.to_str().unwrap()]),
        0
    );
    assert_eq!(
        main_with_args([
            "qamcs",
            "compare",
            "--config",
            cfg.to_str().unwrap(),
            "--method",
            "lasso"
        ]),
        2
    );
}

#[test]
fn stage_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let c = small_config(&out);
    let cfg = write_config(dir.path(), &c);
    let cfg = cfg.to_str().unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["qamcs", "--config", cfg];
        full.extend_from_slice(args);
        main_with_args(full)
    };
    assert_eq!(run(&["phantom"]), 0);
    let test0 = out.join("phantoms/test_00.qamp");
    assert!(test0.exists() && out.join("phantoms/train_02.qamp").exists());
    assert_eq!(run(&["acquire", "--input", test0.to_str().unwrap()]), 0);
    assert!(out.join("acquired/sos_00.qamp").exists());
    assert_eq!(run(&["sample", "--input", test0.to_str().unwrap()]), 0);
    assert!(out.join("sampling/matrix.qamp").exists() && out.join("sampling/measurements.csv").exists());
    assert_eq!(
        run(&[
            "reconstruct",
            "--method",
            "amp-soft",
            "--input",
            test0.to_str().unwrap()
        ]),
        0
    );
    assert!(out.join("reconstruct/amp-soft.qamp").exists());
    assert_eq!(run(&["reconstruct", "--method", "unfolded"]), 2);
    assert_eq!(run(&["train", "--method", "unfolded-trainedA"]), 0);
    let ckpt = out.join("checkpoints/unfolded-trainedA.qamu");
    assert!(ckpt.exists());
    assert_eq!(
        run(&[
            "reconstruct",
            "--method",
            "unfolded-trainedA",
            "--checkpoint",
            ckpt.to_str().unwrap()
        ]),
        0
    );
    let rec = out.join("reconstruct/unfolded-trainedA.qamp");
    assert_eq!(
        run(&[
            "eval",
            "--reference",
            test0.to_str().unwrap(),
            "--test",
            rec.to_str().unwrap()
        ]),
        0
    );
    let eval = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    assert_eq!(eval.lines().next().unwrap(), "method,freq_label,psnr,rmse,ssim");
    let before = std::fs::read(&test0).unwrap();
    assert_eq!(run(&["--seed", "5", "phantom"]), 0);
    assert_ne!(std::fs::read(&test0).unwrap(), before);
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(path).unwrap(), ExperimentConfig::default());
}
