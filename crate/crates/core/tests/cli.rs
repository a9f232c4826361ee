use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use bsde_ml::cli_reports::{
    cmd_example1, cmd_gradcheck, cmd_pendulum, resolve_config, Cli, Experiment, LossKind,
    RunConfig,
};
use bsde_ml::problems::Parameterization;
use bsde_ml::sde_core::SamplingMode;
use clap::Parser;
use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_bsde-ml");

fn parse(args: &[&str]) -> RunConfig {
    let mut argv = vec!["bsde-ml"];
    argv.extend_from_slice(args);
    resolve_config(&Cli::try_parse_from(argv).unwrap().command).unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.json");
    fs::write(
        &file,
        r#"{"seed": 5, "example1": {"lr": 0.002, "steps": 50, "n": [10]},
            "pendulum": {"sigma0": 0.5, "iterations": 2}}"#,
    )
    .unwrap();
    let path = file.to_str().unwrap();

    let c = parse(&["example1", "--config", path, "--steps", "7"]);
    assert_eq!(c.experiment, Experiment::Example1);
    assert_eq!(c.seed, 5);
    assert_eq!(c.example1.lr, 0.002);
    assert_eq!(c.example1.steps, 7);
    assert_eq!(c.example1.n, vec![10]);
    assert_eq!(c.example1.batch, 32);

    let c = parse(&["example1", "--config", path, "--n", "1", "--n", "100", "--seed", "1"]);
    assert_eq!((c.example1.n.clone(), c.seed), (vec![1, 100], 1));

    let c = parse(&["pendulum", "--config", path, "--mode", "model-free", "--lr", "0.01"]);
    assert_eq!(c.experiment, Experiment::Pendulum);
    assert_eq!(c.pendulum.sigma0, 0.5);
    assert_eq!(c.pendulum.iterations, 2);
    assert_eq!(c.pendulum.mode, SamplingMode::ModelFree);
    assert_eq!(c.pendulum.evaluation.adam.lr, 0.01);
    assert_eq!(c.pendulum.improvement.adam.lr, 0.01);
    assert_eq!(c.pendulum.dt, 0.01);

    let c = parse(&["gradcheck"]);
    assert_eq!(c.experiment, Experiment::Gradcheck);
    assert_eq!(c.seed, 0);
}

#[test]
fn bad_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    fs::write(&file, r#"{"pendulum": {"sigma": 1}}"#).unwrap();
    let cli = Cli::try_parse_from(["bsde-ml", "pendulum", "--config", file.to_str().unwrap()]);
    assert!(resolve_config(&cli.unwrap().command).is_err());
    let missing = dir.path().join("missing.json");
    let cli = Cli::try_parse_from(["bsde-ml", "gradcheck", "--config", missing.to_str().unwrap()]);
    assert!(resolve_config(&cli.unwrap().command).is_err());
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        (any::<u64>(), prop::collection::vec(1usize..200, 1..4), 0usize..3, any::<bool>()),
        (1e-4..1.0f64, 1usize..5000, 1usize..512, 0.0..2.0f64),
        (0usize..10, 1usize..20000, 0.0..3.0f64, any::<bool>(), 1e-6..1e-1f64),
    )
        .prop_map(|((seed, n, loss, well), (lr, steps, batch, theta0), (iters, buf, s0, mf, plr))| {
            let mut c = RunConfig {
                seed,
                ..RunConfig::default()
            };
            c.example1.n = n;
            c.example1.loss = [LossKind::Measurability, LossKind::DeepBsde, LossKind::Martingale][loss];
            c.example1.parameterization = if well {
                Parameterization::WellSpecified
            } else {
                Parameterization::Misspecified
            };
            c.example1.lr = lr;
            c.example1.steps = steps;
            c.example1.batch = batch;
            c.example1.theta0 = theta0;
            c.pendulum.iterations = iters;
            c.pendulum.buffer_capacity = buf;
            c.pendulum.sigma0 = s0;
            c.pendulum.mode = if mf { SamplingMode::ModelFree } else { SamplingMode::ModelBased };
            c.pendulum.evaluation.adam.lr = plr;
            c
        })
}

proptest! {
    #[test]
    fn config_json_round_trip(cfg in arb_config()) {
        prop_assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_str().unwrap();
            let e1 = parse(&["example1", "--n", "2", "--steps", "20", "--out", out, "--seed", "4"]);
            cmd_example1(&e1).unwrap();
            let e1 = parse(&[
                "example1", "--n", "3", "--loss", "martingale", "--param", "mis",
                "--steps", "20", "--out", out,
            ]);
            cmd_example1(&e1).unwrap();
            for mode in ["model-based", "model-free"] {
                let p = parse(&[
                    "pendulum", "--mode", mode, "--iters", "1", "--rollouts", "8", "--buffer", "8",
                    "--batch", "4", "--steps", "10", "--out", out,
                ]);
                cmd_pendulum(&p).unwrap();
            }
            cmd_gradcheck(&parse(&["gradcheck", "--out", out])).unwrap();
            read_dir(dir.path())
        })
        .collect();
    assert_eq!(runs[0].len(), 11);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn different_seed_changes_example1_output() {
    let files: Vec<_> = ["0", "1"]
        .iter()
        .map(|seed| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_str().unwrap();
            cmd_example1(&parse(&["example1", "--steps", "5", "--out", out, "--seed", seed])).unwrap();
            read_dir(dir.path())
        })
        .collect();
    assert_ne!(files[0], files[1]);
}

fn exit_status(args: &[&str]) -> i32 {
    Process::new(BIN).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(exit_status(&["--help"]), 0);
    assert_eq!(exit_status(&["pendulum", "--bogus"]), 1);
    assert_eq!(exit_status(&["example1", "--loss", "hinge"]), 1);
    assert_eq!(exit_status(&["example1", "--lr", "-1", "--out", out]), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{").unwrap();
    assert_eq!(exit_status(&["gradcheck", "--config", bad.to_str().unwrap()]), 1);

    assert_eq!(exit_status(&["gradcheck", "--out", out]), 0);
    let csv = fs::read_to_string(dir.path().join("gradcheck.csv")).unwrap();
    assert!(csv.lines().count() > 10);

    let tiny = ["--iters", "1", "--rollouts", "8", "--buffer", "8", "--batch", "8", "--steps", "3"];
    let mut args = vec!["pendulum", "--sigma0", "1e9", "--out", out];
    args.extend_from_slice(&tiny);
    assert_eq!(exit_status(&args), 2);

    let mut args = vec!["pendulum", "--iters", "0", "--out", out];
    args.extend_from_slice(&tiny[2..]);
    assert_eq!(exit_status(&args), 0);
    let csv = fs::read_to_string(dir.path().join("pendulum_model-based_iterations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
