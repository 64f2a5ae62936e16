//! Exercises the binary end to end with a miniature configuration.

use std::path::Path;
use std::process::{Command, Output};

use msfsu_core::evalbench::{BenchmarkSpec, Task};
use msfsu_core::model::{ModelConfig, Variant};
use msfsu_core::pipeline::RunConfig;
use msfsu_core::simworld::TownId;

fn msfsu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msfsu"))
        .args(args)
        .env_remove("MSFSU_CONFIG")
        .output()
        .expect("binary runs")
}

fn write_mini_config(root: &Path) -> String {
    let mut cfg = RunConfig::default();
    cfg.paths.dataset_dir = root.join("data");
    cfg.paths.checkpoint_dir = root.join("ckpt");
    cfg.paths.report_dir = root.join("reports");
    cfg.camera.width = 48;
    cfg.camera.height = 36;
    cfg.collect.episodes = 3;
    cfg.collect.max_steps = 60;
    cfg.collect.val_fraction = 0.34;
    cfg.model = ModelConfig::micro(Variant::Msfsu);
    cfg.train.batch_size = 8;
    cfg.train.max_epochs = 1;
    cfg.bench = BenchmarkSpec {
        tasks: vec![Task::Straight],
        weathers: vec!["clear_afternoon".into()],
        repetitions: 1,
        seeds: vec![3],
        routes_per_task: 1,
        trajectory_samples: 10,
        ..BenchmarkSpec::corl2017(TownId::TrainTown)
    };
    let path = root.join("run.toml");
    cfg.save(&path).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn init_writes_a_loadable_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fresh.toml");
    let out = msfsu(&["init", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn collect_makes_one_directory_per_episode_plus_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());
    let out = msfsu(&["collect", "--config", &config, "--episodes", "20", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = dir.path().join("data");
    assert!(data.join("manifest.json").exists());
    let episode_dirs = std::fs::read_dir(&data)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_type().unwrap().is_dir())
        .count();
    assert_eq!(episode_dirs, 20);
}

#[test]
fn full_chain_train_bench_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());

    for step in [
        vec!["collect", "--config", &config],
        vec!["prepare", "--config", &config],
        vec!["train", "--config", &config],
        vec!["bench", "--config", &config],
    ] {
        let out = msfsu(&step);
        assert!(
            out.status.success(),
            "{:?}: {}",
            step,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(dir.path().join("ckpt/msfsu_seed0.ckpt").exists());
    assert!(dir.path().join("reports/train_msfsu_seed0.csv").exists());
    assert!(dir.path().join("reports/bench_msfsu_seed0.csv").exists());

    let replay_out = dir.path().join("frames");
    let out = msfsu(&[
        "replay",
        "--config",
        &config,
        "--episode",
        "0",
        "--out",
        replay_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(replay_out.join("trajectory.png").exists());
    assert!(replay_out.join("yaw_rate.png").exists());

    // Artifact names embed the seed override.
    let out = msfsu(&["train", "--config", &config, "--seed", "5"]);
    assert!(out.status.success());
    assert!(dir.path().join("ckpt/msfsu_seed5.ckpt").exists());
}

#[test]
fn bench_before_train_reports_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());
    let out = msfsu(&["bench", "--config", &config]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing artifact"), "{stderr}");
    assert!(stderr.contains("train"), "{stderr}");
}

#[test]
fn expert_bench_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());
    let out = msfsu(&["bench", "--config", &config, "--expert"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("straight"), "{stdout}");
    assert!(dir.path().join("reports/bench_expert_seed0.csv").exists());
}

#[test]
fn failures_exit_nonzero_with_diagnostics() {
    let out = msfsu(&["frobnicate"]);
    assert!(!out.status.success());

    let out = msfsu(&["collect", "--config", "/nonexistent/run.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.toml"));

    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());
    let out = msfsu(&["train", "--config", &config, "--variant", "resnet"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resnet"));
}

#[test]
fn env_var_supplies_the_config_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_mini_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_msfsu"))
        .args(["collect", "--episodes", "2"])
        .env("MSFSU_CONFIG", &config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("data/manifest.json").exists());
}
