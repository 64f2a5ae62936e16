//! End-to-end pipeline flow on a miniature configuration: collect expert
//! episodes, prepare, train a micro model, benchmark it, and replay.

use msfsu_core::evalbench::{BenchmarkSpec, Task};
use msfsu_core::model::{ModelConfig, Variant};
use msfsu_core::pipeline::{
    ablate, bench, collect, prepare, replay, train, AgentKind, RunConfig,
};
use msfsu_core::simworld::TownId;
use std::path::Path;

fn mini_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = 7;
    cfg.paths.dataset_dir = root.join("data");
    cfg.paths.checkpoint_dir = root.join("ckpt");
    cfg.paths.report_dir = root.join("reports");
    cfg.camera.width = 48;
    cfg.camera.height = 36;
    cfg.collect.episodes = 3;
    cfg.collect.max_steps = 250;
    cfg.collect.val_fraction = 0.34;
    cfg.model = ModelConfig::micro(Variant::Msfsu);
    cfg.train.batch_size = 8;
    cfg.train.max_epochs = 2;
    cfg.bench = BenchmarkSpec {
        tasks: vec![Task::Straight],
        weathers: vec!["clear_afternoon".into()],
        repetitions: 1,
        seeds: vec![3],
        routes_per_task: 2,
        trajectory_samples: 20,
        ..BenchmarkSpec::corl2017(TownId::TrainTown)
    };
    cfg
}

fn run_chain(root: &Path) -> (String, String, String) {
    let cfg = mini_config(root);
    let collected = collect(&cfg).unwrap();
    assert_eq!(collected.episodes, 3);
    assert!(collected.frames > 50, "frames {}", collected.frames);
    // The multi-turn route outruns the tiny step cap; truncated episodes
    // still contribute frames.
    assert!(collected.reached_goal >= 1);

    let prepared = prepare(&cfg).unwrap();
    assert!(prepared.train_len > 0);
    assert!(prepared.val_len > 0);
    assert_eq!(prepared.report.final_total, prepared.train_len);

    let trained = train(&cfg).unwrap();
    assert!(trained.checkpoint.exists());
    assert!(trained.report_csv.exists());
    assert!(trained.curve_png.exists());
    assert_eq!(trained.report.epochs.len(), 2);

    let benched = bench(&cfg, AgentKind::Model).unwrap();
    assert!(benched.report_csv.exists());
    assert!(benched.archive_dir.join("episodes.csv").exists());
    assert!(benched.archive_dir.join("ep_0000.csv").exists());
    assert_eq!(benched.report.episodes.len(), 2);

    (
        std::fs::read_to_string(&trained.report_csv).unwrap(),
        std::fs::read_to_string(&benched.report_csv).unwrap(),
        std::fs::read_to_string(benched.archive_dir.join("episodes.csv")).unwrap(),
    )
}

#[test]
fn full_chain_produces_identical_reports_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_chain(dir_a.path());
    let b = run_chain(dir_b.path());
    assert_eq!(a.0, b.0, "train CSVs differ");
    assert_eq!(a.1, b.1, "bench CSVs differ");
    assert_eq!(a.2, b.2, "episode archives differ");
}

#[test]
fn expert_bench_and_replay_from_one_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(dir.path());
    collect(&cfg).unwrap();

    let benched = bench(&cfg, AgentKind::Expert).unwrap();
    assert_eq!(benched.report.tasks[0].success_rate, 100.0);
    assert!(benched
        .report_csv
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("bench_expert_seed7"));

    let out = dir.path().join("replay_out");
    let summary = replay(&cfg, 0, &out).unwrap();
    assert!(summary.frames >= 2);
    assert!(summary.trajectory_png.exists());
    assert!(summary.yaw_rate_png.exists());
    let n_pngs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("frame_")
        })
        .count();
    assert_eq!(n_pngs, summary.frames);

    assert!(replay(&cfg, 99, &out).is_err(), "episode out of range");
}

#[test]
fn ablate_writes_three_checkpoints_and_a_combined_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mini_config(dir.path());
    cfg.collect.episodes = 2;
    cfg.collect.val_fraction = 0.5;
    cfg.train.max_epochs = 1;
    cfg.bench.routes_per_task = 1;
    collect(&cfg).unwrap();
    prepare(&cfg).unwrap();

    let summary = ablate(&cfg).unwrap();
    assert_eq!(summary.arms.len(), 3);
    let names: Vec<&str> = summary.arms.iter().map(|(v, _, _)| v.name()).collect();
    assert_eq!(names, ["MSFSU", "MSF", "SU"]);
    for (_, trained, benched) in &summary.arms {
        assert!(trained.checkpoint.exists());
        assert!(benched.report_csv.exists());
    }
    let combined = std::fs::read_to_string(&summary.summary_csv).unwrap();
    for name in ["MSFSU,", "MSF,", "SU,"] {
        assert!(combined.contains(name), "missing {name} rows:\n{combined}");
    }
    // One header plus one row per variant per task.
    assert_eq!(combined.trim_end().lines().count(), 1 + 3);
}
