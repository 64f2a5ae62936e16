//! The six pipeline stages behind the CLI subcommands. Every stage is a
//! plain function over a `RunConfig` so tests can drive the full
//! collect -> prepare -> train -> bench chain in-process.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::PipelineError;
use crate::datapipe::{
    balance_multiplicities, load_episode_samples, load_sample, read_manifest, read_records,
    record_episode, write_manifest, BalanceReport, DatasetManifest, EpisodeEntry, EpisodeSettings,
    FrameRecord,
};
use crate::evalbench::{
    generate_routes, make_ablation, run_benchmark, save_lines, training_weathers, BenchmarkReport,
    DrivingAgent, ExpertAgent, ModelAgent, RouteProfile, Series,
};
use crate::geom::{splitmix64, wrap_angle};
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, Variant};
use crate::simworld::{build_town, WeatherParams};
use crate::training::{train_model, LossWeights, TrainData, TrainReport};

fn episode_seed(seed: u64, i: usize) -> u64 {
    splitmix64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// `{variant}_seed{seed}`, the stem shared by checkpoints and reports.
pub fn artifact_tag(variant: Variant, seed: u64) -> String {
    format!("{}_seed{seed}", variant.name().to_lowercase())
}

pub fn checkpoint_path(cfg: &RunConfig, variant: Variant) -> PathBuf {
    cfg.paths
        .checkpoint_dir
        .join(format!("{}.ckpt", artifact_tag(variant, cfg.seed)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectSummary {
    pub episodes: usize,
    pub frames: usize,
    pub reached_goal: usize,
}

/// Record expert episodes with steering-noise injection into the dataset
/// directory, one subdirectory per episode plus a manifest. Routes cycle
/// through the three turn profiles and weathers through the training set.
pub fn collect(cfg: &RunConfig) -> Result<CollectSummary, PipelineError> {
    cfg.validate()?;
    let map = build_town(cfg.collect.town);
    let profiles = [
        RouteProfile::NoTurns,
        RouteProfile::SingleTurn,
        RouteProfile::MultiTurn,
    ];
    let per_profile = cfg.collect.episodes.div_ceil(profiles.len());
    let route_lists: Vec<Vec<_>> = profiles
        .iter()
        .map(|p| generate_routes(&map, &cfg.sim, *p, per_profile, cfg.collect.route_seed))
        .collect::<Result<_, _>>()?;
    let weathers = training_weathers();

    std::fs::create_dir_all(&cfg.paths.dataset_dir)?;
    let settings = EpisodeSettings {
        dt: cfg.collect.dt,
        max_steps: cfg.collect.max_steps,
        n_vehicles: cfg.collect.vehicles,
        n_pedestrians: cfg.collect.pedestrians,
        pid: cfg.pid,
    };
    let mut entries = Vec::new();
    let mut frames = 0;
    let mut reached_goal = 0;
    for i in 0..cfg.collect.episodes {
        let route = &route_lists[i % profiles.len()][i / profiles.len()];
        let name = &weathers[i % weathers.len()];
        let weather = WeatherParams::by_name(name)
            .ok_or_else(|| PipelineError::Invalid(format!("unknown weather {name}")))?;
        let dir_name = format!("ep_{i:03}");
        let dir = cfg.paths.dataset_dir.join(&dir_name);
        let mut writer = crate::datapipe::EpisodeWriter::create(&dir)?;
        let seed = episode_seed(cfg.seed, i);
        let outcome = record_episode(
            &map,
            &cfg.sim,
            &cfg.camera,
            route,
            weather.clone(),
            Some(&cfg.noise),
            &settings,
            seed,
            |s| writer.append(&s),
        )?;
        let meta = outcome.meta(&map, &weather, route, &settings, seed);
        writer.finish(&meta)?;
        frames += outcome.n_frames;
        reached_goal += outcome.reached_goal as usize;
        entries.push(EpisodeEntry {
            dir: dir_name,
            meta,
        });
    }
    write_manifest(
        &cfg.paths.dataset_dir,
        &DatasetManifest {
            camera: cfg.camera.clone(),
            episodes: entries,
        },
    )?;
    Ok(CollectSummary {
        episodes: cfg.collect.episodes,
        frames,
        reached_goal,
    })
}

/// `(episode index, frame id)` pairs into the collected dataset. Train
/// pairs carry balancing duplicates; val pairs are noise-stripped only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedIndex {
    pub report: BalanceReport,
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
}

const PREPARED_FILE: &str = "prepared.json";

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareSummary {
    pub report: BalanceReport,
    pub train_len: usize,
    pub val_len: usize,
}

/// Strip noise frames, balance the training split, and write the index of
/// prepared samples next to the dataset manifest. The last episodes (by
/// `val_fraction`) become the validation split, never balanced.
pub fn prepare(cfg: &RunConfig) -> Result<PrepareSummary, PipelineError> {
    let manifest = read_manifest(&cfg.paths.dataset_dir)?;
    let n_eps = manifest.episodes.len();
    if n_eps < 2 {
        return Err(PipelineError::Invalid(format!(
            "dataset has {n_eps} episodes; need at least 2 for a train/val split"
        )));
    }
    let n_val = ((n_eps as f64 * cfg.collect.val_fraction).round() as usize).clamp(1, n_eps - 1);
    let n_train = n_eps - n_val;

    let mut train_pairs_raw = Vec::new();
    let mut train_records = Vec::new();
    let mut val = Vec::new();
    for (ei, entry) in manifest.episodes.iter().enumerate() {
        let records = read_records(cfg.paths.dataset_dir.join(&entry.dir))?;
        for r in records.into_iter().filter(|r| !r.noise_flag) {
            if ei < n_train {
                train_pairs_raw.push((ei, r.frame));
                train_records.push(r);
            } else {
                val.push((ei, r.frame));
            }
        }
    }
    let (mult, report) = balance_multiplicities(&train_records, &cfg.balance, cfg.seed)?;
    let train: Vec<(usize, usize)> = train_pairs_raw
        .iter()
        .zip(&mult)
        .flat_map(|(&pair, &m)| std::iter::repeat_n(pair, m))
        .collect();
    if val.is_empty() {
        return Err(PipelineError::Invalid(
            "validation split is empty; collect longer episodes".into(),
        ));
    }

    let prepared = PreparedIndex {
        report: report.clone(),
        train,
        val,
    };
    let json = serde_json::to_vec_pretty(&prepared)?;
    std::fs::write(cfg.paths.dataset_dir.join(PREPARED_FILE), json)?;
    std::fs::write(
        cfg.paths.dataset_dir.join("balance_report.txt"),
        report.to_text(),
    )?;
    Ok(PrepareSummary {
        train_len: prepared.train.len(),
        val_len: prepared.val.len(),
        report,
    })
}

pub fn read_prepared(cfg: &RunConfig) -> Result<PreparedIndex, PipelineError> {
    let path = cfg.paths.dataset_dir.join(PREPARED_FILE);
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(format!(
            "{} (run prepare first)",
            path.display()
        )));
    }
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Materialize the prepared index into training and validation sets.
/// Duplicated train pairs share one loaded sample via the index list.
pub fn load_prepared(cfg: &RunConfig) -> Result<(TrainData, TrainData), PipelineError> {
    let manifest = read_manifest(&cfg.paths.dataset_dir)?;
    let prepared = read_prepared(cfg)?;

    let mut record_cache: HashMap<usize, Vec<FrameRecord>> = HashMap::new();
    let mut fetch = |ei: usize, fi: usize| -> Result<crate::datapipe::Sample, PipelineError> {
        let entry = manifest.episodes.get(ei).ok_or_else(|| {
            PipelineError::Invalid(format!("prepared index references episode {ei}"))
        })?;
        let dir = cfg.paths.dataset_dir.join(&entry.dir);
        if !record_cache.contains_key(&ei) {
            record_cache.insert(ei, read_records(&dir)?);
        }
        let records = &record_cache[&ei];
        let record = records
            .iter()
            .find(|r| r.frame == fi)
            .ok_or_else(|| {
                PipelineError::Invalid(format!("episode {ei} has no frame {fi}"))
            })?;
        Ok(load_sample(&dir, record)?)
    };

    let mut unique: HashMap<(usize, usize), usize> = HashMap::new();
    let mut samples = Vec::new();
    let mut indices = Vec::with_capacity(prepared.train.len());
    for &(ei, fi) in &prepared.train {
        let idx = match unique.get(&(ei, fi)) {
            Some(&idx) => idx,
            None => {
                samples.push(fetch(ei, fi)?);
                unique.insert((ei, fi), samples.len() - 1);
                samples.len() - 1
            }
        };
        indices.push(idx);
    }
    let mut val_samples = Vec::with_capacity(prepared.val.len());
    for &(ei, fi) in &prepared.val {
        val_samples.push(fetch(ei, fi)?);
    }
    Ok((
        TrainData::with_indices(samples, indices),
        TrainData::plain(val_samples),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub report_csv: PathBuf,
    pub curve_png: PathBuf,
    pub report: TrainReport,
}

/// Train the configured model on the prepared dataset; write a checkpoint,
/// the per-epoch CSV, and a loss-curve plot (train and val totals).
pub fn train(cfg: &RunConfig) -> Result<TrainSummary, PipelineError> {
    train_arm(cfg, cfg.model.clone(), &cfg.loss)
}

fn train_arm(
    cfg: &RunConfig,
    model_cfg: ModelConfig,
    weights: &LossWeights,
) -> Result<TrainSummary, PipelineError> {
    let (train_data, val_data) = load_prepared(cfg)?;
    let variant = model_cfg.variant;
    let (model, report) = train_model(
        &train_data,
        &val_data,
        model_cfg,
        &cfg.train,
        weights,
        cfg.sim.v_max,
        Some(&cfg.augment),
    )?;

    std::fs::create_dir_all(&cfg.paths.checkpoint_dir)?;
    std::fs::create_dir_all(&cfg.paths.report_dir)?;
    let tag = artifact_tag(variant, cfg.seed);
    let checkpoint = checkpoint_path(cfg, variant);
    save_checkpoint(&checkpoint, &model, report.best_epoch, report.best_val_loss)?;

    let report_csv = cfg.paths.report_dir.join(format!("train_{tag}.csv"));
    std::fs::write(&report_csv, report.to_csv())?;

    let curve_png = cfg.paths.report_dir.join(format!("train_{tag}.png"));
    let train_curve =
        Series::from_ys(&report.epochs.iter().map(|r| r.train.total).collect::<Vec<_>>());
    let val_curve =
        Series::from_ys(&report.epochs.iter().map(|r| r.val.total).collect::<Vec<_>>());
    save_lines(&[train_curve, val_curve], 640, 480, &curve_png)?;

    Ok(TrainSummary {
        checkpoint,
        report_csv,
        curve_png,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// The scripted autopilot, no rendering or checkpoint needed.
    Expert,
    /// The trained network for `cfg.model.variant`, loaded from its
    /// checkpoint.
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub report_csv: PathBuf,
    pub archive_dir: PathBuf,
    pub report: BenchmarkReport,
}

fn write_episode_archive(dir: &Path, report: &BenchmarkReport) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let mut index = String::from(
        "episode,task,route_id,weather,repetition,seed,success,failure_reason,note\n",
    );
    for (i, ep) in report.episodes.iter().enumerate() {
        index.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{}\n",
            ep.task,
            ep.route_id,
            ep.weather,
            ep.repetition,
            ep.seed,
            ep.success,
            ep.failure_reason,
            ep.note.as_deref().unwrap_or("")
        ));
        let mut rows = String::from("t,x,y,heading,speed,yaw_rate,command\n");
        for (k, p) in ep.trajectory.iter().enumerate() {
            let command = ep
                .commands_log
                .get(k)
                .or(ep.commands_log.last())
                .map(|c| format!("{c:?}"))
                .unwrap_or_default();
            rows.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.t, p.x, p.y, p.heading, p.speed, p.yaw_rate, command
            ));
        }
        std::fs::write(dir.join(format!("ep_{i:04}.csv")), rows)?;
    }
    std::fs::write(dir.join("episodes.csv"), index)?;
    Ok(())
}

/// Run the configured benchmark with the expert or the trained model.
/// Reads datasets and checkpoints, never writes them; reports go to the
/// report directory as a per-task CSV plus a per-episode archive.
pub fn bench(cfg: &RunConfig, kind: AgentKind) -> Result<BenchSummary, PipelineError> {
    cfg.bench.validate()?;
    let map = build_town(cfg.bench.town);
    let (mut agent, tag): (Box<dyn DrivingAgent>, String) = match kind {
        AgentKind::Expert => (Box::new(ExpertAgent), format!("expert_seed{}", cfg.seed)),
        AgentKind::Model => {
            let path = checkpoint_path(cfg, cfg.model.variant);
            if !path.exists() {
                return Err(PipelineError::MissingArtifact(format!(
                    "{} (run train first)",
                    path.display()
                )));
            }
            let (model, _) = load_checkpoint(&path)?;
            (
                Box::new(ModelAgent::new(model)),
                artifact_tag(cfg.model.variant, cfg.seed),
            )
        }
    };
    let report = run_benchmark(agent.as_mut(), &map, &cfg.sim, &cfg.camera, cfg.pid, &cfg.bench)?;

    std::fs::create_dir_all(&cfg.paths.report_dir)?;
    let report_csv = cfg.paths.report_dir.join(format!("bench_{tag}.csv"));
    std::fs::write(&report_csv, report.to_csv())?;
    let archive_dir = cfg.paths.report_dir.join(format!("bench_{tag}_episodes"));
    write_episode_archive(&archive_dir, &report)?;

    Ok(BenchSummary {
        report_csv,
        archive_dir,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblateSummary {
    pub summary_csv: PathBuf,
    pub arms: Vec<(Variant, TrainSummary, BenchSummary)>,
}

/// Train and benchmark all three variants off one prepared dataset, then
/// write a combined per-task CSV keyed by variant.
pub fn ablate(cfg: &RunConfig) -> Result<AblateSummary, PipelineError> {
    let mut arms = Vec::new();
    let mut combined =
        String::from("variant,task,episodes,successes,success_rate,mean,std,rmse,n_rmse\n");
    for variant in [Variant::Msfsu, Variant::Msf, Variant::Su] {
        let (model_cfg, weights) = make_ablation(variant, &cfg.model, &cfg.loss);
        let trained = train_arm(cfg, model_cfg.clone(), &weights)?;
        let mut arm_cfg = cfg.clone();
        arm_cfg.model = model_cfg;
        let benched = bench(&arm_cfg, AgentKind::Model)?;
        for t in &benched.report.tasks {
            let rmse = t.rmse.map(|v| v.to_string()).unwrap_or_default();
            combined.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                variant.name(),
                t.task,
                t.n_episodes,
                t.n_success,
                t.success_rate,
                t.mean,
                t.std,
                rmse,
                t.n_rmse
            ));
        }
        arms.push((variant, trained, benched));
    }
    std::fs::create_dir_all(&cfg.paths.report_dir)?;
    let summary_csv = cfg
        .paths
        .report_dir
        .join(format!("ablation_seed{}.csv", cfg.seed));
    std::fs::write(&summary_csv, combined)?;
    Ok(AblateSummary { summary_csv, arms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub frames: usize,
    pub trajectory_png: PathBuf,
    pub yaw_rate_png: PathBuf,
}

/// Export one collected episode as per-frame PNGs plus trajectory and
/// yaw-rate figures.
pub fn replay(
    cfg: &RunConfig,
    episode: usize,
    out_dir: &Path,
) -> Result<ReplaySummary, PipelineError> {
    let manifest = read_manifest(&cfg.paths.dataset_dir)?;
    let entry = manifest.episodes.get(episode).ok_or_else(|| {
        PipelineError::MissingArtifact(format!(
            "episode {episode} (dataset has {})",
            manifest.episodes.len()
        ))
    })?;
    let samples = load_episode_samples(cfg.paths.dataset_dir.join(&entry.dir))?;
    if samples.len() < 2 {
        return Err(PipelineError::Invalid(format!(
            "episode {episode} has {} frames; nothing to plot",
            samples.len()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    for s in &samples {
        let (h, w, _) = s.rgb.dim();
        let img = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            image::Rgb([s.rgb[[y, x, 0]], s.rgb[[y, x, 1]], s.rgb[[y, x, 2]]])
        });
        img.save(out_dir.join(format!("frame_{:04}.png", s.record.frame)))?;
    }

    let path: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.record.pose.0, s.record.pose.1))
        .collect();
    let trajectory_png = out_dir.join("trajectory.png");
    save_lines(&[Series::of(path)], 480, 480, &trajectory_png)?;

    let yaw: Vec<(f64, f64)> = samples
        .windows(2)
        .map(|w| {
            let dt = w[1].record.timestamp - w[0].record.timestamp;
            let dh = wrap_angle(w[1].record.pose.2 - w[0].record.pose.2);
            (w[1].record.timestamp, dh / dt)
        })
        .collect();
    let yaw_rate_png = out_dir.join("yaw_rate.png");
    save_lines(&[Series::of(yaw)], 640, 240, &yaw_rate_png)?;

    Ok(ReplaySummary {
        frames: samples.len(),
        trajectory_png,
        yaw_rate_png,
    })
}
