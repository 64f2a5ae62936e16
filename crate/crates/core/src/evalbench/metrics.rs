//! Success-rate and trajectory-error metrics.

use std::collections::HashMap;

use super::episode::{EpisodeResult, TrajectoryPoint};
use super::BenchError;

/// 100 × successes / total.
pub fn success_rate(results: &[EpisodeResult]) -> Result<f64, BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty("success_rate"));
    }
    let ok = results.iter().filter(|r| r.success).count();
    Ok(100.0 * ok as f64 / results.len() as f64)
}

/// Linear resample of a trajectory's (x, y) track to `samples` equal-time
/// points spanning its own duration. Normalizing each run to its duration
/// lets a slow agent be compared with the expert point by point.
pub fn resample_positions(traj: &[TrajectoryPoint], samples: usize) -> Vec<(f64, f64)> {
    assert!(samples >= 2 && !traj.is_empty());
    if traj.len() == 1 {
        return vec![(traj[0].x, traj[0].y); samples];
    }
    let t0 = traj[0].t;
    let t1 = traj.last().unwrap().t;
    let mut out = Vec::with_capacity(samples);
    let mut cursor = 0usize;
    for k in 0..samples {
        let t = t0 + (t1 - t0) * k as f64 / (samples - 1) as f64;
        while cursor + 2 < traj.len() && traj[cursor + 1].t < t {
            cursor += 1;
        }
        let (a, b) = (&traj[cursor], &traj[cursor + 1]);
        let span = b.t - a.t;
        let w = if span > 0.0 { ((t - a.t) / span).clamp(0.0, 1.0) } else { 0.0 };
        out.push((a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)));
    }
    out
}

/// Root mean square position error between one agent episode and its
/// expert reference, both resampled to `samples` points.
pub fn episode_rmse(agent: &EpisodeResult, expert: &EpisodeResult, samples: usize) -> f64 {
    let a = resample_positions(&agent.trajectory, samples);
    let e = resample_positions(&expert.trajectory, samples);
    let sum: f64 = a
        .iter()
        .zip(e.iter())
        .map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2))
        .sum();
    (sum / samples as f64).sqrt()
}

/// Mean over successful episodes of the per-episode RMSE against the expert
/// run of the same route. Episodes without a successful expert reference
/// are skipped.
pub fn trajectory_rmse(
    agent: &[EpisodeResult],
    expert: &[EpisodeResult],
    samples: usize,
) -> Result<f64, BenchError> {
    let refs: HashMap<usize, &EpisodeResult> = expert
        .iter()
        .filter(|e| e.success)
        .map(|e| (e.route_id, e))
        .collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for a in agent.iter().filter(|a| a.success) {
        if let Some(e) = refs.get(&a.route_id) {
            sum += episode_rmse(a, e, samples);
            n += 1;
        }
    }
    if n == 0 {
        return Err(BenchError::NoSuccessfulEpisodes);
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::spec::Task;
    use crate::evalbench::FailureReason;

    fn episode(route_id: usize, success: bool, points: Vec<(f64, f64, f64)>) -> EpisodeResult {
        EpisodeResult {
            task: Task::Straight,
            route_id,
            weather: "clear_afternoon".into(),
            repetition: 0,
            seed: 0,
            success,
            failure_reason: if success {
                FailureReason::None
            } else {
                FailureReason::Timeout
            },
            note: None,
            trajectory: points
                .into_iter()
                .map(|(t, x, y)| TrajectoryPoint {
                    t,
                    x,
                    y,
                    heading: 0.0,
                    speed: 0.0,
                    yaw_rate: 0.0,
                })
                .collect(),
            commands_log: Vec::new(),
        }
    }

    fn line(route_id: usize, n: usize, dx: f64, dy: f64) -> EpisodeResult {
        let pts = (0..n)
            .map(|k| (k as f64 * 0.1, k as f64 + dx, 2.0 * k as f64 + dy))
            .collect();
        episode(route_id, true, pts)
    }

    #[test]
    fn success_rate_oracles() {
        let mk = |ok: usize, total: usize| -> Vec<EpisodeResult> {
            (0..total)
                .map(|i| episode(i, i < ok, vec![(0.0, 0.0, 0.0), (0.1, 1.0, 0.0)]))
                .collect()
        };
        assert_eq!(success_rate(&mk(25, 25)).unwrap(), 100.0);
        assert_eq!(success_rate(&mk(0, 25)).unwrap(), 0.0);
        assert_eq!(success_rate(&mk(23, 25)).unwrap(), 92.0);
        assert!(matches!(success_rate(&[]), Err(BenchError::Empty(_))));
    }

    #[test]
    fn identical_trajectories_have_zero_rmse() {
        let a = vec![line(0, 40, 0.0, 0.0)];
        let e = vec![line(0, 40, 0.0, 0.0)];
        assert_eq!(trajectory_rmse(&a, &e, 100).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_the_hypotenuse() {
        let a = vec![line(0, 40, 3.0, 4.0)];
        let e = vec![line(0, 40, 0.0, 0.0)];
        let rmse = trajectory_rmse(&a, &e, 100).unwrap();
        assert!((rmse - 5.0).abs() <= 1e-9, "{rmse}");
    }

    #[test]
    fn outer_mean_over_episode_rmses() {
        // Route 0 offset by 1 m, route 1 offset by 3 m: mean must be 2.
        let a = vec![line(0, 40, 1.0, 0.0), line(1, 40, 3.0, 0.0)];
        let e = vec![line(0, 40, 0.0, 0.0), line(1, 40, 0.0, 0.0)];
        let rmse = trajectory_rmse(&a, &e, 100).unwrap();
        assert!((rmse - 2.0).abs() <= 1e-9, "{rmse}");
    }

    #[test]
    fn failed_episodes_are_excluded() {
        let mut bad = line(0, 40, 100.0, 0.0);
        bad.success = false;
        bad.failure_reason = FailureReason::Timeout;
        let a = vec![bad, line(1, 40, 3.0, 4.0)];
        let e = vec![line(0, 40, 0.0, 0.0), line(1, 40, 0.0, 0.0)];
        let rmse = trajectory_rmse(&a, &e, 100).unwrap();
        assert!((rmse - 5.0).abs() <= 1e-9);
        // No successful pairs at all is an error.
        let none: Vec<EpisodeResult> = vec![];
        assert!(matches!(
            trajectory_rmse(&none, &e, 100),
            Err(BenchError::NoSuccessfulEpisodes)
        ));
    }

    #[test]
    fn durations_are_normalized_before_comparison() {
        // Same straight path traced at half speed: identical geometry, so
        // the time-normalized comparison sees no error.
        let fast: Vec<(f64, f64, f64)> = (0..20).map(|k| (k as f64 * 0.1, k as f64, 0.0)).collect();
        let slow: Vec<(f64, f64, f64)> =
            (0..39).map(|k| (k as f64 * 0.1, k as f64 * 0.5, 0.0)).collect();
        let a = vec![episode(0, true, slow)];
        let e = vec![episode(0, true, fast)];
        let rmse = trajectory_rmse(&a, &e, 100).unwrap();
        assert!(rmse <= 1e-9, "{rmse}");
    }

    #[test]
    fn resample_hits_both_endpoints() {
        let tr = line(0, 13, 0.5, -0.25).trajectory;
        let r = resample_positions(&tr, 100);
        assert_eq!(r.len(), 100);
        assert!((r[0].0 - tr[0].x).abs() < 1e-12);
        assert!((r[99].0 - tr.last().unwrap().x).abs() < 1e-12);
        // Monotone x for a monotone input track.
        for w in r.windows(2) {
            assert!(w[1].0 >= w[0].0);
        }
    }

    #[test]
    fn brute_force_formula_equivalence() {
        // Re-evaluate the printed formula directly on resampled tracks.
        let a = vec![line(0, 31, 0.7, -1.1), line(1, 57, -0.4, 0.9)];
        let e = vec![line(0, 44, 0.0, 0.0), line(1, 29, 0.0, 0.0)];
        let t = 100;
        let got = trajectory_rmse(&a, &e, t).unwrap();
        let mut outer = 0.0;
        for (ai, ei) in a.iter().zip(e.iter()) {
            let ra = resample_positions(&ai.trajectory, t);
            let re = resample_positions(&ei.trajectory, t);
            let mut inner = 0.0;
            for k in 0..t {
                inner += (ra[k].0 - re[k].0).powi(2) + (ra[k].1 - re[k].1).powi(2);
            }
            outer += (inner / t as f64).sqrt();
        }
        outer /= a.len() as f64;
        assert!((got - outer).abs() <= 1e-9, "{got} vs {outer}");
    }
}
