use super::episode::{run_episode, EpisodeResult, RunOverrides};
use super::HarnessError;
use crate::scenarios::ScenarioSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Episodes per batch when the caller does not say.
pub const DEFAULT_EPISODES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub n_total: u64,
    /// Collision-free episodes.
    pub n_cf: u64,
    /// `100 · n_cf / n_total`.
    pub success_rate: f64,
    /// Over episodes with a finite min distance; `None` if there are none.
    pub min_distance_mean: Option<f64>,
    /// Sample standard deviation (n − 1); 0 for a single episode.
    pub min_distance_std: Option<f64>,
    /// Mean fused object count per tick index, over episodes that reached it.
    pub fused_count_series: Vec<f64>,
    pub ego_only_count_series: Vec<f64>,
}

pub fn success_rate(n_cf: u64, n_total: u64) -> f64 {
    if n_total == 0 {
        return 0.0;
    }
    (n_cf * 100) as f64 / n_total as f64
}

fn mean_series(episodes: &[EpisodeResult], f: impl Fn(&super::TickRow) -> usize) -> Vec<f64> {
    let len = episodes.iter().map(|e| e.rows.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let vals: Vec<f64> = episodes
                .iter()
                .filter_map(|e| e.rows.get(k))
                .map(|r| f(r) as f64)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

impl BatchStats {
    pub fn from_episodes(episodes: &[EpisodeResult]) -> Self {
        let n_total = episodes.len() as u64;
        let n_cf = episodes.iter().filter(|e| !e.collision).count() as u64;
        let d: Vec<f64> = episodes
            .iter()
            .map(|e| e.min_distance)
            .filter(|d| d.is_finite())
            .collect();
        let (mean, std) = if d.is_empty() {
            (None, None)
        } else {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let std = if d.len() > 1 {
                (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (Some(mean), Some(std))
        };
        Self {
            n_total,
            n_cf,
            success_rate: success_rate(n_cf, n_total),
            min_distance_mean: mean,
            min_distance_std: std,
            fused_count_series: mean_series(episodes, |r| r.fused_count),
            ego_only_count_series: mean_series(episodes, |r| r.ego_only_count),
        }
    }
}

/// A finished batch: the effective scenario, its episodes in seed order and
/// their statistics.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub spec: ScenarioSpec,
    pub overrides: RunOverrides,
    pub base_seed: u64,
    pub episodes: Vec<EpisodeResult>,
    pub stats: BatchStats,
}

impl BatchRun {
    pub fn seeds(&self) -> Vec<u64> {
        self.episodes.iter().map(|e| e.seed).collect()
    }
}

/// Runs seeds `base_seed .. base_seed + n` in parallel.
pub fn run_batch(
    spec: &ScenarioSpec,
    n: usize,
    base_seed: u64,
    overrides: &RunOverrides,
) -> Result<BatchRun, HarnessError> {
    if n == 0 {
        return Err(HarnessError::InvalidOverride(
            "episode count must be ≥ 1".into(),
        ));
    }
    let effective = overrides.apply(spec)?;
    let mut episodes = (0..n as u64)
        .into_par_iter()
        .map(|i| run_episode(&effective, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()?;
    episodes.sort_by_key(|e| e.seed);
    let stats = BatchStats::from_episodes(&episodes);
    Ok(BatchRun {
        spec: effective,
        overrides: *overrides,
        base_seed,
        episodes,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::super::episode::TerminationReason;
    use super::*;

    fn fake(seed: u64, collision: bool, d: f64) -> EpisodeResult {
        EpisodeResult {
            seed,
            collision,
            collided_with: None,
            min_distance: if collision { 0.0 } else { d },
            ticks: 0,
            termination: TerminationReason::Timeout,
            rows: Vec::new(),
        }
    }

    #[test]
    fn three_of_four_is_75_percent() {
        let eps = vec![
            fake(0, false, 2.0),
            fake(1, true, 0.0),
            fake(2, false, 4.0),
            fake(3, false, 6.0),
        ];
        let s = BatchStats::from_episodes(&eps);
        assert_eq!((s.n_total, s.n_cf), (4, 3));
        assert_eq!(s.success_rate, 75.0);
        assert_eq!(s.min_distance_mean, Some(3.0));
        // Oracle: sample variance of {2, 0, 4, 6} is 20 / 3.
        assert!((s.min_distance_std.unwrap() - (20.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_episode_has_zero_std() {
        let s = BatchStats::from_episodes(&[fake(0, false, 2.5)]);
        assert_eq!(s.min_distance_std, Some(0.0));
        assert_eq!(s.success_rate, 100.0);
    }

    #[test]
    fn rates_are_exact_ratios() {
        for total in 1..=60u64 {
            for cf in 0..=total {
                let r = success_rate(cf, total);
                assert_eq!(r, (cf * 100) as f64 / total as f64);
                assert!((0.0..=100.0).contains(&r));
            }
        }
    }

    #[test]
    fn stats_ignore_episode_order() {
        let mut eps = vec![fake(0, false, 1.0), fake(1, true, 0.0), fake(2, false, 7.5)];
        let a = BatchStats::from_episodes(&eps);
        eps.reverse();
        assert_eq!(a.n_cf, BatchStats::from_episodes(&eps).n_cf);
        assert_eq!(a.success_rate, BatchStats::from_episodes(&eps).success_rate);
    }

    #[test]
    fn zero_episodes_rejected() {
        let spec = crate::scenarios::builtin("pipeline4").unwrap();
        assert!(run_batch(&spec, 0, 0, &RunOverrides::default()).is_err());
    }
}
