//! Windowed histogram-mode greedy selection of ideal sites, and the seeded
//! random-sampling baseline it is compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Histogram, HistogramKind, WindowPartition};

/// How a centroid is drawn from the winning bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberPick {
    /// Uniformly at random from the seeded stream.
    #[default]
    Random,
    /// The member with the median score (lower median).
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_sites: usize,
    pub bins: usize,
    pub window: usize,
    pub seed: u64,
    #[serde(default)]
    pub kind: HistogramKind,
    #[serde(default)]
    pub pick: MemberPick,
}

impl SelectionConfig {
    /// One bin per requested site and a window of one bin.
    pub fn new(n_sites: usize, seed: u64) -> Self {
        SelectionConfig {
            n_sites,
            bins: n_sites,
            window: 1,
            seed,
            kind: HistogramKind::EqualWidth,
            pick: MemberPick::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidConfig("n_sites must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be at least 1".into()));
        }
        if self.window == 0 || self.window > self.bins {
            return Err(Error::InvalidConfig(format!(
                "window {} must be in 1..={}",
                self.window, self.bins
            )));
        }
        Ok(())
    }
}

/// One greedy step: the winning bucket, its window and the region drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pick {
    pub bucket: usize,
    pub window: usize,
    pub frequency: usize,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealSelection {
    pub requested: usize,
    pub picks: Vec<Pick>,
    /// Final used-window flags.
    pub used: Vec<bool>,
    /// Fewer sites than requested: every window holding a non-empty bucket
    /// was used.
    pub truncated: bool,
}

impl IdealSelection {
    pub fn centroids(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.region).collect()
    }
}

/// Repeatedly takes the highest-frequency bucket among windows not used
/// yet. Buckets are scanned in ascending order and a later bucket replaces
/// the current best on equal frequency. Stops early once no unused window
/// has a non-empty bucket.
pub fn select_ideal(
    h: &Histogram,
    wp: &WindowPartition,
    cfg: &SelectionConfig,
) -> Result<IdealSelection> {
    if h.bins() == 0 || h.total() == 0 {
        return Err(Error::EmptyHistogram);
    }
    if wp.bins != h.bins() {
        return Err(Error::DimensionMismatch {
            expected: h.bins(),
            actual: wp.bins,
        });
    }
    if cfg.n_sites == 0 {
        return Err(Error::InvalidConfig("n_sites must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used = vec![false; wp.window_count];
    let mut picks = Vec::with_capacity(cfg.n_sites.min(wp.window_count));
    for _ in 0..cfg.n_sites {
        let mut best: Option<(usize, usize)> = None;
        for (k, &f) in h.frequencies.iter().enumerate() {
            if used[wp.window_of(k)] {
                continue;
            }
            if best.is_none_or(|(_, max)| f >= max) {
                best = Some((k, f));
            }
        }
        let Some((bucket, frequency)) = best.filter(|&(_, f)| f > 0) else {
            break;
        };
        let window = wp.window_of(bucket);
        used[window] = true;
        let members = h.members(bucket);
        let region = match cfg.pick {
            MemberPick::Random => members[rng.random_range(0..members.len())],
            MemberPick::Median => members[(members.len() - 1) / 2],
        };
        picks.push(Pick {
            bucket,
            window,
            frequency,
            region,
        });
    }
    Ok(IdealSelection {
        requested: cfg.n_sites,
        truncated: picks.len() < cfg.n_sites,
        picks,
        used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub n_sites: usize,
    pub trials: usize,
    pub seed: u64,
}

impl BaselineConfig {
    /// The customary 1000 trials.
    pub fn new(n_sites: usize, seed: u64) -> Self {
        BaselineConfig {
            n_sites,
            trials: 1000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub trials: usize,
    pub seed: u64,
    pub n_sites: usize,
    pub r_values: Vec<f64>,
    pub mean_r: f64,
}

impl BaselineResult {
    pub fn percentile_of(&self, r: f64) -> f64 {
        percentile_of(self, r)
    }
}

/// Rows drawn for one trial: `n_sites` distinct rows from the stream
/// `(seed, trial)`, in draw order.
pub fn trial_rows(rows: usize, n_sites: usize, seed: u64, trial: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rand::seq::index::sample(&mut rng, rows, n_sites).into_vec()
}

/// Scores `trials` independent uniform samples without replacement. Each
/// trial owns its own stream, so the result does not depend on how trials
/// are scheduled across threads.
pub fn random_baseline<F>(rows: usize, cfg: &BaselineConfig, scorer: F) -> Result<BaselineResult>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if cfg.n_sites == 0 {
        return Err(Error::InvalidConfig("n_sites must be at least 1".into()));
    }
    if cfg.n_sites > rows {
        return Err(Error::TooManySites {
            requested: cfg.n_sites,
            available: rows,
        });
    }
    let r_values: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| scorer(&trial_rows(rows, cfg.n_sites, cfg.seed, t)))
        .collect();
    let mean_r = r_values.iter().sum::<f64>() / cfg.trials as f64;
    Ok(BaselineResult {
        trials: cfg.trials,
        seed: cfg.seed,
        n_sites: cfg.n_sites,
        r_values,
        mean_r,
    })
}

/// Percentage of trials scoring strictly below `r`.
pub fn percentile_of(b: &BaselineResult, r: f64) -> f64 {
    if b.r_values.is_empty() {
        return 0.0;
    }
    let below = b.r_values.iter().filter(|&&v| v < r).count();
    100.0 * below as f64 / b.r_values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(freqs: &[usize], w: usize, n: usize) -> IdealSelection {
        let h = Histogram::from_frequencies(freqs).unwrap();
        let wp = WindowPartition::new(freqs.len(), w).unwrap();
        let mut cfg = SelectionConfig::new(n, 11);
        cfg.bins = freqs.len();
        cfg.window = w;
        select_ideal(&h, &wp, &cfg).unwrap()
    }

    fn buckets(s: &IdealSelection) -> Vec<usize> {
        s.picks.iter().map(|p| p.bucket).collect()
    }

    #[test]
    fn hand_trace_window_one() {
        let s = run(&[5, 1, 3, 2], 1, 2);
        assert_eq!(buckets(&s), vec![0, 2]);
        assert!(!s.truncated);
    }

    #[test]
    fn hand_trace_window_two() {
        // window 0 = {0,1}, window 1 = {2,3}; 2 beats 1 in window 1
        let s = run(&[5, 4, 1, 2], 2, 2);
        assert_eq!(buckets(&s), vec![0, 3]);
        assert_eq!(s.used, vec![true, true]);
    }

    #[test]
    fn ties_keep_the_later_bucket() {
        let s = run(&[3, 1, 3, 3], 1, 1);
        assert_eq!(buckets(&s), vec![3]);
    }

    #[test]
    fn stops_at_non_zero_buckets() {
        let s = run(&[3, 0, 0, 0], 1, 3);
        assert_eq!(buckets(&s), vec![0]);
        assert!(s.truncated);
        assert_eq!(s.requested, 3);
    }

    #[test]
    fn centroids_come_from_the_winning_bucket() {
        let h = Histogram::from_frequencies(&[2, 6, 1]).unwrap();
        let wp = WindowPartition::new(3, 1).unwrap();
        let mut cfg = SelectionConfig::new(3, 5);
        let s = select_ideal(&h, &wp, &cfg).unwrap();
        for p in &s.picks {
            assert!(h.members(p.bucket).contains(&p.region));
        }
        cfg.pick = MemberPick::Median;
        let s = select_ideal(&h, &wp, &cfg).unwrap();
        assert_eq!(s.picks[0].region, h.members(1)[2]);
    }

    #[test]
    fn seeded_selection_is_deterministic() {
        let h = Histogram::from_frequencies(&[9, 7, 8, 1, 4]).unwrap();
        let wp = WindowPartition::new(5, 1).unwrap();
        let cfg = SelectionConfig::new(4, 99);
        assert_eq!(
            select_ideal(&h, &wp, &cfg).unwrap(),
            select_ideal(&h, &wp, &cfg).unwrap()
        );
    }

    #[test]
    fn baseline_whole_dataset_scores_one() {
        let b = random_baseline(5, &BaselineConfig { n_sites: 5, trials: 4, seed: 1 }, |rows| {
            rows.len() as f64 / 5.0
        })
        .unwrap();
        assert_eq!(b.r_values, vec![1.0; 4]);
        assert_eq!(b.mean_r, 1.0);
    }

    #[test]
    fn baseline_rows_are_distinct_and_reproducible() {
        let a = trial_rows(50, 20, 3, 7);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert_eq!(a, trial_rows(50, 20, 3, 7));
        assert_ne!(a, trial_rows(50, 20, 3, 8));
    }

    #[test]
    fn baseline_errors() {
        let f = |_: &[usize]| 0.0;
        assert!(matches!(
            random_baseline(3, &BaselineConfig { n_sites: 4, trials: 1, seed: 0 }, f),
            Err(Error::TooManySites { .. })
        ));
        assert!(random_baseline(3, &BaselineConfig { n_sites: 1, trials: 0, seed: 0 }, f).is_err());
    }

    #[test]
    fn percentile_convention() {
        let b = BaselineResult {
            trials: 1000,
            seed: 0,
            n_sites: 1,
            r_values: (0..1000).map(|i| i as f64 / 1000.0).collect(),
            mean_r: 0.4995,
        };
        assert_eq!(percentile_of(&b, -1.0), 0.0);
        assert_eq!(percentile_of(&b, 2.0), 100.0);
        // exceeds exactly 480 of the trial values
        assert_eq!(percentile_of(&b, 0.4795), 48.0);
        assert_eq!(percentile_of(&b, 0.48), 48.0);
    }
}
