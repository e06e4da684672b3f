//! Method comparison and parameter sweeps (ideal vs random vs given).
//!
//! Every arm of one run shares the analysis it is given, so the PCA model
//! is fitted once and all scores live in the same PC1 space.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{HistogramKind, WindowPartition};
use crate::pipeline::{Analysis, Scorer, ScoringParams};
use crate::representativeness::{Method, SampleSet, ScoreMode};
use crate::selection::{random_baseline, select_ideal, BaselineConfig, MemberPick, SelectionConfig};

/// Shared knobs for comparisons and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_sites: usize,
    /// Selection histogram bins. Unset: one per site.
    pub bins: Option<usize>,
    pub window: usize,
    pub seed: u64,
    pub trials: usize,
    pub kind: HistogramKind,
    pub pick: MemberPick,
    pub scoring: ScoringParams,
}

impl ExperimentConfig {
    pub fn new(n_sites: usize, seed: u64) -> Self {
        ExperimentConfig {
            n_sites,
            bins: None,
            window: 1,
            seed,
            trials: 1000,
            kind: HistogramKind::EqualWidth,
            pick: MemberPick::Random,
            scoring: ScoringParams::default(),
        }
    }

    fn selection(&self, n_sites: usize, bins: usize, window: usize) -> SelectionConfig {
        SelectionConfig {
            n_sites,
            bins,
            window,
            seed: self.seed,
            kind: self.kind,
            pick: self.pick,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub mode: ScoreMode,
    #[serde(rename = "R")]
    pub r: f64,
    /// Position among the random trials, when a baseline was run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode: ScoreMode,
    pub n_sites: usize,
    pub trials: usize,
    pub ideal_truncated: bool,
    pub rows: Vec<MethodScore>,
}

impl Comparison {
    /// Refuses rows scored under different modes.
    pub fn new(
        rows: Vec<MethodScore>,
        n_sites: usize,
        trials: usize,
        ideal_truncated: bool,
    ) -> Result<Self> {
        let mode = rows
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty comparison".into()))?
            .mode;
        if rows.iter().any(|r| r.mode != mode) {
            return Err(Error::InvalidConfig(
                "cannot compare R values computed under different scoring modes".into(),
            ));
        }
        Ok(Comparison {
            mode,
            n_sites,
            trials,
            ideal_truncated,
            rows,
        })
    }

    pub fn get(&self, method: Method) -> Option<&MethodScore> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mode,R,percentile\n");
        for r in &self.rows {
            let method = serde_json::to_value(r.method).expect("enum serializes");
            let mode = serde_json::to_value(r.mode).expect("enum serializes");
            let pct = r.percentile.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                method.as_str().unwrap_or_default(),
                mode.as_str().unwrap_or_default(),
                r.r,
                pct
            );
        }
        out
    }
}

fn scorer_for(analysis: &Analysis, cfg: &ExperimentConfig, bins: usize, window: usize) -> Result<Scorer> {
    let mut params = cfg.scoring.clone();
    params.bins.get_or_insert(bins);
    if params.mode == ScoreMode::WindowCoverage && cfg.scoring.bins.is_none() {
        params.window = window;
        params.kind = cfg.kind;
    }
    analysis.scorer(&params, bins)
}

/// Scores the given sample, the greedy ideal selection and the random
/// baseline under one scoring mode.
pub fn compare_methods(
    analysis: &Analysis,
    given: Option<&SampleSet>,
    cfg: &ExperimentConfig,
) -> Result<Comparison> {
    let bins = cfg.bins.unwrap_or(cfg.n_sites);
    let scorer = scorer_for(analysis, cfg, bins, cfg.window)?;
    let p = &analysis.projection;
    let mode = scorer.mode();

    let hist = analysis.histogram(bins, cfg.kind)?;
    let wp = WindowPartition::new(bins, cfg.window)?;
    let selection = select_ideal(&hist, &wp, &cfg.selection(cfg.n_sites, bins, cfg.window))?;
    let ideal_r = scorer.score_rows(p, &selection.centroids());

    let baseline = (cfg.trials > 0)
        .then(|| {
            random_baseline(
                analysis.n_rows(),
                &BaselineConfig {
                    n_sites: cfg.n_sites,
                    trials: cfg.trials,
                    seed: cfg.seed,
                },
                |rows| scorer.score_rows(p, rows),
            )
        })
        .transpose()?;
    let pct = |r: f64| baseline.as_ref().map(|b| b.percentile_of(r));

    let mut rows = Vec::new();
    if let Some(given) = given {
        let r = scorer.score_samples(given);
        rows.push(MethodScore {
            method: Method::Given,
            mode,
            r,
            percentile: pct(r),
        });
    }
    rows.push(MethodScore {
        method: Method::Ideal,
        mode,
        r: ideal_r,
        percentile: pct(ideal_r),
    });
    if let Some(b) = &baseline {
        rows.push(MethodScore {
            method: Method::Random,
            mode,
            r: b.mean_r,
            percentile: None,
        });
    }
    Comparison::new(rows, cfg.n_sites, cfg.trials, selection.truncated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Centroids,
    Bins,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Centroids => "centroids",
            SweepAxis::Bins => "bins",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroids" | "n" => Ok(SweepAxis::Centroids),
            "bins" => Ok(SweepAxis::Bins),
            _ => Err(Error::InvalidConfig(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub ideal_r: f64,
    pub random_r: Option<f64>,
    pub given_r: Option<f64>,
    pub truncated: bool,
}

/// Parameters held fixed across one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFixed {
    pub n_sites: Option<usize>,
    pub bins: Option<usize>,
    pub window: usize,
    pub seed: u64,
    pub trials: usize,
    pub mode: ScoreMode,
    pub kind: HistogramKind,
    pub colors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub fixed: SweepFixed,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn ideal(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ideal_r).collect()
    }

    pub fn random(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.random_r).collect()
    }
}

pub const SWEEP_CSV_HEADER: &str = "axis,value,window,ideal_r,random_r,given_r,truncated";

/// One CSV for any number of sweeps (e.g. one per window size).
pub fn sweeps_csv(sweeps: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for s in sweeps {
        for p in &s.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.axis.as_str(),
                p.value,
                s.fixed.window,
                p.ideal_r,
                opt(p.random_r),
                opt(p.given_r),
                p.truncated
            );
        }
    }
    out
}

fn strictly_ascending(values: &[usize], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("no {what} values to sweep")));
    }
    if values[0] == 0 || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "{what} values must be positive and strictly ascending"
        )));
    }
    Ok(())
}

/// R against the number of sites, with the selection histogram held at
/// `cfg.bins` (default: the largest site count) so greedy picks for larger
/// counts extend those for smaller ones.
pub fn sweep_centroids(
    analysis: &Analysis,
    n_values: &[usize],
    given: Option<&SampleSet>,
    cfg: &ExperimentConfig,
) -> Result<SweepResult> {
    strictly_ascending(n_values, "site count")?;
    let largest = *n_values.last().expect("non-empty");
    if largest > analysis.n_rows() {
        return Err(Error::TooManySites {
            requested: largest,
            available: analysis.n_rows(),
        });
    }
    let bins = cfg.bins.unwrap_or(largest);
    let hist = analysis.histogram(bins, cfg.kind)?;
    let wp = WindowPartition::new(bins, cfg.window)?;
    let scorer = scorer_for(analysis, cfg, bins, cfg.window)?;
    let p = &analysis.projection;
    let given_r = given.map(|g| scorer.score_samples(g));

    let points = n_values
        .par_iter()
        .map(|&n| -> Result<SweepPoint> {
            let sel = select_ideal(&hist, &wp, &cfg.selection(n, bins, cfg.window))?;
            let random_r = (cfg.trials > 0)
                .then(|| {
                    random_baseline(
                        analysis.n_rows(),
                        &BaselineConfig {
                            n_sites: n,
                            trials: cfg.trials,
                            seed: cfg.seed,
                        },
                        |rows| scorer.score_rows(p, rows),
                    )
                    .map(|b| b.mean_r)
                })
                .transpose()?;
            Ok(SweepPoint {
                value: n,
                ideal_r: scorer.score_rows(p, &sel.centroids()),
                random_r,
                given_r,
                truncated: sel.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        axis: SweepAxis::Centroids,
        fixed: SweepFixed {
            n_sites: None,
            bins: Some(bins),
            window: cfg.window,
            seed: cfg.seed,
            trials: cfg.trials,
            mode: scorer.mode(),
            kind: cfg.kind,
            colors: cfg.scoring.colors,
        },
        points,
    })
}

/// R of the ideal selection against the histogram bin count, one result per
/// window size. With window-coverage scoring each cell is scored on its own
/// histogram and windows.
pub fn sweep_bins(
    analysis: &Analysis,
    bin_values: &[usize],
    windows: &[usize],
    given: Option<&SampleSet>,
    cfg: &ExperimentConfig,
) -> Result<Vec<SweepResult>> {
    strictly_ascending(bin_values, "bin")?;
    if windows.is_empty() {
        return Err(Error::InvalidConfig("no window sizes to sweep".into()));
    }
    if cfg.n_sites > analysis.n_rows() {
        return Err(Error::TooManySites {
            requested: cfg.n_sites,
            available: analysis.n_rows(),
        });
    }
    for &w in windows {
        WindowPartition::new(bin_values[0], w)?;
    }
    let p = &analysis.projection;
    let cells: Vec<(usize, usize)> = windows
        .iter()
        .flat_map(|&w| bin_values.iter().map(move |&b| (w, b)))
        .collect();
    let points = cells
        .par_iter()
        .map(|&(w, bins)| -> Result<SweepPoint> {
            let hist = analysis.histogram(bins, cfg.kind)?;
            let wp = WindowPartition::new(bins, w)?;
            let sel = select_ideal(&hist, &wp, &cfg.selection(cfg.n_sites, bins, w))?;
            let scorer = scorer_for(analysis, cfg, bins, w)?;
            let random_r = (cfg.trials > 0)
                .then(|| {
                    random_baseline(
                        analysis.n_rows(),
                        &BaselineConfig {
                            n_sites: cfg.n_sites,
                            trials: cfg.trials,
                            seed: cfg.seed,
                        },
                        |rows| scorer.score_rows(p, rows),
                    )
                    .map(|b| b.mean_r)
                })
                .transpose()?;
            Ok(SweepPoint {
                value: bins,
                ideal_r: scorer.score_rows(p, &sel.centroids()),
                random_r,
                given_r: given.map(|g| scorer.score_samples(g)),
                truncated: sel.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mode = cfg.scoring.mode;
    Ok(windows
        .iter()
        .zip(points.chunks(bin_values.len()))
        .map(|(&w, pts)| SweepResult {
            axis: SweepAxis::Bins,
            fixed: SweepFixed {
                n_sites: Some(cfg.n_sites),
                bins: None,
                window: w,
                seed: cfg.seed,
                trials: cfg.trials,
                mode,
                kind: cfg.kind,
                colors: cfg.scoring.colors,
            },
            points: pts.to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::AnalysisSpec;
    use crate::synth::{generate_synthetic, MixtureSpec};

    fn analysis(n: usize) -> Analysis {
        let d = generate_synthetic(&MixtureSpec::clustered(), n, 3).unwrap();
        Analysis::prepare(&d, &AnalysisSpec::default()).unwrap()
    }

    #[test]
    fn comparison_rejects_mixed_modes() {
        let row = |mode| MethodScore {
            method: Method::Ideal,
            mode,
            r: 0.5,
            percentile: None,
        };
        assert!(Comparison::new(vec![row(ScoreMode::HeatScale), row(ScoreMode::WindowCoverage)], 1, 0, false).is_err());
        assert!(Comparison::new(vec![row(ScoreMode::HeatScale)], 1, 0, false).is_ok());
    }

    #[test]
    fn compare_has_all_arms() {
        let a = analysis(2000);
        let given = SampleSet::from_rows(a.regions(), &a.projection, &[0, 1, 2, 3, 4]);
        let mut cfg = ExperimentConfig::new(5, 1);
        cfg.trials = 50;
        let c = compare_methods(&a, Some(&given), &cfg).unwrap();
        assert_eq!(c.rows.len(), 3);
        assert!(c.get(Method::Random).unwrap().percentile.is_none());
        assert!(c.get(Method::Given).unwrap().percentile.is_some());
        assert_eq!(c.to_csv().lines().count(), 4);
        assert!(c.to_csv().starts_with("method,mode,R,percentile\ngiven,heat-scale,"));
    }

    #[test]
    fn centroid_sweep_is_nested_and_deterministic() {
        let a = analysis(3000);
        let mut cfg = ExperimentConfig::new(0, 9);
        cfg.trials = 20;
        let s = sweep_centroids(&a, &[2, 4, 8, 16], None, &cfg).unwrap();
        let ideal = s.ideal();
        assert!(ideal.windows(2).all(|w| w[1] >= w[0]), "{ideal:?}");
        assert_eq!(s, sweep_centroids(&a, &[2, 4, 8, 16], None, &cfg).unwrap());
        assert!(sweep_centroids(&a, &[4, 2], None, &cfg).is_err());
        assert!(sweep_centroids(&a, &[], None, &cfg).is_err());
    }

    #[test]
    fn bins_sweep_one_result_per_window() {
        let a = analysis(3000);
        let mut cfg = ExperimentConfig::new(6, 2);
        cfg.trials = 0;
        let s = sweep_bins(&a, &[6, 12, 24], &[1, 3], None, &cfg).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].fixed.window, 3);
        assert!(s[0].points.iter().all(|p| p.random_r.is_none()));
        let csv = sweeps_csv(&s);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        // window larger than the smallest bin count
        assert!(sweep_bins(&a, &[6, 12], &[7], None, &cfg).is_err());
    }
}
