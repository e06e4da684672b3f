//! Equal-width and equal-frequency histograms over PC1 scores, plus the
//! window (step-kernel) partition of their bins.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::Projection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramKind {
    /// Bins of equal PC1 interval.
    #[default]
    EqualWidth,
    /// Bins of (almost) equal counts, cut at sorted rank.
    EqualFrequency,
}

impl std::str::FromStr for HistogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-width" | "width" => Ok(HistogramKind::EqualWidth),
            "equal-frequency" | "frequency" => Ok(HistogramKind::EqualFrequency),
            _ => Err(Error::InvalidConfig(format!("unknown histogram kind `{s}`"))),
        }
    }
}

/// Serialized as `{kind, edges, frequencies}`; member lists stay in memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub kind: HistogramKind,
    pub edges: Vec<f64>,
    pub frequencies: Vec<usize>,
    #[serde(skip)]
    members: Vec<Vec<usize>>,
    #[serde(skip)]
    assignment: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.frequencies.len()
    }

    pub fn total(&self) -> usize {
        self.assignment.len()
    }

    /// Region indices in `bin`, ordered by ascending score (then index).
    pub fn members(&self, bin: usize) -> &[usize] {
        &self.members[bin]
    }

    /// Bin holding region `i` of the projection the histogram was built on.
    pub fn bin_of_region(&self, i: usize) -> usize {
        self.assignment[i]
    }

    fn p_min(&self) -> f64 {
        self.edges[0]
    }

    fn p_max(&self) -> f64 {
        self.edges[self.bins()]
    }

    /// Bin for an arbitrary score. Scores outside `[p_min, p_max]` clamp to
    /// the first or last bin.
    pub fn bin_of(&self, score: f64) -> usize {
        let last = self.bins() - 1;
        if score <= self.p_min() {
            return 0;
        }
        if score >= self.p_max() {
            return last;
        }
        match self.kind {
            HistogramKind::EqualWidth => {
                equal_width_index(score, self.p_min(), self.p_max(), self.bins())
            }
            HistogramKind::EqualFrequency => {
                self.edges[1..self.bins()].partition_point(|&e| e <= score)
            }
        }
    }

    fn from_assignment(
        kind: HistogramKind,
        edges: Vec<f64>,
        assignment: Vec<usize>,
        scores: &[f64],
    ) -> Self {
        let bins = edges.len() - 1;
        let mut members = vec![Vec::new(); bins];
        for (i, &b) in assignment.iter().enumerate() {
            members[b].push(i);
        }
        for m in &mut members {
            m.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        }
        let frequencies = members.iter().map(Vec::len).collect();
        Histogram {
            kind,
            edges,
            frequencies,
            members,
            assignment,
        }
    }

    /// Equal-width histogram over `[0, bins]` whose bin `k` holds
    /// `frequencies[k]` consecutive region indices. Handy for exercising
    /// the selection algorithm on hand-made count vectors.
    pub fn from_frequencies(frequencies: &[usize]) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        let edges = (0..=frequencies.len()).map(|k| k as f64).collect();
        let assignment: Vec<usize> = frequencies
            .iter()
            .enumerate()
            .flat_map(|(k, &f)| std::iter::repeat_n(k, f))
            .collect();
        let scores: Vec<f64> = assignment.iter().map(|&k| k as f64 + 0.5).collect();
        Ok(Histogram::from_assignment(
            HistogramKind::EqualWidth,
            edges,
            assignment,
            &scores,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `floor((x - p_min) / interval)`, clamped into `0..bins`.
#[inline]
fn equal_width_index(x: f64, p_min: f64, p_max: f64, bins: usize) -> usize {
    if bins == 1 || !(p_max > p_min) {
        return 0;
    }
    let interval = (p_max - p_min) / bins as f64;
    let k = ((x - p_min) / interval).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

pub fn build_equal_width(p: &Projection, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    if p.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if bins > 1 && p.is_degenerate() {
        return Err(Error::DegenerateProjection(p.p_min));
    }
    let interval = (p.p_max - p.p_min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| p.p_min + i as f64 * interval).collect();
    edges.push(p.p_max);
    let assignment = p
        .values
        .iter()
        .map(|&x| equal_width_index(x, p.p_min, p.p_max, bins))
        .collect();
    Ok(Histogram::from_assignment(
        HistogramKind::EqualWidth,
        edges,
        assignment,
        &p.values,
    ))
}

pub fn build_equal_frequency(p: &Projection, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let n = p.len();
    if n == 0 {
        return Err(Error::EmptyHistogram);
    }
    if bins > n {
        return Err(Error::InvalidConfig(format!(
            "equal-frequency histogram with {bins} bins needs at least {bins} regions, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.values[a].total_cmp(&p.values[b]).then(a.cmp(&b)));
    let start = |k: usize| k * n / bins;
    let mut edges: Vec<f64> = (0..bins).map(|k| p.values[order[start(k)]]).collect();
    edges.push(p.p_max);
    let mut assignment = vec![0; n];
    for k in 0..bins {
        for &i in &order[start(k)..start(k + 1)] {
            assignment[i] = k;
        }
    }
    Ok(Histogram::from_assignment(
        HistogramKind::EqualFrequency,
        edges,
        assignment,
        &p.values,
    ))
}

pub fn build_histogram(p: &Projection, bins: usize, kind: HistogramKind) -> Result<Histogram> {
    match kind {
        HistogramKind::EqualWidth => build_equal_width(p, bins),
        HistogramKind::EqualFrequency => build_equal_frequency(p, bins),
    }
}

/// Consecutive blocks of `window_size` bins. Remainder bins, when the
/// window size does not divide the bin count, fold into the last window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPartition {
    pub window_size: usize,
    pub bins: usize,
    pub window_count: usize,
}

impl WindowPartition {
    pub fn new(bins: usize, window_size: usize) -> Result<Self> {
        if window_size == 0 || window_size > bins {
            return Err(Error::InvalidConfig(format!(
                "window size {window_size} must be in 1..={bins}"
            )));
        }
        Ok(WindowPartition {
            window_size,
            bins,
            window_count: bins / window_size,
        })
    }

    pub fn window_of(&self, bin: usize) -> usize {
        (bin / self.window_size).min(self.window_count - 1)
    }

    pub fn bins_in(&self, window: usize) -> Range<usize> {
        let start = window * self.window_size;
        if window + 1 == self.window_count {
            start..self.bins
        } else {
            start..start + self.window_size
        }
    }
}
