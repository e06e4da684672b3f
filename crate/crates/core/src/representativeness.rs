//! Final distances in PC1 space, color-scale bucketing and the two scalar
//! representativeness scores (heat-scale and window-coverage).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Region;
use crate::error::{Error, Result};
use crate::histogram::{Histogram, WindowPartition};
use crate::pca::Projection;

/// Ten shades from full representation (green) to none (red).
pub const DEFAULT_PALETTE: [&str; 10] = [
    "#006837", "#1a9850", "#66bd63", "#a6d96a", "#d9ef8b", "#fee08b", "#fdae61", "#f46d43",
    "#d73027", "#a50026",
];
/// Reserved for regions removed by a filter.
pub const FILTERED_COLOR: &str = "#00008b";
pub const DEFAULT_BUCKETS: usize = 10;

/// A site in a sample set, before projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleEntry {
    /// A region of the loaded dataset, by id.
    Region(String),
    /// A site outside the dataset, with native values for the variables.
    External {
        id: String,
        lat: f64,
        lon: f64,
        values: BTreeMap<String, f64>,
    },
}

impl SampleEntry {
    pub fn id(&self) -> &str {
        match self {
            SampleEntry::Region(id) => id,
            SampleEntry::External { id, .. } => id,
        }
    }
}

/// A sample site placed in PC1 space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSample {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub score: f64,
    /// Row in the analyzed dataset when the site is one of its regions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub entries: Vec<SampleEntry>,
    pub resolved: Vec<ResolvedSample>,
}

impl SampleSet {
    /// Sample set made of analyzed-dataset rows.
    pub fn from_rows(regions: &[Region], p: &Projection, rows: &[usize]) -> Self {
        let resolved: Vec<ResolvedSample> = rows
            .iter()
            .map(|&i| ResolvedSample {
                id: regions[i].id.clone(),
                lat: regions[i].lat,
                lon: regions[i].lon,
                score: p.values[i],
                row: Some(i),
            })
            .collect();
        SampleSet {
            entries: resolved.iter().map(|r| SampleEntry::Region(r.id.clone())).collect(),
            resolved,
        }
    }

    pub fn len(&self) -> usize {
        self.resolved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resolved.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.resolved.iter().map(|s| s.score).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub buckets: usize,
    pub palette: Vec<String>,
}

impl Default for ColorScale {
    fn default() -> Self {
        ColorScale {
            buckets: DEFAULT_BUCKETS,
            palette: DEFAULT_PALETTE.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ColorScale {
    /// Scale with `buckets` shades interpolated along the default palette.
    pub fn with_buckets(buckets: usize) -> Result<Self> {
        if buckets < 2 {
            return Err(Error::InvalidConfig("color scale needs at least 2 buckets".into()));
        }
        if buckets == DEFAULT_BUCKETS {
            return Ok(Self::default());
        }
        let stops: Vec<[u8; 3]> = DEFAULT_PALETTE.iter().map(|h| parse_hex(h).unwrap()).collect();
        let palette = (0..buckets)
            .map(|i| {
                let t = i as f64 / (buckets - 1) as f64 * (stops.len() - 1) as f64;
                let k = (t.floor() as usize).min(stops.len() - 2);
                let f = t - k as f64;
                let c: Vec<u8> = (0..3)
                    .map(|ch| {
                        let a = stops[k][ch] as f64;
                        let b = stops[k + 1][ch] as f64;
                        (a + (b - a) * f).round() as u8
                    })
                    .collect();
                format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
            })
            .collect();
        Ok(ColorScale { buckets, palette })
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets < 2 || self.palette.len() != self.buckets {
            return Err(Error::InvalidConfig(format!(
                "color scale needs >= 2 buckets and one color per bucket (got {} buckets, {} colors)",
                self.buckets,
                self.palette.len()
            )));
        }
        if let Some(bad) = self.palette.iter().find(|c| parse_hex(c).is_none()) {
            return Err(Error::InvalidConfig(format!("`{bad}` is not a #rrggbb color")));
        }
        Ok(())
    }

    /// `[lo, hi)` of normalized distance covered by `bucket` (the last
    /// bucket also holds 1.0).
    pub fn bucket_range(&self, bucket: usize) -> (f64, f64) {
        (
            bucket as f64 / self.buckets as f64,
            (bucket + 1) as f64 / self.buckets as f64,
        )
    }
}

pub fn parse_hex(color: &str) -> Option<[u8; 3]> {
    let h = color.strip_prefix('#')?;
    if h.len() != 6 {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Fraction of regions in the first (greenest) color bucket.
    #[default]
    HeatScale,
    /// Fraction of regions in histogram windows touched by a sample.
    WindowCoverage,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat-scale" | "heat" => Ok(ScoreMode::HeatScale),
            "window-coverage" | "coverage" => Ok(ScoreMode::WindowCoverage),
            _ => Err(Error::InvalidConfig(format!("unknown score mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Given,
    Ideal,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub fd: f64,
    pub nfd: f64,
    pub bucket: usize,
}

impl CellScore {
    /// `|1 - d|` on the normalized distance. Diagnostic only.
    pub fn representation(&self) -> f64 {
        (1.0 - self.nfd).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativenessReport {
    pub mode: ScoreMode,
    pub method: Method,
    #[serde(rename = "R")]
    pub r: f64,
    pub scale: ColorScale,
    pub cells: Vec<CellScore>,
    /// Regions whose raw distance exceeded the PC1 range.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<String>,
}

fn sorted_scores(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `FD(x) = min_s |D_p(x) - D_p(s)|` for every projected region.
pub fn final_distance(p: &Projection, sample_scores: &[f64]) -> Result<Vec<f64>> {
    if sample_scores.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let s = sorted_scores(sample_scores);
    Ok(p.values
        .par_iter()
        .with_min_len(4096)
        .map(|&x| {
            let j = s.partition_point(|&v| v < x);
            let above = s.get(j).map_or(f64::INFINITY, |&v| (x - v).abs());
            let below = if j > 0 { (x - s[j - 1]).abs() } else { f64::INFINITY };
            above.min(below)
        })
        .collect())
}

/// Divides by the PC1 range, clamping to 1.
pub fn normalize_distances(fd: &[f64], p: &Projection) -> Result<Vec<f64>> {
    if p.is_degenerate() {
        return Err(Error::DegenerateProjection(p.p_min));
    }
    let range = p.range();
    Ok(fd.iter().map(|d| (d / range).min(1.0)).collect())
}

#[inline]
pub fn bucket_of(nfd: f64, buckets: usize) -> usize {
    ((nfd * buckets as f64).floor().max(0.0) as usize).min(buckets - 1)
}

pub fn bucket_distances(nfd: &[f64], scale: &ColorScale) -> Vec<usize> {
    nfd.iter().map(|&d| bucket_of(d, scale.buckets)).collect()
}

pub fn score_heat(nfd: &[f64], scale: &ColorScale) -> f64 {
    if nfd.is_empty() {
        return 0.0;
    }
    let hits = nfd.iter().filter(|&&d| bucket_of(d, scale.buckets) == 0).count();
    hits as f64 / nfd.len() as f64
}

/// Bins of the sample sites; dataset rows use their recorded bin so ties in
/// equal-frequency histograms resolve the same way as the histogram did.
pub fn sample_bins(h: &Histogram, samples: &SampleSet) -> Vec<usize> {
    samples
        .resolved
        .iter()
        .map(|s| match s.row {
            Some(i) if i < h.total() => h.bin_of_region(i),
            _ => h.bin_of(s.score),
        })
        .collect()
}

/// Share of regions inside the union of windows touched by `bins`.
pub fn coverage_from_bins(h: &Histogram, wp: &WindowPartition, bins: &[usize]) -> f64 {
    if h.total() == 0 {
        return 0.0;
    }
    let mut touched = vec![false; wp.window_count];
    for &b in bins {
        touched[wp.window_of(b)] = true;
    }
    let covered: usize = touched
        .iter()
        .enumerate()
        .filter(|(_, &t)| t)
        .flat_map(|(w, _)| wp.bins_in(w))
        .map(|b| h.frequencies[b])
        .sum();
    covered as f64 / h.total() as f64
}

pub fn score_window_coverage(h: &Histogram, wp: &WindowPartition, samples: &SampleSet) -> f64 {
    coverage_from_bins(h, wp, &sample_bins(h, samples))
}

/// Assembles the per-region report. `coverage` must be given for
/// window-coverage mode.
pub fn build_report(
    regions: &[Region],
    p: &Projection,
    samples: &SampleSet,
    scale: &ColorScale,
    mode: ScoreMode,
    method: Method,
    coverage: Option<(&Histogram, &WindowPartition)>,
) -> Result<RepresentativenessReport> {
    scale.validate()?;
    if regions.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: regions.len(),
            actual: p.len(),
        });
    }
    let fd = final_distance(p, &samples.scores())?;
    let nfd = normalize_distances(&fd, p)?;
    let buckets = bucket_distances(&nfd, scale);
    let range = p.range();
    let r = match mode {
        ScoreMode::HeatScale => score_heat(&nfd, scale),
        ScoreMode::WindowCoverage => {
            let (h, wp) = coverage.ok_or_else(|| {
                Error::InvalidConfig("window-coverage scoring needs a histogram".into())
            })?;
            score_window_coverage(h, wp, samples)
        }
    };
    let mut clamped = Vec::new();
    let cells = regions
        .iter()
        .zip(fd.iter().zip(nfd.iter().zip(&buckets)))
        .map(|(reg, (&fd, (&nfd, &bucket)))| {
            if fd / range > 1.0 {
                clamped.push(reg.id.clone());
            }
            CellScore {
                id: reg.id.clone(),
                lat: reg.lat,
                lon: reg.lon,
                fd,
                nfd,
                bucket,
            }
        })
        .collect();
    Ok(RepresentativenessReport {
        mode,
        method,
        r,
        scale: scale.clone(),
        cells,
        clamped,
    })
}

/// Heat-scale scorer over a fixed projection that avoids the per-region
/// pass: each sample covers a contiguous run of the sorted scores, found by
/// binary search with the exact bucket-0 predicate.
#[derive(Debug, Clone)]
pub struct HeatScorer {
    sorted: Vec<f64>,
    range: f64,
    buckets: f64,
}

impl HeatScorer {
    pub fn new(p: &Projection, scale: &ColorScale) -> Result<Self> {
        scale.validate()?;
        if p.is_degenerate() {
            return Err(Error::DegenerateProjection(p.p_min));
        }
        Ok(HeatScorer {
            sorted: sorted_scores(&p.values),
            range: p.range(),
            buckets: scale.buckets as f64,
        })
    }

    #[inline]
    fn in_first_bucket(&self, d: f64) -> bool {
        (d / self.range).min(1.0) * self.buckets < 1.0
    }

    pub fn covered_count(&self, sample_scores: &[f64]) -> usize {
        let samples = sorted_scores(sample_scores);
        let mut covered = 0;
        let mut frontier = 0;
        for s in samples {
            let lo = self
                .sorted
                .partition_point(|&x| x < s && !self.in_first_bucket(s - x));
            let hi = self
                .sorted
                .partition_point(|&x| x <= s || self.in_first_bucket(x - s));
            let lo = lo.max(frontier);
            if hi > lo {
                covered += hi - lo;
            }
            frontier = frontier.max(hi);
        }
        covered
    }

    pub fn score(&self, sample_scores: &[f64]) -> f64 {
        self.covered_count(sample_scores) as f64 / self.sorted.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proj(xs: &[f64]) -> Projection {
        Projection::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn final_distance_examples() {
        let p = proj(&[0.1, 0.5, 0.9]);
        let fd = final_distance(&p, &[0.5]).unwrap();
        assert!((fd[0] - 0.4).abs() < 1e-15 && fd[1] == 0.0 && (fd[2] - 0.4).abs() < 1e-15);

        let fd = final_distance(&p, &p.values).unwrap();
        assert!(fd.iter().all(|&d| d == 0.0));

        let p = proj(&[0.0, 0.6, 1.0]);
        let fd = final_distance(&p, &[0.0, 1.0]).unwrap();
        assert!((fd[1] - 0.4).abs() < 1e-15);

        assert!(matches!(final_distance(&p, &[]), Err(Error::EmptySampleSet)));
    }

    #[test]
    fn normalize_examples() {
        let p = proj(&[0.0, 2.0]);
        let nfd = normalize_distances(&[0.0, 2.0, 1.0, 3.0], &p).unwrap();
        assert_eq!(nfd, vec![0.0, 1.0, 0.5, 1.0]);
        assert!(normalize_distances(&[0.0], &proj(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn bucket_examples() {
        let s = ColorScale::default();
        assert_eq!(bucket_distances(&[0.0, 1.0, 0.25], &s), vec![0, 9, 2]);
    }

    #[test]
    fn heat_examples() {
        let s = ColorScale::default();
        assert_eq!(score_heat(&[0.0; 5], &s), 1.0);
        assert_eq!(score_heat(&[0.05, 0.5, 0.95], &s), 1.0 / 3.0);
    }

    #[test]
    fn coverage_examples() {
        // frequencies [4,3,2,1] over 4 equal-width bins on [0, 4]
        let p = proj(&[0.0, 0.5, 0.5, 0.5, 1.5, 1.5, 1.5, 2.5, 2.5, 4.0]);
        let h = crate::histogram::build_equal_width(&p, 4).unwrap();
        assert_eq!(h.frequencies, vec![4, 3, 2, 1]);
        let wp = WindowPartition::new(4, 1).unwrap();
        // direct evaluation: union of touched bins, each counted once
        assert_eq!(coverage_from_bins(&h, &wp, &[0, 1]), 7.0 / 10.0);
        assert_eq!(coverage_from_bins(&h, &wp, &[0, 0]), 4.0 / 10.0);
        assert_eq!(coverage_from_bins(&h, &wp, &[3, 0, 2, 1]), 1.0);
        let wp2 = WindowPartition::new(4, 2).unwrap();
        assert_eq!(coverage_from_bins(&h, &wp2, &[3]), 3.0 / 10.0);
        assert_eq!(coverage_from_bins(&h, &wp2, &[1, 2]), 1.0);
    }

    #[test]
    fn palette_interpolation() {
        let s = ColorScale::with_buckets(5).unwrap();
        assert_eq!(s.palette.len(), 5);
        assert_eq!(s.palette[0], DEFAULT_PALETTE[0]);
        assert_eq!(s.palette[4], DEFAULT_PALETTE[9]);
        s.validate().unwrap();
        assert!(ColorScale::with_buckets(1).is_err());
        assert_eq!(ColorScale::with_buckets(10).unwrap(), ColorScale::default());
    }

    #[test]
    fn heat_scorer_agrees_with_buckets() {
        let p = proj(&[0.0, 0.05, 0.1, 0.3, 0.55, 0.9, 1.0]);
        let scale = ColorScale::default();
        let scorer = HeatScorer::new(&p, &scale).unwrap();
        for samples in [vec![0.0], vec![0.2, 0.9], vec![1.0, 0.0, 0.55], vec![2.0]] {
            let fd = final_distance(&p, &samples).unwrap();
            let nfd = normalize_distances(&fd, &p).unwrap();
            assert_eq!(scorer.score(&samples), score_heat(&nfd, &scale), "{samples:?}");
        }
    }

    #[test]
    fn report_flags_clamped() {
        let regions: Vec<Region> = (0..3).map(|i| Region::new(format!("r{i}"), 0.0, 0.0)).collect();
        let p = proj(&[0.0, 0.5, 1.0]);
        let samples = SampleSet {
            entries: vec![],
            resolved: vec![ResolvedSample {
                id: "far".into(),
                lat: 0.0,
                lon: 0.0,
                score: 5.0,
                row: None,
            }],
        };
        let rep = build_report(
            &regions,
            &p,
            &samples,
            &ColorScale::default(),
            ScoreMode::HeatScale,
            Method::Given,
            None,
        )
        .unwrap();
        assert_eq!(rep.clamped.len(), 3);
        assert!(rep.cells.iter().all(|c| c.bucket == 9 && c.nfd == 1.0));
        assert_eq!(rep.r, 0.0);
        assert_eq!(rep.cells[0].representation(), 0.0);
    }
}
