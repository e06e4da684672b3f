//! The two analysis workflows, shared by the command line and the HTTP
//! service so both produce the same numbers for the same inputs.
//!
//! Every run follows the same order: filter (native units) → select
//! variables → normalize → fit PCA → project onto PC1 → score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FilterPredicate, Region};
use crate::error::{Error, Result};
use crate::heatmap::{build_document, HeatMapDocument};
use crate::histogram::{build_histogram, Histogram, HistogramKind, WindowPartition};
use crate::pca::{explained_variance, fit_pca, project_pc1, Projection, ProjectionModel};
use crate::representativeness::{
    build_report, coverage_from_bins, sample_bins, ColorScale, HeatScorer, Method,
    RepresentativenessReport, ResolvedSample, SampleEntry, SampleSet, ScoreMode,
    DEFAULT_BUCKETS,
};
use crate::selection::{
    percentile_of, random_baseline, select_ideal, BaselineConfig, BaselineResult, IdealSelection,
    Pick, SelectionConfig,
};

/// Which variables to analyze and which regions to keep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisSpec {
    /// Empty means every variable of the dataset.
    #[serde(default)]
    pub variables: Vec<String>,
    #[serde(default)]
    pub filters: Vec<FilterPredicate>,
}

impl AnalysisSpec {
    /// Stable key for caching fitted analyses.
    pub fn cache_key(&self) -> String {
        let mut key = self.variables.join("\u{1f}");
        for f in &self.filters {
            let _ = write!(key, "\u{1e}{}:{:?}..{:?}", f.variable, f.lo, f.hi);
        }
        key
    }
}

/// A fitted analysis over the filtered, normalized subset of a dataset.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub spec: AnalysisSpec,
    /// Filtered rows, selected variables, normalized.
    pub data: Dataset,
    /// Row of the full dataset behind each analyzed row.
    pub source_rows: Vec<usize>,
    /// Full-dataset rows removed by the filters.
    pub excluded: Vec<usize>,
    pub model: ProjectionModel,
    pub projection: Projection,
}

impl Analysis {
    pub fn prepare(full: &Dataset, spec: &AnalysisSpec) -> Result<Self> {
        let source_rows = full.filter_rows(&spec.filters)?;
        if source_rows.is_empty() {
            return Err(Error::EmptyAfterFilter);
        }
        let mut keep = vec![false; full.n_rows()];
        for &i in &source_rows {
            keep[i] = true;
        }
        let excluded = (0..full.n_rows()).filter(|&i| !keep[i]).collect();
        let data = full
            .take_rows(&source_rows)
            .select_variables(&spec.variables)?
            .normalize_columns()?;
        let model = fit_pca(&data)?;
        let projection = project_pc1(&model, &data)?;
        Ok(Analysis {
            spec: spec.clone(),
            data,
            source_rows,
            excluded,
            model,
            projection,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    pub fn regions(&self) -> &[Region] {
        self.data.regions()
    }

    pub fn excluded_regions(&self, full: &Dataset) -> Vec<Region> {
        self.excluded.iter().map(|&i| full.region(i).clone()).collect()
    }

    pub fn explained_variance(&self) -> Result<Vec<f64>> {
        explained_variance(&self.model)
    }

    fn score_native(&self, native: &[f64]) -> Result<f64> {
        let normalized = self.data.normalize_external(native)?;
        self.model.project_row(&normalized)
    }

    /// Places sample sites in PC1 space. Ids of analyzed regions reuse their
    /// projected score; ids removed by a filter are projected from their
    /// native values; external points use the values they carry (falling
    /// back to the id when a variable is missing).
    pub fn resolve_samples(&self, full: &Dataset, entries: &[SampleEntry]) -> Result<SampleSet> {
        if entries.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let names = self.data.variable_names();
        let by_id = |id: &str| -> Result<ResolvedSample> {
            if let Some(row) = self.data.row_of(id) {
                let r = self.data.region(row);
                return Ok(ResolvedSample {
                    id: r.id.clone(),
                    lat: r.lat,
                    lon: r.lon,
                    score: self.projection.values[row],
                    row: Some(row),
                });
            }
            let fi = full
                .row_of(id)
                .ok_or_else(|| Error::UnknownRegion(id.to_string()))?;
            let native = names
                .iter()
                .map(|n| full.value(fi, full.variable_index(n).expect("analysis variable in dataset")))
                .collect::<Vec<_>>();
            let r = full.region(fi);
            Ok(ResolvedSample {
                id: r.id.clone(),
                lat: r.lat,
                lon: r.lon,
                score: self.score_native(&native)?,
                row: None,
            })
        };
        let resolved = entries
            .iter()
            .map(|e| match e {
                SampleEntry::Region(id) => by_id(id),
                SampleEntry::External {
                    id,
                    lat,
                    lon,
                    values,
                } => {
                    let native: Option<Vec<f64>> =
                        names.iter().map(|n| values.get(n).copied()).collect();
                    match native {
                        Some(native) => {
                            if let Err(column) = crate::dataset::check_coordinates(*lat, *lon) {
                                return Err(Error::Malformed(format!(
                                    "sample `{id}`: {column} out of range"
                                )));
                            }
                            Ok(ResolvedSample {
                                id: id.clone(),
                                lat: *lat,
                                lon: *lon,
                                score: self.score_native(&native)?,
                                row: self.data.row_of(id),
                            }
                            .with_row_checked(self))
                        }
                        None => by_id(id).map_err(|e| match e {
                            Error::UnknownRegion(_) => Error::Malformed(format!(
                                "sample `{id}` is not a known region and lacks values for {}",
                                names
                                    .iter()
                                    .filter(|n| !values.contains_key(*n))
                                    .cloned()
                                    .collect::<Vec<_>>()
                                    .join(", ")
                            )),
                            e => e,
                        }),
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleSet {
            entries: entries.to_vec(),
            resolved,
        })
    }

    pub fn histogram(&self, bins: usize, kind: HistogramKind) -> Result<Histogram> {
        build_histogram(&self.projection, bins, kind)
    }

    /// Scorer for `params`, with `default_bins` standing in for an unset
    /// bin count.
    pub fn scorer(&self, params: &ScoringParams, default_bins: usize) -> Result<Scorer> {
        let scale = params.scale()?;
        match params.mode {
            ScoreMode::HeatScale => Ok(Scorer::Heat(HeatScorer::new(&self.projection, &scale)?)),
            ScoreMode::WindowCoverage => {
                let bins = params.bins.unwrap_or(default_bins);
                let hist = self.histogram(bins, params.kind)?;
                let wp = WindowPartition::new(bins, params.window)?;
                Ok(Scorer::Coverage { hist, wp })
            }
        }
    }
}

impl ResolvedSample {
    // an external point that shares an analyzed id but carries different
    // values must not borrow that region's histogram bin
    fn with_row_checked(mut self, a: &Analysis) -> Self {
        if let Some(row) = self.row {
            if a.projection.values[row] != self.score {
                self.row = None;
            }
        }
        self
    }
}

/// How a sample set is turned into one number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringParams {
    pub mode: ScoreMode,
    /// Color buckets (palette interpolated from the default).
    pub colors: usize,
    /// Histogram bins for window-coverage scoring. Unset: one per site.
    pub bins: Option<usize>,
    pub window: usize,
    pub kind: HistogramKind,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            mode: ScoreMode::HeatScale,
            colors: DEFAULT_BUCKETS,
            bins: None,
            window: 1,
            kind: HistogramKind::EqualWidth,
        }
    }
}

impl ScoringParams {
    pub fn with_mode(mode: ScoreMode) -> Self {
        ScoringParams {
            mode,
            ..Self::default()
        }
    }

    pub fn scale(&self) -> Result<ColorScale> {
        ColorScale::with_buckets(self.colors)
    }
}

/// Scalar scorer prepared once per projection.
#[derive(Debug, Clone)]
pub enum Scorer {
    Heat(HeatScorer),
    Coverage { hist: Histogram, wp: WindowPartition },
}

impl Scorer {
    pub fn mode(&self) -> ScoreMode {
        match self {
            Scorer::Heat(_) => ScoreMode::HeatScale,
            Scorer::Coverage { .. } => ScoreMode::WindowCoverage,
        }
    }

    /// R of a sample made of analyzed rows.
    pub fn score_rows(&self, p: &Projection, rows: &[usize]) -> f64 {
        match self {
            Scorer::Heat(h) => {
                let scores: Vec<f64> = rows.iter().map(|&i| p.values[i]).collect();
                h.score(&scores)
            }
            Scorer::Coverage { hist, wp } => {
                let bins: Vec<usize> = rows.iter().map(|&i| hist.bin_of_region(i)).collect();
                coverage_from_bins(hist, wp, &bins)
            }
        }
    }

    pub fn score_samples(&self, samples: &SampleSet) -> f64 {
        match self {
            Scorer::Heat(h) => h.score(&samples.scores()),
            Scorer::Coverage { hist, wp } => coverage_from_bins(hist, wp, &sample_bins(hist, samples)),
        }
    }
}

/// Workflow 1 result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    #[serde(rename = "R")]
    pub r: f64,
    pub explained_variance: Vec<f64>,
    pub samples: Vec<ResolvedSample>,
    pub report: RepresentativenessReport,
    pub heatmap: HeatMapDocument,
}

/// Representativeness of a user-supplied sample set.
pub fn assess(
    full: &Dataset,
    analysis: &Analysis,
    entries: &[SampleEntry],
    params: &ScoringParams,
) -> Result<Assessment> {
    let samples = analysis.resolve_samples(full, entries)?;
    let scale = params.scale()?;
    let coverage = match params.mode {
        ScoreMode::HeatScale => None,
        ScoreMode::WindowCoverage => {
            let bins = params.bins.unwrap_or(samples.len());
            let hist = analysis.histogram(bins, params.kind)?;
            let wp = WindowPartition::new(bins, params.window)?;
            Some((hist, wp))
        }
    };
    let report = build_report(
        analysis.regions(),
        &analysis.projection,
        &samples,
        &scale,
        params.mode,
        Method::Given,
        coverage.as_ref().map(|(h, w)| (h, w)),
    )?;
    let heatmap = build_document(&report, &samples, &analysis.excluded_regions(full), &scale);
    Ok(Assessment {
        r: report.r,
        explained_variance: analysis.explained_variance()?,
        samples: samples.resolved.clone(),
        report,
        heatmap,
    })
}

/// One row of the centroid CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidRow {
    pub region_id: String,
    pub lat: f64,
    pub lon: f64,
    pub pc1_score: f64,
    pub bucket: usize,
}

pub fn centroids_csv(rows: &[CentroidRow]) -> String {
    let mut out = String::from("region_id,lat,lon,pc1_score,bucket\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.region_id, r.lat, r.lon, r.pc1_score, r.bucket);
    }
    out
}

/// Workflow 2 result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealOutcome {
    #[serde(rename = "R")]
    pub r: f64,
    pub requested: usize,
    pub truncated: bool,
    pub centroids: Vec<CentroidRow>,
    pub picks: Vec<Pick>,
    pub histogram: Histogram,
    pub explained_variance: Vec<f64>,
    pub report: RepresentativenessReport,
    pub heatmap: HeatMapDocument,
}

/// Selects ideal sites with the greedy window algorithm and scores them.
/// `params.bins`/`window`/`kind` are ignored: scoring reuses the selection
/// histogram.
pub fn ideal_sites(
    full: &Dataset,
    analysis: &Analysis,
    cfg: &SelectionConfig,
    params: &ScoringParams,
) -> Result<IdealOutcome> {
    cfg.validate()?;
    let hist = analysis.histogram(cfg.bins, cfg.kind)?;
    let wp = WindowPartition::new(cfg.bins, cfg.window)?;
    let selection: IdealSelection = select_ideal(&hist, &wp, cfg)?;
    let rows = selection.centroids();
    let samples = SampleSet::from_rows(analysis.regions(), &analysis.projection, &rows);
    let scale = params.scale()?;
    let report = build_report(
        analysis.regions(),
        &analysis.projection,
        &samples,
        &scale,
        params.mode,
        Method::Ideal,
        Some((&hist, &wp)),
    )?;
    let heatmap = build_document(&report, &samples, &analysis.excluded_regions(full), &scale);
    let centroids = selection
        .picks
        .iter()
        .map(|p| {
            let r = analysis.data.region(p.region);
            CentroidRow {
                region_id: r.id.clone(),
                lat: r.lat,
                lon: r.lon,
                pc1_score: analysis.projection.values[p.region],
                bucket: p.bucket,
            }
        })
        .collect();
    Ok(IdealOutcome {
        r: report.r,
        requested: selection.requested,
        truncated: selection.truncated,
        centroids,
        picks: selection.picks,
        histogram: hist,
        explained_variance: analysis.explained_variance()?,
        report,
        heatmap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(rename = "R")]
    pub r: f64,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub mode: ScoreMode,
    #[serde(flatten)]
    pub result: BaselineResult,
    pub placements: Vec<Placement>,
}

/// Random-sampling baseline plus the percentile of each supplied R.
pub fn baseline(
    analysis: &Analysis,
    cfg: &BaselineConfig,
    params: &ScoringParams,
    supplied: &[f64],
) -> Result<BaselineOutcome> {
    let scorer = analysis.scorer(params, cfg.n_sites)?;
    let p = &analysis.projection;
    let result = random_baseline(analysis.n_rows(), cfg, |rows| scorer.score_rows(p, rows))?;
    let placements = supplied
        .iter()
        .map(|&r| Placement {
            r,
            percentile: percentile_of(&result, r),
        })
        .collect();
    Ok(BaselineOutcome {
        mode: scorer.mode(),
        result,
        placements,
    })
}

/// Parses a sample-site CSV. The first column must be `region_id`. Files
/// with only ids reference dataset regions; files that also carry
/// `lat,lon` and numeric columns describe external points whose values are
/// keyed by column name.
pub fn parse_samples_csv(text: &str) -> Result<Vec<SampleEntry>> {
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty sample file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.first() != Some(&"region_id") {
        return Err(Error::Malformed("sample file must start with a `region_id` column".into()));
    }
    let external = header.len() > 3 && header[1] == "lat" && header[2] == "lon";
    let mut entries = Vec::new();
    for (row, line) in lines.enumerate() {
        let row = row + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::Ingest {
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(Error::Ingest {
                row,
                column: "region_id".into(),
                message: "missing id".into(),
            });
        }
        if !external {
            entries.push(SampleEntry::Region(id.to_string()));
            continue;
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Ingest {
                    row,
                    column: header[k].to_string(),
                    message: format!("`{}` is not a finite number", fields[k]),
                })
        };
        let values = (3..header.len())
            .map(|k| Ok((header[k].to_string(), num(k)?)))
            .collect::<Result<_>>()?;
        entries.push(SampleEntry::External {
            id: id.to_string(),
            lat: num(1)?,
            lon: num(2)?,
            values,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok(entries)
}
