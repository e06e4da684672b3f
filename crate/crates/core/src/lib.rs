//! Representativeness of sample sites over a multivariate geospatial grid.
//!
//! Regions are projected onto the first principal component of their
//! normalized variables; a sample set is scored by how close every region
//! lies to its nearest sample in that one-dimensional space. Ideal site
//! sets come from a windowed histogram-mode greedy selection and are
//! compared against a seeded random baseline.

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod histogram;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod representativeness;
pub mod selection;
pub mod synth;

pub use dataset::{ColumnRange, Dataset, FilterPredicate, Region, VariableKind, VariableSpec};
pub use error::{Error, ErrorClass, Result};
pub use experiments::{
    compare_methods, sweep_bins, sweep_centroids, Comparison, ExperimentConfig, SweepAxis,
    SweepResult,
};
pub use heatmap::{build_document, render_raster, HeatMapDocument};
pub use histogram::{build_histogram, Histogram, HistogramKind, WindowPartition};
pub use pca::{explained_variance, fit_pca, project_pc1, Projection, ProjectionModel};
pub use pipeline::{Analysis, AnalysisSpec, ScoringParams};
pub use representativeness::{
    build_report, ColorScale, HeatScorer, Method, RepresentativenessReport, SampleEntry,
    SampleSet, ScoreMode,
};
pub use selection::{
    random_baseline, select_ideal, BaselineConfig, BaselineResult, IdealSelection, MemberPick,
    SelectionConfig,
};
pub use synth::{generate_synthetic, MixtureSpec};
