use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;

use anyhow::{Context, Result};
use repscape_core::experiments::sweeps_csv;
use repscape_core::heatmap::HeatMapDocument;
use repscape_core::pipeline::{self, centroids_csv, parse_samples_csv, Analysis, AnalysisSpec, ScoringParams};
use repscape_core::synth::generate_labeled;
use repscape_core::{
    compare_methods, render_raster, sweep_bins, sweep_centroids, BaselineConfig, Dataset,
    ExperimentConfig, MixtureSpec, SampleEntry, SampleSet, ScoreMode, SelectionConfig, SweepAxis,
};

use crate::output::{write_atomic, write_json};
use crate::{
    BaselineArgs, CompareArgs, DataArgs, IdealArgs, RepresentativenessArgs, ScoringArgs,
    ServeArgs, SweepArgs, SynthArgs, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load(data: &DataArgs) -> Result<(Dataset, Analysis)> {
    let file = fs::File::open(&data.data)
        .with_context(|| format!("opening dataset {}", data.data.display()))?;
    let full = Dataset::ingest_csv(std::io::BufReader::new(file))
        .with_context(|| format!("reading dataset {}", data.data.display()))?;
    let spec = AnalysisSpec {
        variables: data.variables.clone(),
        filters: data.filters.clone(),
    };
    let analysis = Analysis::prepare(&full, &spec)?;
    Ok((full, analysis))
}

fn load_samples(path: &Path) -> Result<Vec<SampleEntry>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading samples {}", path.display()))?;
    Ok(parse_samples_csv(&text).with_context(|| format!("parsing samples {}", path.display()))?)
}

fn scoring(s: &ScoringArgs, default_mode: ScoreMode) -> ScoringParams {
    ScoringParams {
        mode: s.mode.unwrap_or(default_mode),
        colors: s.colors,
        bins: s.bins,
        window: s.window,
        kind: s.kind,
    }
}

fn check_scoring(s: &ScoringArgs) -> Result<()> {
    if s.colors == 0 {
        return Err(usage("--colors must be at least 1"));
    }
    if s.window == 0 {
        return Err(usage("--window must be at least 1"));
    }
    if let Some(b) = s.bins {
        if b == 0 {
            return Err(usage("--bins must be at least 1"));
        }
        if s.window > b {
            return Err(usage(format!("--window {} exceeds --bins {b}", s.window)));
        }
    }
    Ok(())
}

fn write_maps(doc: &HeatMapDocument, heatmap: Option<&Path>, ppm: Option<&Path>, size: (usize, usize)) -> Result<()> {
    if let Some(p) = heatmap {
        write_json(p, doc)?;
    }
    if let Some(p) = ppm {
        write_atomic(p, &render_raster(doc, size.0, size.1)?)?;
    }
    Ok(())
}

pub fn representativeness(a: RepresentativenessArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    let (full, analysis) = load(&a.data)?;
    let entries = load_samples(&a.samples)?;
    let params = scoring(&a.scoring, ScoreMode::HeatScale);
    let out = pipeline::assess(&full, &analysis, &entries, &params)?;
    if let Some(p) = &a.report {
        write_json(p, &out)?;
    }
    if let Some(p) = &a.model {
        let mut text = analysis.model.to_json()?;
        text.push('\n');
        write_atomic(p, text.as_bytes())?;
    }
    write_maps(&out.heatmap, a.heatmap.as_deref(), a.ppm.as_deref(), a.ppm_size)?;
    if let Some(share) = out.explained_variance.first() {
        tracing::info!(pc1_share = share, "explained variance");
    }
    println!("R={:.6}", out.r);
    Ok(())
}

pub fn ideal(a: IdealArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let bins = a.scoring.bins.unwrap_or(a.n);
    if a.scoring.window > bins {
        return Err(usage(format!("--window {} exceeds the {bins} bins", a.scoring.window)));
    }
    let (full, analysis) = load(&a.data)?;
    let cfg = SelectionConfig {
        n_sites: a.n,
        bins,
        window: a.scoring.window,
        seed: a.seed,
        kind: a.scoring.kind,
        pick: a.pick,
    };
    let params = scoring(&a.scoring, ScoreMode::WindowCoverage);
    let out = pipeline::ideal_sites(&full, &analysis, &cfg, &params)?;
    if out.truncated {
        eprintln!(
            "warning: only {} of {} sites selected; every window with a non-empty bin is used",
            out.centroids.len(),
            out.requested
        );
    }
    if let Some(p) = &a.out {
        write_atomic(p, centroids_csv(&out.centroids).as_bytes())?;
    }
    if let Some(p) = &a.report {
        write_json(p, &out)?;
    }
    write_maps(&out.heatmap, a.heatmap.as_deref(), a.ppm.as_deref(), a.ppm_size)?;
    println!("R={:.6}", out.r);
    Ok(())
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    if a.n == 0 || a.trials == 0 {
        return Err(usage("--n and --trials must be at least 1"));
    }
    let (_, analysis) = load(&a.data)?;
    let cfg = BaselineConfig {
        n_sites: a.n,
        trials: a.trials,
        seed: a.seed,
    };
    let params = scoring(&a.scoring, ScoreMode::HeatScale);
    let out = pipeline::baseline(&analysis, &cfg, &params, &a.supplied)?;
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    println!("mean_R={:.6}", out.result.mean_r);
    for pl in &out.placements {
        println!("R={} percentile={}", pl.r, pl.percentile);
    }
    Ok(())
}

fn experiment(
    s: &ScoringArgs,
    n_sites: usize,
    seed: u64,
    trials: usize,
    pick: repscape_core::MemberPick,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(n_sites, seed);
    cfg.bins = s.bins;
    cfg.window = s.window;
    cfg.trials = trials;
    cfg.kind = s.kind;
    cfg.pick = pick;
    let mut params = scoring(s, ScoreMode::HeatScale);
    // window-coverage scoring reuses each selection histogram
    params.bins = None;
    cfg.scoring = params;
    cfg
}

fn given(path: Option<&Path>, full: &Dataset, analysis: &Analysis) -> Result<Option<SampleSet>> {
    path.map(|p| -> Result<SampleSet> {
        let entries = load_samples(p)?;
        Ok(analysis.resolve_samples(full, &entries)?)
    })
    .transpose()
}

pub fn compare(a: CompareArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    if a.samples.is_none() && a.n.is_none() {
        return Err(usage("compare needs --samples or --n"));
    }
    let (full, analysis) = load(&a.data)?;
    let given = given(a.samples.as_deref(), &full, &analysis)?;
    let n = a.n.or(given.as_ref().map(SampleSet::len)).expect("checked above");
    let cfg = experiment(&a.scoring, n, a.seed, a.trials, a.pick);
    let c = compare_methods(&analysis, given.as_ref(), &cfg)?;
    if let Some(p) = &a.json {
        write_json(p, &c)?;
    }
    let csv = c.to_csv();
    if let Some(p) = &a.csv {
        write_atomic(p, csv.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    let (n_sites, windows) = match a.axis {
        SweepAxis::Centroids => {
            if a.n.is_some() || !a.windows.is_empty() {
                return Err(usage("--n and --windows apply to the bins axis only"));
            }
            (0, vec![a.scoring.window])
        }
        SweepAxis::Bins => {
            let n = a.n.ok_or_else(|| usage("the bins axis needs --n"))?;
            if a.scoring.bins.is_some() {
                return Err(usage("--bins is the swept axis; use --values"));
            }
            let w = if a.windows.is_empty() {
                vec![a.scoring.window]
            } else {
                a.windows.clone()
            };
            (n, w)
        }
    };
    let (full, analysis) = load(&a.data)?;
    let given = given(a.samples.as_deref(), &full, &analysis)?;
    let cfg = experiment(&a.scoring, n_sites, a.seed, a.trials, a.pick);
    let results = match a.axis {
        SweepAxis::Centroids => vec![sweep_centroids(&analysis, &a.values, given.as_ref(), &cfg)?],
        SweepAxis::Bins => sweep_bins(&analysis, &a.values, &windows, given.as_ref(), &cfg)?,
    };
    let csv = sweeps_csv(&results);
    if let Some(p) = &a.csv {
        write_atomic(p, csv.as_bytes())?;
    }
    if let Some(p) = &a.json {
        write_json(p, &results)?;
    }
    print!("{csv}");
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = MixtureSpec::preset(&a.preset)
        .ok_or_else(|| usage(format!("unknown preset `{}` (clustered or unimodal)", a.preset)))?;
    let (data, labels) = generate_labeled(&spec, a.n, a.seed)?;
    write_atomic(&a.out, data.to_csv_string().as_bytes())?;
    if let Some(p) = &a.labels_out {
        let mut text = String::from("region_id,component\n");
        for (r, l) in data.regions().iter().zip(&labels) {
            let _ = writeln!(text, "{},{l}", r.id);
        }
        write_atomic(p, text.as_bytes())?;
    }
    println!("rows={}", data.n_rows());
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(repscape_service::serve(addr))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}
