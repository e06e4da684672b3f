use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_repscape");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, preset: &str, n: usize) {
    ok(dir, &["synth", "--preset", preset, "--n", &n.to_string(), "--seed", "3", "--out", "d.csv"]);
}

fn all_ids(dir: &Path) {
    let data = std::fs::read_to_string(dir.join("d.csv")).unwrap();
    let mut ids = String::from("region_id\n");
    for l in data.lines().skip(1) {
        ids.push_str(l.split(',').next().unwrap());
        ids.push('\n');
    }
    std::fs::write(dir.join("all.csv"), ids).unwrap();
}

#[test]
fn full_dataset_as_samples_prints_one() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 400);
    all_ids(t.path());
    let out = ok(t.path(), &["representativeness", "--data", "d.csv", "--samples", "all.csv"]);
    assert_eq!(out, "R=1.000000\n");
    // the dataset file itself also works as an external sample file
    let out = ok(t.path(), &["representativeness", "--data", "d.csv", "--samples", "d.csv"]);
    assert_eq!(out, "R=1.000000\n");
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 100);
    let missing = run(t.path(), &["representativeness", "--data", "d.csv", "--samples", "nope.csv"]);
    assert_eq!(missing.status.code(), Some(3));

    let bad_flag = run(t.path(), &["ideal", "--data", "d.csv"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let bad_combo = run(t.path(), &["sweep", "--data", "d.csv", "--axis", "bins", "--values", "5,10"]);
    assert_eq!(bad_combo.status.code(), Some(2));
    let bad_filter = run(t.path(), &["ideal", "--data", "d.csv", "--n", "2", "--filter", "temperature"]);
    assert_eq!(bad_filter.status.code(), Some(2));

    std::fs::write(t.path().join("flat.csv"), "region_id,lat,lon,a\nx,0,0,1\ny,1,1,1\n").unwrap();
    std::fs::write(t.path().join("x.csv"), "region_id\nx\n").unwrap();
    let degenerate = run(t.path(), &["representativeness", "--data", "flat.csv", "--samples", "x.csv"]);
    assert_eq!(degenerate.status.code(), Some(4), "{}", String::from_utf8_lossy(&degenerate.stderr));

    let empty = run(
        t.path(),
        &["representativeness", "--data", "d.csv", "--samples", "x.csv", "--filter", "temperature:50..60"],
    );
    assert_eq!(empty.status.code(), Some(3));
}

#[test]
fn ideal_is_seeded_and_truncates_with_a_warning() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 2000);
    let args = ["ideal", "--data", "d.csv", "--n", "8", "--seed", "7", "--out", "c.csv"];
    ok(t.path(), &args);
    let first = std::fs::read(t.path().join("c.csv")).unwrap();
    ok(t.path(), &args);
    assert_eq!(first, std::fs::read(t.path().join("c.csv")).unwrap());
    assert!(String::from_utf8_lossy(&first).starts_with("region_id,lat,lon,pc1_score,bucket\n"));

    std::fs::write(t.path().join("two.csv"), "region_id,lat,lon,a\np,0,0,0\nq,0,1,0\nr,1,1,1\n").unwrap();
    let out = run(t.path(), &["ideal", "--data", "two.csv", "--n", "3", "--bins", "4", "--out", "t.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let csv = std::fs::read_to_string(t.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn single_unimodal_site_comes_from_the_mode_bucket() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "unimodal", 3000);
    ok(t.path(), &["ideal", "--data", "d.csv", "--n", "1", "--bins", "12", "--out", "c.csv", "--report", "r.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("r.json")).unwrap()).unwrap();
    let freqs: Vec<u64> = serde_json::from_value(report["histogram"]["frequencies"].clone()).unwrap();
    let max = *freqs.iter().max().unwrap();
    let mode = freqs.iter().rposition(|&f| f == max).unwrap();
    let csv = std::fs::read_to_string(t.path().join("c.csv")).unwrap();
    let bucket: usize = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(bucket, mode);
}

#[test]
fn baseline_examples() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 50);
    let out = ok(t.path(), &["baseline", "--data", "d.csv", "--n", "50", "--trials", "1", "--out", "b.json"]);
    assert!(out.starts_with("mean_R=1.000000\n"));
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(b["r_values"], serde_json::json!([1.0]));

    let args = ["baseline", "--data", "d.csv", "--n", "5", "--trials", "60", "--seed", "4", "--out", "b.json"];
    ok(t.path(), &args);
    let first = std::fs::read(t.path().join("b.json")).unwrap();
    ok(t.path(), &args);
    assert_eq!(first, std::fs::read(t.path().join("b.json")).unwrap());

    let b: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let max = b["r_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).fold(0.0, f64::max);
    let above = format!("{}", max + 1e-9);
    let out = ok(t.path(), &["baseline", "--data", "d.csv", "--n", "5", "--trials", "60", "--seed", "4", "--r", &above]);
    assert!(out.lines().nth(1).unwrap().ends_with("percentile=100"), "{out}");
}

#[test]
fn synth_is_seeded_and_ingestible() {
    let t = tempfile::tempdir().unwrap();
    let args = ["synth", "--n", "500", "--seed", "11", "--out", "a.csv", "--labels-out", "l.csv"];
    ok(t.path(), &args);
    let a = std::fs::read(t.path().join("a.csv")).unwrap();
    ok(t.path(), &args);
    assert_eq!(a, std::fs::read(t.path().join("a.csv")).unwrap());
    let d = repscape_core::Dataset::ingest_csv(&a[..]).unwrap();
    assert_eq!(d.n_rows(), 500);
    assert_eq!(d.to_csv_string().as_bytes(), &a[..]);
    let labels = std::fs::read_to_string(t.path().join("l.csv")).unwrap();
    assert_eq!(labels.lines().count(), 501);
    let bad = run(t.path(), &["synth", "--preset", "nope", "--n", "5", "--out", "x.csv"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweeps_write_plot_ready_csv() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 3000);
    let out = ok(
        t.path(),
        &["sweep", "--data", "d.csv", "--axis", "centroids", "--values", "2,4,8,16", "--trials", "20", "--csv", "s.csv"],
    );
    assert_eq!(out, std::fs::read_to_string(t.path().join("s.csv")).unwrap());
    let ideal: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(ideal.windows(2).all(|w| w[1] >= w[0]), "{ideal:?}");
}

#[test]
fn representativeness_artifacts() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), "clustered", 500);
    std::fs::write(t.path().join("s.csv"), "region_id\ng000\ng001\n").unwrap();
    ok(
        t.path(),
        &[
            "representativeness", "--data", "d.csv", "--samples", "s.csv", "--variables", "temperature,tree_cover",
            "--filter", "market_access:0..0.5", "--report", "r.json", "--heatmap", "h.json", "--ppm", "m.ppm",
            "--ppm-size", "40x20", "--model", "model.json",
        ],
    );
    let ppm = std::fs::read(t.path().join("m.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n40 20\n255\n"));
    let model = repscape_core::ProjectionModel::from_json(
        &std::fs::read_to_string(t.path().join("model.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(model.variables, vec!["temperature", "tree_cover"]);
    let heat = repscape_core::HeatMapDocument::from_json(
        &std::fs::read_to_string(t.path().join("h.json")).unwrap(),
    )
    .unwrap();
    assert!(!heat.filtered_regions.is_empty());
    assert_eq!(heat.filtered_color, "#00008b");
}
