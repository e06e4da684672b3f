use proptest::prelude::*;
use repscape_core::histogram::WindowPartition;
use repscape_core::linalg::symmetric_eigen;
use repscape_core::representativeness::{final_distance, normalize_distances};
use repscape_core::selection::trial_rows;
use repscape_core::{
    build_histogram, build_report, select_ideal, ColorScale, Dataset, HeatScorer, Histogram,
    HistogramKind, Method, Projection, Region, SampleSet, ScoreMode, SelectionConfig,
    VariableSpec,
};

fn projection() -> impl Strategy<Value = Projection> {
    prop::collection::vec(-50.0f64..50.0, 2..120)
        .prop_filter("non-degenerate", |v| v.iter().any(|&x| x != v[0]))
        .prop_map(|v| Projection::new(v).unwrap())
}

fn regions(n: usize) -> Vec<Region> {
    (0..n).map(|i| Region::new(format!("r{i}"), 0.0, 0.0)).collect()
}

proptest! {
    #[test]
    fn histogram_partitions_every_region(p in projection(), bins in 1usize..40, freq in any::<bool>()) {
        let kind = if freq { HistogramKind::EqualFrequency } else { HistogramKind::EqualWidth };
        prop_assume!(!freq || bins <= p.len());
        let h = build_histogram(&p, bins, kind).unwrap();
        prop_assert_eq!(h.frequencies.iter().sum::<usize>(), p.len());
        for (i, &x) in p.values.iter().enumerate() {
            let b = h.bin_of_region(i);
            prop_assert!(h.members(b).contains(&i));
            prop_assert!(h.edges[b] <= x && x <= h.edges[b + 1]);
        }
        if freq {
            let lo = h.frequencies.iter().min().unwrap();
            let hi = h.frequencies.iter().max().unwrap();
            prop_assert!(hi - lo <= 1);
        } else {
            for (i, &x) in p.values.iter().enumerate() {
                prop_assert_eq!(h.bin_of(x), h.bin_of_region(i));
            }
        }
    }

    #[test]
    fn distances_are_bounded(p in projection(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..10)) {
        let rows: Vec<usize> = picks.iter().map(|i| i.index(p.len())).collect();
        let scores: Vec<f64> = rows.iter().map(|&r| p.values[r]).collect();
        let fd = final_distance(&p, &scores).unwrap();
        let nfd = normalize_distances(&fd, &p).unwrap();
        for &r in &rows {
            prop_assert_eq!(fd[r], 0.0);
        }
        prop_assert!(nfd.iter().all(|&d| (0.0..=1.0).contains(&d)));
    }

    #[test]
    fn fast_heat_scorer_matches_report(p in projection(), buckets in 2usize..15, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..12)) {
        let rows: Vec<usize> = picks.iter().map(|i| i.index(p.len())).collect();
        let reg = regions(p.len());
        let samples = SampleSet::from_rows(&reg, &p, &rows);
        let scale = ColorScale::with_buckets(buckets).unwrap();
        let report = build_report(&reg, &p, &samples, &scale, ScoreMode::HeatScale, Method::Given, None).unwrap();
        let fast = HeatScorer::new(&p, &scale).unwrap().score(&samples.scores());
        prop_assert_eq!(report.r, fast);
    }

    #[test]
    fn selection_respects_windows(freqs in prop::collection::vec(0usize..20, 1..30), w in 1usize..5, n in 1usize..30, seed in any::<u64>()) {
        prop_assume!(w <= freqs.len() && freqs.iter().any(|&f| f > 0));
        let h = Histogram::from_frequencies(&freqs).unwrap();
        let wp = WindowPartition::new(freqs.len(), w).unwrap();
        let mut cfg = SelectionConfig::new(n, seed);
        cfg.bins = freqs.len();
        cfg.window = w;
        let sel = select_ideal(&h, &wp, &cfg).unwrap();
        let mut windows: Vec<usize> = sel.picks.iter().map(|p| p.window).collect();
        windows.sort_unstable();
        windows.dedup();
        prop_assert_eq!(windows.len(), sel.picks.len());
        prop_assert!(sel.picks.len() <= n.min(wp.window_count));
        prop_assert!(sel.picks.iter().all(|p| p.frequency > 0));
        let usable = (0..wp.window_count)
            .filter(|&win| wp.bins_in(win).any(|b| freqs[b] > 0))
            .count();
        prop_assert_eq!(sel.picks.len(), n.min(usable));
        prop_assert_eq!(sel.truncated, n > usable);
    }

    #[test]
    fn trial_rows_are_distinct(rows in 1usize..200, take in 1usize..50, seed in any::<u64>(), trial in 0usize..1000) {
        let take = take.min(rows);
        let mut r = trial_rows(rows, take, seed, trial);
        prop_assert_eq!(&r, &trial_rows(rows, take, seed, trial));
        r.sort_unstable();
        r.dedup();
        prop_assert_eq!(r.len(), take);
        prop_assert!(r.iter().all(|&i| i < rows));
    }

    #[test]
    fn normalization_round_trips(values in prop::collection::vec(-1e6f64..1e6, 6..60)) {
        let n = values.len() / 2;
        let d = Dataset::new(
            regions(n),
            vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")],
            values[..n * 2].to_vec(),
        ).unwrap();
        let norm = d.normalize_columns().unwrap();
        prop_assert!(norm.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let back = norm.denormalize().unwrap();
        for (x, y) in d.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn csv_round_trip(values in prop::collection::vec(-1e9f64..1e9, 3..60)) {
        let n = values.len() / 3;
        let d = Dataset::new(
            (0..n).map(|i| Region::new(format!("id{i}"), -89.5 + i as f64 * 0.5, 179.25 - i as f64)).collect(),
            ["x", "y", "z"].iter().map(|v| VariableSpec::continuous(*v)).collect(),
            values[..n * 3].to_vec(),
        ).unwrap();
        let back = Dataset::ingest_csv(d.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, d);
    }
}

#[test]
fn jacobi_agrees_with_nalgebra() {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for n in 1..=8 {
        for _ in 0..25 {
            let b: Vec<f64> = (0..n * n).map(|_| next()).collect();
            let a = nalgebra::DMatrix::from_row_slice(n, n, &b);
            let sym = &a * a.transpose();
            let flat: Vec<f64> = sym.iter().copied().collect();
            let ours = symmetric_eigen(&flat, n).unwrap();
            let mut theirs: Vec<f64> = nalgebra::SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
            theirs.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in ours.values.iter().zip(&theirs) {
                assert!((x - y).abs() <= 1e-10 * theirs[0].max(1.0), "{x} vs {y}");
            }
            // A v = lambda v
            for k in 0..n {
                let v = nalgebra::DVector::from_vec(ours.vector(k));
                let residual = (&sym * &v - &v * ours.values[k]).amax();
                assert!(residual <= 1e-10 * theirs[0].max(1.0));
            }
        }
    }
}
