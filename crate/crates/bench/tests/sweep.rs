use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use softtopk_bench::chart::chart_path;
use softtopk_bench::sweep::iterative_time_warnings;
use softtopk_bench::{
    emit_charts, emit_csv, read_csv, run_sweep, Algo, BenchError, BenchRecord, SweepConfig, CSV_HEADER,
};
use softtopk_core::SoftmaxMode;

fn small(n: &[usize], k: &[usize], repeats: usize) -> SweepConfig {
    SweepConfig {
        n_list: n.to_vec(),
        k_list: k.to_vec(),
        d: 8,
        batch: 4,
        repeats,
        threads: Some(2),
        ..Default::default()
    }
}

fn record(algo: Algo, n: usize, k: usize, repeat_index: usize) -> BenchRecord {
    BenchRecord {
        algo,
        n,
        k,
        d: 64,
        batch: 16,
        boost: 100.0,
        mode: SoftmaxMode::Verbatim,
        seed: 42,
        repeat_index,
        wall_time_s: 0.00123456789123,
        nccs_mean: 0.87654321012345,
        nccs_std: 0.0123,
    }
}

#[test]
fn one_pair_two_repeats_gives_six_records() {
    let out = run_sweep(&small(&[16], &[4], 2), |_| {}).unwrap();
    assert_eq!(out.records.len(), 6);
    assert!(out.skipped.is_empty());
    for algo in Algo::ALL {
        let idx: Vec<usize> = out.records.iter().filter(|r| r.algo == algo).map(|r| r.repeat_index).collect();
        assert_eq!(idx, vec![0, 1], "{algo}");
    }
    for r in &out.records {
        assert!(r.wall_time_s > 0.0);
        assert!((-1.0..=1.0).contains(&r.nccs_mean));
        assert!(r.nccs_std >= 0.0);
        if r.algo == Algo::Exact {
            assert!((r.nccs_mean - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn skips_exactly_pairs_with_k_at_least_n() {
    let mut log = Vec::new();
    let out = run_sweep(&small(&[4, 16], &[2, 4, 8, 16], 1), |l| log.push(l.to_string())).unwrap();
    let mut skipped = out.skipped.clone();
    skipped.sort_unstable();
    assert_eq!(skipped, vec![(4, 4), (4, 8), (4, 16), (16, 16)]);
    assert_eq!(log.iter().filter(|l| l.starts_with("skip")).count(), 4);
    let mut run: Vec<(usize, usize)> = out.records.iter().map(|r| (r.n, r.k)).collect();
    run.sort_unstable();
    run.dedup();
    assert_eq!(run, vec![(4, 2), (16, 2), (16, 4), (16, 8)]);
    assert_eq!(out.records.len(), 4 * 3);
}

#[test]
fn nccs_is_reproducible_and_independent_of_threads() {
    let a = run_sweep(&small(&[16, 32], &[2, 4], 1), |_| {}).unwrap();
    let b = run_sweep(&SweepConfig { threads: Some(1), ..small(&[16, 32], &[2, 4], 1) }, |_| {}).unwrap();
    let c = run_sweep(&SweepConfig { parallel_batch: true, ..small(&[16, 32], &[2, 4], 1) }, |_| {}).unwrap();
    let strip = |rs: &[BenchRecord]| -> Vec<(Algo, usize, usize, u64, u64)> {
        rs.iter().map(|r| (r.algo, r.n, r.k, r.nccs_mean.to_bits(), r.nccs_std.to_bits())).collect()
    };
    assert_eq!(strip(&a.records), strip(&b.records));
    assert_eq!(strip(&a.records), strip(&c.records));
}

#[test]
fn normalized_mode_is_recorded() {
    let cfg = SweepConfig { mode: SoftmaxMode::Normalized, alpha: 20.0, ..small(&[16], &[2], 1) };
    let out = run_sweep(&cfg, |_| {}).unwrap();
    assert!(out.records.iter().all(|r| r.mode == SoftmaxMode::Normalized));
}

#[test]
fn unwritable_output_fails_before_computing() {
    // Sized so that actually running it would take far longer than the test.
    let cfg = SweepConfig {
        n_list: vec![1 << 22],
        k_list: vec![1 << 12],
        csv_path: Some(PathBuf::from("/nonexistent-dir/for/softtopk/out.csv")),
        ..Default::default()
    };
    let start = Instant::now();
    let err = run_sweep(&cfg, |_| {}).unwrap_err();
    assert!(matches!(err, BenchError::Io { .. }), "{err}");
    assert!(err.to_string().contains("/nonexistent-dir"), "{err}");
    assert!(start.elapsed().as_secs_f64() < 1.0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig { csv_path: Some(dir.path().to_path_buf()), ..cfg };
    assert!(matches!(run_sweep(&cfg, |_| {}), Err(BenchError::Io { .. })));
}

#[test]
fn invalid_config_is_rejected() {
    assert!(matches!(run_sweep(&small(&[16], &[2], 0), |_| {}), Err(BenchError::Usage(_))));
    let cfg = SweepConfig { boost: 0.0, ..small(&[16], &[2], 1) };
    assert!(run_sweep(&cfg, |_| {}).is_err());
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    emit_csv(&[record(Algo::Halving, 16, 2, 0)], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "algo,n,k,d,batch,boost,mode,seed,repeat_index,wall_time_s,nccs_mean,nccs_std");
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines[1], "halving,16,2,64,16,100,verbatim,42,0,0.00123456789,0.87654321,0.0123");
}

#[test]
fn csv_rows_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sorted.csv");
    let records = vec![
        record(Algo::Iterative, 16, 2, 1),
        record(Algo::Exact, 32, 2, 0),
        record(Algo::Iterative, 16, 2, 0),
        record(Algo::Halving, 16, 4, 0),
        record(Algo::Exact, 16, 8, 0),
        record(Algo::Halving, 16, 2, 0),
    ];
    emit_csv(&records, &path).unwrap();
    let keys: Vec<(Algo, usize, usize, usize)> =
        read_csv(&path).unwrap().iter().map(|r| (r.algo, r.n, r.k, r.repeat_index)).collect();
    let mut want = keys.clone();
    want.sort_unstable();
    assert_eq!(keys, want);
    assert_eq!(keys[0], (Algo::Exact, 16, 8, 0));
}

#[test]
fn empty_records_create_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    assert!(matches!(emit_csv(&[], &path), Err(BenchError::NoRecords)));
    assert!(!path.exists());
}

#[test]
fn csv_round_trips_non_timing_fields() {
    let out = run_sweep(&small(&[16, 32], &[2, 8], 2), |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.csv");
    emit_csv(&out.records, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), out.records.len());
    let mut original = out.records.clone();
    original.sort_by_key(|r| (r.algo, r.n, r.k, r.repeat_index));
    for (a, b) in original.iter().zip(&back) {
        assert_eq!(
            (a.algo, a.n, a.k, a.d, a.batch, a.boost, a.mode, a.seed, a.repeat_index),
            (b.algo, b.n, b.k, b.d, b.batch, b.boost, b.mode, b.seed, b.repeat_index)
        );
        // nCCS columns carry 9 significant digits.
        assert!((a.nccs_mean - b.nccs_mean).abs() <= 5e-9 * a.nccs_mean.abs().max(1e-300));
        assert!((a.nccs_std - b.nccs_std).abs() <= 5e-9 * a.nccs_std.abs().max(1e-300));
    }
    // A second write of the parsed records is byte-identical.
    let again = dir.path().join("rt2.csv");
    emit_csv(&back, &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn malformed_csv_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, format!("{}\nhalving,16,2,64,16,100,verbatim,42,0,x,1,0\n", CSV_HEADER.join(",")))
        .unwrap();
    assert!(matches!(read_csv(&path), Err(BenchError::Parse { .. })));
    fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(read_csv(&path), Err(BenchError::Parse { .. })));
}

#[test]
fn charts_need_two_distinct_n() {
    let out = run_sweep(&small(&[16], &[4], 2), |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("c_");
    let err = emit_charts(&out.records, &prefix).unwrap_err();
    assert!(matches!(err, BenchError::Chart(_)));
    assert!(err.to_string().contains("2 distinct n"), "{err}");
    assert!(!chart_path(&prefix, "time").exists());
}

#[test]
fn charts_are_well_formed_svg() {
    let out = run_sweep(&small(&[16, 64, 256], &[2, 8, 32], 2), |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_charts(&out.records, &dir.path().join("c_")).unwrap();
    let series = 3 * 3;
    for path in &paths {
        let text = fs::read_to_string(path).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let root = doc.root_element();
        assert_eq!(root.tag_name().name(), "svg");
        assert_eq!(root.tag_name().namespace(), Some("http://www.w3.org/2000/svg"));
        let polylines = root.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(polylines, series);
        let texts: Vec<&str> = root.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.iter().any(|t| t.contains("n (candidates")));
        assert!(texts.contains(&"halving k=8"));
        assert!(texts.contains(&"iterative k=32"));
        assert!(!text.contains("href"), "no external assets");
    }
    assert!(paths[0].ends_with("c_time.svg"));
    assert!(paths[1].ends_with("c_nccs.svg"));
}

#[test]
fn iterative_monotonicity_warning() {
    let mk = |k, t| BenchRecord { wall_time_s: t, ..record(Algo::Iterative, 64, k, 0) };
    assert!(iterative_time_warnings(&[mk(2, 1.0), mk(8, 2.0), mk(32, 3.0)]).is_empty());
    let w = iterative_time_warnings(&[mk(2, 1.0), mk(8, 0.5), mk(32, 3.0)]);
    assert_eq!(w.len(), 1);
    assert!(w[0].contains("k=8"));
}
