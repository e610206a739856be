use std::fs;
use std::path::PathBuf;

use decomp_conformal::pipeline::recompose_intervals;
use decomp_conformal::{
    emit_report, generate_synthetic, load_csv, run_decomposed, run_sweep, write_series_csv,
    Component, CsvSchema, DatasetSpec, Error, HyperParams, Method, MethodAssignment, SplitSpec,
    SweepConfig, SweepEntry, TestDecomposition,
};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hourly_load.csv")
}

fn load_schema() -> CsvSchema {
    CsvSchema {
        time_col: Some("hour".into()),
        value_col: "load".into(),
        feature_cols: vec!["temperature".into()],
        period: 24,
    }
}

#[test]
fn csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let y = [1.5, -2.25, 3.0, 1e-7];
    let x = [0.0, 1.0, 2.0, 3.0];
    write_series_csv(&path, &[("y", &y), ("x", &x)]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,y,x\n1,"));

    let mut schema = CsvSchema::new("y", 2);
    schema.time_col = Some("t".into());
    schema.feature_cols = vec!["x".into()];
    let s = load_csv(&path, &schema).unwrap();
    assert_eq!(s.values(), &y);
    assert_eq!(s.features().unwrap()[3], vec![3.0]);
}

#[test]
fn csv_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,y\n1,2.0\n2,oops\n").unwrap();
    match load_csv(&bad, &CsvSchema::new("y", 2)) {
        Err(Error::NonNumericCell { row, column, value }) => {
            assert_eq!((row, column.as_str(), value.as_str()), (1, "y", "oops"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        load_csv(&bad, &CsvSchema::new("load", 2)),
        Err(Error::MissingColumn(c)) if c == "load"
    ));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "t,y\n").unwrap();
    assert!(matches!(
        load_csv(&empty, &CsvSchema::new("y", 2)),
        Err(Error::EmptyFile(_))
    ));

    assert!(matches!(
        load_csv(dir.path().join("absent.csv"), &CsvSchema::new("y", 2)),
        Err(Error::Io { .. })
    ));
}

#[test]
fn fixture_run_recomposes_component_bounds() {
    let series = load_csv(fixture(), &load_schema()).unwrap();
    let split = SplitSpec::from_fractions(series.len(), 0.5, 0.25).unwrap();
    let hp = HyperParams {
        lag_order: Some(2),
        ..HyperParams::default()
    };
    let assignment =
        MethodAssignment::new(Method::EnbPI, Method::ExpLocal, Method::CVPlus, 0.2).unwrap();
    let run = run_decomposed(&series, &split, &assignment, &hp).unwrap();

    assert_eq!(run.intervals.len(), split.test().len());
    assert_eq!(run.actuals, series.values()[split.test()].to_vec());
    let parts: Vec<_> = [Component::Trend, Component::Seasonal, Component::Remainder]
        .iter()
        .map(|c| &run.component(*c).unwrap().intervals)
        .collect();
    let summed = recompose_intervals(parts[0], parts[1], parts[2]).unwrap();
    assert_eq!(summed.lower(), run.intervals.lower());
    assert_eq!(summed.upper(), run.intervals.upper());
    assert!(run.picp > 0.6, "coverage {}", run.picp);
}

#[test]
fn refit_mode_runs() {
    let series = generate_synthetic(400, 1).unwrap();
    let split = SplitSpec::from_fractions(series.len(), 0.5, 0.3).unwrap();
    let hp = HyperParams {
        lag_order: Some(1),
        test_decomposition: TestDecomposition::Refit,
        ..HyperParams::default()
    };
    let assignment =
        MethodAssignment::new(Method::EnbPI, Method::ExpLocal, Method::CVPlus, 0.2).unwrap();
    let run = run_decomposed(&series, &split, &assignment, &hp).unwrap();
    assert!(run.piaw.is_finite());
    assert!(run.picp > 0.5);
}

#[test]
fn sweep_records_failures_and_keeps_going() {
    use Method::*;
    let mut cfg = SweepConfig::new(
        DatasetSpec::Synthetic { length: 600 },
        vec![
            SweepEntry::decomposed(EnbPI, BinaryLocal, CVPlus),
            SweepEntry::raw(EnbPI),
        ],
    );
    cfg.alphas = vec![0.1, 0.2];
    cfg.seeds = vec![0, 1];
    // 2k >= period makes every BinaryLocal cell fail
    cfg.hyper_params.neighborhood = 15;
    cfg.hyper_params.lag_order = Some(1);
    cfg.record_runtime = false;
    let outcome = run_sweep(&cfg).unwrap();
    assert_eq!(outcome.rows.len(), 8);
    assert_eq!(outcome.failures(), 4);
    assert!(outcome.rows[..4]
        .iter()
        .all(|r| r.error.is_some() && r.picp.is_nan()));
    assert!(outcome.rows[4..].iter().all(|r| r.error.is_none()));

    let dir = tempfile::tempdir().unwrap();
    emit_report(&outcome, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.lines().nth(1).unwrap().contains(",nan,nan,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 4);
    assert_eq!(summary["configs"].as_array().unwrap().len(), 4);
    assert!(summary["configs"][0]["picp_mean"].is_null());
    // only successful runs get an interval table
    let tables = fs::read_dir(dir.path().join("intervals")).unwrap().count();
    assert_eq!(tables, 4);
}

#[test]
fn sweep_is_deterministic() {
    let mut cfg = SweepConfig::new(
        DatasetSpec::Csv {
            path: fixture(),
            schema: load_schema(),
        },
        vec![
            SweepEntry::raw(Method::EnbPI),
            SweepEntry::decomposed(Method::ACI, Method::KNN, Method::EnbPI),
        ],
    );
    cfg.alphas = vec![0.15];
    cfg.seeds = vec![3, 4];
    cfg.record_runtime = false;
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.picp, x.piaw), (y.picp, y.piaw));
    }
    assert_eq!(a.rows[0].seed, 3);
}
