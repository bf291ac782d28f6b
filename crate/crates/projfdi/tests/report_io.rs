use std::path::Path;

use projfdi::benchmark::{benchmark_plant, named_plant};
use projfdi::dto::{ModelDto, PlantSpec, SCHEMA};
use projfdi::export::{export_report, load_report, report_csv, report_json, Format, CSV_HEADER};
use projfdi::harness::{run_scenario, FaultKind, FaultSpec, Scheme, ScenarioConfig, UncertaintySpec, UncertaintySpecKind};
use projfdi::Error;
use projfdi_core::riccati::{dare_stabilizing, Side};

fn config(trials: usize, horizon: usize) -> ScenarioConfig {
    ScenarioConfig {
        schema: SCHEMA,
        plant: PlantSpec::Named("benchmark".into()),
        scheme: Scheme::OpenLoop,
        uncertainty: UncertaintySpec { kind: UncertaintySpecKind::RightCoprime, magnitude: 0.1, seed: 3 },
        fault: FaultSpec { kind: FaultKind::SensorBias, onset_index: 20, magnitude: 0.5 },
        horizon,
        trials,
        guard: None,
        delta: None,
    }
}

#[test]
fn json_round_trip_is_identical() {
    let report = run_scenario(&config(7, 60)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    export_report(&report, &path, Format::Json).unwrap();
    let back = load_report(&path).unwrap();
    assert_eq!(back, report);
    assert_eq!(report_json(&back), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn csv_has_a_row_per_trial() {
    let report = run_scenario(&config(9, 60)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    assert_eq!(Format::from_path(&path), Format::Csv);
    export_report(&report, &path, Format::Csv).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        let j: f64 = r[1].parse().unwrap();
        assert_eq!(j, report.per_trial[i].outcome.as_ref().unwrap().j);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_report(Path::new("/definitely/not/here.json")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config(12, 80);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(report_json(&a), report_json(&b));
    assert_eq!(report_csv(&a).unwrap(), report_csv(&b).unwrap());
    assert_eq!(a.digest, cfg.digest());
}

#[test]
fn single_short_trial() {
    let report = run_scenario(&config(1, 1)).unwrap();
    assert_eq!(report.per_trial.len(), 1);
    assert_eq!(report.summary.trials, 1);
    assert_eq!(report.summary.completed + report.summary.failed, 1);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut cfg = config(1, 10);
    cfg.trials = 0;
    assert!(run_scenario(&cfg).is_err());
    let mut cfg = config(1, 10);
    cfg.uncertainty.magnitude = 1.5;
    assert!(run_scenario(&cfg).is_err());
    let mut cfg = config(1, 10);
    cfg.plant = PlantSpec::Named("no-such-plant".into());
    assert!(run_scenario(&cfg).is_err());
}

#[test]
fn benchmark_fixture() {
    let g = benchmark_plant();
    assert_eq!((g.states(), g.inputs(), g.outputs()), (3, 2, 2));
    assert!(g.is_stable().unwrap());
    for side in [Side::Filter, Side::Control] {
        assert!(dare_stabilizing(&g, side).unwrap().residual < 1e-12);
    }
    assert_eq!(named_plant("three-tank").unwrap(), g);
    let dto = ModelDto::from_model(&g);
    let text = serde_json::to_string(&dto).unwrap();
    assert_eq!(serde_json::from_str::<ModelDto>(&text).unwrap().to_model().unwrap(), g);
}
