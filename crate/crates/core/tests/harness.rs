use optshrink::harness::{
    run_experiment, save_csv, save_sidecar, sidecar_path, Estimator, Experiment, ExperimentConfig, ResultRow, CSV_HEADER,
};

fn full_scale(experiment: Experiment, grid: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        grid,
        seed: 314,
        estimators: vec![Estimator::Oracle],
        ..ExperimentConfig::defaults(experiment)
    }
}

fn oracle_row(rows: &[ResultRow], sweep: f64) -> &ResultRow {
    rows.iter()
        .find(|r| r.estimator == "oracle" && r.sweep_value == sweep)
        .expect("oracle row")
}

#[test]
fn oracle_weight_at_theta_two() {
    let rows = run_experiment(&full_scale(Experiment::WeightsVsTheta, vec![2.0])).unwrap();
    let row = oracle_row(&rows, 2.0);
    assert!((1.42..=1.58).contains(&row.mean_weight), "{}", row.mean_weight);
    assert!((row.predicted - 1.5).abs() < 1e-12);
    assert_eq!(row.trials, 100);
}

#[test]
fn oracle_weight_vanishes_below_critical_sampling() {
    let rows = run_experiment(&full_scale(Experiment::MissingData, vec![0.2])).unwrap();
    let row = oracle_row(&rows, 0.2);
    assert!(row.mean_weight < 0.15, "{}", row.mean_weight);
    assert_eq!(row.predicted, 0.0);
}

#[test]
fn single_trial_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        n: 80,
        m: 100,
        trials: 1,
        seed: 11,
        ..ExperimentConfig::defaults(Experiment::Shrinkers)
    };
    let write = |name: &str| {
        let path = dir.path().join(name);
        let rows = run_experiment(&config).unwrap();
        save_csv(&rows, &path).unwrap();
        save_sidecar(&config, &rows, &sidecar_path(&path)).unwrap();
        path
    };
    let (a, b) = (write("a.csv"), write("b.csv"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(a.with_extension("json")).unwrap(),
        std::fs::read(b.with_extension("json")).unwrap()
    );
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let row = ResultRow {
        sweep_value: 2.0,
        estimator: "optshrink".into(),
        mean_weight: 1.4987654321987,
        mean_normalized_se: 0.43751234567,
        std_error: 0.0031415926535,
        predicted: 1.5,
        trials: 100,
        flagged: 0,
    };
    save_csv(std::slice::from_ref(&row), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let record = reader.records().next().unwrap().unwrap();
    assert_eq!(&record[1], "optshrink");
    let close = |field: &str, want: f64| {
        let got: f64 = field.parse().unwrap();
        assert!(((got - want) / want).abs() < 5e-10, "{got} vs {want}");
    };
    close(&record[0], row.sweep_value);
    close(&record[2], row.mean_weight);
    close(&record[3], row.mean_normalized_se);
    close(&record[4], row.std_error);
    close(&record[5], row.predicted);
}
