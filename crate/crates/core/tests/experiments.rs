use std::fmt::Write as _;
use std::path::PathBuf;

use sphere_wsf::estimator::LabeledData;
use sphere_wsf::experiments::{
    ingest_latlon_csv, read_records, run_real_data, run_scenario, write_records, RealDataConfig, Sampler, Scenario,
    ScenarioConfig, CSV_HEADER,
};
use sphere_wsf::filters::FilterFamily;
use sphere_wsf::geometry::sample_random;
use sphere_wsf::kernels::target_function;

fn design_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/designs"))
}

fn small(scenario: Scenario, sampler: Sampler) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(scenario, Some(sampler), design_dir());
    cfg.trials = 2;
    cfg.test_size = 300;
    cfg.validation_t = 15;
    cfg
}

#[test]
fn missing_design_is_skipped_not_fatal() {
    let mut cfg = small(Scenario::Sim4, Sampler::TDesign);
    cfg.sizes = vec![7, 9];
    cfg.deltas = vec![0.3];
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(out.skipped.len(), 1);
    assert_eq!(out.skipped[0].0, 9);
    assert!(out.records.iter().all(|r| r.n_train == 32));
    // two trials plus a mean row for each of the four methods
    assert_eq!(out.records.len(), 4 * 3);
    assert!(out.records.iter().all(|r| r.wall_ms.is_none()));
}

#[test]
fn results_table_round_trips() {
    let mut cfg = small(Scenario::Sim5, Sampler::Random);
    cfg.sizes = vec![60];
    cfg.deltas = vec![0.1];
    let out = run_scenario(&cfg).unwrap();
    assert!(out.csv().starts_with(CSV_HEADER));
    assert!(out.records.iter().any(|r| r.method == "tikhonov_bound"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim5.csv");
    write_records(&path, &out.records).unwrap();
    assert_eq!(read_records(&path).unwrap(), out.records);
}

#[test]
fn visualization_writes_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Scenario::Sim6, Sampler::TDesign);
    cfg.sizes = vec![7];
    cfg.trials = 1;
    cfg.families = vec![FilterFamily::Tikhonov];
    cfg.dump_dir = Some(dir.path().to_path_buf());
    let out = run_scenario(&cfg).unwrap();
    assert!(!out.dumps.is_empty());
    for path in &out.dumps {
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("x,y,z,truth,prediction"), "{}", path.display());
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn sweep_errors_obey_triangle_inequality() {
    let mut cfg = small(Scenario::Sim1, Sampler::Random);
    cfg.sizes = vec![150];
    cfg.trials = 1;
    cfg.sweep_ratios = vec![1.0, 0.1, 0.01];
    let out = run_scenario(&cfg).unwrap();
    let mut seen = 0;
    for r in &out.records {
        if let (Some(a), Some(s), Some(f)) = (r.rmse, r.stability_err, r.fitting_err) {
            assert!(a <= s + f + 1e-9, "{r:?}");
            seen += 1;
        }
    }
    assert_eq!(seen, 3 * 3);
}

fn latlon_csv(n: usize, seed: u64) -> String {
    let mut s = String::from("lat_deg,lon_deg,value\n");
    for p in sample_random(n, seed).unwrap().iter() {
        let lat = p[2].asin().to_degrees();
        let lon = p[1].atan2(p[0]).to_degrees();
        let _ = writeln!(s, "{lat},{lon},{}", target_function(p));
    }
    s
}

#[test]
fn real_data_pipeline_on_synthetic_file() {
    let dir = tempfile::tempdir().unwrap();
    let (train_path, test_path) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    std::fs::write(&train_path, latlon_csv(200, 1)).unwrap();
    std::fs::write(&test_path, latlon_csv(100, 2)).unwrap();
    let train: LabeledData = ingest_latlon_csv(&train_path, "value").unwrap();
    let test = ingest_latlon_csv(&test_path, "value").unwrap();
    assert_eq!((train.len(), test.len()), (200, 100));

    let cfg = RealDataConfig {
        delta: 0.1,
        trials: 2,
        folds: 3,
        families: vec![FilterFamily::Tikhonov, FilterFamily::Cutoff],
        clamp_nonnegative: true,
        ..RealDataConfig::default()
    };
    let out = run_real_data(&train, &test, None, &cfg).unwrap();
    let again = run_real_data(&train, &test, None, &cfg).unwrap();
    assert_eq!(out.csv(), again.csv());
    for method in ["tikhonov", "cutoff", "ki"] {
        let mean = out.records.iter().find(|r| r.is_mean() && r.method == method).unwrap();
        assert!(mean.rmse.unwrap().is_finite());
        assert_eq!(mean.n_train, 200);
    }
}
