//! Harness-level integration tests: spec validation diagnostics, CSV
//! schema stability, and bit-for-bit reproducibility across reruns.

use csofdm::harness::{preset, run_sweep, ExperimentSpec, SweepResult, TaskSpec};
use csofdm::Error;
use std::fs;
use std::path::Path;

fn small_spec(name: &str, dir: &Path) -> ExperimentSpec {
    let mut spec = preset("fig-mse").unwrap();
    spec.name = name.to_string();
    spec.trials = 3;
    spec.seed = 11;
    spec.snr_grid_db = vec![0.0, 10.0];
    spec.grid.dft_size = 64;
    spec.grid.fir_len = 16;
    spec.grid.pilot_count = 16;
    for ch in &mut spec.channels {
        ch.delay.max_delay_spread_ns = 15.0 * 2.5;
        ch.delay.max_mpc_count = 16;
        ch.delay.mean_rays_per_cluster = 3.0;
        ch.delay.cluster_rate_per_ns = 1.0 / 30.0;
    }
    spec.outputs = dir.to_path_buf();
    spec
}

#[test]
fn single_trial_single_snr_gives_one_row_per_method() {
    let dir = std::env::temp_dir().join("csofdm-test-single-row");
    let _ = fs::remove_dir_all(&dir);
    let mut spec = small_spec("single", &dir);
    spec.trials = 1;
    spec.snr_grid_db = vec![0.0];
    spec.estimators.truncate(1); // ml-m only
    let summary = run_sweep(&spec).unwrap();
    let SweepResult::Estimation(rows) = &summary.result else {
        panic!("expected estimation rows");
    };
    assert_eq!(rows.len(), 1);
    let text = fs::read_to_string(dir.join("single.csv")).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
}

#[test]
fn same_seed_twice_is_byte_identical() {
    let dir_a = std::env::temp_dir().join("csofdm-test-repro-a");
    let dir_b = std::env::temp_dir().join("csofdm-test-repro-b");
    for d in [&dir_a, &dir_b] {
        let _ = fs::remove_dir_all(d);
    }
    let a = run_sweep(&small_spec("repro", &dir_a)).unwrap();
    let b = run_sweep(&small_spec("repro", &dir_b)).unwrap();
    assert_eq!(a.result, b.result);
    let bytes_a = fs::read(dir_a.join("repro.csv")).unwrap();
    let bytes_b = fs::read(dir_b.join("repro.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn worker_count_does_not_change_results() {
    // the per-trial substreams make the reduction order irrelevant
    let dir_one = std::env::temp_dir().join("csofdm-test-workers-1");
    let dir_many = std::env::temp_dir().join("csofdm-test-workers-n");
    let _ = fs::remove_dir_all(&dir_one);
    let _ = fs::remove_dir_all(&dir_many);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = pool.install(|| run_sweep(&small_spec("workers", &dir_one))).unwrap();
    let b = run_sweep(&small_spec("workers", &dir_many)).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(
        fs::read(dir_one.join("workers.csv")).unwrap(),
        fs::read(dir_many.join("workers.csv")).unwrap()
    );
}

#[test]
fn golden_csv_headers() {
    let base = std::env::temp_dir().join("csofdm-test-headers");
    let _ = fs::remove_dir_all(&base);

    let spec = small_spec("est", &base.join("est"));
    run_sweep(&spec).unwrap();
    let text = fs::read_to_string(base.join("est/est.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "snr_db,method,trials,mse_mean,mse_std,lhat_mean,lhat_std"
    );

    let mut spec = small_spec("rho", &base.join("rho"));
    spec.task = TaskSpec::RhoBounds { d_max: 8 };
    spec.estimators.clear();
    spec.snr_grid_db.clear();
    run_sweep(&spec).unwrap();
    let name = format!("rho.{}.csv", spec.channels[0].name);
    let text = fs::read_to_string(base.join("rho").join(name)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "d,mean_rho_bar,bound_product,bound_geometric_h,bound_geometric_alpha"
    );

    let mut spec = small_spec("cdf", &base.join("cdf"));
    spec.task = TaskSpec::CiCdf;
    spec.estimators.clear();
    spec.snr_grid_db.clear();
    run_sweep(&spec).unwrap();
    let name = format!("cdf.{}.csv", spec.channels[0].name);
    let text = fs::read_to_string(base.join("cdf").join(name)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "adjusted_ci,empirical_cdf");

    let mut spec = small_spec("ber", &base.join("ber"));
    spec.task = TaskSpec::Ber {
        modulation: csofdm::harness::ModulationSpec::Qpsk,
        frames_per_block: 2,
    };
    spec.estimators.truncate(2);
    run_sweep(&spec).unwrap();
    let text = fs::read_to_string(base.join("ber/ber.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "snr_db,method,modulation,ber,symbols");
}

#[test]
fn meta_sidecar_echoes_the_spec() {
    let dir = std::env::temp_dir().join("csofdm-test-meta");
    let _ = fs::remove_dir_all(&dir);
    let spec = small_spec("meta", &dir);
    run_sweep(&spec).unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("meta.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["seed"], 11);
    assert_eq!(meta["spec"]["name"], "meta");
    assert!(meta["files"].as_array().unwrap().iter().any(|f| f == "meta.csv"));
    // round-trips back into a valid spec
    let echoed: ExperimentSpec = serde_json::from_value(meta["spec"].clone()).unwrap();
    echoed.validate().unwrap();
    assert_eq!(echoed, spec);
}

#[test]
fn schema_errors_carry_field_paths() {
    let dir = std::env::temp_dir().join("csofdm-test-schema");

    let mut spec = small_spec("bad", &dir);
    spec.trials = 0;
    match run_sweep(&spec) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "trials"),
        other => panic!("expected schema error, got {other:?}"),
    }

    let mut spec = small_spec("bad", &dir);
    spec.grid.pilot_count = 60; // K mod N ≠ 0
    match run_sweep(&spec) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "grid"),
        other => panic!("expected schema error, got {other:?}"),
    }

    let mut spec = small_spec("bad", &dir);
    spec.estimators[0].method = "lasso".into();
    match run_sweep(&spec) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "estimators[0].method"),
        other => panic!("expected schema error, got {other:?}"),
    }

    let mut spec = small_spec("bad", &dir);
    spec.channels[0].amplitude.kind = "nakagami".into();
    match run_sweep(&spec) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "channels[0]"),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn spec_files_round_trip_through_toml_and_json() {
    let spec = small_spec("roundtrip", Path::new("out/roundtrip"));
    let toml_text = spec.to_toml();
    let parsed = ExperimentSpec::from_toml(&toml_text).unwrap();
    assert_eq!(parsed, spec);

    let json_text = serde_json::to_string(&spec).unwrap();
    let parsed = ExperimentSpec::from_json(&json_text).unwrap();
    assert_eq!(parsed, spec);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let spec = small_spec("strict", Path::new("out/strict"));
    let mut text = spec.to_toml();
    text.push_str("\nunknown_key = 1\n");
    assert!(matches!(
        ExperimentSpec::from_toml(&text),
        Err(Error::Schema { .. })
    ));
}
