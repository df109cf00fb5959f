use std::io::Write;

use eon_power::gd::{optimize_gd, reference_optimum, GdParams};
use eon_power::hurricane::{optimize, HurricaneParams};
use eon_power::metrics::{nmse, power_penalty_db};
use eon_power::network::{load_config_file, table3};
use eon_power::qot::{PowerVector, QotModel};
use eon_power::report::{RunReport, RunSummary, SCHEMA_VERSION};
use eon_power::scenarios::{run_ageing, run_drop, OptimizerChoice};
use eon_power::Error;

fn short(params: HurricaneParams, iterations: usize) -> HurricaneParams {
    HurricaneParams { iterations, ..params }
}

#[test]
fn bundled_network_shape() {
    let cfg = table3().unwrap();
    assert_eq!(cfg.network.len(), 12);
    let m = cfg.network.shared_span_matrix();
    for i in 0..12 {
        assert_eq!(m[i][i], cfg.network.lightpaths()[i].route.span_count());
        for j in 0..12 {
            assert_eq!(m[i][j], m[j][i]);
            assert!(m[i][j] <= m[i][i].min(m[j][j]));
        }
    }
    for lp in cfg.network.lightpaths() {
        let c = lp.modulation.spectral_efficiency();
        assert!((c * lp.bandwidth_hz - lp.rate_gbps * 1e9).abs() < 1e-9 * lp.rate_gbps * 1e9);
    }
}

#[test]
fn reference_is_feasible_at_every_lifetime_point() {
    let cfg = table3().unwrap();
    for tau in [0.0, 5.0, 10.0] {
        let model = QotModel::new(&cfg.network, &cfg.physical, tau).unwrap();
        let p = reference_optimum(&model).unwrap();
        assert!(model.check_constraints(&p).unwrap().all_feasible(), "tau={tau}");
        assert!(model.j1(&p) < cfg.physical.lambda2);
    }
}

#[test]
fn hurricane_improves_on_the_start() {
    let cfg = table3().unwrap();
    let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
    let reference = reference_optimum(&model).unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let start = nmse(p0.watts(), &reference).unwrap();
    for params in [HurricaneParams::chso(), HurricaneParams::hso()] {
        for seed in 1..=5 {
            let run = optimize(&model, &params.with_seed(seed), &p0).unwrap();
            assert!(nmse(run.eye(), &reference).unwrap() < start);
            assert!(model.j1(run.eye()) <= model.j1(p0.watts()));
        }
    }
}

#[test]
fn chso_lands_close_to_the_reference() {
    let cfg = table3().unwrap();
    let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
    let reference = reference_optimum(&model).unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let run = optimize(&model, &HurricaneParams::chso().with_seed(3), &p0).unwrap();
    assert!(nmse(run.eye(), &reference).unwrap() < 1e-3);
    let pp = power_penalty_db(run.eye(), &reference).unwrap();
    assert!(pp.iter().all(|v| v.abs() < 0.5));
}

#[test]
fn same_seed_same_run() {
    let cfg = table3().unwrap();
    let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let params = short(HurricaneParams::chso(), 30).with_seed(11);
    let a = optimize(&model, &params, &p0).unwrap();
    let b = optimize(&model, &params, &p0).unwrap();
    assert_eq!(a.trace, b.trace);
    let c = optimize(&model, &params.with_seed(12), &p0).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn summaries_round_trip_through_json() {
    let cfg = table3().unwrap();
    let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
    let reference = reference_optimum(&model).unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let run = optimize_gd(&model, &GdParams::default(), &p0).unwrap();
    let report = RunReport::from_gd(&model, &run, Some(&reference)).unwrap();
    let mut buf = Vec::new();
    report.write_summary_json(&mut buf).unwrap();
    let back: RunSummary = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, report.summary());
    assert_eq!(back.schema_version, SCHEMA_VERSION);
    let mut csv = Vec::new();
    report.write_trace_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("iteration,pressure,j1,nmse,R1_dbm"));
    assert_eq!(text.lines().count(), report.rows.len() + 1);
}

#[test]
fn ageing_series_has_one_point_per_tau() {
    let cfg = table3().unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let choice = OptimizerChoice::Hurricane(short(HurricaneParams::chso(), 20));
    let pts = run_ageing(&cfg.network, &cfg.physical, &choice, &[0.0, 10.0], &[1, 2], &p0).unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[1].tau, 10.0);
    assert!(pts.iter().all(|p| p.runs == 2 && p.std_pp_db >= 0.0));
    assert!(run_ageing(&cfg.network, &cfg.physical, &choice, &[], &[1], &p0).is_err());
}

#[test]
fn drop_scenario_from_bundled_config() {
    let cfg = table3().unwrap();
    let spec = cfg.scenario.clone().unwrap();
    let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
    let params = short(HurricaneParams::chso(), 40);
    let t = run_drop(&cfg.network, &cfg.physical, &params, &spec, &p0, 2).unwrap();
    assert_eq!(t.iterations.len(), 210);
    assert_eq!(t.channels[1].len(), 10);
    // Perturbation only inside the window, so both curves coincide again
    // for the frozen vector after it closes.
    assert!(t.nmse_uncompensated[31] > t.nmse_uncompensated[29]);
    assert_eq!(t.nmse_uncompensated[60], t.nmse_uncompensated[209]);
}

#[test]
fn config_file_errors_carry_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    let text = eon_power::network::TABLE3_CONFIG.replace("modulation = \"PM-64QAM\"", "modulation = \"PM-128QAM\"");
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    let err = load_config_file(&path, &[]).unwrap_err();
    assert!(matches!(err, Error::UnknownModulation { .. }), "{err}");
    assert!(err.to_string().contains("lightpaths["));

    let good = dir.path().join("good.cfg");
    std::fs::write(&good, eon_power::network::TABLE3_CONFIG).unwrap();
    let over = [("physical.nli_scale".to_string(), "0.004".to_string())];
    let cfg = load_config_file(&good, &over).unwrap();
    assert_eq!(cfg.physical.nli_scale, 0.004);
    assert!(load_config_file(&dir.path().join("missing.cfg"), &[]).is_err());
}
