use std::fs;

use dgl_core::experiments::{
    run_attractor, run_simulate, run_sweep, run_truncation, simulate, sweep, Axis, RunConfig,
    SWEEP_HEADER, TRAJECTORY_HEADER,
};
use proptest::prelude::*;

fn cfg(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap()
}

#[test]
fn simulate_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(
        "preset = dnls\nalpha = 1\nbeta = 1\nN = 50\ndata = random-phase\nnorm = 1\nt_max = 10\n",
    );
    let s = run_simulate(&c, dir.path()).unwrap();
    assert!(!s.report.blew_up);
    assert!(s.charge_drift < 1e-8);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(TRAJECTORY_HEADER));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["blew_up"], false);
}

#[test]
fn drgl_all_ones_blows_up_inside_the_bound() {
    let c = cfg("preset = drgl\nlambda = 1\nk = 1\nN = 10\nsigma = 1\ndata = real-positive\nt_max = 3\nthreshold_ladder = true\n");
    let (s, _) = simulate(&c, false).unwrap();
    assert!(s.report.blew_up);
    assert!(s.report.t_sim.unwrap() <= 1.0);
    let times: Vec<f64> = s.threshold_ladder.iter().map(|(_, t)| t.unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(times[2] - times[1] < times[1] - times[0]);
}

#[test]
fn sigma_one_sweep_has_a_flat_bound() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("nonlinearity = non-gauge\nalpha = 1\nbeta = 1\nsigma = 1\nt_max = 3\n[sweep]\naxis = N\nvalues = 10, 20, 40, 80\n");
    let rows = run_sweep(&c, dir.path()).unwrap();
    let sims: Vec<f64> = rows.iter().map(|r| r.t_sim.unwrap()).collect();
    for r in &rows {
        assert!((r.t_star.unwrap() - 0.5).abs() < 1e-15);
        assert!(r.valid);
    }
    let lo = sims.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sims.iter().copied().fold(0.0, f64::max);
    assert!((hi - lo) / lo < 0.1);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(SWEEP_HEADER));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn failing_cells_become_invalid_rows() {
    let c = cfg("nonlinearity = non-gauge\nalpha = 1\nbeta = 1\nN = 5\nt_max = 2\n[sweep]\naxis = gamma\nvalues = 0, -5\n");
    let rows = sweep(&c).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].valid);
    assert!(!rows[1].valid && rows[1].t_star.is_none());
}

#[test]
fn attractor_and_truncation_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let finite = cfg("lambda = 1\nk = -1\ngamma = 0.5\nN = 2\ndata = random-phase\nt_max = 5\nattractor.initial_norms = 10, 100\n");
    let report = run_attractor(&finite, dir.path()).unwrap();
    assert_eq!(report.finite.unwrap().runs.len(), 2);
    assert!(report.warnings.iter().any(|w| w.contains("before t0")));
    let decay = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert!(decay.starts_with("series,t,value\n"));

    let trunc = cfg("convention = lhs\nlambda = 0.1\nalpha = 0.1\nk = 1\ngamma = -0.5\nmu = 0.5\ntruncation.T = 1\ntruncation.ladder = 6, 12\n");
    let report = run_truncation(&trunc, dir.path()).unwrap();
    assert_eq!(report.rows.len(), 2);
    let table = fs::read_to_string(dir.path().join("truncation.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweep_cells_match_isolated_runs(beta in 0.5f64..3.0, gamma in -0.4f64..0.4, n in 2usize..12) {
        let c = cfg(&format!(
            "nonlinearity = non-gauge\nalpha = 1\nbeta = 1\ngamma = {gamma}\nN = {n}\nt_max = 3\n[sweep]\naxis = beta\nvalues = {beta}, {}\n",
            beta + 1.0
        ));
        let rows = sweep(&c).unwrap();
        let (single, _) = simulate(&c.with_axis_value(Axis::Beta, beta).unwrap(), false).unwrap();
        prop_assert_eq!(rows[0].t_sim.map(f64::to_bits), single.report.t_sim.map(f64::to_bits));
        prop_assert_eq!(rows[0].t_star, single.bound.t_star);
        let again = sweep(&c).unwrap();
        prop_assert_eq!(rows, again);
    }

    #[test]
    fn valid_rows_never_exceed_their_bound(beta in 0.5f64..3.0, gamma in -0.4f64..0.6, p in 2.0f64..4.0, n in 2usize..15) {
        let c = cfg(&format!(
            "nonlinearity = non-gauge\nalpha = 1\nbeta = {beta}\ngamma = {gamma}\np = {p}\nN = {n}\nt_max = 4\n"
        ));
        let (s, _) = simulate(&c, false).unwrap();
        prop_assert!(s.bound.valid);
        prop_assert_eq!(s.report.within_bound(), Some(true));
        prop_assert!(s.m_imag_nondecreasing);
    }
}
