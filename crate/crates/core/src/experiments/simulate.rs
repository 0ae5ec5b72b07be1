use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Preset, RunConfig};
use super::output::{
    csv, format_float, format_opt, write_json, write_text, SWEEP_HEADER, TRAJECTORY_HEADER,
};
use super::source_equivalent;
use crate::diagnostics::{
    bound_gauge_drgl, bound_nongauge, charge, energy_drgl, hamiltonian_dnls, m_imag, mass_sigma,
    n_real, BoundCase, BoundInput,
};
use crate::error::{Error, Result};
use crate::integrate::{integrate, series_drift, threshold_ladder, BlowUpReport};
use crate::lattice::{norm_p_slice, LatticeState};
use crate::models::{DcglSystem, NonlinearityChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    NonGaugeImag,
    NonGaugeReal,
    GaugeDrgl,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub kind: BoundKind,
    pub t_star: Option<f64>,
    /// Bound formula valid and all of its hypotheses satisfied.
    pub valid: bool,
    /// `M(0)` or `N(0)` fed to the bound.
    pub initial_functional: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub norm2: f64,
    pub norm_inf: f64,
    pub charge: f64,
    pub hamiltonian: f64,
    pub energy: f64,
    pub m_imag: f64,
    pub n_real: f64,
    pub mass: f64,
}

impl TrajectoryRow {
    fn fields(&self) -> Vec<String> {
        [
            self.t,
            self.norm2,
            self.norm_inf,
            self.charge,
            self.hamiltonian,
            self.energy,
            self.m_imag,
            self.n_real,
            self.mass,
        ]
        .into_iter()
        .map(format_float)
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub preset: Preset,
    pub half_width: usize,
    pub sites: usize,
    pub sigma: f64,
    pub report: BlowUpReport,
    pub bound: BoundSummary,
    pub initial: TrajectoryRow,
    pub charge_drift: f64,
    pub hamiltonian_drift: f64,
    /// `energy_drgl` never increased between observations (relative slack 1e-12).
    pub energy_nonincreasing: bool,
    /// `m_imag` never dropped by more than 1e-9 between observations.
    pub m_imag_nondecreasing: bool,
    /// `(threshold, T_sim)` pairs; filled on request for blow-up runs.
    pub threshold_ladder: Vec<(f64, Option<f64>)>,
    pub warnings: Vec<String>,
}

fn row(state: &LatticeState, cfg: &RunConfig, sigma: f64) -> TrajectoryRow {
    let p = &cfg.params;
    let u = state.amplitudes();
    TrajectoryRow {
        t: state.time,
        norm2: norm_p_slice(u, 2.0),
        norm_inf: norm_p_slice(u, f64::INFINITY),
        charge: charge(state),
        hamiltonian: hamiltonian_dnls(state, p.alpha, p.beta, cfg.p),
        energy: energy_drgl(state, p.lambda, p.gamma, p.k, cfg.p, sigma),
        m_imag: m_imag(state, p.gamma, sigma),
        n_real: n_real(state, p.gamma, sigma),
        mass: mass_sigma(state, sigma),
    }
}

pub(super) fn initial_row(cfg: &RunConfig, u0: &LatticeState) -> TrajectoryRow {
    row(u0, cfg, cfg.sigma())
}

/// Picks the blow-up bound that matches the configuration and evaluates it.
pub(super) fn select_bound(
    cfg: &RunConfig,
    u0: &LatticeState,
    sigma: f64,
    warnings: &mut Vec<String>,
) -> BoundSummary {
    let params = source_equivalent(&cfg.params, cfg.convention);
    let sites = u0.geometry.sites();
    let none = BoundSummary {
        kind: BoundKind::None,
        t_star: None,
        valid: false,
        initial_functional: None,
    };
    let input = |m0: f64| BoundInput {
        params: params.clone(),
        p: cfg.p,
        sigma,
        sites,
        m0,
    };
    if cfg.forcing.is_some() {
        warnings.push("blow-up bounds assume no forcing; none evaluated".into());
        return none;
    }
    match cfg.nonlinearity {
        NonlinearityChoice::NonGauge => {
            let m0 = m_imag(u0, params.gamma, sigma);
            let n0 = n_real(u0, params.gamma, sigma);
            let (case, kind, value) = if params.beta > 0.0 && m0 > 0.0 {
                (BoundCase::ImagBeta, BoundKind::NonGaugeImag, m0)
            } else if params.k > 0.0 && n0 > 0.0 {
                (BoundCase::RealK, BoundKind::NonGaugeReal, n0)
            } else {
                warnings.push(
                    "non-gauge bound needs beta > 0 with Im sum > 0, or k > 0 with Re sum > 0"
                        .into(),
                );
                return none;
            };
            match bound_nongauge(&input(value), case) {
                Ok(b) => {
                    if !b.valid {
                        warnings.push("bound validity condition fails for these parameters".into());
                    }
                    BoundSummary {
                        kind,
                        t_star: b.t_star,
                        valid: b.valid,
                        initial_functional: Some(value),
                    }
                }
                Err(e) => {
                    warnings.push(e.to_string());
                    none
                }
            }
        }
        NonlinearityChoice::Gauge => {
            if !(params.alpha == 0.0 && params.beta == 0.0 && params.k > 0.0) {
                if cfg.preset == Preset::Drgl {
                    warnings.push("gauge blow-up bound needs k > 0".into());
                }
                return none;
            }
            let energy = energy_drgl(u0, params.lambda, params.gamma, params.k, cfg.p, sigma);
            let m0 = mass_sigma(u0, sigma);
            let mut valid = energy <= 0.0;
            if !valid {
                warnings.push(format!(
                    "initial energy {energy} is positive; gauge bound not guaranteed"
                ));
            }
            match bound_gauge_drgl(&input(m0)) {
                Ok(t) => BoundSummary {
                    kind: BoundKind::GaugeDrgl,
                    t_star: Some(t),
                    valid,
                    initial_functional: Some(m0),
                },
                Err(e) => {
                    valid = false;
                    warnings.push(e.to_string());
                    BoundSummary { valid, ..none }
                }
            }
        }
    }
}

/// Runs one simulation. Trajectory rows are collected when `keep_rows` is set.
pub fn simulate(
    cfg: &RunConfig,
    keep_rows: bool,
) -> Result<(SimulationSummary, Vec<TrajectoryRow>)> {
    let sigma = cfg.sigma();
    let u0 = cfg.initial_state();
    let nl = cfg.nonlinearity.build(cfg.p)?;
    let params = cfg.params_with_forcing();
    let system = DcglSystem::new(&params, nl, cfg.convention);
    let mut warnings = Vec::new();
    let bound = select_bound(cfg, &u0, sigma, &mut warnings);

    let mut rows = Vec::new();
    let mut charges = Vec::new();
    let mut hamiltonians = Vec::new();
    let mut energy_ok = true;
    let mut m_ok = true;
    let mut last: Option<TrajectoryRow> = None;
    let mut observe = |s: &LatticeState| {
        let r = row(s, cfg, sigma);
        if let Some(prev) = last {
            energy_ok &= r.energy <= prev.energy + 1e-12 * prev.energy.abs().max(1.0);
            m_ok &= r.m_imag >= prev.m_imag - 1e-9;
        }
        charges.push(r.charge);
        hamiltonians.push(r.hamiltonian);
        if keep_rows {
            rows.push(r);
        }
        last = Some(r);
    };
    let outcome = integrate(&u0, &system, &cfg.integrator, &mut [&mut observe])?;
    let report = outcome.report.with_bound(bound.t_star, bound.valid);

    if report.low_confidence {
        warnings.push("blow-up inferred from non-finite values at dt_min".into());
    }
    if report.step_limit_hit {
        warnings.push("step budget exhausted before t_max".into());
    }
    if report.within_bound() == Some(false) {
        warnings.push("T_sim exceeds the theoretical bound".into());
    }
    let ladder = if cfg.threshold_ladder && report.blew_up {
        let thresholds = [1e4, 1e6, 1e8];
        let times = threshold_ladder(&u0, &system, &cfg.integrator, &thresholds)?;
        thresholds.into_iter().zip(times).collect()
    } else {
        Vec::new()
    };

    let summary = SimulationSummary {
        preset: cfg.preset,
        half_width: cfg.half_width,
        sites: u0.geometry.sites(),
        sigma,
        report,
        bound,
        initial: row(&u0, cfg, sigma),
        charge_drift: series_drift(&charges)?,
        hamiltonian_drift: series_drift(&hamiltonians)?,
        energy_nonincreasing: energy_ok,
        m_imag_nondecreasing: m_ok,
        threshold_ladder: ladder,
        warnings,
    };
    Ok((summary, rows))
}

/// Runs the configured simulation and writes `trajectory.csv` and `report.json`.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulationSummary> {
    let (summary, rows) = simulate(cfg, true)?;
    write_text(
        out_dir,
        "trajectory.csv",
        &csv(TRAJECTORY_HEADER, rows.iter().map(TrajectoryRow::fields)),
    )?;
    write_json(out_dir, "report.json", &summary)?;
    Ok(summary)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: f64,
    pub half_width: usize,
    pub sites: usize,
    pub sigma: f64,
    pub t_sim: Option<f64>,
    pub t_star: Option<f64>,
    pub valid: bool,
    pub threshold: f64,
    pub dt: f64,
    pub refinements: u64,
}

impl ResultRow {
    fn from_summary(axis: f64, cfg: &RunConfig, s: &SimulationSummary) -> Self {
        Self {
            axis,
            half_width: s.half_width,
            sites: s.sites,
            sigma: s.sigma,
            t_sim: s.report.t_sim,
            t_star: s.bound.t_star,
            valid: s.bound.valid,
            threshold: s.report.threshold,
            dt: cfg.integrator.dt,
            refinements: s.report.refinements,
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            format_float(self.axis),
            self.half_width.to_string(),
            self.sites.to_string(),
            format_float(self.sigma),
            format_opt(self.t_sim),
            format_opt(self.t_star),
            self.valid.to_string(),
            format_float(self.threshold),
            format_float(self.dt),
            self.refinements.to_string(),
        ]
    }
}

/// Evaluates every sweep cell in parallel; rows come back in axis order.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let plan = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config(0, "configuration has no [sweep] section"))?;
    let mut cells: Vec<(usize, ResultRow)> = plan
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let cell = cfg.with_axis_value(plan.axis, v)?;
            let row = match simulate(&cell, false) {
                Ok((summary, _)) => ResultRow::from_summary(v, &cell, &summary),
                // a failing cell becomes an invalid row; the sweep goes on
                Err(_) => ResultRow {
                    axis: v,
                    half_width: cell.half_width,
                    sites: cell.geometry().sites(),
                    sigma: cell.sigma(),
                    t_sim: None,
                    t_star: None,
                    valid: false,
                    threshold: cell.integrator.blowup_threshold,
                    dt: cell.integrator.dt,
                    refinements: 0,
                },
            };
            Ok((i, row))
        })
        .collect::<Result<_>>()?;
    cells.sort_by_key(|(i, _)| *i);
    Ok(cells.into_iter().map(|(_, r)| r).collect())
}

/// Runs the sweep and writes `sweep.csv`.
pub fn run_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<ResultRow>> {
    let rows = sweep(cfg)?;
    write_text(
        out_dir,
        "sweep.csv",
        &csv(SWEEP_HEADER, rows.iter().map(ResultRow::fields)),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_gives_flat_series() {
        let cfg = RunConfig::parse("amplitude = 0\nbeta = 1\nt_max = 0.5\ndt = 0.01\n").unwrap();
        let (summary, rows) = simulate(&cfg, true).unwrap();
        assert!(!summary.report.blew_up);
        assert!(rows.iter().all(|r| r.norm2 == 0.0 && r.charge == 0.0));
    }

    #[test]
    fn scalar_nongauge_bound_is_met() {
        let cfg =
            RunConfig::parse("nonlinearity = non-gauge\nbeta = 1\nalpha = 1\nN = 3\nt_max = 2\n")
                .unwrap();
        let (summary, _) = simulate(&cfg, false).unwrap();
        assert_eq!(summary.bound.kind, BoundKind::NonGaugeImag);
        assert!((summary.bound.t_star.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(summary.report.within_bound(), Some(true));
    }

    #[test]
    fn lhs_convention_uses_flipped_coefficients() {
        let cfg = RunConfig::parse(
            "nonlinearity = non-gauge\nconvention = lhs\nbeta = -1\nalpha = 1\nN = 3\nt_max = 2\n",
        )
        .unwrap();
        let (summary, _) = simulate(&cfg, false).unwrap();
        assert_eq!(summary.bound.kind, BoundKind::NonGaugeImag);
        assert!(summary.report.blew_up);
    }

    #[test]
    fn sweep_rows_follow_axis_order() {
        let cfg = RunConfig::parse(
            "nonlinearity = non-gauge\nbeta = 1\nalpha = 1\nt_max = 2\n[sweep]\naxis = beta\nvalues = 2, 1, 0.5\n",
        )
        .unwrap();
        let rows = sweep(&cfg).unwrap();
        let axis: Vec<f64> = rows.iter().map(|r| r.axis).collect();
        assert_eq!(axis, [2.0, 1.0, 0.5]);
        for pair in rows.windows(2) {
            let ratio = pair[1].t_star.unwrap() / pair[0].t_star.unwrap();
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }
}
