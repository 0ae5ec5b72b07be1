use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::output::{csv, format_float, write_text};
use crate::error::{Error, Result};
use crate::integrate::integrate;
use crate::lattice::{LatticeState, Weight};
use crate::models::DcglSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub half_width: usize,
    pub doubled: usize,
    /// `sup_t ‖u_N(t) − u_{2N}(t)‖_θ` over `|n| ≤ N`.
    pub sup_difference: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub rows: Vec<TruncationRow>,
    pub strictly_decreasing: bool,
}

/// Snapshots every `stride` steps on a fixed grid; the rate limiter is switched off
/// so that both sizes step through identical times.
fn snapshots(cfg: &RunConfig, u0: &LatticeState, half_width: usize) -> Result<Vec<LatticeState>> {
    let mut cell = cfg.clone();
    cell.half_width = half_width;
    let params = cell.params_with_forcing();
    let system = DcglSystem::new(&params, cell.nonlinearity.build(cell.p)?, cell.convention);
    let mut integrator = cell.integrator.clone();
    integrator.t_max = cfg.truncation.t;
    integrator.rate_limit = 0.0;
    integrator.observer_stride = cfg.truncation.sample_stride.max(1);
    let mut states = Vec::new();
    let mut observe = |s: &LatticeState| states.push(s.clone());
    let outcome = integrate(
        &u0.resized(half_width),
        &system,
        &integrator,
        &mut [&mut observe],
    )?;
    if outcome.report.blew_up || outcome.report.refinements > 0 {
        return Err(Error::Hypothesis(format!(
            "truncation run at N = {half_width} left the fixed grid (blow-up or step refinement)"
        )));
    }
    Ok(states)
}

fn overlap_difference(small: &LatticeState, large: &LatticeState, weight: &Weight) -> f64 {
    small
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let n = small.geometry.label(i);
            weight.theta(n) * (z - large.at(n)).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Compares sizes `N` and `2N` from the same zero-extended data for each `N` of the ladder.
pub fn run_truncation_experiment(cfg: &RunConfig) -> Result<TruncationReport> {
    let weight = Weight::exponential(cfg.mu.unwrap_or(0.0));
    let support = cfg.truncation.support;
    let mut data_cfg = cfg.clone();
    data_cfg.half_width = support;
    let u0 = data_cfg.localized_state(support);

    let mut rows = Vec::new();
    for &n in &cfg.truncation.ladder {
        let small = snapshots(cfg, &u0, n)?;
        let large = snapshots(cfg, &u0, 2 * n)?;
        if small.len() != large.len() {
            return Err(Error::Unsupported(
                "truncation runs produced different sample grids".into(),
            ));
        }
        let sup_difference = small
            .iter()
            .zip(&large)
            .map(|(a, b)| overlap_difference(a, b, &weight))
            .fold(0.0, f64::max);
        rows.push(TruncationRow {
            half_width: n,
            doubled: 2 * n,
            sup_difference,
            samples: small.len(),
        });
    }
    let strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].sup_difference < w[0].sup_difference);
    Ok(TruncationReport {
        rows,
        strictly_decreasing,
    })
}

/// Runs the experiment and writes `truncation.csv`.
pub fn run_truncation(cfg: &RunConfig, out_dir: &Path) -> Result<TruncationReport> {
    let report = run_truncation_experiment(cfg)?;
    let table = csv(
        "N,2N,sup_difference,samples",
        report.rows.iter().map(|r| {
            vec![
                r.half_width.to_string(),
                r.doubled.to_string(),
                format_float(r.sup_difference),
                r.samples.to_string(),
            ]
        }),
    );
    write_text(out_dir, "truncation.csv", &table)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_gives_identical_runs() {
        let cfg = RunConfig::parse("amplitude = 0\nlambda = 0.1\ngamma = -0.5\ntruncation.T = 1\n")
            .unwrap();
        let report = run_truncation_experiment(&cfg).unwrap();
        assert!(report.rows.iter().all(|r| r.sup_difference == 0.0));
        assert!(!report.strictly_decreasing);
    }

    #[test]
    fn linear_difference_shrinks_with_size() {
        let cfg = RunConfig::parse(
            "lambda = 1\nalpha = 1\ngamma = -0.5\nk = 0\nmu = 0.5\ntruncation.T = 1\ntruncation.ladder = 6, 12\ntruncation.support = 2\n",
        )
        .unwrap();
        let report = run_truncation_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].sup_difference > 0.0);
        assert!(report.strictly_decreasing);
    }
}
