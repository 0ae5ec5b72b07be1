use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::output::write_json;
use super::simulate::{initial_row, select_bound, BoundSummary, TrajectoryRow};
use super::{lhs_equivalent, source_equivalent};
use crate::diagnostics::{
    absorbing_finite, absorbing_weighted, finite_radii, lambda1_star, sigma0, FiniteAbsorbing,
    Sigma0, WeightedAbsorbing,
};
use crate::error::Result;
use crate::lattice::{norm_p_slice, weighted_norm_sq, Weight};
use crate::models::{dcgl_to_general, lipschitz_constant, local_existence_time_from, DcglParams};

/// Closed-form diagnostics for a configuration. Items whose hypotheses fail carry
/// the error message instead of a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub initial: TrajectoryRow,
    pub blowup: BoundSummary,
    pub lambda1_star: f64,
    pub lipschitz: std::result::Result<f64, String>,
    pub local_existence_time: std::result::Result<f64, String>,
    pub finite_ball: std::result::Result<FiniteAbsorbing, String>,
    pub sigma0: Option<Sigma0>,
    pub weighted_ball: Option<std::result::Result<WeightedAbsorbing, String>>,
    pub warnings: Vec<String>,
}

fn finite_ball(cfg: &RunConfig) -> Result<FiniteAbsorbing> {
    let params = source_equivalent(&cfg.params, cfg.convention);
    let (_, _, rho_limit) = finite_radii(&params, cfg.p, cfg.half_width)?;
    let rho1 = cfg
        .attractor
        .rho1
        .unwrap_or(cfg.attractor.rho1_factor * rho_limit);
    absorbing_finite(&params, cfg.p, cfg.half_width, rho1)
}

pub fn evaluate_bounds(cfg: &RunConfig) -> Result<BoundsReport> {
    let u0 = cfg.initial_state();
    let nl = cfg.nonlinearity.build(cfg.p)?;
    let mut warnings = Vec::new();
    let blowup = select_bound(cfg, &u0, cfg.sigma(), &mut warnings);
    let radius = 2.0 * norm_p_slice(u0.amplitudes(), 2.0);

    let mut s0 = None;
    let mut weighted_ball = None;
    if let Some(mu) = cfg.mu {
        let weight = Weight::exponential(mu);
        let unforced = DcglParams {
            forcing: None,
            ..cfg.params.clone()
        };
        let epsilon = cfg.epsilon.unwrap_or(2.0 * cfg.params.lambda);
        let value = sigma0(
            &dcgl_to_general(&lhs_equivalent(&unforced, cfg.convention)),
            &weight,
            epsilon,
        );
        if let Some(forcing) = cfg.params_with_forcing().forcing {
            let g_sq = weighted_norm_sq(&forcing, &weight);
            let ball = value.require_dissipative().and_then(|_| {
                let rho = (g_sq / (2.0 * value.value * epsilon)).sqrt();
                let rho1 = cfg
                    .attractor
                    .rho1
                    .unwrap_or(cfg.attractor.rho1_factor * rho);
                let r = weighted_norm_sq(&u0, &weight).sqrt().max(rho1);
                absorbing_weighted(g_sq, value.value, epsilon, r, rho1)
            });
            weighted_ball = Some(ball.map_err(|e| e.to_string()));
        }
        s0 = Some(value);
    }

    Ok(BoundsReport {
        initial: initial_row(cfg, &u0),
        blowup,
        lambda1_star: lambda1_star(cfg.half_width),
        lipschitz: lipschitz_constant(radius, &nl).map_err(|e| e.to_string()),
        local_existence_time: local_existence_time_from(&u0, &nl).map_err(|e| e.to_string()),
        finite_ball: finite_ball(cfg).map_err(|e| e.to_string()),
        sigma0: s0,
        weighted_ball,
        warnings,
    })
}

/// Evaluates the diagnostics and writes `bounds.json`.
pub fn run_bounds(cfg: &RunConfig, out_dir: &Path) -> Result<BoundsReport> {
    let report = evaluate_bounds(cfg)?;
    write_json(out_dir, "bounds.json", &report)?;
    Ok(report)
}
