use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AttractorMode, RunConfig};
use super::output::{csv, format_float, write_json, write_text};
use super::{lhs_equivalent, source_equivalent};
use crate::diagnostics::{
    absorbing_finite, absorbing_weighted, finite_radii, sigma0, tail_mass, tail_time,
    FiniteAbsorbing, Sigma0, TailMass, WeightedAbsorbing,
};
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig};
use crate::lattice::{norm_p_slice, weighted_norm_sq, LatticeState, Weight};
use crate::models::{dcgl_to_general, DcglParams, DcglSystem, NonlinearityChoice};

/// One sample of a recorded series; `series` names the run it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub series: String,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRun {
    pub initial_norm: f64,
    /// First time after which `‖u‖₂ ≤ ρ₁` held for the rest of the run.
    pub entry_time: Option<f64>,
    pub final_norm: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteAttractor {
    pub ball: FiniteAbsorbing,
    pub runs: Vec<EntryRun>,
    /// Every run entered the ball no later than `t₀`.
    pub all_within_t0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub m: usize,
    /// Largest tail mass seen for `t ≥ T(η)`.
    pub max_tail: f64,
    pub out_of_range: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAttractor {
    pub mu: f64,
    pub sigma0: Sigma0,
    pub epsilon: f64,
    pub predicted_rate: f64,
    /// Least-squares slope of `ln ‖u(t)‖²_θ` for the unforced run.
    pub measured_slope: f64,
    /// The slope is at most `−0.9·2σ₀`.
    pub decay_ok: bool,
    pub forcing_norm_sq: Option<f64>,
    pub ball: Option<WeightedAbsorbing>,
    pub eta: Option<f64>,
    pub t_eta: Option<f64>,
    /// Largest `‖u‖²_θ` of the forced run for `t ≥ T(η)`.
    pub limsup_norm_sq: Option<f64>,
    /// `limsup_norm_sq ≤ 1.05·ρ²`.
    pub limsup_ok: Option<bool>,
    pub tails: Vec<TailCheck>,
    /// Smallest `M` whose tail stayed below `η/σ₀`.
    pub tail_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub mode: AttractorMode,
    pub finite: Option<FiniteAttractor>,
    pub weighted: Option<WeightedAttractor>,
    pub warnings: Vec<String>,
}

/// Samples `(t, value)` of a functional along one integration.
fn record(
    u0: &LatticeState,
    system: &DcglSystem,
    integrator: &IntegratorConfig,
    functional: impl Fn(&LatticeState) -> f64,
) -> Result<(Vec<(f64, f64)>, LatticeState)> {
    let mut samples = Vec::new();
    let mut observe = |s: &LatticeState| samples.push((s.time, functional(s)));
    let outcome = integrate(u0, system, integrator, &mut [&mut observe])?;
    if outcome.report.blew_up {
        return Err(Error::Hypothesis(format!(
            "dissipative run crossed the blow-up threshold at t = {:?}",
            outcome.report.t_sim
        )));
    }
    Ok((samples, outcome.state))
}

/// Time after the last sample outside the ball; `None` if the run ends outside.
fn entry_time(samples: &[(f64, f64)], radius: f64) -> Option<f64> {
    match samples.iter().rposition(|&(_, norm)| norm > radius) {
        None => Some(0.0),
        Some(i) => samples.get(i + 1).map(|&(t, _)| t),
    }
}

/// Least-squares slope of `ln y` against `t`, skipping nonpositive samples.
fn log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, y)| y > f64::MIN_POSITIVE && y.is_finite())
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn finite_mode(
    cfg: &RunConfig,
    rows: &mut Vec<DecayRow>,
    warnings: &mut Vec<String>,
) -> Result<FiniteAttractor> {
    if cfg.nonlinearity != NonlinearityChoice::Gauge {
        return Err(Error::Hypothesis(
            "the finite absorbing ball needs the gauge nonlinearity".into(),
        ));
    }
    if cfg.forcing.is_some() {
        warnings.push("forcing is ignored in finite mode".into());
    }
    let params = source_equivalent(&cfg.params, cfg.convention);
    let (_, _, rho_limit) = finite_radii(&params, cfg.p, cfg.half_width)?;
    let rho1 = cfg
        .attractor
        .rho1
        .unwrap_or(cfg.attractor.rho1_factor * rho_limit);
    let ball = absorbing_finite(&params, cfg.p, cfg.half_width, rho1)?;
    if ball.trivial_dynamics {
        warnings.push("gamma/lambda is below lambda1*: every solution decays to zero".into());
    }
    if ball.rho0_zeroed {
        warnings.push("gamma <= 0: rho0 set to zero".into());
    }

    let system = DcglSystem::new(&cfg.params, cfg.nonlinearity.build(cfg.p)?, cfg.convention);
    let t_end = cfg.integrator.t_max;
    let largest = cfg
        .attractor
        .initial_norms
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let mut integrator = cfg.integrator.clone();
    integrator.t_max = t_end;
    integrator.blowup_threshold = integrator.blowup_threshold.max(1e3 * largest);

    let base = cfg.initial_state();
    let mut runs = Vec::new();
    for &norm in &cfg.attractor.initial_norms {
        let u0 = base.clone().scaled_to_l2(norm);
        let (samples, last) = record(&u0, &system, &integrator, |s| {
            norm_p_slice(s.amplitudes(), 2.0)
        })?;
        let label = format!("norm0={}", format_float(norm));
        rows.extend(samples.iter().map(|&(t, value)| DecayRow {
            series: label.clone(),
            t,
            value,
        }));
        runs.push(EntryRun {
            initial_norm: norm,
            entry_time: entry_time(&samples, rho1),
            final_norm: norm_p_slice(last.amplitudes(), 2.0),
            t_end: last.time,
        });
    }
    if t_end < ball.t0 {
        warnings.push(format!(
            "runs stop at t_max = {t_end}, before t0 = {}",
            ball.t0
        ));
    }
    let all_within_t0 = runs
        .iter()
        .all(|r| r.entry_time.is_some_and(|t| t <= ball.t0));
    Ok(FiniteAttractor {
        ball,
        runs,
        all_within_t0,
    })
}

fn weighted_mode(
    cfg: &RunConfig,
    rows: &mut Vec<DecayRow>,
    warnings: &mut Vec<String>,
) -> Result<WeightedAttractor> {
    let mu = cfg
        .mu
        .ok_or_else(|| Error::config(0, "weighted attractor mode needs `mu`"))?;
    let weight = Weight::exponential(mu);
    let unforced = DcglParams {
        forcing: None,
        ..cfg.params.clone()
    };
    let general = dcgl_to_general(&lhs_equivalent(&unforced, cfg.convention));
    let epsilon = cfg.epsilon.unwrap_or(2.0 * cfg.params.lambda);
    let s0 = sigma0(&general, &weight, epsilon);
    s0.require_dissipative()?;
    let predicted_rate = 2.0 * s0.value;

    let nl = cfg.nonlinearity.build(cfg.p)?;
    let u0 = cfg.localized_state(cfg.attractor.support);
    let norm_sq = |s: &LatticeState| weighted_norm_sq(s, &weight);

    let free = DcglSystem::new(&unforced, nl.clone(), cfg.convention);
    let (samples, _) = record(&u0, &free, &cfg.integrator, norm_sq)?;
    rows.extend(samples.iter().map(|&(t, value)| DecayRow {
        series: "unforced".into(),
        t,
        value,
    }));
    let measured_slope = log_slope(&samples).unwrap_or(f64::NAN);
    let decay_ok = measured_slope <= -0.9 * predicted_rate;

    let mut out = WeightedAttractor {
        mu,
        sigma0: s0.clone(),
        epsilon,
        predicted_rate,
        measured_slope,
        decay_ok,
        forcing_norm_sq: None,
        ball: None,
        eta: None,
        t_eta: None,
        limsup_norm_sq: None,
        limsup_ok: None,
        tails: Vec::new(),
        tail_m: None,
    };
    let params = cfg.params_with_forcing();
    let Some(forcing) = params.forcing.as_ref() else {
        warnings.push("no forcing configured: only the unforced decay was measured".into());
        return Ok(out);
    };

    let g_sq = weighted_norm_sq(forcing, &weight);
    let rho_sq = g_sq / (2.0 * s0.value * epsilon);
    let rho1 = cfg
        .attractor
        .rho1
        .unwrap_or(cfg.attractor.rho1_factor * rho_sq.sqrt());
    let radius = norm_sq(&u0).sqrt().max(rho1);
    let ball = absorbing_weighted(g_sq, s0.value, epsilon, radius, rho1)?;
    let eta = cfg.attractor.eta_factor * s0.value;
    let t_eta = tail_time(ball.t0.max(0.0), s0.value, rho1, eta)?;
    if t_eta > cfg.integrator.t_max {
        warnings.push(format!(
            "t_max = {} ends before T(eta) = {t_eta}",
            cfg.integrator.t_max
        ));
    }

    let forced = DcglSystem::new(&params, nl, cfg.convention);
    let mut late: Vec<(f64, f64, Vec<TailMass>)> = Vec::new();
    let tail_m = cfg.attractor.tail_m.clone();
    let mut observe = |s: &LatticeState| {
        let tails = tail_m.iter().map(|&m| tail_mass(s, &weight, m)).collect();
        late.push((s.time, norm_sq(s), tails));
    };
    let outcome = integrate(&u0, &forced, &cfg.integrator, &mut [&mut observe])?;
    if outcome.report.blew_up {
        return Err(Error::Hypothesis(
            "forced dissipative run crossed the blow-up threshold".into(),
        ));
    }
    rows.extend(late.iter().map(|(t, v, _)| DecayRow {
        series: "forced".into(),
        t: *t,
        value: *v,
    }));

    let window: Vec<_> = late.iter().filter(|(t, _, _)| *t >= t_eta).collect();
    let tail_bound = eta / s0.value;
    if !window.is_empty() {
        let limsup = window.iter().map(|(_, v, _)| *v).fold(0.0, f64::max);
        out.limsup_norm_sq = Some(limsup);
        out.limsup_ok = Some(limsup <= 1.05 * rho_sq);
        for (j, &m) in cfg.attractor.tail_m.iter().enumerate() {
            let out_of_range = window[0].2[j].out_of_range;
            let max_tail = window.iter().map(|w| w.2[j].value).fold(0.0, f64::max);
            out.tails.push(TailCheck {
                m,
                max_tail,
                out_of_range,
                holds: !out_of_range && max_tail <= tail_bound,
            });
        }
        out.tail_m = out.tails.iter().filter(|c| c.holds).map(|c| c.m).min();
    }
    out.forcing_norm_sq = Some(g_sq);
    out.ball = Some(ball);
    out.eta = Some(eta);
    out.t_eta = Some(t_eta);
    Ok(out)
}

/// Runs the configured attractor experiment without writing anything.
pub fn run_attractor_experiment(cfg: &RunConfig) -> Result<(AttractorReport, Vec<DecayRow>)> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut report = AttractorReport {
        mode: cfg.attractor.mode,
        finite: None,
        weighted: None,
        warnings: Vec::new(),
    };
    match cfg.attractor.mode {
        AttractorMode::Finite => report.finite = Some(finite_mode(cfg, &mut rows, &mut warnings)?),
        AttractorMode::Weighted => {
            report.weighted = Some(weighted_mode(cfg, &mut rows, &mut warnings)?)
        }
    }
    report.warnings = warnings;
    Ok((report, rows))
}

/// Runs the experiment and writes `attractor.json` and `decay.csv`.
pub fn run_attractor(cfg: &RunConfig, out_dir: &Path) -> Result<AttractorReport> {
    let (report, rows) = run_attractor_experiment(cfg)?;
    write_json(out_dir, "attractor.json", &report)?;
    let table = csv(
        "series,t,value",
        rows.iter()
            .map(|r| vec![r.series.clone(), format_float(r.t), format_float(r.value)]),
    );
    write_text(out_dir, "decay.csv", &table)?;
    Ok(report)
}
