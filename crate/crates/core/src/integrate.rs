//! Classical RK4 time stepping with rollback near singularities and blow-up
//! detection.
//!
//! Each step uses `h = min(cap, t_max − t, rate_limit·max(‖u‖∞, 1)/‖u̇‖∞)`. The cap
//! starts at `dt`, is divided by `refine_factor` on every rollback and regrows by the
//! same factor per accepted step. A step is rolled back when the sup-norm grows by
//! more than `growth_guard` or turns non-finite.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{sup_norm, LatticeState};
use crate::models::LatticeRhs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    pub dt_min: f64,
    pub refine_factor: u32,
    pub observer_stride: usize,
    pub growth_guard: f64,
    /// Largest relative sup-norm change allowed per step; `0` disables the limit.
    pub rate_limit: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 10.0,
            blowup_threshold: 1e6,
            dt_min: 1e-12,
            refine_factor: 2,
            observer_stride: 1,
            growth_guard: 10.0,
            rate_limit: 1e-3,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            ..Self::default()
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.blowup_threshold = threshold;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.observer_stride = stride;
        self
    }

    pub fn with_rate_limit(mut self, rate_limit: f64) -> Self {
        self.rate_limit = rate_limit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt) {
            return bad(format!("dt_min must lie in (0, dt), got {}", self.dt_min));
        }
        if !(self.blowup_threshold > 1.0) {
            return bad(format!(
                "blow-up threshold must exceed 1, got {}",
                self.blowup_threshold
            ));
        }
        if self.refine_factor < 2 {
            return bad(format!(
                "refine factor must be at least 2, got {}",
                self.refine_factor
            ));
        }
        if self.observer_stride == 0 {
            return bad("observer stride must be positive".into());
        }
        if !(self.growth_guard > 1.0) {
            return bad(format!(
                "growth guard must exceed 1, got {}",
                self.growth_guard
            ));
        }
        if !(self.rate_limit >= 0.0 && self.rate_limit.is_finite()) {
            return bad(format!(
                "rate limit must be nonnegative, got {}",
                self.rate_limit
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport {
    pub blew_up: bool,
    /// Time of the first accepted step whose sup-norm reached the threshold.
    pub t_sim: Option<f64>,
    pub threshold: f64,
    pub final_norm: f64,
    pub refinements: u64,
    pub bound_t_star: Option<f64>,
    pub bound_valid: bool,
    /// Blow-up inferred from non-finite values at `dt_min` rather than a crossing.
    pub low_confidence: bool,
    /// Step size that produced the crossing.
    pub dt_at_crossing: Option<f64>,
    pub steps: u64,
    pub t_end: f64,
    pub growth_guard: f64,
    /// The step budget ran out before `t_max`.
    pub step_limit_hit: bool,
}

impl BlowUpReport {
    pub fn with_bound(mut self, t_star: Option<f64>, valid: bool) -> Self {
        self.bound_t_star = t_star;
        self.bound_valid = valid;
        self
    }

    /// `Some(t_sim ≤ T*)` when both exist and the bound is valid.
    pub fn within_bound(&self) -> Option<bool> {
        match (self.bound_valid, self.t_sim, self.bound_t_star) {
            (true, Some(t), Some(bound)) => Some(t <= bound),
            _ => None,
        }
    }
}

/// Receives accepted states during [`integrate`].
pub trait Observer {
    fn observe(&mut self, state: &LatticeState);
}

impl<F: FnMut(&LatticeState)> Observer for F {
    fn observe(&mut self, state: &LatticeState) {
        self(state)
    }
}

/// Stores every observed state.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<LatticeState>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.time)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl Observer for Trajectory {
    fn observe(&mut self, state: &LatticeState) {
        self.states.push(state.clone());
    }
}

/// Stores `(t, Q(u(t)))` for a scalar functional `Q`.
pub struct SeriesRecorder<F> {
    functional: F,
    pub samples: Vec<(f64, f64)>,
}

impl<F: FnMut(&LatticeState) -> f64> SeriesRecorder<F> {
    pub fn new(functional: F) -> Self {
        Self {
            functional,
            samples: Vec::new(),
        }
    }
}

impl<F: FnMut(&LatticeState) -> f64> Observer for SeriesRecorder<F> {
    fn observe(&mut self, state: &LatticeState) {
        let value = (self.functional)(state);
        self.samples.push((state.time, value));
    }
}

#[derive(Debug, Clone)]
pub struct IntegrationOutcome {
    /// Last accepted finite state.
    pub state: LatticeState,
    pub report: BlowUpReport,
}

struct Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
}

impl Workspace {
    fn new(len: usize) -> Self {
        let zeros = vec![Complex64::new(0.0, 0.0); len];
        Self {
            k1: zeros.clone(),
            k2: zeros.clone(),
            k3: zeros.clone(),
            k4: zeros.clone(),
            stage: zeros,
        }
    }

    /// RK4 from `u` with `k1` already evaluated. Returns false on a non-finite stage.
    fn step(
        &mut self,
        rhs: &impl LatticeRhs,
        u: &[Complex64],
        h: f64,
        out: &mut [Complex64],
    ) -> bool {
        let half = 0.5 * h;
        for (s, (u, k)) in self.stage.iter_mut().zip(u.iter().zip(&self.k1)) {
            *s = u + k * half;
        }
        rhs.eval(&self.stage, &mut self.k2);
        for (s, (u, k)) in self.stage.iter_mut().zip(u.iter().zip(&self.k2)) {
            *s = u + k * half;
        }
        rhs.eval(&self.stage, &mut self.k3);
        for (s, (u, k)) in self.stage.iter_mut().zip(u.iter().zip(&self.k3)) {
            *s = u + k * h;
        }
        rhs.eval(&self.stage, &mut self.k4);
        let sixth = h / 6.0;
        let mut finite = true;
        for i in 0..u.len() {
            let incr = self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i];
            out[i] = u[i] + incr * sixth;
            finite &= out[i].is_finite();
        }
        finite
    }
}

/// One classical RK4 step of size `dt`. A non-finite result yields a state flagged
/// `post_blowup` whose time is the stage time.
pub fn rk4_step(state: &LatticeState, rhs: &impl LatticeRhs, dt: f64) -> LatticeState {
    let mut ws = Workspace::new(state.amplitudes().len());
    rhs.eval(state.amplitudes(), &mut ws.k1);
    let mut next = state.clone();
    let finite = ws.step(rhs, state.amplitudes(), dt, next.amplitudes_mut());
    next.time = state.time + dt;
    if !finite {
        next.post_blowup = true;
    }
    next
}

/// Kahan-compensated clock.
#[derive(Debug, Clone, Copy, Default)]
struct Clock {
    t: f64,
    carry: f64,
}

impl Clock {
    fn advance(&mut self, h: f64) {
        let y = h - self.carry;
        let t = self.t + y;
        self.carry = (t - self.t) - y;
        self.t = t;
    }
}

/// Integrates from `state0` until `t_max` or blow-up.
pub fn integrate(
    state0: &LatticeState,
    rhs: &impl LatticeRhs,
    cfg: &IntegratorConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<IntegrationOutcome> {
    cfg.validate()?;
    state0.ensure_finite()?;

    let len = state0.amplitudes().len();
    let mut ws = Workspace::new(len);
    let mut current = state0.clone();
    current.post_blowup = false;
    let mut candidate = current.amplitudes().to_vec();
    let mut clock = Clock {
        t: state0.time,
        carry: 0.0,
    };
    let t_end = state0.time + cfg.t_max;
    let refine = f64::from(cfg.refine_factor);

    let mut report = BlowUpReport {
        blew_up: false,
        t_sim: None,
        threshold: cfg.blowup_threshold,
        final_norm: sup_norm(current.amplitudes()),
        refinements: 0,
        bound_t_star: None,
        bound_valid: false,
        low_confidence: false,
        dt_at_crossing: None,
        steps: 0,
        t_end: state0.time,
        growth_guard: cfg.growth_guard,
        step_limit_hit: false,
    };

    for obs in observers.iter_mut() {
        obs.observe(&current);
    }
    if report.final_norm >= cfg.blowup_threshold {
        report.blew_up = true;
        report.t_sim = Some(clock.t);
        return Ok(IntegrationOutcome {
            state: current,
            report,
        });
    }

    let mut cap = cfg.dt;
    let mut since_observed = 0usize;
    let mut observed_last = true;
    // stop when the remaining interval is below rounding of the end time
    let done = |t: f64| t_end - t <= 4.0 * f64::EPSILON * t_end.abs().max(1.0);

    'outer: while !done(clock.t) {
        if report.steps >= cfg.max_steps {
            report.step_limit_hit = true;
            break;
        }
        let u_sup = report.final_norm;
        rhs.eval(current.amplitudes(), &mut ws.k1);
        let mut h = cap.min(t_end - clock.t);
        if cfg.rate_limit > 0.0 {
            let f_sup = sup_norm(&ws.k1);
            if f_sup > 0.0 {
                h = h.min(cfg.rate_limit * u_sup.max(1.0) / f_sup);
            } else if f_sup.is_nan() {
                h = 0.0;
            }
        }
        loop {
            let finite = h > 0.0 && ws.step(rhs, current.amplitudes(), h, &mut candidate);
            let new_sup = if finite {
                sup_norm(&candidate)
            } else {
                f64::NAN
            };
            let guard_ok = finite && (u_sup == 0.0 || new_sup <= cfg.growth_guard * u_sup);
            if guard_ok {
                current.amplitudes_mut().copy_from_slice(&candidate);
                clock.advance(h);
                current.time = clock.t;
                report.steps += 1;
                report.final_norm = new_sup;
                cap = (cap * refine).min(cfg.dt);
                since_observed += 1;
                observed_last = false;
                if new_sup >= cfg.blowup_threshold {
                    report.blew_up = true;
                    report.t_sim = Some(clock.t);
                    report.dt_at_crossing = Some(h);
                    break 'outer;
                }
                if since_observed >= cfg.observer_stride {
                    since_observed = 0;
                    observed_last = true;
                    for obs in observers.iter_mut() {
                        obs.observe(&current);
                    }
                }
                break;
            }
            h /= refine;
            cap = cap.min(h);
            report.refinements += 1;
            if h < cfg.dt_min {
                // cannot resolve the next step: treat as blow-up at the last finite time
                report.blew_up = true;
                report.low_confidence = true;
                report.t_sim = Some(clock.t);
                report.dt_at_crossing = Some(h * refine);
                break 'outer;
            }
        }
    }

    report.t_end = clock.t;
    if !observed_last {
        for obs in observers.iter_mut() {
            obs.observe(&current);
        }
    }
    Ok(IntegrationOutcome {
        state: current,
        report,
    })
}

/// `max_t |Q(t) − Q(0)| / max(|Q(0)|, 1)` over the recorded states.
pub fn conserved_drift(
    trajectory: &Trajectory,
    functional: impl Fn(&LatticeState) -> f64,
) -> Result<f64> {
    let values: Vec<f64> = trajectory.states.iter().map(&functional).collect();
    series_drift(&values)
}

/// [`conserved_drift`] on an already evaluated series.
pub fn series_drift(values: &[f64]) -> Result<f64> {
    let first = *values
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let scale = first.abs().max(1.0);
    Ok(values
        .iter()
        .map(|q| (q - first).abs() / scale)
        .fold(0.0, f64::max))
}

/// Crossing times at several thresholds from the same initial state. Converging
/// values indicate a genuine finite-time singularity.
pub fn threshold_ladder(
    state0: &LatticeState,
    rhs: &impl LatticeRhs,
    cfg: &IntegratorConfig,
    thresholds: &[f64],
) -> Result<Vec<Option<f64>>> {
    thresholds
        .iter()
        .map(|&threshold| {
            let cfg = cfg.clone().with_threshold(threshold);
            integrate(state0, rhs, &cfg, &mut []).map(|o| o.report.t_sim)
        })
        .collect()
}
