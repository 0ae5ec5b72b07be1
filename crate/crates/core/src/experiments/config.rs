//! Line-based `key = value` run configuration.
//!
//! ```text
//! # non-gauge blow-up, sigma = 1
//! preset = dcgl
//! nonlinearity = non-gauge
//! beta = 1
//! N = 10
//!
//! [sweep]
//! axis = N
//! values = 10, 20, 40, 80
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::IntegratorConfig;
use crate::lattice::{DataKind, LatticeGeometry, LatticeKind, LatticeState, ScalingProfile};
use crate::models::{DcglParams, NonlinearityChoice, SignConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Dcgl,
    Drgl,
    Dnls,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dcgl" => Ok(Self::Dcgl),
            "drgl" => Ok(Self::Drgl),
            "dnls" => Ok(Self::Dnls),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    N,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "k")]
    K,
    #[serde(rename = "mu")]
    Mu,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::Gamma => "gamma",
            Axis::P => "p",
            Axis::Beta => "beta",
            Axis::K => "k",
            Axis::Mu => "mu",
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "N" => Ok(Self::N),
            "gamma" => Ok(Self::Gamma),
            "p" => Ok(Self::P),
            "beta" => Ok(Self::Beta),
            "k" => Ok(Self::K),
            "mu" => Ok(Self::Mu),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Real forcing `f_n = amplitude·e^{−decay·|n|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub amplitude: f64,
    pub decay: f64,
}

impl ForcingSpec {
    pub fn build(&self, geometry: LatticeGeometry) -> LatticeState {
        LatticeState::from_fn(geometry, |n| {
            crate::Complex64::new(
                self.amplitude * (-self.decay * n.unsigned_abs() as f64).exp(),
                0.0,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttractorMode {
    Finite,
    Weighted,
}

impl FromStr for AttractorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "finite" => Ok(Self::Finite),
            "weighted" => Ok(Self::Weighted),
            other => Err(format!("unknown attractor mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSpec {
    pub mode: AttractorMode,
    /// `ρ₁` as a multiple of the limit radius (finite) or of `ρ` (weighted).
    pub rho1_factor: f64,
    pub rho1: Option<f64>,
    pub initial_norms: Vec<f64>,
    /// Half-widths `M` of the tail windows `|n| > 2M`.
    pub tail_m: Vec<usize>,
    /// `η = eta_factor·σ₀`.
    pub eta_factor: f64,
    /// Support of the localized data used in weighted mode.
    pub support: usize,
}

impl Default for AttractorSpec {
    fn default() -> Self {
        Self {
            mode: AttractorMode::Finite,
            rho1_factor: 1.1,
            rho1: None,
            initial_norms: vec![10.0, 1e3, 1e6],
            tail_m: vec![2, 4, 6],
            eta_factor: 1e-4,
            support: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub ladder: Vec<usize>,
    pub t: f64,
    /// Initial data vanish for `|n| > support`.
    pub support: usize,
    pub sample_stride: usize,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            ladder: vec![10, 20, 40],
            t: 5.0,
            support: 5,
            sample_stride: 10,
        }
    }
}

/// Everything one run needs. Fields mirror the config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Preset,
    pub nonlinearity: NonlinearityChoice,
    pub convention: SignConvention,
    pub params: DcglParams,
    pub p: f64,
    pub half_width: usize,
    pub lattice: LatticeKind,
    pub profile: ScalingProfile,
    pub data: DataKind,
    /// Rescale the initial data to this ℓ² norm.
    pub norm: Option<f64>,
    /// `σ` used by the functionals; defaults to the profile's `σ`.
    pub functional_sigma: Option<f64>,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    pub forcing: Option<ForcingSpec>,
    pub mu: Option<f64>,
    pub epsilon: Option<f64>,
    pub threshold_ladder: bool,
    pub attractor: AttractorSpec,
    pub truncation: TruncationSpec,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Dcgl,
            nonlinearity: NonlinearityChoice::Gauge,
            convention: SignConvention::Source,
            params: DcglParams::default(),
            p: 3.0,
            half_width: 10,
            lattice: LatticeKind::FiniteDirichlet,
            profile: ScalingProfile::new(0.0, 1.0),
            data: DataKind::ImaginaryPositive,
            norm: None,
            functional_sigma: None,
            integrator: IntegratorConfig::default(),
            seed: 0,
            forcing: None,
            mu: None,
            epsilon: None,
            threshold_ladder: false,
            attractor: AttractorSpec::default(),
            truncation: TruncationSpec::default(),
            sweep: None,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(line, format!("bad value for `{key}`: {e}")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(
            line,
            format!("`{key}` needs at least one value"),
        ));
    }
    Ok(items)
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::config(
            line,
            format!("bad value for `{key}`: `{other}` is not a boolean"),
        )),
    }
}

fn parse_lattice(line: usize, raw: &str) -> Result<LatticeKind> {
    match raw {
        "finite" | "finite-dirichlet" => Ok(LatticeKind::FiniteDirichlet),
        "truncated" | "truncated-infinite" => Ok(LatticeKind::TruncatedInfinite),
        other => Err(Error::config(
            line,
            format!("unknown lattice kind `{other}`"),
        )),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut in_sweep = false;
        let mut axis: Option<(usize, Axis)> = None;
        let mut values: Option<(usize, Vec<f64>)> = None;
        let mut sigma_line = None;
        let mut delta_line = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                if content != "[sweep]" {
                    return Err(Error::config(line, format!("unknown section `{content}`")));
                }
                if in_sweep {
                    return Err(Error::config(line, "duplicate [sweep] section"));
                }
                in_sweep = true;
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::config(line, format!("expected `key = value`, found `{content}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(Error::config(line, format!("missing value for `{key}`")));
            }
            let scoped = if in_sweep {
                format!("sweep.{key}")
            } else {
                key.to_string()
            };
            if let Some(first) = seen.insert(scoped.clone(), line) {
                return Err(Error::config(
                    line,
                    format!("`{key}` already set on line {first}"),
                ));
            }

            if in_sweep {
                match key {
                    "axis" => axis = Some((line, parse_value(line, key, value)?)),
                    "values" => values = Some((line, parse_list(line, key, value)?)),
                    _ => return Err(Error::config(line, format!("unknown sweep key `{key}`"))),
                }
                continue;
            }

            let f = |v: &str| parse_value::<f64>(line, key, v);
            match key {
                "preset" => cfg.preset = parse_value(line, key, value)?,
                "nonlinearity" => cfg.nonlinearity = parse_value(line, key, value)?,
                "convention" => cfg.convention = parse_value(line, key, value)?,
                "lambda" => cfg.params.lambda = f(value)?,
                "alpha" => cfg.params.alpha = f(value)?,
                "k" => cfg.params.k = f(value)?,
                "beta" => cfg.params.beta = f(value)?,
                "gamma" => cfg.params.gamma = f(value)?,
                "p" => cfg.p = f(value)?,
                "N" => cfg.half_width = parse_value(line, key, value)?,
                "lattice" => cfg.lattice = parse_lattice(line, value)?,
                "data" => cfg.data = parse_value(line, key, value)?,
                "sigma" => {
                    sigma_line = Some(line);
                    cfg.profile.delta = f(value)? - 1.0;
                }
                "delta" => {
                    delta_line = Some(line);
                    cfg.profile.delta = f(value)?;
                }
                "amplitude" => cfg.profile.amplitude = f(value)?,
                "phase" => cfg.profile.phase = f(value)?,
                "norm" => cfg.norm = Some(f(value)?),
                "functional_sigma" => cfg.functional_sigma = Some(f(value)?),
                "dt" => cfg.integrator.dt = f(value)?,
                "t_max" => cfg.integrator.t_max = f(value)?,
                "threshold" => cfg.integrator.blowup_threshold = f(value)?,
                "dt_min" => cfg.integrator.dt_min = f(value)?,
                "refine_factor" => cfg.integrator.refine_factor = parse_value(line, key, value)?,
                "observer_stride" => {
                    cfg.integrator.observer_stride = parse_value(line, key, value)?
                }
                "growth_guard" => cfg.integrator.growth_guard = f(value)?,
                "rate_limit" => cfg.integrator.rate_limit = f(value)?,
                "max_steps" => cfg.integrator.max_steps = parse_value(line, key, value)?,
                "threshold_ladder" => cfg.threshold_ladder = parse_bool(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "forcing.amplitude" => {
                    cfg.forcing
                        .get_or_insert(ForcingSpec {
                            amplitude: 0.0,
                            decay: 1.0,
                        })
                        .amplitude = f(value)?
                }
                "forcing.decay" => {
                    cfg.forcing
                        .get_or_insert(ForcingSpec {
                            amplitude: 0.0,
                            decay: 1.0,
                        })
                        .decay = f(value)?
                }
                "mu" => cfg.mu = Some(f(value)?),
                "epsilon" => cfg.epsilon = Some(f(value)?),
                "attractor.mode" => cfg.attractor.mode = parse_value(line, key, value)?,
                "attractor.rho1_factor" => cfg.attractor.rho1_factor = f(value)?,
                "attractor.rho1" => cfg.attractor.rho1 = Some(f(value)?),
                "attractor.initial_norms" => {
                    cfg.attractor.initial_norms = parse_list(line, key, value)?
                }
                "attractor.tail_m" => cfg.attractor.tail_m = parse_list(line, key, value)?,
                "attractor.eta_factor" => cfg.attractor.eta_factor = f(value)?,
                "attractor.support" => cfg.attractor.support = parse_value(line, key, value)?,
                "truncation.ladder" => cfg.truncation.ladder = parse_list(line, key, value)?,
                "truncation.T" => cfg.truncation.t = f(value)?,
                "truncation.support" => cfg.truncation.support = parse_value(line, key, value)?,
                "truncation.sample_stride" => {
                    cfg.truncation.sample_stride = parse_value(line, key, value)?
                }
                _ => return Err(Error::config(line, format!("unknown key `{key}`"))),
            }
        }

        if let (Some(a), Some(b)) = (sigma_line, delta_line) {
            return Err(Error::config(
                a.max(b),
                "set either `sigma` or `delta`, not both",
            ));
        }
        match (axis, values) {
            (Some((_, axis)), Some((line, values))) => {
                if !strictly_monotone(&values) {
                    return Err(Error::config(
                        line,
                        "sweep values must be strictly monotone",
                    ));
                }
                cfg.sweep = Some(SweepSpec { axis, values });
            }
            (None, None) if !in_sweep => {}
            (Some((line, _)), None) => {
                return Err(Error::config(line, "sweep section has no `values`"))
            }
            (None, Some((line, _))) => {
                return Err(Error::config(line, "sweep section has no `axis`"))
            }
            (None, None) => {
                return Err(Error::config(text.lines().count(), "empty [sweep] section"))
            }
        }
        let line_of = |key: &str| seen.get(key).copied().unwrap_or(0);
        cfg.check(&line_of)?;
        Ok(cfg)
    }

    /// Cross-field checks. `line_of` maps a key to the line that set it.
    fn check(&self, line_of: &dyn Fn(&str) -> usize) -> Result<()> {
        let p = &self.params;
        match self.preset {
            Preset::Drgl => {
                for (key, value) in [("alpha", p.alpha), ("beta", p.beta)] {
                    if value != 0.0 {
                        return Err(Error::config(
                            line_of(key),
                            format!("preset drgl requires {key} = 0, got {value}"),
                        ));
                    }
                }
            }
            Preset::Dnls => {
                for (key, value) in [("lambda", p.lambda), ("k", p.k)] {
                    if value != 0.0 {
                        return Err(Error::config(
                            line_of(key),
                            format!("preset dnls requires {key} = 0, got {value}"),
                        ));
                    }
                }
                if self.nonlinearity != NonlinearityChoice::Gauge {
                    return Err(Error::config(
                        line_of("nonlinearity"),
                        "preset dnls requires the gauge nonlinearity",
                    ));
                }
            }
            Preset::Dcgl => {}
        }
        if let Err(e) = p.validate() {
            return Err(Error::config(line_of("lambda"), e.to_string()));
        }
        if !(self.p > 1.0) {
            return Err(Error::config(
                line_of("p"),
                format!("p must exceed 1, got {}", self.p),
            ));
        }
        if let Err(e) = self.integrator.validate() {
            return Err(Error::config(line_of("dt"), e.to_string()));
        }
        if !(self.profile.amplitude >= 0.0) {
            return Err(Error::config(
                line_of("amplitude"),
                "amplitude must be nonnegative",
            ));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                return Err(Error::config(line_of("mu"), "mu must be nonnegative"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::config(
                    line_of("epsilon"),
                    "epsilon must be positive",
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                self.with_axis_value(sweep.axis, v)
                    .map_err(|e| Error::config(line_of("sweep.values"), e.to_string()))?;
            }
        }
        if self
            .truncation
            .ladder
            .iter()
            .any(|&n| n < self.truncation.support)
        {
            return Err(Error::config(
                line_of("truncation.ladder"),
                "every ladder size must cover the data support",
            ));
        }
        Ok(())
    }

    /// Copy with one swept parameter replaced.
    pub fn with_axis_value(&self, axis: Axis, value: f64) -> Result<RunConfig> {
        let mut cfg = self.clone();
        match axis {
            Axis::N => {
                if !(value >= 0.0 && value.fract() == 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "N must be a nonnegative integer, got {value}"
                    )));
                }
                cfg.half_width = value as usize;
            }
            Axis::Gamma => cfg.params.gamma = value,
            Axis::P => {
                if !(value > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "p must exceed 1, got {value}"
                    )));
                }
                cfg.p = value;
            }
            Axis::Beta => cfg.params.beta = value,
            Axis::K => cfg.params.k = value,
            Axis::Mu => cfg.mu = Some(value),
        }
        Ok(cfg)
    }

    pub fn geometry(&self) -> LatticeGeometry {
        LatticeGeometry::new(self.lattice, self.half_width)
    }

    pub fn sigma(&self) -> f64 {
        self.functional_sigma
            .unwrap_or_else(|| self.profile.sigma())
    }

    /// Initial state for this configuration.
    pub fn initial_state(&self) -> LatticeState {
        let u0 =
            crate::lattice::make_initial_data(self.geometry(), &self.profile, self.data, self.seed);
        match self.norm {
            Some(target) => u0.scaled_to_l2(target),
            None => u0,
        }
    }

    /// Initial data supported on `|n| ≤ support`, damped by `e^{−|n|}` and
    /// zero-extended to the configured lattice.
    pub fn localized_state(&self, support: usize) -> LatticeState {
        let geometry = LatticeGeometry::new(self.lattice, support.min(self.half_width));
        let raw = crate::lattice::make_initial_data(geometry, &self.profile, self.data, self.seed);
        let mut u0 = raw.clone();
        for (i, z) in u0.amplitudes_mut().iter_mut().enumerate() {
            *z *= (-(raw.geometry.label(i).unsigned_abs() as f64)).exp();
        }
        let u0 = u0.resized(self.half_width);
        match self.norm {
            Some(target) => u0.scaled_to_l2(target),
            None => u0,
        }
    }

    /// Parameters with the forcing materialized on the configured lattice.
    pub fn params_with_forcing(&self) -> DcglParams {
        let mut params = self.params.clone();
        params.forcing = self.forcing.map(|f| f.build(self.geometry()));
        params
    }
}

fn strictly_monotone(values: &[f64]) -> bool {
    let up = values.windows(2).all(|w| w[0] < w[1]);
    let down = values.windows(2).all(|w| w[0] > w[1]);
    up || down
}
