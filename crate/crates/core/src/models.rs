//! Right-hand sides of the lattice equations, the discrete operators `A_d` and `B_d`,
//! power nonlinearities, and the Lipschitz and local-existence estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{norm_p_slice, LatticeState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Anything that can fill `du` with the time derivative at `u`.
pub trait LatticeRhs {
    fn eval(&self, u: &[Complex64], du: &mut [Complex64]);
}

impl<F> LatticeRhs for F
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    fn eval(&self, u: &[Complex64], du: &mut [Complex64]) {
        self(u, du)
    }
}

#[inline]
fn neighbours(u: &[Complex64], i: usize) -> (Complex64, Complex64) {
    let left = if i > 0 { u[i - 1] } else { ZERO };
    let right = u.get(i + 1).copied().unwrap_or(ZERO);
    (left, right)
}

pub(crate) fn laplacian_into(u: &[Complex64], out: &mut [Complex64]) {
    for i in 0..u.len() {
        let (left, right) = neighbours(u, i);
        out[i] = left - 2.0 * u[i] + right;
    }
}

/// `(A_d u)_n = u_{n-1} − 2u_n + u_{n+1}` with zero ghosts.
pub fn discrete_laplacian(state: &LatticeState) -> LatticeState {
    let mut out = LatticeState::zeros(state.geometry).with_time(state.time);
    laplacian_into(state.amplitudes(), out.amplitudes_mut());
    out
}

/// `(B_d u)_n = u_{n+1} − u_n` with a zero ghost at `n = N + 1`.
pub fn forward_difference(state: &LatticeState) -> LatticeState {
    let u = state.amplitudes();
    let mut out = LatticeState::zeros(state.geometry).with_time(state.time);
    for (i, d) in out.amplitudes_mut().iter_mut().enumerate() {
        *d = u.get(i + 1).copied().unwrap_or(ZERO) - u[i];
    }
    out
}

/// `Σ_{n=-N}^{N} |u_{n+1} − u_n|²`, the squared norm of `B_d u`.
pub fn forward_difference_sq(u: &[Complex64]) -> f64 {
    (0..u.len())
        .map(|i| (u.get(i + 1).copied().unwrap_or(ZERO) - u[i]).norm_sqr())
        .sum()
}

/// `Σ_{n=-N-1}^{N} |u_{n+1} − u_n|²`, i.e. [`forward_difference_sq`] plus the left
/// boundary term `|u_{-N}|²`. This is exactly `(−A_d u, u)`.
pub fn dirichlet_gradient_sq(u: &[Complex64]) -> f64 {
    u.first().map_or(0.0, |z| z.norm_sqr()) + forward_difference_sq(u)
}

/// Scalar profile `f` of a nonlinearity `F(z) = f(|z|²)·z`.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind {
    /// `|s|^{p−1}s`.
    Gauge,
    /// `|s|^p`.
    NonGauge,
    /// `f(|s|²)s`; `f_prime` is kept for callers that need it.
    General { f: ScalarFn, f_prime: ScalarFn },
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gauge => f.write_str("Gauge"),
            Self::NonGauge => f.write_str("NonGauge"),
            Self::General { .. } => f.write_str("General"),
        }
    }
}

/// Power nonlinearity without its complex coefficient, which the parameters supply.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    p: f64,
    /// Growth constant used only by [`lipschitz_constant`].
    pub c: f64,
}

impl Nonlinearity {
    fn power(kind: NonlinearityKind, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity exponent must exceed 1, got {p}"
            )));
        }
        // p·R^{p−1} bounds the derivative of either power on the ball of radius R
        Ok(Self { kind, p, c: p })
    }

    pub fn gauge(p: f64) -> Result<Self> {
        Self::power(NonlinearityKind::Gauge, p)
    }

    pub fn non_gauge(p: f64) -> Result<Self> {
        Self::power(NonlinearityKind::NonGauge, p)
    }

    pub fn general(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: NonlinearityKind::General {
                f: Arc::new(f),
                f_prime: Arc::new(f_prime),
            },
            p: f64::NAN,
            c: f64::NAN,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Exponent `p`; NaN for the general kind.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_gauge(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Gauge)
    }

    /// `F(z)` with unit coefficient.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            NonlinearityKind::Gauge => {
                let r2 = z.norm_sqr();
                let scale = if self.p == 3.0 {
                    r2
                } else if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(0.5 * (self.p - 1.0))
                };
                z * scale
            }
            NonlinearityKind::NonGauge => {
                let r2 = z.norm_sqr();
                let value = if self.p == 2.0 {
                    r2
                } else {
                    r2.powf(0.5 * self.p)
                };
                Complex64::new(value, 0.0)
            }
            NonlinearityKind::General { f, .. } => z * f(z.norm_sqr()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityChoice {
    Gauge,
    NonGauge,
}

impl FromStr for NonlinearityChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gauge" => Ok(Self::Gauge),
            "non-gauge" | "nongauge" => Ok(Self::NonGauge),
            other => Err(format!("unknown nonlinearity `{other}`")),
        }
    }
}

impl NonlinearityChoice {
    pub fn build(self, p: f64) -> Result<Nonlinearity> {
        match self {
            Self::Gauge => Nonlinearity::gauge(p),
            Self::NonGauge => Nonlinearity::non_gauge(p),
        }
    }
}

/// `coeff·F(u_n)` at every site.
pub fn apply_nonlinearity(
    state: &LatticeState,
    nl: &Nonlinearity,
    coeff: Complex64,
) -> LatticeState {
    let mut out = state.clone();
    out.amplitudes_mut()
        .iter_mut()
        .for_each(|z| *z = coeff * nl.eval(*z));
    out
}

/// Coefficients of `u̇ = i[(α̂+iβ̂)A_d u + (γ̂+iδ̂)u + (η̂+iζ̂)F(u) − g]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub delta_hat: f64,
    pub eta_hat: f64,
    pub zeta_hat: f64,
    #[serde(skip)]
    pub forcing: Option<LatticeState>,
}

impl GeneralParams {
    pub fn coefficients(&self) -> [f64; 6] {
        [
            self.alpha_hat,
            self.beta_hat,
            self.gamma_hat,
            self.delta_hat,
            self.eta_hat,
            self.zeta_hat,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.coefficients().iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coefficient {bad}"
            )));
        }
        if let Some(g) = &self.forcing {
            g.ensure_finite()?;
        }
        Ok(())
    }
}

/// `(λ, α, k, β, γ)` together with an optional forcing `f_n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DcglParams {
    pub lambda: f64,
    pub alpha: f64,
    pub k: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub forcing: Option<LatticeState>,
}

impl DcglParams {
    pub fn new(lambda: f64, alpha: f64, k: f64, beta: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            lambda,
            alpha,
            k,
            beta,
            gamma,
            forcing: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Real Ginzburg-Landau preset (`α = β = 0`).
    pub fn drgl(lambda: f64, k: f64, gamma: f64) -> Result<Self> {
        Self::new(lambda, 0.0, k, 0.0, gamma)
    }

    /// Nonlinear Schrödinger preset (`λ = k = 0`).
    pub fn dnls(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(0.0, alpha, 0.0, beta, gamma)
    }

    pub fn with_forcing(mut self, forcing: LatticeState) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("k", self.k),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `k + iβ`.
    pub fn nonlinear_coeff(&self) -> Complex64 {
        Complex64::new(self.k, self.beta)
    }

    /// `λ + iα`.
    pub fn coupling(&self) -> Complex64 {
        Complex64::new(self.lambda, self.alpha)
    }
}

/// Which side of the equation the nonlinearity sits on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `u̇ = (λ+iα)A_d u + (k+iβ)N(u) + γu + f`.
    #[default]
    Source,
    /// `u̇ = (λ+iα)A_d u + γu − (k+iβ)N(u) + f`.
    Lhs,
}

impl FromStr for SignConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "source" => Ok(Self::Source),
            "lhs" => Ok(Self::Lhs),
            other => Err(format!("unknown sign convention `{other}`")),
        }
    }
}

/// `α̂ = α, β̂ = −λ, γ̂ = 0, δ̂ = −γ, η̂ = −β, ζ̂ = k, g = i·f`.
pub fn dcgl_to_general(p: &DcglParams) -> GeneralParams {
    let forcing = p.forcing.as_ref().map(|f| {
        let mut g = f.clone();
        g.amplitudes_mut().iter_mut().for_each(|z| *z *= I);
        g
    });
    GeneralParams {
        alpha_hat: p.alpha,
        beta_hat: -p.lambda,
        gamma_hat: 0.0,
        delta_hat: -p.gamma,
        eta_hat: -p.beta,
        zeta_hat: p.k,
        forcing,
    }
}

/// The general equation as an evaluable right-hand side.
#[derive(Debug, Clone)]
pub struct GeneralSystem {
    coupling: Complex64,
    linear: Complex64,
    nonlinear: Complex64,
    forcing: Option<Vec<Complex64>>,
    nl: Nonlinearity,
}

impl GeneralSystem {
    pub fn new(params: &GeneralParams, nl: Nonlinearity) -> Self {
        Self {
            coupling: I * Complex64::new(params.alpha_hat, params.beta_hat),
            linear: I * Complex64::new(params.gamma_hat, params.delta_hat),
            nonlinear: I * Complex64::new(params.eta_hat, params.zeta_hat),
            forcing: params
                .forcing
                .as_ref()
                .map(|g| g.amplitudes().iter().map(|z| -I * z).collect()),
            nl,
        }
    }
}

impl LatticeRhs for GeneralSystem {
    fn eval(&self, u: &[Complex64], du: &mut [Complex64]) {
        for i in 0..u.len() {
            let (left, right) = neighbours(u, i);
            let lap = left - 2.0 * u[i] + right;
            du[i] = self.coupling * lap + self.linear * u[i] + self.nonlinear * self.nl.eval(u[i]);
        }
        if let Some(g) = &self.forcing {
            du.iter_mut().zip(g).for_each(|(d, g)| *d += g);
        }
    }
}

/// The DCGL family in either sign convention.
#[derive(Debug, Clone)]
pub struct DcglSystem {
    coupling: Complex64,
    gamma: f64,
    nonlinear: Complex64,
    forcing: Option<Vec<Complex64>>,
    nl: Nonlinearity,
}

impl DcglSystem {
    pub fn new(params: &DcglParams, nl: Nonlinearity, convention: SignConvention) -> Self {
        let sign = match convention {
            SignConvention::Source => 1.0,
            SignConvention::Lhs => -1.0,
        };
        Self {
            coupling: params.coupling(),
            gamma: params.gamma,
            nonlinear: sign * params.nonlinear_coeff(),
            forcing: params.forcing.as_ref().map(|f| f.amplitudes().to_vec()),
            nl,
        }
    }
}

impl LatticeRhs for DcglSystem {
    fn eval(&self, u: &[Complex64], du: &mut [Complex64]) {
        for i in 0..u.len() {
            let (left, right) = neighbours(u, i);
            let lap = left - 2.0 * u[i] + right;
            du[i] = self.coupling * lap + self.gamma * u[i] + self.nonlinear * self.nl.eval(u[i]);
        }
        if let Some(f) = &self.forcing {
            du.iter_mut().zip(f).for_each(|(d, f)| *d += f);
        }
    }
}

fn evaluate(state: &LatticeState, rhs: &impl LatticeRhs) -> LatticeState {
    let mut out = LatticeState::zeros(state.geometry).with_time(state.time);
    rhs.eval(state.amplitudes(), out.amplitudes_mut());
    out.post_blowup = !out.is_finite();
    out
}

fn check_forcing(state: &LatticeState, forcing: Option<&LatticeState>) -> Result<()> {
    match forcing {
        Some(g) => state.ensure_same_geometry(g),
        None => Ok(()),
    }
}

/// Time derivative of the general equation. A non-finite result is flagged through
/// `post_blowup` on the returned state.
pub fn rhs_general(
    state: &LatticeState,
    params: &GeneralParams,
    nl: &Nonlinearity,
) -> Result<LatticeState> {
    state.ensure_finite()?;
    check_forcing(state, params.forcing.as_ref())?;
    Ok(evaluate(state, &GeneralSystem::new(params, nl.clone())))
}

/// Time derivative of the DCGL family in the given convention.
pub fn rhs_dcgl(
    state: &LatticeState,
    params: &DcglParams,
    nl: &Nonlinearity,
    convention: SignConvention,
) -> Result<LatticeState> {
    state.ensure_finite()?;
    check_forcing(state, params.forcing.as_ref())?;
    Ok(evaluate(
        state,
        &DcglSystem::new(params, nl.clone(), convention),
    ))
}

fn power_constant(nl: &Nonlinearity) -> Result<(f64, f64)> {
    match nl.kind {
        NonlinearityKind::General { .. } => Err(Error::Unsupported(
            "Lipschitz constants are only available for power nonlinearities".into(),
        )),
        _ => Ok((nl.c, nl.p)),
    }
}

/// `L(R) = 2·c·R^{p−1}`.
pub fn lipschitz_constant(radius: f64, nl: &Nonlinearity) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let (c, p) = power_constant(nl)?;
    Ok(2.0 * c * radius.powf(p - 1.0))
}

/// `1 / (2(L(R) + 1))`, a lower bound on the remaining existence time from a state
/// with `2‖u‖₂ = R`.
pub fn local_existence_time(radius: f64, nl: &Nonlinearity) -> Result<f64> {
    Ok(0.5 / (lipschitz_constant(radius, nl)? + 1.0))
}

/// [`local_existence_time`] at `R = 2‖u‖₂`.
pub fn local_existence_time_from(state: &LatticeState, nl: &Nonlinearity) -> Result<f64> {
    let norm = norm_p_slice(state.amplitudes(), 2.0);
    if norm == 0.0 {
        // F(0) = 0 with zero derivative for p > 1: any small ball works
        return Ok(0.5);
    }
    local_existence_time(2.0 * norm, nl)
}
