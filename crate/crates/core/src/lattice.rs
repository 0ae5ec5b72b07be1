//! Lattice geometry, complex site amplitudes, plain and weighted norms, admissible
//! weights, and initial-data generators.
//!
//! Sites are labelled `n ∈ {-N, …, N}` and stored at index `n + N`. The ghost sites
//! `±(N + 1)` are never stored; every difference operator treats them as zero.

use std::f64::consts::FRAC_PI_2;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    FiniteDirichlet,
    /// Truncation of the infinite lattice to `|n| <= N` with zero ghosts.
    TruncatedInfinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub kind: LatticeKind,
    half_width: usize,
}

impl LatticeGeometry {
    pub fn new(kind: LatticeKind, half_width: usize) -> Self {
        Self { kind, half_width }
    }

    pub fn finite(half_width: usize) -> Self {
        Self::new(LatticeKind::FiniteDirichlet, half_width)
    }

    pub fn truncated(half_width: usize) -> Self {
        Self::new(LatticeKind::TruncatedInfinite, half_width)
    }

    /// Half-width `N`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Site count `L = 2N + 1`.
    pub fn sites(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn site_range(&self) -> RangeInclusive<i64> {
        let n = self.half_width as i64;
        -n..=n
    }

    /// Lattice label of storage index `i`.
    pub fn label(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    /// Storage index of lattice label `n`, if it lies on the lattice.
    pub fn index(&self, n: i64) -> Option<usize> {
        let shifted = n + self.half_width as i64;
        (0..self.sites() as i64)
            .contains(&shifted)
            .then_some(shifted as usize)
    }
}

/// Complex amplitude per site together with the time it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub geometry: LatticeGeometry,
    amplitudes: Vec<Complex64>,
    pub time: f64,
    /// Set once an integrator produced non-finite values from this state.
    pub post_blowup: bool,
}

impl LatticeState {
    pub fn new(geometry: LatticeGeometry, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != geometry.sites() {
            return Err(Error::DimensionMismatch {
                expected: geometry.sites(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            geometry,
            amplitudes,
            time: 0.0,
            post_blowup: false,
        })
    }

    pub fn zeros(geometry: LatticeGeometry) -> Self {
        Self {
            geometry,
            amplitudes: vec![Complex64::new(0.0, 0.0); geometry.sites()],
            time: 0.0,
            post_blowup: false,
        }
    }

    /// Builds a state by evaluating `f` at every lattice label.
    pub fn from_fn(geometry: LatticeGeometry, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let amplitudes = geometry.site_range().map(&mut f).collect();
        Self {
            geometry,
            amplitudes,
            time: 0.0,
            post_blowup: false,
        }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude at lattice label `n`; ghost and out-of-range sites read as zero.
    pub fn at(&self, n: i64) -> Complex64 {
        self.geometry
            .index(n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|z| z.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        match self.amplitudes.iter().position(|z| !z.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                site: self.geometry.label(i),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn ensure_same_geometry(&self, other: &LatticeState) -> Result<()> {
        if self.geometry.sites() != other.geometry.sites() {
            return Err(Error::DimensionMismatch {
                expected: self.geometry.sites(),
                found: other.geometry.sites(),
            });
        }
        Ok(())
    }

    /// `(Σ|u_n|^p)^{1/p}`, or `max |u_n|` for `p = ∞`.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.ensure_finite()?;
        Ok(norm_p_slice(&self.amplitudes, p))
    }

    /// `(Σ θ_n |u_n|^p)^{1/p}` for finite `p >= 1`.
    pub fn weighted_norm(&self, weight: &Weight, p: f64) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        self.ensure_finite()?;
        Ok(weighted_norm_sq_like(self, weight, p).powf(1.0 / p))
    }

    /// `Re Σ u_n conj(v_n)`.
    pub fn real_inner_product(&self, other: &LatticeState) -> Result<f64> {
        self.ensure_same_geometry(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(u, v)| (u * v.conj()).re)
            .sum())
    }

    /// Rescales the amplitudes so that the plain ℓ² norm equals `target`.
    /// The zero state is returned unchanged.
    pub fn scaled_to_l2(mut self, target: f64) -> Self {
        let current = norm_p_slice(&self.amplitudes, 2.0);
        if current > 0.0 {
            let s = target / current;
            self.amplitudes.iter_mut().for_each(|z| *z *= s);
        }
        self
    }

    /// Re-embeds the state into a lattice of half-width `half_width`, padding
    /// with zeros or dropping the outer sites.
    pub fn resized(&self, half_width: usize) -> LatticeState {
        let geometry = LatticeGeometry::new(self.geometry.kind, half_width);
        LatticeState::from_fn(geometry, |n| self.at(n)).with_time(self.time)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub(crate) fn norm_p_slice(u: &[Complex64], p: f64) -> f64 {
    if p.is_infinite() {
        u.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    } else {
        u.iter()
            .map(|z| z.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

pub(crate) fn sup_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, |a, b| {
        // NaN must dominate so that non-finite states are detected
        if b.is_nan() || a.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

/// `Σ θ_n |u_n|^p` (no root taken).
fn weighted_norm_sq_like(state: &LatticeState, weight: &Weight, p: f64) -> f64 {
    state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, z)| weight.theta(state.geometry.label(i)) * z.norm().powf(p))
        .sum()
}

/// `Σ θ_n |u_n|²`, the squared ℓ²_θ norm.
pub fn weighted_norm_sq(state: &LatticeState, weight: &Weight) -> f64 {
    state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, z)| weight.theta(state.geometry.label(i)) * z.norm_sqr())
        .sum()
}

/// Sharp constants `(c1, c2)` with `c1·‖ψ‖_p ≤ ‖ψ‖_q ≤ c2·‖ψ‖_p` on `sites` sites.
pub fn norm_equivalence_constants(p: f64, q: f64, sites: usize) -> Result<(f64, f64)> {
    check_exponent(p)?;
    check_exponent(q)?;
    if p > q {
        return Err(Error::ParameterOrder { p, q });
    }
    if sites == 0 {
        return Err(Error::InvalidParameter(
            "site count must be positive".into(),
        ));
    }
    let recip = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let c1 = (sites as f64).powf(recip(q) - recip(p));
    Ok((c1, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum WeightProfile {
    /// `θ_n = exp(μ|n|)`.
    Exponential { mu: f64 },
    /// Tabulated values for labels `first, first + 1, …`.
    Table { first: i64, values: Vec<f64> },
}

/// A weight `θ_n` together with its (WS) constants `D`, `d_lower`, `d_upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub profile: WeightProfile,
    pub d: f64,
    pub d_lower: f64,
    pub d_upper: f64,
}

impl Weight {
    /// Exponential weight with `D = e^μ − 1`, `d_upper = e^μ`, `d_lower = e^{−μ}`.
    pub fn exponential(mu: f64) -> Self {
        Self {
            profile: WeightProfile::Exponential { mu },
            d: mu.exp_m1(),
            d_lower: (-mu).exp(),
            d_upper: mu.exp(),
        }
    }

    /// The unit weight `θ ≡ 1` with a caller-chosen positive `D`.
    pub fn unit(d: f64) -> Self {
        Self {
            profile: WeightProfile::Exponential { mu: 0.0 },
            d,
            d_lower: 1.0,
            d_upper: 1.0,
        }
    }

    /// Tabulated weight. The constants are taken as given and must be checked
    /// with [`Weight::validate`].
    pub fn table(first: i64, values: Vec<f64>, d: f64, d_lower: f64, d_upper: f64) -> Self {
        Self {
            profile: WeightProfile::Table { first, values },
            d,
            d_lower,
            d_upper,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match self.profile {
            WeightProfile::Exponential { mu } => Some(mu),
            WeightProfile::Table { .. } => None,
        }
    }

    /// `θ_n`. Tabulated weights read NaN outside their table.
    pub fn theta(&self, n: i64) -> f64 {
        match &self.profile {
            WeightProfile::Exponential { mu } => (mu * n.unsigned_abs() as f64).exp(),
            WeightProfile::Table { first, values } => usize::try_from(n - first)
                .ok()
                .and_then(|i| values.get(i).copied())
                .unwrap_or(f64::NAN),
        }
    }

    /// Checks the three (WS) conditions pointwise on `range` and reports the first
    /// violating site. Pair conditions are attributed to the right-hand site.
    pub fn validate(&self, range: RangeInclusive<i64>) -> WeightReport {
        for (name, value) in [
            ("D", self.d),
            ("d_lower", self.d_lower),
            ("d_upper", self.d_upper),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return WeightReport::invalid(None, WsCondition::PositiveConstant(name));
            }
        }
        // comparisons allow a few ulps for closed-form weights such as exp(μ|n|)
        let slack = |x: f64| 1e-12 * x.abs().max(1.0);
        // each site is checked on its own and against its left neighbour
        let (lo, hi) = (*range.start(), *range.end());
        for n in lo..=hi {
            let theta = self.theta(n);
            if !(theta >= 1.0 - slack(1.0)) {
                return WeightReport::invalid(Some(n), WsCondition::AtLeastOne);
            }
            if n == lo {
                continue;
            }
            let prev = self.theta(n - 1);
            if !((theta - prev).abs() <= self.d * prev + slack(prev)) {
                return WeightReport::invalid(Some(n), WsCondition::BoundedIncrement);
            }
            if !(self.d_lower * prev <= theta + slack(theta)
                && theta <= self.d_upper * prev + slack(theta))
            {
                return WeightReport::invalid(Some(n), WsCondition::BoundedRatio);
            }
        }
        WeightReport {
            valid: true,
            first_violation: None,
            condition: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WsCondition {
    /// One of `D`, `d_lower`, `d_upper` is not positive.
    PositiveConstant(&'static str),
    /// `θ_n >= 1`.
    AtLeastOne,
    /// `|θ_{n+1} − θ_n| <= D θ_n`.
    BoundedIncrement,
    /// `d_lower θ_n <= θ_{n+1} <= d_upper θ_n`.
    BoundedRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    pub valid: bool,
    /// Site of the first violation; `None` for constant violations or success.
    pub first_violation: Option<i64>,
    pub condition: Option<WsCondition>,
}

impl WeightReport {
    fn invalid(site: Option<i64>, condition: WsCondition) -> Self {
        Self {
            valid: false,
            first_violation: site,
            condition: Some(condition),
        }
    }
}

/// Spatial scaling of initial data: `|u_n(0)| = amplitude·(|n| + 1)^δ`, with the
/// functional exponent `σ = 1 + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    pub delta: f64,
    pub amplitude: f64,
    /// Half-width of the per-site phase jitter, in radians.
    pub phase: f64,
}

impl ScalingProfile {
    pub fn new(delta: f64, amplitude: f64) -> Self {
        Self {
            delta,
            amplitude,
            phase: 0.0,
        }
    }

    pub fn from_sigma(sigma: f64, amplitude: f64) -> Self {
        Self::new(sigma - 1.0, amplitude)
    }

    pub fn sigma(&self) -> f64 {
        1.0 + self.delta
    }

    pub fn magnitude(&self, n: i64) -> f64 {
        self.amplitude * ((n.unsigned_abs() + 1) as f64).powf(self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// Phases jittered around `π/2`; every site has positive imaginary part.
    ImaginaryPositive,
    /// Phases jittered around `0`; every site has positive real part.
    RealPositive,
    /// Independent uniform phases on `[0, 2π)`.
    RandomPhase,
}

impl std::str::FromStr for DataKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "imaginary-positive" => Ok(Self::ImaginaryPositive),
            "real-positive" => Ok(Self::RealPositive),
            "random-phase" => Ok(Self::RandomPhase),
            other => Err(format!("unknown data kind `{other}`")),
        }
    }
}

/// Deterministic initial data with `|u_n| = amplitude·(|n| + 1)^δ`.
///
/// For the two sign-definite kinds the jitter is capped below `π/2`, so every site
/// keeps a strictly positive imaginary (resp. real) part.
pub fn make_initial_data(
    geometry: LatticeGeometry,
    profile: &ScalingProfile,
    kind: DataKind,
    seed: u64,
) -> LatticeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = profile.phase.abs().min(FRAC_PI_2 * 0.999);
    LatticeState::from_fn(geometry, |n| {
        let magnitude = profile.magnitude(n);
        let offset = if jitter > 0.0 {
            rng.random_range(-jitter..=jitter)
        } else {
            0.0
        };
        let phase = match kind {
            DataKind::ImaginaryPositive => FRAC_PI_2 + offset,
            DataKind::RealPositive => offset,
            DataKind::RandomPhase => rng.random_range(0.0..std::f64::consts::TAU),
        };
        Complex64::from_polar(magnitude, phase)
    })
}
