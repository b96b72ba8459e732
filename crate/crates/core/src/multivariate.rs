//! Two-asset diffusion structure.
//!
//! In the multivariate mixture (MVMD) the correlation sits between the
//! instrumental processes, so the joint law is a mixture over component pairs
//! `(h, k)` of bivariate shifted lognormals with probability `λ₁ʰ λ₂ᵏ`. The
//! simply-correlated model (SCMD) instead joins the two one-dimensional local
//! volatility models through a single Brownian correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, log_sum_exp, to_f64, Scalar};
use crate::smile::{local_vol, ShiftedMixtureParams};

/// Largest admissible `|ρ|`; beyond it the scenario covariances are too close
/// to singular for the quadratures.
pub const MAX_ABS_CORRELATION: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorrelationSpec<T> {
    Constant { rho: T },
    /// `matrix[h][k]` pairs component `h` of asset 1 with component `k` of
    /// asset 2 and is drawn with probability `λ₁ʰ λ₂ᵏ`.
    Scenario { matrix: Vec<Vec<T>> },
}

impl<T: Scalar> CorrelationSpec<T> {
    pub fn constant(rho: T) -> Result<Self> {
        let c = Self::Constant { rho };
        c.check_entries()?;
        Ok(c)
    }

    pub fn scenario(matrix: Vec<Vec<T>>) -> Result<Self> {
        let c = Self::Scenario { matrix };
        c.check_entries()?;
        Ok(c)
    }

    fn check_entries(&self) -> Result<()> {
        let bound: T = lit(MAX_ABS_CORRELATION);
        let bad = |r: T| !(r.abs() < bound);
        match self {
            Self::Constant { rho } if bad(*rho) => Err(Error::InvalidInput(format!(
                "correlation {rho} outside (-{MAX_ABS_CORRELATION}, {MAX_ABS_CORRELATION})"
            ))),
            Self::Scenario { matrix } => {
                if matrix.is_empty() || matrix.iter().any(|r| r.len() != matrix[0].len() || r.is_empty()) {
                    return Err(Error::InvalidInput("scenario matrix must be rectangular and non-empty".into()));
                }
                match matrix.iter().flatten().find(|&&r| bad(r)) {
                    Some(r) => Err(Error::InvalidInput(format!(
                        "scenario correlation {r} outside (-{MAX_ABS_CORRELATION}, {MAX_ABS_CORRELATION})"
                    ))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    pub fn validate(&self, n1: usize, n2: usize) -> Result<()> {
        self.check_entries()?;
        if let Self::Scenario { matrix } = self {
            if matrix.len() != n1 || matrix[0].len() != n2 {
                return Err(Error::InvalidInput(format!(
                    "scenario matrix is {}x{}, components are {n1}x{n2}",
                    matrix.len(),
                    matrix[0].len()
                )));
            }
        }
        Ok(())
    }

    /// Correlation of scenario `(h, k)`.
    pub fn rho(&self, h: usize, k: usize) -> T {
        match self {
            Self::Constant { rho } => *rho,
            Self::Scenario { matrix } => matrix[h][k],
        }
    }

    pub fn max_abs(&self) -> T {
        match self {
            Self::Constant { rho } => rho.abs(),
            Self::Scenario { matrix } => matrix
                .iter()
                .flatten()
                .fold(T::zero(), |m, r| m.max(r.abs())),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }
}

/// Continuously compounded short rates of the three currencies in a cross.
///
/// Asset 1 is quoted as units of the intermediate currency per unit of the
/// foreign one, asset 2 as domestic units per intermediate unit, and their
/// product as domestic per foreign (e.g. EUR per USD times JPY per EUR).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossRates<T> {
    pub domestic: T,
    pub intermediate: T,
    pub foreign: T,
}

impl<T: Scalar> CrossRates<T> {
    pub fn zero() -> Self {
        Self {
            domestic: T::zero(),
            intermediate: T::zero(),
            foreign: T::zero(),
        }
    }

    /// Risk-neutral drifts `(μ₁, μ₂)`, each under its own quote currency.
    pub fn drifts(&self) -> (T, T) {
        (self.intermediate - self.foreign, self.domestic - self.intermediate)
    }
}

/// A pair of calibrated assets with their dependence structure.
///
/// All expectations are under the measure of asset 2's quote currency once
/// [`crate::cross::quanto_adjust`] has been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModel<T> {
    pub asset1: ShiftedMixtureParams<T>,
    pub asset2: ShiftedMixtureParams<T>,
    pub corr: CorrelationSpec<T>,
    #[serde(default)]
    pub rates: Option<CrossRates<T>>,
    /// Asset 1 carries the per-scenario drift correction `−ρσ₁σ₂`.
    #[serde(default)]
    pub quanto_adjusted: bool,
}

impl<T: Scalar> CrossModel<T> {
    pub fn new(
        asset1: ShiftedMixtureParams<T>,
        asset2: ShiftedMixtureParams<T>,
        corr: CorrelationSpec<T>,
    ) -> Result<Self> {
        let m = Self {
            asset1,
            asset2,
            corr,
            rates: None,
            quanto_adjusted: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_rates(mut self, rates: CrossRates<T>) -> Self {
        self.rates = Some(rates);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.asset1.validate()?;
        self.asset2.validate()?;
        self.corr
            .validate(self.asset1.n_components(), self.asset2.n_components())
    }

    pub fn with_corr(&self, corr: CorrelationSpec<T>) -> Result<Self> {
        let m = Self {
            corr,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_scenarios(&self) -> usize {
        self.asset1.n_components() * self.asset2.n_components()
    }
}

/// `∫₀ᵗ σ₁ʰ(s) σ₂ᵏ(s) ds` over the piecewise-constant component volatilities.
pub fn integrated_cross_vol<T: Scalar>(
    p1: &ShiftedMixtureParams<T>,
    h: usize,
    p2: &ShiftedMixtureParams<T>,
    k: usize,
    t: T,
) -> T {
    let (e1, e2) = (p1.epsilon_floor, p2.epsilon_floor);
    let mut cuts = [T::zero(), e1.min(e2), e1.max(e2), t];
    for c in cuts.iter_mut() {
        *c = c.min(t);
    }
    let half: T = lit(0.5);
    cuts.windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            if len <= T::zero() {
                return T::zero();
            }
            let mid = w[0] + half * len;
            p1.instantaneous_vol(h, mid) * p2.instantaneous_vol(k, mid) * len
        })
        .sum()
}

/// Terminal law of one scenario `(h, k)`: `Sᵢ = αᵢ + exp(mᵢ + gᵢ)` with `g`
/// centred Gaussian of covariance `[[v11, c12], [c12, v22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioLaw<T> {
    pub h: usize,
    pub k: usize,
    pub prob: T,
    pub rho: T,
    pub v11: T,
    pub v22: T,
    pub c12: T,
    pub m1: T,
    pub m2: T,
    pub alpha1: T,
    pub alpha2: T,
}

impl<T: Scalar> ScenarioLaw<T> {
    /// `E[exp(mᵢ + gᵢ)]`, the forward of the lognormal part.
    pub fn forward1(&self) -> T {
        (self.m1 + lit::<T>(0.5) * self.v11).exp()
    }

    pub fn forward2(&self) -> T {
        (self.m2 + lit::<T>(0.5) * self.v22).exp()
    }

    fn log_density_y(&self, y1: T, y2: T) -> Result<T> {
        let det = self.v11 * self.v22 - self.c12 * self.c12;
        if !(det > lit::<T>(1e-14) * self.v11 * self.v22) {
            return Err(Error::Conditioning(format!(
                "scenario ({}, {}) covariance determinant {det}",
                self.h, self.k
            )));
        }
        let (l1, l2) = (y1.ln(), y2.ln());
        let (u1, u2) = (l1 - self.m1, l2 - self.m2);
        let q = (self.v22 * u1 * u1 - lit::<T>(2.0) * self.c12 * u1 * u2 + self.v11 * u2 * u2) / det;
        let ln_2pi: T = lit(1.837_877_066_409_345_5);
        Ok(-lit::<T>(0.5) * q - ln_2pi - lit::<T>(0.5) * det.ln() - l1 - l2)
    }
}

/// Scenario laws at time `t`, including the quanto log-mean correction of
/// asset 1 when the model is adjusted.
pub fn scenario_laws<T: Scalar>(m: &CrossModel<T>, t: T) -> Result<Vec<ScenarioLaw<T>>> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("time {t} must be positive")));
    }
    let (p1, p2) = (&m.asset1, &m.asset2);
    let half: T = lit(0.5);
    let mut laws = Vec::with_capacity(m.n_scenarios());
    for h in 0..p1.n_components() {
        for k in 0..p2.n_components() {
            let rho = m.corr.rho(h, k);
            let v11 = p1.integrated_variance(h, t);
            let v22 = p2.integrated_variance(k, t);
            let c12 = rho * integrated_cross_vol(p1, h, p2, k, t);
            let quanto = if m.quanto_adjusted { c12 } else { T::zero() };
            laws.push(ScenarioLaw {
                h,
                k,
                prob: p1.weights[h] * p2.weights[k],
                rho,
                v11,
                v22,
                c12,
                m1: p1.shifted_spot().ln() + p1.drift * t - half * v11 - quanto,
                m2: p2.shifted_spot().ln() + p2.drift * t - half * v22,
                alpha1: p1.shift_at(t),
                alpha2: p2.shift_at(t),
            });
        }
    }
    Ok(laws)
}

/// Joint density of `(S₁(t), S₂(t))`; zero off the shifted support.
pub fn joint_mixture_density<T: Scalar>(m: &CrossModel<T>, t: T, x1: T, x2: T) -> Result<T> {
    let laws = scenario_laws(m, t)?;
    let (y1, y2) = (x1 - laws[0].alpha1, x2 - laws[0].alpha2);
    if y1 <= T::zero() || y2 <= T::zero() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for law in &laws {
        total = total + law.prob * law.log_density_y(y1, y2)?.exp();
    }
    Ok(total)
}

/// Instantaneous covariance rates of scenario `(h, k)` at `t`.
fn instantaneous<T: Scalar>(m: &CrossModel<T>, law: &ScenarioLaw<T>, t: T) -> [T; 3] {
    let s1 = m.asset1.instantaneous_vol(law.h, t);
    let s2 = m.asset2.instantaneous_vol(law.k, t);
    [s1 * s1, law.rho * s1 * s2, s2 * s2]
}

/// Posterior-weighted diffusion rates `[a11, a12, a22]` of the lognormal
/// coordinates `yᵢ = xᵢ − αᵢ(t)` given precomputed scenario laws.
pub(crate) fn y_diffusion<T: Scalar>(
    laws: &[ScenarioLaw<T>],
    rates: &[[T; 3]],
    y1: T,
    y2: T,
) -> Result<[T; 3]> {
    let logs = laws
        .iter()
        .map(|l| Ok(l.prob.ln() + l.log_density_y(y1, y2)?))
        .collect::<Result<Vec<T>>>()?;
    let norm = log_sum_exp(&logs);
    let mut a = [T::zero(); 3];
    for (l, r) in logs.iter().zip(rates) {
        let w = (*l - norm).exp();
        for j in 0..3 {
            a[j] = a[j] + w * r[j];
        }
    }
    Ok(a)
}

fn check_support<T: Scalar>(law: &ScenarioLaw<T>, x1: T, x2: T) -> Result<(T, T)> {
    let (y1, y2) = (x1 - law.alpha1, x2 - law.alpha2);
    if !(y1 > T::zero() && y2 > T::zero()) {
        return Err(Error::Domain(format!(
            "({x1}, {x2}) is not above the shifts ({}, {})",
            law.alpha1, law.alpha2
        )));
    }
    Ok((y1, y2))
}

/// MVMD diffusion matrix `ã(t, x)` of the asset coordinates.
pub fn mvmd_diffusion_matrix<T: Scalar>(m: &CrossModel<T>, t: T, x1: T, x2: T) -> Result<[[T; 2]; 2]> {
    let laws = scenario_laws(m, t)?;
    let (y1, y2) = check_support(&laws[0], x1, x2)?;
    let rates: Vec<[T; 3]> = laws.iter().map(|l| instantaneous(m, l, t)).collect();
    let a = y_diffusion(&laws, &rates, y1, y2)?;
    let (w1, w2) = (y1 / x1, y2 / x2);
    let off = a[1] * w1 * w2;
    Ok([[a[0] * w1 * w1, off], [off, a[2] * w2 * w2]])
}

/// SCMD diffusion matrix: the marginal local volatilities joined by `ρ`.
pub fn scmd_diffusion_matrix<T: Scalar>(m: &CrossModel<T>, t: T, x1: T, x2: T) -> Result<[[T; 2]; 2]> {
    let rho = match m.corr {
        CorrelationSpec::Constant { rho } => rho,
        CorrelationSpec::Scenario { .. } => {
            return Err(Error::UnsupportedSpec(
                "the simply-correlated model takes a single correlation".into(),
            ))
        }
    };
    let s1 = local_vol(&m.asset1, t, x1)? * (x1 - m.asset1.shift_at(t)) / x1;
    let s2 = local_vol(&m.asset2, t, x2)? * (x2 - m.asset2.shift_at(t)) / x2;
    let off = rho * s1 * s2;
    Ok([[s1 * s1, off], [off, s2 * s2]])
}

/// Instantaneous local correlation `ã₁₂ / √(ã₁₁ ã₂₂)` of the MVMD.
pub fn local_correlation<T: Scalar>(m: &CrossModel<T>, t: T, x1: T, x2: T) -> Result<T> {
    let a = mvmd_diffusion_matrix(m, t, x1, x2)?;
    Ok(a[0][1] / (a[0][0] * a[1][1]).sqrt())
}

pub(crate) fn law_summary<T: Scalar>(l: &ScenarioLaw<T>) -> String {
    format!(
        "scenario ({}, {}): p={:.6}, rho={:.6}, V1={:.6}, V2={:.6}",
        l.h,
        l.k,
        to_f64(l.prob),
        to_f64(l.rho),
        to_f64(l.v11.sqrt()),
        to_f64(l.v22.sqrt())
    )
}
