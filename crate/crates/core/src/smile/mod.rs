//! Shifted lognormal mixture dynamics for a single asset.
//!
//! The asset is `S(t) = β e^{μt} + X(t)` where the density of `X(t)` is a
//! convex combination of lognormal densities, one per instrumental process.
//! Component volatilities follow a two-regime convention: every component
//! runs at the common value `σ₀` on `[0, ε]` and at a constant `σᵏ` on
//! `(ε, ∞)`, with `σᵏ` chosen so that the total variance at the reference
//! maturity equals `(ηᵏ)² T` exactly. Pricing at the reference maturity is
//! therefore identical to pricing with the term volatilities `η`.

mod calibrate;

pub use calibrate::{
    calibrate_smile, QuoteFit, SmileCalibrationConfig, SmileFitReport, SmileMarket, VolQuote,
};

use serde::{Deserialize, Serialize};

use crate::analytic::{implied_vol, shifted_bs_price, OptionType, ShiftedBsInputs};
use crate::error::{Error, Result};
use crate::scalar::{lit, log_sum_exp, Scalar};

/// Default length of the common-volatility window: one day.
pub const DEFAULT_EPSILON: f64 = 1.0 / 365.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedMixtureParams<T> {
    /// Mixture probabilities `λᵏ`.
    pub weights: Vec<T>,
    /// Annualized term volatilities `ηᵏ` at `reference_maturity`.
    pub term_vols: Vec<T>,
    /// Shift `β` in asset units.
    pub shift: T,
    /// Drift `μ` per year.
    pub drift: T,
    pub spot: T,
    pub reference_maturity: T,
    /// Length `ε` of the common-volatility window.
    pub epsilon_floor: T,
}

impl<T: Scalar> ShiftedMixtureParams<T> {
    pub fn new(
        weights: Vec<T>,
        term_vols: Vec<T>,
        shift: T,
        drift: T,
        spot: T,
        reference_maturity: T,
    ) -> Result<Self> {
        let p = Self {
            weights,
            term_vols,
            shift,
            drift,
            spot,
            reference_maturity,
            epsilon_floor: lit::<T>(DEFAULT_EPSILON).min(reference_maturity * lit(0.5)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self> {
        self.epsilon_floor = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 || self.term_vols.len() != n {
            return Err(Error::InvalidInput(format!(
                "need matching non-empty weights ({n}) and term vols ({})",
                self.term_vols.len()
            )));
        }
        let scalars = [
            self.shift,
            self.drift,
            self.spot,
            self.reference_maturity,
            self.epsilon_floor,
        ];
        if scalars.iter().chain(&self.weights).chain(&self.term_vols).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite mixture parameter".into()));
        }
        if self.weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidInput("negative mixture weight".into()));
        }
        let total: T = self.weights.iter().copied().sum();
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        if self.term_vols.iter().any(|&v| v <= T::zero()) {
            return Err(Error::InvalidInput("term volatilities must be positive".into()));
        }
        if self.spot <= T::zero() || self.spot - self.shift <= T::zero() {
            return Err(Error::InvalidInput(format!(
                "spot {} minus shift {} must be positive",
                self.spot, self.shift
            )));
        }
        if !(self.epsilon_floor > T::zero() && self.epsilon_floor < self.reference_maturity) {
            return Err(Error::InvalidInput(format!(
                "epsilon {} must lie in (0, T={})",
                self.epsilon_floor, self.reference_maturity
            )));
        }
        for k in 0..n {
            if !(self.late_variance_rate(k) > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "component {k}: term vol too small for the common-volatility window"
                )));
            }
        }
        Ok(())
    }

    /// Common initial volatility `σ₀`: the λ-weighted quadratic mean of `η`.
    pub fn initial_vol(&self) -> T {
        self.weights
            .iter()
            .zip(&self.term_vols)
            .map(|(&w, &v)| w * v * v)
            .sum::<T>()
            .sqrt()
    }

    fn late_variance_rate(&self, k: usize) -> T {
        let t = self.reference_maturity;
        let eps = self.epsilon_floor;
        let s0 = self.initial_vol();
        let eta = self.term_vols[k];
        (eta * eta * t - s0 * s0 * eps) / (t - eps)
    }

    /// Volatility of component `k` after the common window.
    pub fn late_vol(&self, k: usize) -> T {
        self.late_variance_rate(k).sqrt()
    }

    /// Instantaneous volatility `σᵏ(t)`.
    pub fn instantaneous_vol(&self, k: usize, t: T) -> T {
        if t <= self.epsilon_floor {
            self.initial_vol()
        } else {
            self.late_vol(k)
        }
    }

    /// `∫₀ᵗ σᵏ(s)² ds`.
    pub fn integrated_variance(&self, k: usize, t: T) -> T {
        let s0 = self.initial_vol();
        let early = t.min(self.epsilon_floor).max(T::zero());
        let late = (t - self.epsilon_floor).max(T::zero());
        s0 * s0 * early + self.late_variance_rate(k) * late
    }

    /// Total stdev `Vᵏ(t)`.
    pub fn total_stdev(&self, k: usize, t: T) -> T {
        self.integrated_variance(k, t).sqrt()
    }

    /// Deterministic shift `β e^{μt}`.
    pub fn shift_at(&self, t: T) -> T {
        self.shift * (self.drift * t).exp()
    }

    pub fn forward(&self, t: T) -> T {
        self.spot * (self.drift * t).exp()
    }

    /// Initial value of the lognormal coordinate, `S₀ − β`.
    pub fn shifted_spot(&self) -> T {
        self.spot - self.shift
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.n_components() {
            return Err(Error::InvalidInput(format!(
                "component {k} out of range ({} components)",
                self.n_components()
            )));
        }
        Ok(())
    }

    fn check_time(t: T) -> Result<()> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(Error::Domain(format!("time {t} must be positive")));
        }
        Ok(())
    }

    /// Log density of component `k` in the lognormal coordinate `y > 0`.
    pub(crate) fn log_component_density_y(&self, k: usize, t: T, y: T) -> T {
        let v = self.total_stdev(k, t);
        let mean = self.shifted_spot().ln() + self.drift * t - lit::<T>(0.5) * v * v;
        let z = (y.ln() - mean) / v;
        let half_ln_2pi: T = lit(0.918_938_533_204_672_7);
        -lit::<T>(0.5) * z * z - y.ln() - v.ln() - half_ln_2pi
    }
}

/// Density of the `k`-th shifted lognormal component at asset level `x`.
pub fn component_density<T: Scalar>(p: &ShiftedMixtureParams<T>, k: usize, t: T, x: T) -> Result<T> {
    p.check_component(k)?;
    ShiftedMixtureParams::<T>::check_time(t)?;
    let y = x - p.shift_at(t);
    if y <= T::zero() {
        return Ok(T::zero());
    }
    Ok(p.log_component_density_y(k, t, y).exp())
}

/// Mixture density `Σ λᵏ pᵏ(t, x)` of the asset at time `t`.
pub fn mixture_density<T: Scalar>(p: &ShiftedMixtureParams<T>, t: T, x: T) -> Result<T> {
    ShiftedMixtureParams::<T>::check_time(t)?;
    let y = x - p.shift_at(t);
    if y <= T::zero() {
        return Ok(T::zero());
    }
    Ok(p.weights
        .iter()
        .enumerate()
        .map(|(k, &w)| w * p.log_component_density_y(k, t, y).exp())
        .sum())
}

/// Local volatility of the lognormal coordinate `y = x − βe^{μt}`:
/// `sqrt(Σ λᵏ σᵏ(t)² ℓᵏ / Σ λᵏ ℓᵏ)`.
///
/// The diffusion coefficient of the asset itself is
/// [`asset_local_vol`] `= local_vol · y / x`.
pub fn local_vol<T: Scalar>(p: &ShiftedMixtureParams<T>, t: T, x: T) -> Result<T> {
    ShiftedMixtureParams::<T>::check_time(t)?;
    let y = x - p.shift_at(t);
    if !(y > T::zero()) {
        return Err(Error::Domain(format!(
            "x = {x} is not above the shift {}",
            p.shift_at(t)
        )));
    }
    let logs: Vec<T> = (0..p.n_components())
        .map(|k| p.weights[k].ln() + p.log_component_density_y(k, t, y))
        .collect();
    let norm = log_sum_exp(&logs);
    let var: T = logs
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let s = p.instantaneous_vol(k, t);
            s * s * (l - norm).exp()
        })
        .sum();
    Ok(var.sqrt())
}

pub fn asset_local_vol<T: Scalar>(p: &ShiftedMixtureParams<T>, t: T, x: T) -> Result<T> {
    let lv = local_vol(p, t, x)?;
    Ok(lv * (x - p.shift_at(t)) / x)
}

/// European option price: λ-weighted shifted Black–Scholes prices.
pub fn mixture_option_price<T: Scalar>(
    p: &ShiftedMixtureParams<T>,
    strike: T,
    maturity: T,
    discount_factor: T,
    option_type: OptionType,
) -> Result<T> {
    ShiftedMixtureParams::<T>::check_time(maturity)?;
    let mut price = T::zero();
    for k in 0..p.n_components() {
        let component = shifted_bs_price(&ShiftedBsInputs {
            spot: p.spot,
            strike,
            term_stdev: p.total_stdev(k, maturity),
            maturity,
            drift: p.drift,
            shift: p.shift,
            discount_factor,
            option_type,
        })?;
        price = price + p.weights[k] * component;
    }
    Ok(price)
}

/// Black implied volatility of the model price, quoted on the forward
/// `S₀ e^{μT}` from the out-of-the-money side.
pub fn model_implied_vol<T: Scalar>(
    p: &ShiftedMixtureParams<T>,
    strike: T,
    maturity: T,
    discount_factor: T,
) -> Result<T> {
    let forward = p.forward(maturity);
    let ty = if strike >= forward {
        OptionType::Call
    } else {
        OptionType::Put
    };
    let price = mixture_option_price(p, strike, maturity, discount_factor, ty)?;
    implied_vol(price, forward, strike, maturity, discount_factor, ty)
}
