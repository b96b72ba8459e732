//! Semi-analytic analytics for the product `B = S₁ S₂` under the uncertain
//! volatility model whose Markovian projection is the multivariate mixture.
//!
//! Each scenario `(h, k)` is a pair of shifted lognormals with jointly
//! Gaussian log-returns. Its option value is computed by conditioning on the
//! lower-variance asset: the other asset is then conditionally lognormal and
//! the inner expectation is a Black formula, leaving a one-dimensional
//! Gauss–Hermite integral.

use rayon::prelude::*;

use crate::analytic::{black, implied_vol, OptionType};
use crate::error::{Error, Result};
use crate::multivariate::{law_summary, scenario_laws, CorrelationSpec, CrossModel, ScenarioLaw};
use crate::quadrature::{GaussHermite, GaussLegendre};
use crate::scalar::{lit, norm_cdf, norm_pdf, Scalar};

/// Outer Gauss–Hermite nodes used by the cross pricer.
pub const DEFAULT_HERMITE_NODES: usize = 128;

/// Truncation of the outer Gaussian for density and distribution integrals.
const TRUNCATION: f64 = 8.0;

/// Move the pair to the measure of asset 2's quote currency.
///
/// Drifts are reset from the model's rates and asset 1 picks up the
/// scenario-wise drift `−ρʰᵏ σ₁ʰ(t) σ₂ᵏ(t)`. Applying it twice is a no-op.
pub fn quanto_adjust<T: Scalar>(model: &CrossModel<T>) -> Result<CrossModel<T>> {
    let rates = model.rates.ok_or_else(|| {
        Error::Configuration("quanto adjustment needs the three currency rates".into())
    })?;
    if model.quanto_adjusted {
        return Ok(model.clone());
    }
    let (mu1, mu2) = rates.drifts();
    let mut m = model.clone();
    m.asset1.drift = mu1;
    m.asset2.drift = mu2;
    m.quanto_adjusted = true;
    m.validate()?;
    Ok(m)
}

/// Instantaneous drift correction of asset 1's component `h` when paired with
/// asset 2's component `k`.
pub fn quanto_drift_correction<T: Scalar>(model: &CrossModel<T>, h: usize, k: usize, t: T) -> T {
    -model.corr.rho(h, k) * model.asset1.instantaneous_vol(h, t) * model.asset2.instantaneous_vol(k, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossPricingRequest<T> {
    pub model: CrossModel<T>,
    pub strikes: Vec<T>,
    pub maturity: T,
    pub discount_factor: T,
    pub option_type: OptionType,
    /// Refuse to price a model that has not been quanto adjusted.
    pub require_quanto_adjusted: bool,
}

impl<T: Scalar> CrossPricingRequest<T> {
    pub fn new(model: CrossModel<T>, strikes: Vec<T>, maturity: T, discount_factor: T) -> Self {
        Self {
            model,
            strikes,
            maturity,
            discount_factor,
            option_type: OptionType::Call,
            require_quanto_adjusted: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.require_quanto_adjusted && !self.model.quanto_adjusted {
            return Err(Error::Configuration(
                "request requires a quanto-adjusted model".into(),
            ));
        }
        if self.strikes.iter().any(|k| !(*k > T::zero()) || !k.is_finite()) {
            return Err(Error::InvalidInput("strikes must be positive".into()));
        }
        let horizon = self
            .model
            .asset1
            .reference_maturity
            .min(self.model.asset2.reference_maturity);
        if !(self.maturity > T::zero()) || self.maturity > horizon * lit(1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "maturity {} must lie in (0, {horizon}]",
                self.maturity
            )));
        }
        if !(self.discount_factor > T::zero() && self.discount_factor <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "discount factor {} outside (0, 1]",
                self.discount_factor
            )));
        }
        Ok(())
    }
}

/// Scenario seen from its conditioning asset: `outer = exp(mo + √vo z) + αo`
/// and, given `z`, `inner − αi` lognormal with forward `exp(mi + βz + s²/2)`.
struct Conditioned<T> {
    mo: T,
    so: T,
    ao: T,
    mi: T,
    slope: T,
    s: T,
    ai: T,
}

impl<T: Scalar> Conditioned<T> {
    fn new(l: &ScenarioLaw<T>) -> Self {
        let (mo, vo, ao, mi, vi, ai) = if l.v11 >= l.v22 {
            (l.m2, l.v22, l.alpha2, l.m1, l.v11, l.alpha1)
        } else {
            (l.m1, l.v11, l.alpha1, l.m2, l.v22, l.alpha2)
        };
        let so = vo.sqrt();
        Self {
            mo,
            so,
            ao,
            mi,
            slope: l.c12 / so,
            s: (vi - l.c12 * l.c12 / vo).max(T::zero()).sqrt(),
            ai,
        }
    }

    fn outer(&self, z: T) -> T {
        (self.mo + self.so * z).exp() + self.ao
    }

    fn inner_log_mean(&self, z: T) -> T {
        self.mi + self.slope * z
    }

    fn inner_forward(&self, z: T) -> T {
        (self.inner_log_mean(z) + lit::<T>(0.5) * self.s * self.s).exp()
    }
}

/// `E[(a (X + α) − K)⁺]` (or the put) for `X` lognormal with the given
/// forward and log-stdev.
fn conditional_payoff<T: Scalar>(a: T, alpha: T, forward: T, s: T, strike: T, ty: OptionType) -> T {
    if a == T::zero() {
        return match ty {
            OptionType::Call => (-strike).max(T::zero()),
            OptionType::Put => strike.max(T::zero()),
        };
    }
    let k_eff = strike / a - alpha;
    let scale = a.abs();
    let long_call = (a > T::zero()) == (ty == OptionType::Call);
    match (long_call, k_eff > T::zero()) {
        (true, true) => scale * black(forward, k_eff, s, OptionType::Call),
        (true, false) => scale * (forward - k_eff),
        (false, true) => scale * black(forward, k_eff, s, OptionType::Put),
        (false, false) => T::zero(),
    }
}

fn scenario_price<T: Scalar>(l: &ScenarioLaw<T>, rule: &GaussHermite, strike: T, ty: OptionType) -> T {
    let c = Conditioned::new(l);
    rule.expect(|z: T| conditional_payoff(c.outer(z), c.ai, c.inner_forward(z), c.s, strike, ty))
}

fn price_with_laws<T: Scalar>(
    laws: &[ScenarioLaw<T>],
    rule: &GaussHermite,
    strike: T,
    df: T,
    ty: OptionType,
) -> Result<T> {
    let mut total = T::zero();
    for l in laws {
        let v = scenario_price(l, rule, strike, ty);
        if !v.is_finite() {
            return Err(Error::Integration(format!(
                "non-finite value at strike {strike}; {}",
                law_summary(l)
            )));
        }
        total = total + l.prob * v;
    }
    Ok(df * total)
}

/// Discounted prices of options on `S₁(T) S₂(T)` at the requested strikes.
pub fn price_cross_option<T: Scalar>(req: &CrossPricingRequest<T>) -> Result<Vec<T>> {
    req.validate()?;
    let laws = scenario_laws(&req.model, req.maturity)?;
    let rule = GaussHermite::new(DEFAULT_HERMITE_NODES);
    req.strikes
        .par_iter()
        .map(|&k| price_with_laws(&laws, &rule, k, req.discount_factor, req.option_type))
        .collect()
}

/// First and second moments of the terminal pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMoments<T> {
    pub mean1: T,
    pub mean2: T,
    pub mean_product: T,
    pub second1: T,
    pub second2: T,
}

pub fn cross_moments<T: Scalar>(model: &CrossModel<T>, t: T) -> Result<CrossMoments<T>> {
    let laws = scenario_laws(model, t)?;
    let two: T = lit(2.0);
    let mut m = CrossMoments {
        mean1: T::zero(),
        mean2: T::zero(),
        mean_product: T::zero(),
        second1: T::zero(),
        second2: T::zero(),
    };
    for l in &laws {
        let (f1, f2) = (l.forward1(), l.forward2());
        let (a1, a2) = (l.alpha1, l.alpha2);
        m.mean1 = m.mean1 + l.prob * (f1 + a1);
        m.mean2 = m.mean2 + l.prob * (f2 + a2);
        m.mean_product = m.mean_product
            + l.prob * (f1 * f2 * l.c12.exp() + a2 * f1 + a1 * f2 + a1 * a2);
        m.second1 = m.second1 + l.prob * (f1 * f1 * l.v11.exp() + two * a1 * f1 + a1 * a1);
        m.second2 = m.second2 + l.prob * (f2 * f2 * l.v22.exp() + two * a2 * f2 + a2 * a2);
    }
    Ok(m)
}

/// Forward of the product, `E[S₁(T) S₂(T)]`.
pub fn cross_forward<T: Scalar>(model: &CrossModel<T>, t: T) -> Result<T> {
    Ok(cross_moments(model, t)?.mean_product)
}

/// Black implied volatilities of the cross options, quoted on the exact
/// moment forward and inverted from the out-of-the-money side.
pub fn cross_implied_vol_curve<T: Scalar>(req: &CrossPricingRequest<T>) -> Result<Vec<T>> {
    req.validate()?;
    let forward = cross_forward(&req.model, req.maturity)?;
    let laws = scenario_laws(&req.model, req.maturity)?;
    let rule = GaussHermite::new(DEFAULT_HERMITE_NODES);
    req.strikes
        .par_iter()
        .map(|&k| {
            let ty = if k >= forward { OptionType::Call } else { OptionType::Put };
            let price = price_with_laws(&laws, &rule, k, req.discount_factor, ty)?;
            implied_vol(price, forward, k, req.maturity, req.discount_factor, ty)
        })
        .collect()
}

fn outer_integral<T: Scalar>(
    laws: &[ScenarioLaw<T>],
    what: &str,
    mut f: impl FnMut(&Conditioned<T>, T) -> T,
) -> Result<T> {
    let gl = GaussLegendre::new(10);
    let mut total = T::zero();
    for l in laws {
        let c = Conditioned::new(l);
        let v = gl.integrate(lit(-TRUNCATION), lit(TRUNCATION), 96, |z: T| norm_pdf(z) * f(&c, z));
        if !v.is_finite() {
            return Err(Error::Integration(format!("{what}: {}", law_summary(l))));
        }
        total = total + l.prob * v;
    }
    Ok(total)
}

/// Density of `B = S₁(T) S₂(T)` at `b`.
pub fn cross_density<T: Scalar>(model: &CrossModel<T>, t: T, b: T) -> Result<T> {
    let laws = scenario_laws(model, t)?;
    outer_integral(&laws, "cross density", |c, z| {
        let a = c.outer(z);
        if a == T::zero() || c.s <= T::zero() {
            return T::zero();
        }
        let x = b / a - c.ai;
        if x <= T::zero() {
            return T::zero();
        }
        let u = (x.ln() - c.inner_log_mean(z)) / c.s;
        norm_pdf(u) / (c.s * x * a.abs())
    })
}

/// Distribution function `P(S₁(T) S₂(T) ≤ b)`.
pub fn cross_cdf<T: Scalar>(model: &CrossModel<T>, t: T, b: T) -> Result<T> {
    let laws = scenario_laws(model, t)?;
    let p = outer_integral(&laws, "cross cdf", |c, z| {
        let a = c.outer(z);
        if a == T::zero() {
            return if b >= T::zero() { T::one() } else { T::zero() };
        }
        let x = b / a - c.ai;
        // P(X ≤ x) for a > 0, P(X ≥ x) for a < 0
        let below = if x <= T::zero() {
            T::zero()
        } else if c.s <= T::zero() {
            if c.inner_log_mean(z) <= x.ln() { T::one() } else { T::zero() }
        } else {
            norm_cdf((x.ln() - c.inner_log_mean(z)) / c.s)
        };
        if a > T::zero() { below } else { T::one() - below }
    })?;
    Ok(p.max(T::zero()).min(T::one()))
}

/// Pearson correlation of `S₁(T)` and `S₂(T)` from the closed-form moments.
pub fn terminal_correlation<T: Scalar>(model: &CrossModel<T>, t: T) -> Result<T> {
    let m = cross_moments(model, t)?;
    let cov = m.mean_product - m.mean1 * m.mean2;
    let var1 = m.second1 - m.mean1 * m.mean1;
    let var2 = m.second2 - m.mean2 * m.mean2;
    if !(var1 > T::zero() && var2 > T::zero()) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(cov / (var1 * var2).sqrt())
}

/// Mean and standard deviation of the scenario correlation under the
/// scenario probabilities `λ₁ʰ λ₂ᵏ`.
pub fn scenario_correlation_stats<T: Scalar>(
    corr: &CorrelationSpec<T>,
    weights1: &[T],
    weights2: &[T],
) -> Result<(T, T)> {
    match corr {
        CorrelationSpec::Constant { rho } => Ok((*rho, T::zero())),
        CorrelationSpec::Scenario { matrix } => {
            corr.validate(weights1.len(), weights2.len())?;
            let (mut mean, mut second) = (T::zero(), T::zero());
            for (h, row) in matrix.iter().enumerate() {
                for (k, &r) in row.iter().enumerate() {
                    let p = weights1[h] * weights2[k];
                    mean = mean + p * r;
                    second = second + p * r * r;
                }
            }
            Ok((mean, (second - mean * mean).max(T::zero()).sqrt()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multivariate::CrossRates;
    use crate::smile::{mixture_option_price, ShiftedMixtureParams};
    use approx::assert_relative_eq;

    fn usd_eur() -> ShiftedMixtureParams<f64> {
        ShiftedMixtureParams::new(vec![0.1402, 0.8598], vec![0.1952, 0.0709], 0.00068, 0.0, 0.878, 0.5).unwrap()
    }

    fn eur_jpy() -> ShiftedMixtureParams<f64> {
        ShiftedMixtureParams::new(vec![0.2735, 0.7265], vec![0.1184, 0.0962], 0.9752, 0.0, 135.44, 0.5).unwrap()
    }

    fn model(rho: f64) -> CrossModel<f64> {
        CrossModel::new(usd_eur(), eur_jpy(), CorrelationSpec::constant(rho).unwrap()).unwrap()
    }

    /// Two-dimensional Gauss–Legendre oracle for one scenario. The inner
    /// integral starts at the exercise boundary so the integrand is smooth.
    fn tensor_oracle(l: &ScenarioLaw<f64>, strike: f64) -> f64 {
        let gl = GaussLegendre::new(12);
        let r = l.c12 / (l.v11 * l.v22).sqrt();
        let (s1, s2) = (l.v11.sqrt(), l.v22.sqrt());
        let orth = (1.0 - r * r).sqrt();
        gl.integrate(-9.0, 9.0, 60, |z1| {
            let a = (l.m1 + s1 * z1).exp() + l.alpha1;
            let x2 = strike / a - l.alpha2;
            let lo = if x2 > 0.0 { ((x2.ln() - l.m2) / s2 - r * z1) / orth } else { -9.0 };
            if lo >= 9.0 {
                return 0.0;
            }
            gl.integrate(lo.max(-9.0), 9.0, 60, |w| {
                let z2 = r * z1 + orth * w;
                let b = a * ((l.m2 + s2 * z2).exp() + l.alpha2);
                norm_pdf(z1) * norm_pdf(w) * (b - strike)
            })
        })
    }

    #[test]
    fn conditional_pricer_matches_tensor_oracle() {
        let m = model(-0.6015);
        let laws = scenario_laws(&m, 0.5).unwrap();
        let rule = GaussHermite::new(DEFAULT_HERMITE_NODES);
        for l in &laws {
            for k in [110.0, 118.9, 125.0] {
                let v = scenario_price(l, &rule, k, OptionType::Call);
                assert_relative_eq!(v, tensor_oracle(l, k), max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn deterministic_second_asset_reduces_to_vanilla() {
        // the residual effect is O(η₂ρ), so η₂ must be tiny rather than zero
        let a2 = ShiftedMixtureParams::new(vec![1.0], vec![1e-13], 0.0, 0.01, 2.0, 0.5).unwrap();
        let m = CrossModel::new(usd_eur(), a2.clone(), CorrelationSpec::constant(0.3).unwrap()).unwrap();
        let f2 = a2.forward(0.5);
        let strikes = vec![1.6, 1.75, 1.9];
        let req = CrossPricingRequest::new(m, strikes.clone(), 0.5, 0.98);
        let prices = price_cross_option(&req).unwrap();
        for (k, p) in strikes.iter().zip(prices) {
            let vanilla = mixture_option_price(&usd_eur(), k / f2, 0.5, 0.98, OptionType::Call).unwrap();
            assert_relative_eq!(p, f2 * vanilla, max_relative = 1e-9);
        }
    }

    #[test]
    fn lognormal_product_density_and_moments() {
        let a1 = ShiftedMixtureParams::new(vec![1.0], vec![0.2], 0.0, 0.01, 1.1, 1.0).unwrap();
        let a2 = ShiftedMixtureParams::new(vec![1.0], vec![0.15], 0.0, -0.02, 90.0, 1.0).unwrap();
        let m = CrossModel::new(a1, a2, CorrelationSpec::constant(0.4).unwrap()).unwrap();
        let l = scenario_laws(&m, 1.0).unwrap()[0];
        let mean = l.m1 + l.m2;
        let var = l.v11 + l.v22 + 2.0 * l.c12;
        for b in [70.0, 95.0, 100.0, 130.0] {
            let exact = norm_pdf((f64::ln(b) - mean) / var.sqrt()) / (b * var.sqrt());
            assert_relative_eq!(cross_density(&m, 1.0, b).unwrap(), exact, max_relative = 1e-8);
            let cdf = norm_cdf((f64::ln(b) - mean) / var.sqrt());
            assert!((cross_cdf(&m, 1.0, b).unwrap() - cdf).abs() < 1e-10);
        }
        let fwd = (mean + 0.5 * var).exp();
        assert_relative_eq!(cross_forward(&m, 1.0).unwrap(), fwd, max_relative = 1e-13);
        let expected = ((0.4 * 0.2 * 0.15_f64).exp() - 1.0)
            / (((0.04_f64).exp() - 1.0) * ((0.0225_f64).exp() - 1.0)).sqrt();
        assert_relative_eq!(terminal_correlation(&m, 1.0).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn density_integrates_to_one_with_the_right_mean() {
        let m = model(-0.6015);
        let fwd = cross_forward(&m, 0.5).unwrap();
        let gl = GaussLegendre::new(10);
        // substitute b = fwd·e^u to resolve both tails
        let mass = gl.integrate(-1.5, 1.0, 200, |u: f64| {
            let b = fwd * u.exp();
            cross_density(&m, 0.5, b).unwrap() * b
        });
        let mean = gl.integrate(-1.5, 1.0, 200, |u: f64| {
            let b = fwd * u.exp();
            cross_density(&m, 0.5, b).unwrap() * b * b
        });
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
        assert_relative_eq!(mean, fwd, max_relative = 1e-6);
    }

    #[test]
    fn small_strike_price_is_discounted_forward() {
        let m = model(-0.6015);
        let req = CrossPricingRequest::new(m.clone(), vec![1e-6], 0.5, 0.97);
        let p = price_cross_option(&req).unwrap()[0];
        let f = cross_forward(&m, 0.5).unwrap();
        assert_relative_eq!(p, 0.97 * (f - 1e-6), max_relative = 1e-12);
    }

    #[test]
    fn put_call_parity_on_the_cross() {
        let m = CrossModel::new(
            usd_eur(),
            eur_jpy(),
            CorrelationSpec::scenario(vec![vec![-0.87, -0.18], vec![-0.66, -0.23]]).unwrap(),
        )
        .unwrap();
        let strikes = vec![100.0, 115.0, 119.0, 123.0, 140.0];
        let mut req = CrossPricingRequest::new(m.clone(), strikes.clone(), 0.5, 0.99);
        let calls = price_cross_option(&req).unwrap();
        req.option_type = OptionType::Put;
        let puts = price_cross_option(&req).unwrap();
        let f = cross_forward(&m, 0.5).unwrap();
        for ((k, c), p) in strikes.iter().zip(calls).zip(puts) {
            assert_relative_eq!(c - p, 0.99 * (f - k), max_relative = 1e-8);
        }
    }

    #[test]
    fn negative_shift_is_supported() {
        let a1 = ShiftedMixtureParams::new(vec![0.2209, 0.7791], vec![0.1132, 0.0841], 0.0063, 0.0, 1.0842, 0.5).unwrap();
        let a2 = ShiftedMixtureParams::new(vec![0.5956, 0.4044], vec![0.0447, 0.1455], -0.0587, 0.0, 6.55, 0.5).unwrap();
        let m = CrossModel::new(a1, a2, CorrelationSpec::constant(-0.1205).unwrap()).unwrap();
        let f = cross_forward(&m, 0.5).unwrap();
        let strikes: Vec<f64> = (0..21).map(|i| f * (0.85 + 0.015 * i as f64)).collect();
        let req = CrossPricingRequest::new(m, strikes, 0.5, 1.0);
        let vols = cross_implied_vol_curve(&req).unwrap();
        assert!(vols.iter().all(|v| v.is_finite() && *v > 0.0));
        let prices = price_cross_option(&req).unwrap();
        for w in prices.windows(3) {
            assert!(w[1] < w[0] && w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        }
    }

    #[test]
    fn quanto_adjustment() {
        let a1 = ShiftedMixtureParams::new(vec![1.0], vec![0.2], 0.0, 0.0, 1.0, 1.0).unwrap();
        let a2 = ShiftedMixtureParams::new(vec![1.0], vec![0.1], 0.0, 0.0, 100.0, 1.0).unwrap();
        let m = CrossModel::new(a1, a2, CorrelationSpec::constant(-0.5).unwrap()).unwrap();
        assert_relative_eq!(quanto_drift_correction(&m, 0, 0, 0.5), 0.01, max_relative = 1e-14);
        assert!(matches!(quanto_adjust(&m), Err(Error::Configuration(_))));
        let rates = CrossRates { domestic: 0.001, intermediate: 0.02, foreign: 0.03 };
        let q = quanto_adjust(&m.clone().with_rates(rates)).unwrap();
        assert!(q.quanto_adjusted);
        assert_relative_eq!(q.asset1.drift, -0.01, max_relative = 1e-14);
        assert_relative_eq!(q.asset2.drift, -0.019, max_relative = 1e-14);
        // With β = 0 the product is a domestic forward: E[S₁S₂] = S₁S₂ e^{(r_d − r_f)T}.
        let f = cross_forward(&q, 1.0).unwrap();
        assert_relative_eq!(f, 100.0 * (-0.029_f64).exp(), max_relative = 1e-13);
        assert_eq!(quanto_adjust(&q).unwrap(), q);

        let zero = CrossModel::new(q.asset1.clone(), q.asset2.clone(), CorrelationSpec::constant(0.0).unwrap())
            .unwrap();
        let adjusted = CrossModel { quanto_adjusted: true, ..zero.clone() };
        assert_eq!(scenario_laws(&zero, 0.7).unwrap(), scenario_laws(&adjusted, 0.7).unwrap());
    }

    #[test]
    fn request_validation() {
        let mut req = CrossPricingRequest::new(model(0.1), vec![100.0], 0.6, 1.0);
        assert!(price_cross_option(&req).is_err());
        req.maturity = 0.5;
        req.require_quanto_adjusted = true;
        assert!(matches!(price_cross_option(&req), Err(Error::Configuration(_))));
        req.require_quanto_adjusted = false;
        req.strikes = vec![-1.0];
        assert!(price_cross_option(&req).is_err());
    }

    #[test]
    fn scenario_stats_match_enumeration() {
        let c = CorrelationSpec::scenario(vec![vec![-0.8717, -0.1762], vec![-0.6591, -0.2269]]).unwrap();
        let (l1, l2) = ([0.0274, 0.9726], [0.6575, 0.3425]);
        let (mean, sd) = scenario_correlation_stats(&c, &l1, &l2).unwrap();
        let mut draws = Vec::new();
        for h in 0..2 {
            for k in 0..2 {
                draws.push((l1[h] * l2[k], c.rho(h, k)));
            }
        }
        let m: f64 = draws.iter().map(|(p, r)| p * r).sum();
        let v: f64 = draws.iter().map(|(p, r)| p * (r - m).powi(2)).sum();
        assert_relative_eq!(mean, m, max_relative = 1e-14);
        assert_relative_eq!(sd, v.sqrt(), max_relative = 1e-12);
        let flat = CorrelationSpec::scenario(vec![vec![0.3; 2]; 2]).unwrap();
        let (m, s) = scenario_correlation_stats(&flat, &l1, &l2).unwrap();
        assert_relative_eq!(m, 0.3, max_relative = 1e-14);
        assert!(s < 1e-7);
    }

    #[test]
    fn constant_terminal_correlation_is_damped() {
        for rho in [-0.9, -0.6015, -0.2, 0.0, 0.4, 0.95] {
            let r = terminal_correlation(&model(rho), 0.5).unwrap();
            assert!(r.abs() <= rho.abs() + 1e-12, "rho {rho} -> {r}");
        }
    }

    #[test]
    fn single_precision_pricing_runs() {
        let a1 = ShiftedMixtureParams::<f32>::new(vec![1.0], vec![0.2], 0.0, 0.0, 1.0, 1.0).unwrap();
        let a2 = ShiftedMixtureParams::<f32>::new(vec![1.0], vec![0.1], 0.0, 0.0, 1.0, 1.0).unwrap();
        let m = CrossModel::new(a1, a2, CorrelationSpec::constant(0.0f32).unwrap()).unwrap();
        let p = price_cross_option(&CrossPricingRequest::new(m, vec![1.0f32], 1.0, 1.0)).unwrap()[0];
        let vol = (0.05f32).sqrt();
        let expected = black(1.0f32, 1.0, vol, OptionType::Call);
        assert!((p - expected).abs() < 1e-5);
    }
}
