//! Black–Scholes primitives in forward-measure form, the shifted-lognormal
//! variant, and implied-volatility inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NoSolutionKind, Result};
use crate::scalar::{lit, norm_cdf, norm_pdf, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionType {
    Call,
    Put,
}

impl OptionType {
    /// Out-of-the-money side for a strike relative to the forward.
    pub fn otm(forward: f64, strike: f64) -> Self {
        if strike >= forward {
            OptionType::Call
        } else {
            OptionType::Put
        }
    }
}

/// Inputs to a forward-measure Black–Scholes valuation.
///
/// `term_stdev` is the total volatility `sqrt(∫σ²dt)`, not an annualized vol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionQuoteInputs<T> {
    pub forward: T,
    pub strike: T,
    pub term_stdev: T,
    pub discount_factor: T,
    pub option_type: OptionType,
}

impl<T: Scalar> OptionQuoteInputs<T> {
    pub fn call(forward: T, strike: T, term_stdev: T, discount_factor: T) -> Self {
        Self {
            forward,
            strike,
            term_stdev,
            discount_factor,
            option_type: OptionType::Call,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.forward, self.strike, self.term_stdev, self.discount_factor]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite option input".into()));
        }
        if self.forward <= T::zero() || self.strike <= T::zero() {
            return Err(Error::InvalidInput(format!(
                "forward ({}) and strike ({}) must be positive",
                self.forward, self.strike
            )));
        }
        if self.term_stdev < T::zero() {
            return Err(Error::InvalidInput("negative term stdev".into()));
        }
        if self.discount_factor <= T::zero() || self.discount_factor > T::one() {
            return Err(Error::InvalidInput(format!(
                "discount factor {} outside (0, 1]",
                self.discount_factor
            )));
        }
        Ok(())
    }
}

/// Undiscounted Black value without validation. Handles `term_stdev == 0`.
#[inline]
pub(crate) fn black<T: Scalar>(forward: T, strike: T, term_stdev: T, ty: OptionType) -> T {
    let intrinsic = match ty {
        OptionType::Call => (forward - strike).max(T::zero()),
        OptionType::Put => (strike - forward).max(T::zero()),
    };
    if term_stdev <= T::zero() {
        return intrinsic;
    }
    let half: T = lit(0.5);
    let d1 = (forward / strike).ln() / term_stdev + half * term_stdev;
    let d2 = d1 - term_stdev;
    let v = match ty {
        OptionType::Call => forward * norm_cdf(d1) - strike * norm_cdf(d2),
        OptionType::Put => strike * norm_cdf(-d2) - forward * norm_cdf(-d1),
    };
    v.max(intrinsic)
}

/// Discounted Black–Scholes price `df · E[(F e^{G − v²/2} − K)⁺]` (or the put).
pub fn bs_price<T: Scalar>(q: &OptionQuoteInputs<T>) -> Result<T> {
    q.validate()?;
    Ok(q.discount_factor * black(q.forward, q.strike, q.term_stdev, q.option_type))
}

/// Sensitivity of the discounted price to `term_stdev`.
pub fn bs_stdev_vega<T: Scalar>(q: &OptionQuoteInputs<T>) -> Result<T> {
    q.validate()?;
    if q.term_stdev <= T::zero() {
        return Ok(T::zero());
    }
    let half: T = lit(0.5);
    let d1 = (q.forward / q.strike).ln() / q.term_stdev + half * q.term_stdev;
    Ok(q.discount_factor * q.forward * norm_pdf(d1))
}

/// Option on an asset following `S = X + β e^{μt}` with `X` lognormal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedBsInputs<T> {
    pub spot: T,
    pub strike: T,
    /// Total stdev `V(T)` of the lognormal component.
    pub term_stdev: T,
    pub maturity: T,
    pub drift: T,
    pub shift: T,
    pub discount_factor: T,
    pub option_type: OptionType,
}

impl<T: Scalar> ShiftedBsInputs<T> {
    pub fn effective_strike(&self) -> T {
        self.strike - self.shift * (self.drift * self.maturity).exp()
    }

    pub fn effective_forward(&self) -> T {
        (self.spot - self.shift) * (self.drift * self.maturity).exp()
    }
}

pub fn shifted_bs_price<T: Scalar>(p: &ShiftedBsInputs<T>) -> Result<T> {
    if !(p.maturity.is_finite() && p.drift.is_finite() && p.shift.is_finite()) {
        return Err(Error::InvalidInput("non-finite shifted option input".into()));
    }
    if p.maturity < T::zero() {
        return Err(Error::InvalidInput("negative maturity".into()));
    }
    if p.spot - p.shift <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "effective spot {} must be positive",
            p.spot - p.shift
        )));
    }
    let k_eff = p.effective_strike();
    if !(k_eff > T::zero()) {
        return Err(Error::ShiftDomain {
            effective_strike: to_f64(k_eff),
        });
    }
    bs_price(&OptionQuoteInputs {
        forward: p.effective_forward(),
        strike: k_eff,
        term_stdev: p.term_stdev,
        discount_factor: p.discount_factor,
        option_type: p.option_type,
    })
}

const VOL_LOWER: f64 = 1e-6;
const VOL_UPPER: f64 = 5.0;
const VOL_TOLERANCE: f64 = 1e-12;

/// Annualized Black volatility reproducing `price`.
///
/// Safeguarded Newton iteration inside a bisection bracket that starts at
/// `[1e-6, 5]` and is widened only when the price lies outside it.
pub fn implied_vol<T: Scalar>(
    price: T,
    forward: T,
    strike: T,
    maturity: T,
    discount_factor: T,
    option_type: OptionType,
) -> Result<T> {
    if !price.is_finite() || !maturity.is_finite() || maturity <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "implied vol needs finite price and positive maturity (price {price}, T {maturity})"
        )));
    }
    let template = OptionQuoteInputs {
        forward,
        strike,
        term_stdev: T::zero(),
        discount_factor,
        option_type,
    };
    template.validate()?;

    let (lower, upper) = match option_type {
        OptionType::Call => ((forward - strike).max(T::zero()), forward),
        OptionType::Put => ((strike - forward).max(T::zero()), strike),
    };
    let lower = discount_factor * lower;
    let upper = discount_factor * upper;
    if price <= lower {
        return Err(Error::NoSolution {
            kind: NoSolutionKind::BelowIntrinsic,
            price: to_f64(price),
            bound: to_f64(lower),
        });
    }
    if price >= upper {
        return Err(Error::NoSolution {
            kind: NoSolutionKind::AboveUpperBound,
            price: to_f64(price),
            bound: to_f64(upper),
        });
    }

    let sqrt_t = maturity.sqrt();
    let value = |vol: T| discount_factor * black(forward, strike, vol * sqrt_t, option_type);
    let vega = |vol: T| {
        let s = vol * sqrt_t;
        let d1 = (forward / strike).ln() / s + lit::<T>(0.5) * s;
        discount_factor * forward * norm_pdf(d1) * sqrt_t
    };

    let mut lo: T = lit(VOL_LOWER);
    let mut hi: T = lit(VOL_UPPER);
    if value(lo) > price {
        lo = T::zero();
    }
    let mut widen = 0;
    while value(hi) < price {
        lo = hi;
        hi = hi + hi;
        widen += 1;
        if widen > 12 {
            return Err(Error::NoSolution {
                kind: NoSolutionKind::AboveUpperBound,
                price: to_f64(price),
                bound: to_f64(value(hi)),
            });
        }
    }

    let tol: T = lit::<T>(VOL_TOLERANCE).max(T::epsilon() * lit(16.0));
    let mut vol = lit::<T>(0.5) * (lo + hi);
    for _ in 0..200 {
        let diff = value(vol) - price;
        if diff == T::zero() {
            return Ok(vol);
        }
        if diff > T::zero() {
            hi = vol;
        } else {
            lo = vol;
        }
        let v = vega(vol);
        let newton = vol - diff / v;
        let next = if v > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            lit::<T>(0.5) * (lo + hi)
        };
        let step = (next - vol).abs();
        vol = next;
        if step <= tol || hi - lo <= tol {
            break;
        }
    }
    // A final Newton polish from the bracketed estimate.
    for _ in 0..3 {
        let v = vega(vol);
        if !(v > T::zero()) {
            break;
        }
        let next = vol - (value(vol) - price) / v;
        if !(next > lo && next < hi) {
            break;
        }
        vol = next;
    }
    Ok(vol)
}
