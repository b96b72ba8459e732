use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mixture_option_price, model_implied_vol, ShiftedMixtureParams, DEFAULT_EPSILON};
use crate::analytic::{bs_price, implied_vol, OptionQuoteInputs, OptionType};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};

fn unit_weight() -> f64 {
    1.0
}

/// One market implied-volatility quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    pub strike: f64,
    pub maturity: f64,
    pub implied_vol: f64,
    /// Weight in the calibration objective.
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

impl VolQuote {
    pub fn new(strike: f64, maturity: f64, implied_vol: f64) -> Self {
        Self {
            strike,
            maturity,
            implied_vol,
            weight: 1.0,
        }
    }
}

/// Market context of a single-asset smile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileMarket {
    pub spot: f64,
    pub drift: f64,
    pub discount_factor: f64,
}

#[derive(Debug, Clone)]
pub struct SmileCalibrationConfig {
    pub n_starts: usize,
    pub seed: u64,
    /// Hold the shift at this value instead of fitting it.
    pub fixed_shift: Option<f64>,
    pub epsilon_floor: f64,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for SmileCalibrationConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            seed: 0x5eed,
            fixed_shift: None,
            epsilon_floor: DEFAULT_EPSILON,
            nelder_mead: NelderMeadOptions {
                step: 0.3,
                f_tolerance: 1e-16,
                x_tolerance: 1e-11,
                max_evaluations: 12_000,
                restarts: 3,
            },
        }
    }
}

/// Per-quote fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteFit {
    pub strike: f64,
    pub market_vol: f64,
    pub model_vol: f64,
    pub abs_vol_diff: f64,
    pub abs_price_diff: f64,
    /// The market quote breaks call-price monotonicity or convexity.
    pub arbitrage_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileFitReport {
    pub params: ShiftedMixtureParams<f64>,
    pub objective: f64,
    pub vol_rmse: f64,
    pub per_quote: Vec<QuoteFit>,
    pub converged: bool,
    pub evaluations: usize,
}

const INFEASIBLE: f64 = 1e6;

struct Layout {
    n: usize,
    free_shift: bool,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.n - 1 + usize::from(self.free_shift)
    }

    fn decode(
        &self,
        x: &[f64],
        market: &SmileMarket,
        maturity: f64,
        cfg: &SmileCalibrationConfig,
    ) -> (Vec<f64>, Vec<f64>, f64) {
        let vols: Vec<f64> = x[..self.n].iter().map(|v| v.exp()).collect();
        let mut logits = vec![0.0];
        logits.extend_from_slice(&x[self.n..2 * self.n - 1]);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let weights = exps.iter().map(|e| e / total).collect();
        let shift = match cfg.fixed_shift {
            Some(b) => b,
            None => x[2 * self.n - 1] * market.spot,
        };
        let _ = maturity;
        (weights, vols, shift)
    }
}

fn build_params(
    weights: Vec<f64>,
    vols: Vec<f64>,
    shift: f64,
    market: &SmileMarket,
    maturity: f64,
    epsilon: f64,
) -> Result<ShiftedMixtureParams<f64>> {
    let p = ShiftedMixtureParams {
        weights,
        term_vols: vols,
        shift,
        drift: market.drift,
        spot: market.spot,
        reference_maturity: maturity,
        epsilon_floor: epsilon.min(0.5 * maturity),
    };
    p.validate()?;
    Ok(p)
}

fn objective(
    params: &ShiftedMixtureParams<f64>,
    quotes: &[VolQuote],
    market: &SmileMarket,
    maturity: f64,
) -> f64 {
    let growth = (market.drift * maturity).exp();
    if params.spot - params.shift <= 0.0 {
        return INFEASIBLE;
    }
    let mut violation = 0.0;
    for q in quotes {
        let k_eff = q.strike - params.shift * growth;
        if k_eff <= 0.0 {
            violation += 1.0 - k_eff / q.strike;
        }
    }
    if violation > 0.0 {
        return INFEASIBLE * (1.0 + violation);
    }
    let mut total = 0.0;
    for q in quotes.iter().filter(|q| q.weight > 0.0) {
        match model_implied_vol(params, q.strike, maturity, market.discount_factor) {
            Ok(v) => {
                let r = (v - q.implied_vol) / q.implied_vol;
                total += q.weight * r * r;
            }
            Err(_) => total += 1e2,
        }
    }
    total
}

fn flag_arbitrage(quotes: &[VolQuote], forward: f64, df: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..quotes.len()).collect();
    order.sort_by(|&a, &b| quotes[a].strike.total_cmp(&quotes[b].strike));
    let prices: Vec<f64> = order
        .iter()
        .map(|&i| {
            let q = quotes[i];
            bs_price(&OptionQuoteInputs::call(
                forward,
                q.strike,
                q.implied_vol * q.maturity.sqrt(),
                df,
            ))
            .unwrap_or(f64::NAN)
        })
        .collect();
    let mut flags = vec![false; quotes.len()];
    let tol = 1e-12 * forward;
    for j in 1..order.len() {
        let slope = (prices[j] - prices[j - 1]) / (quotes[order[j]].strike - quotes[order[j - 1]].strike);
        // call slopes must lie in [−df, 0]
        if prices[j] > prices[j - 1] + tol || slope < -df - 1e-12 || !prices[j].is_finite() {
            flags[order[j]] = true;
        }
    }
    for j in 1..order.len().saturating_sub(1) {
        let (k0, k1, k2) = (
            quotes[order[j - 1]].strike,
            quotes[order[j]].strike,
            quotes[order[j + 1]].strike,
        );
        let left = (prices[j] - prices[j - 1]) / (k1 - k0);
        let right = (prices[j + 1] - prices[j]) / (k2 - k1);
        if right < left - 1e-10 {
            flags[order[j]] = true;
        }
    }
    flags
}

/// Fit a shifted mixture to one maturity slice by minimizing the weighted
/// squared relative implied-volatility error.
pub fn calibrate_smile(
    quotes: &[VolQuote],
    n_components: usize,
    market: &SmileMarket,
    cfg: &SmileCalibrationConfig,
) -> Result<SmileFitReport> {
    if quotes.is_empty() {
        return Err(Error::InvalidInput("no quotes to calibrate".into()));
    }
    if n_components == 0 {
        return Err(Error::InvalidInput("need at least one component".into()));
    }
    if !(market.spot > 0.0 && market.discount_factor > 0.0 && market.discount_factor <= 1.0) {
        return Err(Error::InvalidInput("invalid smile market data".into()));
    }
    let maturity = quotes[0].maturity;
    for q in quotes {
        if !(q.strike > 0.0 && q.implied_vol > 0.0 && q.weight >= 0.0 && q.maturity > 0.0) {
            return Err(Error::InvalidInput(format!("invalid quote {q:?}")));
        }
        if (q.maturity - maturity).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "all quotes must share one maturity".into(),
            ));
        }
    }
    if quotes.iter().all(|q| q.weight == 0.0) {
        return Err(Error::InvalidInput("all quote weights are zero".into()));
    }

    let forward = market.spot * (market.drift * maturity).exp();
    let layout = Layout {
        n: n_components,
        free_shift: cfg.fixed_shift.is_none(),
    };
    let atm_vol = quotes
        .iter()
        .filter(|q| q.weight > 0.0)
        .min_by(|a, b| (a.strike - forward).abs().total_cmp(&(b.strike - forward).abs()))
        .map(|q| q.implied_vol)
        .unwrap_or(quotes[0].implied_vol);

    let starts = initial_points(quotes, &layout, market, maturity, cfg, atm_vol);

    let run = |start: &Vec<f64>| {
        let f = |x: &[f64]| {
            let (w, v, b) = layout.decode(x, market, maturity, cfg);
            match build_params(w, v, b, market, maturity, cfg.epsilon_floor) {
                Ok(p) => objective(&p, quotes, market, maturity),
                Err(_) => INFEASIBLE,
            }
        };
        nelder_mead(f, start, &cfg.nelder_mead)
    };
    let results: Vec<_> = starts.par_iter().map(run).collect();
    let evaluations = results.iter().map(|m| m.evaluations).sum();
    let best = results
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");

    let (w, v, b) = layout.decode(&best.x, market, maturity, cfg);
    let mut comps: Vec<(f64, f64)> = w.into_iter().zip(v).collect();
    comps.sort_by(|a, b| b.1.total_cmp(&a.1));
    let params = build_params(
        comps.iter().map(|c| c.0).collect(),
        comps.iter().map(|c| c.1).collect(),
        b,
        market,
        maturity,
        cfg.epsilon_floor,
    )?;

    let flags = flag_arbitrage(quotes, forward, market.discount_factor);
    let mut per_quote = Vec::with_capacity(quotes.len());
    let mut sq = 0.0;
    let mut counted = 0usize;
    for (q, flag) in quotes.iter().zip(flags) {
        let model_vol = model_implied_vol(&params, q.strike, maturity, market.discount_factor)
            .unwrap_or(f64::NAN);
        let model_price = mixture_option_price(
            &params,
            q.strike,
            maturity,
            market.discount_factor,
            OptionType::Call,
        )
        .unwrap_or(f64::NAN);
        let market_price = bs_price(&OptionQuoteInputs::call(
            forward,
            q.strike,
            q.implied_vol * maturity.sqrt(),
            market.discount_factor,
        ))?;
        if q.weight > 0.0 {
            sq += (model_vol - q.implied_vol).powi(2);
            counted += 1;
        }
        per_quote.push(QuoteFit {
            strike: q.strike,
            market_vol: q.implied_vol,
            model_vol,
            abs_vol_diff: (model_vol - q.implied_vol).abs(),
            abs_price_diff: (model_price - market_price).abs(),
            arbitrage_flag: flag,
        });
    }

    Ok(SmileFitReport {
        params,
        objective: best.value,
        vol_rmse: (sq / counted as f64).sqrt(),
        per_quote,
        converged: best.converged && best.value < INFEASIBLE,
        evaluations,
    })
}

fn initial_points(
    quotes: &[VolQuote],
    layout: &Layout,
    market: &SmileMarket,
    maturity: f64,
    cfg: &SmileCalibrationConfig,
    atm_vol: f64,
) -> Vec<Vec<f64>> {
    let n = layout.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = Vec::with_capacity(cfg.n_starts.max(1));

    // Deterministic start: vols spread around the ATM level, equal weights.
    let mut x0 = Vec::with_capacity(layout.len());
    if n == 1 {
        let growth = (market.drift * maturity).exp();
        let shift = cfg.fixed_shift.unwrap_or(0.0);
        let fwd = (market.spot - shift) * growth;
        let (mut acc, mut wsum) = (0.0, 0.0);
        for q in quotes.iter().filter(|q| q.weight > 0.0) {
            let k_eff = q.strike - shift * growth;
            let price = OptionQuoteInputs::call(market.spot * growth, q.strike, q.implied_vol * maturity.sqrt(), 1.0);
            let shifted = bs_price(&price)
                .ok()
                .filter(|_| k_eff > 0.0 && fwd > 0.0)
                .and_then(|p| implied_vol(p, fwd, k_eff, maturity, 1.0, OptionType::Call).ok());
            if let Some(v) = shifted {
                acc += q.weight * v.ln();
                wsum += q.weight;
            }
        }
        x0.push(if wsum > 0.0 { acc / wsum } else { atm_vol.ln() });
    } else {
        for k in 0..n {
            let spread = 1.6 - 1.0 * k as f64 / (n - 1) as f64;
            x0.push((atm_vol * spread).ln());
        }
        x0.extend(std::iter::repeat_n(0.0, n - 1));
    }
    if layout.free_shift {
        x0.push(0.0);
    }
    starts.push(x0);

    while starts.len() < cfg.n_starts.max(1) {
        let mut x = Vec::with_capacity(layout.len());
        for _ in 0..n {
            x.push((atm_vol * rng.random_range(-0.9..0.9_f64).exp()).ln());
        }
        for _ in 0..n - 1 {
            x.push(rng.sample::<f64, _>(StandardNormal));
        }
        if layout.free_shift {
            x.push(rng.random_range(-0.02..0.02));
        }
        starts.push(x);
    }
    starts
}
