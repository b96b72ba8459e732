//! Correlation calibration on cross-product option quotes.
//!
//! The objective is the sum of weighted squared relative differences between
//! model and market implied volatilities of options on `S₁ S₂`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{bs_price, bs_stdev_vega, implied_vol, OptionQuoteInputs, OptionType};
use crate::cross::{
    cross_forward, cross_implied_vol_curve, price_cross_option, quanto_adjust, scenario_correlation_stats,
    CrossPricingRequest,
};
use crate::error::{Error, Result};
use crate::montecarlo::{mc_price_cross, sample_mean, simulate_scmd, SimulationConfig};
use crate::multivariate::{CorrelationSpec, CrossModel, CrossRates, MAX_ABS_CORRELATION};
use crate::optimize::{brent_minimize, nelder_mead, NelderMeadOptions};
use crate::smile::{ShiftedMixtureParams, VolQuote};

/// Cross quotes at a single maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSet {
    pub quotes: Vec<VolQuote>,
    pub discount_factor: f64,
}

impl QuoteSet {
    pub fn new(quotes: Vec<VolQuote>, discount_factor: f64) -> Self {
        Self {
            quotes,
            discount_factor,
        }
    }

    pub fn maturity(&self) -> f64 {
        self.quotes.first().map_or(f64::NAN, |q| q.maturity)
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q.strike).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.maturity();
        if self.quotes.is_empty() {
            return Err(Error::InvalidInput("no cross quotes".into()));
        }
        if !(self.discount_factor > 0.0 && self.discount_factor <= 1.0) {
            return Err(Error::InvalidInput("discount factor outside (0, 1]".into()));
        }
        for q in &self.quotes {
            if !(q.strike > 0.0 && q.implied_vol > 0.0 && q.weight >= 0.0) {
                return Err(Error::InvalidInput(format!("invalid cross quote {q:?}")));
            }
            if (q.maturity - t).abs() > 1e-12 {
                return Err(Error::InvalidInput("cross quotes must share one maturity".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    MvmdSemianalytic,
    /// Simply-correlated model priced by simulation with common random
    /// numbers across trial correlations.
    ScmdMonteCarlo(SimulationConfig),
}

#[derive(Debug, Clone)]
pub struct CorrelationFitConfig {
    pub engine: Engine,
    /// When set, every trial model is quanto adjusted with these rates.
    pub rates: Option<CrossRates<f64>>,
    pub grid_points: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for CorrelationFitConfig {
    fn default() -> Self {
        Self {
            engine: Engine::MvmdSemianalytic,
            rates: None,
            grid_points: 21,
            tolerance: 1e-6,
            max_iterations: 200,
            n_starts: 8,
            seed: 7,
            nelder_mead: NelderMeadOptions {
                step: 0.3,
                f_tolerance: 1e-18,
                x_tolerance: 1e-9,
                max_evaluations: 4000,
                restarts: 2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeFit {
    pub strike: f64,
    pub market_vol: f64,
    pub model_vol: f64,
    pub abs_vol_diff: f64,
    pub abs_price_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFitReport {
    pub fitted: CorrelationSpec<f64>,
    pub objective_value: f64,
    pub per_strike: Vec<StrikeFit>,
    pub iterations: usize,
    pub converged: bool,
    /// The optimum sits at the edge of the admissible correlation range.
    pub boundary_solution: bool,
    /// Mean and stdev of the fitted scenario correlations.
    pub scenario_stats: (f64, f64),
    pub warnings: Vec<String>,
}

const FAILED: f64 = 1e6;

/// Model vols plus the vol-equivalent standard error (zero for the
/// semi-analytic engine) at every quote.
struct Evaluation {
    vols: Vec<f64>,
    vol_se: Vec<f64>,
    prices: Vec<f64>,
    forward: f64,
}

struct Problem<'a> {
    asset1: &'a ShiftedMixtureParams<f64>,
    asset2: &'a ShiftedMixtureParams<f64>,
    quotes: &'a QuoteSet,
    cfg: &'a CorrelationFitConfig,
}

impl Problem<'_> {
    fn model(&self, corr: CorrelationSpec<f64>) -> Result<CrossModel<f64>> {
        let m = CrossModel::new(self.asset1.clone(), self.asset2.clone(), corr)?;
        match self.cfg.rates {
            Some(r) => quanto_adjust(&m.with_rates(r)),
            None => Ok(m),
        }
    }

    fn evaluate(&self, corr: CorrelationSpec<f64>) -> Result<Evaluation> {
        let model = self.model(corr)?;
        let t = self.quotes.maturity();
        let df = self.quotes.discount_factor;
        let strikes = self.quotes.strikes();
        match self.cfg.engine {
            Engine::MvmdSemianalytic => {
                let req = CrossPricingRequest::new(model.clone(), strikes.clone(), t, df);
                let vols = cross_implied_vol_curve(&req)?;
                let forward = cross_forward(&model, t)?;
                let prices = strikes
                    .iter()
                    .zip(&vols)
                    .map(|(&k, &v)| otm_price(forward, k, v, t, df))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Evaluation {
                    vol_se: vec![0.0; vols.len()],
                    vols,
                    prices,
                    forward,
                })
            }
            Engine::ScmdMonteCarlo(sim) => {
                let res = simulate_scmd(&model, t, &sim)?;
                let product: Vec<f64> = res.terminal_s1.iter().zip(&res.terminal_s2).map(|(a, b)| a * b).collect();
                let (forward, _) = sample_mean(&product, sim.antithetic)?;
                let mut vols = Vec::with_capacity(strikes.len());
                let mut vol_se = Vec::with_capacity(strikes.len());
                let mut prices = Vec::with_capacity(strikes.len());
                for &k in &strikes {
                    let ty = if k >= forward { OptionType::Call } else { OptionType::Put };
                    let (p, se) = mc_price_cross(&res, &[k], df, ty)?[0];
                    let v = implied_vol(p, forward, k, t, df, ty)?;
                    let vega = bs_stdev_vega(&OptionQuoteInputs {
                        forward,
                        strike: k,
                        term_stdev: v * t.sqrt(),
                        discount_factor: df,
                        option_type: ty,
                    })? * t.sqrt();
                    vols.push(v);
                    vol_se.push(if vega > 0.0 { se / vega } else { f64::INFINITY });
                    prices.push(p);
                }
                Ok(Evaluation {
                    vols,
                    vol_se,
                    prices,
                    forward,
                })
            }
        }
    }

    fn objective(&self, corr: CorrelationSpec<f64>) -> f64 {
        match self.evaluate(corr) {
            Ok(e) => objective_of(&self.quotes.quotes, &e.vols),
            Err(_) => FAILED,
        }
    }

    fn report(
        &self,
        fitted: CorrelationSpec<f64>,
        objective_value: f64,
        iterations: usize,
        converged: bool,
        boundary_solution: bool,
        mut warnings: Vec<String>,
    ) -> Result<CorrelationFitReport> {
        let e = self.evaluate(fitted.clone())?;
        let t = self.quotes.maturity();
        let df = self.quotes.discount_factor;
        let per_strike = self
            .quotes
            .quotes
            .iter()
            .zip(e.vols.iter().zip(&e.prices))
            .map(|(q, (&v, &p))| {
                let market = otm_price(e.forward, q.strike, q.implied_vol, t, df)?;
                Ok(StrikeFit {
                    strike: q.strike,
                    market_vol: q.implied_vol,
                    model_vol: v,
                    abs_vol_diff: (v - q.implied_vol).abs(),
                    abs_price_diff: (p - market).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario_stats =
            scenario_correlation_stats(&fitted, &self.asset1.weights, &self.asset2.weights)?;
        if boundary_solution {
            warnings.push(format!(
                "no interior minimum: correlation pinned near +/-{MAX_ABS_CORRELATION}"
            ));
        }
        Ok(CorrelationFitReport {
            fitted,
            objective_value,
            per_strike,
            iterations,
            converged,
            boundary_solution,
            scenario_stats,
            warnings,
        })
    }
}

fn otm_price(forward: f64, strike: f64, vol: f64, t: f64, df: f64) -> Result<f64> {
    bs_price(&OptionQuoteInputs {
        forward,
        strike,
        term_stdev: vol * t.sqrt(),
        discount_factor: df,
        option_type: if strike >= forward { OptionType::Call } else { OptionType::Put },
    })
}

fn objective_of(quotes: &[VolQuote], vols: &[f64]) -> f64 {
    quotes
        .iter()
        .zip(vols)
        .map(|(q, v)| {
            let r = (v - q.implied_vol) / q.implied_vol;
            q.weight * r * r
        })
        .sum()
}

fn check_inputs(
    asset1: &ShiftedMixtureParams<f64>,
    asset2: &ShiftedMixtureParams<f64>,
    quotes: &QuoteSet,
) -> Result<()> {
    quotes.validate()?;
    let t = quotes.maturity();
    for (name, p) in [("asset 1", asset1), ("asset 2", asset2)] {
        p.validate()?;
        if t > p.reference_maturity * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "{name} is calibrated to {} but the quotes mature at {t}",
                p.reference_maturity
            )));
        }
    }
    Ok(())
}

/// Scalar implied correlation: a coarse grid on `[−0.99, 0.99]` brackets the
/// minimum, which Brent's method then refines inside `(−0.999, 0.999)`.
pub fn calibrate_implied_correlation(
    asset1: &ShiftedMixtureParams<f64>,
    asset2: &ShiftedMixtureParams<f64>,
    quotes: &QuoteSet,
    cfg: &CorrelationFitConfig,
) -> Result<CorrelationFitReport> {
    check_inputs(asset1, asset2, quotes)?;
    if let Engine::ScmdMonteCarlo(sim) = cfg.engine {
        sim.validate()?;
    }
    let problem = Problem {
        asset1,
        asset2,
        quotes,
        cfg,
    };
    let f = |rho: f64| match CorrelationSpec::constant(rho) {
        Ok(c) => problem.objective(c),
        Err(_) => FAILED,
    };

    let n = cfg.grid_points.max(3);
    let grid: Vec<f64> = (0..n).map(|i| -0.99 + 1.98 * i as f64 / (n - 1) as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&r| f(r)).collect();
    let mut cache: HashMap<u64, f64> = grid.iter().zip(&values).map(|(r, v)| (r.to_bits(), *v)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if values[best] >= FAILED {
        return Err(Error::Integration(
            "model implied volatilities failed at every grid correlation".into(),
        ));
    }

    let edge = MAX_ABS_CORRELATION - 1e-9;
    let lo = if best == 0 { -edge } else { grid[best - 1] };
    let hi = if best == n - 1 { edge } else { grid[best + 1] };
    let mut evaluations = 0;
    let refined = brent_minimize(
        |r| {
            evaluations += 1;
            *cache.entry(r.to_bits()).or_insert_with(|| f(r))
        },
        lo,
        hi,
        cfg.tolerance,
        cfg.max_iterations,
    );
    let (rho, value) = if refined.value <= values[best] {
        (refined.x[0], refined.value)
    } else {
        (grid[best], values[best])
    };

    let mut warnings = Vec::new();
    if let Engine::ScmdMonteCarlo(_) = cfg.engine {
        let variation = values.iter().copied().filter(|v| *v < FAILED).fold(f64::NEG_INFINITY, f64::max) - value;
        let e = problem.evaluate(CorrelationSpec::constant(rho)?)?;
        let noise: f64 = quotes
            .quotes
            .iter()
            .zip(e.vols.iter().zip(&e.vol_se))
            .map(|(q, (v, se))| {
                let r = (v - q.implied_vol) / q.implied_vol;
                let d = se / q.implied_vol;
                q.weight * (2.0 * r.abs() * d + d * d)
            })
            .sum();
        if variation < 3.0 * noise {
            return Err(Error::NoisyObjective { variation, noise });
        }
        warnings.push(format!("Monte Carlo objective noise about {noise:.3e}"));
    }

    let boundary = rho.abs() > MAX_ABS_CORRELATION - 1e-4;
    problem.report(
        CorrelationSpec::constant(rho)?,
        value,
        n + evaluations,
        refined.converged && !boundary,
        boundary,
        warnings,
    )
}

/// Scenario correlation matrix fit, entries mapped through `0.999·tanh(u)`.
///
/// The first start is the scalar implied correlation broadcast to every
/// scenario, so the fit is never worse than the scalar one.
pub fn calibrate_random_correlation(
    asset1: &ShiftedMixtureParams<f64>,
    asset2: &ShiftedMixtureParams<f64>,
    quotes: &QuoteSet,
    cfg: &CorrelationFitConfig,
) -> Result<CorrelationFitReport> {
    check_inputs(asset1, asset2, quotes)?;
    let scalar_cfg = CorrelationFitConfig {
        engine: Engine::MvmdSemianalytic,
        ..cfg.clone()
    };
    let problem = Problem {
        asset1,
        asset2,
        quotes,
        cfg: &scalar_cfg,
    };
    let (n1, n2) = (asset1.n_components(), asset2.n_components());
    let mut warnings = Vec::new();
    if quotes.quotes.len() < n1 * n2 {
        warnings.push(format!(
            "{} quotes for {} scenario correlations: the matrix is not identifiable",
            quotes.quotes.len(),
            n1 * n2
        ));
    }

    let scalar = calibrate_implied_correlation(asset1, asset2, quotes, &scalar_cfg)?;
    let rho0 = match scalar.fitted {
        CorrelationSpec::Constant { rho } => rho,
        CorrelationSpec::Scenario { .. } => unreachable!("scalar fit returns a constant"),
    };

    let to_spec = |u: &[f64]| -> Result<CorrelationSpec<f64>> {
        let matrix = u
            .chunks(n2)
            .map(|row| row.iter().map(|v| MAX_ABS_CORRELATION * v.tanh()).collect())
            .collect();
        CorrelationSpec::scenario(matrix)
    };
    let inverse = |r: f64| (r / MAX_ABS_CORRELATION).clamp(-0.999_999, 0.999_999).atanh();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![vec![inverse(rho0); n1 * n2]];
    while starts.len() < cfg.n_starts.max(1) {
        starts.push((0..n1 * n2).map(|_| inverse(rng.random_range(-0.9..0.9))).collect());
    }

    let runs: Vec<_> = starts
        .par_iter()
        .map(|s| {
            nelder_mead(
                |u| match to_spec(u) {
                    Ok(c) => problem.objective(c),
                    Err(_) => FAILED,
                },
                s,
                &cfg.nelder_mead,
            )
        })
        .collect();
    let iterations = runs.iter().map(|r| r.evaluations).sum::<usize>() + scalar.iterations;
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");

    let boundary = best.x.iter().any(|u| MAX_ABS_CORRELATION * u.tanh().abs() > MAX_ABS_CORRELATION - 1e-4);
    let (fitted, value) = if best.value <= scalar.objective_value {
        (to_spec(&best.x)?, best.value)
    } else {
        (to_spec(&starts[0])?, scalar.objective_value)
    };
    problem.report(fitted, value, iterations, best.converged, boundary, warnings)
}

/// Implied-volatility curve of the cross under a given correlation: the
/// extrapolation step once the correlation is known.
pub fn extrapolate_cross_smile(
    asset1: &ShiftedMixtureParams<f64>,
    asset2: &ShiftedMixtureParams<f64>,
    corr: &CorrelationSpec<f64>,
    strikes: &[f64],
    maturity: f64,
    discount_factor: f64,
) -> Result<Vec<f64>> {
    let model = CrossModel::new(asset1.clone(), asset2.clone(), corr.clone())?;
    let req = CrossPricingRequest::new(model, strikes.to_vec(), maturity, discount_factor);
    cross_implied_vol_curve(&req)
}

/// Discounted cross call prices under a given correlation.
pub fn cross_call_prices(
    asset1: &ShiftedMixtureParams<f64>,
    asset2: &ShiftedMixtureParams<f64>,
    corr: &CorrelationSpec<f64>,
    strikes: &[f64],
    maturity: f64,
    discount_factor: f64,
) -> Result<Vec<f64>> {
    let model = CrossModel::new(asset1.clone(), asset2.clone(), corr.clone())?;
    price_cross_option(&CrossPricingRequest::new(model, strikes.to_vec(), maturity, discount_factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::Scheme;

    fn usd_eur() -> ShiftedMixtureParams<f64> {
        ShiftedMixtureParams::new(vec![0.1402, 0.8598], vec![0.1952, 0.0709], 0.00068, 0.0, 0.878, 0.5).unwrap()
    }

    fn eur_jpy() -> ShiftedMixtureParams<f64> {
        ShiftedMixtureParams::new(vec![0.2735, 0.7265], vec![0.1184, 0.0962], 0.9752, 0.0, 135.44, 0.5).unwrap()
    }

    fn synthetic(corr: &CorrelationSpec<f64>, a1: &ShiftedMixtureParams<f64>, a2: &ShiftedMixtureParams<f64>) -> QuoteSet {
        let m = CrossModel::new(a1.clone(), a2.clone(), corr.clone()).unwrap();
        let f = cross_forward(&m, 0.5).unwrap();
        let strikes: Vec<f64> = [0.92, 0.96, 1.0, 1.04, 1.08].iter().map(|x| x * f).collect();
        let vols = extrapolate_cross_smile(a1, a2, corr, &strikes, 0.5, 1.0).unwrap();
        QuoteSet::new(
            strikes.iter().zip(vols).map(|(&k, v)| VolQuote::new(k, 0.5, v)).collect(),
            1.0,
        )
    }

    #[test]
    fn scalar_round_trip() {
        let target = CorrelationSpec::constant(-0.6015).unwrap();
        let q = synthetic(&target, &usd_eur(), &eur_jpy());
        let fit = calibrate_implied_correlation(&usd_eur(), &eur_jpy(), &q, &CorrelationFitConfig::default()).unwrap();
        let CorrelationSpec::Constant { rho } = fit.fitted else { panic!() };
        assert!((rho + 0.6015).abs() < 1e-4, "rho {rho}");
        assert!(fit.converged && !fit.boundary_solution);
        assert!(fit.per_strike.iter().all(|s| s.abs_vol_diff < 1e-6 && s.abs_price_diff >= 0.0));
    }

    #[test]
    fn boundary_warning_when_quotes_are_unreachable() {
        let f = cross_forward(&CrossModel::new(usd_eur(), eur_jpy(), CorrelationSpec::constant(0.0).unwrap()).unwrap(), 0.5)
            .unwrap();
        let q = QuoteSet::new(vec![VolQuote::new(f, 0.5, 0.5)], 1.0);
        let fit = calibrate_implied_correlation(&usd_eur(), &eur_jpy(), &q, &CorrelationFitConfig::default()).unwrap();
        assert!(fit.boundary_solution && !fit.converged);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn random_correlation_reproduces_curve() {
        let target = CorrelationSpec::scenario(vec![vec![-0.8717, -0.1762], vec![-0.6591, -0.2269]]).unwrap();
        let q = synthetic(&target, &usd_eur(), &eur_jpy());
        let cfg = CorrelationFitConfig { n_starts: 4, ..Default::default() };
        let fit = calibrate_random_correlation(&usd_eur(), &eur_jpy(), &q, &cfg).unwrap();
        assert!(fit.objective_value <= 1e-8, "objective {}", fit.objective_value);
    }

    #[test]
    fn scmd_engine_is_deterministic_and_recovers_rho() {
        let a1 = ShiftedMixtureParams::new(vec![1.0], vec![0.12], 0.0, 0.0, 1.0, 0.5).unwrap();
        let a2 = ShiftedMixtureParams::new(vec![1.0], vec![0.09], 0.0, 0.0, 100.0, 0.5).unwrap();
        let target = CorrelationSpec::constant(-0.5).unwrap();
        let q = synthetic(&target, &a1, &a2);
        let sim = SimulationConfig { n_paths: 20_000, n_steps: 4, seed: 3, scheme: Scheme::ScmdEuler, antithetic: true };
        let cfg = CorrelationFitConfig { engine: Engine::ScmdMonteCarlo(sim), ..Default::default() };
        let a = calibrate_implied_correlation(&a1, &a2, &q, &cfg).unwrap();
        let b = calibrate_implied_correlation(&a1, &a2, &q, &cfg).unwrap();
        assert_eq!(a.fitted, b.fitted);
        let CorrelationSpec::Constant { rho } = a.fitted else { panic!() };
        assert!((rho + 0.5).abs() < 0.05, "rho {rho}");
    }

    #[test]
    fn rejects_quotes_beyond_calibration_horizon() {
        let q = QuoteSet::new(vec![VolQuote::new(118.0, 0.75, 0.1)], 1.0);
        assert!(calibrate_implied_correlation(&usd_eur(), &eur_jpy(), &q, &CorrelationFitConfig::default()).is_err());
    }
}
