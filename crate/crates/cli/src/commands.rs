use std::path::{Path, PathBuf};

use mixture_dynamics::calibration::{
    calibrate_implied_correlation, calibrate_random_correlation, extrapolate_cross_smile, cross_call_prices,
    CorrelationFitConfig, CorrelationFitReport, Engine, QuoteSet,
};
use mixture_dynamics::cross::{cross_forward, cross_implied_vol_curve, cross_moments, price_cross_option, quanto_adjust, terminal_correlation};
use mixture_dynamics::montecarlo::{
    default_steps, estimate_terminal_correlation, sample_mean, simulate as run_simulation, write_dump, Scheme, SimulationConfig,
};
use mixture_dynamics::smile::{calibrate_smile as fit_smile, SmileCalibrationConfig, SmileMarket};
use mixture_dynamics::{Correlation, CrossRequest, MixtureParams, OptionType, PairModel, PairRates};
use serde::Serialize;

use crate::io::{
    emit, fmt12, load_correlation, parse_list, parse_matrix, to_json, warn, MarketFile, ParamsFile, Table,
    SCHEMA_VERSION,
};
use crate::{
    CalibrateSmileArgs, CliError, CorrArgs, CorrSource, EngineArg, ExtrapolateArgs, ImpliedCorrArgs, PairArgs,
    PriceCrossArgs, SchemeArg, SimulateArgs,
};

fn input(msg: impl std::fmt::Display) -> CliError {
    CliError::Input(msg.to_string())
}

pub fn calibrate_smile(a: &CalibrateSmileArgs) -> Result<(), CliError> {
    let market = MarketFile::load(&a.input)?;
    let (t, quotes) = market.slice(a.maturity)?;
    let (rd, rf) = market.rates();
    let smile_market = SmileMarket {
        spot: market.spot,
        drift: rd - rf,
        discount_factor: (-rd * t).exp(),
    };
    let cfg = SmileCalibrationConfig {
        n_starts: a.starts,
        seed: a.seed,
        fixed_shift: a.fixed_shift,
        ..Default::default()
    };
    let report = fit_smile(&quotes, a.components, &smile_market, &cfg)?;

    let params = ParamsFile {
        schema_version: SCHEMA_VERSION,
        asset_id: market.asset_id.clone(),
        params: report.params.clone(),
    };
    emit(Some(&a.out), &to_json(&params))?;
    let mut table = Table::new(
        "mvmd-smile-fit",
        &["strike", "market_vol", "model_vol", "abs_vol_diff", "abs_price_diff", "arbitrage_flag"],
    );
    for q in &report.per_quote {
        table.push(vec![
            fmt12(q.strike),
            fmt12(q.market_vol),
            fmt12(q.model_vol),
            fmt12(q.abs_vol_diff),
            fmt12(q.abs_price_diff),
            q.arbitrage_flag.to_string(),
        ]);
    }
    let table_path = a.fit_table.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    emit(Some(&table_path), &table.render())?;
    eprintln!(
        "{}: {} components at T={}, vol RMSE {}",
        market.asset_id,
        a.components,
        fmt12(t),
        fmt12(report.vol_rmse)
    );
    if report.per_quote.iter().any(|q| q.arbitrage_flag) {
        warn("input quotes violate static no-arbitrage; see arbitrage_flag in the fit table");
    }
    if !report.converged {
        return Err(CliError::NotConverged("smile calibration did not converge".into()));
    }
    Ok(())
}

fn load_pair(p: &PairArgs) -> Result<(MixtureParams, MixtureParams), CliError> {
    Ok((ParamsFile::load(&p.asset1)?.params, ParamsFile::load(&p.asset2)?.params))
}

fn parse_rates(s: &Option<String>) -> Result<Option<PairRates>, CliError> {
    let Some(s) = s else { return Ok(None) };
    match parse_list(s).map_err(input)?.as_slice() {
        &[domestic, intermediate, foreign] => Ok(Some(PairRates {
            domestic,
            intermediate,
            foreign,
        })),
        _ => Err(input("--rates expects domestic,intermediate,foreign")),
    }
}

fn correlation(c: &CorrArgs) -> Result<Correlation, CliError> {
    match (c.rho, &c.rho_matrix) {
        (Some(r), None) => Ok(Correlation::constant(r)?),
        (None, Some(m)) => Ok(Correlation::scenario(parse_matrix(m).map_err(input)?)?),
        _ => Err(input("give exactly one of --rho and --rho-matrix")),
    }
}

fn build_model(a1: MixtureParams, a2: MixtureParams, corr: Correlation, rates: Option<PairRates>) -> Result<PairModel, CliError> {
    let m = PairModel::new(a1, a2, corr)?;
    match rates {
        Some(r) => Ok(quanto_adjust(&m.with_rates(r))?),
        None => Ok(m),
    }
}

fn horizon(a1: &MixtureParams, a2: &MixtureParams) -> f64 {
    a1.reference_maturity.min(a2.reference_maturity)
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    engine: &'static str,
    report: &'a CorrelationFitReport,
}

pub fn implied_corr(a: &ImpliedCorrArgs) -> Result<(), CliError> {
    let (a1, a2) = load_pair(&a.pair)?;
    let cross = MarketFile::load(&a.quotes)?;
    let (t, quotes) = cross.slice(None)?;
    let (rd, _) = cross.rates();
    let quote_set = QuoteSet::new(quotes, (-rd * t).exp());
    let rates = parse_rates(&a.rates)?;
    if rates.is_none() {
        warn("no --rates given: the pair is not quanto adjusted (zero rates)");
    }
    let engine = match a.engine {
        EngineArg::Semianalytic => Engine::MvmdSemianalytic,
        EngineArg::ScmdMc => {
            if a.random_corr {
                return Err(input("the SCMD engine supports only a constant correlation"));
            }
            Engine::ScmdMonteCarlo(SimulationConfig {
                n_paths: a.paths,
                n_steps: a.steps.unwrap_or_else(|| default_steps(t)),
                seed: a.seed,
                scheme: Scheme::ScmdEuler,
                antithetic: false,
            })
        }
    };
    let cfg = CorrelationFitConfig {
        engine,
        rates,
        seed: a.seed,
        ..Default::default()
    };
    let report = if a.random_corr {
        calibrate_random_correlation(&a1, &a2, &quote_set, &cfg)?
    } else {
        calibrate_implied_correlation(&a1, &a2, &quote_set, &cfg)?
    };
    let out = FitOutput {
        schema_version: SCHEMA_VERSION,
        engine: match a.engine {
            EngineArg::Semianalytic => "semianalytic",
            EngineArg::ScmdMc => "scmd-mc",
        },
        report: &report,
    };
    emit(a.out.as_deref(), &to_json(&out))?;
    if let Some(path) = &a.table {
        let mut table = Table::new(
            "mvmd-corr-fit",
            &["strike", "market_vol", "model_vol", "abs_vol_diff", "abs_price_diff"],
        );
        for s in &report.per_strike {
            table.push(vec![
                fmt12(s.strike),
                fmt12(s.market_vol),
                fmt12(s.model_vol),
                fmt12(s.abs_vol_diff),
                fmt12(s.abs_price_diff),
            ]);
        }
        emit(Some(path), &table.render())?;
    }
    for w in &report.warnings {
        warn(w);
    }
    if report.boundary_solution {
        return Err(CliError::NotConverged("correlation fit ended on the boundary".into()));
    }
    if !report.converged {
        return Err(CliError::NotConverged("correlation fit did not converge".into()));
    }
    Ok(())
}

pub fn price_cross(a: &PriceCrossArgs) -> Result<(), CliError> {
    let (a1, a2) = load_pair(&a.pair)?;
    let model = build_model(a1, a2, correlation(&a.corr)?, parse_rates(&a.rates)?)?;
    let strikes = parse_list(&a.strikes).map_err(input)?;
    let mut req = CrossRequest::new(model, strikes.clone(), a.maturity, a.df);
    if a.put {
        req.option_type = OptionType::Put;
    }
    let prices = price_cross_option(&req)?;
    let vols = cross_implied_vol_curve(&req)?;
    let mut table = Table::new("mvmd-cross-prices", &["strike", "price", "implied_vol"]);
    for ((k, p), v) in strikes.iter().zip(&prices).zip(&vols) {
        table.push(vec![fmt12(*k), fmt12(*p), fmt12(*v)]);
    }
    emit(a.out.as_deref(), &table.render())
}

/// `lo:hi:n` or a comma-separated list.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| input(format!("bad grid start {lo:?}")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| input(format!("bad grid end {hi:?}")))?;
            let n: usize = n.trim().parse().map_err(|_| input(format!("bad grid size {n:?}")))?;
            if n < 2 || !(hi > lo) {
                return Err(input("grid needs lo < hi and at least two points"));
            }
            Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
        }
        [_] => parse_list(s).map_err(input),
        _ => Err(input(format!("bad strike grid {s:?}"))),
    }
}

fn atm_correlation(a1: &MixtureParams, a2: &MixtureParams, path: &Path) -> Result<(Correlation, f64, f64), CliError> {
    let cross = MarketFile::load(path)?;
    let (t, quotes) = cross.slice(None)?;
    let (rd, _) = cross.rates();
    let df = (-rd * t).exp();
    let f = cross_forward(&PairModel::new(a1.clone(), a2.clone(), Correlation::constant(0.0)?)?, t)?;
    let atm = *quotes
        .iter()
        .min_by(|x, y| (x.strike - f).abs().total_cmp(&(y.strike - f).abs()))
        .expect("non-empty slice");
    eprintln!("ATM quote: strike {}, vol {}", fmt12(atm.strike), fmt12(atm.implied_vol));
    let fit = calibrate_implied_correlation(a1, a2, &QuoteSet::new(vec![atm], df), &CorrelationFitConfig::default())?;
    for w in &fit.warnings {
        warn(w);
    }
    if fit.boundary_solution || !fit.converged {
        return Err(CliError::NotConverged("ATM correlation fit failed".into()));
    }
    Ok((fit.fitted, t, df))
}

pub fn extrapolate(a: &ExtrapolateArgs) -> Result<(), CliError> {
    let (a1, a2) = load_pair(&a.pair)?;
    let (corr, t_default, df_default) = match a.corr_source {
        CorrSource::Atm => {
            let path = a.quotes.as_ref().ok_or_else(|| input("--corr-source atm needs --quotes"))?;
            atm_correlation(&a1, &a2, path)?
        }
        CorrSource::File => {
            let path: &PathBuf = a.corr_file.as_ref().ok_or_else(|| input("--corr-source file needs --corr-file"))?;
            (load_correlation(path)?, horizon(&a1, &a2), 1.0)
        }
    };
    if let Correlation::Constant { rho } = corr {
        eprintln!("correlation {}", fmt12(rho));
    }
    let t = a.maturity.unwrap_or(t_default);
    let df = a.df.unwrap_or(df_default);
    let strikes = match &a.strike_grid {
        Some(s) => parse_grid(s)?,
        None => {
            let f = cross_forward(&PairModel::new(a1.clone(), a2.clone(), corr.clone())?, t)?;
            (0..21).map(|i| f * (0.8 + 0.02 * i as f64)).collect()
        }
    };
    let vols = extrapolate_cross_smile(&a1, &a2, &corr, &strikes, t, df)?;
    let calls = cross_call_prices(&a1, &a2, &corr, &strikes, t, df)?;
    let mut table = Table::new("mvmd-cross-smile", &["strike", "implied_vol", "call_price"]);
    for ((k, v), c) in strikes.iter().zip(&vols).zip(&calls) {
        table.push(vec![fmt12(*k), fmt12(*v), fmt12(*c)]);
    }
    emit(a.out.as_deref(), &table.render())
}

#[derive(Serialize)]
struct Estimate {
    mc: f64,
    se: f64,
    model: f64,
}

#[derive(Serialize)]
struct SimulationSummary {
    schema_version: u32,
    scheme: Scheme,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    antithetic: bool,
    maturity: f64,
    quanto_adjusted: bool,
    absorbed: usize,
    mean_s1: Estimate,
    mean_s2: Estimate,
    mean_product: Estimate,
    terminal_correlation: Estimate,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (a1, a2) = load_pair(&a.pair)?;
    let t = a.maturity.unwrap_or_else(|| horizon(&a1, &a2));
    let model = build_model(a1, a2, correlation(&a.corr)?, parse_rates(&a.rates)?)?;
    let cfg = SimulationConfig {
        n_paths: a.paths,
        n_steps: a.steps.unwrap_or_else(|| default_steps(t)),
        seed: a.seed,
        scheme: match a.scheme {
            SchemeArg::MuvmExact => Scheme::MuvmExact,
            SchemeArg::ScmdEuler => Scheme::ScmdEuler,
            SchemeArg::MvmdEuler => Scheme::MvmdEuler,
        },
        antithetic: a.antithetic,
    };
    let res = run_simulation(&model, t, &cfg)?;
    let moments = cross_moments(&model, t)?;
    let product: Vec<f64> = res.terminal_s1.iter().zip(&res.terminal_s2).map(|(x, y)| x * y).collect();
    let (m1, se1) = sample_mean(&res.terminal_s1, cfg.antithetic)?;
    let (m2, se2) = sample_mean(&res.terminal_s2, cfg.antithetic)?;
    let (mp, sep) = sample_mean(&product, cfg.antithetic)?;
    let (rho, rho_se) = estimate_terminal_correlation(&res)?;
    let summary = SimulationSummary {
        schema_version: SCHEMA_VERSION,
        scheme: cfg.scheme,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
        maturity: t,
        quanto_adjusted: model.quanto_adjusted,
        absorbed: res.absorbed,
        mean_s1: Estimate { mc: m1, se: se1, model: moments.mean1 },
        mean_s2: Estimate { mc: m2, se: se2, model: moments.mean2 },
        mean_product: Estimate { mc: mp, se: sep, model: moments.mean_product },
        terminal_correlation: Estimate {
            mc: rho,
            se: rho_se,
            model: terminal_correlation(&model, t)?,
        },
    };
    if let Some(path) = &a.dump {
        write_dump(path, &res)?;
    }
    emit(a.out.as_deref(), &to_json(&summary))?;
    eprintln!("simulated {} paths in {:.2}s", res.len(), res.elapsed_secs);
    if res.absorbed > 0 {
        warn(&format!("{} paths hit the positivity floor", res.absorbed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("1,4").unwrap(), vec![1.0, 4.0]);
        assert!(parse_grid("2:1:3").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
