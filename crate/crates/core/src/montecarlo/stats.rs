use rayon::prelude::*;

use super::SimulationResult;
use crate::analytic::OptionType;
use crate::error::{Error, Result};

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 128;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Averages antithetic pairs so that the returned values are independent.
fn units(values: Vec<f64>, antithetic: bool) -> Vec<f64> {
    if antithetic {
        values.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    } else {
        values
    }
}

fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let mean = pairwise_sum(values) / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Sample mean and standard error of per-path values, respecting
/// antithetic pairing.
pub fn sample_mean(values: &[f64], antithetic: bool) -> Result<(f64, f64)> {
    mean_se(&units(values.to_vec(), antithetic))
}

/// Discounted Monte Carlo prices `(price, standard error)` of options on
/// the terminal product `S₁ S₂`.
pub fn mc_price_cross(
    res: &SimulationResult,
    strikes: &[f64],
    discount_factor: f64,
    option_type: OptionType,
) -> Result<Vec<(f64, f64)>> {
    if res.is_empty() {
        return Err(Error::InvalidInput("no simulated paths".into()));
    }
    strikes
        .par_iter()
        .map(|&k| {
            let payoff: Vec<f64> = res
                .terminal_s1
                .iter()
                .zip(&res.terminal_s2)
                .map(|(a, b)| {
                    let p = a * b;
                    discount_factor
                        * match option_type {
                            OptionType::Call => (p - k).max(0.0),
                            OptionType::Put => (k - p).max(0.0),
                        }
                })
                .collect();
            mean_se(&units(payoff, res.config.antithetic))
        })
        .collect()
}

/// Pearson correlation of the terminal samples with a delete-one jackknife
/// standard error (antithetic pairs are deleted together).
pub fn estimate_terminal_correlation(res: &SimulationResult) -> Result<(f64, f64)> {
    let n = res.len();
    if n < 3 {
        return Err(Error::InvalidInput("need at least three samples".into()));
    }
    let nf = n as f64;
    let m1 = pairwise_sum(&res.terminal_s1) / nf;
    let m2 = pairwise_sum(&res.terminal_s2) / nf;
    let x: Vec<f64> = res.terminal_s1.iter().map(|v| v - m1).collect();
    let y: Vec<f64> = res.terminal_s2.iter().map(|v| v - m2).collect();

    let group = if res.config.antithetic { 2 } else { 1 };
    // per-unit sufficient statistics (Σx, Σy, Σxx, Σyy, Σxy)
    let stats: Vec<[f64; 5]> = x
        .chunks(group)
        .zip(y.chunks(group))
        .map(|(a, b)| {
            let mut s = [0.0; 5];
            for (u, v) in a.iter().zip(b) {
                s[0] += u;
                s[1] += v;
                s[2] += u * u;
                s[3] += v * v;
                s[4] += u * v;
            }
            s
        })
        .collect();
    let column = |j: usize| pairwise_sum(&stats.iter().map(|s| s[j]).collect::<Vec<_>>());
    let total: [f64; 5] = [column(0), column(1), column(2), column(3), column(4)];

    let corr = |s: &[f64; 5], count: f64| -> Option<f64> {
        let (mx, my) = (s[0] / count, s[1] / count);
        let sxx = s[2] - count * mx * mx;
        let syy = s[3] - count * my * my;
        let sxy = s[4] - count * mx * my;
        (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
    };
    let rho = corr(&total, nf).ok_or(Error::UndefinedCorrelation)?;

    let g = stats.len();
    let leave_out: Vec<f64> = stats
        .iter()
        .zip(x.chunks(group))
        .map(|(s, chunk)| {
            let mut rest = total;
            for j in 0..5 {
                rest[j] -= s[j];
            }
            corr(&rest, nf - chunk.len() as f64).unwrap_or(rho)
        })
        .collect();
    let mean_lo = pairwise_sum(&leave_out) / g as f64;
    let dev: Vec<f64> = leave_out.iter().map(|v| (v - mean_lo).powi(2)).collect();
    let se = ((g as f64 - 1.0) / g as f64 * pairwise_sum(&dev)).sqrt();
    Ok((rho, se))
}
