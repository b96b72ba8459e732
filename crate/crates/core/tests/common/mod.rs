//! Calibrated parameter sets used across the integration tests.
#![allow(dead_code)]

use mixture_dynamics::multivariate::{CorrelationSpec, CrossModel};
use mixture_dynamics::MixtureParams;

fn params(weights: [f64; 2], vols: [f64; 2], shift: f64, spot: f64, t: f64) -> MixtureParams {
    MixtureParams::new(weights.to_vec(), vols.to_vec(), shift, 0.0, spot, t).unwrap()
}

/// USD/EUR and EUR/JPY, 6 months (16 Mar 2015).
pub fn usd_eur_6m() -> MixtureParams {
    params([0.1402, 0.8598], [0.1952, 0.0709], 0.00068, 0.878, 0.5)
}

pub fn eur_jpy_6m() -> MixtureParams {
    params([0.2735, 0.7265], [0.1184, 0.0962], 0.9752, 135.44, 0.5)
}

/// Same pair, 9 months.
pub fn usd_eur_9m() -> MixtureParams {
    params([0.0262, 0.9738], [0.2236, 0.0761], 0.0100, 0.878, 0.75)
}

pub fn eur_jpy_9m() -> MixtureParams {
    params([0.7584, 0.2416], [0.1244, 0.0497], 0.7856, 135.44, 0.75)
}

/// USD/EUR and EUR/JPY used for the random-correlation study, 6 months.
pub fn rc_usd_eur_6m() -> MixtureParams {
    params([0.0274, 0.9726], [0.1803, 0.0916], 0.0128, 0.8950, 0.5)
}

pub fn rc_eur_jpy_6m() -> MixtureParams {
    params([0.6575, 0.3425], [0.1230, 0.0501], 0.1867, 133.345, 0.5)
}

/// Same study, 9 months.
pub fn rc_usd_eur_9m() -> MixtureParams {
    params([0.0177, 0.9823], [0.2228, 0.0894], 0.0104, 0.8950, 0.75)
}

pub fn rc_eur_jpy_9m() -> MixtureParams {
    params([0.000943, 0.999057], [2.0968, 0.1064], 1.1098, 133.345, 0.75)
}

/// EUR/USD and USD/CNH, 6 months.
pub fn eur_usd_cnh() -> MixtureParams {
    params([0.2209, 0.7791], [0.1132, 0.0841], 0.0063, 1.0842, 0.5)
}

pub fn usd_cnh() -> MixtureParams {
    params([0.5956, 0.4044], [0.0447, 0.1455], -0.0587, 6.55, 0.5)
}

pub const RHO_6M: f64 = -0.6015;
pub const RHO_9M: f64 = -0.6199;
pub const RHO_CNH: f64 = -0.1205;
pub const RC_RHO_6M: f64 = -0.6147;
pub const RC_RHO_9M: f64 = -0.7488;

pub fn rc_matrix_6m() -> Vec<Vec<f64>> {
    vec![vec![-0.8717, -0.1762], vec![-0.6591, -0.2269]]
}

pub fn rc_matrix_9m() -> Vec<Vec<f64>> {
    vec![vec![-0.8679, -0.2208], vec![-0.8303, -0.3270]]
}

pub fn pair(a: MixtureParams, b: MixtureParams, rho: f64) -> CrossModel<f64> {
    CrossModel::new(a, b, CorrelationSpec::constant(rho).unwrap()).unwrap()
}

pub fn pair_6m() -> CrossModel<f64> {
    pair(usd_eur_6m(), eur_jpy_6m(), RHO_6M)
}

/// All ten single-asset parameter sets with a label.
pub fn all_assets() -> Vec<(&'static str, MixtureParams)> {
    vec![
        ("USD/EUR 6M", usd_eur_6m()),
        ("EUR/JPY 6M", eur_jpy_6m()),
        ("USD/EUR 9M", usd_eur_9m()),
        ("EUR/JPY 9M", eur_jpy_9m()),
        ("USD/EUR 6M (random corr)", rc_usd_eur_6m()),
        ("EUR/JPY 6M (random corr)", rc_eur_jpy_6m()),
        ("USD/EUR 9M (random corr)", rc_usd_eur_9m()),
        ("EUR/JPY 9M (random corr)", rc_eur_jpy_9m()),
        ("EUR/USD 6M", eur_usd_cnh()),
        ("USD/CNH 6M", usd_cnh()),
    ]
}

/// Prints the outcome of one acceptance criterion and returns it.
pub fn report(id: u32, name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "criterion {id:>2} {:<4} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
