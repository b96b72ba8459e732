use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixture_dynamics::calibration::extrapolate_cross_smile;
use mixture_dynamics::cross::cross_forward;
use mixture_dynamics::montecarlo::read_dump;
use mixture_dynamics::smile::model_implied_vol;
use mixture_dynamics::{Correlation, MixtureParams, PairModel};
use serde_json::{json, Value};
use tempfile::TempDir;

fn usd_eur() -> MixtureParams {
    MixtureParams::new(vec![0.1402, 0.8598], vec![0.1952, 0.0709], 0.00068, 0.0, 0.878, 0.5).unwrap()
}

fn eur_jpy() -> MixtureParams {
    MixtureParams::new(vec![0.2735, 0.7265], vec![0.1184, 0.0962], 0.9752, 0.0, 135.44, 0.5).unwrap()
}

fn mvmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvmd"))
        .current_dir(dir)
        .env_remove("MVMD_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn params_file(dir: &Path, name: &str, id: &str, p: &MixtureParams) -> PathBuf {
    write_json(dir, name, &json!({ "schema_version": 1, "asset_id": id, "params": p }))
}

fn market_file(dir: &Path, name: &str, spot: f64, quotes: &[(f64, f64, f64)], rates: bool) -> PathBuf {
    let q: Vec<Value> = quotes
        .iter()
        .map(|&(k, t, v)| json!({ "strike": k, "maturity": t, "implied_vol": v }))
        .collect();
    let mut v = json!({ "schema_version": 1, "asset_id": "X", "spot": spot, "quotes": q });
    if rates {
        v["domestic_rate"] = json!(0.0);
        v["foreign_rate"] = json!(0.0);
    }
    write_json(dir, name, &v)
}

/// Parses a versioned CSV into its schema tag and numeric rows.
fn read_table(text: &str) -> (String, Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let schema = lines.next().unwrap().to_string();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (schema, header, rows)
}

fn pair_files(dir: &Path) -> (String, String) {
    (
        params_file(dir, "a1.json", "USD/EUR", &usd_eur()).display().to_string(),
        params_file(dir, "a2.json", "EUR/JPY", &eur_jpy()).display().to_string(),
    )
}

#[test]
fn calibrate_smile_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = usd_eur();
    let f = p.forward(0.5);
    let quotes: Vec<(f64, f64, f64)> = (0..9)
        .map(|i| {
            let k = f * (0.92 + 0.02 * i as f64);
            (k, 0.5, model_implied_vol(&p, k, 0.5, 1.0).unwrap())
        })
        .collect();
    let input = market_file(dir.path(), "m.json", 0.878, &quotes, true);
    let out = mvmd(dir.path(), &["calibrate-smile", input.to_str().unwrap(), "--out", "p.json"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let fitted: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(fitted["schema_version"], 1);
    let params: MixtureParams = serde_json::from_value(fitted["params"].clone()).unwrap();
    let mse = quotes
        .iter()
        .map(|&(k, t, v)| (model_implied_vol(&params, k, t, 1.0).unwrap() - v).powi(2))
        .sum::<f64>()
        / quotes.len() as f64;
    assert!(mse.sqrt() <= 1e-4, "rmse {}", mse.sqrt());

    let (schema, header, rows) = read_table(&std::fs::read_to_string(dir.path().join("p.csv")).unwrap());
    assert_eq!(schema, "#schema=mvmd-smile-fit/1");
    assert_eq!(header[..3], ["strike", "market_vol", "model_vol"]);
    assert_eq!(rows.len(), 9);
}

#[test]
fn single_quote_single_component_and_rate_warning() {
    let dir = TempDir::new().unwrap();
    let input = market_file(dir.path(), "m.json", 100.0, &[(100.0, 1.0, 0.2)], false);
    let out = mvmd(dir.path(), &["calibrate-smile", input.to_str().unwrap(), "--components", "1", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("assuming zero"));
    let (_, _, rows) = read_table(&std::fs::read_to_string(dir.path().join("p.csv")).unwrap());
    assert!((rows[0][2] - 0.2).abs() < 1e-8);
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"schema_version\": 1,\n  \"spot\": oops\n}").unwrap();
    let out = mvmd(dir.path(), &["calibrate-smile", "bad.json", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    write_json(dir.path(), "v2.json", &json!({ "schema_version": 2, "asset_id": "X", "spot": 1.0, "quotes": [] }));
    assert_eq!(mvmd(dir.path(), &["calibrate-smile", "v2.json", "--out", "p.json"]).status.code(), Some(2));

    let (a1, a2) = pair_files(dir.path());
    let out = mvmd(dir.path(), &["price-cross", "--asset1", &a1, "--asset2", &a2, "--rho", "1.5", "--strikes", "100", "-T", "0.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_mvmd"))
        .current_dir(dir.path())
        .env("MVMD_THREADS", "many")
        .args(["price-cross", "--asset1", &a1, "--asset2", &a2, "--rho", "0", "--strikes", "100", "-T", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn cross_quotes(dir: &Path, rho: f64, moneyness: &[f64]) -> PathBuf {
    let corr = Correlation::constant(rho).unwrap();
    let f = cross_forward(&PairModel::new(usd_eur(), eur_jpy(), corr.clone()).unwrap(), 0.5).unwrap();
    let strikes: Vec<f64> = moneyness.iter().map(|m| m * f).collect();
    let vols = extrapolate_cross_smile(&usd_eur(), &eur_jpy(), &corr, &strikes, 0.5, 1.0).unwrap();
    let q: Vec<(f64, f64, f64)> = strikes.iter().zip(vols).map(|(&k, v)| (k, 0.5, v)).collect();
    market_file(dir, "cross.json", 0.878 * 135.44, &q, true)
}

#[test]
fn implied_correlation_round_trip_and_table() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let quotes = cross_quotes(dir.path(), -0.6015, &[0.9, 0.95, 1.0, 1.05, 1.1]);
    let out = mvmd(
        dir.path(),
        &["implied-corr", "--asset1", &a1, "--asset2", &a2, "--quotes", quotes.to_str().unwrap(), "--table", "fit.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rho = report["report"]["fitted"]["rho"].as_f64().unwrap();
    assert!((rho + 0.6015).abs() < 1e-3, "{rho}");
    assert_eq!(report["report"]["fitted"]["kind"], "constant");
    let (schema, _, rows) = read_table(&std::fs::read_to_string(dir.path().join("fit.csv")).unwrap());
    assert_eq!(schema, "#schema=mvmd-corr-fit/1");
    assert_eq!(rows.len(), 5);
}

#[test]
fn unreachable_quotes_exit_1_with_report() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let f = cross_forward(&PairModel::new(usd_eur(), eur_jpy(), Correlation::constant(0.0).unwrap()).unwrap(), 0.5).unwrap();
    let quotes = market_file(dir.path(), "cross.json", f, &[(f, 0.5, 0.5)], true);
    let out = mvmd(dir.path(), &["implied-corr", "--asset1", &a1, "--asset2", &a2, "--quotes", quotes.to_str().unwrap(), "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["boundary_solution"], true);
}

#[test]
fn random_correlation_is_rejected_for_scmd_engine() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let quotes = cross_quotes(dir.path(), -0.6, &[1.0]);
    let out = mvmd(
        dir.path(),
        &["implied-corr", "--asset1", &a1, "--asset2", &a2, "--quotes", quotes.to_str().unwrap(), "--engine", "scmd-mc", "--random-corr"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn price_cross_csv_is_deterministic_and_twelve_digits() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let args = [
        "price-cross", "--asset1", &a1, "--asset2", &a2, "--rho-matrix", "-0.8,-0.2;-0.6,-0.3", "--strikes", "110,118,126",
        "-T", "0.5",
    ];
    let first = mvmd(dir.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(stdout(&first), stdout(&mvmd(dir.path(), &args)).as_str());
    let (schema, header, rows) = read_table(&stdout(&first));
    assert_eq!(schema, "#schema=mvmd-cross-prices/1");
    assert_eq!(header, ["strike", "price", "implied_vol"]);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > rows[2][1]);
    for line in stdout(&first).lines().skip(2) {
        for cell in line.split(',') {
            let digits = cell.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert!(digits <= 13, "{cell}");
        }
    }
}

#[test]
fn extrapolate_from_atm_reprices_the_atm_quote() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let quotes = cross_quotes(dir.path(), -0.1205, &[1.0]);
    let q: Value = serde_json::from_str(&std::fs::read_to_string(&quotes).unwrap()).unwrap();
    let (k, v) = (q["quotes"][0]["strike"].as_f64().unwrap(), q["quotes"][0]["implied_vol"].as_f64().unwrap());
    let grid = format!("{},{}", k * 0.9, k);
    let out = mvmd(
        dir.path(),
        &["extrapolate", "--asset1", &a1, "--asset2", &a2, "--quotes", quotes.to_str().unwrap(), "--strike-grid", &grid],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (schema, _, rows) = read_table(&stdout(&out));
    assert_eq!(schema, "#schema=mvmd-cross-smile/1");
    assert!((rows[1][1] - v).abs() < 1e-7);

    // the fit report doubles as a correlation file
    write_json(dir.path(), "corr.json", &json!({ "fitted": { "kind": "constant", "rho": -0.1205 } }));
    let out = mvmd(
        dir.path(),
        &["extrapolate", "--asset1", &a1, "--asset2", &a2, "--corr-source", "file", "--corr-file", "corr.json", "--strike-grid", &grid],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, _, file_rows) = read_table(&stdout(&out));
    assert!((file_rows[1][1] - v).abs() < 1e-6);
}

#[test]
fn simulate_is_reproducible_with_martingale_summary_and_dump() {
    let dir = TempDir::new().unwrap();
    let (a1, a2) = pair_files(dir.path());
    let args = [
        "simulate", "--asset1", &a1, "--asset2", &a2, "--rho", "-0.6", "--scheme", "mvmd-euler", "--paths", "20000", "--steps",
        "25", "--seed", "3", "--dump", "s.bin",
    ];
    let a = mvmd(dir.path(), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = Command::new(env!("CARGO_BIN_EXE_mvmd"))
        .current_dir(dir.path())
        .env("MVMD_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(stdout(&a), stdout(&b));

    let s: Value = serde_json::from_str(&stdout(&a)).unwrap();
    for key in ["mean_s1", "mean_s2", "mean_product"] {
        let e = &s[key];
        let z = (e["mc"].as_f64().unwrap() - e["model"].as_f64().unwrap()).abs() / e["se"].as_f64().unwrap();
        assert!(z < 4.0, "{key}: z = {z}");
    }
    let (h, s1, _) = read_dump(dir.path().join("s.bin")).unwrap();
    assert_eq!((h.n_paths, h.seed, s1.len()), (20000, 3, 20000));
}
