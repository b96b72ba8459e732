//! Monte Carlo engines for the two-asset models.
//!
//! Paths are generated in fixed blocks of [`BLOCK_SIZE`], each block drawing
//! from its own ChaCha stream of the configured seed, so the samples do not
//! depend on how many worker threads run the blocks.

mod dump;
mod stats;

pub use dump::{read_dump, write_dump, DumpHeader};
pub use stats::{estimate_terminal_correlation, mc_price_cross, pairwise_sum, sample_mean};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multivariate::{integrated_cross_vol, scenario_laws, CorrelationSpec, CrossModel, ScenarioLaw};
use crate::scalar::log_sum_exp;
use crate::smile::ShiftedMixtureParams;

/// Paths per random stream.
pub const BLOCK_SIZE: usize = 1024;

/// Default Euler steps per year.
pub const STEPS_PER_YEAR: f64 = 250.0;

pub fn default_steps(maturity: f64) -> usize {
    ((STEPS_PER_YEAR * maturity).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact terminal sampling of the uncertain-volatility model.
    MuvmExact,
    ScmdEuler,
    MvmdEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub antithetic: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_steps: 125,
            seed: 1,
            scheme: Scheme::MuvmExact,
            antithetic: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidInput("need at least two paths".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("need at least one time step".into()));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::InvalidInput(
                "antithetic sampling needs an even number of paths".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub terminal_s1: Vec<f64>,
    pub terminal_s2: Vec<f64>,
    /// Scenario index `h · N₂ + k` of each path (exact scheme only).
    pub scenario_draws: Option<Vec<u32>>,
    pub config: SimulationConfig,
    pub maturity: f64,
    /// Paths whose lognormal coordinate hit the floor.
    pub absorbed: usize,
    pub elapsed_secs: f64,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.terminal_s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal_s1.is_empty()
    }
}

struct PathOut {
    s1: f64,
    s2: f64,
    scenario: u32,
    absorbed: bool,
}

trait PathEngine: Sync {
    /// Standard normals consumed per path.
    fn dims(&self) -> usize;
    /// One path from a uniform scenario draw and normals scaled by `sign`.
    fn path(&self, u: f64, normals: &[f64], sign: f64) -> Result<PathOut>;
}

fn run<E: PathEngine>(engine: &E, cfg: &SimulationConfig, maturity: f64, keep_scenarios: bool) -> Result<SimulationResult> {
    let clock = Instant::now();
    let n = cfg.n_paths;
    let blocks: Vec<Result<Vec<PathOut>>> = (0..n.div_ceil(BLOCK_SIZE))
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let (start, end) = (b * BLOCK_SIZE, ((b + 1) * BLOCK_SIZE).min(n));
            let mut out = Vec::with_capacity(end - start);
            let mut normals = vec![0.0; engine.dims()];
            let mut i = start;
            while i < end {
                let u: f64 = rng.random();
                for z in normals.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                out.push(engine.path(u, &normals, 1.0)?);
                i += 1;
                if cfg.antithetic && i < end {
                    out.push(engine.path(u, &normals, -1.0)?);
                    i += 1;
                }
            }
            Ok(out)
        })
        .collect();

    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    let mut scenarios = Vec::with_capacity(if keep_scenarios { n } else { 0 });
    let mut absorbed = 0;
    for block in blocks {
        for p in block? {
            s1.push(p.s1);
            s2.push(p.s2);
            if keep_scenarios {
                scenarios.push(p.scenario);
            }
            absorbed += usize::from(p.absorbed);
        }
    }
    Ok(SimulationResult {
        terminal_s1: s1,
        terminal_s2: s2,
        scenario_draws: keep_scenarios.then_some(scenarios),
        config: *cfg,
        maturity,
        absorbed,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    })
}

fn check_maturity(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("maturity {t} must be positive")));
    }
    Ok(())
}

struct MuvmEngine {
    laws: Vec<ScenarioLaw<f64>>,
    cumulative: Vec<f64>,
}

impl PathEngine for MuvmEngine {
    fn dims(&self) -> usize {
        2
    }

    fn path(&self, u: f64, z: &[f64], sign: f64) -> Result<PathOut> {
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.laws.len() - 1);
        let l = &self.laws[idx];
        let (z1, z2) = (sign * z[0], sign * z[1]);
        let s1 = l.v11.sqrt();
        let g1 = s1 * z1;
        let g2 = if s1 > 0.0 {
            l.c12 / s1 * z1 + (l.v22 - l.c12 * l.c12 / l.v11).max(0.0).sqrt() * z2
        } else {
            l.v22.sqrt() * z2
        };
        Ok(PathOut {
            s1: l.alpha1 + (l.m1 + g1).exp(),
            s2: l.alpha2 + (l.m2 + g2).exp(),
            scenario: idx as u32,
            absorbed: false,
        })
    }
}

/// Exact terminal sampling: draw the scenario `(h, k)` with probability
/// `λ₁ʰ λ₂ᵏ`, then the correlated shifted lognormal pair.
pub fn simulate_muvm(model: &CrossModel<f64>, maturity: f64, cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    check_maturity(maturity)?;
    model.validate()?;
    let laws = scenario_laws(model, maturity)?;
    let mut acc = 0.0;
    let cumulative = laws
        .iter()
        .map(|l| {
            acc += l.prob;
            acc
        })
        .collect();
    run(&MuvmEngine { laws, cumulative }, cfg, maturity, true)
}

/// Per-step data of one asset's mixture for the SCMD scheme.
struct MarginalStep {
    /// Log-density offsets `ln λᵏ − ln Vᵏ(t)`, means and stdevs of `ln y`.
    log_weight: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    /// `∫ σᵏ² ds` over the step.
    step_var: Vec<f64>,
    at_origin: bool,
}

impl MarginalStep {
    fn new(p: &ShiftedMixtureParams<f64>, t0: f64, t1: f64) -> Self {
        let n = p.n_components();
        let ln_y0 = p.shifted_spot().ln();
        let mut s = Self {
            log_weight: Vec::with_capacity(n),
            mean: Vec::with_capacity(n),
            sd: Vec::with_capacity(n),
            step_var: Vec::with_capacity(n),
            at_origin: t0 <= 0.0,
        };
        for k in 0..n {
            let v = p.total_stdev(k, t0);
            s.sd.push(v);
            s.mean.push(ln_y0 + p.drift * t0 - 0.5 * v * v);
            s.log_weight.push(p.weights[k].ln() - v.ln());
            s.step_var.push(p.integrated_variance(k, t1) - p.integrated_variance(k, t0));
        }
        s
    }

    /// Posterior-weighted step variance at log-coordinate `ln_y`.
    fn variance(&self, weights: &[f64], ln_y: f64, scratch: &mut Vec<f64>) -> f64 {
        if self.at_origin {
            return weights.iter().zip(&self.step_var).map(|(w, v)| w * v).sum();
        }
        scratch.clear();
        for k in 0..self.sd.len() {
            let u = (ln_y - self.mean[k]) / self.sd[k];
            scratch.push(self.log_weight[k] - 0.5 * u * u);
        }
        let norm = log_sum_exp(scratch);
        scratch
            .iter()
            .zip(&self.step_var)
            .map(|(l, v)| (l - norm).exp() * v)
            .sum()
    }
}

struct Grid {
    times: Vec<f64>,
}

impl Grid {
    fn new(maturity: f64, n_steps: usize) -> Self {
        let dt = maturity / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
        times[n_steps] = maturity;
        Self { times }
    }

    fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1]))
    }
}

fn floor_log(p: &ShiftedMixtureParams<f64>) -> f64 {
    (f64::EPSILON * p.spot).ln()
}

struct ScmdEngine {
    rho: f64,
    quanto: bool,
    grid: Grid,
    steps1: Vec<MarginalStep>,
    steps2: Vec<MarginalStep>,
    p1: ShiftedMixtureParams<f64>,
    p2: ShiftedMixtureParams<f64>,
}

impl PathEngine for ScmdEngine {
    fn dims(&self) -> usize {
        2 * self.steps1.len()
    }

    fn path(&self, _u: f64, z: &[f64], sign: f64) -> Result<PathOut> {
        let (mut l1, mut l2) = (self.p1.shifted_spot().ln(), self.p2.shifted_spot().ln());
        let (f1, f2) = (floor_log(&self.p1), floor_log(&self.p2));
        let orth = (1.0 - self.rho * self.rho).sqrt();
        let mut scratch = Vec::new();
        let mut absorbed = false;
        for (j, (t0, t1)) in self.grid.steps().enumerate() {
            let dt = t1 - t0;
            let v1 = self.steps1[j].variance(&self.p1.weights, l1, &mut scratch);
            let v2 = self.steps2[j].variance(&self.p2.weights, l2, &mut scratch);
            let (z1, z2) = (sign * z[2 * j], sign * z[2 * j + 1]);
            let cov = self.rho * (v1 * v2).sqrt();
            let quanto = if self.quanto { cov } else { 0.0 };
            l1 += self.p1.drift * dt - 0.5 * v1 - quanto + v1.sqrt() * z1;
            l2 += self.p2.drift * dt - 0.5 * v2 + v2.sqrt() * (self.rho * z1 + orth * z2);
            if l1 < f1 || l2 < f2 {
                absorbed = true;
                l1 = l1.max(f1);
                l2 = l2.max(f2);
            }
        }
        let t = *self.grid.times.last().expect("non-empty grid");
        Ok(PathOut {
            s1: l1.exp() + self.p1.shift_at(t),
            s2: l2.exp() + self.p2.shift_at(t),
            scenario: 0,
            absorbed,
        })
    }
}

/// Log-Euler scheme for the simply-correlated model: each asset diffuses with
/// its own mixture local volatility and the Brownian motions have correlation `ρ`.
pub fn simulate_scmd(model: &CrossModel<f64>, maturity: f64, cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    check_maturity(maturity)?;
    model.validate()?;
    let rho = match model.corr {
        CorrelationSpec::Constant { rho } => rho,
        CorrelationSpec::Scenario { .. } => {
            return Err(Error::UnsupportedSpec(
                "the simply-correlated model takes a single correlation".into(),
            ))
        }
    };
    let grid = Grid::new(maturity, cfg.n_steps);
    let steps1 = grid.steps().map(|(a, b)| MarginalStep::new(&model.asset1, a, b)).collect();
    let steps2 = grid.steps().map(|(a, b)| MarginalStep::new(&model.asset2, a, b)).collect();
    let engine = ScmdEngine {
        rho,
        quanto: model.quanto_adjusted,
        grid,
        steps1,
        steps2,
        p1: model.asset1.clone(),
        p2: model.asset2.clone(),
    };
    run(&engine, cfg, maturity, false)
}

/// Per-step scenario table for the MVMD scheme.
struct JointStep {
    /// `ln p − ½ ln det`, inverse-covariance entries and means per scenario;
    /// `None` at the origin where the posterior is the prior.
    laws: Option<Vec<[f64; 6]>>,
    prior: Vec<f64>,
    /// Step-integrated `[a11, a12, a22]` per scenario.
    rates: Vec<[f64; 3]>,
    alpha: (f64, f64),
}

impl JointStep {
    fn new(model: &CrossModel<f64>, t0: f64, t1: f64) -> Result<Self> {
        let (p1, p2) = (&model.asset1, &model.asset2);
        let mut rates = Vec::with_capacity(model.n_scenarios());
        let mut prior = Vec::with_capacity(model.n_scenarios());
        for h in 0..p1.n_components() {
            for k in 0..p2.n_components() {
                prior.push(p1.weights[h] * p2.weights[k]);
                rates.push([
                    p1.integrated_variance(h, t1) - p1.integrated_variance(h, t0),
                    model.corr.rho(h, k)
                        * (integrated_cross_vol(p1, h, p2, k, t1) - integrated_cross_vol(p1, h, p2, k, t0)),
                    p2.integrated_variance(k, t1) - p2.integrated_variance(k, t0),
                ]);
            }
        }
        let laws = if t0 > 0.0 {
            let table = scenario_laws(model, t0)?
                .iter()
                .map(|l| {
                    let det = l.v11 * l.v22 - l.c12 * l.c12;
                    [
                        l.prob.ln() - 0.5 * det.ln(),
                        l.v22 / det,
                        -l.c12 / det,
                        l.v11 / det,
                        l.m1,
                        l.m2,
                    ]
                })
                .collect();
            Some(table)
        } else {
            None
        };
        Ok(Self {
            laws,
            prior,
            rates,
            alpha: (p1.shift_at(t0), p2.shift_at(t0)),
        })
    }

    fn covariance(&self, l1: f64, l2: f64, scratch: &mut Vec<f64>) -> [f64; 3] {
        let mut a = [0.0; 3];
        match &self.laws {
            None => {
                for (w, r) in self.prior.iter().zip(&self.rates) {
                    for j in 0..3 {
                        a[j] += w * r[j];
                    }
                }
            }
            Some(laws) => {
                scratch.clear();
                for l in laws {
                    let (u1, u2) = (l1 - l[4], l2 - l[5]);
                    scratch.push(l[0] - 0.5 * (l[1] * u1 * u1 + 2.0 * l[2] * u1 * u2 + l[3] * u2 * u2));
                }
                let norm = log_sum_exp(scratch);
                for (lw, r) in scratch.iter().zip(&self.rates) {
                    let w = (lw - norm).exp();
                    for j in 0..3 {
                        a[j] += w * r[j];
                    }
                }
            }
        }
        a
    }
}

struct MvmdEngine {
    quanto: bool,
    grid: Grid,
    steps: Vec<JointStep>,
    p1: ShiftedMixtureParams<f64>,
    p2: ShiftedMixtureParams<f64>,
}

impl PathEngine for MvmdEngine {
    fn dims(&self) -> usize {
        2 * self.steps.len()
    }

    fn path(&self, _u: f64, z: &[f64], sign: f64) -> Result<PathOut> {
        let (mut l1, mut l2) = (self.p1.shifted_spot().ln(), self.p2.shifted_spot().ln());
        let (f1, f2) = (floor_log(&self.p1), floor_log(&self.p2));
        let mut scratch = Vec::new();
        let mut absorbed = false;
        for (j, (t0, t1)) in self.grid.steps().enumerate() {
            let dt = t1 - t0;
            let step = &self.steps[j];
            let a = step.covariance(l1, l2, &mut scratch);
            let c11 = a[0].sqrt();
            let c21 = if c11 > 0.0 { a[1] / c11 } else { 0.0 };
            let rest = a[2] - c21 * c21;
            if !(c11 > 0.0) || rest < -1e-14 * a[2] || !rest.is_finite() {
                return Err(Error::DiffusionDegeneracy {
                    t: t0,
                    x1: l1.exp() + step.alpha.0,
                    x2: l2.exp() + step.alpha.1,
                });
            }
            let c22 = rest.max(0.0).sqrt();
            let (z1, z2) = (sign * z[2 * j], sign * z[2 * j + 1]);
            let quanto = if self.quanto { a[1] } else { 0.0 };
            l1 += self.p1.drift * dt - 0.5 * a[0] - quanto + c11 * z1;
            l2 += self.p2.drift * dt - 0.5 * a[2] + c21 * z1 + c22 * z2;
            if l1 < f1 || l2 < f2 {
                absorbed = true;
                l1 = l1.max(f1);
                l2 = l2.max(f2);
            }
        }
        let t = *self.grid.times.last().expect("non-empty grid");
        Ok(PathOut {
            s1: l1.exp() + self.p1.shift_at(t),
            s2: l2.exp() + self.p2.shift_at(t),
            scenario: 0,
            absorbed,
        })
    }
}

/// Log-Euler scheme for the multivariate mixture diffusion, with the
/// state-dependent covariance from the scenario posterior at each step.
pub fn simulate_mvmd(model: &CrossModel<f64>, maturity: f64, cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    check_maturity(maturity)?;
    model.validate()?;
    let grid = Grid::new(maturity, cfg.n_steps);
    let steps = grid
        .steps()
        .map(|(a, b)| JointStep::new(model, a, b))
        .collect::<Result<Vec<_>>>()?;
    let engine = MvmdEngine {
        quanto: model.quanto_adjusted,
        grid,
        steps,
        p1: model.asset1.clone(),
        p2: model.asset2.clone(),
    };
    run(&engine, cfg, maturity, false)
}

/// Dispatch on `cfg.scheme`.
pub fn simulate(model: &CrossModel<f64>, maturity: f64, cfg: &SimulationConfig) -> Result<SimulationResult> {
    match cfg.scheme {
        Scheme::MuvmExact => simulate_muvm(model, maturity, cfg),
        Scheme::ScmdEuler => simulate_scmd(model, maturity, cfg),
        Scheme::MvmdEuler => simulate_mvmd(model, maturity, cfg),
    }
}
