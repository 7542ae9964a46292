//! Simulation study: sparse/intermediate/dense VAR(1) designs with
//! single-factor SV errors, and the relative-RMSE comparison of estimators.

use crate::engine::{run_chain, ModelSpec, VarData};
use crate::error::{Error, Result};
use crate::rng::{next_key, stream_from_seed, substream, Block};
use crate::shrinkage::{Concentration, PriorSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Redraws allowed before a scenario is declared mis-tuned.
pub const MAX_STABILITY_REJECTIONS: usize = 1000;
pub const STABILITY_BOUND: f64 = 0.99;
const DATA_BURNIN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Sparse,
    Intermediate,
    Dense,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Sparse => "sparse",
            ScenarioKind::Intermediate => "intermediate",
            ScenarioKind::Dense => "dense",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(ScenarioKind::Sparse),
            "intermediate" => Ok(ScenarioKind::Intermediate),
            "dense" => Ok(ScenarioKind::Dense),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Inclusion probabilities and value distributions per coefficient class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioKind,
    pub offdiag_density: f64,
    pub mu_d: f64,
    pub sd_d: f64,
    pub mu_o: f64,
    pub sd_o: f64,
    pub mu_i: f64,
    pub sd_i: f64,
    pub p_intercept: f64,
    pub p_diag: f64,
}

impl Scenario {
    pub fn of(kind: ScenarioKind) -> Self {
        let (density, mu_d, sd_d, mu_o, sd_o) = match kind {
            ScenarioKind::Sparse => (0.01, 0.3, 0.3, 0.3, 0.3),
            ScenarioKind::Intermediate => (0.1, 0.15, 0.15, 0.1, 0.1),
            ScenarioKind::Dense => (0.8, 0.15, 0.15, 0.01, 0.01),
        };
        Scenario {
            name: kind,
            offdiag_density: density,
            mu_d,
            sd_d,
            mu_o,
            sd_o,
            mu_i: 0.01,
            sd_i: 0.01,
            p_intercept: 0.1,
            p_diag: 0.8,
        }
    }

    fn validate(&self) -> Result<()> {
        let probs = [self.offdiag_density, self.p_intercept, self.p_diag];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!("scenario {} has a probability outside [0, 1]", self.name)));
        }
        if [self.sd_d, self.sd_o, self.sd_i].iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("scenario {} has an invalid standard deviation", self.name)));
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn draw_once<R: Rng + ?Sized>(s: &Scenario, m: usize, rng: &mut R) -> DMatrix<f64> {
    let include = |p: f64, rng: &mut R| Bernoulli::new(p).expect("validated probability").sample(rng);
    let normal = |mu: f64, sd: f64| Normal::new(mu, sd).expect("validated sd");
    let (ni, nd, no) = (normal(s.mu_i, s.sd_i), normal(s.mu_d, s.sd_d), normal(s.mu_o, s.sd_o));
    let mut b = DMatrix::zeros(m, m + 1);
    for i in 0..m {
        if include(s.p_intercept, rng) {
            b[(i, 0)] = ni.sample(rng);
        }
        for j in 0..m {
            let (p, dist) = if i == j { (s.p_diag, &nd) } else { (s.offdiag_density, &no) };
            if include(p, rng) {
                b[(i, j + 1)] = dist.sample(rng);
            }
        }
    }
    b
}

/// Draw an m×(m+1) coefficient matrix `[intercept | A₁]`, redrawing the
/// whole matrix until `A₁` has spectral radius below 0.99.
pub fn generate_coefficients<R: Rng + ?Sized>(scenario: &Scenario, m: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    scenario.validate()?;
    if m == 0 {
        return Err(Error::Shape("need at least one series".into()));
    }
    for _ in 0..MAX_STABILITY_REJECTIONS {
        let b = draw_once(scenario, m, rng);
        if spectral_radius(&b.columns(1, m).into_owned()) < STABILITY_BOUND {
            return Ok(b);
        }
    }
    Err(Error::Config(format!(
        "scenario {} produced {MAX_STABILITY_REJECTIONS} unstable matrices in a row at m={m}",
        scenario.name
    )))
}

/// Simulate `t + 1` rows of a VAR(1) with single-factor SV errors. The
/// first row is the initial lag, so a VAR(1) fit sees exactly `t`
/// observations.
pub fn generate_dataset<R: Rng + ?Sized>(b: &DMatrix<f64>, t: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let m = b.nrows();
    if b.ncols() != m + 1 {
        return Err(Error::Shape(format!("coefficients must be m×(m+1), got {:?}", b.shape())));
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let loadings: Vec<f64> = (0..m).map(|_| 0.001 + 0.001 * std.sample(rng)).collect();
    let rho_i = Uniform::new(0.85, 0.98).expect("valid range");
    let sd_i = Uniform::new(0.1, 0.3).expect("valid range");
    let idio: Vec<(f64, f64)> = (0..m).map(|_| (rho_i.sample(rng), sd_i.sample(rng))).collect();
    let (mu_i, rho_f, sd_f) = (-12.0, 0.99, 0.1);

    let stationary = |mu: f64, rho: f64, sd: f64, rng: &mut R| mu + sd / (1.0 - rho * rho).sqrt() * std.sample(rng);
    let mut h: Vec<f64> = idio.iter().map(|&(r, s)| stationary(mu_i, r, s, rng)).collect();
    let mut hf = stationary(0.0, rho_f, sd_f, rng);
    let total = DATA_BURNIN + t + 1;
    let mut y = DMatrix::zeros(total, m);
    let mut prev = vec![0.0; m];
    for step in 0..total {
        hf = rho_f * hf + sd_f * std.sample(rng);
        let f = (hf / 2.0).exp() * std.sample(rng);
        for (hi, &(r, s)) in h.iter_mut().zip(&idio) {
            *hi = mu_i + r * (*hi - mu_i) + s * std.sample(rng);
        }
        let mut next = vec![0.0; m];
        for i in 0..m {
            let mean = b[(i, 0)] + (0..m).map(|j| b[(i, j + 1)] * prev[j]).sum::<f64>();
            next[i] = mean + loadings[i] * f + (h[i] / 2.0).exp() * std.sample(rng);
        }
        for i in 0..m {
            y[(step, i)] = next[i];
        }
        prev = next;
    }
    Ok(y.rows(DATA_BURNIN, t + 1).into_owned())
}

/// Simulate `t + 1` rows from a VAR(1) with own-lag coefficient 0.3 and a
/// `q`-factor SV error: loadings N(0, 1), factor log-variances with
/// (μ, ρ, ς) = (0, 0.95, 0.2), idiosyncratic ones with (ln 0.25, 0.9, 0.2).
pub fn generate_factor_dataset<R: Rng + ?Sized>(m: usize, q: usize, t: usize, rng: &mut R) -> DMatrix<f64> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let lam = DMatrix::from_fn(m, q, |_, _| std.sample(rng));
    let stationary = |mu: f64, rho: f64, sd: f64, rng: &mut R| mu + sd / (1.0 - rho * rho).sqrt() * std.sample(rng);
    let mu_i = 0.25f64.ln();
    let mut hf: Vec<f64> = (0..q).map(|_| stationary(0.0, 0.95, 0.2, rng)).collect();
    let mut hi: Vec<f64> = (0..m).map(|_| stationary(mu_i, 0.9, 0.2, rng)).collect();
    let total = DATA_BURNIN + t + 1;
    let mut y = DMatrix::zeros(total, m);
    for s in 0..total {
        let f: Vec<f64> = hf
            .iter_mut()
            .map(|h| {
                *h = 0.95 * *h + 0.2 * std.sample(rng);
                (*h / 2.0).exp() * std.sample(rng)
            })
            .collect();
        for i in 0..m {
            hi[i] = mu_i + 0.9 * (hi[i] - mu_i) + 0.2 * std.sample(rng);
            let prev = if s > 0 { y[(s - 1, i)] } else { 0.0 };
            let common: f64 = (0..q).map(|j| lam[(i, j)] * f[j]).sum();
            y[(s, i)] = 0.3 * prev + common + (hi[i] / 2.0).exp() * std.sample(rng);
        }
    }
    y.rows(DATA_BURNIN, t + 1).into_owned()
}

pub fn rmse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() || truth.is_empty() {
        return Err(Error::Shape(format!("estimate {:?} vs truth {:?}", estimate.shape(), truth.shape())));
    }
    Ok(((estimate - truth).norm_squared() / truth.len() as f64).sqrt())
}

/// Equation-by-equation least squares, `None` when `k ≥ T`.
pub fn ols(data: &VarData<f64>) -> Option<DMatrix<f64>> {
    let (n, k) = (data.t(), data.layout.k());
    if k >= n {
        return None;
    }
    let qr = data.x.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    // thin QR: R β = Q'y, k×m
    let coef = r.solve_upper_triangular(&(q.transpose() * &data.y))?;
    Some(coef.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    DlHalf,
    DlOneOverK,
    Ng1,
    Ng01,
    Minnesota1e3,
    Minnesota1e4,
    Ols,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::DlHalf,
        Estimator::DlOneOverK,
        Estimator::Ng1,
        Estimator::Ng01,
        Estimator::Minnesota1e3,
        Estimator::Minnesota1e4,
        Estimator::Ols,
    ];

    /// Short tag used on the command line and in CSV files.
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::DlHalf => "DL12",
            Estimator::DlOneOverK => "DL1K",
            Estimator::Ng1 => "NG1",
            Estimator::Ng01 => "NG01",
            Estimator::Minnesota1e3 => "MN1e-3",
            Estimator::Minnesota1e4 => "MN1e-4",
            Estimator::Ols => "OLS",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::DlHalf => "DL(1/2)",
            Estimator::DlOneOverK => "DL(1/K)",
            Estimator::Ng1 => "NG(1)",
            Estimator::Ng01 => "NG(0.1)",
            Estimator::Minnesota1e3 => "Minnesota(0.001)",
            Estimator::Minnesota1e4 => "Minnesota(0.0001)",
            Estimator::Ols => "OLS",
        }
    }

    pub fn prior(self) -> Option<PriorSpec> {
        Some(match self {
            Estimator::DlHalf => PriorSpec::dl(0.5),
            Estimator::DlOneOverK => PriorSpec::Dl { a: Concentration::OneOverK },
            Estimator::Ng1 => PriorSpec::ng(1.0),
            Estimator::Ng01 => PriorSpec::ng(0.1),
            Estimator::Minnesota1e3 => PriorSpec::minnesota(0.001),
            Estimator::Minnesota1e4 => PriorSpec::minnesota(0.0001),
            Estimator::Ols => return None,
        })
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Estimator::ALL
            .into_iter()
            .find(|e| e.tag().eq_ignore_ascii_case(t) || e.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Config(format!("unknown estimator {t:?}")))
    }
}

/// MCMC settings shared by every Bayesian estimator in a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub draws: usize,
    pub burnin: usize,
    pub q: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { draws: 2000, burnin: 1000, q: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub scenarios: Vec<ScenarioKind>,
    pub t_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub reps: usize,
    #[serde(default)]
    pub chain: ChainSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: ScenarioKind,
    pub t: usize,
    pub m: usize,
    pub estimator: Estimator,
    pub replicate: usize,
    pub rmse: f64,
}

/// Median RMSE of one grid cell; `relative` divides by the DL(1/K) median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotCell {
    pub scenario: ScenarioKind,
    pub t: usize,
    pub m: usize,
    pub estimator: Estimator,
    pub dne: bool,
    pub median: Option<f64>,
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub results: Vec<SimResult>,
    pub pivot: Vec<PivotCell>,
}

/// Whether OLS is undefined for this cell (`k ≥ T` with intercept and one lag).
pub fn ols_dne(m: usize, t: usize) -> bool {
    m + 1 >= t
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Fit one estimator and return its posterior-mean (or OLS) coefficients.
pub fn estimate(estimator: Estimator, data: &VarData<f64>, chain: &ChainSettings, seed: u64) -> Result<Option<DMatrix<f64>>> {
    match estimator.prior() {
        None => Ok(ols(data)),
        Some(prior) => {
            let spec = ModelSpec::new(1, chain.q, prior, chain.draws, chain.burnin, seed);
            Ok(Some(run_chain(&spec, data, |_, _| Ok(()))?.coefficient_mean()))
        }
    }
}

/// Run one replicate of one cell: draw B and data, then score every estimator.
pub fn run_replicate(
    scenario: ScenarioKind,
    t: usize,
    m: usize,
    replicate: usize,
    estimators: &[Estimator],
    chain: &ChainSettings,
    key: u64,
) -> Result<Vec<SimResult>> {
    let mut rng = substream(key, Block::Replicate, replicate as u64);
    let truth = generate_coefficients(&Scenario::of(scenario), m, &mut rng)?;
    let levels = generate_dataset(&truth, t, &mut rng)?;
    let data = VarData::from_levels(&levels, 1, true)?;
    let mut out = Vec::with_capacity(estimators.len());
    for &est in estimators {
        let seed = next_key(&mut rng);
        if let Some(b) = estimate(est, &data, chain, seed)? {
            out.push(SimResult { scenario, t, m, estimator: est, replicate, rmse: rmse(&b, &truth)? });
        }
    }
    Ok(out)
}

/// Relative-median pivot from per-replicate results.
pub fn pivot(results: &[SimResult], grid: &GridSpec) -> Vec<PivotCell> {
    let mut cells = Vec::new();
    for &scenario in &grid.scenarios {
        for &t in &grid.t_list {
            for &m in &grid.m_list {
                let med = |e: Estimator| {
                    let mut v: Vec<f64> = results
                        .iter()
                        .filter(|r| r.scenario == scenario && r.t == t && r.m == m && r.estimator == e)
                        .map(|r| r.rmse)
                        .collect();
                    (!v.is_empty()).then(|| median(&mut v))
                };
                let reference = med(Estimator::DlOneOverK);
                for &estimator in &grid.estimators {
                    let dne = estimator == Estimator::Ols && ols_dne(m, t);
                    let median = if dne { None } else { med(estimator) };
                    let relative = match (median, reference) {
                        (Some(a), Some(r)) if r > 0.0 => Some(a / r),
                        _ => None,
                    };
                    cells.push(PivotCell { scenario, t, m, estimator, dne, median, relative });
                }
            }
        }
    }
    cells
}

/// Run every (scenario, T, m, replicate) in parallel with derived seeds.
pub fn run_scenario_grid(grid: &GridSpec, seed: u64) -> Result<GridResult> {
    if grid.reps == 0 || grid.estimators.is_empty() {
        return Err(Error::Config("grid needs at least one replicate and one estimator".into()));
    }
    if grid.t_list.iter().any(|&t| t < 2) || grid.m_list.contains(&0) {
        return Err(Error::Config("grid needs T ≥ 2 and m ≥ 1".into()));
    }
    let mut jobs = Vec::new();
    let mut base = stream_from_seed(seed);
    for &s in &grid.scenarios {
        for &t in &grid.t_list {
            for &m in &grid.m_list {
                let key = next_key(&mut base);
                jobs.extend((0..grid.reps).map(|r| (s, t, m, r, key)));
            }
        }
    }
    let nested: Vec<Vec<SimResult>> = jobs
        .par_iter()
        .map(|&(s, t, m, r, key)| run_replicate(s, t, m, r, &grid.estimators, &grid.chain, key))
        .collect::<Result<_>>()?;
    let results: Vec<SimResult> = nested.into_iter().flatten().collect();
    let pivot = pivot(&results, grid);
    Ok(GridResult { results, pivot })
}
