//! One-step-ahead density forecasts scored over an expanding window.
//!
//! Each retained draw contributes a Gaussian predictive density with mean
//! `B x_{T+1}` and covariance `Λ diag(exp h*_f) Λ' + diag(exp h*)`, where the
//! log-variances `h*` are simulated one step ahead. Scores average these
//! densities on the log scale with a max shift.

use crate::dataio::Panel;
use crate::engine::{propagate_volatilities, run_from, ChainState, ModelSpec, VarData};
use crate::error::{Error, Result};
use crate::rng::{next_key, stream_from_seed, substream, Block};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Conditional-mean model being scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Variant {
    /// Coefficients estimated under `spec.prior`.
    VarFsv,
    /// Coefficients fixed at `c` on own first lags, zero elsewhere.
    FsvFixed { c: f64 },
}

impl Variant {
    pub fn label(&self, q: usize) -> String {
        match self {
            Variant::VarFsv => format!("VAR-FSV q={q}"),
            Variant::FsvFixed { c } => format!("FSV {c} q={q}"),
        }
    }
}

fn default_steps() -> usize {
    100
}

fn default_warm_burnin() -> usize {
    500
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Panel rows (including lags) in the first estimation window.
    pub initial_window: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub focus_variables: Vec<String>,
    pub variant: Variant,
    pub q: usize,
    /// Burn-in for refits after the first window when warm starting.
    #[serde(default = "default_warm_burnin")]
    pub warm_burnin: usize,
    /// Continue each refit from the previous window's final state.
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

impl ForecastConfig {
    pub fn validate(&self, panel: &Panel, p: usize) -> Result<Vec<usize>> {
        if self.steps == 0 {
            return Err(Error::Config("forecast needs at least one step".into()));
        }
        if self.initial_window <= p + 1 {
            return Err(Error::Config(format!("initial window of {} rows is too short for p={p}", self.initial_window)));
        }
        if self.initial_window + self.steps > panel.t() {
            return Err(Error::Config(format!(
                "initial window {} plus {} steps exceeds the {} available rows",
                self.initial_window,
                self.steps,
                panel.t()
            )));
        }
        if self.focus_variables.is_empty() {
            return Err(Error::Config("no focus variables given".into()));
        }
        self.focus_variables
            .iter()
            .map(|n| panel.column_index(n).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }
}

/// Per-step log predictive scores of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub label: String,
    /// Date of each scored observation.
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// Joint score over all focus variables.
    pub joint: Vec<f64>,
    /// `univariate[v][s]` for focus variable `v` at step `s`.
    pub univariate: Vec<Vec<f64>>,
}

impl ScoreSeries {
    pub fn cumulative(&self) -> Vec<f64> {
        self.joint
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    pub fn overall(&self) -> f64 {
        self.joint.iter().sum()
    }
}

/// Gaussian log-density via a Cholesky factor of `cov`.
pub fn gaussian_logpdf(y: &DVector<f64>, mean: &DVector<f64>, cov: DMatrix<f64>) -> Result<f64> {
    let n = y.len();
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::numerical("forecast", "predictive covariance is not positive definite"))?;
    let l = chol.l();
    let z = l
        .solve_lower_triangular(&(y - mean))
        .ok_or_else(|| Error::numerical("forecast", "singular predictive covariance"))?;
    let logdet: f64 = l.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * (n as f64 * LN_2PI + logdet + z.norm_squared()))
}

/// Everything one retained draw needs to score any subset: predictive mean
/// and the factor-structured covariance ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraw {
    pub mean: DVector<f64>,
    pub loadings: DMatrix<f64>,
    pub idio_var: Vec<f64>,
    pub factor_var: Vec<f64>,
}

impl PredictiveDraw {
    /// Draw `h*` one step ahead for `state` and assemble the predictive pieces.
    pub fn new<T: Real, R: Rng + ?Sized>(state: &ChainState<T>, x_next: &DVector<f64>, rng: &mut R) -> Result<Self> {
        let (idio, fac) = propagate_volatilities(state, rng);
        Self::with_logvars(state, x_next, &idio.iter().map(|v| v.as_f64()).collect::<Vec<_>>(), &fac.iter().map(|v| v.as_f64()).collect::<Vec<_>>())
    }

    /// As [`PredictiveDraw::new`] with given one-step log-variances.
    pub fn with_logvars<T: Real>(state: &ChainState<T>, x_next: &DVector<f64>, idio_h: &[f64], factor_h: &[f64]) -> Result<Self> {
        let b = state.b.map(|v| v.as_f64());
        if x_next.len() != b.ncols() || idio_h.len() != b.nrows() || factor_h.len() != state.fac.q() {
            return Err(Error::Shape("predictive inputs do not match the state".into()));
        }
        Ok(PredictiveDraw {
            mean: &b * x_next,
            loadings: state.fac.loadings.map(|v| v.as_f64()),
            idio_var: idio_h.iter().map(|h| h.exp()).collect(),
            factor_var: factor_h.iter().map(|h| h.exp()).collect(),
        })
    }

    /// Covariance restricted to `subset`.
    pub fn covariance(&self, subset: &[usize]) -> DMatrix<f64> {
        let l = self.loadings.select_rows(subset);
        let v = DMatrix::from_diagonal(&DVector::from_vec(self.factor_var.clone()));
        let mut c = &l * v * l.transpose();
        c = (&c + c.transpose()) * 0.5;
        for (r, &i) in subset.iter().enumerate() {
            c[(r, r)] += self.idio_var[i];
        }
        c
    }

    pub fn logdensity(&self, y_obs: &DVector<f64>, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() || subset.iter().any(|&i| i >= self.mean.len()) || y_obs.len() != self.mean.len() {
            return Err(Error::Shape("subset or observation does not match the model".into()));
        }
        let y = DVector::from_iterator(subset.len(), subset.iter().map(|&i| y_obs[i]));
        let mu = DVector::from_iterator(subset.len(), subset.iter().map(|&i| self.mean[i]));
        gaussian_logpdf(&y, &mu, self.covariance(subset))
    }
}

/// Log predictive density of `y_obs[subset]` under one retained draw, with
/// the log-variances simulated one step ahead.
pub fn predictive_logdensity<T: Real, R: Rng + ?Sized>(
    state: &ChainState<T>,
    x_next: &DVector<f64>,
    y_obs: &DVector<f64>,
    subset: &[usize],
    rng: &mut R,
) -> Result<f64> {
    PredictiveDraw::new(state, x_next, rng)?.logdensity(y_obs, subset)
}

/// `log(mean(exp(l)))` with a max shift.
pub fn log_predictive_score(l: &[f64]) -> Result<f64> {
    if l.is_empty() {
        return Err(Error::Data("log predictive score of zero draws".into()));
    }
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    if !max.is_finite() {
        return Err(Error::numerical("forecast", "non-finite log density"));
    }
    let s: f64 = l.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (s / l.len() as f64).ln())
}

/// Joint and per-variable scores of one step from its retained draws.
fn score_draws(draws: &[PredictiveDraw], y_obs: &DVector<f64>, focus: &[usize]) -> Result<(f64, Vec<f64>)> {
    let per: Vec<(f64, Vec<f64>)> = draws
        .par_iter()
        .map(|d| {
            let joint = d.logdensity(y_obs, focus)?;
            let uni = focus.iter().map(|&i| d.logdensity(y_obs, &[i])).collect::<Result<Vec<_>>>()?;
            Ok((joint, uni))
        })
        .collect::<Result<_>>()?;
    let joint = log_predictive_score(&per.iter().map(|p| p.0).collect::<Vec<_>>())?;
    let uni = (0..focus.len())
        .map(|v| log_predictive_score(&per.iter().map(|p| p.1[v]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok((joint, uni))
}

fn step_inputs(levels: &DMatrix<f64>, spec: &ModelSpec, end: usize) -> Result<(VarData<f64>, DVector<f64>, DVector<f64>)> {
    let data = VarData::from_levels(&levels.rows(0, end).into_owned(), spec.p, spec.intercept)?;
    let x = VarData::regressors(levels, spec.p, spec.intercept, end..end + 1);
    Ok((data, x.row(0).transpose(), levels.row(end).transpose()))
}

/// Run the chain on one window and collect predictive draws.
fn fit_and_collect<R: Rng + ?Sized>(
    state: &mut ChainState<f64>,
    spec: &ModelSpec,
    data: &VarData<f64>,
    burnin: usize,
    x_next: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<PredictiveDraw>> {
    let key = next_key(rng);
    let mut draws = Vec::with_capacity(spec.retained());
    run_from(state, spec, data, burnin, rng, None, &mut |i, s: &ChainState<f64>| {
        let mut r = substream(key, Block::Forecast, i as u64);
        draws.push(PredictiveDraw::new(s, x_next, &mut r)?);
        Ok(())
    })?;
    Ok(draws)
}

/// Effective model spec for a forecasting variant.
pub fn variant_spec(cfg: &ForecastConfig, spec: &ModelSpec) -> ModelSpec {
    let mut s = spec.clone();
    s.q = cfg.q;
    s.fixed_coefficient = match cfg.variant {
        Variant::VarFsv => None,
        Variant::FsvFixed { c } => Some(c),
    };
    s
}

/// Score `cfg.steps` one-step-ahead forecasts, refitting on a window that
/// grows by one row per step.
pub fn expanding_window_run(cfg: &ForecastConfig, panel: &Panel, spec: &ModelSpec) -> Result<ScoreSeries> {
    let focus = cfg.validate(panel, spec.p)?;
    let spec = variant_spec(cfg, spec);
    spec.validate()?;
    let levels = &panel.values;
    let ends: Vec<usize> = (0..cfg.steps).map(|s| cfg.initial_window + s).collect();

    let scores: Vec<(f64, Vec<f64>)> = if cfg.warm_start {
        let mut rng = stream_from_seed(spec.seed);
        let mut state: Option<ChainState<f64>> = None;
        let mut out = Vec::with_capacity(cfg.steps);
        for &end in &ends {
            let (data, x_next, y_obs) = step_inputs(levels, &spec, end)?;
            let burnin = match state.as_mut() {
                Some(s) => {
                    s.extend_by_one(&mut rng);
                    cfg.warm_burnin
                }
                None => {
                    state = Some(ChainState::init(&spec, &data, &mut rng)?);
                    spec.burnin
                }
            };
            let st = state.as_mut().expect("initialised above");
            let draws = fit_and_collect(st, &spec, &data, burnin, &x_next, &mut rng)?;
            out.push(score_draws(&draws, &y_obs, &focus)?);
        }
        out
    } else {
        ends.par_iter()
            .enumerate()
            .map(|(s, &end)| {
                let (data, x_next, y_obs) = step_inputs(levels, &spec, end)?;
                let mut rng = substream(spec.seed, Block::Forecast, s as u64);
                let mut state = ChainState::init(&spec, &data, &mut rng)?;
                let draws = fit_and_collect(&mut state, &spec, &data, spec.burnin, &x_next, &mut rng)?;
                score_draws(&draws, &y_obs, &focus)
            })
            .collect::<Result<_>>()?
    };

    let univariate = (0..focus.len()).map(|v| scores.iter().map(|s| s.1[v]).collect()).collect();
    Ok(ScoreSeries {
        label: cfg.variant.label(cfg.q),
        dates: ends.iter().map(|&e| panel.dates[e].clone()).collect(),
        names: cfg.focus_variables.clone(),
        joint: scores.iter().map(|s| s.0).collect(),
        univariate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    /// `(label, total joint score)`.
    pub overall: Vec<(String, f64)>,
    /// `(label, variable, total score)`.
    pub univariate: Vec<(String, String, f64)>,
    /// Cumulative joint score minus the benchmark's, per series.
    pub cumulative_relative: Vec<(String, Vec<f64>)>,
    pub dates: Vec<String>,
}

/// Aggregate aligned score series. `benchmark` indexes the series the
/// cumulative paths are measured against.
pub fn score_report(series: &[ScoreSeries], benchmark: usize) -> Result<ScoreReport> {
    let first = series.first().ok_or_else(|| Error::Data("no score series to report".into()))?;
    let bench = series
        .get(benchmark)
        .ok_or_else(|| Error::Config(format!("benchmark index {benchmark} out of range")))?;
    for s in series {
        if s.dates != first.dates || s.names != first.names || s.joint.len() != s.dates.len() {
            return Err(Error::Data(format!("score series {:?} is not aligned with {:?}", s.label, first.label)));
        }
    }
    let base = bench.cumulative();
    Ok(ScoreReport {
        overall: series.iter().map(|s| (s.label.clone(), s.overall())).collect(),
        univariate: series
            .iter()
            .flat_map(|s| s.names.iter().zip(&s.univariate).map(|(n, u)| (s.label.clone(), n.clone(), u.iter().sum())))
            .collect(),
        cumulative_relative: series
            .iter()
            .map(|s| (s.label.clone(), s.cumulative().iter().zip(&base).map(|(a, b)| a - b).collect()))
            .collect(),
        dates: first.dates.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lps_trivial_cases() {
        assert_eq!(log_predictive_score(&[-3.5; 4]).unwrap(), -3.5);
        let v = log_predictive_score(&[0.2f64.ln(), 0.4f64.ln()]).unwrap();
        assert!((v - 0.3f64.ln()).abs() < 1e-15);
        assert!(log_predictive_score(&[]).is_err());
        assert!(log_predictive_score(&[-1e4, -1e4 - 1.0]).unwrap().is_finite());
    }

    #[test]
    fn standard_normal_at_zero() {
        let v = gaussian_logpdf(&DVector::zeros(1), &DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-15);
    }
}
