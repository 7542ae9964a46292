//! Model specification, chain state and the Gibbs sweep.
//!
//! One sweep updates, in order: the coefficient rows given `z = y − FΛ'`,
//! the prior auxiliaries, the factors and then the loadings given
//! `ε = y − XB'`, and finally all `m + q` log-variance blocks.

use crate::error::{Error, Result};
use crate::factors::{sample_factors, sample_loadings, FactorState};
use crate::gausslin::{select_strategy, DenseSampler, EquationDesign, FastSampler, Strategy, StrategyPolicy};
use crate::layout::VarLayout;
use crate::rng::{next_key, stream_from_seed, substream, Block};
use crate::scalar::Real;
use crate::shrinkage::{PriorSpec, PriorState};
use crate::stochvol::{sample_sv_block, sv_forecast_step, MixtureTable, SvBlock, SvPriors};
use crate::store::{ArraySummary, ArrayStore, StorageMode};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Series count above which draws are kept as summaries only.
pub const FULL_STORAGE_MAX_M: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageChoice {
    #[default]
    Auto,
    Full,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    #[serde(default = "default_true")]
    pub intercept: bool,
    pub prior: PriorSpec,
    #[serde(default)]
    pub sv_priors: SvPriors,
    pub draws: usize,
    pub burnin: usize,
    #[serde(default = "default_one")]
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: StrategyPolicy,
    #[serde(default)]
    pub storage: StorageChoice,
    /// Hold `B` at `c` on each series' own first lag and zero elsewhere,
    /// skipping the coefficient and prior blocks.
    #[serde(default)]
    pub fixed_coefficient: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

impl ModelSpec {
    pub fn new(p: usize, q: usize, prior: PriorSpec, draws: usize, burnin: usize, seed: u64) -> Self {
        ModelSpec {
            p,
            q,
            intercept: true,
            prior,
            sv_priors: SvPriors::default(),
            draws,
            burnin,
            thin: 1,
            seed,
            strategy: StrategyPolicy::default(),
            storage: StorageChoice::Auto,
            fixed_coefficient: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("lag order p must be at least 1".into()));
        }
        if self.draws == 0 {
            return Err(Error::Config("draws must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if let Some(c) = self.fixed_coefficient {
            if !c.is_finite() {
                return Err(Error::Config(format!("fixed coefficient must be finite, got {c}")));
            }
        }
        self.prior.validate()?;
        self.sv_priors.validate()
    }

    pub fn layout(&self, m: usize) -> VarLayout {
        VarLayout::new(m, self.p, self.intercept)
    }

    pub fn retained(&self) -> usize {
        self.draws / self.thin
    }

    pub fn storage_mode(&self, m: usize) -> StorageMode {
        match self.storage {
            StorageChoice::Full => StorageMode::Full,
            StorageChoice::Summary => StorageMode::Summary,
            StorageChoice::Auto if m <= FULL_STORAGE_MAX_M => StorageMode::Full,
            StorageChoice::Auto => StorageMode::Summary,
        }
    }
}

/// Responses and regressors of a VAR, aligned by row.
#[derive(Debug, Clone, PartialEq)]
pub struct VarData<T: Real> {
    /// T×m.
    pub y: DMatrix<T>,
    /// T×k, row t is `[1, y_{t−1}', …, y_{t−p}']`.
    pub x: DMatrix<T>,
    pub layout: VarLayout,
}

impl<T: Real> VarData<T> {
    /// Build from a panel of levels (rows are time). The first `p` rows only
    /// serve as lags.
    pub fn from_levels(levels: &DMatrix<T>, p: usize, intercept: bool) -> Result<Self> {
        let (n, m) = levels.shape();
        if m == 0 || p == 0 || n <= p {
            return Err(Error::Shape(format!("need more than p={p} rows of m ≥ 1 series, got {n}x{m}")));
        }
        if !levels.iter().all(|v| v.is_finite_real()) {
            return Err(Error::Data("panel contains non-finite values".into()));
        }
        let layout = VarLayout::new(m, p, intercept);
        let rows = n - p;
        let y = levels.rows(p, rows).into_owned();
        let x = Self::regressors(levels, p, intercept, p..n);
        Ok(VarData { y, x, layout })
    }

    /// Regressor rows for target times `range` of `levels`.
    pub fn regressors(levels: &DMatrix<T>, p: usize, intercept: bool, range: std::ops::Range<usize>) -> DMatrix<T> {
        let m = levels.ncols();
        let layout = VarLayout::new(m, p, intercept);
        let mut x = DMatrix::zeros(range.len(), layout.k());
        for (r, t) in range.enumerate() {
            if intercept {
                x[(r, 0)] = T::one();
            }
            for lag in 1..=p {
                for i in 0..m {
                    x[(r, layout.column(lag, i))] = levels[(t - lag, i)];
                }
            }
        }
        x
    }

    pub fn new(y: DMatrix<T>, x: DMatrix<T>, layout: VarLayout) -> Result<Self> {
        if y.nrows() != x.nrows() || y.ncols() != layout.m || x.ncols() != layout.k() {
            return Err(Error::Shape(format!(
                "y is {:?}, x is {:?}, layout expects m={} k={}",
                y.shape(),
                x.shape(),
                layout.m,
                layout.k()
            )));
        }
        Ok(VarData { y, x, layout })
    }

    pub fn t(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T: Real> {
    /// m×k.
    pub b: DMatrix<T>,
    pub prior: PriorState<T>,
    pub fac: FactorState<T>,
    pub iteration: usize,
}

impl<T: Real> ChainState<T> {
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, data: &VarData<T>, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layout = data.layout;
        let (n, m) = (data.t(), data.m());
        let levels: Vec<f64> = (0..m)
            .map(|i| {
                let col: Vec<f64> = data.y.column(i).iter().map(|v| v.as_f64()).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                var.max(1e-12).ln()
            })
            .collect();
        let mut b = DMatrix::zeros(m, layout.k());
        if let Some(c) = spec.fixed_coefficient {
            for i in 0..m {
                b[(i, layout.column(1, i))] = T::of(c);
            }
        }
        Ok(ChainState {
            b,
            prior: spec.prior.init(layout.total())?,
            fac: FactorState::new(spec.q, n, &levels, rng),
            iteration: 0,
        })
    }

    /// `vec(B)` in row-major order.
    pub fn vec_b(&self) -> Vec<T> {
        self.b.transpose().as_slice().to_vec()
    }

    pub fn residuals(&self, data: &VarData<T>) -> DMatrix<T> {
        &data.y - &data.x * self.b.transpose()
    }

    pub fn freeze_adaptation(&mut self) {
        for blk in self.fac.idio_logvar.iter_mut().chain(self.fac.factor_logvar.iter_mut()) {
            blk.freeze();
        }
    }

    /// Append one time point: log-variances step forward and the new
    /// factor row is drawn from its prior. Used to warm-start an expanded
    /// window.
    pub fn extend_by_one<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for blk in &mut self.fac.idio_logvar {
            blk.extend_by_one(rng);
        }
        let q = self.fac.q();
        let n = self.fac.t();
        let mut f = self.fac.factors.clone().insert_row(n, T::zero());
        for j in 0..q {
            let blk = &mut self.fac.factor_logvar[j];
            blk.extend_by_one(rng);
            f[(n, j)] = (blk.last() * T::of(0.5)).exp() * T::of(crate::dists::std_normal(rng));
        }
        self.fac.factors = f;
    }

    fn ensure_finite(&self, block: &'static str) -> Result<()> {
        let sv_ok = |b: &SvBlock<T>| {
            b.h.iter().all(|v| v.is_finite_real())
                && b.mu.is_finite_real()
                && b.rho.is_finite_real()
                && b.sigma2_innov.is_finite_real()
        };
        let ok = match block {
            "coefficients" => self.b.iter().all(|v| v.is_finite_real()),
            "shrinkage" => self.prior.global().is_finite(),
            "factors" => self.fac.factors.iter().all(|v| v.is_finite_real()),
            "loadings" => self.fac.loadings.iter().all(|v| v.is_finite_real()),
            _ => self.fac.idio_logvar.iter().chain(&self.fac.factor_logvar).all(sv_ok),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::numerical(block, "non-finite values in state"))
        }
    }
}

/// Draw all coefficient rows given the current factors and volatilities.
pub fn sample_coefficients<T: Real, R: Rng + ?Sized>(
    state: &ChainState<T>,
    data: &VarData<T>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let (n, m, k) = (data.t(), data.m(), data.layout.k());
    let strategy = select_strategy(k, n, spec.strategy);
    let z = &data.y - state.fac.common_component();
    let key = next_key(rng);
    let rows: Vec<DVector<T>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let h = &state.fac.idio_logvar[i].h;
            let inv_sd: Vec<T> = (0..n).map(|t| (-h[t + 1] * T::of(0.5)).exp()).collect();
            let mut x = data.x.clone();
            for (t, s) in inv_sd.iter().enumerate() {
                x.row_mut(t).scale_mut(*s);
            }
            let zi = DVector::from_fn(n, |t, _| z[(t, i)] * inv_sd[t]);
            let design = EquationDesign::new(x, zi, state.prior.phi_for_equation(i, &data.layout))?;
            let mut r = substream(key, Block::Coefficients, i as u64);
            Ok(match strategy {
                Strategy::Dense => DenseSampler::new(&design)?.draw(&mut r),
                Strategy::Fast => FastSampler::new(&design)?.draw(&mut r),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(m, k, |i, j| rows[i][j]))
}

/// Path and parameter updates for every log-variance block.
pub fn update_volatilities<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    eps: &DMatrix<T>,
    priors: &SvPriors,
    rng: &mut R,
) -> Result<()> {
    let mixture = MixtureTable::standard();
    let eta = eps - state.fac.common_component();
    let key = next_key(rng);
    state
        .fac
        .idio_logvar
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(i, blk)| {
            let mut r = substream(key, Block::IdioVol, i as u64);
            let resid: Vec<T> = eta.column(i).iter().copied().collect();
            sample_sv_block(&resid, blk, &mixture, priors, &mut r)
        })?;
    let factors = &state.fac.factors;
    state
        .fac
        .factor_logvar
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(j, blk)| {
            let mut r = substream(key, Block::FactorVol, j as u64);
            let resid: Vec<T> = factors.column(j).iter().copied().collect();
            sample_sv_block(&resid, blk, &mixture, priors, &mut r)
        })
}

/// One full Gibbs sweep.
pub fn gibbs_sweep<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    data: &VarData<T>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<()> {
    let it = state.iteration;
    let tag = |e: Error| e.at_iteration(it);
    if spec.fixed_coefficient.is_none() {
        state.b = sample_coefficients(state, data, spec, rng).map_err(tag)?;
        state.ensure_finite("coefficients").map_err(tag)?;
        let vb = state.vec_b();
        state.prior.update(&vb, rng).map_err(tag)?;
        state.ensure_finite("shrinkage").map_err(tag)?;
    }
    let eps = state.residuals(data);
    state.fac.factors = sample_factors(&eps, &state.fac, rng).map_err(tag)?;
    state.ensure_finite("factors").map_err(tag)?;
    state.fac.loadings = sample_loadings(&eps, &state.fac, rng).map_err(tag)?;
    state.ensure_finite("loadings").map_err(tag)?;
    update_volatilities(state, &eps, &spec.sv_priors, rng).map_err(tag)?;
    state.ensure_finite("volatility").map_err(tag)?;
    state.iteration += 1;
    Ok(())
}

/// Latent quantities drawn per sweep under the DL prior.
pub fn state_dimension(m: u64, p: u64, q: u64, t: u64) -> u64 {
    let coef = m + m * m * p;
    coef + (2 * coef + 1) + q * t + m * q + (t + 1) * (m + q) + (3 * m + 2 * q)
}

#[derive(Debug, Clone)]
pub struct DrawStore {
    pub layout: VarLayout,
    pub q: usize,
    pub t: usize,
    /// Row-major `vec(B)`.
    pub coefficients: ArrayStore,
    /// Row-major Λ.
    pub loadings: ArrayStore,
    /// Series-major `h_{i,0..T}`.
    pub idio_logvar: ArrayStore,
    pub factor_logvar: ArrayStore,
    /// `(μ_i, ρ_i, ς²_i)` for each series, then `(ρ_j, ς²_j)` per factor.
    pub sv_params: ArrayStore,
    pub global_shrinkage: ArrayStore,
}

impl DrawStore {
    pub fn new(layout: VarLayout, q: usize, t: usize, mode: StorageMode) -> Self {
        let m = layout.m;
        DrawStore {
            layout,
            q,
            t,
            coefficients: ArrayStore::new(layout.total(), mode),
            loadings: ArrayStore::new(m * q, mode),
            idio_logvar: ArrayStore::new(m * (t + 1), mode),
            factor_logvar: ArrayStore::new(q * (t + 1), mode),
            sv_params: ArrayStore::new(3 * m + 2 * q, StorageMode::Full),
            global_shrinkage: ArrayStore::new(1, StorageMode::Full),
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn record<T: Real>(&mut self, s: &ChainState<T>) -> Result<()> {
        let f = |v: &T| v.as_f64();
        self.coefficients.push(&s.vec_b().iter().map(f).collect::<Vec<_>>())?;
        self.loadings
            .push(&s.fac.loadings.transpose().iter().map(f).collect::<Vec<_>>())?;
        let paths = |blocks: &[SvBlock<T>]| blocks.iter().flat_map(|b| b.h.iter().map(f)).collect::<Vec<_>>();
        self.idio_logvar.push(&paths(&s.fac.idio_logvar))?;
        self.factor_logvar.push(&paths(&s.fac.factor_logvar))?;
        let mut params = Vec::with_capacity(self.sv_params.dim());
        for b in &s.fac.idio_logvar {
            params.extend([b.mu.as_f64(), b.rho.as_f64(), b.sigma2_innov.as_f64()]);
        }
        for b in &s.fac.factor_logvar {
            params.extend([b.rho.as_f64(), b.sigma2_innov.as_f64()]);
        }
        self.sv_params.push(&params)?;
        self.global_shrinkage.push(&[s.prior.global()])
    }

    /// Posterior mean of `B` as an m×k matrix.
    pub fn coefficient_mean(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.layout.m, self.layout.k(), self.coefficients.mean())
    }
}

/// Run burn-in plus `draws` sweeps, retaining every `thin`-th draw.
/// `observer` sees each retained state with its retained index.
pub fn run_chain<T: Real, F>(spec: &ModelSpec, data: &VarData<T>, mut observer: F) -> Result<DrawStore>
where
    F: FnMut(usize, &ChainState<T>) -> Result<()>,
{
    spec.validate()?;
    if data.layout != spec.layout(data.m()) {
        return Err(Error::Shape("data layout does not match the model spec".into()));
    }
    let mut rng = stream_from_seed(spec.seed);
    let mut state = ChainState::init(spec, data, &mut rng)?;
    let mut store = DrawStore::new(data.layout, spec.q, data.t(), spec.storage_mode(data.m()));
    run_from(&mut state, spec, data, spec.burnin, &mut rng, Some(&mut store), &mut observer)?;
    Ok(store)
}

/// Continue an existing chain: `burnin` sweeps, then `spec.draws` sweeps
/// with retention every `spec.thin`. Retained states go to `store` when
/// given and always to `observer`.
pub fn run_from<T: Real, R: Rng + ?Sized, F>(
    state: &mut ChainState<T>,
    spec: &ModelSpec,
    data: &VarData<T>,
    burnin: usize,
    rng: &mut R,
    mut store: Option<&mut DrawStore>,
    observer: &mut F,
) -> Result<()>
where
    F: FnMut(usize, &ChainState<T>) -> Result<()>,
{
    for _ in 0..burnin {
        gibbs_sweep(state, data, spec, rng)?;
    }
    state.freeze_adaptation();
    let mut kept = 0;
    for d in 1..=spec.draws {
        gibbs_sweep(state, data, spec, rng)?;
        if d % spec.thin == 0 {
            if let Some(s) = store.as_deref_mut() {
                s.record(state).map_err(|e| e.at_iteration(state.iteration))?;
            }
            observer(kept, state)?;
            kept += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub coefficients: ArraySummary,
    pub loadings: ArraySummary,
    pub idio_logvar: ArraySummary,
    pub factor_logvar: ArraySummary,
    pub sv_params: ArraySummary,
    /// Effective sample size of each SV parameter trace.
    pub sv_params_ess: Vec<f64>,
    pub global_shrinkage_ess: f64,
}

pub fn summarize(store: &DrawStore) -> Result<PosteriorSummary> {
    if store.is_empty() {
        return Err(Error::Data("cannot summarize an empty draw store".into()));
    }
    let ess = |s: &ArrayStore, j: usize| crate::store::effective_sample_size(&s.trace(j).unwrap_or_default());
    Ok(PosteriorSummary {
        coefficients: ArraySummary::from_store(&store.coefficients)?,
        loadings: ArraySummary::from_store(&store.loadings)?,
        idio_logvar: ArraySummary::from_store(&store.idio_logvar)?,
        factor_logvar: ArraySummary::from_store(&store.factor_logvar)?,
        sv_params: ArraySummary::from_store(&store.sv_params)?,
        sv_params_ess: (0..store.sv_params.dim()).map(|j| ess(&store.sv_params, j)).collect(),
        global_shrinkage_ess: ess(&store.global_shrinkage, 0),
    })
}

/// One-step-ahead log-variance draws for every block, idiosyncratic first.
pub fn propagate_volatilities<T: Real, R: Rng + ?Sized>(state: &ChainState<T>, rng: &mut R) -> (Vec<T>, Vec<T>) {
    let idio = state.fac.idio_logvar.iter().map(|b| sv_forecast_step(b, rng)).collect();
    let fac = state.fac.factor_logvar.iter().map(|b| sv_forecast_step(b, rng)).collect();
    (idio, fac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_dimension_accounting() {
        assert_eq!(state_dimension(215, 1, 0, 124), 166_841);
        assert_eq!(state_dimension(215, 5, 50, 224), 776_341);
        assert_eq!(state_dimension(1, 1, 0, 1), 12);
    }

    #[test]
    fn regressor_layout() {
        let levels = DMatrix::from_fn(5, 2, |t, i| (10 * t + i) as f64);
        let d = VarData::from_levels(&levels, 2, true).unwrap();
        assert_eq!(d.t(), 3);
        // target row 0 is time 2; lag 1 is time 1, lag 2 is time 0
        assert_eq!(d.x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 10.0, 11.0, 0.0, 1.0]);
        assert_eq!(d.y.row(0).iter().copied().collect::<Vec<_>>(), vec![20.0, 21.0]);
    }

    #[test]
    fn spec_validation_and_retention() {
        let mut s = ModelSpec::new(1, 0, PriorSpec::dl(0.5), 2000, 1000, 1);
        assert_eq!(s.retained(), 2000);
        s.thin = 4;
        assert_eq!(s.retained(), 500);
        s.thin = 0;
        assert!(s.validate().is_err());
        assert_eq!(s.storage_mode(50), StorageMode::Full);
        assert_eq!(s.storage_mode(51), StorageMode::Summary);
    }
}
