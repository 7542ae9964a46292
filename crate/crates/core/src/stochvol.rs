//! Log-variance paths and AR(1) parameters.
//!
//! A block holds `h_0, …, h_T` with `h_0` drawn from the stationary law and
//! `h_t` paired with observation `t`. Paths are drawn by the auxiliary
//! normal-mixture linearization of `log r²` and forward filtering, backward
//! sampling. Parameters `(μ, ρ, ς)` move jointly by an adaptive random-walk
//! Metropolis step on `(μ, atanh ρ, log ς)`.

use crate::dists::std_normal;
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Stand-in for a squared residual that is exactly zero (or underflows).
/// Nonzero residuals are linearized without it, so tiny variances are not
/// pulled up towards the offset.
pub const LOG_OFFSET: f64 = 1e-8;

/// `log r²`, guarded at zero.
pub fn linearize(r: f64) -> f64 {
    let sq = r * r;
    if sq > 0.0 {
        sq.ln()
    } else {
        LOG_OFFSET.ln()
    }
}

/// Normal mixture approximating the law of `log χ²₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTable {
    pub prob: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl MixtureTable {
    /// The standard ten-component table.
    pub fn standard() -> Self {
        MixtureTable {
            prob: vec![
                0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
            ],
            mean: vec![
                1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65,
            ],
            var: vec![
                0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
            ],
        }
    }

    /// One exact normal component, for testing the filter in isolation.
    pub fn single(mean: f64, var: f64) -> Self {
        MixtureTable {
            prob: vec![1.0],
            mean: vec![mean],
            var: vec![var],
        }
    }

    pub fn mixture_mean(&self) -> f64 {
        self.prob.iter().zip(&self.mean).map(|(p, m)| p * m).sum()
    }

    pub fn mixture_variance(&self) -> f64 {
        let mu = self.mixture_mean();
        self.prob
            .iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(p, (m, v))| p * (v + (m - mu) * (m - mu)))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvKind {
    Idiosyncratic,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvPriors {
    /// Prior variance of `μ`.
    pub m_mu: f64,
    pub a0: f64,
    pub b0: f64,
    /// `ς² ~ Gamma(1/2, rate 1/(2ξ))`.
    pub xi: f64,
}

impl Default for SvPriors {
    fn default() -> Self {
        SvPriors {
            m_mu: 10.0,
            a0: 20.0,
            b0: 1.5,
            xi: 1.0,
        }
    }
}

impl SvPriors {
    pub fn sigma2_prior_mean(&self) -> f64 {
        // shape / rate
        0.5 / (1.0 / (2.0 * self.xi))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_mu", self.m_mu), ("a0", self.a0), ("b0", self.b0), ("xi", self.xi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("SV prior {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// State of the adaptive random-walk proposal for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct MhTuning {
    pub log_scale: f64,
    pub steps: usize,
    pub accepted: usize,
    pub frozen: bool,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl MhTuning {
    fn new(dim: usize) -> Self {
        MhTuning {
            log_scale: (2.38f64 / (dim as f64).sqrt()).ln(),
            steps: 0,
            accepted: 0,
            frozen: false,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    /// Proposal covariance: empirical once enough history exists.
    fn covariance(&self) -> DMatrix<f64> {
        let d = self.mean.len();
        let base = DMatrix::from_diagonal_element(d, d, 0.01);
        if self.steps < 100 {
            return base;
        }
        let emp = &self.m2 / (self.steps as f64 - 1.0);
        emp * 0.99 + base * 0.01 * 0.01
    }

    fn record(&mut self, phi: &DVector<f64>, accepted: bool) {
        self.steps += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.frozen {
            return;
        }
        let n = self.steps as f64;
        let delta = phi - &self.mean;
        self.mean += &delta / n;
        let delta2 = phi - &self.mean;
        self.m2 += &delta * delta2.transpose();
        let gamma = n.powf(-0.6);
        self.log_scale += gamma * (f64::from(u8::from(accepted)) - 0.25);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvBlock<T: Real> {
    /// `h_0 … h_T`.
    pub h: DVector<T>,
    pub mu: T,
    pub rho: T,
    pub sigma2_innov: T,
    pub kind: SvKind,
    pub tuning: MhTuning,
}

impl<T: Real> SvBlock<T> {
    /// Flat path at `level` with `ρ = 0.9`, `ς² = 0.01`.
    pub fn new(kind: SvKind, t: usize, level: f64) -> Self {
        let mu = match kind {
            SvKind::Idiosyncratic => level,
            SvKind::Factor => 0.0,
        };
        SvBlock {
            h: DVector::from_element(t + 1, T::of(mu)),
            mu: T::of(mu),
            rho: T::of(0.9),
            sigma2_innov: T::of(0.01),
            kind,
            tuning: MhTuning::new(match kind {
                SvKind::Idiosyncratic => 3,
                SvKind::Factor => 2,
            }),
        }
    }

    /// Number of observations the path covers.
    pub fn len(&self) -> usize {
        self.h.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last(&self) -> T {
        self.h[self.h.len() - 1]
    }

    /// Stop adapting the proposal.
    pub fn freeze(&mut self) {
        self.tuning.frozen = true;
    }

    /// Append one more time point for an expanded window.
    pub fn extend_by_one<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let next = sv_forecast_step(self, rng);
        let n = self.h.len();
        self.h = self.h.clone().insert_row(n, next);
    }
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// Linearized observations `log(r² + c) − m_s` with their mixture
/// variances `v_s`, for the indicators drawn alongside a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearized {
    pub obs: Vec<f64>,
    pub var: Vec<f64>,
}

/// Draw `h_0 … h_T` given residuals `r_1 … r_T` whose variance is `exp(h_t)`.
pub fn sample_sv_path<T: Real, R: Rng + ?Sized>(
    residuals: &[T],
    block: &SvBlock<T>,
    mixture: &MixtureTable,
    rng: &mut R,
) -> Result<DVector<T>> {
    sample_sv_path_linearized(residuals, block, mixture, rng).map(|(h, _)| h)
}

/// As [`sample_sv_path`], also returning the linearized observations the
/// path was drawn from.
pub fn sample_sv_path_linearized<T: Real, R: Rng + ?Sized>(
    residuals: &[T],
    block: &SvBlock<T>,
    mixture: &MixtureTable,
    rng: &mut R,
) -> Result<(DVector<T>, Linearized)> {
    let n = residuals.len();
    if block.h.len() != n + 1 {
        return Err(Error::Shape(format!(
            "SV path has {} states for {n} observations",
            block.h.len()
        )));
    }
    let mu = block.mu.as_f64();
    let rho = block.rho.as_f64();
    let s2 = block.sigma2_innov.as_f64();

    // linearized observations and mixture indicators
    let mut obs = vec![0.0; n];
    let mut obs_var = vec![0.0; n];
    let mut weights = vec![0.0; mixture.prob.len()];
    for t in 0..n {
        let r = residuals[t].as_f64();
        let y = linearize(r);
        let ht = block.h[t + 1].as_f64();
        let mut best = f64::NEG_INFINITY;
        for (j, w) in weights.iter_mut().enumerate() {
            *w = mixture.prob[j].ln() + normal_logpdf(y, ht + mixture.mean[j], mixture.var[j]);
            best = best.max(*w);
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            *w = (*w - best).exp();
            total += *w;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                pick = j;
                break;
            }
            u -= w;
        }
        obs[t] = y - mixture.mean[pick];
        obs_var[t] = mixture.var[pick];
    }

    // forward filter over h_0 … h_T
    let mut m = vec![0.0; n + 1];
    let mut c = vec![0.0; n + 1];
    let mut pred_m = vec![0.0; n + 1];
    let mut pred_c = vec![0.0; n + 1];
    m[0] = mu;
    c[0] = s2 / (1.0 - rho * rho);
    for t in 1..=n {
        let a = mu + rho * (m[t - 1] - mu);
        let p = rho * rho * c[t - 1] + s2;
        pred_m[t] = a;
        pred_c[t] = p;
        let gain = p / (p + obs_var[t - 1]);
        m[t] = a + gain * (obs[t - 1] - a);
        c[t] = (1.0 - gain) * p;
    }

    // backward sample
    let mut h = vec![0.0; n + 1];
    h[n] = m[n] + c[n].max(0.0).sqrt() * std_normal(rng);
    for t in (0..n).rev() {
        let j = c[t] * rho / pred_c[t + 1];
        let mean = m[t] + j * (h[t + 1] - pred_m[t + 1]);
        let var = (c[t] - j * rho * c[t]).max(0.0);
        h[t] = mean + var.sqrt() * std_normal(rng);
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("volatility", "non-finite log-variance path"));
    }
    let path = DVector::from_iterator(n + 1, h.into_iter().map(T::of));
    Ok((path, Linearized { obs, var: obs_var }))
}

/// Log posterior of the transformed parameters `(μ, atanh ρ, log ς)`,
/// including Jacobians. `μ` is fixed at 0 for factor blocks.
fn log_target(h: &[f64], mu: f64, z: f64, log_s: f64, priors: &SvPriors, kind: SvKind) -> f64 {
    let rho = z.tanh();
    let s2 = (2.0 * log_s).exp();
    if !(rho.abs() < 1.0) || !(s2 > 0.0) || !s2.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut lp = 0.0;
    if let Some(&h0) = h.first() {
        lp += normal_logpdf(h0, mu, s2 / (1.0 - rho * rho));
        for w in h.windows(2) {
            lp += normal_logpdf(w[1], mu + rho * (w[0] - mu), s2);
        }
    }
    if kind == SvKind::Idiosyncratic {
        lp += -0.5 * mu * mu / priors.m_mu;
    }
    // (ρ+1)/2 ~ Beta(a0, b0), with dρ/dz = 1 − ρ²
    lp += (priors.a0 - 1.0) * ((1.0 + rho) / 2.0).ln() + (priors.b0 - 1.0) * ((1.0 - rho) / 2.0).ln();
    lp += (1.0 - rho * rho).ln();
    // ς² ~ Gamma(1/2, rate 1/(2ξ)), with dς²/d log ς = 2ς²
    lp += -0.5 * s2.ln() - s2 / (2.0 * priors.xi) + s2.ln();
    lp
}

/// One Metropolis step on `(μ, ρ, ς²)`. Returns whether it was accepted.
pub fn sample_sv_params<T: Real, R: Rng + ?Sized>(
    block: &mut SvBlock<T>,
    priors: &SvPriors,
    rng: &mut R,
) -> Result<bool> {
    let h: Vec<f64> = block.h.iter().map(|v| v.as_f64()).collect();
    let kind = block.kind;
    let cur = match kind {
        SvKind::Idiosyncratic => DVector::from_vec(vec![
            block.mu.as_f64(),
            block.rho.as_f64().atanh(),
            0.5 * block.sigma2_innov.as_f64().ln(),
        ]),
        SvKind::Factor => DVector::from_vec(vec![block.rho.as_f64().atanh(), 0.5 * block.sigma2_innov.as_f64().ln()]),
    };
    let unpack = |v: &DVector<f64>| match kind {
        SvKind::Idiosyncratic => (v[0], v[1], v[2]),
        SvKind::Factor => (0.0, v[0], v[1]),
    };
    let cov = block.tuning.covariance();
    let scale = block.tuning.log_scale.exp();
    let chol = nalgebra::Cholesky::new(cov)
        .ok_or_else(|| Error::numerical("volatility", "proposal covariance is not positive definite"))?;
    let e = DVector::from_iterator(cur.len(), (0..cur.len()).map(|_| std_normal(rng)));
    let prop = &cur + chol.l() * e * scale;

    let (m0, z0, s0) = unpack(&cur);
    let (m1, z1, s1) = unpack(&prop);
    let lp0 = log_target(&h, m0, z0, s0, priors, kind);
    let lp1 = log_target(&h, m1, z1, s1, priors, kind);
    let accept = lp1.is_finite() && rng.random::<f64>().ln() < lp1 - lp0;
    let keep = if accept { prop } else { cur };
    let (m, z, s) = unpack(&keep);
    if accept {
        let rho = z.tanh();
        if rho.abs() >= 1.0 {
            return Err(Error::numerical("volatility", "persistence left the unit interval"));
        }
        block.mu = T::of(m);
        block.rho = T::of(rho);
        block.sigma2_innov = T::of((2.0 * s).exp()).clamp_positive();
    }
    block.tuning.record(&keep, accept);
    Ok(accept)
}

/// Interweaving step: redraw `(μ, ς)` given the standardized path
/// `h̃ = (h − μ)/ς`, then map the path back. With `h̃` fixed the
/// linearized model is a Gaussian regression on `[1, h̃_t]`, and the prior
/// on `ς²` is exactly `ς ~ N(0, ξ)`, so the draw is conjugate. Factor
/// blocks keep `μ = 0`.
pub fn interweave_sv_params<T: Real, R: Rng + ?Sized>(
    block: &mut SvBlock<T>,
    lin: &Linearized,
    priors: &SvPriors,
    rng: &mut R,
) -> Result<()> {
    let n = lin.obs.len();
    if block.h.len() != n + 1 || lin.var.len() != n {
        return Err(Error::Shape("linearized observations do not match the path".into()));
    }
    let mu = block.mu.as_f64();
    let sd = block.sigma2_innov.as_f64().sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Ok(());
    }
    let std_path: Vec<f64> = block.h.iter().map(|v| (v.as_f64() - mu) / sd).collect();
    let (new_mu, new_sd) = match block.kind {
        SvKind::Factor => {
            let mut prec = 1.0 / priors.xi;
            let mut rhs = 0.0;
            for t in 0..n {
                let x = std_path[t + 1];
                prec += x * x / lin.var[t];
                rhs += x * lin.obs[t] / lin.var[t];
            }
            (0.0, rhs / prec + std_normal(rng) / prec.sqrt())
        }
        SvKind::Idiosyncratic => {
            let mut p = nalgebra::Matrix2::new(1.0 / priors.m_mu, 0.0, 0.0, 1.0 / priors.xi);
            let mut rhs = nalgebra::Vector2::zeros();
            for t in 0..n {
                let x = nalgebra::Vector2::new(1.0, std_path[t + 1]);
                p += x * x.transpose() / lin.var[t];
                rhs += x * (lin.obs[t] / lin.var[t]);
            }
            let chol = p
                .cholesky()
                .ok_or_else(|| Error::numerical("volatility", "interweaving precision is not positive definite"))?;
            let mean = chol.solve(&rhs);
            let z = nalgebra::Vector2::new(std_normal(rng), std_normal(rng));
            let draw = mean + chol.l().transpose().solve_upper_triangular(&z).expect("triangular factor");
            (draw[0], draw[1])
        }
    };
    let s2 = new_sd * new_sd;
    if !(s2 > 0.0) || !s2.is_finite() || !new_mu.is_finite() {
        return Ok(());
    }
    block.mu = T::of(new_mu);
    block.sigma2_innov = T::of(s2).clamp_positive();
    block.h = DVector::from_iterator(n + 1, std_path.iter().map(|x| T::of(new_mu + new_sd * x)));
    Ok(())
}

/// Full update of one block: path, Metropolis step on the parameters, then
/// the interweaving step.
pub fn sample_sv_block<T: Real, R: Rng + ?Sized>(
    residuals: &[T],
    block: &mut SvBlock<T>,
    mixture: &MixtureTable,
    priors: &SvPriors,
    rng: &mut R,
) -> Result<()> {
    let (h, lin) = sample_sv_path_linearized(residuals, block, mixture, rng)?;
    block.h = h;
    sample_sv_params(block, priors, rng)?;
    interweave_sv_params(block, &lin, priors, rng)
}

/// `h_{T+1} = μ + ρ(h_T − μ) + ς ε`.
pub fn sv_forecast_step<T: Real, R: Rng + ?Sized>(block: &SvBlock<T>, rng: &mut R) -> T {
    let mu = block.mu.as_f64();
    let next = mu + block.rho.as_f64() * (block.last().as_f64() - mu)
        + block.sigma2_innov.as_f64().sqrt() * std_normal(rng);
    T::of(next)
}
