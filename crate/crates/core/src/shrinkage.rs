//! Coefficient priors: Dirichlet–Laplace, Normal–Gamma and Minnesota.
//!
//! Each prior exposes the diagonal prior covariance `Φ_i` of equation `i`
//! and a conditional update given the current `vec(B)` (row-major, so
//! equation `i` owns flat indices `i·k .. (i+1)·k`).

use crate::dists::{gamma, sample_gig, sample_inverse_gaussian, std_normal, GigParams, InvGaussParams};
use crate::error::{Error, Result};
use crate::layout::{Slot, VarLayout};
use crate::rng::{next_key, substream, Block};
use crate::scalar::Real;
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Items per substream in the parallel local-scale loops. Fixed so that
/// results do not depend on the thread count.
const CHUNK: usize = 2048;

/// Dirichlet concentration of the DL prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concentration {
    Fixed(f64),
    /// `a = 1/K` for `K` coefficients.
    OneOverK,
}

impl Concentration {
    pub fn value(&self, total: usize) -> f64 {
        match *self {
            Concentration::Fixed(a) => a,
            Concentration::OneOverK => 1.0 / total as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PriorSpec {
    Dl {
        a: Concentration,
    },
    Ng {
        a: f64,
        #[serde(default = "default_ng_hyper")]
        c0: f64,
        #[serde(default = "default_ng_hyper")]
        d0: f64,
    },
    Minnesota {
        a_m: f64,
        #[serde(default = "default_lag_decay")]
        lag_decay: f64,
    },
}

fn default_ng_hyper() -> f64 {
    0.01
}

fn default_lag_decay() -> f64 {
    2.0
}

impl PriorSpec {
    pub fn dl(a: f64) -> Self {
        PriorSpec::Dl {
            a: Concentration::Fixed(a),
        }
    }

    pub fn ng(a: f64) -> Self {
        PriorSpec::Ng {
            a,
            c0: default_ng_hyper(),
            d0: default_ng_hyper(),
        }
    }

    pub fn minnesota(a_m: f64) -> Self {
        PriorSpec::Minnesota {
            a_m,
            lag_decay: default_lag_decay(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            PriorSpec::Dl { a } => {
                if let Concentration::Fixed(a) = a {
                    pos("DL concentration", a)?;
                    if a > 1.0 {
                        return Err(Error::Config(format!("DL concentration must lie in (0, 1], got {a}")));
                    }
                }
                Ok(())
            }
            PriorSpec::Ng { a, c0, d0 } => {
                pos("NG a", a)?;
                pos("NG c0", c0)?;
                pos("NG d0", d0)
            }
            PriorSpec::Minnesota { a_m, lag_decay } => {
                pos("Minnesota a_m", a_m)?;
                pos("Minnesota lag decay", lag_decay)
            }
        }
    }

    /// Initial sampler state for `total` coefficients.
    pub fn init<T: Real>(&self, total: usize) -> Result<PriorState<T>> {
        self.validate()?;
        if total == 0 {
            return Err(Error::Shape("prior needs at least one coefficient".into()));
        }
        Ok(match *self {
            PriorSpec::Dl { a } => PriorState::Dl(DlState::new(a.value(total), total)),
            PriorSpec::Ng { a, c0, d0 } => PriorState::Ng(NgState::new(a, c0, d0, total)),
            PriorSpec::Minnesota { a_m, lag_decay } => PriorState::Minnesota(MinnesotaState { a_m, lag_decay }),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlState<T: Real> {
    pub a: f64,
    pub psi: DVector<T>,
    pub theta: DVector<T>,
    pub zeta: T,
}

impl<T: Real> DlState<T> {
    /// Neutral start: `ψ = 1`, `ϑ = 1/K`, `ζ = K·a`.
    pub fn new(a: f64, total: usize) -> Self {
        DlState {
            a,
            psi: DVector::from_element(total, T::one()),
            theta: DVector::from_element(total, T::of(1.0 / total as f64)),
            zeta: T::of(total as f64 * a),
        }
    }

    pub fn variance(&self, j: usize) -> T {
        self.zeta * self.zeta * self.psi[j] * self.theta[j] * self.theta[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgState<T: Real> {
    pub a_ng: f64,
    pub tau2: DVector<T>,
    pub lambda_glob: T,
    pub c0: f64,
    pub d0: f64,
}

impl<T: Real> NgState<T> {
    pub fn new(a_ng: f64, c0: f64, d0: f64, total: usize) -> Self {
        NgState {
            a_ng,
            tau2: DVector::from_element(total, T::one()),
            lambda_glob: T::one(),
            c0,
            d0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinnesotaState {
    pub a_m: f64,
    pub lag_decay: f64,
}

impl MinnesotaState {
    pub fn variance(&self, slot: Slot) -> f64 {
        match slot {
            Slot::Intercept => 10.0 * self.a_m,
            Slot::Lag { lag, .. } => self.a_m / (lag as f64).powf(self.lag_decay),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorState<T: Real> {
    Dl(DlState<T>),
    Ng(NgState<T>),
    Minnesota(MinnesotaState),
}

impl<T: Real> PriorState<T> {
    pub fn update<R: Rng + ?Sized>(&mut self, b: &[T], rng: &mut R) -> Result<()> {
        match self {
            PriorState::Dl(s) => dl_update(b, s, rng),
            PriorState::Ng(s) => ng_update(b, s, rng),
            PriorState::Minnesota(_) => Ok(()),
        }
    }

    pub fn phi_for_equation(&self, equation: usize, layout: &VarLayout) -> DVector<T> {
        phi_for_equation(self, equation, layout)
    }

    /// Global shrinkage summary: `ζ` for DL, `λ` for NG, `a_m` for Minnesota.
    pub fn global(&self) -> f64 {
        match self {
            PriorState::Dl(s) => s.zeta.as_f64(),
            PriorState::Ng(s) => s.lambda_glob.as_f64(),
            PriorState::Minnesota(s) => s.a_m,
        }
    }

    /// Number of latent quantities carried by the prior.
    pub fn auxiliary_count(&self) -> usize {
        match self {
            PriorState::Dl(s) => 2 * s.psi.len() + 1,
            PriorState::Ng(s) => s.tau2.len() + 1,
            PriorState::Minnesota(_) => 0,
        }
    }
}

fn floor_abs<T: Real>(b: T) -> f64 {
    b.as_f64().abs().max(T::tiny().as_f64())
}

/// Fill `out` one substream per fixed-size chunk, in parallel when large.
fn par_fill<F>(out: &mut [f64], key: u64, f: F) -> Result<()>
where
    F: Fn(usize, &mut crate::rng::RandomStream) -> Result<f64> + Sync,
{
    let run = |(c, chunk): (usize, &mut [f64])| -> Result<()> {
        let mut rng = substream(key, Block::Shrinkage, c as u64);
        for (off, slot) in chunk.iter_mut().enumerate() {
            *slot = f(c * CHUNK + off, &mut rng)?;
        }
        Ok(())
    };
    if out.len() <= CHUNK {
        run((0, out))
    } else {
        out.par_chunks_mut(CHUNK).enumerate().try_for_each(run)
    }
}

/// `ϑ | b` with `ψ, ζ` integrated out: `L_j ~ GIG(a−1, 1, 2|b_j|)`,
/// `ϑ = L / ΣL`. `abs_b` must be strictly positive.
pub fn dl_draw_theta<R: Rng + ?Sized>(abs_b: &[f64], a: f64, floor: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut l = vec![0.0; abs_b.len()];
    par_fill(&mut l, next_key(rng), |j, r| {
        sample_gig(&GigParams::new(a - 1.0, 1.0, 2.0 * abs_b[j])?, r)
    })?;
    let total: f64 = l.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::numerical("shrinkage", format!("Dirichlet normalizer is {total}")));
    }
    let theta: Vec<f64> = l.iter().map(|v| (v / total).max(floor)).collect();
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::numerical("shrinkage", format!("simplex renormalization gave sum {sum}")));
    }
    Ok(theta)
}

/// `ζ | ϑ, b` with `ψ` integrated out: `GIG(K(a−1), 1, 2Σ|b_j|/ϑ_j)`.
pub fn dl_draw_zeta<R: Rng + ?Sized>(abs_b: &[f64], theta: &[f64], a: f64, cap: f64, rng: &mut R) -> Result<f64> {
    let s: f64 = abs_b.iter().zip(theta).map(|(b, t)| b / t).sum::<f64>().min(cap);
    sample_gig(&GigParams::new(abs_b.len() as f64 * (a - 1.0), 1.0, 2.0 * s)?, rng)
}

/// `ψ | ζ, ϑ, b`: `1/ψ_j ~ iG(ϑ_jζ/|b_j|, 1)`.
pub fn dl_draw_psi<R: Rng + ?Sized>(abs_b: &[f64], theta: &[f64], zeta: f64, cap: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut psi = vec![0.0; abs_b.len()];
    par_fill(&mut psi, next_key(rng), |j, r| {
        let mean = (theta[j] * zeta / abs_b[j]).min(cap);
        Ok(1.0 / sample_inverse_gaussian(&InvGaussParams::new(mean, 1.0)?, r)?)
    })?;
    Ok(psi)
}

/// One conditional refresh of the DL auxiliaries given `b`.
///
/// Blocks are drawn as `ϑ | b`, then `ζ | ϑ, b`, then `ψ | ζ, ϑ, b`, which
/// is composition sampling of `p(ψ, ζ, ϑ | b)` since `ϑ` and `ζ` are drawn
/// with the later blocks integrated out.
pub fn dl_update<T: Real, R: Rng + ?Sized>(b: &[T], state: &mut DlState<T>, rng: &mut R) -> Result<()> {
    let k = state.psi.len();
    if b.len() != k || state.theta.len() != k {
        return Err(Error::Shape(format!("DL state has {k} slots, coefficients {}", b.len())));
    }
    if !b.iter().all(|v| v.is_finite_real()) {
        return Err(Error::numerical("shrinkage", "non-finite coefficient in DL update"));
    }
    let abs_b: Vec<f64> = b.iter().map(|&v| floor_abs(v)).collect();
    let (tiny, huge) = (T::tiny().as_f64(), T::huge().as_f64());
    let theta = dl_draw_theta(&abs_b, state.a, tiny, rng)?;
    let zeta = T::of(dl_draw_zeta(&abs_b, &theta, state.a, huge, rng)?).clamp_positive();
    let psi = dl_draw_psi(&abs_b, &theta, zeta.as_f64(), huge, rng)?;
    state.theta = DVector::from_iterator(k, theta.into_iter().map(T::of));
    state.zeta = zeta;
    state.psi = DVector::from_iterator(k, psi.into_iter().map(|v| T::of(v).clamp_positive()));
    Ok(())
}

/// One conditional refresh of the NG local variances and global rate.
pub fn ng_update<T: Real, R: Rng + ?Sized>(b: &[T], state: &mut NgState<T>, rng: &mut R) -> Result<()> {
    let k = state.tau2.len();
    if b.len() != k {
        return Err(Error::Shape(format!("NG state has {k} slots, coefficients {}", b.len())));
    }
    if !b.iter().all(|v| v.is_finite_real()) {
        return Err(Error::numerical("shrinkage", "non-finite coefficient in NG update"));
    }
    let a = state.a_ng;
    let rate = a * state.lambda_glob.as_f64();
    let b2: Vec<f64> = b.iter().map(|&v| floor_abs(v).powi(2)).collect();
    let mut tau2 = vec![0.0; k];
    par_fill(&mut tau2, next_key(rng), |j, r| {
        // χ may underflow to zero; the GIG then collapses to a Gamma when
        // a > 1/2 and needs a positive floor otherwise.
        let chi = if a > 0.5 { b2[j] } else { b2[j].max(T::tiny().as_f64()) };
        sample_gig(&GigParams::new(a - 0.5, rate, chi)?, r)
    })?;
    let tau2: Vec<f64> = tau2.into_iter().map(|v| T::of(v).clamp_positive().as_f64()).collect();
    let sum: f64 = tau2.iter().sum();
    let lambda = gamma(state.c0 + a * k as f64, state.d0 + 0.5 * a * sum, rng)?;
    state.tau2 = DVector::from_iterator(k, tau2.into_iter().map(T::of));
    state.lambda_glob = T::of(lambda).clamp_positive();
    Ok(())
}

/// Diagonal prior covariance `Φ_i` of equation `i`.
pub fn phi_for_equation<T: Real>(state: &PriorState<T>, equation: usize, layout: &VarLayout) -> DVector<T> {
    let range = layout.equation_range(equation);
    match state {
        PriorState::Dl(s) => DVector::from_iterator(range.len(), range.map(|j| s.variance(j).clamp_positive())),
        PriorState::Ng(s) => s.tau2.rows(range.start, range.len()).into_owned(),
        PriorState::Minnesota(s) => DVector::from_iterator(
            layout.k(),
            (0..layout.k()).map(|c| T::of(s.variance(layout.slot(c)))),
        ),
    }
}

/// Joint draw of prior auxiliaries and coefficients from the hierarchy.
///
/// NG draws `λ` from its Gamma hyperprior, which for the default
/// `c0 = d0 = 0.01` is extremely diffuse.
pub fn sample_prior<T: Real, R: Rng + ?Sized>(
    spec: &PriorSpec,
    layout: &VarLayout,
    rng: &mut R,
) -> Result<(PriorState<T>, DVector<T>)> {
    let total = layout.total();
    let mut state = spec.init::<T>(total)?;
    match &mut state {
        PriorState::Dl(s) => {
            let a = s.a;
            let g: Vec<f64> = (0..total).map(|_| gamma(a, 1.0, rng)).collect::<Result<_>>()?;
            let sum: f64 = g.iter().sum();
            s.theta = DVector::from_iterator(total, g.iter().map(|v| T::of(v / sum).clamp_positive()));
            s.zeta = T::of(gamma(total as f64 * a, 0.5, rng)?);
            s.psi = DVector::from_iterator(
                total,
                (0..total).map(|_| gamma(1.0, 0.5, rng).map(T::of)).collect::<Result<Vec<_>>>()?,
            );
        }
        PriorState::Ng(s) => {
            let lambda = gamma(s.c0, s.d0, rng)?;
            s.lambda_glob = T::of(lambda).clamp_positive();
            let rate = 0.5 * s.a_ng * s.lambda_glob.as_f64();
            s.tau2 = DVector::from_iterator(
                total,
                (0..total)
                    .map(|_| gamma(s.a_ng, rate, rng).map(|v| T::of(v).clamp_positive()))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        PriorState::Minnesota(_) => {}
    }
    let mut b = DVector::zeros(total);
    for i in 0..layout.m {
        let phi = state.phi_for_equation(i, layout);
        for (c, j) in layout.equation_range(i).enumerate() {
            b[j] = T::of(std_normal(rng)) * phi[c].sqrt();
        }
    }
    Ok((state, b))
}
