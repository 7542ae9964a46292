//! Conditional Gaussian draws for one equation's coefficient row.
//!
//! Given the variance-normalized design `X̃` (T×k), response `z̃` (T) and the
//! diagonal prior covariance `Φ`, the target is `N(b, Q)` with
//! `Q = (X̃'X̃ + Φ⁻¹)⁻¹` and `b = Q X̃'z̃`.
//!
//! * [`DenseSampler`] factors the k×k precision, `O(k³ + Tk²)`.
//! * [`FastSampler`] never forms a k×k matrix. It draws `u ~ N(0, Φ)`,
//!   `δ ~ N(0, I_T)`, sets `v = X̃u + δ`, solves
//!   `(X̃ΦX̃' + I_T) w = z̃ − v` and returns `u + ΦX̃'w`, `O(T²k + T³)`.
//!
//! Both samplers factor once in `new`, so repeated draws from the same
//! design cost only the triangular solves.

use crate::dists::std_normal;
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct EquationDesign<T: Real> {
    /// Row t is `x_t' / σ_it`.
    pub x: DMatrix<T>,
    /// Element t is `z_it / σ_it`.
    pub z: DVector<T>,
    /// Diagonal of the prior covariance.
    pub phi: DVector<T>,
}

impl<T: Real> EquationDesign<T> {
    pub fn new(x: DMatrix<T>, z: DVector<T>, phi: DVector<T>) -> Result<Self> {
        let d = EquationDesign { x, z, phi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (t, k) = self.x.shape();
        if t == 0 || k == 0 {
            return Err(Error::Shape(format!("design must be non-empty, got {t}x{k}")));
        }
        if self.z.len() != t || self.phi.len() != k {
            return Err(Error::Shape(format!(
                "design is {t}x{k} but z has {} and phi has {} entries",
                self.z.len(),
                self.phi.len()
            )));
        }
        if !self.x.iter().chain(self.z.iter()).all(|v| v.is_finite_real()) {
            return Err(Error::Domain("design contains non-finite entries".into()));
        }
        if !self.phi.iter().all(|&v| v > T::zero() && v.is_finite_real()) {
            return Err(Error::Domain("prior variances must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn t(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Dense,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum StrategyPolicy {
    /// Fast iff `k > ratio · T`.
    Auto { ratio: f64 },
    ForceDense,
    ForceFast,
}

impl Default for StrategyPolicy {
    fn default() -> Self {
        StrategyPolicy::Auto { ratio: 1.0 }
    }
}

pub fn select_strategy(k: usize, t: usize, policy: StrategyPolicy) -> Strategy {
    match policy {
        StrategyPolicy::ForceDense => Strategy::Dense,
        StrategyPolicy::ForceFast => Strategy::Fast,
        StrategyPolicy::Auto { ratio } => {
            if k as f64 > ratio * t as f64 {
                Strategy::Fast
            } else {
                Strategy::Dense
            }
        }
    }
}

/// Posterior mean together with the Cholesky factor of the precision.
#[derive(Debug, Clone)]
pub struct GaussianPosterior<T: Real> {
    pub mean: DVector<T>,
    /// Lower-triangular `L` with `L L' = X̃'X̃ + Φ⁻¹`.
    pub precision_factor: DMatrix<T>,
}

fn gaussian_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_iterator(n, (0..n).map(|_| T::of(std_normal(rng))))
}

pub struct DenseSampler<T: Real> {
    chol: Cholesky<T, Dyn>,
    mean: DVector<T>,
}

impl<T: Real> DenseSampler<T> {
    pub fn new(design: &EquationDesign<T>) -> Result<Self> {
        let xt = design.x.transpose();
        let mut prec = &xt * &design.x;
        for j in 0..design.k() {
            prec[(j, j)] += T::one() / design.phi[j];
        }
        let rhs = &xt * &design.z;
        let chol = match Cholesky::new(prec.clone()) {
            Some(c) => c,
            None => {
                let diag = prec.diagonal();
                return Err(Error::numerical(
                    "coefficients",
                    format!(
                        "k×k posterior precision is not positive definite (diagonal range {:e}..{:e})",
                        diag.min(),
                        diag.max()
                    ),
                ));
            }
        };
        let mean = chol.solve(&rhs);
        Ok(DenseSampler { chol, mean })
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn posterior(&self) -> GaussianPosterior<T> {
        GaussianPosterior {
            mean: self.mean.clone(),
            precision_factor: self.chol.l(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        // L' e = ε  ⇒  e ~ N(0, (LL')⁻¹)
        let mut e = gaussian_vector::<T, R>(self.mean.len(), rng);
        self.chol.l_dirty().tr_solve_lower_triangular_mut(&mut e);
        e + &self.mean
    }
}

pub struct FastSampler<T: Real> {
    /// `X̃ Φ^{1/2}`.
    scaled: DMatrix<T>,
    sqrt_phi: DVector<T>,
    z: DVector<T>,
    chol: Cholesky<T, Dyn>,
}

impl<T: Real> FastSampler<T> {
    pub fn new(design: &EquationDesign<T>) -> Result<Self> {
        let sqrt_phi = design.phi.map(|v| v.sqrt());
        let mut scaled = design.x.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= sqrt_phi[j];
        }
        let mut m = &scaled * scaled.transpose();
        for i in 0..design.t() {
            m[(i, i)] += T::one();
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::numerical("coefficients", "T×T system X̃ΦX̃' + I is not positive definite")
        })?;
        Ok(FastSampler {
            scaled,
            sqrt_phi,
            z: design.z.clone(),
            chol,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let k = self.sqrt_phi.len();
        let t = self.z.len();
        // u = Φ^{1/2} e,  X̃u = (X̃Φ^{1/2}) e
        let e = gaussian_vector::<T, R>(k, rng);
        let delta = gaussian_vector::<T, R>(t, rng);
        let v = &self.scaled * &e + delta;
        let w = self.chol.solve(&(&self.z - v));
        // u + ΦX̃'w = Φ^{1/2} (e + (X̃Φ^{1/2})' w)
        let inner = self.scaled.tr_mul(&w) + e;
        inner.component_mul(&self.sqrt_phi)
    }
}

pub fn sample_row_dense<T: Real, R: Rng + ?Sized>(design: &EquationDesign<T>, rng: &mut R) -> Result<DVector<T>> {
    design.validate()?;
    Ok(DenseSampler::new(design)?.draw(rng))
}

pub fn sample_row_fast<T: Real, R: Rng + ?Sized>(design: &EquationDesign<T>, rng: &mut R) -> Result<DVector<T>> {
    design.validate()?;
    Ok(FastSampler::new(design)?.draw(rng))
}

pub fn sample_row<T: Real, R: Rng + ?Sized>(
    design: &EquationDesign<T>,
    strategy: Strategy,
    rng: &mut R,
) -> Result<DVector<T>> {
    match strategy {
        Strategy::Dense => sample_row_dense(design, rng),
        Strategy::Fast => sample_row_fast(design, rng),
    }
}

pub fn posterior<T: Real>(design: &EquationDesign<T>) -> Result<GaussianPosterior<T>> {
    design.validate()?;
    Ok(DenseSampler::new(design)?.posterior())
}
