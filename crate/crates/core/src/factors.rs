//! Latent factors and loadings of the error decomposition
//! `ε_t = Λ f_t + η_t`, `f_t ~ N(0, V_t)`, `η_t ~ N(0, Σ_t)`.
//!
//! Both draws need a weighted Gram matrix per time point (factors) or per
//! series (loadings). These are formed for all points at once by one matrix
//! product over the `q(q+1)/2` column pairs, then each small system is
//! factored independently.

use crate::dists::std_normal;
use crate::error::{Error, Result};
use crate::rng::{next_key, substream, Block};
use crate::scalar::Real;
use crate::stochvol::{SvBlock, SvKind};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorState<T: Real> {
    /// Λ, m×q.
    pub loadings: DMatrix<T>,
    /// Row t is `f_t'`, T×q.
    pub factors: DMatrix<T>,
    pub factor_logvar: Vec<SvBlock<T>>,
    pub idio_logvar: Vec<SvBlock<T>>,
}

impl<T: Real> FactorState<T> {
    /// Loadings `N(0, 0.01)`, zero factors, idiosyncratic paths flat at
    /// `idio_levels`.
    pub fn new<R: Rng + ?Sized>(q: usize, t: usize, idio_levels: &[f64], rng: &mut R) -> Self {
        let m = idio_levels.len();
        FactorState {
            loadings: DMatrix::from_fn(m, q, |_, _| T::of(0.1 * std_normal(rng))),
            factors: DMatrix::zeros(t, q),
            factor_logvar: (0..q).map(|_| SvBlock::new(SvKind::Factor, t, 0.0)).collect(),
            idio_logvar: idio_levels.iter().map(|&l| SvBlock::new(SvKind::Idiosyncratic, t, l)).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn q(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn t(&self) -> usize {
        self.factors.nrows()
    }

    /// `σ²_it` for observation `t` (0-based).
    pub fn idio_var(&self, t: usize, i: usize) -> T {
        self.idio_logvar[i].h[t + 1].exp()
    }

    /// `exp(h_jt)` for observation `t` (0-based).
    pub fn factor_var(&self, t: usize, j: usize) -> T {
        self.factor_logvar[j].h[t + 1].exp()
    }

    /// m×T matrix of `1/σ²_it`.
    fn idio_precision(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.m(), self.t(), |i, t| (-self.idio_logvar[i].h[t + 1]).exp())
    }

    /// The common component `F Λ'` (T×m).
    pub fn common_component(&self) -> DMatrix<T> {
        if self.q() == 0 {
            DMatrix::zeros(self.t(), self.m())
        } else {
            &self.factors * self.loadings.transpose()
        }
    }

    /// Flip signs so that the largest-magnitude loading of each column is
    /// positive. Used only for reporting.
    pub fn normalized_signs(&self) -> (DMatrix<T>, DMatrix<T>) {
        let mut l = self.loadings.clone();
        let mut f = self.factors.clone();
        for j in 0..self.q() {
            let col = l.column(j);
            let imax = col.iamax();
            if col[imax] < T::zero() {
                l.column_mut(j).neg_mut();
                f.column_mut(j).neg_mut();
            }
        }
        (l, f)
    }
}

fn pairs(q: usize) -> Vec<(usize, usize)> {
    (0..q).flat_map(|a| (a..q).map(move |b| (a, b))).collect()
}

/// Rows of `out` hold the products `x_a x_b` for each pair, one column per
/// row of `x`.
fn pair_products<T: Real>(x: &DMatrix<T>, pairs: &[(usize, usize)]) -> DMatrix<T> {
    DMatrix::from_fn(pairs.len(), x.nrows(), |p, r| {
        let (a, b) = pairs[p];
        x[(r, a)] * x[(r, b)]
    })
}

fn assemble<T: Real>(packed: impl Fn(usize) -> T, pairs: &[(usize, usize)], q: usize) -> DMatrix<T> {
    let mut g = DMatrix::zeros(q, q);
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let v = packed(p);
        g[(a, b)] = v;
        g[(b, a)] = v;
    }
    g
}

/// Draw from `N(A⁻¹ r, A⁻¹)` given the precision `A`.
fn draw_from_precision<T: Real, R: Rng + ?Sized>(
    prec: DMatrix<T>,
    rhs: DVector<T>,
    block: &'static str,
    rng: &mut R,
) -> Result<DVector<T>> {
    let q = rhs.len();
    let chol = Cholesky::new(prec).ok_or_else(|| Error::numerical(block, "posterior precision is not positive definite"))?;
    let mean = chol.solve(&rhs);
    let mut z = DVector::from_iterator(q, (0..q).map(|_| T::of(std_normal(rng))));
    chol.l_dirty().tr_solve_lower_triangular_mut(&mut z);
    Ok(mean + z)
}

fn check_eps<T: Real>(eps: &DMatrix<T>, state: &FactorState<T>) -> Result<()> {
    if eps.shape() != (state.t(), state.m()) {
        return Err(Error::Shape(format!(
            "residuals are {:?}, state expects {}x{}",
            eps.shape(),
            state.t(),
            state.m()
        )));
    }
    Ok(())
}

/// Draw every `f_t ~ N(P_t Λ'Σ_t⁻¹ε_t, P_t)`, `P_t = (Λ'Σ_t⁻¹Λ + V_t⁻¹)⁻¹`.
pub fn sample_factors<T: Real, R: Rng + ?Sized>(
    eps: &DMatrix<T>,
    state: &FactorState<T>,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    check_eps(eps, state)?;
    let (q, n) = (state.q(), state.t());
    if q == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let key = next_key(rng);
    let pr = pairs(q);
    let w = state.idio_precision();
    // q(q+1)/2 × T: Σ_i w_it λ_ia λ_ib
    let gram = pair_products(&state.loadings, &pr) * &w;
    // q × T: Λ' (w ∘ ε')
    let rhs_all = state.loadings.transpose() * eps.transpose().component_mul(&w);
    let rows: Vec<DVector<T>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut prec = assemble(|p| gram[(p, t)], &pr, q);
            for j in 0..q {
                prec[(j, j)] += (-state.factor_logvar[j].h[t + 1]).exp();
            }
            let mut r = substream(key, Block::Factors, t as u64);
            draw_from_precision(prec, rhs_all.column(t).into_owned(), "factors", &mut r)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, q, |t, j| rows[t][j]))
}

/// Draw each loading row from its Gaussian regression posterior with
/// prior `N(0, I_q)` and observation variances `σ²_it`.
pub fn sample_loadings<T: Real, R: Rng + ?Sized>(
    eps: &DMatrix<T>,
    state: &FactorState<T>,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    check_eps(eps, state)?;
    let (q, m) = (state.q(), state.m());
    if q == 0 {
        return Ok(DMatrix::zeros(m, 0));
    }
    let key = next_key(rng);
    let pr = pairs(q);
    let w = state.idio_precision();
    // m × q(q+1)/2: Σ_t w_it f_ta f_tb
    let gram = &w * pair_products(&state.factors, &pr).transpose();
    // m × q: (w ∘ ε') F
    let rhs_all = eps.transpose().component_mul(&w) * &state.factors;
    let rows: Vec<DVector<T>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut prec = assemble(|p| gram[(i, p)], &pr, q);
            for j in 0..q {
                prec[(j, j)] += T::one();
            }
            let mut r = substream(key, Block::Loadings, i as u64);
            draw_from_precision(prec, rhs_all.row(i).transpose(), "loadings", &mut r)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(m, q, |i, j| rows[i][j]))
}

/// `Ω_t = Λ diag(exp(h_t)) Λ' + Σ_t`.
pub fn covariance_at<T: Real>(state: &FactorState<T>, t: usize) -> DMatrix<T> {
    let m = state.m();
    let mut omega = DMatrix::zeros(m, m);
    if state.q() > 0 {
        let mut scaled = state.loadings.clone();
        for j in 0..state.q() {
            let v = state.factor_var(t, j);
            scaled.column_mut(j).scale_mut(v);
        }
        omega = scaled * state.loadings.transpose();
        // gemm rounding is not symmetric
        let half = T::of(0.5);
        omega = (&omega + omega.transpose()) * half;
    }
    for i in 0..m {
        omega[(i, i)] += state.idio_var(t, i);
    }
    omega
}
