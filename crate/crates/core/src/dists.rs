//! Random variates for the non-Gaussian conditionals of the sampler.
//!
//! Generalized inverse Gaussian convention used throughout the crate:
//!
//! ```text
//! GIG(λ, ρ, χ):  f(x) ∝ x^(λ−1) · exp(−(ρ·x + χ/x) / 2),   x > 0
//! ```
//!
//! Gamma draws use the rate convention (mean = shape / rate).

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, StandardNormal};
use std::f64::consts::PI;

/// Parameters of a generalized inverse Gaussian law, `(λ, ρ, χ)` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub lambda: f64,
    /// Coefficient on `x`.
    pub rho: f64,
    /// Coefficient on `1/x`.
    pub chi: f64,
}

impl GigParams {
    pub fn new(lambda: f64, rho: f64, chi: f64) -> Result<Self> {
        let p = GigParams { lambda, rho, chi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let GigParams { lambda, rho, chi } = *self;
        let finite = lambda.is_finite() && rho.is_finite() && chi.is_finite();
        let ok = finite
            && rho >= 0.0
            && chi >= 0.0
            && ((rho > 0.0 && chi > 0.0) || (lambda > 0.0 && rho > 0.0) || (lambda < 0.0 && chi > 0.0));
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "GIG(lambda={lambda}, rho={rho}, chi={chi}) is not normalizable"
            )))
        }
    }

    /// Unnormalized log density.
    pub fn log_kernel(&self, x: f64) -> f64 {
        (self.lambda - 1.0) * x.ln() - 0.5 * (self.rho * x + self.chi / x)
    }

    /// The law of `1/X` when `X` follows `self`.
    pub fn reciprocal(&self) -> GigParams {
        GigParams {
            lambda: -self.lambda,
            rho: self.chi,
            chi: self.rho,
        }
    }
}

/// Inverse Gaussian with analytic mean `mean` and variance `mean³/shape`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGaussParams {
    pub mean: f64,
    pub shape: f64,
}

impl InvGaussParams {
    pub fn new(mean: f64, shape: f64) -> Result<Self> {
        if !(mean > 0.0) || !(shape > 0.0) || !mean.is_finite() || !shape.is_finite() {
            return Err(Error::Domain(format!(
                "inverse Gaussian needs mean > 0 and shape > 0, got mean={mean}, shape={shape}"
            )));
        }
        Ok(InvGaussParams { mean, shape })
    }

    pub fn variance(&self) -> f64 {
        self.mean.powi(3) / self.shape
    }
}

/// Draw from `GIG(λ, ρ, χ)`.
///
/// Dispatches between the Hörmann–Leydold generators on the standardized
/// law `GIG(|λ|, ω, ω)`, `ω = √(ρχ)`, scaled by `√(χ/ρ)`:
/// ratio-of-uniforms with mode shift when `|λ| > 2` or `ω > 3`, plain
/// ratio-of-uniforms for moderate `ω`, and the piecewise-constant hat for
/// tiny `ω` with `|λ| < 1`. The boundary cases `χ = 0` and `ρ = 0` reduce
/// to Gamma and inverse Gamma.
pub fn sample_gig<R: Rng + ?Sized>(params: &GigParams, rng: &mut R) -> Result<f64> {
    params.validate()?;
    let GigParams { lambda, rho, chi } = *params;

    if chi == 0.0 {
        return Ok(gamma_unchecked(lambda, 0.5 * rho, rng));
    }
    if rho == 0.0 {
        return Ok(1.0 / gamma_unchecked(-lambda, 0.5 * chi, rng));
    }

    let lam = lambda.abs();
    let alpha = chi.sqrt() / rho.sqrt();
    let omega = rho.sqrt() * chi.sqrt();

    // For ω → 0 the term on the vanishing side contributes less than
    // rounding error both in the bulk (ω²/λ) and near the origin (ω^{2|λ|}),
    // and the generators below would overflow.
    let w2 = omega * omega;
    if lam > 0.0 && w2 < 1e-15 && lam * w2.ln() < -37.0 {
        return Ok(if lambda > 0.0 {
            gamma_unchecked(lambda, 0.5 * rho, rng)
        } else {
            1.0 / gamma_unchecked(lam, 0.5 * chi, rng)
        }
        .min(f64::MAX));
    }

    let y = if lam > 2.0 || omega > 3.0 {
        rou_shift_mode(lam, omega, rng)
    } else if lam >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(lam, omega, rng)
    } else {
        concave_hat(lam, omega, rng)
    };
    let x = if lambda < 0.0 { alpha / y } else { alpha * y };
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else if x <= 0.0 {
        Ok(f64::MIN_POSITIVE)
    } else {
        Ok(f64::MAX)
    }
}

/// Mode of `y^(λ−1) exp(−ω/2 (y + 1/y))`.
fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_shift_mode<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // Extremes of (x − xm)·√h(x) are roots of a cubic; solve it in
    // trigonometric form.
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let arg = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0);
    let fi = arg.acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - a / 3.0;

    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece hat for `0 ≤ λ < 1` and small `ω`.
fn concave_hat<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;

    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;

    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let a = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * a).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        if !(x > 0.0) || !x.is_finite() {
            continue;
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Inverse Gaussian draw by the Michael–Schucany–Haas transformation.
///
/// The root is evaluated as `μ / (1 + r + √(r(r+2)))`, `r = μy/(2·shape)`,
/// which stays accurate when `μ` is astronomically large.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(params: &InvGaussParams, rng: &mut R) -> Result<f64> {
    let InvGaussParams { mean, shape } = InvGaussParams::new(params.mean, params.shape)?;
    let z: f64 = rng.sample(StandardNormal);
    let y = z * z;
    let r = mean * y / (2.0 * shape);
    let x = if r.is_finite() {
        mean / (1.0 + r + (r * (r + 2.0)).sqrt())
    } else {
        // mean·y overflowed; the root tends to shape/y.
        shape / y
    };
    let u: f64 = rng.random();
    let out = if u * (mean + x) <= mean {
        x
    } else {
        mean * (mean / x)
    };
    Ok(if out.is_finite() { out.max(f64::MIN_POSITIVE) } else { f64::MAX })
}

/// Specification of a standard draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    StdNormal,
    Exponential { rate: f64 },
}

pub fn primitive_draw<R: Rng + ?Sized>(spec: Primitive, rng: &mut R) -> Result<f64> {
    match spec {
        Primitive::Gamma { shape, rate } => gamma(shape, rate, rng),
        Primitive::Beta { a, b } => {
            let d = Beta::new(a, b).map_err(|e| Error::Domain(format!("beta({a}, {b}): {e}")))?;
            Ok(d.sample(rng))
        }
        Primitive::StdNormal => Ok(std_normal(rng)),
        Primitive::Exponential { rate } => {
            let d = Exp::new(rate).map_err(|e| Error::Domain(format!("exponential({rate}): {e}")))?;
            if !(rate > 0.0) {
                return Err(Error::Domain(format!("exponential rate must be > 0, got {rate}")));
            }
            Ok(d.sample(rng))
        }
    }
}

/// Gamma draw with `shape` and `rate`.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "gamma needs shape > 0 and rate > 0, got shape={shape}, rate={rate}"
        )));
    }
    Ok(gamma_unchecked(shape, rate, rng))
}

fn gamma_unchecked<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let d = Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
    d.sample(rng).max(f64::MIN_POSITIVE)
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
