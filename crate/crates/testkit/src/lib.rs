//! Oracles for the test suites. Nothing here calls into the library under
//! test, so every check built on these helpers is an independent route.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Moments of a density on `(0, ∞)` given by its unnormalized log kernel.
///
/// Integrates in `u = ln x` over the region where the integrand is within
/// `e^-60` of its peak.
#[derive(Debug, Clone, Copy)]
pub struct PositiveMoments {
    pub mean: f64,
    pub var: f64,
    /// Lower and upper integration limits on the `ln x` scale.
    pub u_range: (f64, f64),
    /// Log of the normalizing constant (relative to `log_kernel`).
    pub log_norm: f64,
}

pub fn positive_moments<F: Fn(f64) -> f64>(log_kernel: F) -> PositiveMoments {
    let g = |u: f64| log_kernel(u.exp()) + u;
    // coarse scan for the peak
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut u = -200.0;
    while u <= 200.0 {
        let v = g(u);
        if v > best.0 {
            best = (v, u);
        }
        u += 0.01;
    }
    let (peak, umax) = best;
    let mut lo = umax;
    while g(lo) > peak - 60.0 && lo > -700.0 {
        lo -= 0.01;
    }
    let mut hi = umax;
    while g(hi) > peak - 60.0 && hi < 700.0 {
        hi += 0.01;
    }
    let n = 200_000;
    let m0 = simpson(|u| (g(u) - peak).exp(), lo, hi, n);
    let m1 = simpson(|u| (g(u) - peak).exp() * u.exp(), lo, hi, n);
    let m2 = simpson(|u| (g(u) - peak).exp() * (2.0 * u).exp(), lo, hi, n);
    let mean = m1 / m0;
    PositiveMoments {
        mean,
        var: m2 / m0 - mean * mean,
        u_range: (lo, hi),
        log_norm: m0.ln() + peak,
    }
}

/// Sampler by numerical inversion of a tabulated CDF on `(0, ∞)`.
pub struct InversionSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl InversionSampler {
    pub fn new<F: Fn(f64) -> f64>(log_kernel: F) -> Self {
        let mom = positive_moments(&log_kernel);
        let (lo, hi) = mom.u_range;
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let g = |u: f64| (log_kernel(u.exp()) + u - mom.log_norm).exp();
        let mut grid = Vec::with_capacity(n + 1);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut prev = g(lo);
        grid.push(lo);
        cdf.push(0.0);
        for i in 1..=n {
            let u = lo + h * i as f64;
            let mid = g(u - 0.5 * h);
            let cur = g(u);
            acc += h * (prev + 4.0 * mid + cur) / 6.0;
            prev = cur;
            grid.push(u);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        InversionSampler { grid, cdf }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let p: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.5 };
        (self.grid[i - 1] + w * (self.grid[i] - self.grid[i - 1])).exp()
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_survival(lam))
}

fn kolmogorov_survival(lam: f64) -> f64 {
    if lam < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lam * lam).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Energy-distance two-sample permutation test on multivariate samples.
/// Returns the permutation p-value.
pub fn energy_test<R: Rng>(a: &[Vec<f64>], b: &[Vec<f64>], perms: usize, rng: &mut R) -> f64 {
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b.iter()).collect();
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pooled[i]
                .iter()
                .zip(pooled[j].iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let na = a.len();
    let stat = |idx: &[usize]| -> f64 {
        let (ia, ib) = idx.split_at(na);
        let mean = |s: &[usize], t: &[usize]| {
            let mut acc = 0.0;
            for &i in s {
                for &j in t {
                    acc += dist[i * n + j];
                }
            }
            acc / (s.len() * t.len()) as f64
        };
        2.0 * mean(ia, ib) - mean(ia, ia) - mean(ib, ib)
    };
    let mut idx: Vec<usize> = (0..n).collect();
    let observed = stat(&idx);
    let mut exceed = 0;
    for _ in 0..perms {
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        if stat(&idx) >= observed {
            exceed += 1;
        }
    }
    (exceed as f64 + 1.0) / (perms as f64 + 1.0)
}

/// Standard error of the mean of a correlated series by batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Empirical mean, covariance and their per-entry standard errors for
/// independent draws stored as rows.
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub mean_se: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub cov_se: DMatrix<f64>,
}

pub fn moment_summary(draws: &DMatrix<f64>) -> MomentSummary {
    let n = draws.nrows();
    let k = draws.ncols();
    let nf = n as f64;
    let mean = DVector::from_iterator(k, (0..k).map(|j| draws.column(j).sum() / nf));
    let mut centered = draws.clone();
    for j in 0..k {
        let mj = mean[j];
        centered.column_mut(j).add_scalar_mut(-mj);
    }
    let cov = centered.transpose() * &centered / (nf - 1.0);
    let sq = centered.map(|x| x * x);
    let fourth = sq.transpose() * &sq / nf;
    let mut cov_se = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let v = (fourth[(i, j)] - cov[(i, j)] * cov[(i, j)]).max(0.0);
            cov_se[(i, j)] = (v / nf).sqrt();
        }
    }
    let mean_se = DVector::from_iterator(k, (0..k).map(|j| (cov[(j, j)] / nf).sqrt()));
    MomentSummary {
        mean,
        mean_se,
        cov,
        cov_se,
    }
}

/// Double-double accumulator (error-free transformations).
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        let lo = self.lo + err;
        let hi = s + lo;
        self.lo = lo - (hi - s);
        self.hi = hi;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7) computed by a full sort.
pub fn sorted_quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Log density of a multivariate normal by an explicit inverse and
/// determinant (LU), without any Cholesky route.
pub fn mvn_logpdf_dense(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = y - mean;
    let lu = cov.clone().lu();
    let det = lu.determinant();
    let inv = lu.try_inverse().expect("covariance must be invertible");
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
