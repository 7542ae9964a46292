//! GIG and inverse-Gaussian moments against quadrature, and the ψ
//! reciprocal route against its derived conditional density.

use hugevar::dists::{sample_gig, sample_inverse_gaussian, GigParams, InvGaussParams};
use hugevar::rng::stream_from_seed;
use hugevar::shrinkage::dl_draw_psi;
use testkit::{ks_two_sample, positive_moments, InversionSampler};

pub struct MomentCheck {
    pub label: String,
    pub mean_rel: f64,
    pub var_rel: f64,
}

pub struct DistOutcome {
    pub checks: Vec<MomentCheck>,
    pub psi_ks_p: f64,
}

impl DistOutcome {
    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0f64, |m, c| m.max(c.mean_rel).max(c.var_rel))
    }

    pub fn pass(&self) -> bool {
        self.worst() < 0.01 && self.psi_ks_p > 0.01
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

pub fn run(n: usize, seed: u64) -> DistOutcome {
    let mut checks = Vec::new();
    let gig = [(0.7, 1.3, 2.1), (-0.5, 1.0, 1.0), (5.0, 2.0, 0.5), (0.3, 20.0, 1.0), (-2.0, 3.0, 4.0)];
    for (i, &(l, r, c)) in gig.iter().enumerate() {
        let p = GigParams::new(l, r, c).expect("valid GIG");
        let mut rng = stream_from_seed(seed + i as u64);
        let xs: Vec<f64> = (0..n).map(|_| sample_gig(&p, &mut rng).expect("draw")).collect();
        let q = positive_moments(|x| p.log_kernel(x));
        let (m, v) = mean_var(&xs);
        checks.push(MomentCheck { label: format!("GIG({l},{r},{c})"), mean_rel: rel(m, q.mean), var_rel: rel(v, q.var) });
    }
    let ig = [(1.0, 1.0), (0.5, 2.0), (3.0, 5.0), (0.1, 0.3), (2.0, 10.0)];
    for (i, &(mu, shape)) in ig.iter().enumerate() {
        let p = InvGaussParams::new(mu, shape).expect("valid IG");
        let mut rng = stream_from_seed(seed + 100 + i as u64);
        let xs: Vec<f64> = (0..n).map(|_| sample_inverse_gaussian(&p, &mut rng).expect("draw")).collect();
        // density ∝ x^{-3/2} exp(−shape (x − mu)² / (2 mu² x))
        let q = positive_moments(|x| -1.5 * x.ln() - shape * (x - mu).powi(2) / (2.0 * mu * mu * x));
        let (m, v) = mean_var(&xs);
        checks.push(MomentCheck { label: format!("IG({mu},{shape})"), mean_rel: rel(m, q.mean), var_rel: rel(v, q.var) });
    }

    let (b, theta, zeta): (f64, f64, f64) = (0.3, 0.5, 2.0);
    let mut rng = stream_from_seed(seed + 200);
    let m = 100_000;
    let ours: Vec<f64> = (0..m).map(|_| dl_draw_psi(&[b], &[theta], zeta, f64::MAX, &mut rng).expect("draw")[0]).collect();
    // ψ | • ∝ ψ^{-1/2} exp(−b²/(2ψϑ²ζ²) − ψ/2)
    let c = b * b / (theta * zeta).powi(2);
    let oracle = InversionSampler::new(|x: f64| -0.5 * x.ln() - 0.5 * (c / x + x));
    let reference: Vec<f64> = (0..m).map(|_| oracle.sample(&mut rng)).collect();
    let (_, psi_ks_p) = ks_two_sample(&ours, &reference);
    DistOutcome { checks, psi_ks_p }
}
