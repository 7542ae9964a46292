//! Joint-distribution check: moments of parameters drawn directly from the
//! prior against those visited by a chain that alternates one Gibbs sweep
//! with regenerating the data. A fixed exogenous design keeps the
//! regressors out of the regenerated quantities.

use hugevar::engine::{gibbs_sweep, ChainState, ModelSpec, VarData};
use hugevar::layout::VarLayout;
use hugevar::rng::stream_from_seed;
use hugevar::shrinkage::{sample_prior, PriorSpec};
use hugevar::stochvol::{SvBlock, SvPriors};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use testkit::{batch_means_se, mean_and_se};

pub struct GewekeOutcome {
    pub names: Vec<String>,
    pub z: Vec<f64>,
}

impl GewekeOutcome {
    pub fn max_abs_z(&self) -> (String, f64) {
        self.names
            .iter()
            .zip(&self.z)
            .map(|(n, z)| (n.clone(), z.abs()))
            .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

const M: usize = 2;
const Q: usize = 1;
const T: usize = 30;

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Independent prior draw of the test functions' arguments plus the
/// latent paths needed to simulate data.
struct PriorDraw {
    b: DMatrix<f64>,
    lam: DMatrix<f64>,
    sv: Vec<(f64, f64, f64, Vec<f64>)>,
}

fn sv_prior(rng: &mut impl Rng, pri: &SvPriors, factor: bool) -> (f64, f64, f64, Vec<f64>) {
    let mu = if factor { 0.0 } else { pri.m_mu.sqrt() * normal(rng) };
    let rho = 2.0 * Beta::new(pri.a0, pri.b0).unwrap().sample(rng) - 1.0;
    let s2 = Gamma::new(0.5, 2.0 * pri.xi).unwrap().sample(rng);
    let mut h = vec![mu + (s2 / (1.0 - rho * rho)).sqrt() * normal(rng)];
    for t in 1..=T {
        let prev = h[t - 1];
        h.push(mu + rho * (prev - mu) + s2.sqrt() * normal(rng));
    }
    (mu, rho, s2, h)
}

fn prior_draw(rng: &mut impl Rng, k: usize, a: f64, pri: &SvPriors) -> PriorDraw {
    let total = M * k;
    let g: Vec<f64> = (0..total).map(|_| Gamma::new(a, 1.0).unwrap().sample(rng)).collect();
    let gs: f64 = g.iter().sum();
    let zeta = Gamma::new(total as f64 * a, 2.0).unwrap().sample(rng);
    let b = DMatrix::from_fn(M, k, |i, j| {
        let psi = Gamma::new(1.0, 2.0).unwrap().sample(rng);
        let theta = g[i * k + j] / gs;
        (psi * theta * theta * zeta * zeta).sqrt() * normal(rng)
    });
    let lam = DMatrix::from_fn(M, Q, |_, _| normal(rng));
    let mut sv: Vec<_> = (0..M).map(|_| sv_prior(rng, pri, false)).collect();
    sv.extend((0..Q).map(|_| sv_prior(rng, pri, true)));
    PriorDraw { b, lam, sv }
}

fn simulate_y(x: &DMatrix<f64>, b: &DMatrix<f64>, lam: &DMatrix<f64>, idio_h: &[Vec<f64>], fac: &DMatrix<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
    let mean = x * b.transpose() + fac * lam.transpose();
    DMatrix::from_fn(T, M, |t, i| mean[(t, i)] + (idio_h[i][t + 1] / 2.0).exp() * normal(rng))
}

fn functionals(b: &DMatrix<f64>, lam: &DMatrix<f64>, sv: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut out: Vec<f64> = b.transpose().iter().copied().collect();
    out.extend(lam.iter().copied());
    out.extend(sv.iter().map(|s| s.1));
    out.extend(sv.iter().map(|s| s.2));
    out
}

pub fn run(cycles: usize, burn: usize, seed: u64, batches: usize) -> GewekeOutcome {
    let mut rng = stream_from_seed(seed);
    let layout = VarLayout::new(M, 1, true);
    let k = layout.k();
    let a = 0.5;
    let mut spec = ModelSpec::new(1, Q, PriorSpec::dl(a), 1, 0, seed);
    spec.sv_priors = SvPriors::default();
    let pri = spec.sv_priors;
    let x = DMatrix::from_fn(T, k, |_, j| if j == 0 { 1.0 } else { normal(&mut rng) });

    let mut names: Vec<String> = (0..M).flat_map(|i| (0..k).map(move |j| format!("B[{i},{j}]"))).collect();
    names.extend((0..M).map(|i| format!("Lambda[{i}]")));
    names.extend((0..M + Q).map(|i| format!("rho[{i}]")));
    names.extend((0..M + Q).map(|i| format!("sigma2[{i}]")));
    let nf = names.len();

    // marginal-conditional
    let mut mc: Vec<Vec<f64>> = vec![Vec::with_capacity(cycles); nf];
    for _ in 0..cycles {
        let d = prior_draw(&mut rng, k, a, &pri);
        let sv: Vec<(f64, f64, f64)> = d.sv.iter().map(|s| (s.0, s.1, s.2)).collect();
        for (v, f) in mc.iter_mut().zip(functionals(&d.b, &d.lam, &sv)) {
            v.push(f);
        }
    }

    // successive-conditional, started from a prior draw
    let d = prior_draw(&mut rng, k, a, &pri);
    let fac = DMatrix::from_fn(T, Q, |t, j| (d.sv[M + j].3[t + 1] / 2.0).exp() * normal(&mut rng));
    let idio_h: Vec<Vec<f64>> = d.sv[..M].iter().map(|s| s.3.clone()).collect();
    let y = simulate_y(&x, &d.b, &d.lam, &idio_h, &fac, &mut rng);
    let mut data = VarData::new(y, x.clone(), layout).unwrap();
    let mut st = ChainState::init(&spec, &data, &mut rng).unwrap();
    let (prior_state, _) = sample_prior::<f64, _>(&spec.prior, &layout, &mut rng).unwrap();
    st.prior = prior_state;
    st.b = d.b.clone();
    st.fac.loadings = d.lam.clone();
    st.fac.factors = fac;
    for (blk, s) in st.fac.idio_logvar.iter_mut().chain(st.fac.factor_logvar.iter_mut()).zip(&d.sv) {
        *blk = SvBlock { h: nalgebra::DVector::from_vec(s.3.clone()), mu: s.0, rho: s.1, sigma2_innov: s.2, ..blk.clone() };
    }

    let mut sc: Vec<Vec<f64>> = vec![Vec::with_capacity(cycles); nf];
    for it in 0..burn + cycles {
        if it == burn {
            st.freeze_adaptation();
        }
        gibbs_sweep(&mut st, &data, &spec, &mut rng).expect("sweep");
        let idio_h: Vec<Vec<f64>> = st.fac.idio_logvar.iter().map(|b| b.h.iter().copied().collect()).collect();
        data.y = simulate_y(&x, &st.b, &st.fac.loadings, &idio_h, &st.fac.factors, &mut rng);
        if it >= burn {
            let sv: Vec<(f64, f64, f64)> = st
                .fac
                .idio_logvar
                .iter()
                .chain(&st.fac.factor_logvar)
                .map(|b| (b.mu, b.rho, b.sigma2_innov))
                .collect();
            for (v, f) in sc.iter_mut().zip(functionals(&st.b, &st.fac.loadings, &sv)) {
                v.push(f);
            }
        }
    }

    let z = (0..nf)
        .map(|j| {
            let (m1, s1) = mean_and_se(&mc[j]);
            let m2 = sc[j].iter().sum::<f64>() / cycles as f64;
            let s2 = batch_means_se(&sc[j], batches);
            (m1 - m2) / (s1 * s1 + s2 * s2).sqrt()
        })
        .collect();
    GewekeOutcome { names, z }
}
