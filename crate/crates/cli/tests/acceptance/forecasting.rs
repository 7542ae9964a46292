//! Forecast machinery: score oracles and the factor-count comparison on
//! simulated two-factor data.

use hugevar::dataio::Panel;
use hugevar::dgp::generate_factor_dataset;
use hugevar::engine::{ChainState, ModelSpec, VarData};
use hugevar::forecast::{expanding_window_run, log_predictive_score, ForecastConfig, PredictiveDraw, Variant};
use hugevar::rng::stream_from_seed;
use hugevar::shrinkage::{Concentration, PriorSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use testkit::{mvn_logpdf_dense, DoubleDouble};

pub struct ForecastOutcome {
    pub lps_gap: f64,
    pub density_gap: f64,
    pub wins: usize,
    pub reps: usize,
    pub margins: Vec<f64>,
}

impl ForecastOutcome {
    pub fn pass(&self) -> bool {
        self.lps_gap < 1e-12 && self.density_gap < 1e-10 && self.wins >= 8
    }
}

fn lps_gap(seed: u64) -> f64 {
    let mut rng = stream_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let l: Vec<f64> = (0..2000).map(|_| -60.0 + 50.0 * rng.random::<f64>()).collect();
        let c = l.iter().sum::<f64>() / l.len() as f64;
        let mut acc = DoubleDouble::default();
        l.iter().for_each(|v| acc.add((v - c).exp()));
        let oracle = c + (acc.value() / l.len() as f64).ln();
        worst = worst.max((log_predictive_score(&l).expect("finite") - oracle).abs());
    }
    worst
}

fn density_gap(seed: u64) -> f64 {
    let mut rng = stream_from_seed(seed);
    let (m, q) = (6, 2);
    let levels = DMatrix::from_fn(20, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let data = VarData::from_levels(&levels, 1, true).expect("data");
    let spec = ModelSpec::new(1, q, PriorSpec::dl(0.5), 1, 0, seed);
    let mut st = ChainState::init(&spec, &data, &mut rng).expect("state");
    st.b = DMatrix::from_fn(m, data.layout.k(), |_, _| 0.2 * rng.sample::<f64, _>(StandardNormal));
    st.fac.loadings = DMatrix::from_fn(m, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = data.x.row(3).transpose();
    let hi: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let hf: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let d = PredictiveDraw::with_logvars(&st, &x, &hi, &hf).expect("draw");
    let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mean = &st.b * &x;
    let lam = &st.fac.loadings;
    let v = DMatrix::from_diagonal(&DVector::from_iterator(q, hf.iter().map(|h| h.exp())));
    let cov = lam * v * lam.transpose() + DMatrix::from_diagonal(&DVector::from_iterator(m, hi.iter().map(|h| h.exp())));
    let all: Vec<usize> = (0..m).collect();
    let mut worst = (d.logdensity(&y, &all).expect("density") - mvn_logpdf_dense(&y, &mean, &cov)).abs();
    let sub = [4usize, 1, 2];
    let cs = DMatrix::from_fn(3, 3, |a, b| cov[(sub[a], sub[b])]);
    let ys = DVector::from_fn(3, |a, _| y[sub[a]]);
    let ms = DVector::from_fn(3, |a, _| mean[sub[a]]);
    worst = worst.max((d.logdensity(&y, &sub).expect("density") - mvn_logpdf_dense(&ys, &ms, &cs)).abs());
    worst
}

pub fn run(reps: usize, seed: u64) -> ForecastOutcome {
    let (m, t, steps) = (15, 200, 10);
    let mut margins = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let y = generate_factor_dataset(m, 2, t, &mut stream_from_seed(seed + rep));
        let names: Vec<String> = (0..m).map(|i| format!("y{i}")).collect();
        let dates = (0..=t).map(|s| format!("{}:Q{}", 1950 + s / 4, s % 4 + 1)).collect();
        let panel = Panel::new(dates, names.clone(), y, vec![1; m]).expect("panel");
        let spec = ModelSpec::new(1, 0, PriorSpec::Dl { a: Concentration::OneOverK }, 1000, 1000, seed + 1000 + rep);
        let score = |q| {
            let cfg = ForecastConfig {
                initial_window: t + 1 - steps,
                steps,
                focus_variables: names.clone(),
                variant: Variant::VarFsv,
                q,
                warm_burnin: 300,
                warm_start: true,
            };
            expanding_window_run(&cfg, &panel, &spec).expect("forecast run").overall()
        };
        margins.push(score(2) - score(0));
    }
    ForecastOutcome {
        lps_gap: lps_gap(seed),
        density_gap: density_gap(seed),
        wins: margins.iter().filter(|d| **d > 0.0).count(),
        reps,
        margins,
    }
}
