//! Wall-clock benchmark of the sampler and log-log scaling fits.
//!
//! Every grid point runs `warmup + sweeps` repetitions on synthetic
//! factor-SV data and keeps the median of the timed ones.

use crate::error::{CliError, Result};
use crate::output::{num, OutDir};
use hugevar::dgp::generate_factor_dataset;
use hugevar::dists::std_normal;
use hugevar::engine::{gibbs_sweep, sample_coefficients, ChainState, ModelSpec, VarData};
use hugevar::gausslin::{DenseSampler, EquationDesign, FastSampler, StrategyPolicy};
use hugevar::rng::stream_from_seed;
use hugevar::shrinkage::{Concentration, PriorSpec};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const MIN_SWEEPS: usize = 9;
pub const MIN_WARMUP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Timed repetitions per grid point.
    pub sweeps: usize,
    /// Untimed repetitions before timing starts.
    pub warmup: usize,
    /// Series count and sample length of the sweep grids.
    pub m: usize,
    pub t: usize,
    /// Lag orders of the full-sweep p grid at (m, t, q = 0).
    pub p_list: Vec<usize>,
    /// Factor counts of the full-sweep overhead check at (m, t, p = 1).
    pub q_list: Vec<usize>,
    /// Series counts of the full-sweep m grid at (t, p = 1, q = 0).
    pub m_list: Vec<usize>,
    /// Sample lengths of the forced-fast coefficient block at (m, fast_p).
    pub t_list: Vec<usize>,
    pub fast_p: usize,
    /// Regressor counts of the single-equation dense solve at `dense_t`.
    pub k_list: Vec<usize>,
    pub dense_t: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sweeps: MIN_SWEEPS,
            warmup: MIN_WARMUP,
            m: 100,
            t: 200,
            p_list: vec![1, 2, 4, 8],
            q_list: vec![0, 50],
            m_list: vec![25, 50, 100, 200],
            t_list: vec![100, 200, 400, 800],
            fast_p: 10,
            k_list: vec![200, 400, 800, 1600],
            dense_t: 50,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < MIN_SWEEPS || self.warmup < MIN_WARMUP {
            return Err(CliError::config(format!(
                "bench needs at least {MIN_SWEEPS} timed and {MIN_WARMUP} warm-up sweeps"
            )));
        }
        let grids = [&self.p_list, &self.m_list, &self.t_list, &self.k_list];
        if grids.iter().any(|g| g.len() < 2 || g.contains(&0)) || self.q_list.is_empty() {
            return Err(CliError::config("each bench grid needs at least two positive points"));
        }
        if self.m == 0 || self.t < 2 || self.fast_p == 0 || self.dense_t == 0 {
            return Err(CliError::config("bench m, t, fast_p and dense_t must be positive"));
        }
        Ok(())
    }
}

/// Median wall time in seconds of `sweeps` calls after `warmup` calls.
pub fn median_time<F: FnMut() -> Result<()>>(warmup: usize, sweeps: usize, mut f: F) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(hugevar::store::quantile(&times, 0.5))
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub group: &'static str,
    pub m: usize,
    pub p: usize,
    pub t: usize,
    pub q: usize,
    pub k: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub quantity: &'static str,
    pub estimate: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Verdict {
    pub fn pass(&self) -> Option<bool> {
        if self.lower.is_none() && self.upper.is_none() {
            return None;
        }
        Some(self.lower.is_none_or(|l| self.estimate >= l) && self.upper.is_none_or(|u| self.estimate <= u))
    }
}

fn synthetic(m: usize, p: usize, t: usize, q: usize, seed: u64) -> Result<(ChainState<f64>, VarData<f64>, ModelSpec)> {
    let mut rng = stream_from_seed(seed);
    let levels = generate_factor_dataset(m, q.max(1), t + p - 1, &mut rng);
    let data = VarData::from_levels(&levels, p, true)?;
    let spec = ModelSpec::new(p, q, PriorSpec::Dl { a: Concentration::OneOverK }, 1, 0, seed);
    let state = ChainState::init(&spec, &data, &mut rng)?;
    Ok((state, data, spec))
}

/// Median time of one full Gibbs sweep under the given coefficient policy.
pub fn time_sweep(cfg: &BenchConfig, m: usize, p: usize, t: usize, q: usize, policy: StrategyPolicy, seed: u64) -> Result<Timing> {
    let (mut state, data, mut spec) = synthetic(m, p, t, q, seed)?;
    spec.strategy = policy;
    let group = if policy == StrategyPolicy::ForceFast { "sweep_fast" } else { "sweep" };
    let mut rng = stream_from_seed(seed);
    let seconds = median_time(cfg.warmup, cfg.sweeps, || Ok(gibbs_sweep(&mut state, &data, &spec, &mut rng)?))?;
    Ok(Timing { group, m, p, t, q, k: data.layout.k(), seconds })
}

/// Median time of the coefficient block alone with the fast sampler forced.
pub fn time_fast_block(cfg: &BenchConfig, m: usize, p: usize, t: usize, seed: u64) -> Result<Timing> {
    let (state, data, mut spec) = synthetic(m, p, t, 0, seed)?;
    spec.strategy = StrategyPolicy::ForceFast;
    let mut rng = stream_from_seed(seed);
    let seconds = median_time(cfg.warmup, cfg.sweeps, || {
        std::hint::black_box(sample_coefficients(&state, &data, &spec, &mut rng)?);
        Ok(())
    })?;
    Ok(Timing { group: "coef_fast", m, p, t, q: 0, k: data.layout.k(), seconds })
}

fn random_design(k: usize, t: usize, seed: u64) -> Result<EquationDesign<f64>> {
    let mut rng = stream_from_seed(seed);
    let x = DMatrix::from_fn(t, k, |_, _| std_normal(&mut rng));
    let z = DVector::from_fn(t, |_, _| std_normal(&mut rng));
    let phi = DVector::from_fn(k, |_, _| 0.1 + std_normal(&mut rng).abs());
    Ok(EquationDesign::new(x, z, phi)?)
}

/// Median time of one dense single-equation draw, factorization included.
pub fn time_dense_row(cfg: &BenchConfig, k: usize, t: usize, seed: u64) -> Result<Timing> {
    let design = random_design(k, t, seed)?;
    let mut rng = stream_from_seed(seed);
    let seconds = median_time(cfg.warmup, cfg.sweeps, || {
        std::hint::black_box(DenseSampler::new(&design)?.draw(&mut rng));
        Ok(())
    })?;
    Ok(Timing { group: "row_dense", m: 0, p: 0, t, q: 0, k, seconds })
}

/// Median time of one fast single-equation draw.
pub fn time_fast_row(cfg: &BenchConfig, k: usize, t: usize, seed: u64) -> Result<Timing> {
    let design = random_design(k, t, seed)?;
    let mut rng = stream_from_seed(seed);
    let seconds = median_time(cfg.warmup, cfg.sweeps, || {
        std::hint::black_box(FastSampler::new(&design)?.draw(&mut rng));
        Ok(())
    })?;
    Ok(Timing { group: "row_fast", m: 0, p: 0, t, q: 0, k, seconds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub timings: Vec<Timing>,
    pub verdicts: Vec<Verdict>,
}

fn slope_of(timings: &[Timing], group: &str, key: impl Fn(&Timing) -> usize, keep: impl Fn(&Timing) -> bool) -> f64 {
    let pts: Vec<&Timing> = timings.iter().filter(|t| t.group == group && keep(t)).collect();
    let x: Vec<f64> = pts.iter().map(|t| key(t) as f64).collect();
    let y: Vec<f64> = pts.iter().map(|t| t.seconds).collect();
    loglog_slope(&x, &y)
}

pub fn run(cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let (m, t) = (cfg.m, cfg.t);
    let auto = StrategyPolicy::default();
    for &p in &cfg.p_list {
        timings.push(time_sweep(cfg, m, p, t, 0, auto, seed)?);
        timings.push(time_sweep(cfg, m, p, t, 0, StrategyPolicy::ForceFast, seed)?);
    }
    for &q in &cfg.q_list {
        if !(q == 0 && cfg.p_list.contains(&1)) {
            timings.push(time_sweep(cfg, m, 1, t, q, auto, seed)?);
        }
    }
    for &mm in &cfg.m_list {
        if mm != m || !cfg.p_list.contains(&1) {
            timings.push(time_sweep(cfg, mm, 1, t, 0, auto, seed)?);
        }
    }
    let kf = m * cfg.fast_p + 1;
    for &tt in &cfg.t_list {
        timings.push(time_fast_block(cfg, m, cfg.fast_p, tt, seed)?);
        timings.push(time_fast_row(cfg, kf, tt, seed)?);
    }
    for &k in &cfg.k_list {
        timings.push(time_dense_row(cfg, k, cfg.dense_t, seed)?);
    }

    let at = |m_: usize, p_: usize, q_: usize| move |x: &Timing| x.m == m_ && x.p == p_ && x.t == t && x.q == q_;
    let sweep_time = |q_: usize| timings.iter().find(|x| x.group == "sweep" && at(m, 1, q_)(x)).map(|x| x.seconds);
    let (qlo, qhi) = (cfg.q_list.iter().min().copied().unwrap_or(0), cfg.q_list.iter().max().copied().unwrap_or(0));
    let ratio = match (sweep_time(qhi), sweep_time(qlo)) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    };
    let verdicts = vec![
        Verdict {
            quantity: "p_exponent_sweep",
            estimate: slope_of(&timings, "sweep", |x| x.p, |x| x.m == m && x.t == t && x.q == 0),
            lower: Some(0.7),
            upper: Some(1.3),
        },
        Verdict {
            quantity: "p_exponent_sweep_forced_fast",
            estimate: slope_of(&timings, "sweep_fast", |x| x.p, |_| true),
            lower: None,
            upper: None,
        },
        Verdict { quantity: "factor_overhead_ratio", estimate: ratio, lower: None, upper: Some(1.5) },
        Verdict {
            quantity: "m_exponent_sweep",
            estimate: slope_of(&timings, "sweep", |x| x.m, |x| x.p == 1 && x.t == t && x.q == 0 && cfg.m_list.contains(&x.m)),
            lower: None,
            upper: None,
        },
        Verdict {
            quantity: "t_exponent_fast_block",
            estimate: slope_of(&timings, "coef_fast", |x| x.t, |_| true),
            lower: Some(1.6),
            upper: Some(2.4),
        },
        Verdict { quantity: "t_exponent_fast_row", estimate: slope_of(&timings, "row_fast", |x| x.t, |_| true), lower: None, upper: None },
        Verdict {
            quantity: "k_exponent_dense_row",
            estimate: slope_of(&timings, "row_dense", |x| x.k, |_| true),
            lower: Some(2.6),
            upper: Some(3.4),
        },
    ];
    Ok(BenchReport { timings, verdicts })
}

pub fn write(report: &BenchReport, cfg: &BenchConfig, seed: u64, out: &mut OutDir) -> Result<()> {
    out.csv(
        "bench_timings.csv",
        &["group", "m", "p", "T", "q", "k", "median_seconds"],
        report.timings.iter().map(|x| {
            [x.group.to_string(), x.m.to_string(), x.p.to_string(), x.t.to_string(), x.q.to_string(), x.k.to_string(), num(x.seconds)]
        }),
    )?;
    let b = |v: Option<f64>| v.map(num).unwrap_or_default();
    out.csv(
        "bench_verdicts.csv",
        &["quantity", "estimate", "lower", "upper", "pass"],
        report.verdicts.iter().map(|v| {
            let pass = v.pass().map(|p| p.to_string()).unwrap_or_else(|| "n/a".into());
            [v.quantity.to_string(), num(v.estimate), b(v.lower), b(v.upper), pass]
        }),
    )?;
    out.manifest("bench", seed, &serde_json::json!({ "bench": cfg }))
}
