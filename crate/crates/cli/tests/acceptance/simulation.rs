//! Sparse-scenario simulation study at m = 10.

use hugevar::dgp::{pivot, run_scenario_grid, ChainSettings, Estimator, GridSpec, ScenarioKind, SimResult};

pub struct CellOutcome {
    pub t: usize,
    /// Replicates where DL(1/K) beats both OLS and Minnesota(0.001).
    pub wins: usize,
    pub reps: usize,
    pub ols_relative: Option<f64>,
    pub row: Vec<(Estimator, Option<f64>)>,
}

pub struct SimulationOutcome {
    pub cells: Vec<CellOutcome>,
    pub dne_at_50: bool,
}

impl SimulationOutcome {
    pub fn pass(&self) -> bool {
        let t50 = self.cells.iter().find(|c| c.t == 50).and_then(|c| c.ols_relative).is_some_and(|r| r >= 1.5);
        self.cells.iter().all(|c| c.wins >= 8) && t50 && self.dne_at_50
    }
}

fn rmse_of(results: &[SimResult], t: usize, rep: usize, e: Estimator) -> Option<f64> {
    results.iter().find(|r| r.t == t && r.replicate == rep && r.estimator == e).map(|r| r.rmse)
}

pub fn run(seed: u64) -> SimulationOutcome {
    let estimators = vec![Estimator::DlOneOverK, Estimator::DlHalf, Estimator::Ng1, Estimator::Minnesota1e3, Estimator::Ols];
    let grid = GridSpec {
        scenarios: vec![ScenarioKind::Sparse],
        t_list: vec![50, 250],
        m_list: vec![10],
        estimators: estimators.clone(),
        reps: 10,
        chain: ChainSettings { draws: 2000, burnin: 1000, q: 1 },
    };
    let res = run_scenario_grid(&grid, seed).expect("grid runs");
    let cells = grid
        .t_list
        .iter()
        .map(|&t| {
            let wins = (0..grid.reps)
                .filter(|&r| {
                    let dl = rmse_of(&res.results, t, r, Estimator::DlOneOverK).expect("DL(1/K) result");
                    let beats = |e| rmse_of(&res.results, t, r, e).is_none_or(|v| dl < v);
                    beats(Estimator::Ols) && beats(Estimator::Minnesota1e3)
                })
                .count();
            let rel = |e: Estimator| res.pivot.iter().find(|c| c.t == t && c.estimator == e).and_then(|c| c.relative);
            CellOutcome {
                t,
                wins,
                reps: grid.reps,
                ols_relative: rel(Estimator::Ols),
                row: estimators.iter().map(|&e| (e, rel(e))).collect(),
            }
        })
        .collect();
    let big = GridSpec { t_list: vec![50], m_list: vec![50], estimators: vec![Estimator::DlOneOverK, Estimator::Ols], ..grid };
    let dne_at_50 = pivot(&[], &big).iter().any(|c| c.estimator == Estimator::Ols && c.dne);
    SimulationOutcome { cells, dne_at_50 }
}
