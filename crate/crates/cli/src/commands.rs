//! The `simulate`, `fit` and `forecast` subcommands.

use crate::config::{FitSection, ForecastSection, SimulateSection};
use crate::error::Result;
use crate::output::{num, opt, pivot_html, OutDir};
use hugevar::dataio::Panel;
use hugevar::dgp::{run_scenario_grid, GridResult};
use hugevar::engine::{run_chain, summarize, DrawStore, VarData};
use hugevar::forecast::{expanding_window_run, score_report, ScoreReport, ScoreSeries};
use hugevar::layout::{Slot, VarLayout};
use hugevar::store::{ArrayStore, ArraySummary};

pub fn simulate(section: &SimulateSection, seed: u64, out: &mut OutDir) -> Result<GridResult> {
    let grid = section.grid()?;
    let res = run_scenario_grid(&grid, seed)?;
    out.csv(
        "results.csv",
        &["scenario", "T", "m", "estimator", "replicate", "rmse"],
        res.results.iter().map(|r| {
            [r.scenario.to_string(), r.t.to_string(), r.m.to_string(), r.estimator.tag().into(), r.replicate.to_string(), num(r.rmse)]
        }),
    )?;
    out.csv(
        "pivot.csv",
        &["scenario", "T", "m", "estimator", "label", "median_rmse", "relative", "dne"],
        res.pivot.iter().map(|c| {
            [
                c.scenario.to_string(),
                c.t.to_string(),
                c.m.to_string(),
                c.estimator.tag().into(),
                c.estimator.label().into(),
                opt(c.median),
                opt(c.relative),
                c.dne.to_string(),
            ]
        }),
    )?;
    out.text("pivot.html", &pivot_html(&res.pivot))?;
    out.manifest("simulate", seed, &serde_json::json!({ "simulate": section, "grid": grid }))?;
    Ok(res)
}

fn regressor_name(layout: &VarLayout, names: &[String], col: usize) -> String {
    match layout.slot(col) {
        Slot::Intercept => "const".into(),
        Slot::Lag { lag, var } => format!("{}.L{lag}", names[var]),
    }
}

const PCT_HEADER: [&str; 5] = ["q05", "q25", "median", "q75", "q95"];

fn pct(s: &ArraySummary, j: usize) -> [String; 5] {
    [num(s.q05[j]), num(s.q25[j]), num(s.median[j]), num(s.q75[j]), num(s.q95[j])]
}

fn header<'a>(lead: &[&'a str]) -> Vec<&'a str> {
    lead.iter().copied().chain(PCT_HEADER).collect()
}

/// Per-draw CSV with one row per retained draw; skipped for summary storage.
fn write_draws(out: &mut OutDir, name: &str, store: &ArrayStore, columns: &[String]) -> Result<()> {
    if store.is_empty() || store.draw(0).is_none() {
        return Ok(());
    }
    let mut head = vec!["draw"];
    head.extend(columns.iter().map(String::as_str));
    out.csv(
        name,
        &head,
        (0..store.len()).map(|d| std::iter::once(d.to_string()).chain(store.draw(d).unwrap_or(&[]).iter().map(|v| num(*v))).collect::<Vec<_>>()),
    )
}

fn sv_param_names(panel: &Panel, q: usize) -> Vec<String> {
    let mut v = Vec::new();
    for n in &panel.names {
        v.extend([format!("mu[{n}]"), format!("rho[{n}]"), format!("sigma2[{n}]")]);
    }
    for j in 0..q {
        v.extend([format!("rho[f{}]", j + 1), format!("sigma2[f{}]", j + 1)]);
    }
    v
}

pub fn fit(section: &FitSection, seed: u64, out: &mut OutDir) -> Result<DrawStore> {
    let panel = section.data.load()?;
    let spec = section.model.spec(seed)?;
    let data = VarData::from_levels(&panel.values, spec.p, spec.intercept)?;
    let (m, q, layout) = (panel.m(), spec.q, data.layout);

    // loadings are sign-normalized per draw for reporting only
    let mut loadings = ArrayStore::new(m * q, spec.storage_mode(m));
    let store = run_chain(&spec, &data, |_, s| {
        let (lam, _) = s.fac.normalized_signs();
        loadings.push(lam.transpose().as_slice())
    })?;
    let summary = summarize(&store)?;

    let k = layout.k();
    let reg: Vec<String> = (0..k).map(|c| regressor_name(&layout, &panel.names, c)).collect();
    let coef = &summary.coefficients;
    out.csv(
        "coefficients_summary.csv",
        &header(&["equation", "regressor", "mean", "sd"]),
        (0..m * k).map(|j| {
            let mut r = vec![panel.names[j / k].clone(), reg[j % k].clone(), num(coef.mean[j]), num(coef.sd[j])];
            r.extend(pct(coef, j));
            r
        }),
    )?;
    let iqr = coef.iqr();
    out.csv(
        "coefficient_heatmap.csv",
        &["equation", "regressor", "median", "iqr"],
        (0..m * k).map(|j| [panel.names[j / k].clone(), reg[j % k].clone(), num(coef.median[j]), num(iqr[j])]),
    )?;

    // h index t sits on panel row p − 1 + t
    let date = |t: usize| panel.dates[spec.p - 1 + t].clone();
    let n = data.t();
    out.csv(
        "idio_logvar_percentiles.csv",
        &header(&["date", "series"]),
        (0..m).flat_map(|i| (0..=n).map(move |t| (i, t))).map(|(i, t)| {
            let mut r = vec![date(t), panel.names[i].clone()];
            r.extend(pct(&summary.idio_logvar, i * (n + 1) + t));
            r
        }),
    )?;
    if q > 0 {
        let lsum = ArraySummary::from_store(&loadings)?;
        out.csv(
            "loading_percentiles.csv",
            &header(&["series", "factor"]),
            (0..m * q).map(|j| {
                let mut r = vec![panel.names[j / q].clone(), format!("f{}", j % q + 1)];
                r.extend(pct(&lsum, j));
                r
            }),
        )?;
        out.csv(
            "factor_logvar_percentiles.csv",
            &header(&["date", "factor"]),
            (0..q).flat_map(|j| (0..=n).map(move |t| (j, t))).map(|(j, t)| {
                let mut r = vec![date(t), format!("f{}", j + 1)];
                r.extend(pct(&summary.factor_logvar, j * (n + 1) + t));
                r
            }),
        )?;
    }
    let pnames = sv_param_names(&panel, q);
    let sv = &summary.sv_params;
    out.csv(
        "sv_parameters.csv",
        &header(&["parameter", "mean", "sd", "ess"]),
        pnames.iter().enumerate().map(|(j, name)| {
            let mut r = vec![name.clone(), num(sv.mean[j]), num(sv.sd[j]), num(summary.sv_params_ess[j])];
            r.extend(pct(sv, j));
            r
        }),
    )?;

    let coef_cols: Vec<String> = (0..m * k).map(|j| format!("{}~{}", panel.names[j / k], reg[j % k])).collect();
    write_draws(out, "draws/coefficients.csv", &store.coefficients, &coef_cols)?;
    let load_cols: Vec<String> = (0..m * q).map(|j| format!("{}~f{}", panel.names[j / q], j % q + 1)).collect();
    if q > 0 {
        write_draws(out, "draws/loadings.csv", &store.loadings, &load_cols)?;
    }
    write_draws(out, "draws/sv_parameters.csv", &store.sv_params, &pnames)?;
    write_draws(out, "draws/global_shrinkage.csv", &store.global_shrinkage, &["global".into()])?;

    let resolved = serde_json::json!({ "fit": section, "spec": spec, "series": panel.names, "first_date": panel.dates[0], "rows": panel.t() });
    out.manifest("fit", seed, &resolved)?;
    Ok(store)
}

pub fn forecast(section: &ForecastSection, seed: u64, out: &mut OutDir) -> Result<(Vec<ScoreSeries>, ScoreReport)> {
    let panel = section.data.load()?;
    let spec = section.model.spec(seed)?;
    let series = section
        .configs()?
        .iter()
        .map(|c| expanding_window_run(c, &panel, &spec))
        .collect::<hugevar::Result<Vec<_>>>()?;
    let report = score_report(&series, section.benchmark)?;

    out.csv("scores_overall.csv", &["model", "joint_lps"], report.overall.iter().map(|(l, v)| [l.clone(), num(*v)]))?;
    out.csv(
        "scores_univariate.csv",
        &["model", "variable", "lps"],
        report.univariate.iter().map(|(l, n, v)| [l.clone(), n.clone(), num(*v)]),
    )?;
    let mut head = vec!["date"];
    head.extend(report.cumulative_relative.iter().map(|(l, _)| l.as_str()));
    out.csv(
        "scores_cumulative.csv",
        &head,
        report.dates.iter().enumerate().map(|(t, d)| {
            std::iter::once(d.clone()).chain(report.cumulative_relative.iter().map(|(_, c)| num(c[t]))).collect::<Vec<_>>()
        }),
    )?;
    let mut head = vec!["model", "date", "joint"];
    head.extend(section.focus_variables.iter().map(String::as_str));
    out.csv(
        "scores_by_date.csv",
        &head,
        series.iter().flat_map(|s| {
            (0..s.dates.len()).map(move |t| {
                let mut r = vec![s.label.clone(), s.dates[t].clone(), num(s.joint[t])];
                r.extend(s.univariate.iter().map(|u| num(u[t])));
                r
            })
        }),
    )?;
    let resolved = serde_json::json!({ "forecast": section, "spec": spec, "series": panel.names });
    out.manifest("forecast", seed, &resolved)?;
    Ok((series, report))
}
