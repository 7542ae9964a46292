//! Every subcommand run twice with the same config and seed, plus once
//! with a different thread cap, must produce identical non-timing files.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

const TIMING_FILES: [&str; 2] = ["bench_timings.csv", "bench_verdicts.csv"];

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).expect("prefix").display().to_string();
                if !TIMING_FILES.contains(&rel.as_str()) {
                    out.insert(rel, std::fs::read(&p).expect("readable file"));
                }
            }
        }
    }
    out
}

fn run(sub: &str, cfg: &Path, out: &Path, threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hugevar"))
        .args([sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "99", "--threads", threads])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

pub struct ReproOutcome {
    pub results: Vec<(String, bool, usize)>,
}

impl ReproOutcome {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.1)
    }
}

pub fn run_all(panel: &Path) -> ReproOutcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = format!("path = {:?}\nvariables = [\"GDP\", \"CPI\", \"UNRATE\", \"FFR\"]", panel.display().to_string());
    let configs = [
        (
            "simulate",
            "[simulate]\nt_list = [40]\nm_list = [4]\nreps = 2\nestimators = [\"DL1K\", \"NG1\", \"MN1e-3\", \"OLS\"]\nchain = { draws = 50, burnin = 20, q = 1 }\n".to_string(),
        ),
        ("fit", format!("[fit.data]\n{data}\n[fit.model]\nq = 1\ndraws = 50\nburnin = 20\n")),
        (
            "forecast",
            format!(
                "[forecast]\ninitial_window = 120\nsteps = 3\nfocus_variables = [\"GDP\", \"FFR\"]\nwarm_burnin = 10\nmodels = [{{ variant = {{ kind = \"var_fsv\" }}, q = 1 }}]\n[forecast.data]\n{data}\n[forecast.model]\ndraws = 30\nburnin = 20\n"
            ),
        ),
        (
            "bench",
            "[bench]\nm = 8\nt = 30\np_list = [1, 2]\nq_list = [0, 2]\nm_list = [4, 8]\nt_list = [20, 40]\nfast_p = 1\nk_list = [10, 20]\ndense_t = 10\n".to_string(),
        ),
    ];
    let mut results = Vec::new();
    for (sub, body) in configs {
        let cfg = dir.path().join(format!("{sub}.toml"));
        std::fs::write(&cfg, body).expect("config written");
        let outs: Vec<_> = ["a", "b", "c"].iter().map(|s| dir.path().join(format!("{sub}-{s}"))).collect();
        let ok = run(sub, &cfg, &outs[0], "1") && run(sub, &cfg, &outs[1], "1") && run(sub, &cfg, &outs[2], "3");
        let snaps: Vec<_> = outs.iter().map(|o| if o.exists() { snapshot(o) } else { BTreeMap::new() }).collect();
        let same = ok && !snaps[0].is_empty() && snaps[0] == snaps[1] && snaps[0] == snaps[2];
        results.push((sub.to_string(), same, snaps[0].len()));
    }
    ReproOutcome { results }
}
