//! Result files: `summary.csv`, `checkpoints.csv`, one `paths_<q>.csv` per
//! profiled quantity, `checks.csv` and `manifest.toml`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use toml::{Table, Value};

use crate::config::{config_table, RunConfig};
use crate::error::Result;
use crate::scenarios::{asset_name, Check, ScenarioOutput};
use crate::stats::MonteCarloEstimate;

/// Decimal with 12 significant digits, shortest form.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let a = rounded.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

/// Named estimates of a scenario run, in a fixed order.
pub fn summary_rows(out: &ScenarioOutput) -> Vec<(String, MonteCarloEstimate)> {
    let mut rows = Vec::new();
    for (k, e) in out.bankruptcy.iter().enumerate() {
        rows.push((format!("bankruptcy_agent{}", k + 1), *e));
    }
    if let Some(g) = &out.bankruptcy_grid {
        for (k, e) in g.iter().enumerate() {
            rows.push((format!("bankruptcy_grid_agent{}", k + 1), *e));
        }
    }
    for b in &out.bubbles {
        let tag = format!("{}_agent{}", asset_name(b.asset), b.agent + 1);
        rows.push((format!("fundamental_{tag}"), b.f));
        rows.push((format!("fundamental_subjective_{tag}"), b.f_k));
        rows.push((format!("bubble_{tag}"), b.bubble));
        if let Some(d) = b.direct {
            rows.push((format!("bubble_direct_{tag}"), d));
        }
        rows.push((format!("decomposition_residual_{tag}"), b.residual));
    }
    for (k, r) in out.riskless.iter().enumerate() {
        if let Some(r) = r {
            rows.push((format!("bubble_riskless_agent{}", k + 1), *r));
        }
    }
    for (k, (e, _)) in out.portfolio.iter().enumerate() {
        rows.push((format!("own_consumption_value_agent{}", k + 1), *e));
    }
    for c in &out.checkpoints {
        for (k, z) in c.density.iter().enumerate() {
            rows.push((format!("density_agent{}_t{}", k + 1, fmt_num(c.t)), *z));
        }
    }
    if let Some(e) = out.burst.as_ref().and_then(|b| b.post_burst_bubble) {
        rows.push(("post_burst_bubble_agent1".into(), e));
    }
    rows
}

fn summary_csv(out: &ScenarioOutput) -> String {
    let mut s = String::from("name,mean,std_err,n\n");
    for (name, e) in summary_rows(out) {
        let _ = writeln!(s, "{name},{},{},{}", fmt_num(e.mean), fmt_num(e.std_err), e.n);
    }
    s
}

fn checkpoints_csv(out: &ScenarioOutput) -> String {
    let mut s = String::from("t,quantity,p10,median,p90,n\n");
    for c in &out.checkpoints {
        let mut line = |name: String, q: &crate::scenarios::Quantiles| {
            let _ = writeln!(
                s,
                "{},{name},{},{},{},{}",
                fmt_num(c.t),
                fmt_num(q.p10),
                fmt_num(q.median),
                fmt_num(q.p90),
                q.n
            );
        };
        line("rate".into(), &c.rate);
        for (i, q) in c.theta.iter().enumerate() {
            line(format!("theta_{}", i + 1), q);
        }
        for (k, rows) in c.theta_k.iter().enumerate() {
            for (i, q) in rows.iter().enumerate() {
                line(format!("theta_agent{}_{}", k + 1, i + 1), q);
            }
        }
    }
    s
}

fn extra_csv(out: &ScenarioOutput) -> String {
    let mut s = String::from("name,value\n");
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k},{v}");
    };
    if let Some(y) = &out.multipliers {
        for (k, y) in y.iter().enumerate() {
            put(&format!("multiplier_agent{}", k + 1), fmt_num(*y));
        }
    }
    if let Some(id) = &out.identities {
        put("max_rel_market_identity", fmt_num(id.market));
        put("max_rel_wealth_identity", fmt_num(id.wealth));
        put("max_rel_rate_identity", fmt_num(id.rate));
        if let Some(t) = id.theta {
            put("max_rel_theta_closed_form", fmt_num(t));
        }
        if let Some(g) = id.rate_gap {
            put("max_rel_perceived_rate_gap", fmt_num(g));
        }
        put("clearing_violations", id.clearing_violations.to_string());
        if let Some(n) = id.sign_law_violations {
            put("sign_law_violations", n.to_string());
        }
        if let Some(n) = id.drift_violations {
            put("drift_violations", n.to_string());
        }
    }
    for l in &out.limiting {
        let a = l.agent + 1;
        put(&format!("limiting_holdings_agent{a}_paths"), l.n_bankrupt.to_string());
        put(&format!("limiting_holdings_agent{a}_median_rel_error"), fmt_num(l.median));
        put(&format!("limiting_holdings_agent{a}_p90_rel_error"), fmt_num(l.p90));
    }
    if let Some(b) = &out.burst {
        put("burst_paths", b.n_burst.to_string());
        put("burst_order_violations", b.violations.to_string());
    }
    if let Some(l) = &out.law {
        put("law_t_star", fmt_num(l.t_star));
        put("law_ks_distance", fmt_num(l.ks.distance));
        put("law_ks_p_value", fmt_num(l.ks.p_value));
        put("law_effective_size_agent1", fmt_num(l.ks.effective.0));
        put("law_effective_size_agent2", fmt_num(l.ks.effective.1));
        put("law_swap_distance", fmt_num(l.swap_distance));
    }
    s
}

fn profile_csv(p: &crate::scenarios::PathProfile) -> String {
    let mut s = String::from("stat");
    for t in &p.times {
        let _ = write!(s, ",{}", fmt_num(*t));
    }
    s.push('\n');
    let cell = |f: &dyn Fn(&MonteCarloEstimate) -> String| -> String {
        p.estimates
            .iter()
            .map(|e| e.as_ref().map_or_else(String::new, f))
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(s, "mean,{}", cell(&|e| fmt_num(e.mean)));
    let _ = writeln!(s, "std_err,{}", cell(&|e| fmt_num(e.std_err)));
    let _ = writeln!(s, "n,{}", cell(&|e| e.n.to_string()));
    s
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,passed,detail\n");
    for c in checks {
        let _ = writeln!(s, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"));
    }
    s
}

/// Writes the numeric result files of a run; returns their paths.
pub fn write_scenario(dir: &Path, out: &ScenarioOutput, checks: Option<&[Check]>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![
        ("summary.csv".to_string(), summary_csv(out)),
        ("checkpoints.csv".to_string(), checkpoints_csv(out)),
        ("scalars.csv".to_string(), extra_csv(out)),
    ];
    for p in &out.profiles {
        files.push((format!("paths_{}.csv", p.name), profile_csv(p)));
    }
    if let Some(c) = checks {
        files.push(("checks.csv".into(), checks_csv(c)));
    }
    write_all(dir, files)
}

pub fn write_all(dir: &Path, files: Vec<(String, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

/// Writes `manifest.toml`: the configuration echo, library version, seed,
/// wall-clock duration and the files produced.
pub fn write_manifest(dir: &Path, command: &str, rc: &RunConfig, elapsed: Duration, files: &[PathBuf]) -> Result<PathBuf> {
    let mut t = Table::new();
    t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("command".into(), command.into());
    t.insert("seed".into(), (rc.scenario.seed as i64).into());
    t.insert("duration_seconds".into(), elapsed.as_secs_f64().into());
    let names = files
        .iter()
        .map(|p| Value::String(p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())))
        .collect();
    t.insert("files".into(), Value::Array(names));
    t.insert("config".into(), config_table(rc).into());
    let path = dir.join("manifest.toml");
    fs::create_dir_all(dir)?;
    fs::write(&path, t.to_string())?;
    Ok(path)
}
