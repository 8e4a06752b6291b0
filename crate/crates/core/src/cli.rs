//! The `bubbles` command line: `run`, `verify` and `oracle`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::output::{checks_csv, fmt_num, write_all, write_manifest, write_scenario};
use crate::scenarios::{invariant_checks, run_scenario, Check};
use crate::valuation::{lattice_backward_induction, lattice_monte_carlo, lattice_oracle_value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "bubbles",
    version,
    about = "Subjective bubbles in equilibrium economies with non-equivalent beliefs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write result files.
    Run(Common),
    /// Run the scenario's invariant suite; exit 1 if any check fails.
    Verify(Common),
    /// Compare Monte Carlo valuation with the exhaustive binomial lattice.
    Oracle(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (or a manifest from an earlier run).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    /// Simulation steps (lattice steps for `oracle`).
    #[arg(long)]
    steps: Option<usize>,
    /// Detect barrier crossings between grid points with the Brownian bridge.
    #[arg(long)]
    bridge: bool,
    #[arg(long, default_value = "bubbles-out")]
    out: PathBuf,
}

fn load(c: &Common, oracle: bool) -> Result<RunConfig> {
    let mut rc = parse_config(&c.config)?;
    let s = &mut rc.scenario;
    if let Some(x) = c.seed {
        s.seed = x;
    }
    if let Some(x) = c.paths {
        s.n_paths = x;
    }
    if let Some(x) = c.steps {
        if oracle {
            rc.lattice.n_steps = x;
        } else {
            s.n_steps = x;
        }
    }
    s.bridge |= c.bridge;
    s.validate()?;
    if oracle {
        rc.lattice.validate()?;
    }
    Ok(rc)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Config(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Progress goes to `stdout`, errors to `stderr`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(c) => run(c, stdout),
        Command::Verify(c) => verify(c, stdout),
        Command::Oracle(c) => oracle(c, stdout),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run(c: &Common, out: &mut dyn Write) -> Result<bool> {
    let rc = load(c, false)?;
    let start = Instant::now();
    let res = run_scenario(&rc.scenario)?;
    let files = write_scenario(&c.out, &res, None)?;
    let m = write_manifest(&c.out, "run", &rc, start.elapsed(), &files)?;
    for (k, e) in res.bankruptcy.iter().enumerate() {
        writeln!(out, "P(tau_{} <= T)      {e}", k + 1)?;
    }
    for b in &res.bubbles {
        writeln!(out, "bubble {:?} agent {}  {}", b.asset, b.agent + 1, b.bubble)?;
    }
    for (k, r) in res.riskless.iter().enumerate() {
        if let Some(r) = r {
            writeln!(out, "riskless bubble agent {}  {r}", k + 1)?;
        }
    }
    writeln!(out, "wrote {} files, manifest {}", files.len(), m.display())?;
    Ok(true)
}

fn report(out: &mut dyn Write, checks: &[Check]) -> Result<bool> {
    for c in checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(failed == 0)
}

fn verify(c: &Common, out: &mut dyn Write) -> Result<bool> {
    let rc = load(c, false)?;
    let start = Instant::now();
    let res = run_scenario(&rc.scenario)?;
    let checks = invariant_checks(&res);
    let files = write_scenario(&c.out, &res, Some(&checks))?;
    write_manifest(&c.out, "verify", &rc, start.elapsed(), &files)?;
    report(out, &checks)
}

fn oracle(c: &Common, out: &mut dyn Write) -> Result<bool> {
    let rc = load(c, true)?;
    let start = Instant::now();
    let econ = rc.lattice;
    let exact = lattice_oracle_value(&econ)?;
    let induction = lattice_backward_induction(&econ)?;
    let mc = lattice_monte_carlo(&econ, rc.scenario.n_paths, rc.scenario.seed)?;
    let mut checks = Vec::new();
    let mut csv = String::from("quantity,lattice,induction,mc_mean,mc_std_err,n\n");
    for (name, e, i, m) in [
        ("F", exact.f, induction.f, mc[0]),
        ("F1", exact.f_k, induction.f_k, mc[1]),
        ("B1", exact.bubble, induction.bubble, mc[2]),
    ] {
        let tol = 1e-12 * e.abs().max(1.0);
        checks.push(Check {
            name: format!("{name}_enumeration_vs_induction"),
            passed: (e - i).abs() <= tol,
            detail: format!("{} vs {}", fmt_num(e), fmt_num(i)),
        });
        checks.push(Check {
            name: format!("{name}_monte_carlo"),
            passed: m.within(e, 3.0),
            detail: format!("{m} vs lattice {}", fmt_num(e)),
        });
        csv.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            fmt_num(e),
            fmt_num(i),
            fmt_num(m.mean),
            fmt_num(m.std_err),
            m.n
        ));
    }
    let mut files = write_all(&c.out, vec![("oracle.csv".into(), csv), ("checks.csv".into(), checks_csv(&checks))])?;
    files.push(write_manifest(&c.out, "oracle", &rc, start.elapsed(), &files)?);
    report(out, &checks)
}

/// Entry point of the `bubbles` binary.
pub fn main_exit() -> i32 {
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run_cli(std::env::args_os(), &mut stdout, &mut stderr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("bubbles").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    fn config(dir: &Path, body: &str) -> String {
        let p = dir.join("c.toml");
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = call(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn validation_errors_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), "scenario = \"optimist\"\n[economy]\nd0 = 0.5\n");
        let (code, _, err) = call(&["run", &c]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("d0") && err.contains("D_0 > 1"), "{err}");
        assert_eq!(call(&["run", "/nonexistent/file.toml"]).0, EXIT_USAGE);
        let c = config(dir.path(), "scenario = \"optimist\"\n");
        assert_eq!(call(&["oracle", &c, "--steps", "40"]).0, EXIT_USAGE);
    }

    #[test]
    fn verify_small_optimist() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), "scenario = \"optimist\"\n[economy]\nd0 = 1.3\n");
        let out = dir.path().join("o");
        let (code, stdout, _) = call(&["verify", &c, "--paths", "2000", "--steps", "200", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{stdout}");
        assert!(stdout.contains("PASS clearing_and_no_resurrection"));
        assert!(out.join("checks.csv").exists() && out.join("manifest.toml").exists());
    }

    #[test]
    fn oracle_small_instance() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), "scenario = \"optimist\"\n[economy]\nd0 = 1.25\nv = 0.3\n");
        let out = dir.path().join("o");
        let (code, stdout, _) = call(&["oracle", &c, "--paths", "20000", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{stdout}");
        assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
        assert!(out.join("oracle.csv").exists());
    }

    #[test]
    fn run_is_reproducible_with_bridge() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            dir.path(),
            "scenario = \"two_stock\"\n[simulation]\nlaw_paths = 200\nks_replicates = 19\n",
        );
        let args = |o: &str| {
            vec![
                "run".to_string(),
                c.clone(),
                "--paths".into(),
                "300".into(),
                "--steps".into(),
                "40".into(),
                "--bridge".into(),
                "--out".into(),
                o.into(),
            ]
        };
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for o in [&a, &b] {
            let args = args(o.to_str().unwrap());
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            assert_eq!(call(&refs).0, EXIT_OK);
        }
        let summary = |d: &Path| std::fs::read(d.join("summary.csv")).unwrap();
        assert_eq!(summary(&a), summary(&b));
        let m = std::fs::read_to_string(a.join("manifest.toml")).unwrap();
        assert!(m.contains("bridge = true") && m.contains("n_paths = 300"), "{m}");
    }
}
