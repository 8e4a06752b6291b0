//! Acceptance run at the default scale (10⁵ paths, 2000 steps, T = 1).
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use subjective_bubbles::beliefs::{verify_martingale, Belief, DensityPath};
use subjective_bubbles::equilibrium::{
    clearing_violations, eta, log_equilibrium, solve_multipliers_general, AgentSpec, PriceDiffusion, SolverOptions, Utility,
};
use subjective_bubbles::market::gbm_dividend;
use subjective_bubbles::paths::{path_seed, sample_brownian, BrownianPath, TimeGrid};
use subjective_bubbles::scenarios::{
    limiting_holdings_refinement, run_scenario, ScenarioConfig, ScenarioKind, ScenarioOutput, IDENTITY_TOL,
};
use subjective_bubbles::stats::{rel_diff, trapezoid};
use subjective_bubbles::valuation::{
    deflated_riskless_terminal, lattice_monte_carlo, lattice_oracle_value, riskless_bubble, riskless_bubble_truncated, Asset,
    LatticeEconomy, RisklessSample,
};
use subjective_bubbles::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

struct Runs {
    outputs: Vec<ScenarioOutput>,
}

impl Runs {
    fn get(&self, kind: ScenarioKind) -> &ScenarioOutput {
        self.outputs.iter().find(|o| o.config.kind == kind).unwrap()
    }
}

fn criterion_1() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in ScenarioKind::ALL {
        let cfg = ScenarioConfig::defaults(kind);
        let grid = cfg.grid()?;
        let dim = cfg.v.len();
        let belief = cfg.agents[0].belief;
        let belief = match kind {
            ScenarioKind::DrawdownPair => cfg.agents[1].belief,
            _ => belief,
        };
        let sampler = |i: u64| -> Result<DensityPath> {
            let x = sample_brownian(&grid, dim, path_seed(cfg.seed, i))?;
            let d = gbm_dividend(&x, cfg.d0, cfg.drift, &cfg.v)?;
            belief.density(&d, &x, false)
        };
        let t = cfg.horizon;
        let rep = verify_martingale(sampler, &[t / 4.0, t / 2.0, t], cfg.n_paths)?;
        ok &= rep.all_pass();
        let worst = rep.estimates.iter().map(|e| (e.mean - 1.0).abs() / e.std_err).fold(0.0, f64::max);
        lines.push(format!("{belief:?} max {worst:.2} SE"));
    }
    Ok(outcome(ok, lines.join("; ")))
}

fn criterion_2(runs: &Runs) -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [ScenarioKind::Optimist, ScenarioKind::Pessimist, ScenarioKind::DrawdownPair] {
        let id = runs.get(kind).identities.as_ref().unwrap();
        worst = worst.max(id.market).max(id.wealth).max(id.rate);
    }
    outcome(
        worst <= IDENTITY_TOL,
        format!("max relative deviation {worst:.3e} over S = D eta, W = c eta, r = rho - v theta"),
    )
}

fn criterion_3(runs: &Runs) -> Outcome {
    let total: usize = runs
        .outputs
        .iter()
        .map(|o| o.identities.as_ref().unwrap().clearing_violations)
        .sum();
    let n: u64 = runs.outputs.iter().map(|o| o.config.n_paths).sum();
    outcome(
        total == 0,
        format!("{total} violating grid points over {n} paths in four economies"),
    )
}

fn criterion_4(runs: &Runs) -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [ScenarioKind::Optimist, ScenarioKind::DrawdownPair] {
        for b in runs.get(kind).bubbles.iter().filter(|b| b.asset == Asset::Market) {
            worst = worst.max(b.residual_relative());
        }
    }
    outcome(worst <= IDENTITY_TOL, format!("max relative residual {worst:.3e}"))
}

fn criterion_5(runs: &Runs) -> Outcome {
    let opt = &runs.get(ScenarioKind::Optimist).bubbles;
    let dd = &runs.get(ScenarioKind::DrawdownPair).bubbles;
    let ok =
        opt[0].bubble.positive_at(3.0) && opt[1].bubble.within(0.0, 3.0) && dd[0].bubble.positive_at(3.0) && dd[1].bubble.positive_at(3.0);
    let z = |b: &subjective_bubbles::valuation::BubbleReport| b.bubble.mean / b.bubble.std_err;
    outcome(
        ok,
        format!(
            "optimist B1 = {} ({:.1} SE), B2 = {}; drawdown B1 = {} ({:.1} SE), B2 = {} ({:.1} SE)",
            opt[0].bubble,
            z(&opt[0]),
            opt[1].bubble,
            dd[0].bubble,
            z(&dd[0]),
            dd[1].bubble,
            z(&dd[1])
        ),
    )
}

fn criterion_6() -> Result<Outcome> {
    let cfg = ScenarioConfig::defaults(ScenarioKind::Optimist);
    let (coarse, fine) = limiting_holdings_refinement(&cfg, 4)?;
    let (Some(c), Some(f)) = (coarse.first(), fine.first()) else {
        return Ok(outcome(false, "no bankrupt paths"));
    };
    Ok(outcome(
        c.median < 0.05 && f.median < c.median,
        format!(
            "median rel. error {:.4} at {} steps ({} paths), {:.4} at {} steps ({} paths)",
            c.median,
            cfg.n_steps,
            c.n_bankrupt,
            f.median,
            4 * cfg.n_steps,
            f.n_bankrupt
        ),
    ))
}

fn criterion_7(runs: &Runs) -> Outcome {
    let b = runs.get(ScenarioKind::DrawdownPair).burst.as_ref().unwrap();
    let zero = b.post_burst_bubble.is_none_or(|e| e.within(0.0, 3.0));
    let est = b.post_burst_bubble.map_or("no burst paths".into(), |e| e.to_string());
    outcome(
        b.violations == 0 && zero,
        format!(
            "{} burst paths, {} ordering violations, post-burst agent-1 bubble {est}",
            b.n_burst, b.violations
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let cfg = ScenarioConfig::defaults(ScenarioKind::Optimist);
    let grid = TimeGrid::new(cfg.horizon, 100)?;
    let opts = SolverOptions {
        n_paths: 50_000,
        seed: cfg.seed,
        antithetic: true,
        ..Default::default()
    };
    let sampler = |x: &BrownianPath| cfg.dividend_and_densities(x);
    let sol = solve_multipliers_general(&cfg.agents, sampler, cfg.rho, &grid, &opts)?;
    let eta0 = eta(0.0, cfg.rho, cfg.horizon)?;
    let log_err = sol
        .y
        .iter()
        .zip(&cfg.agents)
        .map(|(y, a)| rel_diff(*y, eta0 / a.wealth))
        .fold(0.0, f64::max);

    let gamma = 3.0;
    let (w, d0, rho) = (1.0, 1.0, cfg.rho);
    let agent = [AgentSpec::new(w, Utility::Power { gamma }, Belief::Reference)?];
    let pgrid = TimeGrid::new(cfg.horizon, 1000)?;
    let det = |x: &BrownianPath| -> Result<_> {
        let d = gbm_dividend(x, d0, 0.0, &[0.0])?;
        Ok((d, vec![DensityPath::reference(pgrid, 1)]))
    };
    let one = SolverOptions {
        n_paths: 1,
        tol: 1e-12,
        ..Default::default()
    };
    let power = solve_multipliers_general(&agent, det, rho, &pgrid, &one)?;
    // c ≡ D_0, so ξ_t = e^{-ρt} D_0^{-γ}/y and the budget ∫ ξ D_0 = w gives y
    let disc: Vec<f64> = pgrid.times().iter().map(|t| (-rho * t).exp()).collect();
    let y_oracle = d0.powf(1.0 - gamma) * trapezoid(&disc, pgrid.dt(), 0, pgrid.n_steps()) / w;
    let power_err = rel_diff(power.y[0], y_oracle);
    Ok(outcome(
        log_err <= 1e-3 && power_err <= 1e-6,
        format!("log economy max rel. error {log_err:.2e}; power utility rel. error {power_err:.2e}"),
    ))
}

fn criterion_9() -> Result<Outcome> {
    let econ = LatticeEconomy {
        d0: 1.25,
        v: 0.3,
        rho: 0.05,
        horizon: 1.0,
        n_steps: 10,
        weights: [1.0, 1.0],
    };
    let exact = lattice_oracle_value(&econ)?;
    let mc = lattice_monte_carlo(&econ, 100_000, 1)?;
    let ok = mc[0].within(exact.f, 3.0) && mc[1].within(exact.f_k, 3.0) && mc[2].within(exact.bubble, 3.0);
    let z = |i: usize, e: f64| (mc[i].mean - e) / mc[i].std_err;
    Ok(outcome(
        ok,
        format!(
            "F {:+.2} SE, F1 {:+.2} SE, B1 {:+.2} SE (lattice B1 = {:.6})",
            z(0, exact.f),
            z(1, exact.f_k),
            z(2, exact.bubble),
            exact.bubble
        ),
    ))
}

fn criterion_10(runs: &Runs) -> Outcome {
    let l = runs.get(ScenarioKind::TwoStock).law.as_ref().unwrap();
    outcome(
        l.ks.p_value > 0.01 && l.swap_distance == 0.0,
        format!(
            "t* = {}, KS distance {:.4}, p = {:.3} ({} replicates), swap distance {}",
            l.t_star, l.ks.distance, l.ks.p_value, l.ks.replicates, l.swap_distance
        ),
    )
}

fn criterion_11(runs: &Runs) -> Result<Outcome> {
    let est = runs.get(ScenarioKind::Optimist).riskless[0].unwrap();
    let grid = TimeGrid::new(1.0, 2000)?;
    let x = sample_brownian(&grid, 1, 3)?;
    let d = gbm_dividend(&x, 1.0, 0.0, &[0.0])?;
    let b = log_equilibrium(&d, &[DensityPath::reference(grid, 1)], &[1.0], 0.05, &PriceDiffusion::Scalar(1.0))?;
    let s = [RisklessSample {
        deflated: deflated_riskless_terminal(&b, &x)?,
        bankrupt: false,
    }; 2];
    let (ctrl, trunc) = (riskless_bubble(&s)?, riskless_bubble_truncated(&s)?);
    let exact_zero = ctrl.mean == 0.0 && trunc.mean == 0.0 && clearing_violations(&b) == 0;
    Ok(outcome(
        est.positive_at(3.0) && exact_zero,
        format!(
            "optimist agent 1 {est} ({:.1} SE); deterministic control {} and {}",
            est.mean / est.std_err,
            ctrl.mean,
            trunc.mean
        ),
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Result<Outcome>| {
        let (tag, detail) = match r {
            Ok(o) if o.passed => ("PASS", o.detail),
            Ok(o) => ("FAIL", o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        failed += (tag == "FAIL") as usize;
        println!("criterion {n:>2} {tag} {name}: {detail}");
    };

    let outputs: Result<Vec<_>> = ScenarioKind::ALL
        .iter()
        .map(|&k| {
            let t = Instant::now();
            let out = run_scenario(&ScenarioConfig::defaults(k));
            eprintln!("{} scenario: {:.0} s", k.name(), t.elapsed().as_secs_f64());
            out
        })
        .collect();
    let runs = match outputs {
        Ok(outputs) => Runs { outputs },
        Err(e) => {
            println!("scenario runs failed: {e}");
            return ExitCode::FAILURE;
        }
    };

    report(1, "density martingales", criterion_1());
    report(2, "closed-form identities", Ok(criterion_2(&runs)));
    report(3, "clearing and no resurrection", Ok(criterion_3(&runs)));
    report(4, "decomposition residual", Ok(criterion_4(&runs)));
    report(5, "bubble positivity", Ok(criterion_5(&runs)));
    report(6, "limiting holdings", criterion_6());
    report(7, "burst structure", Ok(criterion_7(&runs)));
    report(8, "general solver reduction", criterion_8());
    report(9, "lattice oracle", criterion_9());
    report(10, "law equality", Ok(criterion_10(&runs)));
    report(11, "riskless bubble", criterion_11(&runs));
    println!("{} of 11 criteria passed in {:.0} s", 11 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
