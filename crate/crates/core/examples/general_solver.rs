//! Budget multipliers for a log optimist trading with a power-utility
//! reference agent, and the state price density they imply.

use subjective_bubbles::equilibrium::{eta, general_state_price_density, solve_multipliers_general, SolverOptions, Utility};
use subjective_bubbles::paths::BrownianPath;
use subjective_bubbles::scenarios::{ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    let mut cfg = ScenarioConfig::defaults(ScenarioKind::Optimist);
    cfg.d0 = 1.5;
    cfg.agents[1].utility = Utility::Power { gamma: 2.0 };
    let grid = subjective_bubbles::paths::TimeGrid::new(cfg.horizon, 200)?;
    let opts = SolverOptions {
        n_paths: 4_000,
        antithetic: true,
        tol: 1e-4,
        ..Default::default()
    };
    let sampler = |x: &BrownianPath| cfg.dividend_and_densities(x);
    let sol = solve_multipliers_general(&cfg.agents, sampler, cfg.rho, &grid, &opts)?;
    let eta0 = eta(0.0, cfg.rho, cfg.horizon)?;
    println!("converged in {} iterations", sol.iterations);
    for (k, (y, b)) in sol.y.iter().zip(&sol.budgets).enumerate() {
        println!(
            "agent {}: y = {y:.6} (log-utility value {:.6}), budget {b}",
            k + 1,
            eta0 / cfg.agents[k].wealth
        );
    }
    let x = subjective_bubbles::paths::sample_brownian(&grid, 1, 11)?;
    let (d, zs) = cfg.dividend_and_densities(&x)?;
    let utilities: Vec<Utility> = cfg.agents.iter().map(|a| a.utility).collect();
    let xi = general_state_price_density(&d, &zs, &utilities, &sol.y, cfg.rho)?;
    println!("xi_0 = {:.6}, xi_T = {:.6} on one path", xi[0], xi[grid.n_steps()]);
    Ok(())
}
