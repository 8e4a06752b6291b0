//! `E[Z_t] = 1` for every belief density, with grid and bridge detection.

use subjective_bubbles::beliefs::verify_martingale;
use subjective_bubbles::market::gbm_dividend;
use subjective_bubbles::paths::{path_seed, sample_brownian_with_bridge};
use subjective_bubbles::scenarios::{ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    for kind in ScenarioKind::ALL {
        let cfg = ScenarioConfig {
            n_steps: 500,
            n_paths: 20_000,
            ..ScenarioConfig::defaults(kind)
        };
        let grid = cfg.grid()?;
        for agent in &cfg.agents {
            for bridge in [false, true] {
                let sampler = |i| {
                    let x = sample_brownian_with_bridge(&grid, cfg.v.len(), path_seed(cfg.seed, i))?;
                    let d = gbm_dividend(&x, cfg.d0, cfg.drift, &cfg.v)?;
                    agent.belief.density(&d, &x, bridge)
                };
                let r = verify_martingale(sampler, &[0.25, 0.5, 1.0], cfg.n_paths)?;
                let means: Vec<String> = r.estimates.iter().map(|e| e.to_string()).collect();
                println!("{:<28} bridge={bridge:<5} {}", format!("{:?}", agent.belief), means.join("  "));
            }
        }
    }
    Ok(())
}
