//! A pessimist who rules out `D > 1` shorts the stock as bankruptcy nears.

use subjective_bubbles::scenarios::{limiting_holdings_error, sample_scenario_path, ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    let cfg = ScenarioConfig {
        d0: 0.9,
        n_steps: 1000,
        ..ScenarioConfig::defaults(ScenarioKind::Pessimist)
    };
    let mut shown = 0;
    for i in 0.. {
        let p = sample_scenario_path(&cfg, i, None)?;
        let Some(tau) = p.densities[0].tau else { continue };
        let b = p.bundle.as_ref().expect("log economy");
        let t = p.dividend.grid.time(tau);
        println!("path {i}: tau_1 = {t:.3}");
        for j in [tau / 2, tau.saturating_sub(10), tau - 1] {
            println!(
                "  t = {:.3}  D = {:.4}  pi_1 = {:+.4}  W_1 = {:.4}",
                p.dividend.grid.time(j),
                p.dividend.values[j],
                b.stock(0, j)[0],
                b.agents[0].wealth[j]
            );
        }
        if let Some((_, err)) = limiting_holdings_error(&cfg, &p) {
            println!("  relative error against the limiting holding: {err:.4}");
        }
        shown += 1;
        if shown == 3 {
            break;
        }
    }
    Ok(())
}
