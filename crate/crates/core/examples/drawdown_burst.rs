//! Two optimists, one with a drawdown floor: both see a bubble, and once
//! the running maximum reaches `1/κ` agent 2 must fail first.

use subjective_bubbles::scenarios::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    let cfg = ScenarioConfig {
        n_paths: 20_000,
        n_steps: 1000,
        ..ScenarioConfig::defaults(ScenarioKind::DrawdownPair)
    };
    let out = run_scenario(&cfg)?;
    for (k, p) in out.bankruptcy.iter().enumerate() {
        println!("P(tau_{} <= T) = {p}", k + 1);
    }
    for b in &out.bubbles {
        println!("agent {} market bubble {}", b.agent + 1, b.bubble);
    }
    let burst = out.burst.expect("drawdown scenario");
    println!(
        "{} paths burst before either bankruptcy, {} broke the ordering",
        burst.n_burst, burst.violations
    );
    if let Some(e) = burst.post_burst_bubble {
        println!("agent 1 bubble after the burst: {e}");
    }
    for l in &out.limiting {
        println!(
            "limiting holdings agent {}: median {:.4}, p90 {:.4} ({} paths)",
            l.agent + 1,
            l.median,
            l.p90,
            l.n_bankrupt
        );
    }
    Ok(())
}
