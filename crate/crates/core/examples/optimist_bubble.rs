//! Market and riskless bubbles seen by an optimist who rules out `D < 1`.

use subjective_bubbles::scenarios::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    let cfg = ScenarioConfig::defaults(ScenarioKind::Optimist);
    let out = run_scenario(&cfg)?;
    println!("P(tau_1 <= T) = {}", out.bankruptcy[0]);
    for b in &out.bubbles {
        println!("agent {}: F = {}  F^k = {}  bubble = {}", b.agent + 1, b.f, b.f_k, b.bubble);
    }
    for (k, r) in out.riskless.iter().enumerate() {
        if let Some(r) = r {
            println!("agent {} riskless bubble = {r}", k + 1);
        }
    }
    for l in &out.limiting {
        println!(
            "limiting holdings, agent {}: median rel. error {:.4} over {} paths",
            l.agent + 1,
            l.median,
            l.n_bankrupt
        );
    }
    Ok(())
}
