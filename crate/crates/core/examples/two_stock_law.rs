//! Two-stock economy: each agent's bubble law under their own beliefs, and
//! the same comparison once the symmetry hypothesis is broken.

use subjective_bubbles::scenarios::{law_equality_test, ScenarioConfig, ScenarioKind};

fn main() -> subjective_bubbles::Result<()> {
    let cfg = ScenarioConfig {
        n_steps: 500,
        law_paths: 5000,
        ks_replicates: 199,
        ..ScenarioConfig::defaults(ScenarioKind::TwoStock)
    };
    let t = law_equality_test(&cfg, true)?;
    println!(
        "w1 = w2: KS distance {:.4}, p = {:.3}, swap control {}",
        t.ks.distance, t.ks.p_value, t.swap_distance
    );

    let mut skew = cfg.clone();
    skew.agents[0].wealth = 3.0;
    let t = law_equality_test(&skew, false)?;
    println!("w1 = 3 w2: KS distance {:.4}, p = {:.3}", t.ks.distance, t.ks.p_value);
    Ok(())
}
