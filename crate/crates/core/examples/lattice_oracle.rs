//! Exhaustive binomial valuation against Monte Carlo on the same tree.

use subjective_bubbles::valuation::{lattice_backward_induction, lattice_monte_carlo, lattice_oracle_value, LatticeEconomy};

fn main() -> subjective_bubbles::Result<()> {
    let econ = LatticeEconomy {
        d0: 1.25,
        v: 0.3,
        rho: 0.05,
        horizon: 1.0,
        n_steps: 10,
        weights: [1.0, 1.0],
    };
    let exact = lattice_oracle_value(&econ)?;
    let tree = lattice_backward_induction(&econ)?;
    let mc = lattice_monte_carlo(&econ, 100_000, 7)?;
    println!("{:<4} {:>14} {:>14}  monte carlo", "", "enumeration", "induction");
    for (name, e, t, m) in [
        ("F", exact.f, tree.f, mc[0]),
        ("F1", exact.f_k, tree.f_k, mc[1]),
        ("B1", exact.bubble, tree.bubble, mc[2]),
    ] {
        println!("{name:<4} {e:>14.10} {t:>14.10}  {m}");
    }
    Ok(())
}
