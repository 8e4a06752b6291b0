//! Worked values of the model checked against formulas evaluated directly
//! in the test, independent of the library routine under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use subjective_bubbles::beliefs::{density_drawdown, density_linear, density_optimist, density_pessimist, Belief, DensityPath, Detection};
use subjective_bubbles::equilibrium::{
    aggregate_gamma, eta, log_consumption_wealth, log_equilibrium, log_state_price_density, phi_aggregate, phi_inverse,
    solve_multipliers_general, AgentSpec, PriceDiffusion, SolverOptions, Utility,
};
use subjective_bubbles::market::{gbm_dividend, DividendPath};
use subjective_bubbles::paths::{bridge_crossing_correction, path_seed, sample_brownian, BrownianPath, TimeGrid};
use subjective_bubbles::scenarios::{limiting_holdings_error, sample_scenario_path, ScenarioConfig, ScenarioKind};
use subjective_bubbles::stats::{rel_diff, MonteCarloEstimate};
use subjective_bubbles::valuation::{cashflow_integrals, fundamental_value_reference, linear_hitting_probability};

fn dividend(grid: TimeGrid, values: Vec<f64>) -> DividendPath {
    DividendPath {
        grid,
        values,
        drift: 0.0,
        vol: vec![0.2],
    }
}

#[test]
fn grid_spacing() {
    assert!((TimeGrid::new(2.0, 2000).unwrap().dt() - 0.001).abs() < 1e-18);
}

#[test]
fn bridge_probability_one_sigma_root_dt_away() {
    let (b, s, dt) = (0.3, 0.7, 0.01);
    let x = b + s * f64::sqrt(dt);
    assert!((bridge_crossing_correction(x, x, b, dt, s) - 0.1353352832366127).abs() < 1e-15);
    assert!((0.1353352832366127f64 - (-2.0f64).exp()).abs() < 1e-16);
}

#[test]
fn density_substitutions() {
    let g = TimeGrid::new(1.0, 1).unwrap();
    assert_eq!(density_optimist(&dividend(g, vec![2.0, 1.5]), Detection::Grid).unwrap().z[1], 0.5);
    assert_eq!(density_pessimist(&dividend(g, vec![0.5, 0.75]), Detection::Grid).unwrap().z[1], 0.5);
    let z = density_drawdown(&dividend(g, vec![1.0, 1.3]), 0.5, Detection::Grid).unwrap();
    assert!((z.z[1] - 1.3f64.powi(2)).abs() < 1e-14);
    let x = BrownianPath::from_increments(g, 1, vec![0.5]).unwrap();
    assert_eq!(density_linear(&x, 0, Detection::Grid).unwrap().z[1], 1.5);
}

#[test]
fn annuity_factor_and_initial_state_prices() {
    let eta0 = eta(0.0, 0.05, 1.0).unwrap();
    assert!((eta0 - 0.975412).abs() < 5e-7);
    assert!((eta0 - (1.0 - (-0.05f64).exp()) / 0.05).abs() < 1e-15);

    let g = TimeGrid::new(1.0, 4).unwrap();
    let d = dividend(g, vec![2.0; 5]);
    let zs = [DensityPath::reference(g, 1), DensityPath::reference(g, 1)];
    let xi = log_state_price_density(&d, &zs, &[1.0, 1.0], 0.05).unwrap();
    assert!((xi[0] - 1.02521).abs() < 5e-6);
    assert!((xi[0] - 2.0 / (2.0 * eta0)).abs() < 1e-15);

    let w = [1.0, 3.0];
    let xi = log_state_price_density(&d, &zs, &w, 0.05).unwrap();
    for (k, wk) in w.iter().enumerate() {
        let (c, _) = log_consumption_wealth(&xi, &zs[k], *wk, 0.05).unwrap();
        assert!(rel_diff(c[0], wk * 2.0 / 4.0) < 1e-15);
    }
}

#[test]
fn aggregate_loading_with_one_reference_agent() {
    let g = TimeGrid::new(1.0, 200).unwrap();
    let x = sample_brownian(&g, 1, 17).unwrap();
    let d = gbm_dividend(&x, 2.0, 0.0, &[0.2]).unwrap();
    let z1 = density_optimist(&d, Detection::Grid).unwrap();
    let zs = [z1.clone(), DensityPath::reference(g, 1)];
    let (w1, w2) = (1.5, 0.5);
    let gamma = aggregate_gamma(&zs, &[w1, w2]).unwrap();
    let v = 0.2;
    for j in 0..g.len() {
        let dj = d.values[j];
        // γ_1 = vD/(D - 1) for the optimist density
        let expect = if z1.alive(j) {
            w1 * z1.z[j] * v * dj / (dj - 1.0) / (w1 * z1.z[j] + w2)
        } else {
            0.0
        };
        assert!((gamma[j] - expect).abs() <= 1e-12 * expect.abs().max(1.0), "j = {j}");
        // θ from the proposition's closed form
        if z1.alive(j) {
            let theta = v - v * dj / (dj - 1.0 + w2 / w1 * (2.0 - 1.0));
            assert!(((v - gamma[j]) - theta).abs() < 1e-12);
        }
    }
}

#[test]
fn optimist_price_of_risk_vanishes_at_time_zero() {
    let g = TimeGrid::new(1.0, 10).unwrap();
    let x = sample_brownian(&g, 1, 2).unwrap();
    let d = gbm_dividend(&x, 2.0, 0.0, &[0.2]).unwrap();
    let zs = [density_optimist(&d, Detection::Grid).unwrap(), DensityPath::reference(g, 1)];
    let b = log_equilibrium(&d, &zs, &[1.0, 1.0], 0.05, &PriceDiffusion::Scalar(0.2)).unwrap();
    assert!(b.theta(0)[0].abs() < 1e-16);
    assert!((0.2f64 - 0.2 * 2.0 / (2.0 - 1.0 + 1.0)).abs() == 0.0);
}

#[test]
fn aggregate_inverse_marginal_utility() {
    let log = [Utility::Log, Utility::Log];
    assert!((phi_inverse(2.0, &[1.0, 1.0], &log).unwrap() - 1.0).abs() < 1e-15);
    let pw = [Utility::Power { gamma: 2.0 }, Utility::Power { gamma: 2.0 }];
    let nu = [0.7, 1.9];
    for x in [0.1, 1.0, 3.0, 40.0] {
        let y = phi_inverse(x, &nu, &pw).unwrap();
        let direct: f64 = nu.iter().map(|n| (y / n).powf(-0.5)).sum();
        assert!(rel_diff(direct, x) < 1e-10);
        assert!(rel_diff(phi_aggregate(y, &nu, &pw).unwrap(), direct) < 1e-14);
    }
}

#[test]
fn log_multipliers_scale_inversely_with_wealth() {
    let g = TimeGrid::new(1.0, 40).unwrap();
    let opts = SolverOptions {
        n_paths: 2000,
        seed: 5,
        tol: 1e-9,
        ..Default::default()
    };
    let sampler = |x: &BrownianPath| -> subjective_bubbles::Result<_> {
        let d = gbm_dividend(x, 1.4, 0.0, &[0.3])?;
        let zs = vec![density_optimist(&d, Detection::Grid)?, DensityPath::reference(g, 1)];
        Ok((d, zs))
    };
    let agents = |lambda: f64| {
        vec![
            AgentSpec::log(lambda, Belief::Optimist).unwrap(),
            AgentSpec::log(2.0 * lambda, Belief::Reference).unwrap(),
        ]
    };
    let base = solve_multipliers_general(&agents(1.0), sampler, 0.05, &g, &opts).unwrap();
    let scaled = solve_multipliers_general(&agents(3.0), sampler, 0.05, &g, &opts).unwrap();
    for (a, b) in base.y.iter().zip(&scaled.y) {
        assert!(rel_diff(*b, a / 3.0) < 1e-8, "{a} {b}");
    }
}

#[test]
fn deterministic_dividend_value_is_the_annuity() {
    let g = TimeGrid::new(1.0, 500).unwrap();
    let x = sample_brownian(&g, 1, 1).unwrap();
    let d = gbm_dividend(&x, 1.7, 0.0, &[0.0]).unwrap();
    let zs = [DensityPath::reference(g, 1)];
    let xi = log_state_price_density(&d, &zs, &[1.0], 0.05).unwrap();
    let s = [cashflow_integrals(&xi, &d.values, g.dt(), None).unwrap()];
    let f = fundamental_value_reference(&s, xi[0]).unwrap();
    // ∫₀¹ 1.7 e^{-0.05 s} ds, with the trapezoid's O(Δt²) error bound
    let exact = 1.7 * (1.0 - (-0.05f64).exp()) / 0.05;
    assert!((f.mean - exact).abs() < 1.7 * 0.05 * 0.05 * g.dt() * g.dt() / 12.0 * 1.01);
}

#[test]
fn reflection_probability_against_sub_simulation() {
    // P(min_{u ≤ h} (x + B_u) ≤ -1) by simulating fine paths with bridge
    // crossing between steps
    let (h, n_steps, n_sub) = (0.5, 200, 10_000u64);
    let dt = h / n_steps as f64;
    for x in [-0.6, 0.0, 0.4] {
        let hits: Vec<f64> = (0..n_sub)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(path_seed(99, i));
                let mut pos: f64 = x;
                let mut survive = 1.0;
                for _ in 0..n_steps {
                    let next = pos + dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    if next <= -1.0 {
                        return 1.0;
                    }
                    let a = (pos + 1.0) * (next + 1.0);
                    survive *= 1.0 - (-2.0 * a / dt).exp();
                    pos = next;
                }
                1.0 - survive
            })
            .collect();
        let mc = MonteCarloEstimate::from_samples(&hits).unwrap();
        let p = linear_hitting_probability(x, h);
        assert!(mc.within(p, 3.0), "x = {x}: {mc} vs {p}");
    }
}

#[test]
fn optimist_limit_has_unit_coefficient() {
    // w_1 = w_2, D_0 = 2: the limit (w_1/w_2)(D_0 - 1)⁻¹ S_τ is S_τ = D_τ η(τ) with D_τ = 1
    let cfg = ScenarioConfig {
        d0: 2.0,
        v: vec![0.6],
        n_steps: 4000,
        ..ScenarioConfig::defaults(ScenarioKind::Optimist)
    };
    let mut seen = 0;
    for i in 0..400 {
        let p = sample_scenario_path(&cfg, i, None).unwrap();
        let Some(tau) = p.densities[0].tau else { continue };
        let b = p.bundle.as_ref().unwrap();
        let t = p.dividend.grid.time(tau);
        let s_tau = (1.0 - (-cfg.rho * (cfg.horizon - t)).exp()) / cfg.rho;
        let held = b.stock(0, tau - 1)[0];
        let (_, err) = limiting_holdings_error(&cfg, &p).unwrap();
        assert!((err - (held - s_tau).abs() / s_tau).abs() < 1e-12);
        assert!(err < 0.25, "path {i}: {held} vs {s_tau}");
        seen += 1;
    }
    assert!(seen >= 10, "{seen}");
}

#[test]
fn pessimist_limit_is_short() {
    let cfg = ScenarioConfig {
        d0: 0.8,
        v: vec![0.5],
        n_steps: 2000,
        ..ScenarioConfig::defaults(ScenarioKind::Pessimist)
    };
    let mut seen = 0;
    for i in 0..200 {
        let p = sample_scenario_path(&cfg, i, None).unwrap();
        if let Some(tau) = p.densities[0].tau {
            let eta_t = eta(p.dividend.grid.time(tau), cfg.rho, cfg.horizon).unwrap();
            let limit = -1.0 / (1.0 - cfg.d0) * eta_t;
            assert!(limit < 0.0 && p.bundle.as_ref().unwrap().stock(0, tau - 1)[0] < 0.0);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn linear_belief_matches_its_coordinate() {
    let g = TimeGrid::new(1.0, 50).unwrap();
    let x = sample_brownian(&g, 2, 8).unwrap();
    let d = gbm_dividend(&x, 1.0, 0.0, &[1.0, 1.0]).unwrap();
    let z = Belief::Linear { coordinate: 1 }.density(&d, &x, false).unwrap();
    for j in 0..z.tau.unwrap_or(g.len()) {
        assert!((z.z[j] - (1.0 + x.at(j)[1])).abs() < 1e-15);
    }
}
