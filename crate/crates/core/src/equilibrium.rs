//! Equilibrium of the multi-agent economy: closed forms for logarithmic
//! investors, the general aggregation `Φ`/`Φ⁻¹` with a Monte Carlo budget
//! solve for the multipliers, and optimal trading strategies.

use nalgebra::DMatrix;

use crate::beliefs::{Belief, DensityPath};
use crate::error::{Error, Result};
use crate::market::DividendPath;
use crate::paths::{path_seed, sample_brownian, BrownianPath, TimeGrid};
use crate::stats::{clear_exact, fold_paths, trapezoid, ulp_of, Accumulator, MonteCarloEstimate};

/// `η(t) = (1 - e^{-ρ(T-t)})/ρ`, the horizon annuity factor.
pub fn eta(t: f64, rho: f64, horizon: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::validation("rho", "time preference must be positive"));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::validation("t", "must lie in [0, T]"));
    }
    Ok(-(-rho * (horizon - t)).exp_m1() / rho)
}

/// `η` at every grid point.
pub fn eta_path(grid: &TimeGrid, rho: f64) -> Result<Vec<f64>> {
    (0..grid.len()).map(|j| eta(grid.time(j), rho, grid.horizon())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Log,
    /// CRRA utility with relative risk aversion `gamma`.
    Power {
        gamma: f64,
    },
}

impl Utility {
    /// Inverse marginal utility `I(y)`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        match *self {
            Utility::Log => 1.0 / y,
            Utility::Power { gamma } => y.powf(-1.0 / gamma),
        }
    }

    /// `-d ln I / d ln y`.
    fn elasticity(&self) -> f64 {
        match *self {
            Utility::Log => 1.0,
            Utility::Power { gamma } => 1.0 / gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSpec {
    pub wealth: f64,
    pub utility: Utility,
    pub belief: Belief,
}

impl AgentSpec {
    pub fn new(wealth: f64, utility: Utility, belief: Belief) -> Result<Self> {
        if !(wealth > 0.0) || !wealth.is_finite() {
            return Err(Error::validation("wealth", "initial wealth must be positive"));
        }
        if let Utility::Power { gamma } = utility {
            if !(gamma > 0.0) || !gamma.is_finite() {
                return Err(Error::validation("gamma", "risk aversion must be positive"));
            }
        }
        Ok(Self { wealth, utility, belief })
    }

    pub fn log(wealth: f64, belief: Belief) -> Result<Self> {
        Self::new(wealth, Utility::Log, belief)
    }
}

fn check_common(d: &DividendPath, densities: &[DensityPath], weights: &[f64]) -> Result<()> {
    if densities.is_empty() || densities.len() != weights.len() {
        return Err(Error::validation("weights", "one positive weight per density required"));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::validation("weights", "must be positive"));
    }
    if densities.iter().any(|z| z.grid != d.grid) {
        return Err(Error::GridMismatch("densities and dividend differ".into()));
    }
    Ok(())
}

fn weighted_mass(densities: &[DensityPath], weights: &[f64], j: usize) -> f64 {
    densities.iter().zip(weights).map(|(z, w)| w * z.z[j]).sum()
}

/// `ξ_t = e^{-ρt} Σ w_k Z_kt / (D_t η(0))`.
pub fn log_state_price_density(d: &DividendPath, densities: &[DensityPath], weights: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_common(d, densities, weights)?;
    let eta0 = eta(0.0, rho, d.grid.horizon())?;
    (0..d.grid.len())
        .map(|j| {
            let m = weighted_mass(densities, weights, j);
            if m <= 0.0 {
                return Err(Error::SolvencyViolation { index: Some(j) });
            }
            Ok((-rho * d.grid.time(j)).exp() * m / (d.values[j] * eta0))
        })
        .collect()
}

/// `c_k = w_k Z_k / (e^{ρt} ξ η(0))` before bankruptcy and 0 after;
/// `W_k = c_k η(t)`.
pub fn log_consumption_wealth(xi: &[f64], z: &DensityPath, wealth: f64, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = z.grid;
    let etas = eta_path(&grid, rho)?;
    let mut c = vec![0.0; grid.len()];
    let mut w = vec![0.0; grid.len()];
    for j in 0..grid.len().min(xi.len()) {
        if z.alive(j) {
            c[j] = wealth * z.z[j] / ((rho * grid.time(j)).exp() * xi[j] * etas[0]);
            w[j] = c[j] * etas[j];
        }
    }
    Ok((c, w))
}

/// `S̄_t = D_t η(t)`.
pub fn market_portfolio_price(d: &DividendPath, rho: f64) -> Result<Vec<f64>> {
    let etas = eta_path(&d.grid, rho)?;
    Ok(d.values.iter().zip(&etas).map(|(d, e)| d * e).collect())
}

/// `γ_t = Σ w_k Z_k γ_k / Σ w_j Z_j`, one row per grid point.
pub fn aggregate_gamma(densities: &[DensityPath], weights: &[f64]) -> Result<Vec<f64>> {
    let len = densities.first().map_or(0, |z| z.z.len());
    aggregate_gamma_upto(densities, weights, len)
}

fn aggregate_gamma_upto(densities: &[DensityPath], weights: &[f64], len: usize) -> Result<Vec<f64>> {
    let dim = densities.first().ok_or_else(|| Error::validation("densities", "empty"))?.dim;
    let mut out = vec![0.0; len * dim];
    for j in 0..len {
        let m = weighted_mass(densities, weights, j);
        if m <= 0.0 {
            return Err(Error::SolvencyViolation { index: Some(j) });
        }
        for (z, w) in densities.iter().zip(weights) {
            if let Some(g) = z.gamma(j) {
                for (o, gi) in out[j * dim..(j + 1) * dim].iter_mut().zip(g) {
                    *o += w * z.z[j] * gi / m;
                }
            }
        }
    }
    Ok(out)
}

/// `θ = v - γ`, `r = ρ + a - v·θ`.
pub fn rate_and_mpr(a: f64, v: &[f64], gamma: &[f64], rho: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = v.len();
    let theta: Vec<f64> = gamma.chunks(dim).flat_map(|g| v.iter().zip(g).map(|(v, g)| v - g)).collect();
    let r = theta
        .chunks(dim)
        .map(|th| rho + a - v.iter().zip(th).map(|(v, t)| v * t).sum::<f64>())
        .collect();
    (r, theta)
}

/// `θ_k = θ + γ_k` before bankruptcy; `NaN` (absent) from `τ_k` on.
pub fn agent_mpr(theta: &[f64], z: &DensityPath) -> Vec<f64> {
    let dim = z.dim;
    let mut out = vec![f64::NAN; theta.len()];
    for (j, th) in theta.chunks(dim).enumerate() {
        if let Some(g) = z.gamma(j) {
            for i in 0..dim {
                out[j * dim + i] = th[i] + g[i];
            }
        }
    }
    out
}

/// Diffusion of the traded stock prices.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceDiffusion {
    /// One stock with volatility `v`.
    Scalar(f64),
    /// Square diffusion matrix, row `i` for stock `i`.
    Matrix(DMatrix<f64>),
}

impl PriceDiffusion {
    fn n_assets(&self) -> usize {
        match self {
            PriceDiffusion::Scalar(_) => 1,
            PriceDiffusion::Matrix(m) => m.nrows(),
        }
    }

    /// `(σᵀ)⁻¹`, row-major.
    fn inverse_transpose(&self) -> Result<Vec<f64>> {
        match self {
            PriceDiffusion::Scalar(v) => {
                if *v == 0.0 {
                    return Err(Error::SingularDiffusion);
                }
                Ok(vec![1.0 / v])
            }
            PriceDiffusion::Matrix(m) => {
                let inv = m.transpose().try_inverse().ok_or(Error::SingularDiffusion)?;
                if inv.iter().any(|x| !x.is_finite()) {
                    return Err(Error::SingularDiffusion);
                }
                Ok(inv.transpose().iter().copied().collect())
            }
        }
    }
}

/// `π_k = W_k (σᵀ)⁻¹ θ_k` and `φ_k = W_k - 1ᵀπ_k` before bankruptcy (where
/// `θ_k` is present), zero afterwards. `π` has one row per grid point.
pub fn optimal_strategy(wealth: &[f64], theta_k: &[f64], sigma: &PriceDiffusion) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sigma.n_assets();
    let dim = theta_k.len() / wealth.len();
    if dim != n {
        return Err(Error::validation("sigma", "diffusion must be square in the driver dimension"));
    }
    let inv = sigma.inverse_transpose()?;
    let mut phi = vec![0.0; wealth.len()];
    let mut pi = vec![0.0; wealth.len() * n];
    for (j, &w) in wealth.iter().enumerate() {
        let th = &theta_k[j * dim..(j + 1) * dim];
        if th.iter().any(|t| t.is_nan()) {
            continue;
        }
        let row = &mut pi[j * n..(j + 1) * n];
        for (i, p) in row.iter_mut().enumerate() {
            *p = w * inv[i * n..(i + 1) * n].iter().zip(th).map(|(a, t)| a * t).sum::<f64>();
        }
        phi[j] = w - row.iter().sum::<f64>();
    }
    Ok((phi, pi))
}

/// Equilibrium processes of one agent along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPaths {
    /// Lagrange multiplier `η(0)/w_k`.
    pub y: f64,
    pub tau: Option<usize>,
    theta: Vec<f64>,
    pub consumption: Vec<f64>,
    pub wealth: Vec<f64>,
    pub riskless: Vec<f64>,
    /// Stock holdings, one row of `n_assets` per grid point.
    pub stock: Vec<f64>,
}

impl AgentPaths {
    /// Subjective market price of risk; absent from bankruptcy on.
    pub fn theta(&self, j: usize) -> Option<&[f64]> {
        let dim = self.theta.len() / self.consumption.len();
        let row = &self.theta[j * dim..(j + 1) * dim];
        (!row[0].is_nan()).then_some(row)
    }

    pub fn alive(&self, j: usize) -> bool {
        self.tau.is_none_or(|t| j < t)
    }
}

/// All equilibrium processes along one simulated path. Quantities are
/// defined on indices `0..horizon`; `horizon` is the first index at which
/// every agent is bankrupt (or `n_steps + 1`). Beyond it `ξ` and all
/// holdings are zero and rates are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumBundle {
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_assets: usize,
    pub horizon: usize,
    pub rho: f64,
    pub drift: f64,
    pub vol: Vec<f64>,
    pub dividend: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub rate: Vec<f64>,
    theta: Vec<f64>,
    gamma: Vec<f64>,
    /// Market portfolio value `S̄ = D η`.
    pub market: Vec<f64>,
    /// Aggregate stock holdings each agent's `π` rows add up to.
    pub stock_supply: Vec<f64>,
    pub agents: Vec<AgentPaths>,
}

impl EquilibriumBundle {
    pub fn theta(&self, j: usize) -> &[f64] {
        &self.theta[j * self.dim..(j + 1) * self.dim]
    }

    pub fn gamma(&self, j: usize) -> &[f64] {
        &self.gamma[j * self.dim..(j + 1) * self.dim]
    }

    pub fn stock(&self, k: usize, j: usize) -> &[f64] {
        &self.agents[k].stock[j * self.n_assets..(j + 1) * self.n_assets]
    }
}

/// First index at which every density has vanished.
pub fn solvency_horizon(densities: &[DensityPath]) -> usize {
    let len = densities[0].z.len();
    densities.iter().map(|z| z.tau.unwrap_or(len)).max().unwrap_or(len)
}

/// Closed-form equilibrium with logarithmic investors along one path,
/// cleared exactly in floating point at every grid point.
pub fn log_equilibrium(
    d: &DividendPath,
    densities: &[DensityPath],
    weights: &[f64],
    rho: f64,
    sigma: &PriceDiffusion,
) -> Result<EquilibriumBundle> {
    check_common(d, densities, weights)?;
    let grid = d.grid;
    let (len, dim, k_n) = (grid.len(), d.vol.len(), densities.len());
    if densities.iter().any(|z| z.dim != dim) {
        return Err(Error::validation("densities", "loading dimension must match the dividend"));
    }
    let n_assets = sigma.n_assets();
    if n_assets != dim {
        return Err(Error::validation("sigma", "diffusion must be square in the driver dimension"));
    }
    let horizon = solvency_horizon(densities);
    let etas = eta_path(&grid, rho)?;
    let eta0 = etas[0];
    let mut xi = vec![0.0; len];
    for j in 0..horizon {
        let m = weighted_mass(densities, weights, j);
        xi[j] = (-rho * grid.time(j)).exp() * m / (d.values[j] * eta0);
    }
    let mut gamma = aggregate_gamma_upto(densities, weights, horizon)?;
    gamma.resize(len * dim, f64::NAN);
    let (mut rate, mut theta) = rate_and_mpr(d.drift, &d.vol, &gamma[..horizon * dim], rho);
    rate.resize(len, f64::NAN);
    theta.resize(len * dim, f64::NAN);
    let mut market = market_portfolio_price(d, rho)?;

    // per-unit-wealth supply of each stock: (σᵀ)⁻¹ v
    let supply_unit = match sigma {
        PriceDiffusion::Scalar(_) => vec![1.0],
        PriceDiffusion::Matrix(_) => {
            let inv = sigma.inverse_transpose()?;
            inv.chunks(n_assets)
                .map(|r| r.iter().zip(&d.vol).map(|(a, b)| a * b).sum())
                .collect()
        }
    };
    let mut stock_supply = vec![0.0; len * n_assets];

    let mut agents = Vec::with_capacity(k_n);
    for (z, &w) in densities.iter().zip(weights) {
        let (c, wl) = log_consumption_wealth(&xi, z, w, rho)?;
        let th = agent_mpr(&theta, z);
        let (phi, pi) = optimal_strategy(&wl, &th, sigma)?;
        agents.push(AgentPaths {
            y: eta0 / w,
            tau: z.tau,
            theta: th,
            consumption: c,
            wealth: wl,
            riskless: phi,
            stock: pi,
        });
    }

    let mut buf = vec![0.0; k_n];
    for j in 0..horizon {
        let free: Vec<bool> = agents.iter().map(|a| a.alive(j)).collect();
        let mut clear = |get: &mut dyn FnMut(&mut AgentPaths) -> &mut f64, total: f64, agents: &mut [AgentPaths]| {
            for (b, a) in buf.iter_mut().zip(agents.iter_mut()) {
                *b = *get(a);
            }
            let ok = clear_exact(&mut buf, total, &free) || clear_on_coarse_grid(&mut buf, total, &free, false).is_some();
            for (b, a) in buf.iter().zip(agents.iter_mut()) {
                *get(a) = *b;
            }
            ok
        };
        let dj = d.values[j];
        if !clear(&mut |a| &mut a.consumption[j], dj, &mut agents) {
            return Err(clearing_failure(j));
        }
        // stock first: offsetting positions may force a coarser supply grid
        for i in 0..n_assets {
            let total = market[j] * supply_unit[i];
            let mut vals: Vec<f64> = agents.iter().map(|a| a.stock[j * n_assets + i]).collect();
            let cleared = if clear_exact(&mut vals, total, &free) {
                total
            } else {
                clear_on_coarse_grid(&mut vals, total, &free, true).ok_or_else(|| clearing_failure(j))?
            };
            if cleared != total && matches!(sigma, PriceDiffusion::Scalar(_)) {
                market[j] = cleared;
            }
            stock_supply[j * n_assets + i] = cleared;
            for (v, a) in vals.iter().zip(agents.iter_mut()) {
                a.stock[j * n_assets + i] = *v;
            }
        }
        let mj = market[j];
        if !clear(&mut |a| &mut a.wealth[j], mj, &mut agents) {
            return Err(clearing_failure(j));
        }
        if !clear(&mut |a| &mut a.riskless[j], 0.0, &mut agents) {
            return Err(clearing_failure(j));
        }
    }
    for a in agents.iter_mut() {
        for j in horizon..len {
            a.consumption[j] = 0.0;
            a.wealth[j] = 0.0;
            a.riskless[j] = 0.0;
            a.stock[j * n_assets..(j + 1) * n_assets].fill(0.0);
        }
    }

    Ok(EquilibriumBundle {
        grid,
        dim,
        n_assets,
        horizon,
        rho,
        drift: d.drift,
        vol: d.vol.clone(),
        dividend: d.values.clone(),
        eta: etas,
        xi,
        rate,
        theta,
        gamma,
        market,
        stock_supply,
        agents,
    })
}

/// Grid points at which aggregate consumption, wealth, riskless or stock
/// holdings fail to clear exactly, plus post-bankruptcy entries that are not
/// exactly zero.
pub fn clearing_violations(b: &EquilibriumBundle) -> usize {
    let mut bad = 0;
    for j in 0..b.horizon {
        let sum = |f: &dyn Fn(&AgentPaths) -> f64| b.agents.iter().fold(0.0, |s, a| s + f(a));
        bad += (sum(&|a| a.consumption[j]) != b.dividend[j]) as usize;
        bad += (sum(&|a| a.wealth[j]) != b.market[j]) as usize;
        bad += (sum(&|a| a.riskless[j]) != 0.0) as usize;
        for i in 0..b.n_assets {
            bad += (sum(&|a| a.stock[j * b.n_assets + i]) != b.stock_supply[j * b.n_assets + i]) as usize;
        }
    }
    for a in &b.agents {
        let from = a.tau.unwrap_or(b.grid.len()).min(b.horizon);
        for j in from..b.grid.len() {
            let held = a.stock[j * b.n_assets..(j + 1) * b.n_assets].iter().any(|&p| p != 0.0);
            bad += (a.consumption[j] != 0.0 || a.wealth[j] != 0.0 || a.riskless[j] != 0.0 || held) as usize;
        }
    }
    bad
}

fn clearing_failure(j: usize) -> Error {
    Error::NonConvergence {
        what: "exact market clearing",
        iterations: j,
        residual: f64::NAN,
    }
}

/// Fallback when offsetting entries live on a coarser grid than `total`:
/// rounds the free non-residual entries (and, if `move_total`, the total)
/// to a common grid on which every partial sum is exact. Returns the total
/// actually cleared.
fn clear_on_coarse_grid(values: &mut [f64], total: f64, free: &[bool], move_total: bool) -> Option<f64> {
    let biggest = values.iter().fold(total.abs(), |m, v| m.max(v.abs()));
    let spread = (values.len() as f64 + 1.0).log2().ceil() as i32 + 1;
    let g = ulp_of(biggest) * 2f64.powi(spread);
    let target = if move_total { (total / g).round() * g } else { total };
    if !move_total && (target / g).fract() != 0.0 {
        return None;
    }
    let rem = (0..values.len())
        .filter(|&k| free[k])
        .max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))?;
    for k in 0..values.len() {
        if free[k] && k != rem {
            values[k] = (values[k] / g).round() * g;
        }
    }
    clear_exact(values, target, free).then_some(target)
}

/// `Φ(y; ν) = Σ_{ν_k > 0} I_k(y/ν_k)`.
pub fn phi_aggregate(y: f64, nu: &[f64], utilities: &[Utility]) -> Result<f64> {
    if nu.iter().all(|&n| n <= 0.0) {
        return Err(Error::SolvencyViolation { index: None });
    }
    Ok(nu
        .iter()
        .zip(utilities)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, u)| u.inverse_marginal(y / n))
        .sum())
}

const PHI_MAX_ITER: usize = 200;

/// The unique `y` with `Φ(y; ν) = x`: Newton's method on `ln Φ(e^s)`
/// (whose slope lies between the extreme elasticities) safeguarded by a
/// bisection bracket. All-log aggregates are inverted in closed form.
pub fn phi_inverse(x: f64, nu: &[f64], utilities: &[Utility]) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::validation("x", "must be positive"));
    }
    if nu.iter().all(|&n| n <= 0.0) {
        return Err(Error::SolvencyViolation { index: None });
    }
    if utilities.iter().all(|u| matches!(u, Utility::Log)) {
        return Ok(nu.iter().filter(|&&n| n > 0.0).sum::<f64>() / x);
    }
    let ln_x = x.ln();
    let g = |s: f64| -> (f64, f64) {
        let y = s.exp();
        let (mut phi, mut dphi) = (0.0, 0.0);
        for (n, u) in nu.iter().zip(utilities) {
            if *n > 0.0 {
                let i = u.inverse_marginal(y / n);
                phi += i;
                dphi -= u.elasticity() * i;
            }
        }
        (phi.ln() - ln_x, dphi / phi)
    };
    // bracket: g is strictly decreasing in s
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut tries = 0;
    while g(lo).0 < 0.0 {
        lo -= 2.0 * (hi - lo);
        tries += 1;
        if tries > 60 {
            return Err(phi_failure(tries, g(lo).0));
        }
    }
    while g(hi).0 > 0.0 {
        hi += 2.0 * (hi - lo);
        tries += 1;
        if tries > 120 {
            return Err(phi_failure(tries, g(hi).0));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for it in 0..PHI_MAX_ITER {
        let (f, df) = g(s);
        if f.abs() < 1e-15 || hi - lo < 1e-15 * s.abs().max(1.0) {
            return Ok(s.exp());
        }
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - f / df;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if it + 1 == PHI_MAX_ITER {
            return Err(phi_failure(it + 1, f));
        }
    }
    unreachable!()
}

fn phi_failure(iterations: usize, residual: f64) -> Error {
    Error::NonConvergence {
        what: "aggregate inverse marginal utility",
        iterations,
        residual,
    }
}

/// State price density for general utilities along one path:
/// `ξ_t = Φ⁻¹(D_t; Z_kt e^{-ρt}/y_k)`, zero once every density vanished.
pub fn general_state_price_density(
    d: &DividendPath,
    densities: &[DensityPath],
    utilities: &[Utility],
    y: &[f64],
    rho: f64,
) -> Result<Vec<f64>> {
    let mut nu = vec![0.0; densities.len()];
    (0..d.grid.len())
        .map(|j| {
            let disc = (-rho * d.grid.time(j)).exp();
            for k in 0..nu.len() {
                nu[k] = densities[k].z[j] * disc / y[k];
            }
            if nu.iter().all(|&n| n <= 0.0) {
                return Ok(0.0);
            }
            phi_inverse(d.values[j], &nu, utilities)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub n_paths: u64,
    pub seed: u64,
    /// Brownian dimension handed to the sampler.
    pub dim: usize,
    pub damping: f64,
    pub max_iter: usize,
    /// Convergence when `|budget_k - w_k| < tol · w_k` for all `k`.
    pub tol: f64,
    /// Pair every path with its reflection.
    pub antithetic: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 0,
            dim: 1,
            damping: 0.5,
            max_iter: 200,
            tol: 1e-6,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution {
    pub y: Vec<f64>,
    /// Budget estimates `E[∫ξ c_k]` at the returned multipliers' predecessor.
    pub budgets: Vec<MonteCarloEstimate>,
    /// `budget_k - w_k`.
    pub residual: Vec<f64>,
    pub iterations: usize,
}

/// Solves for the multipliers `y_k` so that every agent's Monte Carlo budget
/// `E[∫₀ᵀ ξ_t c_kt dt]` equals `w_k`. Iterates
/// `ln y ← ln y + damping · (ln budget - ln w)` on a fixed sample (the same
/// paths are regenerated from the seed each iteration).
pub fn solve_multipliers_general<S>(
    agents: &[AgentSpec],
    sampler: S,
    rho: f64,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<MultiplierSolution>
where
    S: Fn(&BrownianPath) -> Result<(DividendPath, Vec<DensityPath>)> + Sync,
{
    if agents.is_empty() {
        return Err(Error::validation("agents", "at least one agent required"));
    }
    if opts.n_paths == 0 {
        return Err(Error::validation("n_paths", "must be positive"));
    }
    let eta0 = eta(0.0, rho, grid.horizon())?;
    let utilities: Vec<Utility> = agents.iter().map(|a| a.utility).collect();
    let mut y: Vec<f64> = agents.iter().map(|a| eta0 / a.wealth).collect();
    let mut last = None;
    for it in 0..opts.max_iter {
        let budgets = budget_estimates(&utilities, &sampler, rho, grid, opts, &y)?;
        let residual: Vec<f64> = budgets.iter().zip(agents).map(|(b, a)| b.mean - a.wealth).collect();
        let worst = residual.iter().zip(agents).map(|(r, a)| (r / a.wealth).abs()).fold(0.0, f64::max);
        if worst < opts.tol {
            return Ok(MultiplierSolution {
                y,
                budgets,
                residual,
                iterations: it,
            });
        }
        for k in 0..y.len() {
            if !(budgets[k].mean > 0.0) {
                return Err(Error::NonConvergence {
                    what: "multiplier budget",
                    iterations: it,
                    residual: residual[k],
                });
            }
            y[k] *= ((budgets[k].mean / agents[k].wealth).ln() * opts.damping).exp();
        }
        last = Some(worst);
    }
    Err(Error::NonConvergence {
        what: "multiplier fixed point",
        iterations: opts.max_iter,
        residual: last.unwrap_or(f64::NAN),
    })
}

fn budget_estimates<S>(
    utilities: &[Utility],
    sampler: &S,
    rho: f64,
    grid: &TimeGrid,
    opts: &SolverOptions,
    y: &[f64],
) -> Result<Vec<MonteCarloEstimate>>
where
    S: Fn(&BrownianPath) -> Result<(DividendPath, Vec<DensityPath>)> + Sync,
{
    let k_n = utilities.len();
    let one_path = |x: &BrownianPath| -> Result<Vec<f64>> {
        let (d, zs) = sampler(x)?;
        if zs.len() != k_n {
            return Err(Error::validation("sampler", "one density per agent required"));
        }
        let xi = general_state_price_density(&d, &zs, utilities, y, rho)?;
        let mut out = vec![0.0; k_n];
        let mut f = vec![0.0; grid.len()];
        for k in 0..k_n {
            for j in 0..grid.len() {
                let z = zs[k].z[j];
                f[j] = if z > 0.0 && xi[j] > 0.0 {
                    let nu = z * (-rho * grid.time(j)).exp() / y[k];
                    xi[j] * utilities[k].inverse_marginal(xi[j] / nu)
                } else {
                    0.0
                };
            }
            out[k] = trapezoid(&f, grid.dt(), 0, grid.n_steps());
        }
        Ok(out)
    };
    let acc = fold_paths(
        opts.n_paths,
        || Ok(vec![Accumulator::default(); k_n]),
        |acc: &mut Result<Vec<Accumulator>>, i| {
            let Ok(a) = acc else { return };
            let res = sample_brownian(grid, opts.dim, path_seed(opts.seed, i)).and_then(|x| {
                let mut v = one_path(&x)?;
                if opts.antithetic {
                    let w = one_path(&x.negated())?;
                    v.iter_mut().zip(w).for_each(|(a, b)| *a = 0.5 * (*a + b));
                }
                Ok(v)
            });
            match res {
                Ok(v) => a.iter_mut().zip(v).for_each(|(a, x)| a.push(x)),
                Err(e) => *acc = Err(e),
            }
        },
        |total, part| match (total.as_mut(), part) {
            (Ok(t), Ok(p)) => t.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b)),
            (Ok(_), Err(e)) => *total = Err(e),
            _ => {}
        },
    )?;
    acc.iter().map(|a| a.estimate()).collect()
}
