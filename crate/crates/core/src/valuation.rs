//! Fundamental values under the reference and subjective beliefs, bubble
//! decompositions, the riskless-asset bubble, the conditional bubble of the
//! two-stock economy, and an exhaustive binomial lattice oracle.

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beliefs::{density_linear, density_optimist, DensityPath, Detection};
use crate::equilibrium::{eta, log_state_price_density, EquilibriumBundle};
use crate::error::{Error, Result};
use crate::market::DividendPath;
use crate::paths::{discrete_stochastic_exponential, path_seed, sample_brownian_with_bridge, BrownianPath, TimeGrid};
use crate::stats::{estimate_paths, trapezoid, MonteCarloEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Asset {
    Stock(usize),
    Market,
    Riskless,
}

/// Trapezoidal integrals of a deflated cash flow `ξc` along one path: over
/// the whole horizon, before agent `k`'s bankruptcy index and from it on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashflowIntegrals {
    pub full: f64,
    pub before: f64,
    pub after: f64,
}

pub fn cashflow_integrals(xi: &[f64], c: &[f64], dt: f64, tau: Option<usize>) -> Result<CashflowIntegrals> {
    if xi.len() != c.len() || xi.is_empty() {
        return Err(Error::GridMismatch("state price density and cash flow differ".into()));
    }
    let n = xi.len() - 1;
    let f: Vec<f64> = xi.iter().zip(c).map(|(a, b)| a * b).collect();
    let cut = tau.unwrap_or(n).min(n);
    Ok(CashflowIntegrals {
        full: trapezoid(&f, dt, 0, n),
        before: trapezoid(&f, dt, 0, cut),
        after: trapezoid(&f, dt, cut, n),
    })
}

fn scaled(samples: &[CashflowIntegrals], xi0: f64, pick: impl Fn(&CashflowIntegrals) -> f64) -> Result<MonteCarloEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySample("cash flow ensemble"));
    }
    if !(xi0 > 0.0) {
        return Err(Error::validation("xi0", "initial state price density must be positive"));
    }
    let v: Vec<f64> = samples.iter().map(|s| pick(s) / xi0).collect();
    MonteCarloEstimate::from_samples(&v)
}

/// `F_0(c) = ξ_0⁻¹ E[∫₀ᵀ ξ c]`.
pub fn fundamental_value_reference(samples: &[CashflowIntegrals], xi0: f64) -> Result<MonteCarloEstimate> {
    scaled(samples, xi0, |s| s.full)
}

/// `F^k_0(c) = ξ_0⁻¹ E[∫₀^{τ_k} ξ c]`.
pub fn fundamental_value_subjective(samples: &[CashflowIntegrals], xi0: f64) -> Result<MonteCarloEstimate> {
    scaled(samples, xi0, |s| s.before)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleReport {
    pub asset: Asset,
    pub agent: usize,
    pub f: MonteCarloEstimate,
    pub f_k: MonteCarloEstimate,
    /// `ξ_0⁻¹ E[∫_{τ_k}^T ξ c]`, the bubble when the price carries no
    /// reference bubble.
    pub bubble: MonteCarloEstimate,
    /// `S_0 - F^k` when a market price is supplied.
    pub direct: Option<MonteCarloEstimate>,
    /// `F - F^k - tail`.
    pub residual: MonteCarloEstimate,
}

impl BubbleReport {
    pub fn nonnegative(&self) -> bool {
        self.bubble.mean >= -3.0 * self.bubble.std_err
    }

    /// `|F - F^k - tail| / |F|`.
    pub fn residual_relative(&self) -> f64 {
        if self.f.mean == 0.0 {
            self.residual.mean.abs()
        } else {
            self.residual.mean.abs() / self.f.mean.abs()
        }
    }

    pub fn reference_gap(&self) -> Option<MonteCarloEstimate> {
        let d = self.direct?;
        Some(self.f.offset_from(d.mean + self.f_k.mean))
    }
}

/// Bubble of agent `k` on a cash flow, all estimates on the same paths.
pub fn bubble_decomposition(
    asset: Asset,
    agent: usize,
    samples: &[CashflowIntegrals],
    xi0: f64,
    price0: Option<f64>,
) -> Result<BubbleReport> {
    let f = fundamental_value_reference(samples, xi0)?;
    let f_k = fundamental_value_subjective(samples, xi0)?;
    Ok(BubbleReport {
        asset,
        agent,
        f,
        f_k,
        bubble: scaled(samples, xi0, |s| s.after)?,
        direct: price0.map(|p| f_k.offset_from(p)),
        residual: scaled(samples, xi0, |s| s.full - s.before - s.after)?,
    })
}

/// `B^k ≥ B^ℓ - 3·(combined standard error)`.
pub fn bubble_dominates(k: &BubbleReport, l: &BubbleReport) -> bool {
    let se = k.bubble.std_err.hypot(l.bubble.std_err);
    k.bubble.mean >= l.bubble.mean - 3.0 * se
}

/// Per-path input of the riskless bubble: `ξ_T S_{0T}/ξ_0` and whether the
/// agent went bankrupt by `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisklessSample {
    pub deflated: f64,
    pub bankrupt: bool,
}

/// `ξ_T S_{0T}/ξ_0` as the discrete stochastic exponential of `-θ` (zero
/// loading beyond the solvency horizon).
pub fn deflated_riskless_terminal(bundle: &EquilibriumBundle, x: &BrownianPath) -> Result<f64> {
    if *x.grid() != bundle.grid || x.dim() != bundle.dim {
        return Err(Error::GridMismatch("driver does not match the bundle".into()));
    }
    let n = bundle.grid.n_steps();
    let mut loading = Vec::with_capacity(n * bundle.dim);
    for j in 0..n {
        loading.extend(bundle.theta(j).iter().map(|t| if t.is_nan() { 0.0 } else { -t }));
    }
    Ok(*discrete_stochastic_exponential(&loading, x)?.last().unwrap())
}

/// `B^k_0 = 1 - ξ_0⁻¹E[ξ_T S_{0T} 1{τ_k > T}]`, estimated as
/// `E[ξ_T S_{0T} 1{τ_k ≤ T}]/ξ_0` using `E[ξ_T S_{0T}] = ξ_0`.
pub fn riskless_bubble(samples: &[RisklessSample]) -> Result<MonteCarloEstimate> {
    let v: Vec<f64> = samples.iter().map(|s| if s.bankrupt { s.deflated } else { 0.0 }).collect();
    MonteCarloEstimate::from_samples(&v)
}

/// The truncated form `1 - E[ξ_T S_{0T} 1{τ_k > T}]/ξ_0` without the
/// control.
pub fn riskless_bubble_truncated(samples: &[RisklessSample]) -> Result<MonteCarloEstimate> {
    let v: Vec<f64> = samples.iter().map(|s| if s.bankrupt { 0.0 } else { s.deflated }).collect();
    Ok(MonteCarloEstimate::from_samples(&v)?.offset_from(1.0))
}

/// `P(inf_{u ≤ h} X_u ≤ -1)` for a Brownian motion started at `x`:
/// `2N(-(1+x)/√h)`.
pub fn linear_hitting_probability(x: f64, h: f64) -> f64 {
    if x <= -1.0 {
        1.0
    } else if h <= 0.0 {
        0.0
    } else {
        erfc((1.0 + x) / (2.0 * h).sqrt())
    }
}

fn check_two_stock_hypothesis(k: usize, densities: &[DensityPath], weights: &[f64], v: &[f64]) -> Result<()> {
    if v != [1.0, 1.0] {
        return Err(Error::validation("v", "the two-stock law result needs v = (1, 1)"));
    }
    if weights.len() != 2 || weights[0] != weights[1] {
        return Err(Error::validation("weights", "the two-stock law result needs w_1 = w_2"));
    }
    if densities.len() != 2 || k > 1 {
        return Err(Error::validation("agent", "two agents required"));
    }
    Ok(())
}

/// Conditional bubble of agent `k` on the market portfolio at grid index
/// `j` of the two-stock economy:
/// `B̄^k_t = w Z_ℓt/(ξ_t η(0)) ∫_t^T P(τ_k ≤ s | F_t) e^{-ρs} ds`.
/// `None` from `τ_k` on.
#[allow(clippy::too_many_arguments)]
pub fn conditional_bubble_two_stock(
    k: usize,
    j: usize,
    x: &BrownianPath,
    densities: &[DensityPath],
    xi: &[f64],
    weights: &[f64],
    v: &[f64],
    rho: f64,
) -> Result<Option<f64>> {
    check_two_stock_hypothesis(k, densities, weights, v)?;
    unchecked_conditional_bubble_two_stock(k, j, x, densities, xi, weights, rho)
}

/// The same formula without the hypothesis checks, using the other agent's
/// weight `w_ℓ`. Outside `v = (1,1)`, `w_1 = w_2` it is not the bubble.
pub fn unchecked_conditional_bubble_two_stock(
    k: usize,
    j: usize,
    x: &BrownianPath,
    densities: &[DensityPath],
    xi: &[f64],
    weights: &[f64],
    rho: f64,
) -> Result<Option<f64>> {
    if densities.len() != 2 || weights.len() != 2 || k > 1 {
        return Err(Error::validation("agent", "two agents required"));
    }
    if !densities[k].alive(j) || !(xi[j] > 0.0) {
        return Ok(None);
    }
    let grid = x.grid();
    let (t, xk) = (grid.time(j), x.at(j)[k]);
    let f: Vec<f64> = (j..grid.len())
        .map(|i| {
            let s = grid.time(i);
            linear_hitting_probability(xk, s - t) * (-rho * s).exp()
        })
        .collect();
    let integral = trapezoid(&f, grid.dt(), 0, f.len() - 1);
    let eta0 = eta(0.0, rho, grid.horizon())?;
    Ok(Some(weights[1 - k] * densities[1 - k].z[j] * integral / (xi[j] * eta0)))
}

/// [`conditional_bubble_two_stock`] at every grid index (`NaN` from `τ_k` on).
pub fn conditional_bubble_path_two_stock(
    k: usize,
    x: &BrownianPath,
    densities: &[DensityPath],
    xi: &[f64],
    weights: &[f64],
    v: &[f64],
    rho: f64,
) -> Result<Vec<f64>> {
    (0..x.grid().len())
        .map(|j| Ok(conditional_bubble_two_stock(k, j, x, densities, xi, weights, v, rho)?.unwrap_or(f64::NAN)))
        .collect()
}

/// Nested-simulation estimate of the same conditional bubble: the path is
/// frozen at index `j` and `n_sub` continuations are drawn; each contributes
/// `ξ_t⁻¹ ∫_t^T e^{-ρs}(w_1 Z_1s + w_2 Z_2s) 1{τ_k ≤ s} ds / η(0)`, with
/// both bankruptcies detected by the exact bridge test.
#[allow(clippy::too_many_arguments)]
pub fn branch_conditional_bubble_two_stock(
    k: usize,
    j: usize,
    x: &BrownianPath,
    xi_t: f64,
    weights: &[f64],
    rho: f64,
    n_sub: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let grid = *x.grid();
    let frozen_u: Vec<Vec<f64>> = (0..2)
        .map(|c| {
            x.uniforms(c)
                .ok_or_else(|| Error::validation("bridge", "frozen path needs bridge uniforms"))
        })
        .collect::<Result<_>>()?;
    let eta0 = eta(0.0, rho, grid.horizon())?;
    let n = grid.n_steps();
    let est = estimate_paths(n_sub, 1, |i| {
        let fresh = sample_brownian_with_bridge(&grid, 2, path_seed(seed, i))?;
        let mut inc = Vec::with_capacity(2 * n);
        let mut uni = Vec::with_capacity(2 * n);
        let fresh_u = [fresh.uniforms(0).unwrap(), fresh.uniforms(1).unwrap()];
        for s in 0..n {
            let (src, u): (&BrownianPath, &[Vec<f64>]) = if s < j { (x, &frozen_u) } else { (&fresh, &fresh_u) };
            inc.extend_from_slice(src.increment(s));
            uni.extend([u[0][s], u[1][s]]);
        }
        let path = BrownianPath::from_increments(grid, 2, inc)?;
        let zs = [
            density_linear(&path, 0, Detection::Bridge(&path_column(&uni, 0)))?,
            density_linear(&path, 1, Detection::Bridge(&path_column(&uni, 1)))?,
        ];
        let tau = zs[k].tau.unwrap_or(usize::MAX);
        let f: Vec<f64> = (j..grid.len())
            .map(|s| {
                if s < tau {
                    0.0
                } else {
                    (-rho * grid.time(s)).exp() * (weights[0] * zs[0].z[s] + weights[1] * zs[1].z[s])
                }
            })
            .collect();
        Ok(vec![trapezoid(&f, grid.dt(), 0, f.len() - 1) / (eta0 * xi_t)])
    })?;
    Ok(est[0])
}

fn path_column(rows: &[f64], c: usize) -> Vec<f64> {
    rows.iter().skip(c).step_by(2).copied().collect()
}

/// Binomial version of the one-stock log economy with an optimist (agent
/// 1, barrier `D = 1`) and a reference agent: `D` moves by `u, d = 1 ± s`
/// with probability one half, `s² = e^{v²Δt} - 1`, matching the mean and
/// variance of the geometric step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEconomy {
    pub d0: f64,
    pub v: f64,
    pub rho: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub weights: [f64; 2],
}

/// Largest tree the oracles will enumerate.
pub const LATTICE_MAX_STEPS: usize = 20;

impl LatticeEconomy {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps > LATTICE_MAX_STEPS {
            return Err(Error::validation(
                "n_steps",
                format!("lattice enumeration is limited to {LATTICE_MAX_STEPS} steps"),
            ));
        }
        if !(self.d0 > 1.0) {
            return Err(Error::validation("d0", "optimist beliefs need D_0 > 1"));
        }
        if !(self.v >= 0.0) {
            return Err(Error::validation("v", "must be nonnegative"));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::validation("weights", "must be positive"));
        }
        let s = self.spread()?;
        if s >= 1.0 {
            return Err(Error::validation("v", "down factor must stay positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    fn spread(&self) -> Result<f64> {
        Ok((self.v * self.v * self.grid()?.dt()).exp_m1().sqrt())
    }

    /// `(u, d)`.
    pub fn factors(&self) -> Result<(f64, f64)> {
        let s = self.spread()?;
        Ok((1.0 + s, 1.0 - s))
    }
}

/// Exact `F`, `F¹` and `F - F¹` of the market dividend stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeValues {
    pub f: f64,
    pub f_k: f64,
    pub bubble: f64,
}

struct Node {
    d: f64,
    z1: f64,
    hit: bool,
}

fn lattice_node(econ: &LatticeEconomy, grid: &TimeGrid, eta0: f64, j: usize, node: &Node) -> f64 {
    let mass = econ.weights[0] * node.z1 + econ.weights[1];
    let xi = (-econ.rho * grid.time(j)).exp() * mass / (node.d * eta0);
    xi * node.d
}

/// Values by full enumeration of all `2^n` dividend paths.
pub fn lattice_oracle_value(econ: &LatticeEconomy) -> Result<LatticeValues> {
    econ.validate()?;
    let grid = econ.grid()?;
    let (u, dn) = econ.factors()?;
    let eta0 = eta(0.0, econ.rho, econ.horizon)?;
    let n = econ.n_steps;
    let xi0 = (econ.weights[0] + econ.weights[1]) / (econ.d0 * eta0);
    let p = 0.5f64.powi(n as i32);
    let (mut full, mut before, mut after) = (0.0, 0.0, 0.0);
    let mut f = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let mut node = Node {
            d: econ.d0,
            z1: 1.0,
            hit: false,
        };
        let mut tau = n;
        f[0] = lattice_node(econ, &grid, eta0, 0, &node);
        for j in 1..=n {
            node.d *= if mask >> (j - 1) & 1 == 1 { u } else { dn };
            if !node.hit && node.d <= 1.0 {
                node.hit = true;
                tau = j;
            }
            node.z1 = if node.hit { 0.0 } else { (node.d - 1.0) / (econ.d0 - 1.0) };
            f[j] = lattice_node(econ, &grid, eta0, j, &node);
        }
        full += p * trapezoid(&f, grid.dt(), 0, n);
        before += p * trapezoid(&f, grid.dt(), 0, tau);
        after += p * trapezoid(&f, grid.dt(), tau, n);
    }
    Ok(LatticeValues {
        f: full / xi0,
        f_k: before / xi0,
        bubble: after / xi0,
    })
}

/// The same values by backward induction over the (non-recombining) tree,
/// accumulating trapezoid weights node by node.
pub fn lattice_backward_induction(econ: &LatticeEconomy) -> Result<LatticeValues> {
    econ.validate()?;
    let grid = econ.grid()?;
    let (u, dn) = econ.factors()?;
    let eta0 = eta(0.0, econ.rho, econ.horizon)?;
    let xi0 = (econ.weights[0] + econ.weights[1]) / (econ.d0 * eta0);
    let ctx = Induction { econ, grid, u, dn, eta0 };
    let root = Node {
        d: econ.d0,
        z1: 1.0,
        hit: false,
    };
    let (full, before, after) = ctx.value(0, &root, false);
    Ok(LatticeValues {
        f: full / xi0,
        f_k: before / xi0,
        bubble: after / xi0,
    })
}

struct Induction<'a> {
    econ: &'a LatticeEconomy,
    grid: TimeGrid,
    u: f64,
    dn: f64,
    eta0: f64,
}

impl Induction<'_> {
    /// Expected `(full, before, after)` contributions from node `j` on;
    /// `hit_now` marks the bankruptcy node itself.
    fn value(&self, j: usize, node: &Node, hit_now: bool) -> (f64, f64, f64) {
        let n = self.econ.n_steps;
        let dt = self.grid.dt();
        let weight = if j == 0 || j == n { 0.5 * dt } else { dt };
        let fj = lattice_node(self.econ, &self.grid, self.eta0, j, node);
        let mut out = (weight * fj, 0.0, 0.0);
        if hit_now {
            out.1 = 0.5 * dt * fj;
            out.2 = if j < n { 0.5 * dt * fj } else { 0.0 };
        } else if node.hit {
            out.2 = weight * fj;
        } else {
            out.1 = weight * fj;
        }
        if j == n {
            return out;
        }
        for factor in [self.u, self.dn] {
            let d = node.d * factor;
            let hit_next = !node.hit && d <= 1.0;
            let hit = node.hit || hit_next;
            let child = Node {
                d,
                z1: if hit { 0.0 } else { (d - 1.0) / (self.econ.d0 - 1.0) },
                hit,
            };
            let (a, b, c) = self.value(j + 1, &child, hit_next);
            out.0 += 0.5 * a;
            out.1 += 0.5 * b;
            out.2 += 0.5 * c;
        }
        out
    }
}

/// Monte Carlo estimates of `(F, F¹, F - F¹)` on randomly sampled lattice
/// paths, computed with the library's density, state price density and
/// valuation routines.
pub fn lattice_monte_carlo(econ: &LatticeEconomy, n_paths: u64, seed: u64) -> Result<[MonteCarloEstimate; 3]> {
    econ.validate()?;
    let grid = econ.grid()?;
    let (u, dn) = econ.factors()?;
    let est = estimate_paths(n_paths, 3, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, i));
        let mut values = Vec::with_capacity(grid.len());
        let mut d = econ.d0;
        values.push(d);
        for _ in 0..econ.n_steps {
            d *= if rng.random::<bool>() { u } else { dn };
            values.push(d);
        }
        let div = DividendPath {
            grid,
            values,
            drift: 0.0,
            vol: vec![econ.v],
        };
        let zs = [density_optimist(&div, Detection::Grid)?, DensityPath::reference(grid, 1)];
        let xi = log_state_price_density(&div, &zs, &econ.weights, econ.rho)?;
        let ci = cashflow_integrals(&xi, &div.values, grid.dt(), zs[0].tau)?;
        Ok(vec![ci.full / xi[0], ci.before / xi[0], ci.after / xi[0]])
    })?;
    Ok([est[0], est[1], est[2]])
}
