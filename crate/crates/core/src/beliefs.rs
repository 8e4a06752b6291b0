//! Belief density processes `Z_k = dP_k/dP` for the four non-equivalent
//! belief constructions, their volatility loadings, bankruptcy times, and
//! empirical martingale checks.

use crate::error::{Error, Result};
use crate::market::DividendPath;
use crate::paths::{bridge_crossing_correction, running_max, BrownianPath, TimeGrid};
use crate::stats::{fold_paths, Accumulator, MonteCarloEstimate};

/// Densities at or below this level are treated as bankrupt.
pub const EPS_Z: f64 = 1e-10;

/// How barrier hits are detected between grid points.
#[derive(Debug, Clone, Copy)]
pub enum Detection<'a> {
    /// A hit is recorded at the first grid point at or beyond the barrier.
    Grid,
    /// Grid detection plus a randomized Brownian-bridge test per step, one
    /// uniform per step.
    Bridge(&'a [f64]),
}

/// One agent's density `Z`, its loading `γ` (one row of length `dim` per
/// grid point, zero from the bankruptcy index on), and the bankruptcy index.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    pub grid: TimeGrid,
    pub dim: usize,
    pub z: Vec<f64>,
    gamma: Vec<f64>,
    pub tau: Option<usize>,
}

impl DensityPath {
    /// The reference belief `Z ≡ 1`.
    pub fn reference(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            z: vec![1.0; grid.len()],
            gamma: vec![0.0; grid.len() * dim],
            tau: None,
        }
    }

    /// Loading at grid point `j`; `None` at and after bankruptcy.
    pub fn gamma(&self, j: usize) -> Option<&[f64]> {
        if self.alive(j) {
            Some(&self.gamma[j * self.dim..(j + 1) * self.dim])
        } else {
            None
        }
    }

    /// Loading rows with zeros after bankruptcy, as fed to a stochastic
    /// exponential.
    pub fn gamma_rows(&self) -> &[f64] {
        &self.gamma
    }

    pub fn alive(&self, j: usize) -> bool {
        self.tau.is_none_or(|t| j < t)
    }

    pub fn terminal(&self) -> f64 {
        *self.z.last().unwrap()
    }
}

/// Scans for the first hit of `barrier(j)` by the state `x(j)` and builds a
/// density from `value(j)` and `loading(j)` up to it. `x` and `barrier` live
/// in the space where the state is a Brownian motion with volatility `vol`
/// (log space for geometric processes), which is where the bridge test
/// applies. `below` selects the side of approach.
#[allow(clippy::too_many_arguments)]
fn absorb(
    grid: TimeGrid,
    dim: usize,
    detection: Detection<'_>,
    vol: f64,
    below: bool,
    x: impl Fn(usize) -> f64,
    barrier: impl Fn(usize) -> f64,
    value: impl Fn(usize) -> f64,
    loading: impl Fn(usize, &mut [f64]),
) -> Result<DensityPath> {
    let n = grid.n_steps();
    if let Detection::Bridge(u) = detection {
        if u.len() != n {
            return Err(Error::GridMismatch("one bridge uniform per step required".into()));
        }
    }
    let hit = |j: usize| if below { x(j) <= barrier(j) } else { x(j) >= barrier(j) };
    let mut z = vec![0.0; grid.len()];
    let mut gamma = vec![0.0; grid.len() * dim];
    let mut tau = None;
    for j in 0..=n {
        let zj = if j == 0 { 1.0 } else { value(j) };
        if j > 0 && (hit(j) || zj <= EPS_Z) {
            tau = Some(j);
            break;
        }
        z[j] = zj;
        loading(j, &mut gamma[j * dim..(j + 1) * dim]);
        if let (Detection::Bridge(u), true) = (detection, j < n && vol > 0.0) {
            let (x0, x1, b) = (x(j), x(j + 1), barrier(j));
            // endpoints beyond the barrier are left to the grid test
            if (x1 > b) == (x0 > b) && !hit(j + 1) {
                let p = bridge_crossing_correction(x0, x1, b, grid.dt(), vol);
                if u[j] < p {
                    tau = Some(j + 1);
                    break;
                }
            }
        }
    }
    Ok(DensityPath { grid, dim, z, gamma, tau })
}

/// Agent who rules out the dividend falling to one:
/// `Z = (D_{t∧τ} - 1)/(D_0 - 1)`, `γ = v D/(D - 1)`.
pub fn density_optimist(d: &DividendPath, detection: Detection<'_>) -> Result<DensityPath> {
    let d0 = d.initial();
    if !(d0 > 1.0) {
        return Err(Error::validation("d0", "optimist beliefs need D_0 > 1"));
    }
    level_density(d, detection, true)
}

/// Agent who rules out the dividend rising to one:
/// `Z = (1 - D_{t∧τ})/(1 - D_0)`, `γ = v D/(D - 1)` (negative before `τ`).
pub fn density_pessimist(d: &DividendPath, detection: Detection<'_>) -> Result<DensityPath> {
    let d0 = d.initial();
    if !(d0 > 0.0 && d0 < 1.0) {
        return Err(Error::validation("d0", "pessimist beliefs need 0 < D_0 < 1"));
    }
    level_density(d, detection, false)
}

fn level_density(d: &DividendPath, detection: Detection<'_>, below: bool) -> Result<DensityPath> {
    let d0 = d.initial();
    let dv = &d.values;
    absorb(
        d.grid,
        d.vol.len(),
        detection,
        d.vol_norm(),
        below,
        |j| dv[j].ln(),
        |_| 0.0,
        |j| (dv[j] - 1.0) / (d0 - 1.0),
        |j, g| {
            let s = dv[j] / (dv[j] - 1.0);
            for (gi, vi) in g.iter_mut().zip(&d.vol) {
                *gi = vi * s;
            }
        },
    )
}

/// Agent who rules out a relative drawdown of `1 - κ`:
/// `Z = (D - κD*)/((1-κ)D_0) (D*/D_0)^{κ/(1-κ)}`, `γ = v D/(D - κD*)`.
pub fn density_drawdown(d: &DividendPath, kappa: f64, detection: Detection<'_>) -> Result<DensityPath> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::validation("kappa", "must lie in (0, 1)"));
    }
    let d0 = d.initial();
    let dv = &d.values;
    let dstar = running_max(dv);
    let expo = kappa / (1.0 - kappa);
    let ln_kappa = kappa.ln();
    absorb(
        d.grid,
        d.vol.len(),
        detection,
        d.vol_norm(),
        true,
        |j| dv[j].ln(),
        |j| ln_kappa + dstar[j].ln(),
        |j| (dv[j] - kappa * dstar[j]) / ((1.0 - kappa) * d0) * (dstar[j] / d0).powf(expo),
        |j, g| {
            let s = dv[j] / (dv[j] - kappa * dstar[j]);
            for (gi, vi) in g.iter_mut().zip(&d.vol) {
                *gi = vi * s;
            }
        },
    )
}

/// Agent `k` of the two-stock economy: `Z = 1 + X_{k,t∧τ}` with `τ` the hit
/// of `-1`, `γ = e_k/(1 + X_k)`.
pub fn density_linear(x: &BrownianPath, k: usize, detection: Detection<'_>) -> Result<DensityPath> {
    if k >= x.dim() {
        return Err(Error::validation(
            "coordinate",
            format!("{k} out of range for dimension {}", x.dim()),
        ));
    }
    absorb(
        *x.grid(),
        x.dim(),
        detection,
        1.0,
        true,
        |j| x.at(j)[k],
        |_| -1.0,
        |j| 1.0 + x.at(j)[k],
        |j, g| g[k] = 1.0 / (1.0 + x.at(j)[k]),
    )
}

/// Belief construction tag with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Belief {
    /// `Z ≡ 1`.
    Reference,
    Optimist,
    Pessimist,
    Drawdown {
        kappa: f64,
    },
    /// `Z = 1 + X_k` stopped at `-1`.
    Linear {
        coordinate: usize,
    },
}

impl Belief {
    /// Builds the density on one path. With `bridge`, the path must carry
    /// uniforms; dividend-driven barriers use coordinate 0's column.
    pub fn density(&self, d: &DividendPath, x: &BrownianPath, bridge: bool) -> Result<DensityPath> {
        let col = match self {
            Belief::Linear { coordinate } => *coordinate,
            _ => 0,
        };
        let u = if bridge {
            Some(
                x.uniforms(col)
                    .ok_or_else(|| Error::validation("bridge", "path was sampled without uniforms"))?,
            )
        } else {
            None
        };
        let det = match &u {
            Some(u) => Detection::Bridge(u),
            None => Detection::Grid,
        };
        match *self {
            Belief::Reference => Ok(DensityPath::reference(*x.grid(), x.dim())),
            Belief::Optimist => density_optimist(d, det),
            Belief::Pessimist => density_pessimist(d, det),
            Belief::Drawdown { kappa } => density_drawdown(d, kappa, det),
            Belief::Linear { coordinate } => density_linear(x, coordinate, det),
        }
    }
}

/// `E^k[Y]` computed under the reference measure as the mean of `Z_T Y`.
pub fn bayes_weighted_expectation(z_t: &[f64], y: &[f64]) -> Result<MonteCarloEstimate> {
    if z_t.len() != y.len() {
        return Err(Error::validation("samples", "density and payoff samples differ in length"));
    }
    let prod: Vec<f64> = z_t.iter().zip(y).map(|(z, y)| z * y).collect();
    MonteCarloEstimate::from_samples(&prod)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub checkpoints: Vec<f64>,
    pub estimates: Vec<MonteCarloEstimate>,
    pub pass: Vec<bool>,
}

impl MartingaleReport {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Estimates `E[Z_t]` at each checkpoint over `n_paths` densities produced
/// by `sampler(path_index)`, flagging agreement with 1 at three standard
/// errors.
pub fn verify_martingale<S>(sampler: S, checkpoints: &[f64], n_paths: u64) -> Result<MartingaleReport>
where
    S: Fn(u64) -> Result<DensityPath> + Sync,
{
    let m = checkpoints.len();
    let acc = fold_paths(
        n_paths,
        || Ok(vec![Accumulator::default(); m]),
        |acc: &mut Result<Vec<Accumulator>>, i| {
            let Ok(a) = acc else { return };
            match sampler(i) {
                Ok(z) => {
                    for (c, &t) in a.iter_mut().zip(checkpoints) {
                        if !(0.0..=z.grid.horizon() * (1.0 + 1e-12)).contains(&t) {
                            *acc = Err(Error::validation("checkpoints", "must lie in [0, T]"));
                            return;
                        }
                        c.push(z.z[z.grid.index_of(t)]);
                    }
                }
                Err(e) => *acc = Err(e),
            }
        },
        |total, part| match (total.as_mut(), part) {
            (Ok(t), Ok(p)) => t.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b)),
            (Ok(_), Err(e)) => *total = Err(e),
            _ => {}
        },
    )?;
    let estimates = acc.iter().map(|a| a.estimate()).collect::<Result<Vec<_>>>()?;
    let pass = estimates.iter().map(|e| e.within(1.0, 3.0)).collect();
    Ok(MartingaleReport {
        checkpoints: checkpoints.to_vec(),
        estimates,
        pass,
    })
}
