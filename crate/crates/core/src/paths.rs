//! Time grids, Brownian drivers and path functionals.
//!
//! Every random quantity is a pure function of a 64-bit path seed. Path `i` of
//! an ensemble with base seed `b` uses [`path_seed`]`(b, i)`, so ensembles can
//! be split across workers in any way and still reproduce bit for bit.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Stream used for the uniforms of the bridge-corrected hitting test.
const BRIDGE_STREAM: u64 = 1;

/// Uniform grid `t_j = j * T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation("horizon", "must be a positive finite time"));
        }
        if n_steps < 1 {
            return Err(Error::validation("n_steps", "must be at least 1"));
        }
        Ok(Self {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of grid point `j`; the last point is exactly `T`.
    pub fn time(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.horizon
        } else {
            j as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    /// Nearest grid index to time `t` (clamped to the grid).
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// Shorthand for [`TimeGrid::new`].
pub fn make_time_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, n_steps)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of path `index` in an ensemble with the given base seed.
pub fn path_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ splitmix64(index)
}

/// A sampled `dim`-dimensional Brownian motion on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    dim: usize,
    /// Row-major `[n_steps + 1][dim]`.
    values: Vec<f64>,
    /// Row-major `[n_steps][dim]`.
    increments: Vec<f64>,
    /// Row-major `[n_steps][dim]` uniforms for randomized barrier-crossing
    /// tests; column `k` serves barriers driven by coordinate `k`.
    uniforms: Option<Vec<f64>>,
}

impl BrownianPath {
    /// Builds a path from explicit increments (row-major `[n_steps][dim]`).
    pub fn from_increments(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("dim", "must be at least 1"));
        }
        if increments.len() != grid.n_steps() * dim {
            return Err(Error::GridMismatch(format!(
                "expected {} increments, got {}",
                grid.n_steps() * dim,
                increments.len()
            )));
        }
        let mut values = vec![0.0; grid.len() * dim];
        for j in 0..grid.n_steps() {
            for d in 0..dim {
                values[(j + 1) * dim + d] = values[j * dim + d] + increments[j * dim + d];
            }
        }
        Ok(Self {
            grid,
            dim,
            values,
            increments,
            uniforms: None,
        })
    }

    pub fn with_uniforms(mut self, uniforms: Vec<f64>) -> Result<Self> {
        if uniforms.len() != self.grid.n_steps() * self.dim {
            return Err(Error::GridMismatch("one uniform per step and coordinate required".into()));
        }
        self.uniforms = Some(uniforms);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position at grid point `j`.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Increment over step `j` (from `t_j` to `t_{j+1}`).
    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    /// Per-step uniforms attached to coordinate `k`, if sampled.
    pub fn uniforms(&self, k: usize) -> Option<Vec<f64>> {
        let u = self.uniforms.as_ref()?;
        Some(u.iter().skip(k).step_by(self.dim).copied().collect())
    }

    /// The reflected path `-X` (antithetic partner).
    pub fn negated(&self) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|x| -x).collect(),
            increments: self.increments.iter().map(|x| -x).collect(),
            uniforms: self.uniforms.clone(),
        }
    }

    /// The path with coordinates `a` and `b` exchanged.
    pub fn swapped(&self, a: usize, b: usize) -> Self {
        let mut out = self.clone();
        for row in out.values.chunks_mut(self.dim) {
            row.swap(a, b);
        }
        for row in out.increments.chunks_mut(self.dim) {
            row.swap(a, b);
        }
        if let Some(u) = out.uniforms.as_mut() {
            for row in u.chunks_mut(self.dim) {
                row.swap(a, b);
            }
        }
        out
    }

    /// Restriction to a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.n_steps().is_multiple_of(factor) {
            return Err(Error::GridMismatch(format!(
                "{} steps are not divisible by {factor}",
                self.grid.n_steps()
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon(), self.grid.n_steps() / factor)?;
        let mut increments = Vec::with_capacity(grid.n_steps() * self.dim);
        for j in 0..grid.n_steps() {
            let (x0, x1) = (self.at(j * factor), self.at((j + 1) * factor));
            increments.extend(x0.iter().zip(x1).map(|(a, b)| b - a));
        }
        let mut out = Self::from_increments(grid, self.dim, increments)?;
        for j in 0..grid.len() {
            let src = self.at(j * factor).to_vec();
            out.values[j * self.dim..(j + 1) * self.dim].copy_from_slice(&src);
        }
        Ok(out)
    }
}

/// Samples a Brownian path: independent `N(0, dt)` increments per coordinate,
/// drawn from a ChaCha8 stream keyed by `seed`.
pub fn sample_brownian(grid: &TimeGrid, dim: usize, seed: u64) -> Result<BrownianPath> {
    if dim == 0 {
        return Err(Error::validation("dim", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    let increments = (0..grid.n_steps() * dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    BrownianPath::from_increments(*grid, dim, increments)
}

/// Like [`sample_brownian`] but also draws one uniform per step and
/// coordinate from an independent stream, for bridge-corrected hitting
/// detection.
pub fn sample_brownian_with_bridge(grid: &TimeGrid, dim: usize, seed: u64) -> Result<BrownianPath> {
    let path = sample_brownian(grid, dim, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BRIDGE_STREAM);
    let uniforms = (0..grid.n_steps() * dim).map(|_| rng.random::<f64>()).collect();
    path.with_uniforms(uniforms)
}

/// A scalar functional sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStat {
    pub values: Vec<f64>,
}

impl From<Vec<f64>> for PathStat {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl Deref for PathStat {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// `out[j] = max(p[0..=j])`.
pub fn running_max(p: &[f64]) -> PathStat {
    let mut m = f64::NEG_INFINITY;
    p.iter()
        .map(|&x| {
            m = m.max(x);
            m
        })
        .collect::<Vec<_>>()
        .into()
}

/// Which side of a level counts as a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Below,
    AtOrBelow,
    Above,
    AtOrAbove,
}

impl Crossing {
    pub fn hit(self, x: f64, level: f64) -> bool {
        match self {
            Crossing::Below => x < level,
            Crossing::AtOrBelow => x <= level,
            Crossing::Above => x > level,
            Crossing::AtOrAbove => x >= level,
        }
    }
}

/// First grid index whose value satisfies the crossing predicate.
pub fn first_crossing_index(p: &[f64], level: f64, direction: Crossing) -> Option<usize> {
    p.iter().position(|&x| direction.hit(x, level))
}

/// Probability that a Brownian bridge from `x0` to `x1` over a step of length
/// `dt` with volatility `vol` touched `barrier`. Both endpoints must lie on
/// the same side of the barrier for a nontrivial answer; otherwise (or when
/// either endpoint sits on the barrier) the crossing is certain.
pub fn bridge_crossing_correction(x0: f64, x1: f64, barrier: f64, dt: f64, vol: f64) -> f64 {
    debug_assert!(dt > 0.0 && vol > 0.0);
    let gap = (x0 - barrier) * (x1 - barrier);
    if gap <= 0.0 {
        return 1.0;
    }
    (-2.0 * gap / (vol * vol * dt)).exp()
}

/// Discrete stochastic exponential of `∫ loading · dX`, updated exactly in
/// log space: `E[j+1] = E[j] exp(l_j·ΔX_j - |l_j|² dt / 2)`. `loading` holds
/// one row of length `dim` per step (extra trailing rows are ignored).
pub fn discrete_stochastic_exponential(loading: &[f64], driver: &BrownianPath) -> Result<PathStat> {
    let (n, dim) = (driver.grid().n_steps(), driver.dim());
    if loading.len() < n * dim {
        return Err(Error::GridMismatch(format!(
            "loading has {} entries, driver needs {}",
            loading.len(),
            n * dim
        )));
    }
    let dt = driver.grid().dt();
    let mut out = Vec::with_capacity(n + 1);
    let mut log_e = 0.0;
    out.push(1.0);
    for j in 0..n {
        let l = &loading[j * dim..(j + 1) * dim];
        let dx = driver.increment(j);
        let drift: f64 = l.iter().map(|x| x * x).sum::<f64>() * 0.5 * dt;
        let diffusion: f64 = l.iter().zip(dx).map(|(a, b)| a * b).sum();
        log_e += diffusion - drift;
        out.push(log_e.exp());
    }
    Ok(out.into())
}
