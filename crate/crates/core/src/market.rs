//! Dividend processes: geometric Brownian aggregate dividend and the
//! logistic share process that splits it between two stocks.

use crate::error::{Error, Result};
use crate::paths::{BrownianPath, TimeGrid};
use crate::stats::split_exact;

/// Clamp for the Euler-simulated share process.
pub const EPS_PSI: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DividendPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub drift: f64,
    pub vol: Vec<f64>,
}

impl DividendPath {
    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    /// Euclidean norm of the volatility vector.
    pub fn vol_norm(&self) -> f64 {
        self.vol.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub loading: Vec<f64>,
}

/// `D_t = D0 exp(v·X_t + (a - |v|²/2) t)`, exact at grid points.
pub fn gbm_dividend(x: &BrownianPath, d0: f64, a: f64, v: &[f64]) -> Result<DividendPath> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(Error::validation("d0", "initial dividend must be positive"));
    }
    if v.len() != x.dim() {
        return Err(Error::validation(
            "v",
            format!("volatility has dimension {}, driver has {}", v.len(), x.dim()),
        ));
    }
    let grid = *x.grid();
    let half_var = 0.5 * v.iter().map(|s| s * s).sum::<f64>();
    let ln_d0 = d0.ln();
    let values = (0..grid.len())
        .map(|j| {
            if j == 0 {
                return d0;
            }
            let vx: f64 = v.iter().zip(x.at(j)).map(|(a, b)| a * b).sum();
            (ln_d0 + vx + (a - half_var) * grid.time(j)).exp()
        })
        .collect();
    Ok(DividendPath {
        grid,
        values,
        drift: a,
        vol: v.to_vec(),
    })
}

/// Euler–Maruyama path of `dψ = ψ(1-ψ) v_ψ·dX`, clamped to `[ε, 1-ε]`.
pub fn share_process(x: &BrownianPath, psi0: f64, v_psi: &[f64]) -> Result<SharePath> {
    if !(psi0 > 0.0 && psi0 < 1.0) {
        return Err(Error::validation("psi0", "must lie in (0, 1)"));
    }
    if v_psi.len() != x.dim() {
        return Err(Error::validation("v_psi", "dimension must match the driver"));
    }
    let grid = *x.grid();
    let mut values = Vec::with_capacity(grid.len());
    let mut psi = psi0;
    values.push(psi);
    for j in 0..grid.n_steps() {
        let dx: f64 = v_psi.iter().zip(x.increment(j)).map(|(a, b)| a * b).sum();
        psi = (psi + psi * (1.0 - psi) * dx).clamp(EPS_PSI, 1.0 - EPS_PSI);
        values.push(psi);
    }
    Ok(SharePath {
        grid,
        values,
        loading: v_psi.to_vec(),
    })
}

/// `(ψD, (1-ψ)D)`, adjusted at the last bit so the two halves add up to `D`
/// exactly in floating point.
pub fn split_dividends(d: &DividendPath, psi: &SharePath) -> Result<(DividendPath, DividendPath)> {
    if d.grid != psi.grid {
        return Err(Error::GridMismatch("dividend and share paths differ".into()));
    }
    let (mut first, mut second) = (Vec::with_capacity(d.values.len()), Vec::with_capacity(d.values.len()));
    for (&total, &p) in d.values.iter().zip(&psi.values) {
        let (a, b) = split_exact(total, p * total);
        first.push(a);
        second.push(b);
    }
    let mk = |values| DividendPath {
        grid: d.grid,
        values,
        drift: d.drift,
        vol: d.vol.clone(),
    };
    Ok((mk(first), mk(second)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{make_time_grid, path_seed, sample_brownian};
    use crate::stats::MonteCarloEstimate;
    use proptest::prelude::*;

    fn driver(n: usize, dim: usize, seed: u64) -> BrownianPath {
        sample_brownian(&make_time_grid(1.0, n).unwrap(), dim, seed).unwrap()
    }

    #[test]
    fn degenerate_dividend_is_constant() {
        let d = gbm_dividend(&driver(100, 1, 1), 2.0, 0.0, &[0.0]).unwrap();
        assert!(d.values.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn drift_cancellation() {
        let x = driver(100, 2, 3);
        let v = [0.3, -0.2];
        let d = gbm_dividend(&x, 1.5, 0.5 * (0.09 + 0.04), &v).unwrap();
        for j in 0..=100 {
            let vx = v[0] * x.at(j)[0] + v[1] * x.at(j)[1];
            let want = 1.5 * vx.exp();
            assert!((d.values[j] - want).abs() <= 1e-13 * want);
        }
    }

    #[test]
    fn rejects_nonpositive_d0_and_bad_dim() {
        let x = driver(10, 1, 1);
        assert!(gbm_dividend(&x, 0.0, 0.0, &[0.2]).is_err());
        assert!(gbm_dividend(&x, 1.0, 0.0, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn dividend_is_a_martingale() {
        let g = make_time_grid(1.0, 4).unwrap();
        let xs: Vec<f64> = (0..100_000u64)
            .map(|i| {
                let x = sample_brownian(&g, 1, path_seed(5, i)).unwrap();
                gbm_dividend(&x, 2.0, 0.0, &[0.2]).unwrap().values[4]
            })
            .collect();
        let est = MonteCarloEstimate::from_samples(&xs).unwrap();
        assert!(est.within(2.0, 3.0), "{est}");
    }

    #[test]
    fn dividend_restricts_to_coarser_grid() {
        let x = driver(400, 1, 9);
        let fine = gbm_dividend(&x, 2.0, 0.01, &[0.2]).unwrap();
        let coarse = gbm_dividend(&x.coarsen(4).unwrap(), 2.0, 0.01, &[0.2]).unwrap();
        for j in 0..=100 {
            let (a, b) = (coarse.values[j], fine.values[4 * j]);
            assert!((a - b).abs() <= 1e-14 * a, "j={j}");
        }
    }

    #[test]
    fn share_examples() {
        let x = driver(200, 2, 4);
        let s = share_process(&x, 0.3, &[0.0, 0.0]).unwrap();
        assert!(s.values.iter().all(|&p| p == 0.3));
        assert!(share_process(&x, 1.0, &[0.1, 0.1]).is_err());
        assert!(share_process(&x, 0.0, &[0.1, 0.1]).is_err());
    }

    #[test]
    fn share_is_a_martingale() {
        let g = make_time_grid(1.0, 50).unwrap();
        let xs: Vec<f64> = (0..100_000u64)
            .map(|i| {
                let x = sample_brownian(&g, 2, path_seed(8, i)).unwrap();
                *share_process(&x, 0.4, &[0.5, -0.5]).unwrap().values.last().unwrap()
            })
            .collect();
        let est = MonteCarloEstimate::from_samples(&xs).unwrap();
        assert!(est.within(0.4, 3.0), "{est}");
    }

    #[test]
    fn split_examples() {
        let x = driver(100, 1, 2);
        let d = gbm_dividend(&x, 2.0, 0.0, &[0.2]).unwrap();
        let half = share_process(&x, 0.5, &[0.0]).unwrap();
        let (a, b) = split_dividends(&d, &half).unwrap();
        for j in 0..=100 {
            assert_eq!(a.values[j], b.values[j]);
            assert_eq!(a.values[j] + b.values[j], d.values[j]);
        }
        let third = share_process(&x, 0.3, &[0.0]).unwrap();
        let (a, _) = split_dividends(&d, &third).unwrap();
        for j in 0..=100 {
            assert!((a.values[j] / d.values[j] - 0.3).abs() < 1e-15);
        }
        let other = gbm_dividend(&driver(50, 1, 2), 2.0, 0.0, &[0.2]).unwrap();
        assert!(split_dividends(&other, &half).is_err());
    }

    proptest! {
        #[test]
        fn share_stays_inside_unit_interval(seed in any::<u64>(), n in 1usize..400,
                                            psi0 in 0.001f64..0.999, a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let x = driver(n, 2, seed);
            let s = share_process(&x, psi0, &[a, b]).unwrap();
            prop_assert!(s.values.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn split_conserves_aggregate(seed in any::<u64>(), psi0 in 0.01f64..0.99, v in 0.0f64..3.0) {
            let x = driver(64, 2, seed);
            let d = gbm_dividend(&x, 1.7, 0.0, &[v, 0.3]).unwrap();
            let s = share_process(&x, psi0, &[0.8, -0.6]).unwrap();
            let (a, b) = split_dividends(&d, &s).unwrap();
            for j in 0..d.values.len() {
                prop_assert_eq!(a.values[j] + b.values[j], d.values[j]);
                prop_assert!(a.values[j] > 0.0 && b.values[j] > 0.0);
            }
        }
    }
}
