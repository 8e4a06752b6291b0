//! Monte Carlo estimates, deterministic path-parallel reduction, and small
//! numerical helpers shared by the simulation modules.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Paths per work unit. Chunk boundaries are fixed, so reductions combine in
/// the same order no matter how many worker threads run.
const CHUNK: u64 = 512;

/// Mean, standard error and sample count of a simulated expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; infinite when `n == 1`.
    pub std_err: f64,
    pub n: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let mut acc = Accumulator::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    /// `|mean - target| <= k * std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }

    /// `mean > k * std_err`.
    pub fn positive_at(&self, k: f64) -> bool {
        self.mean > k * self.std_err
    }

    /// Estimate of `c - X` given an estimate of `X`.
    pub fn offset_from(&self, c: f64) -> Self {
        Self {
            mean: c - self.mean,
            ..*self
        }
    }
}

impl fmt::Display for MonteCarloEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.2e} (n={})", self.mean, self.std_err, self.n)
    }
}

/// Streaming mean/variance (Welford), mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.mean = mean;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> Result<MonteCarloEstimate> {
        match self.n {
            0 => Err(Error::EmptySample("no samples accumulated")),
            1 => Ok(MonteCarloEstimate {
                mean: self.mean,
                std_err: f64::INFINITY,
                n: 1,
            }),
            n => {
                let var = (self.m2 / (n - 1) as f64).max(0.0);
                Ok(MonteCarloEstimate {
                    mean: self.mean,
                    std_err: (var / n as f64).sqrt(),
                    n,
                })
            }
        }
    }
}

/// Folds `f(path_index)` over `0..n_paths` in parallel and merges the
/// per-chunk states in index order. Output is independent of thread count.
pub fn fold_paths<A, I, F, M>(n_paths: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let end = ((c + 1) * CHUNK).min(n_paths);
            for i in c * CHUNK..end {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Estimates of the `m` per-path quantities returned by `sample(index)` over
/// `0..n_paths`. The first error aborts the reduction.
pub fn estimate_paths<F>(n_paths: u64, m: usize, sample: F) -> Result<Vec<MonteCarloEstimate>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let acc = fold_paths(
        n_paths,
        || Ok(vec![Accumulator::default(); m]),
        |acc: &mut Result<Vec<Accumulator>>, i| {
            let Ok(a) = acc else { return };
            match sample(i) {
                Ok(v) if v.len() == m => a.iter_mut().zip(v).for_each(|(a, x)| a.push(x)),
                Ok(_) => *acc = Err(Error::validation("sample", "wrong number of per-path quantities")),
                Err(e) => *acc = Err(e),
            }
        },
        |total, part| match (total.as_mut(), part) {
            (Ok(t), Ok(p)) => t.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b)),
            (Ok(_), Err(e)) => *total = Err(e),
            _ => {}
        },
    )?;
    acc.iter().map(Accumulator::estimate).collect()
}

/// Trapezoidal integral of grid samples `f` over steps `from..to`, i.e. from
/// `t_from` to `t_to`.
pub fn trapezoid(f: &[f64], dt: f64, from: usize, to: usize) -> f64 {
    if to <= from {
        return 0.0;
    }
    let mut s = 0.5 * (f[from] + f[to]);
    for &x in &f[from + 1..to] {
        s += x;
    }
    s * dt
}

/// Linear-interpolated quantile of an already sorted slice, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Median and 90th percentile of a sample (NaNs are rejected upstream).
pub fn median_p90(values: &[f64]) -> Option<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((quantile_sorted(&v, 0.5)?, quantile_sorted(&v, 0.9)?))
}

/// Relative difference `|a-b| / max(|a|,|b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Spacing of doubles in the binade of `x` (for positive normal `x`).
pub(crate) fn ulp_of(x: f64) -> f64 {
    f64::from_bits(x.abs().to_bits() & 0x7FF0_0000_0000_0000) * f64::EPSILON
}

/// Splits positive `total` into `(part', total - part')` with `part'` rounded
/// to the spacing of `total`, so both pieces are exact and add back to `total`.
pub fn split_exact(total: f64, part: f64) -> (f64, f64) {
    if part + (total - part) == total {
        return (part, total - part);
    }
    let u = ulp_of(total);
    let q = ((part / u).round() * u).clamp(0.0, total);
    (q, total - q)
}

fn ordered_key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        b ^ i64::MAX
    } else {
        b
    }
}

fn from_ordered_key(k: i64) -> f64 {
    f64::from_bits(if k < 0 { k ^ i64::MAX } else { k } as u64)
}

fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |s, &v| s + v)
}

/// Adjusts the entries flagged in `free` so that the left-to-right
/// floating-point sum of `values` equals `total` exactly. The largest free
/// entry absorbs the residual; it is then moved by whole ulps if rounding
/// still leaves a gap, falling back to the other free entries. Entries not
/// flagged are never touched. Returns `false` if no exact fit was found,
/// which can happen when every partial sum lives on a coarser grid than
/// `total` (large offsetting entries).
pub fn clear_exact(values: &mut [f64], total: f64, free: &[bool]) -> bool {
    let Some(rem) = (0..values.len())
        .filter(|&k| free[k])
        .max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
    else {
        return ordered_sum(values) == total;
    };
    let others: f64 = (0..values.len()).filter(|&k| k != rem).map(|k| values[k]).sum();
    values[rem] = total - others;
    if ordered_sum(values) == total {
        return true;
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&k| free[k] && k != rem).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    order.insert(0, rem);
    for k in order {
        if bisect_entry(values, total, k) {
            return true;
        }
    }
    false
}

/// Searches the doubles for a value of `values[k]` that makes the ordered
/// sum hit `total`; the sum is monotone in every entry.
fn bisect_entry(values: &mut [f64], total: f64, k: usize) -> bool {
    let start = values[k];
    let eval = |key: i64, values: &mut [f64]| {
        values[k] = from_ordered_key(key);
        ordered_sum(values)
    };
    let k0 = ordered_key(start);
    let s0 = eval(k0, values);
    if s0 == total {
        return true;
    }
    let dir: i64 = if s0 < total { 1 } else { -1 };
    let mut near = k0;
    let mut step: i64 = 1;
    let mut far = loop {
        let Some(cand) = k0.checked_add(dir * step) else {
            values[k] = start;
            return false;
        };
        let s = eval(cand, values);
        if s == total {
            return true;
        }
        if (s > total) == (dir > 0) {
            break cand;
        }
        near = cand;
        if step > 1 << 62 || !s.is_finite() {
            values[k] = start;
            return false;
        }
        step *= 2;
    };
    while (far - near).abs() > 1 {
        let mid = near + (far - near) / 2;
        let s = eval(mid, values);
        if s == total {
            return true;
        }
        if (s > total) == (dir > 0) {
            far = mid;
        } else {
            near = mid;
        }
    }
    values[k] = start;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let est = MonteCarloEstimate::from_samples(&xs).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((est.mean - mean).abs() < 1e-12);
        assert!((est.std_err - (var / xs.len() as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..777).map(|i| (i as f64).sin()).collect();
        let mut all = Accumulator::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), all.count());
        assert!((a.mean - all.mean).abs() < 1e-14);
        assert!((a.m2 - all.m2).abs() < 1e-10);
    }

    #[test]
    fn constant_samples_give_exact_mean() {
        let est = MonteCarloEstimate::from_samples(&[1.0; 1000]).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_err, 0.0);
        assert!(est.within(1.0, 3.0));
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(MonteCarloEstimate::from_samples(&[]).is_err());
    }

    #[test]
    fn fold_paths_is_ordered() {
        let v = fold_paths(2000, Vec::new, |acc: &mut Vec<u64>, i| acc.push(i), |acc, part| acc.extend(part));
        assert_eq!(v, (0..2000).collect::<Vec<_>>());
    }

    #[test]
    fn estimate_paths_examples() {
        let est = estimate_paths(1000, 2, |i| Ok(vec![i as f64, 3.0])).unwrap();
        assert_eq!(est[0].mean, 499.5);
        assert_eq!((est[1].mean, est[1].std_err, est[1].n), (3.0, 0.0, 1000));
        let err = estimate_paths(1000, 1, |i| if i == 700 { Err(Error::EmptySample("boom")) } else { Ok(vec![1.0]) });
        assert!(matches!(err, Err(Error::EmptySample("boom"))));
        assert!(estimate_paths(0, 1, |_| Ok(vec![1.0])).is_err());
    }

    #[test]
    fn trapezoid_linear_is_exact() {
        let f: Vec<f64> = (0..=10).map(|j| j as f64 * 0.1).collect();
        assert!((trapezoid(&f, 0.1, 0, 10) - 0.5).abs() < 1e-15);
        assert_eq!(trapezoid(&f, 0.1, 4, 4), 0.0);
    }

    #[test]
    fn split_exact_adds_back() {
        for &(t, p) in &[(2.0, 0.7), (1.3, 1e-9), (7.77, 7.7699999), (0.1, 0.03)] {
            let (a, b) = split_exact(t, p);
            assert_eq!(a + b, t);
            assert!((a - p).abs() <= 1e-15 * t);
        }
    }

    #[test]
    fn clear_exact_hits_totals() {
        let mut v = vec![0.1, 0.2, 0.3];
        assert!(clear_exact(&mut v, 0.6, &[true, true, true]));
        assert_eq!(v.iter().fold(0.0, |s, x| s + x), 0.6);

        let mut v = vec![-0.7, 1.0, 0.823456789];
        assert!(clear_exact(&mut v, 1.123456789, &[true, false, true]));
        assert_eq!(v[1], 1.0);
        assert_eq!(v.iter().fold(0.0, |s, x| s + x), 1.123456789);

        // offsetting entries far above the total's binade cannot always fit
        let mut v = vec![0.0, 55584.079073516434, 457.9536725485075];
        let ok = clear_exact(&mut v, 127.39571433916868, &[true, true, true]);
        assert_eq!(ok, v.iter().fold(0.0, |s, x| s + x) == 127.39571433916868);

        let mut v = vec![0.0, 1e-300, 5.0];
        assert!(clear_exact(&mut v, 5.0, &[false, true, true]));
        assert_eq!(v[0], 0.0);

        let mut v = vec![0.25, -0.1];
        assert!(clear_exact(&mut v, 0.0, &[true, true]));
        assert_eq!(v[0] + v[1], 0.0);
        assert!(!clear_exact(&mut [1.0, 2.0], 4.0, &[false, false]));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), Some(3.0));
        assert_eq!(quantile_sorted(&v, 0.9), Some(4.6));
        assert_eq!(quantile_sorted(&[], 0.5), None);
    }

    proptest! {
        #[test]
        fn clear_exact_shares(total in 1e-3f64..1e3, s in proptest::collection::vec(1e-9f64..1.0, 1..6)) {
            let norm: f64 = s.iter().sum();
            let mut v: Vec<f64> = s.iter().map(|x| total * x / norm).collect();
            let before = v.clone();
            let free = vec![true; v.len()];
            prop_assert!(clear_exact(&mut v, total, &free));
            prop_assert_eq!(v.iter().fold(0.0, |s, x| s + x), total);
            for (a, b) in v.iter().zip(&before) {
                prop_assert!((a - b).abs() <= 1e-14 * total);
            }
        }

        #[test]
        fn clear_exact_signed_pair(total in 1e-3f64..1e3, x in -1.0f64..1.0) {
            let mut v = vec![x * total, (1.0 - x) * total];
            prop_assert!(clear_exact(&mut v, total, &[true, true]));
            prop_assert_eq!(v[0] + v[1], total);
            let mut v = vec![x * total, -x * total];
            prop_assert!(clear_exact(&mut v, 0.0, &[true, true]));
            prop_assert_eq!(v[0] + v[1], 0.0);
        }
    }
}
