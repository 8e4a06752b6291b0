//! Weighted two-sample Kolmogorov–Smirnov distance with a pooled bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::path_seed;

/// A sample point with a nonnegative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighted {
    pub value: f64,
    pub weight: f64,
}

fn normalized(sample: &[Weighted], name: &'static str) -> Result<Vec<Weighted>> {
    if sample.iter().any(|s| !s.value.is_finite() || !(s.weight >= 0.0)) {
        return Err(Error::validation(name, "values must be finite and weights nonnegative"));
    }
    let total: f64 = sample.iter().map(|s| s.weight).sum();
    if !(total > 0.0) {
        return Err(Error::EmptySample("weighted sample has no mass"));
    }
    let mut out: Vec<Weighted> = sample
        .iter()
        .filter(|s| s.weight > 0.0)
        .map(|s| Weighted {
            value: s.value,
            weight: s.weight / total,
        })
        .collect();
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(out)
}

/// Kish effective sample size `(Σw)²/Σw²`.
pub fn effective_size(sample: &[Weighted]) -> f64 {
    let (s, s2) = sample
        .iter()
        .fold((0.0, 0.0), |(s, s2), x| (s + x.weight, s2 + x.weight * x.weight));
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

fn sup_distance(a: &[Weighted], b: &[Weighted]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.value.min(q.value),
            (Some(p), None) => p.value,
            (None, Some(q)) => q.value,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].value == x {
            fa += a[i].weight;
            i += 1;
        }
        while j < b.len() && b[j].value == x {
            fb += b[j].weight;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    // normalized weights may sum to 1 + ulp
    d.min(1.0)
}

/// `sup_x |F_a(x) - F_b(x)|` between the weighted empirical distributions.
pub fn weighted_ks_distance(a: &[Weighted], b: &[Weighted]) -> Result<f64> {
    Ok(sup_distance(&normalized(a, "first sample")?, &normalized(b, "second sample")?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub distance: f64,
    pub p_value: f64,
    pub replicates: usize,
    /// Kish effective sizes of the two samples.
    pub effective: (f64, f64),
}

/// Bootstrap p-value under the null of a common law: both samples are
/// redrawn (at their effective sizes) from the pooled weighted distribution
/// and `p = (1 + #{D* ≥ D})/(B + 1)`.
pub fn weighted_ks_test(a: &[Weighted], b: &[Weighted], replicates: usize, seed: u64) -> Result<KsTest> {
    let (na, nb) = (normalized(a, "first sample")?, normalized(b, "second sample")?);
    let distance = sup_distance(&na, &nb);
    let effective = (effective_size(a), effective_size(b));
    let (ma, mb) = (effective.0.round().max(1.0) as usize, effective.1.round().max(1.0) as usize);
    let mut pooled: Vec<Weighted> = na
        .iter()
        .chain(&nb)
        .map(|s| Weighted {
            value: s.value,
            weight: 0.5 * s.weight,
        })
        .collect();
    pooled.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut cdf = Vec::with_capacity(pooled.len());
    let mut acc = 0.0;
    for p in &pooled {
        acc += p.weight;
        cdf.push(acc);
    }
    let draw = |rng: &mut ChaCha8Rng, m: usize| -> Vec<Weighted> {
        let mut out: Vec<Weighted> = (0..m)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let idx = cdf.partition_point(|&c| c <= u).min(pooled.len() - 1);
                Weighted {
                    value: pooled[idx].value,
                    weight: 1.0 / m as f64,
                }
            })
            .collect();
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        out
    };
    let exceed = (0..replicates as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, r));
            let (sa, sb) = (draw(&mut rng, ma), draw(&mut rng, mb));
            sup_distance(&sa, &sb) >= distance
        })
        .count();
    Ok(KsTest {
        distance,
        p_value: (1 + exceed) as f64 / (replicates + 1) as f64,
        replicates,
        effective,
    })
}
