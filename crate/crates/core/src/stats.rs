//! Small statistics helpers shared by the evaluation modules.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn population_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Dense ids for arbitrary cluster labels, in first-seen order.
pub fn dense_ids<K: Hash + Eq + Clone>(labels: &[K]) -> (Vec<usize>, usize) {
    let mut map: HashMap<K, usize> = HashMap::new();
    let ids = labels
        .iter()
        .map(|k| {
            let n = map.len();
            *map.entry(k.clone()).or_insert(n)
        })
        .collect();
    (ids, map.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            seed: 0,
            level: 0.95,
        }
    }
}

/// Two-way cluster bootstrap of a mean. Both cluster sets are resampled with
/// replacement; each observation is weighted by the product of its clusters'
/// multiplicities. Returns the percentile interval.
pub fn cluster_bootstrap_ci(values: &[f64], a: &[usize], b: &[usize], cfg: &BootstrapConfig) -> (f64, f64) {
    assert!(
        values.len() == a.len() && values.len() == b.len(),
        "one cluster pair per value"
    );
    if values.is_empty() || cfg.replicates == 0 {
        return (f64::NAN, f64::NAN);
    }
    let na = a.iter().max().map_or(0, |m| m + 1);
    let nb = b.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = Vec::with_capacity(cfg.replicates);
    let mut ca = vec![0u32; na];
    let mut cb = vec![0u32; nb];
    while stats.len() < cfg.replicates {
        ca.iter_mut().for_each(|c| *c = 0);
        cb.iter_mut().for_each(|c| *c = 0);
        for _ in 0..na {
            ca[rng.random_range(0..na)] += 1;
        }
        for _ in 0..nb {
            cb[rng.random_range(0..nb)] += 1;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..values.len() {
            let w = (ca[a[i]] * cb[b[i]]) as f64;
            num += w * values[i];
            den += w;
        }
        if den > 0.0 {
            stats.push(num / den);
        }
    }
    stats.sort_by(|x, y| x.total_cmp(y));
    let tail = (1.0 - cfg.level) / 2.0;
    (percentile_sorted(&stats, tail), percentile_sorted(&stats, 1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((population_sd(&[1.0, 2.0, 3.0]) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(percentile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn bootstrap_brackets_mean_and_is_seeded() {
        let values: Vec<f64> = (0..400).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let a: Vec<usize> = (0..400).map(|i| i % 20).collect();
        let b: Vec<usize> = (0..400).map(|i| i / 20).collect();
        let cfg = BootstrapConfig {
            replicates: 300,
            ..Default::default()
        };
        let (lo, hi) = cluster_bootstrap_ci(&values, &a, &b, &cfg);
        let m = mean(&values);
        assert!(lo <= m && m <= hi && hi - lo < 0.3);
        assert_eq!((lo, hi), cluster_bootstrap_ci(&values, &a, &b, &cfg));
        let constant = vec![1.0; 400];
        assert_eq!(cluster_bootstrap_ci(&constant, &a, &b, &cfg), (1.0, 1.0));
    }
}
