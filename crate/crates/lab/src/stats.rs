//! Ensemble statistics with deterministic (order-fixed, pairwise) sums, so
//! results do not depend on the number of worker threads.

use serde::Serialize;
use spde_boundary::quad::pairwise_sum;

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Two-pass mean / standard error (sample variance with `n − 1`).
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0, n };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Median (average of the two central values for even length).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Delete-group jackknife: the estimate on all `n` items and its standard
/// error from `groups` contiguous blocks left out in turn. Each call of
/// `estimator` receives the kept indices. Unlike per-node standard errors,
/// this accounts for every correlation between the values an estimator
/// combines.
pub fn jackknife<E>(
    n: usize,
    groups: usize,
    estimator: impl Fn(&[usize]) -> Result<f64, E>,
) -> Result<MeanSe, E> {
    let all: Vec<usize> = (0..n).collect();
    let full = estimator(&all)?;
    let g = groups.min(n);
    if g < 2 {
        return Ok(MeanSe { mean: full, se: f64::NAN, n });
    }
    let block = |i: usize| i * g / n;
    let mut reps = Vec::with_capacity(g);
    for k in 0..g {
        let kept: Vec<usize> = all.iter().copied().filter(|&i| block(i) != k).collect();
        reps.push(estimator(&kept)?);
    }
    let m = pairwise_sum(&reps) / g as f64;
    let dev: Vec<f64> = reps.iter().map(|r| (r - m) * (r - m)).collect();
    let se = ((g - 1) as f64 / g as f64 * pairwise_sum(&dev)).sqrt();
    Ok(MeanSe { mean: full, se, n })
}

/// Mean profile and its standard error at one snapshot time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileStats {
    pub t: f64,
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub n_paths: usize,
}

impl ProfileStats {
    /// Node-wise statistics of `samples[path][node]`.
    pub fn from_samples(t: f64, xs: Vec<f64>, samples: &[Vec<f64>]) -> Self {
        let nodes = xs.len();
        let mut mean = Vec::with_capacity(nodes);
        let mut se = Vec::with_capacity(nodes);
        let mut column = vec![0.0; samples.len()];
        for j in 0..nodes {
            for (c, s) in column.iter_mut().zip(samples) {
                *c = s[j];
            }
            let m = mean_se(&column);
            mean.push(m.mean);
            se.push(m.se);
        }
        Self { t, xs, mean, se, n_paths: samples.len() }
    }

    /// Largest `|Δmean| / sqrt(se₁² + se₂²)` against another profile on the
    /// same nodes (nodes with zero combined SE and zero difference count as 0).
    pub fn max_standardised_distance(&self, other: &ProfileStats) -> f64 {
        self.mean
            .iter()
            .zip(&other.mean)
            .zip(self.se.iter().zip(&other.se))
            .map(|((a, b), (sa, sb))| {
                let d = (a - b).abs();
                let s = (sa * sa + sb * sb).sqrt();
                if d == 0.0 {
                    0.0
                } else {
                    d / s
                }
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|Δmean|` against another profile on the same nodes.
    pub fn max_abs_distance(&self, other: &ProfileStats) -> f64 {
        self.mean.iter().zip(&other.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Statistics of an ensemble at one `ε` (or without mollification).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub label: String,
    pub epsilon: Option<f64>,
    pub profiles: Vec<ProfileStats>,
    /// Paths that blew up or lost positivity and were excluded.
    pub n_failed: usize,
}

impl EnsembleStats {
    /// Build from `samples[path][snapshot][node]`.
    pub fn from_paths(
        label: impl Into<String>,
        epsilon: Option<f64>,
        times: &[f64],
        xs: &[f64],
        samples: &[Vec<Vec<f64>>],
        n_failed: usize,
    ) -> Self {
        let profiles = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let per_path: Vec<Vec<f64>> = samples.iter().map(|p| p[k].clone()).collect();
                ProfileStats::from_samples(t, xs.to_vec(), &per_path)
            })
            .collect();
        Self { label: label.into(), epsilon, profiles, n_failed }
    }

    pub fn n_paths(&self) -> usize {
        self.profiles.first().map_or(0, |p| p.n_paths)
    }

    pub fn profile_at(&self, t: f64) -> Option<&ProfileStats> {
        self.profiles.iter().find(|p| (p.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_textbook_values() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        // Sample variance 5/3, se = sqrt(5/12).
        assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]).se, 0.0);
        assert!(mean_se(&[]).mean.is_nan());
    }

    #[test]
    fn jackknife_of_the_mean_is_the_textbook_standard_error() {
        let xs: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 + 0.1 * i as f64).collect();
        let mean = |idx: &[usize]| -> Result<f64, ()> { Ok(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64) };
        let j = jackknife(xs.len(), xs.len(), mean).unwrap();
        let m = mean_se(&xs);
        assert!((j.mean - m.mean).abs() < 1e-14);
        assert!((j.se - m.se).abs() < 1e-12);
        // Blocks of two: still close to the textbook value for exchangeable data.
        let j6 = jackknife(xs.len(), 6, mean).unwrap();
        assert!(j6.se > 0.0 && (j6.se / m.se - 1.0).abs() < 0.6);
        assert!(jackknife(1, 10, mean).unwrap().se.is_nan());
    }

    #[test]
    fn median_of_odd_and_even_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn ensemble_stats_are_nodewise() {
        let samples = vec![vec![vec![0.0, 1.0]], vec![vec![2.0, 1.0]]];
        let s = EnsembleStats::from_paths("x", None, &[0.5], &[-1.0, 1.0], &samples, 0);
        let p = s.profile_at(0.5).unwrap();
        assert_eq!(p.mean, vec![1.0, 1.0]);
        assert_eq!(p.se[1], 0.0);
        assert!((p.se[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.n_paths(), 2);
        assert_eq!(p.max_standardised_distance(p), 0.0);
    }
}
