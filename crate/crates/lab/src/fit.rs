//! Effective boundary data from mean profiles: SE-weighted least squares of
//! a mean profile against a Hopf–Cole profile family indexed by `(b₋, b₊)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use spde_boundary::kernels::{robin_semigroup_apply, SemigroupOptions};

use crate::stats::EnsembleStats;
use crate::{LabError, Result};

/// Outcome of a weighted Gauss–Newton fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Standard errors from the inverse of the SE-weighted Gauss–Newton
    /// Hessian `JᵀWJ` (rescaled by the residual variance for unit weights).
    pub stderr: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub n_points: usize,
    pub iterations: usize,
}

/// Options of [`weighted_gauss_newton`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative finite-difference step of the Jacobian.
    pub jacobian_step: f64,
    /// Stop when every parameter moves by less than this.
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 50, jacobian_step: 1e-4, step_tol: 1e-10 }
    }
}

/// Minimise `Σ wᵢ (dataᵢ − modelᵢ(θ))²` with `wᵢ = 1/seᵢ²`. Points with
/// `se = 0` are dropped unless every `se` is zero, in which case the fit
/// is unweighted. Steps that increase the objective are halved.
pub fn weighted_gauss_newton(
    data: &[f64],
    se: &[f64],
    theta0: &[f64],
    model: impl Fn(&[f64]) -> Result<Vec<f64>>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if data.len() != se.len() {
        return Err(LabError::Config("data and standard errors differ in length".into()));
    }
    let unweighted = se.iter().all(|&s| s == 0.0);
    let weights: Vec<f64> = se
        .iter()
        .map(|&s| if unweighted { 1.0 } else if s > 0.0 { 1.0 / (s * s) } else { 0.0 })
        .collect();
    let used = weights.iter().filter(|&&w| w > 0.0).count();
    let p = theta0.len();
    if used <= p {
        return Err(estimation(format!("{used} usable points for {p} parameters")));
    }
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let m = model(theta)?;
        if m.len() != data.len() {
            return Err(LabError::Config("model returned a profile of the wrong length".into()));
        }
        let r: Vec<f64> = data.iter().zip(&m).map(|(d, m)| d - m).collect();
        let chi2 = r.iter().zip(&weights).map(|(r, w)| w * r * r).sum();
        Ok((chi2, r))
    };
    let mut theta = theta0.to_vec();
    let (mut chi2, mut resid) = objective(&theta)?;
    let mut iterations = 0;
    let mut jtwj: DMatrix<f64>;
    loop {
        let jac = jacobian(&model, &theta, data.len(), opts.jacobian_step)?;
        jtwj = DMatrix::zeros(p, p);
        let mut jtwr = DVector::zeros(p);
        for i in 0..data.len() {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            for a in 0..p {
                jtwr[a] += w * jac[(i, a)] * resid[i];
                for b in 0..p {
                    jtwj[(a, b)] += w * jac[(i, a)] * jac[(i, b)];
                }
            }
        }
        let step = jtwj
            .clone()
            .cholesky()
            .ok_or_else(|| estimation("singular normal equations".into()))?
            .solve(&jtwr);
        if iterations >= opts.max_iterations {
            return Err(estimation(format!("no convergence after {iterations} iterations")));
        }
        iterations += 1;
        let mut scale: f64 = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + scale * s).collect();
            let (c, r) = objective(&trial)?;
            if c <= chi2 * (1.0 + 1e-14) {
                theta = trial;
                chi2 = c;
                resid = r;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        let moved = step.iter().map(|s: &f64| (scale * s).abs()).fold(0.0, f64::max);
        if !accepted || moved < opts.step_tol {
            break;
        }
    }
    let cov = jtwj.try_inverse().ok_or_else(|| estimation("singular Hessian at the optimum".into()))?;
    let scale = if unweighted { chi2 / (used - p) as f64 } else { 1.0 };
    let covariance: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|b| scale * cov[(a, b)]).collect()).collect();
    let stderr = (0..p).map(|a| covariance[a][a].max(0.0).sqrt()).collect();
    Ok(FitResult { params: theta, stderr, covariance, chi2, n_points: used, iterations })
}

fn estimation(msg: String) -> LabError {
    LabError::Core(spde_boundary::Error::Estimation(msg))
}

fn jacobian(
    model: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    n: usize,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(n, theta.len());
    for a in 0..theta.len() {
        let h = rel_step * theta[a].abs().max(1.0);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[a] += h;
        tm[a] -= h;
        let (mp, mm) = (model(&tp)?, model(&tm)?);
        for i in 0..n {
            jac[(i, a)] = (mp[i] - mm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Fitted effective boundary data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryFit {
    pub b_minus: f64,
    pub b_plus: f64,
    pub se_minus: f64,
    pub se_plus: f64,
    /// Fitted uniform drift `κ` (mean profile shifted by `κt`), if fitted.
    pub kappa: Option<f64>,
    pub kappa_se: Option<f64>,
    /// `b₊ − b₋` and its standard error.
    pub asymmetry: f64,
    pub asymmetry_se: f64,
    pub chi2: f64,
    pub n_points: usize,
}

/// A family of mean profiles indexed by the Hopf–Cole boundary data
/// `(b₋, b₊)`: returns one profile per snapshot time.
pub trait ProfileFamily {
    fn profiles(&self, b: (f64, f64)) -> Result<Vec<Vec<f64>>>;
}

/// Fit `(b₋, b₊)` (and optionally a uniform drift `κ`) so that the family
/// matches the mean profiles of `stats` in the SE-weighted L² sense. The
/// family must return profiles at the snapshot times of `stats`, in order.
/// Snapshots at `t = 0` carry no information and are skipped.
pub fn fit_boundary_data(
    stats: &EnsembleStats,
    family: &dyn ProfileFamily,
    with_drift: bool,
    start: (f64, f64),
) -> Result<BoundaryFit> {
    let keep: Vec<usize> = (0..stats.profiles.len()).filter(|&k| stats.profiles[k].t > 0.0).collect();
    let mut data = Vec::new();
    let mut se = Vec::new();
    let mut times = Vec::new();
    for &k in &keep {
        let p = &stats.profiles[k];
        data.extend_from_slice(&p.mean);
        se.extend_from_slice(&p.se);
        times.extend(std::iter::repeat(p.t).take(p.mean.len()));
    }
    let model = |theta: &[f64]| -> Result<Vec<f64>> {
        let profiles = family.profiles((theta[0], theta[1]))?;
        let mut out = Vec::with_capacity(data.len());
        for &k in &keep {
            let prof = profiles.get(k).ok_or_else(|| LabError::Config("family returned too few snapshots".into()))?;
            out.extend_from_slice(prof);
        }
        if with_drift {
            for (o, t) in out.iter_mut().zip(&times) {
                *o += theta[2] * t;
            }
        }
        Ok(out)
    };
    let theta0: Vec<f64> = if with_drift { vec![start.0, start.1, 0.0] } else { vec![start.0, start.1] };
    let r = weighted_gauss_newton(&data, &se, &theta0, model, &FitOptions::default())?;
    let c = &r.covariance;
    let asym_var = c[0][0] + c[1][1] - 2.0 * c[0][1];
    Ok(BoundaryFit {
        b_minus: r.params[0],
        b_plus: r.params[1],
        se_minus: r.stderr[0],
        se_plus: r.stderr[1],
        kappa: with_drift.then(|| r.params[2]),
        kappa_se: with_drift.then(|| r.stderr[2]),
        asymmetry: r.params[1] - r.params[0],
        asymmetry_se: asym_var.max(0.0).sqrt(),
        chi2: r.chi2,
        n_points: r.n_points,
    })
}

/// Noise-free Hopf–Cole profiles `½ log(P_t^{b} Z₀)`, where `P^{b}` is the
/// heat semigroup with Robin data `∂ₓZ = 2b±Z` (Crank–Nicolson).
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicHopfCole {
    pub initial: Vec<f64>,
    pub times: Vec<f64>,
    /// Crank–Nicolson steps per unit time.
    pub steps_per_unit_time: usize,
}

impl ProfileFamily for DeterministicHopfCole {
    fn profiles(&self, b: (f64, f64)) -> Result<Vec<Vec<f64>>> {
        self.times
            .iter()
            .map(|&t| {
                let n_steps = ((t * self.steps_per_unit_time as f64).ceil() as usize).max(1);
                let z = robin_semigroup_apply(b, t, &self.initial, &SemigroupOptions { n_steps, ..Default::default() })?;
                z.iter()
                    .map(|&z| {
                        if z > 0.0 {
                            Ok(0.5 * z.ln())
                        } else {
                            Err(LabError::Core(spde_boundary::Error::NonPositive { t, x: f64::NAN, value: z }))
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Second-order expansion of the ensemble-mean Hopf–Cole profile around
/// the boundary data `centre`, built from coupled finite differences of the
/// stochastic heat equation on the same noise paths:
/// `m(b) = m₀ + Σ± (b± − centre±) S± + ½ (b± − centre±)² Q±`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedHopfCole {
    pub centre: (f64, f64),
    pub base: Vec<Vec<f64>>,
    pub s_minus: Vec<Vec<f64>>,
    pub s_plus: Vec<Vec<f64>>,
    pub q_minus: Vec<Vec<f64>>,
    pub q_plus: Vec<Vec<f64>>,
}

impl ProfileFamily for ExpandedHopfCole {
    fn profiles(&self, b: (f64, f64)) -> Result<Vec<Vec<f64>>> {
        let (dm, dp) = (b.0 - self.centre.0, b.1 - self.centre.1);
        Ok((0..self.base.len())
            .map(|k| {
                (0..self.base[k].len())
                    .map(|j| {
                        self.base[k][j]
                            + dm * self.s_minus[k][j]
                            + dp * self.s_plus[k][j]
                            + 0.5 * dm * dm * self.q_minus[k][j]
                            + 0.5 * dp * dp * self.q_plus[k][j]
                    })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ProfileStats;

    fn synthetic(b: (f64, f64), family: &DeterministicHopfCole, xs: &[f64]) -> EnsembleStats {
        let profiles = family.profiles(b).unwrap();
        EnsembleStats {
            label: "synthetic".into(),
            epsilon: None,
            profiles: family
                .times
                .iter()
                .zip(profiles)
                .map(|(&t, mean)| ProfileStats { t, xs: xs.to_vec(), se: vec![0.0; mean.len()], mean, n_paths: 1 })
                .collect(),
            n_failed: 0,
        }
    }

    fn family() -> (DeterministicHopfCole, Vec<f64>) {
        let n = 32;
        let xs: Vec<f64> = (0..=n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect();
        let initial = xs.iter().map(|x| 1.0 + 0.3 * (std::f64::consts::PI * x / 2.0).cos()).collect();
        (DeterministicHopfCole { initial, times: vec![0.0625, 0.125, 0.25], steps_per_unit_time: 800 }, xs)
    }

    #[test]
    fn recovers_exact_hopf_cole_boundary_data() {
        let (fam, xs) = family();
        let stats = synthetic((0.2, -0.1), &fam, &xs);
        let fit = fit_boundary_data(&stats, &fam, false, (0.0, 0.0)).unwrap();
        assert!((fit.b_minus - 0.2).abs() < 1e-3 && (fit.b_plus + 0.1).abs() < 1e-3, "{fit:?}");
        let with_drift = fit_boundary_data(&stats, &fam, true, (0.0, 0.0)).unwrap();
        assert!((with_drift.asymmetry + 0.3).abs() < 1e-3, "{with_drift:?}");
        assert!(with_drift.kappa.unwrap().abs() < 1e-3);
    }

    #[test]
    fn flat_profile_fits_zero_data() {
        let (mut fam, xs) = family();
        fam.initial = vec![1.0; xs.len()];
        let stats = synthetic((0.0, 0.0), &fam, &xs);
        let fit = fit_boundary_data(&stats, &fam, false, (0.1, -0.1)).unwrap();
        assert!(fit.b_minus.abs() < 1e-6 && fit.b_plus.abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn gauss_newton_fits_a_line_with_textbook_errors() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x).collect();
        let se = vec![0.5; 10];
        let r = weighted_gauss_newton(
            &data,
            &se,
            &[0.0, 0.0],
            |t| Ok(xs.iter().map(|x| t[0] + t[1] * x).collect()),
            &FitOptions::default(),
        )
        .unwrap();
        assert!((r.params[0] - 1.0).abs() < 1e-8 && (r.params[1] - 2.0).abs() < 1e-8);
        // Var(slope) = σ² / Σ(x − x̄)² = 0.25 / 82.5.
        assert!((r.stderr[1] - (0.25f64 / 82.5).sqrt()).abs() < 1e-8);
        assert!(r.chi2 < 1e-12);
    }

    #[test]
    fn too_few_points_is_an_estimation_error() {
        let r = weighted_gauss_newton(&[1.0], &[1.0], &[0.0, 0.0], |t| Ok(vec![t[0] + t[1]]), &FitOptions::default());
        assert!(r.is_err());
    }
}
