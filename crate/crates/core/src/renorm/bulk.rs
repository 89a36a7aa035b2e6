//! Bulk (Wick) renormalisation constants.
//!
//! **KPZ.** With `f = ∂ₓP · 1_{0<t<T}` the gradient of the heat kernel of
//! `∂ₜ − ½∂ₓ²` truncated at time `T`, the constant
//! `C_ε = ∫ (ρ̄_ε ∗ f)²` equals `⟨η_ε, f̄ ⋆ f⟩` and a Fourier computation gives
//! `(f̄ ⋆ f)(s, y) = N(y, |s|) − N(y, 2T − |s|)` for `|s| < T`. Rescaling
//! yields
//!
//! `C_ε = ε⁻¹ ⟨η, N(y, |s|)⟩ − ⟨η, N(εy, 2T − ε²|s|)⟩`,
//!
//! so the divergent part is exactly `ε⁻¹⟨η, N(y,|s|)⟩` and `T = ∞` drops the
//! second term. For a purely spatial mollifier `C_ε = ε⁻¹ (ρ̂ ⋆ ρ̂)(0)`, the
//! usual Itô constant.
//!
//! **gPAM.** With `K(x) = (2π)⁻¹ log(1/|x|) χ(|x|/r)` the truncated Green
//! function of `−Δ` in the plane, the constant multiplying `δᵢⱼ g²` and
//! `2 g g′` in the renormalised equation is half the Wick constant,
//! `C_ε = ½ ∫ K (ρ_ε ⋆ ρ_ε)`. When the support of `ρ_ε ⋆ ρ_ε` sits inside
//! the region where `χ = 1` this is
//! `(4π)⁻¹ [log(1/ε) + ∫ log(1/|x|) (ρ ⋆ ρ)(x) dx]`.

use crate::error::{config_err, Result};
use crate::kernels::gaussian;
use crate::mollifier::{Autocorrelation, MollifierSpec, PlanarMollifier};
use crate::quad::{Estimate, GaussLegendre};

use super::{adaptive, integrate_against_eta, QuadratureOptions};

/// Time truncation of the heat kernel inside the KPZ constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KpzTruncation {
    /// `T = ∞`: only the divergent part `ε⁻¹⟨η, N(y,|s|)⟩`.
    None,
    /// Truncate the kernel at time `T`.
    Time(f64),
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(config_err!("epsilon must be positive and finite, got {epsilon}"));
    }
    if epsilon < 1e-8 {
        return Err(config_err!("epsilon = {epsilon} is below the resolvable range of the quadrature"));
    }
    Ok(())
}

/// `⟨η, N(y, |s|)⟩ = 2∫_{s>0}∫ η(s,y) N(y,s) dy ds` on one lattice, as a
/// nested adaptive integral with the inner variable `y = √s z`.
fn heat_pairing(eta: &Autocorrelation) -> Result<Estimate> {
    if eta.is_time_collapsed() {
        return Ok(Estimate::new(eta.at_origin(), 0.0, 1));
    }
    let (hs, hy) = eta.step();
    let (s_max, y_max) = eta.support();
    let inner_rule = adaptive(1e-13);
    let inner = |s: f64| -> f64 {
        if s <= 0.0 {
            return eta.eval(0.0, 0.0);
        }
        let r = libm::sqrt(s);
        let z_max = (y_max / r).min(10.0);
        let first = libm::ceil(-z_max * r / hy) as isize;
        let last = libm::floor(z_max * r / hy) as isize;
        let breaks: alloc::vec::Vec<f64> = (first..=last).map(|l| l as f64 * hy / r).collect();
        match inner_rule.integrate_with_breaks(|z| eta.eval(s, r * z) * gaussian(z, 1.0), -z_max, z_max, &breaks) {
            Ok(e) => e.value,
            Err(_) => f64::NAN,
        }
    };
    let breaks: alloc::vec::Vec<f64> = (1..eta.half_extent().0).map(|k| k as f64 * hs).collect();
    let outer = adaptive(1e-12).integrate_with_breaks(inner, 0.0, s_max, &breaks)?;
    Ok(Estimate::new(2.0 * outer.value, 2.0 * outer.error, outer.evals))
}

/// `C_ε^KPZ` from a precomputed autocorrelation of the unscaled mollifier.
pub fn c_eps_kpz_from_eta(eta: &Autocorrelation, epsilon: f64, truncation: KpzTruncation) -> Result<Estimate> {
    check_epsilon(epsilon)?;
    let fine = heat_pairing(eta)?;
    let coarse = heat_pairing(&eta.coarsened())?;
    let mut est = Estimate::new(
        fine.value / epsilon,
        (fine.error + (fine.value - coarse.value).abs() / 15.0) / epsilon,
        fine.evals + coarse.evals,
    );
    if let KpzTruncation::Time(t_max) = truncation {
        let s_max = eta.support().0;
        if !(t_max > 0.0) || epsilon * epsilon * s_max >= t_max {
            return Err(config_err!(
                "kernel truncation time {t_max} must exceed the mollifier time extent {}",
                epsilon * epsilon * s_max
            ));
        }
        let correction = integrate_against_eta(
            eta,
            |s, y| gaussian(epsilon * y, 2.0 * t_max - epsilon * epsilon * s.abs()),
            &QuadratureOptions::default(),
        );
        est.value -= correction.value;
        est.error += correction.error;
        est.evals += correction.evals;
    }
    Ok(est)
}

/// `C_ε^KPZ = ∫ (ρ̄_ε ∗ ∂ₓK)²` for the mollifier `spec` at scale `epsilon`.
pub fn compute_c_eps_kpz(spec: &MollifierSpec, epsilon: f64, cells: usize, truncation: KpzTruncation) -> Result<Estimate> {
    check_epsilon(epsilon)?;
    c_eps_kpz_from_eta(&spec.autocorrelation(cells)?, epsilon, truncation)
}

/// Smooth radial cutoff equal to 1 on `[0, ½]` and 0 on `[1, ∞)`.
fn radial_cutoff(rho: f64) -> f64 {
    super::boundary_layer::smooth_step(2.0 - 2.0 * rho)
}

/// `∫ K(εx) η(x) dx` in polar coordinates (Gauss–Legendre in the radius
/// over the lattice scale, trapezoid in the angle).
fn green_pairing(eta: &Autocorrelation, epsilon: f64, radius: f64) -> f64 {
    let (h, _) = eta.step();
    let r_max = eta.support().0 * core::f64::consts::SQRT_2;
    let n_panels = libm::ceil(r_max / h) as usize;
    let n_theta = 64;
    let gl = GaussLegendre::new(8);
    let log_eps = libm::log(1.0 / epsilon);
    let inv_2pi = 0.5 / core::f64::consts::PI;
    let mut total = 0.0;
    for p in 0..n_panels {
        let (a, b) = (p as f64 * h, ((p + 1) as f64 * h).min(r_max));
        total += gl.integrate(a, b, |r| {
            if r <= 0.0 {
                return 0.0;
            }
            let k = inv_2pi * (log_eps - libm::log(r)) * radial_cutoff(epsilon * r / radius);
            let mut ring = 0.0;
            for j in 0..n_theta {
                let th = 2.0 * core::f64::consts::PI * (j as f64 + 0.5) / n_theta as f64;
                ring += eta.eval(r * libm::cos(th), r * libm::sin(th));
            }
            k * r * ring * 2.0 * core::f64::consts::PI / n_theta as f64
        });
    }
    total
}

/// `C_ε^gPAM` from a precomputed planar autocorrelation.
pub fn c_eps_gpam_from_eta(eta: &Autocorrelation, epsilon: f64, radius: f64) -> Result<Estimate> {
    check_epsilon(epsilon)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(config_err!("Green-function truncation radius must be positive, got {radius}"));
    }
    let fine = green_pairing(eta, epsilon, radius);
    let coarse = green_pairing(&eta.coarsened(), epsilon, radius);
    Ok(Estimate::new(0.5 * fine, 0.5 * (fine - coarse).abs() / 15.0, 0))
}

/// `C_ε^gPAM = ½ ∫ K (ρ_ε ⋆ ρ_ε)` for the planar bump of the given radius.
pub fn compute_c_eps_gpam(mollifier: &PlanarMollifier, epsilon: f64, cells: usize, radius: f64) -> Result<Estimate> {
    check_epsilon(epsilon)?;
    c_eps_gpam_from_eta(&mollifier.autocorrelation(cells)?, epsilon, radius)
}
