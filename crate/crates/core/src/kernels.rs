//! Heat kernels: the Gaussian `N(x, σ)`, its spatial derivative, method of
//! images kernels on `[−1, 1]` and `(−1, 1)²`, and a finite-difference Robin
//! heat semigroup.
//!
//! The reflection group of the interval is generated by `y ↦ −2 − y` and
//! `y ↦ 2 − y`; its elements are the translations `y ↦ y + 4k` (sign `+1`)
//! and the reflections `y ↦ 4k + 2 − y` (sign `−1` for Dirichlet, `+1` for
//! Neumann). The truncated sum keeps `|k| ≤ M`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{config_err, domain_err, Result};
use crate::fd::{Boundary, Diffusion1d, TimeScheme};

/// `N(x, σ) = 1_{σ>0} (2πσ)^{−1/2} exp(−x²/(2σ))`.
#[inline]
pub fn gaussian(x: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        libm::exp(-x * x / (2.0 * sigma)) / libm::sqrt(2.0 * PI * sigma)
    } else {
        0.0
    }
}

/// `∂ₓP(t, x) = −(x/t) N(x, t)`, zero for `t ≤ 0`.
#[inline]
pub fn dx_free_kernel(t: f64, x: f64) -> f64 {
    if t > 0.0 {
        -(x / t) * gaussian(x, t)
    } else {
        0.0
    }
}

/// Closed form of the space-time convolution `(∂ₓP ∗ ∂ₓP)(t, x) = N(x,t)(x² − t)/t`.
#[inline]
pub fn dx_kernel_self_convolution(t: f64, x: f64) -> f64 {
    if t > 0.0 {
        gaussian(x, t) * (x * x - t) / t
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelDomain {
    /// `[−1, 1]`.
    Interval,
    /// `(−1, 1)²`.
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Image-sum heat kernel on the interval or the square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryKernelSpec {
    pub domain: KernelDomain,
    pub bc: BoundaryCondition,
    pub truncation_order: usize,
}

impl BoundaryKernelSpec {
    pub fn new(domain: KernelDomain, bc: BoundaryCondition, truncation_order: usize) -> Result<Self> {
        if truncation_order < 1 {
            return Err(config_err!("truncation order must be at least 1"));
        }
        Ok(Self { domain, bc, truncation_order })
    }

    /// Default truncation order 8.
    pub fn interval(bc: BoundaryCondition) -> Self {
        Self { domain: KernelDomain::Interval, bc, truncation_order: 8 }
    }

    pub fn square(bc: BoundaryCondition) -> Self {
        Self { domain: KernelDomain::Square, bc, truncation_order: 8 }
    }

    pub fn dimension(&self) -> usize {
        match self.domain {
            KernelDomain::Interval => 1,
            KernelDomain::Square => 2,
        }
    }
}

/// A kernel value together with a bound on the omitted images.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub truncation_error_bound: f64,
}

/// Bound on the images with `|k| > M`: for `x, y ∈ [−1, 1]` every omitted
/// image lies at distance at least `4|k| − 4` from `x`, and there are four of
/// them per `|k|` (two translations, two reflections).
fn tail_bound(m: usize, tau: f64) -> f64 {
    let mut acc = 0.0;
    let mut k = m + 1;
    loop {
        let term = 4.0 * gaussian(4.0 * k as f64 - 4.0, tau);
        acc += term;
        if term <= 1e-300 || term < 1e-17 * acc || k > m + 10_000 {
            break;
        }
        k += 1;
    }
    acc
}

/// Interval kernel `Σ_{|k|≤M} a_g N(x − g_k(y), τ)` for `τ = t − s > 0`.
pub fn interval_kernel(bc: BoundaryCondition, m: usize, tau: f64, x: f64, y: f64) -> KernelValue {
    let sign = match bc {
        BoundaryCondition::Dirichlet => -1.0,
        BoundaryCondition::Neumann => 1.0,
    };
    let mut value = 0.0;
    let m = m as i64;
    // Sum from the far images inwards so the dominant terms are added last.
    for a in (0..=m).rev() {
        let pair = [a, -a];
        let ks = if a == 0 { &pair[..1] } else { &pair[..] };
        for &k in ks {
            let shift = 4.0 * k as f64;
            value += gaussian(x - (y + shift), tau) + sign * gaussian(x - (shift + 2.0 - y), tau);
        }
    }
    KernelValue { value, truncation_error_bound: tail_bound(m as usize, tau) }
}

/// `∂ₓ` of the interval kernel (derivative in the first space argument).
pub fn interval_kernel_dx(bc: BoundaryCondition, m: usize, tau: f64, x: f64, y: f64) -> f64 {
    let sign = match bc {
        BoundaryCondition::Dirichlet => -1.0,
        BoundaryCondition::Neumann => 1.0,
    };
    let m = m as i64;
    let mut value = 0.0;
    for k in (-m..=m).rev() {
        let shift = 4.0 * k as f64;
        value += dx_free_kernel(tau, x - (y + shift)) + sign * dx_free_kernel(tau, x - (shift + 2.0 - y));
    }
    value
}

/// Method-of-images kernel `G(t, x; s, y)`; `x` and `y` have one component
/// on the interval and two on the square (where `G` is the product of the
/// interval kernels).
pub fn reflected_kernel(spec: &BoundaryKernelSpec, t: f64, x: &[f64], s: f64, y: &[f64]) -> Result<KernelValue> {
    if !(t > s) {
        return Err(domain_err!("reflected kernel needs t > s, got t = {t}, s = {s}"));
    }
    let d = spec.dimension();
    if x.len() != d || y.len() != d {
        return Err(domain_err!("expected {d}-dimensional points"));
    }
    for &p in x.iter().chain(y) {
        if !(-1.0..=1.0).contains(&p) {
            return Err(domain_err!("point coordinate {p} lies outside the closed domain"));
        }
    }
    let tau = t - s;
    let m = spec.truncation_order;
    let g1 = interval_kernel(spec.bc, m, tau, x[0], y[0]);
    if d == 1 {
        return Ok(g1);
    }
    let g2 = interval_kernel(spec.bc, m, tau, x[1], y[1]);
    let e = g1.truncation_error_bound * g2.value.abs()
        + g1.value.abs() * g2.truncation_error_bound
        + g1.truncation_error_bound * g2.truncation_error_bound;
    Ok(KernelValue { value: g1.value * g2.value, truncation_error_bound: e })
}

/// Options of the finite-difference Robin semigroup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupOptions {
    pub scheme: TimeScheme,
    /// Number of implicit time steps used to reach the final time.
    pub n_steps: usize,
}

impl Default for SemigroupOptions {
    fn default() -> Self {
        Self { scheme: TimeScheme::CrankNicolson, n_steps: 400 }
    }
}

/// Solve `∂ₜv = ½∂ₓ²v` on `[−1, 1]` with `∂ₓv(±1) = 2c± v(±1)` up to time
/// `t`, starting from the node values `f` (uniform grid including both end
/// points).
pub fn robin_semigroup_apply(
    coeffs: (f64, f64),
    t: f64,
    f: &[f64],
    opts: &SemigroupOptions,
) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(domain_err!("semigroup time must be non-negative, got {t}"));
    }
    if f.len() < 3 {
        return Err(config_err!("profile needs at least 3 nodes"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(domain_err!("profile contains non-finite values"));
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    if opts.n_steps == 0 {
        return Err(config_err!("at least one time step is required"));
    }
    let n_cells = f.len() - 1;
    let dx = 2.0 / n_cells as f64;
    let op = Diffusion1d::new(
        n_cells,
        dx,
        0.5,
        Boundary::Robin(2.0 * coeffs.0),
        Boundary::Robin(2.0 * coeffs.1),
    )?;
    let dt = t / opts.n_steps as f64;
    let theta = match opts.scheme {
        TimeScheme::BackwardEuler => 1.0,
        TimeScheme::CrankNicolson => 0.5,
    };
    let lu = op.implicit(theta * dt)?;
    let mut v = f.to_vec();
    let mut av = alloc::vec![0.0; v.len()];
    for _ in 0..opts.n_steps {
        if theta < 1.0 {
            op.apply(&v, &mut av);
            for (vi, ai) in v.iter_mut().zip(&av) {
                *vi += (1.0 - theta) * dt * ai;
            }
        }
        lu.solve_in_place(&mut v);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{Adaptive, GaussLegendre};

    #[test]
    fn gaussian_conventions() {
        assert!((gaussian(0.0, 1.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(gaussian(1.0, -0.5), 0.0);
        assert_eq!(gaussian(1.0, 0.0), 0.0);
        assert_eq!(gaussian(0.3, 0.7), gaussian(-0.3, 0.7));
        let q = Adaptive::with_tol(1e-14, 1e-13);
        let m = q.integrate_real_line(|x| gaussian(x, 0.37), 0.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_kernel_derivative_is_odd() {
        assert_eq!(dx_free_kernel(1.0, 0.0), 0.0);
        assert_eq!(dx_free_kernel(0.7, 0.4), -dx_free_kernel(0.7, -0.4));
        assert_eq!(dx_free_kernel(-1.0, 0.4), 0.0);
    }

    #[test]
    fn dirichlet_kernel_vanishes_on_the_boundary() {
        let spec = BoundaryKernelSpec::interval(BoundaryCondition::Dirichlet);
        for y in [-0.9, -0.2, 0.0, 0.5, 0.99] {
            let g = reflected_kernel(&spec, 0.3, &[1.0], 0.0, &[y]).unwrap();
            assert!(g.value.abs() < 1e-10);
            let g = reflected_kernel(&spec, 0.3, &[-1.0], 0.0, &[y]).unwrap();
            assert!(g.value.abs() < 1e-10);
        }
        assert!(reflected_kernel(&spec, 0.0, &[0.0], 0.0, &[0.0]).is_err());
    }

    #[test]
    fn neumann_kernel_preserves_mass() {
        let spec = BoundaryKernelSpec::interval(BoundaryCondition::Neumann);
        let q = Adaptive::with_tol(1e-13, 1e-12);
        let m = q
            .integrate(|x| reflected_kernel(&spec, 0.5, &[x], 0.0, &[0.3]).unwrap().value, -1.0, 1.0)
            .unwrap();
        assert!((m.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn square_kernel_reduces_to_free_kernel_at_short_times() {
        let spec = BoundaryKernelSpec::square(BoundaryCondition::Dirichlet);
        let g = reflected_kernel(&spec, 0.01, &[0.0, 0.0], 0.0, &[0.0, 0.0]).unwrap();
        let free = gaussian(0.0, 0.01) * gaussian(0.0, 0.01);
        assert!((g.value - free).abs() < 1e-12 + g.truncation_error_bound);
    }

    #[test]
    fn robin_semigroup_trivial_cases() {
        let f: Vec<f64> = (0..=40).map(|i| libm::sin(i as f64)).collect();
        let opts = SemigroupOptions::default();
        assert_eq!(robin_semigroup_apply((0.3, -0.2), 0.0, &f, &opts).unwrap(), f);
        let ones = alloc::vec![1.0; 41];
        let out = robin_semigroup_apply((0.0, 0.0), 0.7, &ones, &opts).unwrap();
        for v in out {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn robin_semigroup_matches_neumann_images() {
        // f = cos(πx/2) evolved to t = 0.2 with c± = 0.
        let n = 200;
        let f: Vec<f64> = (0..=n)
            .map(|i| libm::cos(0.5 * PI * (-1.0 + 2.0 * i as f64 / n as f64)))
            .collect();
        let opts = SemigroupOptions { scheme: TimeScheme::CrankNicolson, n_steps: 400 };
        let out = robin_semigroup_apply((0.0, 0.0), 0.2, &f, &opts).unwrap();
        let spec = BoundaryKernelSpec::interval(BoundaryCondition::Neumann);
        let gl = GaussLegendre::new(40);
        for &i in &[0usize, 37, 100, 163, 200] {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let mut oracle = 0.0;
            for w in 0..8 {
                let a = -1.0 + 0.25 * w as f64;
                oracle += gl.integrate(a, a + 0.25, |y| {
                    reflected_kernel(&spec, 0.2, &[x], 0.0, &[y]).unwrap().value * libm::cos(0.5 * PI * y)
                });
            }
            assert!((out[i] - oracle).abs() < 1e-4, "x = {x}: {} vs {oracle}", out[i]);
        }
    }
}
