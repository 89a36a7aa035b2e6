//! Reference values computed independently of this crate and frozen here.
//!
//! * Interval heat kernels: eigenfunction expansions on `[−1, 1]` for
//!   `∂ₜ = ½∂ₓ²` (sine series for Dirichlet, cosine series plus the constant
//!   mode for Neumann), summed to 4000 modes in double precision. The
//!   crate uses the method of images, so the two representations are
//!   independent.
//! * Constants `a`, `c`: the mollifier sampled on cell-centred grids of
//!   256², 512² and 1024² cells, its autocorrelation formed by FFT
//!   convolution, paired with the integrands by a midpoint rule and
//!   Richardson-extrapolated (second-order convergence observed).

use spde_boundary::kernels::{interval_kernel, BoundaryCondition};
use spde_boundary::mollifier::MollifierSpec;
use spde_boundary::renorm::{compute_a, compute_c};

/// `(τ, x, y, Dirichlet, Neumann)`.
const INTERVAL_KERNELS: [(f64, f64, f64, f64, f64); 4] = [
    (0.1, 0.3, -0.5, 5.142410498884538e-02, 5.142433753818992e-02),
    (0.5, 0.9, 0.2, 9.462583017965802e-02, 5.966700677289911e-01),
    (2.0, -0.7, 0.4, 3.110788479663205e-02, 4.555765031318154e-01),
    (0.02, -0.95, -0.9, 1.042707650452268e+00, 4.257362996428304e+00),
];

#[test]
fn image_sums_match_eigenfunction_expansions() {
    for (tau, x, y, dirichlet, neumann) in INTERVAL_KERNELS {
        let d = interval_kernel(BoundaryCondition::Dirichlet, 8, tau, x, y);
        let n = interval_kernel(BoundaryCondition::Neumann, 8, tau, x, y);
        assert!((d.value - dirichlet).abs() < 1e-12, "Dirichlet τ={tau}: {} vs {dirichlet}", d.value);
        assert!((n.value - neumann).abs() < 1e-12, "Neumann τ={tau}: {} vs {neumann}", n.value);
        assert!(d.truncation_error_bound < 1e-12);
    }
}

#[test]
fn constant_a_of_the_symmetric_bump_matches_the_reference() {
    let eta = MollifierSpec::bump(1.0).unwrap().autocorrelation(96).unwrap();
    let a = compute_a(&eta);
    assert!((a.value - 0.110_465_2).abs() < 1e-6, "a = {}", a.value);
    assert!(compute_c(&eta).value.abs() < 1e-12);
}

#[test]
fn constants_of_a_sheared_bump_match_the_reference() {
    let eta = MollifierSpec::shifted(1.0, 0.5, 0.3).unwrap().autocorrelation(96).unwrap();
    let a = compute_a(&eta);
    let c = compute_c(&eta);
    assert!((a.value - 0.101_879_5).abs() < 1e-6, "a = {}", a.value);
    assert!((c.value - 0.034_004_9).abs() < 1e-6, "c = {}", c.value);
}
