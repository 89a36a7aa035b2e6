//! Renormalisation constants.
//!
//! * boundary constants `a = ⟨η, ½ − ½Erf(|y|/√(2|s|)) − 2|y|N(y,s)⟩` and
//!   `c = 2⟨η, y N(y,s)⟩`, together with the cross-checks `a = 2⟨η, F⟩` and
//!   `c = ⟨η, F₀⟩`;
//! * bulk constants `C_ε` for KPZ and generalised PAM ([`bulk`]);
//! * the boundary-layer functions `C₀ᵋ`, `B₀ᵋ` and the boundary mass `c̄⁻_ε`
//!   ([`boundary_layer`]).
//!
//! Every integral against `η = ρ̄ ∗ ρ` runs over the lattice cells of the
//! [`Autocorrelation`], on which its interpolant is a polynomial; the lattice
//! lines include the axes `s = 0` and `y = 0` where the integrands are not
//! smooth, and cells touching the origin are refined adaptively.

pub mod boundary_layer;
pub mod bulk;
pub mod ffunctions;

use alloc::vec::Vec;

use crate::error::Result;
use crate::mollifier::{Autocorrelation, MollifierSpec};
use crate::quad::{Adaptive, Cubature, Estimate, GaussLegendre, Rect};

pub use boundary_layer::{BoundaryLayer, CutoffFunction, PhiProfile};
pub use bulk::{compute_c_eps_gpam, compute_c_eps_kpz, KpzTruncation};
pub use ffunctions::{f0, f1, f1_kernel, f2, f2_kernel, f3_kernel, f_total};

/// Accuracy knobs of the lattice quadrature against `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss–Legendre order per lattice cell and axis.
    pub order: usize,
    /// Absolute tolerance per lattice cell.
    pub cell_tol: f64,
    /// Maximal quadtree depth inside a cell.
    pub max_depth: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { order: 6, cell_tol: 1e-15, max_depth: 8 }
    }
}

/// `∫ η(s,y) g(s,y) ds dy` over the lattice cells of `eta`, without an
/// interpolation-error term. For a time-collapsed `η` the integral is
/// `∫ η̂(y) g(0,y) dy`.
fn lattice_integral<G: Fn(f64, f64) -> f64>(eta: &Autocorrelation, g: &G, opts: &QuadratureOptions) -> Estimate {
    let (hs, hy) = eta.step();
    let (ns, ny) = eta.half_extent();
    let (ns, ny) = (ns as isize, ny as isize);
    if eta.is_time_collapsed() {
        let gl = GaussLegendre::new(opts.order.max(2) * 2);
        let mut acc = Estimate::default();
        for l in -ny..ny {
            let (y0, y1) = (l as f64 * hy, (l + 1) as f64 * hy);
            let v = gl.integrate(y0, y1, |y| eta.eval(0.0, y) * g(0.0, y));
            acc += Estimate::new(v, 0.0, gl.len());
        }
        return acc;
    }
    let cub = Cubature::new(opts.order, opts.max_depth);
    let mut values = Vec::with_capacity((4 * ns * ny) as usize);
    let mut acc = Estimate::default();
    for k in -ns..ns {
        for l in -ny..ny {
            // The interpolant on this cell uses nodes k-1..k+2, l-1..l+2.
            let mut any = false;
            'scan: for a in -1..=2 {
                for b in -1..=2 {
                    if eta.at(k + a, l + b) != 0.0 {
                        any = true;
                        break 'scan;
                    }
                }
            }
            if !any {
                continue;
            }
            let rect = Rect::new(k as f64 * hs, (k + 1) as f64 * hs, l as f64 * hy, (l + 1) as f64 * hy);
            let est = cub.integrate(|s, y| eta.eval(s, y) * g(s, y), rect, opts.cell_tol);
            values.push(est.value);
            acc.error += est.error;
            acc.evals += est.evals;
        }
    }
    acc.value = crate::quad::pairwise_sum(&values);
    acc
}

/// `∫ η g` with an error estimate that adds the cell-quadrature error and a
/// Richardson estimate `|I(h) − I(2h)|/15` of the interpolation error.
pub fn integrate_against_eta<G: Fn(f64, f64) -> f64>(
    eta: &Autocorrelation,
    g: G,
    opts: &QuadratureOptions,
) -> Estimate {
    let fine = lattice_integral(eta, &g, opts);
    let coarse = lattice_integral(&eta.coarsened(), &g, opts);
    Estimate::new(fine.value, fine.error + (fine.value - coarse.value).abs() / 15.0, fine.evals + coarse.evals)
}

/// `a` from its defining integrand (with the `σ > 0` indicator of `N`).
pub fn compute_a(eta: &Autocorrelation) -> Estimate {
    integrate_against_eta(eta, ffunctions::a_integrand, &QuadratureOptions::default())
}

/// `a` computed as `2⟨η, F⟩`; equal to [`compute_a`] because the two
/// integrands differ by a function that is odd under `(s,y) ↦ (−s,−y)`.
pub fn compute_a_via_f(eta: &Autocorrelation) -> Estimate {
    let e = integrate_against_eta(
        eta,
        |s, y| 2.0 * (ffunctions::f1_unchecked(s, y) + ffunctions::f2_unchecked(s, y)),
        &QuadratureOptions::default(),
    );
    e
}

/// `c = 2⟨η, y N(y,s)⟩`.
pub fn compute_c(eta: &Autocorrelation) -> Estimate {
    integrate_against_eta(eta, ffunctions::c_integrand, &QuadratureOptions::default())
}

/// `c = ⟨η, F₀⟩`; the `Erf` part of `F₀` is odd and integrates to zero.
pub fn compute_c_via_f0(eta: &Autocorrelation) -> Estimate {
    integrate_against_eta(eta, ffunctions::f0_unchecked, &QuadratureOptions::default())
}

/// A constant together with its quadrature error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub error: f64,
}

impl From<Estimate> for Constant {
    fn from(e: Estimate) -> Self {
        Self { value: e.value, error: e.error }
    }
}

/// The full set of constants for one mollifier and a list of `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct RenormConstants {
    pub a: Constant,
    /// `2⟨η, F⟩`, which must agree with `a`.
    pub a_via_f: Constant,
    pub c: Constant,
    /// `⟨η, F₀⟩`, which must agree with `c`.
    pub c_via_f0: Constant,
    pub epsilons: Vec<f64>,
    pub c_eps_kpz: Vec<Constant>,
    pub c_eps_gpam: Vec<Constant>,
    pub c_minus_eps: Vec<Constant>,
}

/// Which of the (expensive) per-`ε` quantities to compute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantsRequest {
    pub kpz_truncation: KpzTruncation,
    /// Support radius of the planar mollifier for the gPAM constant.
    pub gpam_radius: f64,
    /// Truncation radius of the 2D Green function.
    pub gpam_truncation: f64,
    pub with_c_minus: bool,
}

impl Default for ConstantsRequest {
    fn default() -> Self {
        Self { kpz_truncation: KpzTruncation::None, gpam_radius: 1.0, gpam_truncation: 1.0, with_c_minus: true }
    }
}

/// Compute every constant for `spec` at the given `ε` values.
pub fn compute_constants(
    spec: &MollifierSpec,
    cells: usize,
    epsilons: &[f64],
    req: &ConstantsRequest,
) -> Result<RenormConstants> {
    let eta = spec.autocorrelation(cells)?;
    let planar = crate::mollifier::PlanarMollifier::new(req.gpam_radius)?;
    let planar_eta = planar.autocorrelation(cells)?;
    let chi = CutoffFunction::standard();
    let profile = match (req.with_c_minus, epsilons.iter().cloned().reduce(f64::min)) {
        (true, Some(e_min)) if e_min > 0.0 => Some(BoundaryLayer::new(&eta).profile(chi.outer_radius() / e_min)?),
        _ => None,
    };
    let mut c_eps_kpz = Vec::with_capacity(epsilons.len());
    let mut c_eps_gpam = Vec::with_capacity(epsilons.len());
    let mut c_minus_eps = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        c_eps_kpz.push(bulk::c_eps_kpz_from_eta(&eta, e, req.kpz_truncation)?.into());
        c_eps_gpam.push(bulk::c_eps_gpam_from_eta(&planar_eta, e, req.gpam_truncation)?.into());
        if let Some(profile) = &profile {
            c_minus_eps.push(profile.c_minus(e, &chi)?.into());
        }
    }
    Ok(RenormConstants {
        a: compute_a(&eta).into(),
        a_via_f: compute_a_via_f(&eta).into(),
        c: compute_c(&eta).into(),
        c_via_f0: compute_c_via_f0(&eta).into(),
        epsilons: epsilons.to_vec(),
        c_eps_kpz,
        c_eps_gpam,
        c_minus_eps,
    })
}

/// Shared adaptive rule for the nested integrals of this module.
pub(crate) fn adaptive(abs_tol: f64) -> Adaptive {
    Adaptive { abs_tol, rel_tol: 1e-10, max_intervals: 4000 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_only_constants_vanish() {
        let eta = MollifierSpec::spatial_only(1.0).unwrap().autocorrelation(64).unwrap();
        assert!(compute_a(&eta).value.abs() < 1e-12);
        assert!(compute_c(&eta).value.abs() < 1e-12);
    }

    #[test]
    fn symmetric_bump_has_c_zero_and_consistent_a() {
        let eta = MollifierSpec::bump(1.0).unwrap().autocorrelation(48).unwrap();
        let a = compute_a(&eta);
        let af = compute_a_via_f(&eta);
        assert!(a.value.abs() <= 0.5);
        assert!((a.value - af.value).abs() <= a.error + af.error + 1e-12, "{a:?} {af:?}");
        assert!(compute_c(&eta).value.abs() < 1e-12);
    }

    #[test]
    fn sheared_bump_c_changes_sign_with_the_shear() {
        let plus = MollifierSpec::shifted(1.0, 0.0, 0.3).unwrap().autocorrelation(48).unwrap();
        let minus = MollifierSpec::shifted(1.0, 0.0, -0.3).unwrap().autocorrelation(48).unwrap();
        let cp = compute_c(&plus);
        let cm = compute_c(&minus);
        assert!(cp.value.abs() > 1e-3);
        assert!((cp.value + cm.value).abs() < 1e-10);
        let cf = compute_c_via_f0(&plus);
        assert!((cp.value - cf.value).abs() <= cp.error + cf.error + 1e-12);
    }
}
