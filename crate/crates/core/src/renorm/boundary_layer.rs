//! Boundary-layer functions `C₀ᵋ`, `B₀ᵋ` and the boundary masses `c̄⁻_ε`.
//!
//! # `C₀ᵋ` through a closed-form inner integral
//!
//! Write `R f(s,y) = f(s,−y)`, `q = f⁽²⁾ − R f⁽²⁾` and `p = f⁽²⁾ + R f⁽²⁾`,
//! i.e. `q(s,y) = sgn(y) ((x+|y|)/s) N(x+|y|, s)` and
//! `p(s,y) = ((x+|y|)/s) N(x+|y|, s)`. Expanding the squares and moving one
//! mollifier across the pairing (`η_ε = ρ̄_ε ∗ ρ_ε` is even) gives
//!
//! `C₀ᵋ(x) = 2⟨f⁽¹⁾, η_ε ∗ q⟩ + ⟨q, η_ε ∗ p⟩`.
//!
//! At `ε = 0` both pairings vanish (`⟨f⁽¹⁾, q⟩ = ∫f⁽¹⁾f⁽²⁾ = 0` because
//! `f⁽¹⁾` and `Rf⁽²⁾` have disjoint supports, and `sgn(y)p²` is odd), and the
//! second pairing vanishes identically when `η` is even in `y`. Parabolic
//! scaling gives `C₀ᵋ(x) = ε⁻¹ Φ(x/ε)` with
//!
//! `Φ(ξ) = 2∫η(w) H(w) dw + ∫η(w) H₂(w) dw`,
//! `H(w) = ∫ f⁽¹⁾(z) q(z−w) dz`, `H₂(w) = ∫ q(z) p(z−w) dz` (at `x = ξ`).
//!
//! For fixed time `s` the `y`-integrals in `H` and `H₂` are sums of the
//! Gaussian block
//!
//! `J(a,b; μ₁,σ₁, μ₂,σ₂) = ∫_a^b (y−μ₁)(y−μ₂) N(y−μ₁,σ₁) N(y−μ₂,σ₂) dy / (σ₁σ₂)`,
//!
//! which the product identity `N(y−μ₁,σ₁)N(y−μ₂,σ₂) = N(μ₁−μ₂,σ₁+σ₂) N(y−m,v)`
//! reduces to truncated Gaussian moments. Only the time integral and the
//! pairing with `η` are done numerically.
//!
//! # `B₀ᵋ`
//!
//! With `h_Q(s,y) = ∂ₓG(t,x; s,y) 1_Q(s) 1_D(y)` for the reflected kernel
//! `G`, `B₀ᵋ(t,x) = ⟨h_past, η_ε ∗ (h_past + 2 h_present)⟩` where "past" is
//! `s < 0` and "present" is `0 ≤ s < t`; `B₀ = ‖h_past‖²`.

use alloc::vec::Vec;

use crate::error::{config_err, domain_err, Result};
use crate::kernels::{dx_free_kernel, gaussian, BoundaryCondition};
use crate::mollifier::{Autocorrelation, MollifierSpec};
use crate::quad::{Adaptive, Cubature, Estimate, GaussLegendre, Rect};

/// `e^{−1/z} / (e^{−1/z} + e^{−1/(1−z)})`: a C∞ step from 0 (`z ≤ 0`) to 1
/// (`z ≥ 1`).
pub(crate) fn smooth_step(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        let a = libm::exp(-1.0 / z);
        let b = libm::exp(-1.0 / (1.0 - z));
        a / (a + b)
    }
}

/// Smooth symmetric cutoff `χ`, equal to 1 on `|x| ≤ inner` and 0 on
/// `|x| ≥ outer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffFunction {
    inner: f64,
    outer: f64,
}

impl CutoffFunction {
    /// The cutoff with radii `1/8` and `1/4`.
    pub fn standard() -> Self {
        Self { inner: 0.125, outer: 0.25 }
    }

    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(config_err!("cutoff radii must satisfy 0 < inner < outer, got {inner}, {outer}"));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    pub fn eval(&self, x: f64) -> f64 {
        smooth_step((self.outer - x.abs()) / (self.outer - self.inner))
    }
}

impl Default for CutoffFunction {
    fn default() -> Self {
        Self::standard()
    }
}

/// `erfc`-based `½[Erf(zb) − Erf(za)]` without cancellation in the tails.
fn gauss_mass(za: f64, zb: f64) -> f64 {
    if za >= 0.0 {
        0.5 * (libm::erfc(za) - libm::erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (libm::erfc(-zb) - libm::erfc(-za))
    } else {
        0.5 * (libm::erf(zb) - libm::erf(za))
    }
}

/// The Gaussian block `J(a,b; μ₁,σ₁, μ₂,σ₂)`; `b` may be `+∞`.
pub fn j_block(a: f64, b: f64, mu1: f64, s1: f64, mu2: f64, s2: f64) -> f64 {
    if !(s1 > 0.0 && s2 > 0.0) || !(b > a) {
        return 0.0;
    }
    let amp = gaussian(mu1 - mu2, s1 + s2);
    if amp == 0.0 {
        return 0.0;
    }
    let m = (s2 * mu1 + s1 * mu2) / (s1 + s2);
    let v = s1 * s2 / (s1 + s2);
    let (d1, d2) = (m - mu1, m - mu2);
    let (alpha, beta) = (a - m, b - m);
    let r = libm::sqrt(2.0 * v);
    let m0 = gauss_mass(alpha / r, beta / r);
    let na = gaussian(alpha, v);
    let (nb, bnb) = if beta.is_finite() {
        let nb = gaussian(beta, v);
        (nb, beta * nb)
    } else {
        (0.0, 0.0)
    };
    let m1 = v * (na - nb);
    let m2 = v * m0 + v * (alpha * na - bnb);
    amp / (s1 * s2) * (m2 + (d1 + d2) * m1 + d1 * d2 * m0)
}

/// The `ε`-independent part of `C₀ᵋ` for one mollifier autocorrelation.
#[derive(Clone, Debug)]
pub struct BoundaryLayer {
    eta: Autocorrelation,
    symmetric: bool,
    /// Absolute tolerance of the `w`-cubature per quadrant.
    pub outer_tol: f64,
    /// Absolute tolerance of the time integrals.
    pub inner_tol: f64,
}

impl BoundaryLayer {
    pub fn new(eta: &Autocorrelation) -> Self {
        Self { eta: eta.clone(), symmetric: eta.is_y_symmetric(), outer_tol: 1e-5, inner_tol: 1e-10 }
    }

    pub fn autocorrelation(&self) -> &Autocorrelation {
        &self.eta
    }

    /// `∫ f⁽¹⁾(s,·) q(s − w_s, · − w_y)` at fixed time `s`.
    pub fn g1(xi: f64, s: f64, ws: f64, wy: f64) -> f64 {
        let s2 = s - ws;
        if s <= 0.0 || s2 <= 0.0 {
            return 0.0;
        }
        let mut v = -j_block(wy.max(0.0), f64::INFINITY, xi, s, wy - xi, s2);
        if wy > 0.0 {
            v -= j_block(0.0, wy, xi, s, xi + wy, s2);
        }
        v
    }

    /// `∫ q(s,·) p(s − w_s, · − w_y)` at fixed time `s`.
    pub fn g2(xi: f64, s: f64, ws: f64, wy: f64) -> f64 {
        let s2 = s - ws;
        if s <= 0.0 || s2 <= 0.0 {
            return 0.0;
        }
        let inf = f64::INFINITY;
        // Pieces of the line cut at 0 and w_y: (interval, μ_q, μ_p, sign of p).
        let (lo, hi) = if wy > 0.0 { (0.0, wy) } else { (wy, 0.0) };
        let pieces: [(f64, f64); 3] = [(-inf, lo), (lo, hi), (hi, inf)];
        let mut acc = 0.0;
        for (a, b) in pieces {
            if !(b > a) {
                continue;
            }
            let mid = if a.is_finite() && b.is_finite() {
                0.5 * (a + b)
            } else if a.is_finite() {
                a + 1.0
            } else {
                b - 1.0
            };
            let mu_q = if mid > 0.0 { -xi } else { xi };
            let (mu_p, sign_p) = if mid > wy { (wy - xi, 1.0) } else { (wy + xi, -1.0) };
            // J integrates over [a, b]; mirror the lower half-line.
            let val = if a == -inf {
                // ∫_{-∞}^b (y−μ₁)(y−μ₂)… = ∫_{−b}^{∞} (u+μ₁)(u+μ₂)… with u = −y.
                j_block(-b, inf, -mu_q, s, -mu_p, s2)
            } else {
                j_block(a, b, mu_q, s, mu_p, s2)
            };
            acc += sign_p * val;
        }
        acc
    }

    fn time_integral(&self, xi: f64, ws: f64, wy: f64, g: fn(f64, f64, f64, f64) -> f64) -> f64 {
        let start = ws.max(0.0);
        let end = start + 4.0 * (xi + 2.0) * (xi + 2.0) + 8.0;
        let rule = Adaptive { abs_tol: self.inner_tol, rel_tol: 1e-9, max_intervals: 2000 };
        let head = rule.integrate(|s| g(xi, s, ws, wy), start, end);
        // The integrand decays like s^{−3/2}; s = end/u² makes the tail smooth.
        let tail = rule.integrate(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                g(xi, end / (u * u), ws, wy) * 2.0 * end / (u * u * u)
            },
            0.0,
            1.0,
        );
        match (head, tail) {
            (Ok(h), Ok(t)) => h.value + t.value,
            _ => f64::NAN,
        }
    }

    /// `H(w) = ∫ f⁽¹⁾(z) q(z − w) dz` at `x = ξ`.
    pub fn h(&self, xi: f64, ws: f64, wy: f64) -> f64 {
        self.time_integral(xi, ws, wy, Self::g1)
    }

    /// `H₂(w) = ∫ q(z) p(z − w) dz` at `x = ξ`.
    pub fn h2(&self, xi: f64, ws: f64, wy: f64) -> f64 {
        self.time_integral(xi, ws, wy, Self::g2)
    }

    /// `Φ(ξ) = ε C₀ᵋ(εξ)`, independent of `ε`.
    pub fn phi(&self, xi: f64) -> Result<Estimate> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(domain_err!("the boundary-layer profile needs ξ > 0, got {xi}"));
        }
        let (sm, ym) = self.eta.support();
        let cub = Cubature::new(6, 7);
        let symmetric = self.symmetric;
        let integrand = |ws: f64, wy: f64| {
            let e = self.eta.eval(ws, wy);
            if e == 0.0 {
                return 0.0;
            }
            let mut v = 2.0 * self.h(xi, ws, wy);
            if !symmetric {
                v += self.h2(xi, ws, wy);
            }
            e * v
        };
        let mut acc = Estimate::default();
        let quadrants = if self.eta.is_time_collapsed() {
            Vec::new()
        } else {
            alloc::vec![
                Rect::new(-sm, 0.0, -ym, 0.0),
                Rect::new(0.0, sm, -ym, 0.0),
                Rect::new(-sm, 0.0, 0.0, ym),
                Rect::new(0.0, sm, 0.0, ym),
            ]
        };
        if self.eta.is_time_collapsed() {
            // η = δ(s) η̂(y): a one-dimensional pairing.
            let rule = Adaptive { abs_tol: self.outer_tol, rel_tol: 1e-8, max_intervals: 2000 };
            let f = |wy: f64| {
                let e = self.eta.eval(0.0, wy);
                if e == 0.0 {
                    return 0.0;
                }
                let mut v = 2.0 * self.h(xi, 0.0, wy);
                if !symmetric {
                    v += self.h2(xi, 0.0, wy);
                }
                e * v
            };
            acc += rule.integrate_with_breaks(f, -ym, ym, &[0.0])?;
        }
        for q in quadrants {
            acc += cub.integrate(integrand, q, self.outer_tol);
        }
        if !acc.value.is_finite() {
            return Err(crate::Error::Quadrature { value: acc.value, error: acc.error, evals: acc.evals });
        }
        Ok(acc)
    }

    /// `C₀ᵋ(x) = ε⁻¹ Φ(x/ε)`.
    pub fn c0_eps(&self, x: f64, epsilon: f64) -> Result<Estimate> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(config_err!("epsilon must be positive, got {epsilon}"));
        }
        if !(x > 0.0) {
            return Err(domain_err!("C₀ᵋ is evaluated at x > 0 (distance to the boundary), got {x}"));
        }
        let p = self.phi(x / epsilon)?;
        Ok(Estimate::new(p.value / epsilon, p.error / epsilon, p.evals))
    }

    /// Tabulate `Φ` on Gauss–Legendre panels covering `[0, xi_max]`: fine
    /// panels near the boundary, width ½ beyond `ξ = 1`.
    pub fn profile(&self, xi_max: f64) -> Result<PhiProfile> {
        if !(xi_max > 0.0 && xi_max.is_finite()) {
            return Err(config_err!("profile range must be positive, got {xi_max}"));
        }
        let mut edges: Vec<f64> = alloc::vec![0.0, 0.125, 0.25, 0.5, 1.0];
        edges.retain(|&e| e < xi_max);
        let mut e = 1.5;
        while e < xi_max {
            edges.push(e);
            e += 0.5;
        }
        edges.retain(|&e| e < xi_max);
        edges.push(xi_max);
        let gl = GaussLegendre::new(PROFILE_ORDER);
        let mut nodes = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (xi, weight) in gl.mapped(a, b) {
                nodes.push(ProfileNode { xi, weight, phi: self.phi(xi)? });
            }
        }
        Ok(PhiProfile { nodes, xi_max })
    }

    /// `∫₀^∞ C₀ᵋ(x) χ(x) dx = ∫₀^∞ Φ(ξ) χ(εξ) dξ`.
    pub fn c_minus(&self, epsilon: f64, chi: &CutoffFunction) -> Result<Estimate> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(config_err!("epsilon must be positive, got {epsilon}"));
        }
        self.profile(chi.outer_radius() / epsilon)?.c_minus(epsilon, chi)
    }
}

const PROFILE_ORDER: usize = 6;

/// One quadrature node of a tabulated profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileNode {
    pub xi: f64,
    pub weight: f64,
    pub phi: Estimate,
}

/// `Φ` tabulated on `[0, ξ_max]`; reusable for every `ε` with
/// `outer_radius(χ)/ε ≤ ξ_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiProfile {
    nodes: Vec<ProfileNode>,
    xi_max: f64,
}

impl PhiProfile {
    pub fn nodes(&self) -> &[ProfileNode] {
        &self.nodes
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    /// `∫ Φ(ξ) χ(εξ) dξ` from the table.
    pub fn c_minus(&self, epsilon: f64, chi: &CutoffFunction) -> Result<Estimate> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(config_err!("epsilon must be positive, got {epsilon}"));
        }
        if chi.outer_radius() / epsilon > self.xi_max * (1.0 + 1e-12) {
            return Err(config_err!(
                "profile tabulated up to ξ = {} but the cutoff reaches {}",
                self.xi_max,
                chi.outer_radius() / epsilon
            ));
        }
        let mut acc = Estimate::default();
        for n in &self.nodes {
            let c = chi.eval(epsilon * n.xi);
            acc += Estimate::new(n.weight * c * n.phi.value, n.weight * c * n.phi.error, n.phi.evals);
        }
        Ok(acc)
    }

    /// `∫₀^{ξ_max} Φ` (no cutoff).
    pub fn mass(&self) -> Estimate {
        let mut acc = Estimate::default();
        for n in &self.nodes {
            acc += Estimate::new(n.weight * n.phi.value, n.weight * n.phi.error, n.phi.evals);
        }
        acc
    }
}

/// `C₀ᵋ(x)` for the mollifier `spec` (autocorrelation on `cells` cells).
pub fn compute_c0_eps(spec: &MollifierSpec, x: f64, epsilon: f64, cells: usize) -> Result<Estimate> {
    BoundaryLayer::new(&spec.autocorrelation(cells)?).c0_eps(x, epsilon)
}

/// `c̄⁻_ε`-type boundary mass `∫ C₀ᵋ χ` for the mollifier `spec`.
pub fn estimate_c_minus(spec: &MollifierSpec, epsilon: f64, chi: &CutoffFunction, cells: usize) -> Result<Estimate> {
    BoundaryLayer::new(&spec.autocorrelation(cells)?).c_minus(epsilon, chi)
}

/// Number of image pairs needed for `∂ₓG` at time gap `tau` to 1e−16.
fn images_for(tau: f64) -> i64 {
    let reach = 9.0 * libm::sqrt(tau) + 2.0;
    (libm::ceil(reach / 4.0) as i64).clamp(1, 64)
}

/// `∂ₓG(t,x; s,y)` at gap `tau` with automatically truncated images.
fn kernel_dx(bc: BoundaryCondition, tau: f64, x: f64, y: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let sign = match bc {
        BoundaryCondition::Dirichlet => -1.0,
        BoundaryCondition::Neumann => 1.0,
    };
    let m = images_for(tau);
    let mut v = 0.0;
    for k in (-m..=m).rev() {
        let shift = 4.0 * k as f64;
        v += dx_free_kernel(tau, x - (y + shift)) + sign * dx_free_kernel(tau, x - (shift + 2.0 - y));
    }
    v
}

/// Horizon of the past-time integral: `∂ₓG` decays like `e^{−π²τ/8}`.
const PAST_HORIZON: f64 = 16.0;

/// `B₀ᵋ(t, x)` on the interval `[−1, 1]` with Dirichlet or Neumann kernel;
/// `epsilon = 0` gives `B₀(t, x) = ‖h_past‖²`.
pub fn compute_b0_eps(
    spec: &MollifierSpec,
    bc: BoundaryCondition,
    t: f64,
    x: f64,
    epsilon: f64,
    cells: usize,
) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain_err!("B₀ needs t > 0, got {t}"));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(domain_err!("x = {x} lies outside [−1, 1]"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(config_err!("epsilon must be non-negative, got {epsilon}"));
    }
    let cub = Cubature::new(6, 6);
    let tol = 1e-8;
    if epsilon == 0.0 {
        let f = |v: f64, y: f64| {
            let h = kernel_dx(bc, t + v, x, y);
            h * h
        };
        let mut acc = Estimate::default();
        for (a, b) in [(0.0, t), (t, 4.0 * t), (4.0 * t, PAST_HORIZON)] {
            if b > a {
                acc += cub.integrate(f, Rect::new(a, b, -1.0, 1.0), tol);
            }
        }
        return Ok(acc);
    }
    let eta = spec.autocorrelation(cells)?;
    let (us, uy) = eta.support();
    let collapsed = eta.is_time_collapsed();
    let e2 = epsilon * epsilon;
    let gl = GaussLegendre::new(8);
    // Weight of the second factor at source time s′: past 1, present 2.
    let second = |sp: f64, yp: f64| -> f64 {
        if !(-1.0..=1.0).contains(&yp) || sp >= t {
            return 0.0;
        }
        let w = if sp < 0.0 { 1.0 } else { 2.0 };
        w * kernel_dx(bc, t - sp, x, yp)
    };
    // (η_ε ∗ k)(s, y) = ∫ η(u) k(s − ε²u_s, y − εu_y) du, split at the jumps.
    let smoothed = |s: f64, y: f64| -> f64 {
        let mut ys = alloc::vec![-uy, uy];
        for jump in [(y - 1.0) / epsilon, (y + 1.0) / epsilon] {
            if jump > -uy && jump < uy {
                ys.push(jump);
            }
        }
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        if collapsed {
            let mut acc = 0.0;
            for w in ys.windows(2) {
                acc += gl.integrate(w[0], w[1], |v| eta.eval(0.0, v) * second(s, y - epsilon * v));
            }
            return acc;
        }
        let mut ss = alloc::vec![-us, us];
        for jump in [s / e2, (s - t) / e2] {
            if jump > -us && jump < us {
                ss.push(jump);
            }
        }
        ss.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let mut acc = 0.0;
        for a in ss.windows(2) {
            for b in ys.windows(2) {
                acc += gl.integrate(a[0], a[1], |u| {
                    gl.integrate(b[0], b[1], |v| eta.eval(u, v) * second(s - e2 * u, y - epsilon * v))
                });
            }
        }
        acc
    };
    let f = |v: f64, y: f64| {
        let s = -v;
        kernel_dx(bc, t + v, x, y) * smoothed(s, y)
    };
    let reach_s = if collapsed { 0.0 } else { e2 * us };
    let reach_y = (epsilon * uy).min(1.0);
    let mut vs: Vec<f64> = alloc::vec![0.0, reach_s, t, 4.0 * t, PAST_HORIZON];
    vs.retain(|&v| v <= PAST_HORIZON);
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    vs.dedup();
    let mut ys: Vec<f64> = alloc::vec![-1.0, -1.0 + reach_y, 1.0 - reach_y, 1.0];
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    ys.dedup();
    let mut acc = Estimate::default();
    for a in vs.windows(2) {
        for b in ys.windows(2) {
            if a[1] > a[0] && b[1] > b[0] {
                acc += cub.integrate(f, Rect::new(a[0], a[1], b[0], b[1]), tol);
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        let chi = CutoffFunction::standard();
        assert_eq!(chi.eval(0.1), 1.0);
        assert_eq!(chi.eval(-0.125), 1.0);
        assert_eq!(chi.eval(0.25), 0.0);
        assert_eq!(chi.eval(0.3), 0.0);
        assert_eq!(chi.eval(0.2), chi.eval(-0.2));
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = chi.eval(0.125 + 0.00125 * i as f64);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn j_block_matches_direct_quadrature() {
        let q = Adaptive::with_tol(1e-14, 1e-13);
        for &(a, b, m1, s1, m2, s2) in &[
            (0.0, 1.5, 0.3, 0.7, -0.4, 0.2),
            (-2.0, 0.5, 1.0, 0.05, 0.9, 1.3),
            (0.2, f64::INFINITY, 0.1, 2.0, 1.5, 0.4),
        ] {
            let f = |y: f64| (y - m1) * (y - m2) * gaussian(y - m1, s1) * gaussian(y - m2, s2) / (s1 * s2);
            let direct = if b.is_finite() {
                q.integrate(f, a, b).unwrap().value
            } else {
                q.integrate_to_infinity(f, a).unwrap().value
            };
            let closed = j_block(a, b, m1, s1, m2, s2);
            assert!((direct - closed).abs() < 1e-11, "{direct} vs {closed}");
        }
    }

    #[test]
    fn inner_integrals_match_brute_force() {
        // Direct y-quadrature of f⁽¹⁾ q(· − w) and q p(· − w) at one time.
        let (xi, s, ws, wy) = (0.7, 0.6, -0.3, 0.4);
        let q = |ss: f64, y: f64| {
            let r = xi + y.abs();
            if ss <= 0.0 { 0.0 } else { y.signum() * r / ss * gaussian(r, ss) }
        };
        let p = |ss: f64, y: f64| {
            let r = xi + y.abs();
            if ss <= 0.0 { 0.0 } else { r / ss * gaussian(r, ss) }
        };
        let rule = Adaptive::with_tol(1e-14, 1e-13);
        let brks = [0.0, wy];
        let d1 = rule
            .integrate_with_breaks(|y| super::super::ffunctions::f1_kernel(xi, s, y) * q(s - ws, y - wy), -30.0, 30.0, &brks)
            .unwrap()
            .value;
        assert!((d1 - BoundaryLayer::g1(xi, s, ws, wy)).abs() < 1e-11);
        let d2 = rule.integrate_with_breaks(|y| q(s, y) * p(s - ws, y - wy), -30.0, 30.0, &brks).unwrap().value;
        assert!((d2 - BoundaryLayer::g2(xi, s, ws, wy)).abs() < 1e-11, "{d2} {}", BoundaryLayer::g2(xi, s, ws, wy));
    }

    #[test]
    fn h_vanishes_at_the_origin() {
        let eta = MollifierSpec::bump(1.0).unwrap().autocorrelation(16).unwrap();
        let layer = BoundaryLayer::new(&eta);
        for xi in [0.3, 1.0, 3.0] {
            assert!(layer.h(xi, 0.0, 0.0).abs() < 1e-8, "{}", layer.h(xi, 0.0, 0.0));
            assert!(layer.h2(xi, 0.0, 0.0).abs() < 1e-8);
        }
    }

    #[test]
    fn spatial_only_profile_has_mass_minus_one_half() {
        let eta = MollifierSpec::spatial_only(1.0).unwrap().autocorrelation(64).unwrap();
        let layer = BoundaryLayer::new(&eta);
        let profile = layer.profile(10.0).unwrap();
        // Φ ~ −K/ξ² at large ξ, so the tail beyond 10 is ≈ 10 Φ(10).
        let tail = 10.0 * layer.phi(10.0).unwrap().value;
        let total = profile.mass().value + tail;
        assert!((total + 0.5).abs() < 2e-3, "{total}");
        let chi = CutoffFunction::standard();
        let c1 = profile.c_minus(0.1, &chi).unwrap().value;
        let c2 = profile.c_minus(0.05, &chi).unwrap().value;
        assert!((c2 + 0.5).abs() < (c1 + 0.5).abs());
        assert!(profile.c_minus(0.01, &chi).is_err());
    }
}
