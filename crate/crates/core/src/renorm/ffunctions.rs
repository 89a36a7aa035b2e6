//! The kernels integrated against the autocorrelation: `f⁽¹⁾, f⁽²⁾, f⁽³⁾`,
//! the closed forms `F₁, F₂, F = F₁ + F₂, F₀` and the integrands of the
//! constants `a` and `c`.
//!
//! `Erf` is the standard error function `(2/√π)∫₀ᶻ e^{−u²} du`, which is the
//! normalisation for which `F₁(s,y) = ½∫_{|y|/√|s|}^∞ N(q,1) dq`.

use crate::error::{domain_err, Result};
use crate::kernels::gaussian;

/// `Erf(z)`.
#[inline]
pub fn erf(z: f64) -> f64 {
    libm::erf(z)
}

/// `f⁽¹⁾ₓ(s,y) = 1_{y>0} ((x−y)/s) N(x−y, s)` (zero for `s ≤ 0`).
#[inline]
pub fn f1_kernel(x: f64, s: f64, y: f64) -> f64 {
    if y > 0.0 && s > 0.0 {
        (x - y) / s * gaussian(x - y, s)
    } else {
        0.0
    }
}

/// `f⁽²⁾ₓ(s,y) = 1_{y>0} ((x+y)/s) N(x+y, s)`.
#[inline]
pub fn f2_kernel(x: f64, s: f64, y: f64) -> f64 {
    if y > 0.0 && s > 0.0 {
        (x + y) / s * gaussian(x + y, s)
    } else {
        0.0
    }
}

/// `f⁽³⁾ₓ(s,y) = f⁽¹⁾ₓ(s,y) + f⁽²⁾ₓ(s,−y)`.
#[inline]
pub fn f3_kernel(x: f64, s: f64, y: f64) -> f64 {
    f1_kernel(x, s, y) + f2_kernel(x, s, -y)
}

fn check_origin(s: f64, y: f64) -> Result<()> {
    if s == 0.0 && y == 0.0 {
        Err(domain_err!("the F-functions are undefined at the origin"))
    } else if !(s.is_finite() && y.is_finite()) {
        Err(domain_err!("non-finite argument ({s}, {y})"))
    } else {
        Ok(())
    }
}

/// `Erf(|y| / √(2|s|))` with the limit `1` at `s = 0`, `y ≠ 0`.
#[inline]
fn erf_ratio(s: f64, y: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        erf(y.abs() / libm::sqrt(2.0 * s.abs()))
    }
}

#[inline]
pub(crate) fn f1_unchecked(s: f64, y: f64) -> f64 {
    0.25 - 0.25 * erf_ratio(s, y)
}

#[inline]
pub(crate) fn f2_unchecked(s: f64, y: f64) -> f64 {
    -0.5 * y.abs() * gaussian(y, s.abs())
}

/// `F₁(s,y) = ¼ − ¼ Erf(|y|/√(2|s|))`.
pub fn f1(s: f64, y: f64) -> Result<f64> {
    check_origin(s, y)?;
    Ok(f1_unchecked(s, y))
}

/// `F₂(s,y) = −(|y|/2) N(y, |s|)`.
pub fn f2(s: f64, y: f64) -> Result<f64> {
    check_origin(s, y)?;
    Ok(f2_unchecked(s, y))
}

/// `F = F₁ + F₂`.
pub fn f_total(s: f64, y: f64) -> Result<f64> {
    check_origin(s, y)?;
    Ok(f1_unchecked(s, y) + f2_unchecked(s, y))
}

#[inline]
pub(crate) fn f0_unchecked(t: f64, x: f64) -> f64 {
    let e = if t == 0.0 {
        if x > 0.0 {
            1.0
        } else {
            -1.0
        }
    } else {
        erf(x / libm::sqrt(2.0 * t.abs()))
    };
    e + 2.0 * x * gaussian(x, t)
}

/// `F₀(t,x) = Erf(x/√(2|t|)) + 2x N(x,t)`; the Gaussian term vanishes for
/// `t ≤ 0` through the indicator in `N`.
pub fn f0(t: f64, x: f64) -> Result<f64> {
    check_origin(t, x)?;
    Ok(f0_unchecked(t, x))
}

/// Integrand of `a`: `½ − ½Erf(|y|/√(2|s|)) − 2|y| N(y,s)`, with the
/// indicator of `N` (zero for `s ≤ 0`).
#[inline]
pub(crate) fn a_integrand(s: f64, y: f64) -> f64 {
    0.5 - 0.5 * erf_ratio(s, y) - 2.0 * y.abs() * gaussian(y, s)
}

/// Integrand of `c`: `2 y N(y, s)`.
#[inline]
pub(crate) fn c_integrand(s: f64, y: f64) -> f64 {
    2.0 * y * gaussian(y, s)
}
