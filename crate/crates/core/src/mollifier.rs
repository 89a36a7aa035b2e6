//! Mollifier profiles, their parabolic rescaling and autocorrelations.
//!
//! The basic profile is the C∞ bump `β(a, b) = exp(−1/(1 − a² − b²))` on the
//! unit ball, read in parabolic coordinates `a = t/R²`, `b = x/R`. Three
//! variants are provided:
//!
//! * [`ProfileKind::BumpSpacetime`] — the symmetric space-time bump;
//! * [`ProfileKind::BumpSpatialOnly`] — `δ(t)·ρ̂(x)`, stored as the 1D profile
//!   `ρ̂(x) ∝ exp(−1/(1 − (x/R)²))` together with a flag;
//! * [`ProfileKind::ShiftedBump`] — the bump translated in time by `τR²` and
//!   *sheared* in space: its spatial centre moves by `σR` per unit of scaled
//!   time, `ρ(t,x) ∝ β(t/R² − τ, x/R − σ(t/R² − τ))`.
//!
//! A pure translation would leave `η = ρ̄ ∗ ρ` unchanged (and hence every
//! boundary constant), so the shear is what breaks the `x ↦ −x` symmetry of
//! the autocorrelation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::quad::{pairwise_sum, Adaptive};

/// Which profile a [`MollifierSpec`] realises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    BumpSpacetime,
    BumpSpatialOnly,
    ShiftedBump,
}

/// Unnormalised unit bump in two variables.
#[inline]
fn bump2(a: f64, b: f64) -> f64 {
    let r2 = a * a + b * b;
    if r2 < 1.0 {
        libm::exp(-1.0 / (1.0 - r2))
    } else {
        0.0
    }
}

/// Unnormalised unit bump in one variable.
#[inline]
fn bump1(b: f64) -> f64 {
    bump2(0.0, b)
}

/// `∫∫ β(a,b) da db = 2π ∫₀¹ r exp(−1/(1−r²)) dr`.
fn unit_mass_2d() -> f64 {
    let q = Adaptive::with_tol(1e-16, 1e-14);
    let v = q
        .integrate(|r| r * bump1(r), 0.0, 1.0)
        .expect("smooth bump integral converges");
    2.0 * core::f64::consts::PI * v.value
}

/// `∫ β(0,b) db`.
fn unit_mass_1d() -> f64 {
    let q = Adaptive::with_tol(1e-16, 1e-14);
    q.integrate(bump1, -1.0, 1.0)
        .expect("smooth bump integral converges")
        .value
}

/// A mollifier `ρ(t, x)` integrating to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierSpec {
    kind: ProfileKind,
    radius: f64,
    shift: (f64, f64),
    normalization: f64,
    x_symmetric: bool,
}

impl MollifierSpec {
    /// Build a profile. `shift = (τ, σ)` is only used by
    /// [`ProfileKind::ShiftedBump`]; both components must lie in `[−1, 1]`.
    pub fn new(kind: ProfileKind, radius: f64, shift: (f64, f64)) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(config_err!("support radius must be positive, got {radius}"));
        }
        let shift = match kind {
            ProfileKind::ShiftedBump => {
                let (tau, sigma) = shift;
                if !(tau.abs() <= 1.0 && sigma.abs() <= 1.0) {
                    return Err(config_err!(
                        "shift components must lie in [-1, 1], got ({tau}, {sigma})"
                    ));
                }
                shift
            }
            _ => (0.0, 0.0),
        };
        let normalization = match kind {
            ProfileKind::BumpSpatialOnly => unit_mass_1d() * radius,
            _ => unit_mass_2d() * radius * radius * radius,
        };
        let mut spec = Self { kind, radius, shift, normalization, x_symmetric: false };
        spec.x_symmetric = spec.detect_x_symmetry();
        Ok(spec)
    }

    /// Symmetric space-time bump of parabolic radius `radius`.
    pub fn bump(radius: f64) -> Result<Self> {
        Self::new(ProfileKind::BumpSpacetime, radius, (0.0, 0.0))
    }

    /// Purely spatial bump (white in time).
    pub fn spatial_only(radius: f64) -> Result<Self> {
        Self::new(ProfileKind::BumpSpatialOnly, radius, (0.0, 0.0))
    }

    /// Time-shifted, spatially sheared bump.
    pub fn shifted(radius: f64, time_shift: f64, space_shift: f64) -> Result<Self> {
        Self::new(ProfileKind::ShiftedBump, radius, (time_shift, space_shift))
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn shift(&self) -> (f64, f64) {
        self.shift
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn is_spatial_only(&self) -> bool {
        self.kind == ProfileKind::BumpSpatialOnly
    }

    /// True iff `ρ(t, x) = ρ(t, −x)` (checked on a sample grid to 1e−12).
    pub fn x_symmetric(&self) -> bool {
        self.x_symmetric
    }

    /// Evaluate `ρ(t, x)`. For the spatial-only profile this returns `ρ̂(x)`
    /// and ignores `t` (the time factor is a Dirac mass).
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let r = self.radius;
        match self.kind {
            ProfileKind::BumpSpacetime => bump2(t / (r * r), x / r) / self.normalization,
            ProfileKind::BumpSpatialOnly => bump1(x / r) / self.normalization,
            ProfileKind::ShiftedBump => {
                let (tau, sigma) = self.shift;
                let a = t / (r * r) - tau;
                bump2(a, x / r - sigma * a) / self.normalization
            }
        }
    }

    /// Bounding box `(t_lo, t_hi, x_lo, x_hi)` of the support. For the
    /// spatial-only profile the time interval is degenerate.
    pub fn support_box(&self) -> (f64, f64, f64, f64) {
        let r = self.radius;
        match self.kind {
            ProfileKind::BumpSpacetime => (-r * r, r * r, -r, r),
            ProfileKind::BumpSpatialOnly => (0.0, 0.0, -r, r),
            ProfileKind::ShiftedBump => {
                let (tau, sigma) = self.shift;
                let xr = (1.0 + sigma.abs()) * r;
                ((tau - 1.0) * r * r, (tau + 1.0) * r * r, -xr, xr)
            }
        }
    }

    fn detect_x_symmetry(&self) -> bool {
        let (t0, t1, x0, x1) = self.support_box();
        let n = 41;
        for i in 0..n {
            let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let x = x0 + (x1 - x0) * j as f64 / (n - 1) as f64;
                if (self.eval(t, x) - self.eval(t, -x)).abs() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    /// Parabolic rescaling `ρ_ε`.
    pub fn scale(&self, epsilon: f64) -> Result<ScaledMollifier> {
        ScaledMollifier::new(self.clone(), epsilon)
    }

    /// Autocorrelation `η = ρ̄ ∗ ρ` on a lattice with `cells` sample cells
    /// across each axis of the support box. The lattice sum converges
    /// super-algebraically; 128 cells give a mass error below 1e−9.
    pub fn autocorrelation(&self, cells: usize) -> Result<Autocorrelation> {
        if cells < 8 {
            return Err(config_err!(
                "autocorrelation needs at least 8 cells across the support, got {cells}"
            ));
        }
        let (t0, t1, x0, x1) = self.support_box();
        let hx = (x1 - x0) / cells as f64;
        let xc = 0.5 * (x0 + x1);
        // Half-integer offsets keep the samples exactly mirror-symmetric.
        let xs: Vec<f64> = (0..cells).map(|j| xc + (j as f64 + 0.5 - 0.5 * cells as f64) * hx).collect();
        if self.is_spatial_only() {
            let row: Vec<f64> = xs.iter().map(|&x| self.eval(0.0, x)).collect();
            return Ok(Autocorrelation::from_samples(&[row], 0.0, hx, true, self.x_symmetric));
        }
        let ht = (t1 - t0) / cells as f64;
        let tc = 0.5 * (t0 + t1);
        let samples: Vec<Vec<f64>> = (0..cells)
            .map(|i| {
                let t = tc + (i as f64 + 0.5 - 0.5 * cells as f64) * ht;
                xs.iter().map(|&x| self.eval(t, x)).collect()
            })
            .collect();
        Ok(Autocorrelation::from_samples(&samples, ht, hx, false, self.x_symmetric))
    }
}

/// `ρ_ε(t, x) = ε⁻³ ρ(ε⁻² t, ε⁻¹ x)` (or `ε⁻¹ ρ̂(ε⁻¹ x)` for the spatial-only
/// profile).
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMollifier {
    base: MollifierSpec,
    epsilon: f64,
}

impl ScaledMollifier {
    pub fn new(base: MollifierSpec, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(config_err!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self { base, epsilon })
    }

    pub fn base(&self) -> &MollifierSpec {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let e = self.epsilon;
        if self.base.is_spatial_only() {
            self.base.eval(0.0, x / e) / e
        } else {
            self.base.eval(t / (e * e), x / e) / (e * e * e)
        }
    }

    pub fn support_box(&self) -> (f64, f64, f64, f64) {
        let (t0, t1, x0, x1) = self.base.support_box();
        let e = self.epsilon;
        (t0 * e * e, t1 * e * e, x0 * e, x1 * e)
    }
}

/// Autocorrelation `η(s, y) = ∫ ρ(u, w) ρ(u + s, w + y) du dw` sampled on a
/// uniform lattice of lags, with piecewise-bicubic interpolation in between.
///
/// The same type stores the autocorrelation of a planar (two space
/// variables) profile; the first axis is then the first space coordinate.
/// For a profile that is a Dirac mass in time the first axis collapses
/// (`time_collapsed`) and `η(s, y) = δ(s) η̂(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    step: (f64, f64),
    half: (usize, usize),
    values: Vec<f64>,
    total_mass: f64,
    time_collapsed: bool,
    y_symmetric: bool,
}

impl Autocorrelation {
    /// Discrete autocorrelation of samples on a cell-centred grid with
    /// spacings `(h0, h1)`. With `collapsed`, `samples` must have one row.
    pub(crate) fn from_samples(
        samples: &[Vec<f64>],
        h0: f64,
        h1: f64,
        collapsed: bool,
        y_symmetric: bool,
    ) -> Self {
        let n0 = samples.len();
        let n1 = samples[0].len();
        let half = (if collapsed { 0 } else { n0 }, n1);
        let w0 = 2 * half.0 + 1;
        let w1 = 2 * half.1 + 1;
        let mut values = vec![0.0; w0 * w1];
        let cell = if collapsed { h1 } else { h0 * h1 };
        let mut terms: Vec<f64> = Vec::with_capacity(n0 * n1);
        // Compute lags with k > 0, or k = 0 and l >= 0; mirror the rest.
        for k in 0..=half.0 {
            let l_start: isize = if k == 0 { 0 } else { -(half.1 as isize) };
            for l in l_start..=(half.1 as isize) {
                terms.clear();
                for i in 0..n0.saturating_sub(k) {
                    let a = &samples[i];
                    let b = &samples[i + k];
                    for j in 0..n1 {
                        let jj = j as isize + l;
                        if jj < 0 || jj >= n1 as isize {
                            continue;
                        }
                        let p = a[j] * b[jj as usize];
                        if p != 0.0 {
                            terms.push(p);
                        }
                    }
                }
                let v = pairwise_sum(&terms) * cell;
                let idx_pos = (half.0 + k) * w1 + (half.1 as isize + l) as usize;
                let idx_neg = (half.0 - k) * w1 + (half.1 as isize - l) as usize;
                values[idx_pos] = v;
                values[idx_neg] = v;
            }
        }
        if y_symmetric {
            for k in 0..w0 {
                for l in 0..half.1 {
                    let a = k * w1 + l;
                    let b = k * w1 + (w1 - 1 - l);
                    let m = 0.5 * (values[a] + values[b]);
                    values[a] = m;
                    values[b] = m;
                }
            }
        }
        let total_mass = pairwise_sum(&values) * cell;
        Self { step: (h0, h1), half, values, total_mass, time_collapsed: collapsed, y_symmetric }
    }

    /// Lattice spacings `(Δs, Δy)`; `Δs = 0` when the time axis is collapsed.
    pub fn step(&self) -> (f64, f64) {
        self.step
    }

    /// Largest lag index on each axis (lags run over `−half..=half`).
    pub fn half_extent(&self) -> (usize, usize) {
        self.half
    }

    /// Half-widths `(S, Y)` of the lag rectangle outside which `η = 0`.
    pub fn support(&self) -> (f64, f64) {
        (self.half.0 as f64 * self.step.0, self.half.1 as f64 * self.step.1)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_time_collapsed(&self) -> bool {
        self.time_collapsed
    }

    pub fn is_y_symmetric(&self) -> bool {
        self.y_symmetric
    }

    /// Lattice value at lag indices `(k, l)` (zero outside the lattice).
    pub fn at(&self, k: isize, l: isize) -> f64 {
        let (h0, h1) = (self.half.0 as isize, self.half.1 as isize);
        if k.abs() > h0 || l.abs() > h1 {
            return 0.0;
        }
        let w1 = 2 * self.half.1 + 1;
        self.values[(k + h0) as usize * w1 + (l + h1) as usize]
    }

    /// Interpolated `η(s, y)`. For a collapsed time axis this is the spatial
    /// density `η̂(y)` and `s` is ignored.
    pub fn eval(&self, s: f64, y: f64) -> f64 {
        let (uy, wy) = match lagrange4(y / self.step.1) {
            Some(v) => v,
            None => return 0.0,
        };
        if self.time_collapsed {
            return (0..4).map(|b| wy[b] * self.at(0, uy + b as isize)).sum();
        }
        let (us, ws) = match lagrange4(s / self.step.0) {
            Some(v) => v,
            None => return 0.0,
        };
        if us + 3 < -(self.half.0 as isize) - 1
            || us > self.half.0 as isize + 1
            || uy + 3 < -(self.half.1 as isize) - 1
            || uy > self.half.1 as isize + 1
        {
            return 0.0;
        }
        let mut acc = 0.0;
        for a in 0..4 {
            let mut row = 0.0;
            for b in 0..4 {
                row += wy[b] * self.at(us + a as isize, uy + b as isize);
            }
            acc += ws[a] * row;
        }
        acc
    }

    /// The same autocorrelation on the lattice of even lags (spacing doubled).
    /// Comparing integrals against both lattices estimates the
    /// interpolation error.
    pub fn coarsened(&self) -> Autocorrelation {
        let half = (self.half.0 / 2, self.half.1 / 2);
        let w1 = 2 * half.1 + 1;
        let mut values = vec![0.0; (2 * half.0 + 1) * w1];
        for k in -(half.0 as isize)..=(half.0 as isize) {
            for l in -(half.1 as isize)..=(half.1 as isize) {
                values[(k + half.0 as isize) as usize * w1 + (l + half.1 as isize) as usize] =
                    self.at(2 * k, 2 * l);
            }
        }
        let step = (2.0 * self.step.0, 2.0 * self.step.1);
        let cell = if self.time_collapsed { step.1 } else { step.0 * step.1 };
        let total_mass = pairwise_sum(&values) * cell;
        Autocorrelation {
            step,
            half,
            values,
            total_mass,
            time_collapsed: self.time_collapsed,
            y_symmetric: self.y_symmetric,
        }
    }

    /// `η(0,0)`, i.e. the squared L² norm of the profile.
    pub fn at_origin(&self) -> f64 {
        self.at(0, 0)
    }
}

/// Four-point Lagrange weights for position `u` (in lattice units): returns
/// the first node index and the weights for nodes `i, i+1, i+2, i+3`.
fn lagrange4(u: f64) -> Option<(isize, [f64; 4])> {
    if !u.is_finite() {
        return None;
    }
    let f = libm::floor(u);
    let i = f as isize - 1;
    let p = u - f; // in [0, 1), nodes at -1, 0, 1, 2
    let w = [
        -p * (p - 1.0) * (p - 2.0) / 6.0,
        (p + 1.0) * (p - 1.0) * (p - 2.0) / 2.0,
        -(p + 1.0) * p * (p - 2.0) / 2.0,
        (p + 1.0) * p * (p - 1.0) / 6.0,
    ];
    Some((i, w))
}

/// Radial bump on the plane, `ρ(x) ∝ exp(−1/(1 − |x|²/R²))`, used for the
/// purely spatial noise of the generalised PAM.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarMollifier {
    radius: f64,
    normalization: f64,
}

impl PlanarMollifier {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(config_err!("support radius must be positive, got {radius}"));
        }
        Ok(Self { radius, normalization: unit_mass_2d() * radius * radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        bump2(x1 / self.radius, x2 / self.radius) / self.normalization
    }

    /// `ε⁻² ρ(x/ε)`.
    pub fn eval_scaled(&self, epsilon: f64, x1: f64, x2: f64) -> f64 {
        self.eval(x1 / epsilon, x2 / epsilon) / (epsilon * epsilon)
    }

    /// Autocorrelation `ρ ⋆ ρ` on a lattice with `cells` cells per axis.
    pub fn autocorrelation(&self, cells: usize) -> Result<Autocorrelation> {
        if cells < 8 {
            return Err(config_err!(
                "autocorrelation needs at least 8 cells across the support, got {cells}"
            ));
        }
        let h = 2.0 * self.radius / cells as f64;
        let xs: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5 - 0.5 * cells as f64) * h).collect();
        let samples: Vec<Vec<f64>> =
            xs.iter().map(|&a| xs.iter().map(|&b| self.eval(a, b)).collect()).collect();
        Ok(Autocorrelation::from_samples(&samples, h, h, false, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{Cubature, Rect};

    fn mass(spec: &MollifierSpec) -> f64 {
        let (t0, t1, x0, x1) = spec.support_box();
        let c = Cubature::new(10, 9);
        c.integrate(|t, x| spec.eval(t, x), Rect::new(t0, t1, x0, x1), 1e-13).value
    }

    #[test]
    fn profiles_have_unit_mass() {
        for spec in [
            MollifierSpec::bump(1.0).unwrap(),
            MollifierSpec::bump(0.5).unwrap(),
            MollifierSpec::shifted(1.0, 0.2, 0.3).unwrap(),
        ] {
            assert!((mass(&spec) - 1.0).abs() < 1e-10, "{:?}", spec.kind());
        }
        let s = MollifierSpec::spatial_only(0.7).unwrap();
        let q = Adaptive::with_tol(1e-15, 1e-14);
        let m = q.integrate(|x| s.eval(0.0, x), -0.7, 0.7).unwrap().value;
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn compact_support_and_symmetry_flags() {
        let b = MollifierSpec::bump(1.0).unwrap();
        assert_eq!(b.eval(1.0, 0.1), 0.0);
        assert_eq!(b.eval(0.0, 1.0), 0.0);
        assert_eq!(b.eval(0.3, 0.4), b.eval(0.3, -0.4));
        assert!(b.x_symmetric());
        assert!(MollifierSpec::spatial_only(1.0).unwrap().x_symmetric());
        assert!(!MollifierSpec::shifted(1.0, 0.0, 0.3).unwrap().x_symmetric());
        // A pure time shift keeps the x-symmetry.
        assert!(MollifierSpec::shifted(1.0, 0.4, 0.0).unwrap().x_symmetric());
        assert!(MollifierSpec::bump(0.0).is_err());
        assert!(MollifierSpec::shifted(1.0, 0.0, 1.5).is_err());
    }

    #[test]
    fn scaling_identity_and_rejections() {
        let b = MollifierSpec::bump(1.0).unwrap();
        let one = b.scale(1.0).unwrap();
        assert_eq!(one.eval(0.2, -0.3), b.eval(0.2, -0.3));
        let e = 0.1;
        let s = b.scale(e).unwrap();
        assert!((s.eval(0.0, 0.0) - b.eval(0.0, 0.0) / (e * e * e)).abs() < 1e-9);
        assert!(b.scale(0.0).is_err());
        assert!(b.scale(-1.0).is_err());
    }

    #[test]
    fn autocorrelation_invariants() {
        let b = MollifierSpec::shifted(1.0, 0.0, 0.3).unwrap();
        let eta = b.autocorrelation(40).unwrap();
        let (h0, h1) = eta.half_extent();
        for k in -(h0 as isize)..=(h0 as isize) {
            for l in -(h1 as isize)..=(h1 as isize) {
                assert_eq!(eta.at(k, l), eta.at(-k, -l));
                assert!(eta.at(k, l) >= 0.0);
            }
        }
        assert!(b.autocorrelation(7).is_err());
        let fine = MollifierSpec::bump(1.0).unwrap().autocorrelation(128).unwrap();
        assert!((fine.total_mass() - 1.0).abs() < 1e-8, "{}", fine.total_mass());
    }

    #[test]
    fn interpolation_reproduces_lattice_values() {
        let b = MollifierSpec::bump(1.0).unwrap();
        let eta = b.autocorrelation(32).unwrap();
        let (ds, dy) = eta.step();
        for (k, l) in [(0, 0), (3, -5), (-7, 2), (10, 10)] {
            let v = eta.eval(k as f64 * ds, l as f64 * dy);
            assert!((v - eta.at(k, l)).abs() < 1e-14);
        }
        assert_eq!(eta.eval(10.0, 0.0), 0.0);
    }
}
