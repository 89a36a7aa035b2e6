//! Finite-difference building blocks: tridiagonal LU solves and the 1D
//! diffusion operator with ghost-node boundary conditions.
//!
//! Grids are node-based: `n_cells` cells of width `dx` give `n_cells + 1`
//! nodes including both boundary points.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Result};

/// Pre-factorised tridiagonal matrix (Thomas algorithm).
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TridiagonalLu {
    /// `lower[i]` multiplies `x[i−1]`, `upper[i]` multiplies `x[i+1]`
    /// (`lower[0]` and `upper[n−1]` are ignored).
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(config_err!("tridiagonal bands must have equal non-zero length"));
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let denom = diag[i] - if i > 0 { lower[i] * prev_c } else { 0.0 };
            if denom == 0.0 || !denom.is_finite() {
                return Err(config_err!("singular tridiagonal system at row {i}"));
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = if i + 1 < n { upper[i] * inv_denom[i] } else { 0.0 };
            prev_c = c_prime[i];
        }
        Ok(Self { lower: lower.to_vec(), c_prime, inv_denom })
    }

    pub fn len(&self) -> usize {
        self.c_prime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_prime.is_empty()
    }

    /// Overwrite `d` with the solution of `M x = d`.
    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(d.len(), n);
        d[0] *= self.inv_denom[0];
        for i in 1..n {
            d[i] = (d[i] - self.lower[i] * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
    }
}

/// Boundary condition at one end of a 1D grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    /// `u = value`.
    Dirichlet(f64),
    /// `∂ₓu = value` (outward derivative taken as the plain x-derivative).
    Flux(f64),
    /// `∂ₓu = κ u`.
    Robin(f64),
}

/// The operator `D ∂ₓ²` on a uniform node grid, discretised with centred
/// differences and one ghost node per flux/Robin boundary:
///
/// * left `∂ₓu = b`:  `u₋₁ = u₁ − 2Δx b`;
/// * left `∂ₓu = κu`: `u₋₁ = u₁ − 2Δx κ u₀`;
/// * right ends mirror these with the opposite sign of the ghost offset.
///
/// Dirichlet nodes are not evolved: their rows are the identity in implicit
/// solves and zero in [`Diffusion1d::apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diffusion1d {
    pub n_cells: usize,
    pub dx: f64,
    pub coeff: f64,
    pub left: Boundary,
    pub right: Boundary,
}

impl Diffusion1d {
    pub fn new(n_cells: usize, dx: f64, coeff: f64, left: Boundary, right: Boundary) -> Result<Self> {
        if n_cells < 2 || !(dx > 0.0) {
            return Err(config_err!("degenerate grid: {n_cells} cells of width {dx}"));
        }
        Ok(Self { n_cells, dx, coeff, left, right })
    }

    pub fn nodes(&self) -> usize {
        self.n_cells + 1
    }

    /// Tridiagonal bands `(lower, diag, upper)` and affine part `g` with
    /// `D∂ₓ²u ≈ A u + g` at every non-Dirichlet node.
    pub fn bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nodes();
        let k = self.coeff / (self.dx * self.dx);
        let mut lo = vec![k; n];
        let mut di = vec![-2.0 * k; n];
        let mut up = vec![k; n];
        let mut g = vec![0.0; n];
        lo[0] = 0.0;
        up[n - 1] = 0.0;
        match self.left {
            Boundary::Dirichlet(_) => {
                di[0] = 0.0;
                up[0] = 0.0;
            }
            Boundary::Flux(b) => {
                up[0] = 2.0 * k;
                g[0] = -2.0 * k * self.dx * b;
            }
            Boundary::Robin(kappa) => {
                up[0] = 2.0 * k;
                di[0] = -2.0 * k * (1.0 + self.dx * kappa);
            }
        }
        match self.right {
            Boundary::Dirichlet(_) => {
                di[n - 1] = 0.0;
                lo[n - 1] = 0.0;
            }
            Boundary::Flux(b) => {
                lo[n - 1] = 2.0 * k;
                g[n - 1] = 2.0 * k * self.dx * b;
            }
            Boundary::Robin(kappa) => {
                lo[n - 1] = 2.0 * k;
                di[n - 1] = -2.0 * k * (1.0 - self.dx * kappa);
            }
        }
        (lo, di, up, g)
    }

    /// `out = A u + g` (zero at Dirichlet nodes).
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (lo, di, up, g) = self.bands();
        let n = self.nodes();
        for i in 0..n {
            let mut v = di[i] * u[i] + g[i];
            if i > 0 {
                v += lo[i] * u[i - 1];
            }
            if i + 1 < n {
                v += up[i] * u[i + 1];
            }
            out[i] = v;
        }
    }

    /// Factorise `I − θΔt A` (identity rows at Dirichlet nodes), checking
    /// that the matrix is diagonally dominant so that the implicit step is
    /// stable and positivity preserving.
    pub fn implicit(&self, theta_dt: f64) -> Result<TridiagonalLu> {
        let (lo, di, up, _) = self.bands();
        let n = self.nodes();
        let mut l = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 0..n {
            l[i] = -theta_dt * lo[i];
            d[i] = 1.0 - theta_dt * di[i];
            u[i] = -theta_dt * up[i];
        }
        for i in [0, n - 1] {
            if d[i] + 1e-14 < l[i].abs() + u[i].abs() {
                return Err(config_err!(
                    "implicit step of {theta_dt} exceeds the stability budget of the Robin boundary at node {i}"
                ));
            }
        }
        if let Boundary::Dirichlet(_) = self.left {
            d[0] = 1.0;
        }
        if let Boundary::Dirichlet(_) = self.right {
            d[n - 1] = 1.0;
        }
        TridiagonalLu::new(&l, &d, &u)
    }

    /// Overwrite Dirichlet nodes of `u` with their prescribed values.
    pub fn enforce(&self, u: &mut [f64]) {
        if let Boundary::Dirichlet(v) = self.left {
            u[0] = v;
        }
        if let Boundary::Dirichlet(v) = self.right {
            let n = u.len();
            u[n - 1] = v;
        }
    }
}

/// Time discretisation of the implicit diffusion part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeScheme {
    BackwardEuler,
    CrankNicolson,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_known_system() {
        let lo = [0.0, -1.0, -1.0, -1.0];
        let di = [2.0, 2.0, 2.0, 2.0];
        let up = [-1.0, -1.0, -1.0, 0.0];
        let lu = TridiagonalLu::new(&lo, &di, &up).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut d = [
            2.0 * x[0] - x[1],
            -x[0] + 2.0 * x[1] - x[2],
            -x[1] + 2.0 * x[2] - x[3],
            -x[2] + 2.0 * x[3],
        ];
        lu.solve_in_place(&mut d);
        for i in 0..4 {
            assert!((d[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn flux_boundary_is_exact_for_quadratics() {
        // u = x² on [-1, 1] has u' = ∓2 at ∓1 and u'' = 2 everywhere.
        let n = 20;
        let dx = 2.0 / n as f64;
        let op = Diffusion1d::new(n, dx, 0.5, Boundary::Flux(-2.0), Boundary::Flux(2.0)).unwrap();
        let u: Vec<f64> = (0..=n).map(|i| (-1.0 + i as f64 * dx).powi(2)).collect();
        let mut out = vec![0.0; n + 1];
        op.apply(&u, &mut out);
        for v in out {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn robin_boundary_is_exact_for_exponentials_to_second_order() {
        // v = e^{κx} satisfies v' = κ v; check consistency of the ghost rows.
        let kappa = 0.7;
        for n in [40usize, 80] {
            let dx = 2.0 / n as f64;
            let op = Diffusion1d::new(n, dx, 0.5, Boundary::Robin(kappa), Boundary::Robin(kappa)).unwrap();
            let v: Vec<f64> = (0..=n).map(|i| libm::exp(kappa * (-1.0 + i as f64 * dx))).collect();
            let mut out = vec![0.0; n + 1];
            op.apply(&v, &mut out);
            let err = (out[0] - 0.5 * kappa * kappa * v[0]).abs();
            assert!(err < 0.2 * dx, "n = {n}: {err}");
        }
    }

    #[test]
    fn unstable_robin_step_is_rejected() {
        let op = Diffusion1d::new(10, 0.2, 0.5, Boundary::Robin(0.0), Boundary::Robin(50.0)).unwrap();
        assert!(op.implicit(0.1).is_err());
        assert!(op.implicit(0.001).is_ok());
    }
}
