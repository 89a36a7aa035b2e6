//! Finite-difference solvers for the approximating equations.
//!
//! * [`solve_she_robin`]: `∂ₜZ = ½∂ₓ²Z + 2Zξ` on `[−1, 1]` with
//!   `∂ₓZ(±1) = 2c±Z(±1)`. The diffusion is implicit; the Itô increment
//!   `2Z ξ Δt` is explicit and uses the noise of the current cell.
//! * [`solve_kpz_approx`]: `∂ₜu = ½∂ₓ²u + (∂ₓu)² + 2c∂ₓu − C_ε + ξ_ε`, with
//!   either `∂ₓu(±1) = b̂±` or `u(±1) = 0`. Gradients are centred differences.
//!   The Neumann data enter through ghost nodes, so the gradient at a
//!   boundary node is exactly `b̂±`.
//! * [`solve_gpam_approx`]: `∂ₜu = Δu + f_ij(u)(∂ᵢu∂ⱼu − δᵢⱼC_ε g²(u)) +
//!   g(u)(ξ_ε − 2C_ε g′(u))` on `(−1, 1)²` with `u = 0` on the boundary. The
//!   Laplacian uses Peaceman–Rachford ADI; the reaction terms are explicit.
//!
//! Every solver records snapshots, stops with [`Status::BlewUp`] when the
//! solution becomes non-finite or exceeds the blow-up threshold, and runs
//! single-threaded; ensembles parallelise over paths.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, domain_err, Error, Result};
use crate::fd::{Boundary, Diffusion1d, TridiagonalLu};
use crate::mollifier::ScaledMollifier;
use crate::noise::{GridSpec, NoiseField, NoiseKind};

/// Default sup-norm threshold signalling blow-up.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

/// Which time steps are stored in a [`Trajectory`].
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Recording {
    /// Every time step including `t = 0`.
    #[default]
    EveryStep,
    /// Only these times (each must be a multiple of `Δt`).
    Times(Vec<f64>),
}

impl Recording {
    /// Step indices to record, sorted and deduplicated.
    fn steps(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        match self {
            Recording::EveryStep => Ok((0..=grid.n_t).collect()),
            Recording::Times(ts) => {
                let dt = grid.dt();
                let mut steps = Vec::with_capacity(ts.len());
                for &t in ts {
                    let n = libm::round(t / dt);
                    if !(t >= 0.0) || (n * dt - t).abs() > 1e-9 * t.max(1.0) || n as usize > grid.n_t {
                        return Err(config_err!("snapshot time {t} is not a grid time (Δt = {dt}, T = {})", grid.t_max));
                    }
                    steps.push(n as usize);
                }
                steps.sort_unstable();
                steps.dedup();
                Ok(steps)
            }
        }
    }
}

/// How a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Status {
    Completed,
    /// The solution left the threshold (or became non-finite) at time `t`.
    BlewUp { t: f64 },
}

/// Provenance attached to a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub stream_id: u64,
    /// Renormalisation constant used (0 when none).
    pub c_eps: f64,
    /// Hash of the generating configuration (filled in by the caller).
    pub config_hash: u64,
    /// Wall time in seconds (filled in by the caller).
    pub wall_time: f64,
}

/// Snapshots of a solution on a fixed grid. Each snapshot holds the node
/// values (row-major `x₂, x₁` in two dimensions).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    pub times: Vec<f64>,
    values: Vec<f64>,
    pub status: Status,
    pub meta: TrajectoryMeta,
    /// First `(t, x)` where a positive quantity (Z) became non-positive.
    pub first_nonpositive: Option<(f64, f64)>,
}

impl Trajectory {
    fn new(grid: GridSpec, dim: usize, meta: TrajectoryMeta) -> Self {
        Self { grid, dim, times: Vec::new(), values: Vec::new(), status: Status::Completed, meta, first_nonpositive: None }
    }

    /// Assemble a trajectory from explicit snapshots.
    pub fn from_snapshots(grid: GridSpec, dim: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let per = grid.nodes().pow(dim as u32);
        if !(dim == 1 || dim == 2) || values.len() != per * times.len() {
            return Err(config_err!("expected {} values for {} snapshots, got {}", per * times.len(), times.len(), values.len()));
        }
        Ok(Self { times, values, ..Self::new(grid, dim, TrajectoryMeta::default()) })
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        self.times.push(t);
        self.values.extend_from_slice(u);
    }

    pub fn nodes_per_snapshot(&self) -> usize {
        self.grid.nodes().pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        let n = self.nodes_per_snapshot();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.snapshot(self.len() - 1))
        }
    }

    /// Index of the snapshot at time `t` (within `10⁻⁹`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }

    fn map(&self, f: impl Fn(f64, usize, f64) -> f64) -> Trajectory {
        let n = self.nodes_per_snapshot();
        let mut out = self.clone();
        for (k, chunk) in out.values.chunks_mut(n).enumerate() {
            let t = self.times[k];
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = f(t, i, *v);
            }
        }
        out
    }
}

fn check_noise(noise: &NoiseField, grid: &GridSpec, kind: NoiseKind) -> Result<()> {
    if noise.kind != kind {
        return Err(config_err!("noise field has the wrong kind: {:?}", noise.kind));
    }
    let same = noise.grid.n_x == grid.n_x
        && (noise.grid.x_lo - grid.x_lo).abs() < 1e-12
        && (noise.grid.x_hi - grid.x_hi).abs() < 1e-12
        && (kind == NoiseKind::Spatial2d || (noise.grid.n_t == grid.n_t && (noise.grid.t_max - grid.t_max).abs() < 1e-12));
    if !same {
        return Err(config_err!("noise grid does not match the solver grid"));
    }
    Ok(())
}

fn check_profile(grid: &GridSpec, dim: usize, u0: &[f64]) -> Result<()> {
    let n = grid.nodes().pow(dim as u32);
    if u0.len() != n {
        return Err(config_err!("initial profile has {} values, grid has {n} nodes", u0.len()));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(domain_err!("initial profile contains non-finite values"));
    }
    Ok(())
}

/// Node values of `f` on a 1D grid.
pub fn profile_from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.xs().into_iter().map(f).collect()
}

/// Node values of `f` on the square grid, row-major in `(x₂, x₁)`.
pub fn profile_from_fn_2d(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let xs = grid.xs();
    let mut out = Vec::with_capacity(xs.len() * xs.len());
    for &y in &xs {
        for &x in &xs {
            out.push(f(x, y));
        }
    }
    out
}

// ---------------------------------------------------------------- SHE ----

/// Multiplicative stochastic heat equation with Robin data
/// `∂ₓZ(±1) = 2c±Z(±1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SheConfig {
    /// `(c₋, c₊)`.
    pub robin: (f64, f64),
    pub initial: Vec<f64>,
    pub grid: GridSpec,
    pub recording: Recording,
}

/// Semi-implicit Euler–Maruyama for the SHE. With a raw white-noise field
/// the increment `2Zξ Δt` is the Itô increment; with a mollified field the
/// same step is the explicit Euler discretisation of the smooth equation.
/// Paths where `Z` becomes non-positive are flagged, not stopped.
pub fn solve_she_robin(cfg: &SheConfig, noise: &NoiseField) -> Result<Trajectory> {
    let grid = &cfg.grid;
    check_profile(grid, 1, &cfg.initial)?;
    if cfg.initial.iter().any(|&z| !(z > 0.0)) {
        return Err(domain_err!("initial data of the stochastic heat equation must be positive"));
    }
    check_noise(noise, grid, NoiseKind::SpaceTime1d)?;
    let dt = grid.dt();
    let op = Diffusion1d::new(
        grid.n_x,
        grid.dx(),
        0.5,
        Boundary::Robin(2.0 * cfg.robin.0),
        Boundary::Robin(2.0 * cfg.robin.1),
    )?;
    let lu = op.implicit(dt)?;
    let steps = cfg.recording.steps(grid)?;
    let meta = TrajectoryMeta { seed: noise.seed, stream_id: noise.stream_id, ..Default::default() };
    let mut traj = Trajectory::new(*grid, 1, meta);
    let mut z = cfg.initial.clone();
    let mut next = 0;
    for n in 0..=grid.n_t {
        if next < steps.len() && steps[next] == n {
            traj.push(grid.t(n), &z);
            next += 1;
        }
        if n == grid.n_t {
            break;
        }
        let xi = noise.row(n);
        for (zj, &w) in z.iter_mut().zip(xi) {
            *zj *= 1.0 + 2.0 * w * dt;
        }
        lu.solve_in_place(&mut z);
        if traj.first_nonpositive.is_none() {
            if let Some(j) = z.iter().position(|&v| !(v > 0.0)) {
                traj.first_nonpositive = Some((grid.t(n + 1), grid.x(j)));
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            traj.status = Status::BlewUp { t: grid.t(n + 1) };
            break;
        }
    }
    Ok(traj)
}

/// `u = ½ log Z` pointwise.
pub fn hopf_cole(traj: &Trajectory) -> Result<Trajectory> {
    let n = traj.nodes_per_snapshot();
    for (k, chunk) in traj.values.chunks(n).enumerate() {
        if let Some(i) = chunk.iter().position(|&z| !(z > 0.0)) {
            let x = traj.grid.x(i % traj.grid.nodes());
            return Err(Error::NonPositive { t: traj.times[k], x, value: chunk[i] });
        }
    }
    Ok(traj.map(|_, _, z| 0.5 * libm::log(z)))
}

/// `u(t,x) − C t − c x` (the first coordinate in two dimensions).
pub fn renormalised_limit_candidate(traj: &Trajectory, c_eps: f64, c: f64) -> Trajectory {
    let nodes = traj.grid.nodes();
    let grid = traj.grid;
    traj.map(|t, i, u| u - c_eps * t - c * grid.x(i % nodes))
}

// ---------------------------------------------------------------- KPZ ----

/// Boundary data of the KPZ approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KpzBoundary {
    DirichletZero,
    /// `∂ₓu(−1) = b̂₋`, `∂ₓu(1) = b̂₊`.
    Neumann { b_minus: f64, b_plus: f64 },
}

/// Time stepping of the diffusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Forward Euler; needs `Δt ≤ Δx²/2`.
    Explicit,
    /// Backward Euler diffusion, explicit nonlinearity and noise.
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KpzConfig {
    pub bc: KpzBoundary,
    pub epsilon: f64,
    pub c_eps: f64,
    /// Coefficient `c` of the drift `2c∂ₓu` (usually 0).
    pub drift_c: f64,
    pub initial: Vec<f64>,
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub blowup_threshold: f64,
    pub recording: Recording,
}

impl KpzConfig {
    /// Semi-implicit Neumann configuration with no drift.
    pub fn neumann(grid: GridSpec, epsilon: f64, c_eps: f64, b: (f64, f64), initial: Vec<f64>) -> Self {
        Self {
            bc: KpzBoundary::Neumann { b_minus: b.0, b_plus: b.1 },
            epsilon,
            c_eps,
            drift_c: 0.0,
            initial,
            grid,
            scheme: Scheme::SemiImplicit,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            recording: Recording::EveryStep,
        }
    }
}

/// Renormalisation constant consistent with the KPZ scheme on `grid`: the
/// stationary bulk variance `E[(DΨ)²]` of the centred difference of the
/// linear part `Ψⁿ⁺¹ = Ψⁿ + Δt(½ΔₕΨ + ξ_εⁿ)` (with `½Δₕ` implicit for the
/// semi-implicit scheme), driven by the discrete mollified noise of
/// [`crate::noise::mollify`] on the same grid. It tends to the continuum
/// `C_ε` as `Δx/ε, √Δt/ε → 0` and removes the `O(Δt/Δx²)` mismatch of the
/// continuum constant at the resolutions used in practice.
///
/// In Fourier variables `θ` on the lattice, the cell noise `ζ` has
/// variance `1/(ΔtΔx)`, `ξ̂ⁿ = Σₖ ŵₖ(θ) ζ̂ⁿ⁻ᵏ`, and `Ψ̂ = Σ_q B_q ζ̂ⁿ⁻q`,
/// so `C = (2π)⁻¹∫ sin²θ/Δx² · Σ_q|B_q|²/(ΔtΔx) dθ`.
pub fn lattice_c_eps_kpz(grid: &GridSpec, rho: &ScaledMollifier, scheme: Scheme) -> Result<f64> {
    lattice_gradient_variance(grid, rho, scheme, None)
}

/// `E[(DΨⁿ)²]` after `n_steps` steps from `Ψ⁰ = 0` on the infinite lattice
/// (the transient version of [`lattice_c_eps_kpz`]).
pub fn lattice_c_eps_kpz_after(grid: &GridSpec, rho: &ScaledMollifier, scheme: Scheme, n_steps: usize) -> Result<f64> {
    lattice_gradient_variance(grid, rho, scheme, Some(n_steps))
}

fn lattice_gradient_variance(
    grid: &GridSpec,
    rho: &ScaledMollifier,
    scheme: Scheme,
    n_steps: Option<usize>,
) -> Result<f64> {
    let taps = crate::noise::mollifier_stencil(grid, rho)?;
    let (dt, dx) = (grid.dt(), grid.dx());
    let lam = dt / (dx * dx);
    if scheme == Scheme::Explicit && lam > 0.5 * (1.0 + 1e-12) {
        return Err(config_err!("explicit scheme needs Δt ≤ Δx²/2, have Δt = {dt}, Δx = {dx}"));
    }
    let k_lo = taps.iter().map(|t| t.0).min().unwrap_or(0);
    let k_hi = taps.iter().map(|t| t.0).max().unwrap_or(0);
    let l_lo = taps.iter().map(|t| t.1).min().unwrap_or(0);
    let l_hi = taps.iter().map(|t| t.1).max().unwrap_or(0);
    let rows = (k_hi - k_lo + 1) as usize;
    let cols = (l_hi - l_lo + 1) as usize;
    const N: usize = 4096;
    let mut acc = Vec::with_capacity(N);
    let mut w_hat = vec![(0.0, 0.0); rows];
    let mut phase = vec![(0.0, 0.0); cols];
    for i in 0..N {
        // Midpoint rule on (0, π); the integrand is even and periodic.
        let theta = core::f64::consts::PI * (i as f64 + 0.5) / N as f64;
        for (c, p) in phase.iter_mut().enumerate() {
            let (s, co) = libm::sincos((l_lo + c as i64) as f64 * theta);
            *p = (co, s);
        }
        w_hat.iter_mut().for_each(|w| *w = (0.0, 0.0));
        for &(k, l, w) in &taps {
            let p = phase[(l - l_lo) as usize];
            let e = &mut w_hat[(k - k_lo) as usize];
            e.0 += w * p.0;
            e.1 += w * p.1;
        }
        let sh = libm::sin(0.5 * theta);
        let x = lam * 2.0 * sh * sh;
        // One-step amplification `r`, first coefficient (`a_m = first·rᵐ`)
        // and the geometric tail Σ_{m≥1} r^{2m} = r²/(1 − r²).
        let (r, first, tail) = match scheme {
            Scheme::SemiImplicit => {
                let r = 1.0 / (1.0 + x);
                (r, r, 1.0 / (x * (2.0 + x)))
            }
            Scheme::Explicit => {
                let r = 1.0 - x;
                (r, 1.0, r * r / (x * (2.0 - x)))
            }
        };
        // B_q = first Σ_{k} r^{q−k} ŵ_k over 0 ≤ q − k < n_steps, by the
        // recursion B_q = r B_{q−1} + first (ŵ_q − r^{n} ŵ_{q−n}).
        let horizon = n_steps.map_or(usize::MAX, |n| n);
        let r_n = n_steps.map_or(0.0, |n| libm::pow(r, n as f64));
        let q_end = n_steps.map_or(rows, |n| rows + n - 1);
        let mut bq = (0.0, 0.0);
        let mut sum = 0.0;
        for q in 0..q_end {
            bq = (r * bq.0, r * bq.1);
            if q < rows {
                bq.0 += first * w_hat[q].0;
                bq.1 += first * w_hat[q].1;
            }
            if q >= horizon && q - horizon < rows {
                bq.0 -= first * r_n * w_hat[q - horizon].0;
                bq.1 -= first * r_n * w_hat[q - horizon].1;
            }
            sum += bq.0 * bq.0 + bq.1 * bq.1;
        }
        if n_steps.is_none() {
            sum += (bq.0 * bq.0 + bq.1 * bq.1) * tail;
        }
        let st = libm::sin(theta);
        acc.push(st * st / (dx * dx) * sum * dt / dx);
    }
    Ok(crate::quad::pairwise_sum(&acc) / N as f64)
}

/// Resolution rule `Δx ≤ ε/8`, `Δt ≤ ε²/8`.
fn check_eps_resolution(grid: &GridSpec, epsilon: f64, with_time: bool) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(config_err!("epsilon must be positive, got {epsilon}"));
    }
    let tol = 1.0 + 1e-9;
    if grid.dx() > epsilon / 8.0 * tol || (with_time && grid.dt() > epsilon * epsilon / 8.0 * tol) {
        return Err(config_err!(
            "grid does not resolve ε = {epsilon}: need Δx ≤ ε/8 and Δt ≤ ε²/8, have Δx = {}, Δt = {}",
            grid.dx(),
            grid.dt()
        ));
    }
    Ok(())
}

/// A mollified field, or one that is identically zero.
fn check_smooth_noise(noise: &NoiseField) -> Result<()> {
    if noise.epsilon.is_none() && noise.values().iter().any(|&v| v != 0.0) {
        return Err(config_err!("the approximating equation needs mollified noise"));
    }
    Ok(())
}

pub fn solve_kpz_approx(cfg: &KpzConfig, xi_eps: &NoiseField) -> Result<Trajectory> {
    let grid = &cfg.grid;
    check_profile(grid, 1, &cfg.initial)?;
    check_noise(xi_eps, grid, NoiseKind::SpaceTime1d)?;
    check_smooth_noise(xi_eps)?;
    check_eps_resolution(grid, cfg.epsilon, true)?;
    let (dt, dx) = (grid.dt(), grid.dx());
    if cfg.scheme == Scheme::Explicit && dt > 0.5 * dx * dx * (1.0 + 1e-12) {
        return Err(config_err!("explicit scheme needs Δt ≤ Δx²/2, have Δt = {dt}, Δx = {dx}"));
    }
    let (left, right) = match cfg.bc {
        KpzBoundary::DirichletZero => {
            if cfg.initial[0].abs() > 1e-12 || cfg.initial[grid.n_x].abs() > 1e-12 {
                return Err(domain_err!("Dirichlet initial data must vanish at ±1"));
            }
            (Boundary::Dirichlet(0.0), Boundary::Dirichlet(0.0))
        }
        KpzBoundary::Neumann { b_minus, b_plus } => (Boundary::Flux(b_minus), Boundary::Flux(b_plus)),
    };
    let op = Diffusion1d::new(grid.n_x, dx, 0.5, left, right)?;
    let lu = match cfg.scheme {
        Scheme::SemiImplicit => Some(op.implicit(dt)?),
        Scheme::Explicit => None,
    };
    let (_, _, _, affine) = op.bands();
    let steps = cfg.recording.steps(grid)?;
    let meta =
        TrajectoryMeta { seed: xi_eps.seed, stream_id: xi_eps.stream_id, c_eps: cfg.c_eps, ..Default::default() };
    let mut traj = Trajectory::new(*grid, 1, meta);
    let nodes = grid.nodes();
    let mut u = cfg.initial.clone();
    let mut lap = vec![0.0; nodes];
    let mut next = 0;
    for n in 0..=grid.n_t {
        if next < steps.len() && steps[next] == n {
            traj.push(grid.t(n), &u);
            next += 1;
        }
        if n == grid.n_t {
            break;
        }
        let xi = xi_eps.row(n);
        let grad = |u: &[f64], j: usize| -> f64 {
            match (j, cfg.bc) {
                (0, KpzBoundary::Neumann { b_minus, .. }) => b_minus,
                (j, KpzBoundary::Neumann { b_plus, .. }) if j == nodes - 1 => b_plus,
                (0, _) => (u[1] - u[0]) / dx,
                (j, _) if j == nodes - 1 => (u[j] - u[j - 1]) / dx,
                (j, _) => (u[j + 1] - u[j - 1]) / (2.0 * dx),
            }
        };
        let source: Vec<f64> = (0..nodes)
            .map(|j| {
                let g = grad(&u, j);
                g * g + 2.0 * cfg.drift_c * g - cfg.c_eps + xi[j]
            })
            .collect();
        match &lu {
            Some(lu) => {
                for j in 0..nodes {
                    u[j] += dt * (source[j] + affine[j]);
                }
                op.enforce(&mut u);
                lu.solve_in_place(&mut u);
            }
            None => {
                op.apply(&u, &mut lap);
                for j in 0..nodes {
                    u[j] += dt * (lap[j] + source[j]);
                }
            }
        }
        op.enforce(&mut u);
        if u.iter().any(|v| !(v.abs() <= cfg.blowup_threshold)) {
            traj.status = Status::BlewUp { t: grid.t(n + 1) };
            break;
        }
    }
    Ok(traj)
}

// --------------------------------------------------------------- gPAM ----

/// Coefficient functions of the generalised PAM, given as plain function
/// pointers (`f(i, j, u)`, `g(u)`, `g′(u)`).
#[derive(Clone, Copy, Debug)]
pub struct GpamCoefficients {
    pub f: fn(usize, usize, f64) -> f64,
    pub g: fn(f64) -> f64,
    pub g_prime: fn(f64) -> f64,
}

fn zero2(_: usize, _: usize, _: f64) -> f64 {
    0.0
}
fn zero1(_: f64) -> f64 {
    0.0
}
fn one1(_: f64) -> f64 {
    1.0
}
fn delta2(i: usize, j: usize, _: f64) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}
fn half_delta_damped(i: usize, j: usize, u: f64) -> f64 {
    if i == j {
        0.5 / (1.0 + u * u)
    } else {
        0.0
    }
}
fn sine_g(u: f64) -> f64 {
    0.5 + 0.25 * libm::sin(u)
}
fn sine_g_prime(u: f64) -> f64 {
    0.25 * libm::cos(u)
}

impl GpamCoefficients {
    /// `f ≡ 0`, `g ≡ 0`: the heat equation.
    pub fn heat() -> Self {
        Self { f: zero2, g: zero1, g_prime: zero1 }
    }

    /// `f ≡ 0`, `g ≡ 1`: additive noise.
    pub fn additive() -> Self {
        Self { f: zero2, g: one1, g_prime: zero1 }
    }

    /// `f_ij = δ_ij`, `g ≡ 0`: `∂ₜu = Δu + |∇u|²`.
    pub fn gradient_squared() -> Self {
        Self { f: delta2, g: zero1, g_prime: zero1 }
    }

    /// A genuinely nonlinear example: `f_ij = δ_ij/(2(1+u²))`,
    /// `g(u) = ½ + ¼ sin u`.
    pub fn generic() -> Self {
        Self { f: half_delta_damped, g: sine_g, g_prime: sine_g_prime }
    }
}

#[derive(Clone, Debug)]
pub struct GpamConfig {
    pub coefficients: GpamCoefficients,
    pub epsilon: f64,
    pub c_eps: f64,
    /// Node values on the square, row-major in `(x₂, x₁)`.
    pub initial: Vec<f64>,
    pub grid: GridSpec,
    pub blowup_threshold: f64,
    pub recording: Recording,
}

/// Solve `(I − θ∂²)` along every line of one axis (Dirichlet nodes fixed).
fn solve_lines(lu: &TridiagonalLu, u: &mut [f64], n: usize, along_x: bool) {
    let mut line = vec![0.0; n];
    for k in 1..n - 1 {
        for i in 0..n {
            line[i] = if along_x { u[k * n + i] } else { u[i * n + k] };
        }
        lu.solve_in_place(&mut line);
        for i in 0..n {
            if along_x {
                u[k * n + i] = line[i];
            } else {
                u[i * n + k] = line[i];
            }
        }
    }
}

/// `∂²` along one axis at interior nodes (zero on the boundary).
fn second_difference(u: &[f64], n: usize, dx: f64, along_x: bool, out: &mut [f64]) {
    let k = 1.0 / (dx * dx);
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 1..n - 1 {
        for c in 1..n - 1 {
            let i = r * n + c;
            let (a, b) = if along_x { (u[i - 1], u[i + 1]) } else { (u[i - n], u[i + n]) };
            out[i] = k * (a - 2.0 * u[i] + b);
        }
    }
}

pub fn solve_gpam_approx(cfg: &GpamConfig, xi_eps: &NoiseField) -> Result<Trajectory> {
    let grid = &cfg.grid;
    check_profile(grid, 2, &cfg.initial)?;
    check_noise(xi_eps, grid, NoiseKind::Spatial2d)?;
    check_smooth_noise(xi_eps)?;
    check_eps_resolution(grid, cfg.epsilon, false)?;
    let n = grid.nodes();
    let on_boundary = |i: usize| {
        let (r, c) = (i / n, i % n);
        r == 0 || c == 0 || r == n - 1 || c == n - 1
    };
    if (0..n * n).any(|i| on_boundary(i) && cfg.initial[i].abs() > 1e-12) {
        return Err(domain_err!("initial data must vanish on the boundary of the square"));
    }
    let (dt, dx) = (grid.dt(), grid.dx());
    // Peaceman–Rachford: (I − ½Δt ∂ₓ²) u* = (I + ½Δt ∂ᵧ²) uⁿ + ½Δt S, then
    // (I − ½Δt ∂ᵧ²) uⁿ⁺¹ = (I + ½Δt ∂ₓ²) u* + ½Δt S.
    let line = Diffusion1d::new(grid.n_x, dx, 1.0, Boundary::Dirichlet(0.0), Boundary::Dirichlet(0.0))?;
    let lu = line.implicit(0.5 * dt)?;
    let steps = cfg.recording.steps(grid)?;
    let meta =
        TrajectoryMeta { seed: xi_eps.seed, stream_id: xi_eps.stream_id, c_eps: cfg.c_eps, ..Default::default() };
    let mut traj = Trajectory::new(*grid, 2, meta);
    let co = &cfg.coefficients;
    let xi = xi_eps.values();
    let mut u = cfg.initial.clone();
    let mut d2 = vec![0.0; n * n];
    let mut src = vec![0.0; n * n];
    let mut next = 0;
    for step in 0..=grid.n_t {
        if next < steps.len() && steps[next] == step {
            traj.push(grid.t(step), &u);
            next += 1;
        }
        if step == grid.n_t {
            break;
        }
        for r in 1..n - 1 {
            for c in 1..n - 1 {
                let i = r * n + c;
                let v = u[i];
                let grad = [(u[i + 1] - u[i - 1]) / (2.0 * dx), (u[i + n] - u[i - n]) / (2.0 * dx)];
                let g = (co.g)(v);
                let mut s = g * (xi[i] - 2.0 * cfg.c_eps * (co.g_prime)(v));
                for a in 0..2 {
                    for b in 0..2 {
                        let fab = (co.f)(a, b, v);
                        if fab != 0.0 {
                            let delta = if a == b { cfg.c_eps * g * g } else { 0.0 };
                            s += fab * (grad[a] * grad[b] - delta);
                        }
                    }
                }
                src[i] = s;
            }
        }
        second_difference(&u, n, dx, false, &mut d2);
        for i in 0..n * n {
            u[i] += 0.5 * dt * (d2[i] + src[i]);
        }
        solve_lines(&lu, &mut u, n, true);
        second_difference(&u, n, dx, true, &mut d2);
        for i in 0..n * n {
            u[i] += 0.5 * dt * (d2[i] + src[i]);
        }
        solve_lines(&lu, &mut u, n, false);
        for i in 0..n * n {
            if on_boundary(i) {
                u[i] = 0.0;
            }
        }
        if u.iter().any(|v| !(v.abs() <= cfg.blowup_threshold)) {
            traj.status = Status::BlewUp { t: grid.t(step + 1) };
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{robin_semigroup_apply, SemigroupOptions};
    use crate::fd::TimeScheme;
    use crate::mollifier::MollifierSpec;
    use crate::noise::{mollify, sample_noise};

    #[test]
    fn zero_noise_she_is_the_robin_semigroup() {
        let grid = GridSpec::interval(0.25, 200, 64).unwrap();
        let z0 = profile_from_fn(&grid, |x| 1.0 + 0.5 * libm::cos(x));
        let cfg = SheConfig { robin: (0.3, -0.2), initial: z0.clone(), grid, recording: Recording::EveryStep };
        let traj = solve_she_robin(&cfg, &NoiseField::zeros(grid, NoiseKind::SpaceTime1d)).unwrap();
        let opts = SemigroupOptions { scheme: TimeScheme::BackwardEuler, n_steps: 200 };
        let reference = robin_semigroup_apply((0.3, -0.2), 0.25, &z0, &opts).unwrap();
        for (a, b) in traj.last().unwrap().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(traj.len(), 201);
    }

    #[test]
    fn hopf_cole_round_trip_and_errors() {
        let grid = GridSpec::interval(1.0, 2, 4).unwrap();
        let z: Vec<f64> = (0..15).map(|i| 0.5 + i as f64 * 0.1).collect();
        let traj = Trajectory::from_snapshots(grid, 1, vec![0.0, 0.5, 1.0], z.clone()).unwrap();
        let u = hopf_cole(&traj).unwrap();
        for (a, b) in u.values().iter().zip(&z) {
            assert!((libm::exp(2.0 * a) - b).abs() < 1e-14);
        }
        let constant = Trajectory::from_snapshots(grid, 1, vec![0.0], vec![libm::exp(0.6); 5]).unwrap();
        assert!(hopf_cole(&constant).unwrap().values().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let mut bad = z;
        bad[7] = -1.0;
        let traj = Trajectory::from_snapshots(grid, 1, vec![0.0, 0.5, 1.0], bad).unwrap();
        match hopf_cole(&traj) {
            Err(Error::NonPositive { t, x, .. }) => assert!(t == 0.5 && (x - 0.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn renormalisation_is_affine() {
        let grid = GridSpec::interval(1.0, 2, 4).unwrap();
        let vals: Vec<f64> = (0..15).map(|i| libm::sin(i as f64)).collect();
        let traj = Trajectory::from_snapshots(grid, 1, vec![0.0, 0.5, 1.0], vals).unwrap();
        assert_eq!(renormalised_limit_candidate(&traj, 0.0, 0.0), traj);
        let twice = renormalised_limit_candidate(&renormalised_limit_candidate(&traj, 1.5, 0.2), -0.5, 0.1);
        let once = renormalised_limit_candidate(&traj, 1.0, 0.3);
        for (a, b) in twice.values().iter().zip(once.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let ct = Trajectory::from_snapshots(grid, 1, vec![0.0, 0.5, 1.0], [0.0, 1.0, 2.0].iter().flat_map(|&t| [t; 5]).collect()).unwrap();
        assert!(renormalised_limit_candidate(&ct, 2.0, 0.0).values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn kpz_fixed_point_and_neumann_decay() {
        let grid = GridSpec::interval(0.5, 800, 64).unwrap();
        let zero = NoiseField::zeros(grid, NoiseKind::SpaceTime1d);
        let cfg = KpzConfig::neumann(grid, 0.25, 0.0, (0.0, 0.0), vec![0.0; 65]);
        let t = solve_kpz_approx(&cfg, &zero).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
        let init = profile_from_fn(&grid, |x| 0.3 * libm::cos(core::f64::consts::PI * x));
        let cfg = KpzConfig::neumann(grid, 0.25, 0.0, (0.0, 0.0), init);
        let t = solve_kpz_approx(&cfg, &zero).unwrap();
        let last = t.last().unwrap();
        let spread = last.iter().cloned().fold(f64::MIN, f64::max) - last.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.3 * 2.0 * libm::exp(-0.5 * core::f64::consts::PI.powi(2) * 0.5) * 1.2, "{spread}");
        // ∫u grows because d/dt ∫u = ∫(∂ₓu)² ≥ 0.
        let mass = |k: usize| t.snapshot(k).iter().sum::<f64>();
        for k in 1..t.len() {
            assert!(mass(k) >= mass(k - 1) - 1e-12);
        }
    }

    #[test]
    fn kpz_checks_resolution_and_cfl() {
        let grid = GridSpec::interval(0.5, 100, 64).unwrap();
        let zero = NoiseField::zeros(grid, NoiseKind::SpaceTime1d);
        let mut cfg = KpzConfig::neumann(grid, 0.25, 0.0, (0.0, 0.0), vec![0.0; 65]);
        assert!(solve_kpz_approx(&cfg, &zero).is_ok());
        cfg.scheme = Scheme::Explicit;
        assert!(solve_kpz_approx(&cfg, &zero).is_err());
        cfg.scheme = Scheme::SemiImplicit;
        cfg.epsilon = 0.1;
        assert!(solve_kpz_approx(&cfg, &zero).is_err());
        let raw = sample_noise(&grid, NoiseKind::SpaceTime1d, 0, 0);
        cfg.epsilon = 0.25;
        assert!(solve_kpz_approx(&cfg, &raw).is_err());
    }

    #[test]
    fn kpz_explicit_and_semi_implicit_agree_to_first_order() {
        let fine = GridSpec::interval(0.25, 2048, 64).unwrap();
        let rho = MollifierSpec::bump(1.0).unwrap().scale(0.25).unwrap();
        let noise = sample_noise(&fine, NoiseKind::SpaceTime1d, 4, 0);
        let gap = |n_t: usize| {
            let grid = GridSpec::interval(0.25, n_t, 64).unwrap();
            let xi = crate::noise::mollify_onto(&noise, &rho, &grid).unwrap();
            let mut cfg = KpzConfig::neumann(grid, 0.25, 1.0, (0.2, -0.1), vec![0.0; 65]);
            cfg.recording = Recording::Times(vec![0.25]);
            let a = solve_kpz_approx(&cfg, &xi).unwrap();
            cfg.scheme = Scheme::Explicit;
            let b = solve_kpz_approx(&cfg, &xi).unwrap();
            a.last().unwrap().iter().zip(b.last().unwrap()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(512), gap(1024));
        assert!(g1 < 1e-2 && (g1 / g2 - 2.0).abs() < 0.3, "{g1} {g2}");
    }

    #[test]
    fn kpz_dirichlet_keeps_boundary_values() {
        let grid = GridSpec::interval(0.25, 200, 64).unwrap();
        let rho = MollifierSpec::bump(1.0).unwrap().scale(0.25).unwrap();
        let xi = mollify(&sample_noise(&grid, NoiseKind::SpaceTime1d, 1, 0), &rho).unwrap();
        let init = profile_from_fn(&grid, |x| 1.0 - x * x);
        let mut cfg = KpzConfig::neumann(grid, 0.25, 0.5, (0.0, 0.0), init);
        cfg.bc = KpzBoundary::DirichletZero;
        let t = solve_kpz_approx(&cfg, &xi).unwrap();
        for k in 0..t.len() {
            let s = t.snapshot(k);
            assert_eq!((s[0], s[64]), (0.0, 0.0));
        }
    }

    fn square(n_t: usize, t_max: f64, n_x: usize) -> GridSpec {
        GridSpec::new(t_max, n_t, (-1.0, 1.0), n_x).unwrap()
    }

    #[test]
    fn gpam_heat_reduction_decays_like_the_first_mode() {
        let grid = square(200, 0.1, 64);
        let pi = core::f64::consts::PI;
        let init = profile_from_fn_2d(&grid, |x, y| libm::cos(0.5 * pi * x) * libm::cos(0.5 * pi * y));
        let cfg = GpamConfig {
            coefficients: GpamCoefficients::heat(),
            epsilon: 0.25,
            c_eps: 0.0,
            initial: init.clone(),
            grid,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            recording: Recording::Times(vec![0.1]),
        };
        let t = solve_gpam_approx(&cfg, &NoiseField::zeros(grid, NoiseKind::Spatial2d)).unwrap();
        let decay = libm::exp(-0.5 * pi * pi * 0.1);
        let err = t.last().unwrap().iter().zip(&init).map(|(a, b)| (a - decay * b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn gpam_blow_up_is_reported() {
        let grid = square(200, 1.0, 16);
        let init = profile_from_fn_2d(&grid, |x, y| 5.0 * (1.0 - x * x) * (1.0 - y * y));
        let cfg = GpamConfig {
            coefficients: GpamCoefficients::gradient_squared(),
            epsilon: 1.0,
            c_eps: 0.0,
            initial: init,
            grid,
            blowup_threshold: 50.0,
            recording: Recording::EveryStep,
        };
        let mut xi = NoiseField::zeros(grid, NoiseKind::Spatial2d);
        xi.epsilon = Some(1.0);
        let big = NoiseField::from_values(grid, NoiseKind::Spatial2d, Some(1.0), vec![2000.0; 17 * 17]).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.coefficients = GpamCoefficients::additive();
        let t = solve_gpam_approx(&cfg2, &big).unwrap();
        assert!(matches!(t.status, Status::BlewUp { .. }));
        assert!(solve_gpam_approx(&cfg, &xi).unwrap().is_completed());
    }

    #[test]
    fn lattice_constant_has_the_small_time_step_limit() {
        // Δt → 0 with a spatial-only stencil: (2π)⁻¹∫|ŵ|² cos²(θ/2) dθ / Δx
        // = (Σ w_l² + Σ w_l w_{l+1}) / (2Δx).
        let grid = GridSpec::interval(1.0, 1 << 22, 64).unwrap();
        let rho = MollifierSpec::spatial_only(1.0).unwrap().scale(0.25).unwrap();
        let taps = crate::noise::mollifier_stencil(&grid, &rho).unwrap();
        let w: Vec<f64> = taps.iter().map(|t| t.2).collect();
        let s0: f64 = w.iter().map(|v| v * v).sum();
        let s1: f64 = w.windows(2).map(|p| p[0] * p[1]).sum();
        let expected = (s0 + s1) / (2.0 * grid.dx());
        let got = lattice_c_eps_kpz(&grid, &rho, Scheme::SemiImplicit).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-4, "{got} vs {expected}");
    }

    #[test]
    fn lattice_constant_approaches_the_continuum_constant() {
        use crate::renorm::{compute_c_eps_kpz, KpzTruncation};
        let spec = MollifierSpec::bump(1.0).unwrap();
        let eps = 0.25;
        let cont = compute_c_eps_kpz(&spec, eps, 48, KpzTruncation::None).unwrap().value;
        let rho = spec.scale(eps).unwrap();
        let coarse = GridSpec::interval(0.25, 64, 64).unwrap();
        let fine = GridSpec::interval(0.25, 2048, 128).unwrap();
        let c_coarse = lattice_c_eps_kpz(&coarse, &rho, Scheme::SemiImplicit).unwrap();
        let c_fine = lattice_c_eps_kpz(&fine, &rho, Scheme::SemiImplicit).unwrap();
        assert!((c_fine / cont - 1.0).abs() < 0.02, "{c_fine} vs {cont}");
        assert!((c_fine - cont).abs() < (c_coarse - cont).abs());
        let c_explicit = lattice_c_eps_kpz(&fine, &rho, Scheme::Explicit).unwrap();
        assert!((c_explicit / cont - 1.0).abs() < 0.02, "{c_explicit} vs {cont}");
    }

    #[test]
    fn lattice_constant_matches_monte_carlo_of_the_linear_scheme() {
        // Ψⁿ⁺¹ = (I − ½Δt Δₕ)⁻¹(Ψⁿ + Δt ξⁿ) from Ψ⁰ = 0 on a wide interval,
        // (DΨ)² averaged over central nodes at the final step.
        let eps = 0.25;
        let rho = MollifierSpec::bump(1.0).unwrap().scale(eps).unwrap();
        let grid = GridSpec::new(0.25, 64, (-3.0, 3.0), 192).unwrap();
        let expected = lattice_c_eps_kpz_after(&grid, &rho, Scheme::SemiImplicit, grid.n_t).unwrap();
        let stationary = lattice_c_eps_kpz(&grid, &rho, Scheme::SemiImplicit).unwrap();
        assert!(expected < stationary);
        let op = Diffusion1d::new(grid.n_x, grid.dx(), 0.5, Boundary::Flux(0.0), Boundary::Flux(0.0)).unwrap();
        let lu = op.implicit(grid.dt()).unwrap();
        let mut samples = Vec::new();
        for path in 0..400 {
            let xi = mollify(&sample_noise(&grid, NoiseKind::SpaceTime1d, 11, path), &rho).unwrap();
            let mut psi = vec![0.0; grid.nodes()];
            for n in 0..grid.n_t {
                for (p, w) in psi.iter_mut().zip(xi.row(n)) {
                    *p += grid.dt() * w;
                }
                lu.solve_in_place(&mut psi);
            }
            let mut acc = 0.0;
            for j in (80..=112).step_by(4) {
                let g = (psi[j + 1] - psi[j - 1]) / (2.0 * grid.dx());
                acc += g * g;
            }
            samples.push(acc / 9.0);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        let se = libm::sqrt(var / n);
        assert!((mean - expected).abs() < 3.0 * se, "{mean} ± {se} vs {expected} (stationary {stationary})");
    }
}
