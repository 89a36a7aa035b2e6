//! The experiments: constants tables, the kernel suite, the SHE mean check,
//! the boundary-renormalisation comparison, `ε`-Cauchy studies and the
//! discrete Cole–Hopf consistency check. Paths run in parallel; results are
//! collected in path order, so every statistic is independent of the number
//! of threads.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use spde_boundary::kernels::{
    gaussian, interval_kernel, reflected_kernel, robin_semigroup_apply, BoundaryCondition, BoundaryKernelSpec,
    SemigroupOptions,
};
use spde_boundary::mollifier::{MollifierSpec, PlanarMollifier, ScaledMollifier};
use spde_boundary::noise::{
    coarsen_time, mollify, mollify_onto, mollify_planar_onto, sample_noise, GridSpec, NoiseField, NoiseKind,
};
use spde_boundary::quad::GaussLegendre;
use spde_boundary::renorm::bulk::{c_eps_gpam_from_eta, c_eps_kpz_from_eta};
use spde_boundary::renorm::{compute_a, compute_c, compute_constants, ConstantsRequest, KpzTruncation, RenormConstants};
use spde_boundary::solvers::{
    hopf_cole, lattice_c_eps_kpz, profile_from_fn, profile_from_fn_2d, renormalised_limit_candidate,
    solve_gpam_approx, solve_kpz_approx, solve_she_robin, GpamConfig, KpzBoundary, KpzConfig, Recording, Scheme,
    SheConfig, Trajectory, DEFAULT_BLOWUP_THRESHOLD,
};
use spde_boundary::Error as CoreError;

use crate::config::{CoefficientPreset, ExperimentConfig};
use crate::fit::{fit_boundary_data, BoundaryFit, ExpandedHopfCole};
use crate::stats::{median, EnsembleStats, MeanSe};
use crate::{stats, LabError, Result};

/// Run `f(path)` for every path in parallel, keeping path order.
pub fn run_paths<T: Send>(n_paths: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n_paths as u64).into_par_iter().map(|p| f(p)).collect()
}

/// Per-path outcome: failed paths (blow-up, loss of positivity) are counted
/// and excluded; any other error aborts the experiment.
enum PathOutcome<T> {
    Ok(T),
    Failed,
}

fn path_failure(path: u64, e: CoreError) -> Result<()> {
    match e {
        CoreError::NonPositive { .. } => Ok(()),
        source => Err(LabError::Path { path, source }),
    }
}

fn split_outcomes<T>(outcomes: Vec<PathOutcome<T>>) -> (Vec<T>, usize) {
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for o in outcomes {
        match o {
            PathOutcome::Ok(v) => ok.push(v),
            PathOutcome::Failed => failed += 1,
        }
    }
    (ok, failed)
}

fn snapshots_of(traj: &Trajectory, times: &[f64]) -> Vec<Vec<f64>> {
    times.iter().map(|&t| traj.snapshot(traj.index_of(t).expect("recorded snapshot")).to_vec()).collect()
}

// ------------------------------------------------------------ constants ----

/// One row of the constants table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantRow {
    pub quantity: String,
    pub epsilon: Option<f64>,
    pub value: f64,
    pub error: f64,
}

/// `a`, `c` (two routes each) and, per `ε`, `C_ε` for KPZ and gPAM and the
/// boundary-layer mass `c̄⁻_ε`.
pub fn run_constants(cfg: &ExperimentConfig, with_c_minus: bool) -> Result<(RenormConstants, Vec<ConstantRow>)> {
    let spec = cfg.mollifier.spec()?;
    let req = ConstantsRequest { gpam_radius: cfg.gpam_radius, with_c_minus, ..Default::default() };
    let k = compute_constants(&spec, cfg.mollifier.cells, &cfg.epsilons, &req)?;
    let mut rows = vec![
        row("a", None, k.a.value, k.a.error),
        row("a_via_f", None, k.a_via_f.value, k.a_via_f.error),
        row("c", None, k.c.value, k.c.error),
        row("c_via_f0", None, k.c_via_f0.value, k.c_via_f0.error),
    ];
    for (i, &e) in k.epsilons.iter().enumerate() {
        rows.push(row("c_eps_kpz", Some(e), k.c_eps_kpz[i].value, k.c_eps_kpz[i].error));
        rows.push(row("c_eps_gpam", Some(e), k.c_eps_gpam[i].value, k.c_eps_gpam[i].error));
        if let Some(cm) = k.c_minus_eps.get(i) {
            rows.push(row("c_minus_eps", Some(e), cm.value, cm.error));
        }
    }
    Ok((k, rows))
}

/// Serialisable description of a [`GridSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridInfo {
    pub t_max: f64,
    pub n_t: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
    pub dt: f64,
    pub dx: f64,
}

impl From<GridSpec> for GridInfo {
    fn from(g: GridSpec) -> Self {
        Self { t_max: g.t_max, n_t: g.n_t, x_lo: g.x_lo, x_hi: g.x_hi, n_x: g.n_x, dt: g.dt(), dx: g.dx() }
    }
}

fn row(q: &str, epsilon: Option<f64>, value: f64, error: f64) -> ConstantRow {
    ConstantRow { quantity: q.into(), epsilon, value, error }
}

// --------------------------------------------------------- kernel suite ----

/// One numerical check: the measured quantity and its pass tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn below(check: &str, value: f64, tolerance: f64) -> Self {
        Self { check: check.into(), value, tolerance, pass: value.is_finite() && value < tolerance }
    }
}

/// Boundary values, boundary derivative, mass, semigroup property and the
/// Gaussian product identity of the method-of-images kernels.
pub fn run_kernel_check() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let dir = BoundaryKernelSpec::interval(BoundaryCondition::Dirichlet);
    let neu = BoundaryKernelSpec::interval(BoundaryCondition::Neumann);

    // Dirichlet kernel at the boundary, on the interval and the square.
    let mut worst: f64 = 0.0;
    for &tau in &[0.01, 0.1, 0.5, 2.0] {
        for i in 0..=20 {
            let y = -1.0 + 0.1 * i as f64;
            for xb in [-1.0, 1.0] {
                worst = worst.max(reflected_kernel(&dir, tau, &[xb], 0.0, &[y])?.value.abs());
                let sq = BoundaryKernelSpec::square(BoundaryCondition::Dirichlet);
                worst = worst.max(reflected_kernel(&sq, tau, &[xb, 0.3], 0.0, &[y, -0.2])?.value.abs());
            }
        }
    }
    rows.push(CheckRow::below("dirichlet_boundary_value", worst, 1e-10));

    // Neumann boundary difference quotient: first order in Δx, so halving
    // Δx halves it.
    let tau = 0.2;
    let y = 0.4;
    let quotient = |h: f64| -> Result<f64> {
        let a = reflected_kernel(&neu, tau, &[1.0], 0.0, &[y])?.value;
        let b = reflected_kernel(&neu, tau, &[1.0 - h], 0.0, &[y])?.value;
        Ok(((a - b) / h).abs())
    };
    let (q1, q2) = (quotient(1e-2)?, quotient(5e-3)?);
    let ratio = q1 / q2;
    rows.push(CheckRow::below("neumann_quotient_order_gap", (ratio - 2.0).abs(), 0.1));
    rows.push(CheckRow::below("neumann_quotient_at_h_5e-3", q2, 0.05));

    // Mass conservation of the Neumann kernel.
    let gl = GaussLegendre::new(40);
    let mut mass_gap: f64 = 0.0;
    for &tau in &[0.05, 0.3, 1.0, 3.0] {
        for &y in &[-0.9, 0.0, 0.7] {
            let m: f64 = (0..16)
                .map(|p| {
                    let (a, b) = (-1.0 + p as f64 / 8.0, -1.0 + (p + 1) as f64 / 8.0);
                    gl.integrate(a, b, |x| interval_kernel(BoundaryCondition::Neumann, 8, tau, x, y).value)
                })
                .sum();
            mass_gap = mass_gap.max((m - 1.0).abs());
        }
    }
    rows.push(CheckRow::below("neumann_mass_conservation", mass_gap, 1e-8));

    // Chapman–Kolmogorov: ∫ G(t,x;s,z) G(s,z;r,y) dz = G(t,x;r,y).
    let mut ck: f64 = 0.0;
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        for &(x, y) in &[(0.3, -0.5), (-0.9, 0.95), (0.0, 0.0)] {
            let lhs: f64 = (0..32)
                .map(|p| {
                    let (a, b) = (-1.0 + p as f64 / 16.0, -1.0 + (p + 1) as f64 / 16.0);
                    gl.integrate(a, b, |z| {
                        interval_kernel(bc, 8, 0.15, x, z).value * interval_kernel(bc, 8, 0.1, z, y).value
                    })
                })
                .sum();
            let rhs = interval_kernel(bc, 8, 0.25, x, y).value;
            ck = ck.max((lhs - rhs).abs());
        }
    }
    rows.push(CheckRow::below("chapman_kolmogorov", ck, 1e-6));

    // N(x,t) N(y,s) = N(x+y, t+s) N(x − (t/(t+s))(x+y), ts/(t+s)) on
    // deterministic pseudo-random draws.
    let mut worst: f64 = 0.0;
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut uniform = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let (x, y) = (4.0 * uniform() - 2.0, 4.0 * uniform() - 2.0);
        let (t, s) = (0.05 + uniform(), 0.05 + uniform());
        let lhs = gaussian(x, t) * gaussian(y, s);
        let rhs = gaussian(x + y, t + s) * gaussian(x - t / (t + s) * (x + y), t * s / (t + s));
        worst = worst.max((lhs - rhs).abs());
    }
    rows.push(CheckRow::below("gaussian_product_identity", worst, 1e-12));
    Ok(rows)
}

// ------------------------------------------------------- SHE mean check ----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SheMeanReport {
    pub stats: EnsembleStats,
    /// Deterministic Robin solution at each snapshot.
    pub oracle: Vec<Vec<f64>>,
    /// Time-discretisation error estimate of the oracle: the change when
    /// its number of Crank–Nicolson steps is doubled.
    pub oracle_error: Vec<Vec<f64>>,
    /// Largest `|mean − oracle| / se` per snapshot.
    pub max_z_score: Vec<f64>,
    /// `∫Z dx` at the last snapshot (mean and SE over paths).
    pub mass: MeanSe,
}

/// Initial profile of the SHE mean check.
pub fn she_initial(x: f64) -> f64 {
    1.0 + 0.5 * (PI * x / 2.0).cos()
}

/// Ensemble of the multiplicative SHE with Robin data against the
/// deterministic Robin semigroup (`E Z` solves the heat equation).
pub fn run_she_mean_check(cfg: &ExperimentConfig) -> Result<SheMeanReport> {
    let grid = fixed_grid(cfg, 64, 2048)?;
    let initial = profile_from_fn(&grid, she_initial);
    let she = SheConfig { robin: cfg.robin, initial: initial.clone(), grid, recording: Recording::Times(cfg.snapshots.clone()) };
    let outcomes = run_paths(cfg.n_paths, |p| {
        let noise = sample_noise(&grid, NoiseKind::SpaceTime1d, cfg.seed, p);
        let traj = solve_she_robin(&she, &noise).map_err(|source| LabError::Path { path: p, source })?;
        Ok(if traj.is_completed() { PathOutcome::Ok(snapshots_of(&traj, &cfg.snapshots)) } else { PathOutcome::Failed })
    })?;
    let (samples, failed) = split_outcomes(outcomes);
    let xs = grid.xs();
    let stats = EnsembleStats::from_paths("she", None, &cfg.snapshots, &xs, &samples, failed);
    let mut oracle = Vec::new();
    let mut oracle_error = Vec::new();
    let mut max_z_score = Vec::new();
    for prof in &stats.profiles {
        let n_steps = ((prof.t / grid.dt()).round() as usize * 4).max(1);
        let det = robin_semigroup_apply(cfg.robin, prof.t, &initial, &SemigroupOptions { n_steps, ..Default::default() })?;
        let fine =
            robin_semigroup_apply(cfg.robin, prof.t, &initial, &SemigroupOptions { n_steps: 2 * n_steps, ..Default::default() })?;
        oracle_error.push(det.iter().zip(&fine).map(|(a, b)| (a - b).abs()).collect());
        let z = prof
            .mean
            .iter()
            .zip(&prof.se)
            .zip(&det)
            .map(|((m, s), d)| if s > &0.0 { (m - d).abs() / s } else { (m - d).abs() / 1e-300 })
            .fold(0.0, f64::max);
        max_z_score.push(if prof.t == 0.0 { 0.0 } else { z });
        oracle.push(det);
    }
    let last = cfg.snapshots.len() - 1;
    let masses: Vec<f64> = samples.iter().map(|s| trapezoid(&s[last], grid.dx())).collect();
    Ok(SheMeanReport { stats, oracle, oracle_error, max_z_score, mass: stats::mean_se(&masses) })
}

fn trapezoid(v: &[f64], dx: f64) -> f64 {
    let n = v.len();
    dx * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

fn fixed_grid(cfg: &ExperimentConfig, n_x: usize, n_t: usize) -> Result<GridSpec> {
    Ok(GridSpec::interval(cfg.grid.t_max, cfg.grid.n_t.unwrap_or(n_t), cfg.grid.n_x.unwrap_or(n_x))?)
}

// --------------------------------------------- boundary renormalisation ----

/// Constants used at one `ε` of the boundary-renormalisation experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonConstants {
    pub epsilon: f64,
    /// Continuum `C_ε` (whole-space, `T = ∞`).
    pub c_eps_continuum: f64,
    pub c_eps_continuum_error: f64,
    /// Scheme-consistent `C_ε` actually subtracted by the solver.
    pub c_eps_lattice: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRenormLevel {
    pub constants: EpsilonConstants,
    pub kpz_grid: GridInfo,
    pub she_grid: GridInfo,
    /// Renormalised KPZ `û − C_ε t − c x` (with `C_ε` subtracted in the
    /// solver).
    pub kpz: EnsembleStats,
    /// Hopf–Cole solution with boundary data `b̂± − c` (no `a` shift).
    pub hopf_cole: EnsembleStats,
    /// Pathwise difference `kpz − hopf_cole`.
    pub difference: EnsembleStats,
    /// Largest `|Δmean|/sqrt(se₁² + se₂²)` between `kpz` and `hopf_cole`
    /// at the last snapshot.
    pub max_z_last: f64,
    /// Effective boundary data fitted to the mean of `difference`.
    pub fit: BoundaryFit,
    /// Jackknife (over paths) estimate and standard error of the fitted
    /// asymmetry `b₊ − b₋`.
    pub asymmetry: MeanSe,
    pub control: Option<ControlLevel>,
}

/// The same experiment with the spatial-only mollifier (`a = c = 0`) on
/// the same noise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlLevel {
    pub c_eps_lattice: f64,
    pub kpz: EnsembleStats,
    pub difference: EnsembleStats,
    pub fit: BoundaryFit,
    pub asymmetry: MeanSe,
    /// Largest `|Δmean|/sqrt(se₁² + se₂²)` between the control KPZ and the
    /// Hopf–Cole solution at the last snapshot.
    pub max_z_last: f64,
    /// Asymmetry of the main mollifier minus that of the control, path by
    /// path block (jackknife standard error).
    pub paired_asymmetry: MeanSe,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRenormReport {
    pub a: f64,
    pub a_error: f64,
    pub c: f64,
    pub c_error: f64,
    pub b_hat: (f64, f64),
    /// `b̂₊ − b̂₋ + 2a`, the asymmetry the limit should have.
    pub predicted_asymmetry: f64,
    pub levels: Vec<BoundaryRenormLevel>,
}

/// Finite-difference step in `b` for the Hopf–Cole sensitivities.
const SENSITIVITY_STEP: f64 = 0.1;

struct RenormPath {
    kpz: Vec<Vec<f64>>,
    ctrl: Option<Vec<Vec<f64>>>,
    hc: [Vec<Vec<f64>>; 5],
}

/// For each `ε`: renormalised KPZ driven by `ρ_ε ∗ ξ` against the
/// Hopf–Cole solution driven by the same white noise `ξ`, plus a fit of the
/// effective boundary data. The SHE runs on the raw noise with a time step
/// `she_time_refine` times finer; the KPZ noise is `ρ_ε` applied to the
/// exact time aggregation of the same cells.
pub fn run_boundary_renorm(cfg: &ExperimentConfig) -> Result<BoundaryRenormReport> {
    let spec = cfg.mollifier.spec()?;
    let eta = spec.autocorrelation(cfg.mollifier.cells)?;
    let a = compute_a(&eta);
    let c = compute_c(&eta);
    let mut levels = Vec::new();
    for &eps in &cfg.epsilons {
        levels.push(boundary_renorm_level(cfg, &spec, &eta, c.value, eps)?);
    }
    Ok(BoundaryRenormReport {
        a: a.value,
        a_error: a.error,
        c: c.value,
        c_error: c.error,
        b_hat: cfg.b_hat,
        predicted_asymmetry: cfg.b_hat.1 - cfg.b_hat.0 + 2.0 * a.value,
        levels,
    })
}

fn boundary_renorm_level(
    cfg: &ExperimentConfig,
    spec: &MollifierSpec,
    eta: &spde_boundary::mollifier::Autocorrelation,
    c: f64,
    eps: f64,
) -> Result<BoundaryRenormLevel> {
    let kpz_grid = cfg.grid_for(eps)?;
    let refine = cfg.grid.she_time_refine;
    let she_grid = GridSpec::interval(kpz_grid.t_max, kpz_grid.n_t * refine, kpz_grid.n_x)?;
    let rho = spec.scale(eps)?;
    let cont = c_eps_kpz_from_eta(eta, eps, KpzTruncation::None)?;
    let c_lat = lattice_c_eps_kpz(&kpz_grid, &rho, Scheme::SemiImplicit)?;
    let control = if cfg.control {
        let ctrl = MollifierSpec::spatial_only(spec.radius())?.scale(eps)?;
        let c_ctrl = lattice_c_eps_kpz(&kpz_grid, &ctrl, Scheme::SemiImplicit)?;
        Some((ctrl, c_ctrl))
    } else {
        None
    };
    let times = &cfg.snapshots;
    let u0 = vec![0.0; kpz_grid.nodes()];
    // Hopf–Cole initial data for u₀ = û₀ − cx.
    let z0 = profile_from_fn(&kpz_grid, |x| (-2.0 * c * x).exp());
    let centre = (cfg.b_hat.0 - c, cfg.b_hat.1 - c);
    let h = SENSITIVITY_STEP;
    let robins = [
        centre,
        (centre.0 - h, centre.1),
        (centre.0 + h, centre.1),
        (centre.0, centre.1 - h),
        (centre.0, centre.1 + h),
    ];
    let mut kpz_cfg = KpzConfig::neumann(kpz_grid, eps, c_lat, cfg.b_hat, u0.clone());
    kpz_cfg.recording = Recording::Times(times.clone());
    let ctrl_cfg = control.as_ref().map(|(_, c_ctrl)| {
        let mut k = KpzConfig::neumann(kpz_grid, eps, *c_ctrl, cfg.b_hat, u0.clone());
        k.recording = Recording::Times(times.clone());
        k
    });
    let outcomes = run_paths(cfg.n_paths, |p| {
        let raw = sample_noise(&she_grid, NoiseKind::SpaceTime1d, cfg.seed, p);
        let mut hc: [Vec<Vec<f64>>; 5] = Default::default();
        for (slot, &robin) in hc.iter_mut().zip(&robins) {
            let she = SheConfig { robin, initial: z0.clone(), grid: she_grid, recording: Recording::Times(times.clone()) };
            let z = solve_she_robin(&she, &raw).map_err(|source| LabError::Path { path: p, source })?;
            if !z.is_completed() {
                return Ok(PathOutcome::Failed);
            }
            match hopf_cole(&z) {
                Ok(u) => *slot = snapshots_of(&u, times),
                Err(e) => {
                    path_failure(p, e)?;
                    return Ok(PathOutcome::Failed);
                }
            }
        }
        let coarse = coarsen_time(&raw, refine)?;
        let solve = |kc: &KpzConfig, rho: &ScaledMollifier, c: f64| -> Result<Option<Vec<Vec<f64>>>> {
            let xi = mollify(&coarse, rho)?;
            let traj = solve_kpz_approx(kc, &xi).map_err(|source| LabError::Path { path: p, source })?;
            Ok(traj.is_completed().then(|| snapshots_of(&renormalised_limit_candidate(&traj, 0.0, c), times)))
        };
        let Some(kpz) = solve(&kpz_cfg, &rho, c)? else { return Ok(PathOutcome::Failed) };
        let ctrl = match (&control, &ctrl_cfg) {
            (Some((ctrl_rho, _)), Some(kc)) => match solve(kc, ctrl_rho, 0.0)? {
                Some(u) => Some(u),
                None => return Ok(PathOutcome::Failed),
            },
            _ => None,
        };
        Ok(PathOutcome::Ok(RenormPath { kpz, ctrl, hc }))
    })?;
    let (paths, failed) = split_outcomes(outcomes);
    if paths.len() < 2 {
        return Err(LabError::Config(format!("only {} of {} paths completed at ε = {eps}", paths.len(), cfg.n_paths)));
    }
    let xs = kpz_grid.xs();
    let ensemble = |label: &str, f: &dyn Fn(&RenormPath) -> Vec<Vec<f64>>| {
        let samples: Vec<Vec<Vec<f64>>> = paths.iter().map(f).collect();
        (EnsembleStats::from_paths(label, Some(eps), times, &xs, &samples, failed), samples)
    };
    let (kpz, _) = ensemble("kpz_renormalised", &|p| p.kpz.clone());
    let (hopf_cole, _) = ensemble("hopf_cole", &|p| p.hc[0].clone());
    let (difference, diff_samples) = ensemble("difference", &|p| sub(&p.kpz, &p.hc[0]));
    let mean_of = |f: &dyn Fn(&RenormPath) -> Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        ensemble("", f).0.profiles.into_iter().map(|p| p.mean).collect()
    };
    let zero: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; xs.len()]).collect();
    let family = ExpandedHopfCole {
        centre,
        base: zero,
        s_minus: mean_of(&|p| scaled(&sub(&p.hc[2], &p.hc[1]), 0.5 / h)),
        s_plus: mean_of(&|p| scaled(&sub(&p.hc[4], &p.hc[3]), 0.5 / h)),
        q_minus: mean_of(&|p| scaled(&add(&sub(&p.hc[2], &p.hc[0]), &sub(&p.hc[1], &p.hc[0])), 1.0 / (h * h))),
        q_plus: mean_of(&|p| scaled(&add(&sub(&p.hc[4], &p.hc[0]), &sub(&p.hc[3], &p.hc[0])), 1.0 / (h * h))),
    };
    let fit = fit_boundary_data(&difference, &family, true, centre)?;
    // Asymmetry fitted to the mean over a subset of paths (weights fixed at
    // the full-sample standard errors).
    let subset_asymmetry = |full: &EnsembleStats, samples: &[Vec<Vec<f64>>], kept: &[usize]| -> Result<f64> {
        let sub_samples: Vec<Vec<Vec<f64>>> = kept.iter().map(|&i| samples[i].clone()).collect();
        let mut st = EnsembleStats::from_paths("", Some(eps), times, &xs, &sub_samples, 0);
        for (p, f) in st.profiles.iter_mut().zip(&full.profiles) {
            p.se.clone_from(&f.se);
        }
        Ok(fit_boundary_data(&st, &family, true, centre)?.asymmetry)
    };
    let groups = cfg.jackknife_groups;
    let asymmetry = stats::jackknife(paths.len(), groups, |k| subset_asymmetry(&difference, &diff_samples, k))?;
    let last = times.len() - 1;
    let control = match control {
        Some((_, c_ctrl)) => {
            let (ctrl_kpz, _) = ensemble("control_kpz_renormalised", &|p| p.ctrl.clone().expect("control solved"));
            let (ctrl_diff, ctrl_samples) =
                ensemble("control_difference", &|p| sub(p.ctrl.as_ref().expect("control solved"), &p.hc[0]));
            let ctrl_fit = fit_boundary_data(&ctrl_diff, &family, true, centre)?;
            let ctrl_asym = stats::jackknife(paths.len(), groups, |k| subset_asymmetry(&ctrl_diff, &ctrl_samples, k))?;
            let paired = stats::jackknife(paths.len(), groups, |k| {
                Ok::<f64, LabError>(
                    subset_asymmetry(&difference, &diff_samples, k)? - subset_asymmetry(&ctrl_diff, &ctrl_samples, k)?,
                )
            })?;
            Some(ControlLevel {
                c_eps_lattice: c_ctrl,
                max_z_last: ctrl_kpz.profiles[last].max_standardised_distance(&hopf_cole.profiles[last]),
                kpz: ctrl_kpz,
                difference: ctrl_diff,
                fit: ctrl_fit,
                asymmetry: ctrl_asym,
                paired_asymmetry: paired,
            })
        }
        None => None,
    };
    let max_z_last = kpz.profiles[last].max_standardised_distance(&hopf_cole.profiles[last]);
    Ok(BoundaryRenormLevel {
        constants: EpsilonConstants {
            epsilon: eps,
            c_eps_continuum: cont.value,
            c_eps_continuum_error: cont.error,
            c_eps_lattice: c_lat,
        },
        kpz_grid: kpz_grid.into(),
        she_grid: she_grid.into(),
        kpz,
        hopf_cole,
        difference,
        max_z_last,
        fit,
        asymmetry,
        control,
    })
}

fn zip_with(a: &[Vec<f64>], b: &[Vec<f64>], f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| f(*u, *v)).collect()).collect()
}

fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    zip_with(a, b, |u, v| u - v)
}

fn add(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    zip_with(a, b, |u, v| u + v)
}

fn scaled(a: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter().map(|x| x.iter().map(|u| u * s).collect()).collect()
}

// ------------------------------------------------------- ε-Cauchy study ----

/// Pairwise distances between consecutive `ε` on common nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyReport {
    pub epsilons: Vec<f64>,
    pub c_eps: Vec<f64>,
    /// `distances[k][p]`: sup-distance between `ε_k` and `ε_{k+1}` on path `p`.
    pub distances: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    /// Statistics of the solution at the smallest `ε`.
    pub finest: EnsembleStats,
    pub n_failed: usize,
}

impl CauchyReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.medians.windows(2).all(|w| w[1] < w[0])
    }
}

/// Grids for `ε_k = ε₀/2ᵏ`: `Δx = ε/cells_per_eps`, and `Δt = ε²/steps`
/// (KPZ) or a common `Δt` (gPAM); all times are multiples of the coarsest.
fn halving_levels(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    let e0 = cfg.epsilons[0];
    cfg.epsilons
        .iter()
        .map(|&e| {
            let r = e0 / e;
            let k = r.log2().round();
            if (r - 2f64.powf(k)).abs() > 1e-9 * r {
                Err(LabError::Config(format!("ε-Cauchy studies need ε halvings, got {:?}", cfg.epsilons)))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

/// KPZ with homogeneous Dirichlet data: per path, the same white noise
/// mollified at every `ε`.
pub fn run_kpz_dirichlet_cauchy(cfg: &ExperimentConfig) -> Result<CauchyReport> {
    let levels = halving_levels(cfg)?;
    let spec = cfg.mollifier.spec()?;
    let e0 = cfg.epsilons[0];
    let coarse = cfg.grid_for(e0)?;
    let grids: Vec<GridSpec> = levels
        .iter()
        .map(|&k| GridSpec::interval(coarse.t_max, coarse.n_t << (2 * k), coarse.n_x << k))
        .collect::<std::result::Result<_, _>>()?;
    let finest = *grids.last().expect("at least one ε");
    let k_max = *levels.last().expect("at least one ε");
    let raw_grid = GridSpec::interval(finest.t_max, finest.n_t, finest.n_x)?;
    let c_eps: Vec<f64> = grids
        .iter()
        .zip(&cfg.epsilons)
        .map(|(g, &e)| lattice_c_eps_kpz(g, &spec.scale(e)?, Scheme::SemiImplicit))
        .collect::<std::result::Result<_, _>>()?;
    let times: Vec<f64> = (0..=coarse.n_t).map(|n| coarse.t(n)).collect();
    let outcomes = run_paths(cfg.n_paths, |p| {
        let raw = sample_noise(&raw_grid, NoiseKind::SpaceTime1d, cfg.seed, p);
        let mut sols = Vec::with_capacity(grids.len());
        for (i, (&k, g)) in levels.iter().zip(&grids).enumerate() {
            let eps = cfg.epsilons[i];
            let agg = coarsen_time(&raw, 1 << (2 * (k_max - k)))?;
            let xi = mollify_onto(&agg, &spec.scale(eps)?, g)?;
            let u0 = profile_from_fn(g, |x| 0.5 * (PI * x / 2.0).cos());
            let mut kc = KpzConfig::neumann(*g, eps, c_eps[i], (0.0, 0.0), u0);
            kc.bc = KpzBoundary::DirichletZero;
            kc.recording = Recording::Times(times.clone());
            let traj = solve_kpz_approx(&kc, &xi).map_err(|source| LabError::Path { path: p, source })?;
            if !traj.is_completed() {
                return Ok(PathOutcome::Failed);
            }
            let stride = 1usize << k;
            sols.push(snapshots_of(&traj, &times).into_iter().map(|s| s.into_iter().step_by(stride).collect()).collect());
        }
        Ok(PathOutcome::Ok(sols))
    })?;
    cauchy_report(cfg, c_eps, outcomes, &times, &coarse.xs(), "kpz_dirichlet")
}

fn cauchy_report(
    cfg: &ExperimentConfig,
    c_eps: Vec<f64>,
    outcomes: Vec<PathOutcome<Vec<Vec<Vec<f64>>>>>,
    times: &[f64],
    xs: &[f64],
    label: &str,
) -> Result<CauchyReport> {
    let (paths, failed) = split_outcomes(outcomes);
    let n_levels = cfg.epsilons.len();
    let distances: Vec<Vec<f64>> = (0..n_levels.saturating_sub(1))
        .map(|k| paths.iter().map(|p| sup_distance(&p[k], &p[k + 1])).collect())
        .collect();
    let medians = distances.iter().map(|d| median(d)).collect();
    let finest_samples: Vec<Vec<Vec<f64>>> = paths.iter().map(|p| p[n_levels - 1].clone()).collect();
    let finest = EnsembleStats::from_paths(label, cfg.epsilons.last().copied(), times, xs, &finest_samples, failed);
    Ok(CauchyReport { epsilons: cfg.epsilons.clone(), c_eps, distances, medians, finest, n_failed: failed })
}

/// Common time grid of the gPAM study: `n_t` steps up to `t_max`.
fn gpam_time_steps(cfg: &ExperimentConfig) -> usize {
    cfg.grid.n_t.unwrap_or(256)
}

/// Generalised PAM on the square: per path, one spatial white noise
/// mollified at every `ε` (halvings), common nodes of the coarsest grid.
pub fn run_gpam_cauchy(cfg: &ExperimentConfig) -> Result<CauchyReport> {
    let levels = halving_levels(cfg)?;
    let planar = PlanarMollifier::new(cfg.gpam_radius)?;
    let planar_eta = planar.autocorrelation(cfg.mollifier.cells)?;
    let e0 = cfg.epsilons[0];
    let n_t = gpam_time_steps(cfg);
    let n0 = even(2.0 * cfg.grid.cells_per_eps as f64 / e0);
    let grids: Vec<GridSpec> = levels
        .iter()
        .map(|&k| GridSpec::interval(cfg.grid.t_max, n_t, n0 << k))
        .collect::<std::result::Result<_, _>>()?;
    let finest = *grids.last().expect("at least one ε");
    let c_eps: Vec<f64> = cfg
        .epsilons
        .iter()
        .map(|&e| Ok(c_eps_gpam_from_eta(&planar_eta, e, 1.0)?.value))
        .collect::<Result<_>>()?;
    let coeffs = cfg.gpam.coefficients();
    let record_every = (n_t / 8).max(1);
    let times: Vec<f64> = (0..=n_t).step_by(record_every).map(|n| grids[0].t(n)).collect();
    let outcomes = run_paths(cfg.n_paths, |p| {
        let raw = sample_noise(&finest, NoiseKind::Spatial2d, cfg.seed, p);
        let mut sols = Vec::with_capacity(grids.len());
        for (i, (&k, g)) in levels.iter().zip(&grids).enumerate() {
            let eps = cfg.epsilons[i];
            let xi = mollify_planar_onto(&raw, &planar, eps, g)?;
            let gc = GpamConfig {
                coefficients: coeffs,
                epsilon: eps,
                c_eps: c_eps[i],
                initial: gpam_initial(g),
                grid: *g,
                blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
                recording: Recording::Times(times.clone()),
            };
            let traj = solve_gpam_approx(&gc, &xi).map_err(|source| LabError::Path { path: p, source })?;
            if !traj.is_completed() {
                return Ok(PathOutcome::Failed);
            }
            sols.push(subsample_2d(&traj, &times, g.nodes(), 1 << k));
        }
        Ok(PathOutcome::Ok(sols))
    })?;
    // Profiles along x₂ = 0 of the coarsest grid as the reported statistics.
    // Statistics are gathered over the flattened square (row-major, x₁
    // varying fastest) and then reduced to the centre line.
    let xs = grids[0].xs();
    let flat: Vec<f64> = xs.iter().flat_map(|_| xs.iter().copied()).collect();
    cauchy_report(cfg, c_eps, outcomes, &times, &flat, "gpam").map(|mut r| {
        r.finest = centre_line(&r.finest, &xs);
        r
    })
}

fn even(x: f64) -> usize {
    let n = x.ceil() as usize;
    n + n % 2
}

/// `u₀(x) = ½ cos(πx₁/2) cos(πx₂/2)`, vanishing on the boundary.
pub fn gpam_initial(g: &GridSpec) -> Vec<f64> {
    profile_from_fn_2d(g, |x, y| 0.5 * (PI * x / 2.0).cos() * (PI * y / 2.0).cos())
}

/// Snapshots restricted to every `stride`-th node in both directions.
fn subsample_2d(traj: &Trajectory, times: &[f64], n: usize, stride: usize) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let s = traj.snapshot(traj.index_of(t).expect("recorded snapshot"));
            let mut out = Vec::new();
            for r in (0..n).step_by(stride) {
                for c in (0..n).step_by(stride) {
                    out.push(s[r * n + c]);
                }
            }
            out
        })
        .collect()
}

/// Reduce square-grid statistics to the line `x₂ = 0` (`n` nodes per side).
fn centre_line(stats: &EnsembleStats, xs: &[f64]) -> EnsembleStats {
    let n = xs.len();
    let mid = n / 2;
    let mut out = stats.clone();
    for p in out.profiles.iter_mut() {
        p.xs = xs.to_vec();
        p.mean = p.mean[mid * n..(mid + 1) * n].to_vec();
        p.se = p.se[mid * n..(mid + 1) * n].to_vec();
    }
    out
}

/// Additive-noise oracle on the square: with `g ≡ 1`, `f ≡ 0` the
/// semi-discrete equation `u̇ = Δₕu + ξ_ε` is solved exactly in the
/// discrete sine basis: `û_k(t) = e^{λ_k t} û₀_k + (e^{λ_k t} − 1)/λ_k ξ̂_k`.
pub fn additive_oracle(grid: &GridSpec, initial: &[f64], xi: &[f64], t: f64) -> Vec<f64> {
    let n = grid.nodes();
    let m = n - 2;
    let h = grid.dx();
    // Orthonormal sine basis on the interior nodes.
    let norm = (2.0 / (m + 1) as f64).sqrt();
    let basis: Vec<Vec<f64>> = (1..=m)
        .map(|k| (1..=m).map(|j| norm * (PI * (k * j) as f64 / (m + 1) as f64).sin()).collect())
        .collect();
    let lam: Vec<f64> = (1..=m).map(|k| -4.0 / (h * h) * (PI * k as f64 / (2.0 * (m + 1) as f64)).sin().powi(2)).collect();
    let interior = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                out[r * m + c] = v[(r + 1) * n + c + 1];
            }
        }
        out
    };
    let transform = |v: &[f64]| -> Vec<f64> {
        // Separable 2D sine transform (the basis is symmetric and orthonormal).
        let mut tmp = vec![0.0; m * m];
        for r in 0..m {
            for k in 0..m {
                tmp[r * m + k] = (0..m).map(|c| basis[k][c] * v[r * m + c]).sum();
            }
        }
        let mut out = vec![0.0; m * m];
        for l in 0..m {
            for k in 0..m {
                out[l * m + k] = (0..m).map(|r| basis[l][r] * tmp[r * m + k]).sum();
            }
        }
        out
    };
    let u0 = transform(&interior(initial));
    let f = transform(&interior(xi));
    let mut coeff = vec![0.0; m * m];
    for l in 0..m {
        for k in 0..m {
            let lk = lam[l] + lam[k];
            let e = (lk * t).exp();
            coeff[l * m + k] = e * u0[l * m + k] + (e - 1.0) / lk * f[l * m + k];
        }
    }
    let back = transform(&coeff);
    let mut out = vec![0.0; n * n];
    for r in 0..m {
        for c in 0..m {
            out[(r + 1) * n + c + 1] = back[r * m + c];
        }
    }
    out
}

/// Solver against oracle at one probe node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditiveProbe {
    pub x1: f64,
    pub x2: f64,
    /// Ensemble mean and SE of the solver.
    pub solver: MeanSe,
    /// Ensemble mean and SE of the pathwise oracle (same noise).
    pub oracle: MeanSe,
    /// Mean of the oracle, `e^{tΔₕ}u₀` (the noise term is centred).
    pub oracle_mean: f64,
    /// `|solver.mean − oracle_mean| / solver.se`.
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditiveCheck {
    pub epsilon: f64,
    pub t: f64,
    pub probes: Vec<AdditiveProbe>,
    /// Largest pathwise sup-distance between solver and oracle (time
    /// discretisation error of the solver).
    pub max_sup_distance: f64,
}

impl AdditiveCheck {
    pub fn max_z_score(&self) -> f64 {
        self.probes.iter().map(|p| p.z_score).fold(0.0, f64::max)
    }
}

/// The additive gPAM (`g ≡ 1`, `f ≡ 0`) solver against the exact
/// sine-basis solution driven by the same mollified noise.
pub fn run_gpam_additive_check(cfg: &ExperimentConfig, eps: f64) -> Result<AdditiveCheck> {
    let planar = PlanarMollifier::new(cfg.gpam_radius)?;
    let n_t = gpam_time_steps(cfg);
    let grid = GridSpec::interval(cfg.grid.t_max, n_t, even(2.0 * cfg.grid.cells_per_eps as f64 / eps))?;
    let initial = gpam_initial(&grid);
    let n = grid.nodes();
    let probes: Vec<usize> = [(n / 2, n / 2), (n / 2, n / 4), (n / 4, n / 4), (3 * n / 4, n / 2)]
        .iter()
        .map(|&(r, c)| r * n + c)
        .collect();
    let t = grid.t_max;
    let heat = additive_oracle(&grid, &initial, &vec![0.0; n * n], t);
    let results = run_paths(cfg.n_paths, |p| {
        let raw = sample_noise(&grid, NoiseKind::Spatial2d, cfg.seed, p);
        let xi = mollify_planar_onto(&raw, &planar, eps, &grid)?;
        let gc = GpamConfig {
            coefficients: CoefficientPreset::Additive.coefficients(),
            epsilon: eps,
            c_eps: 0.0,
            initial: initial.clone(),
            grid,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            recording: Recording::Times(vec![t]),
        };
        let traj = solve_gpam_approx(&gc, &xi).map_err(|source| LabError::Path { path: p, source })?;
        let oracle = additive_oracle(&grid, &initial, xi.values(), t);
        let sol = traj.last().expect("final snapshot");
        let sup = sol.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let at = |v: &[f64]| probes.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Ok((at(sol), at(&oracle), sup))
    })?;
    let xs = grid.xs();
    let probes = probes
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let solver = stats::mean_se(&results.iter().map(|r| r.0[k]).collect::<Vec<_>>());
            let oracle = stats::mean_se(&results.iter().map(|r| r.1[k]).collect::<Vec<_>>());
            AdditiveProbe {
                x1: xs[i % n],
                x2: xs[i / n],
                solver,
                oracle,
                oracle_mean: heat[i],
                z_score: (solver.mean - heat[i]).abs() / solver.se,
            }
        })
        .collect();
    Ok(AdditiveCheck {
        epsilon: eps,
        t,
        probes,
        max_sup_distance: results.iter().map(|r| r.2).fold(0.0, f64::max),
    })
}

// -------------------------------------------- discrete Cole–Hopf check ----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColeHopfReport {
    pub epsilon: f64,
    pub grids: Vec<GridInfo>,
    /// `distances[p][g]`: sup |exp(2u) − Z| on grid `g` for path `p`.
    pub distances: Vec<Vec<f64>>,
    /// Median over paths of `d_g / d_{g+1}`.
    pub median_ratios: Vec<f64>,
}

/// At fixed `ε`, `exp(2u)` from the KPZ solver against the SHE with the
/// same mollified noise and Robin data `∂ₓZ = 2b̂Z`, on three grids refined
/// by 2 in `Δx` and `Δt`.
pub fn run_cole_hopf_consistency(cfg: &ExperimentConfig) -> Result<ColeHopfReport> {
    let eps = cfg.epsilons[0];
    let spec = cfg.mollifier.spec()?;
    let rho = spec.scale(eps)?;
    let (n_x, n_t) = (cfg.grid.n_x.unwrap_or(64), cfg.grid.n_t.unwrap_or(32));
    let grids: Vec<GridSpec> = (0..3)
        .map(|k| GridSpec::interval(cfg.grid.t_max, n_t << k, n_x << k))
        .collect::<std::result::Result<_, _>>()?;
    let master = grids[2];
    let b = cfg.b_hat;
    let distances = run_paths(cfg.n_paths, |p| {
        let raw = sample_noise(&master, NoiseKind::SpaceTime1d, cfg.seed, p);
        let mut out = Vec::new();
        for g in &grids {
            let xi = mollify_onto(&raw, &rho, g)?;
            let u0 = profile_from_fn(g, |x| 0.25 * (PI * x).sin());
            let z0: Vec<f64> = u0.iter().map(|u| (2.0 * u).exp()).collect();
            let kc = KpzConfig::neumann(*g, eps, 0.0, b, u0);
            let u = solve_kpz_approx(&kc, &xi).map_err(|source| LabError::Path { path: p, source })?;
            let she = SheConfig { robin: b, initial: z0, grid: *g, recording: Recording::EveryStep };
            let z = solve_she_robin(&she, &xi).map_err(|source| LabError::Path { path: p, source })?;
            let sup = u
                .values()
                .iter()
                .zip(z.values())
                .map(|(u, z)| ((2.0 * u).exp() - z).abs())
                .fold(0.0, f64::max);
            out.push(sup);
        }
        Ok(out)
    })?;
    let median_ratios = (0..grids.len() - 1)
        .map(|g| median(&distances.iter().map(|d| d[g] / d[g + 1]).collect::<Vec<_>>()))
        .collect();
    Ok(ColeHopfReport { epsilon: eps, grids: grids.into_iter().map(GridInfo::from).collect(), distances, median_ratios })
}

/// Exposed for tests: the noise field of one boundary-renormalisation path.
pub fn kpz_noise_for_path(cfg: &ExperimentConfig, eps: f64, path: u64) -> Result<NoiseField> {
    let kpz_grid = cfg.grid_for(eps)?;
    let she_grid = GridSpec::interval(kpz_grid.t_max, kpz_grid.n_t * cfg.grid.she_time_refine, kpz_grid.n_x)?;
    let raw = sample_noise(&she_grid, NoiseKind::SpaceTime1d, cfg.seed, path);
    Ok(mollify(&coarsen_time(&raw, cfg.grid.she_time_refine)?, &cfg.mollifier.spec()?.scale(eps)?)?)
}
