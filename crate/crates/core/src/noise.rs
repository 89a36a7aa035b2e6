//! Discrete white noise and its mollification.
//!
//! Noise values are cell averages of white noise. A space-time cell
//! `[nΔt, (n+1)Δt) × [x_j − Δx/2, x_j + Δx/2)` carries a centred Gaussian of
//! variance `1/(ΔtΔx)`. A planar cell of side `Δx` around a node carries
//! variance `1/Δx²`.
//!
//! Every cell value comes from a counter-based generator. ChaCha8 is keyed by
//! the seed, the stream id selects the ChaCha stream, and the signed
//! `(row, column)` index of the cell selects the position inside the stream.
//! A cell value therefore depends only on `(seed, stream_id, row, column)`.
//! It does not depend on traversal order, threading, or the extent of the
//! sampled window. In particular, the collar of fresh noise needed to
//! mollify near the edge of the domain is the same realisation that a larger
//! window would have sampled.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{config_err, Result};
use crate::mollifier::{PlanarMollifier, ScaledMollifier};

/// Space-time grid on `[0, t_max] × [x_lo, x_hi]` (the spatial range is
/// used for both axes of a square). Spatial grids are node based:
/// `n_x` cells give `n_x + 1` nodes including the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub t_max: f64,
    pub n_t: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
}

impl GridSpec {
    pub fn new(t_max: f64, n_t: usize, x_range: (f64, f64), n_x: usize) -> Result<Self> {
        let (x_lo, x_hi) = x_range;
        if !(t_max > 0.0 && t_max.is_finite()) || n_t == 0 {
            return Err(config_err!("time grid needs t_max > 0 and n_t ≥ 1, got {t_max}, {n_t}"));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() || n_x < 2 {
            return Err(config_err!("spatial grid needs x_lo < x_hi and n_x ≥ 2, got [{x_lo}, {x_hi}], {n_x}"));
        }
        Ok(Self { t_max, n_t, x_lo, x_hi, n_x })
    }

    /// Grid on `[0, t_max] × [−1, 1]`.
    pub fn interval(t_max: f64, n_t: usize, n_x: usize) -> Result<Self> {
        Self::new(t_max, n_t, (-1.0, 1.0), n_x)
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_t as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_x as f64
    }

    /// `Δt/Δx²`.
    pub fn stability_ratio(&self) -> f64 {
        self.dt() / (self.dx() * self.dx())
    }

    /// Number of spatial nodes per axis.
    pub fn nodes(&self) -> usize {
        self.n_x + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_lo + j as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Node coordinates of one axis.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.x(j)).collect()
    }

    /// The grid with `Δt` and `Δx` divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.t_max, self.n_t * factor, (self.x_lo, self.x_hi), self.n_x * factor)
    }
}

/// Which white noise a field discretises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Space-time white noise in 1+1 dimensions: rows are time cells.
    SpaceTime1d,
    /// Spatial white noise on the square: rows are `x₂` nodes.
    Spatial2d,
}

/// Counter-based source of cell values of one white-noise realisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteNoise {
    pub seed: u64,
    pub stream_id: u64,
    /// Standard deviation of one base cell value.
    pub cell_sd: f64,
    /// Number of consecutive base rows averaged into one cell (1 unless the
    /// field was coarsened in time).
    pub time_block: u64,
}

/// Offset making signed cell indices non-negative.
const INDEX_OFFSET: i64 = 1 << 31;
/// Gaussians per ChaCha block (16 words = 4 Box–Muller pairs).
const NORMALS_PER_BLOCK: u64 = 8;

fn linear_index(row: i64, col: i64) -> u64 {
    debug_assert!(row.abs() < INDEX_OFFSET && col.abs() < INDEX_OFFSET);
    (((row + INDEX_OFFSET) as u64) << 32) | ((col + INDEX_OFFSET) as u64)
}

/// Two independent standard Gaussians from two 64-bit words.
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) as f64 + 1.0) * SCALE; // (0, 1]
    let u2 = (b >> 11) as f64 * SCALE; // [0, 1)
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let (s, c) = libm::sincos(2.0 * core::f64::consts::PI * u2);
    (r * c, r * s)
}

/// Fill `out` with the standard Gaussians at linear indices
/// `start, start + 1, …` of the stream.
fn fill_standard_normals(seed: u64, stream_id: u64, start: u64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    let block = start / NORMALS_PER_BLOCK;
    rng.set_word_pos(block as u128 * 16);
    let mut skip = (start % NORMALS_PER_BLOCK) as usize;
    let mut k = 0;
    while k < out.len() {
        let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
        for z in [z0, z1] {
            if skip > 0 {
                skip -= 1;
            } else if k < out.len() {
                out[k] = z;
                k += 1;
            }
        }
    }
}

impl WhiteNoise {
    pub fn new(seed: u64, stream_id: u64, cell_sd: f64) -> Self {
        Self { seed, stream_id, cell_sd, time_block: 1 }
    }

    /// Source matching a grid and noise kind.
    pub fn for_grid(grid: &GridSpec, kind: NoiseKind, seed: u64, stream_id: u64) -> Self {
        let var = match kind {
            NoiseKind::SpaceTime1d => 1.0 / (grid.dt() * grid.dx()),
            NoiseKind::Spatial2d => 1.0 / (grid.dx() * grid.dx()),
        };
        Self::new(seed, stream_id, libm::sqrt(var))
    }

    /// Value of cell `(row, col)`; indices may be negative.
    pub fn cell(&self, row: i64, col: i64) -> f64 {
        let mut v = [0.0];
        self.fill_row(row, col, &mut v);
        v[0]
    }

    /// Values of cells `(row, col0), (row, col0 + 1), …`.
    pub fn fill_row(&self, row: i64, col0: i64, out: &mut [f64]) {
        if self.time_block == 1 {
            fill_standard_normals(self.seed, self.stream_id, linear_index(row, col0), out);
            for v in out.iter_mut() {
                *v *= self.cell_sd;
            }
            return;
        }
        let p = self.time_block as i64;
        let mut base = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p {
            fill_standard_normals(self.seed, self.stream_id, linear_index(row * p + i, col0), &mut base);
            for (o, b) in out.iter_mut().zip(&base) {
                *o += b;
            }
        }
        let scale = self.cell_sd / p as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

/// A sampled (or mollified) noise field, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub grid: GridSpec,
    pub kind: NoiseKind,
    pub seed: u64,
    pub stream_id: u64,
    /// `Some(ε)` once mollified at scale `ε`.
    pub epsilon: Option<f64>,
    /// Base time cells per row (see [`coarsen_time`]).
    pub time_block: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl NoiseField {
    fn shape(grid: &GridSpec, kind: NoiseKind) -> (usize, usize) {
        match kind {
            NoiseKind::SpaceTime1d => (grid.n_t, grid.nodes()),
            NoiseKind::Spatial2d => (grid.nodes(), grid.nodes()),
        }
    }

    /// A field that is identically zero (deterministic reductions).
    pub fn zeros(grid: GridSpec, kind: NoiseKind) -> Self {
        let (rows, cols) = Self::shape(&grid, kind);
        Self { grid, kind, seed: 0, stream_id: 0, epsilon: None, time_block: 1, rows, cols, values: vec![0.0; rows * cols] }
    }

    /// Wrap explicit values (row-major).
    pub fn from_values(grid: GridSpec, kind: NoiseKind, epsilon: Option<f64>, values: Vec<f64>) -> Result<Self> {
        let (rows, cols) = Self::shape(&grid, kind);
        if values.len() != rows * cols {
            return Err(config_err!("expected {rows}×{cols} values, got {}", values.len()));
        }
        Ok(Self { grid, kind, seed: 0, stream_id: 0, epsilon, time_block: 1, rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// The counter-based source this field was sampled from.
    pub fn source(&self) -> WhiteNoise {
        let mut src = WhiteNoise::for_grid(&self.grid, self.kind, self.seed, self.stream_id);
        src.cell_sd *= libm::sqrt(self.time_block as f64);
        src.time_block = self.time_block as u64;
        src
    }
}

/// Sample the white noise of `kind` on `grid`.
pub fn sample_noise(grid: &GridSpec, kind: NoiseKind, seed: u64, stream_id: u64) -> NoiseField {
    let (rows, cols) = NoiseField::shape(grid, kind);
    let src = WhiteNoise::for_grid(grid, kind, seed, stream_id);
    let mut values = vec![0.0; rows * cols];
    for (r, chunk) in values.chunks_mut(cols).enumerate() {
        src.fill_row(r as i64, 0, chunk);
    }
    NoiseField { grid: *grid, kind, seed, stream_id, epsilon: None, time_block: 1, rows, cols, values }
}

/// Average blocks of `p` consecutive time cells of a raw space-time field.
/// Cell averages of white noise aggregate exactly, so the result is the
/// discretisation of the same realisation on the grid with `Δt` multiplied
/// by `p`, including the collar cells its source generates.
pub fn coarsen_time(noise: &NoiseField, p: usize) -> Result<NoiseField> {
    if noise.kind != NoiseKind::SpaceTime1d || noise.epsilon.is_some() {
        return Err(config_err!("only raw space-time noise can be coarsened in time"));
    }
    if p == 0 || noise.grid.n_t % p != 0 {
        return Err(config_err!("time block {p} does not divide n_t = {}", noise.grid.n_t));
    }
    let grid = GridSpec::new(noise.grid.t_max, noise.grid.n_t / p, (noise.grid.x_lo, noise.grid.x_hi), noise.grid.n_x)?;
    let cols = noise.cols;
    let mut values = vec![0.0; grid.n_t * cols];
    for (r, chunk) in values.chunks_mut(cols).enumerate() {
        for i in 0..p {
            for (o, v) in chunk.iter_mut().zip(noise.row(r * p + i)) {
                *o += v;
            }
        }
        chunk.iter_mut().for_each(|v| *v /= p as f64);
    }
    Ok(NoiseField { grid, time_block: noise.time_block * p, rows: grid.n_t, cols, values, ..noise.clone() })
}

/// Non-zero taps `(row offset, col offset, weight)` of a discrete kernel.
#[derive(Clone, Debug, PartialEq)]
struct Stencil {
    taps: Vec<(i64, i64, f64)>,
}

impl Stencil {
    /// Normalise the weights to sum to one, which makes the discrete
    /// mollification preserve constants exactly.
    fn normalised(mut taps: Vec<(i64, i64, f64)>) -> Result<Self> {
        taps.retain(|t| t.2 != 0.0);
        let total: f64 = crate::quad::pairwise_sum(&taps.iter().map(|t| t.2).collect::<Vec<_>>());
        if !(total > 0.0) {
            return Err(config_err!("mollifier has no mass on the grid"));
        }
        for t in taps.iter_mut() {
            t.2 /= total;
        }
        Ok(Self { taps })
    }

    fn row_range(&self) -> (i64, i64) {
        let lo = self.taps.iter().map(|t| t.0).min().unwrap_or(0);
        let hi = self.taps.iter().map(|t| t.0).max().unwrap_or(0);
        (lo, hi)
    }

    fn col_range(&self) -> (i64, i64) {
        let lo = self.taps.iter().map(|t| t.1).min().unwrap_or(0);
        let hi = self.taps.iter().map(|t| t.1).max().unwrap_or(0);
        (lo, hi)
    }
}

/// `ρ_ε` sampled on the noise lattice. A noise cell in row `m` is centred
/// at `(m + ½)Δt`, so the value at time `nΔt` picks up `ρ_ε((k − ½)Δt, ·)`
/// with `k = n − m`. A spatial-only mollifier is a δ in time.
fn spacetime_stencil(grid: &GridSpec, rho: &ScaledMollifier) -> Result<Stencil> {
    let (dt, dx) = (grid.dt(), grid.dx());
    let (t0, t1, x0, x1) = rho.support_box();
    let l_lo = libm::ceil(x0 / dx) as i64;
    let l_hi = libm::floor(x1 / dx) as i64;
    let mut taps = Vec::new();
    if rho.base().is_spatial_only() {
        for l in l_lo..=l_hi {
            taps.push((0, l, rho.eval(0.0, l as f64 * dx)));
        }
    } else {
        let k_lo = libm::ceil(t0 / dt + 0.5) as i64;
        let k_hi = libm::floor(t1 / dt + 0.5) as i64;
        for k in k_lo..=k_hi {
            for l in l_lo..=l_hi {
                taps.push((k, l, rho.eval((k as f64 - 0.5) * dt, l as f64 * dx)));
            }
        }
    }
    Stencil::normalised(taps)
}

/// The normalised discrete space-time mollifier on `grid` as taps
/// `(time offset k, space offset l, weight)`: a mollified field at
/// `(n, j)` is `Σ w ζ[n − k, j − l]` over raw cells `ζ`.
pub fn mollifier_stencil(grid: &GridSpec, rho: &ScaledMollifier) -> Result<Vec<(i64, i64, f64)>> {
    Ok(spacetime_stencil(grid, rho)?.taps)
}

fn planar_stencil(grid: &GridSpec, rho: &PlanarMollifier, epsilon: f64) -> Result<Stencil> {
    let dx = grid.dx();
    let reach = libm::floor(rho.radius() * epsilon / dx) as i64;
    let mut taps = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            taps.push((a, b, rho.eval_scaled(epsilon, a as f64 * dx, b as f64 * dx)));
        }
    }
    Stencil::normalised(taps)
}

/// Check the resolution rule `εR ≥ 4 max(Δx, √Δt)` (only `Δx` for
/// mollifiers without a time extent).
fn check_resolution(grid: &GridSpec, scale: f64, with_time: bool) -> Result<()> {
    let h = if with_time { grid.dx().max(libm::sqrt(grid.dt())) } else { grid.dx() };
    if scale < 4.0 * h {
        return Err(config_err!(
            "mollifier scale {scale} is under-resolved: need at least 4 × {h} (Δx = {}, Δt = {})",
            grid.dx(),
            grid.dt()
        ));
    }
    Ok(())
}

/// Integer ratio `coarse/fine`, if there is one.
fn integer_ratio(coarse: f64, fine: f64) -> Option<usize> {
    let r = coarse / fine;
    let k = libm::round(r);
    if k >= 1.0 && (r - k).abs() < 1e-9 * r {
        Some(k as usize)
    } else {
        None
    }
}

/// Convolve `noise` with `stencil` and sample the result at the target
/// nodes `(row·p, col·q)` of the source lattice. Cells outside the sampled
/// window are drawn from the counter-based source.
fn convolve(
    noise: &NoiseField,
    stencil: &Stencil,
    out_rows: usize,
    out_cols: usize,
    p: usize,
    q: usize,
) -> Vec<f64> {
    let (k_lo, k_hi) = stencil.row_range();
    let (l_lo, l_hi) = stencil.col_range();
    // Source rows/cols touched: r·p − k and c·q − l.
    let r_min = -k_hi;
    let r_max = ((out_rows - 1) * p) as i64 - k_lo;
    let c_min = -l_hi;
    let c_max = ((out_cols - 1) * q) as i64 - l_lo;
    let width = (c_max - c_min + 1) as usize;
    let height = (r_max - r_min + 1) as usize;
    let src = noise.source();
    let mut padded = vec![0.0; width * height];
    for (i, chunk) in padded.chunks_mut(width).enumerate() {
        let r = r_min + i as i64;
        if r >= 0 && (r as usize) < noise.rows {
            // Collar columns from the source, interior from the field.
            let left = (-c_min).max(0) as usize;
            src.fill_row(r, c_min, &mut chunk[..left.min(width)]);
            let row = noise.row(r as usize);
            let n_in = noise.cols.min(width - left);
            chunk[left..left + n_in].copy_from_slice(&row[..n_in]);
            if left + n_in < width {
                src.fill_row(r, c_min + (left + n_in) as i64, &mut chunk[left + n_in..]);
            }
        } else {
            src.fill_row(r, c_min, chunk);
        }
    }
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..out_rows {
        for c in 0..out_cols {
            let (rr, cc) = ((r * p) as i64, (c * q) as i64);
            let mut acc = 0.0;
            for &(k, l, w) in &stencil.taps {
                let i = (rr - k - r_min) as usize;
                let j = (cc - l - c_min) as usize;
                acc += w * padded[i * width + j];
            }
            out[r * out_cols + c] = acc;
        }
    }
    out
}

/// `ξ_ε = ρ_ε ∗ ξ` on the grid of `noise`.
pub fn mollify(noise: &NoiseField, rho: &ScaledMollifier) -> Result<NoiseField> {
    mollify_onto(noise, rho, &noise.grid)
}

/// `ξ_ε = ρ_ε ∗ ξ` computed from the (fine) white noise `noise` and
/// sampled on `target`, whose `Δt`, `Δx` must be integer multiples of the
/// source steps over the same spatial range. Mollifying one fine
/// realisation onto the grids of several `ε` couples the fields pathwise.
pub fn mollify_onto(noise: &NoiseField, rho: &ScaledMollifier, target: &GridSpec) -> Result<NoiseField> {
    if noise.kind != NoiseKind::SpaceTime1d {
        return Err(config_err!("space-time mollification needs a space-time noise field"));
    }
    if noise.epsilon.is_some() {
        return Err(config_err!("noise field is already mollified"));
    }
    let grid = &noise.grid;
    let scale = rho.epsilon() * rho.base().radius();
    check_resolution(grid, scale, !rho.base().is_spatial_only())?;
    let (p, q) = match (integer_ratio(target.dt(), grid.dt()), integer_ratio(target.dx(), grid.dx())) {
        (Some(p), Some(q)) => (p, q),
        _ => return Err(config_err!("target grid steps must be integer multiples of the noise grid steps")),
    };
    if (target.x_lo - grid.x_lo).abs() > 1e-12 || (target.x_hi - grid.x_hi).abs() > 1e-12 {
        return Err(config_err!("target grid must cover the same spatial range"));
    }
    if target.t_max > grid.t_max * (1.0 + 1e-12) {
        return Err(config_err!("target grid extends beyond the sampled time range"));
    }
    let stencil = spacetime_stencil(grid, rho)?;
    let values = convolve(noise, &stencil, target.n_t, target.nodes(), p, q);
    Ok(NoiseField {
        grid: *target,
        kind: NoiseKind::SpaceTime1d,
        seed: noise.seed,
        stream_id: noise.stream_id,
        epsilon: Some(rho.epsilon()),
        time_block: noise.time_block,
        rows: target.n_t,
        cols: target.nodes(),
        values,
    })
}

/// Planar mollification `ρ_ε ⋆ ξ` of spatial noise on the square, sampled
/// on `target` (integer multiple of the source step).
pub fn mollify_planar_onto(
    noise: &NoiseField,
    rho: &PlanarMollifier,
    epsilon: f64,
    target: &GridSpec,
) -> Result<NoiseField> {
    if noise.kind != NoiseKind::Spatial2d {
        return Err(config_err!("planar mollification needs a spatial 2D noise field"));
    }
    if noise.epsilon.is_some() {
        return Err(config_err!("noise field is already mollified"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(config_err!("epsilon must be positive, got {epsilon}"));
    }
    let grid = &noise.grid;
    check_resolution(grid, epsilon * rho.radius(), false)?;
    let q = integer_ratio(target.dx(), grid.dx())
        .ok_or_else(|| config_err!("target grid step must be an integer multiple of the noise grid step"))?;
    if (target.x_lo - grid.x_lo).abs() > 1e-12 || (target.x_hi - grid.x_hi).abs() > 1e-12 {
        return Err(config_err!("target grid must cover the same spatial range"));
    }
    let stencil = planar_stencil(grid, rho, epsilon)?;
    let n = target.nodes();
    let values = convolve(noise, &stencil, n, n, q, q);
    Ok(NoiseField {
        grid: *target,
        kind: NoiseKind::Spatial2d,
        seed: noise.seed,
        stream_id: noise.stream_id,
        epsilon: Some(epsilon),
        time_block: 1,
        rows: n,
        cols: n,
        values,
    })
}

/// Planar mollification on the grid of `noise`.
pub fn mollify_planar(noise: &NoiseField, rho: &PlanarMollifier, epsilon: f64) -> Result<NoiseField> {
    mollify_planar_onto(noise, rho, epsilon, &noise.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::MollifierSpec;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn cells_do_not_depend_on_traversal() {
        let src = WhiteNoise::new(7, 3, 1.0);
        let mut row = [0.0; 19];
        src.fill_row(-4, -5, &mut row);
        for (i, v) in row.iter().enumerate() {
            assert_eq!(*v, src.cell(-4, -5 + i as i64));
        }
    }

    #[test]
    fn sampled_field_has_white_noise_scaling() {
        let grid = GridSpec::interval(1.0, 400, 250).unwrap();
        let f = sample_noise(&grid, NoiseKind::SpaceTime1d, 11, 0);
        let (m, v) = mean_var(f.values());
        let n = f.values().len() as f64;
        let target = 1.0 / (grid.dt() * grid.dx());
        assert!(m.abs() < 3.0 * libm::sqrt(target / n));
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1).
        assert!((v - target).abs() < 3.0 * target * libm::sqrt(2.0 / n), "{v} vs {target}");
        assert_eq!(f, sample_noise(&grid, NoiseKind::SpaceTime1d, 11, 0));
        assert_ne!(f.values(), sample_noise(&grid, NoiseKind::SpaceTime1d, 12, 0).values());
    }

    #[test]
    fn streams_are_uncorrelated() {
        let grid = GridSpec::interval(1.0, 400, 250).unwrap();
        let a = sample_noise(&grid, NoiseKind::SpaceTime1d, 5, 0);
        let b = sample_noise(&grid, NoiseKind::SpaceTime1d, 5, 1);
        let n = a.values().len() as f64;
        let s = 1.0 / (grid.dt() * grid.dx());
        let corr = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() / (n * s);
        assert!(corr.abs() < 3.0 / libm::sqrt(n), "{corr}");
    }

    #[test]
    fn mollified_variance_matches_l2_norm() {
        let eps = 0.25;
        let grid = GridSpec::interval(0.5, 128, 64).unwrap();
        let rho = MollifierSpec::bump(1.0).unwrap().scale(eps).unwrap();
        let (t0, t1, x0, x1) = rho.support_box();
        let c = crate::quad::Cubature::new(8, 6);
        let l2 = c
            .integrate(|t, x| rho.eval(t, x).powi(2), crate::quad::Rect::new(t0, t1, x0, x1), 1e-8)
            .value;
        let mut vals = Vec::new();
        for seed in 0..40 {
            let f = mollify(&sample_noise(&grid, NoiseKind::SpaceTime1d, seed, 0), &rho).unwrap();
            vals.extend_from_slice(f.values());
        }
        let (_, v) = mean_var(&vals);
        assert!((v / l2 - 1.0).abs() < 0.1, "{v} vs {l2}");
    }

    #[test]
    fn spatial_only_mollification_acts_slice_by_slice() {
        let grid = GridSpec::interval(0.1, 10, 64).unwrap();
        let spec = MollifierSpec::spatial_only(1.0).unwrap();
        let rho = spec.scale(0.2).unwrap();
        let noise = sample_noise(&grid, NoiseKind::SpaceTime1d, 1, 0);
        let f = mollify(&noise, &rho).unwrap();
        let dx = grid.dx();
        let reach = libm::floor(0.2 / dx) as i64;
        let w: Vec<f64> = (-reach..=reach).map(|l| rho.eval(0.0, l as f64 * dx)).collect();
        let total: f64 = w.iter().sum();
        let src = noise.source();
        for n in [0usize, 5, 9] {
            for j in [0usize, 30, 64] {
                let mut acc = 0.0;
                for (i, l) in (-reach..=reach).enumerate() {
                    acc += w[i] / total * src.cell(n as i64, j as i64 - l);
                }
                assert!((acc - f.at(n, j)).abs() < 1e-9 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mollify_onto_subsamples_the_fine_field() {
        let fine = GridSpec::interval(0.25, 64, 128).unwrap();
        let coarse = GridSpec::interval(0.25, 32, 64).unwrap();
        let rho = MollifierSpec::bump(1.0).unwrap().scale(0.25).unwrap();
        let noise = sample_noise(&fine, NoiseKind::SpaceTime1d, 3, 2);
        let a = mollify(&noise, &rho).unwrap();
        let b = mollify_onto(&noise, &rho, &coarse).unwrap();
        for n in 0..coarse.n_t {
            for j in 0..coarse.nodes() {
                assert!((a.at(2 * n, 2 * j) - b.at(n, j)).abs() < 1e-12);
            }
        }
        let bad = GridSpec::interval(0.25, 48, 64).unwrap();
        assert!(mollify_onto(&noise, &rho, &bad).is_err());
    }

    #[test]
    fn under_resolved_mollifier_is_rejected() {
        let grid = GridSpec::interval(0.25, 16, 32).unwrap();
        let rho = MollifierSpec::bump(1.0).unwrap().scale(0.1).unwrap();
        let noise = sample_noise(&grid, NoiseKind::SpaceTime1d, 0, 0);
        assert!(mollify(&noise, &rho).is_err());
    }

    #[test]
    fn planar_noise_scaling_and_mollification() {
        let grid = GridSpec::new(1.0, 1, (-1.0, 1.0), 100).unwrap();
        let f = sample_noise(&grid, NoiseKind::Spatial2d, 9, 0);
        assert_eq!(f.rows(), 101);
        let (_, v) = mean_var(f.values());
        let target = 1.0 / (grid.dx() * grid.dx());
        assert!((v / target - 1.0).abs() < 3.0 * libm::sqrt(2.0 / f.values().len() as f64));
        let m = PlanarMollifier::new(1.0).unwrap();
        let g = mollify_planar(&f, &m, 0.2).unwrap();
        assert_eq!(g.epsilon, Some(0.2));
        assert!(mollify_planar(&f, &m, 0.05).is_err());
    }

    #[test]
    fn time_coarsening_is_exact_aggregation() {
        let fine = GridSpec::interval(0.25, 64, 32).unwrap();
        let noise = sample_noise(&fine, NoiseKind::SpaceTime1d, 8, 1);
        let coarse = coarsen_time(&noise, 4).unwrap();
        assert_eq!(coarse.rows(), 16);
        let src_f = noise.source();
        let src_c = coarse.source();
        for (r, c) in [(0i64, 0i64), (3, 7), (-2, -3), (20, 40)] {
            let agg = (0..4).map(|i| src_f.cell(4 * r + i, c)).sum::<f64>() / 4.0;
            assert!((agg - src_c.cell(r, c)).abs() < 1e-12);
            if (0..16).contains(&r) && (0..33).contains(&c) {
                assert!((agg - coarse.at(r as usize, c as usize)).abs() < 1e-12);
            }
        }
        let target = 1.0 / (coarse.grid.dt() * coarse.grid.dx());
        assert!((src_c.cell_sd * src_c.cell_sd / src_c.time_block as f64 - target).abs() < 1e-9 * target);
        assert!(coarsen_time(&noise, 5).is_err());
    }
}
