//! Experiment configuration, read from a TOML key-value file.
//!
//! ```toml
//! experiment = "kpz_boundary_renorm"
//! epsilons = [0.25, 0.125, 0.0625]
//! n_paths = 400
//! seed = 1
//! b_hat = [0.0, 0.0]
//!
//! [mollifier]
//! kind = "bump"
//! radius = 1.0
//!
//! [grid]
//! t_max = 0.25
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spde_boundary::mollifier::MollifierSpec;
use spde_boundary::noise::GridSpec;
use spde_boundary::solvers::GpamCoefficients;

use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Constants,
    KernelCheck,
    KpzBoundaryRenorm,
    KpzDirichlet,
    Gpam,
    SheMeanCheck,
    ColeHopfConsistency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MollifierKind {
    Bump,
    SpatialOnly,
    Shifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifierConfig {
    pub kind: MollifierKind,
    pub radius: f64,
    /// Time shift `τ` (in units of `R²`) of the shifted bump.
    pub time_shift: f64,
    /// Shear `σ` of the shifted bump.
    pub space_shift: f64,
    /// Lattice cells across the support for the autocorrelation.
    pub cells: usize,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self { kind: MollifierKind::Bump, radius: 1.0, time_shift: 0.0, space_shift: 0.0, cells: 64 }
    }
}

impl MollifierConfig {
    pub fn spec(&self) -> Result<MollifierSpec, LabError> {
        Ok(match self.kind {
            MollifierKind::Bump => MollifierSpec::bump(self.radius)?,
            MollifierKind::SpatialOnly => MollifierSpec::spatial_only(self.radius)?,
            MollifierKind::Shifted => MollifierSpec::shifted(self.radius, self.time_shift, self.space_shift)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    /// Spatial cells per `ε` (so `Δx = ε/cells_per_eps`); at least 8.
    pub cells_per_eps: usize,
    /// Time steps per `ε²` (so `Δt = ε²/steps_per_eps2`); at least 8.
    pub steps_per_eps2: usize,
    /// Extra time refinement of the raw-noise stochastic heat equation.
    pub she_time_refine: usize,
    /// Fixed grid (overrides the `ε`-derived one) for experiments without
    /// mollification.
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_max: 0.25, cells_per_eps: 8, steps_per_eps2: 16, she_time_refine: 8, n_x: None, n_t: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientPreset {
    Generic,
    Additive,
    Heat,
    GradientSquared,
}

impl CoefficientPreset {
    pub fn coefficients(self) -> GpamCoefficients {
        match self {
            Self::Generic => GpamCoefficients::generic(),
            Self::Additive => GpamCoefficients::additive(),
            Self::Heat => GpamCoefficients::heat(),
            Self::GradientSquared => GpamCoefficients::gradient_squared(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub mollifier: MollifierConfig,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub grid: GridConfig,
    pub n_paths: usize,
    pub seed: u64,
    /// Imposed Neumann data `(b̂₋, b̂₊)` of the KPZ approximation.
    pub b_hat: (f64, f64),
    /// Robin coefficients `(c₋, c₊)` of the stochastic heat equation
    /// (`she_mean_check`).
    pub robin: (f64, f64),
    pub snapshots: Vec<f64>,
    /// Boundary renormalisation: also solve KPZ with the spatial-only
    /// mollifier of the same radius (for which `a = c = 0`) on the same
    /// noise, and report the asymmetry relative to this control.
    pub control: bool,
    /// Blocks of paths for jackknife standard errors of fitted quantities.
    pub jackknife_groups: usize,
    /// Coefficients of the generalised PAM.
    pub gpam: CoefficientPreset,
    pub gpam_radius: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Constants,
            mollifier: MollifierConfig::default(),
            epsilons: vec![0.2, 0.1, 0.05],
            grid: GridConfig::default(),
            n_paths: 100,
            seed: 1,
            b_hat: (0.0, 0.0),
            robin: (0.0, 0.0),
            snapshots: vec![0.0625, 0.125, 0.25],
            gpam: CoefficientPreset::Generic,
            control: false,
            jackknife_groups: 20,
            gpam_radius: 1.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad(format!("epsilons must be positive: {:?}", self.epsilons));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return bad(format!("epsilons must be strictly decreasing: {:?}", self.epsilons));
        }
        if self.grid.cells_per_eps < 8 || self.grid.steps_per_eps2 < 8 {
            return bad("the grid must resolve ε: cells_per_eps ≥ 8 and steps_per_eps2 ≥ 8".into());
        }
        if self.jackknife_groups < 2 {
            return bad("jackknife_groups must be at least 2".into());
        }
        if self.grid.she_time_refine == 0 || !(self.grid.t_max > 0.0) {
            return bad("she_time_refine ≥ 1 and t_max > 0 are required".into());
        }
        if self.snapshots.iter().any(|&t| !(t >= 0.0 && t <= self.grid.t_max * (1.0 + 1e-12))) {
            return bad(format!("snapshot times must lie in [0, t_max]: {:?}", self.snapshots));
        }
        self.mollifier.spec()?;
        Ok(())
    }

    /// Canonical serialisation (JSON with fixed field order).
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// First 8 bytes of the hash, for trajectory metadata.
    pub fn hash_u64(&self) -> u64 {
        let digest = Sha256::digest(self.canonical().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Grid on `[0, t_max] × [−1, 1]` resolving `ε`, with the number of
    /// time steps rounded so that every snapshot time is a grid time.
    pub fn grid_for(&self, epsilon: f64) -> Result<GridSpec, LabError> {
        let n_x = self.grid.n_x.unwrap_or_else(|| even_ceil(2.0 * self.grid.cells_per_eps as f64 / epsilon));
        let n_t = self.grid.n_t.unwrap_or_else(|| {
            let min = libm_ceil(self.grid.t_max * self.grid.steps_per_eps2 as f64 / (epsilon * epsilon));
            self.snapshot_aligned(min)
        });
        Ok(GridSpec::interval(self.grid.t_max, n_t, n_x)?)
    }

    /// Smallest `n ≥ min` for which every snapshot is a multiple of `T/n`.
    fn snapshot_aligned(&self, min: usize) -> usize {
        let t = self.grid.t_max;
        (min..min * 64 + 64)
            .find(|&n| {
                self.snapshots.iter().all(|&s| {
                    let k = s / t * n as f64;
                    (k - k.round()).abs() < 1e-9
                })
            })
            .unwrap_or(min)
    }
}

fn libm_ceil(x: f64) -> usize {
    x.ceil().max(1.0) as usize
}

fn even_ceil(x: f64) -> usize {
    let n = x.ceil() as usize;
    n + n % 2
}
