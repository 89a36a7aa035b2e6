//! Running a configured experiment and writing its output directory:
//! CSV tables, `metadata.json`, flat-binary fields and a one-line-per-
//! quantity summary (used by sweeps).

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spde_boundary::noise::GridSpec;

use crate::config::Experiment;
use crate::experiments::{self, CauchyReport};
use crate::io::{self, BinaryHeader, RunMetadata};
use crate::stats::{mean_se, EnsembleStats};
use crate::{ExperimentConfig, Result};

/// Headline number of a run with its standard error (or error bound).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub epsilon: Option<f64>,
    pub value: f64,
    pub error: f64,
}

fn summary(quantity: &str, epsilon: Option<f64>, value: f64, error: f64) -> SummaryRow {
    SummaryRow { quantity: quantity.into(), epsilon, value, error }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
    pub wall_time_seconds: f64,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.path(name);
        io::write_csv(&p, rows)
    }
    fn profiles(&mut self, name: &str, e: &[&EnsembleStats], with_epsilon: bool) -> Result<()> {
        let p = self.path(name);
        io::write_profiles(&p, e, with_epsilon)
    }
    /// Mean profiles of an ensemble as a flat binary field (one row per
    /// snapshot).
    fn mean_field(&mut self, name: &str, e: &EnsembleStats, grid: GridSpec, seed: u64) -> Result<()> {
        let p = self.path(name);
        let cols = e.profiles.first().map_or(0, |p| p.mean.len());
        let header = BinaryHeader {
            dim: 1,
            grid,
            seed,
            stream_id: 0,
            rows: e.profiles.len() as u64,
            cols: cols as u64,
            times: e.profiles.iter().map(|p| p.t).collect(),
        };
        let payload: Vec<f64> = e.profiles.iter().flat_map(|p| p.mean.iter().copied()).collect();
        io::write_binary(&p, &header, &payload)
    }
}

/// Row of an `ε`-Cauchy table: distances between consecutive `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
struct CauchyRow {
    epsilon: f64,
    epsilon_next: f64,
    median: f64,
    mean: f64,
    se: f64,
    path_count: usize,
}

fn cauchy_rows(r: &CauchyReport) -> Vec<CauchyRow> {
    r.distances
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let m = mean_se(d);
            CauchyRow {
                epsilon: r.epsilons[k],
                epsilon_next: r.epsilons[k + 1],
                median: r.medians[k],
                mean: m.mean,
                se: m.se,
                path_count: d.len(),
            }
        })
        .collect()
}

/// Run `cfg` and write everything under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut w = Writer { dir: out, files: Vec::new() };
    let mut rows = Vec::new();
    match cfg.experiment {
        Experiment::Constants => {
            let (k, table) = experiments::run_constants(cfg, true)?;
            w.csv("constants.csv", &table)?;
            rows.push(summary("a", None, k.a.value, k.a.error));
            rows.push(summary("c", None, k.c.value, k.c.error));
            for (e, cm) in k.epsilons.iter().zip(&k.c_minus_eps) {
                rows.push(summary("c_minus_eps", Some(*e), cm.value, cm.error));
            }
        }
        Experiment::KernelCheck => {
            let checks = experiments::run_kernel_check()?;
            w.csv("checks.csv", &checks)?;
            for c in &checks {
                rows.push(summary(&c.check, None, c.value, 0.0));
            }
        }
        Experiment::SheMeanCheck => {
            let r = experiments::run_she_mean_check(cfg)?;
            w.profiles("profiles.csv", &[&r.stats], false)?;
            let oracle: Vec<io::ProfileRow> = r
                .stats
                .profiles
                .iter()
                .zip(&r.oracle)
                .zip(&r.oracle_error)
                .flat_map(|((p, o), err)| {
                    p.xs.iter().zip(o).zip(err).map(move |((&x, &m), &e)| io::ProfileRow {
                        t: p.t,
                        x,
                        mean: m,
                        se: e,
                        epsilon: None,
                        path_count: None,
                    })
                })
                .collect();
            w.csv("oracle.csv", &oracle)?;
            for (p, z) in r.stats.profiles.iter().zip(&r.max_z_score) {
                rows.push(summary(&format!("max_z_score_t{}", p.t), None, *z, 0.0));
            }
            rows.push(summary("mass_final", None, r.mass.mean, r.mass.se));
        }
        Experiment::KpzBoundaryRenorm => {
            let r = experiments::run_boundary_renorm(cfg)?;
            let kpz: Vec<&EnsembleStats> = r.levels.iter().map(|l| &l.kpz).collect();
            let hc: Vec<&EnsembleStats> = r.levels.iter().map(|l| &l.hopf_cole).collect();
            let diff: Vec<&EnsembleStats> = r.levels.iter().map(|l| &l.difference).collect();
            w.profiles("kpz.csv", &kpz, true)?;
            w.profiles("hopf_cole.csv", &hc, true)?;
            w.profiles("difference.csv", &diff, true)?;
            let ctl_kpz: Vec<&EnsembleStats> = r.levels.iter().filter_map(|l| l.control.as_ref().map(|c| &c.kpz)).collect();
            if !ctl_kpz.is_empty() {
                let ctl_diff: Vec<&EnsembleStats> =
                    r.levels.iter().filter_map(|l| l.control.as_ref().map(|c| &c.difference)).collect();
                w.profiles("control_kpz.csv", &ctl_kpz, true)?;
                w.profiles("control_difference.csv", &ctl_diff, true)?;
            }
            let mut consts = vec![summary("a", None, r.a, r.a_error), summary("c", None, r.c, r.c_error)];
            for l in &r.levels {
                let e = Some(l.constants.epsilon);
                consts.push(summary("c_eps_continuum", e, l.constants.c_eps_continuum, l.constants.c_eps_continuum_error));
                consts.push(summary("c_eps_lattice", e, l.constants.c_eps_lattice, 0.0));
                if let Some(ctl) = &l.control {
                    consts.push(summary("control_c_eps_lattice", e, ctl.c_eps_lattice, 0.0));
                }
            }
            w.csv("constants.csv", &consts)?;
            let mut fits = Vec::new();
            for l in &r.levels {
                let e = Some(l.constants.epsilon);
                let f = &l.fit;
                fits.push(summary("b_minus", e, f.b_minus, f.se_minus));
                fits.push(summary("b_plus", e, f.b_plus, f.se_plus));
                fits.push(summary("asymmetry", e, f.asymmetry, f.asymmetry_se));
                fits.push(summary("asymmetry_jackknife", e, l.asymmetry.mean, l.asymmetry.se));
                if let Some(ctl) = &l.control {
                    fits.push(summary("control_asymmetry_jackknife", e, ctl.asymmetry.mean, ctl.asymmetry.se));
                    fits.push(summary("paired_asymmetry", e, ctl.paired_asymmetry.mean, ctl.paired_asymmetry.se));
                    fits.push(summary("control_max_z_last", e, ctl.max_z_last, 0.0));
                }
                if let (Some(k), Some(s)) = (f.kappa, f.kappa_se) {
                    fits.push(summary("kappa", e, k, s));
                }
                fits.push(summary("max_z_last", e, l.max_z_last, 0.0));
            }
            w.csv("fit.csv", &fits)?;
            if let Some(l) = r.levels.last() {
                w.mean_field("kpz_mean.bin", &l.kpz, cfg.grid_for(l.constants.epsilon)?, cfg.seed)?;
            }
            rows.push(summary("predicted_asymmetry", None, r.predicted_asymmetry, r.a_error * 2.0));
            rows.extend(fits);
        }
        Experiment::KpzDirichlet => {
            let r = experiments::run_kpz_dirichlet_cauchy(cfg)?;
            w.csv("cauchy.csv", &cauchy_rows(&r))?;
            w.profiles("finest.csv", &[&r.finest], true)?;
            for c in cauchy_rows(&r) {
                rows.push(summary("median_distance", Some(c.epsilon), c.median, c.se));
            }
        }
        Experiment::Gpam => {
            let r = experiments::run_gpam_cauchy(cfg)?;
            w.csv("cauchy.csv", &cauchy_rows(&r))?;
            w.profiles("finest_centre_line.csv", &[&r.finest], true)?;
            for c in cauchy_rows(&r) {
                rows.push(summary("median_distance", Some(c.epsilon), c.median, c.se));
            }
            let eps = *cfg.epsilons.last().expect("validated");
            let add = experiments::run_gpam_additive_check(cfg, eps)?;
            w.csv("additive.csv", &add.probes.iter().map(AdditiveRow::from).collect::<Vec<_>>())?;
            rows.push(summary("additive_max_z_score", Some(eps), add.max_z_score(), 0.0));
        }
        Experiment::ColeHopfConsistency => {
            let r = experiments::run_cole_hopf_consistency(cfg)?;
            let table: Vec<SummaryRow> = r
                .grids
                .iter()
                .enumerate()
                .map(|(g, info)| {
                    let m = mean_se(&r.distances.iter().map(|d| d[g]).collect::<Vec<_>>());
                    summary(&format!("sup_distance_dx{}", info.dx), Some(r.epsilon), m.mean, m.se)
                })
                .collect();
            w.csv("cole_hopf.csv", &table)?;
            rows.extend(table);
            for (k, q) in r.median_ratios.iter().enumerate() {
                rows.push(summary(&format!("median_ratio_{k}"), Some(r.epsilon), *q, 0.0));
            }
        }
    }
    w.csv("summary.csv", &rows)?;
    let wall = start.elapsed().as_secs_f64();
    let names = w.files.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect();
    let meta_path = w.path("metadata.json");
    RunMetadata::new(cfg, wall, names)?.write(&meta_path)?;
    Ok(RunOutput { summary: rows, files: w.files, wall_time_seconds: wall })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct AdditiveRow {
    x1: f64,
    x2: f64,
    solver_mean: f64,
    solver_se: f64,
    oracle_mean: f64,
    oracle_se: f64,
    heat_flow: f64,
    z_score: f64,
    path_count: usize,
}

impl From<&experiments::AdditiveProbe> for AdditiveRow {
    fn from(p: &experiments::AdditiveProbe) -> Self {
        Self {
            x1: p.x1,
            x2: p.x2,
            solver_mean: p.solver.mean,
            solver_se: p.solver.se,
            oracle_mean: p.oracle.mean,
            oracle_se: p.oracle.se,
            heat_flow: p.oracle_mean,
            z_score: p.z_score,
            path_count: p.solver.n,
        }
    }
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Paths,
    Seed,
}

/// Row of a sweep summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub parameter_value: u64,
    pub quantity: String,
    pub epsilon: Option<f64>,
    pub value: f64,
    pub error: f64,
}

/// Run `cfg` once per value of `param`, each into `out/<param>_<value>`,
/// and write `out/sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[u64], out: &Path) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(out)?;
    let name = match param {
        SweepParam::Paths => "paths",
        SweepParam::Seed => "seed",
    };
    let mut table = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        match param {
            SweepParam::Paths => c.n_paths = v as usize,
            SweepParam::Seed => c.seed = v,
        }
        let r = run_experiment(&c, &out.join(format!("{name}_{v}")))?;
        table.extend(r.summary.into_iter().map(|s| SweepRow {
            parameter: name.into(),
            parameter_value: v,
            quantity: s.quantity,
            epsilon: s.epsilon,
            value: s.value,
            error: s.error,
        }));
    }
    io::write_csv(&out.join("sweep.csv"), &table)?;
    Ok(table)
}
