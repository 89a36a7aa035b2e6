use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_lab::config::{Experiment, MollifierKind};
use spde_lab::run::{run_experiment, run_sweep, SweepParam};
use spde_lab::{experiments, io, plot, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "spde-lab", version, about = "Boundary renormalisation experiments for singular SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a, c, C_ε (KPZ, gPAM) and the boundary-layer mass c̄⁻_ε.
    Constants {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mollifier: Option<MollifierKind>,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        /// Skip the (slow) boundary-layer mass.
        #[arg(long)]
        no_c_minus: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the heat-kernel identity checks; exits non-zero on failure.
    KernelCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment.
    Simulate {
        #[arg(long, value_enum)]
        experiment: Option<Experiment>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an experiment over path counts or seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        experiment: Option<Experiment>,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot a profile CSV (t, x, mean, se, ...) as SVG.
    Plot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only the snapshot closest to this time.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        title: Option<String>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn print_summary(rows: &[spde_lab::run::SummaryRow]) {
    for r in rows {
        let eps = r.epsilon.map(|e| format!(" (ε = {e})")).unwrap_or_default();
        println!("{:<28}{eps:<14} {:>14.6e} ± {:.2e}", r.quantity, r.value, r.error);
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Constants { config, mollifier, epsilons, no_c_minus, out } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(k) = mollifier {
                cfg.mollifier.kind = k;
            }
            if let Some(e) = epsilons {
                cfg.epsilons = e;
            }
            cfg.validate()?;
            let (_, rows) = experiments::run_constants(&cfg, !no_c_minus)?;
            println!("{:<14}{:>10} {:>20} {:>12}", "quantity", "epsilon", "value", "error");
            for r in &rows {
                let e = r.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
                println!("{:<14}{e:>10} {:>20.12} {:>12.2e}", r.quantity, r.value, r.error);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                io::write_csv(&dir.join("constants.csv"), &rows)?;
                io::RunMetadata::new(&cfg, 0.0, vec!["constants.csv".into()])?.write(&dir.join("metadata.json"))?;
            }
            Ok(true)
        }
        Command::KernelCheck { out } => {
            let checks = experiments::run_kernel_check()?;
            for c in &checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                println!("{verdict} {:<30} {:.3e} (tolerance {:.0e})", c.check, c.value, c.tolerance);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                io::write_csv(&dir.join("checks.csv"), &checks)?;
            }
            Ok(checks.iter().all(|c| c.pass))
        }
        Command::Simulate { experiment, config, seed, paths, out } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = paths {
                cfg.n_paths = n;
            }
            let dir = out.unwrap_or_else(|| cfg.out_dir.clone());
            let r = run_experiment(&cfg, &dir)?;
            print_summary(&r.summary);
            println!("wrote {} files to {} in {:.1} s", r.files.len(), dir.display(), r.wall_time_seconds);
            Ok(true)
        }
        Command::Sweep { config, experiment, param, values, out } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            let dir = out.unwrap_or_else(|| cfg.out_dir.join("sweep"));
            let rows = run_sweep(&cfg, param, &values, &dir)?;
            for r in &rows {
                println!("{}={:<8} {:<28} {:>14.6e} ± {:.2e}", r.parameter, r.parameter_value, r.quantity, r.value, r.error);
            }
            Ok(true)
        }
        Command::Plot { input, out, t, title } => {
            let out = out.unwrap_or_else(|| input.with_extension("svg"));
            let n = plot::plot_profile_csv(&input, &out, t, title.as_deref())?;
            println!("plotted {n} curves to {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
