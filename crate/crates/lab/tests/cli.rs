//! End-to-end runs of the `spde-lab` binary on small configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spde_lab::io::{read_binary, read_csv, ProfileRow, RunMetadata};
use spde_lab::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spde-lab"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed ({:?}):\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn simulate_writes_profiles_metadata_and_binary_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("quick.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(out));
    }

    let header = std::fs::read_to_string(a.join("kpz.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "t,x,mean,se,epsilon,path_count");
    let rows: Vec<ProfileRow> = read_csv(&a.join("kpz.csv")).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.se.is_finite() && r.path_count == Some(8) && r.epsilon == Some(0.25)));
    // Every summary number carries an error column.
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "quantity,epsilon,value,error");

    // Same seed and configuration: byte-identical tables.
    for f in ["kpz.csv", "hopf_cole.csv", "difference.csv", "fit.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let meta = RunMetadata::read(&a.join("metadata.json")).unwrap();
    assert_eq!(meta.experiment, "kpz_boundary_renorm");
    assert_eq!(meta.config_hash, ExperimentConfig::load(&cfg).unwrap().hash_hex());
    assert_eq!(meta.versions.lab, env!("CARGO_PKG_VERSION"));
    assert!(meta.wall_time_seconds > 0.0);
    assert!(meta.files.iter().any(|f| f.ends_with("kpz_mean.bin")));

    let (h, payload) = read_binary(&a.join("kpz_mean.bin")).unwrap();
    assert_eq!(h.seed, 1);
    assert_eq!(h.times, vec![0.125, 0.25]);
    assert_eq!(payload.len() as u64, h.rows * h.cols);
    assert_eq!(h.cols as usize, h.grid.nodes());
    // The binary payload is the mean column of the CSV at those times.
    let last: Vec<f64> = rows.iter().filter(|r| r.t == 0.25).map(|r| r.mean).collect();
    let tail = &payload[payload.len() - h.cols as usize..];
    assert!(last.iter().zip(tail).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0)));
}

#[test]
fn seed_override_changes_the_result_and_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("quick.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(bin().args(["simulate", "--paths", "4", "--config"]).arg(&cfg).arg("--out").arg(&a));
    run_ok(bin().args(["simulate", "--paths", "4", "--seed", "2", "--config"]).arg(&cfg).arg("--out").arg(&b));
    assert_ne!(std::fs::read(a.join("kpz.csv")).unwrap(), std::fs::read(b.join("kpz.csv")).unwrap());
    let (ma, mb) = (RunMetadata::read(&a.join("metadata.json")).unwrap(), RunMetadata::read(&b.join("metadata.json")).unwrap());
    assert_ne!(ma.config_hash, mb.config_hash);
}

#[test]
fn kernel_check_passes() {
    let out = run_ok(bin().arg("kernel-check"));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn constants_of_the_spatial_only_mollifier_vanish() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .args(["constants", "--mollifier", "spatial-only", "--epsilons", "0.2,0.1", "--no-c-minus", "--out"])
            .arg(dir.path()),
    );
    #[derive(serde::Deserialize)]
    struct Row {
        quantity: String,
        #[allow(dead_code)]
        epsilon: Option<f64>,
        value: f64,
        error: f64,
    }
    let rows: Vec<Row> = read_csv(&dir.path().join("constants.csv")).unwrap();
    for q in ["a", "c"] {
        let r = rows.iter().find(|r| r.quantity == q).unwrap();
        assert!(r.value.abs() < 1e-8 && r.error.is_finite(), "{q} = {}", r.value);
    }
    assert!(rows.iter().filter(|r| r.quantity.starts_with("c_eps")).count() >= 2);
    assert!(dir.path().join("metadata.json").exists());
}

#[test]
fn sweep_over_path_counts_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    run_ok(
        bin()
            .args(["sweep", "--param", "paths", "--values", "2,4", "--config"])
            .arg(configs_dir().join("quick.toml"))
            .arg("--out")
            .arg(&out),
    );
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.lines().next().unwrap().starts_with("parameter,parameter_value,quantity,epsilon,value,error"));
    assert!(table.lines().any(|l| l.starts_with("paths,2,")) && table.lines().any(|l| l.starts_with("paths,4,")));

    let svg = dir.path().join("kpz.svg");
    run_ok(bin().arg("plot").arg(out.join("paths_4/kpz.csv")).arg("--out").arg(&svg).args(["--t", "0.25"]));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn invalid_configuration_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"gpam\"\nn_paths = 0\n").unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
