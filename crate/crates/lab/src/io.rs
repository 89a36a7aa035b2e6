//! Output formats: profile and table CSVs, JSON run metadata and a flat
//! little-endian binary format for fields on a grid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spde_boundary::noise::GridSpec;

use crate::stats::EnsembleStats;
use crate::{ExperimentConfig, LabError, Result};

/// One row of a profile CSV: `t, x, mean, se, [epsilon], [path_count]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub x: f64,
    pub mean: f64,
    pub se: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_count: Option<usize>,
}

/// Flatten ensembles into profile rows. `with_epsilon` / `with_paths`
/// select the optional columns (all rows of a file have the same columns).
pub fn profile_rows(ensembles: &[&EnsembleStats], with_epsilon: bool, with_paths: bool) -> Vec<ProfileRow> {
    let mut rows = Vec::new();
    for e in ensembles {
        for p in &e.profiles {
            for (i, &x) in p.xs.iter().enumerate() {
                rows.push(ProfileRow {
                    t: p.t,
                    x,
                    mean: p.mean[i],
                    se: p.se[i],
                    epsilon: if with_epsilon { Some(e.epsilon.unwrap_or(f64::NAN)) } else { None },
                    path_count: if with_paths { Some(p.n_paths) } else { None },
                });
            }
        }
    }
    rows
}

/// Write any serialisable rows as CSV with a header.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

pub fn write_profiles(path: &Path, ensembles: &[&EnsembleStats], with_epsilon: bool) -> Result<()> {
    write_csv(path, &profile_rows(ensembles, with_epsilon, true))
}

/// Version information recorded with every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub core: String,
    pub lab: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self { core: spde_boundary::VERSION.into(), lab: env!("CARGO_PKG_VERSION").into() }
    }
}

/// JSON metadata of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub wall_time_seconds: f64,
    pub threads: usize,
    pub files: Vec<String>,
}

impl RunMetadata {
    pub fn new(cfg: &ExperimentConfig, wall_time_seconds: f64, files: Vec<String>) -> Result<Self> {
        Ok(Self {
            experiment: serde_json::to_value(cfg.experiment)?.as_str().unwrap_or_default().to_owned(),
            config_hash: cfg.hash_hex(),
            config: serde_json::to_value(cfg)?,
            versions: Versions::default(),
            wall_time_seconds,
            threads: rayon::current_num_threads(),
            files,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

// ----------------------------------------------------------- binary ----

const MAGIC: &[u8; 8] = b"SPDEBIN1";
const FORMAT_VERSION: u32 = 1;

/// Header of a flat binary field file. The payload that follows is
/// `rows × cols` little-endian `f64` in row-major order; `times` lists the
/// time of each row when the rows are snapshots (empty otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryHeader {
    /// Spatial dimension of each row (1, or 2 for a flattened square).
    pub dim: u32,
    pub grid: GridSpec,
    pub seed: u64,
    pub stream_id: u64,
    pub rows: u64,
    pub cols: u64,
    pub times: Vec<f64>,
}

/// Write header and payload.
///
/// Layout (all little-endian): magic `SPDEBIN1`, `u32` format version,
/// `u32` dim, `f64` t_max, `u64` n_t, `f64` x_lo, `f64` x_hi, `u64` n_x,
/// `u64` seed, `u64` stream id, `u64` rows, `u64` cols, `u64` number of
/// times, the times as `f64`, then the payload.
pub fn write_binary(path: &Path, header: &BinaryHeader, payload: &[f64]) -> Result<()> {
    if payload.len() as u64 != header.rows * header.cols {
        return Err(LabError::Format(format!(
            "payload has {} values, header says {}×{}",
            payload.len(),
            header.rows,
            header.cols
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&header.dim.to_le_bytes())?;
    let g = &header.grid;
    w.write_all(&g.t_max.to_le_bytes())?;
    w.write_all(&(g.n_t as u64).to_le_bytes())?;
    w.write_all(&g.x_lo.to_le_bytes())?;
    w.write_all(&g.x_hi.to_le_bytes())?;
    w.write_all(&(g.n_x as u64).to_le_bytes())?;
    for v in [header.seed, header.stream_id, header.rows, header.cols, header.times.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for t in &header.times {
        w.write_all(&t.to_le_bytes())?;
    }
    for v in payload {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R: Read>(R);

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| LabError::Format(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

/// Read a file written by [`write_binary`].
pub fn read_binary(path: &Path) -> Result<(BinaryHeader, Vec<f64>)> {
    let mut r = Cursor(BufReader::new(File::open(path)?));
    if &r.bytes::<8>()? != MAGIC {
        return Err(LabError::Format("not a field file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(LabError::Format(format!("unsupported format version {version}")));
    }
    let dim = r.u32()?;
    let t_max = r.f64()?;
    let n_t = r.u64()? as usize;
    let x_lo = r.f64()?;
    let x_hi = r.f64()?;
    let n_x = r.u64()? as usize;
    let grid = GridSpec::new(t_max, n_t, (x_lo, x_hi), n_x)?;
    let (seed, stream_id, rows, cols, n_times) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    if n_times > rows.max(1) * 16 || rows.checked_mul(cols).is_none_or(|n| n > 1 << 34) {
        return Err(LabError::Format("implausible header sizes".into()));
    }
    let times = (0..n_times).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let payload = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.0.read(&mut [0u8; 1])? != 0 {
        return Err(LabError::Format("trailing bytes after the payload".into()));
    }
    Ok((BinaryHeader { dim, grid, seed, stream_id, rows, cols, times }, payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::EnsembleStats;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let grid = GridSpec::interval(0.5, 10, 4).unwrap();
        let payload: Vec<f64> = (0..10).map(|i| (i as f64).sin() * 1e-7 + 1.0 / 3.0).collect();
        let header =
            BinaryHeader { dim: 1, grid, seed: 42, stream_id: 7, rows: 2, cols: 5, times: vec![0.0, 0.25] };
        write_binary(&path, &header, &payload).unwrap();
        let (h, p) = read_binary(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), payload.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        // 8 magic + 2·4 + 5·8 grid/ids... + times + payload
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 8 + 4 + 4 + 8 * 5 + 8 * 5 + 8 * 2 + 8 * 10);
    }

    #[test]
    fn binary_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let grid = GridSpec::interval(0.5, 10, 4).unwrap();
        let header = BinaryHeader { dim: 1, grid, seed: 0, stream_id: 0, rows: 2, cols: 5, times: vec![] };
        assert!(write_binary(&path, &header, &[0.0; 3]).is_err());
        std::fs::write(&path, b"NOTMAGIC-and-more-bytes").unwrap();
        assert!(matches!(read_binary(&path), Err(LabError::Format(_))));
        write_binary(&path, &header, &[1.0; 10]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_binary(&path), Err(LabError::Format(_))));
    }

    #[test]
    fn profile_csv_columns_follow_the_options() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![vec![vec![0.0, 1.0]], vec![vec![2.0, 1.0]]];
        let e = EnsembleStats::from_paths("x", Some(0.1), &[0.5], &[-1.0, 1.0], &samples, 0);
        let path = dir.path().join("p.csv");
        write_profiles(&path, &[&e], true).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x,mean,se,epsilon,path_count");
        let rows: Vec<ProfileRow> = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].epsilon, Some(0.1));
        assert_eq!(rows[0].path_count, Some(2));
        write_csv(&path, &profile_rows(&[&e], false, false)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x,mean,se");
        let rows: Vec<ProfileRow> = read_csv(&path).unwrap();
        assert_eq!(rows[1].epsilon, None);
    }
}
