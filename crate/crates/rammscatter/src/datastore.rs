//! Files: FarField JSON with a schema version, TOML experiment configuration,
//! and CSV tables.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::forward::{FarField, GridOptions, NoiseRecord, Potential, Provenance, RadialProfile};
use crate::inversion::{n_of_delta, AnnulusSpec, NoisyConfig};
use crate::specfun::n_harmonics;

pub const FARFIELD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatastoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("schema version {found} does not match expected {expected}")]
    Schema { found: u32, expected: u32 },
    #[error("coefficient arrays hold {found} entries, expected {expected} for L = {l}")]
    Dimension { l: usize, expected: usize, found: usize },
    #[error("coefficient entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Table { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, DatastoreError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatastoreError + '_ {
    move |source| DatastoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// On-disk FarField: coefficient matrix as paired real arrays, row-major in the
/// flat harmonic index `p = l^2 + l + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldFile {
    pub schema_version: u32,
    #[serde(rename = "L")]
    pub l: usize,
    pub a: f64,
    pub re: Vec<Option<f64>>,
    pub im: Vec<Option<f64>>,
    pub provenance: Provenance,
    pub noise: Option<NoiseRecord>,
}

impl FarFieldFile {
    pub fn from_farfield(ff: &FarField) -> Result<Self> {
        let n = ff.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let c = ff.coeffs[(p, q)];
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(DatastoreError::NonFinite { index: p * n + q });
                }
                re.push(Some(c.re));
                im.push(Some(c.im));
            }
        }
        Ok(Self {
            schema_version: FARFIELD_SCHEMA_VERSION,
            l: ff.l,
            a: ff.a,
            re,
            im,
            provenance: ff.meta.clone(),
            noise: ff.noise.clone(),
        })
    }

    pub fn into_farfield(self) -> Result<FarField> {
        if self.schema_version != FARFIELD_SCHEMA_VERSION {
            return Err(DatastoreError::Schema {
                found: self.schema_version,
                expected: FARFIELD_SCHEMA_VERSION,
            });
        }
        let n = n_harmonics(self.l);
        for len in [self.re.len(), self.im.len()] {
            if len != n * n {
                return Err(DatastoreError::Dimension {
                    l: self.l,
                    expected: n * n,
                    found: len,
                });
            }
        }
        let mut coeffs = DMatrix::zeros(n, n);
        for (k, (r, i)) in self.re.iter().zip(&self.im).enumerate() {
            match (r, i) {
                (Some(r), Some(i)) if r.is_finite() && i.is_finite() => coeffs[(k / n, k % n)] = Complex64::new(*r, *i),
                _ => return Err(DatastoreError::NonFinite { index: k }),
            }
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(DatastoreError::Config(format!("support radius must be positive, got {}", self.a)));
        }
        Ok(FarField {
            l: self.l,
            coeffs,
            a: self.a,
            meta: self.provenance,
            noise: self.noise,
        })
    }
}

/// Writes pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DatastoreError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatastoreError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn save_farfield(ff: &FarField, path: &Path) -> Result<()> {
    save_json(&FarFieldFile::from_farfield(ff)?, path)
}

pub fn load_farfield(path: &Path) -> Result<FarField> {
    load_json::<FarFieldFile>(path)?.into_farfield()
}

/// Writes a CSV table with a header row; numbers in `{:.16e}` and LF line endings.
pub fn emit_table(columns: &[&str], rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let table_err = |msg: String| DatastoreError::Table {
        path: path.to_path_buf(),
        msg,
    };
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
        return Err(table_err(format!("row {i} has {} values, header has {}", r.len(), columns.len())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    w.write_record(columns).map_err(|e| table_err(e.to_string()))?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}")))
            .map_err(|e| table_err(e.to_string()))?;
    }
    let mut inner = w.into_inner().map_err(|e| table_err(e.to_string()))?;
    inner.flush().map_err(io_err(path))
}

/// Table read back from [`emit_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn load_table(path: &Path) -> Result<Table> {
    let table_err = |msg: String| DatastoreError::Table {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| table_err(e.to_string()))?;
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| table_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| table_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| table_err(format!("row {i}: {e}")))?;
        if row.len() != columns.len() {
            return Err(table_err(format!("row {i} has {} values, header has {}", row.len(), columns.len())));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Forward-solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Harmonic degree `L` of the FarField.
    pub l: usize,
    pub grid_n: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            l: 10,
            grid_n: 32,
            tol: 1e-10,
        }
    }
}

/// Growth ladder of `|theta|` values: `start * factor^k`, `k < steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub steps: usize,
    /// Defaults to `max(2, |xi|)`.
    pub start: Option<f64>,
    pub factor: f64,
    /// Ridge weight of the exact-data mollifier fit.
    pub reg: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            steps: 4,
            start: None,
            factor: 1.5,
            reg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub deltas: Vec<f64>,
    /// Defaults to `ln(a1 / a)`.
    pub gamma: Option<f64>,
    pub c_budget: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1e-3, 1e-6, 1e-9, 1e-12],
            gamma: None,
            c_budget: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

/// Penetrable-limit and shape-reconstruction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleConfig {
    pub radius: f64,
    /// Heights `t` of `q = t chi_B` for the limit table.
    pub t_list: Vec<f64>,
    /// Heights for the Lipschitz table.
    pub lipschitz_t: Vec<f64>,
    pub l: usize,
    pub n_angles: usize,
    /// Relative Tikhonov weight of the indicator reconstruction.
    pub reg: f64,
    /// Growth parameter of the indicator direction pair.
    pub growth: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            t_list: vec![1e2, 1e3, 1e4],
            lipschitz_t: (0..19).map(|k| 1.0 + 0.5 * k as f64).collect(),
            l: 14,
            n_angles: 181,
            reg: 1e-10,
            growth: 1.0,
        }
    }
}

/// Dirichlet-to-Neumann settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtnConfig {
    pub a: f64,
    pub l: usize,
    pub reg: f64,
}

impl Default for DtnConfig {
    fn default() -> Self {
        Self { a: 1.5, l: 6, reg: 1e-12 }
    }
}

/// Annulus overrides; unset fields take the defaults for the support radius.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnulusConfig {
    pub a1: Option<f64>,
    pub b: Option<f64>,
    pub n_r: Option<usize>,
}

/// Experiment description loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub potential: RadialProfile,
    pub solver: SolverConfig,
    pub annulus: AnnulusConfig,
    pub ladder: LadderConfig,
    pub noise: NoiseConfig,
    pub obstacle: ObstacleConfig,
    pub dtn: DtnConfig,
    /// xi vectors for inversion runs.
    pub xi: Vec<[f64; 3]>,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            potential: RadialProfile::Ball { q0: 0.1, radius: 1.0 },
            solver: SolverConfig::default(),
            annulus: AnnulusConfig::default(),
            ladder: LadderConfig::default(),
            noise: NoiseConfig::default(),
            obstacle: ObstacleConfig::default(),
            dtn: DtnConfig::default(),
            xi: vec![[0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| DatastoreError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            DatastoreError::Config(msg) => DatastoreError::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DatastoreError::Config(e.to_string()))
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::radial(self.potential.clone()).map_err(|e| DatastoreError::Config(e.to_string()))
    }

    pub fn annulus_spec(&self) -> AnnulusSpec {
        let d = AnnulusSpec::default_for(self.potential.radius());
        AnnulusSpec {
            a1: self.annulus.a1.unwrap_or(d.a1),
            b: self.annulus.b.unwrap_or(d.b),
            n_r: self.annulus.n_r.unwrap_or(d.n_r),
            l_q: None,
        }
    }

    pub fn noisy_config(&self) -> NoisyConfig {
        let spec = self.annulus_spec();
        NoisyConfig {
            spec,
            gamma: self
                .noise
                .gamma
                .unwrap_or((spec.a1 / self.potential.radius()).ln()),
            c_budget: self.noise.c_budget,
            ladder_steps: self.ladder.steps,
        }
    }

    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            n: self.solver.grid_n,
            tol: self.solver.tol,
            ..GridOptions::default()
        }
    }

    /// Re-checks the constraints of every module the configuration feeds.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatastoreError::Config(m));
        self.potential()?;
        let a = self.potential.radius();
        if let Err(e) = self.annulus_spec().validate(a) {
            return bad(e.to_string());
        }
        if self.solver.grid_n < 8 {
            return bad(format!("grid_n must be at least 8, got {}", self.solver.grid_n));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad(format!("solver tolerance must lie in (0, 1), got {}", self.solver.tol));
        }
        if self.ladder.steps < 2 || !(self.ladder.factor > 1.0) || !(self.ladder.reg >= 0.0) {
            return bad("ladder needs steps >= 2, factor > 1 and reg >= 0".into());
        }
        if let Some(s) = self.ladder.start {
            if !(s >= 1.0) {
                return bad(format!("ladder start must be >= 1, got {s}"));
            }
        }
        for d in &self.noise.deltas {
            if n_of_delta(*d).is_err() {
                return bad(format!("noise level {d} must satisfy 0 < delta < 1/e"));
            }
        }
        if let Some(g) = self.noise.gamma {
            if !(g > 0.0) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if !(self.noise.c_budget > 0.0) {
            return bad(format!("c_budget must be positive, got {}", self.noise.c_budget));
        }
        let ob = &self.obstacle;
        if !(ob.radius > 0.0) || ob.l < 4 || ob.n_angles < 4 || !(ob.reg > 0.0) || !(ob.growth >= 0.0) {
            return bad("obstacle needs radius > 0, l >= 4, n_angles >= 4, reg > 0 and growth >= 0".into());
        }
        for list in [&ob.t_list, &ob.lipschitz_t] {
            if list.is_empty() || list[0] <= 0.0 || list.windows(2).any(|w| !(w[1] > w[0])) {
                return bad("obstacle heights must be positive and increasing".into());
            }
        }
        if !(self.dtn.a >= a) || self.dtn.l == 0 || !(self.dtn.reg >= 0.0) {
            return bad(format!("dtn needs a >= support radius {a}, l >= 1 and reg >= 0"));
        }
        if self.xi.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return bad("xi entries must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_bad_annulus_and_noise() {
        let text = "[annulus]\na1 = 0.9\n";
        assert!(matches!(ExperimentConfig::from_toml(text), Err(DatastoreError::Config(_))));
        let text = "[noise]\ndeltas = [0.5]\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
        let text = "unknown_key = 1\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let text = "seed = 7\n[potential]\nprofile = \"ball\"\nq0 = 0.2\nradius = 1.0\n[solver]\nl = 6\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.solver.l, 6);
        assert_eq!(cfg.solver.grid_n, 32);
    }

    #[test]
    fn zero_farfield_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.json");
        let ff = FarField::zeros(3, 1.0);
        save_farfield(&ff, &path).unwrap();
        assert_eq!(load_farfield(&path).unwrap(), ff);
    }

    #[test]
    fn dimension_and_schema_errors_are_distinct() {
        let mut file = FarFieldFile::from_farfield(&FarField::zeros(2, 1.0)).unwrap();
        file.re.pop();
        assert!(matches!(file.clone().into_farfield(), Err(DatastoreError::Dimension { .. })));
        file.re.push(None);
        assert!(matches!(file.clone().into_farfield(), Err(DatastoreError::NonFinite { index: 80 })));
        file.schema_version = 2;
        assert!(matches!(file.into_farfield(), Err(DatastoreError::Schema { found: 2, .. })));
    }

    #[test]
    fn table_round_trips_exact_decimal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit_table(&["x"], &[vec![0.1]], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x\n1.0000000000000001e-1\n");
        assert_eq!(load_table(&path).unwrap().rows, vec![vec![0.1]]);
        emit_table(&["a", "b"], &[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
        assert!(emit_table(&["a"], &[vec![1.0, 2.0]], &path).is_err());
    }
}
