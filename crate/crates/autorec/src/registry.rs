//! Environment registry: a directory of generated datasets and interaction
//! logs with a manifest. The hidden satisfaction column lives in its own
//! file that only oracle code opens.
//!
//! Layout:
//! - `env.json`: [`EnvManifest`]
//! - `<dataset>.csv`: columns `x0..x{d-1}, y`
//! - `logs.csv`: observable log columns, empty cells for missing values
//! - `logs.oracle.csv`: the hidden satisfaction column alone

use std::fs;
use std::path::{Path, PathBuf};

use autorec_core::config::presets;
use autorec_core::online::{ModelBench, SimEnv};
use autorec_core::sim::datasets::{gen_supervised_dataset, DatasetName};
use autorec_core::sim::logs::{gen_interaction_logs, LogTable, SimSpec, LATENT_COLUMN};
use autorec_core::table::{Column, Table};
use autorec_core::trainer::Dataset;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "env.json";
pub const LOGS_FILE: &str = "logs.csv";
pub const ORACLE_FILE: &str = "logs.oracle.csv";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: content hash {actual} does not match manifest {expected}")]
    Stale { path: PathBuf, expected: String, actual: String },
    #[error("dataset `{0}` is not registered")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub input_dim: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogsEntry {
    pub file: String,
    pub oracle_file: String,
    pub columns: Vec<String>,
    pub spec: SimSpec,
    pub sha256: String,
    pub oracle_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvManifest {
    pub seed: u64,
    pub datasets: Vec<DatasetEntry>,
    pub logs: LogsEntry,
    /// The online metrics are a simulator construct: metric1 tracks reward
    /// quality or long-horizon loss, metric3 is a cost-coupled guardrail.
    pub notes: String,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, RegistryError> {
    fs::write(path, bytes).map_err(|source| RegistryError::Io {
        path: path.into(),
        source,
    })?;
    Ok(sha_hex(bytes))
}

fn read_checked(path: &Path, expected: &str) -> Result<Vec<u8>, RegistryError> {
    let bytes = fs::read(path).map_err(|source| RegistryError::Io {
        path: path.into(),
        source,
    })?;
    let actual = sha_hex(&bytes);
    if actual != expected {
        return Err(RegistryError::Stale {
            path: path.into(),
            expected: expected.into(),
            actual,
        });
    }
    Ok(bytes)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<Option<f64>>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Header and nullable columns of a CSV file.
type CsvColumns = (Vec<String>, Vec<Vec<Option<f64>>>);

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<CsvColumns, RegistryError> {
    let fmt = |message: String| RegistryError::Format {
        path: path.into(),
        message,
    };
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers().map_err(|e| fmt(e.to_string()))?.iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        for (c, cell) in cols.iter_mut().zip(rec.iter()) {
            c.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|e| fmt(format!("`{cell}`: {e}")))?)
            });
        }
    }
    Ok((header, cols))
}

/// Generates every dataset and the log table for `seed` into `dir`.
pub fn generate(dir: &Path, seed: u64, log_rows: usize) -> Result<EnvManifest, RegistryError> {
    fs::create_dir_all(dir).map_err(|source| RegistryError::Io {
        path: dir.into(),
        source,
    })?;
    let mut datasets = Vec::new();
    for name in DatasetName::ALL {
        let d = gen_supervised_dataset(name, seed);
        let mut header: Vec<String> = (0..d.input_dim).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        let bytes = csv_bytes(
            &header,
            (0..d.rows()).map(|i| d.row(i).iter().copied().chain([d.y[i]]).map(Some).collect()),
        );
        let file = format!("{}.csv", name.as_str());
        datasets.push(DatasetEntry {
            name: name.as_str().into(),
            sha256: write_file(&dir.join(&file), &bytes)?,
            file,
            rows: d.rows(),
            input_dim: d.input_dim,
        });
    }

    let spec = SimSpec {
        rows: log_rows,
        seed,
        ..SimSpec::default()
    };
    let logs = gen_interaction_logs(&spec);
    let t = logs.table();
    let columns: Vec<String> = t.columns().iter().map(|c| c.name.clone()).collect();
    let bytes = csv_bytes(
        &columns,
        (0..t.rows()).map(|r| t.columns().iter().map(|c| c.values[r]).collect()),
    );
    let oracle = csv_bytes(&[LATENT_COLUMN.into()], logs.oracle_latent().iter().map(|v| vec![Some(*v)]));
    let manifest = EnvManifest {
        seed,
        datasets,
        logs: LogsEntry {
            file: LOGS_FILE.into(),
            oracle_file: ORACLE_FILE.into(),
            columns,
            spec,
            sha256: write_file(&dir.join(LOGS_FILE), &bytes)?,
            oracle_sha256: write_file(&dir.join(ORACLE_FILE), &oracle)?,
        },
        notes: "metric1/metric2/metric3 are simulated deltas: metric1 follows reward-to-satisfaction \
                correlation or long-horizon loss, metric3 rises when reward weight concentrates on watch_time"
            .into(),
    };
    write_file(
        &dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).unwrap().as_bytes(),
    )?;
    Ok(manifest)
}

/// A registry directory opened for reading. Every file is checked against
/// the manifest hash before use.
#[derive(Debug, Clone)]
pub struct Registry {
    pub dir: PathBuf,
    pub manifest: EnvManifest,
}

impl Registry {
    pub fn open(dir: &Path) -> Result<Self, RegistryError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| RegistryError::Io {
            path: path.clone(),
            source,
        })?;
        let manifest = serde_json::from_str(&text).map_err(|e| RegistryError::Format {
            path,
            message: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.into(),
            manifest,
        })
    }

    pub fn dataset(&self, name: &str) -> Result<Dataset, RegistryError> {
        let e = self
            .manifest
            .datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| RegistryError::Unknown(name.into()))?;
        let path = self.dir.join(&e.file);
        let (_, cols) = parse_csv(&path, &read_checked(&path, &e.sha256)?)?;
        let missing = || RegistryError::Format {
            path: path.clone(),
            message: "missing value".into(),
        };
        let mut x = Vec::with_capacity(e.rows * e.input_dim);
        for r in 0..e.rows {
            for c in &cols[..e.input_dim] {
                x.push(c[r].ok_or_else(missing)?);
            }
        }
        let y = cols[e.input_dim].iter().map(|v| v.ok_or_else(missing)).collect::<Result<_, _>>()?;
        Ok(Dataset {
            name: e.name.clone(),
            input_dim: e.input_dim,
            x,
            y,
        })
    }

    pub fn logs(&self) -> Result<LogTable, RegistryError> {
        let e = &self.manifest.logs;
        let path = self.dir.join(&e.file);
        let (header, cols) = parse_csv(&path, &read_checked(&path, &e.sha256)?)?;
        let table = Table::new("logs", header.into_iter().zip(cols).map(|(n, v)| Column::new(n, v)).collect());
        let opath = self.dir.join(&e.oracle_file);
        let (_, mut latent) = parse_csv(&opath, &read_checked(&opath, &e.oracle_sha256)?)?;
        let latent = latent
            .pop()
            .unwrap_or_default()
            .into_iter()
            .map(|v| {
                v.ok_or_else(|| RegistryError::Format {
                    path: opath.clone(),
                    message: "missing value".into(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(LogTable::from_parts(table, latent))
    }

    /// The simulated production environment backed by this registry.
    pub fn sim_env(&self) -> Result<SimEnv, RegistryError> {
        Ok(SimEnv::new(
            ModelBench::new(self.dataset(DatasetName::Illcond100.as_str())?, presets::adagrad_linear()),
            ModelBench::new(self.dataset(DatasetName::GatedNoise.as_str())?, presets::dense_baseline()),
            self.logs()?,
            presets::adagrad_linear(),
        ))
    }
}
