//! Artifact formats: JSON states and bounds, CSV records and sweeps.
//!
//! CSV files start with `# key=value` metadata lines followed by a header
//! row. Every artifact carries the config digest and the seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use noon_core::estimation::SweepResult;
use noon_core::linalg::{CMatrix, C64};
use noon_core::measurement::{MeasurementEntry, MeasurementRecord, MeasurementSetting};
use noon_core::quantum::{FactorLabel, HilbertLayout, QuantumState};

use crate::ConfigError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Meta {
    fn lines(&self) -> Vec<(String, String)> {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        vec![
            ("command".into(), self.command.clone()),
            ("config_sha256".into(), self.config_sha256.clone()),
            ("seed".into(), seed),
        ]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateFile {
    pub meta: Meta,
    pub n: usize,
    /// Relative NOON phase reported by the simulation.
    pub phi: f64,
    /// Fidelity of the full final state with the NOON target at `phi`.
    pub noon_fidelity: f64,
    pub layout: Vec<(FactorLabel, usize)>,
    /// Density matrix as rows of `[re, im]` pairs.
    pub density: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

pub fn encode_matrix(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn decode_matrix(rows: &[Vec<[f64; 2]>]) -> anyhow::Result<CMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        bail!(ConfigError("density matrix must be square".into()));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl StateFile {
    pub fn state(&self) -> anyhow::Result<QuantumState> {
        let layout = HilbertLayout::new(self.layout.clone())?;
        let rho = decode_matrix(&self.density)?;
        Ok(QuantumState::from_density(layout, rho)?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

fn write_csv(path: &Path, meta: &[(String, String)], header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut out = Vec::new();
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_csv(path: &Path) -> anyhow::Result<(BTreeMap<String, String>, Vec<csv::StringRecord>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut meta = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok((meta, rows))
}

pub const RECORD_COLUMNS: [&str; 8] = ["re_alpha1", "im_alpha1", "tau1", "re_alpha2", "im_alpha2", "tau2", "outcome", "sigma"];

/// Measurement record plus the NOON description it was taken for.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordFile {
    pub meta: Meta,
    pub n: usize,
    pub phi: f64,
    pub record: MeasurementRecord,
}

impl RecordFile {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut meta = self.meta.lines();
        meta.push(("n".into(), self.n.to_string()));
        meta.push(("phi".into(), self.phi.to_string()));
        let rows: Vec<Vec<String>> = self
            .record
            .entries
            .iter()
            .map(|e| {
                let s = &e.setting;
                [s.alpha1.re, s.alpha1.im, s.tau1, s.alpha2.re, s.alpha2.im, s.tau2, e.outcome, e.sigma]
                    .iter()
                    .map(|v| v.to_string())
                    .collect()
            })
            .collect();
        write_csv(path, &meta, &RECORD_COLUMNS, &rows)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let (meta, rows) = read_csv(path)?;
        let field = |k: &str| meta.get(k).ok_or_else(|| anyhow!(ConfigError(format!("{}: missing `{k}` metadata", path.display()))));
        let bad = |k: &str| ConfigError(format!("{}: malformed `{k}` metadata", path.display()));
        let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
        let phi: f64 = field("phi")?.parse().map_err(|_| bad("phi"))?;
        let seed = match field("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| bad("seed"))?),
        };
        let mut entries = Vec::with_capacity(rows.len());
        for (j, r) in rows.iter().enumerate() {
            let v: Vec<f64> = r
                .iter()
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ConfigError(format!("{}: row {j} is not numeric", path.display())))?;
            if v.len() != RECORD_COLUMNS.len() {
                bail!(ConfigError(format!("{}: row {j} has {} columns", path.display(), v.len())));
            }
            let setting = MeasurementSetting::new(C64::new(v[0], v[1]), v[2], C64::new(v[3], v[4]), v[5])?;
            entries.push(MeasurementEntry { setting, outcome: v[6], sigma: v[7] });
        }
        let record = MeasurementRecord { entries, seed: seed.unwrap_or(0) };
        record.validate()?;
        Ok(Self {
            meta: Meta { command: field("command")?.clone(), config_sha256: field("config_sha256")?.clone(), seed },
            n,
            phi,
            record,
        })
    }
}

pub const SWEEP_COLUMNS: [&str; 6] = ["count", "fraction_of_su_d", "lower", "upper", "gap", "true_fidelity"];

pub fn write_sweep(path: &Path, meta: &Meta, sweep: &SweepResult) -> anyhow::Result<()> {
    let mut m = meta.lines();
    m.push(("n".into(), sweep.n.to_string()));
    m.push(("p".into(), sweep.p.map_or_else(|| "none".into(), |p| p.to_string())));
    m.push(("sigma".into(), sweep.sigma.to_string()));
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.count.to_string(),
                r.fraction_of_su_d.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                r.gap.to_string(),
                r.true_fidelity.map_or_else(String::new, |f| f.to_string()),
            ]
        })
        .collect();
    write_csv(path, &m, &SWEEP_COLUMNS, &rows)
}
