use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{CriterionResult, DecayFit};

/// Summary of one analysed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeReport {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P_err")]
    pub p_err: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_err")]
    pub c_err: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_err")]
    pub f_err: f64,
    pub criteria: Vec<CriterionResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t_s: f64,
    pub coherence: f64,
    pub coherence_err: f64,
    /// Error probability relative to the prepared coherence; absent when the
    /// measured coherence is not positive.
    pub eps: Option<f64>,
    pub eps_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub state: String,
    pub rows: Vec<DecayRow>,
    /// `None` when the curve does not decay.
    pub fit: Option<DecayFit>,
}

impl DecayReport {
    pub fn timescale(&self) -> Option<f64> {
        self.fit.map(|f| f.timescale.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps_ratio: f64,
    pub eps_ratio_err: f64,
}

/// Fitted rate r_N in ε(N, t) = r_N·ε(1, t) for one register size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRate {
    pub n: usize,
    pub rate: f64,
    pub rate_err: f64,
    pub wait_times_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub alpha: f64,
    pub alpha_err: f64,
    pub rows: Vec<ScalingRow>,
    pub rates: Vec<ScalingRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfsReport {
    pub n: usize,
    /// `None` without spontaneous decay.
    pub t1_s: Option<f64>,
    pub dfs: DecayReport,
    pub ghz: DecayReport,
    /// DFS timescale over GHZ timescale; `None` if either does not decay.
    pub timescale_ratio: Option<f64>,
}

/// Files produced by one scenario run, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn insert(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    pub fn insert_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.insert(name, bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Write every file into `dir` through a temporary file and a rename, so
    /// readers never see partial output.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, dir.join(name)).map_err(|e| Error::Io(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

pub(crate) fn decay_csv(rows: &[DecayRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_s", "coherence", "coherence_err"])?;
    for r in rows {
        w.write_record(&[r.t_s.to_string(), r.coherence.to_string(), r.coherence_err.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub(crate) fn scaling_csv(rows: &[ScalingRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "eps_ratio", "eps_ratio_err"])?;
    for r in rows {
        w.write_record(&[r.n.to_string(), r.eps_ratio.to_string(), r.eps_ratio_err.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}
