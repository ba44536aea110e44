//! `gen-data`: synthetic least-squares problems as LibSVM files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vite_core::datasets::{synth_quadratic, write_libsvm};

use crate::error::{config_err, run_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFile {
    pub dim: usize,
    pub mu: f64,
    pub l: f64,
    #[serde(default)]
    pub seed: u64,
    /// Output path; relative to the spec file's directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SyntheticFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("invalid synthetic spec {}: {e}", path.display())))
    }
}

/// Writes the dataset to `out` and its minimizer to `<out>.wstar`.
pub fn generate(spec: &SyntheticFile, out: &Path) -> Result<PathBuf> {
    let q = synth_quadratic(spec.dim, spec.mu, spec.l, spec.seed)?;
    let io = |p: &Path, e: std::io::Error| run_err(format!("{}: {e}", p.display()));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let file = fs::File::create(out).map_err(|e| io(out, e))?;
    let mut w = BufWriter::new(file);
    write_libsvm(&q.data, &mut w).map_err(|e| io(out, e))?;
    w.flush().map_err(|e| io(out, e))?;

    let wstar = PathBuf::from(format!("{}.wstar", out.display()));
    let text: String = q.w_star.iter().map(|v| format!("{v:.17e}\n")).collect();
    fs::write(&wstar, text).map_err(|e| io(&wstar, e))?;
    Ok(wstar)
}
