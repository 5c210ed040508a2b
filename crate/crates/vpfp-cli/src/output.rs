//! Output directory bookkeeping: every file written by a run is listed in
//! `manifest.json` together with the configuration hash, the basis hash and
//! the kernel normalization.  Timestamps live only in the manifest so data
//! files are byte-identical across repeated runs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use vpfp_core::basis::hex_digest;
use vpfp_core::kernel::normalization;
use vpfp_core::BasisSpec;

pub struct RunOutput {
    dir: PathBuf,
    files: Vec<String>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(RunOutput { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_text(name, &(text + "\n"))
    }

    /// Register files produced by another writer.
    pub fn register(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    /// Write `manifest.json`.  `basis_degree` is the Cartesian Hermite
    /// truncation used by the run, if any.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, seed: u64, basis_degree: Option<usize>, smoke: bool) -> Result<()> {
        let config_value = serde_json::to_value(config)?;
        let canonical = serde_json::to_string(&config_value)?;
        let basis = match basis_degree {
            Some(n) => {
                let b = BasisSpec::build(n)?;
                json!({ "max_degree": n, "dimension": b.dimension(), "manifest_hash": b.manifest_hash(), "ordering": b.manifest().ordering })
            }
            None => Value::Null,
        };
        let norm = normalization();
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.files.sort();
        self.files.dedup();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "mode": if smoke { "smoke" } else { "full" },
            "seed": seed,
            "config": config_value,
            "config_hash": hex_digest(canonical.as_bytes()),
            "basis": basis,
            "kernel_normalization": {
                "g0_mass": norm.g0_mass,
                "fourier_prefactor_ratio": norm.fourier_prefactor_ratio,
            },
            "threads": rayon::current_num_threads(),
            "created_unix": stamp,
            "files": self.files,
        });
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Full-precision scientific formatting for CSV cells.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}
