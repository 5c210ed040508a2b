//! Run configuration: a JSON file with one optional section per subcommand,
//! overridden field by field from the command line.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vpfp_core::assembly::AssemblyConfig;
use vpfp_core::nonlinear::NonlinearConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub spectrum: SpectrumConfig,
    pub kernel_probe: KernelProbeConfig,
    pub lowfreq: LadderConfig,
    pub highfreq: LadderConfig,
    pub assemble: AssembleConfig,
    pub simulate: SimulateConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub basis_degree: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub points: usize,
    /// Bound on `max Re λ` defining the low-frequency region.
    pub threshold: f64,
    /// Upper end of the search range for `r̂_0`.
    pub r0_search_max: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { basis_degree: 16, xi_min: 1e-2, xi_max: 60.0, points: 80, threshold: -0.45, r0_search_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelProbeConfig {
    pub times: Vec<f64>,
    pub separations: Vec<f64>,
    pub speeds: Vec<f64>,
    /// `g0` (undamped) or `g1` (damped by `e^{-2t}`).
    pub kernel: String,
}

impl Default for KernelProbeConfig {
    fn default() -> Self {
        KernelProbeConfig {
            times: vec![0.01, 0.1, 1.0, 5.0],
            separations: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            speeds: vec![0.0, 1.0, 2.0],
            kernel: "g1".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub basis_degree: usize,
    pub k_max: usize,
    pub xi: Vec<f64>,
    pub times: Vec<f64>,
    pub r_hat: f64,
}

impl LadderConfig {
    pub fn low_default() -> Self {
        LadderConfig { basis_degree: 8, k_max: 3, xi: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0], times: vec![0.5, 1.0, 2.0, 5.0], r_hat: 1.0 }
    }

    pub fn high_default() -> Self {
        LadderConfig { basis_degree: 8, k_max: 7, xi: vec![1.5, 2.0, 4.0, 8.0, 16.0], times: vec![0.1, 0.5, 1.0, 2.0], r_hat: 1.0 }
    }
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig::low_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleConfig {
    pub t: f64,
    pub part: String,
    pub x_max: f64,
    pub x_points: usize,
    pub window: (f64, f64),
    pub numerics: AssemblyConfig,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig { t: 2.0, part: "low".to_string(), x_max: 60.0, x_points: 240, window: (5.0, 50.0), numerics: AssemblyConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub solver: NonlinearConfig,
    /// Picard iterates used for the contraction estimate (0 disables it).
    pub picard_iterations: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { solver: NonlinearConfig::default(), picard_iterations: 8 }
    }
}
