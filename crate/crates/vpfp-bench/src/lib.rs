//! Shared fixtures for the benchmarks in `benches/`.

use vpfp_core::nonlinear::NonlinearConfig;

/// A reduced nonlinear configuration that keeps one time step in the
/// millisecond range.
pub fn small_nonlinear_config() -> NonlinearConfig {
    NonlinearConfig { max_degree: 4, rho_max: 10.0, r_max: 20.0, ..NonlinearConfig::default() }
}
