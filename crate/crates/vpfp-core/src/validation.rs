//! Acceptance checks: each criterion computes its measurements, compares
//! them against fixed tolerances and reports a one-line verdict.
//!
//! The same functions back the `acceptance` integration test and the CLI's
//! `validate` command.  `quick` shrinks grids and bases so a smoke run
//! finishes in seconds; the tolerances never change.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assembly::{exponent_report, profile_rate, remainder_sup_bound, AssemblyConfig, GreenPart, Observable};
use crate::basis::{xi_norm, BasisSpec};
use crate::coherent::{semigroup_scaling_probe, sup_over_modes, DysonOperator, DysonResolution, DysonWeights};
use crate::error::{Result, VpfpError};
use crate::fit::{fit_power, fit_rate};
use crate::kernel::{eval_g1_hat, hermite_matrix_of_g1_hat};
use crate::linalg::expm;
use crate::lowfreq::solve_low;
use crate::mode_ops::{chain_operator, spectral_gap_sweep, GapReport, ModeKind, ModeOperator};
use crate::nonlinear::{decay_report, NonlinearConfig, RadialSolver};
use crate::quadrature::{composite_gauss_legendre, lin_grid, log_grid};
use crate::{CVec, C64};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Short human-readable summary of the measured values.
    pub summary: String,
    /// Every measured quantity, for machine consumption.
    pub metrics: Value,
    pub seconds: f64,
}

impl CriterionOutcome {
    /// `PASS [ 3] name (1.2 s): summary`.
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.summary
        )
    }
}

/// Groups of criteria selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Spectrum,
    Kernel,
    LowFreq,
    HighFreq,
    Assembly,
    Nonlinear,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
            Suite::Spectrum => &[1, 2, 3],
            Suite::Kernel => &[4, 5, 6],
            Suite::LowFreq => &[7],
            Suite::HighFreq => &[8],
            Suite::Assembly => &[9, 10],
            Suite::Nonlinear => &[11, 12],
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Some(match name {
            "all" => Suite::All,
            "spectrum" => Suite::Spectrum,
            "kernel" => Suite::Kernel,
            "lowfreq" | "low-freq" => Suite::LowFreq,
            "highfreq" | "high-freq" => Suite::HighFreq,
            "assembly" => Suite::Assembly,
            "nonlinear" => Suite::Nonlinear,
            _ => return None,
        })
    }
}

/// Knobs shared by every criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub quick: bool,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { quick: false, seed: 20240917 }
    }
}

pub const CRITERION_NAMES: [&str; 12] = [
    "fluid eigenvalues",
    "spectral gap",
    "contraction",
    "kernel identity",
    "Chapman-Kolmogorov and symmetry",
    "regularization scaling",
    "low-frequency ladder",
    "high-frequency ladder",
    "spatial exponents",
    "time rates",
    "nonlinear small-data run",
    "Picard contraction",
];

struct Verdict {
    passed: bool,
    summary: String,
    metrics: Value,
}

/// Run one criterion; numerical errors become a failed outcome.
pub fn run_criterion(id: u8, opts: &ValidationOptions) -> CriterionOutcome {
    let start = Instant::now();
    let result = match id {
        1 => fluid_eigenvalues(opts),
        2 => spectral_gap(opts),
        3 => contraction(opts),
        4 => kernel_identity(opts),
        5 => chapman_kolmogorov(opts),
        6 => regularization_scaling(opts),
        7 => low_frequency_ladder(opts),
        8 => high_frequency_ladder(opts),
        9 => spatial_exponents(opts),
        10 => time_rates(opts),
        11 => nonlinear_run(opts),
        12 => picard_contraction(opts),
        _ => Err(VpfpError::InvalidParameter { name: "criterion", value: id as f64, reason: "criteria are numbered 1 to 12" }),
    };
    let name = CRITERION_NAMES.get((id as usize).wrapping_sub(1)).copied().unwrap_or("unknown").to_string();
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(v) => CriterionOutcome { id, name, passed: v.passed, summary: v.summary, metrics: v.metrics, seconds },
        Err(e) => CriterionOutcome {
            id,
            name,
            passed: false,
            summary: format!("error: {e}"),
            metrics: json!({ "error": e.to_string() }),
            seconds,
        },
    }
}

/// Run every criterion of `suite` in order.
pub fn run_suite(suite: Suite, opts: &ValidationOptions) -> Vec<CriterionOutcome> {
    suite.criteria().iter().map(|&id| run_criterion(id, opts)).collect()
}

fn within(measured: f64, target: f64, tol: f64) -> bool {
    (measured - target).abs() <= tol
}

/// `-1/2 ∓ (i/2) sqrt(4s² + 3)` and the double root `-1`.
fn fluid_reference(s: f64) -> [C64; 4] {
    let w = 0.5 * (4.0 * s * s + 3.0).sqrt();
    [C64::new(-0.5, -w), C64::new(-0.5, w), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)]
}

/// Largest relative distance after greedily pairing each reference value
/// with its nearest unused computed eigenvalue.
fn spectrum_mismatch(got: &[C64], want: &[C64]) -> f64 {
    let mut used = vec![false; got.len()];
    let mut worst: f64 = 0.0;
    for w in want {
        let (i, d) = got
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, g)| (i, (g - w).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if i == usize::MAX {
            return f64::INFINITY;
        }
        used[i] = true;
        worst = worst.max(d / w.norm().max(1.0));
    }
    worst
}

fn fluid_eigenvalues(_opts: &ValidationOptions) -> Result<Verdict> {
    let basis = Arc::new(BasisSpec::build(2)?);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for s in log_grid(1e-3, 10.0, 50) {
        let got = ModeOperator::assemble(ModeKind::B1, s, basis.clone())?.spectrum()?;
        let want = fluid_reference(s);
        if got.len() != want.len() {
            return Err(VpfpError::ShapeMismatch { expected: want.len(), got: got.len() });
        }
        worst = worst.max(spectrum_mismatch(&got, &want));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict {
        passed: worst <= 1e-10 && secs < 1.0,
        summary: format!("max relative eigenvalue error {worst:.2e} (tol 1e-10), {secs:.3} s (limit 1 s)"),
        metrics: json!({ "max_error": worst, "seconds": secs, "nodes": 50 }),
    })
}

static GAP_CACHE: Mutex<Vec<(bool, GapReport)>> = Mutex::new(Vec::new());

/// Spectral-gap sweep up to `|ξ| = 60` (cached per `quick`).
pub fn gap_report(quick: bool) -> Result<GapReport> {
    if let Some((_, r)) = GAP_CACHE.lock().unwrap().iter().find(|(q, _)| *q == quick) {
        return Ok(r.clone());
    }
    let n = if quick { 8 } else { 16 };
    let basis = Arc::new(BasisSpec::build(n)?);
    let grid = log_grid(1e-2, 60.0, if quick { 30 } else { 80 });
    let report = spectral_gap_sweep(basis, &grid, (0.0, 10.0), -0.45)?;
    GAP_CACHE.lock().unwrap().push((quick, report.clone()));
    Ok(report)
}

fn spectral_gap(opts: &ValidationOptions) -> Result<Verdict> {
    let start = Instant::now();
    let r = gap_report(opts.quick)?;
    let secs = start.elapsed().as_secs_f64();
    let low_ok = r.r0_hat.is_finite()
        && r.xi.iter().zip(&r.max_re).filter(|(s, _)| **s <= r.r0_hat).all(|(_, m)| *m <= -0.45);
    let passed = low_ok && r.beta0_hat > 0.0 && secs < 60.0;
    Ok(Verdict {
        passed,
        summary: format!(
            "N={} r0_hat={:.3} beta0_hat={:.4} eta0_hat={:.4}, {:.1} s (limit 60 s)",
            r.max_degree, r.r0_hat, r.beta0_hat, r.eta0_hat, secs
        ),
        metrics: serde_json::to_value(&r)?,
    })
}

fn contraction(opts: &ValidationOptions) -> Result<Verdict> {
    let n = if opts.quick { 6 } else { 8 };
    let basis = Arc::new(BasisSpec::build(n)?);
    let dim = basis.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_f = if opts.quick { 20 } else { 100 };
    let fs: Vec<CVec> = (0..n_f)
        .map(|_| CVec::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let pairs: Vec<(f64, f64)> = log_grid(0.05, 20.0, 5)
        .into_iter()
        .flat_map(|s| [0.1, 0.5, 2.0, 8.0].into_iter().map(move |t| (s, t)))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(s, t)| -> Result<f64> {
            let op = ModeOperator::assemble(ModeKind::B, s, basis.clone())?;
            let steps: Vec<_> = [0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|c| op.semigroup(c * t))
                .collect::<Result<Vec<_>>>()?;
            let mut worst: f64 = 0.0;
            for f in &fs {
                let n0 = xi_norm(f, s);
                let mut prev = n0;
                for e in &steps {
                    let cur = xi_norm(&e.apply(f)?, s);
                    worst = worst.max((cur - prev) / n0);
                    prev = cur;
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Verdict {
        passed: worst <= 1e-8,
        summary: format!(
            "{} data x {} (xi,t) pairs, max relative norm increase {:.2e} (tol 1e-8)",
            n_f,
            pairs.len(),
            worst.max(0.0)
        ),
        metrics: json!({ "max_violation": worst, "data": n_f, "pairs": pairs.len(), "max_degree": n }),
    })
}

fn kernel_identity(opts: &ValidationOptions) -> Result<Verdict> {
    let n = if opts.quick { 6 } else { 12 };
    let basis = BasisSpec::build(n)?;
    let pad = 40;
    let cases: Vec<(f64, f64)> = [0.1, 0.5, 2.0]
        .iter()
        .flat_map(|&t| [0.0, 1.0, 5.0].into_iter().map(move |s| (t, s)))
        .collect();
    let errors = cases
        .par_iter()
        .map(|&(t, s)| -> Result<f64> {
            let k = hermite_matrix_of_g1_hat(t, s, &basis, 120)?;
            let mut worst: f64 = 0.0;
            // e^{tA} is block diagonal over e_1-chains; each chain is
            // exponentiated on a padded length so truncation is invisible.
            for chain in basis.e1_chains() {
                let len = chain.len();
                let e = expm(&(chain_operator(ModeKind::A, s, len + pad, chain.transverse_degree()) * C64::new(t, 0.0)));
                for (i, &gi) in chain.members.iter().enumerate() {
                    for (j, &gj) in chain.members.iter().enumerate() {
                        worst = worst.max((k[(gi, gj)] - e[(i, j)]).norm());
                    }
                }
            }
            // Entries coupling different chains vanish on both sides.
            let chains = basis.e1_chains();
            let mut owner = vec![0usize; basis.dimension()];
            for (c, ch) in chains.iter().enumerate() {
                for &g in &ch.members {
                    owner[g] = c;
                }
            }
            for i in 0..basis.dimension() {
                for j in 0..basis.dimension() {
                    if owner[i] != owner[j] {
                        worst = worst.max(k[(i, j)].norm());
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    Ok(Verdict {
        passed: worst <= 1e-6,
        summary: format!("N={n}, max entrywise difference {worst:.2e} over 9 (t,|xi|) cases (tol 1e-6)"),
        metrics: json!({ "max_error": worst, "per_case": cases.iter().zip(&errors).map(|((t, s), e)| json!({"t": t, "xi": s, "error": e})).collect::<Vec<_>>() }),
    })
}

fn chapman_kolmogorov(opts: &ValidationOptions) -> Result<Verdict> {
    let xi = [0.8, 0.0, -0.4];
    let (v, u) = ([0.3, -0.6, 0.1], [-0.2, 0.5, 0.9]);
    let rule = composite_gauss_legendre(&lin_grid(-10.0, 10.0, if opts.quick { 9 } else { 11 }), 10);
    let mut ck = Vec::new();
    for &(t, s) in &[(0.5, 0.5), (0.2, 1.0), (1.0, 1.0)] {
        let acc = rule
            .nodes
            .par_iter()
            .zip(&rule.weights)
            .map(|(w0, q0)| -> Result<C64> {
                let mut acc = C64::new(0.0, 0.0);
                for (w1, q1) in rule.nodes.iter().zip(&rule.weights) {
                    for (w2, q2) in rule.nodes.iter().zip(&rule.weights) {
                        let w = [*w0, *w1, *w2];
                        acc += eval_g1_hat(t, xi, v, w)? * eval_g1_hat(s, xi, w, u)? * (q0 * q1 * q2);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<C64>>>()?
            .into_iter()
            .sum::<C64>();
        let direct = eval_g1_hat(t + s, xi, v, u)?;
        ck.push(((t, s), (acc - direct).norm() / direct.norm()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5);
    let mut sym: f64 = 0.0;
    for _ in 0..50 {
        let mut r3 = |a: f64| [rng.gen_range(-a..a), rng.gen_range(-a..a), rng.gen_range(-a..a)];
        let (xi, v, u) = (r3(3.0), r3(2.5), r3(2.5));
        let t = rng.gen_range(0.05..4.0);
        let a = eval_g1_hat(t, xi, v, u)?;
        let b = eval_g1_hat(t, xi, u, v)?;
        if a.norm() > 0.0 {
            sym = sym.max((a - b).norm() / a.norm());
        }
    }
    let ck_worst = ck.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(Verdict {
        passed: ck_worst <= 1e-5 && sym <= 1e-12,
        summary: format!("composition error {ck_worst:.2e} (tol 1e-5), v<->u asymmetry {sym:.2e} (tol 1e-12)"),
        metrics: json!({
            "composition": ck.iter().map(|((t, s), e)| json!({"t": t, "s": s, "relative_error": e})).collect::<Vec<_>>(),
            "symmetry": sym,
        }),
    })
}

fn dyson_resolution() -> DysonResolution {
    DysonResolution { max_v_points: 40000, ..Default::default() }
}

fn regularization_scaling(opts: &ValidationOptions) -> Result<Verdict> {
    let res = dyson_resolution();
    let small: Vec<f64> = if opts.quick { vec![3e-3, 3e-2] } else { vec![1e-3, 3e-3, 1e-2, 3e-2] };
    let large: Vec<f64> = if opts.quick { vec![2.0, 4.0, 8.0] } else { vec![2.0, 3.0, 4.0, 6.0, 8.0] };
    let mut passed = true;
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    for k in [1, 2] {
        let probe = semigroup_scaling_probe(k, &small, 1.0, res)?;
        let target = 1.5 * k as f64;
        let ok = within(probe.exponent, target, 0.3);
        // Analytic comparison: sup_s s^k e^{-q s²} e^{-2t} = e^{-2t} (k/(2eq))^{k/2}.
        let analytic: Vec<f64> = small
            .iter()
            .map(|&t| {
                let q = 2.0 * crate::kernel::variance_value(t) / (-(-2.0 * t).exp_m1());
                (-2.0 * t).exp() * (k as f64 / (2.0 * std::f64::consts::E * q)).powf(0.5 * k as f64)
            })
            .collect();
        let big = semigroup_scaling_probe(k, &large, 1.0, res)?;
        let rate = fit_rate(&large, &big.sup_norm, (large[0], *large.last().unwrap()))?.slope;
        let rate_ok = rate >= 1.9;
        passed &= ok && rate_ok;
        parts.push(format!("k={k}: t-exponent {:.3} (target {target}), large-t rate {rate:.3} (>= 1.9)", probe.exponent));
        metrics.push(json!({ "k": k, "small_t": probe, "analytic": analytic, "large_t": big, "rate": rate }));
    }
    Ok(Verdict { passed, summary: parts.join("; "), metrics: json!(metrics) })
}

fn low_frequency_ladder(opts: &ValidationOptions) -> Result<Verdict> {
    let n = if opts.quick { 6 } else { 8 };
    let basis = Arc::new(BasisSpec::build(n)?);
    let s_grid = log_grid(1e-2, 1e-1, if opts.quick { 4 } else { 8 });
    let t = 1.0;
    let k_max = 3;
    let sols = s_grid
        .par_iter()
        .map(|&s| solve_low(basis.clone(), k_max, s, &[t], 1.0))
        .collect::<Result<Vec<_>>>()?;
    let window = (0.0, f64::INFINITY);
    let mut passed = true;
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    for k in 0..=k_max {
        let i_norm: Vec<f64> = sols.iter().map(|x| x.iterates[k].i_k[0].norm_l2_to_xi()).collect();
        let j_norm: Vec<f64> = sols.iter().map(|x| x.iterates[k].j_k[0].norm_l2()).collect();
        let p_i = fit_power(&s_grid, &i_norm, window)?.slope;
        let p_j = fit_power(&s_grid, &j_norm, window)?.slope;
        let (ti, tj) = (2.0 * k as f64 - 1.0, 2.0 * k as f64);
        let ok = within(p_i, ti, 0.2) && within(p_j, tj, 0.2);
        passed &= ok;
        parts.push(format!("I{k} {p_i:.3}/{ti} J{k} {p_j:.3}/{tj}"));
        metrics.push(json!({ "k": k, "i_exponent": p_i, "j_exponent": p_j, "i_norms": i_norm, "j_norms": j_norm }));
    }
    let v_norm: Vec<f64> = sols.iter().map(|x| x.remainder.v_k[0].norm_l2_to_xi()).collect();
    let p_v = fit_power(&s_grid, &v_norm, window)?.slope;
    let tv = 2.0 * k_max as f64 + 1.0 - 0.2;
    passed &= p_v >= tv;
    parts.push(format!("V{k_max} {p_v:.3} (>= {tv:.1})"));
    Ok(Verdict {
        passed,
        summary: parts.join(", "),
        metrics: json!({ "t": t, "xi": s_grid, "levels": metrics, "remainder_exponent": p_v, "remainder_norms": v_norm }),
    })
}

fn high_frequency_ladder(opts: &ValidationOptions) -> Result<Verdict> {
    let res = dyson_resolution();
    let t_grid: Vec<f64> = if opts.quick { vec![3e-3, 3e-2] } else { vec![1e-3, 3e-3, 1e-2, 3e-2] };
    let combos: Vec<(usize, i32)> = (0..=3usize).flat_map(|j| (0..=2).map(move |k| (j, k))).collect();
    let mut passed = true;
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    for &(j, k) in &combos {
        let sups = t_grid
            .par_iter()
            .map(|&t| {
                sup_over_modes(t, k, 1.0, |s| {
                    let op = DysonOperator::build(s, t, &DysonWeights::iterate(j, t), res)?;
                    Ok(s.powi(k) * op.norm(None, 40))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let vals: Vec<f64> = sups.iter().map(|x| x.0).collect();
        let p = fit_power(&t_grid, &vals, (0.0, f64::INFINITY))?.slope;
        let target = j as f64 - 1.5 * k as f64;
        let ok = within(p, target, 0.3);
        passed &= ok;
        parts.push(format!("({j},{k}) {p:.2}/{target}"));
        metrics.push(json!({ "j": j, "k": k, "t": t_grid, "sup": vals, "argmax": sups.iter().map(|x| x.1).collect::<Vec<_>>(), "exponent": p, "target": target }));
    }
    // Remainder after eight Dyson terms: decay in |ξ| at t = 1, fitted on
    // values above the round-off floor of the Nyström grid.
    let s_grid = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0];
    let r_vals = s_grid
        .par_iter()
        .map(|&s| -> Result<f64> {
            let op = DysonOperator::build(s, 1.0, &DysonWeights::remainder(7, 1.0), res)?;
            Ok(op.norm(Some(s), 40))
        })
        .collect::<Result<Vec<f64>>>()?;
    let floor = 1e-13 * r_vals.iter().cloned().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = s_grid.iter().zip(&r_vals).filter(|(_, v)| **v > floor).map(|(a, b)| (*a, *b)).unzip();
    let p_r = fit_power(&xs, &ys, (0.0, f64::INFINITY))?.slope;
    passed &= p_r <= -4.0 + 0.3;
    parts.push(format!("R7 |xi|-exponent {p_r:.2} (<= -3.7)"));
    Ok(Verdict {
        passed,
        summary: parts.join(", "),
        metrics: json!({ "iterates": metrics, "remainder": { "xi": xs, "norms": ys, "exponent": p_r } }),
    })
}

/// Criterion-9 gain of `P_1` data over density data for one component.
///
/// The density data component decays super-algebraically in `G_L` (its
/// fitted exponent sits far above the algebraic target), so a difference of
/// two fitted exponents is meaningless there.  When the density-data
/// exponent already exceeds `P_1` target + gain, the `P_1` exponent is
/// required to exceed that level as well.
fn gain_ok(base: f64, p1: f64, p1_target: f64, gain: f64) -> (bool, &'static str) {
    if base >= p1_target + gain {
        (p1 >= p1_target + gain, "resolution-limited")
    } else {
        (p1 - base >= gain, "difference")
    }
}

fn spatial_exponents(opts: &ValidationOptions) -> Result<Verdict> {
    let mut cfg = AssemblyConfig::default();
    if opts.quick {
        cfg.panel_width = 0.5;
        cfg.nodes_per_panel = 6;
    }
    let start = Instant::now();
    let x: Vec<f64> = (0..=180).map(|i| 1.0 + i as f64 * 0.5).collect();
    let nodes = cfg.mode_grid()?.len();
    let fits = exponent_report(2.0, GreenPart::Low, &x, (5.0, 50.0), &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let get = |o: Observable| fits.iter().find(|(a, _)| *a == o).map(|(_, f)| f.exponent_x).unwrap_or(f64::NAN);
    let mut passed = nodes <= 400 && secs < 600.0;
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    for (o, lo) in [(Observable::Density, 3.7), (Observable::Momentum, 1.7), (Observable::Stress, 2.7)] {
        let base = get(o);
        let p1 = get(o.p1_counterpart());
        let (g_ok, rule) = gain_ok(base, p1, lo + 1.3, 0.7);
        let ok = base >= lo && g_ok;
        passed &= ok;
        parts.push(format!("{} {base:.2} (>= {lo}) P1 {p1:.2} gain {:.2}", o.name(), p1 - base));
        metrics.push(json!({ "observable": o.name(), "exponent": base, "p1_exponent": p1, "gain": p1 - base, "gain_rule": rule }));
    }
    parts.push(format!("{nodes} modes, {secs:.0} s"));
    Ok(Verdict {
        passed,
        summary: parts.join(", "),
        metrics: json!({ "t": 2.0, "window": [5.0, 50.0], "mode_nodes": nodes, "seconds": secs, "components": metrics, "fits": fits.iter().map(|(o, f)| json!({"observable": o.name(), "fit": f})).collect::<Vec<_>>() }),
    })
}

fn time_rates(opts: &ValidationOptions) -> Result<Verdict> {
    let mut cfg = AssemblyConfig::default();
    if opts.quick {
        cfg.panel_width = 0.5;
        cfg.nodes_per_panel = 6;
    }
    let eta0 = gap_report(opts.quick)?.eta0_hat;
    let t_grid = [2.0, 3.0, 4.0, 6.0, 8.0, 10.0];
    let x: Vec<f64> = (0..=80).map(|i| i as f64 * 0.5).collect();
    let (sups, fit) = profile_rate(Observable::Density, GreenPart::Low, &t_grid, &x, &cfg)?;
    let low_rate = fit.rate_t;
    let n = if opts.quick { 6 } else { 12 };
    let basis = Arc::new(BasisSpec::build(n)?);
    let bounds = t_grid
        .iter()
        .map(|&t| remainder_sup_bound(basis.clone(), 3, t, &cfg))
        .collect::<Result<Vec<f64>>>()?;
    let high_rate = fit_rate(&t_grid, &bounds, (2.0, 10.0))?.slope;
    let passed = low_rate >= 0.2 && eta0 > 0.0 && high_rate >= eta0;
    Ok(Verdict {
        passed,
        summary: format!("P0 G_L rate {low_rate:.3} (>= 0.20), G_H-W_3 rate {high_rate:.3} (>= eta0_hat {eta0:.3})"),
        metrics: json!({ "t": t_grid, "p0_low_sup": sups, "p0_low_rate": low_rate, "remainder_bound": bounds, "remainder_rate": high_rate, "eta0_hat": eta0, "max_degree": n }),
    })
}

fn nonlinear_config(opts: &ValidationOptions) -> NonlinearConfig {
    let mut cfg = NonlinearConfig::default();
    if opts.quick {
        cfg.max_degree = 4;
        cfg.t_end = 4.0;
    }
    cfg
}

fn nonlinear_run(opts: &ValidationOptions) -> Result<Verdict> {
    let start = Instant::now();
    let eta0 = gap_report(opts.quick)?.eta0_hat;
    let charged_cfg = nonlinear_config(opts);
    let mut solver = RadialSolver::new(charged_cfg.clone())?;
    let u0 = solver.initial_state();
    let traj = solver.evolve(&u0, charged_cfg.t_end, charged_cfg.dt)?;
    let charged = decay_report(&solver, &traj)?;
    // Neutral data decay one power faster (closed-form transforms exist
    // for integer powers only); the gain is measured against charged data.
    let neutral_cfg = NonlinearConfig { neutral: true, decay_power: 3, ..charged_cfg.clone() };
    let mut nsolver = RadialSolver::new(neutral_cfg.clone())?;
    let n0 = nsolver.initial_state();
    let ntraj = nsolver.evolve(&n0, neutral_cfg.t_end, neutral_cfg.dt)?;
    let neutral = decay_report(&nsolver, &ntraj)?;
    let secs = start.elapsed().as_secs_f64();

    let drift = charged.mass_drift_rate.max(neutral.mass_drift_rate);
    let mut passed = drift <= 1e-10 && secs < 900.0;
    let mut parts = vec![format!("mass drift {drift:.1e}/t")];
    let rate_ok = charged.weighted_rate >= eta0 - 0.05;
    passed &= rate_ok;
    parts.push(format!("weighted rate {:.3} (>= {:.3})", charged.weighted_rate, eta0 - 0.05));
    for e in charged.exponents.iter().filter(|e| e.name != "total") {
        passed &= within(e.measured, e.target, 0.3);
        parts.push(format!("{} {:.2}/{}", e.name, e.measured, e.target));
    }
    let find = |r: &crate::nonlinear::DecayReport, n: &str| r.exponents.iter().find(|e| e.name == n).map(|e| e.measured).unwrap_or(f64::NAN);
    let gain = find(&neutral, "P0") - find(&charged, "P0");
    passed &= gain >= 0.4;
    parts.push(format!("neutral P0 gain {gain:.2} (>= 0.4)"));
    passed &= within(charged.grad_slope, -0.5, 0.1);
    parts.push(format!("grad_v slope {:.3} (-0.5 +- 0.1)", charged.grad_slope));
    parts.push(format!("{secs:.0} s"));
    Ok(Verdict {
        passed,
        summary: parts.join(", "),
        metrics: json!({ "charged": charged, "neutral": neutral, "eta0_hat": eta0, "neutral_gain": gain, "seconds": secs, "config": charged_cfg }),
    })
}

fn picard_contraction(opts: &ValidationOptions) -> Result<Verdict> {
    let deltas = [1e-4, 1e-3, 1e-2];
    let mut ratios = Vec::new();
    let mut traces = Vec::new();
    for &d in &deltas {
        let cfg = NonlinearConfig { delta0: d, ..nonlinear_config(opts) };
        let mut solver = RadialSolver::new(cfg)?;
        let u0 = solver.initial_state();
        let trace = solver.picard_solve(&u0, 8)?;
        ratios.push(trace.contraction_ratio);
        traces.push(json!({ "delta0": d, "ratios": trace.ratios, "contraction_ratio": trace.contraction_ratio, "converged": trace.converged }));
    }
    let slope = fit_power(&deltas, &ratios, (0.0, f64::INFINITY))?.slope;
    let passed = within(slope, 1.0, 0.2) && ratios[1] < 1.0;
    Ok(Verdict {
        passed,
        summary: format!(
            "log-log slope {slope:.3} (1 +- 0.2), ratios {:.2e}/{:.2e}/{:.2e}",
            ratios[0], ratios[1], ratios[2]
        ),
        metrics: json!({ "delta0": deltas, "contraction_ratio": ratios, "slope": slope, "traces": traces }),
    })
}
