//! Subcommand implementations.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde_json::json;
use vpfp_core::assembly::{assemble_modes, fit_profile, reconstruct, GreenPart, Observable};
use vpfp_core::fluid::dispersion_csv;
use vpfp_core::highfreq::solve_high;
use vpfp_core::kernel::{eval_g0, eval_g1};
use vpfp_core::lowfreq::solve_low;
use vpfp_core::mode_ops::{spectral_gap_sweep, ModeKind, ModeOperator};
use vpfp_core::nonlinear::{decay_report, RadialSolver};
use vpfp_core::quadrature::log_grid;
use vpfp_core::validation::{run_criterion, Suite, ValidationOptions};
use vpfp_core::BasisSpec;

use crate::config::{FileConfig, LadderConfig};
use crate::output::{sci, RunOutput};
use crate::{AssembleArgs, Cli, Command, Failure, KernelProbeArgs, LadderArgs, SimulateArgs, SpectrumArgs, ValidateArgs};

const DEFAULT_SEED: u64 = 20240917;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let dir = cli.output_dir.clone().or(file.output_dir.clone()).unwrap_or_else(|| "vpfp-out".into());
    let mut out = RunOutput::create(&dir)?;
    match &cli.command {
        Command::Spectrum(a) => spectrum(&file, a, cli.quick, seed, out),
        Command::KernelProbe(a) => kernel_probe(&file, a, seed, out),
        Command::Lowfreq(a) => ladder(&file, a, true, seed, out),
        Command::Highfreq(a) => ladder(&file, a, false, seed, out),
        Command::Assemble(a) => assemble(&file, a, cli.quick, seed, out),
        Command::Simulate(a) => simulate(&file, a, cli.quick, seed, out),
        Command::Validate(a) => {
            let r = validate(a, cli.quick, seed, &mut out);
            out.finish("validate", &json!({ "suite": a.suite, "criteria": a.criteria }), seed, None, cli.quick)?;
            r
        }
    }
}

fn positive(name: &str, x: f64) -> anyhow::Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        bail!("{name} must be positive and finite, got {x}");
    }
    Ok(())
}

fn spectrum(file: &FileConfig, a: &SpectrumArgs, quick: bool, seed: u64, mut out: RunOutput) -> Result<(), Failure> {
    let mut cfg = file.spectrum.clone();
    cfg.basis_degree = a.basis_degree.unwrap_or(cfg.basis_degree);
    cfg.xi_min = a.xi_min.unwrap_or(cfg.xi_min);
    cfg.xi_max = a.xi_max.unwrap_or(cfg.xi_max);
    cfg.points = a.points.unwrap_or(cfg.points);
    cfg.threshold = a.threshold.unwrap_or(cfg.threshold);
    if quick {
        cfg.basis_degree = cfg.basis_degree.min(8);
        cfg.points = cfg.points.min(30);
    }
    positive("xi-min", cfg.xi_min)?;
    positive("xi-max", cfg.xi_max)?;
    if cfg.xi_max <= cfg.xi_min || cfg.points < 2 {
        return Err(anyhow!("need xi-max > xi-min and at least 2 points").into());
    }
    let basis = Arc::new(BasisSpec::build(cfg.basis_degree).map_err(anyhow::Error::from)?);
    let grid = log_grid(cfg.xi_min, cfg.xi_max, cfg.points);
    let spectra = grid
        .par_iter()
        .map(|&s| ModeOperator::assemble(ModeKind::B, s, basis.clone())?.spectrum())
        .collect::<Result<Vec<_>, _>>()
        .map_err(anyhow::Error::from)?;
    let mut csv = String::from("xi,index,re,im\n");
    for (s, spec) in grid.iter().zip(&spectra) {
        for (k, l) in spec.iter().enumerate() {
            writeln!(csv, "{},{k},{},{}", sci(*s), sci(l.re), sci(l.im)).unwrap();
        }
    }
    out.write_text("eigenvalues.csv", &csv)?;
    let report = spectral_gap_sweep(basis, &grid, (0.0, cfg.r0_search_max), cfg.threshold).map_err(anyhow::Error::from)?;
    let mut gap = String::from("xi,max_re\n");
    for (s, m) in report.xi.iter().zip(&report.max_re) {
        writeln!(gap, "{},{}", sci(*s), sci(*m)).unwrap();
    }
    out.write_text("max_re.csv", &gap)?;
    out.write_text("fluid_dispersion.csv", &dispersion_csv(&grid))?;
    out.write_json("gap.json", &report)?;
    println!(
        "N={} r0_hat={:.6e} beta0_hat={:.6e} beta1_hat={:.6e} eta0_hat={:.6e}",
        report.max_degree, report.r0_hat, report.beta0_hat, report.beta1_hat, report.eta0_hat
    );
    let holds = report.r0_hat.is_finite() && report.beta0_hat > 0.0;
    out.finish("spectrum", &cfg, seed, Some(cfg.basis_degree), quick)?;
    if holds {
        Ok(())
    } else {
        Err(Failure::Criterion(format!("spectral gap criteria fail: r0_hat={}, beta0_hat={}", report.r0_hat, report.beta0_hat)))
    }
}

fn kernel_probe(file: &FileConfig, a: &KernelProbeArgs, seed: u64, mut out: RunOutput) -> Result<(), Failure> {
    let mut cfg = file.kernel_probe.clone();
    if let Some(t) = &a.times {
        cfg.times = t.clone();
    }
    if let Some(k) = &a.kernel {
        cfg.kernel = k.clone();
    }
    let damped = match cfg.kernel.as_str() {
        "g0" => false,
        "g1" => true,
        other => return Err(anyhow!("unknown kernel {other:?} (expected g0 or g1)").into()),
    };
    for &t in &cfg.times {
        positive("t", t)?;
    }
    let mut csv = String::from("t,separation,v,u,value\n");
    for &t in &cfg.times {
        for &d in &cfg.separations {
            for &sv in &cfg.speeds {
                for &su in &cfg.speeds {
                    let (x, v, y, u) = ([d, 0.0, 0.0], [sv, 0.0, 0.0], [0.0; 3], [0.0, su, 0.0]);
                    let value = if damped { eval_g1(t, x, v, y, u).map(|k| k.value) } else { eval_g0(t, x, v, y, u) }.map_err(anyhow::Error::from)?;
                    writeln!(csv, "{},{},{},{},{}", sci(t), sci(d), sci(sv), sci(su), sci(value)).unwrap();
                }
            }
        }
    }
    out.write_text("kernel_probe.csv", &csv)?;
    let norm = vpfp_core::kernel::normalization();
    println!("kernel normalization: g0 mass {:.16e}, Fourier prefactor ratio {:.16e}", norm.g0_mass, norm.fourier_prefactor_ratio);
    out.finish("kernel-probe", &cfg, seed, None, false)?;
    Ok(())
}

fn ladder(file: &FileConfig, a: &LadderArgs, low: bool, seed: u64, mut out: RunOutput) -> Result<(), Failure> {
    let mut cfg: LadderConfig = if low { file.lowfreq.clone() } else { file.highfreq.clone() };
    if !low && cfg == LadderConfig::low_default() {
        cfg = LadderConfig::high_default();
    }
    cfg.basis_degree = a.basis_degree.unwrap_or(cfg.basis_degree);
    cfg.k_max = a.k_max.unwrap_or(cfg.k_max);
    if let Some(x) = &a.xi {
        cfg.xi = x.clone();
    }
    if let Some(t) = &a.times {
        cfg.times = t.clone();
    }
    let basis = Arc::new(BasisSpec::build(cfg.basis_degree).map_err(anyhow::Error::from)?);
    let mut csv = String::from("xi,t,level,kind,norm\n");
    let mut defects = Vec::new();
    for &s in &cfg.xi {
        if low {
            let sol = solve_low(basis.clone(), cfg.k_max, s, &cfg.times, cfg.r_hat).with_context(|| format!("|xi| = {s}"))?;
            for (ti, &t) in cfg.times.iter().enumerate() {
                for it in &sol.iterates {
                    writeln!(csv, "{},{},{},I_xi,{}", sci(s), sci(t), it.k, sci(it.i_k[ti].norm_l2_to_xi())).unwrap();
                    writeln!(csv, "{},{},{},J,{}", sci(s), sci(t), it.k, sci(it.j_k[ti].norm_l2())).unwrap();
                }
                writeln!(csv, "{},{},{},V_xi,{}", sci(s), sci(t), cfg.k_max, sci(sol.remainder.v_k[ti].norm_l2_to_xi())).unwrap();
            }
            defects.push(json!({ "xi": s, "sum_identity_defect": sol.sum_identity_defect() }));
        } else {
            let sol = solve_high(basis.clone(), cfg.k_max, s, &cfg.times, cfg.r_hat).with_context(|| format!("|xi| = {s}"))?;
            for (ti, &t) in cfg.times.iter().enumerate() {
                for it in &sol.iterates {
                    writeln!(csv, "{},{},{},I,{}", sci(s), sci(t), it.j, sci(it.i_j[ti].norm_l2())).unwrap();
                }
                writeln!(csv, "{},{},{},R,{}", sci(s), sci(t), cfg.k_max, sci(sol.remainder.r_k[ti].norm_l2())).unwrap();
            }
            defects.push(json!({ "xi": s, "sum_identity_defect": sol.sum_identity_defect() }));
        }
    }
    let name = if low { "lowfreq" } else { "highfreq" };
    out.write_text(&format!("{name}_norms.csv"), &csv)?;
    out.write_json(&format!("{name}_summary.json"), &json!({ "config": cfg, "sum_identity": defects }))?;
    let worst = defects.iter().filter_map(|d| d["sum_identity_defect"].as_f64()).fold(0.0, f64::max);
    println!("{name}: {} modes, worst sum-identity defect {worst:.3e}", cfg.xi.len());
    out.finish(name, &cfg, seed, Some(cfg.basis_degree), false)?;
    Ok(())
}

fn parse_part(s: &str) -> anyhow::Result<GreenPart> {
    Ok(match s {
        "low" => GreenPart::Low,
        "high" => GreenPart::High,
        "full" => GreenPart::Full,
        _ => match s.strip_prefix("remainder:") {
            Some(k) => GreenPart::HighRemainder(k.parse().with_context(|| format!("bad remainder order in {s:?}"))?),
            None => bail!("unknown part {s:?} (expected low, high, full or remainder:K)"),
        },
    })
}

fn assemble(file: &FileConfig, a: &AssembleArgs, quick: bool, seed: u64, mut out: RunOutput) -> Result<(), Failure> {
    let mut cfg = file.assemble.clone();
    cfg.t = a.t.unwrap_or(cfg.t);
    if let Some(p) = &a.part {
        cfg.part = p.clone();
    }
    cfg.x_max = a.x_max.unwrap_or(cfg.x_max);
    if quick {
        cfg.numerics.panel_width = cfg.numerics.panel_width.max(0.5);
        cfg.numerics.nodes_per_panel = cfg.numerics.nodes_per_panel.min(6);
    }
    positive("t", cfg.t)?;
    positive("x-max", cfg.x_max)?;
    let part = parse_part(&cfg.part)?;
    let grid = cfg.numerics.mode_grid().map_err(anyhow::Error::from)?;
    let modes = assemble_modes(part, cfg.t, &grid, &cfg.numerics).map_err(anyhow::Error::from)?;
    let x: Vec<f64> = (0..=cfg.x_points).map(|i| cfg.x_max * i as f64 / cfg.x_points as f64).collect();
    let mut header = String::from("x");
    let mut columns = Vec::new();
    let mut fits = Vec::new();
    for o in Observable::ALL {
        let p = reconstruct(o, part, cfg.t, &grid, &modes, &x).map_err(anyhow::Error::from)?;
        let peak = p.magnitudes().iter().cloned().fold(0.0, f64::max);
        let fit = fit_profile(&p, cfg.window, 1e-13 * peak);
        header.push_str(&format!(",{0}_re,{0}_im", o.name()));
        fits.push(json!({
            "observable": o.name(),
            "aliasing": p.aliasing,
            "fit": fit.as_ref().ok(),
            "fit_error": fit.as_ref().err().map(|e| e.to_string()),
        }));
        if let Ok(f) = &fit {
            println!("{:>5}: exponent {:.4} on [{}, {}] (residual {:.2e}, {} points)", o.name(), f.exponent_x, f.window.0, f.window.1, f.residual, f.points);
        }
        columns.push(p.values);
    }
    let mut csv = header + "\n";
    for (i, xi) in x.iter().enumerate() {
        csv.push_str(&sci(*xi));
        for c in &columns {
            write!(csv, ",{},{}", sci(c[i].re), sci(c[i].im)).unwrap();
        }
        csv.push('\n');
    }
    out.write_text("profiles.csv", &csv)?;
    out.write_json("fits.json", &json!({ "t": cfg.t, "part": cfg.part, "mode_nodes": grid.len(), "fits": fits }))?;
    out.finish("assemble", &cfg, seed, None, quick)?;
    Ok(())
}

fn simulate(file: &FileConfig, a: &SimulateArgs, quick: bool, seed: u64, mut out: RunOutput) -> Result<(), Failure> {
    let mut cfg = file.simulate.clone();
    let s = &mut cfg.solver;
    s.delta0 = a.delta0.unwrap_or(s.delta0);
    s.decay_power = a.decay_power.unwrap_or(s.decay_power);
    s.max_degree = a.max_degree.unwrap_or(s.max_degree);
    s.dt = a.dt.unwrap_or(s.dt);
    s.t_end = a.t_end.unwrap_or(s.t_end);
    s.neutral |= a.neutral;
    if a.linear_only {
        s.nonlinear = false;
    }
    if quick {
        s.max_degree = s.max_degree.min(4);
        s.t_end = s.t_end.min(4.0);
    }
    cfg.picard_iterations = a.picard_iterations.unwrap_or(cfg.picard_iterations);
    let mut solver = RadialSolver::new(cfg.solver.clone()).map_err(anyhow::Error::from)?;
    let u0 = solver.initial_state();
    let traj = solver.evolve(&u0, cfg.solver.t_end, cfg.solver.dt).map_err(anyhow::Error::from)?;
    traj.write(&solver, out.dir()).map_err(anyhow::Error::from)?;
    out.register("trajectory.bin");
    out.register("trajectory.json");

    let report = decay_report(&solver, &traj).map_err(anyhow::Error::from)?;
    out.write_json("decay_report.json", &report)?;
    let mut wn = String::from("t,weighted_sup\n");
    for (t, w) in &report.weighted_norms {
        writeln!(wn, "{},{}", sci(*t), sci(*w)).unwrap();
    }
    out.write_text("weighted_norms.csv", &wn)?;
    let (lo, hi) = cfg.solver.fit_window;
    let r: Vec<f64> = (0..=200).map(|i| hi * i as f64 / 200.0).collect();
    let obs = solver.observables(traj.at(cfg.solver.fit_time), &r);
    let mut prof = String::from("r,density,momentum,field,micro,total,grad_v\n");
    for i in 0..r.len() {
        writeln!(
            prof,
            "{},{},{},{},{},{},{}",
            sci(r[i]),
            sci(obs.density[i]),
            sci(obs.momentum[i]),
            sci(obs.field[i]),
            sci(obs.micro[i]),
            sci(obs.total[i]),
            sci(obs.grad_v[i])
        )
        .unwrap();
    }
    out.write_text("profiles_at_fit_time.csv", &prof)?;

    for e in &report.exponents {
        println!("{:>9}: n = {:.4} (target {}) on [{lo}, {hi}] at t = {}", e.name, e.measured, e.target, cfg.solver.fit_time);
    }
    println!("weighted rate {:.4}, grad_v slope {:.4}, mass drift {:.3e}/t", report.weighted_rate, report.grad_slope, report.mass_drift_rate);

    if a.linear_only {
        // Oracle: every mode must follow the Cartesian semigroup e^{tB(ρ)}.
        let last = traj.states.last().expect("trajectory has an initial state");
        let basis = solver.basis.cartesian.clone();
        let mut worst: f64 = 0.0;
        for (i, &rho) in solver.rho.nodes.iter().enumerate() {
            let e = ModeOperator::assemble(ModeKind::B, rho, basis.clone())
                .and_then(|op| op.semigroup(last.t))
                .map_err(anyhow::Error::from)?;
            let start = &solver.basis.embed * u0.modes.row(i).transpose();
            let want = e.apply(&start).map_err(anyhow::Error::from)?;
            let got = &solver.basis.embed * last.modes.row(i).transpose();
            if start.norm() > 0.0 {
                worst = worst.max((got - want).norm() / start.norm());
            }
        }
        println!("linear oracle: max relative mode deviation {worst:.3e}");
        out.write_json("linear_oracle.json", &json!({ "t": last.t, "max_relative_deviation": worst }))?;
    } else if cfg.picard_iterations > 0 {
        let trace = solver.picard_solve(&u0, cfg.picard_iterations).map_err(anyhow::Error::from)?;
        // The contraction factor scales like C δ_0: extrapolate to factor one.
        let ratio = trace.contraction_ratio;
        let largest = if ratio > 0.0 { cfg.solver.delta0 / ratio } else { f64::INFINITY };
        println!("Picard contraction ratio {ratio:.4e}; largest contracting delta0 estimate {largest:.4e}");
        out.write_json(
            "picard.json",
            &json!({
                "delta0": trace.delta0,
                "ratios": trace.ratios,
                "contraction_ratio": ratio,
                "converged": trace.converged,
                "distances": trace.iterates.iter().map(|i| i.distance).collect::<Vec<_>>(),
                "largest_contracting_delta0_estimate": largest,
            }),
        )?;
    }
    let degree = cfg.solver.max_degree;
    out.finish("simulate", &cfg, seed, Some(degree), quick)?;
    Ok(())
}

fn validate(a: &ValidateArgs, quick: bool, seed: u64, out: &mut RunOutput) -> Result<(), Failure> {
    let ids: Vec<u8> = match &a.criteria {
        Some(c) => {
            if let Some(bad) = c.iter().find(|&&i| !(1..=12).contains(&i)) {
                return Err(anyhow!("criterion {bad} does not exist (valid: 1-12)").into());
            }
            c.clone()
        }
        None => Suite::parse(&a.suite)
            .ok_or_else(|| anyhow!("unknown suite {:?} (expected all, spectrum, kernel, lowfreq, highfreq, assembly or nonlinear)", a.suite))?
            .criteria()
            .to_vec(),
    };
    let opts = ValidationOptions { quick, seed };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = run_criterion(id, &opts);
        println!("{}{}", if quick { "[smoke] " } else { "" }, o.line());
        outcomes.push(o);
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    out.write_json("validation.json", &json!({ "mode": if quick { "smoke" } else { "full" }, "outcomes": outcomes }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Criterion(format!("criteria {failed:?} failed")))
    }
}
