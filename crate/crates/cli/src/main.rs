//! Command-line front end: configuration ingestion, run orchestration,
//! trajectory/report persistence, and plot-data emission.
//!
//! Exit codes are a stable contract for CI:
//!   0  all requested verdicts pass
//!   1  usage or configuration error
//!   2  an assertion/verdict failed
//!   3  numerical hard failure (integration aborted)

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use hyswitch_core::analysis::{
    estimate_lyapunov_exponent, run_classical_ensemble, run_quantum_ensemble, switch_statistics,
    EnsembleConfig, SwitchSummary,
};
use hyswitch_core::certificates::{
    check_invariance, detect_qnd, diffusion_bound, estimate_distance_constants,
    exponent_bound_classical, exponent_bound_quantum, growth_bound, jump_bound,
    jump_log_correction, local_decay_margin, qnd_constants, verify_attractivity_classical,
    verify_attractivity_quantum, verify_local_lyapunov_classical, verify_local_lyapunov_quantum,
    CertificateReport, ExtensionOperator, PSI_FLOOR_DEFAULT,
};
use hyswitch_core::classical::linear1d_exact_exponent;
use hyswitch_core::config::{
    build_classical_system, build_quantum_system, parse_config, BoundConfig, RunConfig,
    SystemConfig,
};
use hyswitch_core::lyapunov::PowerTraceFunctional;
use hyswitch_core::operator::DensityMatrix;
use hyswitch_core::report::{
    emit_classical_plotdata, emit_quantum_plotdata, write_classical_trajectories,
    write_quantum_trajectories, ReportDocument,
};

#[derive(Parser)]
#[command(
    name = "hyswitch",
    version,
    about = "Hysteresis-switched jump-diffusion simulator and certificate engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config output.dir, else current dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the trajectory count.
    #[arg(long)]
    traj: Option<usize>,
    /// Override the step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the horizon.
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Reject unknown config keys (default on).
    #[arg(long, overrides_with = "no_strict")]
    strict: bool,
    /// Downgrade unknown config keys to warnings.
    #[arg(long)]
    no_strict: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated fields to emit.
    #[arg(long, default_value = "d0")]
    fields: String,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the analytic certificates and hypothesis checks.
    Check(CommonArgs),
    /// Simulate the switched ensemble and persist trajectories + summary.
    Simulate(CommonArgs),
    /// Estimate the sample Lyapunov exponent and compare to the bound.
    Exponent(CommonArgs),
    /// Emit tidy columnar data for plotting.
    Plotdata(PlotArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let code = match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Exponent(args) => cmd_exponent(&args),
        Command::Plotdata(args) => cmd_plotdata(&args),
    };
    match code {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let strict = !args.no_strict;
    let (mut cfg, warnings) = match parse_config(&text, strict) {
        Ok(ok) => ok,
        Err(errors) => {
            for e in &errors {
                eprintln!("config error: {e}");
            }
            return Err(format!("{} configuration problem(s)", errors.len()));
        }
    };
    for w in &warnings {
        eprintln!("config warning: {w}");
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(traj) = args.traj {
        cfg.run.n_traj = traj;
    }
    if let Some(dt) = args.dt {
        cfg.run.dt = dt;
    }
    if let Some(t) = args.t_final {
        cfg.run.t_final = t;
    }
    Ok(cfg)
}

fn out_dir(args: &CommonArgs, cfg: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_report(dir: &Path, report: &ReportDocument) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("report: {}", path.display());
    Ok(())
}

fn verdict_exit(report: &ReportDocument) -> ExitCode {
    for (name, pass) in &report.verdicts {
        println!("{}: {}", name, if *pass { "PASS" } else { "FAIL" });
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

/// Resolve the configured exponent bound for the system.
fn resolve_bound(cfg: &RunConfig) -> Result<Option<f64>, String> {
    let Some(exp) = &cfg.exponent else {
        return Ok(None);
    };
    let j = cfg.controller.j - 1;
    let bound = match (&exp.bound, &cfg.system) {
        (BoundConfig::Linear1dExact, SystemConfig::Classical { builtin }) => {
            let m = &builtin.modes[j];
            linear1d_exact_exponent(m.a, m.b, m.gamma, builtin.mark_bound)
                .map_err(|e| format!("{e}"))?
        }
        (BoundConfig::Classical { c2, c3, c4, c5 }, _) => {
            exponent_bound_classical(*c2, *c3, *c4, *c5).map_err(|e| format!("{e}"))?
        }
        (BoundConfig::Qnd, SystemConfig::Quantum { .. }) => {
            let sys = build_quantum_system(cfg).map_err(|e| format!("{e}"))?;
            let qnd = detect_qnd(&sys.subsystems[j], sys.ds)
                .ok_or("mode j is not QND-structured; cannot use the qnd bound")?;
            qnd_constants(&qnd).exponent_estimate
        }
        (BoundConfig::Quantum { delta }, SystemConfig::Quantum { .. }) => {
            let sys = build_quantum_system(cfg).map_err(|e| format!("{e}"))?;
            let spec = &sys.subsystems[j];
            let kr = cfg.controller.k_r.as_ref().unwrap().to_matrix().unwrap();
            let x = ExtensionOperator::new(kr, sys.ds).map_err(|e| format!("{e}"))?;
            let lbar = growth_bound(spec, &x).map_err(|e| format!("{e}"))?;
            let gamma = diffusion_bound(&x, &spec.ck).map_err(|e| format!("{e}"))?;
            let phi = jump_bound(&x, &spec.dk, *delta).map_err(|e| format!("{e}"))?;
            let psi = jump_log_correction(&x, &spec.dk, *delta, PSI_FLOOR_DEFAULT)
                .map_err(|e| format!("{e}"))?;
            exponent_bound_quantum(lbar, gamma, phi, psi.value, *delta)
                .map_err(|e| format!("{e}"))?
        }
        (bound, _) => {
            return Err(format!("bound {bound:?} does not apply to this system kind"));
        }
    };
    Ok(Some(bound))
}

fn cmd_check(args: &CommonArgs) -> Result<ExitCode, String> {
    let cfg = load_config(args)?;
    let mut report = ReportDocument::new(cfg.clone());
    let mut cert = CertificateReport::default();
    let seed = cfg.run.seed;
    let j = cfg.controller.j - 1;

    match &cfg.system {
        SystemConfig::Quantum { .. } => {
            let sys = build_quantum_system(&cfg).map_err(|e| format!("{e}"))?;
            let ds = sys.ds;
            for (k, spec) in sys.subsystems.iter().enumerate() {
                let inv = check_invariance(spec, ds).map_err(|e| format!("{e}"))?;
                for (name, value) in &inv.residuals {
                    cert.invariance_residuals
                        .insert(format!("mode_{}_{}", k + 1, name), *value);
                }
                if k == j {
                    cert.verdicts
                        .insert(format!("invariance_mode_{}", k + 1), inv.pass);
                }
            }
            let kr = cfg.controller.k_r.as_ref().unwrap().to_matrix().unwrap();
            let x = ExtensionOperator::new(kr, ds).map_err(|e| format!("{e}"))?;
            let delta = match &cfg.exponent {
                Some(e) => match e.bound {
                    BoundConfig::Quantum { delta } => delta,
                    _ => 0.5,
                },
                None => 0.5,
            };
            // Scalar certificates for the stabilizing mode; a K_R that is
            // not positive definite leaves them unreported.
            let spec_j = &sys.subsystems[j];
            // The scalar certificates only apply when their block
            // preconditions hold; anything else is reported, not fatal.
            let lbar = match growth_bound(spec_j, &x) {
                Ok(lbar) => {
                    cert.lbar.insert(format!("mode_{}", j + 1), lbar);
                    Some(lbar)
                }
                Err(e) => {
                    report.warnings.push(format!("growth bound unavailable: {e}"));
                    None
                }
            };
            match diffusion_bound(&x, &spec_j.ck) {
                Ok(g) => cert.gamma = Some(g),
                Err(e) => report.warnings.push(format!("diffusion bound unavailable: {e}")),
            }
            match jump_bound(&x, &spec_j.dk, delta) {
                Ok(phi) => cert.phi_delta = Some(phi),
                Err(e) => report.warnings.push(format!("jump bound unavailable: {e}")),
            }
            match local_decay_margin(spec_j, &x, delta) {
                Ok(e_delta) => cert.e_delta = Some(e_delta),
                Err(e) => report.warnings.push(format!("decay margin unavailable: {e}")),
            }
            match jump_log_correction(&x, &spec_j.dk, delta, PSI_FLOOR_DEFAULT) {
                Ok(psi) => {
                    cert.psi_delta_bound = Some(psi.value);
                    cert.psi_clamped = psi.clamped;
                }
                Err(e) => report.warnings.push(format!("psi bound unavailable: {e}")),
            }
            if let (Some(lbar), Some(gamma), Some(phi), Some(psi)) =
                (lbar, cert.gamma, cert.phi_delta, cert.psi_delta_bound)
            {
                cert.exponent_bound = Some(
                    exponent_bound_quantum(lbar, gamma, phi, psi, delta)
                        .map_err(|e| format!("{e}"))?,
                );
            }
            if let Some(qnd) = detect_qnd(spec_j, ds) {
                let k = qnd_constants(&qnd);
                cert.qnd_c_lower = Some(k.c_lower);
                cert.qnd_a_lower = Some(k.a_lower);
                cert.verdicts
                    .insert("qnd_gap_positive".into(), k.c_lower + k.a_lower > 0.0);
                if cert.exponent_bound.is_none() {
                    cert.exponent_bound = Some(k.exponent_estimate);
                }
            }
            let v = PowerTraceFunctional { x: x.full(), delta };
            let lyap = verify_local_lyapunov_quantum(spec_j, &v, ds, cfg.controller.l, 2000, seed)
                .map_err(|e| format!("{e}"))?;
            cert.invariance_residuals
                .insert("local_lyapunov_margin".into(), lyap.margin);
            cert.verdicts
                .insert(format!("local_lyapunov_mode_{}", j + 1), lyap.pass);
            // Attractivity is reported, not gated: the switching law stays
            // well-defined under generator-minimizing selection even when
            // the strict margin fails somewhere.
            let prepared = sys.prepare().map_err(|e| format!("{e}"))?;
            let attract =
                verify_attractivity_quantum(&prepared, 2000, seed).map_err(|e| format!("{e}"))?;
            cert.h2_delta_est = Some(attract.margin);
            if !attract.pass {
                report
                    .warnings
                    .push("attractivity margin nonpositive on sampled states".into());
            }
            let (c1, c2) = estimate_distance_constants(&x, spec_j.dim(), 2000, seed)
                .map_err(|e| format!("{e}"))?;
            cert.c1_est = Some(c1);
            cert.c2_est = Some(c2);
        }
        SystemConfig::Classical { .. } => {
            let sys = build_classical_system(&cfg).map_err(|e| format!("{e}"))?;
            let lyap = verify_local_lyapunov_classical(
                &sys.subsystems[j],
                sys.v.as_ref(),
                sys.dim(),
                cfg.controller.l,
                2000,
                seed,
            )
            .map_err(|e| format!("{e}"))?;
            cert.invariance_residuals
                .insert("local_lyapunov_margin".into(), lyap.margin);
            cert.verdicts
                .insert(format!("local_lyapunov_mode_{}", j + 1), lyap.pass);
            let attract = verify_attractivity_classical(&sys, 3.0 * cfg.controller.l, 2000, seed)
                .map_err(|e| format!("{e}"))?;
            cert.h2_delta_est = Some(attract.margin);
            if !attract.pass {
                report
                    .warnings
                    .push("attractivity margin nonpositive on sampled states".into());
            }
        }
    }
    match resolve_bound(&cfg) {
        Ok(Some(bound)) => cert.exponent_bound = Some(bound),
        Ok(None) => {}
        Err(e) => report.warnings.push(format!("exponent bound unavailable: {e}")),
    }
    report.verdicts = cert.verdicts.clone();
    report.certificate = Some(cert);
    let dir = out_dir(args, &cfg);
    write_report(&dir, &report)?;
    Ok(verdict_exit(&report))
}

enum Ensemble {
    Quantum(Vec<hyswitch_core::quantum::QuantumTrajectory>),
    Classical(Vec<hyswitch_core::classical::ClassicalTrajectory>),
}

fn run_ensemble(cfg: &RunConfig) -> Result<Ensemble, (String, u8)> {
    let ens_cfg = EnsembleConfig {
        n_traj: cfg.run.n_traj,
        t_final: cfg.run.t_final,
        dt: cfg.run.dt,
        base_seed: cfg.run.seed,
        burn_in: cfg.run.burn_in,
        stride: cfg.output.stride,
    };
    match &cfg.system {
        SystemConfig::Quantum { .. } => {
            let sys = build_quantum_system(cfg).map_err(|e| (format!("{e}"), 1))?;
            let prepared = sys.prepare().map_err(|e| (format!("{e}"), 1))?;
            let rho0 = cfg
                .run
                .rho0
                .as_ref()
                .unwrap()
                .to_matrix()
                .map_err(|e| (format!("{e}"), 1))?;
            let rho0 = DensityMatrix::new(rho0).map_err(|e| (format!("{e}"), 1))?;
            let trajs = run_quantum_ensemble(&prepared, &rho0, &ens_cfg)
                .map_err(|e| (format!("{e}"), 3))?;
            Ok(Ensemble::Quantum(trajs))
        }
        SystemConfig::Classical { .. } => {
            let sys = build_classical_system(cfg).map_err(|e| (format!("{e}"), 1))?;
            let x0 = cfg.run.x0.clone().unwrap();
            let trajs =
                run_classical_ensemble(&sys, &x0, &ens_cfg).map_err(|e| (format!("{e}"), 3))?;
            Ok(Ensemble::Classical(trajs))
        }
    }
}

fn cmd_simulate(args: &CommonArgs) -> Result<ExitCode, String> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, &cfg);
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let ensemble = match run_ensemble(&cfg) {
        Ok(e) => e,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(code));
        }
    };
    let mut report = ReportDocument::new(cfg.clone());
    let path = dir.join("trajectories.jsonl");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&path)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
    );
    let j = cfg.controller.j - 1;
    match &ensemble {
        Ensemble::Quantum(trajs) => {
            write_quantum_trajectories(&mut file, trajs).map_err(|e| format!("{e}"))?;
            let summaries: Vec<SwitchSummary> = trajs.iter().map(SwitchSummary::from).collect();
            report.switch_stats = Some(switch_statistics(&summaries, j, cfg.run.t_final));
            if trajs.iter().any(|t| t.coverage_violation) {
                report
                    .warnings
                    .push("coverage violation: min_k Tr(K F_k) >= 0 at some visited state".into());
            }
        }
        Ensemble::Classical(trajs) => {
            write_classical_trajectories(&mut file, trajs).map_err(|e| format!("{e}"))?;
            let summaries: Vec<SwitchSummary> = trajs.iter().map(SwitchSummary::from).collect();
            report.switch_stats = Some(switch_statistics(&summaries, j, cfg.run.t_final));
            if trajs.iter().any(|t| t.coverage_violation) {
                report
                    .warnings
                    .push("coverage violation: min_k A_k V >= 0 at some visited state".into());
            }
        }
    }
    drop(file);
    println!("trajectories: {}", path.display());
    write_report(&dir, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_exponent(args: &CommonArgs) -> Result<ExitCode, String> {
    let cfg = load_config(args)?;
    let bound = resolve_bound(&cfg)?;
    let ensemble = match run_ensemble(&cfg) {
        Ok(e) => e,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(code));
        }
    };
    let mut report = ReportDocument::new(cfg.clone());
    let mut est = match &ensemble {
        Ensemble::Quantum(trajs) => {
            let series: Vec<(&[f64], &[f64])> = trajs
                .iter()
                .map(|t| (t.times.as_slice(), t.d0.as_slice()))
                .collect();
            estimate_lyapunov_exponent(&series, cfg.run.t_final, cfg.run.burn_in)
                .map_err(|e| format!("{e}"))?
        }
        Ensemble::Classical(trajs) => {
            let series: Vec<(&[f64], &[f64])> = trajs
                .iter()
                .map(|t| (t.times.as_slice(), t.dist.as_slice()))
                .collect();
            estimate_lyapunov_exponent(&series, cfg.run.t_final, cfg.run.burn_in)
                .map_err(|e| format!("{e}"))?
        }
    };
    est.bound_used = bound;
    println!(
        "exponent: {:.6} +- {:.6} ({} paths, {} floored)",
        est.slope,
        est.ci_halfwidth,
        est.per_traj_slopes.len(),
        est.floored_paths
    );
    if est.ci_halfwidth > 0.5 {
        report.warnings.push(format!(
            "confidence interval is wide ({:.3}); horizon may be too short",
            est.ci_halfwidth
        ));
    }
    if let Some(b) = bound {
        let tol = cfg.exponent.as_ref().map(|e| e.tol).unwrap_or(0.15);
        println!("bound: {b:.6} (tol {tol})");
        report
            .verdicts
            .insert("exponent_below_bound".into(), est.slope <= b + tol);
    }
    report.exponent = Some(est);
    let dir = out_dir(args, &cfg);
    write_report(&dir, &report)?;
    Ok(verdict_exit(&report))
}

fn cmd_plotdata(args: &PlotArgs) -> Result<ExitCode, String> {
    let cfg = load_config(&args.common)?;
    let fields: Vec<&str> = args.fields.split(',').map(|s| s.trim()).collect();
    let ensemble = match run_ensemble(&cfg) {
        Ok(e) => e,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(code));
        }
    };
    let dir = out_dir(&args.common, &cfg);
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join("plotdata.tsv");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&path)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
    );
    match &ensemble {
        Ensemble::Quantum(trajs) => emit_quantum_plotdata(&mut file, trajs, &fields)?,
        Ensemble::Classical(trajs) => emit_classical_plotdata(&mut file, trajs, &fields)?,
    }
    println!("plotdata: {}", path.display());
    Ok(ExitCode::SUCCESS)
}
