//! The `bfd` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::collision::spectral_gap;
use crate::error::{Error, Result};
use crate::fluid::FluidCoefficients;
use crate::harness::fixed_point::demo_problems;
use crate::harness::io::{export_operator, fmt_f64, write_csv, write_json};
use crate::harness::study::{
    advance_row, convergence_study, decay_study, start_row, DecayData, RowCheckpoint, Setup,
};
use crate::harness::RunConfig;
use crate::kinetic::{KineticSolver, TrajectoryRecorder};
use crate::spectral::{fit_dispersion, trace_branches, Branch, TransportCoefficients};

#[derive(Parser, Debug)]
#[command(name = "bfd", about = "Fermi-Dirac Boltzmann operators and hydrodynamic-limit studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; defaults are used for absent fields or when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium moments, collision-operator diagnostics and the operator matrices.
    Constants(Common),
    /// Small eigenvalues of the linearized operator along a ray in frequency.
    Spectrum(Common),
    /// Transport coefficients from the integral formulas.
    Coeffs(Common),
    /// Kinetic and fluid evolution at the first ε of the ladder.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Continue from a `state.json` written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop at this time instead of `t_final`.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Error table against the lifted fluid solution over the ε ladder.
    Converge(Common),
    /// Single-mode remainder decay rates.
    Decay(Common),
    /// Contraction fixed-point solver on the built-in scalar and 10-dimensional problems.
    FixedpointDemo(Common),
}

/// Runs the tool on `argv` (program name first) and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let config = match &common.config {
        Some(p) => RunConfig::from_json(
            &fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read config {}: {e}", p.display())))?,
        )?,
        None => RunConfig::default(),
    };
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    Ok((config, out))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Constants(c) => constants(&c),
        Command::Spectrum(c) => spectrum(&c),
        Command::Coeffs(c) => coeffs(&c),
        Command::Evolve { common, resume, until } => evolve(&common, resume.as_deref(), until),
        Command::Converge(c) => converge(&c),
        Command::Decay(c) => decay(&c),
        Command::FixedpointDemo(c) => fixedpoint(&c),
    }
}

#[derive(Serialize)]
struct CollisionSummary {
    gap: crate::collision::GapReport,
    diagnostics: crate::collision::linearized::AssemblyDiagnostics,
    grid_hash: String,
}

fn constants(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    write_json(&out.join("moments.json"), &setup.moments)?;
    let summary = CollisionSummary {
        gap: spectral_gap(&setup.op, 1e-10)?,
        diagnostics: setup.op.diagnostics.clone(),
        grid_hash: setup.op.grid_hash(),
    };
    write_json(&out.join("collision.json"), &summary)?;
    export_operator(&setup.op, &out)
}

fn spectrum(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    let table = trace_branches(&setup.op, &setup.moments, cfg.spectrum.direction, &cfg.spectrum.radii)?;
    let mut rows = Vec::new();
    for p in &table.points {
        for (label, z) in [
            ("ns1", p.ns[0]),
            ("ns2", p.ns[1]),
            (Branch::Heat.label(), p.heat),
            (Branch::WavePlus.label(), p.wave_plus),
            (Branch::WaveMinus.label(), p.wave_minus),
        ] {
            rows.push(vec![fmt_f64(p.radius), label.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
        }
    }
    write_csv(&out.join("spectrum.csv"), &["radius", "branch", "re", "im"], &rows)?;
    write_json(&out.join("branches.json"), &table)?;
    if table.points.iter().filter(|p| p.radius > 0.0).count() >= 2 {
        write_json(&out.join("dispersion_fit.json"), &fit_dispersion(&table)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoefficientReport {
    transport: TransportCoefficients,
    fluid: FluidCoefficients,
}

fn coeffs(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    let transport = setup.transport()?;
    let fluid = setup.fluid_coefficients(&transport);
    write_json(&out.join("coefficients.json"), &CoefficientReport { transport, fluid })
}

fn evolve(c: &Common, resume: Option<&Path>, until: Option<f64>) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    let transport = setup.transport()?;
    let coefs = setup.fluid_coefficients(&transport);
    let eps = cfg.epsilons[0];
    let nl = if cfg.nonlinear { Some(setup.nonlinear_operator()?) } else { None };
    let mut solver = KineticSolver::new(&setup.space, &setup.op, nl.as_ref())?;
    let mut ck = match resume {
        Some(p) => RowCheckpoint::from_json(&fs::read_to_string(p)?)?,
        None => start_row(&setup, coefs, eps)?,
    };
    if ck.kinetic.epsilon != eps {
        return Err(Error::invalid(format!(
            "state was written for epsilon {} but the config starts at {eps}",
            ck.kinetic.epsilon
        )));
    }
    let t_end = until.unwrap_or(cfg.t_final);
    if t_end > cfg.t_final || t_end <= ck.kinetic.time {
        return Err(Error::invalid(format!(
            "end time {t_end} must lie in ({}, {}]",
            ck.kinetic.time, cfg.t_final
        )));
    }
    let grid = setup.grid();
    let mut rec = TrajectoryRecorder::new(grid, setup.op.projector(), &setup.space);
    let mut fluid_rows = Vec::new();
    let mut record = |ck: &RowCheckpoint, rec: &mut TrajectoryRecorder| -> Result<()> {
        rec.record(&ck.kinetic)?;
        for i in setup.space.active_modes() {
            let u = ck.fluid.u[i].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            fluid_rows.push(vec![
                fmt_f64(ck.fluid.time),
                i.to_string(),
                fmt_f64(u),
                fmt_f64(ck.fluid.theta[i].norm()),
            ]);
        }
        Ok(())
    };
    record(&ck, &mut rec)?;
    let n0 = (ck.kinetic.time / ck.dt).round() as usize;
    let n1 = if t_end == cfg.t_final {
        ck.steps
    } else {
        (t_end / ck.dt).round() as usize
    };
    for k in n0 + 1..=n1 {
        let t = if k == ck.steps { cfg.t_final } else { k as f64 * ck.dt };
        ck = advance_row(&setup, &mut solver, ck, t)?;
        record(&ck, &mut rec)?;
    }
    let traj: Vec<Vec<String>> = rec
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                r.mode.to_string(),
                fmt_f64(r.norm),
                fmt_f64(r.fluid_norm),
                fmt_f64(r.micro_gamma_norm),
            ]
        })
        .collect();
    write_csv(&out.join("trajectory.csv"), &["t", "mode", "norm", "fluid_norm", "micro_gamma_norm"], &traj)?;
    write_csv(&out.join("fluid.csv"), &["t", "mode", "u_abs", "theta_abs"], &fluid_rows)?;
    write_json(&out.join("coefficients.json"), &CoefficientReport { transport, fluid: coefs })?;
    fs::write(out.join("state.json"), ck.to_json()?)?;
    Ok(())
}

fn converge(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    let table = convergence_study(&setup)?;
    let rows_dir = out.join("rows");
    fs::create_dir_all(&rows_dir)?;
    for (k, r) in table.rows.iter().enumerate() {
        write_json(&rows_dir.join(format!("row_{k}.json")), r)?;
    }
    // Merge the per-row files in ladder order.
    let mut rows = Vec::new();
    for k in 0..table.rows.len() {
        let r: crate::harness::study::ErrorRow = serde_json::from_str(&fs::read_to_string(rows_dir.join(format!("row_{k}.json")))?)?;
        rows.push(vec![fmt_f64(r.epsilon), fmt_f64(r.e_sup), fmt_f64(r.e_fluid), fmt_f64(r.e_micro)]);
    }
    write_csv(&out.join("errors.csv"), &["epsilon", "E_sup", "E_fluid", "E_micro"], &rows)?;
    let order = |o: Option<f64>| o.map_or("nan".to_string(), fmt_f64);
    let footer = format!(
        "# fitted_order,{},{},{}\n# envelope,{}\n",
        order(table.order_sup),
        order(table.order_fluid),
        order(table.order_micro),
        fmt_f64(table.envelope)
    );
    let mut text = fs::read_to_string(out.join("errors.csv"))?;
    text.push_str(&footer);
    fs::write(out.join("errors.csv"), text)?;
    write_json(&out.join("errors.json"), &table)?;
    if let Some(r) = table.rows.iter().find(|r| r.failure.is_some()) {
        return Err(Error::Numerical(format!(
            "row epsilon = {} failed: {}",
            r.epsilon,
            r.failure.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

fn decay(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let setup = Setup::new(&cfg)?;
    let mut fits = Vec::new();
    for (k, &eps) in cfg.decay.epsilons.iter().enumerate() {
        let fit = decay_study(&setup, cfg.decay.wavenumber, eps, DecayData::Micro)?;
        let rows: Vec<Vec<String>> = fit.series.iter().map(|(t, y)| vec![fmt_f64(*t), fmt_f64(*y)]).collect();
        let name = if k == 0 { "decay.csv".to_string() } else { format!("decay_{k}.csv") };
        write_csv(&out.join(name), &["t", "remainder_norm"], &rows)?;
        fits.push(fit);
    }
    write_json(&out.join("decay.json"), &fits)
}

fn fixedpoint(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    write_json(&out.join("fixedpoint.json"), &demo_problems(cfg.seed)?)
}
