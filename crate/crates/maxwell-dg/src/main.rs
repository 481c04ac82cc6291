//! Command-line harness: configuration, run orchestration and CSV artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use maxwell_dg::basis::Basis;
use maxwell_dg::config::{parse_config, DtRule, Experiment, RunManifest};
use maxwell_dg::diagnostics::{
    convergence_table, energy_identity_check, smooth_random_state,
};
use maxwell_dg::flux::FluxKind;
use maxwell_dg::kink::{kink_error, kink_initial_state, KinkProfile, KINK_PERIOD};
use maxwell_dg::mesh::Mesh;
use maxwell_dg::output::{
    write_convergence_table, write_energy_trace, write_manifest_echo, write_profile,
    write_pulse_area, write_snapshot,
};
use maxwell_dg::scheme::{bootstrap_h_half_prev, step, Boundary, SchemeKind, StepContext};
use maxwell_dg::soliton::{run_soliton, EnergyRecord, SolitonConfig};
use maxwell_dg::solver::NewtonConfig;
use maxwell_dg::{Error, Result};

#[derive(Parser)]
#[command(name = "maxwell-dg", version, about = "Energy-stable DG solver for 1D nonlinear optics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mesh-refinement accuracy study on the traveling kink/antikink wave.
    KinkConvergence(CommonOpts),
    /// Soliton launch with absorbing outflow, snapshots and traces.
    Soliton {
        #[command(flatten)]
        common: CommonOpts,
        /// Envelope amplitude M of the injected pulse.
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// Single periodic run on the kink initial data with an energy trace.
    Run(CommonOpts),
    /// Per-step energy identity on seeded random states, all scheme/flux pairs.
    EnergyAudit {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit the tabulated traveling-wave profile.
    KinkProfile(CommonOpts),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    LeapFrog,
    FullyImplicit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FluxArg {
    Central,
    AlternatingI,
    AlternatingII,
    Upwind,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// TOML manifest; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    flux: Option<FluxArg>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Full-scale soliton mesh (6400 elements).
    #[arg(long)]
    full_scale: bool,
}

impl CommonOpts {
    fn manifest(&self, experiment: Experiment) -> Result<RunManifest> {
        let mut m = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut m = parse_config(&text)?;
                m.experiment = experiment;
                m
            }
            None => RunManifest::minimal(experiment),
        };
        if let Some(s) = self.scheme {
            m.scheme = match s {
                SchemeArg::LeapFrog => SchemeKind::LeapFrog,
                SchemeArg::FullyImplicit => SchemeKind::FullyImplicit,
            };
        }
        if let Some(f) = self.flux {
            m.flux = match f {
                FluxArg::Central => FluxKind::Central,
                FluxArg::AlternatingI => FluxKind::AlternatingI,
                FluxArg::AlternatingII => FluxKind::AlternatingII,
                FluxArg::Upwind => FluxKind::Upwind,
            };
        }
        if let Some(k) = self.degree {
            m.degree = k;
        }
        if let Some(n) = self.elements {
            m.elements = n;
        }
        if self.cfl.is_some() {
            m.cfl = self.cfl;
        }
        if self.tfinal.is_some() {
            m.t_final = self.tfinal;
        }
        if self.full_scale {
            m.full_scale = true;
        }
        if let Some(dir) = &self.out {
            m.out_dir = Some(dir.clone());
        }
        Ok(m)
    }

    fn init_threads(&self) {
        if let Some(n) = self.threads {
            // Ignore failure: the global pool can only be built once.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn out_dir(m: &RunManifest) -> PathBuf {
    m.out_dir.clone().unwrap_or_else(|| PathBuf::from("maxwell-dg-out"))
}

fn report_warnings(m: &RunManifest) {
    for w in m.warnings() {
        eprintln!("warning: {w}");
    }
}

fn cmd_kink_convergence(opts: &CommonOpts) -> Result<()> {
    let m = opts.manifest(Experiment::KinkConvergence)?;
    report_warnings(&m);
    let profile = KinkProfile::compute()?;
    let cfl = m.resolved_cfl();
    let n_list = m.convergence_elements();
    let results: Vec<Result<(f64, f64)>> = n_list
        .par_iter()
        .map(|&n| kink_error(&profile, m.scheme, m.flux, m.degree, n, cfl))
        .collect();
    let mut l2 = Vec::new();
    let mut linf = Vec::new();
    for r in results {
        let (a, b) = r?;
        l2.push(a);
        linf.push(b);
    }
    let rows = convergence_table(&n_list, &l2, &linf);
    let dir = out_dir(&m);
    write_convergence_table(&dir.join("convergence.csv"), &rows)?;
    write_manifest_echo(&dir.join("manifest.toml"), &m)?;
    for r in &rows {
        println!(
            "N={:5}  L2 {:.3e} (order {:.2})  Linf {:.3e} (order {:.2})",
            r.n, r.l2_error, r.l2_order, r.linf_error, r.linf_order
        );
    }
    println!("wrote {}", dir.join("convergence.csv").display());
    Ok(())
}

fn cmd_soliton(opts: &CommonOpts, amplitude: Option<f64>) -> Result<()> {
    let mut m = opts.manifest(Experiment::Soliton)?;
    if let Some(a) = amplitude {
        m.amplitude = a;
    }
    if opts.elements.is_none() && m.element_list.is_empty() && m.elements == 100 {
        // The kink-oriented default is far too coarse here.
        m.elements = 1600;
    }
    report_warnings(&m);
    let mut cfg = SolitonConfig::new(m.amplitude, m.scheme, m.flux, m.degree, m.resolved_elements());
    if let Some(c) = m.cfl {
        cfg.cfl = c;
    }
    cfg.t_final = m.resolved_t_final();
    if let Some(times) = &m.snapshot_times {
        cfg.snapshot_times = times.clone();
    }
    if let Some(ti) = m.trace_interval {
        cfg.trace_interval = ti;
    }
    let out = run_soliton(&cfg)?;
    let dir = out_dir(&m);
    let mesh = Mesh::uniform(0.0, 45.0, cfg.n_elements)?;
    let basis = Basis::new(cfg.degree)?;
    for snap in &out.snapshots {
        let name = format!("snapshot_t{:.1}.csv", snap.time);
        write_snapshot(&dir.join(&name), &snap.state, &mesh, &basis)?;
        println!("wrote {}", dir.join(&name).display());
    }
    write_energy_trace(&dir.join("energy.csv"), &out.energy)?;
    write_pulse_area(&dir.join("pulse_area.csv"), &out.pulse_area)?;
    write_manifest_echo(&dir.join("manifest.toml"), &m)?;
    println!(
        "{} steps, max Newton iterations {}, max residual {:.2e}",
        out.probe.len() - 1,
        out.max_newton_iters,
        out.max_newton_residual
    );
    println!("wrote {}", dir.join("energy.csv").display());
    Ok(())
}

/// Periodic kink-data run collecting the per-step energy ledger.
fn cmd_run(opts: &CommonOpts) -> Result<()> {
    let m = opts.manifest(Experiment::SingleRun)?;
    report_warnings(&m);
    let params = m.resolved_params()?;
    let mesh = Mesh::uniform(0.0, KINK_PERIOD, m.elements)?;
    let basis = Basis::new(m.degree)?;
    let ctx = StepContext {
        mesh: &mesh,
        basis: &basis,
        params: &params,
        flux: m.flux,
        boundary: Boundary::Periodic,
        newton: NewtonConfig::default(),
    };
    let profile = KinkProfile::compute()?;
    let mut state = kink_initial_state(&profile, &mesh, &basis);
    let t_final = m.resolved_t_final();
    let cfl = m.resolved_cfl();
    let dt_target = match m.resolved_dt_rule() {
        DtRule::Accuracy => cfl * mesh.h.powf((m.degree as f64 + 1.0) / 2.0),
        DtRule::Fixed => cfl * mesh.h,
    };
    let n_steps = (t_final / dt_target).round().max(1.0) as usize;
    let dt = t_final / n_steps as f64;
    if m.scheme == SchemeKind::LeapFrog {
        state.h_half_prev = Some(bootstrap_h_half_prev(&ctx, &state, dt)?);
    }

    let mut window = vec![state.clone()];
    let mut raw: Vec<(usize, f64, maxwell_dg::diagnostics::EnergyLedger)> = Vec::new();
    for s in 0..n_steps {
        let (next, _) = step(m.scheme, &ctx, &state, dt)?;
        state = next;
        window.push(state.clone());
        if window.len() > 3 {
            window.remove(0);
        }
        if window.len() == 3 {
            let ledger = energy_identity_check(
                &ctx,
                m.scheme,
                &window[0],
                &window[1],
                window[2].h_half_prev.as_ref(),
                dt,
            )?;
            raw.push((s, dt * s as f64, ledger));
        }
    }
    let first = raw.first().map(|r| r.2.energy).unwrap_or(0.0);
    let scale = if first.abs() > f64::MIN_POSITIVE {
        first.abs()
    } else {
        raw.iter().map(|r| r.2.energy.abs()).fold(1.0f64, f64::max)
    };
    let records: Vec<EnergyRecord> = raw
        .into_iter()
        .map(|(step, time, ledger)| EnergyRecord {
            step,
            time,
            ledger,
            rel_deviation: (ledger.energy - first) / scale,
        })
        .collect();

    let dir = out_dir(&m);
    write_energy_trace(&dir.join("energy.csv"), &records)?;
    write_snapshot(&dir.join("final_state.csv"), &state, &mesh, &basis)?;
    write_manifest_echo(&dir.join("manifest.toml"), &m)?;
    let max_dev = records.iter().map(|r| r.rel_deviation.abs()).fold(0.0f64, f64::max);
    println!("{n_steps} steps, max relative energy deviation {max_dev:.3e}");
    println!("wrote {}", dir.join("energy.csv").display());
    Ok(())
}

fn cmd_energy_audit(opts: &CommonOpts, states: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut m = opts.manifest(Experiment::EnergyAudit)?;
    if let Some(s) = states {
        m.audit_states = s;
    }
    if let Some(s) = seed {
        m.seed = s;
    }
    report_warnings(&m);
    let params = m.resolved_params()?;
    let n = if opts.elements.is_some() { m.elements } else { 24 };
    let mesh = Mesh::uniform(0.0, 1.0, n)?;
    let basis = Basis::new(m.degree)?;
    let newton = NewtonConfig { abs_tol: 1e-13, ..NewtonConfig::default() };
    let dt = 0.01 * mesh.h;

    let combos: Vec<(SchemeKind, FluxKind)> = [SchemeKind::LeapFrog, SchemeKind::FullyImplicit]
        .iter()
        .flat_map(|&s| FluxKind::ALL.iter().map(move |&f| (s, f)))
        .collect();

    let mut lines = vec!["scheme,flux,state,energy,identity_residual,relative_residual".to_string()];
    let mut worst = 0.0f64;
    for &(scheme, flux) in &combos {
        let results: Vec<Result<(f64, f64, f64)>> = (0..m.audit_states)
            .into_par_iter()
            .map(|i| {
                let ctx = StepContext {
                    mesh: &mesh,
                    basis: &basis,
                    params: &params,
                    flux,
                    boundary: Boundary::Periodic,
                    newton: newton.clone(),
                };
                let mut s0 = smooth_random_state(&mesh, &basis, &params, 0.1, m.seed ^ (i as u64));
                if scheme == SchemeKind::LeapFrog {
                    s0.h_half_prev = Some(bootstrap_h_half_prev(&ctx, &s0, dt)?);
                }
                let (s1, _) = step(scheme, &ctx, &s0, dt)?;
                let (s2, _) = step(scheme, &ctx, &s1, dt)?;
                let ledger = energy_identity_check(
                    &ctx,
                    scheme,
                    &s0,
                    &s1,
                    s2.h_half_prev.as_ref(),
                    dt,
                )?;
                Ok((ledger.energy, ledger.identity_residual, ledger.relative_residual()))
            })
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            let (energy, res, rel) = r?;
            worst = worst.max(rel);
            lines.push(format!(
                "{:?},{:?},{},{:.16e},{:.16e},{:.16e}",
                scheme, flux, i, energy, res, rel
            ));
        }
    }
    let dir = out_dir(&m);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("energy_audit.csv"), lines.join("\n") + "\n")?;
    write_manifest_echo(&dir.join("manifest.toml"), &m)?;
    println!(
        "{} states x {} combinations, worst relative identity residual {worst:.3e}",
        m.audit_states,
        combos.len()
    );
    if worst > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "energy identity violated: relative residual {worst:.3e} > 1e-10"
        )));
    }
    println!("wrote {}", dir.join("energy_audit.csv").display());
    Ok(())
}

fn cmd_kink_profile(opts: &CommonOpts) -> Result<()> {
    let m = opts.manifest(Experiment::KinkProfile)?;
    let p = KinkProfile::compute()?;
    let dir = out_dir(&m);
    write_profile(&dir.join("kink_profile.csv"), &p.xi_grid, &p.e_of_xi, &p.phi_of_xi)?;
    write_manifest_echo(&dir.join("manifest.toml"), &m)?;
    println!(
        "{} samples, wave speed {:.12}, periodicity defect {:.3e}",
        p.xi_grid.len(),
        p.v,
        p.period_defect
    );
    println!("wrote {}", dir.join("kink_profile.csv").display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::KinkConvergence(c) => {
            c.init_threads();
            cmd_kink_convergence(c)
        }
        Cmd::Soliton { common, amplitude } => {
            common.init_threads();
            cmd_soliton(common, *amplitude)
        }
        Cmd::Run(c) => {
            c.init_threads();
            cmd_run(c)
        }
        Cmd::EnergyAudit { common, states, seed } => {
            common.init_threads();
            cmd_energy_audit(common, *states, *seed)
        }
        Cmd::KinkProfile(c) => cmd_kink_profile(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::InvalidParams(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
