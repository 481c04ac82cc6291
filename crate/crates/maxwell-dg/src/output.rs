//! Deterministic CSV artifacts: field snapshots, energy traces, convergence
//! tables and pulse-area traces, plus a manifest echo for provenance.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; lines end with `\n` on every platform.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::basis::Basis;
use crate::config::RunManifest;
use crate::diagnostics::ConvergenceRow;
use crate::mesh::Mesh;
use crate::model::SimState;
use crate::soliton::EnergyRecord;
use crate::Result;

/// Full-precision float field; non-finite values become empty cells.
fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    for line in lines {
        f.write_all(line.as_bytes())?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// One row per cell-interior sample point, `degree + 1` per element.
pub fn write_snapshot(
    path: &Path,
    state: &SimState,
    mesh: &Mesh,
    basis: &Basis,
) -> Result<()> {
    let mut lines = vec!["x,E,H,P,J,Q,sigma".to_string()];
    let m = basis.modes();
    for j in 0..mesh.n_elements {
        for s in 0..m {
            let xi = -1.0 + 2.0 * (s as f64 + 0.5) / m as f64;
            let x = mesh.to_physical(j, xi);
            let row = [
                x,
                state.e.eval(mesh, basis, j, xi),
                state.h.eval(mesh, basis, j, xi),
                state.p.eval(mesh, basis, j, xi),
                state.j.eval(mesh, basis, j, xi),
                state.q.eval(mesh, basis, j, xi),
                state.sigma.eval(mesh, basis, j, xi),
            ];
            lines.push(row.map(fmt).join(","));
        }
    }
    write_lines(path, &lines)
}

pub const ENERGY_HEADER: &str = "step,time,energy,rel_deviation,J_dissipation,\
sigma_dissipation,jump_dissipation,theta_in,theta_out,identity_residual";

pub fn write_energy_trace(path: &Path, records: &[EnergyRecord]) -> Result<()> {
    let mut lines = vec![ENERGY_HEADER.to_string()];
    for r in records {
        let l = &r.ledger;
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt(r.time),
            fmt(l.energy),
            fmt(r.rel_deviation),
            fmt(l.ode_dissipation_j),
            fmt(l.ode_dissipation_sigma),
            fmt(l.jump_dissipation_h + l.jump_dissipation_e),
            fmt(l.theta_in),
            fmt(l.theta_out),
            fmt(l.identity_residual),
        ));
    }
    write_lines(path, &lines)
}

pub fn write_convergence_table(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut lines = vec!["N,l2_error,l2_order,linf_error,linf_order".to_string()];
    for r in rows {
        lines.push(format!(
            "{},{},{},{},{}",
            r.n,
            fmt(r.l2_error),
            fmt(r.l2_order),
            fmt(r.linf_error),
            fmt(r.linf_order),
        ));
    }
    write_lines(path, &lines)
}

pub fn write_pulse_area(path: &Path, trace: &[(f64, f64)]) -> Result<()> {
    let mut lines = vec!["time,area".to_string()];
    for (t, a) in trace {
        lines.push(format!("{},{}", fmt(*t), fmt(*a)));
    }
    write_lines(path, &lines)
}

/// Two-column table of the traveling-wave profile.
pub fn write_profile(path: &Path, xi: &[f64], e: &[f64], phi: &[f64]) -> Result<()> {
    let mut lines = vec!["xi,E,phi".to_string()];
    for i in 0..xi.len() {
        lines.push(format!("{},{},{}", fmt(xi[i]), fmt(e[i]), fmt(phi[i])));
    }
    write_lines(path, &lines)
}

/// Resolved-manifest echo written next to every run's outputs.
pub fn write_manifest_echo(path: &Path, manifest: &RunManifest) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, manifest.to_toml()?)?;
    Ok(())
}
