//! Fully discrete time integrators: the staggered leap-frog scheme and the
//! fully implicit trapezoidal scheme, sharing flux assembly and the magnetic
//! half-step solver.

pub mod implicit;
pub mod leapfrog;

use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::field::DgField;
use crate::flux::{self, BoundaryKind, FluxKind, TraceSet};
use crate::mesh::Mesh;
use crate::model::{ModelParams, SimState};
use crate::operators::weak_curl;
use crate::solver::{gmres, NewtonConfig, StepReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    LeapFrog,
    FullyImplicit,
}

/// Boundary treatment. The soliton boundary needs both wall drivers; the
/// flux choice decides which of them actually enters the scheme.
pub enum Boundary<'a> {
    Periodic,
    SolitonIO {
        e_drive: &'a dyn Fn(f64) -> f64,
        h_drive: &'a dyn Fn(f64) -> f64,
    },
}

impl Boundary<'_> {
    pub fn kind(&self) -> BoundaryKind {
        match self {
            Boundary::Periodic => BoundaryKind::Periodic,
            Boundary::SolitonIO { .. } => BoundaryKind::SolitonIO,
        }
    }

    pub fn e_drive(&self, t: f64) -> f64 {
        match self {
            Boundary::Periodic => 0.0,
            Boundary::SolitonIO { e_drive, .. } => e_drive(t),
        }
    }

    pub fn h_drive(&self, t: f64) -> f64 {
        match self {
            Boundary::Periodic => 0.0,
            Boundary::SolitonIO { h_drive, .. } => h_drive(t),
        }
    }
}

/// Everything a single step needs besides the state itself.
pub struct StepContext<'a> {
    pub mesh: &'a Mesh,
    pub basis: &'a Basis,
    pub params: &'a ModelParams,
    pub flux: FluxKind,
    pub boundary: Boundary<'a>,
    pub newton: NewtonConfig,
}

impl StepContext<'_> {
    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn n_dof(&self) -> usize {
        self.mesh.n_elements * self.basis.modes()
    }
}

/// Advances one step with the selected scheme.
pub fn step(
    scheme: SchemeKind,
    ctx: &StepContext,
    state: &SimState,
    dt: f64,
) -> Result<(SimState, StepReport)> {
    if !state.is_finite() {
        return Err(Error::Diverged(state.time));
    }
    let out = match scheme {
        SchemeKind::LeapFrog => leapfrog::step_leapfrog(ctx, state, dt),
        SchemeKind::FullyImplicit => implicit::step_implicit(ctx, state, dt),
    }?;
    if !out.0.is_finite() {
        return Err(Error::Diverged(out.0.time));
    }
    Ok(out)
}

/// `E_hat` at all interfaces. `e` carries the electric traces (exterior value
/// `e_ext` at the left wall), `h_ref` the magnetic field entering the upwind
/// jump and the absorbing wall (exterior value `h_ext`). The whole map is
/// affine in `(e, e_ext, h_ref, h_ext)`.
pub fn e_hat_full(
    ctx: &StepContext,
    e: &DgField,
    e_ext: f64,
    h_ref: &DgField,
    h_ext: f64,
) -> Vec<f64> {
    let eps = ctx.params.eps_inf;
    match ctx.boundary.kind() {
        BoundaryKind::Periodic => {
            let e_tr = TraceSet::periodic(e, ctx.basis);
            let h_tr = TraceSet::periodic(h_ref, ctx.basis);
            flux::e_hat(&e_tr, &h_tr, ctx.flux, eps)
        }
        BoundaryKind::SolitonIO => {
            let e_tr = TraceSet::with_left_exterior(e, ctx.basis, e_ext);
            let h_tr = TraceSet::with_left_exterior(h_ref, ctx.basis, h_ext);
            let n = ctx.mesh.n_elements;
            let mut out = flux::e_hat(&e_tr, &h_tr, ctx.flux, eps);
            out[n] = flux::absorbing_e_hat(e_tr.minus[n], h_tr.minus[n], ctx.flux, eps);
            out
        }
    }
}

/// `H_tilde` at all interfaces; `e_ref` is the electric field entering the
/// upwind jump and the absorbing wall (for the staggered scheme this is the
/// time average of the two electric levels).
pub fn h_tilde_full(
    ctx: &StepContext,
    h: &DgField,
    h_ext: f64,
    e_ref: &DgField,
    e_ext: f64,
) -> Vec<f64> {
    let eps = ctx.params.eps_inf;
    match ctx.boundary.kind() {
        BoundaryKind::Periodic => {
            let h_tr = TraceSet::periodic(h, ctx.basis);
            let e_tr = TraceSet::periodic(e_ref, ctx.basis);
            flux::h_tilde(&h_tr, &e_tr, ctx.flux, eps)
        }
        BoundaryKind::SolitonIO => {
            let h_tr = TraceSet::with_left_exterior(h, ctx.basis, h_ext);
            let e_tr = TraceSet::with_left_exterior(e_ref, ctx.basis, e_ext);
            let n = ctx.mesh.n_elements;
            let mut out = flux::h_tilde(&h_tr, &e_tr, ctx.flux, eps);
            out[n] = flux::absorbing_h_tilde(e_tr.minus[n], h_tr.minus[n], ctx.flux, eps);
            out
        }
    }
}

/// Lift of interface flux values without a volume term.
pub fn lift_only(flux_vals: &[f64], mesh: &Mesh, basis: &Basis) -> DgField {
    let zero = DgField::zeros(mesh.n_elements, basis.modes());
    weak_curl(&zero, flux_vals, mesh, basis)
}

/// Solves the magnetic half-step
/// `H = h_base + half_dt * curl(e_level, E_hat(e_level, H))`,
/// where `E_hat` may depend on the unknown `H` (upwind jumps and the
/// absorbing wall). Affine, solved by GMRES; with periodic conservative
/// fluxes the dependence vanishes and the update is explicit.
pub fn solve_h_half(
    ctx: &StepContext,
    h_base: &DgField,
    e_level: &DgField,
    half_dt: f64,
    e_ext: f64,
    h_ext: f64,
) -> Result<DgField> {
    let n = ctx.mesh.n_elements;
    let modes = ctx.modes();
    let zero_h = DgField::zeros(n, modes);
    let known_flux = e_hat_full(ctx, e_level, e_ext, &zero_h, h_ext);
    let mut b = h_base.clone();
    b.axpy(half_dt, &weak_curl(e_level, &known_flux, ctx.mesh, ctx.basis));

    let explicit = ctx.boundary.kind() == BoundaryKind::Periodic && ctx.flux != FluxKind::Upwind;
    if explicit {
        return Ok(b);
    }

    let zero_e = DgField::zeros(n, modes);
    let apply_a = |v: &[f64]| -> Vec<f64> {
        let vf = DgField::from_coeffs(n, modes, v.to_vec());
        let lin_flux = e_hat_full(ctx, &zero_e, 0.0, &vf, 0.0);
        let mut out = vf.clone();
        out.axpy(-half_dt, &lift_only(&lin_flux, ctx.mesh, ctx.basis));
        out.coeffs().to_vec()
    };
    let bnorm = b.coeffs().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-13 * (1.0 + bnorm);
    let x = gmres(
        apply_a,
        b.coeffs(),
        b.coeffs(),
        tol,
        ctx.newton.krylov_restart,
        200,
        None::<&fn(&[f64]) -> Vec<f64>>,
    )?;
    Ok(DgField::from_coeffs(n, modes, x))
}

/// Backward magnetic half-step used to seed the staggered scheme's
/// `H^{-1/2}` from time-collocated initial data. Only the energy diagnostics
/// consume the result.
pub fn bootstrap_h_half_prev(ctx: &StepContext, state: &SimState, dt: f64) -> Result<DgField> {
    let t0 = state.time;
    solve_h_half(
        ctx,
        &state.h,
        &state.e,
        -0.5 * dt,
        ctx.boundary.e_drive(t0),
        ctx.boundary.h_drive(t0 - 0.5 * dt),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::project_l2;
    use crate::model::initial_y;

    fn linear_params(eps_inf: f64) -> ModelParams {
        // eps_s = eps_inf makes the Lorentz coupling vanish; a = 0 removes
        // the cubic response, leaving plain linear Maxwell.
        ModelParams::new(eps_inf, eps_inf, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0).unwrap()
    }

    fn plane_wave_state(mesh: &Mesh, basis: &Basis, params: &ModelParams, t: f64) -> SimState {
        let c = 1.0 / params.eps_inf.sqrt();
        let e_exact = move |x: f64| (x - c * t).cos();
        let h_exact = move |x: f64| -params.eps_inf.sqrt() * (x - c * t).cos();
        let mut state = SimState::zeros(mesh.n_elements, basis.modes());
        state.e = project_l2(e_exact, mesh, basis);
        state.h = project_l2(h_exact, mesh, basis);
        state.d = state.e.clone();
        state.d.scale(params.eps_inf);
        state.y = initial_y(&state.e, mesh, basis);
        state.time = t;
        state
    }

    fn ctx<'a>(
        mesh: &'a Mesh,
        basis: &'a Basis,
        params: &'a ModelParams,
        flux: FluxKind,
        boundary: Boundary<'a>,
    ) -> StepContext<'a> {
        StepContext { mesh, basis, params, flux, boundary, newton: NewtonConfig::default() }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let mesh = Mesh::uniform(0.0, 1.0, 4).unwrap();
        let basis = Basis::new(2).unwrap();
        let params = ModelParams::soliton();
        let zero = |_: f64| 0.0;
        for scheme in [SchemeKind::LeapFrog, SchemeKind::FullyImplicit] {
            for flux in FluxKind::ALL {
                for periodic in [true, false] {
                    let boundary = if periodic {
                        Boundary::Periodic
                    } else {
                        Boundary::SolitonIO { e_drive: &zero, h_drive: &zero }
                    };
                    let c = ctx(&mesh, &basis, &params, flux, boundary);
                    let state = SimState::zeros(4, basis.modes());
                    let (next, _) = step(scheme, &c, &state, 0.01).unwrap();
                    for f in [&next.e, &next.h, &next.p, &next.j, &next.q, &next.sigma] {
                        assert!(f.coeffs().iter().all(|v| v.abs() < 1e-14));
                    }
                }
            }
        }
    }

    fn plane_wave_error(
        scheme: SchemeKind,
        flux: FluxKind,
        n_elements: usize,
        cfl: f64,
    ) -> f64 {
        let params = linear_params(2.25);
        let mesh = Mesh::uniform(0.0, 2.0 * std::f64::consts::PI, n_elements).unwrap();
        let basis = Basis::new(2).unwrap();
        let c = ctx(&mesh, &basis, &params, flux, Boundary::Periodic);
        let t_final = 0.5;
        let n_steps = (t_final / (cfl * mesh.h)).ceil() as usize;
        let dt = t_final / n_steps as f64;
        let mut state = plane_wave_state(&mesh, &basis, &params, 0.0);
        for _ in 0..n_steps {
            let (next, _) = step(scheme, &c, &state, dt).unwrap();
            state = next;
        }
        let mut exact = plane_wave_state(&mesh, &basis, &params, t_final);
        exact.e.axpy(-1.0, &state.e);
        exact.e.l2_norm(&mesh)
    }

    #[test]
    fn leapfrog_converges_on_linear_plane_wave() {
        let coarse = plane_wave_error(SchemeKind::LeapFrog, FluxKind::Central, 16, 0.1);
        let fine = plane_wave_error(SchemeKind::LeapFrog, FluxKind::Central, 32, 0.1);
        assert!(coarse < 0.05, "coarse error {coarse}");
        assert!(coarse / fine > 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn implicit_converges_on_linear_plane_wave() {
        let coarse = plane_wave_error(SchemeKind::FullyImplicit, FluxKind::Upwind, 16, 0.5);
        let fine = plane_wave_error(SchemeKind::FullyImplicit, FluxKind::Upwind, 32, 0.5);
        assert!(coarse < 0.05, "coarse error {coarse}");
        assert!(coarse / fine > 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn upwind_leapfrog_plane_wave_stays_accurate() {
        let err = plane_wave_error(SchemeKind::LeapFrog, FluxKind::Upwind, 32, 0.1);
        assert!(err < 0.01, "error {err}");
    }

    /// The per-element Newton path and the assembled global residual must
    /// describe the same system: the converged local solution has to zero the
    /// global residual.
    #[test]
    fn local_solution_zeros_global_residual() {
        let params = ModelParams::kink();
        let mesh = Mesh::uniform(0.0, 6.0, 12).unwrap();
        let basis = Basis::new(2).unwrap();
        for flux in [FluxKind::Central, FluxKind::AlternatingI, FluxKind::AlternatingII] {
            let c = ctx(&mesh, &basis, &params, flux, Boundary::Periodic);
            let mut state = SimState::zeros(12, basis.modes());
            state.e = project_l2(|x| 0.02 * x.sin().powi(2), &mesh, &basis);
            state.h = project_l2(|x| 0.01 * x.cos(), &mesh, &basis);
            state.p = project_l2(|x| 1e-4 * x.sin(), &mesh, &basis);
            state.j = project_l2(|x| 1e-3 * (2.0 * x).cos(), &mesh, &basis);
            state.y = initial_y(&state.e, &mesh, &basis);
            state.d = crate::model::constitutive_project(
                &state.e, &state.p, &state.q, &state.y, &params, &basis,
            );
            let dt = 1e-4;
            let h_half = solve_h_half(&c, &state.h, &state.e, 0.5 * dt, 0.0, 0.0).unwrap();
            let (next, rep) = leapfrog::step_leapfrog(&c, &state, dt).unwrap();
            assert!(rep.converged);

            let modes = basis.modes();
            let mut u = Vec::new();
            for j in 0..12 {
                for f in [&next.e, &next.p, &next.j, &next.q, &next.sigma] {
                    u.extend_from_slice(f.element(j));
                }
            }
            let r = leapfrog::stage2_residual(&c, &state, &h_half, dt, &u);
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rnorm < 1e-9, "flux {flux:?}: residual {rnorm}");
            assert_eq!(u.len(), 12 * 5 * modes);
        }
    }
}

/// Projection of the pointwise product `f g` onto the polynomial space.
pub fn project_product(f: &DgField, g: &DgField, basis: &Basis) -> DgField {
    let n = f.n_elements();
    let modes = f.modes();
    let mut out = DgField::zeros(n, modes);
    for j in 0..n {
        let fv = f.at_quad(basis, j);
        let gv = g.at_quad(basis, j);
        let oj = out.element_mut(j);
        for q in 0..basis.n_quad() {
            let w = basis.quad_weights[q] * fv[q] * gv[q];
            for i in 0..modes {
                oj[i] += w * basis.basis_values[q][i];
            }
        }
    }
    out
}
