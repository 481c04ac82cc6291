//! Fully implicit trapezoidal scheme: all fields advance together, fluxes are
//! evaluated on time-averaged traces, and the resulting global nonlinear
//! system is solved by Newton-Krylov with a block-Jacobi preconditioner.

use crate::field::DgField;
use crate::model::{aux_y_update, constitutive_project, SimState};
use crate::operators::weak_curl;
use crate::solver::{newton_krylov, BlockJacobi, StepReport};
use crate::Result;

use super::{e_hat_full, h_tilde_full, project_product, StepContext};

/// Number of simultaneously solved fields: H, E, P, J, Q, sigma.
pub const N_IMPLICIT_FIELDS: usize = 6;

fn pack(fields: [&DgField; N_IMPLICIT_FIELDS], modes: usize) -> Vec<f64> {
    let n = fields[0].n_elements();
    let mut u = Vec::with_capacity(n * N_IMPLICIT_FIELDS * modes);
    for j in 0..n {
        for f in fields {
            u.extend_from_slice(f.element(j));
        }
    }
    u
}

fn unpack(u: &[f64], n: usize, modes: usize) -> [DgField; N_IMPLICIT_FIELDS] {
    let block = N_IMPLICIT_FIELDS * modes;
    let mut out: [DgField; N_IMPLICIT_FIELDS] =
        std::array::from_fn(|_| DgField::zeros(n, modes));
    for j in 0..n {
        for (f, field) in out.iter_mut().enumerate() {
            let src = &u[j * block + f * modes..j * block + (f + 1) * modes];
            field.element_mut(j).copy_from_slice(src);
        }
    }
    out
}

/// Residual of the trapezoidal system for a candidate next state.
pub fn implicit_residual(ctx: &StepContext, state: &SimState, dt: f64, u: &[f64]) -> Vec<f64> {
    let n = ctx.mesh.n_elements;
    let modes = ctx.modes();
    let [h1, e1, p1, j1, q1, s1] = unpack(u, n, modes);
    let t = state.time;
    let pr = ctx.params;

    let e_avg = DgField::linear_combination(0.5, &state.e, 0.5, &e1);
    let h_avg = DgField::linear_combination(0.5, &state.h, 0.5, &h1);
    let e_ext = 0.5 * (ctx.boundary.e_drive(t) + ctx.boundary.e_drive(t + dt));
    let h_ext = 0.5 * (ctx.boundary.h_drive(t) + ctx.boundary.h_drive(t + dt));

    let e_hat = e_hat_full(ctx, &e_avg, e_ext, &h_avg, h_ext);
    let curl_e = weak_curl(&e_avg, &e_hat, ctx.mesh, ctx.basis);
    let h_tilde = h_tilde_full(ctx, &h_avg, h_ext, &e_avg, e_ext);
    let curl_h = weak_curl(&h_avg, &h_tilde, ctx.mesh, ctx.basis);

    let y1 = aux_y_update(&state.y, &state.e, &e1, ctx.basis);
    let d_target = constitutive_project(&e1, &p1, &q1, &y1, pr, ctx.basis);
    let prod = project_product(&state.e, &e1, ctx.basis);

    let mut r = vec![0.0; u.len()];
    let block = N_IMPLICIT_FIELDS * modes;
    for j in 0..n {
        for i in 0..modes {
            let idx = j * block;
            r[idx + i] = h1[(j, i)] - state.h[(j, i)] - dt * curl_e[(j, i)];
            r[idx + modes + i] =
                d_target[(j, i)] - state.d[(j, i)] - dt * curl_h[(j, i)];
            r[idx + 2 * modes + i] =
                p1[(j, i)] - state.p[(j, i)] - 0.5 * dt * (state.j[(j, i)] + j1[(j, i)]);
            r[idx + 3 * modes + i] = j1[(j, i)] - state.j[(j, i)]
                + 0.5 * dt
                    * (pr.inv_tau * (state.j[(j, i)] + j1[(j, i)])
                        + pr.omega0 * pr.omega0 * (state.p[(j, i)] + p1[(j, i)])
                        - pr.omega_p * pr.omega_p * (state.e[(j, i)] + e1[(j, i)]));
            r[idx + 4 * modes + i] =
                q1[(j, i)] - state.q[(j, i)] - 0.5 * dt * (state.sigma[(j, i)] + s1[(j, i)]);
            r[idx + 5 * modes + i] = s1[(j, i)] - state.sigma[(j, i)]
                + 0.5 * dt
                    * (pr.inv_tau_v * (state.sigma[(j, i)] + s1[(j, i)])
                        + pr.omega_v * pr.omega_v * (state.q[(j, i)] + q1[(j, i)])
                        - 2.0 * pr.omega_v * pr.omega_v * prod[(j, i)]);
        }
    }
    r
}

pub fn step_implicit(ctx: &StepContext, state: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
    let n = ctx.mesh.n_elements;
    let modes = ctx.modes();
    let guess = pack(
        [&state.h, &state.e, &state.p, &state.j, &state.q, &state.sigma],
        modes,
    );
    let residual = |u: &[f64]| implicit_residual(ctx, state, dt, u);
    let pc = BlockJacobi::from_residual(
        &residual,
        &guess,
        n,
        N_IMPLICIT_FIELDS * modes,
        ctx.newton.fd_epsilon,
    )?;
    let apply_pc = |v: &[f64]| pc.apply(v);
    let (u, report) = newton_krylov(residual, &guess, &ctx.newton, Some(&apply_pc))?;
    let [h1, e1, p1, j1, q1, s1] = unpack(&u, n, modes);

    let y1 = aux_y_update(&state.y, &state.e, &e1, ctx.basis);
    let d1 = constitutive_project(&e1, &p1, &q1, &y1, ctx.params, ctx.basis);
    let out = SimState {
        e: e1,
        d: d1,
        h: h1,
        p: p1,
        j: j1,
        q: q1,
        sigma: s1,
        y: y1,
        h_half_prev: None,
        time: state.time + dt,
    };
    Ok((out, report))
}
