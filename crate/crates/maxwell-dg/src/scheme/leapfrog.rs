//! The staggered leap-frog scheme: explicit magnetic half-steps around an
//! implicit solve for the electric and material fields.
//!
//! With central or alternating fluxes the implicit part decouples per
//! element and is solved by dense local Newton iterations; the upwind flux
//! couples neighbouring elements through the time-averaged electric jump and
//! is solved globally by Newton-Krylov.

use nalgebra::DMatrix;

use crate::field::DgField;
use crate::flux::{BoundaryKind, FluxKind};
use crate::model::{aux_y_update, constitutive_project, SimState};
use crate::operators::weak_curl;
use crate::solver::{local_newton, newton_krylov, BlockJacobi, StepReport};
use crate::Result;

use super::{e_hat_full, h_tilde_full, project_product, solve_h_half, StepContext};

/// Number of implicitly coupled fields: E, P, J, Q, sigma.
pub const N_STAGE2_FIELDS: usize = 5;

pub fn step_leapfrog(ctx: &StepContext, state: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
    let t = state.time;
    let h_half = solve_h_half(
        ctx,
        &state.h,
        &state.e,
        0.5 * dt,
        ctx.boundary.e_drive(t),
        ctx.boundary.h_drive(t + 0.5 * dt),
    )?;

    let (fields, report) = if ctx.flux == FluxKind::Upwind {
        solve_stage2_global(ctx, state, &h_half, dt)?
    } else {
        solve_stage2_local(ctx, state, &h_half, dt)?
    };
    let [e1, p1, j1, q1, s1] = fields;

    let y1 = aux_y_update(&state.y, &state.e, &e1, ctx.basis);
    let d1 = constitutive_project(&e1, &p1, &q1, &y1, ctx.params, ctx.basis);

    // Second magnetic half-step; every flux dependence is on known fields.
    let e_hat = e_hat_full(
        ctx,
        &e1,
        ctx.boundary.e_drive(t + dt),
        &h_half,
        ctx.boundary.h_drive(t + 0.5 * dt),
    );
    let mut h1 = h_half.clone();
    h1.axpy(0.5 * dt, &weak_curl(&e1, &e_hat, ctx.mesh, ctx.basis));

    let out = SimState {
        e: e1,
        d: d1,
        h: h1,
        p: p1,
        j: j1,
        q: q1,
        sigma: s1,
        y: y1,
        h_half_prev: Some(h_half),
        time: t + dt,
    };
    Ok((out, report))
}

/// Unknown layout for the implicit stage: element-major, field-minor
/// `[E, P, J, Q, sigma]` with `modes` coefficients each.
fn pack(fields: [&DgField; N_STAGE2_FIELDS], modes: usize) -> Vec<f64> {
    let n = fields[0].n_elements();
    let mut u = Vec::with_capacity(n * N_STAGE2_FIELDS * modes);
    for j in 0..n {
        for f in fields {
            u.extend_from_slice(f.element(j));
        }
    }
    u
}

fn unpack(u: &[f64], n: usize, modes: usize) -> [DgField; N_STAGE2_FIELDS] {
    let block = N_STAGE2_FIELDS * modes;
    let mut out: [DgField; N_STAGE2_FIELDS] =
        std::array::from_fn(|_| DgField::zeros(n, modes));
    for j in 0..n {
        for (f, field) in out.iter_mut().enumerate() {
            let src = &u[j * block + f * modes..j * block + (f + 1) * modes];
            field.element_mut(j).copy_from_slice(src);
        }
    }
    out
}

/// Residual of the implicit stage for a full candidate `(E, P, J, Q, s)^{n+1}`.
/// Shared between the global Newton-Krylov path and the equivalence tests.
pub fn stage2_residual(
    ctx: &StepContext,
    state: &SimState,
    h_half: &DgField,
    dt: f64,
    u: &[f64],
) -> Vec<f64> {
    let n = ctx.mesh.n_elements;
    let modes = ctx.modes();
    let [e1, p1, j1, q1, s1] = unpack(u, n, modes);
    let t = state.time;
    let pr = ctx.params;

    let y1 = aux_y_update(&state.y, &state.e, &e1, ctx.basis);
    let d_target = constitutive_project(&e1, &p1, &q1, &y1, pr, ctx.basis);
    let e_avg = DgField::linear_combination(0.5, &state.e, 0.5, &e1);
    let h_tilde = h_tilde_full(
        ctx,
        h_half,
        ctx.boundary.h_drive(t + 0.5 * dt),
        &e_avg,
        0.5 * (ctx.boundary.e_drive(t) + ctx.boundary.e_drive(t + dt)),
    );
    let curl = weak_curl(h_half, &h_tilde, ctx.mesh, ctx.basis);
    let prod = project_product(&state.e, &e1, ctx.basis);

    let mut r = vec![0.0; u.len()];
    let block = N_STAGE2_FIELDS * modes;
    for j in 0..n {
        for i in 0..modes {
            let idx = j * block;
            r[idx + i] = d_target[(j, i)] - state.d[(j, i)] - dt * curl[(j, i)];
            r[idx + modes + i] =
                p1[(j, i)] - state.p[(j, i)] - 0.5 * dt * (state.j[(j, i)] + j1[(j, i)]);
            r[idx + 2 * modes + i] = j1[(j, i)] - state.j[(j, i)]
                + 0.5 * dt
                    * (pr.inv_tau * (state.j[(j, i)] + j1[(j, i)])
                        + pr.omega0 * pr.omega0 * (state.p[(j, i)] + p1[(j, i)])
                        - pr.omega_p * pr.omega_p * (state.e[(j, i)] + e1[(j, i)]));
            r[idx + 3 * modes + i] =
                q1[(j, i)] - state.q[(j, i)] - 0.5 * dt * (state.sigma[(j, i)] + s1[(j, i)]);
            r[idx + 4 * modes + i] = s1[(j, i)] - state.sigma[(j, i)]
                + 0.5 * dt
                    * (pr.inv_tau_v * (state.sigma[(j, i)] + s1[(j, i)])
                        + pr.omega_v * pr.omega_v * (state.q[(j, i)] + q1[(j, i)])
                        - 2.0 * pr.omega_v * pr.omega_v * prod[(j, i)]);
        }
    }
    r
}

fn solve_stage2_global(
    ctx: &StepContext,
    state: &SimState,
    h_half: &DgField,
    dt: f64,
) -> Result<([DgField; N_STAGE2_FIELDS], StepReport)> {
    let modes = ctx.modes();
    let guess = pack([&state.e, &state.p, &state.j, &state.q, &state.sigma], modes);
    let residual = |u: &[f64]| stage2_residual(ctx, state, h_half, dt, u);
    let pc = BlockJacobi::from_residual(
        &residual,
        &guess,
        ctx.mesh.n_elements,
        N_STAGE2_FIELDS * modes,
        ctx.newton.fd_epsilon,
    )?;
    let apply_pc = |v: &[f64]| pc.apply(v);
    let (u, report) = newton_krylov(residual, &guess, &ctx.newton, Some(&apply_pc))?;
    Ok((unpack(&u, ctx.mesh.n_elements, modes), report))
}

/// Pointwise-weighted mass matrix `M[i][m] = sum_q w_q f_q phi_i phi_m`.
fn weighted_mass(values: &[f64], basis: &crate::basis::Basis) -> DMatrix<f64> {
    let m = basis.modes();
    let mut out = DMatrix::zeros(m, m);
    for q in 0..basis.n_quad() {
        let w = basis.quad_weights[q] * values[q];
        let row = &basis.basis_values[q];
        for i in 0..m {
            for k in 0..m {
                out[(i, k)] += w * row[i] * row[k];
            }
        }
    }
    out
}

fn solve_stage2_local(
    ctx: &StepContext,
    state: &SimState,
    h_half: &DgField,
    dt: f64,
) -> Result<([DgField; N_STAGE2_FIELDS], StepReport)> {
    let n = ctx.mesh.n_elements;
    let modes = ctx.modes();
    let basis = ctx.basis;
    let pr = ctx.params;
    let t = state.time;

    // The flux of H^{n+1/2} is independent of the unknowns except at the
    // absorbing wall, where the averaged electric trace of the last element
    // enters. Freeze the known half (E^n / 2) and add the E^{n+1} part as a
    // rank-one correction to the last element's residual.
    let e_half_known = DgField::linear_combination(0.5, &state.e, 0.0, &state.e);
    let h_tilde_known = h_tilde_full(
        ctx,
        h_half,
        ctx.boundary.h_drive(t + 0.5 * dt),
        &e_half_known,
        0.5 * (ctx.boundary.e_drive(t) + ctx.boundary.e_drive(t + dt)),
    );
    let curl_known = weak_curl(h_half, &h_tilde_known, ctx.mesh, ctx.basis);
    let wall_coupled = ctx.boundary.kind() == BoundaryKind::SolitonIO;
    // R_E of the last element gains
    // `+ dt (2/h) (sqrt(eps)/8) (phi_R . E1) phi_R` from the wall flux.
    let wall_coeff = dt * (2.0 / ctx.mesh.h) * pr.eps_inf.sqrt() / 8.0;

    let mut e1 = DgField::zeros(n, modes);
    let mut p1 = DgField::zeros(n, modes);
    let mut j1 = DgField::zeros(n, modes);
    let mut q1 = DgField::zeros(n, modes);
    let mut s1 = DgField::zeros(n, modes);
    let mut report = StepReport::trivial();

    let block = N_STAGE2_FIELDS * modes;
    for jel in 0..n {
        let e0q = state.e.at_quad(basis, jel);
        let e0 = state.e.element(jel);
        let d0 = state.d.element(jel);
        let p0 = state.p.element(jel);
        let jj0 = state.j.element(jel);
        let q0 = state.q.element(jel);
        let s0 = state.sigma.element(jel);
        let y0 = state.y.element(jel);
        let is_wall = wall_coupled && jel == n - 1;

        let residual_jacobian = |u: &[f64]| -> (Vec<f64>, DMatrix<f64>) {
            let (eu, pu, ju, qu, su) =
                (&u[0..modes], &u[modes..2 * modes], &u[2 * modes..3 * modes],
                 &u[3 * modes..4 * modes], &u[4 * modes..5 * modes]);
            // Values at quadrature nodes of the candidate E1 and Q1.
            let mut e1q = vec![0.0; basis.n_quad()];
            let mut q1q = vec![0.0; basis.n_quad()];
            for q in 0..basis.n_quad() {
                let row = &basis.basis_values[q];
                for i in 0..modes {
                    e1q[q] += eu[i] * row[i];
                    q1q[q] += qu[i] * row[i];
                }
            }
            let mut r = vec![0.0; block];
            let mut jac = DMatrix::<f64>::zeros(block, block);

            // R_E: constitutive target minus explicit update.
            for i in 0..modes {
                let mut val = pr.eps_inf * eu[i]
                    + pr.a * (1.0 - pr.theta) * y0[i]
                    + pu[i]
                    - d0[i]
                    - dt * curl_known[(jel, i)];
                for q in 0..basis.n_quad() {
                    let kerr = pr.a
                        * (1.0 - pr.theta)
                        * 1.5
                        * (e1q[q] * e1q[q] + e0q[q] * e0q[q])
                        * (e1q[q] - e0q[q]);
                    let raman = pr.a * pr.theta * q1q[q] * e1q[q];
                    val += basis.quad_weights[q] * (kerr + raman) * basis.basis_values[q][i];
                }
                r[i] = val;
            }
            // Jacobian blocks of R_E.
            let dkerr: Vec<f64> = (0..basis.n_quad())
                .map(|q| {
                    pr.a * (1.0 - pr.theta)
                        * 1.5
                        * (3.0 * e1q[q] * e1q[q] + e0q[q] * e0q[q] - 2.0 * e1q[q] * e0q[q])
                })
                .collect();
            let draman_e: Vec<f64> =
                (0..basis.n_quad()).map(|q| pr.a * pr.theta * q1q[q]).collect();
            let draman_q: Vec<f64> =
                (0..basis.n_quad()).map(|q| pr.a * pr.theta * e1q[q]).collect();
            let m_e = weighted_mass(&dkerr, basis) + weighted_mass(&draman_e, basis);
            let m_q = weighted_mass(&draman_q, basis);
            for i in 0..modes {
                jac[(i, i)] += pr.eps_inf;
                jac[(i, modes + i)] = 1.0;
                for k in 0..modes {
                    jac[(i, k)] += m_e[(i, k)];
                    jac[(i, 3 * modes + k)] += m_q[(i, k)];
                }
            }
            if is_wall {
                for i in 0..modes {
                    let mut trace = 0.0;
                    for k in 0..modes {
                        trace += basis.at_right[k] * eu[k];
                    }
                    r[i] += wall_coeff * trace * basis.at_right[i];
                    for k in 0..modes {
                        jac[(i, k)] += wall_coeff * basis.at_right[i] * basis.at_right[k];
                    }
                }
            }

            // Trapezoidal material ODEs.
            let w0sq = pr.omega0 * pr.omega0;
            let wpsq = pr.omega_p * pr.omega_p;
            let wvsq = pr.omega_v * pr.omega_v;
            // sigma equation needs pi_h(E^n E^{n+1}).
            let mut prod = vec![0.0; modes];
            for q in 0..basis.n_quad() {
                let w = basis.quad_weights[q] * e0q[q] * e1q[q];
                for i in 0..modes {
                    prod[i] += w * basis.basis_values[q][i];
                }
            }
            let m_e0 = weighted_mass(&e0q, basis);
            for i in 0..modes {
                r[modes + i] = pu[i] - p0[i] - 0.5 * dt * (jj0[i] + ju[i]);
                jac[(modes + i, modes + i)] = 1.0;
                jac[(modes + i, 2 * modes + i)] = -0.5 * dt;

                r[2 * modes + i] = ju[i] - jj0[i]
                    + 0.5 * dt
                        * (pr.inv_tau * (jj0[i] + ju[i]) + w0sq * (p0[i] + pu[i])
                            - wpsq * (e0[i] + eu[i]));
                jac[(2 * modes + i, 2 * modes + i)] = 1.0 + 0.5 * dt * pr.inv_tau;
                jac[(2 * modes + i, modes + i)] = 0.5 * dt * w0sq;
                jac[(2 * modes + i, i)] = -0.5 * dt * wpsq;

                r[3 * modes + i] = qu[i] - q0[i] - 0.5 * dt * (s0[i] + su[i]);
                jac[(3 * modes + i, 3 * modes + i)] = 1.0;
                jac[(3 * modes + i, 4 * modes + i)] = -0.5 * dt;

                r[4 * modes + i] = su[i] - s0[i]
                    + 0.5 * dt
                        * (pr.inv_tau_v * (s0[i] + su[i]) + wvsq * (q0[i] + qu[i])
                            - 2.0 * wvsq * prod[i]);
                jac[(4 * modes + i, 4 * modes + i)] = 1.0 + 0.5 * dt * pr.inv_tau_v;
                jac[(4 * modes + i, 3 * modes + i)] = 0.5 * dt * wvsq;
                for k in 0..modes {
                    jac[(4 * modes + i, k)] -= dt * wvsq * m_e0[(i, k)];
                }
            }
            (r, jac)
        };

        let mut guess = vec![0.0; block];
        guess[0..modes].copy_from_slice(e0);
        guess[modes..2 * modes].copy_from_slice(p0);
        guess[2 * modes..3 * modes].copy_from_slice(jj0);
        guess[3 * modes..4 * modes].copy_from_slice(q0);
        guess[4 * modes..5 * modes].copy_from_slice(s0);
        let (u, rep) = local_newton(residual_jacobian, &guess, &ctx.newton, jel)?;
        report = report.merge(rep);
        e1.element_mut(jel).copy_from_slice(&u[0..modes]);
        p1.element_mut(jel).copy_from_slice(&u[modes..2 * modes]);
        j1.element_mut(jel).copy_from_slice(&u[2 * modes..3 * modes]);
        q1.element_mut(jel).copy_from_slice(&u[3 * modes..4 * modes]);
        s1.element_mut(jel).copy_from_slice(&u[4 * modes..5 * modes]);
    }
    Ok(([e1, p1, j1, q1, s1], report))
}
