//! Traveling kink/antikink benchmark: a 6-periodic traveling-wave profile
//! for the undamped Kerr-Lorentz system, used as an accuracy test.
//!
//! The profile solves the traveling-wave ODE in `xi = x - v t`, so after one
//! period `T = 6/v` the exact solution returns to the initial profile.

use crate::basis::{project_l2, Basis};
use crate::diagnostics::{convergence_table, error_norms, ConvergenceRow};
use crate::flux::FluxKind;
use crate::mesh::Mesh;
use crate::model::{constitutive_project, initial_y, ModelParams, SimState};
use crate::scheme::{step, Boundary, SchemeKind, StepContext};
use crate::solver::NewtonConfig;
use crate::{Error, Result};

pub const KINK_PERIOD: f64 = 6.0;
pub const KINK_GRID_POINTS: usize = 160_000;

/// Wave speed of the kink/antikink pair.
pub fn kink_speed() -> f64 {
    0.6545 / ModelParams::kink().eps_inf.sqrt()
}

/// Default time-step multipliers for the accuracy study,
/// `dt = cfl * h^((k+1)/2)`. The staggered value for degree 1 makes the
/// final step land exactly on the period.
pub fn kink_default_cfl(scheme: SchemeKind, degree: usize) -> f64 {
    match (scheme, degree) {
        (SchemeKind::LeapFrog, 1) => 0.2 / kink_speed(),
        (SchemeKind::LeapFrog, 2) => 1.0,
        (SchemeKind::LeapFrog, _) => 2.0,
        (SchemeKind::FullyImplicit, 1) => 5.0,
        (SchemeKind::FullyImplicit, 2) => 10.0,
        (SchemeKind::FullyImplicit, _) => 20.0,
    }
}

/// Tabulated periodic traveling-wave profile `(E, Phi = dE/dxi)`.
#[derive(Debug, Clone)]
pub struct KinkProfile {
    pub xi_grid: Vec<f64>,
    pub e_of_xi: Vec<f64>,
    pub phi_of_xi: Vec<f64>,
    pub v: f64,
    pub period: f64,
    /// `|(E, Phi)(period) - (E, Phi)(0)|`, the measured periodicity defect.
    pub period_defect: f64,
}

fn kink_rhs(params: &ModelParams, v: f64, e: f64, phi: f64) -> Result<[f64; 2]> {
    let w0sq = params.omega0 * params.omega0;
    let wpsq = params.omega_p * params.omega_p;
    let a = params.a;
    let eps = params.eps_inf;
    let den = 1.0 - eps * v * v - 3.0 * a * v * v * e * e;
    if den.abs() < 1e-10 {
        return Err(Error::InvalidParams(format!(
            "traveling-wave denominator vanishes at E = {e}"
        )));
    }
    let num = 6.0 * a * v * v * e * phi * phi + (eps * w0sq + wpsq - w0sq / (v * v)) * e
        + a * w0sq * e * e * e;
    Ok([phi, num / den])
}

/// Nominal initial slope of the periodic orbit. The orbit lies within about
/// 1e-10 of the separatrix of the traveling-wave ODE, so its period is
/// extraordinarily sensitive to this value.
pub const KINK_INITIAL_SLOPE: f64 = 0.24919666777865812;

impl KinkProfile {
    /// Builds the 6-periodic orbit. Because the orbit grazes a saddle point,
    /// integrating a full period amplifies rounding noise by many orders of
    /// magnitude and the endpoint never closes in double precision. Instead
    /// only the first quarter period (up to the turning point at `xi = 3/2`)
    /// is integrated, the initial slope is refined by bisection so that the
    /// turning point lands exactly on `xi = 3/2`, and the remaining three
    /// quarters follow from the odd/even symmetries of the orbit. The result
    /// is periodic by construction.
    pub fn compute() -> Result<Self> {
        let n = KINK_GRID_POINTS;
        let quarter = n / 4;
        let turning = |phi0: f64| -> Result<f64> {
            Ok(Self::integrate(phi0, quarter, KINK_PERIOD / 4.0)?.1[quarter])
        };
        // The refined slope differs from the nominal one by O(1e-13).
        let mut lo = KINK_INITIAL_SLOPE * (1.0 - 1e-10);
        let mut hi = KINK_INITIAL_SLOPE * (1.0 + 1e-10);
        if !(turning(lo)? < 0.0 && turning(hi)? > 0.0) {
            return Err(Error::InvalidParams(
                "turning-point bracket for the periodic orbit failed".into(),
            ));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if turning(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let phi0 = 0.5 * (lo + hi);
        let (eq, pq) = Self::integrate(phi0, quarter, KINK_PERIOD / 4.0)?;

        let dxi = KINK_PERIOD / n as f64;
        let mut e_of_xi = vec![0.0; n + 1];
        let mut phi_of_xi = vec![0.0; n + 1];
        // First quarter as integrated; second mirrored around the turning
        // point; second half is the odd image of the first.
        for i in 0..=quarter {
            e_of_xi[i] = eq[i];
            phi_of_xi[i] = pq[i];
            e_of_xi[2 * quarter - i] = eq[i];
            phi_of_xi[2 * quarter - i] = -pq[i];
        }
        for i in 0..=2 * quarter {
            e_of_xi[i + 2 * quarter] = -e_of_xi[i];
            phi_of_xi[i + 2 * quarter] = -phi_of_xi[i];
        }
        let defect = pq[quarter].abs();
        Ok(Self {
            xi_grid: (0..=n).map(|i| i as f64 * dxi).collect(),
            e_of_xi,
            phi_of_xi,
            v: kink_speed(),
            period: KINK_PERIOD,
            period_defect: defect,
        })
    }

    /// Raw RK3 sweep over `[0, length]`; returns the sampled `(E, Phi)`.
    fn integrate(phi0: f64, n: usize, length: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let params = ModelParams::kink();
        let v = kink_speed();
        let dxi = length / n as f64;
        let mut e_of_xi = Vec::with_capacity(n + 1);
        let mut phi_of_xi = Vec::with_capacity(n + 1);
        let mut u = [0.0, phi0];
        for i in 0..=n {
            e_of_xi.push(u[0]);
            phi_of_xi.push(u[1]);
            if i == n {
                break;
            }
            // Third order strong-stability-preserving Runge-Kutta.
            let k1 = kink_rhs(&params, v, u[0], u[1])?;
            let u1 = [u[0] + dxi * k1[0], u[1] + dxi * k1[1]];
            let k2 = kink_rhs(&params, v, u1[0], u1[1])?;
            let u2 = [
                0.75 * u[0] + 0.25 * (u1[0] + dxi * k2[0]),
                0.75 * u[1] + 0.25 * (u1[1] + dxi * k2[1]),
            ];
            let k3 = kink_rhs(&params, v, u2[0], u2[1])?;
            u = [
                u[0] / 3.0 + 2.0 / 3.0 * (u2[0] + dxi * k3[0]),
                u[1] / 3.0 + 2.0 / 3.0 * (u2[1] + dxi * k3[1]),
            ];
            if !u[0].is_finite() || !u[1].is_finite() {
                return Err(Error::Diverged(i as f64 * dxi));
            }
        }
        Ok((e_of_xi, phi_of_xi))
    }

    /// Direct full-period integration without the symmetry construction;
    /// exposes the endpoint defect, which is large for any slope other than
    /// the periodic one.
    pub fn compute_with_initial(phi0: f64) -> Result<Self> {
        Self::compute_with_resolution(phi0, KINK_GRID_POINTS)
    }

    pub fn compute_with_resolution(phi0: f64, n: usize) -> Result<Self> {
        let dxi = KINK_PERIOD / n as f64;
        let (e_of_xi, phi_of_xi) = Self::integrate(phi0, n, KINK_PERIOD)?;
        let de = e_of_xi[n] - e_of_xi[0];
        let dphi = phi_of_xi[n] - phi_of_xi[0];
        Ok(Self {
            xi_grid: (0..=n).map(|i| i as f64 * dxi).collect(),
            e_of_xi,
            phi_of_xi,
            v: kink_speed(),
            period: KINK_PERIOD,
            period_defect: (de * de + dphi * dphi).sqrt(),
        })
    }

    fn interp(&self, table: &[f64], xi: f64) -> f64 {
        let s = xi.rem_euclid(self.period);
        let n = table.len() - 1;
        let pos = s / self.period * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let frac = pos - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }

    pub fn e(&self, xi: f64) -> f64 {
        self.interp(&self.e_of_xi, xi)
    }

    pub fn phi(&self, xi: f64) -> f64 {
        self.interp(&self.phi_of_xi, xi)
    }
}

/// Projects the traveling-wave fields at `t = 0` onto the DG space.
pub fn kink_initial_state(profile: &KinkProfile, mesh: &Mesh, basis: &Basis) -> SimState {
    let params = ModelParams::kink();
    let v = profile.v;
    let eps = params.eps_inf;
    let a = params.a;
    let mut state = SimState::zeros(mesh.n_elements, basis.modes());
    state.e = project_l2(|x| profile.e(x), mesh, basis);
    state.h = project_l2(|x| -profile.e(x) / v, mesh, basis);
    state.p = project_l2(
        |x| {
            let e = profile.e(x);
            (1.0 / (v * v) - eps) * e - a * e * e * e
        },
        mesh,
        basis,
    );
    state.j = project_l2(
        |x| {
            let e = profile.e(x);
            let phi = profile.phi(x);
            (eps * v - 1.0 / v) * phi + 3.0 * a * v * e * e * phi
        },
        mesh,
        basis,
    );
    state.y = initial_y(&state.e, mesh, basis);
    state.d = constitutive_project(&state.e, &state.p, &state.q, &state.y, &params, basis);
    state
}

/// Evolves one period on `N` elements and returns `(L2, Linf)` errors of E
/// against the traveling-wave reference.
pub fn kink_error(
    profile: &KinkProfile,
    scheme: SchemeKind,
    flux: FluxKind,
    degree: usize,
    n_elements: usize,
    cfl: f64,
) -> Result<(f64, f64)> {
    let params = ModelParams::kink();
    let mesh = Mesh::uniform(0.0, KINK_PERIOD, n_elements)?;
    let basis = Basis::new(degree)?;
    let ctx = StepContext {
        mesh: &mesh,
        basis: &basis,
        params: &params,
        flux,
        boundary: Boundary::Periodic,
        newton: NewtonConfig::default(),
    };
    let t_final = KINK_PERIOD / profile.v;
    let dt_target = cfl * mesh.h.powf((degree as f64 + 1.0) / 2.0);
    let n_steps = (t_final / dt_target).round().max(1.0) as usize;
    let dt = t_final / n_steps as f64;
    let mut state = kink_initial_state(profile, &mesh, &basis);
    for _ in 0..n_steps {
        let (next, _) = step(scheme, &ctx, &state, dt)?;
        state = next;
    }
    Ok(error_norms(&state.e, |x| profile.e(x), &mesh, &basis))
}

/// Refinement study over `n_list` meshes with the tabulated time-step rule.
pub fn run_kink_convergence(
    profile: &KinkProfile,
    scheme: SchemeKind,
    flux: FluxKind,
    degree: usize,
    n_list: &[usize],
    cfl: Option<f64>,
) -> Result<Vec<ConvergenceRow>> {
    let cfl = cfl.unwrap_or_else(|| kink_default_cfl(scheme, degree));
    let mut l2 = Vec::with_capacity(n_list.len());
    let mut linf = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let (e2, einf) = kink_error(profile, scheme, flux, degree, n, cfl)?;
        l2.push(e2);
        linf.push(einf);
    }
    Ok(convergence_table(n_list, &l2, &linf))
}
