//! Dimensionless material parameters, the coupled field state, the
//! constitutive law and the auxiliary cubic variable update.
//!
//! The model couples Maxwell's equations to a linear Lorentz oscillator
//! (P, J), a Raman oscillator (Q, sigma) and an instantaneous Kerr term:
//!   dH/dt = dE/dx,  dD/dt = dH/dx,
//!   dP/dt = J,      dJ/dt = -(1/tau) J - omega0^2 P + omega_p^2 E,
//!   dQ/dt = sigma,  dsigma/dt = -(1/tau_v) sigma - omega_v^2 Q + omega_v^2 E^2,
//!   D = eps_inf E + a (1 - theta) E^3 + P + a theta Q E,
//! in units where the vacuum permittivity and permeability are 1.

use crate::basis::Basis;
use crate::field::DgField;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Dimensionless material constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eps_inf: f64,
    pub eps_s: f64,
    /// Kerr/Raman strength.
    pub a: f64,
    /// Fraction of the cubic response that is delayed (Raman), in `[0, 1]`.
    pub theta: f64,
    pub omega0: f64,
    pub omega_p: f64,
    pub omega_v: f64,
    pub inv_tau: f64,
    pub inv_tau_v: f64,
}

impl ModelParams {
    /// Builds parameters with `omega_p = omega0 sqrt(eps_s - eps_inf)` and
    /// validates ranges.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eps_inf: f64,
        eps_s: f64,
        a: f64,
        theta: f64,
        omega0: f64,
        omega_v: f64,
        inv_tau: f64,
        inv_tau_v: f64,
    ) -> Result<Self> {
        if !(eps_inf > 0.0) {
            return Err(Error::InvalidParams(format!("eps_inf = {eps_inf} must be positive")));
        }
        if eps_s < eps_inf {
            return Err(Error::InvalidParams(format!(
                "eps_s = {eps_s} must be >= eps_inf = {eps_inf}"
            )));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParams(format!("theta = {theta} outside [0, 1]")));
        }
        if a < 0.0 || inv_tau < 0.0 || inv_tau_v < 0.0 {
            return Err(Error::InvalidParams(
                "a, 1/tau and 1/tau_v must be non-negative".into(),
            ));
        }
        let omega_p = omega0 * (eps_s - eps_inf).sqrt();
        Ok(Self { eps_inf, eps_s, a, theta, omega0, omega_p, omega_v, inv_tau, inv_tau_v })
    }

    /// Parameters of the traveling kink/antikink benchmark: undamped Lorentz
    /// plus instantaneous Kerr, no Raman response.
    pub fn kink() -> Self {
        Self::new(2.25, 5.25, 2.25 / 3.0, 0.0, 93.627179982222216, 0.0, 0.0, 0.0).unwrap()
    }

    /// Parameters of the soliton propagation benchmark.
    pub fn soliton() -> Self {
        Self::new(2.25, 5.25, 0.07, 0.3, 5.84, 1.28, 1.168e-5, 29.2 / 32.0).unwrap()
    }

    /// The discrete energies are provably non-negative only for
    /// `theta in [0, 3/4]`.
    pub fn energy_positivity_guard(&self) -> bool {
        self.theta <= 0.75
    }
}

/// The eight coupled DG fields at one time level.
///
/// `h` always holds H at `t^n`. For the staggered scheme `h_half_prev`
/// additionally holds H at `t^{n-1/2}`; it is consumed only by the energy
/// diagnostics, never by the stepper itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub e: DgField,
    pub d: DgField,
    pub h: DgField,
    pub p: DgField,
    pub j: DgField,
    pub q: DgField,
    pub sigma: DgField,
    pub y: DgField,
    pub h_half_prev: Option<DgField>,
    pub time: f64,
}

impl SimState {
    pub fn zeros(n_elements: usize, modes: usize) -> Self {
        let z = || DgField::zeros(n_elements, modes);
        Self {
            e: z(),
            d: z(),
            h: z(),
            p: z(),
            j: z(),
            q: z(),
            sigma: z(),
            y: z(),
            h_half_prev: None,
            time: 0.0,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.e.n_elements()
    }

    pub fn modes(&self) -> usize {
        self.e.modes()
    }

    pub fn is_finite(&self) -> bool {
        let ok = |f: &DgField| f.coeffs().iter().all(|c| c.is_finite());
        ok(&self.e)
            && ok(&self.d)
            && ok(&self.h)
            && ok(&self.p)
            && ok(&self.j)
            && ok(&self.q)
            && ok(&self.sigma)
            && ok(&self.y)
    }
}

/// Discrete constitutive law:
/// `D = pi_h[eps_inf E + a (1 - theta) Y + P + a theta Q E]`.
pub fn constitutive_project(
    e: &DgField,
    p: &DgField,
    q: &DgField,
    y: &DgField,
    params: &ModelParams,
    basis: &Basis,
) -> DgField {
    let n = e.n_elements();
    let modes = e.modes();
    let mut d = DgField::zeros(n, modes);
    for j in 0..n {
        let ev = e.at_quad(basis, j);
        let qv = q.at_quad(basis, j);
        let dj = d.element_mut(j);
        for qp in 0..basis.n_quad() {
            let nonlinear = params.a * params.theta * qv[qp] * ev[qp];
            let w = basis.quad_weights[qp] * nonlinear;
            for i in 0..modes {
                dj[i] += w * basis.basis_values[qp][i];
            }
        }
        // The linear terms already lie in the polynomial space.
        let ej = e.element(j);
        let pj = p.element(j);
        let yj = y.element(j);
        for i in 0..modes {
            dj[i] += params.eps_inf * ej[i] + params.a * (1.0 - params.theta) * yj[i] + pj[i];
        }
    }
    d
}

/// Auxiliary cubic variable update:
/// `Y1 = pi_h[Y0 + (3/2)(E1^2 + E0^2)(E1 - E0)]`.
///
/// The increment is the discrete analogue of `dY = 3 E^2 dE`, chosen so that
/// multiplying by `E1 + E0` telescopes into the difference of `E^4`.
pub fn aux_y_update(y_n: &DgField, e_n: &DgField, e_np1: &DgField, basis: &Basis) -> DgField {
    let n = y_n.n_elements();
    let modes = y_n.modes();
    let mut out = y_n.clone();
    for j in 0..n {
        let e0 = e_n.at_quad(basis, j);
        let e1 = e_np1.at_quad(basis, j);
        let oj = out.element_mut(j);
        for qp in 0..basis.n_quad() {
            let inc = 1.5 * (e1[qp] * e1[qp] + e0[qp] * e0[qp]) * (e1[qp] - e0[qp]);
            let w = basis.quad_weights[qp] * inc;
            for i in 0..modes {
                oj[i] += w * basis.basis_values[qp][i];
            }
        }
    }
    out
}

/// Integral of every energy term except the magnetic one:
/// `(eps_inf/2) E^2 + (1/(2 wp^2)) J^2 + (w0^2/(2 wp^2)) P^2
///  + (a theta/(4 wv^2)) sigma^2 + (a theta/2) Q E^2
///  + (3 a (1-theta)/4) E^4 + (a theta/4) Q^2`.
///
/// Terms with a vanishing frequency in the denominator are admitted only when
/// the corresponding field is identically zero.
pub fn material_energy(
    e: &DgField,
    p: &DgField,
    j_field: &DgField,
    q: &DgField,
    sigma: &DgField,
    params: &ModelParams,
    mesh: &Mesh,
    basis: &Basis,
) -> Result<f64> {
    let wp2 = params.omega_p * params.omega_p;
    let wv2 = params.omega_v * params.omega_v;
    let a_theta = params.a * params.theta;
    let zero = |f: &DgField| f.coeffs().iter().all(|&c| c == 0.0);
    if wp2 == 0.0 && !(zero(p) && zero(j_field)) {
        return Err(Error::InvalidParams(
            "omega_p = 0 with nonzero P or J: Lorentz energy undefined".into(),
        ));
    }
    if a_theta > 0.0 && wv2 == 0.0 && !zero(sigma) {
        return Err(Error::InvalidParams(
            "omega_v = 0 with nonzero sigma: Raman energy undefined".into(),
        ));
    }
    let mut total = 0.0;
    for jel in 0..mesh.n_elements {
        let ev = e.at_quad(basis, jel);
        let pv = p.at_quad(basis, jel);
        let jv = j_field.at_quad(basis, jel);
        let qv = q.at_quad(basis, jel);
        let sv = sigma.at_quad(basis, jel);
        let mut cell = 0.0;
        for qp in 0..basis.n_quad() {
            let e2 = ev[qp] * ev[qp];
            let mut density = 0.5 * params.eps_inf * e2
                + 0.75 * params.a * (1.0 - params.theta) * e2 * e2
                + a_theta * (0.5 * qv[qp] * e2 + 0.25 * qv[qp] * qv[qp]);
            if wp2 > 0.0 {
                density += 0.5 * jv[qp] * jv[qp] / wp2
                    + 0.5 * params.omega0 * params.omega0 * pv[qp] * pv[qp] / wp2;
            }
            if a_theta > 0.0 && wv2 > 0.0 {
                density += 0.25 * a_theta * sv[qp] * sv[qp] / wv2;
            }
            cell += basis.quad_weights[qp] * density;
        }
        total += 0.5 * mesh.h * cell;
    }
    Ok(total)
}

/// Energy of a time-collocated state: `(1/2) int H^2` plus the material terms.
pub fn continuous_energy(
    state: &SimState,
    params: &ModelParams,
    mesh: &Mesh,
    basis: &Basis,
) -> Result<f64> {
    let hn = state.h.l2_norm(mesh);
    Ok(0.5 * hn * hn
        + material_energy(
            &state.e,
            &state.p,
            &state.j,
            &state.q,
            &state.sigma,
            params,
            mesh,
            basis,
        )?)
}

/// Projects `E^3` onto the polynomial space; the consistent initialization
/// of the auxiliary variable.
pub fn initial_y(e: &DgField, mesh: &Mesh, basis: &Basis) -> DgField {
    let n = e.n_elements();
    let modes = e.modes();
    let mut y = DgField::zeros(n, modes);
    for j in 0..n {
        let ev = e.at_quad(basis, j);
        let yj = y.element_mut(j);
        for qp in 0..basis.n_quad() {
            let w = basis.quad_weights[qp] * ev[qp].powi(3);
            for i in 0..modes {
                yj[i] += w * basis.basis_values[qp][i];
            }
        }
    }
    let _ = mesh;
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::project_l2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Mesh, Basis) {
        (Mesh::uniform(0.0, 6.0, 8).unwrap(), Basis::new(2).unwrap())
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize, modes: usize, scale: f64) -> DgField {
        let coeffs = (0..n * modes).map(|_| rng.gen_range(-scale..scale)).collect();
        DgField::from_coeffs(n, modes, coeffs)
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 3.0, 0.1, 1.5, 1.0, 1.0, 0.0, 0.0).is_err());
        let p = ModelParams::new(2.25, 5.25, 0.07, 0.3, 5.84, 1.28, 0.0, 0.0).unwrap();
        let expect = 5.84 * 3.0f64.sqrt();
        assert!((p.omega_p - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn preset_relations() {
        let k = ModelParams::kink();
        assert!((k.omega_p - k.omega0 * 3.0f64.sqrt()).abs() < 1e-9);
        assert!((k.a - 0.75).abs() < 1e-15);
        assert_eq!(k.theta, 0.0);
        let s = ModelParams::soliton();
        assert!(s.energy_positivity_guard());
        assert!((s.inv_tau_v - 0.9125).abs() < 1e-15);
    }

    #[test]
    fn constitutive_zero_and_linear() {
        let (_, basis) = setup();
        let z = DgField::zeros(8, 3);
        let params = ModelParams::soliton();
        let d = constitutive_project(&z, &z, &z, &z, &params, &basis);
        assert!(d.coeffs().iter().all(|&c| c == 0.0));

        // a = 0: D = eps_inf E + P with no quadrature error.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = random_field(&mut rng, 8, 3, 1.0);
        let p = random_field(&mut rng, 8, 3, 1.0);
        let params0 = ModelParams::new(2.25, 5.25, 0.0, 0.3, 5.84, 1.28, 0.0, 0.0).unwrap();
        let d = constitutive_project(&e, &p, &z, &z, &params0, &basis);
        for (i, &c) in d.coeffs().iter().enumerate() {
            let expect = 2.25 * e.coeffs()[i] + p.coeffs()[i];
            assert!((c - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn constitutive_constant_fields() {
        // E = 1, Q = 2, Y = 1, P = 0: D = 2.25 + 0.07*0.7 + 0.07*0.3*2 = 2.341.
        let (mesh, basis) = setup();
        let params = ModelParams::soliton();
        let e = project_l2(|_| 1.0, &mesh, &basis);
        let q = project_l2(|_| 2.0, &mesh, &basis);
        let y = project_l2(|_| 1.0, &mesh, &basis);
        let p = DgField::zeros(8, 3);
        let d = constitutive_project(&e, &p, &q, &y, &params, &basis);
        for j in 0..8 {
            assert!((d.eval(&mesh, &basis, j, 0.2) - 2.341).abs() < 1e-13);
        }
    }

    #[test]
    fn aux_y_fixed_point_and_constant() {
        let (mesh, basis) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_field(&mut rng, 8, 3, 0.5);
        let y = random_field(&mut rng, 8, 3, 0.5);
        let y1 = aux_y_update(&y, &e, &e, &basis);
        for (a, b) in y1.coeffs().iter().zip(y.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }

        // E: 0 -> 1 from Y = 0 gives Y = 3/2.
        let z = DgField::zeros(8, 3);
        let one = project_l2(|_| 1.0, &mesh, &basis);
        let y1 = aux_y_update(&z, &z, &one, &basis);
        for j in 0..8 {
            assert!((y1.eval(&mesh, &basis, j, -0.4) - 1.5).abs() < 1e-13);
        }
    }

    #[test]
    fn aux_y_telescopes_over_closed_loop() {
        let (_, basis) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e0 = random_field(&mut rng, 8, 3, 0.8);
        let e1 = random_field(&mut rng, 8, 3, 0.8);
        let y0 = random_field(&mut rng, 8, 3, 0.8);
        let y1 = aux_y_update(&y0, &e0, &e1, &basis);
        let y2 = aux_y_update(&y1, &e1, &e0, &basis);
        for (a, b) in y2.coeffs().iter().zip(y0.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_zero_state() {
        let (mesh, basis) = setup();
        let state = SimState::zeros(8, 3);
        let e = continuous_energy(&state, &ModelParams::soliton(), &mesh, &basis).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_constant_e() {
        // E = 1 on [0, 6]: 6 (1.125 + 0.75 * 0.07 * 0.7) = 6.9705.
        let (mesh, basis) = setup();
        let mut state = SimState::zeros(8, 3);
        state.e = project_l2(|_| 1.0, &mesh, &basis);
        let e = continuous_energy(&state, &ModelParams::soliton(), &mesh, &basis).unwrap();
        assert!((e - 6.9705).abs() < 1e-12, "energy = {e}");
    }

    #[test]
    fn energy_guard_omega_p_zero() {
        let (mesh, basis) = setup();
        let params = ModelParams::new(2.25, 2.25, 0.07, 0.3, 5.84, 1.28, 0.0, 0.0).unwrap();
        assert_eq!(params.omega_p, 0.0);
        let mut state = SimState::zeros(8, 3);
        state.p = project_l2(|_| 1.0, &mesh, &basis);
        assert!(continuous_energy(&state, &params, &mesh, &basis).is_err());
        state.p = DgField::zeros(8, 3);
        assert!(continuous_energy(&state, &params, &mesh, &basis).is_ok());
    }

    #[test]
    fn energy_theta_boundary_cancellation() {
        // At theta = 3/4 the (Q, E^2) block is (3a/16)(Q + E^2)^2; with
        // Q = -E^2 pointwise the three cubic-response terms cancel exactly.
        let (mesh, basis) = setup();
        let params = ModelParams::new(2.25, 5.25, 0.07, 0.75, 5.84, 1.28, 0.0, 0.0).unwrap();
        // The quadratic form [[atheta/4, atheta/4], [atheta/4, 3a(1-theta)/4]]
        // in (Q, E^2) is singular but non-negative at the boundary.
        let atheta = params.a * params.theta;
        let det = atheta / 4.0 * 0.75 * params.a * (1.0 - params.theta) - (atheta / 4.0).powi(2);
        assert!(det.abs() < 1e-15 && atheta > 0.0);

        let e = |x: f64| (x * 0.9).sin();
        let mut state = SimState::zeros(8, 3);
        state.e = project_l2(e, &mesh, &basis);
        // Evaluate the cubic-response terms with Q = -E^2 at quadrature points.
        for j in 0..8 {
            for qp in 0..basis.n_quad() {
                let x = mesh.to_physical(j, basis.quad_nodes[qp]);
                let e2 = e(x) * e(x);
                let q = -e2;
                let cubic = 0.5 * atheta * q * e2
                    + 0.75 * params.a * (1.0 - params.theta) * e2 * e2
                    + 0.25 * atheta * q * q;
                assert!(cubic.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn energy_positive_for_random_states() {
        let (mesh, basis) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for theta in [0.0, 0.3, 0.75] {
            let params = ModelParams::new(2.25, 5.25, 0.07, theta, 5.84, 1.28, 0.0, 0.0).unwrap();
            for _ in 0..50 {
                let mut state = SimState::zeros(8, 3);
                state.e = random_field(&mut rng, 8, 3, 2.0);
                state.h = random_field(&mut rng, 8, 3, 2.0);
                state.p = random_field(&mut rng, 8, 3, 2.0);
                state.j = random_field(&mut rng, 8, 3, 2.0);
                state.q = random_field(&mut rng, 8, 3, 2.0);
                state.sigma = random_field(&mut rng, 8, 3, 2.0);
                let en = continuous_energy(&state, &params, &mesh, &basis).unwrap();
                assert!(en >= -1e-12, "theta = {theta}: energy = {en}");
            }
        }
    }

    #[test]
    fn initial_y_matches_cube_of_linear() {
        // For k >= 3 the cube of a linear E lies in the space.
        let mesh = Mesh::uniform(0.0, 1.0, 4).unwrap();
        let basis = Basis::new(3).unwrap();
        let e = project_l2(|x| 0.5 * x - 0.2, &mesh, &basis);
        let y = initial_y(&e, &mesh, &basis);
        for j in 0..4 {
            for &xi in &[-1.0, -0.3, 0.6, 1.0] {
                let x = mesh.to_physical(j, xi);
                let expect = (0.5 * x - 0.2).powi(3);
                assert!((y.eval(&mesh, &basis, j, xi) - expect).abs() < 1e-13);
            }
        }
    }
}
