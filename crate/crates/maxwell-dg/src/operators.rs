//! The discrete weak curl: volume stiffness action plus interface lift of
//! the numerical flux values.

use crate::basis::Basis;
use crate::field::DgField;
use crate::mesh::Mesh;

/// Modal rate of change produced by the weak form of `d/dx` with flux values
/// `g` at the `N + 1` interfaces:
///
/// `r_{j,i} = (2/h) [ g_{j+1} phi_i(1) - g_j phi_i(-1) - sum_m K_{im} u_{j,m} ]`
///
/// where `K_{im} = integral phi_m phi_i'` on the reference element. Applied
/// with `u = E, g = E_hat` it advances H; with `u = H, g = H_tilde` it
/// advances D.
pub fn weak_curl(u: &DgField, flux: &[f64], mesh: &Mesh, basis: &Basis) -> DgField {
    let n = u.n_elements();
    let modes = u.modes();
    debug_assert_eq!(flux.len(), n + 1);
    let scale = 2.0 / mesh.h;
    let mut r = DgField::zeros(n, modes);
    for j in 0..n {
        let uj = u.element(j);
        let rj = r.element_mut(j);
        for i in 0..modes {
            let mut s = flux[j + 1] * basis.at_right[i] - flux[j] * basis.at_left[i];
            let row = &basis.stiffness[i];
            for m in 0..modes {
                s -= row[m] * uj[m];
            }
            rj[i] = scale * s;
        }
    }
    r
}

/// Cell averages of a rate field; their sum telescopes to zero for periodic
/// fluxes.
pub fn cell_average_sum(r: &DgField, basis: &Basis) -> f64 {
    // Mode 0 is the constant sqrt(1/2); the average over the reference
    // element is c_0 * phi_0 = c_0 / sqrt(2).
    let phi0 = basis.at_left[0];
    (0..r.n_elements()).map(|j| r[(j, 0)] * phi0).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::project_l2;
    use crate::flux::{e_hat, FluxKind, TraceSet};

    #[test]
    fn constant_field_periodic_zero() {
        let mesh = Mesh::uniform(0.0, 2.0, 4).unwrap();
        let basis = Basis::new(2).unwrap();
        let f = project_l2(|_| 3.3, &mesh, &basis);
        let tr = TraceSet::periodic(&f, &basis);
        for kind in FluxKind::ALL {
            let flux = e_hat(&tr, &tr, kind, 2.25);
            let r = weak_curl(&f, &flux, &mesh, &basis);
            assert!(r.coeffs().iter().all(|&c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn derivative_of_smooth_field() {
        // Away from the periodic wrap the weak curl of a projected smooth
        // function approximates its derivative.
        let mesh = Mesh::uniform(0.0, 2.0, 32).unwrap();
        let basis = Basis::new(2).unwrap();
        let f = project_l2(|x| (std::f64::consts::PI * x).sin(), &mesh, &basis);
        let tr = TraceSet::periodic(&f, &basis);
        let flux = e_hat(&tr, &tr, FluxKind::Central, 1.0);
        let r = weak_curl(&f, &flux, &mesh, &basis);
        for j in [4, 15, 27] {
            let x = mesh.center(j);
            let expect = std::f64::consts::PI * (std::f64::consts::PI * x).cos();
            let got = r.eval(&mesh, &basis, j, 0.0);
            assert!((got - expect).abs() < 1e-2, "element {j}: {got} vs {expect}");
        }
    }

    #[test]
    fn two_element_linear_oracle() {
        // E = x on [0, 2], two elements, periodic wrap, central flux. The
        // interior flux at x = 1 is exact; the wrap interface averages the
        // traces 0 and 2 to 1. Hand-assemble the k = 1 residual for element 0:
        //   r_i = (2/h)[ghat_1 phi_i(1) - ghat_0 phi_i(-1) - sum_m K_im c_m]
        // with h = 1, c = (0.5 sqrt(2), 1/(2 sqrt(6)) * 2) from projecting x.
        let mesh = Mesh::uniform(0.0, 2.0, 2).unwrap();
        let basis = Basis::new(1).unwrap();
        let f = project_l2(|x| x, &mesh, &basis);
        let tr = TraceSet::periodic(&f, &basis);
        let flux = e_hat(&tr, &tr, FluxKind::Central, 1.0);
        assert!((flux[1] - 1.0).abs() < 1e-13);
        assert!((flux[0] - 1.0).abs() < 1e-13);
        let r = weak_curl(&f, &flux, &mesh, &basis);
        // Element 0 holds x on [0, 1]: c_0 = 0.5 sqrt(2), c_1 = 1/sqrt(6).
        let c0 = 0.5 * 2.0f64.sqrt();
        let c1 = 1.0 / 6.0f64.sqrt();
        assert!((f[(0, 0)] - c0).abs() < 1e-13);
        assert!((f[(0, 1)] - c1).abs() < 1e-13);
        let phi0 = (0.5f64).sqrt();
        let phi1 = (1.5f64).sqrt();
        // i = 0: K row is zero.
        let r0 = 2.0 * (1.0 * phi0 - 1.0 * phi0);
        // i = 1: K_{10} = sqrt(3).
        let r1 = 2.0 * (1.0 * phi1 - 1.0 * (-phi1) - 3.0f64.sqrt() * c0);
        assert!((r[(0, 0)] - r0).abs() < 1e-12);
        assert!((r[(0, 1)] - r1).abs() < 1e-12);
    }

    #[test]
    fn periodic_conservation() {
        let mesh = Mesh::uniform(0.0, 2.0, 8).unwrap();
        let basis = Basis::new(3).unwrap();
        let f = project_l2(|x| (x * 2.1).cos() + 0.3 * x, &mesh, &basis);
        let tr = TraceSet::periodic(&f, &basis);
        for kind in FluxKind::ALL {
            let flux = e_hat(&tr, &tr, kind, 2.25);
            let r = weak_curl(&f, &flux, &mesh, &basis);
            assert!(cell_average_sum(&r, &basis).abs() < 1e-11, "{kind:?}");
        }
    }
}
