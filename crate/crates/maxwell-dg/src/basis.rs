//! Legendre modal basis on the reference element `[-1, 1]`, Gauss quadrature,
//! L2 and Gauss-Radau projections, and the per-element operator matrices.

use crate::field::DgField;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`, exact for polynomials of degree `2n - 1`.
pub fn gauss_quadrature(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidArgument("quadrature needs n >= 1 points".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on P_n, symmetric pairs.
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = x;
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// L2-orthonormal Legendre mode `phi_i(xi) = sqrt((2i+1)/2) P_i(xi)`.
pub fn phi(i: usize, xi: f64) -> f64 {
    let scale = ((2 * i + 1) as f64 / 2.0).sqrt();
    if i == 0 {
        return scale;
    }
    let mut p0 = 1.0;
    let mut p1 = xi;
    for m in 2..=i {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * xi * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    scale * p1
}

fn phi_deriv(i: usize, xi: f64) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let scale = ((2 * i + 1) as f64 / 2.0).sqrt();
    if xi.abs() < 1.0 - 1e-12 {
        let (p, d) = legendre_with_deriv(i, xi);
        let _ = p;
        scale * d
    } else {
        // P_n'(+-1) = (+-1)^(n-1) n(n+1)/2
        let sign = if xi > 0.0 { 1.0 } else { (-1.0f64).powi(i as i32 - 1) };
        scale * sign * (i * (i + 1)) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadauSide {
    /// Matches the trace at the right element endpoint.
    Minus,
    /// Matches the trace at the left element endpoint.
    Plus,
}

/// Modal basis of degree `k` with quadrature and element operator matrices.
///
/// The basis is orthonormal on the reference element, so the element mass
/// matrix is `(h/2) I` and projections reduce to quadrature sums.
#[derive(Debug, Clone)]
pub struct Basis {
    pub degree: usize,
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `values[q][i] = phi_i(quad_nodes[q])`.
    pub basis_values: Vec<Vec<f64>>,
    /// `derivs[q][i] = phi_i'(quad_nodes[q])`.
    pub basis_derivs: Vec<Vec<f64>>,
    /// `stiffness[i][m] = integral of phi_m phi_i' over [-1, 1]`.
    pub stiffness: Vec<Vec<f64>>,
    /// `phi_i(-1)`.
    pub at_left: Vec<f64>,
    /// `phi_i(+1)`.
    pub at_right: Vec<f64>,
}

impl Basis {
    /// Basis with the default over-integrated rule of `2(k+1)` points,
    /// exact through degree `4k + 3` (covers the cubic Kerr integrands).
    pub fn new(degree: usize) -> Result<Self> {
        Self::with_quadrature(degree, 2 * (degree + 1))
    }

    pub fn with_quadrature(degree: usize, n_quad: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument(
                "degree k = 0 is unsupported (Gauss-Radau projection undefined)".into(),
            ));
        }
        let (quad_nodes, quad_weights) = gauss_quadrature(n_quad)?;
        let modes = degree + 1;
        let basis_values: Vec<Vec<f64>> = quad_nodes
            .iter()
            .map(|&x| (0..modes).map(|i| phi(i, x)).collect())
            .collect();
        let basis_derivs: Vec<Vec<f64>> = quad_nodes
            .iter()
            .map(|&x| (0..modes).map(|i| phi_deriv(i, x)).collect())
            .collect();
        let mut stiffness = vec![vec![0.0; modes]; modes];
        for i in 0..modes {
            for m in 0..modes {
                let mut s = 0.0;
                for q in 0..n_quad {
                    s += quad_weights[q] * basis_values[q][m] * basis_derivs[q][i];
                }
                stiffness[i][m] = s;
            }
        }
        let at_left: Vec<f64> = (0..modes).map(|i| phi(i, -1.0)).collect();
        let at_right: Vec<f64> = (0..modes).map(|i| phi(i, 1.0)).collect();
        Ok(Self {
            degree,
            quad_nodes,
            quad_weights,
            basis_values,
            basis_derivs,
            stiffness,
            at_left,
            at_right,
        })
    }

    pub fn modes(&self) -> usize {
        self.degree + 1
    }

    pub fn n_quad(&self) -> usize {
        self.quad_nodes.len()
    }
}

/// L2 projection of `f` onto the broken polynomial space.
pub fn project_l2<F: Fn(f64) -> f64>(f: F, mesh: &Mesh, basis: &Basis) -> DgField {
    let modes = basis.modes();
    let mut field = DgField::zeros(mesh.n_elements, modes);
    for j in 0..mesh.n_elements {
        for q in 0..basis.n_quad() {
            let x = mesh.to_physical(j, basis.quad_nodes[q]);
            let wf = basis.quad_weights[q] * f(x);
            for i in 0..modes {
                field[(j, i)] += wf * basis.basis_values[q][i];
            }
        }
    }
    field
}

/// Gauss-Radau projection: moments against degree `k-1` match `f`, and the
/// trace at one element endpoint is matched exactly (right for `Minus`,
/// left for `Plus`).
pub fn project_gauss_radau<F: Fn(f64) -> f64>(
    f: F,
    mesh: &Mesh,
    basis: &Basis,
    side: RadauSide,
) -> Result<DgField> {
    let modes = basis.modes();
    let k = basis.degree;
    let l2 = project_l2(&f, mesh, basis);
    let mut field = DgField::zeros(mesh.n_elements, modes);
    for j in 0..mesh.n_elements {
        for i in 0..k {
            field[(j, i)] = l2[(j, i)];
        }
        // Endpoint condition fixes the top mode.
        let (endpoint, traces) = match side {
            RadauSide::Minus => (mesh.element_edges[j + 1], &basis.at_right),
            RadauSide::Plus => (mesh.element_edges[j], &basis.at_left),
        };
        let mut partial = 0.0;
        for i in 0..k {
            partial += field[(j, i)] * traces[i];
        }
        field[(j, k)] = (f(endpoint) - partial) / traces[k];
    }
    Ok(field)
}

/// Element operator matrices on the reference element: the mass matrix is the
/// identity, `stiffness[i][m] = integral phi_m phi_i'`, and the lift vectors
/// hold the endpoint values `phi_i(-1)`, `phi_i(+1)`.
pub fn element_operators(basis: &Basis) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let modes = basis.modes();
    let mut mass = vec![vec![0.0; modes]; modes];
    for i in 0..modes {
        mass[i][i] = 1.0;
    }
    (mass, basis.stiffness.clone(), basis.at_left.clone(), basis.at_right.clone())
}
