//! Piecewise polynomial fields stored as modal coefficients.

use std::ops::{Index, IndexMut};

use crate::basis::Basis;
use crate::mesh::Mesh;

/// Modal coefficients of one scalar field, row-major `n_elements x modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgField {
    n_elements: usize,
    modes: usize,
    coeffs: Vec<f64>,
}

impl DgField {
    pub fn zeros(n_elements: usize, modes: usize) -> Self {
        Self { n_elements, modes, coeffs: vec![0.0; n_elements * modes] }
    }

    pub fn from_coeffs(n_elements: usize, modes: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), n_elements * modes);
        Self { n_elements, modes, coeffs }
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn element(&self, j: usize) -> &[f64] {
        &self.coeffs[j * self.modes..(j + 1) * self.modes]
    }

    pub fn element_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.coeffs[j * self.modes..(j + 1) * self.modes]
    }

    /// Value at reference point `xi` inside element `j`.
    pub fn eval(&self, _mesh: &Mesh, _basis: &Basis, j: usize, xi: f64) -> f64 {
        let mut v = 0.0;
        for i in 0..self.modes {
            v += self[(j, i)] * crate::basis::phi(i, xi);
        }
        v
    }

    /// Values at the quadrature nodes of element `j`.
    pub fn at_quad(&self, basis: &Basis, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; basis.n_quad()];
        let c = self.element(j);
        for q in 0..basis.n_quad() {
            let row = &basis.basis_values[q];
            let mut v = 0.0;
            for i in 0..self.modes {
                v += c[i] * row[i];
            }
            out[q] = v;
        }
        out
    }

    /// Trace at the left endpoint of element `j`.
    pub fn trace_left(&self, basis: &Basis, j: usize) -> f64 {
        let c = self.element(j);
        c.iter().zip(&basis.at_left).map(|(a, b)| a * b).sum()
    }

    /// Trace at the right endpoint of element `j`.
    pub fn trace_right(&self, basis: &Basis, j: usize) -> f64 {
        let c = self.element(j);
        c.iter().zip(&basis.at_right).map(|(a, b)| a * b).sum()
    }

    /// Broken L2 norm: `sqrt(sum_j (h/2) sum_i c_{j,i}^2)`.
    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c * c).sum();
        (0.5 * mesh.h * s).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &DgField) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for c in &mut self.coeffs {
            *c *= alpha;
        }
    }

    pub fn linear_combination(a: f64, x: &DgField, b: f64, y: &DgField) -> DgField {
        let mut out = x.clone();
        out.scale(a);
        out.axpy(b, y);
        out
    }
}

impl Index<(usize, usize)> for DgField {
    type Output = f64;
    fn index(&self, (j, i): (usize, usize)) -> &f64 {
        &self.coeffs[j * self.modes + i]
    }
}

impl IndexMut<(usize, usize)> for DgField {
    fn index_mut(&mut self, (j, i): (usize, usize)) -> &mut f64 {
        &mut self.coeffs[j * self.modes + i]
    }
}
