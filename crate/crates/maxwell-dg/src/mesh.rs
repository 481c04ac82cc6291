use crate::{Error, Result};

/// Uniform 1D mesh on `[x_left, x_right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub x_left: f64,
    pub x_right: f64,
    pub n_elements: usize,
    pub element_edges: Vec<f64>,
    /// Element width.
    pub h: f64,
}

impl Mesh {
    pub fn uniform(x_left: f64, x_right: f64, n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one element".into()));
        }
        if !(x_right > x_left) {
            return Err(Error::InvalidArgument(format!(
                "invalid interval [{x_left}, {x_right}]"
            )));
        }
        let h = (x_right - x_left) / n_elements as f64;
        let mut element_edges: Vec<f64> = (0..=n_elements)
            .map(|i| x_left + i as f64 * h)
            .collect();
        // Pin the endpoints exactly.
        element_edges[0] = x_left;
        element_edges[n_elements] = x_right;
        Ok(Self { x_left, x_right, n_elements, element_edges, h })
    }

    pub fn center(&self, j: usize) -> f64 {
        0.5 * (self.element_edges[j] + self.element_edges[j + 1])
    }

    /// Physical coordinate of reference point `xi in [-1, 1]` inside element `j`.
    pub fn to_physical(&self, j: usize, xi: f64) -> f64 {
        self.center(j) + 0.5 * self.h * xi
    }

    /// Element index containing `x` (clamped to the domain).
    pub fn locate(&self, x: f64) -> usize {
        let t = (x - self.x_left) / self.h;
        (t.floor() as isize).clamp(0, self.n_elements as isize - 1) as usize
    }
}
