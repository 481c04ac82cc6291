//! Numerical fluxes at element interfaces, including the absorbing-wall and
//! inflow variants used by the soliton experiment.

use crate::basis::Basis;
use crate::field::DgField;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    Central,
    /// `(E_hat, H_tilde) = (E_plus, H_minus)`.
    AlternatingI,
    /// `(E_hat, H_tilde) = (E_minus, H_plus)`.
    AlternatingII,
    Upwind,
}

impl FluxKind {
    pub const ALL: [FluxKind; 4] =
        [FluxKind::Central, FluxKind::AlternatingI, FluxKind::AlternatingII, FluxKind::Upwind];

    pub fn is_conservative(self) -> bool {
        self != FluxKind::Upwind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    /// Prescribed inflow at the left wall, absorbing wall at the right.
    SolitonIO,
}

/// Traces of one scalar field at all `N + 1` interfaces: `minus[i]` is the
/// limit from the left of interface `i`, `plus[i]` from the right.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

impl TraceSet {
    pub fn n_interfaces(&self) -> usize {
        self.minus.len()
    }

    pub fn jump(&self, i: usize) -> f64 {
        self.plus[i] - self.minus[i]
    }

    pub fn average(&self, i: usize) -> f64 {
        0.5 * (self.plus[i] + self.minus[i])
    }

    /// Periodic assembly: the exterior trace at each wall wraps around.
    pub fn periodic(field: &DgField, basis: &Basis) -> Self {
        let n = field.n_elements();
        let mut minus = vec![0.0; n + 1];
        let mut plus = vec![0.0; n + 1];
        for j in 0..n {
            minus[j + 1] = field.trace_right(basis, j);
            plus[j] = field.trace_left(basis, j);
        }
        minus[0] = minus[n];
        plus[n] = plus[0];
        Self { minus, plus }
    }

    /// Non-periodic assembly: the exterior trace at the left wall is the
    /// supplied driver value; the exterior trace at the right wall is unused
    /// by the absorbing formulas and mirrors the interior value.
    pub fn with_left_exterior(field: &DgField, basis: &Basis, left_exterior: f64) -> Self {
        let n = field.n_elements();
        let mut minus = vec![0.0; n + 1];
        let mut plus = vec![0.0; n + 1];
        for j in 0..n {
            minus[j + 1] = field.trace_right(basis, j);
            plus[j] = field.trace_left(basis, j);
        }
        minus[0] = left_exterior;
        plus[n] = minus[n];
        Self { minus, plus }
    }
}

/// `E_hat` at every interface. For the upwind flux the jump of the H-role
/// trace set enters; `h_for_jump` is ignored otherwise.
pub fn e_hat(
    e: &TraceSet,
    h_for_jump: &TraceSet,
    kind: FluxKind,
    eps_inf: f64,
) -> Vec<f64> {
    let n = e.n_interfaces();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = match kind {
            FluxKind::Central => e.average(i),
            FluxKind::AlternatingI => e.plus[i],
            FluxKind::AlternatingII => e.minus[i],
            FluxKind::Upwind => e.average(i) + h_for_jump.jump(i) / (2.0 * eps_inf.sqrt()),
        };
    }
    out
}

/// `H_tilde` at every interface; `e_for_jump` enters only the upwind flux.
pub fn h_tilde(
    h: &TraceSet,
    e_for_jump: &TraceSet,
    kind: FluxKind,
    eps_inf: f64,
) -> Vec<f64> {
    let n = h.n_interfaces();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = match kind {
            FluxKind::Central => h.average(i),
            FluxKind::AlternatingI => h.minus[i],
            FluxKind::AlternatingII => h.plus[i],
            FluxKind::Upwind => h.average(i) + 0.5 * eps_inf.sqrt() * e_for_jump.jump(i),
        };
    }
    out
}

/// Absorbing-wall `E_hat` at the right boundary from interior traces only.
/// Central and alternating fluxes share the `(3/4, -1/(4 sqrt))` form;
/// upwind uses `(1/2, -1/(2 sqrt))`, which annihilates the left-going
/// characteristic `H + sqrt(eps_inf) E` exactly.
pub fn absorbing_e_hat(e_minus: f64, h_minus: f64, kind: FluxKind, eps_inf: f64) -> f64 {
    let s = eps_inf.sqrt();
    match kind {
        FluxKind::Upwind => 0.5 * e_minus - h_minus / (2.0 * s),
        _ => 0.75 * e_minus - h_minus / (4.0 * s),
    }
}

/// Absorbing-wall `H_tilde` at the right boundary.
pub fn absorbing_h_tilde(e_minus: f64, h_minus: f64, kind: FluxKind, eps_inf: f64) -> f64 {
    let s = eps_inf.sqrt();
    match kind {
        FluxKind::Upwind => 0.5 * h_minus - 0.5 * s * e_minus,
        _ => 0.75 * h_minus - 0.25 * s * e_minus,
    }
}

/// `E_hat [H] + H_tilde [E] - [E H]` at one interface: zero for the
/// conservative fluxes, `[H]^2/(2 sqrt) + (sqrt/2)[E]^2` for upwind.
pub fn flux_identity_residual(
    e_minus: f64,
    e_plus: f64,
    h_minus: f64,
    h_plus: f64,
    kind: FluxKind,
    eps_inf: f64,
) -> f64 {
    let je = e_plus - e_minus;
    let jh = h_plus - h_minus;
    let eh = match kind {
        FluxKind::Central => 0.5 * (e_plus + e_minus),
        FluxKind::AlternatingI => e_plus,
        FluxKind::AlternatingII => e_minus,
        FluxKind::Upwind => 0.5 * (e_plus + e_minus) + jh / (2.0 * eps_inf.sqrt()),
    };
    let ht = match kind {
        FluxKind::Central => 0.5 * (h_plus + h_minus),
        FluxKind::AlternatingI => h_minus,
        FluxKind::AlternatingII => h_plus,
        FluxKind::Upwind => 0.5 * (h_plus + h_minus) + 0.5 * eps_inf.sqrt() * je,
    };
    let jump_eh = e_plus * h_plus - e_minus * h_minus;
    let dissipation = if kind == FluxKind::Upwind {
        jh * jh / (2.0 * eps_inf.sqrt()) + 0.5 * eps_inf.sqrt() * je * je
    } else {
        0.0
    };
    eh * jh + ht * je - jump_eh - dissipation
}
