//! Soliton launch benchmark: a sech-envelope carrier pulse is driven into an
//! initially quiescent Kerr-Raman-Lorentz medium on `[0, 45]` through the
//! left wall, with an absorbing right wall. Third-harmonic generation sheds a
//! small daughter pulse that travels ahead of the main pulse.
//!
//! The magnetic drive at the wall comes from the linearized dispersion
//! relation: the pulse spectrum is expanded around the carrier and the
//! inverse impedance is Taylor-expanded to eighth order, which requires
//! derivatives of `1/Z(omega)`. Those are obtained with truncated-Taylor
//! (jet) arithmetic on the closed-form wavenumber, not finite differences.

use num_complex::Complex64;

use crate::basis::Basis;
use crate::diagnostics::{energy_identity_check, pulse_area, spectrum_probe, EnergyLedger};
use crate::field::DgField;
use crate::flux::FluxKind;
use crate::mesh::Mesh;
use crate::model::{ModelParams, SimState};
use crate::scheme::{bootstrap_h_half_prev, step, Boundary, SchemeKind, StepContext};
use crate::solver::NewtonConfig;
use crate::{Error, Result};

pub const SOLITON_DOMAIN: (f64, f64) = (0.0, 45.0);
/// Carrier angular frequency of the injected pulse (literal value, not 4*pi).
pub const SOLITON_CARRIER: f64 = 12.57;
/// Arrival time of the sech envelope peak at the wall.
pub const SOLITON_PULSE_CENTER: f64 = 20.0;

/// Highest retained derivative order of the boundary expansion.
const JET_ORDER: usize = 8;
const JET_LEN: usize = JET_ORDER + 1;

/// Truncated Taylor series of order 8: `c[m]` is the coefficient of
/// `(omega - omega_0)^m`, so the m-th derivative is `m! * c[m]`.
#[derive(Clone, Copy, Debug)]
struct Jet {
    c: [Complex64; JET_LEN],
}

impl Jet {
    fn constant(z: Complex64) -> Self {
        let mut c = [Complex64::ZERO; JET_LEN];
        c[0] = z;
        Jet { c }
    }

    /// The expansion variable itself, centered at `z`.
    fn variable(z: Complex64) -> Self {
        let mut j = Jet::constant(z);
        j.c[1] = Complex64::ONE;
        j
    }

    fn add(&self, other: &Jet) -> Jet {
        let mut c = self.c;
        for m in 0..JET_LEN {
            c[m] += other.c[m];
        }
        Jet { c }
    }

    fn scale(&self, z: Complex64) -> Jet {
        let mut c = self.c;
        for v in &mut c {
            *v *= z;
        }
        Jet { c }
    }

    fn mul(&self, other: &Jet) -> Jet {
        let mut c = [Complex64::ZERO; JET_LEN];
        for m in 0..JET_LEN {
            for i in 0..=m {
                c[m] += self.c[i] * other.c[m - i];
            }
        }
        Jet { c }
    }

    fn div(&self, other: &Jet) -> Jet {
        let mut c = [Complex64::ZERO; JET_LEN];
        for m in 0..JET_LEN {
            let mut s = self.c[m];
            for i in 1..=m {
                s -= other.c[i] * c[m - i];
            }
            c[m] = s / other.c[0];
        }
        Jet { c }
    }

    /// Principal-branch square root propagated through the series.
    fn sqrt(&self) -> Jet {
        let mut c = [Complex64::ZERO; JET_LEN];
        c[0] = self.c[0].sqrt();
        for m in 1..JET_LEN {
            let mut s = self.c[m];
            for i in 1..m {
                s -= c[i] * c[m - i];
            }
            c[m] = s / (2.0 * c[0]);
        }
        Jet { c }
    }

    /// `exp` via the derivative recurrence `e' = e * u'`.
    fn exp(&self) -> Jet {
        let mut c = [Complex64::ZERO; JET_LEN];
        c[0] = self.c[0].exp();
        for m in 1..JET_LEN {
            let mut s = Complex64::ZERO;
            for i in 1..=m {
                s += (i as f64) * self.c[i] * c[m - i];
            }
            c[m] = s / m as f64;
        }
        Jet { c }
    }
}

/// Complex wavenumber of the right-propagating linear mode,
/// `k = omega sqrt(eps_inf) sqrt(1 - (omega_p^2/eps_inf)/(omega^2 - i omega/tau - omega_0^2))`.
/// The square root takes the principal branch, with the sign fixed so that
/// `Re k` has the sign of `omega`.
pub fn dispersion_k(omega: f64, params: &ModelParams) -> Result<Complex64> {
    if omega == 0.0 || params.omega_p == 0.0 {
        return Ok(Complex64::new(omega * params.eps_inf.sqrt(), 0.0));
    }
    let wpse = params.omega_p * params.omega_p / params.eps_inf;
    let denom = Complex64::new(
        omega * omega - params.omega0 * params.omega0,
        -omega * params.inv_tau,
    );
    if (denom - wpse).norm() < 1e-12 * wpse.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "dispersion branch point at omega = {omega}"
        )));
    }
    let mut k = omega * params.eps_inf.sqrt() * (Complex64::ONE - wpse / denom).sqrt();
    if k.re * omega < 0.0 {
        k = -k;
    }
    Ok(k)
}

/// Jet of the inverse impedance `1/Z = -k/omega` around `carrier`.
fn inv_z_jet(carrier: f64, params: &ModelParams) -> Result<Jet> {
    let sq = params.eps_inf.sqrt();
    if params.omega_p == 0.0 {
        return Ok(Jet::constant(Complex64::new(-sq, 0.0)));
    }
    let wpse = params.omega_p * params.omega_p / params.eps_inf;
    let omega = Jet::variable(Complex64::new(carrier, 0.0));
    // omega^2 - i omega / tau - omega_0^2
    let denom = omega.mul(&omega).add(
        &omega
            .scale(Complex64::new(0.0, -params.inv_tau))
            .add(&Jet::constant(Complex64::new(
                -params.omega0 * params.omega0,
                0.0,
            ))),
    );
    if (denom.c[0] - wpse).norm() < 1e-12 * wpse.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "dispersion branch point at omega = {carrier}"
        )));
    }
    let inner = Jet::constant(Complex64::ONE)
        .add(&Jet::constant(Complex64::from(wpse)).div(&denom).scale(-Complex64::ONE));
    let mut s = inner.sqrt();
    // Right-propagating root: Re k = Re(carrier * sqrt(eps) * s0) > 0.
    if (carrier * sq * s.c[0].re) < 0.0 {
        s = s.scale(-Complex64::ONE);
    }
    // 1/Z = -k/omega = -sqrt(eps_inf) * s.
    Ok(s.scale(Complex64::from(-sq)))
}

/// Left-wall drive: `E(0,t) = f(t) cos(carrier t)` with a sech envelope,
/// and the matched magnetic trace from the linearized dispersion relation.
#[derive(Clone, Debug)]
pub struct SolitonDrive {
    pub amplitude: f64,
    pub carrier: f64,
    pub t_center: f64,
    /// `(1/Z)^{(m)}` at the carrier, m = 0..=8.
    inv_z_derivs: [Complex64; JET_LEN],
}

impl SolitonDrive {
    pub fn new(amplitude: f64, params: &ModelParams) -> Result<Self> {
        Self::with_carrier(amplitude, SOLITON_CARRIER, params)
    }

    pub fn with_carrier(amplitude: f64, carrier: f64, params: &ModelParams) -> Result<Self> {
        let jet = inv_z_jet(carrier, params)?;
        let mut inv_z_derivs = [Complex64::ZERO; JET_LEN];
        let mut fact = 1.0;
        for m in 0..JET_LEN {
            if m > 0 {
                fact *= m as f64;
            }
            inv_z_derivs[m] = fact * jet.c[m];
        }
        Ok(Self { amplitude, carrier, t_center: SOLITON_PULSE_CENTER, inv_z_derivs })
    }

    pub fn inv_z_derivs(&self) -> &[Complex64; JET_LEN] {
        &self.inv_z_derivs
    }

    /// Envelope derivatives `f^{(m)}(t)`, `f = M sech(t - t_center)`,
    /// via jet arithmetic on `M / cosh`.
    pub fn envelope_derivs(&self, t: f64) -> [f64; JET_LEN] {
        let u = Jet::variable(Complex64::from(t - self.t_center));
        let e = u.exp();
        let e_neg = u.scale(-Complex64::ONE).exp();
        let cosh = e.add(&e_neg).scale(Complex64::from(0.5));
        let f = Jet::constant(Complex64::from(self.amplitude)).div(&cosh);
        let mut out = [0.0; JET_LEN];
        let mut fact = 1.0;
        for m in 0..JET_LEN {
            if m > 0 {
                fact *= m as f64;
            }
            out[m] = fact * f.c[m].re;
        }
        out
    }

    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude / (t - self.t_center).cosh()
    }

    pub fn e_boundary(&self, t: f64) -> f64 {
        self.envelope(t) * (self.carrier * t).cos()
    }

    /// `H(0,t) = Re[ sum_m (-i)^m/m! (1/Z)^{(m)} f^{(m)}(t) e^{i carrier t} ]`.
    pub fn h_boundary(&self, t: f64) -> f64 {
        let f = self.envelope_derivs(t);
        let mut sum = Complex64::ZERO;
        let mut fact = 1.0;
        let mut ipow = Complex64::ONE;
        for m in 0..JET_LEN {
            if m > 0 {
                fact *= m as f64;
                ipow *= Complex64::new(0.0, -1.0);
            }
            sum += ipow / fact * self.inv_z_derivs[m] * f[m];
        }
        let phase = Complex64::new(0.0, self.carrier * t).exp();
        (sum * phase).re
    }
}

/// Fixed time-step multipliers for the launch runs, `dt = cfl * h`; the
/// alternating fluxes tolerate a larger step than central/upwind.
pub fn soliton_default_cfl(scheme: SchemeKind, flux: FluxKind) -> f64 {
    match (scheme, flux) {
        (SchemeKind::LeapFrog, FluxKind::AlternatingI | FluxKind::AlternatingII) => 0.1,
        (SchemeKind::LeapFrog, _) => 0.05,
        (SchemeKind::FullyImplicit, FluxKind::AlternatingI | FluxKind::AlternatingII) => 0.5,
        (SchemeKind::FullyImplicit, _) => 0.3,
    }
}

#[derive(Clone, Debug)]
pub struct SolitonConfig {
    pub amplitude: f64,
    pub scheme: SchemeKind,
    pub flux: FluxKind,
    pub degree: usize,
    pub n_elements: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    /// Time between energy/pulse-area records.
    pub trace_interval: f64,
    /// Probe location for the time series feeding the spectrum.
    pub probe_x: f64,
    /// Pulse-area cutoff: only `|E| >= threshold` portions count.
    pub pulse_threshold: f64,
    pub newton: NewtonConfig,
}

impl SolitonConfig {
    pub fn new(
        amplitude: f64,
        scheme: SchemeKind,
        flux: FluxKind,
        degree: usize,
        n_elements: usize,
    ) -> Self {
        Self {
            amplitude,
            scheme,
            flux,
            degree,
            n_elements,
            cfl: soliton_default_cfl(scheme, flux),
            t_final: 80.0,
            snapshot_times: vec![40.0, 80.0],
            trace_interval: 0.1,
            probe_x: 10.0,
            pulse_threshold: 0.01,
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub state: SimState,
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub ledger: EnergyLedger,
    /// `(E^n - E_ref)/scale`; the reference is the first record and the scale
    /// the largest recorded magnitude, so quiescent starts stay finite.
    pub rel_deviation: f64,
}

#[derive(Clone, Debug)]
pub struct SolitonOutput {
    pub snapshots: Vec<Snapshot>,
    pub energy: Vec<EnergyRecord>,
    pub pulse_area: Vec<(f64, f64)>,
    pub probe: Vec<(f64, f64)>,
    pub probe_dt: f64,
    pub final_state: SimState,
    pub max_newton_iters: usize,
    pub max_newton_residual: f64,
}

pub fn run_soliton(cfg: &SolitonConfig) -> Result<SolitonOutput> {
    let params = ModelParams::soliton();
    let mesh = Mesh::uniform(SOLITON_DOMAIN.0, SOLITON_DOMAIN.1, cfg.n_elements)?;
    let basis = Basis::new(cfg.degree)?;
    let drive = SolitonDrive::new(cfg.amplitude, &params)?;
    let e_drive = |t: f64| drive.e_boundary(t);
    let h_drive = |t: f64| drive.h_boundary(t);
    let ctx = StepContext {
        mesh: &mesh,
        basis: &basis,
        params: &params,
        flux: cfg.flux,
        boundary: Boundary::SolitonIO { e_drive: &e_drive, h_drive: &h_drive },
        newton: cfg.newton.clone(),
    };

    let n_steps = (cfg.t_final / (cfg.cfl * mesh.h)).ceil().max(1.0) as usize;
    let dt = cfg.t_final / n_steps as f64;
    let trace_every = (cfg.trace_interval / dt).round().max(1.0) as usize;
    let probe_elem = mesh.locate(cfg.probe_x);
    let probe_xi = (cfg.probe_x - mesh.center(probe_elem)) / (0.5 * mesh.h);

    let mut state = SimState::zeros(cfg.n_elements, basis.modes());
    if cfg.scheme == SchemeKind::LeapFrog {
        state.h_half_prev = Some(bootstrap_h_half_prev(&ctx, &state, dt)?);
    }

    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut snap_iter = cfg.snapshot_times.iter().copied().peekable();
    let mut raw_energy: Vec<(usize, f64, EnergyLedger)> = Vec::new();
    let mut areas = Vec::new();
    let mut probe = Vec::new();
    let mut max_iters = 0usize;
    let mut max_res = 0.0f64;

    // Ledger window: the staggered upwind identity for step n -> n+1 also
    // needs the half level belonging to step n+1 -> n+2, so records trail the
    // integration by one step.
    let mut window: Vec<SimState> = vec![state.clone()];

    probe.push((0.0, 0.0));
    areas.push((0.0, 0.0));

    for s in 0..n_steps {
        let (next, report) = step(cfg.scheme, &ctx, &state, dt)?;
        max_iters = max_iters.max(report.newton_iters);
        max_res = max_res.max(report.final_residual);
        state = next;
        let t = dt * (s + 1) as f64;

        window.push(state.clone());
        if window.len() > 3 {
            window.remove(0);
        }
        // Emit the trailing record once its full window exists.
        if window.len() == 3 {
            let rec_step = s; // transition window[0] -> window[1]
            if rec_step % trace_every == 0 || rec_step == n_steps - 1 {
                let ledger = energy_identity_check(
                    &ctx,
                    cfg.scheme,
                    &window[0],
                    &window[1],
                    window[2].h_half_prev.as_ref(),
                    dt,
                )?;
                raw_energy.push((rec_step, dt * rec_step as f64, ledger));
            }
        }

        if s % trace_every == 0 || s == n_steps - 1 {
            areas.push((t, pulse_area(&state.e, cfg.pulse_threshold, &mesh, &basis, 8)));
        }
        probe.push((t, state.e.eval(&mesh, &basis, probe_elem, probe_xi)));

        if let Some(&ts) = snap_iter.peek() {
            if t + 0.5 * dt >= ts {
                snap_iter.next();
                snapshots.push(Snapshot { time: t, state: state.clone() });
            }
        }
    }
    // Final-level energy without identity terms.
    if window.len() >= 2 {
        let n = window.len();
        let ledger = energy_identity_check(
            &ctx,
            cfg.scheme,
            &window[n - 2],
            &window[n - 1],
            None,
            dt,
        );
        if let Ok(l) = ledger {
            raw_energy.push((n_steps - 1, dt * (n_steps - 1) as f64, l));
        }
    }

    let scale = raw_energy
        .iter()
        .map(|r| r.2.energy.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let first = raw_energy.first().map(|r| r.2.energy).unwrap_or(0.0);
    let energy = raw_energy
        .into_iter()
        .map(|(step, time, ledger)| EnergyRecord {
            step,
            time,
            ledger,
            rel_deviation: (ledger.energy - first) / scale,
        })
        .collect();

    Ok(SolitonOutput {
        snapshots,
        energy,
        pulse_area: areas,
        probe,
        probe_dt: dt,
        final_state: state,
        max_newton_iters: max_iters,
        max_newton_residual: max_res,
    })
}

/// Main pulse and the weaker daughter pulse traveling ahead of it, extracted
/// from a snapshot of E. The daughter region starts where the envelope first
/// stays below `gap_frac` of the main amplitude for a full element.
#[derive(Clone, Copy, Debug)]
pub struct PulsePair {
    pub main_x: f64,
    pub main_amplitude: f64,
    pub daughter_x: f64,
    pub daughter_amplitude: f64,
    /// Left edge of the window used for the daughter pulse.
    pub daughter_window_start: f64,
}

pub fn locate_pulses(
    e: &DgField,
    mesh: &Mesh,
    basis: &Basis,
    samples_per_element: usize,
) -> Option<PulsePair> {
    let m = samples_per_element.max(2);
    let mut xs = Vec::with_capacity(mesh.n_elements * m);
    let mut vs = Vec::with_capacity(mesh.n_elements * m);
    for j in 0..mesh.n_elements {
        for s in 0..m {
            let xi = -1.0 + 2.0 * s as f64 / m as f64;
            xs.push(mesh.to_physical(j, xi));
            vs.push(e.eval(mesh, basis, j, xi).abs());
        }
    }
    let (main_i, &main_amp) = vs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if main_amp <= 0.0 {
        return None;
    }
    // Walk right until the field stays below a small fraction of the main
    // amplitude over one element's worth of samples.
    let gap = 0.02 * main_amp;
    let run_len = m;
    let mut run = 0usize;
    let mut start = None;
    for i in main_i..vs.len() {
        if vs[i] < gap {
            run += 1;
            if run >= run_len {
                start = Some(i);
                break;
            }
        } else {
            run = 0;
        }
    }
    let start = start?;
    let (d_i, &d_amp) = vs[start..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + start, v))?;
    if d_amp < 10.0 * gap / 2.0 && d_amp < 1e-6 {
        return None;
    }
    Some(PulsePair {
        main_x: xs[main_i],
        main_amplitude: main_amp,
        daughter_x: xs[d_i],
        daughter_amplitude: d_amp,
        daughter_window_start: xs[start],
    })
}

/// Dominant temporal angular frequency of the field inside a spatial window,
/// recovered by mapping the strongest spatial wavenumber back through the
/// linear dispersion relation on `[lo, hi]` (where `Re k` is increasing).
pub fn window_frequency(
    e: &DgField,
    mesh: &Mesh,
    basis: &Basis,
    params: &ModelParams,
    window: (f64, f64),
    omega_range: (f64, f64),
) -> Result<f64> {
    let (x0, x1) = window;
    if !(x1 > x0) {
        return Err(Error::InvalidArgument("empty spectral window".into()));
    }
    let per_elem = 8 * basis.modes();
    let dx = mesh.h / per_elem as f64;
    let n = ((x1 - x0) / dx) as usize;
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let x = x0 + i as f64 * dx;
        let j = mesh.locate(x);
        let xi = (x - mesh.center(j)) / (0.5 * mesh.h);
        series.push(e.eval(mesh, basis, j, xi));
    }
    let kappa = spectrum_probe(&series, dx, 1)?
        .first()
        .map(|p| p.0)
        .ok_or_else(|| Error::InvalidArgument("no spectral peak in window".into()))?;
    // Invert Re k(omega) = kappa by bisection on the monotone stretch.
    let (mut lo, mut hi) = omega_range;
    let f = |w: f64| -> Result<f64> { Ok(dispersion_k(w, params)?.re - kappa) };
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo * fhi > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "wavenumber {kappa} outside the invertible range"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? * flo <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn soliton_params() -> ModelParams {
        ModelParams::soliton()
    }

    #[test]
    fn dispersion_limits() {
        let mut p = soliton_params();
        p.omega_p = 0.0;
        let k = dispersion_k(3.0, &p).unwrap();
        assert_relative_eq!(k.re, 3.0 * 1.5, epsilon = 1e-14);
        assert_eq!(k.im, 0.0);
        let p = soliton_params();
        assert_eq!(dispersion_k(0.0, &p).unwrap(), Complex64::ZERO);
    }

    #[test]
    fn dispersion_matches_extended_precision_reference() {
        // Independent evaluation of the closed-form wavenumber at the
        // carrier: ratio = (omega_p^2/eps)/(w^2 - i w/tau - w0^2) computed
        // with exact rational pieces first, then one complex sqrt.
        let p = soliton_params();
        let w = SOLITON_CARRIER;
        let wpse = p.omega_p * p.omega_p / p.eps_inf;
        let re_d = w * w - p.omega0 * p.omega0;
        let im_d = -w * p.inv_tau;
        let den = re_d * re_d + im_d * im_d;
        let ratio = Complex64::new(wpse * re_d / den, -wpse * im_d / den);
        let kref = w * p.eps_inf.sqrt() * (Complex64::ONE - ratio).sqrt();
        let k = dispersion_k(w, &p).unwrap();
        assert_relative_eq!(k.re, kref.re, max_relative = 1e-13);
        assert_relative_eq!(k.im, kref.im, max_relative = 1e-13);
        // Golden value: the real part sits between the vacuum-in-dielectric
        // and fully screened limits.
        assert!(k.re > 10.0 && k.re < w * p.eps_inf.sqrt());
    }

    #[test]
    fn dispersion_roots_satisfy_quartic() {
        // The wavenumber must satisfy the quartic characteristic polynomial
        // eps w^4 - i (eps/tau) w^3 - (eps w0^2 + wp^2 + k^2) w^2
        //   + i k^2 w / tau + k^2 w0^2 = 0.
        let p = soliton_params();
        for &w in &[2.0, 7.0, SOLITON_CARRIER, 3.0 * SOLITON_CARRIER] {
            let k = dispersion_k(w, &p).unwrap();
            let k2 = k * k;
            let wc = Complex64::from(w);
            let quartic = p.eps_inf * wc.powu(4)
                - Complex64::i() * p.eps_inf * p.inv_tau * wc.powu(3)
                - (p.eps_inf * p.omega0 * p.omega0 + p.omega_p * p.omega_p + k2) * wc * wc
                + Complex64::i() * k2 * p.inv_tau * wc
                + k2 * p.omega0 * p.omega0;
            assert!(quartic.norm() < 1e-8 * w.powi(4), "omega {w}: {quartic}");
        }
    }

    #[test]
    fn inverse_impedance_derivatives_match_finite_differences() {
        let p = soliton_params();
        let drive = SolitonDrive::new(1.0, &p).unwrap();
        let dz = drive.inv_z_derivs();
        let invz = |w: f64| -> Complex64 { -dispersion_k(w, &p).unwrap() / w };
        let h = 1e-2;
        // Fourth-order central differences for the first two derivatives.
        let w = SOLITON_CARRIER;
        let d1 = (8.0 * (invz(w + h) - invz(w - h)) - (invz(w + 2.0 * h) - invz(w - 2.0 * h)))
            / (12.0 * h);
        let d2 = (16.0 * (invz(w + h) + invz(w - h))
            - (invz(w + 2.0 * h) + invz(w - 2.0 * h))
            - 30.0 * invz(w))
            / (12.0 * h * h);
        assert_relative_eq!(dz[0].re, invz(w).re, max_relative = 1e-12);
        assert_relative_eq!(dz[0].im, invz(w).im, max_relative = 1e-9);
        assert_relative_eq!(dz[1].re, d1.re, max_relative = 1e-7);
        assert_relative_eq!(dz[2].re, d2.re, max_relative = 1e-5);
    }

    #[test]
    fn envelope_derivatives_match_finite_differences() {
        let p = soliton_params();
        let drive = SolitonDrive::new(2.0, &p).unwrap();
        let t = 19.0;
        let f = drive.envelope_derivs(t);
        assert_relative_eq!(f[0], 2.0 / (t - 20.0f64).cosh(), max_relative = 1e-13);
        let h = 1e-4;
        let fd1 = (drive.envelope(t + h) - drive.envelope(t - h)) / (2.0 * h);
        let fd2 =
            (drive.envelope(t + h) - 2.0 * drive.envelope(t) + drive.envelope(t - h)) / (h * h);
        assert_relative_eq!(f[1], fd1, max_relative = 1e-6);
        assert_relative_eq!(f[2], fd2, max_relative = 1e-4);
        // Derivatives of sech stay bounded by factorial growth.
        for m in 0..JET_LEN {
            assert!(f[m].is_finite());
        }
    }

    #[test]
    fn wall_drive_is_quiet_before_the_pulse() {
        let p = soliton_params();
        let drive = SolitonDrive::new(1.0, &p).unwrap();
        assert!(drive.e_boundary(0.0).abs() < 1e-7);
        assert!(drive.h_boundary(0.0).abs() < 1e-7);
    }

    #[test]
    fn leading_impedance_term_dominates_at_the_peak() {
        let p = soliton_params();
        let drive = SolitonDrive::new(1.0, &p).unwrap();
        let t = SOLITON_PULSE_CENTER;
        let full = drive.h_boundary(t);
        let m0 = (drive.inv_z_derivs()[0]
            * drive.envelope(t)
            * Complex64::new(0.0, drive.carrier * t).exp())
        .re;
        // Envelope corrections are O(f'/f) relative to the carrier scale.
        assert!((full - m0).abs() < 0.2 * m0.abs().max(0.1), "{full} vs {m0}");
    }

    #[test]
    fn nondispersive_wall_drive_is_scaled_mirror_of_e() {
        let mut p = soliton_params();
        // Matching eps_s removes the Lorentz branch entirely.
        p.omega_p = 0.0;
        let drive = SolitonDrive::new(1.0, &p).unwrap();
        for &t in &[18.0, 20.0, 21.3] {
            assert_relative_eq!(
                drive.h_boundary(t),
                -p.eps_inf.sqrt() * drive.e_boundary(t),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn short_launch_enters_cleanly() {
        // A coarse, truncated run: the pulse front enters, energy grows from
        // zero, all Newton solves converge tightly.
        let mut cfg = SolitonConfig::new(1.0, SchemeKind::LeapFrog, FluxKind::AlternatingI, 1, 200);
        cfg.t_final = 24.0;
        cfg.trace_interval = 0.5;
        let out = run_soliton(&cfg).unwrap();
        assert!(out.final_state.is_finite());
        assert!(out.max_newton_residual < 1e-9);
        let last = out.energy.last().unwrap();
        assert!(last.ledger.energy > 0.0);
        let first = out.energy.first().unwrap();
        assert!(first.ledger.energy < last.ledger.energy);
        // The field is still confined near the inflow wall.
        let pulses = locate_pulses(&out.final_state.e,
            &Mesh::uniform(SOLITON_DOMAIN.0, SOLITON_DOMAIN.1, 200).unwrap(),
            &Basis::new(1).unwrap(), 8);
        if let Some(pp) = pulses {
            assert!(pp.main_x < 10.0, "main pulse at {}", pp.main_x);
        }
    }

    #[test]
    fn window_frequency_recovers_a_synthetic_carrier() {
        let p = soliton_params();
        let mesh = Mesh::uniform(0.0, 45.0, 400).unwrap();
        let basis = Basis::new(2).unwrap();
        let w_true = 3.0 * SOLITON_CARRIER;
        let kappa = dispersion_k(w_true, &p).unwrap().re;
        let field = crate::basis::project_l2(
            |x| (kappa * x).sin() * (-((x - 20.0) / 6.0) * ((x - 20.0) / 6.0)).exp(),
            &mesh,
            &basis,
        );
        let w = window_frequency(
            &field,
            &mesh,
            &basis,
            &p,
            (12.0, 28.0),
            (2.0 * SOLITON_CARRIER, 4.0 * SOLITON_CARRIER),
        )
        .unwrap();
        assert_relative_eq!(w, w_true, max_relative = 0.05);
    }
}
