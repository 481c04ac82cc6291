//! Nonlinear and linear solvers: dense local Newton, matrix-free
//! Newton-Krylov with restarted GMRES, and a block-Jacobi preconditioner
//! assembled by colored finite differencing.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub max_iters: usize,
    pub krylov_restart: usize,
    /// Scale of the directional-derivative increment.
    pub fd_epsilon: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_iters: 50,
            krylov_restart: 30,
            fd_epsilon: f64::EPSILON.sqrt(),
        }
    }
}

/// Outcome of one nonlinear solve; `converged` implies
/// `final_residual <= abs_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl StepReport {
    pub fn merge(self, other: StepReport) -> StepReport {
        StepReport {
            newton_iters: self.newton_iters.max(other.newton_iters),
            final_residual: self.final_residual.max(other.final_residual),
            converged: self.converged && other.converged,
        }
    }

    pub fn trivial() -> StepReport {
        StepReport { newton_iters: 0, final_residual: 0.0, converged: true }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Restarted GMRES with Givens rotations and optional right preconditioning.
/// Solves `A x = b` to absolute residual `tol`; `apply_a` and `precond` are
/// matrix-vector actions.
pub fn gmres<A, P>(
    apply_a: A,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    restart: usize,
    max_cycles: usize,
    precond: Option<&P>,
) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let apply_m = |v: &[f64]| -> Vec<f64> {
        match precond {
            Some(p) => p(v),
            None => v.to_vec(),
        }
    };
    let mut x = x0.to_vec();
    let mut last_res = f64::INFINITY;
    for _cycle in 0..max_cycles {
        let ax = apply_a(&x);
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let beta = norm2(&r);
        if beta <= tol {
            return Ok(x);
        }
        if !beta.is_finite() {
            return Err(Error::KrylovStagnation(beta));
        }
        let m = restart.min(n.max(1));
        // Arnoldi basis of the preconditioned operator.
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z = apply_m(&v[k]);
            let mut w = apply_a(&z);
            // Modified Gram-Schmidt.
            for (i, vi) in v.iter().enumerate().take(k + 1) {
                let hik: f64 = w.iter().zip(vi.iter()).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                for (wj, vij) in w.iter_mut().zip(vi.iter()) {
                    *wj -= hik * vij;
                }
            }
            let hk1 = norm2(&w);
            h[k + 1][k] = hk1;
            // Apply previous rotations to the new column.
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hk1 * hk1).sqrt();
            if denom == 0.0 {
                return Err(Error::KrylovStagnation(g[k].abs()));
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if hk1 > 0.0 {
                v.push(w.iter().map(|&wi| wi / hk1).collect());
            }
            if g[k + 1].abs() <= tol || hk1 == 0.0 {
                break;
            }
        }
        // Back substitution for the least-squares coefficients.
        let mut yc = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * yc[j];
            }
            yc[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (i, &yi) in yc.iter().enumerate() {
            for (uj, vij) in update.iter_mut().zip(v[i].iter()) {
                *uj += yi * vij;
            }
        }
        let update = apply_m(&update);
        for (xi, ui) in x.iter_mut().zip(update.iter()) {
            *xi += ui;
        }
        let res_est = g[k_used].abs();
        if res_est <= tol {
            return Ok(x);
        }
        if res_est >= last_res * 0.9999 {
            // No progress across a full cycle.
            return Err(Error::KrylovStagnation(res_est));
        }
        last_res = res_est;
    }
    // Accept the final iterate if it actually meets the tolerance.
    let ax = apply_a(&x);
    let res = norm2(&b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::KrylovStagnation(res))
    }
}

/// Dense Newton iteration with a caller-supplied residual and exact Jacobian.
/// Converges in one iteration when the residual is affine.
pub fn local_newton<F>(
    mut residual_jacobian: F,
    guess: &[f64],
    cfg: &NewtonConfig,
    element_tag: usize,
) -> Result<(Vec<f64>, StepReport)>
where
    F: FnMut(&[f64]) -> (Vec<f64>, DMatrix<f64>),
{
    let mut u = guess.to_vec();
    let (mut r, mut jac) = residual_jacobian(&u);
    let mut rnorm = norm2(&r);
    for iter in 0..cfg.max_iters {
        if rnorm <= cfg.abs_tol {
            return Ok((u, StepReport { newton_iters: iter, final_residual: rnorm, converged: true }));
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|&x| -x));
        let lu = jac.clone().lu();
        let delta = lu
            .solve(&rhs)
            .ok_or(Error::SingularJacobian(element_tag))?;
        for (ui, di) in u.iter_mut().zip(delta.iter()) {
            *ui += di;
        }
        let (r_new, jac_new) = residual_jacobian(&u);
        r = r_new;
        jac = jac_new;
        rnorm = norm2(&r);
        if !rnorm.is_finite() {
            return Err(Error::NewtonNonConvergence { iters: iter + 1, residual: rnorm });
        }
    }
    if rnorm <= cfg.abs_tol {
        Ok((u, StepReport {
            newton_iters: cfg.max_iters,
            final_residual: rnorm,
            converged: true,
        }))
    } else {
        Err(Error::NewtonNonConvergence { iters: cfg.max_iters, residual: rnorm })
    }
}

/// Jacobian-free Newton-Krylov. The Jacobian action is the directional
/// difference `(R(u + eps v) - R(u)) / eps` with
/// `eps = fd_epsilon (1 + ||u||) / ||v||`.
pub fn newton_krylov<F, P>(
    residual_fn: F,
    guess: &[f64],
    cfg: &NewtonConfig,
    precond: Option<&P>,
) -> Result<(Vec<f64>, StepReport)>
where
    F: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let mut u = guess.to_vec();
    let mut r = residual_fn(&u);
    let mut rnorm = norm2(&r);
    for iter in 0..cfg.max_iters {
        if rnorm <= cfg.abs_tol {
            return Ok((u, StepReport { newton_iters: iter, final_residual: rnorm, converged: true }));
        }
        if !rnorm.is_finite() {
            return Err(Error::NewtonNonConvergence { iters: iter, residual: rnorm });
        }
        let unorm = norm2(&u);
        let jv = |v: &[f64]| -> Vec<f64> {
            let vnorm = norm2(v);
            if vnorm == 0.0 {
                return vec![0.0; v.len()];
            }
            let eps = cfg.fd_epsilon * (1.0 + unorm) / vnorm;
            let mut up = u.clone();
            for (upi, vi) in up.iter_mut().zip(v.iter()) {
                *upi += eps * vi;
            }
            let rp = residual_fn(&up);
            rp.iter().zip(r.iter()).map(|(a, b)| (a - b) / eps).collect()
        };
        let rhs: Vec<f64> = r.iter().map(|&x| -x).collect();
        // Solve the linear model tightly so smooth steps converge in very
        // few outer iterations.
        let lin_tol = (0.1 * cfg.abs_tol).max(1e-14 * rnorm);
        let zeros = vec![0.0; u.len()];
        let delta = gmres(jv, &rhs, &zeros, lin_tol, cfg.krylov_restart, 40, precond)?;
        for (ui, di) in u.iter_mut().zip(delta.iter()) {
            *ui += di;
        }
        r = residual_fn(&u);
        rnorm = norm2(&r);
    }
    if rnorm <= cfg.abs_tol {
        Ok((u, StepReport {
            newton_iters: cfg.max_iters,
            final_residual: rnorm,
            converged: true,
        }))
    } else {
        Err(Error::NewtonNonConvergence { iters: cfg.max_iters, residual: rnorm })
    }
}

/// Inverted block-diagonal of the Jacobian of `residual_fn`, for use as a
/// right preconditioner in [`newton_krylov`].
pub struct BlockJacobi {
    block_size: usize,
    factors: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BlockJacobi {
    /// Extracts the diagonal blocks by finite differencing with a 3-coloring:
    /// residual rows of one block depend only on that block and its two
    /// neighbors, so perturbing the same column slot in every third block
    /// isolates the diagonal entries exactly.
    pub fn from_residual<F>(
        residual_fn: F,
        u: &[f64],
        n_blocks: usize,
        block_size: usize,
        fd_epsilon: f64,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        assert_eq!(u.len(), n_blocks * block_size);
        let r0 = residual_fn(u);
        let unorm = norm2(u);
        let eps = fd_epsilon * (1.0 + unorm);
        let mut blocks = vec![DMatrix::<f64>::zeros(block_size, block_size); n_blocks];
        let n_colors = 3.min(n_blocks);
        for color in 0..n_colors {
            for col in 0..block_size {
                let mut up = u.to_vec();
                let mut bi = color;
                while bi < n_blocks {
                    up[bi * block_size + col] += eps;
                    bi += n_colors;
                }
                let rp = residual_fn(&up);
                let mut bi = color;
                while bi < n_blocks {
                    for row in 0..block_size {
                        let idx = bi * block_size + row;
                        blocks[bi][(row, col)] = (rp[idx] - r0[idx]) / eps;
                    }
                    bi += n_colors;
                }
            }
        }
        let mut factors = Vec::with_capacity(n_blocks);
        for (bi, block) in blocks.into_iter().enumerate() {
            let lu = block.lu();
            if lu.determinant().abs() == 0.0 {
                return Err(Error::SingularJacobian(bi));
            }
            factors.push(lu);
        }
        Ok(Self { block_size, factors })
    }

    /// Builds the preconditioner from explicit per-block matrices.
    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let block_size = blocks.first().map_or(0, |b| b.nrows());
        let mut factors = Vec::with_capacity(blocks.len());
        for (bi, block) in blocks.into_iter().enumerate() {
            let lu = block.lu();
            if lu.determinant().abs() == 0.0 {
                return Err(Error::SingularJacobian(bi));
            }
            factors.push(lu);
        }
        Ok(Self { block_size, factors })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (bi, lu) in self.factors.iter().enumerate() {
            let seg = &v[bi * self.block_size..(bi + 1) * self.block_size];
            let rhs = DVector::from_column_slice(seg);
            if let Some(x) = lu.solve(&rhs) {
                out[bi * self.block_size..(bi + 1) * self.block_size]
                    .copy_from_slice(x.as_slice());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_precond() -> Option<&'static fn(&[f64]) -> Vec<f64>> {
        None
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let a = DMatrix::from_row_slice(4, 4, &[
            4.0, 1.0, 0.0, 0.5,
            1.0, 5.0, 1.0, 0.0,
            0.0, 1.0, 6.0, 1.0,
            0.5, 0.0, 1.0, 3.0,
        ]);
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let apply = |v: &[f64]| {
            let x = DVector::from_column_slice(v);
            (&a * x).as_slice().to_vec()
        };
        let x = gmres(apply, &b, &[0.0; 4], 1e-12, 30, 10, no_precond()).unwrap();
        let direct = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for i in 0..4 {
            assert!((x[i] - direct[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_with_restart_on_larger_system() {
        // Diagonally dominant 50x50 system with restart shorter than n.
        let n = 50;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 10.0 + i as f64 * 0.1;
            if i + 1 < n {
                a[(i, i + 1)] = 1.0;
                a[(i + 1, i)] = -1.5;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let apply = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
        let x = gmres(apply, &b, &vec![0.0; n], 1e-11, 12, 40, no_precond()).unwrap();
        let res = &DVector::from_column_slice(&b) - &a * DVector::from_column_slice(&x);
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn local_newton_affine_one_iteration() {
        let f = |u: &[f64]| {
            let r = vec![2.0 * u[0] + u[1] - 3.0, u[0] + 4.0 * u[1] + 1.0];
            let j = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]);
            (r, j)
        };
        let cfg = NewtonConfig::default();
        let (u, report) = local_newton(f, &[0.0, 0.0], &cfg, 0).unwrap();
        assert_eq!(report.newton_iters, 1);
        assert!(report.converged);
        assert!((2.0 * u[0] + u[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn local_newton_exact_guess() {
        let f = |u: &[f64]| {
            (vec![u[0] * u[0] - 4.0], DMatrix::from_row_slice(1, 1, &[2.0 * u[0]]))
        };
        let cfg = NewtonConfig::default();
        let (_, report) = local_newton(f, &[2.0], &cfg, 0).unwrap();
        assert!(report.newton_iters <= 1);
    }

    #[test]
    fn local_newton_scalar_kerr_vs_bisection() {
        // Solve eps_inf e + a (1 - theta) (3/2)(e^2 + e0^2)(e - e0) = d.
        let (eps_inf, a, theta, e0, d) = (2.25, 0.07, 0.3, 0.0, 1.7);
        let g = |e: f64| eps_inf * e + a * (1.0 - theta) * 1.5 * (e * e + e0 * e0) * (e - e0) - d;
        let f = |u: &[f64]| {
            let e = u[0];
            let jac = eps_inf
                + a * (1.0 - theta) * 1.5 * (3.0 * e * e + e0 * e0 - 2.0 * e * e0);
            (vec![g(e)], DMatrix::from_row_slice(1, 1, &[jac]))
        };
        let cfg = NewtonConfig { abs_tol: 1e-14, ..NewtonConfig::default() };
        let (u, report) = local_newton(f, &[0.0], &cfg, 0).unwrap();
        assert!(report.converged);

        // Bisection oracle.
        let (mut lo, mut hi) = (0.0, 2.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((u[0] - oracle).abs() < 1e-12, "{} vs {oracle}", u[0]);
    }

    #[test]
    fn local_newton_singular_jacobian() {
        let f = |_u: &[f64]| (vec![1.0], DMatrix::from_row_slice(1, 1, &[0.0]));
        let cfg = NewtonConfig::default();
        assert!(matches!(
            local_newton(f, &[0.0], &cfg, 7),
            Err(Error::SingularJacobian(7))
        ));
    }

    #[test]
    fn jfnk_affine_single_step() {
        let a = DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 6.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0, -1.0]);
        let residual = |u: &[f64]| {
            (&a * DVector::from_column_slice(u) - &b).as_slice().to_vec()
        };
        let cfg = NewtonConfig::default();
        let (u, report) =
            newton_krylov(residual, &[0.0; 3], &cfg, no_precond()).unwrap();
        assert!(report.converged);
        assert!(report.newton_iters <= 2, "iters = {}", report.newton_iters);
        let res = (&a * DVector::from_column_slice(&u) - &b).norm();
        assert!(res <= 1e-9);
    }

    #[test]
    fn jfnk_scalar_cube_root() {
        let residual = |u: &[f64]| vec![u[0] * u[0] * u[0] - 8.0];
        let cfg = NewtonConfig::default();
        let (u, report) = newton_krylov(residual, &[3.0], &cfg, no_precond()).unwrap();
        assert!(report.converged);
        assert!((u[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn block_jacobi_exact_for_block_diagonal() {
        // Residual with exactly block-diagonal Jacobian: preconditioned GMRES
        // converges in one iteration per cycle.
        let blocks = [
            DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[5.0, -1.0, 1.0, 4.0]),
        ];
        let residual = |u: &[f64]| {
            let mut r = vec![0.0; 4];
            for b in 0..2 {
                for i in 0..2 {
                    r[2 * b + i] =
                        blocks[b][(i, 0)] * u[2 * b] + blocks[b][(i, 1)] * u[2 * b + 1] - 1.0;
                }
            }
            r
        };
        let u0 = vec![0.2, -0.3, 0.5, 0.1];
        let pc = BlockJacobi::from_residual(residual, &u0, 2, 2, 1e-7).unwrap();
        // M^{-1} applied to the Jacobian times v recovers v.
        let v = vec![1.0, 2.0, -1.0, 0.5];
        let mut av = vec![0.0; 4];
        for b in 0..2 {
            for i in 0..2 {
                av[2 * b + i] = blocks[b][(i, 0)] * v[2 * b] + blocks[b][(i, 1)] * v[2 * b + 1];
            }
        }
        let back = pc.apply(&av);
        for i in 0..4 {
            assert!((back[i] - v[i]).abs() < 1e-5, "{back:?}");
        }
    }

    #[test]
    fn jfnk_with_block_jacobi_preconditioner() {
        // Mildly coupled nonlinear system; preconditioning must not change
        // the answer.
        let residual = |u: &[f64]| {
            let n = u.len();
            let mut r = vec![0.0; n];
            for i in 0..n {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                r[i] = 3.0 * u[i] + 0.1 * u[i] * u[i] * u[i] + 0.2 * (left + right)
                    - (i as f64 * 0.3).cos();
            }
            r
        };
        let n = 12;
        let guess = vec![0.0; n];
        let cfg = NewtonConfig::default();
        let pc = BlockJacobi::from_residual(residual, &guess, n / 2, 2, 1e-7).unwrap();
        let apply = |v: &[f64]| pc.apply(v);
        let (u_pc, rep_pc) = newton_krylov(residual, &guess, &cfg, Some(&apply)).unwrap();
        let (u_plain, rep_plain) = newton_krylov(residual, &guess, &cfg, no_precond()).unwrap();
        assert!(rep_pc.converged && rep_plain.converged);
        for i in 0..n {
            assert!((u_pc[i] - u_plain[i]).abs() < 1e-8);
        }
    }
}
