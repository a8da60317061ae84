//! Smallest eigenpairs of the generalized symmetric problem `A x = lambda M x`.
//!
//! Shift-invert Lanczos at shift zero: the Krylov space of `A^{-1} M` is
//! built in the M-inner product with full reorthogonalization, converged
//! Ritz pairs are locked and deflated, and the process restarts until the
//! requested number of pairs has converged. Convergence is decided on
//! explicit residuals `||A x - lambda M x||`, never on the solver's internal
//! estimates. A dense reference path is provided for small systems.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{LdlFactorization, SparseMatrix};

/// Converged eigenpairs, ascending; eigenvectors are M-orthonormal and the
/// entry of largest magnitude in each vector is positive.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Explicit relative residuals `||A x - lambda M x|| / lambda`.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Target for `||A x - lambda M x|| <= tol_rel * lambda`.
    pub tol_rel: f64,
    /// Restart cap; exceeded means a convergence error.
    pub max_restarts: usize,
    /// Krylov dimension per restart; default `max(2K + 20, 40)`.
    pub krylov_dim: Option<usize>,
    /// Seed for the deterministic start vectors.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol_rel: 1e-8,
            max_restarts: 50,
            krylov_dim: None,
            seed: 0x5eed_a5de,
        }
    }
}

/// Floating-point floor for explicit residuals: evaluating `A x` already
/// incurs rounding of order `eps_mach ||A|| ||x||`, so no algorithm can
/// report a smaller explicit residual when `||A||` is large (weights reach
/// 1/eps in flat regions).
pub fn residual_floor(a_inf_norm: f64, x_norm2: f64) -> f64 {
    16.0 * f64::EPSILON * a_inf_norm * x_norm2
}

/// K smallest eigenpairs; factors `A` internally (natural ordering).
pub fn smallest_eigenpairs(a: &SparseMatrix, m: &SparseMatrix, k: usize) -> Result<EigenResult> {
    let factor = LdlFactorization::new(a, None)?;
    smallest_eigenpairs_with(a, m, k, &factor, &LanczosOptions::default())
}

/// K smallest eigenpairs reusing an existing factorization of `A`.
pub fn smallest_eigenpairs_with(
    a: &SparseMatrix,
    m: &SparseMatrix,
    k: usize,
    factor: &LdlFactorization,
    opts: &LanczosOptions,
) -> Result<EigenResult> {
    let n = a.n();
    if m.n() != n {
        return Err(Error::InvalidInput(format!(
            "matrix dimensions differ: A is {n}, M is {}",
            m.n()
        )));
    }
    if k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs from a dimension-{n} problem"
        )));
    }
    if k == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            eigenvectors: vec![],
            residuals: vec![],
        });
    }

    let a_norm = a.inf_norm();
    let dim_max = opts.krylov_dim.unwrap_or((2 * k + 20).max(40)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // locked pairs: (lambda, x, M x, relative residual)
    let mut locked: Vec<(f64, Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut best_unconverged: Vec<f64> = Vec::new();
    // warm start: carry the best unconverged Ritz vector into the next cycle
    // so progress on clustered eigenvalues accumulates across restarts
    let mut next_start: Option<Vec<f64>> = None;

    for _restart in 0..opts.max_restarts {
        let avail = n - locked.len();
        if avail == 0 {
            break;
        }
        let dim = dim_max.min(avail);

        let mut v0 = match next_start.take() {
            Some(v) => v,
            None => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        orthogonalize(&mut v0, m, &locked, &[], &[]);
        let mut nv = m_norm(m, &v0);
        if nv < 1e-300 {
            v0 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            orthogonalize(&mut v0, m, &locked, &[], &[]);
            nv = m_norm(m, &v0);
            if nv < 1e-300 {
                continue;
            }
        }
        scale(&mut v0, 1.0 / nv);

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut mbasis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        let mv0 = m.apply(&v0);
        basis.push(v0);
        mbasis.push(mv0);

        for j in 0..dim {
            let mut w = factor.solve(&mbasis[j]);
            let alpha = dot(&w, &mbasis[j]);
            alphas.push(alpha);
            // full reorthogonalization (two passes) against locked + basis
            orthogonalize(&mut w, m, &locked, &basis, &mbasis);
            orthogonalize(&mut w, m, &locked, &basis, &mbasis);
            let beta = m_norm(m, &w);
            if j + 1 == dim || beta < 1e-14 * alpha.abs().max(1.0) {
                if beta >= 1e-14 * alpha.abs().max(1.0) {
                    betas.push(beta);
                }
                break;
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            let mw = m.apply(&w);
            basis.push(w);
            mbasis.push(mw);
        }

        // Ritz pairs of the tridiagonal section
        let mdim = alphas.len();
        let mut t = DMatrix::<f64>::zeros(mdim, mdim);
        for i in 0..mdim {
            t[(i, i)] = alphas[i];
            if i + 1 < mdim && i < betas.len() {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let se = nalgebra::SymmetricEigen::new(t);
        // theta = Ritz value of A^{-1} M; want largest theta = smallest lambda
        let mut order: Vec<usize> = (0..mdim).collect();
        order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());

        best_unconverged.clear();
        let mut progressed = false;
        for &idx in &order {
            if locked.len() >= k {
                break;
            }
            let theta = se.eigenvalues[idx];
            if !(theta > 0.0) {
                break;
            }
            let lambda = 1.0 / theta;
            let y = se.eigenvectors.column(idx);
            let mut x = vec![0.0; n];
            for (jb, vb) in basis.iter().enumerate() {
                let c = y[jb];
                if c != 0.0 {
                    axpy(&mut x, c, vb);
                }
            }
            let nx = m_norm(m, &x);
            if nx < 1e-300 {
                break;
            }
            scale(&mut x, 1.0 / nx);
            let mx = m.apply(&x);
            let ax = a.apply(&x);
            let r: f64 = ax
                .iter()
                .zip(mx.iter())
                .map(|(&ai, &mi)| (ai - lambda * mi).powi(2))
                .sum::<f64>()
                .sqrt();
            let x2 = dot(&x, &x).sqrt();
            let converged = r <= opts.tol_rel * lambda || r <= residual_floor(a_norm, x2);
            if converged {
                let mut xv = x;
                // hygiene: re-deflate against locked set, renormalize, fix sign
                orthogonalize(&mut xv, m, &locked, &[], &[]);
                let nv = m_norm(m, &xv);
                scale(&mut xv, 1.0 / nv);
                fix_sign(&mut xv);
                let mxv = m.apply(&xv);
                locked.push((lambda, xv, mxv, r / lambda));
                progressed = true;
            } else {
                // consecutive-from-front locking keeps the locked set equal to
                // the smallest eigenvalues; restart from this Ritz vector
                best_unconverged.push(r / lambda);
                next_start = Some(x);
                break;
            }
        }
        if locked.len() >= k {
            break;
        }
        let _ = progressed;
    }

    if locked.len() < k {
        return Err(Error::NoConvergence {
            restarts: opts.max_restarts,
            residuals: best_unconverged,
        });
    }

    locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    locked.truncate(k);
    Ok(EigenResult {
        eigenvalues: locked.iter().map(|p| p.0).collect(),
        eigenvectors: locked.iter().map(|p| p.1.clone()).collect(),
        residuals: locked.iter().map(|p| p.3).collect(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [f64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

fn m_norm(m: &SparseMatrix, v: &[f64]) -> f64 {
    m.bilinear(v, v).max(0.0).sqrt()
}

/// One classical Gram-Schmidt pass of `w` against the locked vectors and the
/// current Lanczos basis, all in the M-inner product.
fn orthogonalize(
    w: &mut [f64],
    m: &SparseMatrix,
    locked: &[(f64, Vec<f64>, Vec<f64>, f64)],
    basis: &[Vec<f64>],
    mbasis: &[Vec<f64>],
) {
    for (_, x, mx, _) in locked {
        let c = dot(w, mx);
        if c != 0.0 {
            axpy(w, -c, x);
        }
    }
    if basis.is_empty() {
        return;
    }
    debug_assert_eq!(basis.len(), mbasis.len());
    for (vb, mvb) in basis.iter().zip(mbasis.iter()) {
        let c = dot(w, mvb);
        if c != 0.0 {
            axpy(w, -c, vb);
        }
    }
    let _ = m;
}

fn fix_sign(v: &mut [f64]) {
    let mut imax = 0;
    let mut vmax = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > vmax {
            vmax = x.abs();
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        scale(v, -1.0);
    }
}

/// Full spectrum of the dense generalized problem; the reference path for
/// small systems. Eigenvalues ascending, eigenvectors M-orthonormal columns.
pub fn dense_generalized_eig(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n > 500 {
        return Err(Error::Capacity(format!(
            "dense generalized eigensolve limited to n <= 500, got {n}"
        )));
    }
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidInput("matrices must be square and same size".into()));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("M is not symmetric positive definite".into()))?;
    let l = chol.l();
    // B = L^{-1} A L^{-T}, symmetrized against rounding
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Singular("singular Cholesky factor".into()))?;
    let b = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Singular("singular Cholesky factor".into()))?;
    let b = (&b + b.transpose()) * 0.5;
    let se = nalgebra::SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();

    // eigenvectors x = L^{-T} y
    let lt = l.transpose();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let y: DVector<f64> = se.eigenvectors.column(i).into();
        let x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Singular("singular Cholesky factor".into()))?;
        vectors.set_column(col, &x);
    }
    Ok((values, vectors))
}
