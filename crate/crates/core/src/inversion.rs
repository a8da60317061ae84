//! Deconvolution inverse problem: Gaussian blur operator, noise model,
//! the iterated AS-subspace solver, and TSVD / direct baselines.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigen::LanczosOptions;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, SparseMatrix, WeightSpec};
use crate::media::FeFunction;
use crate::mesh::Mesh;
use crate::spectral::build_as_basis_with_boundary;

/// Dense capacity guard for the kernel matrix.
const MAX_DENSE_VERTICES: usize = 20_000;

/// Discrete Gaussian convolution by nodal collocation: the symmetric kernel
/// matrix `G_ij = g(x_i - x_j)` is stored separately from the lumped mass
/// weights `w_j` (row sums of M), and the operator acts as `(Fu)_i =
/// sum_j G_ij w_j u_j`.
#[derive(Debug)]
pub struct ConvolutionOperator {
    mesh: Arc<Mesh>,
    pub gamma: f64,
    kernel: DMatrix<f64>,
    weights: Vec<f64>,
    mass: SparseMatrix,
}

/// Gaussian kernel `g(x) = exp(-|x|^2 / (2 gamma^2)) / (2 pi gamma^2)`.
pub fn gaussian_kernel(dx: f64, dy: f64, gamma: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    (-r2 / (2.0 * gamma * gamma)).exp() / (2.0 * std::f64::consts::PI * gamma * gamma)
}

pub fn build_convolution(mesh: &Arc<Mesh>, gamma: f64) -> Result<ConvolutionOperator> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kernel width must be positive, got {gamma}"
        )));
    }
    let n = mesh.n_vertices();
    if n > MAX_DENSE_VERTICES {
        return Err(Error::Capacity(format!(
            "dense kernel storage limited to {MAX_DENSE_VERTICES} vertices, mesh has {n}"
        )));
    }
    let mass = assemble_mass(mesh);
    let weights: Vec<f64> = (0..n).map(|i| mass.row(i).map(|(_, v)| v).sum()).collect();
    let mut kernel = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let pi = mesh.vertex(i);
        for j in 0..=i {
            let pj = mesh.vertex(j);
            let g = gaussian_kernel(pi.x - pj.x, pi.y - pj.y, gamma);
            kernel[(i, j)] = g;
            kernel[(j, i)] = g;
        }
    }
    Ok(ConvolutionOperator {
        mesh: mesh.clone(),
        gamma,
        kernel,
        weights,
        mass,
    })
}

impl ConvolutionOperator {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn n(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// `(F u)_i = sum_j G_ij w_j u_j`
    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let wu: DVector<f64> = DVector::from_iterator(
            u.len(),
            u.iter().zip(self.weights.iter()).map(|(&ui, &wi)| ui * wi),
        );
        let out = &self.kernel * wu;
        out.iter().cloned().collect()
    }

    pub fn apply(&self, u: &FeFunction) -> Result<FeFunction> {
        if *u.mesh().as_ref() != *self.mesh.as_ref() {
            return Err(Error::DomainMismatch(
                "operator and argument live on different meshes".into(),
            ));
        }
        FeFunction::new(self.mesh.clone(), self.apply_vec(u.coeffs()))
    }

    /// The full system matrix `F = G diag(w)` (dense).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut f = self.kernel.clone();
        for j in 0..n {
            let w = self.weights[j];
            for i in 0..n {
                f[(i, j)] *= w;
            }
        }
        f
    }

    /// L2(Omega) norm of a coefficient vector via the mass matrix.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.bilinear(v, v).max(0.0).sqrt()
    }
}

/// Add a seeded Gaussian perturbation scaled so that the realized noise is
/// exactly `rho * ||y||` in L2; returns the perturbed data and `eta`.
pub fn add_noise(y: &FeFunction, rho: f64, seed: u64) -> Result<(FeFunction, f64)> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise level must be nonnegative, got {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok((y.clone(), 0.0));
    }
    let mass = assemble_mass(y.mesh());
    let norm_y = mass.bilinear(y.coeffs(), y.coeffs()).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<f64> = (0..y.coeffs().len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm_xi = mass.bilinear(&xi, &xi).max(0.0).sqrt();
    if norm_xi == 0.0 {
        return Err(Error::Singular("degenerate noise draw".into()));
    }
    let s = rho * norm_y / norm_xi;
    let coeffs: Vec<f64> = y
        .coeffs()
        .iter()
        .zip(xi.iter())
        .map(|(&yi, &xii)| yi + s * xii)
        .collect();
    let eta = rho * norm_y;
    Ok((FeFunction::new(y.mesh().clone(), coeffs)?, eta))
}

/// Outcome of one inversion run.
#[derive(Debug)]
pub struct InversionReport {
    pub method: String,
    pub reconstruction: FeFunction,
    /// Relative L2 error against the interpolated true medium.
    pub e_r: f64,
    /// Discrepancy ratio `||F u - y_eta|| / eta`.
    pub tau: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Misfit after each iteration (ASI only; single entry otherwise).
    pub misfits: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct AsiOptions {
    pub k: usize,
    pub tau_max: f64,
    pub iter_max: usize,
    pub weight: WeightSpec,
    pub lanczos: LanczosOptions,
}

impl AsiOptions {
    pub fn new(k: usize, weight: WeightSpec) -> Self {
        AsiOptions {
            k,
            tau_max: 1.1,
            iter_max: 20,
            weight,
            lanczos: LanczosOptions::default(),
        }
    }
}

/// Iterated AS-subspace least squares with the discrepancy principle.
/// `u_true` provides the known boundary trace and the error metric.
pub fn asi_solve(
    op: &ConvolutionOperator,
    y_noisy: &FeFunction,
    eta: f64,
    u_true: &FeFunction,
    opts: &AsiOptions,
) -> Result<InversionReport> {
    if opts.k < 1 {
        return Err(Error::InvalidInput("ASI needs K >= 1".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(
            "ASI requires a positive noise level eta".into(),
        ));
    }
    if !(opts.tau_max >= 1.0) {
        return Err(Error::InvalidInput("tau_max must be >= 1".into()));
    }

    let norm_true = op.l2_norm(u_true.coeffs());
    let mut current = y_noisy.clone();
    let mut misfits = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.iter_max {
        iterations += 1;
        let basis = build_as_basis_with_boundary(&current, u_true, &opts.weight, opts.k)?;

        // least squares over phi0 + span{phi_k} in the image of F
        let c0 = op.apply_vec(basis.phi0.coeffs());
        let cols: Vec<Vec<f64>> = basis
            .eigenfunctions
            .iter()
            .map(|f| op.apply_vec(f.coeffs()))
            .collect();
        let rhs: Vec<f64> = y_noisy
            .coeffs()
            .iter()
            .zip(c0.iter())
            .map(|(&yi, &ci)| yi - ci)
            .collect();

        let k = opts.k;
        let mcols: Vec<Vec<f64>> = cols.iter().map(|c| op.mass().apply(c)).collect();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut b = DVector::<f64>::zeros(k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = dot(&cols[i], &mcols[j]);
            }
            b[i] = dot(&rhs, &mcols[i]);
        }
        // least squares with a noise-level safeguard: subspace directions the
        // blur has pushed below the noise level would amplify data noise by
        // more than 1/eta and are excluded from the fit
        let beta = solve_normal_truncated(&gram, &b, eta * eta)?;

        let mut coeffs = basis.phi0.coeffs().to_vec();
        for (j, f) in basis.eigenfunctions.iter().enumerate() {
            let bj = beta[j];
            for (c, &fc) in coeffs.iter_mut().zip(f.coeffs().iter()) {
                *c += bj * fc;
            }
        }
        current = FeFunction::new(op.mesh().clone(), coeffs)?;

        let fu = op.apply_vec(current.coeffs());
        let d: Vec<f64> = fu
            .iter()
            .zip(y_noisy.coeffs().iter())
            .map(|(&a, &b)| a - b)
            .collect();
        let misfit = op.l2_norm(&d);
        misfits.push(misfit);
        if misfit <= opts.tau_max * eta {
            converged = true;
            break;
        }
    }

    let final_misfit = *misfits.last().expect("at least one iteration ran");
    let d: Vec<f64> = current
        .coeffs()
        .iter()
        .zip(u_true.coeffs().iter())
        .map(|(&a, &b)| a - b)
        .collect();
    Ok(InversionReport {
        method: "asi".into(),
        e_r: op.l2_norm(&d) / norm_true,
        tau: final_misfit / eta,
        iterations,
        converged,
        misfits,
        reconstruction: current,
    })
}

/// Truncated-SVD regularization: singular values below `sqrt(eta)` are
/// dropped before pseudo-inversion.
pub fn tsvd_solve(
    op: &ConvolutionOperator,
    y_noisy: &FeFunction,
    eta: f64,
    u_true: &FeFunction,
) -> Result<InversionReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(
            "TSVD requires a positive noise level eta".into(),
        ));
    }
    let f = op.matrix();
    let threshold = eta.sqrt();
    let coeffs = tsvd_apply(&f, y_noisy.coeffs(), threshold)?;
    let reconstruction = FeFunction::new(op.mesh().clone(), coeffs)?;
    finish_report("tsvd", op, reconstruction, y_noisy, eta, u_true, 1, true)
}

/// Pseudo-inverse application with the given absolute singular value cutoff.
pub fn tsvd_apply(f: &DMatrix<f64>, y: &[f64], threshold: f64) -> Result<Vec<f64>> {
    let svd = f.clone().svd(true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Singular("SVD did not produce U".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Singular("SVD did not produce V^T".into()))?;
    let yv = DVector::from_column_slice(y);
    let uty = u.transpose() * yv;
    let n = svd.singular_values.len();
    let mut z = DVector::<f64>::zeros(n);
    for i in 0..n {
        let s = svd.singular_values[i];
        if s >= threshold {
            z[i] = uty[i] / s;
        }
    }
    let x = vt.transpose() * z;
    Ok(x.iter().cloned().collect())
}

/// Plain dense factorization solve of `F u = y_noisy` (no regularization).
pub fn direct_solve(
    op: &ConvolutionOperator,
    y_noisy: &FeFunction,
    eta: f64,
    u_true: &FeFunction,
) -> Result<InversionReport> {
    let f = op.matrix();
    let lu = f.lu();
    let y = DVector::from_column_slice(y_noisy.coeffs());
    let x = lu
        .solve(&y)
        .ok_or_else(|| Error::Singular("kernel matrix is exactly singular".into()))?;
    let reconstruction = FeFunction::new(op.mesh().clone(), x.iter().cloned().collect())?;
    finish_report("direct", op, reconstruction, y_noisy, eta, u_true, 1, true)
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    method: &str,
    op: &ConvolutionOperator,
    reconstruction: FeFunction,
    y_noisy: &FeFunction,
    eta: f64,
    u_true: &FeFunction,
    iterations: usize,
    converged: bool,
) -> Result<InversionReport> {
    let fu = op.apply_vec(reconstruction.coeffs());
    let d: Vec<f64> = fu
        .iter()
        .zip(y_noisy.coeffs().iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let misfit = op.l2_norm(&d);
    let tau = if eta > 0.0 { misfit / eta } else { 0.0 };
    let du: Vec<f64> = reconstruction
        .coeffs()
        .iter()
        .zip(u_true.coeffs().iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let e_r = op.l2_norm(&du) / op.l2_norm(u_true.coeffs());
    Ok(InversionReport {
        method: method.into(),
        reconstruction,
        e_r,
        tau,
        iterations,
        converged,
        misfits: vec![misfit],
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Solve the PSD normal equations `G beta = b` dropping eigendirections with
/// eigenvalue below `lambda_cut` (Gram eigenvalues are squared singular
/// values of the image basis).
fn solve_normal_truncated(
    gram: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda_cut: f64,
) -> Result<DVector<f64>> {
    let se = nalgebra::SymmetricEigen::new(gram.clone());
    let lmax = se
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if !(lmax > 0.0) {
        return Err(Error::DegenerateBasis(
            "normal equations of the data misfit vanish".into(),
        ));
    }
    let cutoff = lambda_cut.max(1e-12 * lmax);
    let qtb = se.eigenvectors.transpose() * b;
    let k = b.len();
    let mut z = DVector::<f64>::zeros(k);
    for i in 0..k {
        if se.eigenvalues[i] > cutoff {
            z[i] = qtb[i] / se.eigenvalues[i];
        }
    }
    Ok(&se.eigenvectors * z)
}
