//! Adaptive spectral basis construction and the projections built on it.
//!
//! `build_as_basis` composes assembly, Dirichlet reduction, the lifting
//! solve and the eigensolver into a [`SpectralBasis`]. Projections are
//! computed by K-dimensional least squares (normal equations on the Gram
//! matrix of the computed eigenfunctions) rather than by Fourier
//! coefficients, since the computed basis is orthonormal only up to solver
//! tolerance.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::eigen::{smallest_eigenpairs_with, LanczosOptions};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, interior_nd_order, reduce_dirichlet, solve_lifting_with,
    LdlFactorization, SparseMatrix, WeightSpec,
};
use crate::media::FeFunction;
use crate::mesh::{Mesh, Point};
use crate::quadrature::TriangleRule;

/// Lifting plus K eigenpairs, with the parameters they were built from.
#[derive(Debug)]
pub struct SpectralBasis {
    mesh: Arc<Mesh>,
    pub phi0: FeFunction,
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions on the full mesh; exactly zero on boundary vertices.
    pub eigenfunctions: Vec<FeFunction>,
    pub residuals: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub weight: WeightSpec,
    mass: SparseMatrix,
}

/// Build the AS basis of `u_delta` using its own boundary trace for the
/// lifting; `K = 0` yields the lifting only.
pub fn build_as_basis(u_delta: &FeFunction, spec: &WeightSpec, k: usize) -> Result<SpectralBasis> {
    build_as_basis_with_boundary(u_delta, u_delta, spec, k)
}

/// Same, but lift the boundary trace of `boundary_from` instead (the inverse
/// solver adapts the weight to the current iterate while keeping the known
/// boundary data fixed).
pub fn build_as_basis_with_boundary(
    u_delta: &FeFunction,
    boundary_from: &FeFunction,
    spec: &WeightSpec,
    k: usize,
) -> Result<SpectralBasis> {
    spec.validate()?;
    if !u_delta.same_mesh(boundary_from) {
        return Err(Error::DomainMismatch(
            "weight medium and boundary data live on different meshes".into(),
        ));
    }
    let mesh = u_delta.mesh().clone();
    let a = assemble_stiffness(&mesh, u_delta, spec);
    let mass = assemble_mass(&mesh);
    let (a_red, red) = reduce_dirichlet(&a, &mesh)?;
    let factor = LdlFactorization::new(&a_red, Some(interior_nd_order(&mesh)))?;

    let g: Vec<f64> = red
        .boundary()
        .iter()
        .map(|&b| boundary_from.coeffs()[b])
        .collect();
    let phi0 = solve_lifting_with(&a, &a_red, &factor, &red, &mesh, &g)?;

    let (eigenvalues, eigenfunctions, residuals) = if k > 0 {
        let m_red = mass.restrict(red.interior());
        let eig = smallest_eigenpairs_with(&a_red, &m_red, k, &factor, &LanczosOptions::default())?;
        let funcs = eig
            .eigenvectors
            .iter()
            .map(|v| {
                let full = red.expand(v, mesh.n_vertices());
                FeFunction::new(mesh.clone(), full).expect("dimensions agree")
            })
            .collect();
        (eig.eigenvalues, funcs, eig.residuals)
    } else {
        (vec![], vec![], vec![])
    };

    Ok(SpectralBasis {
        mesh: mesh.clone(),
        phi0,
        eigenvalues,
        eigenfunctions,
        residuals,
        epsilon: spec.epsilon,
        delta: mesh.h(),
        weight: *spec,
        mass,
    })
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.eigenfunctions.len()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn l2_norm(&self, v: &FeFunction) -> f64 {
        self.mass.bilinear(v.coeffs(), v.coeffs()).max(0.0).sqrt()
    }

    pub fn l2_error(&self, v: &FeFunction, w: &FeFunction) -> Result<f64> {
        if !v.same_mesh(w) {
            return Err(Error::DomainMismatch("functions on different meshes".into()));
        }
        let d: Vec<f64> = v
            .coeffs()
            .iter()
            .zip(w.coeffs().iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(self.mass.bilinear(&d, &d).max(0.0).sqrt())
    }

    /// Gram matrix of the eigenfunctions in the L2 inner product.
    fn gram(&self) -> DMatrix<f64> {
        let k = self.k();
        let mphi: Vec<Vec<f64>> = self
            .eigenfunctions
            .iter()
            .map(|f| self.mass.apply(f.coeffs()))
            .collect();
        DMatrix::from_fn(k, k, |i, j| {
            dot(self.eigenfunctions[i].coeffs(), &mphi[j])
        })
    }

    fn solve_normal_equations(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        if k == 0 {
            return Ok(vec![]);
        }
        let g = self.gram();
        let se = nalgebra::SymmetricEigen::new(g.clone());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &ev in se.eigenvalues.iter() {
            lo = lo.min(ev);
            hi = hi.max(ev);
        }
        if !(lo > 0.0) || hi / lo > 1e12 {
            return Err(Error::DegenerateBasis(format!(
                "Gram matrix condition {:.3e} exceeds 1e12",
                hi / lo.max(f64::MIN_POSITIVE)
            )));
        }
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::DegenerateBasis("Gram matrix not SPD".into()))?;
        let beta = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
        Ok(beta.iter().cloned().collect())
    }

    fn combination(&self, beta: &[f64]) -> FeFunction {
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (b, f) in beta.iter().zip(self.eigenfunctions.iter()) {
            for (o, &c) in out.iter_mut().zip(f.coeffs().iter()) {
                *o += b * c;
            }
        }
        FeFunction::new(self.mesh.clone(), out).expect("dimensions agree")
    }

    /// Orthogonal projection of an FE function onto span of the basis.
    pub fn project_pik(&self, v: &FeFunction) -> Result<(FeFunction, Vec<f64>)> {
        if !v.same_mesh(&self.phi0) {
            return Err(Error::DomainMismatch(
                "projection argument lives on a different mesh".into(),
            ));
        }
        let mv = self.mass.apply(v.coeffs());
        let rhs: Vec<f64> = self
            .eigenfunctions
            .iter()
            .map(|f| dot(f.coeffs(), &mv))
            .collect();
        let beta = self.solve_normal_equations(&rhs)?;
        Ok((self.combination(&beta), beta))
    }

    /// Orthogonal projection of an exact evaluator; the load vector is
    /// integrated with the given triangle rule.
    pub fn project_pik_exact<F>(&self, f: F, rule: &TriangleRule) -> Result<(FeFunction, Vec<f64>)>
    where
        F: Fn(Point) -> f64,
    {
        let load = load_vector_exact(&self.mesh, &f, rule);
        let rhs: Vec<f64> = self
            .eigenfunctions
            .iter()
            .map(|ef| dot(ef.coeffs(), &load))
            .collect();
        let beta = self.solve_normal_equations(&rhs)?;
        Ok((self.combination(&beta), beta))
    }

    /// Affine projection `phi0 + Pi_K(v - phi0)`.
    pub fn project_qk(&self, v: &FeFunction) -> Result<FeFunction> {
        if !v.same_mesh(&self.phi0) {
            return Err(Error::DomainMismatch(
                "projection argument lives on a different mesh".into(),
            ));
        }
        let diff: Vec<f64> = v
            .coeffs()
            .iter()
            .zip(self.phi0.coeffs().iter())
            .map(|(&a, &b)| a - b)
            .collect();
        let diff = FeFunction::new(self.mesh.clone(), diff)?;
        let (proj, _) = self.project_pik(&diff)?;
        let out: Vec<f64> = self
            .phi0
            .coeffs()
            .iter()
            .zip(proj.coeffs().iter())
            .map(|(&a, &b)| a + b)
            .collect();
        FeFunction::new(self.mesh.clone(), out)
    }

    /// Affine projection of an exact evaluator. The eigenfunction loads
    /// against `f` use quadrature; loads against `phi0` use the mass matrix
    /// (both factors are FE functions there).
    pub fn project_qk_exact<F>(&self, f: F, rule: &TriangleRule) -> Result<FeFunction>
    where
        F: Fn(Point) -> f64,
    {
        let load = load_vector_exact(&self.mesh, &f, rule);
        let mphi0 = self.mass.apply(self.phi0.coeffs());
        let rhs: Vec<f64> = self
            .eigenfunctions
            .iter()
            .map(|ef| dot(ef.coeffs(), &load) - dot(ef.coeffs(), &mphi0))
            .collect();
        let beta = self.solve_normal_equations(&rhs)?;
        let proj = self.combination(&beta);
        let out: Vec<f64> = self
            .phi0
            .coeffs()
            .iter()
            .zip(proj.coeffs().iter())
            .map(|(&a, &b)| a + b)
            .collect();
        FeFunction::new(self.mesh.clone(), out)
    }
}

/// Load vector `b[v] = int f phi_v` over the whole mesh with the given rule.
pub fn load_vector_exact<F>(mesh: &Mesh, f: &F, rule: &TriangleRule) -> Vec<f64>
where
    F: Fn(Point) -> f64,
{
    let mut load = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.element_geometry(t).expect("valid element").area;
        let verts = mesh.triangle(t);
        let mut acc = [0.0f64; 3];
        for (bary, w) in rule.points.iter().zip(rule.weights.iter()) {
            let val = f(mesh.map_barycentric(t, *bary));
            for i in 0..3 {
                acc[i] += w * bary[i] * val;
            }
        }
        for i in 0..3 {
            load[verts[i]] += area * acc[i];
        }
    }
    load
}

/// L2 norm of an FE function (exact for P1 via the mass matrix).
pub fn l2_norm_fe(v: &FeFunction) -> f64 {
    let m = assemble_mass(v.mesh());
    m.bilinear(v.coeffs(), v.coeffs()).max(0.0).sqrt()
}

/// L2 distance of two FE functions on the same mesh.
pub fn l2_error_fe(v: &FeFunction, w: &FeFunction) -> Result<f64> {
    if !v.same_mesh(w) {
        return Err(Error::DomainMismatch("functions on different meshes".into()));
    }
    let m = assemble_mass(v.mesh());
    let d: Vec<f64> = v
        .coeffs()
        .iter()
        .zip(w.coeffs().iter())
        .map(|(&a, &b)| a - b)
        .collect();
    Ok(m.bilinear(&d, &d).max(0.0).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}
