//! Weighted P1 finite element assembly and boundary handling.
//!
//! The medium-dependent weight `mu_eps[u_delta]` is evaluated once per
//! element from the constant P1 gradient, which is exact for P1 and matches
//! the discrete operator covered by the error estimates. Boundary conditions
//! are imposed by elimination so that the reduced systems stay SPD and the
//! boundary values are met exactly.

pub mod ldl;
pub mod sparse;

use std::sync::Arc;

pub use ldl::{nested_dissection_order, LdlFactorization};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};
use crate::media::FeFunction;
use crate::mesh::Mesh;

/// Functional form of the weight `mu_hat_eps(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightForm {
    /// `1 / (t^q + eps^q)^(1/q)`
    QPower,
    /// `1 / max(t, eps)`
    Max,
}

/// Weight specification: form plus the regularization parameter.
#[derive(Clone, Copy, Debug)]
pub struct WeightSpec {
    pub form: WeightForm,
    pub q: f64,
    pub epsilon: f64,
}

impl WeightSpec {
    pub fn q_power(q: f64, epsilon: f64) -> Result<Self> {
        let s = WeightSpec {
            form: WeightForm::QPower,
            q,
            epsilon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn max_form(epsilon: f64) -> Result<Self> {
        let s = WeightSpec {
            form: WeightForm::Max,
            q: 1.0,
            epsilon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "weight epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.form == WeightForm::QPower && !(self.q >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "weight exponent q must be >= 1, got {}",
                self.q
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// `mu_hat_eps(|grad|)`; one value per element suffices for P1.
pub fn weight_on_element(grad_norm: f64, spec: &WeightSpec) -> f64 {
    debug_assert!(grad_norm >= 0.0);
    match spec.form {
        WeightForm::QPower => {
            if spec.q == 2.0 {
                1.0 / (grad_norm * grad_norm + spec.epsilon * spec.epsilon).sqrt()
            } else {
                1.0 / (grad_norm.powf(spec.q) + spec.epsilon.powf(spec.q)).powf(1.0 / spec.q)
            }
        }
        WeightForm::Max => 1.0 / grad_norm.max(spec.epsilon),
    }
}

/// Per-element weights `mu_t = mu_hat_eps(|grad u_delta|_t)`.
pub fn element_weights(u_delta: &FeFunction, spec: &WeightSpec) -> Vec<f64> {
    let mesh = u_delta.mesh();
    (0..mesh.n_triangles())
        .map(|t| {
            let g = u_delta.gradient_on_element(t);
            weight_on_element((g[0] * g[0] + g[1] * g[1]).sqrt(), spec)
        })
        .collect()
}

/// Weighted stiffness matrix `A_ij = sum_t mu_t area_t grad(phi_i).grad(phi_j)`.
pub fn assemble_stiffness(mesh: &Mesh, u_delta: &FeFunction, spec: &WeightSpec) -> SparseMatrix {
    let weights = element_weights(u_delta, spec);
    assemble_stiffness_weighted(mesh, &weights)
}

/// Stiffness with externally supplied per-element weights.
pub fn assemble_stiffness_weighted(mesh: &Mesh, weights: &[f64]) -> SparseMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let geom = mesh.element_geometry(t).expect("valid element");
        let verts = mesh.triangle(t);
        let coef = weights[t] * geom.area;
        for i in 0..3 {
            for j in 0..3 {
                let v = coef
                    * (geom.grads[i][0] * geom.grads[j][0] + geom.grads[i][1] * geom.grads[j][1]);
                triplets.push((verts[i], verts[j], v));
            }
        }
    }
    SparseMatrix::from_triplets(n, &triplets, true)
}

/// Consistent P1 mass matrix: per element `area/12 * (1 + delta_ij)`.
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let geom = mesh.element_geometry(t).expect("valid element");
        let verts = mesh.triangle(t);
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j {
                    geom.area / 6.0
                } else {
                    geom.area / 12.0
                };
                triplets.push((verts[i], verts[j], v));
            }
        }
    }
    SparseMatrix::from_triplets(n, &triplets, true)
}

/// Index bookkeeping for eliminating boundary degrees of freedom.
#[derive(Clone, Debug)]
pub struct DirichletReduction {
    interior: Vec<usize>,
    boundary: Vec<usize>,
    full_to_reduced: Vec<Option<usize>>,
}

impl DirichletReduction {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let interior = mesh.interior_vertices();
        if interior.is_empty() {
            return Err(Error::InvalidInput(
                "mesh has no interior vertices; cannot reduce".into(),
            ));
        }
        let boundary = mesh.boundary_vertices();
        let mut full_to_reduced = vec![None; mesh.n_vertices()];
        for (r, &f) in interior.iter().enumerate() {
            full_to_reduced[f] = Some(r);
        }
        Ok(DirichletReduction {
            interior,
            boundary,
            full_to_reduced,
        })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn reduced_index(&self, full: usize) -> Option<usize> {
        self.full_to_reduced[full]
    }

    /// Scatter a reduced vector into a full vector with zeros on the boundary.
    pub fn expand(&self, reduced: &[f64], n_full: usize) -> Vec<f64> {
        let mut full = vec![0.0; n_full];
        for (r, &f) in self.interior.iter().enumerate() {
            full[f] = reduced[r];
        }
        full
    }

    /// Gather the interior entries of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&f| full[f]).collect()
    }
}

/// Interior-interior block of `mat` together with the reduction map.
pub fn reduce_dirichlet(mat: &SparseMatrix, mesh: &Mesh) -> Result<(SparseMatrix, DirichletReduction)> {
    if mat.n() != mesh.n_vertices() {
        return Err(Error::InvalidInput(format!(
            "matrix dimension {} does not match vertex count {}",
            mat.n(),
            mesh.n_vertices()
        )));
    }
    let red = DirichletReduction::new(mesh)?;
    let sub = mat.restrict(red.interior());
    Ok((sub, red))
}

/// Fill-reducing order for the interior vertices of a structured mesh.
pub fn interior_nd_order(mesh: &Mesh) -> Vec<usize> {
    nested_dissection_order(mesh.nx().saturating_sub(1), mesh.ny().saturating_sub(1))
}

/// Solve the lifting problem: `phi0 = g` on the boundary and
/// `A_II phi0_I = -A_IB g_B` in the interior. `boundary_values` is ordered
/// like [`DirichletReduction::boundary`] (ascending vertex index).
pub fn solve_lifting(
    a: &SparseMatrix,
    mesh: &Arc<Mesh>,
    boundary_values: &[f64],
) -> Result<FeFunction> {
    let (a_red, red) = reduce_dirichlet(a, mesh)?;
    let factor = LdlFactorization::new(&a_red, Some(interior_nd_order(mesh)))?;
    solve_lifting_with(a, &a_red, &factor, &red, mesh, boundary_values)
}

/// Lifting solve reusing an existing factorization of the reduced stiffness.
pub fn solve_lifting_with(
    a: &SparseMatrix,
    a_reduced: &SparseMatrix,
    factor: &LdlFactorization,
    red: &DirichletReduction,
    mesh: &Arc<Mesh>,
    boundary_values: &[f64],
) -> Result<FeFunction> {
    if boundary_values.len() != red.boundary().len() {
        return Err(Error::InvalidInput(format!(
            "expected {} boundary values, got {}",
            red.boundary().len(),
            boundary_values.len()
        )));
    }
    let n = mesh.n_vertices();
    // g as a full vector, zero in the interior
    let mut g = vec![0.0; n];
    for (k, &b) in red.boundary().iter().enumerate() {
        g[b] = boundary_values[k];
    }
    // b_I = -(A g)_I ; entries of A over boundary columns only contribute
    let ag = a.apply(&g);
    let b_red: Vec<f64> = red.interior().iter().map(|&i| -ag[i]).collect();

    let (x_red, rel) = factor.solve_refined(a_reduced, &b_red, 1e-10);
    if !rel.is_finite() || rel > 1e-8 {
        return Err(Error::Singular(format!(
            "lifting solve stalled at relative residual {rel:.3e}"
        )));
    }
    let mut coeffs = g;
    for (r, &f) in red.interior().iter().enumerate() {
        coeffs[f] = x_red[r];
    }
    FeFunction::new(mesh.clone(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{presets, FeFunction};
    use crate::mesh::Rect;
    use nalgebra::DMatrix;

    fn unit_mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::uniform(Rect::unit_square(), n, n).unwrap())
    }

    #[test]
    fn weight_values() {
        let spec = WeightSpec::q_power(2.0, 1.0).unwrap();
        assert!((weight_on_element(0.0, &spec) - 1.0).abs() < 1e-15);
        assert!((weight_on_element(1.0, &spec) - 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
        let spec = WeightSpec::max_form(1.0).unwrap();
        assert!((weight_on_element(3.0, &spec) - 1.0 / 3.0).abs() < 1e-15);
        // mu_hat(0) = 1/eps for both forms
        for spec in [
            WeightSpec::q_power(2.0, 1e-4).unwrap(),
            WeightSpec::q_power(1.0, 1e-4).unwrap(),
            WeightSpec::max_form(1e-4).unwrap(),
        ] {
            assert!((weight_on_element(0.0, &spec) - 1e4).abs() < 1e-9);
        }
    }

    #[test]
    fn weight_spec_validation() {
        assert!(WeightSpec::q_power(0.5, 1e-3).is_err());
        assert!(WeightSpec::q_power(2.0, 0.0).is_err());
        assert!(WeightSpec::max_form(-1.0).is_err());
    }

    #[test]
    fn five_point_stencil() {
        // mu = 1 on the 2x2 unit-square mesh: the center vertex row carries
        // the classic stencil (4 on the diagonal, -1 to the axis neighbors,
        // 0 to the diagonal neighbors)
        let mesh = unit_mesh(2);
        let u = FeFunction::constant(mesh.clone(), 0.0);
        let spec = WeightSpec::max_form(1.0).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let c = mesh.vertex_index(1, 1);
        assert!((a.get(c, c) - 4.0).abs() < 1e-14);
        for nb in [
            mesh.vertex_index(0, 1),
            mesh.vertex_index(2, 1),
            mesh.vertex_index(1, 0),
            mesh.vertex_index(1, 2),
        ] {
            assert!((a.get(c, nb) + 1.0).abs() < 1e-14);
        }
        for nb in [mesh.vertex_index(0, 0), mesh.vertex_index(2, 2)] {
            assert!(a.get(c, nb).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_in_stiffness_kernel() {
        let mesh = unit_mesh(5);
        let u = FeFunction::interpolate_medium(&presets::disc(), &mesh).unwrap();
        let spec = WeightSpec::q_power(2.0, 1e-2).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let ones = vec![1.0; a.n()];
        let r = a.apply(&ones);
        let scale = a.inf_norm();
        for v in r {
            assert!(v.abs() <= 1e-12 * scale.max(1.0));
        }
    }

    fn brute_force_stiffness(mesh: &Mesh, weights: &[f64]) -> DMatrix<f64> {
        let n = mesh.n_vertices();
        let mut a = DMatrix::zeros(n, n);
        for t in 0..mesh.n_triangles() {
            let geom = mesh.element_geometry(t).unwrap();
            let verts = mesh.triangle(t);
            for i in 0..3 {
                for j in 0..3 {
                    a[(verts[i], verts[j])] += weights[t]
                        * geom.area
                        * (geom.grads[i][0] * geom.grads[j][0]
                            + geom.grads[i][1] * geom.grads[j][1]);
                }
            }
        }
        a
    }

    #[test]
    fn sparse_matches_dense_assembly() {
        let mesh = Arc::new(Mesh::uniform(Rect::new(0.0, 0.0, 1.2, 0.9), 4, 3).unwrap());
        let u = FeFunction::interpolate_medium(
            &presets::disc(),
            &Arc::new(Mesh::uniform(Rect::unit_square(), 4, 3).unwrap()),
        );
        // use a medium interpolated on the actual mesh instead
        drop(u);
        let m = crate::media::Medium::new(mesh.domain(), 0.5)
            .with_inclusion(crate::media::Shape::disc(0.6, 0.45, 0.3), 2.0)
            .unwrap();
        let u = FeFunction::interpolate_medium(&m, &mesh).unwrap();
        let spec = WeightSpec::q_power(2.0, 0.1).unwrap();
        let weights = element_weights(&u, &spec);
        let a = assemble_stiffness(&mesh, &u, &spec);
        let dense = brute_force_stiffness(&mesh, &weights);
        for i in 0..a.n() {
            for j in 0..a.n() {
                assert!(
                    (a.get(i, j) - dense[(i, j)]).abs() <= 1e-13,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn mass_sums_to_domain_area() {
        for n in [2usize, 5, 8] {
            let mesh = unit_mesh(n);
            let m = assemble_mass(&mesh);
            let ones = vec![1.0; m.n()];
            let total = m.bilinear(&ones, &ones);
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
        }
        let mesh = Arc::new(Mesh::uniform(Rect::new(0.0, 0.0, 2.0, 3.0), 4, 5).unwrap());
        let m = assemble_mass(&mesh);
        let ones = vec![1.0; m.n()];
        assert!((m.bilinear(&ones, &ones) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn element_mass_entries() {
        // a single-cell mesh exposes the analytic P1 element mass matrix
        let mesh = Arc::new(Mesh::uniform(Rect::unit_square(), 1, 1).unwrap());
        let m = assemble_mass(&mesh);
        let area = 0.5;
        // vertex 0 (corner (0,0)) belongs to both triangles
        assert!((m.get(0, 0) - 2.0 * area / 6.0).abs() < 1e-15);
        // vertex 1 (corner (1,0)) belongs to the lower triangle only
        assert!((m.get(1, 1) - area / 6.0).abs() < 1e-15);
        assert!((m.get(0, 1) - area / 12.0).abs() < 1e-15);
    }

    #[test]
    fn reduction_on_2x2() {
        let mesh = unit_mesh(2);
        let u = FeFunction::constant(mesh.clone(), 0.0);
        let spec = WeightSpec::max_form(1.0).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let (a_red, red) = reduce_dirichlet(&a, &mesh).unwrap();
        assert_eq!(red.n_interior(), 1);
        assert_eq!(a_red.n(), 1);
        assert!((a_red.get(0, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn reduction_requires_interior() {
        let mesh = Arc::new(Mesh::uniform(Rect::unit_square(), 1, 1).unwrap());
        let m = assemble_mass(&mesh);
        assert!(reduce_dirichlet(&m, &mesh).is_err());
    }

    #[test]
    fn lifting_reproduces_constants() {
        let mesh = unit_mesh(6);
        let u = FeFunction::interpolate_medium(&presets::disc(), &mesh).unwrap();
        let spec = WeightSpec::q_power(2.0, 1e-3).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let red = DirichletReduction::new(&mesh).unwrap();
        let g = vec![2.75; red.boundary().len()];
        let phi0 = solve_lifting(&a, &mesh, &g).unwrap();
        for &c in phi0.coeffs() {
            assert!((c - 2.75).abs() < 1e-9);
        }
    }

    #[test]
    fn lifting_respects_maximum_principle() {
        let mesh = unit_mesh(8);
        let u = FeFunction::interpolate_medium(&presets::disc(), &mesh).unwrap();
        let spec = WeightSpec::q_power(2.0, 1e-6).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let red = DirichletReduction::new(&mesh).unwrap();
        let g: Vec<f64> = red
            .boundary()
            .iter()
            .map(|&b| {
                let p = mesh.vertex(b);
                0.5 + 0.5 * (std::f64::consts::PI * p.x).sin()
            })
            .collect();
        let (lo, hi) = g
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let phi0 = solve_lifting(&a, &mesh, &g).unwrap();
        for &c in phi0.coeffs() {
            assert!(c >= lo - 1e-9 && c <= hi + 1e-9);
        }
    }

    #[test]
    fn lifting_is_linear_in_boundary_data() {
        let mesh = unit_mesh(7);
        let u = FeFunction::interpolate_medium(&presets::square(), &mesh).unwrap();
        let spec = WeightSpec::q_power(2.0, 1e-4).unwrap();
        let a = assemble_stiffness(&mesh, &u, &spec);
        let red = DirichletReduction::new(&mesh).unwrap();
        let nb = red.boundary().len();
        let g1: Vec<f64> = (0..nb).map(|k| (k as f64 * 0.3).sin()).collect();
        let g2: Vec<f64> = (0..nb).map(|k| (k as f64 * 0.7).cos()).collect();
        let g12: Vec<f64> = g1.iter().zip(g2.iter()).map(|(a, b)| a + b).collect();
        let l1 = solve_lifting(&a, &mesh, &g1).unwrap();
        let l2 = solve_lifting(&a, &mesh, &g2).unwrap();
        let l12 = solve_lifting(&a, &mesh, &g12).unwrap();
        for i in 0..mesh.n_vertices() {
            let sum = l1.coeffs()[i] + l2.coeffs()[i];
            assert!((sum - l12.coeffs()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn weight_bounds_on_disc_interpolant() {
        // min element weight is of order delta; flat elements sit exactly
        // at 1/eps
        let mesh = unit_mesh(20);
        let u = FeFunction::interpolate_medium(&presets::disc(), &mesh).unwrap();
        let eps = 1e-8;
        let spec = WeightSpec::q_power(2.0, eps).unwrap();
        let w = element_weights(&u, &spec);
        let (wmin, wmax) = w
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let h = mesh.h();
        assert!(wmin >= 0.5 * h, "wmin {wmin} vs h {h}");
        assert!((wmax - 1.0 / eps).abs() / (1.0 / eps) < 1e-12);
    }
}
