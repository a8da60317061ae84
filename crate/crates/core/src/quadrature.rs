//! Symmetric 19-point triangle quadrature with degree of precision 8.
//!
//! Used to integrate products of exact (discontinuous) media with FE
//! functions, where the mass matrix is of no help. The rule is embedded as
//! literals and validated in tests against the analytic moment formula
//! `int_T x^a y^b = a! b! / (a+b+2)!` on the reference triangle, so a
//! transcription error cannot pass silently.

use crate::media::FeFunction;
use crate::mesh::{Mesh, Point};

/// Symmetric quadrature rule in barycentric coordinates. Weights sum to one
/// and are scaled by the element area at use.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

// Orbit data of the 19-point rule: centroid, four 3-point orbits (a, a, 1-2a)
// and one 6-point orbit (a, b, 1-a-b).
const W_CENTROID: f64 = 0.124_245_546_498_613_93;
const ORBIT3: [(f64, f64); 4] = [
    (0.077_476_272_170_175_72, 0.464_500_343_240_971_42),
    (0.025_594_506_202_741_21, 0.421_370_329_308_085_67),
    (0.100_390_906_942_230_57, 0.170_582_163_078_088_27),
    (0.031_716_538_016_241_48, 0.049_951_612_688_240_10),
];
const W_ORBIT6: f64 = 0.028_369_963_917_869_86;
const A_ORBIT6: f64 = 0.730_219_610_158_578_73;
const B_ORBIT6: f64 = 0.011_625_050_682_043_79;

/// The embedded 19-point, degree-8 rule.
pub fn rule_deg8_19pt() -> TriangleRule {
    let mut points = Vec::with_capacity(19);
    let mut weights = Vec::with_capacity(19);
    points.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    weights.push(W_CENTROID);
    for &(w, a) in ORBIT3.iter() {
        let c = 1.0 - 2.0 * a;
        for bary in [[a, a, c], [a, c, a], [c, a, a]] {
            points.push(bary);
            weights.push(w);
        }
    }
    let (a, b) = (A_ORBIT6, B_ORBIT6);
    let c = 1.0 - a - b;
    for bary in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        points.push(bary);
        weights.push(W_ORBIT6);
    }
    TriangleRule { points, weights }
}

/// Integrate `f` over element `t`: area-weighted rule sum at the mapped
/// quadrature points.
pub fn integrate_on_element<F>(mesh: &Mesh, t: usize, f: F, rule: &TriangleRule) -> f64
where
    F: Fn(Point) -> f64,
{
    let area = mesh.element_geometry(t).expect("valid element").area;
    let mut sum = 0.0;
    for (bary, w) in rule.points.iter().zip(rule.weights.iter()) {
        sum += w * f(mesh.map_barycentric(t, *bary));
    }
    area * sum
}

/// L2 distance between an exact evaluator and an FE function:
/// `sqrt(sum_t int_t (u(x) - v(x))^2)` with the 19-point rule per element.
pub fn l2_error_exact_vs_fe<F>(u: F, v: &FeFunction, rule: &TriangleRule) -> f64
where
    F: Fn(Point) -> f64,
{
    let mesh = v.mesh();
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let area = mesh.element_geometry(t).expect("valid element").area;
        let mut sum = 0.0;
        for (bary, w) in rule.points.iter().zip(rule.weights.iter()) {
            let p = mesh.map_barycentric(t, *bary);
            let d = u(p) - v.eval_in_element(t, *bary);
            sum += w * d * d;
        }
        total += area * sum;
    }
    total.sqrt()
}
