//! Control-to-deformation operators: Laplace-Beltrami smoothing on the
//! design curve followed by an extension into the volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::{solve, solve_homogeneous_dirichlet};
use crate::fem::{
    assemble_curve, assemble_design_trace, assemble_volume_vector, curve_mass, curve_stiffness,
    elasticity_matrix, lumped_mass, stiffness_matrix, FESpace, Field, SparseMatrix,
};
use crate::mesh::{BoundaryTag, DesignCurve, Point, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Scalar smoothing, harmonic extension, motion along `n_ext`.
    S1,
    /// Scalar smoothing, elastic extension of `b n`.
    S2,
    /// Vector smoothing of `c n`, elastic extension.
    S3,
}

/// Extension direction field used by [`Strategy::S1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionDirection {
    /// `(1/2 + |x|)^2 x`.
    Scaled,
    /// `x / |x|`.
    Unit,
}

impl ExtensionDirection {
    pub fn eval(self, x: Point) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        let s = match self {
            ExtensionDirection::Scaled => (0.5 + r) * (0.5 + r),
            ExtensionDirection::Unit if r > 0.0 => 1.0 / r,
            ExtensionDirection::Unit => 0.0,
        };
        [s * x[0], s * x[1]]
    }
}

/// Boundary parts where the deformation is clamped to zero.
pub const CLAMPED: [BoundaryTag; 3] = [
    BoundaryTag::GammaIn,
    BoundaryTag::GammaOut,
    BoundaryTag::GammaNs,
];

/// `M + K` on the curve: the reaction-diffusion Laplace-Beltrami operator.
pub fn lb_matrix(curve: &DesignCurve, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    curve_mass(curve, space, degree)?.axpy(1.0, &curve_stiffness(curve, space, degree)?)
}

fn expect(field: &Field, space: FESpace, what: &str) -> Result<()> {
    if field.space != space {
        return Err(Error::Dimension(format!("{what} lives on the wrong space")));
    }
    Ok(())
}

/// `∫ b ψ + ∇_Γ b · ∇_Γ ψ ds = ∫ c ψ ds`.
pub fn solve_lb_scalar(curve: &DesignCurve, c: &Field, degree: usize) -> Result<Field> {
    let space = FESpace::curve(curve.len(), 1, 1);
    expect(c, space, "control")?;
    let rhs = curve_mass(curve, space, degree)?.mul_vec(&c.coeffs);
    Field::new(space, solve(&lb_matrix(curve, space, degree)?, &rhs)?)
}

/// `∫ b·ψ + D_Γ b : D_Γ ψ ds = ∫ c n·ψ ds` with the obstacle-outward edge
/// normal.
pub fn solve_lb_vector(curve: &DesignCurve, c: &Field, degree: usize) -> Result<Field> {
    let scalar = FESpace::curve(curve.len(), 1, 1);
    let vector = FESpace::curve(curve.len(), 1, 2);
    expect(c, scalar, "control")?;
    let coupling = assemble_curve(curve, scalar, vector, degree, |q, u, _, v, b| {
        u.value * q.normal[b] * v.value
    })?;
    let rhs = coupling.mul_vec(&c.coeffs);
    Field::new(vector, solve(&lb_matrix(curve, vector, degree)?, &rhs)?)
}

/// Vector smoothing with an arbitrary datum: `∫ b·ψ + D_Γ b : D_Γ ψ = ∫ g·ψ`.
pub fn solve_lb_vector_data(curve: &DesignCurve, g: &Field, degree: usize) -> Result<Field> {
    let vector = FESpace::curve(curve.len(), 1, 2);
    expect(g, vector, "datum")?;
    let rhs = curve_mass(curve, vector, degree)?.mul_vec(&g.coeffs);
    Field::new(vector, solve(&lb_matrix(curve, vector, degree)?, &rhs)?)
}

/// `∫ ∇z·∇ψ dx = ∫_Γd b ψ ds`, `z = 0` on the outer boundary.
pub fn solve_extension_scalar(mesh: &TriMesh, b: &Field, degree: usize) -> Result<Field> {
    let cs = FESpace::design(mesh, 1, 1);
    let vs = FESpace::volume_p1_scalar(mesh);
    expect(b, cs, "boundary datum")?;
    let trace = assemble_design_trace(mesh, cs, vs, degree, |_, u, _, v, _| u.value * v.value)?;
    let rhs = trace.mul_vec(&b.coeffs);
    let fixed = vs.dof_mask(&vs.boundary_nodes(mesh, &CLAMPED));
    let k = stiffness_matrix(mesh, vs, degree)?;
    Field::new(vs, solve_homogeneous_dirichlet(&k, &rhs, &fixed)?)
}

fn solve_elastic(mesh: &TriMesh, rhs: &[f64], degree: usize) -> Result<Field> {
    let vs = FESpace::volume_p1_vector(mesh);
    let fixed = vs.dof_mask(&vs.boundary_nodes(mesh, &CLAMPED));
    let k = elasticity_matrix(mesh, vs, degree)?;
    Field::new(vs, solve_homogeneous_dirichlet(&k, rhs, &fixed)?)
}

/// `∫ (Dw + Dw^T) : Dψ dx = ∫_Γd g·ψ ds`, `w = 0` on the outer boundary.
pub fn solve_extension_vector(mesh: &TriMesh, g: &Field, degree: usize) -> Result<Field> {
    let cs = FESpace::design(mesh, 1, 2);
    expect(g, cs, "boundary datum")?;
    let vs = FESpace::volume_p1_vector(mesh);
    let trace = assemble_design_trace(mesh, cs, vs, degree, |_, u, a, v, b| {
        if a == b {
            u.value * v.value
        } else {
            0.0
        }
    })?;
    solve_elastic(mesh, &trace.mul_vec(&g.coeffs), degree)
}

/// Elastic extension of the normal datum `b n` for a scalar curve field `b`.
pub fn solve_extension_normal(mesh: &TriMesh, b: &Field, degree: usize) -> Result<Field> {
    let cs = FESpace::design(mesh, 1, 1);
    expect(b, cs, "boundary datum")?;
    let vs = FESpace::volume_p1_vector(mesh);
    let trace = assemble_design_trace(mesh, cs, vs, degree, |q, u, _, v, c| {
        u.value * q.normal[c] * v.value
    })?;
    solve_elastic(mesh, &trace.mul_vec(&b.coeffs), degree)
}

/// Lumped-mass L² projection of `z n_ext` onto the vector P1 space, zero on
/// the clamped boundary.
pub fn project_along(
    mesh: &TriMesh,
    z: &Field,
    direction: ExtensionDirection,
    degree: usize,
) -> Result<Field> {
    let ss = FESpace::volume_p1_scalar(mesh);
    let vs = FESpace::volume_p1_vector(mesh);
    expect(z, ss, "extension")?;
    let lumped = lumped_mass(mesh, vs)?;
    let rhs = projection_rhs(mesh, z, direction, degree)?;
    let fixed = vs.dof_mask(&vs.boundary_nodes(mesh, &CLAMPED));
    let coeffs = (0..vs.n_dofs())
        .map(|i| if fixed[i] { 0.0 } else { rhs[i] / lumped[i] })
        .collect();
    Field::new(vs, coeffs)
}

/// `∫ z n_ext · ψ dx` for every vector P1 test function.
pub(crate) fn projection_rhs(
    mesh: &TriMesh,
    z: &Field,
    direction: ExtensionDirection,
    degree: usize,
) -> Result<Vec<f64>> {
    let vs = FESpace::volume_p1_vector(mesh);
    let tris = mesh.triangles();
    // z is P1: evaluate from barycentric weights recovered from x.
    assemble_volume_vector(mesh, vs, degree, |q, s, c| {
        let zq = p1_value(mesh, &tris[q.element], &z.coeffs, q.x);
        zq * direction.eval(q.x)[c] * s.value
    })
}

fn p1_value(mesh: &TriMesh, tri: &[usize; 3], coeffs: &[f64], x: Point) -> f64 {
    let v = mesh.vertices();
    let (a, b, c) = (v[tri[0]], v[tri[1]], v[tri[2]]);
    let area = crate::mesh::signed_area(&a, &b, &c);
    let l1 = crate::mesh::signed_area(&a, &x, &c) / area;
    let l2 = crate::mesh::signed_area(&a, &b, &x) / area;
    (1.0 - l1 - l2) * coeffs[tri[0]] + l1 * coeffs[tri[1]] + l2 * coeffs[tri[2]]
}

/// `w = S(c)` for the chosen strategy; `c` is a scalar P1 field on the
/// design curve.
pub fn apply_strategy(
    mesh: &TriMesh,
    strategy: Strategy,
    direction: ExtensionDirection,
    c: &Field,
    degree: usize,
) -> Result<Field> {
    let curve = mesh.design_curve()?;
    match strategy {
        Strategy::S1 => {
            let b = solve_lb_scalar(&curve, c, degree)?;
            let z = solve_extension_scalar(mesh, &b, degree)?;
            project_along(mesh, &z, direction, degree)
        }
        Strategy::S2 => {
            let b = solve_lb_scalar(&curve, c, degree)?;
            solve_extension_normal(mesh, &b, degree)
        }
        Strategy::S3 => {
            let b = solve_lb_vector(&curve, c, degree)?;
            let bs = Field::new(FESpace::design(mesh, 1, 2), b.coeffs)?;
            solve_extension_vector(mesh, &bs, degree)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::norm2;
    use crate::testing;

    const Q: usize = 5;

    fn curve_field(curve: &DesignCurve, f: impl Fn(f64) -> f64) -> Field {
        let space = FESpace::curve(curve.len(), 1, 1);
        Field::interpolate_curve(curve, space, |x| [f(x[1].atan2(x[0])), 0.0])
    }

    #[test]
    fn lb_constants_and_zero() {
        let curve = DesignCurve::circle([0.0, 0.0], 0.5, 40).unwrap();
        let b = solve_lb_scalar(&curve, &curve_field(&curve, |_| 1.0), Q).unwrap();
        assert!(b.coeffs.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let b = solve_lb_scalar(&curve, &curve_field(&curve, |_| 0.0), Q).unwrap();
        assert!(b.coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lb_eigenfunction_converges_quadratically() {
        let errs: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| testing::lb_eigen_error(n).unwrap())
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn lb_vector_reproduces_constants() {
        let curve = DesignCurve::circle([0.3, 0.1], 0.5, 31).unwrap();
        let vs = FESpace::curve(31, 1, 2);
        let g = Field::interpolate_curve(&curve, vs, |_| [0.4, -1.3]);
        let b = solve_lb_vector_data(&curve, &g, Q).unwrap();
        for i in 0..31 {
            let v = b.node_value(i);
            assert!((v[0] - 0.4).abs() < 1e-12 && (v[1] + 1.3).abs() < 1e-12);
        }
        let zero = solve_lb_vector(&curve, &curve_field(&curve, |_| 0.0), Q).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn lb_vector_matches_refined_solution() {
        // c = 1 on a circle: by symmetry b = β n with β from the radial
        // equation; compare the coarse solution against a 10x finer curve.
        let radial = |n: usize| {
            let curve = DesignCurve::circle([0.0, 0.0], 0.5, n).unwrap();
            let b = solve_lb_vector(&curve, &curve_field(&curve, |_| 1.0), Q).unwrap();
            let v = b.node_value(0);
            v[0].hypot(v[1])
        };
        let (coarse, fine) = (radial(40), radial(400));
        assert!((coarse - fine).abs() < 5e-3 * fine, "{coarse} {fine}");
        // Continuous answer: β (1 + 1/R^2) = 1.
        assert!((fine - 1.0 / 5.0).abs() < 1e-4, "{fine}");
    }

    #[test]
    fn harmonic_extension_of_log() {
        // z = log(r / R) is harmonic, vanishes at R and has fluid-outward
        // normal derivative -1/r0 on the inner circle.
        let (r0, r1) = (0.5, 2.0);
        let err = |nt: usize, nr: usize| {
            let mesh = testing::annulus_mesh(r0, r1, nt, nr);
            let cs = FESpace::design(&mesh, 1, 1);
            let b = Field::new(cs, vec![-1.0 / r0; cs.n_dofs()]).unwrap();
            let z = solve_extension_scalar(&mesh, &b, Q).unwrap();
            mesh.vertices()
                .iter()
                .zip(&z.coeffs)
                .map(|(x, zi)| (zi - (x[0].hypot(x[1]) / r1).ln()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32, 8), err(64, 16));
        assert!(e2 < 0.4 * e1, "{e1} {e2}");
        assert!(e2 < 2e-2);
    }

    #[test]
    fn extensions_are_linear_and_clamped() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 24, 4);
        let curve = mesh.design_curve().unwrap();
        let c1 = curve_field(&curve, |th| th.cos() + 0.3 * (3.0 * th).sin());
        let c2 = curve_field(&curve, |th| (2.0 * th).cos());
        let mut combo = c1.scaled(2.0);
        combo.axpy(1.0, &c2).unwrap();
        let outer = mesh.vertices_on(&CLAMPED);
        for s in [Strategy::S1, Strategy::S2, Strategy::S3] {
            let d = ExtensionDirection::Scaled;
            let w1 = apply_strategy(&mesh, s, d, &c1, Q).unwrap();
            let w2 = apply_strategy(&mesh, s, d, &c2, Q).unwrap();
            let w = apply_strategy(&mesh, s, d, &combo, Q).unwrap();
            let mut want = w1.scaled(2.0);
            want.axpy(1.0, &w2).unwrap();
            let diff: Vec<f64> = w
                .coeffs
                .iter()
                .zip(&want.coeffs)
                .map(|(a, b)| a - b)
                .collect();
            assert!(norm2(&diff) <= 1e-11 * w.norm().max(1.0), "{s:?}");
            assert!(w.norm() > 0.0);
            for (i, on) in outer.iter().enumerate() {
                if *on {
                    assert_eq!(w.node_value(i), [0.0, 0.0]);
                }
            }
            let zero = apply_strategy(&mesh, s, d, &c1.scaled(0.0), Q).unwrap();
            assert_eq!(zero.norm(), 0.0);
        }
    }

    #[test]
    fn elasticity_operator_is_symmetric() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 20, 3);
        let k = elasticity_matrix(&mesh, FESpace::volume_p1_vector(&mesh), Q).unwrap();
        assert!(k.max_abs_diff(&k.transpose()) < 1e-12);
    }

    #[test]
    fn s3_moves_tangentially() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 32, 6);
        let curve = mesh.design_curve().unwrap();
        let c = curve_field(&curve, |th| (th - 0.4).cos().max(0.0).powi(3));
        let dl = &mesh.design_loop().vertices;
        let w3 = apply_strategy(&mesh, Strategy::S3, ExtensionDirection::Scaled, &c, Q).unwrap();
        let tangential: f64 = dl
            .iter()
            .map(|&v| {
                let x = mesh.vertices()[v];
                let w = w3.node_value(v);
                (-x[1] * w[0] + x[0] * w[1]).abs()
            })
            .sum();
        assert!(tangential > 1e-6);
    }

    fn s1_misalignment(nt: usize, nr: usize) -> f64 {
        let mesh = testing::annulus_mesh(0.5, 2.0, nt, nr);
        let curve = mesh.design_curve().unwrap();
        let c = curve_field(&curve, |th| (th - 0.4).cos());
        let d = ExtensionDirection::Scaled;
        let w = apply_strategy(&mesh, Strategy::S1, d, &c, Q).unwrap();
        let (mut cross, mut total) = (0.0, 0.0);
        for (i, x) in mesh.vertices().iter().enumerate() {
            let (wi, n) = (w.node_value(i), d.eval(*x));
            let nn = n[0].hypot(n[1]);
            cross += ((wi[0] * n[1] - wi[1] * n[0]) / nn).powi(2);
            total += wi[0] * wi[0] + wi[1] * wi[1];
        }
        (cross / total).sqrt()
    }

    #[test]
    fn s1_aligns_with_direction_under_refinement() {
        let (a, b) = (s1_misalignment(24, 4), s1_misalignment(48, 8));
        assert!(b < 0.6 * a, "{a} {b}");
    }
}
