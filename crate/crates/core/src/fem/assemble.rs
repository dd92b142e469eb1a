//! Generic element loops and the standard operators built from them.
//!
//! Global summation order is fixed: elements in index order, quadrature
//! points in rule order, so repeated assemblies are bit-identical.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::fem::quadrature::{LineRule, TriangleRule};
use crate::fem::space::{edge_shapes, triangle_shapes, FESpace, Field, Shape};
use crate::fem::sparse::{SparseMatrix, TripletBuilder};
use crate::mesh::{barycentric_gradients, signed_area, DesignCurve, Point, TriMesh};

/// Quadrature point context handed to kernels.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: Point,
    /// Physical weight (includes the element measure).
    pub weight: f64,
    /// Unit normal of the curve edge (obstacle-outward); zero in the volume.
    pub normal: Vector2<f64>,
    pub element: usize,
}

/// Bilinear kernel: `(qp, trial shape, trial component, test shape, test
/// component) -> integrand`.
pub trait BilinearKernel: Fn(&QuadPoint, &Shape, usize, &Shape, usize) -> f64 {}
impl<F: Fn(&QuadPoint, &Shape, usize, &Shape, usize) -> f64> BilinearKernel for F {}

/// Linear kernel: `(qp, test shape, test component) -> integrand`.
pub trait LinearKernel: Fn(&QuadPoint, &Shape, usize) -> f64 {}
impl<F: Fn(&QuadPoint, &Shape, usize) -> f64> LinearKernel for F {}

pub(crate) struct VolumePoint {
    pub qp: QuadPoint,
    pub bary: [f64; 3],
}

/// Quadrature points of triangle `t` mapped to physical space.
pub(crate) fn triangle_points(mesh: &TriMesh, t: usize, rule: &TriangleRule) -> Vec<VolumePoint> {
    let p = mesh.triangle_points(t);
    let scale = 2.0 * signed_area(&p[0], &p[1], &p[2]);
    rule.iter()
        .map(|(l, w)| VolumePoint {
            qp: QuadPoint {
                x: [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ],
                weight: w * scale,
                normal: Vector2::zeros(),
                element: t,
            },
            bary: *l,
        })
        .collect()
}

fn element_matrix(
    trial: &FESpace,
    test: &FESpace,
    points: &[(QuadPoint, Vec<Shape>, Vec<Shape>)],
    kernel: &impl BilinearKernel,
) -> Vec<f64> {
    let (nu, nv) = (trial.n_local(), test.n_local());
    let (du, dv) = (trial.value_dim, test.value_dim);
    let cols = nu * du;
    let mut out = vec![0.0; nv * dv * cols];
    for (qp, su, sv) in points {
        for b in 0..dv {
            for j in 0..nv {
                let row = (b * nv + j) * cols;
                for a in 0..du {
                    for i in 0..nu {
                        out[row + a * nu + i] += qp.weight * kernel(qp, &su[i], a, &sv[j], b);
                    }
                }
            }
        }
    }
    out
}

fn scatter(
    builder: &mut TripletBuilder,
    trial: &FESpace,
    test: &FESpace,
    trial_nodes: &[usize],
    test_nodes: &[usize],
    local: &[f64],
) {
    let (nu, nv) = (trial.n_local(), test.n_local());
    let cols = nu * trial.value_dim;
    for b in 0..test.value_dim {
        for j in 0..nv {
            let r = test.dof(b, test_nodes[j]);
            for a in 0..trial.value_dim {
                for i in 0..nu {
                    let v = local[(b * nv + j) * cols + a * nu + i];
                    if v != 0.0 {
                        builder.push(r, trial.dof(a, trial_nodes[i]), v);
                    }
                }
            }
        }
    }
}

/// `A[test dof, trial dof] = Σ_T ∫_T kernel(φ_trial, φ_test) dx`.
pub fn assemble_volume(
    mesh: &TriMesh,
    trial: FESpace,
    test: FESpace,
    degree: usize,
    kernel: impl BilinearKernel,
) -> Result<SparseMatrix> {
    trial.check_volume(mesh)?;
    test.check_volume(mesh)?;
    let rule = TriangleRule::new(degree);
    let mut builder = TripletBuilder::new(test.n_dofs(), trial.n_dofs());
    for t in 0..mesh.n_triangles() {
        let g = barycentric_gradients(&mesh.triangle_points(t));
        let pts: Vec<_> = triangle_points(mesh, t, &rule)
            .into_iter()
            .map(|vp| {
                let su = triangle_shapes(trial.degree, &vp.bary, &g);
                let sv = triangle_shapes(test.degree, &vp.bary, &g);
                (vp.qp, su, sv)
            })
            .collect();
        let local = element_matrix(&trial, &test, &pts, &kernel);
        let (un, vn) = (trial.cell_nodes(mesh, t), test.cell_nodes(mesh, t));
        scatter(&mut builder, &trial, &test, &un, &vn, &local);
    }
    Ok(builder.build())
}

pub fn assemble_volume_vector(
    mesh: &TriMesh,
    test: FESpace,
    degree: usize,
    f: impl LinearKernel,
) -> Result<Vec<f64>> {
    test.check_volume(mesh)?;
    let rule = TriangleRule::new(degree);
    let mut out = vec![0.0; test.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let g = barycentric_gradients(&mesh.triangle_points(t));
        let nodes = test.cell_nodes(mesh, t);
        for vp in triangle_points(mesh, t, &rule) {
            let sv = triangle_shapes(test.degree, &vp.bary, &g);
            for b in 0..test.value_dim {
                for (j, s) in sv.iter().enumerate() {
                    out[test.dof(b, nodes[j])] += vp.qp.weight * f(&vp.qp, s, b);
                }
            }
        }
    }
    Ok(out)
}

fn curve_edge_points(curve: &DesignCurve, k: usize, rule: &LineRule) -> Vec<(f64, QuadPoint)> {
    let (a, b) = curve.edge(k);
    let len = curve.edge_length(k);
    let normal = curve.edge_normal(k);
    rule.iter()
        .map(|(s, w)| {
            (
                s,
                QuadPoint {
                    x: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    weight: w * len,
                    normal,
                    element: k,
                },
            )
        })
        .collect()
}

fn curve_local_nodes(space: &FESpace, k: usize) -> Vec<usize> {
    space.curve_nodes(k)[..space.n_local()].to_vec()
}

/// Curve analogue of [`assemble_volume`]; gradients are tangential.
pub fn assemble_curve(
    curve: &DesignCurve,
    trial: FESpace,
    test: FESpace,
    degree: usize,
    kernel: impl BilinearKernel,
) -> Result<SparseMatrix> {
    trial.check_curve(curve.len())?;
    test.check_curve(curve.len())?;
    let rule = LineRule::new(degree);
    let mut builder = TripletBuilder::new(test.n_dofs(), trial.n_dofs());
    for k in 0..curve.len() {
        let (len, t) = (curve.edge_length(k), curve.edge_tangent(k));
        let pts: Vec<_> = curve_edge_points(curve, k, &rule)
            .into_iter()
            .map(|(s, qp)| {
                (
                    qp,
                    edge_shapes(trial.degree, s, len, t),
                    edge_shapes(test.degree, s, len, t),
                )
            })
            .collect();
        let local = element_matrix(&trial, &test, &pts, &kernel);
        let (un, vn) = (curve_local_nodes(&trial, k), curve_local_nodes(&test, k));
        scatter(&mut builder, &trial, &test, &un, &vn, &local);
    }
    Ok(builder.build())
}

pub fn assemble_curve_vector(
    curve: &DesignCurve,
    test: FESpace,
    degree: usize,
    f: impl LinearKernel,
) -> Result<Vec<f64>> {
    test.check_curve(curve.len())?;
    let rule = LineRule::new(degree);
    let mut out = vec![0.0; test.n_dofs()];
    for k in 0..curve.len() {
        let (len, t) = (curve.edge_length(k), curve.edge_tangent(k));
        let nodes = curve_local_nodes(&test, k);
        for (s, qp) in curve_edge_points(curve, k, &rule) {
            let sv = edge_shapes(test.degree, s, len, t);
            for b in 0..test.value_dim {
                for (j, sh) in sv.iter().enumerate() {
                    out[test.dof(b, nodes[j])] += qp.weight * f(&qp, sh, b);
                }
            }
        }
    }
    Ok(out)
}

/// Barycentric coordinates (in the owning triangle) of the point at
/// parameter `s` along design edge `k`, plus the owning triangle.
pub(crate) fn design_edge_bary(mesh: &TriMesh, k: usize, s: f64) -> (usize, [f64; 3]) {
    let design = mesh.design_loop();
    let be = &mesh.boundary_edges()[design.boundary_edges[k]];
    let a = design.vertices[k];
    let b = design.vertices[(k + 1) % design.len()];
    let tri = mesh.triangles()[be.triangle];
    let mut l = [0.0; 3];
    for (m, &v) in tri.iter().enumerate() {
        if v == a {
            l[m] = 1.0 - s;
        } else if v == b {
            l[m] = s;
        }
    }
    (be.triangle, l)
}

/// Coupling between a design-curve trial space and the trace of a volume
/// test space: `Σ_k ∫_{edge k} kernel(φ_curve, φ_volume|Γd) ds`.
pub fn assemble_design_trace(
    mesh: &TriMesh,
    trial: FESpace,
    test: FESpace,
    degree: usize,
    kernel: impl BilinearKernel,
) -> Result<SparseMatrix> {
    let curve = mesh.design_curve()?;
    trial.check_curve(curve.len())?;
    test.check_volume(mesh)?;
    let rule = LineRule::new(degree);
    let mut builder = TripletBuilder::new(test.n_dofs(), trial.n_dofs());
    for k in 0..curve.len() {
        let (len, t) = (curve.edge_length(k), curve.edge_tangent(k));
        let mut tri = 0;
        let pts: Vec<_> = curve_edge_points(&curve, k, &rule)
            .into_iter()
            .map(|(s, qp)| {
                let (owner, l) = design_edge_bary(mesh, k, s);
                tri = owner;
                let g = barycentric_gradients(&mesh.triangle_points(owner));
                (
                    qp,
                    edge_shapes(trial.degree, s, len, t),
                    triangle_shapes(test.degree, &l, &g),
                )
            })
            .collect();
        let local = element_matrix(&trial, &test, &pts, &kernel);
        let un = curve_local_nodes(&trial, k);
        let vn = test.cell_nodes(mesh, tri);
        scatter(&mut builder, &trial, &test, &un, &vn, &local);
    }
    Ok(builder.build())
}

fn same_component(a: usize, b: usize) -> bool {
    a == b
}

/// Mass matrix, componentwise for vector spaces.
pub fn mass_matrix(mesh: &TriMesh, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    assemble_volume(mesh, space, space, degree, |_, u, a, v, b| {
        if same_component(a, b) {
            u.value * v.value
        } else {
            0.0
        }
    })
}

/// `∫ ∇u : ∇v`, componentwise for vector spaces.
pub fn stiffness_matrix(mesh: &TriMesh, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    assemble_volume(mesh, space, space, degree, |_, u, a, v, b| {
        if same_component(a, b) {
            u.grad.dot(&v.grad)
        } else {
            0.0
        }
    })
}

/// `∫ (Du + Du^T) : Dv` on a vector space (Lamé operator, μ = 1, λ = 0).
pub fn elasticity_matrix(mesh: &TriMesh, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    if space.value_dim != 2 {
        return Err(Error::Dimension("elasticity needs a vector space".into()));
    }
    assemble_volume(mesh, space, space, degree, |_, u, a, v, b| {
        let diag = if a == b { u.grad.dot(&v.grad) } else { 0.0 };
        diag + u.grad[b] * v.grad[a]
    })
}

/// Row sums of the P1 mass matrix.
pub fn lumped_mass(mesh: &TriMesh, space: FESpace) -> Result<Vec<f64>> {
    if space.degree != 1 {
        return Err(Error::Dimension("mass lumping needs a P1 space".into()));
    }
    let m = mass_matrix(mesh, space, 2)?;
    Ok((0..m.nrows())
        .map(|i| m.row(i).map(|(_, v)| v).sum())
        .collect())
}

pub fn curve_mass(curve: &DesignCurve, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    assemble_curve(curve, space, space, degree, |_, u, a, v, b| {
        if a == b {
            u.value * v.value
        } else {
            0.0
        }
    })
}

/// `∫ ∇_Γ u · ∇_Γ v ds` along the polyline.
pub fn curve_stiffness(curve: &DesignCurve, space: FESpace, degree: usize) -> Result<SparseMatrix> {
    assemble_curve(curve, space, space, degree, |_, u, a, v, b| {
        if a == b {
            u.grad.dot(&v.grad)
        } else {
            0.0
        }
    })
}

/// `‖u_h - u‖_{L²}` of a volume field against `exact` (scalar fields
/// compare against the first component).
pub fn l2_error(
    mesh: &TriMesh,
    field: &Field,
    degree: usize,
    exact: impl Fn(Point) -> [f64; 2],
) -> Result<f64> {
    let space = field.space;
    space.check_volume(mesh)?;
    let rule = TriangleRule::new(degree);
    let mut sum = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = barycentric_gradients(&mesh.triangle_points(t));
        let nodes = space.cell_nodes(mesh, t);
        for vp in triangle_points(mesh, t, &rule) {
            let shapes = triangle_shapes(space.degree, &vp.bary, &g);
            let u = exact(vp.qp.x);
            for c in 0..space.value_dim {
                let mut uh = 0.0;
                for (i, s) in shapes.iter().enumerate() {
                    uh += field.coeffs[space.dof(c, nodes[i])] * s.value;
                }
                sum += vp.qp.weight * (uh - u[c]) * (uh - u[c]);
            }
        }
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryTag, TriMesh};
    use crate::testing;

    fn reference_triangle() -> TriMesh {
        TriMesh::without_design(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                ([0, 1], BoundaryTag::GammaNs),
                ([1, 2], BoundaryTag::GammaNs),
                ([2, 0], BoundaryTag::GammaNs),
            ],
        )
        .unwrap()
    }

    #[test]
    fn p1_mass_on_reference_triangle() {
        let mesh = reference_triangle();
        let m = mass_matrix(&mesh, FESpace::volume_p1_scalar(&mesh), 5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_row_sums_vanish() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 20, 4);
        for degree in [1, 2] {
            let k = stiffness_matrix(&mesh, FESpace::volume(&mesh, degree, 2), 5).unwrap();
            for i in 0..k.nrows() {
                let s: f64 = k.row(i).map(|(_, v)| v).sum();
                assert!(s.abs() < 1e-12, "row {i}: {s}");
            }
        }
    }

    #[test]
    fn curve_mass_on_triangle_loop() {
        // Each edge contributes (h/6) [[2, 1], [1, 2]].
        let curve = DesignCurve::new(vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]).unwrap();
        let space = FESpace::curve(3, 1, 1);
        let m = curve_mass(&curve, space, 5).unwrap();
        // Node 0 touches edges of length 3 and 4; node 0-1 share the length-3 edge.
        assert!((m.get(0, 1) - 3.0 / 6.0).abs() < 1e-15);
        assert!((m.get(0, 0) - (3.0 + 4.0) * 2.0 / 6.0).abs() < 1e-14);
        assert!((m.get(1, 2) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tangential_derivative_of_linear_function() {
        let curve = DesignCurve::circle([0.1, -0.2], 0.7, 13).unwrap();
        let space = FESpace::curve(13, 1, 1);
        let gvec = Vector2::new(0.3, -1.7);
        let f = Field::interpolate_curve(&curve, space, |x| [gvec.x * x[0] + gvec.y * x[1], 0.0]);
        for k in 0..curve.len() {
            let t = curve.edge_tangent(k);
            let sh = edge_shapes(1, 0.4, curve.edge_length(k), t);
            let nodes = space.curve_nodes(k);
            let d = sh[0].grad * f.coeffs[nodes[0]] + sh[1].grad * f.coeffs[nodes[1]];
            assert!((d.dot(&t) - gvec.dot(&t)).abs() < 1e-13);
        }
    }

    #[test]
    fn linearity_and_symmetry() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 16, 3);
        let space = FESpace::volume_p2_vector(&mesh);
        let k1 = elasticity_matrix(&mesh, space, 5).unwrap();
        let k2 = mass_matrix(&mesh, space, 5).unwrap();
        let combo = assemble_volume(&mesh, space, space, 5, |_, u, a, v, b| {
            let e = if a == b { u.grad.dot(&v.grad) } else { 0.0 } + u.grad[b] * v.grad[a];
            let m = if a == b { u.value * v.value } else { 0.0 };
            2.5 * e + m
        })
        .unwrap();
        let want = k2.axpy(1.0, &k1.scaled(2.5)).unwrap();
        assert!(combo.max_abs_diff(&want) < 1e-12);
        assert!(k1.max_abs_diff(&k1.transpose()) < 1e-12);
    }

    #[test]
    fn integrates_interpolated_quadratics_exactly() {
        let mesh = testing::unit_square(3);
        let space = FESpace::volume(&mesh, 2, 1);
        let f = Field::interpolate_scalar(&mesh, space, |x| x[0] * x[0] + x[0] * x[1]);
        let ones = assemble_volume_vector(&mesh, space, 5, |_, s, _| s.value).unwrap();
        let integral: f64 = ones.iter().zip(&f.coeffs).map(|(a, b)| a * b).sum();
        // ∫_0^1∫_0^1 x^2 + xy = 1/3 + 1/4.
        assert!((integral - 7.0 / 12.0).abs() < 1e-13);
    }

    #[test]
    fn design_trace_matches_curve_mass_for_p1() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 18, 3);
        let curve = mesh.design_curve().unwrap();
        let cs = FESpace::design(&mesh, 1, 1);
        let vs = FESpace::volume_p1_scalar(&mesh);
        let trace =
            assemble_design_trace(&mesh, cs, vs, 5, |_, u, _, v, _| u.value * v.value).unwrap();
        let cm = curve_mass(&curve, cs, 5).unwrap();
        let dl = &mesh.design_loop().vertices;
        for i in 0..dl.len() {
            for j in 0..dl.len() {
                assert!((trace.get(dl[i], j) - cm.get(i, j)).abs() < 1e-15);
            }
        }
    }
}
