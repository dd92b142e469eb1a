//! Volume and barycenter of the deformed obstacle as integrals over the
//! reference design curve.
//!
//! On a design edge with reference normal `n`, `(Dτ)^{-T} n J = cof(Dτ) n`
//! where `Dτ` is taken from the fluid triangle owning the edge. For P1 `w`
//! this is constant along the edge and the integrands are polynomials in
//! arc length, so both constraints are evaluated exactly.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::transform::SINGULAR_DET;
use crate::fem::{cofactor, deformation_gradient, Field, LineRule};
use crate::mesh::{barycentric_gradients, DesignCurve, TriMesh};

/// Spatial dimension; the volume row carries a factor `1/DIM`.
pub const DIM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoResiduals {
    /// `∮ (x + w)·cof(Dτ) n - x·n ds`, i.e. `DIM` times the area change.
    pub volume_defect: f64,
    /// `∮ (x_i + w_i)² (cof(Dτ) n)_i ds` for `i = 1, 2`.
    pub barycenter_defect: [f64; 2],
}

/// Value, gradient and Hessian of one edge's contribution with respect to
/// the six P1 dofs `(component, local vertex)` of the owning triangle.
#[derive(Debug, Clone)]
pub struct EdgeConstraint {
    pub triangle: usize,
    /// Global dof of local index `comp * 3 + a` in the vector P1 space.
    pub dofs: [usize; 6],
    /// Volume defect, then the two barycenter moments.
    pub value: [f64; 3],
    pub grad: [[f64; 6]; 3],
    pub hess: [[[f64; 6]; 6]; 3],
}

fn cof_times(h: &Matrix2<f64>, n: &Vector2<f64>) -> Vector2<f64> {
    cofactor(h) * n
}

fn check_w(mesh: &TriMesh, w: &Field) -> Result<()> {
    w.space.check_volume(mesh)?;
    if w.space.degree != 1 || w.space.value_dim != 2 {
        return Err(Error::Dimension(
            "deformation must be a vector P1 field".into(),
        ));
    }
    Ok(())
}

/// Contribution of design edge `k` (loop numbering).
pub fn edge_constraint(
    mesh: &TriMesh,
    curve: &DesignCurve,
    w: &Field,
    k: usize,
    rule: &LineRule,
) -> Result<EdgeConstraint> {
    let design = mesh.design_loop();
    let be = &mesh.boundary_edges()[design.boundary_edges[k]];
    let t = be.triangle;
    let tri = mesh.triangles()[t];
    let grads = barycentric_gradients(&mesh.triangle_points(t));
    let f = deformation_gradient(mesh, w, t)?;
    let det = f.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularTransform { element: t, det });
    }
    let n = curve.edge_normal(k);
    let len = curve.edge_length(k);
    let m = cofactor(&f) * n;
    let (pa, pb) = curve.edge(k);
    let (va, vb) = (design.vertices[k], design.vertices[(k + 1) % design.len()]);
    let nv = w.space.n_nodes();

    let mut dofs = [0; 6];
    // cof(H_j) n for H_j = e_comp ⊗ ∇λ_a.
    let mut q = [Vector2::zeros(); 6];
    for comp in 0..2 {
        for a in 0..3 {
            let j = comp * 3 + a;
            dofs[j] = comp * nv + tri[a];
            let mut h = Matrix2::zeros();
            h[(comp, 0)] = grads[a].x;
            h[(comp, 1)] = grads[a].y;
            q[j] = cof_times(&h, &n);
        }
    }

    let mut value = [0.0; 3];
    let mut grad = [[0.0; 6]; 3];
    let mut hess = [[[0.0; 6]; 6]; 3];
    for (s, wq) in rule.iter() {
        let ds = wq * len;
        let x = Vector2::new((1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]);
        let mut l = [0.0; 3];
        for a in 0..3 {
            if tri[a] == va {
                l[a] = 1.0 - s;
            } else if tri[a] == vb {
                l[a] = s;
            }
        }
        let mut y = x;
        for a in 0..3 {
            y.x += l[a] * w.coeffs[tri[a]];
            y.y += l[a] * w.coeffs[nv + tri[a]];
        }
        // Trial direction j moves component j / 3 by l[j % 3].
        let hval = |j: usize| -> Vector2<f64> {
            let mut v = Vector2::zeros();
            v[j / 3] = l[j % 3];
            v
        };

        value[0] += ds * (y.dot(&m) - x.dot(&n));
        for i in 0..2 {
            value[1 + i] += ds * y[i] * y[i] * m[i];
        }
        for j in 0..6 {
            let hj = hval(j);
            // The derivative of (x + w) in direction h is h.
            grad[0][j] += ds * (hj.dot(&m) + y.dot(&q[j]));
            for i in 0..2 {
                grad[1 + i][j] += ds * (2.0 * y[i] * hj[i] * m[i] + y[i] * y[i] * q[j][i]);
            }
            for kk in 0..6 {
                let hk = hval(kk);
                hess[0][j][kk] += ds * (hj.dot(&q[kk]) + hk.dot(&q[j]));
                for i in 0..2 {
                    hess[1 + i][j][kk] += ds
                        * (2.0 * hj[i] * hk[i] * m[i]
                            + 2.0 * y[i] * hj[i] * q[kk][i]
                            + 2.0 * y[i] * hk[i] * q[j][i]);
                }
            }
        }
    }
    Ok(EdgeConstraint {
        triangle: t,
        dofs,
        value,
        grad,
        hess,
    })
}

/// Both residuals in one pass over the design loop.
pub fn geo_residuals(mesh: &TriMesh, w: &Field) -> Result<GeoResiduals> {
    check_w(mesh, w)?;
    let curve = mesh.design_curve()?;
    let rule = LineRule::new(4);
    let mut v = [0.0; 3];
    for k in 0..curve.len() {
        let e = edge_constraint(mesh, &curve, w, k, &rule)?;
        for i in 0..3 {
            v[i] += e.value[i];
        }
    }
    Ok(GeoResiduals {
        volume_defect: v[0],
        barycenter_defect: [v[1], v[2]],
    })
}

pub fn volume_residual(mesh: &TriMesh, w: &Field) -> Result<f64> {
    Ok(geo_residuals(mesh, w)?.volume_defect)
}

pub fn barycenter_residual(mesh: &TriMesh, w: &Field) -> Result<[f64; 2]> {
    Ok(geo_residuals(mesh, w)?.barycenter_defect)
}

/// Area of the obstacle enclosed by the design loop.
pub fn obstacle_volume(mesh: &TriMesh) -> Result<f64> {
    Ok(mesh.design_curve()?.signed_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FESpace;
    use crate::mesh::shoelace;
    use crate::testing;
    use proptest::prelude::*;

    fn annulus() -> TriMesh {
        testing::annulus_mesh(0.5, 2.0, 48, 6)
    }

    #[test]
    fn zero_and_translation() {
        let mesh = annulus();
        let space = FESpace::volume_p1_vector(&mesh);
        let r = geo_residuals(&mesh, &Field::zeros(space)).unwrap();
        assert_eq!(r.volume_defect, 0.0);
        assert!(r.barycenter_defect[0].abs() < 1e-12 && r.barycenter_defect[1].abs() < 1e-12);
        let t = Field::interpolate(&mesh, space, |_| [0.2, 0.0]);
        let r = geo_residuals(&mesh, &t).unwrap();
        assert!(r.volume_defect.abs() < 1e-12);
        let vol = obstacle_volume(&mesh).unwrap();
        // (x1 + t)² integrates to 2 t vol + t² ∮ n_1 = 2 t vol.
        assert!((r.barycenter_defect[0] - 2.0 * 0.2 * vol).abs() < 1e-12);
        assert!(r.barycenter_defect[1].abs() < 1e-12);
    }

    #[test]
    fn scaling() {
        let mesh = annulus();
        let n = 48.0;
        let a = 0.5 * n * 0.25 * (2.0 * std::f64::consts::PI / n).sin();
        assert!((obstacle_volume(&mesh).unwrap() - a).abs() < 1e-14);
        let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| {
            [0.1 * x[0], 0.1 * x[1]]
        });
        let r = geo_residuals(&mesh, &w).unwrap();
        assert!((r.volume_defect - 2.0 * (1.21 - 1.0) * a).abs() < 1e-13);
        assert!(r.barycenter_defect[0].abs() < 1e-12 && r.barycenter_defect[1].abs() < 1e-12);
    }

    #[test]
    fn volume_defect_is_translation_consistent() {
        let mesh = annulus();
        let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| {
            [0.05 * x[1] * x[1], -0.03 * x[0] * x[1]]
        });
        let a = volume_residual(&mesh, &w).unwrap();
        let moved = mesh.translated([0.3, -0.2]);
        let w2 = Field::new(FESpace::volume_p1_vector(&moved), w.coeffs.clone()).unwrap();
        let b = volume_residual(&moved, &w2).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} {b}");
    }

    fn deformed_loop_area(mesh: &TriMesh, w: &Field) -> f64 {
        let n = w.space.n_nodes();
        let pts: Vec<_> = mesh
            .design_loop()
            .vertices
            .iter()
            .map(|&v| {
                let x = mesh.vertices()[v];
                [x[0] + w.coeffs[v], x[1] + w.coeffs[n + v]]
            })
            .collect();
        shoelace(&pts)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn matches_shoelace(a in -0.1f64..0.1, b in -0.1f64..0.1, c in -0.1f64..0.1, d in 0.0f64..6.0) {
            let mesh = annulus();
            let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| {
                [a * (d + x[1]).sin() + c * x[0] * x[0], b * (x[0] * d).cos() - c * x[0] * x[1]]
            });
            let vol = obstacle_volume(&mesh).unwrap();
            let r = volume_residual(&mesh, &w).unwrap();
            prop_assert!((r / DIM + vol - deformed_loop_area(&mesh, &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let mesh = annulus();
        let curve = mesh.design_curve().unwrap();
        let rule = LineRule::new(4);
        let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| {
            [0.1 * x[1] + 0.05 * x[0] * x[0], -0.07 * x[0] * x[1]]
        });
        let h = 1e-6;
        for k in [0, 7, 30] {
            let e = edge_constraint(&mesh, &curve, &w, k, &rule).unwrap();
            for j in 0..6 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp.coeffs[e.dofs[j]] += h;
                wm.coeffs[e.dofs[j]] -= h;
                let ep = edge_constraint(&mesh, &curve, &wp, k, &rule).unwrap();
                let em = edge_constraint(&mesh, &curve, &wm, k, &rule).unwrap();
                for i in 0..3 {
                    let fd = (ep.value[i] - em.value[i]) / (2.0 * h);
                    assert!((fd - e.grad[i][j]).abs() < 1e-8, "{k} {i} {j}");
                    for l in 0..6 {
                        let fd = (ep.grad[i][l] - em.grad[i][l]) / (2.0 * h);
                        assert!((fd - e.hess[i][l][j]).abs() < 1e-7);
                        assert!((e.hess[i][l][j] - e.hess[i][j][l]).abs() < 1e-15);
                    }
                }
            }
        }
    }
}
