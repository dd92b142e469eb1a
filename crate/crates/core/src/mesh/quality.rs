use serde::Serialize;

use super::{distance, Point, TriMesh};
use crate::error::Result;
use crate::fem::{deformation_gradient, Field};

/// Shape statistics of the deformed mesh `τ(Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityReport {
    /// Minimum of `J_τ` over all quadrature points.
    pub min_jacobian: f64,
    pub max_jacobian: f64,
    /// Smallest interior angle in radians.
    pub min_angle: f64,
    /// Largest circumradius / (2 inradius); 1 for equilateral triangles.
    pub max_aspect_ratio: f64,
    pub n_inverted: usize,
}

/// Inverted or collapsed elements are counted, not rejected.
pub fn mesh_quality(mesh: &TriMesh, w: &Field) -> Result<QualityReport> {
    let mut r = QualityReport {
        min_jacobian: f64::INFINITY,
        max_jacobian: f64::NEG_INFINITY,
        min_angle: f64::INFINITY,
        max_aspect_ratio: 1.0,
        n_inverted: 0,
    };
    let wv = w.vertex_values(mesh)?;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        // P1 displacement: J_τ is constant on each triangle.
        let j = deformation_gradient(mesh, w, t)?.determinant();
        r.min_jacobian = r.min_jacobian.min(j);
        r.max_jacobian = r.max_jacobian.max(j);
        if j <= 0.0 {
            r.n_inverted += 1;
        }
        let p: [Point; 3] = std::array::from_fn(|k| {
            let v = tri[k];
            let x = mesh.vertices()[v];
            [x[0] + wv[v][0], x[1] + wv[v][1]]
        });
        let (angle, aspect) = triangle_shape(&p);
        r.min_angle = r.min_angle.min(angle);
        r.max_aspect_ratio = r.max_aspect_ratio.max(aspect);
    }
    Ok(r)
}

fn triangle_shape(p: &[Point; 3]) -> (f64, f64) {
    let l = [
        distance(&p[1], &p[2]),
        distance(&p[2], &p[0]),
        distance(&p[0], &p[1]),
    ];
    let area = super::signed_area(&p[0], &p[1], &p[2]).abs();
    if area == 0.0 || l.contains(&0.0) {
        return (0.0, f64::INFINITY);
    }
    let mut min_angle = f64::INFINITY;
    for k in 0..3 {
        let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
        let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
        min_angle = min_angle.min(cos.acos());
    }
    let s = 0.5 * (l[0] + l[1] + l[2]);
    let inradius = area / s;
    let circumradius = l[0] * l[1] * l[2] / (4.0 * area);
    (min_angle, circumradius / (2.0 * inradius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FESpace;
    use crate::testing;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_map() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 24, 4);
        let w = Field::zeros(FESpace::volume_p1_vector(&mesh));
        let q = mesh_quality(&mesh, &w).unwrap();
        assert!((q.min_jacobian - 1.0).abs() < 1e-14);
        assert_eq!(q.n_inverted, 0);
        assert!(q.min_angle > 0.0 && q.max_aspect_ratio >= 1.0);
    }

    #[test]
    fn collapse_to_point_is_inverted() {
        let mesh = testing::annulus_mesh(0.5, 2.0, 24, 4);
        let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| [-x[0], -x[1]]);
        let q = mesh_quality(&mesh, &w).unwrap();
        assert!(q.n_inverted > 0);
        assert!(q.min_jacobian <= 0.0);
    }

    #[test]
    fn small_random_displacement_keeps_jacobian_near_one() {
        // Each triangle's Dw has entries bounded by |Dw| < 0.1, so
        // det(I + Dw) lies in [(1 - 0.1)^2 - 0.01, (1 + 0.1)^2 + 0.01].
        let mesh = testing::annulus_mesh(0.5, 2.0, 24, 4);
        let space = FESpace::volume_p1_vector(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h_min = testing::min_edge_length(&mesh);
        let amp = 0.02 * h_min;
        let coeffs = (0..space.n_dofs())
            .map(|_| rng.gen_range(-amp..amp))
            .collect();
        let w = Field::new(space, coeffs).unwrap();
        let q = mesh_quality(&mesh, &w).unwrap();
        assert!(q.min_jacobian > 0.8 && q.max_jacobian < 1.2, "{q:?}");
        assert_eq!(q.n_inverted, 0);
    }

    #[test]
    fn equilateral_shape() {
        let s3 = 3f64.sqrt();
        let (angle, aspect) = triangle_shape(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * s3]]);
        assert!((angle - std::f64::consts::FRAC_PI_3).abs() < 1e-12);
        assert!((aspect - 1.0).abs() < 1e-12);
    }
}
