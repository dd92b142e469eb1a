use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fem::space::Field;
use crate::mesh::{barycentric_gradients, TriMesh};

/// Below this `|det Dτ|` the transformation is treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// `Dτ`, its inverse and signed determinant on one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub f: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    pub det: f64,
}

/// `Dw` of a vector P1 field on triangle `t` (row = component).
pub fn displacement_gradient(mesh: &TriMesh, w: &Field, t: usize) -> Result<Matrix2<f64>> {
    w.space.check_volume(mesh)?;
    if w.space.degree != 1 || w.space.value_dim != 2 {
        return Err(Error::Dimension(
            "deformation must be a vector P1 field".into(),
        ));
    }
    let tri = mesh.triangles()[t];
    let g = barycentric_gradients(&mesh.triangle_points(t));
    let n = w.space.n_nodes();
    let mut dw = Matrix2::zeros();
    for (k, &v) in tri.iter().enumerate() {
        for c in 0..2 {
            let wc = w.coeffs[c * n + v];
            dw[(c, 0)] += wc * g[k].x;
            dw[(c, 1)] += wc * g[k].y;
        }
    }
    Ok(dw)
}

/// `Dτ = I + Dw` on triangle `t`; constant per element for P1 `w`.
pub fn deformation_gradient(mesh: &TriMesh, w: &Field, t: usize) -> Result<Matrix2<f64>> {
    Ok(Matrix2::identity() + displacement_gradient(mesh, w, t)?)
}

/// Evaluates the transformation on element `t`. Since `w` is piecewise
/// linear the result holds at every quadrature point of the element.
pub fn eval_transform(mesh: &TriMesh, w: &Field, t: usize) -> Result<Transform> {
    let f = deformation_gradient(mesh, w, t)?;
    transform_of(f, t)
}

pub fn transform_of(f: Matrix2<f64>, element: usize) -> Result<Transform> {
    let det = f.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularTransform { element, det });
    }
    let inverse = Matrix2::new(f[(1, 1)], -f[(0, 1)], -f[(1, 0)], f[(0, 0)]) / det;
    Ok(Transform { f, inverse, det })
}

/// Cofactor matrix, `cof(F) = det(F) F^{-T}`; linear in `F` for 2x2.
pub fn cofactor(f: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(f[(1, 1)], -f[(1, 0)], -f[(0, 1)], f[(0, 0)])
}
