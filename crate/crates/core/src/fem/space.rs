use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{DesignCurve, Point, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Support {
    Volume,
    /// The closed design curve; nodes are numbered along the design loop.
    Curve,
}

/// Lagrange space descriptor. The degree-of-freedom map is implicit:
/// node numbering is vertices first, then (for P2) edge midpoints, and
/// vector components are blocked, `dof = comp * n_nodes + node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FESpace {
    pub degree: usize,
    pub value_dim: usize,
    pub support: Support,
    n_vertices: usize,
    n_edges: usize,
}

impl FESpace {
    pub fn volume(mesh: &TriMesh, degree: usize, value_dim: usize) -> Self {
        assert!(matches!(degree, 1 | 2) && matches!(value_dim, 1 | 2));
        FESpace {
            degree,
            value_dim,
            support: Support::Volume,
            n_vertices: mesh.n_vertices(),
            n_edges: mesh.n_edges(),
        }
    }

    /// Space on a closed curve with `n_points` vertices (and as many edges).
    pub fn curve(n_points: usize, degree: usize, value_dim: usize) -> Self {
        assert!(matches!(degree, 1 | 2) && matches!(value_dim, 1 | 2));
        FESpace {
            degree,
            value_dim,
            support: Support::Curve,
            n_vertices: n_points,
            n_edges: n_points,
        }
    }

    pub fn design(mesh: &TriMesh, degree: usize, value_dim: usize) -> Self {
        FESpace::curve(mesh.design_loop().len(), degree, value_dim)
    }

    pub fn volume_p1_vector(mesh: &TriMesh) -> Self {
        FESpace::volume(mesh, 1, 2)
    }

    pub fn volume_p1_scalar(mesh: &TriMesh) -> Self {
        FESpace::volume(mesh, 1, 1)
    }

    pub fn volume_p2_vector(mesh: &TriMesh) -> Self {
        FESpace::volume(mesh, 2, 2)
    }

    /// Scalar nodes per component.
    pub fn n_nodes(&self) -> usize {
        match self.degree {
            1 => self.n_vertices,
            _ => self.n_vertices + self.n_edges,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.value_dim
    }

    pub fn dof(&self, comp: usize, node: usize) -> usize {
        comp * self.n_nodes() + node
    }

    /// Local scalar basis functions per element: 3 or 6 on triangles,
    /// 2 or 3 on curve edges.
    pub fn n_local(&self) -> usize {
        match (self.support, self.degree) {
            (Support::Volume, 1) => 3,
            (Support::Volume, _) => 6,
            (Support::Curve, 1) => 2,
            (Support::Curve, _) => 3,
        }
    }

    /// Global nodes of element `cell` in local basis order. On triangles the
    /// P2 edge node `3 + k` sits on the edge joining local vertices `k` and
    /// `k + 1`.
    pub fn cell_nodes(&self, mesh: &TriMesh, cell: usize) -> [usize; 6] {
        let mut out = [0; 6];
        match self.support {
            Support::Volume => {
                let t = mesh.triangles()[cell];
                out[..3].copy_from_slice(&t);
                if self.degree == 2 {
                    let te = mesh.triangle_edges()[cell];
                    for k in 0..3 {
                        out[3 + k] = self.n_vertices + te[k];
                    }
                }
            }
            Support::Curve => {
                let c = self.curve_nodes(cell);
                out[..3].copy_from_slice(&c);
            }
        }
        out
    }

    /// Nodes of curve edge `k`: its two endpoints and, for P2, the midpoint.
    pub fn curve_nodes(&self, k: usize) -> [usize; 3] {
        let n = self.n_vertices;
        [k, (k + 1) % n, n + k]
    }

    pub(crate) fn check_volume(&self, mesh: &TriMesh) -> Result<()> {
        if self.support != Support::Volume
            || self.n_vertices != mesh.n_vertices()
            || self.n_edges != mesh.n_edges()
        {
            return Err(Error::Dimension("space does not live on this mesh".into()));
        }
        Ok(())
    }

    pub(crate) fn check_curve(&self, n_points: usize) -> Result<()> {
        if self.support != Support::Curve || self.n_vertices != n_points {
            return Err(Error::Dimension("space does not live on this curve".into()));
        }
        Ok(())
    }

    /// Expands a per-node flag to a per-dof flag (all components).
    pub fn dof_mask(&self, node_mask: &[bool]) -> Vec<bool> {
        assert_eq!(node_mask.len(), self.n_nodes());
        let mut out = Vec::with_capacity(self.n_dofs());
        for _ in 0..self.value_dim {
            out.extend_from_slice(node_mask);
        }
        out
    }

    /// Flags volume nodes lying on boundary edges with one of `tags`.
    pub fn boundary_nodes(&self, mesh: &TriMesh, tags: &[crate::mesh::BoundaryTag]) -> Vec<bool> {
        let mut out = mesh.vertices_on(tags);
        if self.degree == 2 {
            out.extend(mesh.edges_on(tags));
        }
        out
    }

    /// Coordinates of every scalar node.
    pub fn node_points(&self, mesh: &TriMesh) -> Vec<Point> {
        match self.support {
            Support::Volume => {
                let v = mesh.vertices();
                let mut pts = v.to_vec();
                if self.degree == 2 {
                    pts.extend(mesh.edges().iter().map(|e| midpoint(&v[e[0]], &v[e[1]])));
                }
                pts
            }
            Support::Curve => {
                let loop_pts: Vec<Point> = mesh
                    .design_loop()
                    .vertices
                    .iter()
                    .map(|&i| mesh.vertices()[i])
                    .collect();
                self.curve_node_points(&loop_pts)
            }
        }
    }

    pub fn curve_node_points(&self, points: &[Point]) -> Vec<Point> {
        let mut pts = points.to_vec();
        if self.degree == 2 {
            let n = points.len();
            pts.extend((0..n).map(|k| midpoint(&points[k], &points[(k + 1) % n])));
        }
        pts
    }
}

fn midpoint(a: &Point, b: &Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Value and gradient of one scalar basis function at a point. On curves
/// the gradient is the tangential one, `phi' t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub value: f64,
    pub grad: Vector2<f64>,
}

/// Lagrange basis on a triangle at barycentric point `l`, given the
/// (constant) barycentric gradients `g`.
pub fn triangle_shapes(degree: usize, l: &[f64; 3], g: &[Vector2<f64>; 3]) -> Vec<Shape> {
    let mut out = Vec::with_capacity(6);
    if degree == 1 {
        for k in 0..3 {
            out.push(Shape {
                value: l[k],
                grad: g[k],
            });
        }
        return out;
    }
    for k in 0..3 {
        out.push(Shape {
            value: l[k] * (2.0 * l[k] - 1.0),
            grad: g[k] * (4.0 * l[k] - 1.0),
        });
    }
    for k in 0..3 {
        let m = (k + 1) % 3;
        out.push(Shape {
            value: 4.0 * l[k] * l[m],
            grad: (g[k] * l[m] + g[m] * l[k]) * 4.0,
        });
    }
    out
}

/// Lagrange basis on a curve edge of length `len` and unit tangent `t` at
/// parameter `s ∈ [0, 1]`; local order: start, end, midpoint.
pub fn edge_shapes(degree: usize, s: f64, len: f64, t: Vector2<f64>) -> Vec<Shape> {
    let (vals, ders): (Vec<f64>, Vec<f64>) = if degree == 1 {
        (vec![1.0 - s, s], vec![-1.0, 1.0])
    } else {
        (
            vec![
                (1.0 - s) * (1.0 - 2.0 * s),
                s * (2.0 * s - 1.0),
                4.0 * s * (1.0 - s),
            ],
            vec![4.0 * s - 3.0, 4.0 * s - 1.0, 4.0 - 8.0 * s],
        )
    };
    vals.into_iter()
        .zip(ders)
        .map(|(value, d)| Shape {
            value,
            grad: t * (d / len),
        })
        .collect()
}

/// Coefficient vector on an [`FESpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub space: FESpace,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: FESpace) -> Self {
        Field {
            space,
            coeffs: vec![0.0; space.n_dofs()],
        }
    }

    pub fn new(space: FESpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("field coefficients"));
        }
        Ok(Field { space, coeffs })
    }

    /// Nodal interpolant of `f`; scalar spaces take the first component.
    pub fn interpolate(mesh: &TriMesh, space: FESpace, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let pts = space.node_points(mesh);
        Field::from_nodes(space, &pts, f)
    }

    pub fn interpolate_scalar(mesh: &TriMesh, space: FESpace, f: impl Fn(Point) -> f64) -> Self {
        Field::interpolate(mesh, space, |x| [f(x), 0.0])
    }

    /// Nodal interpolant on a standalone curve space.
    pub fn interpolate_curve(
        curve: &DesignCurve,
        space: FESpace,
        f: impl Fn(Point) -> [f64; 2],
    ) -> Self {
        let pts = space.curve_node_points(curve.points());
        Field::from_nodes(space, &pts, f)
    }

    fn from_nodes(space: FESpace, pts: &[Point], f: impl Fn(Point) -> [f64; 2]) -> Self {
        let n = space.n_nodes();
        let mut coeffs = vec![0.0; space.n_dofs()];
        for (i, &x) in pts.iter().enumerate() {
            let v = f(x);
            for c in 0..space.value_dim {
                coeffs[c * n + i] = v[c];
            }
        }
        Field { space, coeffs }
    }

    pub fn component(&self, comp: usize) -> &[f64] {
        let n = self.space.n_nodes();
        &self.coeffs[comp * n..(comp + 1) * n]
    }

    /// Node value as a 2-vector (second entry 0 for scalar spaces).
    pub fn node_value(&self, node: usize) -> [f64; 2] {
        let n = self.space.n_nodes();
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate().take(self.space.value_dim) {
            *o = self.coeffs[c * n + node];
        }
        out
    }

    /// Values at mesh vertices (P2 midpoint nodes dropped).
    pub fn vertex_values(&self, mesh: &TriMesh) -> Result<Vec<[f64; 2]>> {
        self.space.check_volume(mesh)?;
        Ok((0..mesh.n_vertices()).map(|i| self.node_value(i)).collect())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Dimension("fields on different spaces".into()));
        }
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            space: self.space,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::TriangleRule;
    use crate::mesh::barycentric_gradients;
    use crate::testing;

    #[test]
    fn dof_counts() {
        let mesh = testing::unit_square(3);
        let p1 = FESpace::volume_p1_scalar(&mesh);
        let p2 = FESpace::volume_p2_vector(&mesh);
        assert_eq!(p1.n_dofs(), 16);
        assert_eq!(p2.n_nodes(), 16 + mesh.n_edges());
        assert_eq!(p2.n_dofs(), 2 * p2.n_nodes());
        let curve = FESpace::curve(10, 1, 2);
        assert_eq!(curve.n_dofs(), 20);
        assert_eq!(curve.curve_nodes(9), [9, 0, 19]);
    }

    #[test]
    fn p2_partition_of_unity_and_nodal() {
        let p = [[0.2, 0.1], [1.3, 0.4], [0.5, 1.1]];
        let g = barycentric_gradients(&p);
        for (l, _) in TriangleRule::default().iter() {
            let s = triangle_shapes(2, l, &g);
            let sum: f64 = s.iter().map(|s| s.value).sum();
            let gsum: Vector2<f64> = s.iter().map(|s| s.grad).sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(gsum.norm() < 1e-13);
        }
        let mid = [0.5, 0.5, 0.0];
        let s = triangle_shapes(2, &mid, &g);
        assert!((s[3].value - 1.0).abs() < 1e-15);
        for (k, sk) in s.iter().enumerate() {
            if k != 3 {
                assert!(sk.value.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let mesh = testing::unit_square(2);
        let space = FESpace::volume(&mesh, 2, 1);
        let f = |x: Point| 1.0 + x[0] - 2.0 * x[1] + 3.0 * x[0] * x[1] - x[1] * x[1];
        let field = Field::interpolate_scalar(&mesh, space, f);
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let g = barycentric_gradients(&p);
            let nodes = space.cell_nodes(&mesh, t);
            for (l, _) in TriangleRule::default().iter() {
                let x = [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ];
                let s = triangle_shapes(2, l, &g);
                let u: f64 = (0..6).map(|k| s[k].value * field.coeffs[nodes[k]]).sum();
                assert!((u - f(x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn edge_shape_derivatives() {
        let t = Vector2::new(0.6, 0.8);
        for deg in [1, 2] {
            let s = edge_shapes(deg, 0.3, 2.0, t);
            let sum: f64 = s.iter().map(|s| s.value).sum();
            let gsum: Vector2<f64> = s.iter().map(|s| s.grad).sum();
            assert!((sum - 1.0).abs() < 1e-15);
            assert!(gsum.norm() < 1e-15);
        }
    }

    #[test]
    fn field_validation() {
        let space = FESpace::curve(4, 1, 1);
        assert!(Field::new(space, vec![0.0; 3]).is_err());
        assert!(Field::new(space, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Field::new(space, vec![1.0; 4]).is_ok());
    }
}
