//! Reference triangulations with tagged boundary parts.
//!
//! A [`TriMesh`] is immutable once built. Construction reorients clockwise
//! triangles, derives the unique edge list used by quadratic spaces, checks
//! that tagged lines coincide with the topological boundary and chains the
//! design edges into one closed loop traversed counterclockwise around the
//! obstacle.

mod gmsh;
mod quality;

use std::collections::HashMap;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub use self::gmsh::{load_gmsh, parse_gmsh, write_gmsh};
pub use self::quality::{mesh_quality, QualityReport};
use crate::error::{Error, Result};
use crate::fem::{eval_transform, Field};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    GammaIn,
    GammaOut,
    GammaNs,
    GammaD,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::GammaIn,
        BoundaryTag::GammaOut,
        BoundaryTag::GammaNs,
        BoundaryTag::GammaD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::GammaIn => "Gamma_in",
            BoundaryTag::GammaOut => "Gamma_out",
            BoundaryTag::GammaNs => "Gamma_ns",
            BoundaryTag::GammaD => "Gamma_d",
        }
    }
}

/// Physical-group numbers identifying each boundary part in a mesh file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagMap {
    pub gamma_in: i32,
    pub gamma_out: i32,
    pub gamma_ns: i32,
    pub gamma_d: i32,
}

impl Default for TagMap {
    fn default() -> Self {
        TagMap {
            gamma_in: 1,
            gamma_out: 2,
            gamma_ns: 3,
            gamma_d: 4,
        }
    }
}

impl TagMap {
    pub fn lookup(&self, physical: i32) -> Option<BoundaryTag> {
        BoundaryTag::ALL
            .into_iter()
            .find(|&t| self.physical(t) == physical)
    }

    pub fn physical(&self, tag: BoundaryTag) -> i32 {
        match tag {
            BoundaryTag::GammaIn => self.gamma_in,
            BoundaryTag::GammaOut => self.gamma_out,
            BoundaryTag::GammaNs => self.gamma_ns,
            BoundaryTag::GammaD => self.gamma_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// The unique triangle owning this edge.
    pub triangle: usize,
    /// Index into [`TriMesh::edges`].
    pub edge: usize,
}

/// Ordered, closed cycle of design vertices.
///
/// Edge `k` runs from `vertices[k]` to `vertices[(k + 1) % n]`; the loop is
/// counterclockwise around the obstacle, so the obstacle-outward normal of
/// an edge with unit tangent `t` is `(t.y, -t.x)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignLoop {
    pub vertices: Vec<usize>,
    /// Boundary-edge index of each loop edge.
    pub boundary_edges: Vec<usize>,
}

impl DesignLoop {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    design: DesignLoop,
    /// Position of a vertex in the design loop, if it lies on it.
    design_index: Vec<Option<usize>>,
}

impl TriMesh {
    /// Builds a mesh and enforces every invariant, including a single closed
    /// design loop separated from the rest of the boundary.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let mesh = Self::build(vertices, triangles, boundary)?;
        if mesh.design.is_empty() {
            return Err(Error::MissingTag("Gamma_d"));
        }
        mesh.check_design_separation()?;
        Ok(mesh)
    }

    /// Like [`TriMesh::from_parts`] but accepts meshes without design
    /// boundary, e.g. plain flow-solver verification domains.
    pub fn without_design(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let mesh = Self::build(vertices, triangles, boundary)?;
        if !mesh.design.is_empty() {
            mesh.check_design_separation()?;
        }
        Ok(mesh)
    }

    fn build(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if let Some(i) = vertices
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let a = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if a == 0.0 || !a.is_finite() {
                return Err(Error::InvalidMesh(format!("triangle {t} has zero area")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut edge_lookup: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_owners: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for k in 0..3 {
                let key = sorted(tri[k], tri[(k + 1) % 3]);
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_owners.push(Vec::new());
                    edges.len() - 1
                });
                edge_owners[id].push(t);
                local[k] = id;
            }
            triangle_edges.push(local);
        }
        if let Some(e) = edge_owners.iter().position(|o| o.len() > 2) {
            return Err(Error::InvalidMesh(format!(
                "edge {:?} is shared by more than two triangles",
                edges[e]
            )));
        }

        let mut tagged = vec![false; edges.len()];
        let mut boundary_edges = Vec::with_capacity(boundary.len());
        for (verts, tag) in boundary {
            let key = sorted(verts[0], verts[1]);
            let edge = *edge_lookup.get(&key).ok_or_else(|| {
                Error::InvalidMesh(format!("tagged line {verts:?} is not a triangle edge"))
            })?;
            if edge_owners[edge].len() != 1 {
                return Err(Error::InvalidMesh(format!(
                    "tagged line {verts:?} is interior"
                )));
            }
            if tagged[edge] {
                return Err(Error::InvalidMesh(format!("line {verts:?} tagged twice")));
            }
            tagged[edge] = true;
            boundary_edges.push(BoundaryEdge {
                vertices: verts,
                tag,
                triangle: edge_owners[edge][0],
                edge,
            });
        }
        if let Some(e) = (0..edges.len()).find(|&e| edge_owners[e].len() == 1 && !tagged[e]) {
            return Err(Error::InvalidMesh(format!(
                "boundary edge {:?} carries no tag",
                edges[e]
            )));
        }

        let design = chain_design_loop(&triangles, &mut boundary_edges)?;
        let mut design_index = vec![None; nv];
        for (k, &v) in design.vertices.iter().enumerate() {
            design_index[v] = Some(k);
        }

        Ok(TriMesh {
            vertices,
            triangles,
            boundary: boundary_edges,
            edges,
            triangle_edges,
            design,
            design_index,
        })
    }

    fn check_design_separation(&self) -> Result<()> {
        let others = self.vertices_on(&[
            BoundaryTag::GammaIn,
            BoundaryTag::GammaOut,
            BoundaryTag::GammaNs,
        ]);
        let mut min_dist = f64::INFINITY;
        for &d in &self.design.vertices {
            for (v, &on) in others.iter().enumerate() {
                if on {
                    min_dist = min_dist.min(distance(&self.vertices[d], &self.vertices[v]));
                }
            }
        }
        if min_dist <= 0.0 {
            return Err(Error::InvalidMesh(
                "design boundary touches the rest of the boundary".into(),
            ));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Unique undirected edges, as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of each triangle, local edge `k` joining local vertices
    /// `k` and `k + 1`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn design_loop(&self) -> &DesignLoop {
        &self.design
    }

    pub fn design_position(&self, vertex: usize) -> Option<usize> {
        self.design_index[vertex]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Flags vertices lying on any boundary edge carrying one of `tags`.
    pub fn vertices_on(&self, tags: &[BoundaryTag]) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for e in self.boundary.iter().filter(|e| tags.contains(&e.tag)) {
            on[e.vertices[0]] = true;
            on[e.vertices[1]] = true;
        }
        on
    }

    /// Flags edges (by [`TriMesh::edges`] index) carrying one of `tags`.
    pub fn edges_on(&self, tags: &[BoundaryTag]) -> Vec<bool> {
        let mut on = vec![false; self.edges.len()];
        for e in self.boundary.iter().filter(|e| tags.contains(&e.tag)) {
            on[e.edge] = true;
        }
        on
    }

    /// The design boundary as a standalone closed polyline.
    pub fn design_curve(&self) -> Result<DesignCurve> {
        if self.design.is_empty() {
            return Err(Error::MissingTag("Gamma_d"));
        }
        DesignCurve::new(
            self.design
                .vertices
                .iter()
                .map(|&v| self.vertices[v])
                .collect(),
        )
    }

    /// Mesh with every vertex moved by `offset`; topology is shared.
    pub fn translated(&self, offset: Point) -> TriMesh {
        let mut m = self.clone();
        for p in &mut m.vertices {
            p[0] += offset[0];
            p[1] += offset[1];
        }
        m
    }

    /// Mesh with vertex `v` moved to `vertices[v]` (topology unchanged).
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<TriMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension("vertex count changed".into()));
        }
        let boundary = self.boundary.iter().map(|e| (e.vertices, e.tag)).collect();
        if self.design.is_empty() {
            TriMesh::without_design(vertices, self.triangles.clone(), boundary)
        } else {
            TriMesh::from_parts(vertices, self.triangles.clone(), boundary)
        }
    }
}

/// Orients design edges and chains them into a single loop.
fn chain_design_loop(
    triangles: &[[usize; 3]],
    boundary: &mut [BoundaryEdge],
) -> Result<DesignLoop> {
    // Fluid lies to the left of a counterclockwise triangle edge a->b, so the
    // loop runs b->a to keep the obstacle on its left.
    let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut first = None;
    for (i, e) in boundary.iter_mut().enumerate() {
        if e.tag != BoundaryTag::GammaD {
            continue;
        }
        let tri = triangles[e.triangle];
        let [a, b] = e.vertices;
        let forward_in_triangle = (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b);
        let (from, to) = if forward_in_triangle { (b, a) } else { (a, b) };
        e.vertices = [from, to];
        if next.insert(from, (to, i)).is_some() {
            return Err(Error::DesignLoop);
        }
        first.get_or_insert(from);
    }
    let Some(start) = first else {
        return Ok(DesignLoop::default());
    };
    let mut vertices = Vec::with_capacity(next.len());
    let mut boundary_edges = Vec::with_capacity(next.len());
    let mut v = start;
    loop {
        let &(to, e) = next.get(&v).ok_or(Error::DesignLoop)?;
        vertices.push(v);
        boundary_edges.push(e);
        v = to;
        if v == start {
            break;
        }
        if vertices.len() > next.len() {
            return Err(Error::DesignLoop);
        }
    }
    if vertices.len() != next.len() {
        return Err(Error::DesignLoop);
    }
    Ok(DesignLoop {
        vertices,
        boundary_edges,
    })
}

/// A closed polyline, counterclockwise around the enclosed region.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignCurve {
    points: Vec<Point>,
}

impl DesignCurve {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DesignLoop);
        }
        let curve = DesignCurve { points };
        for k in 0..curve.len() {
            if curve.edge_length(k) == 0.0 {
                return Err(Error::DegenerateEdge(k));
            }
        }
        Ok(curve)
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` about `center`,
    /// first vertex at angle zero.
    pub fn circle(center: Point, r: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [center[0] + r * th.cos(), center[1] + r * th.sin()]
            })
            .collect();
        DesignCurve::new(pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn edge(&self, k: usize) -> (Point, Point) {
        (self.points[k], self.points[(k + 1) % self.points.len()])
    }

    pub fn edge_nodes(&self, k: usize) -> [usize; 2] {
        [k, (k + 1) % self.points.len()]
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let (a, b) = self.edge(k);
        distance(&a, &b)
    }

    pub fn edge_tangent(&self, k: usize) -> Vector2<f64> {
        let (a, b) = self.edge(k);
        let t = Vector2::new(b[0] - a[0], b[1] - a[1]);
        t / t.norm()
    }

    /// Obstacle-outward unit normal of edge `k`.
    pub fn edge_normal(&self, k: usize) -> Vector2<f64> {
        let t = self.edge_tangent(k);
        Vector2::new(t.y, -t.x)
    }

    /// Shoelace area; positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.points)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len()).map(|k| self.edge_length(k)).sum()
    }
}

/// Obstacle-outward unit normals at the design vertices, in loop order.
///
/// The normal at a vertex is the length-weighted mean of the two adjacent
/// edge normals, renormalized.
pub fn design_normals(mesh: &TriMesh) -> Result<Vec<Vector2<f64>>> {
    let curve = mesh.design_curve()?;
    curve_vertex_normals(&curve)
}

pub fn curve_vertex_normals(curve: &DesignCurve) -> Result<Vec<Vector2<f64>>> {
    let n = curve.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let prev = (k + n - 1) % n;
        let (hp, hk) = (curve.edge_length(prev), curve.edge_length(k));
        if hp == 0.0 {
            return Err(Error::DegenerateEdge(prev));
        }
        if hk == 0.0 {
            return Err(Error::DegenerateEdge(k));
        }
        let s = curve.edge_normal(prev) * hp + curve.edge_normal(k) * hk;
        out.push(s / s.norm());
    }
    Ok(out)
}

/// Unit normal of the deformed design boundary at a point of design edge
/// `edge` (loop numbering): `(Dτ)^{-T} n / |(Dτ)^{-T} n|`.
///
/// `Dτ` is taken from the triangle owning the edge; `w` must live on the
/// vector P1 volume space.
pub fn transformed_normal(mesh: &TriMesh, w: &Field, edge: usize) -> Result<Vector2<f64>> {
    let design = mesh.design_loop();
    if edge >= design.len() {
        return Err(Error::Dimension(format!("design edge {edge} out of range")));
    }
    let be = &mesh.boundary_edges()[design.boundary_edges[edge]];
    let n = mesh.design_curve()?.edge_normal(edge);
    let tr = eval_transform(mesh, w, be.triangle)?;
    let m = tr.inverse.transpose() * n;
    Ok(m / m.norm())
}

/// Design loop vertices moved by a vector P1 displacement, in loop order.
pub fn deformed_design_points(mesh: &TriMesh, w: &Field) -> Result<Vec<Point>> {
    let wv = w.vertex_values(mesh)?;
    Ok(mesh
        .design_loop()
        .vertices
        .iter()
        .map(|&v| {
            let x = mesh.vertices()[v];
            [x[0] + wv[v][0], x[1] + wv[v][1]]
        })
        .collect())
}

/// Signed exterior angle at each vertex of a closed polygon: the rotation
/// from the incoming to the outgoing edge, positive counterclockwise.
pub fn turning_angles(points: &[Point]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|k| {
            let (a, b, c) = (points[(k + n - 1) % n], points[k], points[(k + 1) % n]);
            let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]);
            (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1])
        })
        .collect()
}

/// Index (loop numbering) and turning angle of the most upstream vertex,
/// i.e. the one with the smallest first coordinate.
pub fn upstream_tip(points: &[Point]) -> (usize, f64) {
    let k = (0..points.len())
        .min_by(|&i, &j| points[i][0].total_cmp(&points[j][0]))
        .expect("non-empty polygon");
    (k, turning_angles(points)[k])
}

pub(crate) fn sorted(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Signed polygon area by the shoelace formula.
pub fn shoelace(points: &[Point]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for k in 0..n {
        let (a, b) = (points[k], points[(k + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Gradients of the barycentric coordinates of a triangle (constant).
pub fn barycentric_gradients(p: &[Point; 3]) -> [Vector2<f64>; 3] {
    let m = Matrix2::new(
        p[1][0] - p[0][0],
        p[2][0] - p[0][0],
        p[1][1] - p[0][1],
        p[2][1] - p[0][1],
    );
    // Columns of M^{-T} are the gradients of lambda_1, lambda_2.
    let inv_t = m
        .try_inverse()
        .expect("non-degenerate triangle")
        .transpose();
    let g1 = Vector2::new(inv_t[(0, 0)], inv_t[(1, 0)]);
    let g2 = Vector2::new(inv_t[(0, 1)], inv_t[(1, 1)]);
    [-g1 - g2, g1, g2]
}
