//! Stokes flow on the reference mesh pulled back through `τ = id + w`,
//! inflow data and the objective.
//!
//! With `A = (Dτ)^{-1}` and `J = det Dτ`, the transformed viscous form is
//! `∫ (Du A):(Dz A) J = Σ_c ∫ ∇u_c^T M ∇z_c` with `M = J A A^T`, and the
//! divergence form `∫ q tr(Dz A) J = ∫ q Dz : cof(Dτ)`. For P1 `w` both
//! `M` and `cof(Dτ)` are constant per triangle.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::{solve, TripletBuilder};
use crate::fem::{
    cofactor, curve_mass, deformation_gradient, triangle_shapes, FESpace, Field, TriangleRule,
};
use crate::mesh::{barycentric_gradients, signed_area, BoundaryTag, Point, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `cos(π r / δ)`: one at the centerline, zero at `r = δ/2`.
    Compatible,
    /// `cos(2π r / δ)`.
    Literal,
}

/// Axial inflow velocity as a function of the distance `r = |x_2|` from the
/// tunnel centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflowProfile {
    pub kind: ProfileKind,
    pub delta: f64,
}

impl Default for InflowProfile {
    fn default() -> Self {
        InflowProfile {
            kind: ProfileKind::Compatible,
            delta: 6.0,
        }
    }
}

impl InflowProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let k = match self.kind {
            ProfileKind::Compatible => 1.0,
            ProfileKind::Literal => 2.0,
        };
        (k * std::f64::consts::PI * r / self.delta).cos()
    }

    pub fn velocity(&self, x: Point) -> [f64; 2] {
        [self.eval(x[1].abs()), 0.0]
    }
}

/// `g_in` on the P2 vector space: profile values at Γ_in nodes, zero
/// elsewhere.
pub fn inflow_values(mesh: &TriMesh, profile: &InflowProfile) -> Field {
    let space = FESpace::volume_p2_vector(mesh);
    let on = space.boundary_nodes(mesh, &[BoundaryTag::GammaIn]);
    let pts = space.node_points(mesh);
    let mut f = Field::zeros(space);
    let n = space.n_nodes();
    for i in 0..n {
        if on[i] {
            let g = profile.velocity(pts[i]);
            f.coeffs[i] = g[0];
            f.coeffs[n + i] = g[1];
        }
    }
    f
}

/// Per-triangle integrals of P2 gradients and P1 values, independent of `w`.
#[derive(Debug, Clone)]
pub struct StokesElement {
    pub area: f64,
    /// `g[i][j][a][b] = ∫ ∂_i φ_a ∂_j φ_b` over P2 basis functions.
    pub g: [[[[f64; 6]; 6]; 2]; 2],
    /// `e[j][k][b] = ∫ χ_k ∂_j φ_b`, `χ` P1 and `φ` P2.
    pub e: [[[f64; 6]; 3]; 2],
    /// `∫ χ_k` for the P1 basis.
    pub p1_mass: [f64; 3],
}

impl StokesElement {
    pub fn new(mesh: &TriMesh, t: usize, rule: &TriangleRule) -> Self {
        let p = mesh.triangle_points(t);
        let area = signed_area(&p[0], &p[1], &p[2]);
        let grads = barycentric_gradients(&p);
        let mut g = [[[[0.0; 6]; 6]; 2]; 2];
        let mut e = [[[0.0; 6]; 3]; 2];
        let mut p1_mass = [0.0; 3];
        for (l, w) in rule.iter() {
            let w = 2.0 * area * w;
            let s = triangle_shapes(2, l, &grads);
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..6 {
                        for b in 0..6 {
                            g[i][j][a][b] += w * s[a].grad[i] * s[b].grad[j];
                        }
                    }
                }
            }
            for j in 0..2 {
                for k in 0..3 {
                    for b in 0..6 {
                        e[j][k][b] += w * l[k] * s[b].grad[j];
                    }
                }
            }
            for k in 0..3 {
                p1_mass[k] += w * l[k];
            }
        }
        StokesElement {
            area,
            g,
            e,
            p1_mass,
        }
    }

    /// `K[a][b] = Σ_ij m_ij g[i][j][a][b]`; symmetric when `m` is.
    pub fn viscous(&self, m: &Matrix2<f64>) -> [[f64; 6]; 6] {
        let mut k = [[0.0; 6]; 6];
        for i in 0..2 {
            for j in 0..2 {
                let mij = m[(i, j)];
                if mij == 0.0 {
                    continue;
                }
                for a in 0..6 {
                    for b in 0..6 {
                        k[a][b] += mij * self.g[i][j][a][b];
                    }
                }
            }
        }
        k
    }

    /// `D[k][b] = Σ_j c_{comp,j} e[j][k][b]`: pressure test `k` against the
    /// velocity component `comp` at node `b`.
    pub fn divergence(&self, c: &Matrix2<f64>, comp: usize) -> [[f64; 6]; 3] {
        let mut d = [[0.0; 6]; 3];
        for j in 0..2 {
            let cj = c[(comp, j)];
            for k in 0..3 {
                for b in 0..6 {
                    d[k][b] += cj * self.e[j][k][b];
                }
            }
        }
        d
    }
}

/// Geometry-only element data for a whole mesh.
#[derive(Debug, Clone)]
pub struct FlowGeometry {
    pub elements: Vec<StokesElement>,
}

impl FlowGeometry {
    pub fn new(mesh: &TriMesh, degree: usize) -> Self {
        let rule = TriangleRule::new(degree);
        FlowGeometry {
            elements: (0..mesh.n_triangles())
                .map(|t| StokesElement::new(mesh, t, &rule))
                .collect(),
        }
    }
}

/// `(M, cof(Dτ), J)` on one element.
pub fn transformed_coefficients(f: &Matrix2<f64>) -> (Matrix2<f64>, Matrix2<f64>, f64) {
    let j = f.determinant();
    let c = cofactor(f);
    // J A A^T = cof^T cof / J.
    let m = c.transpose() * c / j;
    (m, c, j)
}

/// Velocity Dirichlet data: Γ_in carries the profile, Γ_ns and Γ_d no-slip.
/// No-slip wins at nodes shared by both.
#[derive(Debug, Clone)]
pub struct VelocityDirichlet {
    pub fixed: Vec<bool>,
    pub values: Vec<f64>,
}

impl VelocityDirichlet {
    pub fn new(mesh: &TriMesh, g_in: &Field) -> Self {
        let space = FESpace::volume_p2_vector(mesh);
        let walls = space.boundary_nodes(mesh, &[BoundaryTag::GammaNs, BoundaryTag::GammaD]);
        let inflow = space.boundary_nodes(mesh, &[BoundaryTag::GammaIn]);
        VelocityDirichlet::from_masks(space, &walls, &inflow, g_in)
    }

    fn from_masks(space: FESpace, walls: &[bool], inflow: &[bool], g_in: &Field) -> Self {
        let n = space.n_nodes();
        let mut fixed = vec![false; space.n_dofs()];
        let mut values = vec![0.0; space.n_dofs()];
        for i in 0..n {
            if walls[i] || inflow[i] {
                for c in 0..2 {
                    fixed[c * n + i] = true;
                    if !walls[i] {
                        values[c * n + i] = g_in.coeffs[c * n + i];
                    }
                }
            }
        }
        VelocityDirichlet { fixed, values }
    }

    /// Every node on a boundary edge with one of `tags` takes `g(x)`.
    pub fn on_tags(mesh: &TriMesh, tags: &[BoundaryTag], g: impl Fn(Point) -> [f64; 2]) -> Self {
        let space = FESpace::volume_p2_vector(mesh);
        let on = space.boundary_nodes(mesh, tags);
        let data = Field::interpolate(mesh, space, g);
        VelocityDirichlet::from_masks(space, &vec![false; on.len()], &on, &data)
    }
}

/// Result of a state solve.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub v: Field,
    pub p: Field,
    /// Euclidean norm of the assembled (ψ_v, ψ_p) residual over free rows.
    pub residual: f64,
    /// Norm of the right-hand side it is relative to.
    pub rhs_norm: f64,
}

fn element_transform(mesh: &TriMesh, w: &Field, t: usize) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let f = deformation_gradient(mesh, w, t)?;
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::InvertedElement { element: t, det });
    }
    let (m, c, _) = transformed_coefficients(&f);
    Ok((m, c))
}

/// Solves the transformed Stokes system for given Dirichlet data and an
/// optional body force (applied on the reference configuration). When no
/// boundary is left natural the pressure is fixed by a zero-mean constraint.
pub fn solve_stokes(
    mesh: &TriMesh,
    w: &Field,
    dirichlet: &VelocityDirichlet,
    forcing: Option<&dyn Fn(Point) -> [f64; 2]>,
    degree: usize,
) -> Result<StateSolution> {
    let vs = FESpace::volume_p2_vector(mesh);
    let ps = FESpace::volume_p1_scalar(mesh);
    let geo = FlowGeometry::new(mesh, degree);
    let mut vmap = vec![usize::MAX; vs.n_dofs()];
    let mut nfree = 0;
    for (i, fixed) in dirichlet.fixed.iter().enumerate() {
        if !fixed {
            vmap[i] = nfree;
            nfree += 1;
        }
    }
    let np = ps.n_dofs();
    // Component-0 dof index equals the node index.
    let natural = mesh.boundary_edges().iter().any(|e| {
        let mid = mesh.n_vertices() + e.edge;
        !(dirichlet.fixed[e.vertices[0]] && dirichlet.fixed[e.vertices[1]] && dirichlet.fixed[mid])
    });
    let mean_row = !natural;
    let n = nfree + np + usize::from(mean_row);
    let mut a = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];

    for (t, el) in geo.elements.iter().enumerate() {
        let (m, c) = element_transform(mesh, w, t)?;
        let k = el.viscous(&m);
        let vn = vs.cell_nodes(mesh, t);
        let pn = ps.cell_nodes(mesh, t);
        for comp in 0..2 {
            let d = el.divergence(&c, comp);
            for a_loc in 0..6 {
                let row_dof = vs.dof(comp, vn[a_loc]);
                let row = vmap[row_dof];
                if row == usize::MAX {
                    continue;
                }
                // -a(v, ψ) + b(ψ, p) = 0 on ψ-rows (signs as in the Lagrangian
                // stationarity with respect to ψ_v).
                for b_loc in 0..6 {
                    let col_dof = vs.dof(comp, vn[b_loc]);
                    let val = -k[a_loc][b_loc];
                    match vmap[col_dof] {
                        usize::MAX => rhs[row] -= val * dirichlet.values[col_dof],
                        col => a.push(row, col, val),
                    }
                }
                for kk in 0..3 {
                    a.push(row, nfree + pn[kk], d[kk][a_loc]);
                }
            }
            for kk in 0..3 {
                let row = nfree + pn[kk];
                for b_loc in 0..6 {
                    let col_dof = vs.dof(comp, vn[b_loc]);
                    let val = -d[kk][b_loc];
                    match vmap[col_dof] {
                        usize::MAX => rhs[row] -= val * dirichlet.values[col_dof],
                        col => a.push(row, col, val),
                    }
                }
            }
        }
        if mean_row {
            for kk in 0..3 {
                a.push(n - 1, nfree + pn[kk], el.p1_mass[kk]);
                a.push(nfree + pn[kk], n - 1, el.p1_mass[kk]);
            }
        }
    }
    if let Some(f) = forcing {
        let load = crate::fem::assemble_volume_vector(mesh, vs, degree, |q, s, comp| {
            f(q.x)[comp] * s.value
        })?;
        for (dof, &row) in vmap.iter().enumerate() {
            if row != usize::MAX {
                rhs[row] -= load[dof];
            }
        }
    }
    let a = a.build();
    let x = solve(&a, &rhs)?;
    let ax = a.mul_vec(&x);
    let residual = ax
        .iter()
        .zip(&rhs)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = Field::new(vs, dirichlet.values.clone())?;
    for (dof, &col) in vmap.iter().enumerate() {
        if col != usize::MAX {
            v.coeffs[dof] = x[col];
        }
    }
    let p = Field::new(ps, x[nfree..nfree + np].to_vec())?;
    Ok(StateSolution {
        v,
        p,
        residual,
        rhs_norm,
    })
}

/// State solve with the channel boundary conditions: `g_in` on Γ_in,
/// no-slip on Γ_ns ∪ Γ_d, do-nothing on Γ_out.
pub fn solve_state(
    mesh: &TriMesh,
    w: &Field,
    g_in: &Field,
    degree: usize,
) -> Result<StateSolution> {
    let bc = VelocityDirichlet::new(mesh, g_in);
    solve_stokes(mesh, w, &bc, None, degree)
}

/// `½ ∫ (Dv A):(Dv A) J dx`.
pub fn dissipation(mesh: &TriMesh, w: &Field, v: &Field, degree: usize) -> Result<f64> {
    let geo = FlowGeometry::new(mesh, degree);
    dissipation_with(mesh, &geo, w, v)
}

pub(crate) fn dissipation_with(
    mesh: &TriMesh,
    geo: &FlowGeometry,
    w: &Field,
    v: &Field,
) -> Result<f64> {
    let vs = FESpace::volume_p2_vector(mesh);
    if v.space != vs {
        return Err(Error::Dimension("velocity must be vector P2".into()));
    }
    let mut total = 0.0;
    for (t, el) in geo.elements.iter().enumerate() {
        let f = deformation_gradient(mesh, w, t)?;
        let (m, _, _) = transformed_coefficients(&f);
        let k = el.viscous(&m);
        let vn = vs.cell_nodes(mesh, t);
        for comp in 0..2 {
            for a in 0..6 {
                let va = v.coeffs[vs.dof(comp, vn[a])];
                for b in 0..6 {
                    total += 0.5 * va * k[a][b] * v.coeffs[vs.dof(comp, vn[b])];
                }
            }
        }
    }
    Ok(total)
}

/// `Σ_T |T| ((η - J_T)_+)^2`, i.e. `∫ ((η - J)_+)^2` for P1 `w`.
pub fn penalty_integral(mesh: &TriMesh, w: &Field, eta: f64) -> Result<f64> {
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let j = deformation_gradient(mesh, w, t)?.determinant();
        let p = mesh.triangle_points(t);
        let g = (eta - j).max(0.0);
        s += signed_area(&p[0], &p[1], &p[2]) * g * g;
    }
    Ok(s)
}

/// Weights of the objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub degree: usize,
}

/// Dissipation + `α/2 ∮ c²` + `γ/2 ∫ ((η - J)_+)²`.
pub fn objective(
    mesh: &TriMesh,
    w: &Field,
    v: &Field,
    c: &Field,
    params: &ObjectiveParams,
) -> Result<f64> {
    let diss = dissipation(mesh, w, v, params.degree)?;
    let curve = mesh.design_curve()?;
    let mc = curve_mass(&curve, c.space, params.degree)?;
    let reg: f64 = c
        .coeffs
        .iter()
        .zip(mc.mul_vec(&c.coeffs))
        .map(|(a, b)| a * b)
        .sum();
    let pen = penalty_integral(mesh, w, params.eta)?;
    Ok(diss + 0.5 * params.alpha * reg + 0.5 * params.gamma * pen)
}
