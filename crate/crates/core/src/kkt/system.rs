//! Lagrangian, gradient and Hessian of the discrete optimality system.
//!
//! Volume terms are written per triangle in terms of the 2x2 coefficients
//! `M = J A A^T` and `C = cof(F)` (`F = I + Dw`, `A = F^{-1}`). Within one
//! triangle the flow part of the Lagrangian is `M : Qt + C : Pt` with
//! `Qt = ½ Q(v, v) - Q(v, ψ_v)` and `Pt = P(ψ_v, p) - P(v, ψ_p)`, both
//! independent of `w`. Derivatives in `w` therefore only act on `M` and
//! `C`: `C` is linear in `F` and `M` is differentiated by hand below.

use nalgebra::Matrix2;

use crate::constraints::{edge_constraint, DIM};
use crate::deform::{ExtensionDirection, Strategy};
use crate::error::{Error, Result};
use crate::fem::sparse::{SparseMatrix, TripletBuilder};
use crate::fem::transform::SINGULAR_DET;
use crate::fem::{
    assemble_curve, assemble_design_trace, assemble_volume, cofactor, curve_mass,
    elasticity_matrix, lumped_mass, stiffness_matrix, Field, LineRule, TriangleRule,
};
use crate::flow::{FlowGeometry, StokesElement, VelocityDirichlet};
use crate::kkt::layout::{Block, Layout};
use crate::kkt::state::KKTState;
use crate::mesh::{barycentric_gradients, DesignCurve, TriMesh};

/// Weights that may change between Newton solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktParams {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
}

/// Fixed discretization choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktSetup {
    pub strategy: Strategy,
    pub direction: ExtensionDirection,
    pub degree: usize,
}

/// `coef * x_test^T A x_trial`; when `test == trial` the term is read as
/// `coef/2 * x^T A x` with symmetric `A`.
#[derive(Debug, Clone)]
struct Pairing {
    test: Block,
    trial: Block,
    mat: SparseMatrix,
    coef: f64,
}

/// Per-quadrature-point indicator `η - J > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub points_per_element: usize,
    pub chi: Vec<bool>,
}

impl ActiveSet {
    pub fn n_active(&self) -> usize {
        self.chi.iter().filter(|c| **c).count()
    }

    pub fn element_active(&self, t: usize) -> bool {
        self.chi[t * self.points_per_element]
    }
}

/// The assembled operators of one mesh and strategy.
#[derive(Debug, Clone)]
pub struct KktSystem {
    mesh: TriMesh,
    setup: KktSetup,
    layout: Layout,
    geometry: FlowGeometry,
    curve: DesignCurve,
    line_rule: LineRule,
    pairings: Vec<Pairing>,
    control_mass: SparseMatrix,
    velocity_bc: Vec<f64>,
    points_per_element: usize,
}

/// Coefficients of one element at the current `w`.
struct ElementMaps {
    a: Matrix2<f64>,
    b: Matrix2<f64>,
    j: f64,
    c: Matrix2<f64>,
    m: Matrix2<f64>,
}

impl ElementMaps {
    fn new(f: &Matrix2<f64>, element: usize) -> Result<Self> {
        let j = f.determinant();
        if !j.is_finite() || j.abs() < SINGULAR_DET {
            return Err(Error::SingularTransform { element, det: j });
        }
        let c = cofactor(f);
        let a = c.transpose() / j;
        let b = a * a.transpose();
        Ok(ElementMaps {
            a,
            b,
            j,
            c,
            m: b * j,
        })
    }

    /// `dM[H] = J (tr(AH) B - A H B - B H^T A^T)`.
    fn dm(&self, h: &Matrix2<f64>) -> Matrix2<f64> {
        let ah = self.a * h;
        let ahb = ah * self.b;
        (self.b * ah.trace() - ahb - ahb.transpose()) * self.j
    }

    /// Second derivative of `M` in directions `H`, `K`.
    fn d2m(&self, h: &Matrix2<f64>, k: &Matrix2<f64>) -> Matrix2<f64> {
        let (a, b) = (&self.a, &self.b);
        let ah = a * h;
        let ak = a * k;
        let (th, tk) = (ah.trace(), ak.trace());
        let ahb = ah * b;
        let akb = ak * b;
        let x = ak * ahb + ah * akb + ahb * ak.transpose();
        (b * (th * tk - (ak * ah).trace())
            - (akb + akb.transpose()) * th
            - (ahb + ahb.transpose()) * tk
            + x
            + x.transpose())
            * self.j
    }
}

/// Element-local coefficients of the flow fields.
struct Local {
    v: [[f64; 6]; 2],
    psi_v: [[f64; 6]; 2],
    p: [f64; 3],
    psi_p: [f64; 3],
    vdofs: [[usize; 6]; 2],
    pdofs: [usize; 3],
    wdofs: [usize; 6],
    /// `Dw` direction of local w dof `comp * 3 + a`: `e_comp ⊗ ∇λ_a`.
    h: [Matrix2<f64>; 6],
}

#[derive(Default)]
struct FieldGrad {
    v: [[f64; 6]; 2],
    psi_v: [[f64; 6]; 2],
    p: [f64; 3],
    psi_p: [f64; 3],
}

fn frob(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    a.component_mul(b).sum()
}

impl Local {
    /// `Qt_ij = Σ_c Σ_ab v_ca (½ v_cb - ψ_cb) g_ij[a][b]`.
    fn qt(&self, el: &StokesElement) -> Matrix2<f64> {
        let mut q = Matrix2::zeros();
        for c in 0..2 {
            for a in 0..6 {
                let va = self.v[c][a];
                if va == 0.0 {
                    continue;
                }
                for b in 0..6 {
                    let u = va * (0.5 * self.v[c][b] - self.psi_v[c][b]);
                    for i in 0..2 {
                        for j in 0..2 {
                            q[(i, j)] += u * el.g[i][j][a][b];
                        }
                    }
                }
            }
        }
        q
    }

    /// `Pt_cj = Σ_kb e_j[k][b] (p_k ψ_cb - ψp_k v_cb)`.
    fn pt(&self, el: &StokesElement) -> Matrix2<f64> {
        let mut q = Matrix2::zeros();
        for c in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..3 {
                    for b in 0..6 {
                        s += el.e[j][k][b]
                            * (self.p[k] * self.psi_v[c][b] - self.psi_p[k] * self.v[c][b]);
                    }
                }
                q[(c, j)] = s;
            }
        }
        q
    }

    /// Gradient of `m : Qt + c : Pt` with respect to the flow fields.
    fn field_grad(&self, el: &StokesElement, m: &Matrix2<f64>, c: &Matrix2<f64>) -> FieldGrad {
        let k = el.viscous(m);
        let mut g = FieldGrad::default();
        for comp in 0..2 {
            let d = el.divergence(c, comp);
            for a in 0..6 {
                let mut gv = 0.0;
                let mut gpsi = 0.0;
                for b in 0..6 {
                    gv += k[a][b] * (self.v[comp][b] - self.psi_v[comp][b]);
                    gpsi -= k[a][b] * self.v[comp][b];
                }
                for kk in 0..3 {
                    gv -= self.psi_p[kk] * d[kk][a];
                    gpsi += self.p[kk] * d[kk][a];
                    g.p[kk] += d[kk][a] * self.psi_v[comp][a];
                    g.psi_p[kk] -= d[kk][a] * self.v[comp][a];
                }
                g.v[comp][a] = gv;
                g.psi_v[comp][a] = gpsi;
            }
        }
        g
    }
}

impl KktSystem {
    pub fn new(mesh: &TriMesh, setup: KktSetup, g_in: &Field) -> Result<Self> {
        let layout = Layout::new(mesh, setup.strategy);
        let s = layout.spaces;
        if g_in.space != s.v {
            return Err(Error::Dimension("inflow data must be vector P2".into()));
        }
        let curve = mesh.design_curve()?;
        let deg = setup.degree;
        let lb = crate::deform::lb_matrix(&curve, s.b, deg)?;
        let control_mass = curve_mass(&curve, s.c, deg)?;
        let mut pairings = vec![Pairing {
            test: Block::PsiB,
            trial: Block::B,
            mat: lb,
            coef: -1.0,
        }];
        match setup.strategy {
            Strategy::S1 => {
                let lumped = lumped_mass(mesh, s.w)?;
                let mut d = TripletBuilder::new(s.w.n_dofs(), s.w.n_dofs());
                for (i, m) in lumped.iter().enumerate() {
                    d.push(i, i, *m);
                }
                let dir = setup.direction;
                let proj = assemble_volume(mesh, s.z, s.w, deg, |q, u, _, v, comp| {
                    u.value * dir.eval(q.x)[comp] * v.value
                })?;
                let trace =
                    assemble_design_trace(mesh, s.b, s.z, deg, |_, u, _, v, _| u.value * v.value)?;
                pairings.extend([
                    Pairing {
                        test: Block::PsiW,
                        trial: Block::W,
                        mat: d.build(),
                        coef: -1.0,
                    },
                    Pairing {
                        test: Block::PsiW,
                        trial: Block::Z,
                        mat: proj,
                        coef: 1.0,
                    },
                    Pairing {
                        test: Block::PsiZ,
                        trial: Block::Z,
                        mat: stiffness_matrix(mesh, s.z, deg)?,
                        coef: -1.0,
                    },
                    Pairing {
                        test: Block::PsiZ,
                        trial: Block::B,
                        mat: trace,
                        coef: 1.0,
                    },
                    Pairing {
                        test: Block::PsiB,
                        trial: Block::C,
                        mat: control_mass.clone(),
                        coef: 1.0,
                    },
                ]);
            }
            Strategy::S2 | Strategy::S3 => {
                let trace = if setup.strategy == Strategy::S2 {
                    assemble_design_trace(mesh, s.b, s.w, deg, |q, u, _, v, comp| {
                        u.value * q.normal[comp] * v.value
                    })?
                } else {
                    assemble_design_trace(mesh, s.b, s.w, deg, |_, u, a, v, comp| {
                        if a == comp {
                            u.value * v.value
                        } else {
                            0.0
                        }
                    })?
                };
                let source = if setup.strategy == Strategy::S2 {
                    control_mass.clone()
                } else {
                    assemble_curve(&curve, s.c, s.b, deg, |q, u, _, v, comp| {
                        u.value * q.normal[comp] * v.value
                    })?
                };
                pairings.extend([
                    Pairing {
                        test: Block::PsiW,
                        trial: Block::W,
                        mat: elasticity_matrix(mesh, s.w, deg)?,
                        coef: -1.0,
                    },
                    Pairing {
                        test: Block::PsiW,
                        trial: Block::B,
                        mat: trace,
                        coef: 1.0,
                    },
                    Pairing {
                        test: Block::PsiB,
                        trial: Block::C,
                        mat: source,
                        coef: 1.0,
                    },
                ]);
            }
        }
        let velocity_bc = VelocityDirichlet::new(mesh, g_in).values;
        Ok(KktSystem {
            mesh: mesh.clone(),
            setup,
            layout,
            geometry: FlowGeometry::new(mesh, deg),
            curve,
            line_rule: LineRule::new(deg),
            pairings,
            control_mass,
            velocity_bc,
            points_per_element: TriangleRule::new(deg).len(),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn setup(&self) -> KktSetup {
        self.setup
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn control_mass(&self) -> &SparseMatrix {
        &self.control_mass
    }

    /// Zero state carrying the velocity Dirichlet data.
    pub fn initial_state(&self) -> KKTState {
        KKTState::initial(&self.layout, &self.velocity_bc)
    }

    fn check_state(&self, st: &KKTState) -> Result<()> {
        for block in Block::ALL {
            if st.block(block).len() != self.layout.block(block).full {
                return Err(Error::Dimension(format!(
                    "block {} does not match the layout",
                    block.name()
                )));
            }
        }
        Ok(())
    }

    fn local(&self, st: &KKTState, t: usize) -> Local {
        let s = &self.layout.spaces;
        let vn = s.v.cell_nodes(&self.mesh, t);
        let tri = self.mesh.triangles()[t];
        let grads = barycentric_gradients(&self.mesh.triangle_points(t));
        let nv = s.w.n_nodes();
        let mut loc = Local {
            v: [[0.0; 6]; 2],
            psi_v: [[0.0; 6]; 2],
            p: [0.0; 3],
            psi_p: [0.0; 3],
            vdofs: [[0; 6]; 2],
            pdofs: tri,
            wdofs: [0; 6],
            h: [Matrix2::zeros(); 6],
        };
        for c in 0..2 {
            for a in 0..6 {
                let d = s.v.dof(c, vn[a]);
                loc.vdofs[c][a] = d;
                loc.v[c][a] = st.v.coeffs[d];
                loc.psi_v[c][a] = st.psi_v.coeffs[d];
            }
            for a in 0..3 {
                let l = c * 3 + a;
                loc.wdofs[l] = c * nv + tri[a];
                loc.h[l][(c, 0)] = grads[a].x;
                loc.h[l][(c, 1)] = grads[a].y;
            }
        }
        for k in 0..3 {
            loc.p[k] = st.p.coeffs[tri[k]];
            loc.psi_p[k] = st.psi_p.coeffs[tri[k]];
        }
        loc
    }

    fn maps(&self, st: &KKTState, t: usize) -> Result<ElementMaps> {
        let f = crate::fem::deformation_gradient(&self.mesh, &st.w, t)?;
        ElementMaps::new(&f, t)
    }

    pub fn active_set(&self, st: &KKTState, params: &KktParams) -> Result<ActiveSet> {
        self.check_state(st)?;
        let n = self.points_per_element;
        let mut chi = Vec::with_capacity(n * self.mesh.n_triangles());
        for t in 0..self.mesh.n_triangles() {
            let j = crate::fem::deformation_gradient(&self.mesh, &st.w, t)?.determinant();
            // J is constant on the element, so all points agree.
            chi.extend(std::iter::repeat_n(params.eta - j > 0.0, n));
        }
        Ok(ActiveSet {
            points_per_element: n,
            chi,
        })
    }

    pub fn lagrangian(&self, st: &KKTState, params: &KktParams) -> Result<f64> {
        self.check_state(st)?;
        let mut total = 0.0;
        for (t, el) in self.geometry.elements.iter().enumerate() {
            let em = self.maps(st, t)?;
            let loc = self.local(st, t);
            let g = (params.eta - em.j).max(0.0);
            total += frob(&em.m, &loc.qt(el))
                + frob(&em.c, &loc.pt(el))
                + 0.5 * params.gamma * el.area * g * g;
        }
        for pr in &self.pairings {
            let ax = pr.mat.mul_vec(st.block(pr.trial));
            let y = st.block(pr.test);
            let s: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
            total += if pr.test == pr.trial {
                0.5 * pr.coef * s
            } else {
                pr.coef * s
            };
        }
        let mc = self.control_mass.mul_vec(&st.c.coeffs);
        total += 0.5 * params.alpha * st.c.coeffs.iter().zip(&mc).map(|(a, b)| a * b).sum::<f64>();
        let g = self.geo(st)?;
        total += st.lambda / DIM * g[0] + st.mu[0] * g[1] + st.mu[1] * g[2];
        Ok(total)
    }

    fn geo(&self, st: &KKTState) -> Result<[f64; 3]> {
        let mut g = [0.0; 3];
        for k in 0..self.curve.len() {
            let e = edge_constraint(&self.mesh, &self.curve, &st.w, k, &self.line_rule)?;
            for i in 0..3 {
                g[i] += e.value[i];
            }
        }
        Ok(g)
    }

    /// Gradient of the Lagrangian on every dof of every block.
    pub fn full_residual(&self, st: &KKTState, params: &KktParams) -> Result<Vec<Vec<f64>>> {
        self.check_state(st)?;
        let mut r: Vec<Vec<f64>> = Block::ALL
            .iter()
            .map(|b| vec![0.0; self.layout.block(*b).full])
            .collect();
        let (iw, iv, ip, ipv, ipp) = (
            Block::W.index(),
            Block::V.index(),
            Block::P.index(),
            Block::PsiV.index(),
            Block::PsiP.index(),
        );
        for (t, el) in self.geometry.elements.iter().enumerate() {
            let em = self.maps(st, t)?;
            let loc = self.local(st, t);
            let qt = loc.qt(el);
            let pt = loc.pt(el);
            let pen = params.gamma * el.area * (params.eta - em.j).max(0.0);
            for l in 0..6 {
                let h = &loc.h[l];
                r[iw][loc.wdofs[l]] +=
                    frob(&em.dm(h), &qt) + frob(&cofactor(h), &pt) - pen * frob(&em.c, h);
            }
            let g = loc.field_grad(el, &em.m, &em.c);
            for c in 0..2 {
                for a in 0..6 {
                    r[iv][loc.vdofs[c][a]] += g.v[c][a];
                    r[ipv][loc.vdofs[c][a]] += g.psi_v[c][a];
                }
            }
            for k in 0..3 {
                r[ip][loc.pdofs[k]] += g.p[k];
                r[ipp][loc.pdofs[k]] += g.psi_p[k];
            }
        }
        for pr in &self.pairings {
            let (ti, si) = (pr.test.index(), pr.trial.index());
            let ax = pr.mat.mul_vec(st.block(pr.trial));
            for (i, v) in ax.iter().enumerate() {
                r[ti][i] += pr.coef * v;
            }
            if pr.test != pr.trial {
                let aty = pr.mat.transpose().mul_vec(st.block(pr.test));
                for (i, v) in aty.iter().enumerate() {
                    r[si][i] += pr.coef * v;
                }
            }
        }
        let mc = self.control_mass.mul_vec(&st.c.coeffs);
        for (i, v) in mc.iter().enumerate() {
            r[Block::C.index()][i] += params.alpha * v;
        }
        let mut geo = [0.0; 3];
        for k in 0..self.curve.len() {
            let e = edge_constraint(&self.mesh, &self.curve, &st.w, k, &self.line_rule)?;
            let wts = [st.lambda / DIM, st.mu[0], st.mu[1]];
            for i in 0..3 {
                geo[i] += e.value[i];
                for l in 0..6 {
                    r[iw][e.dofs[l]] += wts[i] * e.grad[i][l];
                }
            }
        }
        r[Block::Lambda.index()][0] = geo[0] / DIM;
        r[Block::Mu.index()][0] = geo[1];
        r[Block::Mu.index()][1] = geo[2];
        Ok(r)
    }

    /// Residual restricted to the free dofs, in flat order.
    pub fn residual(&self, st: &KKTState, params: &KktParams) -> Result<Vec<f64>> {
        let r = self.layout.gather(&self.full_residual(st, params)?);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual"));
        }
        Ok(r)
    }

    /// Generalized Hessian of the Lagrangian on the free dofs.
    pub fn jacobian(&self, st: &KKTState, params: &KktParams) -> Result<SparseMatrix> {
        self.check_state(st)?;
        let n = self.layout.len();
        let mut tb = TripletBuilder::with_capacity(n, n, 220 * self.mesh.n_triangles());
        let layout = &self.layout;
        let mut push = |rb: Block, ri: usize, cb: Block, ci: usize, val: f64| {
            if val == 0.0 {
                return;
            }
            if let (Some(r), Some(c)) = (layout.flat(rb, ri), layout.flat(cb, ci)) {
                tb.push(r, c, val);
            }
        };
        let sym = |push: &mut dyn FnMut(Block, usize, Block, usize, f64),
                   rb: Block,
                   ri: usize,
                   cb: Block,
                   ci: usize,
                   val: f64| {
            push(rb, ri, cb, ci, val);
            push(cb, ci, rb, ri, val);
        };
        for (t, el) in self.geometry.elements.iter().enumerate() {
            let em = self.maps(st, t)?;
            let loc = self.local(st, t);
            let qt = loc.qt(el);
            let k = el.viscous(&em.m);
            for comp in 0..2 {
                let vd = &loc.vdofs[comp];
                let d = el.divergence(&em.c, comp);
                for a in 0..6 {
                    for b in 0..6 {
                        push(Block::V, vd[a], Block::V, vd[b], k[a][b]);
                        push(Block::V, vd[a], Block::PsiV, vd[b], -k[a][b]);
                        push(Block::PsiV, vd[a], Block::V, vd[b], -k[a][b]);
                    }
                    for kk in 0..3 {
                        sym(
                            &mut push,
                            Block::V,
                            vd[a],
                            Block::PsiP,
                            loc.pdofs[kk],
                            -d[kk][a],
                        );
                        sym(
                            &mut push,
                            Block::PsiV,
                            vd[a],
                            Block::P,
                            loc.pdofs[kk],
                            d[kk][a],
                        );
                    }
                }
            }
            for l in 0..6 {
                let h = &loc.h[l];
                let g = loc.field_grad(el, &em.dm(h), &cofactor(h));
                let wl = loc.wdofs[l];
                for c in 0..2 {
                    for a in 0..6 {
                        sym(
                            &mut push,
                            Block::W,
                            wl,
                            Block::V,
                            loc.vdofs[c][a],
                            g.v[c][a],
                        );
                        sym(
                            &mut push,
                            Block::W,
                            wl,
                            Block::PsiV,
                            loc.vdofs[c][a],
                            g.psi_v[c][a],
                        );
                    }
                }
                for kk in 0..3 {
                    sym(&mut push, Block::W, wl, Block::P, loc.pdofs[kk], g.p[kk]);
                    sym(
                        &mut push,
                        Block::W,
                        wl,
                        Block::PsiP,
                        loc.pdofs[kk],
                        g.psi_p[kk],
                    );
                }
            }
            let gap = params.eta - em.j;
            let chi = gap > 0.0;
            let pos = gap.max(0.0);
            for l in 0..6 {
                let hl = &loc.h[l];
                let dj_l = frob(&em.c, hl);
                for m in 0..6 {
                    let hm = &loc.h[m];
                    let mut val = frob(&em.d2m(hl, hm), &qt);
                    if params.gamma != 0.0 {
                        let chi_term = if chi { dj_l * frob(&em.c, hm) } else { 0.0 };
                        val += params.gamma * el.area * (chi_term - pos * frob(&cofactor(hl), hm));
                    }
                    push(Block::W, loc.wdofs[l], Block::W, loc.wdofs[m], val);
                }
            }
        }
        for pr in &self.pairings {
            for (i, j, a) in pr.mat.triplets() {
                if pr.test == pr.trial {
                    push(pr.test, i, pr.trial, j, pr.coef * a);
                } else {
                    sym(&mut push, pr.test, i, pr.trial, j, pr.coef * a);
                }
            }
        }
        for (i, j, a) in self.control_mass.triplets() {
            push(Block::C, i, Block::C, j, params.alpha * a);
        }
        for k in 0..self.curve.len() {
            let e = edge_constraint(&self.mesh, &self.curve, &st.w, k, &self.line_rule)?;
            let wts = [st.lambda / DIM, st.mu[0], st.mu[1]];
            for l in 0..6 {
                sym(
                    &mut push,
                    Block::W,
                    e.dofs[l],
                    Block::Lambda,
                    0,
                    e.grad[0][l] / DIM,
                );
                sym(&mut push, Block::W, e.dofs[l], Block::Mu, 0, e.grad[1][l]);
                sym(&mut push, Block::W, e.dofs[l], Block::Mu, 1, e.grad[2][l]);
                for m in 0..6 {
                    let val: f64 = (0..3).map(|i| wts[i] * e.hess[i][l][m]).sum();
                    push(Block::W, e.dofs[l], Block::W, e.dofs[m], val);
                }
            }
        }
        let jac = tb.build();
        if !jac.is_finite() {
            return Err(Error::NonFinite("jacobian"));
        }
        Ok(jac)
    }
}
