//! Small synthetic meshes for tests and examples.

use std::f64::consts::PI;

use crate::deform::solve_lb_scalar;
use crate::error::Result;
use crate::fem::sparse::dot;
use crate::fem::{curve_mass, l2_error, FESpace, Field};
use crate::flow::{solve_stokes, VelocityDirichlet};
use crate::mesh::{distance, BoundaryTag, DesignCurve, Point, TriMesh};

/// Structured annulus: inner circle tagged as design boundary, outer circle
/// as no-slip wall. `n_rings` layers of `n_theta` quads, each split in two.
pub fn annulus_mesh(r_in: f64, r_out: f64, n_theta: usize, n_rings: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(n_theta * (n_rings + 1));
    for k in 0..=n_rings {
        let r = r_in + (r_out - r_in) * k as f64 / n_rings as f64;
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let id = |k: usize, j: usize| k * n_theta + j % n_theta;
    let mut triangles = Vec::with_capacity(2 * n_theta * n_rings);
    for k in 0..n_rings {
        for j in 0..n_theta {
            let (a, b, c, d) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
            if (j + k) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        boundary.push(([id(0, j), id(0, j + 1)], BoundaryTag::GammaD));
        boundary.push(([id(n_rings, j), id(n_rings, j + 1)], BoundaryTag::GammaNs));
    }
    TriMesh::from_parts(vertices, triangles, boundary).expect("valid annulus")
}

/// Uniform `n x n` grid on `[0,1]^2`; left side inflow, right side outflow,
/// bottom and top no-slip walls. No design boundary.
pub fn unit_square(n: usize) -> TriMesh {
    rectangle([0.0, 0.0], [1.0, 1.0], n, n)
}

pub fn rectangle(lo: Point, hi: Point, nx: usize, ny: usize) -> TriMesh {
    grid(lo, hi, nx, ny, |_, _| false)
}

/// Unit square with diagonals alternating in a checkerboard pattern. For
/// even `n` no corner triangle has two boundary edges, so Taylor-Hood stays
/// inf-sup stable with Dirichlet data on the whole boundary.
pub fn alternating_square(n: usize) -> TriMesh {
    grid([0.0, 0.0], [1.0, 1.0], n, n, |i, j| (i + j) % 2 == 1)
}

fn grid(
    lo: Point,
    hi: Point,
    nx: usize,
    ny: usize,
    flip: impl Fn(usize, usize) -> bool,
) -> TriMesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if flip(i, j) {
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(([id(i, 0), id(i + 1, 0)], BoundaryTag::GammaNs));
        boundary.push(([id(i, ny), id(i + 1, ny)], BoundaryTag::GammaNs));
    }
    for j in 0..ny {
        boundary.push(([id(0, j), id(0, j + 1)], BoundaryTag::GammaIn));
        boundary.push(([id(nx, j), id(nx, j + 1)], BoundaryTag::GammaOut));
    }
    TriMesh::without_design(vertices, triangles, boundary).expect("valid rectangle")
}

pub fn min_edge_length(mesh: &TriMesh) -> f64 {
    let v = mesh.vertices();
    mesh.edges()
        .iter()
        .map(|e| distance(&v[e[0]], &v[e[1]]))
        .fold(f64::INFINITY, f64::min)
}

/// Square channel `[-l, l]^2` around a circular design boundary of radius
/// `r_in`. Rays from the circle to the square are split into `n_rings`
/// layers; `n_theta` must be a multiple of 8 so the corners are vertices.
/// Left side inflow, right side outflow, top and bottom no-slip.
pub fn channel_mesh(l: f64, r_in: f64, n_theta: usize, n_rings: usize) -> TriMesh {
    assert!(n_theta.is_multiple_of(8) && l > r_in);
    let mut vertices = Vec::with_capacity(n_theta * (n_rings + 1));
    for k in 0..=n_rings {
        let s = k as f64 / n_rings as f64;
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            let (c, sn) = (th.cos(), th.sin());
            let outer = l / c.abs().max(sn.abs());
            let r = (1.0 - s) * r_in + s * outer;
            vertices.push([r * c, r * sn]);
        }
    }
    let id = |k: usize, j: usize| k * n_theta + j % n_theta;
    let mut triangles = Vec::with_capacity(2 * n_theta * n_rings);
    for k in 0..n_rings {
        for j in 0..n_theta {
            let (a, b, c, d) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
            if (j + k) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        boundary.push(([id(0, j), id(0, j + 1)], BoundaryTag::GammaD));
        let e = [id(n_rings, j), id(n_rings, j + 1)];
        let (p, q) = (vertices[e[0]], vertices[e[1]]);
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let tag = if (mid[0] + l).abs() < 1e-9 * l {
            BoundaryTag::GammaIn
        } else if (mid[0] - l).abs() < 1e-9 * l {
            BoundaryTag::GammaOut
        } else {
            BoundaryTag::GammaNs
        };
        boundary.push((e, tag));
    }
    TriMesh::from_parts(vertices, triangles, boundary).expect("valid channel")
}

fn mms_velocity(x: Point) -> [f64; 2] {
    let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
    [
        PI * sx * sx * (2.0 * PI * x[1]).sin(),
        -PI * (2.0 * PI * x[0]).sin() * sy * sy,
    ]
}

fn mms_pressure(x: Point) -> f64 {
    (PI * x[0]).cos() * (PI * x[1]).cos()
}

/// `-Δv + ∇p` for the solution above.
fn mms_forcing(x: Point) -> [f64; 2] {
    let c = 2.0 * PI.powi(3);
    let lap = [
        c * (2.0 * PI * x[1]).sin() * (2.0 * (2.0 * PI * x[0]).cos() - 1.0),
        -c * (2.0 * PI * x[0]).sin() * (2.0 * (2.0 * PI * x[1]).cos() - 1.0),
    ];
    [
        -lap[0] - PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        -lap[1] - PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
    ]
}

/// Velocity and pressure L² errors of the Taylor-Hood solution of a
/// manufactured Stokes problem on `alternating_square(n)`.
pub fn stokes_mms_errors(n: usize) -> Result<(f64, f64)> {
    let mesh = alternating_square(n);
    let w = Field::zeros(FESpace::volume_p1_vector(&mesh));
    let all = [
        BoundaryTag::GammaIn,
        BoundaryTag::GammaOut,
        BoundaryTag::GammaNs,
    ];
    let bc = VelocityDirichlet::on_tags(&mesh, &all, mms_velocity);
    let s = solve_stokes(&mesh, &w, &bc, Some(&mms_forcing), 5)?;
    let ev = l2_error(&mesh, &s.v, 5, mms_velocity)?;
    let ep = l2_error(&mesh, &s.p, 5, |x| [mms_pressure(x), 0.0])?;
    Ok((ev, ep))
}

/// L² error of the Laplace-Beltrami solve `-Δ_Γ b + b = (1 + k²/R²) cos kθ`
/// on an `n`-gon inscribed in the circle of radius 0.5, against `cos 2θ`.
pub fn lb_eigen_error(n: usize) -> Result<f64> {
    let (r, k) = (0.5, 2.0);
    let curve = DesignCurve::circle([0.0, 0.0], r, n)?;
    let space = FESpace::curve(n, 1, 1);
    let at = |f: &dyn Fn(f64) -> f64| {
        Field::interpolate_curve(&curve, space, |x| [f(x[1].atan2(x[0])), 0.0])
    };
    let c = at(&|th| (1.0 + (k / r) * (k / r)) * (k * th).cos());
    let b = solve_lb_scalar(&curve, &c, 5)?;
    let exact = at(&|th| (k * th).cos());
    let e: Vec<f64> = b
        .coeffs
        .iter()
        .zip(&exact.coeffs)
        .map(|(a, b)| a - b)
        .collect();
    let m = curve_mass(&curve, space, 5)?;
    Ok(dot(&e, &m.mul_vec(&e)).sqrt())
}
