//! Legacy VTK and CSV writers. Numbers are printed in shortest round-trip
//! exponent form so files are reproducible bit for bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::{deformation_gradient, Field};
use crate::mesh::{Point, TriMesh};
use crate::solver::{ContinuationLog, NewtonIterate};

pub const HISTORY_HEADER: &str =
    "problem_index,alpha,newton_iters,objective,dissipation,volume_defect,bc_defect_x,bc_defect_y,min_Jtau";
pub const NEWTON_HEADER: &str = "problem,alpha,iteration,abs_residual,rel_residual,min_Jtau";

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// State fields to export; `v` is sampled at the vertices.
#[derive(Debug, Clone, Copy)]
pub struct VtkFields<'a> {
    pub w: &'a Field,
    pub v: &'a Field,
    pub p: &'a Field,
}

fn vtk_text(mesh: &TriMesh, points: &[Point], f: &VtkFields) -> Result<String> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    if f.p.coeffs.len() != nv {
        return Err(Error::Dimension(
            "pressure must be a P1 field on the mesh".into(),
        ));
    }
    let w = f.w.vertex_values(mesh)?;
    let v = f.v.vertex_values(mesh)?;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nshapeopt\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for x in points {
        let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    for (name, data) in [("w", &w), ("v", &v)] {
        let _ = writeln!(s, "VECTORS {name} double");
        for d in data.iter() {
            let _ = writeln!(s, "{:e} {:e} 0", d[0], d[1]);
        }
    }
    s.push_str("SCALARS p double 1\nLOOKUP_TABLE default\n");
    for p in &f.p.coeffs {
        let _ = writeln!(s, "{p:e}");
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    s.push_str("SCALARS J double 1\nLOOKUP_TABLE default\n");
    for t in 0..nt {
        let j = deformation_gradient(mesh, f.w, t)?.determinant();
        let _ = writeln!(s, "{j:e}");
    }
    Ok(s)
}

/// Fields on the reference mesh.
pub fn write_vtk(mesh: &TriMesh, fields: &VtkFields, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &vtk_text(mesh, mesh.vertices(), fields)?)
}

/// Same fields on the vertices moved by `w`.
pub fn write_deformed_vtk(
    mesh: &TriMesh,
    fields: &VtkFields,
    path: impl AsRef<Path>,
) -> Result<()> {
    let w = fields.w.vertex_values(mesh)?;
    let moved: Vec<Point> = mesh
        .vertices()
        .iter()
        .zip(&w)
        .map(|(x, d)| [x[0] + d[0], x[1] + d[1]])
        .collect();
    write_file(path.as_ref(), &vtk_text(mesh, &moved, fields)?)
}

pub fn history_csv(log: &ContinuationLog) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for e in &log.entries {
        let _ = writeln!(
            s,
            "{},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            e.problem_index,
            e.alpha,
            e.report.iterations,
            e.objective,
            e.dissipation,
            e.volume_defect,
            e.barycenter_defect[0],
            e.barycenter_defect[1],
            e.min_jacobian
        );
    }
    s
}

pub fn write_history(log: &ContinuationLog, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &history_csv(log))
}

/// One CSV line per Newton iterate, flushed as the run proceeds.
pub struct NewtonLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl NewtonLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut log = NewtonLog {
            path,
            out: BufWriter::new(file),
        };
        log.line(NEWTON_HEADER)?;
        Ok(log)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn record(&mut self, problem: usize, alpha: f64, it: &NewtonIterate) -> Result<()> {
        let s = format!(
            "{problem},{alpha:e},{},{:e},{:e},{:e}",
            it.iteration, it.abs_residual, it.rel_residual, it.min_jacobian
        );
        self.line(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FESpace;
    use crate::testing;

    fn fields(mesh: &TriMesh, s: f64) -> (Field, Field, Field) {
        let w = Field::interpolate(mesh, FESpace::volume_p1_vector(mesh), |x| [s * x[1], 0.0]);
        let v = Field::interpolate(mesh, FESpace::volume_p2_vector(mesh), |x| [x[0], -x[1]]);
        let p = Field::interpolate_scalar(mesh, FESpace::volume_p1_scalar(mesh), |x| x[0] * x[1]);
        (w, v, p)
    }

    fn section<'a>(text: &'a str, key: &str, n: usize) -> Vec<&'a str> {
        let mut lines = text.lines().skip_while(|l| !l.starts_with(key)).skip(1);
        if key.starts_with("SCALARS") {
            lines.next();
        }
        lines.take(n).collect()
    }

    #[test]
    fn zero_deformation_keeps_vertices_exactly() {
        let mesh = testing::annulus_mesh(0.3, 1.1, 16, 3);
        let (w, v, p) = fields(&mesh, 0.0);
        let f = VtkFields {
            w: &w,
            v: &v,
            p: &p,
        };
        let dir = tempfile::tempdir().unwrap();
        write_vtk(&mesh, &f, dir.path().join("a.vtk")).unwrap();
        write_deformed_vtk(&mesh, &f, dir.path().join("b.vtk")).unwrap();
        let a = std::fs::read_to_string(dir.path().join("a.vtk")).unwrap();
        let b = std::fs::read_to_string(dir.path().join("b.vtk")).unwrap();
        assert_eq!(a, b);
        let pts = section(&a, "POINTS", mesh.n_vertices());
        for (line, x) in pts.iter().zip(mesh.vertices()) {
            let c: Vec<f64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
            assert_eq!([c[0], c[1]], *x);
        }
        assert!(a.contains(&format!(
            "CELLS {} {}",
            mesh.n_triangles(),
            4 * mesh.n_triangles()
        )));
        assert!(a.contains(&format!("CELL_DATA {}", mesh.n_triangles())));
    }

    #[test]
    fn cell_jacobians_are_written() {
        let mesh = testing::unit_square(3);
        let (_, v, p) = fields(&mesh, 0.0);
        // x ↦ 1.5 x has J = 2.25 everywhere.
        let w = Field::interpolate(&mesh, FESpace::volume_p1_vector(&mesh), |x| {
            [0.5 * x[0], 0.5 * x[1]]
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.vtk");
        write_vtk(
            &mesh,
            &VtkFields {
                w: &w,
                v: &v,
                p: &p,
            },
            &path,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let j = section(&text, "SCALARS J", mesh.n_triangles());
        assert_eq!(j.len(), mesh.n_triangles());
        for l in j {
            assert!((l.parse::<f64>().unwrap() - 2.25).abs() < 1e-14);
        }
    }
}
