//! GMSH MSH 2.2 ASCII input and output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, Point, TagMap, TriMesh};
use crate::error::{Error, Result};

pub fn load_gmsh(path: impl AsRef<Path>, tags: &TagMap) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gmsh(&text, tags)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        loop {
            let (i, l) = self.inner.next().ok_or(Error::MeshFormat {
                line: self.line + 1,
                msg: "unexpected end of file".into(),
            })?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MeshFormat {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        let l = self.next_line()?;
        if l != token {
            return Err(self.err(format!("expected {token}, found {l:?}")));
        }
        Ok(())
    }

    fn count(&mut self) -> Result<usize> {
        let l = self.next_line()?;
        l.parse()
            .map_err(|_| self.err(format!("expected a count, found {l:?}")))
    }

    fn skip_section(&mut self, name: &str) -> Result<()> {
        let end = format!("$End{}", &name[1..]);
        while self.next_line()? != end {}
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err("truncated record"))?;
    tok.parse()
        .map_err(|_| lines.err(format!("invalid number {tok:?}")))
}

/// Parses MSH 2.2 ASCII text. Line elements (type 1) become tagged boundary
/// edges through `tags`; triangles (type 2) form the volume; points (type 15)
/// are ignored.
pub fn parse_gmsh(text: &str, tags: &TagMap) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    lines.expect("$MeshFormat")?;
    let header = lines.next_line()?;
    let mut it = header.split_whitespace();
    let version: String = parse_num(&lines, it.next())?;
    let file_type: i32 = parse_num(&lines, it.next())?;
    if version != "2.2" || file_type != 0 {
        return Err(lines.err(format!("unsupported format {header:?}; need ASCII MSH 2.2")));
    }
    lines.expect("$EndMeshFormat")?;

    let mut vertices: Vec<Point> = Vec::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    let mut have_nodes = false;
    let mut have_elements = false;

    loop {
        let section = match lines.next_line() {
            Ok(s) => s,
            Err(_) if have_nodes && have_elements => break,
            Err(e) => return Err(e),
        };
        match section {
            "$Nodes" => {
                let n = lines.count()?;
                vertices.reserve(n);
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let mut it = l.split_whitespace();
                    let id: u64 = parse_num(&lines, it.next())?;
                    let x: f64 = parse_num(&lines, it.next())?;
                    let y: f64 = parse_num(&lines, it.next())?;
                    let _z: f64 = parse_num(&lines, it.next())?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    vertices.push([x, y]);
                }
                lines.expect("$EndNodes")?;
                have_nodes = true;
            }
            "$Elements" => {
                if !have_nodes {
                    return Err(lines.err("$Elements before $Nodes"));
                }
                let n = lines.count()?;
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let mut it = l.split_whitespace();
                    let _id: u64 = parse_num(&lines, it.next())?;
                    let kind: u32 = parse_num(&lines, it.next())?;
                    let ntags: usize = parse_num(&lines, it.next())?;
                    let mut physical = 0;
                    for k in 0..ntags {
                        let t: i32 = parse_num(&lines, it.next())?;
                        if k == 0 {
                            physical = t;
                        }
                    }
                    let nodes = match kind {
                        1 => 2,
                        2 => 3,
                        15 => 1,
                        other => return Err(lines.err(format!("unsupported element type {other}"))),
                    };
                    let mut idx = [0usize; 3];
                    for slot in idx.iter_mut().take(nodes) {
                        let id: u64 = parse_num(&lines, it.next())?;
                        *slot = *node_index
                            .get(&id)
                            .ok_or_else(|| lines.err(format!("unknown node {id}")))?;
                    }
                    match kind {
                        1 => {
                            let tag = tags.lookup(physical).ok_or(Error::UnknownTag(physical))?;
                            boundary.push(([idx[0], idx[1]], tag));
                        }
                        2 => triangles.push(idx),
                        _ => {}
                    }
                }
                lines.expect("$EndElements")?;
                have_elements = true;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => lines.skip_section(s)?,
            s => return Err(lines.err(format!("unexpected line {s:?}"))),
        }
    }
    if triangles.is_empty() {
        return Err(lines.err("no triangles"));
    }
    if !boundary.iter().any(|(_, t)| *t == BoundaryTag::GammaD) {
        return Err(Error::MissingTag("Gamma_d"));
    }
    TriMesh::from_parts(vertices, triangles, boundary)
}

/// Writes `mesh` as MSH 2.2 ASCII. Coordinates use the shortest decimal
/// representation that parses back to the same `f64`.
pub fn write_gmsh(mesh: &TriMesh, tags: &TagMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, gmsh_string(mesh, tags)).map_err(|e| Error::io(path, e))
}

pub(crate) fn gmsh_string(mesh: &TriMesh, tags: &TagMap) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    s.push_str("$PhysicalNames\n4\n");
    for t in BoundaryTag::ALL {
        let _ = writeln!(s, "1 {} \"{}\"", tags.physical(t), t.name());
    }
    s.push_str("$EndPhysicalNames\n");
    let _ = writeln!(s, "$Nodes\n{}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} 0", i + 1, p[0], p[1]);
    }
    s.push_str("$EndNodes\n");
    let nb = mesh.boundary_edges().len();
    let _ = writeln!(s, "$Elements\n{}", nb + mesh.n_triangles());
    let mut id = 1;
    for e in mesh.boundary_edges() {
        let phys = tags.physical(e.tag);
        let _ = writeln!(
            s,
            "{id} 1 2 {phys} {phys} {} {}",
            e.vertices[0] + 1,
            e.vertices[1] + 1
        );
        id += 1;
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{id} 2 2 10 1 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TRIANGLE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n\
$Elements\n4\n1 1 2 4 1 1 2\n2 1 2 4 1 2 3\n3 1 2 4 1 3 1\n4 2 2 10 1 1 2 3\n$EndElements\n";

    #[test]
    fn single_reference_triangle() {
        let mesh = parse_gmsh(ONE_TRIANGLE, &TagMap::default()).unwrap();
        assert_eq!(mesh.n_triangles(), 1);
        assert_eq!(mesh.design_loop().len(), 3);
    }

    #[test]
    fn unknown_physical_tag() {
        let text = ONE_TRIANGLE.replace("1 1 2 4 1 1 2", "1 1 2 7 1 1 2");
        assert!(matches!(
            parse_gmsh(&text, &TagMap::default()),
            Err(Error::UnknownTag(7))
        ));
    }

    #[test]
    fn missing_design_tag() {
        let text = ONE_TRIANGLE.replace(" 2 4 1 ", " 2 3 1 ");
        assert!(matches!(
            parse_gmsh(&text, &TagMap::default()),
            Err(Error::MissingTag("Gamma_d"))
        ));
    }

    #[test]
    fn malformed_input() {
        let text = ONE_TRIANGLE.replace("2 1 0 0", "2 one 0 0");
        assert!(matches!(
            parse_gmsh(&text, &TagMap::default()),
            Err(Error::MeshFormat { line: 7, .. })
        ));
        let text = ONE_TRIANGLE.replace("2.2 0 8", "4.1 0 8");
        assert!(parse_gmsh(&text, &TagMap::default()).is_err());
        assert!(parse_gmsh("", &TagMap::default()).is_err());
    }

    #[test]
    fn two_disjoint_design_loops() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$Nodes\n6\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 5 0 0\n5 6 0 0\n6 5 1 0\n$EndNodes\n\
$Elements\n8\n1 1 2 4 1 1 2\n2 1 2 4 1 2 3\n3 1 2 4 1 3 1\n\
4 1 2 4 1 4 5\n5 1 2 4 1 5 6\n6 1 2 4 1 6 4\n\
7 2 2 10 1 1 2 3\n8 2 2 10 1 4 5 6\n$EndElements\n";
        let err = parse_gmsh(text, &TagMap::default()).unwrap_err();
        assert_eq!(err.to_string(), "design boundary not a single closed loop");
    }
}
