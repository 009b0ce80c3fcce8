//! Gmsh ASCII 2.2 mesh files (`$MeshFormat`, `$Nodes`, `$Elements`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Point, TetMesh};
use crate::error::{Error, Result};

const TET4: usize = 4;

pub fn read_gmsh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let text = std::fs::read_to_string(path)?;
    read_gmsh_str(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_nonempty().ok_or_else(|| {
            parse_err(
                self.last,
                format!("unexpected end of file, expected {what}"),
            )
        })
    }

    fn expect_tag(&mut self, tag: &str) -> Result<()> {
        let (n, l) = self.expect(tag)?;
        if l != tag {
            return Err(parse_err(n, format!("expected {tag}, found {l:?}")));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

pub fn read_gmsh_str(text: &str) -> Result<TetMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut nodes: Option<(Vec<Point>, HashMap<usize, usize>)> = None;
    let mut tets: Option<Vec<[usize; 4]>> = None;
    let mut saw_format = false;

    while let Some((ln, tag)) = lines.next_nonempty() {
        match tag {
            "$MeshFormat" => {
                let (n, l) = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version: String = parse_num(it.next(), n, "version")?;
                let file_type: u32 = parse_num(it.next(), n, "file type")?;
                if !version.starts_with("2.") {
                    return Err(parse_err(n, format!("unsupported version {version}")));
                }
                if file_type != 0 {
                    return Err(parse_err(n, "binary files are not supported"));
                }
                lines.expect_tag("$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let (n, l) = lines.expect("node count")?;
                let count: usize = parse_num(Some(l), n, "node count")?;
                let mut pts = Vec::with_capacity(count);
                let mut ids = HashMap::with_capacity(count);
                for _ in 0..count {
                    let (n, l) = lines.expect("node")?;
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(it.next(), n, "node id")?;
                    let x: f64 = parse_num(it.next(), n, "x")?;
                    let y: f64 = parse_num(it.next(), n, "y")?;
                    let z: f64 = parse_num(it.next(), n, "z")?;
                    if ids.insert(id, pts.len()).is_some() {
                        return Err(parse_err(n, format!("duplicate node id {id}")));
                    }
                    pts.push([x, y, z]);
                }
                lines.expect_tag("$EndNodes")?;
                nodes = Some((pts, ids));
            }
            "$Elements" => {
                let (n, l) = lines.expect("element count")?;
                let count: usize = parse_num(Some(l), n, "element count")?;
                let mut raw = Vec::with_capacity(count);
                for _ in 0..count {
                    let (n, l) = lines.expect("element")?;
                    let mut it = l.split_whitespace();
                    let _id: usize = parse_num(it.next(), n, "element id")?;
                    let ty: usize = parse_num(it.next(), n, "element type")?;
                    if ty != TET4 {
                        return Err(Error::NonTetElements { element_type: ty });
                    }
                    let ntags: usize = parse_num(it.next(), n, "tag count")?;
                    for _ in 0..ntags {
                        let _: i64 = parse_num(it.next(), n, "tag")?;
                    }
                    let mut v = [0usize; 4];
                    for slot in v.iter_mut() {
                        *slot = parse_num(it.next(), n, "node reference")?;
                    }
                    raw.push(v);
                }
                lines.expect_tag("$EndElements")?;
                tets = Some(raw);
            }
            other if other.starts_with('$') => {
                // skip unknown sections such as $PhysicalNames
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(parse_err(ln, format!("unexpected content {other:?}"))),
        }
    }

    if !saw_format {
        return Err(parse_err(1, "missing $MeshFormat section"));
    }
    let (pts, ids) = nodes.ok_or_else(|| parse_err(lines.last, "missing $Nodes section"))?;
    let raw = tets.ok_or_else(|| parse_err(lines.last, "missing $Elements section"))?;
    if raw.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut mapped = Vec::with_capacity(raw.len());
    for t in raw {
        let mut m = [0usize; 4];
        for (slot, id) in m.iter_mut().zip(t) {
            *slot = *ids
                .get(&id)
                .ok_or_else(|| parse_err(lines.last, format!("unknown node id {id}")))?;
        }
        mapped.push(m);
    }
    TetMesh::new(pts, mapped)
}

/// Writes the mesh as Gmsh ASCII 2.2 with 1-based ids.
pub fn write_gmsh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} {:.17e}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.num_tets());
    for (i, t) in mesh.tets().iter().enumerate() {
        let _ = writeln!(
            s,
            "{} 4 2 1 1 {} {} {} {}",
            i + 1,
            t[0] + 1,
            t[1] + 1,
            t[2] + 1,
            t[3] + 1
        );
    }
    s.push_str("$EndElements\n");
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_cube_mesh;

    const ONE_TET: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n\
        1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n1\n\
        1 4 2 0 1 1 2 3 4\n$EndElements\n";

    #[test]
    fn single_tet() {
        let m = read_gmsh_str(ONE_TET).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (4, 1));
        assert!((m.volume(0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rejected() {
        let text = ONE_TET.replace("$Elements\n1\n", "$Elements\n2\n1 2 2 0 1 1 2 3\n");
        let text = text.replacen("1 4 2 0 1 1 2 3 4", "2 4 2 0 1 1 2 3 4", 1);
        assert!(matches!(
            read_gmsh_str(&text),
            Err(Error::NonTetElements { element_type: 2 })
        ));
    }

    #[test]
    fn malformed_and_empty() {
        let bad = ONE_TET.replace("2 1 0 0", "2 1 zero 0");
        assert!(matches!(
            read_gmsh_str(&bad),
            Err(Error::Parse { line: 7, .. })
        ));
        let truncated = &ONE_TET[..ONE_TET.find("$Elements").unwrap()];
        assert!(matches!(read_gmsh_str(truncated), Err(Error::Parse { .. })));
        let empty = ONE_TET.replace("$Elements\n1\n1 4 2 0 1 1 2 3 4\n", "$Elements\n0\n");
        assert!(matches!(read_gmsh_str(&empty), Err(Error::EmptyMesh)));
    }

    #[test]
    fn cube_roundtrip() {
        let m = unit_cube_mesh(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.msh");
        write_gmsh(&m, &path).unwrap();
        let r = read_gmsh(&path).unwrap();
        assert_eq!(r.tets(), m.tets());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.boundary_vertices(), m.boundary_vertices());
    }
}
