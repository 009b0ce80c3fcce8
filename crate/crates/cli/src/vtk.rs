//! Legacy ASCII VTK output of a P1 Q-tensor field.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use nematic_core::fem::DiscreteField;

/// VTK cell type of a linear tetrahedron.
pub const VTK_TETRA: u8 = 10;

/// Renders `field` as an unstructured grid of tetrahedra. Point data holds
/// the coefficients plus quantities derived from the eigen decomposition;
/// `s` is `1.5 lambda_max`.
pub fn render(field: &DiscreteField, title: &str) -> String {
    let mesh = field.space().mesh();
    let nv = mesh.num_vertices();
    let nt = mesh.num_tets();
    let mut out = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    // writing into a String cannot fail
    let _ = writeln!(
        out,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(out, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "CELLS {nt} {}", 5 * nt);
    for t in mesh.tets() {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "{VTK_TETRA}");
    }

    let q: Vec<_> = (0..nv).map(|v| field.vertex(v)).collect();
    let _ = writeln!(out, "POINT_DATA {nv}");
    for a in 0..5 {
        let _ = writeln!(out, "SCALARS q{} double 1\nLOOKUP_TABLE default", a + 1);
        for qv in &q {
            let _ = writeln!(out, "{:e}", qv[a]);
        }
    }
    let eig: Vec<_> = q.iter().map(|qv| qv.eigenvalues().0).collect();
    let _ = writeln!(out, "SCALARS eigenvalues double 3\nLOOKUP_TABLE default");
    for e in &eig {
        let _ = writeln!(out, "{:e} {:e} {:e}", e[0], e[1], e[2]);
    }
    let _ = writeln!(out, "SCALARS s double 1\nLOOKUP_TABLE default");
    for e in &eig {
        let _ = writeln!(out, "{:e}", 1.5 * e[2]);
    }
    let _ = writeln!(out, "VECTORS director double");
    for qv in &q {
        let d = qv.director();
        let _ = writeln!(out, "{:e} {:e} {:e}", d[0], d[1], d[2]);
    }
    let _ = writeln!(out, "SCALARS margin double 1\nLOOKUP_TABLE default");
    for qv in &q {
        let _ = writeln!(out, "{:e}", qv.physicality_margin());
    }
    out
}

pub fn write(path: &Path, field: &DiscreteField, title: &str) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(render(field, title).as_bytes())?;
    f.flush()
}
