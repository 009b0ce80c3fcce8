//! Tetrahedral meshes of polyhedral domains.

mod gmsh;

pub use gmsh::{read_gmsh, read_gmsh_str, write_gmsh};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Clone, Debug)]
pub struct TetMesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    on_boundary: Vec<bool>,
    boundary_vertices: Vec<usize>,
    h_max: f64,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// Signed volume of the tetrahedron `p0 p1 p2 p3`.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    let (a, b, c) = (sub(&p[1], &p[0]), sub(&p[2], &p[0]), sub(&p[3], &p[0]));
    dot(&a, &cross(&b, &c)) / 6.0
}

/// Largest pairwise vertex distance.
pub fn diameter(p: &[Point; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            d = d.max(norm(&sub(&p[i], &p[j])));
        }
    }
    d
}

/// Radius of the inscribed sphere, `3 |T| / area(dT)`.
pub fn inradius(p: &[Point; 4]) -> f64 {
    let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let area: f64 = faces
        .iter()
        .map(|f| 0.5 * norm(&cross(&sub(&p[f[1]], &p[f[0]]), &sub(&p[f[2]], &p[f[0]]))))
        .sum();
    3.0 * signed_volume(p).abs() / area
}

impl TetMesh {
    /// Builds a mesh, flipping negatively oriented tetrahedra and detecting
    /// boundary vertices from faces that belong to exactly one tetrahedron.
    pub fn new(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for t in &mut tets {
            if let Some(&bad) = t.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidParameter(format!(
                    "tetrahedron references vertex {bad} of {}",
                    vertices.len()
                )));
            }
            let p = t.map(|v| vertices[v]);
            let vol = signed_volume(&p);
            if vol == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "degenerate tetrahedron {t:?}"
                )));
            }
            if vol < 0.0 {
                t.swap(2, 3);
            }
        }

        let mut face_count: HashMap<[usize; 3], u32> = HashMap::with_capacity(tets.len() * 2);
        for t in &tets {
            for skip in 0..4 {
                let mut f = [0usize; 3];
                let mut k = 0;
                for (i, &v) in t.iter().enumerate() {
                    if i != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                *face_count.entry(f).or_insert(0) += 1;
            }
        }
        let mut on_boundary = vec![false; vertices.len()];
        for (f, &count) in &face_count {
            if count == 1 {
                for &v in f {
                    on_boundary[v] = true;
                }
            }
        }
        let boundary_vertices = on_boundary
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        let h_max = tets
            .iter()
            .map(|t| diameter(&t.map(|v| vertices[v])))
            .fold(0.0, f64::max);
        Ok(TetMesh {
            vertices,
            tets,
            on_boundary,
            boundary_vertices,
            h_max,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.volume(t)).sum()
    }

    /// Maximum over tetrahedra of diameter / inradius.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.num_tets())
            .map(|t| {
                let p = self.tet_points(t);
                diameter(&p) / inradius(&p)
            })
            .fold(0.0, f64::max)
    }
}

/// Kuhn subdivision of `[0,1]^3` into `n^3` cubes of six tetrahedra each.
pub fn unit_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cube subdivision must be >= 1".into(),
        ));
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    // each tet follows a monotone path 000 -> 111 through the cube corners
    const PATHS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for path in PATHS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (step, &axis) in path.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::new(vertices, tets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = unit_cube_mesh(1).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (8, 6));
        assert!((m.h_max() - 3f64.sqrt()).abs() < 1e-15);
        let m = unit_cube_mesh(2).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (27, 48));
        let m = unit_cube_mesh(4).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (125, 384));
        assert_eq!(m.boundary_vertices().len(), 98);
    }

    #[test]
    fn boundary_is_cube_surface() {
        let m = unit_cube_mesh(3).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            let on_face = p.iter().any(|&x| x == 0.0 || x == 1.0);
            assert_eq!(m.is_boundary(v), on_face);
        }
    }

    #[test]
    fn positive_volumes_partition_the_cube() {
        for n in [1, 2, 5] {
            let m = unit_cube_mesh(n).unwrap();
            for t in 0..m.num_tets() {
                assert!(m.volume(t) > 0.0);
            }
            assert!((m.total_volume() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_halves_h_and_keeps_shape() {
        for n in [1, 2, 3] {
            let a = unit_cube_mesh(n).unwrap();
            let b = unit_cube_mesh(2 * n).unwrap();
            assert!((b.h_max() - a.h_max() / 2.0).abs() < 1e-14);
        }
        let r1 = unit_cube_mesh(1).unwrap().shape_regularity();
        let r8 = unit_cube_mesh(8).unwrap().shape_regularity();
        assert!((r1 - r8).abs() < 1e-10 * r1);
    }

    #[test]
    fn regular_tetrahedron_ratio() {
        let s = 1.0 / 2f64.sqrt();
        let p = [
            [1.0, 0.0, -s],
            [-1.0, 0.0, -s],
            [0.0, 1.0, s],
            [0.0, -1.0, s],
        ];
        let ratio = diameter(&p) / inradius(&p);
        assert!((ratio - 2.0 * 6f64.sqrt()).abs() < 1e-12);
        let m = TetMesh::new(p.to_vec(), vec![[0, 1, 2, 3]]).unwrap();
        assert!((m.shape_regularity() - 2.0 * 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.boundary_vertices().len(), 4);
    }

    #[test]
    fn sliver_is_finite_and_large() {
        let p = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 1e-6],
        ];
        let m = TetMesh::new(p, vec![[0, 1, 2, 3]]).unwrap();
        let r = m.shape_regularity();
        assert!(r.is_finite() && r > 1e4);
    }

    #[test]
    fn negative_orientation_is_fixed() {
        let p = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let m = TetMesh::new(p, vec![[0, 2, 1, 3]]).unwrap();
        assert!(m.volume(0) > 0.0);
    }

    #[test]
    fn empty_mesh_rejected() {
        assert!(matches!(
            TetMesh::new(vec![], vec![]),
            Err(Error::EmptyMesh)
        ));
    }
}
