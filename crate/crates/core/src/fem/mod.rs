//! Continuous piecewise-affine Q-tensor fields on tetrahedral meshes.
//!
//! Degrees of freedom are numbered `5 * vertex + component`, where the
//! component indexes the orthonormal basis of [`crate::tensor`].

pub mod bulk;
pub mod elastic;
pub mod field;
pub mod norms;
pub mod quadrature;

pub use bulk::{
    assemble_bulk, assemble_bulk_residual, assemble_bulk_tangent, bulk_energy, BulkAssembly,
    MultiplierCache,
};
pub use elastic::{assemble_elastic, ellipticity_check, ElasticConstants, EllipticityReport};
pub use field::{impose_dirichlet, interpolate, FnField, TensorField};
pub use norms::{error_norms, h1_norm, h1_seminorm, l2_norm, ErrorNorms};
pub use quadrature::TetRule;

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::mesh::{Point, TetMesh};
use crate::sparse::CsrMatrix;
use crate::tensor::QTensor;

pub const DOFS_PER_VERTEX: usize = 5;

/// Gradients of the four barycentric coordinates; constant on a tet.
pub type ShapeGradients = [[f64; 3]; 4];

/// Gradient of a Q-field in coefficients: `g[a][k] = d q_a / d x_k`.
pub type QGradient = [[f64; 3]; 5];

#[derive(Debug)]
pub struct FeSpace {
    mesh: TetMesh,
    grads: Vec<ShapeGradients>,
    volumes: Vec<f64>,
    free_dofs: Vec<usize>,
    constrained_dofs: Vec<usize>,
    free_index: Vec<Option<usize>>,
    pattern: Vec<Vec<usize>>,
    gram: OnceLock<CsrMatrix>,
}

fn shape_gradients(p: &[Point; 4]) -> ShapeGradients {
    let d = |i: usize| -> [f64; 3] { [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]] };
    let (a, b, c) = (d(1), d(2), d(3));
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    // rows of the inverse Jacobian
    let g1 = cross(b, c).map(|x| x / det);
    let g2 = cross(c, a).map(|x| x / det);
    let g3 = cross(a, b).map(|x| x / det);
    let g0 = [0, 1, 2].map(|k| -(g1[k] + g2[k] + g3[k]));
    [g0, g1, g2, g3]
}

impl FeSpace {
    pub fn new(mesh: TetMesh) -> Arc<Self> {
        let nv = mesh.num_vertices();
        let grads = (0..mesh.num_tets())
            .map(|t| shape_gradients(&mesh.tet_points(t)))
            .collect();
        let volumes = (0..mesh.num_tets()).map(|t| mesh.volume(t)).collect();
        let mut free_dofs = Vec::new();
        let mut constrained_dofs = Vec::new();
        let mut free_index = vec![None; DOFS_PER_VERTEX * nv];
        for v in 0..nv {
            for c in 0..DOFS_PER_VERTEX {
                let dof = DOFS_PER_VERTEX * v + c;
                if mesh.is_boundary(v) {
                    constrained_dofs.push(dof);
                } else {
                    free_index[dof] = Some(free_dofs.len());
                    free_dofs.push(dof);
                }
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for t in mesh.tets() {
            for &a in t {
                adj[a].extend_from_slice(t);
            }
        }
        let mut pattern = Vec::with_capacity(DOFS_PER_VERTEX * nv);
        for nb in &mut adj {
            nb.sort_unstable();
            nb.dedup();
            let cols: Vec<usize> = nb
                .iter()
                .flat_map(|&w| (0..DOFS_PER_VERTEX).map(move |c| DOFS_PER_VERTEX * w + c))
                .collect();
            for _ in 0..DOFS_PER_VERTEX {
                pattern.push(cols.clone());
            }
        }
        Arc::new(FeSpace {
            mesh,
            grads,
            volumes,
            free_dofs,
            constrained_dofs,
            free_index,
            pattern,
            gram: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.mesh
    }

    pub fn num_dofs(&self) -> usize {
        DOFS_PER_VERTEX * self.mesh.num_vertices()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }

    /// Position of a dof among the free dofs.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn shape_gradients(&self, t: usize) -> &ShapeGradients {
        &self.grads[t]
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.volumes[t]
    }

    /// Zero matrix over all dofs with the P1 coupling pattern.
    pub fn zero_matrix(&self) -> CsrMatrix {
        CsrMatrix::from_pattern(self.num_dofs(), &self.pattern)
    }

    /// Rows and columns of the free dofs.
    pub fn restrict_to_free(&self, full: &CsrMatrix) -> CsrMatrix {
        full.restrict(&self.free_dofs, &self.free_index, self.num_free())
    }

    pub fn restrict_vector(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Scatters a free-dof vector into a full vector of zeros.
    pub fn extend_vector(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for (&d, &v) in self.free_dofs.iter().zip(free) {
            out[d] = v;
        }
        out
    }

    /// `H^1` Gram matrix (mass + stiffness) over the free dofs.
    pub fn gram(&self) -> &CsrMatrix {
        self.gram
            .get_or_init(|| self.restrict_to_free(&norms::gram_matrix(self)))
    }
}

/// A P1 field: five coefficients per vertex.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    space: Arc<FeSpace>,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        DiscreteField {
            space: Arc::clone(space),
            values: vec![0.0; space.num_dofs()],
        }
    }

    pub fn from_values(space: &Arc<FeSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.num_dofs() {
            return Err(Error::Dimension(format!(
                "field has {} values, space has {} dofs",
                values.len(),
                space.num_dofs()
            )));
        }
        Ok(DiscreteField {
            space: Arc::clone(space),
            values,
        })
    }

    /// Same value at every vertex.
    pub fn constant(space: &Arc<FeSpace>, q: &QTensor) -> Self {
        let mut f = Self::zeros(space);
        for v in 0..space.mesh().num_vertices() {
            f.set_vertex(v, q);
        }
        f
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn vertex(&self, v: usize) -> QTensor {
        let s = DOFS_PER_VERTEX * v;
        QTensor(std::array::from_fn(|c| self.values[s + c]))
    }

    pub fn set_vertex(&mut self, v: usize, q: &QTensor) {
        let s = DOFS_PER_VERTEX * v;
        self.values[s..s + DOFS_PER_VERTEX].copy_from_slice(&q.0);
    }

    /// Value at barycentric coordinates `bary` of tet `t`.
    pub fn eval(&self, t: usize, bary: &[f64; 4]) -> QTensor {
        let tet = self.space.mesh().tets()[t];
        let mut q = [0.0; 5];
        for (i, &v) in tet.iter().enumerate() {
            let s = DOFS_PER_VERTEX * v;
            for (c, qc) in q.iter_mut().enumerate() {
                *qc += bary[i] * self.values[s + c];
            }
        }
        QTensor(q)
    }

    /// Constant gradient on tet `t`.
    pub fn gradient(&self, t: usize) -> QGradient {
        let tet = self.space.mesh().tets()[t];
        let g = self.space.shape_gradients(t);
        let mut out = [[0.0; 3]; 5];
        for (i, &v) in tet.iter().enumerate() {
            let s = DOFS_PER_VERTEX * v;
            for (c, row) in out.iter_mut().enumerate() {
                for k in 0..3 {
                    row[k] += self.values[s + c] * g[i][k];
                }
            }
        }
        out
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.space.restrict_vector(&self.values)
    }

    /// Adds `alpha * free` to the free dofs.
    pub fn add_free(&mut self, alpha: f64, free: &[f64]) {
        for (&d, &x) in self.space.free_dofs().iter().zip(free) {
            self.values[d] += alpha * x;
        }
    }

    /// Smallest physicality margin over the vertices.
    pub fn min_vertex_margin(&self) -> f64 {
        (0..self.space.mesh().num_vertices())
            .map(|v| self.vertex(v).physicality_margin())
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest physicality margin over all points of `rule`.
    pub fn min_quadrature_margin(&self, rule: &TetRule) -> f64 {
        let mut m = f64::INFINITY;
        for t in 0..self.space.mesh().num_tets() {
            for p in rule.points() {
                m = m.min(self.eval(t, p).physicality_margin());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_cube_mesh;

    #[test]
    fn dof_partition() {
        let space = FeSpace::new(unit_cube_mesh(3).unwrap());
        assert_eq!(space.num_dofs(), 5 * 64);
        assert_eq!(space.num_free(), 5 * 8);
        assert_eq!(space.constrained_dofs().len(), 5 * 56);
        let mut all: Vec<usize> = space
            .free_dofs()
            .iter()
            .chain(space.constrained_dofs())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..space.num_dofs()).collect::<Vec<_>>());
    }

    #[test]
    fn shape_gradients_reproduce_coordinates() {
        let mesh = unit_cube_mesh(2).unwrap();
        let space = FeSpace::new(mesh);
        for t in 0..space.mesh().num_tets() {
            let p = space.mesh().tet_points(t);
            let g = space.shape_gradients(t);
            for k in 0..3 {
                // sum_i x_k(p_i) grad(lambda_i) = e_k
                for l in 0..3 {
                    let s: f64 = (0..4).map(|i| p[i][k] * g[i][l]).sum();
                    let e = if k == l { 1.0 } else { 0.0 };
                    assert!((s - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vertex_roundtrip_and_affine_gradient() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let mut f = DiscreteField::zeros(&space);
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            f.set_vertex(v, &QTensor([p[0], 2.0 * p[1], -p[2], 0.5, p[0] + p[1]]));
        }
        assert_eq!(f.vertex(13), QTensor([0.5, 1.0, -0.5, 0.5, 1.0]));
        for t in 0..space.mesh().num_tets() {
            let g = f.gradient(t);
            let expect = [
                [1.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [0.0, 0.0, -1.0],
                [0.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
            ];
            for a in 0..5 {
                for k in 0..3 {
                    assert!((g[a][k] - expect[a][k]).abs() < 1e-12);
                }
            }
        }
    }
}
