//! The anisotropic elastic bilinear form
//! `L1 grad Q : grad P + L2 div Q . div P + L3 (grad Q)^T : grad P`.

use std::sync::OnceLock;

use rayon::prelude::*;

use super::{FeSpace, QGradient, DOFS_PER_VERTEX};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::basis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticConstants {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityReport {
    pub elliptic: bool,
    /// Smallest of the four slacks.
    pub margin: f64,
    /// `L1`, `L3 + L1`, `2 L1 - L3`, `L2 + 3/5 L1 + 1/10 L3`.
    pub slacks: [f64; 4],
}

pub fn ellipticity_check(c: &ElasticConstants) -> EllipticityReport {
    let slacks = [
        c.l1,
        c.l3 + c.l1,
        2.0 * c.l1 - c.l3,
        c.l2 + 0.6 * c.l1 + 0.1 * c.l3,
    ];
    let margin = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    EllipticityReport {
        elliptic: margin > 0.0,
        margin,
        slacks,
    }
}

impl ElasticConstants {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Self {
        ElasticConstants { l1, l2, l3 }
    }

    pub fn one_constant(l1: f64) -> Self {
        Self::new(l1, 0.0, 0.0)
    }

    /// Fails with `EllipticityViolated` unless the constants are elliptic.
    pub fn checked(self) -> Result<Self> {
        let r = ellipticity_check(&self);
        if r.elliptic {
            Ok(self)
        } else {
            Err(Error::EllipticityViolated { margin: r.margin })
        }
    }

    /// `C[a][b][j][k]` with `A(Q,P) = sum C d_j q_a d_k p_b`.
    pub fn tensor(&self) -> [[[[f64; 3]; 3]; 5]; 5] {
        let p = products();
        let mut c = [[[[0.0; 3]; 3]; 5]; 5];
        for a in 0..5 {
            for b in 0..5 {
                for j in 0..3 {
                    for k in 0..3 {
                        let mut v = self.l2 * p[a][b][j][k] + self.l3 * p[b][a][j][k];
                        if a == b && j == k {
                            v += self.l1;
                        }
                        c[a][b][j][k] = v;
                    }
                }
            }
        }
        c
    }

    /// Elastic energy density `W(G) = A-integrand(G, G) / 2`.
    pub fn density(&self, g: &QGradient) -> f64 {
        0.5 * self.pair_density(g, g)
    }

    /// Integrand of `A` for constant gradients `gq`, `gp`.
    pub fn pair_density(&self, gq: &QGradient, gp: &QGradient) -> f64 {
        let c = self.tensor();
        let mut s = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                for j in 0..3 {
                    for k in 0..3 {
                        s += c[a][b][j][k] * gq[a][j] * gp[b][k];
                    }
                }
            }
        }
        s
    }
}

/// `(E_a E_b)_{jk}` for all basis pairs.
fn products() -> &'static [[[[f64; 3]; 3]; 5]; 5] {
    static P: OnceLock<[[[[f64; 3]; 3]; 5]; 5]> = OnceLock::new();
    P.get_or_init(|| {
        let e = basis();
        let mut p = [[[[0.0; 3]; 3]; 5]; 5];
        for a in 0..5 {
            for b in 0..5 {
                let m = e[a] * e[b];
                for j in 0..3 {
                    for k in 0..3 {
                        p[a][b][j][k] = m[(j, k)];
                    }
                }
            }
        }
        p
    })
}

/// Local 20x20 matrix, row/col index `5 * local_vertex + component`.
pub(crate) fn local_elastic(
    c: &[[[[f64; 3]; 3]; 5]; 5],
    grads: &super::ShapeGradients,
    vol: f64,
) -> [[f64; 20]; 20] {
    let mut k = [[0.0; 20]; 20];
    for i in 0..4 {
        for m in 0..4 {
            for a in 0..5 {
                for b in 0..5 {
                    let mut s = 0.0;
                    for j in 0..3 {
                        for l in 0..3 {
                            s += c[a][b][j][l] * grads[i][j] * grads[m][l];
                        }
                    }
                    k[5 * m + b][5 * i + a] = vol * s;
                }
            }
        }
    }
    k
}

/// Elastic matrix over all dofs. Entries are exact since P1 gradients are
/// constant per element.
pub fn assemble_elastic(space: &FeSpace, c: &ElasticConstants) -> CsrMatrix {
    let ct = c.tensor();
    let mesh = space.mesh();
    let mut mat = space.zero_matrix();
    const CHUNK: usize = 2048;
    for start in (0..mesh.num_tets()).step_by(CHUNK) {
        let end = (start + CHUNK).min(mesh.num_tets());
        let locals: Vec<_> = (start..end)
            .into_par_iter()
            .map(|t| local_elastic(&ct, space.shape_gradients(t), space.volume(t)))
            .collect();
        for (t, k) in (start..end).zip(locals) {
            scatter(&mut mat, &mesh.tets()[t], &k);
        }
    }
    mat
}

pub(crate) fn scatter(mat: &mut CsrMatrix, tet: &[usize; 4], k: &[[f64; 20]; 20]) {
    for i in 0..4 {
        for a in 0..5 {
            let row = DOFS_PER_VERTEX * tet[i] + a;
            for m in 0..4 {
                for b in 0..5 {
                    let v = k[5 * i + a][5 * m + b];
                    if v != 0.0 {
                        mat.add_at(row, DOFS_PER_VERTEX * tet[m] + b, v);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::DiscreteField;
    use crate::mesh::unit_cube_mesh;
    use crate::tensor::QTensor;

    #[test]
    fn ellipticity_examples() {
        assert!(ellipticity_check(&ElasticConstants::new(1.0, 0.0, 0.0)).elliptic);
        assert!(!ellipticity_check(&ElasticConstants::new(1.0, 0.0, 2.0)).elliptic);
        let r = ellipticity_check(&ElasticConstants::new(1.0, -0.7, 0.5));
        assert!(!r.elliptic);
        assert!((r.slacks[3] + 0.05).abs() < 1e-15);
        assert!(matches!(
            ElasticConstants::new(1.0, 0.0, 2.0).checked(),
            Err(Error::EllipticityViolated { .. })
        ));
    }

    #[test]
    fn tensor_is_symmetric() {
        let c = ElasticConstants::new(1.0, 0.3, -0.4).tensor();
        for a in 0..5 {
            for b in 0..5 {
                for j in 0..3 {
                    for k in 0..3 {
                        assert!((c[a][b][j][k] - c[b][a][k][j]).abs() < 1e-15);
                    }
                }
            }
        }
    }

    /// Density oracle written directly with 3x3 matrices:
    /// `L1 dQ_ij/dx_k dQ_ij/dx_k + L2 (dQ_ij/dx_j)^2 + L3 dQ_ik/dx_j dQ_ij/dx_k`.
    fn matrix_density(c: &ElasticConstants, g: &QGradient) -> f64 {
        let e = basis();
        let dq =
            |i: usize, j: usize, k: usize| -> f64 { (0..5).map(|a| g[a][k] * e[a][(i, j)]).sum() };
        let mut t1 = 0.0;
        let mut t3 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t1 += dq(i, j, k) * dq(i, j, k);
                    t3 += dq(i, k, j) * dq(i, j, k);
                }
            }
        }
        let t2: f64 = (0..3)
            .map(|i| {
                let d: f64 = (0..3).map(|j| dq(i, j, j)).sum();
                d * d
            })
            .sum();
        0.5 * (c.l1 * t1 + c.l2 * t2 + c.l3 * t3)
    }

    #[test]
    fn quadratic_form_matches_density_oracle() {
        let c = ElasticConstants::new(1.0, 0.2, 0.3);
        let g: QGradient = [
            [0.3, -0.1, 0.7],
            [0.2, 0.5, -0.4],
            [-0.6, 0.1, 0.2],
            [0.0, 0.9, -0.3],
            [0.4, -0.2, 0.1],
        ];
        assert!((c.density(&g) - matrix_density(&c, &g)).abs() < 1e-13);

        // field with this constant gradient on the mesh
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let mut f = DiscreteField::zeros(&space);
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            let q = QTensor(std::array::from_fn(|a| {
                (0..3).map(|k| g[a][k] * p[k]).sum()
            }));
            f.set_vertex(v, &q);
        }
        let k = assemble_elastic(&space, &c);
        let kx = k.mul_vec(f.values());
        let form: f64 = kx.iter().zip(f.values()).map(|(a, b)| a * b).sum();
        assert!((0.5 * form - matrix_density(&c, &g)).abs() < 1e-12);
    }

    #[test]
    fn one_constant_decouples_into_scalar_laplacians() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let k = assemble_elastic(&space, &ElasticConstants::one_constant(1.0));
        // scalar P1 stiffness built independently
        let mesh = space.mesh();
        let nv = mesh.num_vertices();
        let mut s = vec![vec![0.0; nv]; nv];
        for t in 0..mesh.num_tets() {
            let g = space.shape_gradients(t);
            let tet = mesh.tets()[t];
            for i in 0..4 {
                for j in 0..4 {
                    let d: f64 = (0..3).map(|l| g[i][l] * g[j][l]).sum();
                    s[tet[i]][tet[j]] += space.volume(t) * d;
                }
            }
        }
        for v in 0..nv {
            for w in 0..nv {
                for a in 0..5 {
                    for b in 0..5 {
                        let expect = if a == b { s[v][w] } else { 0.0 };
                        assert!((k.get(5 * v + a, 5 * w + b) - expect).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_symmetric() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let k = assemble_elastic(&space, &ElasticConstants::new(1.0, 0.5, -0.5));
        assert!(k.max_asymmetry() < 1e-14);
    }
}
