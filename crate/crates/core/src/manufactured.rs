//! Analytic Q-tensor fields used as boundary data and exact solutions, and
//! the discrete forcing that makes a given field solve the problem.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::field::TensorField;
use crate::fem::{ElasticConstants, FeSpace, QGradient, TetRule, DOFS_PER_VERTEX};
use crate::mesh::Point;
use crate::potential::BulkPotential;
use crate::tensor::QTensor;

/// `s(x) (e_z e_z - I/3)` with `s = base + amp sin(pi x) sin(pi y) sin(pi z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub base: f64,
    pub amplitude: f64,
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        ManufacturedSolution {
            base: 0.2,
            amplitude: 0.1,
        }
    }
}

// e_z e_z - I/3 = (sqrt 6 / 3) E_1
const UNIAXIAL_Z: f64 = 0.816_496_580_927_726;

impl ManufacturedSolution {
    pub fn order(&self, x: &Point) -> f64 {
        self.base + self.amplitude * (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
    }
}

impl TensorField for ManufacturedSolution {
    fn value(&self, x: &Point) -> QTensor {
        QTensor([UNIAXIAL_Z * self.order(x), 0.0, 0.0, 0.0, 0.0])
    }

    fn gradient(&self, x: &Point) -> QGradient {
        let (s, c): (Vec<f64>, Vec<f64>) =
            x.iter().map(|&t| ((PI * t).sin(), (PI * t).cos())).unzip();
        let k = UNIAXIAL_Z * self.amplitude * PI;
        let mut g = [[0.0; 3]; 5];
        g[0] = [
            k * c[0] * s[1] * s[2],
            k * s[0] * c[1] * s[2],
            k * s[0] * s[1] * c[2],
        ];
        g
    }
}

/// Constant `s (n n - I/3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformUniaxial {
    pub s: f64,
    pub director: [f64; 3],
}

impl TensorField for UniformUniaxial {
    fn value(&self, _x: &Point) -> QTensor {
        QTensor::uniaxial(self.s, self.director)
    }

    fn gradient(&self, _x: &Point) -> QGradient {
        [[0.0; 3]; 5]
    }
}

/// Uniaxial with a director twisting about `z`: `n = (cos t, sin t, 0)` with
/// `t = twist * z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twisted {
    pub s: f64,
    pub twist: f64,
}

impl TensorField for Twisted {
    fn value(&self, x: &Point) -> QTensor {
        let t = self.twist * x[2];
        QTensor::uniaxial(self.s, [t.cos(), t.sin(), 0.0])
    }
}

/// `F(P) = A(Q, P) + B(Q, P)` for basis functions `P`, integrated with `rule`
/// from the exact values and gradients of `exact`. Indexed by dof.
pub fn manufactured_forcing(
    space: &FeSpace,
    elastic: &ElasticConstants,
    bulk: &BulkPotential,
    exact: &dyn TensorField,
    rule: &TetRule,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let ct = elastic.tensor();
    let mut f = vec![0.0; space.num_dofs()];
    const CHUNK: usize = 1024;
    for start in (0..mesh.num_tets()).step_by(CHUNK) {
        let end = (start + CHUNK).min(mesh.num_tets());
        let locals: Vec<Result<[f64; 20]>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let p = mesh.tet_points(t);
                let grads = space.shape_gradients(t);
                let vol = space.volume(t);
                let mut local = [0.0; 20];
                let mut warm: Option<QTensor> = None;
                for (b, w) in rule.points().iter().zip(rule.weights()) {
                    let x: Point = std::array::from_fn(|k| (0..4).map(|i| b[i] * p[i][k]).sum());
                    let q = exact.value(&x);
                    let g = exact.gradient(&x);
                    let pe = bulk.eval(&q, warm.as_ref(), false)?;
                    warm = pe.multiplier;
                    let wv = w * vol;
                    for m in 0..4 {
                        for bb in 0..5 {
                            let mut el = 0.0;
                            for a in 0..5 {
                                for j in 0..3 {
                                    for k in 0..3 {
                                        el += ct[a][bb][j][k] * g[a][j] * grads[m][k];
                                    }
                                }
                            }
                            local[5 * m + bb] += wv * (el + pe.gradient[bb] * b[m]);
                        }
                    }
                }
                Ok(local)
            })
            .collect();
        for (t, local) in (start..end).zip(locals) {
            let local = local?;
            for (i, &v) in mesh.tets()[t].iter().enumerate() {
                for a in 0..5 {
                    f[DOFS_PER_VERTEX * v + a] += local[5 * i + a];
                }
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::field::FnField;

    #[test]
    fn gradient_matches_finite_differences() {
        let m = ManufacturedSolution::default();
        let fd = FnField(|x: &Point| m.value(x));
        for x in [[0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.9, 0.05, 0.7]] {
            let (g, h) = (m.gradient(&x), fd.gradient(&x));
            for a in 0..5 {
                for k in 0..3 {
                    assert!((g[a][k] - h[a][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn manufactured_field_is_uniaxial_and_physical() {
        let m = ManufacturedSolution::default();
        let x = [0.5, 0.5, 0.5];
        let q = m.value(&x);
        let expect = QTensor::uniaxial(0.3, [0.0, 0.0, 1.0]);
        assert!((q - expect).norm() < 1e-15);
        // eigenvalues stay in [-0.1, 0.2]
        for p in [[0.0, 0.0, 0.0], [0.5, 0.5, 0.5], [0.3, 0.7, 0.1]] {
            let e = m.value(&p).eigenvalues();
            assert!(e.min() >= -0.1 - 1e-14 && e.max() <= 0.2 + 1e-14);
        }
    }

    #[test]
    fn twisted_keeps_order() {
        let t = Twisted {
            s: 0.4,
            twist: PI / 2.0,
        };
        let e = t.value(&[0.0, 0.0, 0.7]).eigenvalues();
        assert!((e.max() - 0.4 * 2.0 / 3.0).abs() < 1e-12);
    }
}
