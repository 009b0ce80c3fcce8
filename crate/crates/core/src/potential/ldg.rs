//! Quartic Landau-de Gennes bulk density.

use nalgebra::Matrix5;

use crate::error::{Error, Result};
use crate::tensor::{triple_traces, QTensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdgParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LdgParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LDG parameters must be positive, got a={a}, b={b}, c={c}"
            )));
        }
        Ok(LdgParams { a, b, c })
    }

    /// `a = alpha (T* - T)` for the rescaled-temperature form.
    pub fn from_temperature(alpha: f64, t_star: f64, t: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(alpha * (t_star - t), b, c)
    }
}

/// `-(a/2) tr(Q^2) - (b/3) tr(Q^3) + (c/2) (tr(Q^2))^2`.
pub fn ldg_density(params: &LdgParams, q: &QTensor) -> f64 {
    let q2 = q.norm_sq();
    -0.5 * params.a * q2 - params.b / 3.0 * q.trace_cube() + 0.5 * params.c * q2 * q2
}

/// Derivative of [`ldg_density`] in the basis directions:
/// `-a Q - b (Q^2)_S + 2c tr(Q^2) Q`.
pub fn ldg_gradient(params: &LdgParams, q: &QTensor) -> QTensor {
    let q2 = q.norm_sq();
    let sq = q.square_projected();
    let mut g = [0.0; 5];
    for i in 0..5 {
        g[i] = (-params.a + 2.0 * params.c * q2) * q[i] - params.b * sq[i];
    }
    QTensor(g)
}

/// Second derivative of [`ldg_density`]:
/// `H_ij = -a d_ij - 2b tr(Q E_i E_j) + 2c (tr(Q^2) d_ij + 2 q_i q_j)`.
pub fn ldg_hessian(params: &LdgParams, q: &QTensor) -> Matrix5<f64> {
    let t = triple_traces();
    let q2 = q.norm_sq();
    let mut h = Matrix5::zeros();
    for i in 0..5 {
        for j in i..5 {
            let mut qee = 0.0;
            for k in 0..5 {
                qee += q[k] * t[k][i][j];
            }
            let mut v = -2.0 * params.b * qee + 4.0 * params.c * q[i] * q[j];
            if i == j {
                v += -params.a + 2.0 * params.c * q2;
            }
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::trace_products;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> LdgParams {
        LdgParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn fd_gradient(p: &LdgParams, q: &QTensor, h: f64) -> [f64; 5] {
        let mut g = [0.0; 5];
        for i in 0..5 {
            let e = QTensor::unit(i) * h;
            g[i] = (ldg_density(p, &(*q + e)) - ldg_density(p, &(*q - e))) / (2.0 * h);
        }
        g
    }

    #[test]
    fn density_examples() {
        assert_eq!(ldg_density(&unit(), &QTensor::ZERO), 0.0);
        let q = QTensor::uniaxial(1.0, [0.0, 0.0, 1.0]);
        // explicit-matrix traces: tr Q^2 = 2/3, tr Q^3 = 2/9
        let tp = trace_products(&q, &q, &q);
        let oracle = -0.5 * tp.qq - tp.qqq / 3.0 + 0.5 * tp.qq * tp.qq;
        assert!((oracle + 5.0 / 27.0).abs() < 1e-15);
        assert!((ldg_density(&unit(), &q) - oracle).abs() < 1e-15);
    }

    #[test]
    fn mbba_parameters_accepted() {
        // alpha = 0.42e3 J/m^3/C, b = 0.64e4, c = 0.35e4, T* = 45 C, below T*
        let p = LdgParams::from_temperature(0.42e3, 45.0, 44.0, 0.64e4, 0.35e4).unwrap();
        assert!((p.a - 420.0).abs() < 1e-9);
        assert!(LdgParams::from_temperature(0.42e3, 45.0, 46.0, 0.64e4, 0.35e4).is_err());
    }

    #[test]
    fn derivatives_at_zero() {
        let p = LdgParams::new(1.7, 0.3, 2.0).unwrap();
        let g = ldg_gradient(&p, &QTensor::ZERO);
        assert_eq!(g, QTensor::ZERO);
        let fd = fd_gradient(&p, &QTensor::ZERO, 1e-5);
        assert!(fd.iter().all(|v| v.abs() < 1e-7));
        let h = ldg_hessian(&p, &QTensor::ZERO);
        assert!((h + Matrix5::identity() * 1.7).abs().max() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = LdgParams::new(1.0, 1.3, 0.8).unwrap();
        for _ in 0..50 {
            let q = QTensor(std::array::from_fn(|_| rng.gen_range(-0.6..0.6)));
            let g = ldg_gradient(&p, &q);
            let fd = fd_gradient(&p, &q, 1e-5);
            let scale = 1.0 + g.norm();
            for i in 0..5 {
                assert!((g[i] - fd[i]).abs() < 1e-7 * scale);
            }
            let hm = ldg_hessian(&p, &q);
            assert!((hm - hm.transpose()).abs().max() == 0.0);
            let hscale = 1.0 + hm.abs().max();
            for j in 0..5 {
                let e = QTensor::unit(j) * 1e-5;
                let gp = ldg_gradient(&p, &(q + e));
                let gm = ldg_gradient(&p, &(q - e));
                for i in 0..5 {
                    let fd = (gp[i] - gm[i]) / 2e-5;
                    assert!((hm[(i, j)] - fd).abs() < 1e-6 * hscale);
                }
            }
        }
    }
}
