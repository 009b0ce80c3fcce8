//! `L^2` and `H^1` norms of discrete fields and of interpolation or
//! discretization errors.

use rayon::prelude::*;

use super::field::TensorField;
use super::{DiscreteField, FeSpace, TetRule, DOFS_PER_VERTEX};
use crate::error::Result;
use crate::sparse::{dot, linear_solve, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_seminorm: f64,
    /// `sqrt(l2^2 + h1_seminorm^2)`.
    pub h1: f64,
}

/// `mass_w * M + stiff_w * S` with the scalar P1 mass and stiffness
/// repeated on each component.
fn block_matrix(space: &FeSpace, mass_w: f64, stiff_w: f64) -> CsrMatrix {
    let mesh = space.mesh();
    let mut mat = space.zero_matrix();
    for t in 0..mesh.num_tets() {
        let tet = mesh.tets()[t];
        let g = space.shape_gradients(t);
        let vol = space.volume(t);
        for i in 0..4 {
            for j in 0..4 {
                let m = vol / 20.0 * if i == j { 2.0 } else { 1.0 };
                let s = vol * (0..3).map(|k| g[i][k] * g[j][k]).sum::<f64>();
                let v = mass_w * m + stiff_w * s;
                for a in 0..DOFS_PER_VERTEX {
                    mat.add_at(
                        DOFS_PER_VERTEX * tet[i] + a,
                        DOFS_PER_VERTEX * tet[j] + a,
                        v,
                    );
                }
            }
        }
    }
    mat
}

pub fn mass_matrix(space: &FeSpace) -> CsrMatrix {
    block_matrix(space, 1.0, 0.0)
}

pub fn stiffness_matrix(space: &FeSpace) -> CsrMatrix {
    block_matrix(space, 0.0, 1.0)
}

pub fn gram_matrix(space: &FeSpace) -> CsrMatrix {
    block_matrix(space, 1.0, 1.0)
}

fn quadratic_form(m: &CsrMatrix, x: &[f64]) -> f64 {
    dot(&m.mul_vec(x), x).max(0.0)
}

pub fn l2_norm(field: &DiscreteField) -> f64 {
    quadratic_form(&mass_matrix(field.space()), field.values()).sqrt()
}

pub fn h1_seminorm(field: &DiscreteField) -> f64 {
    quadratic_form(&stiffness_matrix(field.space()), field.values()).sqrt()
}

pub fn h1_norm(field: &DiscreteField) -> f64 {
    quadratic_form(&gram_matrix(field.space()), field.values()).sqrt()
}

/// `H^1` norm of a free-dof vector (zero on the boundary).
pub fn h1_norm_free(space: &FeSpace, x: &[f64]) -> f64 {
    quadratic_form(space.gram(), x).sqrt()
}

/// Norm of a free-dof residual in the dual of the discrete `H^1_0`:
/// `sqrt(r^T G^{-1} r)`.
pub fn dual_norm(space: &FeSpace, r: &[f64]) -> Result<f64> {
    if r.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let y = linear_solve(space.gram(), r, 1e-12)?;
    Ok(dot(r, &y).max(0.0).sqrt())
}

/// Norms of `exact - field`, integrated with `rule` on every element.
pub fn error_norms(field: &DiscreteField, exact: &dyn TensorField, rule: &TetRule) -> ErrorNorms {
    let space = field.space();
    let mesh = space.mesh();
    let (l2, semi) = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let p = mesh.tet_points(t);
            let vol = space.volume(t);
            let gh = field.gradient(t);
            let mut l2 = 0.0;
            let mut semi = 0.0;
            for (b, w) in rule.points().iter().zip(rule.weights()) {
                let x = std::array::from_fn(|k| (0..4).map(|i| b[i] * p[i][k]).sum());
                let d = exact.value(&x) - field.eval(t, b);
                l2 += w * vol * d.norm_sq();
                let ge = exact.gradient(&x);
                let mut s = 0.0;
                for a in 0..5 {
                    for k in 0..3 {
                        s += (ge[a][k] - gh[a][k]).powi(2);
                    }
                }
                semi += w * vol * s;
            }
            (l2, semi)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    ErrorNorms {
        l2: l2.sqrt(),
        h1_seminorm: semi.sqrt(),
        h1: (l2 + semi).sqrt(),
    }
}
