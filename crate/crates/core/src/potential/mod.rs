//! Pointwise bulk energy densities and their derivatives.

pub mod ldg;
pub mod maier_saupe;

pub use ldg::{ldg_density, ldg_gradient, ldg_hessian, LdgParams};
pub use maier_saupe::{
    bm_density, bm_gradient, bm_hessian, f_gradient, f_hessian, f_value, moment_map,
    solve_multiplier, BmModel, BmParams, MaierSaupeState, MomentRule, DEFAULT_DUAL_TOL,
};

use nalgebra::Matrix5;

use crate::error::Result;
use crate::tensor::QTensor;

/// The bulk term of the energy.
#[derive(Clone, Debug)]
pub enum BulkPotential {
    /// Pure elastic problem.
    None,
    Ldg(LdgParams),
    Bm(BmModel),
}

/// Density, weak-form integrand and its linearization at one point.
#[derive(Clone, Debug)]
pub struct PointEval {
    pub density: f64,
    /// Potential whose derivative is `gradient`: the density for LDG, half
    /// of it for BM (the BM weak form carries `T/2` and `kappa`).
    pub potential: f64,
    pub gradient: QTensor,
    pub hessian: Option<Matrix5<f64>>,
    /// Multiplier of the dual solve (BM only), reused as warm start.
    pub multiplier: Option<QTensor>,
}

impl BulkPotential {
    pub fn is_singular(&self) -> bool {
        matches!(self, BulkPotential::Bm(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            BulkPotential::None => "none",
            BulkPotential::Ldg(_) => "ldg",
            BulkPotential::Bm(_) => "bm",
        }
    }

    /// Evaluates the bulk quantities at `q`; `warm` seeds the BM dual solve.
    pub fn eval(
        &self,
        q: &QTensor,
        warm: Option<&QTensor>,
        with_hessian: bool,
    ) -> Result<PointEval> {
        match self {
            BulkPotential::None => Ok(PointEval {
                density: 0.0,
                potential: 0.0,
                gradient: QTensor::ZERO,
                hessian: with_hessian.then(Matrix5::zeros),
                multiplier: None,
            }),
            BulkPotential::Ldg(p) => {
                let density = ldg_density(p, q);
                Ok(PointEval {
                    density,
                    potential: density,
                    gradient: ldg_gradient(p, q),
                    hessian: with_hessian.then(|| ldg_hessian(p, q)),
                    multiplier: None,
                })
            }
            BulkPotential::Bm(model) => {
                let state = model.solve(q, warm)?;
                let hessian = if with_hessian {
                    Some(bm_hessian(&model.params, &state)?)
                } else {
                    None
                };
                let density = bm_density(&model.params, &state);
                Ok(PointEval {
                    density,
                    potential: 0.5 * density,
                    gradient: bm_gradient(&model.params, &state),
                    hessian,
                    multiplier: Some(state.lambda),
                })
            }
        }
    }
}
