//! Ball-Majumdar singular potential through the Maier-Saupe dual problem.
//!
//! For a strictly physical `Q`, the entropy minimizer over orientation
//! densities with second moment `Q` is `rho(p) = exp(p . Lambda p) / Z(Lambda)`.
//! The multiplier `Lambda` solves the moment equation
//! `<p p^T - I/3>_rho = Q`, which is the stationarity condition of the convex
//! dual `ln Z(Lambda) - Lambda : Q`. Duality then gives
//!
//! * `f(Q) = Lambda : Q - ln Z(Lambda)`
//! * `df/dQ = Lambda`
//! * `d2f/dQ2 = Sigma^{-1}`, with `Sigma` the covariance of the moments
//!   `m_i(p) = p . E_i p` under `rho`.
//!
//! All sphere integrals use a fixed [`SphereRule`], so the dual problem is
//! solved exactly for the discrete measure.

use std::sync::Arc;

use nalgebra::{Matrix5, Vector5};

use crate::error::{Error, Result};
use crate::sphere::{lebedev_rule, SphereRule, DEFAULT_DEGREE};
use crate::tensor::{basis, QTensor};

/// Default moment-matching tolerance for the dual solve.
pub const DEFAULT_DUAL_TOL: f64 = 1e-10;
const MAX_DUAL_ITERS: usize = 100;
const MIN_STEP: f64 = 1.0 / 1048576.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BmParams {
    /// Absolute temperature.
    pub temperature: f64,
    /// Interaction strength.
    pub kappa: f64,
}

impl BmParams {
    pub fn new(temperature: f64, kappa: f64) -> Result<Self> {
        if !(temperature > 0.0 && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "BM parameters must be positive, got T={temperature}, kappa={kappa}"
            )));
        }
        Ok(BmParams { temperature, kappa })
    }
}

/// Converged dual solve for one target tensor.
#[derive(Clone, Debug)]
pub struct MaierSaupeState {
    pub lambda: QTensor,
    pub log_z: f64,
    pub covariance: Matrix5<f64>,
    pub q_target: QTensor,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// A sphere rule with the basis moments `m_i(p_k)` tabulated at its nodes.
#[derive(Clone, Debug)]
pub struct MomentRule {
    rule: SphereRule,
    moments: Vec<[f64; 5]>,
}

/// Moment statistics of `rho_Lambda` on the rule.
struct Moments {
    log_z: f64,
    mean: Vector5<f64>,
    cov: Matrix5<f64>,
}

impl MomentRule {
    pub fn new(rule: SphereRule) -> Self {
        let e = basis();
        let moments = rule
            .nodes()
            .iter()
            .map(|p| {
                let mut m = [0.0; 5];
                for (i, ei) in e.iter().enumerate() {
                    let mut acc = 0.0;
                    for r in 0..3 {
                        for c in 0..3 {
                            acc += p[r] * ei[(r, c)] * p[c];
                        }
                    }
                    m[i] = acc;
                }
                m
            })
            .collect();
        MomentRule { rule, moments }
    }

    pub fn with_degree(degree: usize) -> Result<Self> {
        Ok(Self::new(lebedev_rule(degree)?))
    }

    pub fn rule(&self) -> &SphereRule {
        &self.rule
    }

    fn exponents(&self, lambda: &QTensor) -> (Vec<f64>, f64) {
        let mut max = f64::NEG_INFINITY;
        let e: Vec<f64> = self
            .moments
            .iter()
            .map(|m| {
                let v = m
                    .iter()
                    .zip(lambda.0.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                max = max.max(v);
                v
            })
            .collect();
        (e, max)
    }

    fn log_partition(&self, lambda: &QTensor) -> f64 {
        let (e, max) = self.exponents(lambda);
        let z: f64 = e
            .iter()
            .zip(self.rule.weights())
            .map(|(v, w)| w * (v - max).exp())
            .sum();
        z.ln() + max
    }

    fn mean(&self, lambda: &QTensor) -> Vector5<f64> {
        let (e, max) = self.exponents(lambda);
        let mut z = 0.0;
        let mut mean = Vector5::zeros();
        for ((v, w), m) in e.iter().zip(self.rule.weights()).zip(&self.moments) {
            let u = w * (v - max).exp();
            z += u;
            for i in 0..5 {
                mean[i] += u * m[i];
            }
        }
        mean / z
    }

    fn statistics(&self, lambda: &QTensor) -> Moments {
        let (e, max) = self.exponents(lambda);
        let rho: Vec<f64> = e
            .iter()
            .zip(self.rule.weights())
            .map(|(v, w)| w * (v - max).exp())
            .collect();
        let z: f64 = rho.iter().sum();
        let mut mean = Vector5::zeros();
        for (r, m) in rho.iter().zip(&self.moments) {
            for i in 0..5 {
                mean[i] += r * m[i];
            }
        }
        mean /= z;
        // centred second pass; concentrated densities have tiny covariance
        let mut cov = Matrix5::zeros();
        for (r, m) in rho.iter().zip(&self.moments) {
            let d = Vector5::from_fn(|i, _| m[i] - mean[i]);
            for i in 0..5 {
                let di = r * d[i];
                for j in i..5 {
                    cov[(i, j)] += di * d[j];
                }
            }
        }
        for i in 0..5 {
            for j in i..5 {
                cov[(i, j)] /= z;
                cov[(j, i)] = cov[(i, j)];
            }
        }
        Moments {
            log_z: z.ln() + max,
            mean,
            cov,
        }
    }

    /// Second moment `int (p p^T - I/3) rho_Lambda dp` in coefficients.
    pub fn moment_map(&self, lambda: &QTensor) -> QTensor {
        QTensor(self.mean(lambda).into())
    }

    /// Newton solve of the moment equation for `Lambda`.
    pub fn solve_multiplier(
        &self,
        q_target: &QTensor,
        warm_start: Option<&QTensor>,
        tol: f64,
    ) -> Result<MaierSaupeState> {
        let margin = q_target.physicality_margin();
        if !(margin > 0.0) {
            return Err(Error::NotPhysical { margin });
        }
        let target = Vector5::from(q_target.0);
        let mut lambda = warm_start.copied().unwrap_or(QTensor::ZERO);
        if !lambda.is_finite() {
            lambda = QTensor::ZERO;
        }
        let mut stats = self.statistics(&lambda);
        let mut res = (stats.mean - target).norm();
        let mut iterations = 0;
        while res > tol {
            if iterations == MAX_DUAL_ITERS {
                return Err(Error::DualNoConvergence {
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            let chol = stats.cov.cholesky().ok_or(Error::SingularCovariance {
                min_eigenvalue: stats.cov.symmetric_eigenvalues().min(),
            })?;
            let step = chol.solve(&(target - stats.mean));
            let mut t = 1.0;
            loop {
                let trial = QTensor(std::array::from_fn(|i| lambda[i] + t * step[i]));
                let trial_stats = self.statistics(&trial);
                let trial_res = (trial_stats.mean - target).norm();
                if trial_res < res && trial_res.is_finite() {
                    lambda = trial;
                    stats = trial_stats;
                    res = trial_res;
                    break;
                }
                t *= 0.5;
                if t < MIN_STEP {
                    return Err(Error::DualNoConvergence {
                        iterations,
                        residual: res,
                    });
                }
            }
        }
        Ok(MaierSaupeState {
            lambda,
            log_z: stats.log_z,
            covariance: stats.cov,
            q_target: *q_target,
            residual_norm: res,
            iterations,
        })
    }

    /// Direct quadrature of `int rho ln rho` for the density of `state`.
    pub fn entropy(&self, state: &MaierSaupeState) -> f64 {
        let (e, _) = self.exponents(&state.lambda);
        e.iter()
            .zip(self.rule.weights())
            .map(|(v, w)| {
                let ln_rho = v - state.log_z;
                w * ln_rho.exp() * ln_rho
            })
            .sum()
    }

    /// `ln int exp(p . Lambda p) dp`.
    pub fn log_z(&self, lambda: &QTensor) -> f64 {
        self.log_partition(lambda)
    }
}

/// See [`MomentRule::moment_map`].
pub fn moment_map(lambda: &QTensor, rule: &SphereRule) -> QTensor {
    MomentRule::new(rule.clone()).moment_map(lambda)
}

/// See [`MomentRule::solve_multiplier`].
pub fn solve_multiplier(
    q_target: &QTensor,
    rule: &SphereRule,
    warm_start: Option<&QTensor>,
    tol: f64,
) -> Result<MaierSaupeState> {
    MomentRule::new(rule.clone()).solve_multiplier(q_target, warm_start, tol)
}

/// `f(Q) = Lambda : Q - ln Z(Lambda)`.
pub fn f_value(state: &MaierSaupeState) -> f64 {
    state.lambda.dot(&state.q_target) - state.log_z
}

pub fn f_gradient(state: &MaierSaupeState) -> QTensor {
    state.lambda
}

/// Inverse covariance of the moments.
pub fn f_hessian(state: &MaierSaupeState) -> Result<Matrix5<f64>> {
    let eig = state.covariance.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > hi * 1e-14) {
        return Err(Error::SingularCovariance { min_eigenvalue: lo });
    }
    let chol = state
        .covariance
        .cholesky()
        .ok_or(Error::SingularCovariance { min_eigenvalue: lo })?;
    let inv = chol.inverse();
    Ok((inv + inv.transpose()) * 0.5)
}

/// `psi_BM = T f(Q) - kappa tr(Q^2)`.
pub fn bm_density(params: &BmParams, state: &MaierSaupeState) -> f64 {
    params.temperature * f_value(state) - params.kappa * state.q_target.norm_sq()
}

/// Weak-form integrand of the Euler-Lagrange operator:
/// `(T/2) Lambda - kappa Q`.
pub fn bm_gradient(params: &BmParams, state: &MaierSaupeState) -> QTensor {
    state.lambda * (0.5 * params.temperature) - state.q_target * params.kappa
}

/// Linearization of [`bm_gradient`]: `(T/2) Sigma^{-1} - kappa I`.
pub fn bm_hessian(params: &BmParams, state: &MaierSaupeState) -> Result<Matrix5<f64>> {
    Ok(f_hessian(state)? * (0.5 * params.temperature) - Matrix5::identity() * params.kappa)
}

/// Ball-Majumdar model: parameters plus the sphere rule and dual tolerance
/// used to evaluate `f`.
#[derive(Clone, Debug)]
pub struct BmModel {
    pub params: BmParams,
    pub moments: Arc<MomentRule>,
    pub dual_tol: f64,
}

impl BmModel {
    pub fn new(params: BmParams, lebedev_degree: usize, dual_tol: f64) -> Result<Self> {
        if !(dual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dual tolerance must be positive, got {dual_tol}"
            )));
        }
        Ok(BmModel {
            params,
            moments: Arc::new(MomentRule::with_degree(lebedev_degree)?),
            dual_tol,
        })
    }

    pub fn with_defaults(params: BmParams) -> Result<Self> {
        Self::new(params, DEFAULT_DEGREE, DEFAULT_DUAL_TOL)
    }

    pub fn solve(&self, q: &QTensor, warm_start: Option<&QTensor>) -> Result<MaierSaupeState> {
        self.moments.solve_multiplier(q, warm_start, self.dual_tol)
    }
}
