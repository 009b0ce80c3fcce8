//! Newton solve of the discrete Euler-Lagrange system
//! `A(Q_C, P) + B(Q_C, P) = F(P)` for all `P` vanishing on the boundary.

mod infsup;
mod kantorovich;

pub use infsup::{discrete_infsup, DENSE_DOF_LIMIT};
pub use kantorovich::{kantorovich_estimates, KantorovichOptions, KantorovichRecord};

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fem::bulk::{assemble_bulk, MultiplierCache};
use crate::fem::elastic::assemble_elastic;
use crate::fem::norms::{dual_norm, h1_norm_free};
use crate::fem::{DiscreteField, ElasticConstants, FeSpace, TetRule};
use crate::potential::BulkPotential;
use crate::sparse::{dot, linear_solve, CsrMatrix, DEFAULT_LINEAR_TOL};
use crate::tensor::QTensor;

/// Smallest admissible damping factor.
pub const MIN_STEP: f64 = 1.0 / 1048576.0;

/// A discrete problem: space, elastic constants, bulk term and optional
/// right-hand side.
#[derive(Debug)]
pub struct Problem {
    space: Arc<FeSpace>,
    elastic: ElasticConstants,
    bulk: BulkPotential,
    rule: TetRule,
    forcing: Option<Vec<f64>>,
    stiffness: OnceLock<CsrMatrix>,
}

/// Residual (free dofs), optional tangent (free dofs) and energy at a field.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residual: Vec<f64>,
    pub tangent: Option<CsrMatrix>,
    /// `F_E + F_B`, without the forcing.
    pub energy: f64,
}

impl Problem {
    /// Rejects non-elliptic constants.
    pub fn new(
        space: Arc<FeSpace>,
        elastic: ElasticConstants,
        bulk: BulkPotential,
    ) -> Result<Self> {
        Ok(Self::new_unchecked(space, elastic.checked()?, bulk))
    }

    pub fn new_unchecked(
        space: Arc<FeSpace>,
        elastic: ElasticConstants,
        bulk: BulkPotential,
    ) -> Self {
        Problem {
            space,
            elastic,
            bulk,
            rule: TetRule::symmetric14(),
            forcing: None,
            stiffness: OnceLock::new(),
        }
    }

    /// Right-hand side over all dofs; only free rows are used.
    pub fn with_forcing(mut self, forcing: Vec<f64>) -> Result<Self> {
        if forcing.len() != self.space.num_dofs() {
            return Err(Error::Dimension(format!(
                "forcing has {} entries, space has {} dofs",
                forcing.len(),
                self.space.num_dofs()
            )));
        }
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn with_rule(mut self, rule: TetRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn elastic(&self) -> &ElasticConstants {
        &self.elastic
    }

    pub fn bulk(&self) -> &BulkPotential {
        &self.bulk
    }

    pub fn rule(&self) -> &TetRule {
        &self.rule
    }

    pub fn forcing(&self) -> Option<&[f64]> {
        self.forcing.as_deref()
    }

    /// Elastic matrix over all dofs.
    pub fn stiffness(&self) -> &CsrMatrix {
        self.stiffness
            .get_or_init(|| assemble_elastic(&self.space, &self.elastic))
    }

    pub fn evaluate(
        &self,
        x: &DiscreteField,
        with_tangent: bool,
        cache: Option<&mut MultiplierCache>,
    ) -> Result<Evaluation> {
        if !Arc::ptr_eq(x.space(), &self.space) {
            return Err(Error::Dimension("field lives on a different space".into()));
        }
        let k = self.stiffness();
        let bulk = assemble_bulk(x, &self.bulk, &self.rule, with_tangent, cache)?;
        let kx = k.mul_vec(x.values());
        let mut full: Vec<f64> = kx.iter().zip(&bulk.residual).map(|(a, b)| a + b).collect();
        if let Some(f) = &self.forcing {
            for (r, fi) in full.iter_mut().zip(f) {
                *r -= fi;
            }
        }
        let energy = 0.5 * dot(&kx, x.values()) + bulk.energy;
        let tangent = bulk
            .tangent
            .map(|b| self.space.restrict_to_free(&k.add_scaled(1.0, &b)));
        Ok(Evaluation {
            residual: self.space.restrict_vector(&full),
            tangent,
            energy,
        })
    }

    pub fn residual(&self, x: &DiscreteField) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, false, None)?.residual)
    }

    pub fn tangent(&self, x: &DiscreteField) -> Result<CsrMatrix> {
        Ok(self
            .evaluate(x, true, None)?
            .tangent
            .expect("tangent requested"))
    }

    pub fn energy(&self, x: &DiscreteField) -> Result<f64> {
        Ok(self.evaluate(x, false, None)?.energy)
    }

    /// Solves the pure elastic problem with the boundary values of `boundary`.
    pub fn elastic_extension(&self, boundary: &DiscreteField) -> Result<DiscreteField> {
        let mut x = boundary.clone();
        for &d in self.space.free_dofs() {
            x.values_mut()[d] = 0.0;
        }
        let rhs: Vec<f64> = self
            .space
            .restrict_vector(&self.stiffness().mul_vec(x.values()))
            .iter()
            .map(|v| -v)
            .collect();
        let k = self.space.restrict_to_free(self.stiffness());
        let sol = linear_solve(&k, &rhs, DEFAULT_LINEAR_TOL)?;
        x.add_free(1.0, &sol);
        Ok(x)
    }

    /// Default initial iterate: the elastic extension of the boundary data,
    /// or, for BM when that is not physical enough, the boundary mean.
    pub fn initial_iterate(
        &self,
        boundary: &DiscreteField,
        min_margin: f64,
    ) -> Result<DiscreteField> {
        let ext = self.elastic_extension(boundary)?;
        if !self.bulk.is_singular() {
            return Ok(ext);
        }
        let mesh = self.space.mesh();
        let bmargin = mesh
            .boundary_vertices()
            .iter()
            .map(|&v| boundary.vertex(v).physicality_margin())
            .fold(f64::INFINITY, f64::min);
        if ext.min_vertex_margin() >= min_margin.min(bmargin) {
            return Ok(ext);
        }
        let nb = mesh.boundary_vertices().len().max(1) as f64;
        let mut mean = QTensor::ZERO;
        for &v in mesh.boundary_vertices() {
            mean += boundary.vertex(v) * (1.0 / nb);
        }
        let mut x = boundary.clone();
        for v in 0..mesh.num_vertices() {
            if !mesh.is_boundary(v) {
                x.set_vertex(v, &mean);
            }
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Damping {
    None,
    /// Halve the step while a vertex leaves the margin guard or the residual
    /// grows more than tenfold.
    PhysicalityHalving,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub damping: Damping,
    pub min_margin: f64,
    pub linear_tol: f64,
    /// Compute the full Kantorovich record at the initial iterate.
    pub kantorovich: Option<KantorovichOptions>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iters: 30,
            damping: Damping::PhysicalityHalving,
            min_margin: 1e-3,
            linear_tol: DEFAULT_LINEAR_TOL,
            kantorovich: None,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "Newton tolerances must be positive".into(),
            ));
        }
        if !(self.min_margin >= 0.0) {
            return Err(Error::InvalidParameter(
                "min_margin must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// Dual norm of the residual at the start of the iteration.
    pub residual: f64,
    /// `H^1` norm of the full Newton step.
    pub step_h1: f64,
    /// Accepted damping factor.
    pub step_length: f64,
    pub energy: f64,
    pub min_margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: Vec<IterationRecord>,
    pub initial_residual: f64,
    /// Recomputed from scratch at the returned field.
    pub final_residual: f64,
    pub final_energy: f64,
    /// `H^1` norm of the first Newton step.
    pub b1: Option<f64>,
    pub kantorovich: Option<KantorovichRecord>,
    pub final_margin: f64,
    pub converged: bool,
}

impl SolveReport {
    /// Residual history including the final residual.
    pub fn residuals(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.iterations.iter().map(|i| i.residual).collect();
        r.push(self.final_residual);
        r
    }
}

/// Error from [`newton_solve`] with the best iterate seen so far.
#[derive(Clone, Debug)]
pub struct SolveFailure {
    pub error: Error,
    pub best: Option<DiscreteField>,
    pub report: SolveReport,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for SolveFailure {}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        SolveFailure {
            error,
            best: None,
            report: SolveReport::default(),
        }
    }
}

fn retryable(e: &Error) -> bool {
    e.is_physicality()
        || matches!(
            e,
            Error::DualNoConvergence { .. } | Error::SingularCovariance { .. }
        )
}

/// Damped Newton iteration from `initial`, whose boundary values are kept.
#[allow(clippy::result_large_err)]
pub fn newton_solve(
    problem: &Problem,
    initial: DiscreteField,
    config: &NewtonConfig,
) -> std::result::Result<(DiscreteField, SolveReport), SolveFailure> {
    config.validate()?;
    let space = problem.space();
    let singular = problem.bulk().is_singular();
    let mut report = SolveReport::default();
    let mut x = initial;
    let m0 = x.min_vertex_margin();
    if singular && !(m0 > 0.0) {
        return Err(Error::NotPhysical { margin: m0 }.into());
    }
    let guard = if singular {
        config.min_margin.min(m0)
    } else {
        f64::NEG_INFINITY
    };

    if let Some(opts) = &config.kantorovich {
        report.kantorovich = Some(kantorovich_estimates(problem, &x, opts)?);
    }

    let mut cache = MultiplierCache::new();
    let mut current = problem.evaluate(&x, false, Some(&mut cache))?;
    let mut rn = dual_norm(space, &current.residual)?;
    report.initial_residual = rn;
    let target = config.abs_tol.max(config.rel_tol * rn);
    let mut best = (rn, x.clone());

    let fail = |error: Error, best: (f64, DiscreteField), mut report: SolveReport| {
        report.final_residual = best.0;
        report.final_margin = best.1.min_vertex_margin();
        SolveFailure {
            error,
            best: Some(best.1),
            report,
        }
    };

    let mut k = 0;
    while rn > target {
        if k == config.max_iters {
            return Err(fail(
                Error::NoConvergence {
                    iterations: k,
                    residual: rn,
                },
                best,
                report,
            ));
        }
        let eval = match problem.evaluate(&x, true, Some(&mut cache)) {
            Ok(e) => e,
            Err(e) => return Err(fail(e, best, report)),
        };
        let rhs: Vec<f64> = eval.residual.iter().map(|v| -v).collect();
        let d = match linear_solve(eval.tangent.as_ref().unwrap(), &rhs, config.linear_tol) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, best, report)),
        };
        let step_h1 = h1_norm_free(space, &d);
        if k == 0 {
            report.b1 = Some(step_h1);
        }

        let mut t = 1.0;
        let (trial, trial_eval, trial_rn) = loop {
            let mut trial = x.clone();
            trial.add_free(t, &d);
            let mut reject = singular && trial.min_vertex_margin() < guard;
            if !reject {
                match problem.evaluate(&trial, false, Some(&mut cache)) {
                    Ok(ev) => match dual_norm(space, &ev.residual) {
                        Ok(trn) => {
                            let grew = trn > 10.0 * rn || !trn.is_finite();
                            if config.damping == Damping::None || !grew {
                                break (trial, ev, trn);
                            }
                            reject = true;
                        }
                        Err(e) => return Err(fail(e, best, report)),
                    },
                    Err(e) if retryable(&e) && config.damping != Damping::None => reject = true,
                    Err(e) => return Err(fail(e, best, report)),
                }
            }
            debug_assert!(reject);
            if config.damping == Damping::None {
                return Err(fail(
                    Error::NotPhysical {
                        margin: trial.min_vertex_margin(),
                    },
                    best,
                    report,
                ));
            }
            t *= 0.5;
            if t < MIN_STEP {
                return Err(fail(Error::StepRejected { iteration: k + 1 }, best, report));
            }
        };

        report.iterations.push(IterationRecord {
            residual: rn,
            step_h1,
            step_length: t,
            energy: current.energy,
            min_margin: x.min_vertex_margin(),
        });
        x = trial;
        current = trial_eval;
        rn = trial_rn;
        if rn < best.0 {
            best = (rn, x.clone());
        }
        k += 1;
    }

    // fresh evaluation without warm starts
    let fresh = problem.evaluate(&x, false, None)?;
    report.final_residual = dual_norm(space, &fresh.residual)?;
    report.final_energy = fresh.energy;
    report.final_margin = x.min_vertex_margin();
    report.converged = true;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::field::{interpolate, FnField};
    use crate::mesh::{unit_cube_mesh, Point};
    use crate::potential::{BmModel, BmParams, LdgParams};

    fn uniaxial_boundary(space: &Arc<FeSpace>, s: f64) -> DiscreteField {
        interpolate(
            space,
            &FnField(move |_: &Point| QTensor::uniaxial(s, [0.0, 0.0, 1.0])),
        )
    }

    #[test]
    fn pure_elastic_solution_is_harmonic_extension() {
        let space = FeSpace::new(unit_cube_mesh(3).unwrap());
        let p = Problem::new(
            Arc::clone(&space),
            ElasticConstants::one_constant(1.0),
            BulkPotential::None,
        )
        .unwrap();
        // affine boundary data: the extension is the affine field itself
        let g = FnField(|x: &Point| QTensor([x[0], x[1] - x[2], 0.5, 0.0, x[2]]));
        let exact = interpolate(&space, &g);
        let mut b = exact.clone();
        for &d in space.free_dofs() {
            b.values_mut()[d] = 0.0;
        }
        let ext = p.elastic_extension(&b).unwrap();
        for (u, v) in ext.values().iter().zip(exact.values()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn ldg_constant_boundary_converges() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let p = Problem::new(
            Arc::clone(&space),
            ElasticConstants::one_constant(1.0),
            BulkPotential::Ldg(LdgParams::new(1.0, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        let b = uniaxial_boundary(&space, 0.3);
        let x0 = p.initial_iterate(&b, 1e-3).unwrap();
        let (x, rep) = newton_solve(&p, x0, &NewtonConfig::default()).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-10);
        // restarting from the solution takes no step
        let (_, rep2) = newton_solve(&p, x, &NewtonConfig::default()).unwrap();
        assert!(rep2.iterations.len() <= 1);
    }

    #[test]
    fn bm_constant_boundary_converges_physically() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let bm = BmModel::new(BmParams::new(2.0, 1.0).unwrap(), 23, 1e-10).unwrap();
        let p = Problem::new(
            Arc::clone(&space),
            ElasticConstants::one_constant(1.0),
            BulkPotential::Bm(bm),
        )
        .unwrap();
        let b = uniaxial_boundary(&space, 0.3);
        let x0 = p.initial_iterate(&b, 1e-3).unwrap();
        let (_, rep) = newton_solve(&p, x0, &NewtonConfig::default()).unwrap();
        assert!(rep.converged && rep.final_margin > 0.0);
        assert!(rep.iterations.iter().all(|i| i.min_margin > 0.0));
    }

    #[test]
    fn bm_rejects_unphysical_start() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let bm = BmModel::new(BmParams::new(2.0, 1.0).unwrap(), 23, 1e-10).unwrap();
        let p = Problem::new(
            Arc::clone(&space),
            ElasticConstants::one_constant(1.0),
            BulkPotential::Bm(bm),
        )
        .unwrap();
        let x0 = uniaxial_boundary(&space, 1.5);
        let err = newton_solve(&p, x0, &NewtonConfig::default()).unwrap_err();
        assert!(err.error.is_physicality());
    }

    #[test]
    fn budget_exhaustion_returns_best_iterate() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let p = Problem::new(
            Arc::clone(&space),
            ElasticConstants::one_constant(1.0),
            BulkPotential::Ldg(LdgParams::new(1.0, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        let cfg = NewtonConfig {
            max_iters: 0,
            ..NewtonConfig::default()
        };
        let x0 = DiscreteField::constant(&space, &QTensor::uniaxial(0.3, [0.0, 0.0, 1.0]));
        let mut x0b = x0.clone();
        x0b.add_free(1.0, &vec![0.05; space.num_free()]);
        let err = newton_solve(&p, x0b, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::NoConvergence { .. }));
        assert!(err.best.is_some());
    }

    #[test]
    fn non_elliptic_constants_refused() {
        let space = FeSpace::new(unit_cube_mesh(1).unwrap());
        let err = Problem::new(
            space,
            ElasticConstants::new(1.0, 0.0, 2.0),
            BulkPotential::None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EllipticityViolated { .. }));
    }
}
