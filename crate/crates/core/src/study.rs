//! Mesh-refinement studies on the unit cube with a manufactured solution.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::field::{interpolate, TensorField};
use crate::fem::norms::error_norms;
use crate::fem::{DiscreteField, ElasticConstants, FeSpace, TetRule};
use crate::manufactured::{manufactured_forcing, ManufacturedSolution};
use crate::mesh::unit_cube_mesh;
use crate::potential::BulkPotential;
use crate::solver::{
    discrete_infsup, newton_solve, KantorovichOptions, NewtonConfig, Problem, SolveReport,
    DENSE_DOF_LIMIT,
};

/// Degree of the rule used for forcing and error integrals.
pub const ELEVATED_DEGREE: usize = 6;

#[derive(Clone, Debug)]
pub struct StudySetup {
    pub elastic: ElasticConstants,
    pub bulk: BulkPotential,
    pub exact: ManufacturedSolution,
    pub newton: NewtonConfig,
    /// Record `h*` on levels small enough for the dense inf-sup solve.
    pub kantorovich: bool,
    /// Refuse non-elliptic constants (on by default).
    pub check_ellipticity: bool,
}

impl StudySetup {
    pub fn new(elastic: ElasticConstants, bulk: BulkPotential) -> Self {
        StudySetup {
            elastic,
            bulk,
            exact: ManufacturedSolution::default(),
            newton: NewtonConfig::default(),
            kantorovich: false,
            check_ellipticity: true,
        }
    }

    fn problem(&self, space: Arc<FeSpace>) -> Result<Problem> {
        if self.check_ellipticity {
            Problem::new(space, self.elastic, self.bulk.clone())
        } else {
            Ok(Problem::new_unchecked(
                space,
                self.elastic,
                self.bulk.clone(),
            ))
        }
    }
}

/// `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Problem on `unit_cube_mesh(n)` whose discrete solution approximates the
/// manufactured field, together with the interpolant of that field.
pub fn manufactured_problem(n: usize, setup: &StudySetup) -> Result<(Problem, DiscreteField)> {
    let space = FeSpace::new(unit_cube_mesh(n)?);
    let forcing = manufactured_forcing(
        &space,
        &setup.elastic,
        &setup.bulk,
        &setup.exact,
        &TetRule::with_degree(ELEVATED_DEGREE),
    )?;
    let problem = setup.problem(space.clone())?.with_forcing(forcing)?;
    let interp = interpolate(&space, &setup.exact);
    Ok((problem, interp))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h_max: f64,
    pub dofs: usize,
    pub h1_error: f64,
    pub l2_error: f64,
    pub observed_order_h1: Option<f64>,
    pub observed_order_l2: Option<f64>,
    pub newton_iters: usize,
    pub h_star: Option<f64>,
    pub report: SolveReport,
}

/// Solves from the interpolant of the exact field on each level.
pub fn convergence_study(levels: &[usize], setup: &StudySetup) -> Result<Vec<ConvergenceRow>> {
    let rule = TetRule::with_degree(ELEVATED_DEGREE);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for &n in levels {
        let (problem, x0) = manufactured_problem(n, setup)?;
        let mut cfg = setup.newton.clone();
        if setup.kantorovich
            && problem.space().num_free() <= DENSE_DOF_LIMIT
            && cfg.kantorovich.is_none()
        {
            cfg.kantorovich = Some(KantorovichOptions::default());
        }
        let (x, report) = newton_solve(&problem, x0, &cfg).map_err(|f| f.error)?;
        let e = error_norms(&x, &setup.exact, &rule);
        let h_max = problem.space().mesh().h_max();
        let (o1, o2) = match rows.last() {
            Some(prev) => (
                Some(observed_order(prev.h1_error, e.h1, prev.h_max, h_max)),
                Some(observed_order(prev.l2_error, e.l2, prev.h_max, h_max)),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            n,
            h_max,
            dofs: problem.space().num_free(),
            h1_error: e.h1,
            l2_error: e.l2,
            observed_order_h1: o1,
            observed_order_l2: o2,
            newton_iters: report.iterations.len(),
            h_star: report.kantorovich.as_ref().and_then(|k| k.h_star),
            report,
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfsupRow {
    pub n: usize,
    pub h_max: f64,
    pub dofs: usize,
    pub beta_h: f64,
}

/// `beta_h` at the interpolant of the exact field on each level.
pub fn infsup_sweep(levels: &[usize], setup: &StudySetup) -> Result<Vec<InfsupRow>> {
    levels
        .iter()
        .map(|&n| {
            let space = FeSpace::new(unit_cube_mesh(n)?);
            let problem = setup.problem(space.clone())?;
            let at = interpolate(&space, &setup.exact);
            Ok(InfsupRow {
                n,
                h_max: space.mesh().h_max(),
                dofs: space.num_free(),
                beta_h: discrete_infsup(&problem, &at)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationRow {
    pub n: usize,
    pub h_max: f64,
    pub h1_error: f64,
    pub l2_error: f64,
    pub order_h1: Option<f64>,
    pub order_l2: Option<f64>,
    /// Smallest physicality margin over vertices and quadrature points.
    pub min_margin: f64,
}

/// Nodal interpolation errors of `g` on each level.
pub fn interpolation_sweep(levels: &[usize], g: &dyn TensorField) -> Result<Vec<InterpolationRow>> {
    let rule = TetRule::with_degree(ELEVATED_DEGREE);
    let mut rows: Vec<InterpolationRow> = Vec::with_capacity(levels.len());
    for &n in levels {
        let space = FeSpace::new(unit_cube_mesh(n)?);
        let f = interpolate(&space, g);
        let e = error_norms(&f, g, &rule);
        let h = space.mesh().h_max();
        let (o1, o2) = match rows.last() {
            Some(p) => (
                Some(observed_order(p.h1_error, e.h1, p.h_max, h)),
                Some(observed_order(p.l2_error, e.l2, p.h_max, h)),
            ),
            None => (None, None),
        };
        rows.push(InterpolationRow {
            n,
            h_max: h,
            h1_error: e.h1,
            l2_error: e.l2,
            order_h1: o1,
            order_l2: o2,
            min_margin: f.min_vertex_margin().min(f.min_quadrature_margin(&rule)),
        });
    }
    Ok(rows)
}
