//! Numerical Newton-Kantorovich quantities at an initial iterate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::infsup::{discrete_infsup, DENSE_DOF_LIMIT};
use super::Problem;
use crate::error::{Error, Result};
use crate::fem::norms::{dual_norm, h1_norm_free};
use crate::fem::DiscreteField;
use crate::sparse::{linear_solve, CsrMatrix, DEFAULT_LINEAR_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct KantorovichOptions {
    /// Number of random probe pairs for the Lipschitz estimate.
    pub probes: usize,
    pub seed: u64,
    /// Lower bound on the probe radius when `b1` is tiny.
    pub min_radius: f64,
}

impl Default for KantorovichOptions {
    fn default() -> Self {
        KantorovichOptions {
            probes: 10,
            seed: 0x5eed,
            min_radius: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KantorovichRecord {
    /// `1 / beta_h`; `None` above the dense dof limit.
    pub a1_est: Option<f64>,
    pub beta_h: Option<f64>,
    /// `H^1` norm of the first Newton step `DN(x0)^{-1} N(x0)`.
    pub b1: f64,
    /// Secant estimate of the Lipschitz constant of `DN` near `x0`.
    pub l_est: f64,
    /// `a1 b1 L`, when `a1` is available.
    pub h_star: Option<f64>,
}

fn random_unit(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let space = problem.space();
    loop {
        let v: Vec<f64> = (0..space.num_free())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let n = h1_norm_free(space, &v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Shifts `x0` by `r * u`, halving `r` until the tangent can be evaluated.
fn admissible_probe(
    problem: &Problem,
    x0: &DiscreteField,
    u: &[f64],
    mut r: f64,
) -> Result<(DiscreteField, CsrMatrix)> {
    for _ in 0..60 {
        let mut x = x0.clone();
        x.add_free(r, u);
        if !problem.bulk().is_singular() || x.min_vertex_margin() > 0.0 {
            match problem.tangent(&x) {
                Ok(j) => return Ok((x, j)),
                Err(e) if e.is_physicality() => {}
                Err(e) => return Err(e),
            }
        }
        r *= 0.5;
    }
    Err(Error::NotPhysical {
        margin: x0.min_vertex_margin(),
    })
}

pub fn kantorovich_estimates(
    problem: &Problem,
    x0: &DiscreteField,
    opts: &KantorovichOptions,
) -> Result<KantorovichRecord> {
    let space = problem.space();
    let eval = problem.evaluate(x0, true, None)?;
    let j0 = eval.tangent.expect("tangent requested");
    let rhs: Vec<f64> = eval.residual.iter().map(|v| -v).collect();
    let step = linear_solve(&j0, &rhs, DEFAULT_LINEAR_TOL)?;
    let b1 = h1_norm_free(space, &step);

    let beta_h = if space.num_free() <= DENSE_DOF_LIMIT {
        Some(discrete_infsup(problem, x0)?)
    } else {
        None
    };
    let a1_est = beta_h.map(|b| 1.0 / b);

    let radius = b1.max(opts.min_radius);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut l_est: f64 = 0.0;
    for _ in 0..opts.probes.max(1) {
        let ux = random_unit(problem, &mut rng);
        let uy = random_unit(problem, &mut rng);
        let d = random_unit(problem, &mut rng);
        let (x, jx) = admissible_probe(problem, x0, &ux, radius * rng.gen_range(0.0..1.0))?;
        let (y, jy) = admissible_probe(problem, x0, &uy, radius * rng.gen_range(0.0..1.0))?;
        let diff: Vec<f64> = jx
            .mul_vec(&d)
            .iter()
            .zip(jy.mul_vec(&d))
            .map(|(a, b)| a - b)
            .collect();
        let dxy: Vec<f64> = x
            .free_values()
            .iter()
            .zip(y.free_values())
            .map(|(a, b)| a - b)
            .collect();
        let sep = h1_norm_free(space, &dxy);
        if sep > 0.0 {
            l_est = l_est.max(dual_norm(space, &diff)? / sep);
        }
    }
    let h_star = a1_est.map(|a| a * b1 * l_est);
    Ok(KantorovichRecord {
        a1_est,
        beta_h,
        b1,
        l_est,
        h_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{ElasticConstants, FeSpace};
    use crate::mesh::unit_cube_mesh;
    use crate::potential::BulkPotential;

    #[test]
    fn linear_problem_has_zero_lipschitz_constant() {
        let space = FeSpace::new(unit_cube_mesh(3).unwrap());
        let p = Problem::new(
            space.clone(),
            ElasticConstants::one_constant(1.0),
            BulkPotential::None,
        )
        .unwrap();
        let mut x0 = DiscreteField::zeros(&space);
        x0.add_free(1.0, &vec![0.1; space.num_free()]);
        let k = kantorovich_estimates(&p, &x0, &KantorovichOptions::default()).unwrap();
        assert!(k.l_est < 1e-8);
        // one Newton step solves a linear problem from any start
        assert!(k.b1 > 0.0);
        assert!(k.h_star.unwrap() < 1e-6);
    }
}
