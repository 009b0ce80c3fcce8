//! Discrete inf-sup constant of the linearized operator in the `H^1` metric.

use nalgebra::DMatrix;

use super::Problem;
use crate::error::{Error, Result};
use crate::fem::DiscreteField;

/// Largest free-dof count handled by dense linear algebra.
pub const DENSE_DOF_LIMIT: usize = 4000;

/// `beta_h`: smallest singular value of `L^{-1} J L^{-T}`, where `J` is the
/// tangent at `at` and `G = L L^T` the `H^1` Gram matrix on the free dofs.
pub fn discrete_infsup(problem: &Problem, at: &DiscreteField) -> Result<f64> {
    let n = problem.space().num_free();
    if n > DENSE_DOF_LIMIT {
        return Err(Error::TooLarge {
            dofs: n,
            limit: DENSE_DOF_LIMIT,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("space has no free dofs".into()));
    }
    let j = problem.tangent(at)?.to_dense();
    let g = problem.space().gram().to_dense();
    symmetric_infsup(&j, &g)
}

/// Smallest `|mu|` with `J v = mu G v`, for symmetric `J` and SPD `G`.
pub(crate) fn symmetric_infsup(j: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    let l = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("Gram matrix is not positive definite".into()))?
        .l();
    let y = l
        .solve_lower_triangular(j)
        .ok_or_else(|| Error::InvalidParameter("singular Cholesky factor".into()))?;
    let b = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::InvalidParameter("singular Cholesky factor".into()))?;
    let b = (&b + b.transpose()) * 0.5;
    Ok(b.symmetric_eigenvalues()
        .iter()
        .map(|e| e.abs())
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{ElasticConstants, FeSpace};
    use crate::mesh::unit_cube_mesh;
    use crate::potential::BulkPotential;

    #[test]
    fn generalized_eigen_oracle() {
        // diagonal case: J = diag(2, -6), G = diag(1, 3) => |mu| = {2, 2}
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -6.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert!((symmetric_infsup(&j, &g).unwrap() - 2.0).abs() < 1e-14);
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 9.0]);
        assert!((symmetric_infsup(&j, &g).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pure_elastic_is_positive() {
        let space = FeSpace::new(unit_cube_mesh(3).unwrap());
        let p = Problem::new(
            space.clone(),
            ElasticConstants::one_constant(1.0),
            BulkPotential::None,
        )
        .unwrap();
        let beta = discrete_infsup(&p, &DiscreteField::zeros(&space)).unwrap();
        // K <= G, so beta lies in (0, 1)
        assert!(beta > 0.0 && beta < 1.0);
    }

    #[test]
    fn guard_rejects_large_spaces() {
        let space = FeSpace::new(unit_cube_mesh(12).unwrap());
        let p = Problem::new(
            space.clone(),
            ElasticConstants::one_constant(1.0),
            BulkPotential::None,
        )
        .unwrap();
        assert!(matches!(
            discrete_infsup(&p, &DiscreteField::zeros(&space)),
            Err(Error::TooLarge { .. })
        ));
    }
}
