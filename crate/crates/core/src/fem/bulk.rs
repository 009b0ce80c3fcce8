//! Element quadrature of the bulk term and its derivatives.

use rayon::prelude::*;

use super::elastic::scatter;
use super::{DiscreteField, TetRule, DOFS_PER_VERTEX};
use crate::error::{Error, Result};
use crate::potential::BulkPotential;
use crate::sparse::CsrMatrix;
use crate::tensor::QTensor;

/// Multipliers from the previous BM evaluation, one per (element, point).
#[derive(Clone, Debug, Default)]
pub struct MultiplierCache {
    points_per_tet: usize,
    lambda: Vec<Option<QTensor>>,
}

impl MultiplierCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn fit(&mut self, tets: usize, points: usize) {
        if self.points_per_tet != points || self.lambda.len() != tets * points {
            self.points_per_tet = points;
            self.lambda = vec![None; tets * points];
        }
    }

    pub fn clear(&mut self) {
        self.lambda.iter_mut().for_each(|l| *l = None);
    }
}

#[derive(Clone, Debug)]
pub struct BulkAssembly {
    /// `int psi_B`.
    pub energy: f64,
    /// Integral of the weak-form potential, whose gradient is `residual`.
    pub potential: f64,
    /// Residual over all dofs.
    pub residual: Vec<f64>,
    /// Tangent over all dofs, if requested.
    pub tangent: Option<CsrMatrix>,
}

struct Local {
    energy: f64,
    potential: f64,
    r: [f64; 20],
    k: Option<Box<[[f64; 20]; 20]>>,
    lambdas: Vec<Option<QTensor>>,
}

fn local_bulk(
    field: &DiscreteField,
    bulk: &BulkPotential,
    rule: &TetRule,
    t: usize,
    warm: Option<&[Option<QTensor>]>,
    with_tangent: bool,
) -> Result<Local> {
    let vol = field.space().volume(t);
    let mut out = Local {
        energy: 0.0,
        potential: 0.0,
        r: [0.0; 20],
        k: with_tangent.then(|| Box::new([[0.0; 20]; 20])),
        lambdas: Vec::with_capacity(rule.len()),
    };
    for (qp, (b, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
        let q = field.eval(t, b);
        if bulk.is_singular() {
            let margin = q.physicality_margin();
            if !(margin > 0.0) {
                return Err(Error::NotPhysicalAtQuadPoint {
                    element: t,
                    point: qp,
                    margin,
                });
            }
        }
        let warm_q = warm.and_then(|c| c[qp].as_ref());
        let pe = bulk.eval(&q, warm_q, with_tangent)?;
        let wv = w * vol;
        out.energy += wv * pe.density;
        out.potential += wv * pe.potential;
        for (i, bi) in b.iter().enumerate() {
            for a in 0..5 {
                out.r[5 * i + a] += wv * bi * pe.gradient[a];
            }
        }
        if let (Some(k), Some(h)) = (out.k.as_mut(), pe.hessian.as_ref()) {
            for i in 0..4 {
                for m in 0..4 {
                    let s = wv * b[i] * b[m];
                    for a in 0..5 {
                        for c in 0..5 {
                            k[5 * i + a][5 * m + c] += s * h[(a, c)];
                        }
                    }
                }
            }
        }
        out.lambdas.push(pe.multiplier);
    }
    Ok(out)
}

/// Evaluates the bulk term of `field` on every element with `rule`.
///
/// For BM, every quadrature point must be strictly physical. When a cache is
/// given, its multipliers seed the dual solves and are replaced by the new
/// ones. Results do not depend on the thread count.
pub fn assemble_bulk(
    field: &DiscreteField,
    bulk: &BulkPotential,
    rule: &TetRule,
    with_tangent: bool,
    mut cache: Option<&mut MultiplierCache>,
) -> Result<BulkAssembly> {
    let space = field.space();
    let mesh = space.mesh();
    let nq = rule.len();
    if let Some(c) = cache.as_deref_mut() {
        c.fit(mesh.num_tets(), nq);
    }
    let mut residual = vec![0.0; space.num_dofs()];
    let mut tangent = with_tangent.then(|| space.zero_matrix());
    let mut energy = 0.0;
    let mut potential = 0.0;
    const CHUNK: usize = 1024;
    for start in (0..mesh.num_tets()).step_by(CHUNK) {
        let end = (start + CHUNK).min(mesh.num_tets());
        let warm = cache.as_deref().map(|c| &c.lambda);
        let locals: Vec<Result<Local>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let w = warm.map(|l| &l[t * nq..(t + 1) * nq]);
                local_bulk(field, bulk, rule, t, w, with_tangent)
            })
            .collect();
        for (t, local) in (start..end).zip(locals) {
            let local = local?;
            let tet = mesh.tets()[t];
            energy += local.energy;
            potential += local.potential;
            for i in 0..4 {
                for a in 0..5 {
                    residual[DOFS_PER_VERTEX * tet[i] + a] += local.r[5 * i + a];
                }
            }
            if let (Some(m), Some(k)) = (tangent.as_mut(), local.k.as_ref()) {
                scatter(m, &tet, k);
            }
            if let Some(c) = cache.as_deref_mut() {
                c.lambda[t * nq..(t + 1) * nq].copy_from_slice(&local.lambdas);
            }
        }
    }
    Ok(BulkAssembly {
        energy,
        potential,
        residual,
        tangent,
    })
}

/// Bulk residual `int D psi(Q_C) : P` restricted to the free dofs.
pub fn assemble_bulk_residual(
    field: &DiscreteField,
    bulk: &BulkPotential,
    rule: &TetRule,
) -> Result<Vec<f64>> {
    let a = assemble_bulk(field, bulk, rule, false, None)?;
    Ok(field.space().restrict_vector(&a.residual))
}

/// Bulk tangent restricted to the free dofs.
pub fn assemble_bulk_tangent(
    field: &DiscreteField,
    bulk: &BulkPotential,
    rule: &TetRule,
) -> Result<CsrMatrix> {
    let a = assemble_bulk(field, bulk, rule, true, None)?;
    Ok(field
        .space()
        .restrict_to_free(&a.tangent.expect("tangent requested")))
}

/// `int psi_B(Q_C)`.
pub fn bulk_energy(field: &DiscreteField, bulk: &BulkPotential, rule: &TetRule) -> Result<f64> {
    Ok(assemble_bulk(field, bulk, rule, false, None)?.energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FeSpace;
    use crate::mesh::unit_cube_mesh;
    use crate::potential::{BmModel, BmParams, LdgParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ldg() -> BulkPotential {
        BulkPotential::Ldg(LdgParams::new(1.0, 1.0, 1.0).unwrap())
    }

    fn bm() -> BulkPotential {
        BulkPotential::Bm(BmModel::new(BmParams::new(2.0, 1.0).unwrap(), 23, 1e-13).unwrap())
    }

    fn random_field(space: &Arc<FeSpace>, seed: u64, scale: f64) -> DiscreteField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = DiscreteField::zeros(space);
        for x in f.values_mut() {
            *x = scale * rng.gen_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn zero_field_gives_zero_residual() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let f = DiscreteField::zeros(&space);
        let rule = TetRule::symmetric14();
        for b in [ldg(), bm()] {
            let r = assemble_bulk_residual(&f, &b, &rule).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-14), "{}", b.name());
        }
    }

    #[test]
    fn zero_field_tangent_is_scaled_mass() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let f = DiscreteField::zeros(&space);
        let rule = TetRule::symmetric14();
        let mass = space.restrict_to_free(&crate::fem::norms::mass_matrix(&space));
        for (b, scale) in [(ldg(), -1.0), (bm(), 2.0 / 2.0 * 7.5 - 1.0)] {
            let k = assemble_bulk_tangent(&f, &b, &rule).unwrap();
            let d = k.to_dense() - mass.to_dense() * scale;
            assert!(d.amax() < 1e-9, "{}: {}", b.name(), d.amax());
        }
    }

    #[test]
    fn residual_is_gradient_of_potential() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let rule = TetRule::symmetric14();
        for b in [ldg(), bm()] {
            let f = random_field(&space, 3, 0.1);
            let r = assemble_bulk_residual(&f, &b, &rule).unwrap();
            let h = 1e-5;
            for (i, &dof) in space.free_dofs().iter().enumerate() {
                let mut fp = f.clone();
                let mut fm = f.clone();
                fp.values_mut()[dof] += h;
                fm.values_mut()[dof] -= h;
                let ep = assemble_bulk(&fp, &b, &rule, false, None)
                    .unwrap()
                    .potential;
                let em = assemble_bulk(&fm, &b, &rule, false, None)
                    .unwrap()
                    .potential;
                let fd = (ep - em) / (2.0 * h);
                assert!(
                    (fd - r[i]).abs() <= 1e-6 * r[i].abs().max(1e-3),
                    "{} dof {dof}",
                    b.name()
                );
            }
        }
    }

    #[test]
    fn tangent_symmetric_and_matches_fd() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let rule = TetRule::symmetric14();
        for b in [ldg(), bm()] {
            let f = random_field(&space, 9, 0.12);
            let k = assemble_bulk_tangent(&f, &b, &rule).unwrap();
            assert!(k.max_asymmetry() < 1e-12);
            let kd = k.to_dense();
            let h = 1e-6;
            for (j, &dof) in space.free_dofs().iter().enumerate() {
                let mut fp = f.clone();
                let mut fm = f.clone();
                fp.values_mut()[dof] += h;
                fm.values_mut()[dof] -= h;
                let rp = assemble_bulk_residual(&fp, &b, &rule).unwrap();
                let rm = assemble_bulk_residual(&fm, &b, &rule).unwrap();
                for i in 0..space.num_free() {
                    let fd = (rp[i] - rm[i]) / (2.0 * h);
                    assert!((fd - kd[(i, j)]).abs() <= 1e-5 * kd.amax(), "{}", b.name());
                }
            }
        }
    }

    #[test]
    fn constant_field_energy() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let q = QTensor::uniaxial(0.5, [0.0, 0.0, 1.0]);
        let f = DiscreteField::constant(&space, &q);
        let e = bulk_energy(&f, &ldg(), &TetRule::symmetric14()).unwrap();
        let p = LdgParams::new(1.0, 1.0, 1.0).unwrap();
        assert!((e - crate::potential::ldg_density(&p, &q)).abs() < 1e-13);
    }

    #[test]
    fn bm_rejects_unphysical_quadrature_point() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let mut f = DiscreteField::constant(&space, &QTensor::uniaxial(0.3, [0.0, 0.0, 1.0]));
        f.set_vertex(13, &QTensor::uniaxial(3.0, [1.0, 0.0, 0.0]));
        let err = assemble_bulk_residual(&f, &bm(), &TetRule::symmetric14()).unwrap_err();
        assert!(matches!(err, Error::NotPhysicalAtQuadPoint { .. }));
    }

    #[test]
    fn cache_does_not_change_results() {
        let space = FeSpace::new(unit_cube_mesh(2).unwrap());
        let f = random_field(&space, 1, 0.1);
        let rule = TetRule::symmetric14();
        let b = bm();
        let cold = assemble_bulk(&f, &b, &rule, false, None).unwrap();
        let mut cache = MultiplierCache::new();
        assemble_bulk(&f, &b, &rule, false, Some(&mut cache)).unwrap();
        let warm = assemble_bulk(&f, &b, &rule, false, Some(&mut cache)).unwrap();
        for (x, y) in cold.residual.iter().zip(&warm.residual) {
            assert!((x - y).abs() < 1e-11);
        }
    }
}
