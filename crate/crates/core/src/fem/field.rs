//! Continuous Q-tensor fields and their nodal interpolants.

use std::sync::Arc;

use super::{DiscreteField, FeSpace, QGradient};
use crate::mesh::Point;
use crate::tensor::QTensor;

pub trait TensorField: Sync {
    fn value(&self, x: &Point) -> QTensor;

    /// `g[a][k] = d q_a / d x_k`. The default uses central differences.
    fn gradient(&self, x: &Point) -> QGradient {
        let h = 1e-6;
        let mut g = [[0.0; 3]; 5];
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let (qp, qm) = (self.value(&xp), self.value(&xm));
            for (a, row) in g.iter_mut().enumerate() {
                row[k] = (qp[a] - qm[a]) / (2.0 * h);
            }
        }
        g
    }
}

/// A field given by a closure, with finite-difference gradients.
pub struct FnField<F>(pub F);

impl<F: Fn(&Point) -> QTensor + Sync> TensorField for FnField<F> {
    fn value(&self, x: &Point) -> QTensor {
        (self.0)(x)
    }
}

/// Vertex evaluation of `g`.
pub fn interpolate(space: &Arc<FeSpace>, g: &dyn TensorField) -> DiscreteField {
    let mut f = DiscreteField::zeros(space);
    for (v, p) in space.mesh().vertices().iter().enumerate() {
        f.set_vertex(v, &g.value(p));
    }
    f
}

/// Overwrites the constrained dofs of `field` with the values of `g`.
pub fn impose_dirichlet(field: &mut DiscreteField, g: &dyn TensorField) {
    let space = Arc::clone(field.space());
    for &v in space.mesh().boundary_vertices() {
        field.set_vertex(v, &g.value(&space.mesh().vertices()[v]));
    }
}
