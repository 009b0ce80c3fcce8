//! Lebedev quadrature on the unit sphere.
//!
//! Rules are stored as octahedral orbit generators and expanded on load. Only
//! rules with strictly positive weights are embedded.

mod lebedev_tables;

use crate::error::{Error, Result};

/// Exactness degree used for Maier-Saupe assembly unless configured otherwise.
pub const DEFAULT_DEGREE: usize = 23;

#[derive(Clone, Debug)]
pub struct SphereRule {
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl SphereRule {
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Weights, summing to `4 pi`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness_degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k w_k f(p_k)`.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn([f64; 3]) -> f64,
    {
        let mut acc = 0.0;
        for (k, (p, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = f(*p);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: k });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Exactness degrees of the embedded rules.
pub fn supported_degrees() -> Vec<usize> {
    lebedev_tables::TABLES.iter().map(|t| t.degree).collect()
}

/// The Lebedev rule integrating spherical polynomials up to `degree` exactly.
pub fn lebedev_rule(degree: usize) -> Result<SphereRule> {
    let table = lebedev_tables::TABLES
        .iter()
        .find(|t| t.degree == degree)
        .ok_or(Error::UnsupportedOrder(degree))?;
    let mut nodes = Vec::with_capacity(table.points);
    let mut weights = Vec::with_capacity(table.points);
    for g in table.generators {
        for p in octahedral_orbit([g[0], g[1], g[2]]) {
            nodes.push(p);
            weights.push(g[3]);
        }
    }
    debug_assert_eq!(nodes.len(), table.points);
    Ok(SphereRule {
        nodes,
        weights,
        degree,
    })
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Distinct images of `p` under coordinate permutations and sign flips.
fn octahedral_orbit(p: [f64; 3]) -> Vec<[f64; 3]> {
    let mut orbit: Vec<[f64; 3]> = Vec::with_capacity(48);
    for perm in PERMUTATIONS {
        for signs in 0..8u8 {
            let mut q = [0.0; 3];
            for (axis, &src) in perm.iter().enumerate() {
                let v = p[src];
                q[axis] = if v != 0.0 && signs & (1 << axis) != 0 {
                    -v
                } else {
                    v
                };
            }
            if !orbit.contains(&q) {
                orbit.push(q);
            }
        }
    }
    orbit
}
