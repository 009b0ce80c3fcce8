//! Symmetric traceless 3x3 matrices in a fixed orthonormal basis.
//!
//! The basis of the five-dimensional space of symmetric traceless matrices is
//!
//! ```text
//! E1 = diag(-1, -1, 2) / sqrt(6)
//! E2 = diag( 1, -1, 0) / sqrt(2)
//! E3 = (e_x e_y^T + e_y e_x^T) / sqrt(2)
//! E4 = (e_x e_z^T + e_z e_x^T) / sqrt(2)
//! E5 = (e_y e_z^T + e_z e_y^T) / sqrt(2)
//! ```
//!
//! and satisfies `tr(E_i E_j) = delta_ij`, so the Frobenius inner product of two
//! tensors is the Euclidean inner product of their coefficient vectors.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;

const FRAC_1_SQRT_6: f64 = 0.408_248_290_463_863;
const FRAC_2_SQRT_6: f64 = 0.816_496_580_927_726;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Admission tolerance for symmetry and trace in [`QTensor::from_matrix`].
pub const ADMISSION_TOL: f64 = 1e-10;

/// A symmetric traceless 3x3 matrix stored by its five basis coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QTensor(pub [f64; 5]);

/// Eigenvalues in ascending order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenTriple(pub [f64; 3]);

impl EigenTriple {
    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[2]
    }
}

/// The five basis matrices.
pub fn basis() -> &'static [Mat3; 5] {
    static BASIS: OnceLock<[Mat3; 5]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let s = FRAC_1_SQRT_2;
        [
            Mat3::new(
                -FRAC_1_SQRT_6,
                0.0,
                0.0,
                0.0,
                -FRAC_1_SQRT_6,
                0.0,
                0.0,
                0.0,
                FRAC_2_SQRT_6,
            ),
            Mat3::new(s, 0.0, 0.0, 0.0, -s, 0.0, 0.0, 0.0, 0.0),
            Mat3::new(0.0, s, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0),
            Mat3::new(0.0, 0.0, s, 0.0, 0.0, 0.0, s, 0.0, 0.0),
            Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, s, 0.0, s, 0.0),
        ]
    })
}

/// `T[i][j][k] = tr(E_i E_j E_k)`, fully symmetric in its indices.
pub fn triple_traces() -> &'static [[[f64; 5]; 5]; 5] {
    static TRIPLE: OnceLock<[[[f64; 5]; 5]; 5]> = OnceLock::new();
    TRIPLE.get_or_init(|| {
        let e = basis();
        let mut t = [[[0.0; 5]; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                let eij = e[i] * e[j];
                for k in 0..5 {
                    t[i][j][k] = (eij * e[k]).trace();
                }
            }
        }
        t
    })
}

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub fn new(coeffs: [f64; 5]) -> Self {
        QTensor(coeffs)
    }

    /// The `i`-th basis tensor.
    pub fn unit(i: usize) -> Self {
        let mut c = [0.0; 5];
        c[i] = 1.0;
        QTensor(c)
    }

    /// Uniaxial state `s (n n^T - I/3)`; `n` is normalized internally.
    pub fn uniaxial(s: f64, director: [f64; 3]) -> Self {
        let n = Vector3::from(director).normalize();
        let m = s * (n * n.transpose() - Mat3::identity() / 3.0);
        Self::project(&m)
    }

    pub fn coeffs(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn to_matrix(&self) -> Mat3 {
        let [q1, q2, q3, q4, q5] = self.0;
        let s = FRAC_1_SQRT_2;
        let d = -q1 * FRAC_1_SQRT_6;
        Mat3::new(
            d + q2 * s,
            q3 * s,
            q4 * s,
            q3 * s,
            d - q2 * s,
            q5 * s,
            q4 * s,
            q5 * s,
            q1 * FRAC_2_SQRT_6,
        )
    }

    /// Coefficients `q_i = tr(M E_i)` after checking symmetry and trace.
    pub fn from_matrix(m: &Mat3) -> Result<Self> {
        let asym = (m - m.transpose()).abs().max();
        if asym > ADMISSION_TOL {
            return Err(Error::NonSymmetric(asym));
        }
        let tr = m.trace();
        if tr.abs() > ADMISSION_TOL {
            return Err(Error::NonTraceless(tr));
        }
        Ok(Self::project(m))
    }

    /// Orthogonal projection of an arbitrary matrix onto the traceless symmetric
    /// subspace, returned in coefficients.
    pub fn project(m: &Mat3) -> Self {
        let s = FRAC_1_SQRT_2;
        QTensor([
            (2.0 * m[(2, 2)] - m[(0, 0)] - m[(1, 1)]) * FRAC_1_SQRT_6,
            (m[(0, 0)] - m[(1, 1)]) * s,
            (m[(0, 1)] + m[(1, 0)]) * s,
            (m[(0, 2)] + m[(2, 0)]) * s,
            (m[(1, 2)] + m[(2, 1)]) * s,
        ])
    }

    /// Frobenius inner product `tr(Q R)`.
    pub fn dot(&self, other: &QTensor) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// `tr(Q^2) = |Q|_F^2`.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `tr(Q^3)`.
    pub fn trace_cube(&self) -> f64 {
        let t = triple_traces();
        let q = &self.0;
        let mut acc = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let qij = q[i] * q[j];
                for k in 0..5 {
                    acc += t[i][j][k] * qij * q[k];
                }
            }
        }
        acc
    }

    /// Coefficients of the projected square, `tr(Q^2 E_i)`.
    pub fn square_projected(&self) -> QTensor {
        let t = triple_traces();
        let q = &self.0;
        let mut out = [0.0; 5];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..5 {
                for k in 0..5 {
                    acc += t[i][j][k] * q[j] * q[k];
                }
            }
            *o = acc;
        }
        QTensor(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn eigenvalues(&self) -> EigenTriple {
        eigen_decomposition(&self.to_matrix()).0
    }

    /// `min(lambda_min + 1/3, 2/3 - lambda_max)`; positive iff strictly physical.
    pub fn physicality_margin(&self) -> f64 {
        let ev = self.eigenvalues();
        (ev.min() + 1.0 / 3.0).min(2.0 / 3.0 - ev.max())
    }

    /// Eigenvector of the largest eigenvalue, the local director.
    pub fn director(&self) -> [f64; 3] {
        let (_, vecs) = eigen_decomposition(&self.to_matrix());
        let v = vecs[2];
        [v[0], v[1], v[2]]
    }
}

impl Index<usize> for QTensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for QTensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(mut self, rhs: QTensor) -> QTensor {
        self += rhs;
        self
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(mut self, rhs: QTensor) -> QTensor {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        self * -1.0
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(mut self, s: f64) -> QTensor {
        for a in self.0.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Mul<QTensor> for f64 {
    type Output = QTensor;
    fn mul(self, q: QTensor) -> QTensor {
        q * self
    }
}

/// Trace monomials consumed by the bulk densities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceProducts {
    /// tr(QR)
    pub qr: f64,
    /// tr(Q^2)
    pub qq: f64,
    /// tr(Q^3)
    pub qqq: f64,
    /// tr(QRP)
    pub qrp: f64,
    /// tr(Q^2 R)
    pub qqr: f64,
    /// tr(QP)
    pub qp: f64,
    /// tr(RP)
    pub rp: f64,
}

pub fn trace_products(q: &QTensor, r: &QTensor, p: &QTensor) -> TraceProducts {
    let (mq, mr, mp) = (q.to_matrix(), r.to_matrix(), p.to_matrix());
    let q2 = mq * mq;
    TraceProducts {
        qr: (mq * mr).trace(),
        qq: q2.trace(),
        qqq: (q2 * mq).trace(),
        qrp: (mq * mr * mp).trace(),
        qqr: (q2 * mr).trace(),
        qp: (mq * mp).trace(),
        rp: (mr * mp).trace(),
    }
}

/// Eigenvalues (ascending) and matching unit eigenvectors of a symmetric 3x3
/// matrix.
///
/// Closed-form trigonometric solution of the characteristic cubic, followed by
/// deflation: the best separated root gets an eigenvector from a cross product
/// of rows of `A - lambda I`, and the remaining pair is resolved by a 2x2
/// symmetric eigenproblem in the orthogonal complement. The deflation keeps
/// full accuracy for (near-)degenerate pairs such as uniaxial states, where the
/// cubic roots alone lose half the significant digits.
pub fn eigen_decomposition(a: &Mat3) -> (EigenTriple, [Vector3<f64>; 3]) {
    let shift = a.trace() / 3.0;
    let mut b = a - Mat3::identity() * shift;
    let scale = b.abs().max();
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    if scale == 0.0 || !scale.is_finite() {
        return (EigenTriple([shift; 3]), axes);
    }
    b /= scale;

    let p = 0.5 * (b * b).trace();
    if p <= f64::MIN_POSITIVE {
        return (EigenTriple([shift; 3]), axes);
    }
    let det = b.determinant();
    let r = (0.5 * det * (3.0 / p).powf(1.5)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let rad = 2.0 * (p / 3.0).sqrt();
    let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
    let mut roots = [
        rad * (phi + two_pi_3).cos(),
        rad * (phi - two_pi_3).cos(),
        rad * phi.cos(),
    ];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // isolate the root with the larger gap to its neighbour
    let iso_idx = if roots[1] - roots[0] >= roots[2] - roots[1] {
        0
    } else {
        2
    };
    let shifted = b - Mat3::identity() * roots[iso_idx];
    let rows = [
        shifted.row(0).transpose(),
        shifted.row(1).transpose(),
        shifted.row(2).transpose(),
    ];
    let crosses = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = crosses
        .iter()
        .max_by(|x, y| x.norm_squared().partial_cmp(&y.norm_squared()).unwrap())
        .unwrap();
    let v_iso = if best.norm_squared() > 0.0 {
        best.normalize()
    } else {
        axes[iso_idx]
    };

    // orthonormal complement
    let helper = if v_iso.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = v_iso.cross(&helper).normalize();
    let w = v_iso.cross(&u);
    let bu = b * u;
    let bw = b * w;
    let (alpha, beta, gamma) = (u.dot(&bu), u.dot(&bw), w.dot(&bw));
    let mean = 0.5 * (alpha + gamma);
    let half_gap = (0.25 * (alpha - gamma).powi(2) + beta * beta).sqrt();
    let (lo, hi) = (mean - half_gap, mean + half_gap);
    // eigenvector of the 2x2 block for `hi`
    let (c, s) = if beta.abs() > 0.0 || (alpha - gamma).abs() > 0.0 {
        let theta = 0.5 * (2.0 * beta).atan2(alpha - gamma);
        (theta.cos(), theta.sin())
    } else {
        (1.0, 0.0)
    };
    let v_hi = u * c + w * s;
    let v_lo = -u * s + w * c;
    let lam_iso = v_iso.dot(&(b * v_iso));

    let mut pairs = [(lam_iso, v_iso), (lo, v_lo), (hi, v_hi)];
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let vals = [
        pairs[0].0 * scale + shift,
        pairs[1].0 * scale + shift,
        pairs[2].0 * scale + shift,
    ];
    (EigenTriple(vals), [pairs[0].1, pairs[1].1, pairs[2].1])
}

/// Eigenvalues of an arbitrary symmetric 3x3 matrix, ascending.
pub fn symmetric_eigenvalues(a: &Mat3) -> EigenTriple {
    eigen_decomposition(a).0
}
