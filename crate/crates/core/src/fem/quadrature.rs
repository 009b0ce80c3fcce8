//! Quadrature on tetrahedra in barycentric coordinates.

use nalgebra::DMatrix;

/// Weights are fractions of the element volume (they sum to 1).
#[derive(Clone, Debug, PartialEq)]
pub struct TetRule {
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
    degree: usize,
}

impl TetRule {
    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid() -> Self {
        TetRule {
            points: vec![[0.25; 4]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Fully symmetric 14-point rule, exact through degree 5.
    pub fn symmetric14() -> Self {
        const A1: f64 = 0.092_735_250_310_891_2;
        const A2: f64 = 0.310_885_919_263_300_6;
        const B: f64 = 0.045_503_704_125_649_65;
        const W1: f64 = 0.012_248_840_519_393_66 * 6.0;
        const W2: f64 = 0.018_781_320_953_002_64 * 6.0;
        const W3: f64 = 0.007_091_003_462_846_911 * 6.0;
        let mut points = Vec::with_capacity(14);
        let mut weights = Vec::with_capacity(14);
        for (a, w) in [(A1, W1), (A2, W2)] {
            for k in 0..4 {
                let mut p = [a; 4];
                p[k] = 1.0 - 3.0 * a;
                points.push(p);
                weights.push(w);
            }
        }
        let c = 0.5 - B;
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let mut p = [c; 4];
            p[i] = B;
            p[j] = B;
            points.push(p);
            weights.push(W3);
        }
        TetRule {
            points,
            weights,
            degree: 5,
        }
    }

    /// Collapsed-coordinate product of Gauss-Jacobi rules with `k` points per
    /// direction (`k^3` points), exact through degree `2k - 1`.
    pub fn conical(k: usize) -> Self {
        assert!(k >= 1);
        let (u, wu) = gauss_jacobi_unit(k, 2);
        let (v, wv) = gauss_jacobi_unit(k, 1);
        let (w, ww) = gauss_jacobi_unit(k, 0);
        let mut points = Vec::with_capacity(k * k * k);
        let mut weights = Vec::with_capacity(k * k * k);
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let x = u[i];
                    let y = (1.0 - u[i]) * v[j];
                    let z = (1.0 - u[i]) * (1.0 - v[j]) * w[l];
                    points.push([1.0 - x - y - z, x, y, z]);
                    // reference volume is 1/6
                    weights.push(6.0 * wu[i] * wv[j] * ww[l]);
                }
            }
        }
        TetRule {
            points,
            weights,
            degree: 2 * k - 1,
        }
    }

    /// Cheapest built-in rule exact through `degree`.
    pub fn with_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2..=5 => Self::symmetric14(),
            d => Self::conical(d / 2 + 1),
        }
    }
}

/// Gauss rule on `[0,1]` for the weight `(1-t)^alpha` (Golub-Welsch).
fn gauss_jacobi_unit(k: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for n in 0..k {
        let nf = n as f64;
        let s = 2.0 * nf + a;
        jac[(n, n)] = if n == 0 {
            -a / (a + 2.0)
        } else {
            -a * a / (s * (s + 2.0))
        };
        if n + 1 < k {
            let m = nf + 1.0;
            let s = 2.0 * m + a;
            let b2 = 4.0 * m * (m + a) * m * (m + a) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(n, n + 1)] = b2.sqrt();
            jac[(n + 1, n)] = b2.sqrt();
        }
    }
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            // map [-1,1] with (1-x)^a to [0,1] with (1-t)^a
            ((x + 1.0) / 2.0, mu0 * v0 * v0 / 2f64.powi(alpha as i32 + 1))
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}
