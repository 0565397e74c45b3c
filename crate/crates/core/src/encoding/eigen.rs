//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Full spectrum of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `r` is the unit eigenvector for `eigenvalues[r]`.
    pub eigenvectors: Array2<f64>,
    /// `max |M v - lambda v|` per pair.
    pub residual_norms: Vec<f64>,
    pub sweeps: usize,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `Γ diag(λ) Γᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &lambda) in scaled.columns_mut().into_iter().zip(&self.eigenvalues) {
            col *= lambda;
        }
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Eigenpairs of `m`, sorted by ascending eigenvalue.
pub fn symmetric_eigendecomposition(m: ArrayView2<'_, f64>) -> Result<SpectralResult> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!("{}x{} matrix is not square", n, m.ncols())));
    }
    for i in 0..n {
        for j in i + 1..n {
            let asymmetry = (m[[i, j]] - m[[j, i]]).abs();
            if asymmetry > SYMMETRY_TOLERANCE || asymmetry.is_nan() {
                return Err(Error::NotSymmetric { row: i, col: j, asymmetry });
            }
        }
    }

    // symmetrize exactly so the rotations see a truly symmetric matrix
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]]));
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= 1e-14 * scale || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[[k, p]] = new_kp;
                    a[[p, k]] = new_kp;
                    a[[k, q]] = new_kq;
                    a[[q, k]] = new_kq;
                }
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[[x, x]].total_cmp(&a[[y, y]]).then(x.cmp(&y)));
    let eigenvalues: Vec<f64> = order.iter().map(|&r| a[[r, r]]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, c)| v[[i, order[c]]]);
    let residual_norms = (0..n)
        .map(|c| {
            let col = eigenvectors.column(c);
            let mv = m.dot(&col);
            mv.iter()
                .zip(col.iter())
                .map(|(x, y)| (x - eigenvalues[c] * y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        residual_norms,
        sweeps,
    })
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += a[[i, j]] * a[[i, j]];
        }
    }
    (2.0 * sum).sqrt()
}
