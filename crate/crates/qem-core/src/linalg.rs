//! Small dense linear algebra: Hermitian eigendecomposition and LU solves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, RMatrix};

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues ascending; `vectors` holds the matching eigenvectors as
/// columns, so `A = V diag(values) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Cyclic complex Jacobi. Fine for the dimensions this crate works at
/// (at most a few thousand, typically well under a hundred).
pub fn hermitian_eigen(a: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let herm_res = a.hermitian_residual();
    if herm_res > 1e-9 * (1.0 + a.frobenius_norm()) {
        return Err(Error::NotHermitian { residual: herm_res });
    }

    let n = a.rows();
    let mut m = a.clone();
    // Symmetrize away representation noise.
    for i in 0..n {
        for j in 0..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm().max(1.0);
    let stop = tol * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let e = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (app - aqq) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let se = s * e;
                let sec = s * e.conj();

                // Columns p, q of M and V.
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp + sec * mkq;
                    m[(k, q)] = c * mkq - se * mkp;

                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp + sec * vkq;
                    v[(k, q)] = c * vkq - se * vkp;
                }
                // Rows p, q of M.
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk + se * mqk;
                    m[(q, k)] = c * mqk - sec * mpk;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// LU factorization with partial pivoting of a real square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: RMatrix,
    piv: Vec<usize>,
    n: usize,
}

impl Lu {
    pub fn factor(a: &RMatrix) -> Result<Lu> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.norm_1().max(1.0);

        for col in 0..n {
            let mut max_row = col;
            let mut max_val = lu[(col, col)].abs();
            for row in (col + 1)..n {
                let v = lu[(row, col)].abs();
                if v > max_val {
                    max_val = v;
                    max_row = row;
                }
            }
            if max_val <= 1e-13 * scale {
                return Err(Error::Singular(format!("pivot {max_val:e} at column {col}")));
            }
            if max_row != col {
                for k in 0..n {
                    let tmp = lu[(col, k)];
                    lu[(col, k)] = lu[(max_row, k)];
                    lu[(max_row, k)] = tmp;
                }
                piv.swap(col, max_row);
            }
            let inv_pivot = 1.0 / lu[(col, col)];
            for row in (col + 1)..n {
                let f = lu[(row, col)] * inv_pivot;
                lu[(row, col)] = f;
                for k in (col + 1)..n {
                    let sub = f * lu[(col, k)];
                    lu[(row, k)] -= sub;
                }
            }
        }
        Ok(Lu { lu, piv, n })
    }

    /// Solve `A x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        // Forward substitution on P b with unit-diagonal L.
        let mut x: Vec<f64> = self.piv.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.lu[(i, k)] * x[k];
            }
            x[i] = acc;
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc -= self.lu[(i, k)] * x[k];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solve `Aᵀ x = b` reusing the factorization (PA = LU ⇒ Aᵀ = Uᵀ Lᵀ P).
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        // Uᵀ is lower triangular.
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.lu[(k, i)] * y[k];
            }
            y[i] = acc / self.lu[(i, i)];
        }
        // Lᵀ is unit upper triangular.
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= self.lu[(k, i)] * y[k];
            }
            y[i] = acc;
        }
        // x = P⁻¹ y.
        let mut x = vec![0.0; n];
        for (i, &p) in self.piv.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Hager-style 1-norm condition estimate, `‖A‖₁ · est(‖A⁻¹‖₁)`.
    pub fn condition_estimate(&self, norm_a_1: f64) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut inv_norm = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x);
            inv_norm = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transposed(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let ztx: f64 = z.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            if zmax <= ztx.abs() {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        norm_a_1 * inv_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_hermitian(n: usize, rng: &mut RngStream) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(rng.next_f64() * 2.0 - 1.0, 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = RngStream::from_seed(5);
        for n in [1usize, 2, 3, 5, 8, 16] {
            let a = random_hermitian(n, &mut rng);
            let eig = hermitian_eigen(&a, 1e-14).unwrap();
            // V unitary
            assert!(eig.vectors.is_unitary(1e-10), "n={n}");
            // A = V Λ V†
            let mut lam = CMatrix::zeros(n, n);
            for i in 0..n {
                lam[(i, i)] = Complex64::new(eig.values[i], 0.0);
            }
            let recon = eig.vectors.mul(&lam).mul(&eig.vectors.adjoint());
            assert!(recon.max_abs_diff(&a) < 1e-10, "n={n}");
            // ascending
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn eigen_known_values() {
        // Pauli Y has eigenvalues ±1.
        let y = CMatrix::from_rows(&[
            &[Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            &[Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
        ]);
        let eig = hermitian_eigen(&y, 1e-14).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lu_solves_and_estimates_condition() {
        let a = RMatrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, -1.0], &[0.0, -1.0, 2.0]]);
        let lu = Lu::factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let xt = lu.solve_transposed(&b);
        let back_t = a.transpose().matvec(&xt);
        for (u, v) in back_t.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let cond = lu.condition_estimate(a.norm_1());
        assert!((1.0..100.0).contains(&cond));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = RMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(Lu::factor(&a), Err(Error::Singular(_))));
    }
}
