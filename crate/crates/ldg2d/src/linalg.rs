//! Small dense-block linear algebra used by the one-dimensional solvers:
//! symmetric block-tridiagonal matrices, their Cholesky-based factorization,
//! and a shifted inverse power iteration for the smallest generalized
//! eigenvalue.

use nalgebra::{Cholesky, Const, SMatrix, SVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite at block {0}")]
    NotPositiveDefinite(usize),
    #[error("eigenvalue iteration did not converge within {0} iterations")]
    EigNotConverged(usize),
    #[error("could not find a positive-definite shift")]
    ShiftSearchFailed,
}

/// Symmetric block-tridiagonal matrix with `n` diagonal blocks of size D.
/// `lower[i]` couples block-row `i+1` to block-column `i`; the upper blocks
/// are the transposes.
#[derive(Debug, Clone)]
pub struct BlockTridiag<const D: usize> {
    pub n: usize,
    pub diag: Vec<SMatrix<f64, D, D>>,
    pub lower: Vec<SMatrix<f64, D, D>>,
}

impl<const D: usize> BlockTridiag<D> {
    pub fn zeros(n: usize) -> Self {
        BlockTridiag {
            n,
            diag: vec![SMatrix::zeros(); n],
            lower: vec![SMatrix::zeros(); n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n * D
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        for i in 0..self.n {
            let xi = SVector::<f64, D>::from_column_slice(&x[i * D..(i + 1) * D]);
            let mut yi = self.diag[i] * xi;
            if i > 0 {
                let xm = SVector::<f64, D>::from_column_slice(&x[(i - 1) * D..i * D]);
                yi += self.lower[i - 1] * xm;
            }
            if i + 1 < self.n {
                let xp = SVector::<f64, D>::from_column_slice(&x[(i + 1) * D..(i + 2) * D]);
                yi += self.lower[i].transpose() * xp;
            }
            y[i * D..(i + 1) * D].copy_from_slice(yi.as_slice());
        }
    }

    /// Add `shift * w[i]` to the diagonal entries of block `i`, one weight
    /// per scalar row.
    pub fn add_diagonal(&mut self, shift: f64, weights: &[f64]) {
        assert_eq!(weights.len(), self.dim());
        for i in 0..self.n {
            for d in 0..D {
                self.diag[i][(d, d)] += shift * weights[i * D + d];
            }
        }
    }

    /// Block Cholesky (Thomas) factorization. Fails unless the matrix is
    /// positive definite.
    pub fn factor(&self) -> Result<BlockFactor<D>, LinalgError> {
        let mut chol: Vec<Cholesky<f64, Const<D>>> = Vec::with_capacity(self.n);
        let mut carry: SMatrix<f64, D, D>;
        let mut pivot = self.diag[0];
        for i in 0..self.n {
            let c = Cholesky::new(pivot).ok_or(LinalgError::NotPositiveDefinite(i))?;
            if i + 1 < self.n {
                // carry = L_i * pivot^{-1} * L_i^T
                let mut linv_lt = self.lower[i].transpose();
                c.solve_mut(&mut linv_lt);
                carry = self.lower[i] * linv_lt;
                pivot = self.diag[i + 1] - carry;
            }
            chol.push(c);
        }
        Ok(BlockFactor {
            chol,
            lower: self.lower.clone(),
        })
    }
}

pub struct BlockFactor<const D: usize> {
    chol: Vec<Cholesky<f64, Const<D>>>,
    lower: Vec<SMatrix<f64, D, D>>,
}

impl<const D: usize> BlockFactor<D> {
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.chol.len();
        assert_eq!(b.len(), n * D);
        assert_eq!(x.len(), n * D);
        // Forward sweep: c_i = b_i - L_{i-1} (S_{i-1}^{-1} c_{i-1})
        let mut c: Vec<SVector<f64, D>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut ci = SVector::<f64, D>::from_column_slice(&b[i * D..(i + 1) * D]);
            if i > 0 {
                let prev = self.chol[i - 1].solve(&c[i - 1]);
                ci -= self.lower[i - 1] * prev;
            }
            c.push(ci);
        }
        // Back substitution.
        let mut xi = self.chol[n - 1].solve(&c[n - 1]);
        x[(n - 1) * D..n * D].copy_from_slice(xi.as_slice());
        for i in (0..n - 1).rev() {
            let rhs = c[i] - self.lower[i].transpose() * xi;
            xi = self.chol[i].solve(&rhs);
            x[i * D..(i + 1) * D].copy_from_slice(xi.as_slice());
        }
    }
}

/// Smallest eigenvalue of `H v = λ B v` with `B` diagonal positive, for a
/// symmetric block-tridiagonal `H`.
///
/// Uses shifted inverse power iteration: a shift `c ≥ 0` is grown until
/// `H + cB` admits a block Cholesky factorization, then the iteration runs
/// on `(H + cB)^{-1} B`, which is self-adjoint in the B inner product. A
/// second pass re-centres the shift near the found eigenvalue to sharpen
/// convergence.
pub fn smallest_generalized_eig<const D: usize>(
    h: &BlockTridiag<D>,
    b_diag: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>), LinalgError> {
    assert_eq!(b_diag.len(), h.dim());
    assert!(b_diag.iter().all(|&m| m > 0.0), "mass must be positive");
    let scale = h
        .diag
        .iter()
        .enumerate()
        .flat_map(|(i, blk)| (0..D).map(move |d| (blk[(d, d)] / b_diag[i * D + d]).abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);

    let factor_with = |c: f64| -> Option<BlockFactor<D>> {
        let mut shifted = h.clone();
        shifted.add_diagonal(c, b_diag);
        shifted.factor().ok()
    };

    // Find a workable shift.
    let mut c = 0.0;
    let mut fac = factor_with(c);
    if fac.is_none() {
        let mut trial = 1e-8 * scale;
        for _ in 0..80 {
            if let Some(f) = factor_with(trial) {
                c = trial;
                fac = Some(f);
                break;
            }
            trial *= 4.0;
        }
    }
    let mut fac = fac.ok_or(LinalgError::ShiftSearchFailed)?;

    let n = h.dim();
    let mut lambda = f64::NAN;
    let mut x: Vec<f64> = (0..n)
        .map(|i| 0.5 + (i as f64 * 0.7324).sin())
        .collect();
    for pass in 0..2 {
        let mut bx = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut rho_prev = f64::INFINITY;
        let mut converged = false;
        for it in 0..max_iter {
            for i in 0..n {
                bx[i] = b_diag[i] * x[i];
            }
            fac.solve(&bx, &mut y);
            // Rayleigh quotient of (H+cB)^{-1}B in the B inner product.
            let num: f64 = y.iter().zip(&bx).map(|(a, b)| a * b).sum();
            let den: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
            let rho = num / den;
            let bnorm = y
                .iter()
                .zip(b_diag)
                .map(|(v, m)| v * v * m)
                .sum::<f64>()
                .sqrt();
            for v in y.iter_mut() {
                *v /= bnorm;
            }
            std::mem::swap(&mut x, &mut y);
            if (rho - rho_prev).abs() <= tol * rho.abs().max(1e-300) && it > 4 {
                lambda = 1.0 / rho - c;
                converged = true;
                break;
            }
            rho_prev = rho;
        }
        if !converged {
            // Accept the last estimate only on the refinement pass.
            if pass == 1 {
                return Err(LinalgError::EigNotConverged(max_iter));
            }
            lambda = 1.0 / rho_prev - c;
        }
        if pass == 0 {
            // Re-centre: a shift just right of -λ gives a sharp spectral gap.
            let c_new = (-lambda).max(0.0) + 1e-3 * scale;
            if let Some(f) = factor_with(c_new) {
                c = c_new;
                fac = f;
            } else {
                break;
            }
        }
    }
    Ok((lambda, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;
    use rand::Rng;

    fn random_spd_tridiag(n: usize, seed: u64) -> BlockTridiag<3> {
        let mut r = rng(seed);
        let mut m = BlockTridiag::<3>::zeros(n);
        for i in 0..n - 1 {
            let mut b = SMatrix::<f64, 3, 3>::zeros();
            for p in 0..3 {
                for q in 0..3 {
                    b[(p, q)] = r.random_range(-1.0..1.0);
                }
            }
            m.lower[i] = b;
        }
        for i in 0..n {
            let mut d = SMatrix::<f64, 3, 3>::zeros();
            for p in 0..3 {
                for q in 0..3 {
                    d[(p, q)] = r.random_range(-0.3..0.3);
                }
            }
            d = (d + d.transpose()) * 0.5;
            for p in 0..3 {
                d[(p, p)] += 8.0; // diagonally dominant → SPD
            }
            m.diag[i] = d;
        }
        m
    }

    #[test]
    fn factor_solve_round_trip() {
        let m = random_spd_tridiag(40, 1);
        let mut r = rng(2);
        let b: Vec<f64> = (0..m.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = m.factor().unwrap();
        let mut x = vec![0.0; m.dim()];
        f.solve(&b, &mut x);
        let mut back = vec![0.0; m.dim()];
        m.matvec(&x, &mut back);
        let err: f64 = back
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "residual {err}");
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut m = random_spd_tridiag(10, 3);
        m.diag[4][(1, 1)] = -50.0;
        assert!(m.factor().is_err());
    }

    #[test]
    fn smallest_eig_of_discrete_laplacian() {
        // 1D Dirichlet Laplacian blocks: eigenvalues 4 sin^2(j pi / (2(n+1))) / h^2.
        let n = 60;
        let h = 1.0 / (n as f64 + 1.0);
        let mut m = BlockTridiag::<1>::zeros(n);
        for i in 0..n {
            m.diag[i][(0, 0)] = 2.0 / (h * h);
            if i + 1 < n {
                m.lower[i][(0, 0)] = -1.0 / (h * h);
            }
        }
        let b = vec![1.0; n];
        let (lam, _) = smallest_generalized_eig(&m, &b, 1e-12, 10_000).unwrap();
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((lam - exact).abs() < 1e-7 * exact, "{lam} vs {exact}");
    }

    #[test]
    fn smallest_eig_handles_indefinite_matrices() {
        let mut m = random_spd_tridiag(30, 5);
        // Push one eigenvalue negative.
        m.diag[10][(0, 0)] = -30.0;
        let b = vec![1.0; m.dim()];
        let (lam, v) = smallest_generalized_eig(&m, &b, 1e-12, 10_000).unwrap();
        assert!(lam < 0.0);
        // Residual check: H v ≈ λ B v.
        let mut hv = vec![0.0; m.dim()];
        m.matvec(&v, &mut hv);
        let res: f64 = hv
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - lam * x) * (a - lam * x))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-6 * lam.abs().max(1.0), "residual {res}");
    }
}
