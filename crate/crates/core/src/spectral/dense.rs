use faer::{Mat, Side};

use super::{residual_norm, EigenMethod, EigenResult};
use crate::operator::LinearOperator;
use crate::{Error, Result};

/// Assembles the matrix of `op` column by column and symmetrizes it.
pub fn dense_matrix(op: &dyn LinearOperator) -> Mat<f64> {
    let n = op.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    m
}

/// Full diagonalization; returns the `k` lowest eigenpairs.
pub fn dense_eigen(op: &dyn LinearOperator, k: usize) -> Result<EigenResult> {
    let m = dense_matrix(op);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Precondition(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residual_norms = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let v: Vec<f64> = (0..op.dim()).map(|i| u[(i, j)]).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|c| c / norm).collect();
        residual_norms.push(residual_norm(op, &v, s[j]));
        eigenvalues.push(s[j]);
        eigenvectors.push(v);
    }
    Ok(EigenResult { eigenvalues, eigenvectors, residual_norms, method: EigenMethod::DenseOracle })
}
