//! Small least-squares utilities: linear regression, dense linear least
//! squares and a Levenberg–Marquardt driver for few-parameter models.

use faer::prelude::SolveLstsq;
use faer::Mat;

use crate::{Error, Result};

/// Ordinary least-squares line `y = a + b x`; returns `(a, b, rms)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Minimizes `‖A c - b‖₂` for a row-major `rows × cols` design matrix via a
/// Householder QR factorization.
pub fn least_squares(design: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if design.len() != rows * cols || b.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: design.len() });
    }
    if rows < cols {
        return Err(Error::Precondition(format!("{rows} equations for {cols} unknowns")));
    }
    let a = Mat::<f64>::from_fn(rows, cols, |i, j| design[i * cols + j]);
    let rhs = Mat::<f64>::from_fn(rows, 1, |i, _| b[i]);
    let qr = a.qr();
    let sol = qr.solve_lstsq(&rhs);
    let c: Vec<f64> = (0..cols).map(|j| sol[(j, 0)]).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("rank-deficient least-squares problem".into()));
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Half the squared residual norm at `params`.
    pub cost: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt with forward-difference Jacobians. `residuals` maps
/// parameters to the residual vector; non-finite residuals are treated as
/// a rejected step.
pub fn levenberg_marquardt<F>(residuals: F, start: &[f64], max_iterations: usize) -> LmOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let cost_of = |r: &[f64]| {
        let c = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    };
    let np = start.len();
    let mut p = start.to_vec();
    let mut r = residuals(&p);
    let mut cost = cost_of(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let m = r.len();
        let mut jac = vec![0.0; m * np];
        for k in 0..np {
            let step = 1e-7 * p[k].abs().max(1.0);
            let mut q = p.clone();
            q[k] += step;
            let rq = residuals(&q);
            for i in 0..m {
                jac[i * np + k] = (rq[i] - r[i]) / step;
            }
        }
        let mut jtj = vec![0.0; np * np];
        let mut jtr = vec![0.0; np];
        for i in 0..m {
            for a in 0..np {
                jtr[a] += jac[i * np + a] * r[i];
                for b in 0..np {
                    jtj[a * np + b] += jac[i * np + a] * jac[i * np + b];
                }
            }
        }
        let grad = jtr.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if grad < 1e-15 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut sys = jtj.clone();
            for a in 0..np {
                sys[a * np + a] += mu * jtj[a * np + a].max(1e-12);
            }
            let Some(delta) = solve_small(&sys, &jtr, np) else {
                mu *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(&delta).map(|(x, d)| x - d).collect();
            let rq = residuals(&q);
            let cq = cost_of(&rq);
            if cq < cost {
                let rel = (cost - cq) / cost.max(1e-300);
                p = q;
                r = rq;
                cost = cq;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel < 1e-14 {
                    return LmOutcome { params: p, cost, iterations };
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    LmOutcome { params: p, cost, iterations }
}

/// Gaussian elimination with partial pivoting for tiny systems.
fn solve_small(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for i in col + 1..n {
            let f = m[i * n + col] / m[col * n + col];
            for k in col..n {
                m[i * n + k] -= f * m[col * n + k];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i * n + k] * x[k]).sum();
        x[i] = (x[i] - s) / m[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_is_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, rms) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14 && rms < 1e-14);
    }

    #[test]
    fn polynomial_least_squares() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
        let design: Vec<f64> = xs.iter().flat_map(|x| [1.0, *x, x * x]).collect();
        let b: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.25 * x * x).collect();
        let c = least_squares(&design, 20, 3, &b).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lm_recovers_exponential() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-1.7 * x).exp()).collect();
        let out = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() - y).collect(),
            &[1.0, 1.0],
            200,
        );
        assert!((out.params[0] - 3.0).abs() < 1e-7, "{:?}", out.params);
        assert!((out.params[1] - 1.7).abs() < 1e-7);
    }
}
