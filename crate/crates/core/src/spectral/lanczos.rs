use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Projector, SolverSettings};
use crate::exec::{self, Exec};
use crate::operator::LinearOperator;
use crate::{Error, Result};

fn orthogonalize(exec: Exec, w: &mut [f64], against: &[Vec<f64>], extra: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in against.iter().chain(extra) {
            let c = exec::dot(exec, b, w);
            exec::axpy(exec, -c, b, w);
        }
    }
}

fn lowest_tridiagonal(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigensolver converges");
    let s = evd.S().column_vector();
    let j = (0..k).min_by(|&a, &b| s[a].total_cmp(&s[b])).expect("nonempty");
    (s[j], (0..k).map(|i| evd.U()[(i, j)]).collect())
}

/// Lowest eigenpair of `P A P` on `ran P ∩ span(deflate)^⊥` by explicitly
/// restarted Lanczos with full reorthogonalization.
///
/// `deflate` must be orthonormal and inside `ran P`. Returns the Ritz value,
/// the unit Ritz vector and its true residual norm.
pub fn lanczos_lowest(
    op: &dyn LinearOperator,
    projector: Option<&dyn Projector>,
    deflate: &[Vec<f64>],
    start: Option<Vec<f64>>,
    settings: &SolverSettings,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = op.dim();
    let ex = settings.exec;
    let prepare = |v: &mut Vec<f64>| {
        if let Some(p) = projector {
            p.project(v);
        }
        orthogonalize(ex, v, deflate, &[]);
    };
    let mut v0 = start.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    });
    prepare(&mut v0);
    let nv = exec::norm(ex, &v0);
    if nv == 0.0 || !nv.is_finite() {
        return Err(Error::Precondition("Lanczos start vector vanishes on the search space".into()));
    }
    exec::scale(ex, 1.0 / nv, &mut v0);

    let m = settings.krylov_dim.min(n.saturating_sub(deflate.len())).max(1);
    let mut matvecs = 0;
    let mut best = f64::INFINITY;
    loop {
        let mut basis = vec![v0];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut scale: f64 = 1.0;
        let mut ritz = (0.0, vec![1.0]);
        for j in 0..m {
            let mut w = op.apply(&basis[j]);
            matvecs += 1;
            if let Some(p) = projector {
                p.project(&mut w);
            }
            let a = exec::dot(ex, &w, &basis[j]);
            alpha.push(a);
            scale = scale.max(a.abs());
            orthogonalize(ex, &mut w, &basis, deflate);
            // Rounding leaks components outside ran P that the projected
            // operator maps to zero; left alone they grow into spurious Ritz
            // values.
            if let Some(p) = projector {
                p.project(&mut w);
            }
            let b = exec::norm(ex, &w);
            let k = j + 1;
            let breakdown = b <= 1e-12 * scale;
            if breakdown || k == m || k % 5 == 0 || matvecs >= settings.max_iterations {
                ritz = lowest_tridiagonal(&alpha, &beta);
                let estimate = b * ritz.1[k - 1].abs();
                if breakdown || estimate <= 0.1 * settings.tolerance || k == m || matvecs >= settings.max_iterations {
                    break;
                }
            }
            exec::scale(ex, 1.0 / b, &mut w);
            beta.push(b);
            basis.push(w);
        }
        let (theta, coeffs) = ritz;
        let mut v = vec![0.0; n];
        for (c, b) in coeffs.iter().zip(&basis) {
            exec::axpy(ex, *c, b, &mut v);
        }
        prepare(&mut v);
        let nv = exec::norm(ex, &v);
        exec::scale(ex, 1.0 / nv, &mut v);
        let mut av = op.apply(&v);
        matvecs += 1;
        if let Some(p) = projector {
            p.project(&mut av);
        }
        let theta = if theta.is_finite() { exec::dot(ex, &v, &av) } else { theta };
        let res = av.iter().zip(&v).map(|(a, x)| (a - theta * x).powi(2)).sum::<f64>().sqrt();
        best = best.min(res);
        if res <= settings.tolerance {
            return Ok((theta, v, res));
        }
        if matvecs >= settings.max_iterations {
            return Err(Error::NotConverged { iterations: matvecs, residual: best });
        }
        v0 = v;
    }
}
