use super::{Complement, Projector, SolverSettings};
use crate::exec;
use crate::operator::LinearOperator;
use crate::wave::WaveFunction;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solves `P (A - λ) P x = b` on `ran P` by conjugate gradients, projecting
/// every iterate. Non-positive curvature means `λ` is not below the
/// spectrum of the compressed operator and is reported as
/// [`Error::Indefinite`].
pub fn solve_projected(
    op: &dyn LinearOperator,
    projector: &dyn Projector,
    lambda: f64,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<CgSolution> {
    settings.validate()?;
    let ex = settings.exec;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let bnorm = exec::norm(ex, b);
    let mut pb = b.to_vec();
    projector.project(&mut pb);
    let leak = pb.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    if leak > 1e-10 * bnorm.max(1e-300) {
        return Err(Error::Precondition(format!(
            "right-hand side leaves the projected space (relative leak {:.2e})",
            leak / bnorm
        )));
    }
    if bnorm == 0.0 {
        return Ok(CgSolution { x: vec![0.0; n], relative_residual: 0.0, iterations: 0 });
    }
    let shifted = |x: &[f64], y: &mut Vec<f64>| {
        op.apply_into(x, y);
        exec::axpy(ex, -lambda, x, y);
        projector.project(y);
    };

    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.to_vec();
            projector.project(&mut x);
            x
        }
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    // Outer loop restarts CG from the current iterate with a freshly computed
    // residual whenever the recursive residual has drifted.
    for _restart in 0..4 {
        shifted(&x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        projector.project(&mut r);
        rel = exec::norm(ex, &r) / bnorm;
        if rel <= settings.tolerance {
            return Ok(CgSolution { x, relative_residual: rel, iterations });
        }
        let mut p = r.clone();
        let mut rs = exec::dot(ex, &r, &r);
        let mut ap = vec![0.0; n];
        while iterations < settings.max_iterations {
            shifted(&p, &mut ap);
            iterations += 1;
            let pap = exec::dot(ex, &p, &ap);
            let pp = exec::dot(ex, &p, &p);
            if pap <= 0.0 {
                return Err(Error::Indefinite { curvature: pap / pp });
            }
            let a = rs / pap;
            exec::axpy(ex, a, &p, &mut x);
            exec::axpy(ex, -a, &ap, &mut r);
            projector.project(&mut x);
            projector.project(&mut r);
            let rs_new = exec::dot(ex, &r, &r);
            if rs_new.sqrt() <= 0.5 * settings.tolerance * bnorm {
                break;
            }
            let beta = rs_new / rs;
            rs = rs_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        shifted(&x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        projector.project(&mut r);
        rel = exec::norm(ex, &r) / bnorm;
        if rel <= settings.tolerance {
            return Ok(CgSolution { x, relative_residual: rel, iterations });
        }
        if iterations >= settings.max_iterations {
            break;
        }
    }
    Err(Error::NotConverged { iterations, residual: rel })
}

/// `x = (P^⊥ (A - λ) P^⊥)^{-1} b` on the complement of `projector_state`.
pub fn projected_resolvent_apply(
    op: &dyn LinearOperator,
    projector_state: &WaveFunction,
    lambda: f64,
    b: &WaveFunction,
    settings: &SolverSettings,
) -> Result<WaveFunction> {
    projector_state.check_same_shape(b)?;
    let p = Complement::of(projector_state.coefficients());
    let sol = solve_projected(op, &p, lambda, b.coefficients(), None, settings)?;
    WaveFunction::new(b.grid().clone(), b.particles(), sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::hamiltonian::build_full_hamiltonian;
    use crate::model::SystemConfig;
    use crate::operator::{DenseOperator, DiagonalOperator};
    use crate::spectral::ground_state;
    use rand::{Rng, SeedableRng};

    #[test]
    fn eigenvector_right_hand_side_is_scaled() {
        let d = DiagonalOperator::new(vec![1.0, 2.5, 4.0, 7.0], "diag");
        let p = Complement::of(&[1.0, 0.0, 0.0, 0.0]);
        let b = [0.0, 1.0, 0.0, 0.0];
        let x = solve_projected(&d, &p, 1.0, &b, None, &SolverSettings::default()).unwrap().x;
        assert!((x[1] - 1.0 / 1.5).abs() < 1e-14);
        assert!(x[0].abs() < 1e-15 && x[2].abs() < 1e-15);
    }

    #[test]
    fn residual_meets_tolerance_for_random_rhs() {
        let n = 60;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 2.0 + i as f64 * 0.1;
            if i + 1 < n {
                data[i * n + i + 1] = -0.5;
                data[(i + 1) * n + i] = -0.5;
            }
        }
        let a = DenseOperator::new(n, data).unwrap();
        let gs = ground_state(&a, &SolverSettings::default()).unwrap();
        let p = Complement::of(&gs.eigenvectors[0]);
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        p.project(&mut b);
        let s = SolverSettings::default().with_tolerance(1e-10);
        let sol = solve_projected(&a, &p, gs.ground_energy(), &b, None, &s).unwrap();
        let mut ax = a.apply(&sol.x);
        for (y, x) in ax.iter_mut().zip(&sol.x) {
            *y -= gs.ground_energy() * x;
        }
        p.project(&mut ax);
        let r: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-10 * bn);
        let overlap: f64 = sol.x.iter().zip(&gs.eigenvectors[0]).map(|(u, v)| u * v).sum();
        assert!(overlap.abs() < 1e-12);
    }

    #[test]
    fn shift_above_the_complement_is_detected() {
        let d = DiagonalOperator::new(vec![0.0, 1.0, 2.0], "diag");
        let p = Complement::of(&[0.0, 0.0, 1.0]);
        let b = [1.0, 1.0, 0.0];
        let r = solve_projected(&d, &p, 1.5, &b, None, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Indefinite { .. })));
    }

    #[test]
    fn rhs_outside_the_complement_is_rejected() {
        let d = DiagonalOperator::new(vec![0.0, 1.0, 2.0], "diag");
        let p = Complement::of(&[1.0, 0.0, 0.0]);
        let r = solve_projected(&d, &p, -1.0, &[1.0, 1.0, 0.0], None, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn drude_dipole_resolvent_gives_one_sixteenth() {
        // Coupled-oscillator oracle: z φ0 = φ1/√2, excitation energy 2 per
        // oscillator, so <b, x> = (1/2)^2 / 4.
        let cfg = SystemConfig::drude_pair(1.0, 1.0, 0.0).unwrap();
        let g = GridSpec::cartesian(1, 128, 7.0).unwrap();
        let h = build_full_hamiltonian(&cfg, &g).unwrap();
        let gs = ground_state(&h, &SolverSettings::default().with_method(crate::spectral::MethodChoice::Iterative))
            .unwrap();
        let phi = WaveFunction::from_unit_coefficients(g.clone(), 2, gs.eigenvectors[0].clone()).unwrap();
        let f = WaveFunction::from_fn(g.clone(), 2, |x| x[0] * x[1]);
        let b: Vec<f64> = phi.coefficients().iter().zip(f.coefficients()).map(|(p, z)| p * z).collect();
        let mut b = WaveFunction::new(g, 2, b).unwrap();
        let p = Complement::of(phi.coefficients());
        let mut c = b.coefficients().to_vec();
        p.project(&mut c);
        b = WaveFunction::new(b.grid().clone(), 2, c).unwrap();
        let x = projected_resolvent_apply(&h, &phi, gs.ground_energy(), &b, &SolverSettings::default()).unwrap();
        let sigma = b.inner(&x).unwrap();
        assert!((sigma - 1.0 / 16.0).abs() < 1e-4, "{sigma}");
    }
}
