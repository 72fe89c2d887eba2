//! Eigen solvers, projected resolvents and density diagnostics.

mod dense;
mod density;
mod lanczos;
mod resolvent;

use serde::{Deserialize, Serialize};

pub use dense::{dense_eigen, dense_matrix};
pub use density::{combes_thomas_bound, fit_decay_rate, one_electron_density, DecayFit, Density};
pub use lanczos::lanczos_lowest;
pub use resolvent::{projected_resolvent_apply, solve_projected, CgSolution};

use crate::exec::{self, Exec};
use crate::operator::LinearOperator;
use crate::symmetry::Antisymmetrizer;
use crate::{Error, Result};

/// Dense diagonalization is used up to this total dimension.
pub const DENSE_CUTOFF: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    DenseOracle,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Shared settings for eigen solves (absolute residual `‖Av - λv‖`) and
/// linear solves (residual relative to the right-hand side).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub krylov_dim: usize,
    pub dense_cutoff: usize,
    pub method: MethodChoice,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 20_000,
            krylov_dim: 120,
            dense_cutoff: DENSE_CUTOFF,
            method: MethodChoice::Auto,
            seed: 0x5eed,
            exec: Exec::default(),
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_method(mut self, method: MethodChoice) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1e-4], got {}", self.tolerance)));
        }
        if self.max_iterations == 0 || self.krylov_dim < 2 {
            return Err(Error::Config("max_iterations must be ≥ 1 and krylov_dim ≥ 2".into()));
        }
        Ok(())
    }

    fn use_dense(&self, dim: usize) -> bool {
        match self.method {
            MethodChoice::Dense => true,
            MethodChoice::Iterative => false,
            MethodChoice::Auto => dim <= self.dense_cutoff,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// Unit vectors in the Euclidean coefficient norm.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub method: EigenMethod,
}

impl EigenResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Gap between the two lowest computed eigenvalues.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() > 1).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }
}

/// In-place orthogonal projection of a coefficient vector.
pub trait Projector: Sync {
    fn project(&self, x: &mut [f64]);
}

/// Projection onto the orthogonal complement of an orthonormal set.
#[derive(Clone, Debug, Default)]
pub struct Complement {
    vectors: Vec<Vec<f64>>,
    exec: Exec,
}

impl Complement {
    /// `vectors` must be orthonormal in the Euclidean coefficient norm.
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        Self { vectors, exec: Exec::default() }
    }

    pub fn of(v: &[f64]) -> Self {
        let n = exec::norm(Exec::default(), v);
        Self::new(vec![v.iter().map(|c| c / n).collect()])
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

impl Projector for Complement {
    fn project(&self, x: &mut [f64]) {
        for _ in 0..2 {
            for v in &self.vectors {
                let c = exec::dot(self.exec, v, x);
                exec::axpy(self.exec, -c, v, x);
            }
        }
    }
}

impl Projector for Antisymmetrizer {
    fn project(&self, x: &mut [f64]) {
        Antisymmetrizer::project(self, x)
    }
}

/// Sequential application of commuting projections.
pub struct Chain<'a>(pub Vec<&'a dyn Projector>);

impl Projector for Chain<'_> {
    fn project(&self, x: &mut [f64]) {
        for p in &self.0 {
            p.project(x);
        }
    }
}

/// Identity projection.
pub struct Whole;

impl Projector for Whole {
    fn project(&self, _x: &mut [f64]) {}
}

/// Lowest eigenpair of a self-adjoint operator.
pub fn ground_state(op: &dyn LinearOperator, settings: &SolverSettings) -> Result<EigenResult> {
    low_spectrum(op, 1, settings)
}

/// The `k` lowest eigenpairs, by dense diagonalization or deflated Lanczos.
pub fn low_spectrum(op: &dyn LinearOperator, k: usize, settings: &SolverSettings) -> Result<EigenResult> {
    settings.validate()?;
    if k == 0 || k > op.dim() {
        return Err(Error::Config(format!("cannot compute {k} eigenpairs of a {}-dimensional operator", op.dim())));
    }
    if !op.is_self_adjoint() {
        return Err(Error::Precondition(format!("{} is not self-adjoint", op.descriptor())));
    }
    if settings.use_dense(op.dim()) {
        let r = dense_eigen(op, k)?;
        if let Some((i, &res)) =
            r.residual_norms.iter().enumerate().find(|(_, &res)| res > settings.tolerance.max(1e-10))
        {
            return Err(Error::NotConverged { iterations: i, residual: res });
        }
        return Ok(r);
    }
    let mut values = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let mut s = settings.clone();
        s.seed = settings.seed.wrapping_add(j as u64);
        let (theta, v, res) = lanczos_lowest(op, None, &vectors, None, &s)?;
        values.push(theta);
        vectors.push(v);
        residuals.push(res);
    }
    // Deflated passes may return near-degenerate values slightly out of order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(EigenResult {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        residual_norms: order.iter().map(|&i| residuals[i]).collect(),
        method: EigenMethod::Iterative,
    })
}

/// Lowest eigenvalue of `P A P` on the range of `P`.
pub fn projected_ground_state(
    op: &dyn LinearOperator,
    projector: &dyn Projector,
    settings: &SolverSettings,
) -> Result<(f64, Vec<f64>, f64)> {
    settings.validate()?;
    lanczos_lowest(op, Some(projector), &[], None, settings)
}

fn residual_norm(op: &dyn LinearOperator, v: &[f64], theta: f64) -> f64 {
    let av = op.apply(v);
    av.iter().zip(v).map(|(a, x)| (a - theta * x).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::hamiltonian::build_full_hamiltonian;
    use crate::model::{AtomSpec, PairInteraction, SystemConfig};
    use crate::operator::{DenseOperator, DiagonalOperator};
    use rand::{Rng, SeedableRng};

    fn oscillator(points: usize, half_width: f64) -> crate::hamiltonian::GridHamiltonian {
        let cfg = SystemConfig::neutral(vec![AtomSpec::well1d(1.0)], PairInteraction::Dipole { prefactor: 0.0 }).unwrap();
        build_full_hamiltonian(&cfg, &GridSpec::cartesian(1, points, half_width).unwrap()).unwrap()
    }

    #[test]
    fn oscillator_ground_and_first_excited() {
        let h = oscillator(256, 8.0);
        let r = low_spectrum(&h, 2, &SolverSettings::default()).unwrap();
        assert_eq!(r.method, EigenMethod::DenseOracle);
        assert!((r.eigenvalues[0] - 1.0).abs() < 2e-3);
        assert!((r.eigenvalues[1] - 3.0).abs() < 5e-3);
        for v in &r.eigenvectors {
            let n: f64 = v.iter().map(|c| c * c).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_threefold_unit_eigenvalue() {
        let id = DiagonalOperator::new(vec![1.0; 10], "identity");
        let r = low_spectrum(&id, 3, &SolverSettings::default()).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 1.0, 1.0]);
        let it = low_spectrum(&id, 3, &SolverSettings::default().with_method(MethodChoice::Iterative)).unwrap();
        for e in it.eigenvalues {
            assert!((e - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn uncoupled_pair_has_product_spectrum() {
        let cfg = SystemConfig::drude_pair(1.0, 1.0, 0.0).unwrap();
        let h = build_full_hamiltonian(&cfg, &GridSpec::cartesian(1, 48, 7.0).unwrap()).unwrap();
        let r = low_spectrum(&h, 4, &SolverSettings::default()).unwrap();
        for (e, want) in r.eigenvalues.iter().zip([2.0, 4.0, 4.0, 6.0]) {
            // O(h²) discretization error grows with the level.
            assert!((e - want).abs() < 0.1, "{e} vs {want}");
        }
        let single = low_spectrum(&oscillator(48, 7.0), 3, &SolverSettings::default()).unwrap().eigenvalues;
        // On a coarse grid e₀ + e₂ can undercut 2e₁, so sort all pair sums.
        let mut sums: Vec<f64> = single.iter().flat_map(|a| single.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (e, want) in r.eigenvalues.iter().zip(sums) {
            assert!((e - want).abs() < 1e-9, "{e} vs {want}");
        }
    }

    #[test]
    fn iterative_matches_dense_on_random_sparse_operator() {
        let n = 512;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = rng.gen_range(0.0..10.0);
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen_range(-1.0..1.0);
                    data[i * n + j] += v;
                    data[j * n + i] += v;
                }
            }
        }
        let a = DenseOperator::new(n, data).unwrap();
        let dense = ground_state(&a, &SolverSettings::default()).unwrap();
        let iter = ground_state(&a, &SolverSettings::default().with_method(MethodChoice::Iterative)).unwrap();
        assert_eq!(iter.method, EigenMethod::Iterative);
        assert!((dense.ground_energy() - iter.ground_energy()).abs() <= 1e-9);
        assert!(iter.residual_norms[0] <= 1e-9);
    }

    #[test]
    fn iterative_matches_dense_on_grid_hamiltonian() {
        let h = oscillator(300, 8.0);
        let dense = low_spectrum(&h, 2, &SolverSettings::default()).unwrap();
        let iter = low_spectrum(&h, 2, &SolverSettings::default().with_method(MethodChoice::Iterative)).unwrap();
        for k in 0..2 {
            assert!((dense.eigenvalues[k] - iter.eigenvalues[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn larger_box_never_raises_the_ground_energy() {
        // fixed spacing 1/16, growing half-width
        let mut last = f64::INFINITY;
        for half in [2.0, 3.0, 4.0] {
            let points = (2.0 * half * 16.0) as usize + 1;
            let e = ground_state(&oscillator(points, half), &SolverSettings::default()).unwrap().ground_energy();
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn invalid_tolerance_is_rejected() {
        let id = DiagonalOperator::new(vec![1.0; 4], "identity");
        assert!(ground_state(&id, &SolverSettings::default().with_tolerance(1e-3)).is_err());
    }
}
