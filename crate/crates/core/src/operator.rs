//! Matrix-free operators acting on coefficient vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, Exec};
use crate::wave::WaveFunction;
use crate::{Error, Result};

pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`; both slices have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn descriptor(&self) -> String;

    fn is_self_adjoint(&self) -> bool {
        true
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    fn apply_wave(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        WaveFunction::new(psi.grid().clone(), psi.particles(), self.apply(psi.coefficients()))
    }

    /// Euclidean `⟨x, A x⟩`.
    fn quadratic_form(&self, x: &[f64]) -> f64 {
        exec::dot(Exec::Serial, x, &self.apply(x))
    }
}

/// Multiplication by a fixed vector.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    pub values: Vec<f64>,
    pub label: String,
}

impl DiagonalOperator {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Self {
        Self { values, label: label.into() }
    }
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.values.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.values) {
            *yi = d * xi;
        }
    }

    fn descriptor(&self) -> String {
        self.label.clone()
    }
}

/// Dense row-major matrix, mostly for tests and small oracles.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| data[i * n + j] == data[j * n + i]));
        Ok(Self { n, data, symmetric })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn descriptor(&self) -> String {
        format!("dense {0}x{0} matrix", self.n)
    }

    fn is_self_adjoint(&self) -> bool {
        self.symmetric
    }
}

/// `A + shift·I`.
pub struct Shifted<'a> {
    pub inner: &'a dyn LinearOperator,
    pub shift: f64,
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.shift * xi;
        }
    }

    fn descriptor(&self) -> String {
        format!("({}) + {}", self.inner.descriptor(), self.shift)
    }
}

/// `A ⊗ 1 + 1 ⊗ B` on row-major `dim(A) × dim(B)` coefficient arrays: the
/// Hamiltonian of two non-interacting subsystems.
pub struct KroneckerSum<'a> {
    pub left: &'a dyn LinearOperator,
    pub right: &'a dyn LinearOperator,
    pub exec: Exec,
}

impl LinearOperator for KroneckerSum<'_> {
    fn dim(&self) -> usize {
        self.left.dim() * self.right.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (na, nb) = (self.left.dim(), self.right.dim());
        let rows: Vec<usize> = (0..na).collect();
        let right = exec::map(self.exec, &rows, |&i| self.right.apply(&x[i * nb..(i + 1) * nb]));
        let cols: Vec<usize> = (0..nb).collect();
        let left = exec::map(self.exec, &cols, |&j| {
            let col: Vec<f64> = (0..na).map(|i| x[i * nb + j]).collect();
            self.left.apply(&col)
        });
        for i in 0..na {
            for j in 0..nb {
                y[i * nb + j] = right[i][j] + left[j][i];
            }
        }
    }

    fn descriptor(&self) -> String {
        format!("({}) ⊗ 1 + 1 ⊗ ({})", self.left.descriptor(), self.right.descriptor())
    }

    fn is_self_adjoint(&self) -> bool {
        self.left.is_self_adjoint() && self.right.is_self_adjoint()
    }
}

/// Euclidean tensor product of two coefficient vectors, `left` slowest.
pub fn kron(left: &[f64], right: &[f64]) -> Vec<f64> {
    left.iter().flat_map(|a| right.iter().map(move |b| a * b)).collect()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Largest relative defect of `A(αu + βv) = αAu + βAv` over `trials` random
/// draws.
pub fn linearity_defect(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = random_vector(&mut rng, n);
        let v = random_vector(&mut rng, n);
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let aw = op.apply(&w);
        let (au, av) = (op.apply(&u), op.apply(&v));
        let diff: Vec<f64> = (0..n).map(|i| aw[i] - a * au[i] - b * av[i]).collect();
        let scale = exec::norm(Exec::Serial, &aw).max(a.abs() * exec::norm(Exec::Serial, &au)).max(1e-300);
        worst = worst.max(exec::norm(Exec::Serial, &diff) / scale);
    }
    worst
}

/// Largest relative defect of `⟨u, Av⟩ = ⟨Au, v⟩` over random pairs.
pub fn symmetry_defect(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = random_vector(&mut rng, n);
        let v = random_vector(&mut rng, n);
        let (au, av) = (op.apply(&u), op.apply(&v));
        let lhs = exec::dot(Exec::Serial, &u, &av);
        let rhs = exec::dot(Exec::Serial, &au, &v);
        let scale = exec::norm(Exec::Serial, &u) * exec::norm(Exec::Serial, &av);
        worst = worst.max((lhs - rhs).abs() / scale.max(1e-300));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::hamiltonian::{build_full_hamiltonian, build_ion_hamiltonian};
    use crate::model::{AtomSpec, PairInteraction, SystemConfig};

    #[test]
    fn kronecker_sum_is_the_uncoupled_pair() {
        let g = GridSpec::cartesian(1, 12, 4.0).unwrap();
        let w = PairInteraction::Dipole { prefactor: 0.0 };
        let a = build_ion_hamiltonian(&AtomSpec::well1d(1.0), 1, w, &g).unwrap();
        let b = build_ion_hamiltonian(&AtomSpec::well1d(2.0), 1, w, &g).unwrap();
        let sum = KroneckerSum { left: &a, right: &b, exec: Exec::Serial };
        let pair = build_full_hamiltonian(&SystemConfig::drude_pair(1.0, 2.0, 0.0).unwrap(), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vector(&mut rng, 144);
        let (u, v) = (sum.apply(&x), pair.apply(&x));
        for (p, q) in u.iter().zip(&v) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_symmetry_flag() {
        let a = DenseOperator::new(2, vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(a.is_self_adjoint());
        assert!(symmetry_defect(&a, 10, 1) < 1e-14);
        let b = DenseOperator::new(2, vec![1.0, 2.0, 0.0, 3.0]).unwrap();
        assert!(!b.is_self_adjoint());
        assert!(symmetry_defect(&b, 10, 1) > 1e-3);
    }

    #[test]
    fn diagonal_is_linear() {
        let d = DiagonalOperator::new((0..50).map(|i| i as f64).collect(), "ramp");
        assert!(linearity_defect(&d, 5, 3) < 1e-14);
    }
}
