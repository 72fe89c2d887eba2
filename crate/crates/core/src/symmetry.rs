//! Particle permutations, the antisymmetrizer `Q_N` and the antisymmetric
//! sector in a Slater-determinant basis.

use crate::exec::{self, Exec};
use crate::grid::{GridSpec, Layout, DEFAULT_POINT_BUDGET};
use crate::hamiltonian::GridHamiltonian;
use crate::operator::LinearOperator;
use crate::wave::WaveFunction;
use crate::{Error, Result};

pub const DEFAULT_FACTORIAL_BUDGET: usize = 6;

/// Permutation of `{0..N-1}` stored as its image table, `map[k] = π(k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &k in &map {
            if k >= map.len() || seen[k] {
                return Err(Error::Config(format!("{map:?} is not a permutation")));
            }
            seen[k] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn image(&self, k: usize) -> usize {
        self.map[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (k, &v) in self.map.iter().enumerate() {
            inv[v] = k;
        }
        Self { map: inv }
    }

    /// `self` followed by `next`, i.e. `k ↦ next(self(k))`. With this
    /// product `T_π T_ρ = T_{π.then(ρ)}`.
    pub fn then(&self, next: &Permutation) -> Self {
        Self { map: self.map.iter().map(|&k| next.map[k]).collect() }
    }

    pub fn sign(&self) -> i32 {
        let mut seen = vec![false; self.map.len()];
        let mut sign = 1;
        for start in 0..self.map.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = self.map[k];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }

    /// All permutations of `n` elements in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Permutation { map: cur.clone() }];
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Permutation { map: cur.clone() });
        }
    }
}

/// `(T_π Ψ)(x_1..x_N) = Ψ(x_{π⁻¹(1)}, …, x_{π⁻¹(N)})`.
pub fn permute(psi: &WaveFunction, pi: &Permutation) -> Result<WaveFunction> {
    let n = psi.particles();
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
    }
    let layout = psi.layout();
    let inv = pi.inverse();
    let src = psi.coefficients();
    let mut out = vec![0.0; src.len()];
    let mut parts = vec![0; n];
    let mut moved = vec![0; n];
    for (idx, o) in out.iter_mut().enumerate() {
        layout.split(idx, &mut parts);
        for k in 0..n {
            moved[k] = parts[inv.image(k)];
        }
        *o = src[layout.join(&moved)];
    }
    WaveFunction::new(psi.grid().clone(), n, out)
}

/// `Q_N = (1/N!) Σ_π sgn(π) T_π` as a matrix-free projector.
#[derive(Clone, Debug)]
pub struct Antisymmetrizer {
    layout: Layout,
    perms: Vec<(Vec<usize>, f64)>,
    exec: Exec,
}

impl Antisymmetrizer {
    pub fn new(grid: &GridSpec, particles: usize) -> Result<Self> {
        Self::with_budget(grid, particles, DEFAULT_FACTORIAL_BUDGET)
    }

    pub fn with_budget(grid: &GridSpec, particles: usize, budget: usize) -> Result<Self> {
        if particles > budget {
            return Err(Error::FactorialBudget { particles, budget });
        }
        let all = Permutation::all(particles);
        let w = 1.0 / all.len() as f64;
        let perms = all.into_iter().map(|p| (p.inverse().map, w * p.sign() as f64)).collect();
        Ok(Self { layout: Layout::new(grid.clone(), particles), perms, exec: Exec::default() })
    }

    pub fn project(&self, x: &mut [f64]) {
        let y = self.apply(x);
        x.copy_from_slice(&y);
    }
}

impl LinearOperator for Antisymmetrizer {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.layout.particles;
        exec::for_each_chunk(self.exec, y, |off, ys| {
            let mut parts = vec![0; n];
            let mut moved = vec![0; n];
            for (k, yk) in ys.iter_mut().enumerate() {
                self.layout.split(off + k, &mut parts);
                let mut acc = 0.0;
                for (inv, w) in &self.perms {
                    for j in 0..n {
                        moved[j] = parts[inv[j]];
                    }
                    acc += w * x[self.layout.join(&moved)];
                }
                *yk = acc;
            }
        });
    }

    fn descriptor(&self) -> String {
        format!("Q_{}", self.layout.particles)
    }
}

pub fn antisymmetrize(psi: &WaveFunction) -> Result<WaveFunction> {
    let q = Antisymmetrizer::new(psi.grid(), psi.particles())?;
    q.apply_wave(psi)
}

fn binomials(n: usize, k: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; k + 1]; n + 1];
    for i in 0..=n {
        c[i][0] = 1;
        for j in 1..=k.min(i) {
            c[i][j] = c[i - 1][j - 1] + if j <= i - 1 { c[i - 1][j] } else { 0 };
        }
    }
    c
}

/// Basis of Slater determinants: strictly increasing tuples of
/// single-particle indices, ranked in colexicographic order.
#[derive(Clone, Debug)]
pub struct AntisymmetricSector {
    layout: Layout,
    tuples: Vec<u32>,
    binom: Vec<Vec<u64>>,
    perms: Vec<(Vec<usize>, f64)>,
}

impl AntisymmetricSector {
    pub fn new(grid: &GridSpec, particles: usize) -> Result<Self> {
        let np = grid.particle_points();
        let binom = binomials(np, particles);
        let size = if particles > np { 0 } else { binom[np][particles] };
        if size as u128 > DEFAULT_POINT_BUDGET {
            return Err(Error::GridTooLarge { required: size as u128, budget: DEFAULT_POINT_BUDGET });
        }
        if particles > DEFAULT_FACTORIAL_BUDGET {
            return Err(Error::FactorialBudget { particles, budget: DEFAULT_FACTORIAL_BUDGET });
        }
        let mut tuples = Vec::with_capacity(size as usize * particles);
        let mut t: Vec<usize> = (0..particles).collect();
        for _ in 0..size {
            tuples.extend(t.iter().map(|&p| p as u32));
            // colex successor
            let mut k = 0;
            while k < particles {
                let limit = if k + 1 < particles { t[k + 1] } else { np };
                if t[k] + 1 < limit {
                    t[k] += 1;
                    for (j, v) in t.iter_mut().enumerate().take(k) {
                        *v = j;
                    }
                    break;
                }
                k += 1;
            }
        }
        let norm = 1.0 / (Permutation::all(particles).len() as f64).sqrt();
        let perms = Permutation::all(particles).into_iter().map(|p| (p.map.clone(), norm * p.sign() as f64)).collect();
        Ok(Self { layout: Layout::new(grid.clone(), particles), tuples, binom, perms })
    }

    pub fn len(&self) -> usize {
        if self.layout.particles == 0 {
            1
        } else {
            self.tuples.len() / self.layout.particles
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn particles(&self) -> usize {
        self.layout.particles
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn tuple(&self, r: usize) -> &[u32] {
        let n = self.layout.particles;
        &self.tuples[r * n..(r + 1) * n]
    }

    pub fn rank(&self, sorted: &[u32]) -> usize {
        sorted.iter().enumerate().map(|(k, &p)| self.binom[p as usize][k + 1] as usize).sum()
    }

    /// Isometric embedding into the tensor space: coefficient `c_t` becomes
    /// `sgn(σ) c_t / sqrt(N!)` at every reordering `σ` of tuple `t`.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        let n = self.layout.particles;
        let mut out = vec![0.0; self.layout.len()];
        if n == 0 {
            out[0] = c[0];
            return out;
        }
        let mut parts = vec![0; n];
        for (r, &cr) in c.iter().enumerate() {
            let t = self.tuple(r);
            for (p, w) in &self.perms {
                for k in 0..n {
                    parts[k] = t[p[k]] as usize;
                }
                out[self.layout.join(&parts)] = w * cr;
            }
        }
        out
    }

    /// Adjoint of [`embed`](Self::embed).
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        let n = self.layout.particles;
        if n == 0 {
            return vec![x[0]];
        }
        let mut parts = vec![0; n];
        (0..self.len())
            .map(|r| {
                let t = self.tuple(r);
                self.perms
                    .iter()
                    .map(|(p, w)| {
                        for k in 0..n {
                            parts[k] = t[p[k]] as usize;
                        }
                        w * x[self.layout.join(&parts)]
                    })
                    .sum()
            })
            .collect()
    }
}

/// A tensor-grid Hamiltonian restricted to the antisymmetric sector.
///
/// Each hop moves one particle to a free neighbouring site; the determinant
/// sign is `(-1)` to the number of occupied sites strictly between the old
/// and new positions.
#[derive(Clone, Debug)]
pub struct FermionSectorOperator {
    sector: AntisymmetricSector,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    exec: Exec,
}

impl FermionSectorOperator {
    pub fn new(h: &GridHamiltonian) -> Result<Self> {
        let n = h.particles();
        if !h.terms().is_symmetric(n) {
            return Err(Error::Precondition("potential is not symmetric under particle exchange".into()));
        }
        let grid = h.grid().clone();
        let sector = AntisymmetricSector::new(&grid, n)?;
        let (pts, dim) = (grid.points, grid.dim);
        let h2 = h.inv_h2();
        let kin = 2.0 * (dim * n) as f64 * h2;
        let mut diag = Vec::with_capacity(sector.len());
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut parts = vec![0usize; n];
        let mut moved = vec![0u32; n];
        if n == 0 {
            diag.push(h.terms().constant);
            offsets.push(0);
        }
        for r in 0..if n == 0 { 0 } else { sector.len() } {
            let t = sector.tuple(r).to_vec();
            for (k, &p) in t.iter().enumerate() {
                parts[k] = p as usize;
            }
            diag.push(h.terms().eval(&parts) + kin);
            for (k, &p) in t.iter().enumerate() {
                let p = p as usize;
                for a in 0..dim {
                    let stride = pts.pow((dim - 1 - a) as u32);
                    let digit = (p / stride) % pts;
                    let targets = [(digit > 0).then(|| p - stride), (digit + 1 < pts).then(|| p + stride)];
                    for q in targets.into_iter().flatten() {
                        if t.binary_search(&(q as u32)).is_ok() {
                            continue;
                        }
                        let (lo, hi) = (p.min(q), p.max(q));
                        let crossed = t.iter().filter(|&&s| (s as usize) > lo && (s as usize) < hi).count();
                        let sign = if crossed % 2 == 0 { 1.0 } else { -1.0 };
                        moved.copy_from_slice(&t);
                        moved[k] = q as u32;
                        moved.sort_unstable();
                        cols.push(sector.rank(&moved) as u32);
                        vals.push(-h2 * sign);
                    }
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self { sector, diag, offsets, cols, vals, exec: h.exec() })
    }

    pub fn sector(&self) -> &AntisymmetricSector {
        &self.sector
    }
}

impl LinearOperator for FermionSectorOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        exec::for_each_chunk(self.exec, y, |off, ys| {
            for (k, yk) in ys.iter_mut().enumerate() {
                let r = off + k;
                let mut acc = self.diag[r] * x[r];
                for e in self.offsets[r]..self.offsets[r + 1] {
                    acc += self.vals[e] * x[self.cols[e] as usize];
                }
                *yk = acc;
            }
        });
    }

    fn descriptor(&self) -> String {
        format!("antisymmetric sector of {} particles ({} determinants)", self.sector.particles(), self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_ion_hamiltonian;
    use crate::model::{AtomSpec, PairInteraction, PotentialKind};
    use rand::{Rng, SeedableRng};

    fn grid() -> GridSpec {
        GridSpec::cartesian(1, 8, 3.0).unwrap()
    }

    fn random_wave(g: &GridSpec, n: usize, seed: u64) -> WaveFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let len = Layout::new(g.clone(), n).len();
        WaveFunction::new(g.clone(), n, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_perm(n: usize, rng: &mut impl Rng) -> Permutation {
        let all = Permutation::all(n);
        all[rng.gen_range(0..all.len())].clone()
    }

    #[test]
    fn identity_permutation_is_a_noop() {
        let psi = random_wave(&grid(), 3, 1);
        assert_eq!(permute(&psi, &Permutation::identity(3)).unwrap(), psi);
    }

    #[test]
    fn transposition_swaps_factors() {
        let g = grid();
        let f = WaveFunction::from_fn(g.clone(), 1, |x| x[0]);
        let h = WaveFunction::from_fn(g.clone(), 1, |x| (x[0] * 0.7).cos());
        let swapped = permute(&f.product(&h).unwrap(), &Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(swapped, h.product(&f).unwrap());
    }

    #[test]
    fn permutation_action_composes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let psi = random_wave(&grid(), 3, 2);
        for _ in 0..10 {
            let (pi, rho) = (random_perm(3, &mut rng), random_perm(3, &mut rng));
            let lhs = permute(&permute(&psi, &rho).unwrap(), &pi).unwrap();
            let rhs = permute(&psi, &pi.then(&rho)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn permutation_preserves_norm_exactly() {
        let psi = random_wave(&grid(), 3, 3);
        let moved = permute(&psi, &Permutation::new(vec![2, 0, 1]).unwrap()).unwrap();
        let sorted = |w: &WaveFunction| {
            let mut c = w.coefficients().to_vec();
            c.sort_by(f64::total_cmp);
            c
        };
        assert_eq!(sorted(&moved), sorted(&psi));
        assert!((moved.norm() - psi.norm()).abs() <= 1e-14 * psi.norm());
    }

    #[test]
    fn signs_and_counts() {
        assert_eq!(Permutation::all(4).len(), 24);
        assert_eq!(Permutation::all(4).iter().map(|p| p.sign()).sum::<i32>(), 0);
        assert_eq!(Permutation::new(vec![1, 0, 2]).unwrap().sign(), -1);
        assert_eq!(Permutation::new(vec![1, 2, 0]).unwrap().sign(), 1);
    }

    #[test]
    fn antisymmetrizer_kills_symmetric_products() {
        let g = grid();
        let f = WaveFunction::from_fn(g.clone(), 1, |x| (-x[0] * x[0]).exp());
        let q = antisymmetrize(&f.product(&f).unwrap()).unwrap();
        assert!(q.coefficients().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn antisymmetrized_orthonormal_pair_has_half_norm() {
        let g = grid();
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[2] = 1.0;
        b[5] = 1.0;
        let f = WaveFunction::from_unit_coefficients(g.clone(), 1, a).unwrap();
        let h = WaveFunction::from_unit_coefficients(g, 1, b).unwrap();
        let q = antisymmetrize(&f.product(&h).unwrap()).unwrap();
        assert!((q.norm().powi(2) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn antisymmetrizer_is_idempotent_and_symmetric() {
        let psi = random_wave(&grid(), 3, 7);
        let q1 = antisymmetrize(&psi).unwrap();
        let q2 = antisymmetrize(&q1).unwrap();
        for (x, y) in q1.coefficients().iter().zip(q2.coefficients()) {
            assert!((x - y).abs() < 1e-12);
        }
        let q = Antisymmetrizer::new(&grid(), 3).unwrap();
        assert!(crate::operator::symmetry_defect(&q, 10, 1) < 1e-12);
    }

    #[test]
    fn factorial_budget_is_enforced() {
        let g = GridSpec::cartesian(1, 8, 1.0).unwrap();
        assert!(matches!(Antisymmetrizer::new(&g, 7), Err(Error::FactorialBudget { budget: 6, .. })));
    }

    #[test]
    fn sector_embedding_is_an_isometry_onto_the_antisymmetric_space() {
        let g = grid();
        let s = AntisymmetricSector::new(&g, 3).unwrap();
        assert_eq!(s.len(), 56);
        for r in 0..s.len() {
            assert_eq!(s.rank(s.tuple(r)), r);
        }
        let psi = random_wave(&g, 3, 11);
        let c = s.gather(psi.coefficients());
        let back = s.gather(&s.embed(&c));
        for (x, y) in c.iter().zip(&back) {
            assert!((x - y).abs() < 1e-13);
        }
        let projected = s.embed(&c);
        let q = antisymmetrize(&psi).unwrap();
        for (x, y) in projected.iter().zip(q.coefficients()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn sector_operator_matches_restricted_tensor_operator() {
        let atom = AtomSpec::new(3, PotentialKind::SoftCoulomb1d { softening: 1.0 }, vec![0.0]);
        let g = GridSpec::cartesian(1, 10, 4.0).unwrap();
        let h = build_ion_hamiltonian(&atom, 3, PairInteraction::SoftCoulomb { softening: 1.0 }, &g).unwrap();
        let op = FermionSectorOperator::new(&h).unwrap();
        let s = op.sector();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let via_tensor = s.gather(&h.apply(&s.embed(&c)));
        let direct = op.apply(&c);
        for (x, y) in via_tensor.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn hamiltonian_commutes_with_antisymmetrizer() {
        let atom = AtomSpec::new(2, PotentialKind::SoftCoulomb1d { softening: 1.0 }, vec![0.0]);
        let g = GridSpec::cartesian(1, 16, 5.0).unwrap();
        let h = build_ion_hamiltonian(&atom, 2, PairInteraction::SoftCoulomb { softening: 1.0 }, &g).unwrap();
        let q = Antisymmetrizer::new(&g, 2).unwrap();
        let psi = random_wave(&g, 2, 5);
        let hq = h.apply(&q.apply(psi.coefficients()));
        let qh = q.apply(&h.apply(psi.coefficients()));
        let scale: f64 = hq.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: f64 = hq.iter().zip(&qh).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-10 * scale);
    }
}
