//! Model atoms, system configurations and electron decompositions.

use serde::{Deserialize, Serialize};

use crate::grid::{Geometry, GridSpec};
use crate::{Error, Result};

pub const DEFAULT_SOFTENING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialKind {
    /// `-Z/|x|`, on 3D Cartesian grids or the s-wave radial reduction.
    Coulomb3d,
    /// `-Z/sqrt(x^2 + a^2)` in one dimension.
    SoftCoulomb1d { softening: f64 },
    /// Harmonic well `strength * z^2` per electron (Drude oscillator).
    Well1d { strength: f64 },
    /// Anisotropic harmonic well `sum_k strengths[k] * z_k^2` in 3D.
    Well3d { strengths: [f64; 3] },
}

impl PotentialKind {
    fn family(&self) -> Family {
        match self {
            PotentialKind::Coulomb3d => Family::Coulomb,
            PotentialKind::SoftCoulomb1d { .. } => Family::Soft,
            PotentialKind::Well1d { .. } | PotentialKind::Well3d { .. } => Family::Drude,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            PotentialKind::Coulomb3d | PotentialKind::Well3d { .. } => Some(3),
            PotentialKind::SoftCoulomb1d { .. } | PotentialKind::Well1d { .. } => Some(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Coulomb,
    Soft,
    Drude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PairInteraction {
    /// `1/|x|` between all charges.
    Coulomb,
    /// `1/sqrt(x^2 + a^2)` between all charges.
    SoftCoulomb { softening: f64 },
    /// Drude-model inter-atomic coupling. Electrons `l`, `m` on atoms `i != j`
    /// interact through `prefactor / |y_i - y_j|^3` times `z_l z_m` (1D) or
    /// `z_l·z_m - 3 (z_l·ŷ)(z_m·ŷ)` (3D), with `z` measured from the own
    /// nucleus. Nuclei do not repel and same-atom electrons do not interact.
    Dipole { prefactor: f64 },
}

impl PairInteraction {
    fn family(&self) -> Family {
        match self {
            PairInteraction::Coulomb => Family::Coulomb,
            PairInteraction::SoftCoulomb { .. } => Family::Soft,
            PairInteraction::Dipole { .. } => Family::Drude,
        }
    }

    /// Value of the charge-charge kernel at distance `r`; zero for the
    /// dipole family.
    pub fn kernel(&self, r: f64) -> f64 {
        match *self {
            PairInteraction::Coulomb => 1.0 / r,
            PairInteraction::SoftCoulomb { softening } => 1.0 / (r * r + softening * softening).sqrt(),
            PairInteraction::Dipole { .. } => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub charge: u32,
    pub potential: PotentialKind,
    pub position: Vec<f64>,
}

impl AtomSpec {
    pub fn new(charge: u32, potential: PotentialKind, position: Vec<f64>) -> Self {
        Self { charge, potential, position }
    }

    pub fn well1d(strength: f64) -> Self {
        Self::new(1, PotentialKind::Well1d { strength }, vec![0.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.charge == 0 {
            return Err(Error::Config("atom charge must be at least 1".into()));
        }
        let ok = match self.potential {
            PotentialKind::Coulomb3d => true,
            PotentialKind::SoftCoulomb1d { softening } => softening > 0.0 && softening.is_finite(),
            PotentialKind::Well1d { strength } => strength > 0.0 && strength.is_finite(),
            PotentialKind::Well3d { strengths } => strengths.iter().all(|s| *s > 0.0 && s.is_finite()),
        };
        if !ok {
            return Err(Error::Config(format!("invalid potential parameters {:?}", self.potential)));
        }
        if self.position.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("atom position must be finite".into()));
        }
        Ok(())
    }

    /// One-electron potential at displacement `z` from the nucleus.
    pub fn potential_at(&self, z: &[f64]) -> f64 {
        let z2: f64 = z.iter().map(|c| c * c).sum();
        let charge = self.charge as f64;
        match self.potential {
            PotentialKind::Coulomb3d => -charge / z2.sqrt(),
            PotentialKind::SoftCoulomb1d { softening } => -charge / (z2 + softening * softening).sqrt(),
            PotentialKind::Well1d { strength } => strength * z2,
            PotentialKind::Well3d { strengths } => z.iter().zip(strengths).map(|(c, s)| s * c * c).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub atoms: Vec<AtomSpec>,
    pub electrons: usize,
    pub interaction: PairInteraction,
}

impl SystemConfig {
    pub fn new(atoms: Vec<AtomSpec>, electrons: usize, interaction: PairInteraction) -> Result<Self> {
        let cfg = Self { atoms, electrons, interaction };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Neutral system with `N = ΣZ`.
    pub fn neutral(atoms: Vec<AtomSpec>, interaction: PairInteraction) -> Result<Self> {
        let n = atoms.iter().map(|a| a.charge as usize).sum();
        Self::new(atoms, n, interaction)
    }

    /// Two 1D Drude atoms with well strengths `s1`, `s2` and coupling
    /// `λ = 1/R^3`, placed at `0` and `R = λ^{-1/3}`.
    pub fn drude_pair(s1: f64, s2: f64, lambda: f64) -> Result<Self> {
        let r = if lambda > 0.0 { lambda.powf(-1.0 / 3.0) } else { 1.0 };
        let prefactor = if lambda > 0.0 { 1.0 } else { 0.0 };
        let mut a2 = AtomSpec::well1d(s2);
        a2.position = vec![r];
        Self::neutral(vec![AtomSpec::well1d(s1), a2], PairInteraction::Dipole { prefactor })
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Config("system needs at least one atom".into()));
        }
        let dim = self.atoms[0].potential.dim();
        for (i, a) in self.atoms.iter().enumerate() {
            a.validate()?;
            if a.potential.family() != self.interaction.family() {
                return Err(Error::Config(format!(
                    "atom {i} potential {:?} does not match pair interaction {:?}",
                    a.potential, self.interaction
                )));
            }
            if a.potential.dim() != dim {
                return Err(Error::Config("atoms mix 1D and 3D potentials".into()));
            }
            if Some(a.position.len()) != dim {
                return Err(Error::Config(format!(
                    "atom {i} position has {} components, expected {}",
                    a.position.len(),
                    dim.unwrap_or(0)
                )));
            }
        }
        if let PairInteraction::SoftCoulomb { softening } = self.interaction {
            if !(softening > 0.0 && softening.is_finite()) {
                return Err(Error::Config("soft-Coulomb softening must be positive".into()));
            }
        }
        for i in 0..self.atoms.len() {
            for j in 0..i {
                if self.distance(i, j) == 0.0 {
                    return Err(Error::Config(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].position.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.atoms[i].position, &self.atoms[j].position);
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Minimum distance between distinct nuclei; infinite for one atom.
    pub fn separation(&self) -> f64 {
        let mut r = f64::INFINITY;
        for i in 0..self.atoms.len() {
            for j in 0..i {
                r = r.min(self.distance(i, j));
            }
        }
        r
    }

    pub fn is_drude(&self) -> bool {
        matches!(self.interaction, PairInteraction::Dipole { .. })
    }

    pub fn total_charge(&self) -> usize {
        self.atoms.iter().map(|a| a.charge as usize).sum()
    }

    /// Nuclear repulsion `Σ_{i<j} Z_i Z_j w(y_i - y_j)`.
    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.atoms.len() {
            for j in 0..i {
                let zz = (self.atoms[i].charge * self.atoms[j].charge) as f64;
                e += zz * self.interaction.kernel(self.distance(i, j));
            }
        }
        e
    }

    /// Drude coupling constant `λ_ij = prefactor / |y_i - y_j|^3`.
    pub fn dipole_strength(&self, i: usize, j: usize) -> f64 {
        match self.interaction {
            PairInteraction::Dipole { prefactor } => prefactor / self.distance(i, j).powi(3),
            _ => 0.0,
        }
    }

    /// Unit vector from nucleus `i` to nucleus `j`.
    pub fn direction(&self, i: usize, j: usize) -> Vec<f64> {
        let d = self.distance(i, j);
        self.atoms[j].position.iter().zip(&self.atoms[i].position).map(|(b, a)| (b - a) / d).collect()
    }

    /// Checks that the configuration can be discretized on `grid`.
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        grid.validate()?;
        match grid.geometry {
            Geometry::Radial => {
                if self.atoms.len() != 1 || self.atoms[0].potential != PotentialKind::Coulomb3d {
                    return Err(Error::Config(
                        "radial grids support a single coulomb3d atom at the origin".into(),
                    ));
                }
            }
            Geometry::Cartesian => {
                if grid.dim != self.dim() {
                    return Err(Error::Config("grid dimension does not match the atoms".into()));
                }
            }
        }
        Ok(())
    }

    /// The canonical atomic decomposition: electrons `0..Z_1` on atom 0, the
    /// next `Z_2` on atom 1 and so on.
    pub fn canonical_decomposition(&self) -> Result<Decomposition> {
        if self.electrons != self.total_charge() {
            return Err(Error::Precondition("atomic decompositions need a neutral system".into()));
        }
        let mut next = 0;
        let clusters = self
            .atoms
            .iter()
            .map(|a| {
                let c: Vec<usize> = (next..next + a.charge as usize).collect();
                next += a.charge as usize;
                c
            })
            .collect();
        Decomposition::new(clusters, self.electrons)
    }

    /// All atomic decompositions (`|A_i| = Z_i`), canonical one first.
    pub fn atomic_decompositions(&self) -> Result<Vec<Decomposition>> {
        let sizes: Vec<usize> = self.atoms.iter().map(|a| a.charge as usize).collect();
        if self.electrons != sizes.iter().sum::<usize>() {
            return Err(Error::Precondition("atomic decompositions need a neutral system".into()));
        }
        let mut out = Vec::new();
        let mut owner = vec![usize::MAX; self.electrons];
        fill(&sizes, 0, &mut owner, &mut out, self.atoms.len());
        Ok(out)
    }
}

fn fill(sizes: &[usize], atom: usize, owner: &mut [usize], out: &mut Vec<Decomposition>, m: usize) {
    if atom == m {
        let mut clusters = vec![Vec::new(); m];
        for (e, &o) in owner.iter().enumerate() {
            clusters[o].push(e);
        }
        out.push(Decomposition { clusters });
        return;
    }
    let free: Vec<usize> = (0..owner.len()).filter(|&e| owner[e] == usize::MAX).collect();
    for subset in combinations(&free, sizes[atom]) {
        for &e in &subset {
            owner[e] = atom;
        }
        fill(sizes, atom + 1, owner, out, m);
        for &e in &subset {
            owner[e] = usize::MAX;
        }
    }
}

/// All `k`-subsets of `items` in lexicographic order.
pub fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Partition of electron indices `0..N` into one (possibly empty) cluster per
/// atom; each cluster is kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub clusters: Vec<Vec<usize>>,
}

impl Decomposition {
    pub fn new(mut clusters: Vec<Vec<usize>>, electrons: usize) -> Result<Self> {
        let mut seen = vec![false; electrons];
        for c in clusters.iter_mut() {
            c.sort_unstable();
            for &e in c.iter() {
                if e >= electrons || seen[e] {
                    return Err(Error::Config(format!("electron {e} is out of range or assigned twice")));
                }
                seen[e] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("decomposition does not cover every electron".into()));
        }
        Ok(Self { clusters })
    }

    pub fn electrons(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Atom index owning each electron.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.electrons()];
        for (i, c) in self.clusters.iter().enumerate() {
            for &e in c {
                owner[e] = i;
            }
        }
        owner
    }

    pub fn is_atomic(&self, cfg: &SystemConfig) -> bool {
        self.clusters.len() == cfg.atoms.len()
            && self.clusters.iter().zip(&cfg.atoms).all(|(c, a)| c.len() == a.charge as usize)
    }

    pub fn is_canonical(&self) -> bool {
        let mut next = 0;
        for c in &self.clusters {
            for &e in c {
                if e != next {
                    return false;
                }
                next += 1;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(pos: f64) -> AtomSpec {
        AtomSpec::new(1, PotentialKind::Coulomb3d, vec![0.0, 0.0, pos])
    }

    #[test]
    fn separation_is_minimum_pair_distance() {
        let cfg = SystemConfig::neutral(vec![h(0.0), h(3.0), h(7.0)], PairInteraction::Coulomb).unwrap();
        assert_eq!(cfg.separation(), 3.0);
        assert_eq!(cfg.electrons, 3);
    }

    #[test]
    fn mismatched_families_are_rejected() {
        let r = SystemConfig::new(vec![h(0.0)], 1, PairInteraction::SoftCoulomb { softening: 1.0 });
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn atomic_decompositions_are_counted() {
        let a = AtomSpec::new(2, PotentialKind::SoftCoulomb1d { softening: 1.0 }, vec![0.0]);
        let mut b = a.clone();
        b.position = vec![10.0];
        let cfg = SystemConfig::neutral(vec![a, b], PairInteraction::SoftCoulomb { softening: 1.0 }).unwrap();
        let all = cfg.atomic_decompositions().unwrap();
        assert_eq!(all.len(), 6);
        assert!(all[0].is_canonical());
        assert!(all.iter().all(|d| d.is_atomic(&cfg)));
    }

    #[test]
    fn decomposition_rejects_overlap() {
        assert!(Decomposition::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(Decomposition::new(vec![vec![0], vec![]], 2).is_err());
    }

    #[test]
    fn combinations_enumerate_binomial_count() {
        let items: Vec<usize> = (0..6).collect();
        assert_eq!(combinations(&items, 3).len(), 20);
        assert_eq!(combinations(&items, 0), vec![Vec::<usize>::new()]);
    }
}
