//! Finite-difference many-body Hamiltonians and their decompositions.

use std::sync::Arc;

use crate::exec::{self, Exec};
use crate::grid::{Geometry, GridSpec, Layout, DEFAULT_POINT_BUDGET};
use crate::model::{AtomSpec, Decomposition, PairInteraction, PotentialKind, SystemConfig};
use crate::operator::{DiagonalOperator, LinearOperator};
use crate::{Error, Result};

/// Mean of `1/|x|` over a unit cube centred at the origin; used when two
/// charges share a 3D grid node.
pub const CUBE_MEAN_INVERSE_DISTANCE: f64 = 2.380_077_363_979_55;

/// Potential of an `N`-particle configuration as one- and two-body tables
/// over single-particle grid points.
#[derive(Clone, Debug, Default)]
pub struct PotentialTerms {
    pub constant: f64,
    tables: Vec<Arc<Vec<f64>>>,
    /// `(particle, table)`
    one_body: Vec<(usize, usize)>,
    /// `(l, m, table)` with the table indexed `[p_l * np + p_m]`.
    pairs: Vec<(usize, usize, usize)>,
    np: usize,
}

impl PotentialTerms {
    fn new(np: usize, constant: f64) -> Self {
        Self { constant, np, ..Default::default() }
    }

    fn push_table(&mut self, t: Vec<f64>) -> usize {
        self.tables.push(Arc::new(t));
        self.tables.len() - 1
    }

    /// Value at single-particle indices `parts`.
    pub fn eval(&self, parts: &[usize]) -> f64 {
        let mut v = self.constant;
        for &(l, t) in &self.one_body {
            v += self.tables[t][parts[l]];
        }
        for &(l, m, t) in &self.pairs {
            v += self.tables[t][parts[l] * self.np + parts[m]];
        }
        v
    }

    /// Whether the potential is invariant under relabeling particles, which
    /// makes it usable on the antisymmetric sector.
    pub fn is_symmetric(&self, particles: usize) -> bool {
        let one: Vec<usize> = self.one_body.iter().map(|x| x.1).collect();
        let pair: Vec<usize> = self.pairs.iter().map(|x| x.2).collect();
        one.len() == particles
            && one.windows(2).all(|w| w[0] == w[1])
            && pair.len() == particles * particles.saturating_sub(1) / 2
            && pair.windows(2).all(|w| w[0] == w[1])
    }

    pub fn materialize(&self, layout: &Layout, exec: Exec) -> Vec<f64> {
        let mut v = vec![0.0; layout.len()];
        let n = layout.particles;
        exec::for_each_chunk(exec, &mut v, |off, vs| {
            let mut parts = vec![0; n];
            for (k, x) in vs.iter_mut().enumerate() {
                layout.split(off + k, &mut parts);
                *x = self.eval(&parts);
            }
        });
        v
    }
}

/// `-Δ_h + V` on an `N`-particle tensor grid with Dirichlet boundaries.
#[derive(Clone, Debug)]
pub struct GridHamiltonian {
    layout: Layout,
    terms: PotentialTerms,
    potential: Vec<f64>,
    inv_h2: f64,
    exec: Exec,
    label: String,
}

impl GridHamiltonian {
    pub fn new(layout: Layout, terms: PotentialTerms, exec: Exec, label: impl Into<String>) -> Self {
        let potential = terms.materialize(&layout, exec);
        let h = layout.grid.spacing();
        Self { layout, terms, potential, inv_h2: 1.0 / (h * h), exec, label: label.into() }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn grid(&self) -> &GridSpec {
        &self.layout.grid
    }

    pub fn particles(&self) -> usize {
        self.layout.particles
    }

    pub fn terms(&self) -> &PotentialTerms {
        &self.terms
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn inv_h2(&self) -> f64 {
        self.inv_h2
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

impl LinearOperator for GridHamiltonian {
    fn dim(&self) -> usize {
        self.potential.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.layout.grid.points;
        let axes = self.layout.axes();
        let strides: Vec<usize> = (0..axes).map(|a| self.layout.stride(a)).collect();
        let h2 = self.inv_h2;
        let kin = 2.0 * axes as f64 * h2;
        let pot = &self.potential;
        exec::for_each_chunk(self.exec, y, |off, ys| {
            let mut c = [0usize; 32];
            let mut rest = off;
            for a in (0..axes).rev() {
                c[a] = rest % n;
                rest /= n;
            }
            for (k, yk) in ys.iter_mut().enumerate() {
                let i = off + k;
                let mut acc = (pot[i] + kin) * x[i];
                for a in 0..axes {
                    let s = strides[a];
                    if c[a] > 0 {
                        acc -= h2 * x[i - s];
                    }
                    if c[a] + 1 < n {
                        acc -= h2 * x[i + s];
                    }
                }
                *yk = acc;
                let mut a = axes;
                while a > 0 {
                    a -= 1;
                    c[a] += 1;
                    if c[a] < n {
                        break;
                    }
                    c[a] = 0;
                }
            }
        });
    }

    fn descriptor(&self) -> String {
        format!(
            "{} [{} particles, {} pts/axis, h = {:.4}]",
            self.label,
            self.layout.particles,
            self.layout.grid.points,
            self.layout.grid.spacing()
        )
    }
}

#[derive(Clone, Copy)]
enum Part<'a> {
    Full,
    Decomposed(&'a Decomposition),
    Interaction(&'a Decomposition),
}

fn particle_table(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = vec![0.0; grid.dim];
    (0..grid.particle_points())
        .map(|p| {
            grid.particle_point(p, &mut x);
            f(&x)
        })
        .collect()
}

fn pair_table(grid: &GridSpec, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let np = grid.particle_points();
    let pts: Vec<Vec<f64>> = (0..np)
        .map(|p| {
            let mut x = vec![0.0; grid.dim];
            grid.particle_point(p, &mut x);
            x
        })
        .collect();
    let mut t = Vec::with_capacity(np * np);
    for a in &pts {
        for b in &pts {
            t.push(f(a, b));
        }
    }
    t
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Charge-charge kernel on the grid, regularized at coincident 3D nodes.
fn grid_kernel(w: &PairInteraction, grid: &GridSpec, r: f64) -> f64 {
    if r == 0.0 && matches!(w, PairInteraction::Coulomb) {
        return CUBE_MEAN_INVERSE_DISTANCE / grid.spacing();
    }
    w.kernel(r)
}

fn atom_potential(atom: &AtomSpec, grid: &GridSpec, x: &[f64], local: bool) -> f64 {
    if grid.geometry == Geometry::Radial {
        return -(atom.charge as f64) / x[0];
    }
    let z: Vec<f64> = if local {
        x.to_vec()
    } else {
        x.iter().zip(&atom.position).map(|(a, b)| a - b).collect()
    };
    if atom.potential == PotentialKind::Coulomb3d && z.iter().all(|c| *c == 0.0) {
        return -(atom.charge as f64) * CUBE_MEAN_INVERSE_DISTANCE / grid.spacing();
    }
    atom.potential_at(&z)
}

fn owners_for(cfg: &SystemConfig, part: Part) -> Result<Vec<usize>> {
    let a = match part {
        Part::Full if cfg.is_drude() => cfg.canonical_decomposition()?,
        Part::Full => return Ok(vec![usize::MAX; cfg.electrons]),
        Part::Decomposed(a) | Part::Interaction(a) => a.clone(),
    };
    if a.electrons() != cfg.electrons || a.clusters.len() != cfg.atoms.len() {
        return Err(Error::Config("decomposition does not match the configuration".into()));
    }
    if cfg.is_drude() && !(a.is_canonical() && a.is_atomic(cfg)) {
        return Err(Error::Config(
            "Drude electrons are tied to their own atom; only the canonical decomposition is valid".into(),
        ));
    }
    Ok(a.owners())
}

fn assemble(cfg: &SystemConfig, grid: &GridSpec, part: Part) -> Result<PotentialTerms> {
    cfg.validate()?;
    cfg.check_grid(grid)?;
    let n = cfg.electrons;
    let owner = owners_for(cfg, part)?;
    let constant = match part {
        Part::Decomposed(_) => 0.0,
        _ => cfg.nuclear_repulsion(),
    };
    let mut terms = PotentialTerms::new(grid.particle_points(), constant);

    if cfg.is_drude() {
        if !matches!(part, Part::Interaction(_)) {
            let mut cache: Vec<Option<usize>> = vec![None; cfg.atoms.len()];
            for (l, &o) in owner.iter().enumerate() {
                let t = match cache[o] {
                    Some(t) => t,
                    None => {
                        let atom = &cfg.atoms[o];
                        let t = terms.push_table(particle_table(grid, |x| atom_potential(atom, grid, x, true)));
                        cache[o] = Some(t);
                        t
                    }
                };
                terms.one_body.push((l, t));
            }
        }
        if !matches!(part, Part::Decomposed(_)) {
            for l in 0..n {
                for m in l + 1..n {
                    let (i, j) = (owner[l], owner[m]);
                    if i == j {
                        continue;
                    }
                    let lam = cfg.dipole_strength(i, j);
                    let yhat = cfg.direction(i, j);
                    let t = terms.push_table(pair_table(grid, |a, b| lam * dipole_form(a, b, &yhat)));
                    terms.pairs.push((l, m, t));
                }
            }
        }
        return Ok(terms);
    }

    // Real-space models: every electron sees the nuclei selected by `part`.
    let mut cache: std::collections::HashMap<Vec<usize>, usize> = Default::default();
    for l in 0..n {
        let nuclei: Vec<usize> = match part {
            Part::Full => (0..cfg.atoms.len()).collect(),
            Part::Decomposed(_) => vec![owner[l]],
            Part::Interaction(_) => (0..cfg.atoms.len()).filter(|&j| j != owner[l]).collect(),
        };
        if nuclei.is_empty() {
            continue;
        }
        let t = match cache.get(&nuclei) {
            Some(&t) => t,
            None => {
                let t = terms.push_table(particle_table(grid, |x| {
                    nuclei.iter().map(|&j| atom_potential(&cfg.atoms[j], grid, x, false)).sum()
                }));
                cache.insert(nuclei, t);
                t
            }
        };
        terms.one_body.push((l, t));
    }
    let mut ee = None;
    for l in 0..n {
        for m in l + 1..n {
            let include = match part {
                Part::Full => true,
                Part::Decomposed(_) => owner[l] == owner[m],
                Part::Interaction(_) => owner[l] != owner[m],
            };
            if !include {
                continue;
            }
            let t = *ee.get_or_insert_with(|| {
                let w = cfg.interaction;
                let table = if grid.geometry == Geometry::Radial {
                    pair_table(grid, |a, b| 1.0 / a[0].max(b[0]))
                } else {
                    pair_table(grid, |a, b| grid_kernel(&w, grid, distance(a, b)))
                };
                terms.push_table(table)
            });
            terms.pairs.push((l, m, t));
        }
    }
    Ok(terms)
}

/// `z_l·z_m - 3(z_l·ŷ)(z_m·ŷ)` in 3D, `z_l z_m` in 1D.
pub fn dipole_form(a: &[f64], b: &[f64], yhat: &[f64]) -> f64 {
    if a.len() == 1 {
        return a[0] * b[0];
    }
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let ay: f64 = a.iter().zip(yhat).map(|(x, y)| x * y).sum();
    let by: f64 = b.iter().zip(yhat).map(|(x, y)| x * y).sum();
    ab - 3.0 * ay * by
}

fn layout_for(cfg: &SystemConfig, grid: &GridSpec, particles: usize) -> Result<Layout> {
    cfg.check_grid(grid)?;
    grid.checked_len(particles, DEFAULT_POINT_BUDGET)?;
    Ok(Layout::new(grid.clone(), particles))
}

/// Full Born–Oppenheimer Hamiltonian `H^N(y)`.
pub fn build_full_hamiltonian(cfg: &SystemConfig, grid: &GridSpec) -> Result<GridHamiltonian> {
    build_full_hamiltonian_with(cfg, grid, Exec::default())
}

pub fn build_full_hamiltonian_with(cfg: &SystemConfig, grid: &GridSpec, exec: Exec) -> Result<GridHamiltonian> {
    let layout = layout_for(cfg, grid, cfg.electrons)?;
    let terms = assemble(cfg, grid, Part::Full)?;
    Ok(GridHamiltonian::new(layout, terms, exec, "H"))
}

/// `H_a = Σ_i H_{A_i}`, the Hamiltonian without inter-cluster terms.
pub fn build_decomposed_hamiltonian(cfg: &SystemConfig, a: &Decomposition, grid: &GridSpec) -> Result<GridHamiltonian> {
    let layout = layout_for(cfg, grid, cfg.electrons)?;
    let terms = assemble(cfg, grid, Part::Decomposed(a))?;
    Ok(GridHamiltonian::new(layout, terms, Exec::default(), "H_a"))
}

/// Inter-cluster interaction `I_a = H - H_a` as a multiplication operator.
pub fn build_interaction(cfg: &SystemConfig, a: &Decomposition, grid: &GridSpec) -> Result<DiagonalOperator> {
    let layout = layout_for(cfg, grid, cfg.electrons)?;
    let terms = assemble(cfg, grid, Part::Interaction(a))?;
    Ok(DiagonalOperator::new(terms.materialize(&layout, Exec::default()), "I_a"))
}

/// Single-atom system made of atom `i` of `cfg` carrying `electrons`
/// electrons.
pub fn ion_config(cfg: &SystemConfig, i: usize, electrons: usize) -> SystemConfig {
    SystemConfig { atoms: vec![cfg.atoms[i].clone()], electrons, interaction: cfg.interaction }
}

/// `H_{A_i}`: the electrons of cluster `i` attracted by nucleus `i` only.
/// An empty cluster yields the zero operator on a one-dimensional space.
pub fn build_cluster_hamiltonian(
    cfg: &SystemConfig,
    a: &Decomposition,
    i: usize,
    grid: &GridSpec,
) -> Result<GridHamiltonian> {
    if i >= a.clusters.len() || i >= cfg.atoms.len() {
        return Err(Error::Config(format!("cluster index {i} out of range")));
    }
    build_ion_hamiltonian(&cfg.atoms[i], a.clusters[i].len(), cfg.interaction, grid)
}

/// Hamiltonian of `atom` carrying `electrons` electrons.
pub fn build_ion_hamiltonian(
    atom: &AtomSpec,
    electrons: usize,
    interaction: PairInteraction,
    grid: &GridSpec,
) -> Result<GridHamiltonian> {
    let sub = SystemConfig { atoms: vec![atom.clone()], electrons, interaction };
    let layout = layout_for(&sub, grid, electrons)?;
    let terms = assemble(&sub, grid, Part::Full)?;
    Ok(GridHamiltonian::new(layout, terms, Exec::default(), format!("H_ion(Z={}, N={electrons})", atom.charge)))
}
