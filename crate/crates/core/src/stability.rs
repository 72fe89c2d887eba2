//! Ionization ladders, Properties (E) and (E'), the IMS partition of unity
//! and the zero-sum charge-group combinatorics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dispersion::natural_interaction;
use crate::exec::{self, Exec};
use crate::fit::linear_fit;
use crate::grid::{GridSpec, Layout};
use crate::hamiltonian::build_ion_hamiltonian;
use crate::model::{AtomSpec, SystemConfig};
use crate::quadrature::integrate;
use crate::spectral::{low_spectrum, SolverSettings};
use crate::symmetry::FermionSectorOperator;
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderEntry {
    /// Ionization `n`: the ion carries `Z - n` electrons.
    pub n: i32,
    pub electrons: usize,
    pub energy: Option<f64>,
    pub residual: f64,
    pub error: Option<String>,
}

/// `E_{i,n}` for `n = -n_max, …, Z_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IonLadder {
    pub charge: u32,
    pub n_max: u32,
    pub entries: Vec<LadderEntry>,
    /// `None` for synthetic ladders.
    pub grid: Option<GridSpec>,
}

impl IonLadder {
    /// A ladder from given energies listed for `n = -n_max, …, Z`.
    pub fn from_energies(charge: u32, n_max: u32, energies: &[f64]) -> Result<Self> {
        if energies.len() != (charge + n_max + 1) as usize {
            return Err(Error::DimensionMismatch { expected: (charge + n_max + 1) as usize, found: energies.len() });
        }
        let entries = energies
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let n = k as i32 - n_max as i32;
                LadderEntry { n, electrons: (charge as i32 - n) as usize, energy: Some(e), residual: 0.0, error: None }
            })
            .collect();
        Ok(Self { charge, n_max, entries, grid: None })
    }

    pub fn entry(&self, n: i32) -> Option<&LadderEntry> {
        let k = n + self.n_max as i32;
        if k < 0 {
            return None;
        }
        self.entries.get(k as usize)
    }

    pub fn energy(&self, n: i32) -> Option<f64> {
        self.entry(n).and_then(|e| e.energy)
    }

    fn require(&self, n: i32) -> Result<f64> {
        match self.entry(n) {
            Some(LadderEntry { energy: Some(e), .. }) => Ok(*e),
            Some(LadderEntry { error, .. }) => Err(Error::Incomplete(format!(
                "E_(n={n}) did not converge: {}",
                error.as_deref().unwrap_or("no value")
            ))),
            None => Err(Error::Incomplete(format!("ladder has no entry for n = {n}"))),
        }
    }

    /// Violations of `E_n < E_{n+1}` on `0 ≤ n < Z`, `E_n < 0` for `n < Z`
    /// and `E_Z = 0`.
    pub fn ordering_violations(&self) -> Vec<String> {
        let z = self.charge as i32;
        let mut out = Vec::new();
        if self.energy(z) != Some(0.0) {
            out.push(format!("E_Z = {:?} is not 0", self.energy(z)));
        }
        for n in 0..z {
            match (self.energy(n), self.energy(n + 1)) {
                (Some(a), Some(b)) if a >= b => out.push(format!("E_{n} = {a} is not below E_{} = {b}", n + 1)),
                (None, _) => out.push(format!("E_{n} missing")),
                _ => {}
            }
        }
        for e in &self.entries {
            if let Some(v) = e.energy {
                if e.n < z && v >= 0.0 {
                    out.push(format!("E_{} = {v} is not negative", e.n));
                }
            }
        }
        out
    }
}

pub(crate) fn ion_ground(atom: &AtomSpec, electrons: usize, grid: &GridSpec, settings: &SolverSettings) -> Result<(f64, f64)> {
    if electrons == 0 {
        return Ok((0.0, 0.0));
    }
    let h = build_ion_hamiltonian(atom, electrons, natural_interaction(atom), grid)?.with_exec(settings.exec);
    let r = if electrons == 1 {
        low_spectrum(&h, 1, settings)?
    } else {
        let sector = FermionSectorOperator::new(&h)?;
        low_spectrum(&sector, 1, settings)?
    };
    Ok((r.eigenvalues[0], r.residual_norms[0]))
}

/// Ground energies of the ions of `atom` from `n_max`-fold negative to bare.
/// Unconverged entries are kept with their error.
pub fn ion_ladder(atom: &AtomSpec, n_max: u32, grid: &GridSpec, settings: &SolverSettings) -> Result<IonLadder> {
    atom.validate()?;
    settings.validate()?;
    let z = atom.charge as i32;
    let ns: Vec<i32> = (-(n_max as i32)..=z).collect();
    let entries = exec::map(settings.exec, &ns, |&n| {
        let electrons = (z - n) as usize;
        match ion_ground(atom, electrons, grid, settings) {
            Ok((e, res)) => LadderEntry { n, electrons, energy: Some(e), residual: res, error: None },
            Err(err) => LadderEntry { n, electrons, energy: None, residual: f64::NAN, error: Some(err.to_string()) },
        }
    });
    Ok(IonLadder { charge: atom.charge, n_max, entries, grid: Some(grid.clone()) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyWitness {
    pub i: usize,
    pub j: usize,
    pub m: i32,
    pub n: i32,
    pub l: i32,
    /// `E_{i,m} + E_{j,-n}`.
    pub lhs: f64,
    /// `E_{i,m+l} + E_{j,-n-l}`.
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub holds: bool,
    pub checked: usize,
    /// Smallest `rhs - lhs` over all checked inequalities.
    pub min_margin: f64,
    pub witness: Option<PropertyWitness>,
}

/// Property (E): `E_{i,m} + E_{j,-n} < E_{i,m+l} + E_{j,-n-l}` for distinct
/// ladders `i ≠ j`, `m, n ≥ 0`, `l ≥ 1`, `m + l ≤ Z_i`, over every `n` the
/// ladder of `j` reaches.
pub fn property_e_check(ladders: &[IonLadder]) -> Result<PropertyReport> {
    if ladders.len() < 2 {
        return Err(Error::Incomplete("Property (E) needs at least two ladders".into()));
    }
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    let mut witness = None;
    for (i, li) in ladders.iter().enumerate() {
        for (j, lj) in ladders.iter().enumerate() {
            if i == j {
                continue;
            }
            let zi = li.charge as i32;
            let reach = lj.n_max as i32;
            if zi > 0 && reach == 0 {
                return Err(Error::Incomplete(format!("ladder {j} has no negative ions")));
            }
            for l in 1..=zi {
                for m in 0..=zi - l {
                    for n in 0..=reach - l {
                        let lhs = li.require(m)? + lj.require(-n)?;
                        let rhs = li.require(m + l)? + lj.require(-n - l)?;
                        checked += 1;
                        let margin = rhs - lhs;
                        if margin < min_margin {
                            min_margin = margin;
                        }
                        if margin <= 0.0 && witness.is_none() {
                            witness = Some(PropertyWitness { i, j, m, n, l, lhs, rhs });
                        }
                    }
                }
            }
        }
    }
    Ok(PropertyReport { holds: witness.is_none(), checked, min_margin, witness })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimeReport {
    pub holds: bool,
    pub checked: usize,
    pub min_margin: f64,
    /// First charge vector with `Σ E_{i,n_i} ≤ Σ E_{i,0}`.
    pub witness: Option<Vec<i32>>,
}

/// Largest system for the exhaustive Property (E') enumeration.
pub const PRIME_MAX_ATOMS: usize = 4;

/// Property (E'): `Σ E_{i,0} < Σ E_{i,n_i}` for every neutral charge vector
/// `Σ n_i = 0`, `Σ |n_i| > 0`, `-Z ≤ n_i ≤ Z_i` with `Z` the largest charge.
pub fn property_e_prime_check(ladders: &[IonLadder]) -> Result<PrimeReport> {
    let m = ladders.len();
    if m > PRIME_MAX_ATOMS {
        return Err(Error::Precondition(format!(
            "Property (E') enumeration is capped at {PRIME_MAX_ATOMS} atoms, got {m}"
        )));
    }
    if m == 0 {
        return Err(Error::Incomplete("no ladders".into()));
    }
    let zmax = ladders.iter().map(|l| l.charge as i32).max().unwrap_or(0);
    let base: f64 = ladders.iter().map(|l| l.require(0)).sum::<Result<f64>>()?;
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    let mut witness = None;
    let mut ns = vec![-zmax; m];
    loop {
        if ns.iter().sum::<i32>() == 0 && ns.iter().any(|&n| n != 0) && ns.iter().zip(ladders).all(|(&n, l)| n <= l.charge as i32) {
            let mut total = 0.0;
            for (l, &n) in ladders.iter().zip(&ns) {
                total += l.require(n)?;
            }
            checked += 1;
            let margin = total - base;
            min_margin = min_margin.min(margin);
            if margin <= 0.0 && witness.is_none() {
                witness = Some(ns.clone());
            }
        }
        let mut k = 0;
        loop {
            if k == m {
                return Ok(PrimeReport { holds: witness.is_none(), checked, min_margin, witness });
            }
            if ns[k] < zmax {
                ns[k] += 1;
                break;
            }
            ns[k] = -zmax;
            k += 1;
        }
    }
}

/// Radial profile `(g_R * χ_{B(0,a)})(r)` of a mollified ball, tabulated on
/// `[a - ε, a + ε]`.
#[derive(Clone, Debug)]
struct MollifiedBall {
    radius: f64,
    eps: f64,
    table: Vec<f64>,
}

const PROFILE_POINTS: usize = 2001;

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl MollifiedBall {
    fn new(radius: f64, eps: f64, dim: usize) -> Result<Self> {
        if eps >= radius {
            return Err(Error::Precondition("mollifier wider than the ball".into()));
        }
        let tol = 1e-14;
        let table = match dim {
            1 => {
                let total = integrate(bump, -1.0, 1.0, tol, tol)?;
                (0..PROFILE_POINTS)
                    .map(|k| {
                        let r = radius - eps + 2.0 * eps * k as f64 / (PROFILE_POINTS - 1) as f64;
                        // 1 - P(s ≤ r - a) for s distributed like the bump.
                        let t = ((r - radius) / eps).clamp(-1.0, 1.0);
                        Ok(1.0 - integrate(bump, -1.0, t, tol, tol)? / total)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            3 => {
                let weight = |s: f64| s * s * bump(s);
                let total = integrate(weight, 0.0, 1.0, tol, tol)?;
                (0..PROFILE_POINTS)
                    .map(|k| {
                        let r = radius - eps + 2.0 * eps * k as f64 / (PROFILE_POINTS - 1) as f64;
                        let inside = |u: f64| {
                            let s = u * eps;
                            if s == 0.0 {
                                return if r <= radius { 1.0 } else { 0.0 };
                            }
                            let c0 = (radius * radius - r * r - s * s) / (2.0 * r * s);
                            ((c0 + 1.0) / 2.0).clamp(0.0, 1.0)
                        };
                        Ok(integrate(|u| weight(u) * inside(u), 0.0, 1.0, tol, tol)? / total)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            d => return Err(Error::Inapplicable(format!("partition profiles are built for 1D and 3D, not {d}D"))),
        };
        Ok(Self { radius, eps, table })
    }

    fn at(&self, r: f64) -> f64 {
        let lo = self.radius - self.eps;
        if r <= lo {
            return 1.0;
        }
        if r >= self.radius + self.eps {
            return 0.0;
        }
        let x = (r - lo) / (2.0 * self.eps) * (PROFILE_POINTS - 1) as f64;
        let k = (x.floor() as usize).min(PROFILE_POINTS - 2);
        let f = x - k as f64;
        self.table[k] * (1.0 - f) + self.table[k + 1] * f
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionMember {
    /// Electron `e` sits near nucleus `owners[e]`.
    Cluster(Vec<usize>),
    /// The electron is far from every nucleus.
    Far(usize),
}

/// `J_c = F_c / sqrt(Σ F_b²)` with `F_a = g * χ(Ω_a^{7/48})` and
/// `F_{i} = g * χ(Ω_{i}^{5/48})`, `g` a product of bumps of radius `ρ/48`
/// and `ρ = R^{3/4}`.
#[derive(Clone, Debug)]
pub struct ImsConstruction {
    pub scale: f64,
    pub rho: f64,
    pub members: Vec<PartitionMember>,
    nuclei: Vec<Vec<f64>>,
    electrons: usize,
    dim: usize,
    near: MollifiedBall,
    far: MollifiedBall,
}

/// Largest `M^N + N` for which the partition is enumerated.
pub const PARTITION_MEMBER_BUDGET: usize = 4096;

impl ImsConstruction {
    pub fn new(cfg: &SystemConfig, scale: f64) -> Result<Self> {
        cfg.validate()?;
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::Precondition(format!("construction scale must satisfy R ≥ 1, got {scale}")));
        }
        let m = cfg.atoms.len();
        let n = cfg.electrons;
        let count = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX).saturating_add(n as u128);
        if count > PARTITION_MEMBER_BUDGET as u128 {
            return Err(Error::Precondition(format!("{count} partition members exceed the budget {PARTITION_MEMBER_BUDGET}")));
        }
        let rho = scale.powf(0.75);
        let eps = rho / 48.0;
        let dim = cfg.dim();
        let mut members = Vec::new();
        let mut owners = vec![0; n];
        loop {
            members.push(PartitionMember::Cluster(owners.clone()));
            let mut k = 0;
            while k < n {
                owners[k] += 1;
                if owners[k] < m {
                    break;
                }
                owners[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        members.extend((0..n).map(PartitionMember::Far));
        Ok(Self {
            scale,
            rho,
            members,
            nuclei: cfg.atoms.iter().map(|a| a.position.clone()).collect(),
            electrons: n,
            dim,
            near: MollifiedBall::new(7.0 * rho / 48.0, eps, dim)?,
            far: MollifiedBall::new(5.0 * rho / 48.0, eps, dim)?,
        })
    }

    pub fn mollifier_radius(&self) -> f64 {
        self.rho / 48.0
    }

    fn distances(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.chunks(self.dim)
            .map(|p| {
                self.nuclei
                    .iter()
                    .map(|y| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                    .collect()
            })
            .collect()
    }

    /// `F_b(x)` for every member.
    pub fn raw(&self, x: &[f64]) -> Vec<f64> {
        let d = self.distances(x);
        let near: Vec<Vec<f64>> = d.iter().map(|row| row.iter().map(|&r| self.near.at(r)).collect()).collect();
        self.members
            .iter()
            .map(|m| match m {
                PartitionMember::Cluster(owners) => owners.iter().enumerate().map(|(e, &o)| near[e][o]).product(),
                PartitionMember::Far(e) => (1.0 - d[*e].iter().map(|&r| self.far.at(r)).sum::<f64>()).max(0.0),
            })
            .collect()
    }

    /// `J_b(x)` for every member.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let f = self.raw(x);
        let s = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        f.iter().map(|v| v / s).collect()
    }

    /// Whether `J_b > 0` at `x` is compatible with the support of member `b`:
    /// `Ω_a^{1/6}` for clusters, `Ω_{i}^{1/12}` for far electrons.
    fn in_support(&self, member: &PartitionMember, d: &[Vec<f64>]) -> bool {
        let slack = 1e-12 * self.rho;
        match member {
            PartitionMember::Cluster(owners) => {
                owners.iter().enumerate().all(|(e, &o)| d[e][o] <= self.rho / 6.0 + slack)
            }
            PartitionMember::Far(e) => d[*e].iter().all(|&r| r >= self.rho / 12.0 - slack),
        }
    }

    /// Largest `|Σ J² - 1|` over `samples` random configurations in
    /// `[-half_width, half_width]^{dN}`, half of them placed on the
    /// transition shells.
    pub fn random_sum_defect(&self, samples: usize, half_width: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut x = vec![0.0; self.electrons * self.dim];
        for s in 0..samples {
            if s % 2 == 0 {
                x.iter_mut().for_each(|c| *c = rng.gen_range(-half_width..=half_width));
            } else {
                for e in 0..self.electrons {
                    let y = &self.nuclei[rng.gen_range(0..self.nuclei.len())];
                    let r = rng.gen_range(0.0..self.rho / 5.0);
                    let mut dir: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let nd = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
                    dir.iter_mut().for_each(|c| *c /= nd);
                    for k in 0..self.dim {
                        x[e * self.dim + k] = y[k] + r * dir[k];
                    }
                }
            }
            let j = self.values(&x);
            worst = worst.max((j.iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
        }
        worst
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub scale: f64,
    pub rho: f64,
    pub mollifier_radius: f64,
    pub members: Vec<PartitionMember>,
    pub grid: GridSpec,
    /// `J_b` on the `N`-electron grid, one vector per member.
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    /// `max |Σ J² - 1|` over grid points.
    pub sum_squares_defect: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// Grid points where some `J_b > 0` outside its support set.
    pub support_violations: usize,
    /// `max Σ_b |∇J_b|²` by central differences.
    pub gradient_sup: f64,
    /// `gradient_sup · R^{3/2} / N²`.
    pub gradient_bound_ratio: f64,
}

/// Samples the IMS partition for `cfg` on `grid` (a configuration-space
/// grid of its own). `scale` defaults to the smallest nuclear separation.
pub fn build_ims_partition(cfg: &SystemConfig, scale: Option<f64>, grid: &GridSpec, exec: Exec) -> Result<PartitionOfUnity> {
    let scale = match scale {
        Some(s) => s,
        None if cfg.atoms.len() > 1 => cfg.separation(),
        None => return Err(Error::Config("a single atom needs an explicit construction scale".into())),
    };
    let c = ImsConstruction::new(cfg, scale)?;
    if grid.dim != c.dim {
        return Err(Error::Config("partition grid dimension does not match the atoms".into()));
    }
    let h = grid.spacing();
    let need = c.mollifier_radius() / 2.0;
    if h > need {
        return Err(Error::Precondition(format!(
            "grid spacing {h:.4} does not resolve the mollifier radius {:.4}; need spacing ≤ {need:.4}",
            c.mollifier_radius()
        )));
    }
    let n = c.electrons;
    let layout = Layout::new(grid.clone(), n);
    grid.checked_len(n, crate::grid::DEFAULT_POINT_BUDGET)?;
    let len = layout.len();
    let nm = c.members.len();
    let starts: Vec<usize> = (0..len).step_by(exec::CHUNK).collect();
    let blocks = exec::map(exec, &starts, |&start| {
        let end = (start + exec::CHUNK).min(len);
        let mut parts = vec![0; n];
        let mut x = vec![0.0; n * grid.dim];
        let mut p = vec![0.0; grid.dim];
        let mut vals = Vec::with_capacity((end - start) * nm);
        let mut defect: f64 = 0.0;
        let mut violations = 0usize;
        for idx in start..end {
            layout.split(idx, &mut parts);
            for (e, &q) in parts.iter().enumerate() {
                grid.particle_point(q, &mut p);
                x[e * grid.dim..(e + 1) * grid.dim].copy_from_slice(&p);
            }
            let j = c.values(&x);
            defect = defect.max((j.iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
            let d = c.distances(&x);
            if c.members.iter().zip(&j).any(|(m, &v)| v > 0.0 && !c.in_support(m, &d)) {
                violations += 1;
            }
            vals.extend(j);
        }
        (vals, defect, violations)
    });
    let mut fields = vec![Vec::with_capacity(len); nm];
    let mut defect: f64 = 0.0;
    let mut violations = 0;
    for (vals, d, v) in blocks {
        defect = defect.max(d);
        violations += v;
        for chunk in vals.chunks(nm) {
            for (f, &val) in fields.iter_mut().zip(chunk) {
                f.push(val);
            }
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in &fields {
        for &v in f {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let gradient_sup = gradient_sup(&layout, &fields, h);
    Ok(PartitionOfUnity {
        scale,
        rho: c.rho,
        mollifier_radius: c.mollifier_radius(),
        members: c.members.clone(),
        grid: grid.clone(),
        fields,
        sum_squares_defect: defect,
        min_value: lo,
        max_value: hi,
        support_violations: violations,
        gradient_sup,
        gradient_bound_ratio: gradient_sup * scale.powf(1.5) / (n * n) as f64,
    })
}

fn gradient_sup(layout: &Layout, fields: &[Vec<f64>], h: f64) -> f64 {
    let axes = layout.axes();
    let pts = layout.grid.points;
    let mut parts = vec![0; axes];
    let mut sup: f64 = 0.0;
    for idx in 0..layout.len() {
        // Axis digits: split by particle, then by component.
        let mut rest = idx;
        for a in (0..axes).rev() {
            parts[a] = rest % pts;
            rest /= pts;
        }
        if parts.iter().any(|&d| d == 0 || d + 1 == pts) {
            continue;
        }
        let mut s = 0.0;
        for f in fields {
            for a in 0..axes {
                let st = layout.stride(a);
                let g = (f[idx + st] - f[idx - st]) / (2.0 * h);
                s += g * g;
            }
        }
        sup = sup.max(s);
    }
    sup
}

/// Log-log slope of `gradient_sup` against `R`.
pub fn gradient_scaling(points: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    linear_fit(&x, &y).1
}

/// Nonempty subset (0-based indices) of `k_1..k_Z` whose sum is a multiple
/// of `Z = k.len()`, from the prefix-remainder pigeonhole argument.
pub fn zero_subset_witness(k: &[i64]) -> Result<Vec<usize>> {
    let z = k.len() as i64;
    if z == 0 {
        return Err(Error::Precondition("need at least one integer".into()));
    }
    let mut seen: BTreeMap<i64, usize> = BTreeMap::new();
    let mut prefix = 0i64;
    for (j, &v) in k.iter().enumerate() {
        prefix = (prefix + v.rem_euclid(z)) % z;
        if prefix == 0 {
            return Ok((0..=j).collect());
        }
        if let Some(&i) = seen.get(&prefix) {
            return Ok((i + 1..=j).collect());
        }
        seen.insert(prefix, j);
    }
    unreachable!("Z prefix sums with nonzero remainders take at most Z - 1 values")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgroupDecomposition {
    pub charges: Vec<i32>,
    pub z: u32,
    /// Index groups, each with zero total charge.
    pub groups: Vec<Vec<usize>>,
    pub max_group_size: usize,
    /// `Z² + 2 δ_{Z,1}`.
    pub bound: usize,
}

pub fn group_size_bound(z: u32) -> usize {
    (z * z) as usize + if z == 1 { 2 } else { 0 }
}

fn check_charges(charges: &[i32], z: u32) -> Result<()> {
    if z == 0 {
        return Err(Error::Precondition("Z must be positive".into()));
    }
    for (j, &c) in charges.iter().enumerate() {
        if c == 0 || c.unsigned_abs() > z {
            return Err(Error::Precondition(format!("charge n_{} = {c} is outside [-Z, Z] \\ {{0}}", j + 1)));
        }
    }
    if charges.iter().map(|&c| c as i64).sum::<i64>() != 0 {
        return Err(Error::Precondition("charges do not sum to zero".into()));
    }
    Ok(())
}

/// Shortest nonempty zero-sum subset of `items` (indices into `charges`),
/// searched by increasing size.
fn shortest_zero_subset(charges: &[i32], items: &[usize]) -> Option<Vec<usize>> {
    for size in 1..=items.len() {
        let positions: Vec<usize> = (0..items.len()).collect();
        for c in crate::model::combinations(&positions, size) {
            if c.iter().map(|&p| charges[items[p]] as i64).sum::<i64>() == 0 {
                return Some(c.iter().map(|&p| items[p]).collect());
            }
        }
    }
    None
}

/// Splits a neutral ion group into minimal zero-sum subgroups, shortest
/// first.
pub fn charge_group_decompose(charges: &[i32], z: u32) -> Result<SubgroupDecomposition> {
    check_charges(charges, z)?;
    let mut remaining: Vec<usize> = (0..charges.len()).collect();
    let mut groups = Vec::new();
    while !remaining.is_empty() {
        let g = shortest_zero_subset(charges, &remaining)
            .ok_or_else(|| Error::Precondition("remaining charges have no zero-sum subset".into()))?;
        remaining.retain(|i| !g.contains(i));
        groups.push(g);
    }
    let max_group_size = groups.iter().map(Vec::len).max().unwrap_or(0);
    Ok(SubgroupDecomposition { charges: charges.to_vec(), z, groups, max_group_size, bound: group_size_bound(z) })
}

/// Largest group handed to the exhaustive minimality check.
pub const MINIMALITY_CHECK_LIMIT: usize = 12;

/// `true` iff no nonempty proper subset of `charges` sums to zero.
pub fn verify_minimal_group(charges: &[i32]) -> Result<bool> {
    let m = charges.len();
    if m > MINIMALITY_CHECK_LIMIT {
        return Err(Error::Precondition(format!("exhaustive check limited to {MINIMALITY_CHECK_LIMIT} charges")));
    }
    let full = (1u32 << m) - 1;
    for mask in 1..full {
        let s: i64 = (0..m).filter(|k| mask & (1 << k) != 0).map(|k| charges[k] as i64).sum();
        if s == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupScan {
    pub z: u32,
    pub max_length: usize,
    pub bound: usize,
    /// Multisets examined (order does not affect the hypotheses).
    pub sequences: u64,
    /// Minimal zero-sum multisets found, by length.
    pub minimal_by_length: Vec<u64>,
    pub max_minimal_length: usize,
    /// Minimal multisets of length `≥ bound`.
    pub counterexamples: Vec<Vec<i32>>,
}

/// Enumerates all multisets of charges in `[-Z, Z] \ {0}` of length up to
/// `max_length` with zero total and no proper zero-sum sub-multiset.
pub fn exhaustive_group_scan(z: u32, max_length: usize) -> Result<GroupScan> {
    if z == 0 {
        return Err(Error::Precondition("Z must be positive".into()));
    }
    let values: Vec<i32> = (-(z as i32)..=z as i32).filter(|&v| v != 0).collect();
    let mut scan = GroupScan {
        z,
        max_length,
        bound: group_size_bound(z),
        sequences: 0,
        minimal_by_length: vec![0; max_length + 1],
        max_minimal_length: 0,
        counterexamples: Vec::new(),
    };
    let mut counts = vec![0usize; values.len()];
    scan_multisets(&values, 0, max_length, &mut counts, &mut scan);
    Ok(scan)
}

fn scan_multisets(values: &[i32], k: usize, left: usize, counts: &mut Vec<usize>, scan: &mut GroupScan) {
    if k == values.len() {
        let len: usize = counts.iter().sum();
        if len == 0 {
            return;
        }
        scan.sequences += 1;
        let sum: i64 = counts.iter().zip(values).map(|(&c, &v)| c as i64 * v as i64).sum();
        if sum == 0 && multiset_is_minimal(values, counts) {
            scan.minimal_by_length[len] += 1;
            scan.max_minimal_length = scan.max_minimal_length.max(len);
            if len >= scan.bound {
                let seq = counts.iter().zip(values).flat_map(|(&c, &v)| std::iter::repeat(v).take(c)).collect();
                scan.counterexamples.push(seq);
            }
        }
        return;
    }
    for c in 0..=left {
        counts[k] = c;
        scan_multisets(values, k + 1, left - c, counts, scan);
    }
    counts[k] = 0;
}

/// No sub-multiset other than empty and full sums to zero.
fn multiset_is_minimal(values: &[i32], counts: &[usize]) -> bool {
    let mut pick = vec![0usize; counts.len()];
    loop {
        let mut k = 0;
        loop {
            if k == counts.len() {
                return true;
            }
            if pick[k] < counts[k] {
                pick[k] += 1;
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if pick == counts {
            continue;
        }
        let s: i64 = pick.iter().zip(values).map(|(&c, &v)| c as i64 * v as i64).sum();
        if s == 0 {
            return false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairInteraction, PotentialKind};

    fn soft(z: u32, x: f64) -> AtomSpec {
        AtomSpec::new(z, PotentialKind::SoftCoulomb1d { softening: 1.0 }, vec![x])
    }

    #[test]
    fn hydrogen_ladder() {
        let h = AtomSpec::new(1, PotentialKind::Coulomb3d, vec![0.0, 0.0, 0.0]);
        let g = GridSpec::radial(1000, 40.0).unwrap();
        let l = ion_ladder(&h, 0, &g, &SolverSettings::default()).unwrap();
        assert_eq!(l.energy(1), Some(0.0));
        assert!((l.energy(0).unwrap() + 0.25).abs() < 1e-3, "{:?}", l.energy(0));
        assert!(l.ordering_violations().is_empty());
    }

    #[test]
    fn soft_helium_ladder_is_ordered() {
        let g = GridSpec::cartesian(1, 60, 12.0).unwrap();
        let l = ion_ladder(&soft(2, 0.0), 1, &g, &SolverSettings::default()).unwrap();
        let (e0, e1, e2) = (l.energy(0).unwrap(), l.energy(1).unwrap(), l.energy(2).unwrap());
        assert!(e0 < e1 && e1 < e2 && e2 == 0.0, "{e0} {e1} {e2}");
        assert!(l.energy(-1).is_some());
    }

    #[test]
    fn hydrogen_pair_has_property_e() {
        let h = AtomSpec::new(1, PotentialKind::Coulomb3d, vec![0.0, 0.0, 0.0]);
        let g = GridSpec::radial(40, 30.0).unwrap();
        let l = ion_ladder(&h, 3, &g, &SolverSettings::default()).unwrap();
        let r = property_e_check(&[l.clone(), l.clone()]).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.checked, 6);
        let p = property_e_prime_check(&[l.clone(), l.clone(), l]).unwrap();
        assert!(p.holds);
    }

    #[test]
    fn violated_ladder_yields_witness() {
        // E_{-1} far below E_0 + E_{-0}: moving an electron gains energy.
        let a = IonLadder::from_energies(1, 1, &[-1.0, -0.25, 0.0]).unwrap();
        let r = property_e_check(&[a.clone(), a.clone()]).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!((w.m, w.n, w.l), (0, 0, 1));
        assert!(!property_e_prime_check(&[a.clone(), a]).unwrap().holds);
    }

    #[test]
    fn property_e_prime_follows_from_e_on_synthetic_ladders() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e0 = -rng.gen_range(0.5..1.0);
            let em1 = e0 + rng.gen_range(-0.4..0.4);
            let em2 = em1 + rng.gen_range(-0.2..0.6);
            let l = IonLadder::from_energies(1, 2, &[em2, em1, e0, 0.0]).unwrap();
            let ls = vec![l.clone(), l.clone(), l];
            if property_e_check(&ls).unwrap().holds {
                assert!(property_e_prime_check(&ls).unwrap().holds);
            }
        }
    }

    #[test]
    fn missing_entries_are_reported() {
        let a = IonLadder::from_energies(1, 0, &[-0.25, 0.0]).unwrap();
        assert!(matches!(property_e_check(&[a.clone(), a.clone()]), Err(Error::Incomplete(_))));
        assert!(matches!(property_e_prime_check(&[a.clone(), a]), Err(Error::Incomplete(_))));
        let b = IonLadder::from_energies(1, 1, &[-0.2, -0.25, 0.0]).unwrap();
        let five = vec![b; 5];
        assert!(matches!(property_e_prime_check(&five), Err(Error::Precondition(_))));
    }

    fn pair_cfg(r: f64) -> SystemConfig {
        SystemConfig::neutral(vec![soft(1, -r / 2.0), soft(1, r / 2.0)], PairInteraction::SoftCoulomb { softening: 1.0 }).unwrap()
    }

    fn partition_grid(r: f64, per_eps: f64) -> GridSpec {
        let rho = r.powf(0.75);
        let hw = r / 2.0 + rho / 4.0;
        let h = rho / 48.0 / per_eps;
        GridSpec::cartesian(1, (2.0 * hw / h).ceil() as usize + 1, hw).unwrap()
    }

    #[test]
    fn partition_sums_to_one() {
        let r = 16.0;
        let cfg = pair_cfg(r);
        let p = build_ims_partition(&cfg, None, &partition_grid(r, 2.0), Exec::default()).unwrap();
        assert_eq!(p.members.len(), 6);
        assert!(p.sum_squares_defect < 1e-10);
        assert!(p.min_value >= 0.0 && p.max_value <= 1.0 + 1e-15);
        assert_eq!(p.support_violations, 0);
        let c = ImsConstruction::new(&cfg, r).unwrap();
        assert!(c.random_sum_defect(10_000, r, 9) < 1e-10);
    }

    #[test]
    fn coarse_partition_grid_is_refused() {
        let cfg = pair_cfg(16.0);
        let g = GridSpec::cartesian(1, 40, 10.0).unwrap();
        assert!(matches!(build_ims_partition(&cfg, None, &g, Exec::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn single_electron_partition() {
        let cfg = SystemConfig::neutral(vec![soft(1, 0.0)], PairInteraction::SoftCoulomb { softening: 1.0 }).unwrap();
        let c = ImsConstruction::new(&cfg, 16.0).unwrap();
        let rho = c.rho;
        assert_eq!(c.values(&[0.05 * rho]), vec![1.0, 0.0]);
        assert_eq!(c.values(&[0.2 * rho]), vec![0.0, 1.0]);
        assert_eq!(c.values(&[5.0 * rho]), vec![0.0, 1.0]);
    }

    #[test]
    fn three_dimensional_profile_is_monotone() {
        let b = MollifiedBall::new(7.0, 1.0, 3).unwrap();
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = b.at(5.5 + 3.0 * k as f64 / 100.0);
            assert!(v <= prev + 1e-12 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((b.at(6.0) - 1.0).abs() < 1e-12 && b.at(8.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_scales_like_r_to_minus_three_halves() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0]
            .iter()
            .map(|&r| {
                let p = build_ims_partition(&pair_cfg(r), None, &partition_grid(r, 8.0), Exec::default()).unwrap();
                (r, p.gradient_sup)
            })
            .collect();
        let slope = gradient_scaling(&pts);
        assert!((slope + 1.5).abs() < 0.1, "{slope} {pts:?}");
    }

    #[test]
    fn witness_examples() {
        assert_eq!(zero_subset_witness(&[1, 2, 3]).unwrap(), vec![0, 1]);
        assert_eq!(zero_subset_witness(&[1, 1, 1]).unwrap(), vec![0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let z = rng.gen_range(1..=8usize);
            let k: Vec<i64> = (0..z).map(|_| rng.gen_range(-50..50)).collect();
            let w = zero_subset_witness(&k).unwrap();
            assert!(!w.is_empty());
            assert_eq!(w.iter().map(|&i| k[i]).sum::<i64>().rem_euclid(z as i64), 0);
        }
    }

    #[test]
    fn group_decomposition_examples() {
        let d = charge_group_decompose(&[1, -1, 1, -1], 1).unwrap();
        assert_eq!(d.groups.len(), 2);
        assert!(d.groups.iter().all(|g| g.len() == 2));
        let d = charge_group_decompose(&[1, 1, -2], 2).unwrap();
        assert_eq!(d.groups, vec![vec![0, 1, 2]]);
        assert!(d.max_group_size < d.bound);
        assert!(verify_minimal_group(&[1, 1, -2]).unwrap());
        assert!(!verify_minimal_group(&[1, -1, 2, -2]).unwrap());
        assert!(matches!(charge_group_decompose(&[3, -3], 2), Err(Error::Precondition(_))));
        assert!(matches!(charge_group_decompose(&[1, 1], 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn exhaustive_scan_for_small_z() {
        let s = exhaustive_group_scan(2, 6).unwrap();
        assert!(s.counterexamples.is_empty());
        assert_eq!(s.max_minimal_length, 3);
        let s = exhaustive_group_scan(1, 3).unwrap();
        assert_eq!(s.max_minimal_length, 2);
    }
}
