//! The dispersion coefficient σ, its direction independence, the multipole
//! expansion of the inter-atomic Coulomb terms and Newton's theorem.

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::feshbach::smooth_cutoff;
use crate::grid::{Geometry, GridSpec, Layout};
use crate::hamiltonian::{build_ion_hamiltonian, dipole_form, GridHamiltonian};
use crate::model::{AtomSpec, PairInteraction, PotentialKind};
use crate::operator::{kron, KroneckerSum};
use crate::quadrature::integrate;
use crate::spectral::{lanczos_lowest, low_spectrum, solve_projected, Complement, Projector, SolverSettings};
use crate::symmetry::Antisymmetrizer;
use crate::wave::WaveFunction;
use crate::{Error, Result};

/// Smallest atomic excitation gap accepted as a non-degenerate ground state.
pub const CONDITION_D_GAP: f64 = 1e-6;

/// The leading inter-atomic coupling `f_{ij,v}` between the `Z_i` electrons
/// of one atom and the `Z_j` electrons of the other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleCoupling {
    /// Unit vector in 3D; `[±1]` in 1D, where `f` does not depend on it.
    pub direction: Vec<f64>,
    pub cluster_sizes: (usize, usize),
}

impl DipoleCoupling {
    pub fn new(direction: Vec<f64>, cluster_sizes: (usize, usize)) -> Result<Self> {
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        match direction.len() {
            1 if norm == 1.0 => {}
            3 if (norm - 1.0).abs() <= 1e-12 => {}
            1 | 3 => return Err(Error::Config(format!("direction must be a unit vector, |v| = {norm}"))),
            d => return Err(Error::Config(format!("direction must have 1 or 3 components, got {d}"))),
        }
        if cluster_sizes.0 == 0 || cluster_sizes.1 == 0 {
            return Err(Error::Config("both clusters need at least one electron".into()));
        }
        Ok(Self { direction, cluster_sizes })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn particles(&self) -> usize {
        self.cluster_sizes.0 + self.cluster_sizes.1
    }

    /// `f(z)` for flattened electron displacements, first cluster first.
    pub fn value(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let (zi, zj) = self.cluster_sizes;
        let mut f = 0.0;
        for l in 0..zi {
            for m in zi..zi + zj {
                f += dipole_form(&z[l * d..(l + 1) * d], &z[m * d..(m + 1) * d], &self.direction);
            }
        }
        f
    }
}

/// Multiplies `psi` by `f_{ij,v}`.
pub fn dipole_coupling_apply(coupling: &DipoleCoupling, psi: &WaveFunction) -> Result<WaveFunction> {
    if psi.grid().geometry != Geometry::Cartesian {
        return Err(Error::Inapplicable("the dipole coupling needs Cartesian coordinates".into()));
    }
    if psi.particles() != coupling.particles() {
        return Err(Error::DimensionMismatch { expected: coupling.particles(), found: psi.particles() });
    }
    if psi.grid().dim != coupling.dim() {
        return Err(Error::DimensionMismatch { expected: coupling.dim(), found: psi.grid().dim });
    }
    let f = coupling_table(coupling, psi.grid());
    let c = psi.coefficients().iter().zip(&f).map(|(a, b)| a * b).collect();
    WaveFunction::new(psi.grid().clone(), psi.particles(), c)
}

fn coupling_table(coupling: &DipoleCoupling, grid: &GridSpec) -> Vec<f64> {
    WaveFunction::from_fn(grid.clone(), coupling.particles(), |z| coupling.value(z)).into_coefficients()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionResult {
    pub sigma: f64,
    /// Relative residual of the projected resolvent solve (largest over
    /// directions).
    pub resolvent_residual: f64,
    /// `max_v |σ(v) - σ(v₀)|` over the tested directions.
    pub direction_spread: f64,
    pub sigmas_by_direction: Vec<(Vec<f64>, f64)>,
    /// Excitation gap of the non-interacting pair, the smaller atomic gap.
    pub gap: f64,
    pub atom_energies: (f64, f64),
    /// σ recomputed with the atomic ground states multiplied by the smooth
    /// cutoff of radius `cutoff_radius`.
    pub cutoff_sigma: Option<f64>,
    pub cutoff_radius: Option<f64>,
    pub direction_invariant: Option<bool>,
}

/// Electron-electron interaction natural to an atom's potential family.
pub fn natural_interaction(atom: &AtomSpec) -> PairInteraction {
    match atom.potential {
        PotentialKind::Coulomb3d => PairInteraction::Coulomb,
        PotentialKind::SoftCoulomb1d { softening } => PairInteraction::SoftCoulomb { softening },
        PotentialKind::Well1d { .. } | PotentialKind::Well3d { .. } => PairInteraction::Dipole { prefactor: 0.0 },
    }
}

struct AtomGround {
    hamiltonian: GridHamiltonian,
    symmetry: Option<Antisymmetrizer>,
    energy: f64,
    gap: f64,
    state: Vec<f64>,
}

fn atom_ground(atom: &AtomSpec, grid: &GridSpec, settings: &SolverSettings) -> Result<AtomGround> {
    atom.validate()?;
    let mut local = atom.clone();
    local.position = vec![0.0; grid.dim];
    let z = atom.charge as usize;
    let hamiltonian = build_ion_hamiltonian(&local, z, natural_interaction(atom), grid)?.with_exec(settings.exec);
    if z == 1 {
        let r = low_spectrum(&hamiltonian, 2, settings)?;
        let gap = r.gap().expect("two eigenvalues");
        return Ok(AtomGround { energy: r.eigenvalues[0], gap, state: r.eigenvectors[0].clone(), hamiltonian, symmetry: None });
    }
    let q = Antisymmetrizer::new(grid, z)?;
    let (e0, v0, _) = lanczos_lowest(&hamiltonian, Some(&q), &[], None, settings)?;
    let (e1, _, _) = lanczos_lowest(&hamiltonian, Some(&q), &[v0.clone()], None, settings)?;
    Ok(AtomGround { energy: e0, gap: e1 - e0, state: v0, hamiltonian, symmetry: Some(q) })
}

/// Antisymmetrizes each cluster of a row-major `left × right` coefficient
/// array separately.
/// `Q_{A} ⊗ Q_{B}` on a row-major pair space of `na × nb` entries.
pub(crate) struct ClusterSymmetry<'a> {
    pub(crate) left: Option<&'a Antisymmetrizer>,
    pub(crate) right: Option<&'a Antisymmetrizer>,
    pub(crate) na: usize,
    pub(crate) nb: usize,
}

impl Projector for ClusterSymmetry<'_> {
    fn project(&self, x: &mut [f64]) {
        if let Some(q) = self.right {
            for row in x.chunks_mut(self.nb) {
                q.project(row);
            }
        }
        if let Some(q) = self.left {
            let mut col = vec![0.0; self.na];
            for j in 0..self.nb {
                for i in 0..self.na {
                    col[i] = x[i * self.nb + j];
                }
                q.project(&mut col);
                for i in 0..self.na {
                    x[i * self.nb + j] = col[i];
                }
            }
        }
    }
}

struct Complemented<'a> {
    symmetry: &'a ClusterSymmetry<'a>,
    complement: &'a Complement,
}

impl Projector for Complemented<'_> {
    fn project(&self, x: &mut [f64]) {
        self.symmetry.project(x);
        self.complement.project(x);
    }
}

/// Everything that does not depend on the coupling direction: the atomic
/// ground states and the non-interacting pair Hamiltonian `H_ij^σ`.
pub struct DispersionProblem {
    grid: GridSpec,
    settings: SolverSettings,
    first: AtomGround,
    second: AtomGround,
    sizes: (usize, usize),
}

impl DispersionProblem {
    /// Computes both atomic ground states and checks Condition (D).
    pub fn new(atom_i: &AtomSpec, atom_j: &AtomSpec, grid: &GridSpec, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        if grid.geometry != Geometry::Cartesian {
            return Err(Error::Inapplicable("σ needs a Cartesian grid (angular structure)".into()));
        }
        let (first, second) = (atom_ground(atom_i, grid, settings)?, atom_ground(atom_j, grid, settings)?);
        let gap = first.gap.min(second.gap);
        if !(gap > CONDITION_D_GAP) {
            return Err(Error::Gap(format!(
                "Condition (D) violated: atomic ground state gap {gap:.3e} ≤ {CONDITION_D_GAP:e}"
            )));
        }
        let sizes = (atom_i.charge as usize, atom_j.charge as usize);
        Ok(Self { grid: grid.clone(), settings: settings.clone(), first, second, sizes })
    }

    pub fn gap(&self) -> f64 {
        self.first.gap.min(self.second.gap)
    }

    pub fn energies(&self) -> (f64, f64) {
        (self.first.energy, self.second.energy)
    }

    /// Euclidean-unit product ground state `φ_i ⊗ φ_j`.
    pub fn product_state(&self) -> Vec<f64> {
        kron(&self.first.state, &self.second.state)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.grid.clone(), self.sizes.0 + self.sizes.1)
    }

    fn pair_operator(&self) -> KroneckerSum<'_> {
        KroneckerSum { left: &self.first.hamiltonian, right: &self.second.hamiltonian, exec: self.settings.exec }
    }

    fn symmetry(&self) -> ClusterSymmetry<'_> {
        ClusterSymmetry {
            left: self.first.symmetry.as_ref(),
            right: self.second.symmetry.as_ref(),
            na: self.first.state.len(),
            nb: self.second.state.len(),
        }
    }

    /// `R^⊥ b` at `λ = E_i + E_j` on the complement of the product ground
    /// state; returns `(⟨b, x⟩, relative residual, x)`.
    pub fn resolvent_form(&self, b: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
        let phi = self.product_state();
        let complement = Complement::of(&phi);
        let symmetry = self.symmetry();
        let p = Complemented { symmetry: &symmetry, complement: &complement };
        let mut rhs = b.to_vec();
        p.project(&mut rhs);
        let lambda = self.first.energy + self.second.energy;
        let sol = solve_projected(&self.pair_operator(), &p, lambda, &rhs, None, &self.settings).map_err(|e| match e {
            Error::Indefinite { curvature } => Error::Gap(format!(
                "projected pair Hamiltonian is not above E_i + E_j on the complement (curvature {curvature:.3e})"
            )),
            other => other,
        })?;
        let value = exec::dot(self.settings.exec, &rhs, &sol.x);
        Ok((value, sol.relative_residual, sol.x))
    }

    /// `σ(v) = ⟨f φ, R^⊥ f φ⟩` and the resolvent residual.
    pub fn sigma(&self, direction: &[f64]) -> Result<(f64, f64)> {
        let coupling = DipoleCoupling::new(direction.to_vec(), self.sizes)?;
        let f = coupling_table(&coupling, &self.grid);
        let b: Vec<f64> = self.product_state().iter().zip(&f).map(|(p, f)| p * f).collect();
        let (sigma, res, _) = self.resolvent_form(&b)?;
        Ok((sigma, res))
    }

    /// σ with cut-off atomic states `φ χ_R / ‖φ χ_R‖`, where the cutoff
    /// support is three quarters of the box half-width. `None` when the
    /// cutoff removes more than half the norm.
    pub fn cutoff_sigma(&self, direction: &[f64]) -> Result<Option<(f64, f64)>> {
        let radius = 6.0 * 0.75 * self.grid.extent;
        let chi = smooth_cutoff(radius);
        let cut = |state: &[f64], particles: usize| -> Option<Vec<f64>> {
            let w = WaveFunction::from_fn(self.grid.clone(), particles, |x| {
                x.chunks(self.grid.dim).map(|p| chi.at(p)).product()
            });
            let v: Vec<f64> = state.iter().zip(w.coefficients()).map(|(a, b)| a * b).collect();
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            (n >= 0.5).then(|| v.iter().map(|c| c / n).collect())
        };
        let (Some(a), Some(b)) = (cut(&self.first.state, self.sizes.0), cut(&self.second.state, self.sizes.1)) else {
            return Ok(None);
        };
        let coupling = DipoleCoupling::new(direction.to_vec(), self.sizes)?;
        let f = coupling_table(&coupling, &self.grid);
        let rhs: Vec<f64> = kron(&a, &b).iter().zip(&f).map(|(p, f)| p * f).collect();
        let (sigma, _, _) = self.resolvent_form(&rhs)?;
        Ok(Some((sigma, radius)))
    }
}

fn default_direction(dim: usize) -> Vec<f64> {
    if dim == 1 {
        vec![1.0]
    } else {
        vec![0.0, 0.0, 1.0]
    }
}

/// `σ_ij(v)` for two atoms placed at their own origins.
pub fn sigma_coefficient(
    atom_i: &AtomSpec,
    atom_j: &AtomSpec,
    direction: Option<&[f64]>,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<DispersionResult> {
    let problem = DispersionProblem::new(atom_i, atom_j, grid, settings)?;
    let v = direction.map(|v| v.to_vec()).unwrap_or_else(|| default_direction(grid.dim));
    let (sigma, residual) = problem.sigma(&v)?;
    let cutoff = problem.cutoff_sigma(&v)?;
    Ok(DispersionResult {
        sigma,
        resolvent_residual: residual,
        direction_spread: 0.0,
        sigmas_by_direction: vec![(v, sigma)],
        gap: problem.gap(),
        atom_energies: problem.energies(),
        cutoff_sigma: cutoff.map(|c| c.0),
        cutoff_radius: cutoff.map(|c| c.1),
        direction_invariant: None,
    })
}

/// σ(v) for each direction; passes iff the spread is at most ten solver
/// tolerances.
pub fn direction_invariance_check(
    atom_i: &AtomSpec,
    atom_j: &AtomSpec,
    directions: &[Vec<f64>],
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<DispersionResult> {
    if grid.dim != 3 || grid.geometry != Geometry::Cartesian {
        return Err(Error::Inapplicable("direction independence is only meaningful for 3D models".into()));
    }
    if directions.is_empty() {
        return Err(Error::Config("no directions given".into()));
    }
    let problem = DispersionProblem::new(atom_i, atom_j, grid, settings)?;
    let values = exec::map(settings.exec, directions, |v| problem.sigma(v));
    let mut sigmas = Vec::with_capacity(directions.len());
    let mut residual: f64 = 0.0;
    for (v, r) in directions.iter().zip(values) {
        let (s, res) = r?;
        residual = residual.max(res);
        sigmas.push((v.clone(), s));
    }
    let s0 = sigmas[0].1;
    let spread = sigmas.iter().map(|(_, s)| (s - s0).abs()).fold(0.0, f64::max);
    Ok(DispersionResult {
        sigma: s0,
        resolvent_residual: residual,
        direction_spread: spread,
        sigmas_by_direction: sigmas,
        gap: problem.gap(),
        atom_energies: problem.energies(),
        cutoff_sigma: None,
        cutoff_radius: None,
        direction_invariant: Some(spread <= 10.0 * settings.tolerance),
    })
}

// ---------------------------------------------------------------------------
// Multipole expansion

fn norm3(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `1/|y| - 1/|y + a|` without cancellation.
fn inverse_distance_drop(y: &[f64], a: &[f64]) -> f64 {
    let ny = norm3(y);
    let ya: Vec<f64> = y.iter().zip(a).map(|(p, q)| p + q).collect();
    let nya = norm3(&ya);
    let num: f64 = y.iter().zip(a).map(|(p, q)| 2.0 * p * q + q * q).sum();
    num / ((ny + nya) * ny * nya)
}

/// The four Coulomb terms between electron `l` of atom `i` (displacement
/// `z_l`), electron `m` of atom `j` (displacement `z_m`) and both nuclei,
/// with `y = y_i - y_j`:
/// `1/|y| - 1/|y + z_l| - 1/|y - z_m| + 1/|y + z_l - z_m|`.
pub fn coulomb_combination(z_l: &[f64], z_m: &[f64], y: &[f64]) -> f64 {
    let minus_m: Vec<f64> = z_m.iter().map(|c| -c).collect();
    let y_m: Vec<f64> = y.iter().zip(&minus_m).map(|(a, b)| a + b).collect();
    inverse_distance_drop(y, z_l) - inverse_distance_drop(&y_m, z_l)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultipoleReport {
    /// Entry `k` is the coefficient of `|y|^{-k}` (`k = 0..=4`) in the
    /// expansion of the Coulomb combination along the ray through `y`.
    pub coefficients_by_order: Vec<f64>,
    /// `f(z) = z_l·z_m - 3 (z_l·ŷ)(z_m·ŷ)`, the expected `|y|^{-3}` term.
    pub dipole_value: f64,
    /// Displacements were required to lie within this radius, `|y|/3`.
    pub sup_norm_domain: f64,
    /// RMS misfit relative to the largest sample.
    pub fit_residual: f64,
    pub ladder: (f64, f64),
}

const MULTIPOLE_BASIS: usize = 11;
const MULTIPOLE_SAMPLES: usize = 40;

/// Fits the Coulomb combination along `s ↦ s ŷ` against powers of `1/s`.
pub fn multipole_expand(z_l: &[f64], z_m: &[f64], y: &[f64]) -> Result<MultipoleReport> {
    if z_l.len() != 3 || z_m.len() != 3 || y.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: z_l.len().min(z_m.len()).min(y.len()) });
    }
    let ny = norm3(y);
    let domain = ny / 3.0;
    let diff: Vec<f64> = z_l.iter().zip(z_m).map(|(a, b)| a - b).collect();
    if norm3(z_l) > domain || norm3(z_m) > domain || norm3(&diff) > domain {
        return Err(Error::Precondition(format!(
            "displacements must satisfy |z_l|, |z_m|, |z_l - z_m| ≤ |y|/3 = {domain}"
        )));
    }
    let yhat: Vec<f64> = y.iter().map(|c| c / ny).collect();
    let dipole_value = dipole_form(z_l, z_m, &yhat);
    let extent = norm3(z_l).max(norm3(z_m)).max(norm3(&diff));
    let s0 = ny.max(20.0 * extent);
    let s1 = 100.0 * s0;
    let mut design = Vec::with_capacity(MULTIPOLE_SAMPLES * MULTIPOLE_BASIS);
    let mut rhs = Vec::with_capacity(MULTIPOLE_SAMPLES);
    for k in 0..MULTIPOLE_SAMPLES {
        let s = s0 * (s1 / s0).powf(k as f64 / (MULTIPOLE_SAMPLES - 1) as f64);
        let t = s0 / s;
        let point: Vec<f64> = yhat.iter().map(|c| c * s).collect();
        rhs.push(coulomb_combination(z_l, z_m, &point));
        design.extend((0..MULTIPOLE_BASIS).map(|p| t.powi(p as i32)));
    }
    let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(MultipoleReport {
            coefficients_by_order: vec![0.0; 5],
            dipole_value,
            sup_norm_domain: domain,
            fit_residual: 0.0,
            ladder: (s0, s1),
        });
    }
    let a = crate::fit::least_squares(&design, MULTIPOLE_SAMPLES, MULTIPOLE_BASIS, &rhs)?;
    let misfit = (0..MULTIPOLE_SAMPLES)
        .map(|i| {
            let model: f64 = (0..MULTIPOLE_BASIS).map(|p| design[i * MULTIPOLE_BASIS + p] * a[p]).sum();
            (model - rhs[i]).powi(2)
        })
        .sum::<f64>()
        / MULTIPOLE_SAMPLES as f64;
    // I(s) = Σ a_p (s0/s)^p, so the |y|^{-p} coefficient is a_p s0^p.
    let coefficients_by_order = (0..5).map(|p| a[p] * s0.powi(p as i32)).collect();
    Ok(MultipoleReport {
        coefficients_by_order,
        dipole_value,
        sup_norm_domain: domain,
        fit_residual: misfit.sqrt() / scale,
        ladder: (s0, s1),
    })
}

// ---------------------------------------------------------------------------
// Newton's theorem

/// Spherically symmetric charge density `ρ(r)` with compact support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// Constant density of total charge `charge` on `r ≤ radius`.
    UniformBall { radius: f64, charge: f64 },
    /// `exp(-r²/(2 width²))` on `r ≤ cutoff`.
    TruncatedGaussian { width: f64, cutoff: f64 },
    /// Piecewise-linear density through `(r_k, ρ_k)`, zero beyond the last
    /// node.
    Tabulated { r: Vec<f64>, density: Vec<f64> },
}

impl RadialProfile {
    pub fn support(&self) -> f64 {
        match self {
            RadialProfile::UniformBall { radius, .. } => *radius,
            RadialProfile::TruncatedGaussian { cutoff, .. } => *cutoff,
            RadialProfile::Tabulated { r, .. } => r.last().copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RadialProfile::UniformBall { radius, charge } => *radius > 0.0 && charge.is_finite(),
            RadialProfile::TruncatedGaussian { width, cutoff } => *width > 0.0 && *cutoff > 0.0,
            RadialProfile::Tabulated { r, density } => {
                r.len() >= 2
                    && r.len() == density.len()
                    && r[0] >= 0.0
                    && r.windows(2).all(|w| w[1] > w[0])
                    && density.iter().all(|d| d.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid radial profile {self:?}")))
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialProfile::UniformBall { radius, charge } => {
                if r <= *radius {
                    charge / (4.0 / 3.0 * std::f64::consts::PI * radius.powi(3))
                } else {
                    0.0
                }
            }
            RadialProfile::TruncatedGaussian { width, cutoff } => {
                if r <= *cutoff {
                    (-r * r / (2.0 * width * width)).exp()
                } else {
                    0.0
                }
            }
            RadialProfile::Tabulated { r: nodes, density } => {
                if r < nodes[0] || r > *nodes.last().expect("validated") {
                    return 0.0;
                }
                let k = nodes.partition_point(|x| *x <= r).clamp(1, nodes.len() - 1);
                let t = (r - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
                density[k - 1] * (1.0 - t) + density[k] * t
            }
        }
    }

    /// Radii across which the profile is not smooth.
    fn pieces(&self) -> Vec<f64> {
        match self {
            RadialProfile::Tabulated { r, .. } => {
                let mut p = vec![0.0];
                p.extend(r.iter().copied().filter(|x| *x > 0.0));
                p
            }
            _ => vec![0.0, self.support()],
        }
    }

    /// `∫_{r∈[0,support]} g(r) ρ(r) 4π r² dr`, piece by piece.
    fn radial_integral(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let p = self.pieces();
        let mut total = 0.0;
        for w in p.windows(2) {
            total += integrate(
                |r| g(r) * self.value(r) * 4.0 * std::f64::consts::PI * r * r,
                w[0],
                w[1],
                1e-16,
                1e-13,
            )?;
        }
        Ok(total)
    }

    pub fn charge(&self) -> Result<f64> {
        self.radial_integral(|_| 1.0)
    }
}

/// Mean of `φ(|y + z|)` over the sphere `|z| = r`, `|y| = d`, by quadrature
/// in `u = cos θ`; NaN if the inner quadrature fails, which the outer
/// quadrature then reports.
fn sphere_mean(phi: &impl Fn(f64) -> f64, r: f64, d: f64) -> f64 {
    if r == 0.0 {
        return phi(d);
    }
    integrate(|u| phi((d * d + r * r + 2.0 * d * r * u).max(0.0).sqrt()), -1.0, 1.0, 1e-16, 1e-13)
        .map_or(f64::NAN, |v| 0.5 * v)
}

/// `∫ ρ(z)/|y + z| dz` at `|y| = d`, computed without using Newton's
/// theorem.
pub fn shell_potential(profile: &RadialProfile, d: f64) -> Result<f64> {
    profile.radial_integral(|r| sphere_mean(&|a| 1.0 / a, r, d))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonReport {
    pub charge: f64,
    /// `(|y|, quadrature potential, Q/|y|)` per evaluation point.
    pub potentials: Vec<(f64, f64, f64)>,
    pub max_relative_deviation: f64,
    /// `(|y|, ⟨ρ ⊗ ρ, Ĩ⟩, Q²/|y|)` for points beyond twice the support.
    pub pair_combinations: Vec<(f64, f64, f64)>,
    /// Largest `|⟨ρ ⊗ ρ, Ĩ⟩| / (Q²/|y|)`.
    pub max_pair_ratio: f64,
}

const CHEBYSHEV_NODES: usize = 40;

/// `⟨ρ ⊗ ρ, Ĩ⟩` for two neutral atoms with nuclear charge `Q` and electron
/// cloud `ρ` at distance `d`: nucleus–nucleus, both electron–nucleus and
/// the cloud–cloud terms, each integrated numerically.
pub fn pair_combination(profile: &RadialProfile, d: f64) -> Result<f64> {
    let q = profile.charge()?;
    let s = profile.support();
    if d <= 2.0 * s {
        return Err(Error::Precondition(format!("clouds overlap: |y| = {d} ≤ 2·support = {}", 2.0 * s)));
    }
    let v = shell_potential(profile, d)?;
    // Cloud-cloud: ∫ ρ(z) P(|y + z|) dz with P the cloud potential, which is
    // interpolated on [d - s, d + s] from Chebyshev samples.
    let (lo, hi) = (d - s, d + s);
    let nodes: Vec<f64> = (0..CHEBYSHEV_NODES)
        .map(|k| {
            let t = (std::f64::consts::PI * (k as f64 + 0.5) / CHEBYSHEV_NODES as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        })
        .collect();
    let samples: Vec<f64> = nodes.iter().map(|&a| shell_potential(profile, a)).collect::<Result<_>>()?;
    let weights: Vec<f64> = (0..CHEBYSHEV_NODES)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * (std::f64::consts::PI * (k as f64 + 0.5) / CHEBYSHEV_NODES as f64).sin()
        })
        .collect();
    let interp = |a: f64| {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..CHEBYSHEV_NODES {
            let diff = a - nodes[k];
            if diff == 0.0 {
                return samples[k];
            }
            let w = weights[k] / diff;
            num += w * samples[k];
            den += w;
        }
        num / den
    };
    let cloud = profile.radial_integral(|r| sphere_mean(&interp, r, d))?;
    Ok(q * q / d - 2.0 * q * v + cloud)
}

/// Compares the quadrature potential of `profile` with `Q/|y|` at each
/// distance and evaluates the neutral-pair combination where the clouds do
/// not overlap.
pub fn newton_cancellation_check(
    profile: &RadialProfile,
    support_radius: f64,
    eval_distances: &[f64],
) -> Result<NewtonReport> {
    profile.validate()?;
    if support_radius < profile.support() {
        return Err(Error::Precondition(format!(
            "declared support {support_radius} is smaller than the profile support {}",
            profile.support()
        )));
    }
    if let Some(d) = eval_distances.iter().find(|d| **d <= support_radius) {
        return Err(Error::Precondition(format!("evaluation point |y| = {d} lies inside the support")));
    }
    let charge = profile.charge()?;
    let mut potentials = Vec::with_capacity(eval_distances.len());
    let mut max_dev: f64 = 0.0;
    for &d in eval_distances {
        let v = shell_potential(profile, d)?;
        let point = charge / d;
        max_dev = max_dev.max((v - point).abs() / point.abs());
        potentials.push((d, v, point));
    }
    let mut pairs = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for &d in eval_distances.iter().filter(|d| **d > 2.0 * support_radius) {
        let c = pair_combination(profile, d)?;
        let scale = charge * charge / d;
        max_ratio = max_ratio.max(c.abs() / scale);
        pairs.push((d, c, scale));
    }
    Ok(NewtonReport { charge, potentials, max_relative_deviation: max_dev, pair_combinations: pairs, max_pair_ratio: max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn coupling_values() {
        let c = DipoleCoupling::new(vec![0.0, 0.0, 1.0], (1, 1)).unwrap();
        assert_eq!(c.value(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]), -2.0);
        assert_eq!(c.value(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), 0.0);
        assert!(DipoleCoupling::new(vec![0.0, 0.0, 1.1], (1, 1)).is_err());
        let two = DipoleCoupling::new(vec![1.0], (2, 1)).unwrap();
        assert_eq!(two.value(&[1.0, 2.0, 3.0]), 1.0 * 3.0 + 2.0 * 3.0);
    }

    #[test]
    fn coupled_gaussian_has_quarter_norm() {
        let g = GridSpec::cartesian(1, 256, 8.0).unwrap();
        let phi = WaveFunction::from_fn(g.clone(), 2, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp())
            .normalized()
            .unwrap();
        let c = DipoleCoupling::new(vec![1.0], (1, 1)).unwrap();
        let b = dipole_coupling_apply(&c, &phi).unwrap();
        assert!((b.norm().powi(2) - 0.25).abs() < 1e-10);
        let wrong = WaveFunction::zeros(g, 3);
        assert!(matches!(dipole_coupling_apply(&c, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unequal_wells_match_two_level_sum() {
        let g = GridSpec::cartesian(1, 256, 8.0).unwrap();
        let s = SolverSettings::default();
        let (w1, w2) = (1.0f64, 1.5f64);
        let r = sigma_coefficient(&AtomSpec::well1d(w1 * w1), &AtomSpec::well1d(w2 * w2), None, &g, &s).unwrap();
        let oracle = (1.0 / (2.0 * w1)) * (1.0 / (2.0 * w2)) / (2.0 * w1 + 2.0 * w2);
        assert!((r.sigma - oracle).abs() < 1e-3, "{} vs {oracle}", r.sigma);
        let swapped = sigma_coefficient(&AtomSpec::well1d(w2 * w2), &AtomSpec::well1d(w1 * w1), None, &g, &s).unwrap();
        assert!((r.sigma - swapped.sigma).abs() < 1e-8);
        let cut = r.cutoff_sigma.unwrap();
        assert!((cut - r.sigma).abs() < 1e-8, "{cut} vs {}", r.sigma);
    }

    #[test]
    fn radial_grids_are_rejected() {
        let h = AtomSpec::new(1, PotentialKind::Coulomb3d, vec![0.0, 0.0, 0.0]);
        let g = GridSpec::radial(64, 20.0).unwrap();
        assert!(matches!(
            sigma_coefficient(&h, &h, None, &g, &SolverSettings::default()),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn direction_check_refuses_one_dimension() {
        let g = GridSpec::cartesian(1, 32, 6.0).unwrap();
        let a = AtomSpec::well1d(1.0);
        let r = direction_invariance_check(&a, &a, &[vec![1.0]], &g, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Inapplicable(_))));
    }

    #[test]
    fn zero_displacements_cancel_at_all_orders() {
        let r = multipole_expand(&[0.0; 3], &[0.0; 3], &[0.0, 0.0, 10.0]).unwrap();
        assert!(r.coefficients_by_order.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn axial_dipoles_give_minus_two_hundredths() {
        let r = multipole_expand(&[0.0, 0.0, 0.1], &[0.0, 0.0, 0.1], &[0.0, 0.0, 10.0]).unwrap();
        assert!((r.coefficients_by_order[3] + 0.02).abs() < 1e-4);
        assert!((r.dipole_value + 0.02).abs() < 1e-15);
    }

    #[test]
    fn low_orders_vanish_for_random_displacements() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let ny = norm3(&y);
            let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm3(&v);
                v.iter().map(|c| c / n * ny / 6.0 * rng.gen_range(0.0..1.0f64)).collect()
            };
            let (zl, zm) = (sample(&mut rng), sample(&mut rng));
            let r = multipole_expand(&zl, &zm, &y).unwrap();
            assert!(r.coefficients_by_order[0].abs() <= 1e-10, "{:?}", r.coefficients_by_order);
            assert!(r.coefficients_by_order[1].abs() <= 1e-10, "{:?}", r.coefficients_by_order);
            assert!((r.coefficients_by_order[3] - r.dipole_value).abs() <= 1e-4);
        }
    }

    #[test]
    fn domain_violation_is_rejected() {
        let r = multipole_expand(&[0.0, 0.0, 2.0], &[0.0; 3], &[0.0, 0.0, 3.0]);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn uniform_ball_acts_as_point_charge() {
        let ball = RadialProfile::UniformBall { radius: 1.0, charge: 1.5 };
        let r = newton_cancellation_check(&ball, 1.0, &[2.0, 2.5]).unwrap();
        assert!((r.charge - 1.5).abs() < 1e-12);
        assert!((r.potentials[0].1 - 0.75).abs() < 1e-6);
        assert!(r.max_relative_deviation < 1e-6);
        assert!(r.max_pair_ratio < 1e-8, "{}", r.max_pair_ratio);
    }

    #[test]
    fn truncated_gaussian_and_inside_points() {
        let g = RadialProfile::TruncatedGaussian { width: 0.5, cutoff: 1.5 };
        let r = newton_cancellation_check(&g, 1.5, &[4.5]).unwrap();
        assert!(r.max_relative_deviation <= 1e-6);
        assert!(matches!(newton_cancellation_check(&g, 1.5, &[1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn tabulated_profile_matches_its_charge() {
        let r: Vec<f64> = (0..=50).map(|k| k as f64 * 0.04).collect();
        let density: Vec<f64> = r.iter().map(|x| (2.0 - x).max(0.0)).collect();
        let p = RadialProfile::Tabulated { r, density };
        // ∫ (2 - r) 4π r² dr over [0, 2] = 16π/3.
        assert!((p.charge().unwrap() - 16.0 * std::f64::consts::PI / 3.0).abs() < 1e-10);
        let rep = newton_cancellation_check(&p, 2.0, &[5.0]).unwrap();
        assert!(rep.max_pair_ratio < 1e-8);
    }
}
