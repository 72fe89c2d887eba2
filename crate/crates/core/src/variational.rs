//! The explicit test function `ψ̃_b = Ψ_b - Σ_{k<l} χ_{kl} R^⊥_{kl} I_{kl} Ψ_b`
//! and the Rayleigh-quotient upper bound on the interaction energy.

use serde::{Deserialize, Serialize};

use crate::dispersion::ClusterSymmetry;
use crate::exec;
use crate::feshbach::{build_cutoff_product, embed_factors, smooth_cutoff, CutoffState};
use crate::grid::{GridSpec, Layout};
use crate::hamiltonian::{build_decomposed_hamiltonian, build_full_hamiltonian_with, build_interaction};
use crate::model::{Decomposition, SystemConfig};
use crate::operator::LinearOperator;
use crate::spectral::{solve_projected, Complement, Projector, SolverSettings};
use crate::symmetry::Antisymmetrizer;
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCorrection {
    pub pair: (usize, usize),
    /// `‖χ_{kl} R^⊥_{kl} I_{kl} Ψ_b‖`.
    pub norm: f64,
    pub cg_residual: f64,
    /// `‖R^⊥_{kl} I_{kl} Ψ_b‖` before the cutoff.
    pub uncut_norm: f64,
}

/// Terms of `⟨ψ̃, (H - E(∞)) ψ̃⟩` with `ψ̃ = Ψ - C` and `H = H_b + I_b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `⟨Ψ, (H - E(∞)) Ψ⟩`.
    pub diagonal: f64,
    /// `-2 ⟨I_b Ψ, C⟩`.
    pub cross: f64,
    /// `⟨C, (H_b - E(∞)) C⟩ - 2 ⟨(H_b - E(∞)) Ψ, C⟩`.
    pub d1: f64,
    /// `⟨C, I_b C⟩`.
    pub d2: f64,
    /// `|(diagonal + cross + d1 + d2)/‖ψ̃‖² - quotient|`.
    pub identity_defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFunctionResult {
    /// `⟨ψ̃, (H - E(∞)) ψ̃⟩ / ‖ψ̃‖²`.
    pub rayleigh_quotient: f64,
    pub norm_squared: f64,
    pub correction_norms: Vec<PairCorrection>,
    /// `|⟨Ψ_b, ψ̃_b - Ψ_b⟩|`.
    pub orthogonality_defect: f64,
    /// `max |χ_{kl} - 1|` on the support of `Ψ_b`.
    pub cutoff_defect: f64,
    /// `⟨Ψ_b, (H - E(∞)) Ψ_b⟩`, the bound from the bare product.
    pub bare_bound: f64,
    pub e_infinity: f64,
    pub terms: BoundTerms,
    /// `⟨C_{kl}, (H - E(∞)) C_{mn}⟩` for distinct pairs.
    pub cross_terms: Vec<((usize, usize), (usize, usize), f64)>,
    /// Rayleigh quotient of `Q_N ψ̃` for fermionic real-space systems.
    pub antisymmetrized_quotient: Option<f64>,
    /// `ψ̃` in Euclidean coefficients (not normalized).
    #[serde(skip)]
    pub state: Vec<f64>,
}

struct PairSolution {
    pair: (usize, usize),
    /// Correction embedded in the full space, cutoff applied.
    full: Vec<f64>,
    uncut_norm: f64,
    residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `R^⊥_{kl} I_{kl} (ψ_k ⊗ ψ_l)` on the pair space `(B_k, B_l)`.
fn pair_correction(
    cfg: &SystemConfig,
    b: &Decomposition,
    cut: &CutoffState,
    (k, l): (usize, usize),
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, f64)> {
    let (zk, zl) = (b.clusters[k].len(), b.clusters[l].len());
    let sub = SystemConfig {
        atoms: vec![cfg.atoms[k].clone(), cfg.atoms[l].clone()],
        electrons: zk + zl,
        interaction: cfg.interaction,
    };
    let sd = sub.canonical_decomposition()?;
    let h0 = build_decomposed_hamiltonian(&sub, &sd, grid)?.with_exec(settings.exec);
    let inter = build_interaction(&sub, &sd, grid)?;
    let (na, nb) = (Layout::new(grid.clone(), zk).len(), Layout::new(grid.clone(), zl).len());
    let phi = crate::operator::kron(&cut.atom_states[k], &cut.atom_states[l]);
    let qk = if zk > 1 { Some(Antisymmetrizer::new(grid, zk)?) } else { None };
    let ql = if zl > 1 { Some(Antisymmetrizer::new(grid, zl)?) } else { None };
    let symmetry = ClusterSymmetry { left: qk.as_ref(), right: ql.as_ref(), na, nb };
    let complement = Complement::of(&phi);
    let projector = PairComplement { symmetry: &symmetry, complement: &complement };
    let mut rhs = inter.apply(&phi);
    projector.project(&mut rhs);
    let lambda = cut.atom_energies[k] + cut.atom_energies[l];
    let sol = solve_projected(&h0, &projector, lambda, &rhs, None, settings).map_err(|e| match e {
        Error::Indefinite { curvature } => Error::Gap(format!(
            "pair ({k}, {l}): E_k + E_l is not below the complement spectrum (curvature {curvature:.3e})"
        )),
        other => other,
    })?;
    Ok((sol.x, sol.relative_residual))
}

struct PairComplement<'a> {
    symmetry: &'a ClusterSymmetry<'a>,
    complement: &'a Complement,
}

impl Projector for PairComplement<'_> {
    fn project(&self, x: &mut [f64]) {
        self.symmetry.project(x);
        self.complement.project(x);
    }
}

/// `χ_{kl}(x) = Π_{e ∈ B_k ∪ B_l} χ_{2R}(x_e - y_{owner(e)})` on the full grid,
/// or `None` when no cutoff is in use.
fn pair_cutoff(cfg: &SystemConfig, b: &Decomposition, pair: (usize, usize), radius: Option<f64>, grid: &GridSpec) -> Option<Vec<f64>> {
    let r = radius?;
    let chi = smooth_cutoff(2.0 * r);
    let n = b.electrons();
    let owners = b.owners();
    let layout = Layout::new(grid.clone(), n);
    let np = grid.particle_points();
    let mut x = vec![0.0; grid.dim];
    let mut table = vec![vec![0.0; np]; cfg.atoms.len()];
    for (atom, row) in table.iter_mut().enumerate() {
        for (p, v) in row.iter_mut().enumerate() {
            grid.particle_point(p, &mut x);
            let d: Vec<f64> = x.iter().zip(&cfg.atoms[atom].position).map(|(a, b)| a - b).collect();
            *v = chi.at(&d);
        }
    }
    let mut parts = vec![0; n];
    Some(
        (0..layout.len())
            .map(|idx| {
                layout.split(idx, &mut parts);
                (0..n)
                    .filter(|&e| owners[e] == pair.0 || owners[e] == pair.1)
                    .map(|e| table[owners[e]][parts[e]])
                    .product()
            })
            .collect(),
    )
}

/// Builds `ψ̃_b` for the atomic decomposition `b`; `radius` selects the atom
/// cutoff as in [`build_cutoff_product`].
pub fn build_test_function(
    cfg: &SystemConfig,
    b: &Decomposition,
    grid: &GridSpec,
    settings: &SolverSettings,
    radius: Option<f64>,
) -> Result<TestFunctionResult> {
    let cut = build_cutoff_product(cfg, b, grid, settings, radius)?;
    let n = b.electrons();
    let m = b.clusters.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|k| (k + 1..m).map(move |l| (k, l))).collect();
    let base = cut.base_state.euclidean();
    let support: Vec<bool> = base.iter().map(|c| *c != 0.0).collect();
    let solved = exec::map(settings.exec, &pairs, |&pair| -> Result<(PairSolution, f64)> {
        let (x, residual) = pair_correction(cfg, b, &cut, pair, grid, settings)?;
        let (k, l) = pair;
        let mut pair_electrons = b.clusters[k].clone();
        pair_electrons.extend(&b.clusters[l]);
        let mut factors: Vec<(&[usize], &[f64])> = vec![(&pair_electrons, &x)];
        for (i, c) in b.clusters.iter().enumerate() {
            if i != k && i != l {
                factors.push((c.as_slice(), cut.atom_states[i].as_slice()));
            }
        }
        let mut full = embed_factors(grid, n, &factors)?;
        let mut defect: f64 = 0.0;
        if let Some(chi) = pair_cutoff(cfg, b, pair, cut.cutoff_radius, grid) {
            for ((f, c), s) in full.iter_mut().zip(&chi).zip(&support) {
                *f *= c;
                if *s {
                    defect = defect.max((1.0 - c).abs());
                }
            }
        }
        Ok((PairSolution { pair, full, uncut_norm: norm(&x), residual }, defect))
    });
    let mut corrections = Vec::with_capacity(pairs.len());
    let mut cutoff_defect: f64 = 0.0;
    for s in solved {
        let (p, d) = s?;
        cutoff_defect = cutoff_defect.max(d);
        corrections.push(p);
    }
    evaluate(cfg, b, grid, settings, cut, base, corrections, cutoff_defect)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    cfg: &SystemConfig,
    b: &Decomposition,
    grid: &GridSpec,
    settings: &SolverSettings,
    cut: CutoffState,
    base: Vec<f64>,
    corrections: Vec<PairSolution>,
    cutoff_defect: f64,
) -> Result<TestFunctionResult> {
    let ex = settings.exec;
    let e_inf = cut.e_infinity();
    let h = build_full_hamiltonian_with(cfg, grid, ex)?;
    let hb = build_decomposed_hamiltonian(cfg, b, grid)?.with_exec(ex);
    let ib = build_interaction(cfg, b, grid)?;
    let mut c = vec![0.0; base.len()];
    for p in &corrections {
        exec::axpy(ex, 1.0, &p.full, &mut c);
    }
    let psi: Vec<f64> = base.iter().zip(&c).map(|(a, b)| a - b).collect();
    let norm_squared = exec::dot(ex, &psi, &psi);
    let shifted = |op: &dyn LinearOperator, v: &[f64]| {
        let mut y = op.apply(v);
        exec::axpy(ex, -e_inf, v, &mut y);
        y
    };
    let quotient = exec::dot(ex, &psi, &shifted(&h, &psi)) / norm_squared;
    let bare_bound = exec::dot(ex, &base, &shifted(&h, &base)) / exec::dot(ex, &base, &base);

    let i_base = ib.apply(&base);
    let hb_base = shifted(&hb, &base);
    let diagonal = exec::dot(ex, &base, &hb_base) + exec::dot(ex, &base, &i_base);
    let cross = -2.0 * exec::dot(ex, &i_base, &c);
    let d1 = exec::dot(ex, &c, &shifted(&hb, &c)) - 2.0 * exec::dot(ex, &hb_base, &c);
    let d2 = exec::dot(ex, &c, &ib.apply(&c));
    let identity_defect = ((diagonal + cross + d1 + d2) / norm_squared - quotient).abs();

    let mut cross_terms = Vec::new();
    for (i, p) in corrections.iter().enumerate() {
        if corrections.len() < 2 {
            break;
        }
        let hp = shifted(&h, &p.full);
        for q in corrections.iter().skip(i + 1) {
            cross_terms.push((p.pair, q.pair, exec::dot(ex, &hp, &q.full)));
        }
    }
    let antisymmetrized_quotient = if !cfg.is_drude() && b.electrons() > 1 {
        let q = Antisymmetrizer::new(grid, b.electrons())?;
        let v = q.apply(&psi);
        Some(exec::dot(ex, &v, &shifted(&h, &v)) / exec::dot(ex, &v, &v))
    } else {
        None
    };
    Ok(TestFunctionResult {
        rayleigh_quotient: quotient,
        norm_squared,
        correction_norms: corrections
            .iter()
            .map(|p| PairCorrection { pair: p.pair, norm: norm(&p.full), cg_residual: p.residual, uncut_norm: p.uncut_norm })
            .collect(),
        orthogonality_defect: exec::dot(ex, &base, &c).abs(),
        cutoff_defect,
        bare_bound,
        e_infinity: e_inf,
        terms: BoundTerms { diagonal, cross, d1, d2, identity_defect },
        cross_terms,
        antisymmetrized_quotient,
        state: psi,
    })
}

/// Upper bound on `W(y)` from the canonical decomposition's test function.
pub fn rayleigh_upper_bound(cfg: &SystemConfig, grid: &GridSpec, settings: &SolverSettings) -> Result<TestFunctionResult> {
    let b = cfg.canonical_decomposition()?;
    build_test_function(cfg, &b, grid, settings, None)
}
