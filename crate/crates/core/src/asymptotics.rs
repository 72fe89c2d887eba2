//! Interaction-energy sweeps over separation or coupling and power-law fits
//! `W ≈ -c/R^p + d/R^q`.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Exec};
use crate::feshbach::feshbach_energy;
use crate::fit::{levenberg_marquardt, linear_fit};
use crate::grid::GridSpec;
use crate::hamiltonian::build_full_hamiltonian_with;
use crate::model::{AtomSpec, PairInteraction, SystemConfig};
use crate::spectral::{low_spectrum, SolverSettings};
use crate::stability::ion_ground;
use crate::symmetry::FermionSectorOperator;
use crate::variational::rayleigh_upper_bound;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Dense,
    Feshbach,
    Variational,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 3] = [SweepMethod::Dense, SweepMethod::Feshbach, SweepMethod::Variational];

    pub fn tag(self) -> &'static str {
        match self {
            SweepMethod::Dense => "dense",
            SweepMethod::Feshbach => "feshbach",
            SweepMethod::Variational => "variational",
        }
    }
}

/// How an abscissa turns into a two-atom configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SweepTemplate {
    /// Drude pair with coupling `λ`; fits recast it as `R = λ^{-1/3}`.
    Coupling { strengths: (f64, f64) },
    /// Two atoms at `∓R/2` on the first (1D) or last (3D) axis.
    Separation { atoms: (AtomSpec, AtomSpec), interaction: PairInteraction },
}

impl SweepTemplate {
    pub fn drude(s1: f64, s2: f64) -> Self {
        SweepTemplate::Coupling { strengths: (s1, s2) }
    }

    pub fn config(&self, x: f64) -> Result<SystemConfig> {
        match self {
            SweepTemplate::Coupling { strengths } => {
                if !(x > 0.0) {
                    return Err(Error::Config(format!("coupling must be positive, got {x}")));
                }
                SystemConfig::drude_pair(strengths.0, strengths.1, x)
            }
            SweepTemplate::Separation { atoms, interaction } => {
                if !(x > 0.0) {
                    return Err(Error::Config(format!("separation must be positive, got {x}")));
                }
                let place = |a: &AtomSpec, s: f64| {
                    let mut a = a.clone();
                    let d = a.potential.dim().unwrap_or(a.position.len()).max(1);
                    a.position = vec![0.0; d];
                    a.position[d - 1] = s * x / 2.0;
                    a
                };
                SystemConfig::neutral(vec![place(&atoms.0, -1.0), place(&atoms.1, 1.0)], *interaction)
            }
        }
    }

    pub fn is_coupling(&self) -> bool {
        matches!(self, SweepTemplate::Coupling { .. })
    }

    /// Separation corresponding to abscissa `x`.
    pub fn separation(&self, x: f64) -> f64 {
        if self.is_coupling() {
            x.powf(-1.0 / 3.0)
        } else {
            x
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodSeries {
    pub method: SweepMethod,
    /// `W` per abscissa; `None` where the method failed.
    pub values: Vec<Option<f64>>,
    /// Eigen residual (dense), `|E - F(E)|` (feshbach) or largest CG
    /// residual of the corrections (variational).
    pub residuals: Vec<f64>,
    pub errors: Vec<Option<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub grid: GridSpec,
    pub tolerance: f64,
    pub dense_cutoff: usize,
    pub abscissa: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub template: SweepTemplate,
    pub abscissae: Vec<f64>,
    pub series: Vec<MethodSeries>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn series(&self, method: SweepMethod) -> Option<&MethodSeries> {
        self.series.iter().find(|s| s.method == method)
    }

    pub fn failures(&self) -> usize {
        self.series.iter().map(|s| s.errors.iter().filter(|e| e.is_some()).count()).sum()
    }

    /// Rows `(abscissa, method, W, residual)`, abscissa-major.
    pub fn rows(&self) -> Vec<(f64, SweepMethod, Option<f64>, f64)> {
        let mut out = Vec::new();
        for (k, &x) in self.abscissae.iter().enumerate() {
            for s in &self.series {
                out.push((x, s.method, s.values[k], s.residuals[k]));
            }
        }
        out
    }

    /// Points where `dense ≤ variational` fails by more than `slack`, or
    /// `|dense - feshbach| > feshbach_tolerance`.
    pub fn sandwich_violations(&self, slack: f64, feshbach_tolerance: f64) -> Vec<String> {
        let mut out = Vec::new();
        let Some(dense) = self.series(SweepMethod::Dense) else {
            return out;
        };
        for (k, &x) in self.abscissae.iter().enumerate() {
            let Some(w) = dense.values[k] else { continue };
            if let Some(Some(v)) = self.series(SweepMethod::Variational).map(|s| s.values[k]) {
                if v < w - slack {
                    out.push(format!("abscissa {x}: variational {v} below dense {w}"));
                }
            }
            if let Some(Some(f)) = self.series(SweepMethod::Feshbach).map(|s| s.values[k]) {
                if (f - w).abs() > feshbach_tolerance {
                    out.push(format!("abscissa {x}: feshbach {f} differs from dense {w} by {:.3e}", (f - w).abs()));
                }
            }
        }
        out
    }
}

/// `W = E - E(∞)` from the full Hamiltonian (the fermionic sector for
/// real-space systems with several electrons), with the eigen residual.
pub fn dense_interaction_energy(cfg: &SystemConfig, grid: &GridSpec, settings: &SolverSettings) -> Result<(f64, f64)> {
    let h = build_full_hamiltonian_with(cfg, grid, settings.exec)?;
    let r = if !cfg.is_drude() && cfg.electrons > 1 {
        low_spectrum(&FermionSectorOperator::new(&h)?, 1, settings)?
    } else {
        low_spectrum(&h, 1, settings)?
    };
    let e_inf = cfg
        .atoms
        .iter()
        .map(|a| ion_ground(a, a.charge as usize, grid, settings).map(|e| e.0))
        .sum::<Result<f64>>()?;
    Ok((r.eigenvalues[0] - e_inf, r.residual_norms[0]))
}

fn evaluate(method: SweepMethod, cfg: &SystemConfig, grid: &GridSpec, settings: &SolverSettings) -> Result<(f64, f64)> {
    match method {
        SweepMethod::Dense => dense_interaction_energy(cfg, grid, settings),
        SweepMethod::Feshbach => {
            let (r, _) = feshbach_energy(cfg, grid, settings, None, false)?;
            let w = r.interaction_energy.ok_or_else(|| Error::Incomplete("E(∞) unavailable".into()))?;
            Ok((w, r.residual))
        }
        SweepMethod::Variational => {
            let r = rayleigh_upper_bound(cfg, grid, settings)?;
            let res = r.correction_norms.iter().map(|c| c.cg_residual).fold(0.0, f64::max);
            Ok((r.antisymmetrized_quotient.unwrap_or(r.rayleigh_quotient), res))
        }
    }
}

/// Evaluates every method at every abscissa. Failures are recorded per
/// point and do not stop the sweep.
pub fn run_sweep(
    template: &SweepTemplate,
    abscissae: &[f64],
    methods: &[SweepMethod],
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<SweepResult> {
    settings.validate()?;
    if abscissae.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("abscissae must be strictly increasing".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no sweep methods requested".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let inner = SolverSettings { exec: Exec::Serial, ..settings.clone() };
    let outcomes: Vec<Vec<Result<(f64, f64)>>> = exec::map(settings.exec, abscissae, |&x| {
        let cfg = template.config(x).and_then(|c| c.check_grid(grid).map(|_| c));
        methods
            .iter()
            .map(|&m| match &cfg {
                Ok(c) => evaluate(m, c, grid, &inner),
                Err(e) => Err(Error::Config(e.to_string())),
            })
            .collect()
    });
    let series = methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut s = MethodSeries { method, values: Vec::new(), residuals: Vec::new(), errors: Vec::new() };
            for point in &outcomes {
                match &point[j] {
                    Ok((w, r)) => {
                        s.values.push(Some(*w));
                        s.residuals.push(*r);
                        s.errors.push(None);
                    }
                    Err(e) => {
                        s.values.push(None);
                        s.residuals.push(f64::NAN);
                        s.errors.push(Some(e.to_string()));
                    }
                }
            }
            s
        })
        .collect();
    Ok(SweepResult {
        template: template.clone(),
        abscissae: abscissae.to_vec(),
        series,
        metadata: SweepMetadata {
            grid: grid.clone(),
            tolerance: settings.tolerance,
            dense_cutoff: settings.dense_cutoff,
            abscissa: if template.is_coupling() { "lambda".into() } else { "R".into() },
        },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    /// Points with the largest `|W|` left out of the fit.
    pub drop_strongest: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { drop_strongest: 2 }
    }
}

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub method: Option<SweepMethod>,
    /// `p` in `W ≈ -c/R^p`.
    pub exponent: f64,
    pub coefficient: f64,
    /// `q` in `W + c/R^p ≈ d/R^q`.
    pub remainder_exponent: Option<f64>,
    pub remainder_coefficient: Option<f64>,
    /// RMS of the log-space misfit of the reported model.
    pub fit_residual: f64,
    /// Plain log-log line, before the remainder is modelled.
    pub loglog_exponent: f64,
    pub loglog_coefficient: f64,
    pub loglog_residual: f64,
    /// Separations used, ascending.
    pub window: Vec<f64>,
}

/// Fits a sweep series, recasting couplings to separations.
pub fn fit_power_law(sweep: &SweepResult, method: SweepMethod, options: &FitOptions) -> Result<PowerLawFit> {
    let s = sweep
        .series(method)
        .ok_or_else(|| Error::Incomplete(format!("sweep has no {} series", method.tag())))?;
    let mut points = Vec::new();
    for (k, &x) in sweep.abscissae.iter().enumerate() {
        match s.values[k] {
            Some(w) => points.push((sweep.template.separation(x), w)),
            None => {
                return Err(Error::Incomplete(format!("{} failed at abscissa {x}", method.tag())));
            }
        }
    }
    let mut fit = fit_points(&points, options)?;
    fit.method = Some(method);
    Ok(fit)
}

/// Fits `(R, W)` pairs. All `W` in the window must be negative.
pub fn fit_points(points: &[(f64, f64)], options: &FitOptions) -> Result<PowerLawFit> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    let pts: Vec<(f64, f64)> = {
        let mut kept: Vec<_> = pts.into_iter().skip(options.drop_strongest).collect();
        kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        kept
    };
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Incomplete(format!(
            "{} points in the fit window, need at least {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 < 0.0)) {
        return Err(Error::Repulsive { abscissa: p.0 });
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| (-p.1).ln()).collect();
    let (a, b, rms) = linear_fit(&x, &y);
    let (p0, c0) = (-b, a.exp());
    let mut fit = PowerLawFit {
        method: None,
        exponent: p0,
        coefficient: c0,
        remainder_exponent: None,
        remainder_coefficient: None,
        fit_residual: rms,
        loglog_exponent: p0,
        loglog_coefficient: c0,
        loglog_residual: rms,
        window: pts.iter().map(|p| p.0).collect(),
    };
    // A pure power law leaves nothing to model; four parameters on four
    // points would interpolate.
    if rms < 1e-12 || pts.len() <= MIN_FIT_POINTS {
        return Ok(fit);
    }
    let model = |q: &[f64], r: f64| -q[0].exp() * r.powf(-q[1]) + q[2] * r.powf(-(q[1] + q[3].exp()));
    let residuals = |q: &[f64]| -> Vec<f64> { pts.iter().map(|&(r, w)| (model(q, r) - w) / w.abs()).collect() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for gap in [0.5, 1.0, 2.0, 4.0, 6.0] {
        let q = p0 + gap;
        // d from the line through the log-log residual at this q.
        let rem: Vec<f64> = pts.iter().map(|&(r, w)| w + c0 * r.powf(-p0)).collect();
        let num: f64 = pts.iter().zip(&rem).map(|(&(r, w), e)| e * r.powf(-q) / (w * w)).sum();
        let den: f64 = pts.iter().map(|&(r, w)| r.powf(-2.0 * q) / (w * w)).sum();
        let start = [c0.ln(), p0, num / den, gap.ln()];
        let out = levenberg_marquardt(&residuals, &start, 500);
        if out.cost.is_finite() && best.as_ref().map_or(true, |b| out.cost < b.0) {
            best = Some((out.cost, out.params));
        }
    }
    if let Some((cost, q)) = best {
        let joint_rms = (2.0 * cost / pts.len() as f64).sqrt();
        if joint_rms < rms {
            fit.exponent = q[1];
            fit.coefficient = q[0].exp();
            fit.remainder_exponent = Some(q[1] + q[3].exp());
            fit.remainder_coefficient = Some(q[2]);
            fit.fit_residual = joint_rms;
        }
    }
    Ok(fit)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectionFit {
    /// Slope of `ln|W + σλ²|` against `ln λ`.
    pub exponent: f64,
    /// `W / (-σλ²)` per abscissa.
    pub ratios: Vec<f64>,
    pub residual: f64,
}

/// Fits the deviation of a coupling sweep from the second-order law
/// `-σλ²`.
pub fn second_order_correction(sweep: &SweepResult, method: SweepMethod, sigma: f64) -> Result<CorrectionFit> {
    if !sweep.template.is_coupling() {
        return Err(Error::Inapplicable("second-order correction fits need a coupling sweep".into()));
    }
    let s = sweep
        .series(method)
        .ok_or_else(|| Error::Incomplete(format!("sweep has no {} series", method.tag())))?;
    let (mut x, mut y, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &l) in sweep.abscissae.iter().enumerate() {
        let w = s.values[k].ok_or_else(|| Error::Incomplete(format!("{} failed at λ = {l}", method.tag())))?;
        let lead = -sigma * l * l;
        ratios.push(w / lead);
        x.push(l.ln());
        y.push((w - lead).abs().ln());
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Incomplete("too few points for a correction fit".into()));
    }
    let (_, slope, rms) = linear_fit(&x, &y);
    Ok(CorrectionFit { exponent: slope, ratios, residual: rms })
}

/// Log-log slope (in `R`) of `variational - dense`, the decay of the upper
/// bound's excess.
pub fn bound_excess_exponent(sweep: &SweepResult) -> Result<f64> {
    let (d, v) = match (sweep.series(SweepMethod::Dense), sweep.series(SweepMethod::Variational)) {
        (Some(d), Some(v)) => (d, v),
        _ => return Err(Error::Incomplete("need dense and variational series".into())),
    };
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, &a) in sweep.abscissae.iter().enumerate() {
        if let (Some(w), Some(b)) = (d.values[k], v.values[k]) {
            if b - w > 0.0 {
                x.push(sweep.template.separation(a).ln());
                y.push((b - w).ln());
            }
        }
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Incomplete("too few points with a positive bound excess".into()));
    }
    Ok(-linear_fit(&x, &y).1)
}

/// `n` equally spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(ws: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        linspace(4.0, 20.0, 10).into_iter().map(|r| (r, ws(r))).collect()
    }

    #[test]
    fn pure_power_law() {
        let sigma = 1.0 / 16.0;
        let f = fit_points(&synthetic(|r| -sigma / r.powi(6)), &FitOptions::default()).unwrap();
        assert!((f.exponent - 6.0).abs() < 1e-3);
        assert!((f.coefficient - sigma).abs() < 1e-3 * sigma);
        assert!(f.remainder_exponent.is_none());
        assert_eq!(f.window.len(), 8);
    }

    #[test]
    fn remainder_exponent_is_recovered() {
        let sigma = 1.0 / 16.0;
        let f = fit_points(&synthetic(|r| -sigma / r.powi(6) + 0.05 / r.powi(7)), &FitOptions::default()).unwrap();
        let q = f.remainder_exponent.unwrap();
        assert!((q - 7.0).abs() < 0.1, "{f:?}");
        assert!((f.exponent - 6.0).abs() < 1e-3);
    }

    #[test]
    fn sign_change_is_repulsive() {
        let pts = synthetic(|r| -1.0 / r.powi(6) + 1e-3 / r.powi(2));
        assert!(matches!(fit_points(&pts, &FitOptions::default()), Err(Error::Repulsive { .. })));
        let few = &synthetic(|r| -1.0 / r.powi(6))[..5];
        assert!(matches!(fit_points(few, &FitOptions::default()), Err(Error::Incomplete(_))));
    }

    #[test]
    fn zero_coupling_sweep() {
        let g = GridSpec::cartesian(1, 24, 5.0).unwrap();
        let t = SweepTemplate::Separation {
            atoms: (AtomSpec::well1d(1.0), AtomSpec::well1d(1.0)),
            interaction: PairInteraction::Dipole { prefactor: 0.0 },
        };
        let s = run_sweep(&t, &[2.0, 3.0, 4.0], &SweepMethod::ALL, &g, &SolverSettings::default()).unwrap();
        assert_eq!(s.failures(), 0);
        for series in &s.series {
            for w in &series.values {
                assert!(w.unwrap().abs() < 1e-10, "{:?} {w:?}", series.method);
            }
        }
    }

    #[test]
    fn drude_sweep_matches_normal_modes() {
        let g = GridSpec::cartesian(1, 40, 6.0).unwrap();
        let lambdas = linspace(0.05, 0.4, 8);
        let s = run_sweep(&SweepTemplate::drude(1.0, 1.0), &lambdas, &SweepMethod::ALL, &g, &SolverSettings::default())
            .unwrap();
        assert_eq!(s.failures(), 0);
        let dense = s.series(SweepMethod::Dense).unwrap();
        for (k, &l) in lambdas.iter().enumerate() {
            let exact = (1.0 + l / 2.0).sqrt() + (1.0 - l / 2.0).sqrt() - 2.0;
            assert!((dense.values[k].unwrap() - exact).abs() < 2e-4);
        }
        assert!(s.sandwich_violations(1e-10, 1e-8).is_empty(), "{:?}", s.sandwich_violations(1e-10, 1e-8));
        assert_eq!(s.rows().len(), 24);
    }

    #[test]
    fn bad_abscissae_are_rejected() {
        let g = GridSpec::cartesian(1, 24, 5.0).unwrap();
        let r = run_sweep(&SweepTemplate::drude(1.0, 1.0), &[0.2, 0.1], &[SweepMethod::Dense], &g, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Config(_))));
        let s = run_sweep(&SweepTemplate::drude(1.0, 1.0), &[-0.1, 0.1], &[SweepMethod::Dense], &g, &SolverSettings::default())
            .unwrap();
        assert!(s.series[0].errors[0].is_some() && s.series[0].values[1].is_some());
    }
}
