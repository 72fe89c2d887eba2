use serde::{Deserialize, Serialize};

use crate::fit::linear_fit;
use crate::grid::{Geometry, GridSpec};
use crate::wave::WaveFunction;
use crate::{Error, Result};

/// One-electron marginal density on the single-particle grid.
///
/// On radial grids `values` is the radial probability density `|u|²`
/// (integrating to one over `dr`); [`Density::spherical`] converts it to the
/// 3D density `|u|² / (4π r²)`.
#[derive(Clone, Debug)]
pub struct Density {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Density {
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.particle_volume()
    }

    pub fn spherical(&self) -> Vec<f64> {
        let r = self.grid.coordinates();
        self.values.iter().zip(&r).map(|(p, r)| p / (4.0 * std::f64::consts::PI * r * r)).collect()
    }
}

/// `ρ(x) = ∫ |Ψ(x, x_2, …)|² dx_2 …` for electron `electron`, by the
/// grid quadrature with uniform weights (the trapezoid rule for data that
/// vanish at the boundary).
pub fn one_electron_density(psi: &WaveFunction, electron: usize) -> Result<Density> {
    let n = psi.particles();
    if electron >= n {
        return Err(Error::Config(format!("electron {electron} out of range for {n} particles")));
    }
    let layout = psi.layout();
    let np = psi.grid().particle_points();
    let mut values = vec![0.0; np];
    let mut parts = vec![0; n];
    for (idx, c) in psi.coefficients().iter().enumerate() {
        layout.split(idx, &mut parts);
        values[parts[electron]] += c * c;
    }
    let w = psi.cell_volume() / psi.grid().particle_volume();
    values.iter_mut().for_each(|v| *v *= w);
    Ok(Density { grid: psi.grid().clone(), values })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Exponential rate of the density, `ρ ~ e^{-θ r}`.
    pub fitted_rate: f64,
    /// Rate of the amplitude, `θ / 2`.
    pub amplitude_rate: f64,
    /// Combes–Thomas rate `sqrt(E_{i,1} - E_i)` for the amplitude, if known.
    pub theoretical_bound: Option<f64>,
    pub fit_window: (f64, f64),
    pub rms_log_error: f64,
    /// Log-density bends downward (Gaussian-like tail).
    pub superexponential: bool,
    pub exceeds_bound: bool,
    pub warnings: Vec<String>,
}

/// Relative density below which samples are treated as numerical noise.
const DENSITY_FLOOR: f64 = 1e-22;

/// Fits `log ρ(r) = a - θ r` over the tail of electron 0's density, with
/// `r` the distance from `center`.
pub fn fit_decay_rate(psi: &WaveFunction, center: &[f64], bound: Option<f64>) -> Result<DecayFit> {
    let rho = one_electron_density(psi, 0)?;
    let grid = psi.grid();
    let (r, d): (Vec<f64>, Vec<f64>) = match grid.geometry {
        Geometry::Radial => (grid.coordinates(), rho.spherical()),
        Geometry::Cartesian => {
            if center.len() != grid.dim {
                return Err(Error::DimensionMismatch { expected: grid.dim, found: center.len() });
            }
            let mut x = vec![0.0; grid.dim];
            let r = (0..grid.particle_points())
                .map(|p| {
                    grid.particle_point(p, &mut x);
                    x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                })
                .collect();
            (r, rho.values.clone())
        }
    };
    let reach = match grid.geometry {
        Geometry::Radial => grid.extent,
        Geometry::Cartesian => center.iter().map(|c| grid.extent - c.abs()).fold(f64::INFINITY, f64::min),
    };
    let r_cap = 0.8 * reach;
    let (imax, dmax) = d.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if dmax <= 0.0 {
        return Err(Error::Precondition("density vanishes identically".into()));
    }
    let r_peak = r[imax];
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut underflow = false;
    for (&ri, &di) in r.iter().zip(&d) {
        if ri <= r_peak || ri > r_cap || di > 1e-2 * dmax {
            continue;
        }
        if di < DENSITY_FLOOR * dmax {
            underflow = true;
            continue;
        }
        xs.push(ri);
        ys.push(di.ln());
    }
    if underflow {
        warnings.push("density underflows before the box margin; window shrunk".into());
    }
    if xs.len() < 4 {
        return Err(Error::Precondition(format!("only {} samples in the tail window", xs.len())));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (_, slope, rms) = linear_fit(&xs, &ys);
    let fitted_rate = -slope;
    // Compare slopes on the inner and outer halves of the window.
    let mid = 0.5 * (lo + hi);
    let half = |outer: bool| {
        let (x, y): (Vec<f64>, Vec<f64>) =
            xs.iter().zip(&ys).filter(|(x, _)| (**x > mid) == outer).map(|(x, y)| (*x, *y)).unzip();
        if x.len() >= 2 {
            -linear_fit(&x, &y).1
        } else {
            fitted_rate
        }
    };
    let superexponential = half(true) > 1.2 * half(false);
    let amplitude_rate = 0.5 * fitted_rate;
    let exceeds_bound = superexponential || bound.is_some_and(|b| amplitude_rate > 1.05 * b);
    Ok(DecayFit {
        fitted_rate,
        amplitude_rate,
        theoretical_bound: bound,
        fit_window: (lo, hi),
        rms_log_error: rms,
        superexponential,
        exceeds_bound,
        warnings,
    })
}

/// Amplitude decay bound `sqrt(E_{i,1} - E_i)` from an ionization step;
/// `None` when the step is not positive.
pub fn combes_thomas_bound(e_ion: f64, e_atom: f64) -> Option<f64> {
    let gap = e_ion - e_atom;
    (gap > 0.0).then(|| gap.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_full_hamiltonian;
    use crate::model::{AtomSpec, PairInteraction, PotentialKind, SystemConfig};
    use crate::spectral::{ground_state, SolverSettings};
    use rand::{Rng, SeedableRng};

    #[test]
    fn product_density_is_the_first_factor() {
        let g = GridSpec::cartesian(1, 32, 5.0).unwrap();
        let f = WaveFunction::from_fn(g.clone(), 1, |x| (-x[0] * x[0]).exp()).normalized().unwrap();
        let h = WaveFunction::from_fn(g.clone(), 1, |x| (-(x[0] - 1.0).powi(2)).exp()).normalized().unwrap();
        let rho = one_electron_density(&f.product(&h).unwrap(), 0).unwrap();
        for (r, c) in rho.values.iter().zip(f.coefficients()) {
            assert!((r - c * c).abs() < 1e-14);
        }
    }

    #[test]
    fn random_density_integrates_to_one() {
        let g = GridSpec::cartesian(1, 16, 3.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c: Vec<f64> = (0..16usize.pow(3)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let psi = WaveFunction::new(g, 3, c).unwrap().normalized().unwrap();
        for e in 0..3 {
            assert!((one_electron_density(&psi, e).unwrap().integral() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn oscillator_density_is_even() {
        let cfg = SystemConfig::neutral(vec![AtomSpec::well1d(1.0)], PairInteraction::Dipole { prefactor: 0.0 }).unwrap();
        let g = GridSpec::cartesian(1, 201, 8.0).unwrap();
        let h = build_full_hamiltonian(&cfg, &g).unwrap();
        let gs = ground_state(&h, &SolverSettings::default()).unwrap();
        let psi = WaveFunction::from_unit_coefficients(g, 1, gs.eigenvectors[0].clone()).unwrap();
        let rho = one_electron_density(&psi, 0).unwrap();
        let n = rho.values.len();
        for k in 0..n {
            assert!((rho.values[k] - rho.values[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn exponential_rate_is_recovered() {
        let alpha = 0.8;
        let g = GridSpec::cartesian(1, 801, 20.0).unwrap();
        let psi = WaveFunction::from_fn(g, 1, |x| (-alpha * x[0].abs()).exp()).normalized().unwrap();
        let fit = fit_decay_rate(&psi, &[0.0], None).unwrap();
        assert!((fit.fitted_rate - 2.0 * alpha).abs() < 0.01 * 2.0 * alpha);
        assert!(!fit.superexponential);
    }

    #[test]
    fn hydrogen_amplitude_decays_at_one_half() {
        let cfg = SystemConfig::neutral(
            vec![AtomSpec::new(1, PotentialKind::Coulomb3d, vec![0.0, 0.0, 0.0])],
            PairInteraction::Coulomb,
        )
        .unwrap();
        let g = GridSpec::radial(1000, 40.0).unwrap();
        let h = build_full_hamiltonian(&cfg, &g).unwrap();
        let gs = ground_state(&h, &SolverSettings::default()).unwrap();
        let psi = WaveFunction::from_unit_coefficients(g, 1, gs.eigenvectors[0].clone()).unwrap();
        let bound = combes_thomas_bound(0.0, gs.ground_energy());
        let fit = fit_decay_rate(&psi, &[0.0], bound).unwrap();
        assert!((fit.amplitude_rate - 0.5).abs() < 0.025, "{}", fit.amplitude_rate);
        assert!(!fit.exceeds_bound);
    }

    #[test]
    fn oscillator_tail_is_superexponential() {
        let cfg = SystemConfig::neutral(vec![AtomSpec::well1d(1.0)], PairInteraction::Dipole { prefactor: 0.0 }).unwrap();
        let g = GridSpec::cartesian(1, 256, 8.0).unwrap();
        let h = build_full_hamiltonian(&cfg, &g).unwrap();
        let gs = ground_state(&h, &SolverSettings::default()).unwrap();
        let psi = WaveFunction::from_unit_coefficients(g, 1, gs.eigenvectors[0].clone()).unwrap();
        let fit = fit_decay_rate(&psi, &[0.0], combes_thomas_bound(0.0, gs.ground_energy())).unwrap();
        assert!(fit.superexponential);
        assert!(fit.exceeds_bound);
    }
}
