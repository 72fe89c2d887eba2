use crate::exec::{self, Exec};
use crate::grid::{GridSpec, Layout};
use crate::{Error, Result};

/// Real coefficients of an `N`-particle function on a tensor grid.
///
/// The discrete L² inner product is `vol * Σ a_k b_k` with `vol` the cell
/// volume; on radial grids the coefficients are samples of `u = r ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    layout: Layout,
    coefficients: Vec<f64>,
    norm_cached: f64,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, particles: usize, coefficients: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(grid, particles);
        if coefficients.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), found: coefficients.len() });
        }
        let norm_cached = (layout.cell_volume() * exec::dot(Exec::Serial, &coefficients, &coefficients)).sqrt();
        Ok(Self { layout, coefficients, norm_cached })
    }

    pub fn zeros(grid: GridSpec, particles: usize) -> Self {
        let n = Layout::new(grid.clone(), particles).len();
        Self::new(grid, particles, vec![0.0; n]).expect("length matches layout")
    }

    /// Samples `f` at every grid point; `f` receives the particle
    /// coordinates flattened as `[x_1.., x_2.., ...]`.
    pub fn from_fn(grid: GridSpec, particles: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let layout = Layout::new(grid.clone(), particles);
        let d = grid.dim;
        let mut parts = vec![0; particles];
        let mut x = vec![0.0; particles * d];
        let coefficients = (0..layout.len())
            .map(|idx| {
                layout.split(idx, &mut parts);
                for (p, &pi) in parts.iter().enumerate() {
                    grid.particle_point(pi, &mut x[p * d..(p + 1) * d]);
                }
                f(&x)
            })
            .collect();
        Self::new(grid, particles, coefficients).expect("length matches layout")
    }

    /// Wraps a vector normalized in the Euclidean coefficient norm, rescaling
    /// it to unit L² norm.
    pub fn from_unit_coefficients(grid: GridSpec, particles: usize, mut v: Vec<f64>) -> Result<Self> {
        let s = 1.0 / Layout::new(grid.clone(), particles).cell_volume().sqrt();
        v.iter_mut().for_each(|c| *c *= s);
        Self::new(grid, particles, v)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.layout.grid
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn particles(&self) -> usize {
        self.layout.particles
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn cell_volume(&self) -> f64 {
        self.layout.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_cached
    }

    pub fn inner(&self, other: &WaveFunction) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.cell_volume() * exec::dot(Exec::Serial, &self.coefficients, &other.coefficients))
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.norm_cached == 0.0 {
            return Err(Error::Precondition("cannot normalize the zero function".into()));
        }
        self.scaled(1.0 / self.norm_cached)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        let c = self.coefficients.iter().map(|x| x * s).collect();
        Self::new(self.grid().clone(), self.particles(), c)
    }

    /// Coefficients rescaled to unit Euclidean norm times the L² norm.
    pub fn euclidean(&self) -> Vec<f64> {
        let s = self.cell_volume().sqrt();
        self.coefficients.iter().map(|c| c * s).collect()
    }

    /// Tensor product `self ⊗ other` with `self`'s particles first.
    pub fn product(&self, other: &WaveFunction) -> Result<Self> {
        if self.grid() != other.grid() {
            return Err(Error::Config("tensor product of functions on different grids".into()));
        }
        let mut c = Vec::with_capacity(self.len() * other.len());
        for &a in &self.coefficients {
            c.extend(other.coefficients.iter().map(|b| a * b));
        }
        Self::new(self.grid().clone(), self.particles() + other.particles(), c)
    }

    pub fn check_same_shape(&self, other: &WaveFunction) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cache_matches_weighted_sum() {
        let g = GridSpec::cartesian(1, 64, 6.0).unwrap();
        let w = WaveFunction::from_fn(g, 1, |x| (-x[0] * x[0] / 2.0).exp());
        let expected = std::f64::consts::PI.sqrt().sqrt();
        assert!((w.norm() - expected).abs() < 1e-10);
        assert!((w.normalized().unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_orders_particles() {
        let g = GridSpec::cartesian(1, 8, 1.0).unwrap();
        let f = WaveFunction::from_fn(g.clone(), 1, |x| x[0]);
        let h = WaveFunction::from_fn(g.clone(), 1, |x| 1.0 + x[0] * x[0]);
        let fh = f.product(&h).unwrap();
        let direct = WaveFunction::from_fn(g, 2, |x| x[0] * (1.0 + x[1] * x[1]));
        assert_eq!(fh.coefficients(), direct.coefficients());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = GridSpec::cartesian(1, 8, 1.0).unwrap();
        assert!(matches!(WaveFunction::new(g, 2, vec![0.0; 8]), Err(Error::DimensionMismatch { .. })));
    }
}
