use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the number of entries of one tensor-product vector.
pub const DEFAULT_POINT_BUDGET: u128 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Uniform box `[-L, L]^d` per particle, endpoints included, Dirichlet
    /// data outside.
    Cartesian,
    /// s-wave radial grid `r_k = k h`, `k = 1..=n`, `h = r_max / (n + 1)`,
    /// for the reduced function `u = r ψ` with `u(0) = u(r_max) = 0`.
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension per particle (1 or 3); radial grids use 1.
    pub dim: usize,
    pub points: usize,
    /// Half-width `L` of the Cartesian box, or `r_max` for radial grids.
    pub extent: f64,
    pub geometry: Geometry,
}

impl GridSpec {
    pub fn cartesian(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        let g = Self { dim, points, extent: half_width, geometry: Geometry::Cartesian };
        g.validate()?;
        Ok(g)
    }

    pub fn radial(points: usize, r_max: f64) -> Result<Self> {
        let g = Self { dim: 1, points, extent: r_max, geometry: Geometry::Radial };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 8 {
            return Err(Error::Config(format!("grid needs at least 8 points per axis, got {}", self.points)));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::Config(format!("grid extent must be positive, got {}", self.extent)));
        }
        match (self.geometry, self.dim) {
            (Geometry::Cartesian, 1 | 3) | (Geometry::Radial, 1) => Ok(()),
            (g, d) => Err(Error::Config(format!("unsupported {g:?} grid of dimension {d}"))),
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.geometry {
            Geometry::Cartesian => 2.0 * self.extent / (self.points - 1) as f64,
            Geometry::Radial => self.extent / (self.points + 1) as f64,
        }
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        match self.geometry {
            Geometry::Cartesian => -self.extent + k as f64 * self.spacing(),
            Geometry::Radial => (k + 1) as f64 * self.spacing(),
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.coordinate(k)).collect()
    }

    /// Points of the single-particle grid, `points^dim`.
    pub fn particle_points(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Volume element of one particle.
    pub fn particle_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of the single-particle point with flat index `p`.
    pub fn particle_point(&self, mut p: usize, out: &mut [f64]) {
        for a in (0..self.dim).rev() {
            out[a] = self.coordinate(p % self.points);
            p /= self.points;
        }
    }

    pub fn tensor_len(&self, particles: usize) -> u128 {
        (self.particle_points() as u128).pow(particles as u32)
    }

    /// Size of an `particles`-body vector, or an error if it exceeds `budget`.
    pub fn checked_len(&self, particles: usize, budget: u128) -> Result<usize> {
        let required = self.tensor_len(particles);
        if required > budget {
            return Err(Error::GridTooLarge { required, budget });
        }
        Ok(required as usize)
    }
}

/// Shape of an `N`-particle tensor over a [`GridSpec`]; particle 0 is the
/// slowest index.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub grid: GridSpec,
    pub particles: usize,
}

impl Layout {
    pub fn new(grid: GridSpec, particles: usize) -> Self {
        Self { grid, particles }
    }

    pub fn len(&self) -> usize {
        self.grid.tensor_len(self.particles) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axes(&self) -> usize {
        self.particles * self.grid.dim
    }

    /// Stride of Cartesian axis `a` (particle `a / dim`, component `a % dim`).
    pub fn stride(&self, axis: usize) -> usize {
        self.grid.points.pow((self.axes() - 1 - axis) as u32)
    }

    pub fn particle_stride(&self, particle: usize) -> usize {
        self.grid.particle_points().pow((self.particles - 1 - particle) as u32)
    }

    /// Splits a flat index into single-particle indices.
    pub fn split(&self, mut idx: usize, out: &mut [usize]) {
        let np = self.grid.particle_points();
        for p in (0..self.particles).rev() {
            out[p] = idx % np;
            idx /= np;
        }
    }

    pub fn join(&self, parts: &[usize]) -> usize {
        let np = self.grid.particle_points();
        parts.iter().fold(0, |acc, &p| acc * np + p)
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.particle_volume().powi(self.particles as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_grid_hits_both_ends() {
        let g = GridSpec::cartesian(1, 9, 2.0).unwrap();
        assert_eq!(g.coordinates(), vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn radial_grid_excludes_origin_and_edge() {
        let g = GridSpec::radial(9, 5.0).unwrap();
        assert_eq!(g.coordinates()[0], 0.5);
        assert_eq!(g.coordinates()[8], 4.5);
    }

    #[test]
    fn budget_is_enforced() {
        let g = GridSpec::cartesian(3, 64, 5.0).unwrap();
        assert!(matches!(g.checked_len(2, DEFAULT_POINT_BUDGET), Err(Error::GridTooLarge { .. })));
        assert_eq!(g.checked_len(1, DEFAULT_POINT_BUDGET).unwrap(), 64 * 64 * 64);
    }

    #[test]
    fn split_and_join_roundtrip() {
        let g = GridSpec::cartesian(1, 8, 1.0).unwrap();
        let l = Layout::new(g, 3);
        let mut parts = [0; 3];
        for idx in [0, 1, 64, 511] {
            l.split(idx, &mut parts);
            assert_eq!(l.join(&parts), idx);
        }
        assert_eq!(l.stride(0), 64);
    }
}
