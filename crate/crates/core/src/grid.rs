//! Cubical grids containing the unit ball.
//!
//! Points are carried as `[f64; 3]` with unused trailing components zero;
//! the thin direction x_n is always the last active coordinate (`dim - 1`).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A uniform lattice on the box `[-radius, radius]^dim`.
///
/// The resolution is odd so every coordinate plane `{x_i = 0}` — in
/// particular the thin plane `{x_n = 0}` — is a grid plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    resolution: usize,
    radius: f64,
    spacing: f64,
}

impl Grid {
    /// Build a grid; rejects even resolutions because the thin plane
    /// `{x_n = 0}` must coincide with a grid plane.
    pub fn new(dim: usize, resolution: usize, radius: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        if resolution % 2 == 0 {
            return Err(Error::EvenResolution(resolution));
        }
        if resolution < 17 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        if !(radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
        let spacing = 2.0 * radius / (resolution - 1) as f64;
        Ok(Grid { dim, resolution, radius, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the thin coordinate x_n.
    pub fn thin_axis(&self) -> usize {
        self.dim - 1
    }

    /// Lattice index of the plane `{x_i = 0}` along any axis.
    pub fn mid(&self) -> usize {
        (self.resolution - 1) / 2
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    /// Coordinate of lattice index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.spacing
    }

    /// Flat index of a multi-index (row-major, axis 0 slowest).
    #[inline]
    pub fn flat(&self, m: [usize; 3]) -> usize {
        let r = self.resolution;
        if self.dim == 2 {
            m[0] * r + m[1]
        } else {
            (m[0] * r + m[1]) * r + m[2]
        }
    }

    /// Multi-index of a flat index.
    #[inline]
    pub fn multi(&self, flat: usize) -> [usize; 3] {
        let r = self.resolution;
        if self.dim == 2 {
            [flat / r, flat % r, 0]
        } else {
            [flat / (r * r), (flat / r) % r, flat % r]
        }
    }

    /// Coordinates of a node given by multi-index.
    #[inline]
    pub fn point(&self, m: [usize; 3]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.coord(m[a]);
        }
        p
    }

    /// Euclidean norm of a point restricted to the active dimensions.
    #[inline]
    pub fn norm(&self, p: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim {
            s += p[a] * p[a];
        }
        s.sqrt()
    }

    /// True if the closed ball `B_r(x0)` lies inside the box.
    pub fn contains_ball(&self, x0: [f64; 3], r: f64) -> bool {
        (0..self.dim).all(|a| x0[a].abs() + r <= self.radius + 1e-12)
    }

    /// True if the point lies in the (closed) box.
    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        (0..self.dim).all(|a| p[a].abs() <= self.radius + 1e-12)
    }
}

/// `make_grid` of the public surface: see [`Grid::new`].
pub fn make_grid(dim: usize, resolution: usize, radius: f64) -> Result<Grid> {
    Grid::new(dim, resolution, radius)
}
