//! Grid-sampled scalar fields, even in the thin direction.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A scalar field sampled on a [`Grid`], even in x_n by construction.
///
/// Fields are immutable in normal use: every operation returns a new field,
/// so they are safe to share across workers.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: vec![0.0; grid.node_count()] }
    }

    /// Sample a function at every node. The function is expected to be even
    /// in x_n; closed forms used throughout evaluate through `|x_n|`, which
    /// makes the sampled field even exactly.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut values = vec![0.0; grid.node_count()];
        for (flat, v) in values.iter_mut().enumerate() {
            *v = f(grid.point(grid.multi(flat)));
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match grid ({} nodes)",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample {bad}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, m: [usize; 3]) -> f64 {
        self.values[self.grid.flat(m)]
    }

    /// Largest deviation from even symmetry across the thin plane.
    pub fn even_symmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let mid = g.mid();
        let ta = g.thin_axis();
        let mut worst = 0.0f64;
        for flat in 0..g.node_count() {
            let m = g.multi(flat);
            if m[ta] > mid {
                let mut mm = m;
                mm[ta] = 2 * mid - m[ta];
                worst = worst.max((self.values[flat] - self.at(mm)).abs());
            }
        }
        worst
    }

    /// Copy the upper half (x_n >= 0) onto the lower half.
    pub fn mirror_even(&mut self) {
        let g = self.grid;
        let mid = g.mid();
        let ta = g.thin_axis();
        for flat in 0..g.node_count() {
            let m = g.multi(flat);
            if m[ta] < mid {
                let mut mm = m;
                mm[ta] = 2 * mid - m[ta];
                self.values[flat] = self.values[g.flat(mm)];
            }
        }
    }

    /// Multilinear interpolation. The point must lie in the grid box
    /// (within a tiny slack, clamped to the box).
    pub fn interp(&self, p: [f64; 3]) -> f64 {
        let g = &self.grid;
        let r = g.resolution();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..g.dim() {
            let t = (p[a] + g.radius()) / g.spacing();
            let t = t.clamp(0.0, (r - 1) as f64);
            let mut i = t.floor() as usize;
            if i >= r - 1 {
                i = r - 2;
            }
            base[a] = i;
            frac[a] = t - i as f64;
        }
        if g.dim() == 2 {
            let [i, j, _] = base;
            let (fx, fy) = (frac[0], frac[1]);
            let v00 = self.at([i, j, 0]);
            let v10 = self.at([i + 1, j, 0]);
            let v01 = self.at([i, j + 1, 0]);
            let v11 = self.at([i + 1, j + 1, 0]);
            v00 * (1.0 - fx) * (1.0 - fy)
                + v10 * fx * (1.0 - fy)
                + v01 * (1.0 - fx) * fy
                + v11 * fx * fy
        } else {
            let [i, j, k] = base;
            let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
            let mut acc = 0.0;
            for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
                for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                    for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
                        acc += self.at([i + di, j + dj, k + dk]) * wx * wy * wz;
                    }
                }
            }
            acc
        }
    }

    pub fn try_interp(&self, p: [f64; 3]) -> Result<f64> {
        if !self.grid.contains_point(p) {
            return Err(Error::OutOfBox(p));
        }
        Ok(self.interp(p))
    }

    /// Cubic Lagrange interpolation on a 4-point stencil per axis (shifted
    /// inside the box near faces). Fourth order on smooth fields; used by
    /// the sphere quadratures, where the multilinear error at small radii
    /// would drown the monotonicity slack.
    pub fn interp_cubic(&self, p: [f64; 3]) -> f64 {
        let g = &self.grid;
        let r = g.resolution();
        let mut base = [0usize; 3];
        let mut wts = [[0.0f64; 4]; 3];
        for a in 0..g.dim() {
            let t = (p[a] + g.radius()) / g.spacing();
            let t = t.clamp(0.0, (r - 1) as f64);
            let mut i = t.floor() as usize;
            if i >= r - 1 {
                i = r - 2;
            }
            // stencil i-1 .. i+2, shifted inside the box
            let lo = (i.max(1) - 1).min(r - 4);
            base[a] = lo;
            let s = t - lo as f64; // in [0, 3]
            let w = &mut wts[a];
            w[0] = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
            w[1] = s * (s - 2.0) * (s - 3.0) / 2.0;
            w[2] = -s * (s - 1.0) * (s - 3.0) / 2.0;
            w[3] = s * (s - 1.0) * (s - 2.0) / 6.0;
        }
        if g.dim() == 2 {
            let mut acc = 0.0;
            for (di, wx) in wts[0].iter().enumerate() {
                for (dj, wy) in wts[1].iter().enumerate() {
                    acc += self.at([base[0] + di, base[1] + dj, 0]) * wx * wy;
                }
            }
            acc
        } else {
            let mut acc = 0.0;
            for (di, wx) in wts[0].iter().enumerate() {
                for (dj, wy) in wts[1].iter().enumerate() {
                    for (dk, wz) in wts[2].iter().enumerate() {
                        acc += self.at([base[0] + di, base[1] + dj, base[2] + dk])
                            * wx
                            * wy
                            * wz;
                    }
                }
            }
            acc
        }
    }

    /// Discrete gradient at a node.
    ///
    /// Central differences in the interior, one-sided at box faces. Along
    /// the thin axis the plane row uses the one-sided difference from above:
    /// even fields have a gradient jump across {x_n = 0} on the contact set,
    /// and the symmetric difference would evaluate the odd part to zero
    /// there, losing the contact energy of the plane slab.
    #[inline]
    pub fn gradient_at(&self, m: [usize; 3]) -> [f64; 3] {
        let g = &self.grid;
        let r = g.resolution();
        let h = g.spacing();
        let mid = g.mid();
        let ta = g.thin_axis();
        let mut grad = [0.0f64; 3];
        for a in 0..g.dim() {
            let i = m[a];
            let (mut lo, mut hi) = (m, m);
            grad[a] = if a == ta && i == mid {
                hi[a] = mid + 1;
                (self.at(hi) - self.at(m)) / h
            } else if i == 0 {
                hi[a] = 1;
                (self.at(hi) - self.at(m)) / h
            } else if i == r - 1 {
                lo[a] = r - 2;
                (self.at(m) - self.at(lo)) / h
            } else {
                lo[a] = i - 1;
                hi[a] = i + 1;
                (self.at(hi) - self.at(lo)) / (2.0 * h)
            };
        }
        grad
    }

    /// Gradient field components (each sampled like [`Self::gradient_at`]).
    ///
    /// The thin component stores the one-sided limit from above on the
    /// plane; interpolate it only at points with x_n >= 0.
    pub fn gradient_fields(&self) -> Vec<ScalarField> {
        let g = self.grid;
        let mut comps: Vec<ScalarField> = (0..g.dim()).map(|_| ScalarField::zeros(g)).collect();
        for flat in 0..g.node_count() {
            let grad = self.gradient_at(g.multi(flat));
            for a in 0..g.dim() {
                comps[a].values[flat] = grad[a];
            }
        }
        comps
    }

    /// Rescaled field u_r(x) = u(x0 + r x) / r^lambda, sampled on the unit
    /// grid (same dimension and resolution, radius 1).
    pub fn rescale(&self, x0: [f64; 3], r: f64, lambda_hom: f64) -> Result<ScalarField> {
        let g = &self.grid;
        let out_grid = Grid::new(g.dim(), g.resolution(), 1.0)?;
        for a in 0..g.dim() {
            if x0[a].abs() + r > g.radius() + 1e-12 {
                return Err(Error::OutOfBox([
                    x0[0] + r.copysign(x0[0].max(1.0)),
                    x0[1],
                    x0[2],
                ]));
            }
        }
        let scale = r.powf(lambda_hom);
        let mut out = ScalarField::zeros(out_grid);
        for flat in 0..out_grid.node_count() {
            let x = out_grid.point(out_grid.multi(flat));
            let mut q = [0.0; 3];
            for a in 0..g.dim() {
                q[a] = x0[a] + r * x[a];
            }
            out.values[flat] = self.interp(q) / scale;
        }
        Ok(out)
    }

    /// The lambda-homogeneous field on the unit grid agreeing with u_r on
    /// the unit sphere: c(x) = |x|^lambda u(x0 + r x/|x|) / r^lambda, with
    /// c(0) = 0 (forced by positive homogeneity).
    pub fn homogeneous_extension(
        &self,
        x0: [f64; 3],
        r: f64,
        lambda_hom: f64,
    ) -> Result<ScalarField> {
        let g = &self.grid;
        if !g.contains_ball(x0, r) {
            return Err(Error::BallNotContained { center: x0, radius: r });
        }
        let out_grid = Grid::new(g.dim(), g.resolution(), 1.0)?;
        let scale = r.powf(lambda_hom);
        let mut out = ScalarField::zeros(out_grid);
        for flat in 0..out_grid.node_count() {
            let x = out_grid.point(out_grid.multi(flat));
            let norm = out_grid.norm(x);
            if norm == 0.0 {
                continue;
            }
            let mut q = [0.0; 3];
            for a in 0..g.dim() {
                q[a] = x0[a] + r * x[a] / norm;
            }
            out.values[flat] = norm.powf(lambda_hom) * self.interp(q) / scale;
        }
        Ok(out)
    }

    /// Strided copy onto a coarser grid sharing this grid's lattice.
    /// `resolution - 1` must be divisible by the stride with even quotient
    /// so the coarse resolution stays odd.
    pub fn decimate(&self, stride: usize) -> Result<ScalarField> {
        let g = &self.grid;
        let n1 = g.resolution() - 1;
        if stride == 0 || n1 % stride != 0 || (n1 / stride) % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "stride {stride} incompatible with resolution {}",
                g.resolution()
            )));
        }
        let coarse = Grid::new(g.dim(), n1 / stride + 1, g.radius())?;
        let mut out = ScalarField::zeros(coarse);
        for flat in 0..coarse.node_count() {
            let m = coarse.multi(flat);
            let fine = [m[0] * stride, m[1] * stride, m[2] * stride];
            out.values[flat] = self.at(fine);
        }
        Ok(out)
    }

    /// Pointwise difference on a shared grid.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// L-infinity distance over nodes inside the unit ball.
    pub fn linf_in_ball(&self, other: &ScalarField, ball_radius: f64) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let g = &self.grid;
        let mut worst = 0.0f64;
        for flat in 0..g.node_count() {
            let p = g.point(g.multi(flat));
            if g.norm(p) < ball_radius {
                worst = worst.max((self.values[flat] - other.values[flat]).abs());
            }
        }
        Ok(worst)
    }
}
