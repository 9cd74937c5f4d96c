//! Quadrature: sphere samplings, partial-cell ball integrals, H1 products.
//!
//! Ball integrals use the dual-cell rule: each node owns a cell of volume
//! h^dim weighted by its fraction inside the ball. The fraction is the mean
//! over the 2^dim subcell centers of a linear ramp in the signed distance to
//! the sphere (width one subcell). The ramp is exact for flat interfaces, is
//! second order against the curved sphere, and varies smoothly in r, which
//! the monotonicity diagnostics rely on.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Quadrature nodes with weights on a sphere `∂B_r(x0)`.
///
/// n=2: uniformly spaced angles (offset half a step so no node lies on the
/// thin plane). n=3: Gauss-Legendre latitudes times uniform longitudes with
/// the polar axis along x_n. Nodes are reflected into {x_n >= 0}; every
/// integrand in this artifact is even in x_n, for which this is exact and
/// keeps one-sided gradient interpolation valid near the plane.
pub struct SphereSampling {
    pub center: [f64; 3],
    pub radius: f64,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Default quality parameter; doubling it refines smooth-integrand results
/// at order >= 2.
pub const DEFAULT_SPHERE_QUALITY: usize = 1;

impl SphereSampling {
    pub fn new(dim: usize, center: [f64; 3], radius: f64, quality: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        if !(radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
        let q = quality.max(1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            let m = 720 * q;
            let w = 2.0 * std::f64::consts::PI * radius / m as f64;
            for k in 0..m {
                let theta = (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / m as f64;
                let (s, c) = theta.sin_cos();
                nodes.push([center[0] + radius * c, center[1] + radius * s.abs(), 0.0]);
                weights.push(w);
            }
        } else {
            let lat = 48 * q; // even, so no latitude sits on the plane
            let lon = 96 * q;
            let (mu, wl) = gauss_legendre(lat);
            let wphi = 2.0 * std::f64::consts::PI / lon as f64;
            for (m_k, w_k) in mu.iter().zip(&wl) {
                let rho = (1.0 - m_k * m_k).sqrt();
                for j in 0..lon {
                    let phi = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / lon as f64;
                    let (sp, cp) = phi.sin_cos();
                    nodes.push([
                        center[0] + radius * rho * cp,
                        center[1] + radius * rho * sp,
                        center[2] + radius * m_k.abs(),
                    ]);
                    weights.push(w_k * wphi * radius * radius);
                }
            }
        }
        Ok(SphereSampling { center, radius, nodes, weights })
    }

    /// Total weight; equals the sphere measure to machine precision.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut([f64; 3]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Newton from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Fraction of the dual cell at `p` (side `h`) inside `B_r(x0)`.
#[inline]
fn cell_fraction(dim: usize, p: [f64; 3], x0: [f64; 3], r: f64, h: f64) -> f64 {
    let mut d2 = 0.0;
    for a in 0..dim {
        let t = p[a] - x0[a];
        d2 += t * t;
    }
    let d = d2.sqrt();
    if d <= r - h {
        return 1.0;
    }
    if d >= r + h {
        return 0.0;
    }
    let hs = 0.5 * h; // subcell side
    let off = 0.25 * h;
    let mut acc = 0.0;
    let corners = 1usize << dim;
    for c in 0..corners {
        let mut q2 = 0.0;
        for a in 0..dim {
            let s = if c >> a & 1 == 1 { off } else { -off };
            let t = p[a] + s - x0[a];
            q2 += t * t;
        }
        acc += (0.5 + (r - q2.sqrt()) / hs).clamp(0.0, 1.0);
    }
    acc / corners as f64
}

/// Visit every node whose cell meets `B_r(x0)` in lattice order, passing the
/// flat index, multi-index, node point and quadrature weight (cell volume
/// times inside fraction).
pub fn for_each_ball_node(
    grid: &Grid,
    x0: [f64; 3],
    r: f64,
    mut f: impl FnMut(usize, [usize; 3], [f64; 3], f64),
) {
    let h = grid.spacing();
    let dim = grid.dim();
    let cell = h.powi(dim as i32);
    let lo_hi = |a: usize| {
        let lo = ((x0[a] - r - h + grid.radius()) / h).floor().max(0.0) as usize;
        let hi = (((x0[a] + r + h + grid.radius()) / h).ceil() as usize).min(grid.resolution() - 1);
        (lo, hi)
    };
    let (l0, h0) = lo_hi(0);
    let (l1, h1) = lo_hi(1);
    if dim == 2 {
        for i in l0..=h0 {
            for j in l1..=h1 {
                let m = [i, j, 0];
                let p = grid.point(m);
                let frac = cell_fraction(2, p, x0, r, h);
                if frac > 0.0 {
                    f(grid.flat(m), m, p, frac * cell);
                }
            }
        }
    } else {
        let (l2, h2) = lo_hi(2);
        for i in l0..=h0 {
            for j in l1..=h1 {
                for k in l2..=h2 {
                    let m = [i, j, k];
                    let p = grid.point(m);
                    let frac = cell_fraction(3, p, x0, r, h);
                    if frac > 0.0 {
                        f(grid.flat(m), m, p, frac * cell);
                    }
                }
            }
        }
    }
}

/// Integrate `f(flat_index, node_point)` over `B_r(x0)` with the cell rule.
/// Accumulation order is the lattice order, so results are deterministic.
pub fn ball_integral(
    grid: &Grid,
    x0: [f64; 3],
    r: f64,
    mut f: impl FnMut(usize, [f64; 3]) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for_each_ball_node(grid, x0, r, |flat, _, p, w| acc += w * f(flat, p));
    acc
}

fn check_ball(u: &ScalarField, x0: [f64; 3], r: f64) -> Result<()> {
    if !u.grid().contains_ball(x0, r) {
        return Err(Error::BallNotContained { center: x0, radius: r });
    }
    if r < 4.0 * u.grid().spacing() {
        return Err(Error::InvalidInput(format!(
            "radius {r} below 4 spacings ({})",
            4.0 * u.grid().spacing()
        )));
    }
    Ok(())
}

/// D^{x0}(r) = ∫_{B_r(x0)} |∇u|^2.
pub fn dirichlet_energy(u: &ScalarField, x0: [f64; 3], r: f64) -> Result<f64> {
    check_ball(u, x0, r)?;
    let grid = *u.grid();
    let mut acc = 0.0;
    for_each_ball_node(&grid, x0, r, |_, m, _, w| {
        let grad = u.gradient_at(m);
        let mut s = 0.0;
        for a in 0..grid.dim() {
            s += grad[a] * grad[a];
        }
        acc += w * s;
    });
    Ok(acc)
}

/// H^{x0}(r) = ∫_{∂B_r(x0)} u^2 dH^{n-1}, by cubic interpolation onto the
/// sphere sampling (multilinear error at small radii would dominate the
/// monotonicity diagnostics).
pub fn boundary_mass(u: &ScalarField, x0: [f64; 3], r: f64) -> Result<f64> {
    boundary_mass_with_quality(u, x0, r, DEFAULT_SPHERE_QUALITY)
}

pub fn boundary_mass_with_quality(
    u: &ScalarField,
    x0: [f64; 3],
    r: f64,
    quality: usize,
) -> Result<f64> {
    check_ball(u, x0, r)?;
    let s = SphereSampling::new(u.grid().dim(), x0, r, quality)?;
    Ok(s.integrate(|p| {
        let v = u.interp_cubic(p);
        v * v
    }))
}

/// H1(B_1) inner product: ∫_{B_1} (u v + ∇u · ∇v), same cell rule as the
/// Dirichlet energy.
pub fn h1_inner(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *u.grid();
    if !grid.contains_ball([0.0; 3], 1.0) {
        return Err(Error::BallNotContained { center: [0.0; 3], radius: 1.0 });
    }
    let mut acc = 0.0;
    for_each_ball_node(&grid, [0.0; 3], 1.0, |flat, m, _, w| {
        let gu = u.gradient_at(m);
        let gv = v.gradient_at(m);
        let mut s = u.values()[flat] * v.values()[flat];
        for a in 0..grid.dim() {
            s += gu[a] * gv[a];
        }
        acc += w * s;
    });
    Ok(acc)
}

pub fn h1_norm(u: &ScalarField) -> Result<f64> {
    Ok(h1_inner(u, u)?.max(0.0).sqrt())
}

/// Weiss boundary adjusted energy
/// W_λ^{x0}(r, u) = D(r)/r^{n+2λ-2} - λ H(r)/r^{n+2λ-1}.
pub fn weiss_energy(u: &ScalarField, x0: [f64; 3], r: f64, lambda: f64) -> Result<f64> {
    let n = u.grid().dim() as f64;
    let d = dirichlet_energy(u, x0, r)?;
    let h = boundary_mass(u, x0, r)?;
    Ok(d / r.powf(n + 2.0 * lambda - 2.0) - lambda * h / r.powf(n + 2.0 * lambda - 1.0))
}

/// The unscaled boundary adjusted energy 𝒢_λ(u) = W_λ(1, u).
pub fn adjusted_energy(u: &ScalarField, lambda: f64) -> Result<f64> {
    let d = dirichlet_energy(u, [0.0; 3], 1.0)?;
    let h = boundary_mass(u, [0.0; 3], 1.0)?;
    Ok(d - lambda * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn sphere_weights_sum_to_measure() {
        let s = SphereSampling::new(2, [0.1, 0.0, 0.0], 0.5, 1).unwrap();
        assert_relative_eq!(s.total_weight(), PI, max_relative = 1e-12);
        let s = SphereSampling::new(3, [0.0; 3], 0.7, 1).unwrap();
        assert_relative_eq!(s.total_weight(), 4.0 * PI * 0.49, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(int, 2.0 / 11.0, max_relative = 1e-10);
    }

    #[test]
    fn dirichlet_energy_of_constant_is_zero() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |_| 3.7);
        assert_abs_diff_eq!(dirichlet_energy(&u, [0.0; 3], 0.5).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dirichlet_energy_of_linear_field() {
        // |∇x_1|^2 = 1, so D(0.5) is the disk area
        let g = make_grid(2, 257, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |p| p[0]);
        let d = dirichlet_energy(&u, [0.0; 3], 0.5).unwrap();
        assert_abs_diff_eq!(d, PI * 0.25, epsilon = 5e-3);
    }

    #[test]
    fn boundary_mass_of_constant() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |_| 1.0);
        let h = boundary_mass(&u, [0.0; 3], 0.5).unwrap();
        assert_abs_diff_eq!(h, PI, epsilon = 1e-3);
    }

    #[test]
    fn boundary_mass_of_thin_coordinate() {
        // ∫_0^{2π} sin^2 θ dθ = π on the unit circle
        let g = make_grid(2, 257, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |p| p[1]);
        let h = boundary_mass(&u, [0.0; 3], 1.0).unwrap();
        assert_abs_diff_eq!(h, PI, epsilon = 1e-3);
    }

    #[test]
    fn ball_not_contained_is_rejected() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let u = crate::field::ScalarField::zeros(g);
        assert!(dirichlet_energy(&u, [0.9, 0.0, 0.0], 0.5).is_err());
        assert!(boundary_mass(&u, [0.0; 3], 1.2).is_err());
    }

    #[test]
    fn h1_inner_is_symmetric_positive() {
        let g = make_grid(2, 33, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |p| (p[0] * 2.0).sin() + p[1] * p[1]);
        let v = crate::field::ScalarField::from_fn(g, |p| p[0] - 0.3 * p[1] * p[1]);
        let uv = h1_inner(&u, &v).unwrap();
        let vu = h1_inner(&v, &u).unwrap();
        assert_eq!(uv, vu, "summation is symmetric term by term");
        assert!(h1_inner(&u, &u).unwrap() > 0.0);
        let z = crate::field::ScalarField::zeros(g);
        assert_eq!(h1_inner(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn h1_inner_grid_mismatch() {
        let a = crate::field::ScalarField::zeros(make_grid(2, 33, 1.0).unwrap());
        let b = crate::field::ScalarField::zeros(make_grid(2, 65, 1.0).unwrap());
        assert!(h1_inner(&a, &b).is_err());
    }

    #[test]
    fn ball_integral_area() {
        // f = 1 integrates to the disk area at second order
        for (res, tol) in [(129usize, 4e-4), (257, 1e-4)] {
            let g = make_grid(2, res, 1.0).unwrap();
            let area = ball_integral(&g, [0.0; 3], 0.8, |_, _| 1.0);
            assert_abs_diff_eq!(area, PI * 0.64, epsilon = tol);
        }
    }

    #[test]
    fn dirichlet_energy_of_cone_matches_polar_oracle() {
        // independent high-order oracle: Gauss-Legendre in the radius times
        // uniform angles of the closed-form |∇h|^2 (the integrand is
        // homogeneous of degree 1, so the oracle converges fast)
        use crate::profiles::{eval_grad_h, eval_h};
        let e1 = [1.0, 0.0, 0.0];
        let r = 0.5;
        let (ts, ws) = gauss_legendre(64);
        let m = 2048;
        let mut oracle = 0.0;
        for (t, w) in ts.iter().zip(&ws) {
            let rho = 0.5 * r * (t + 1.0);
            for k in 0..m {
                let theta = (k as f64 + 0.5) * 2.0 * PI / m as f64;
                let x = [rho * theta.cos(), rho * theta.sin(), 0.0];
                let g = eval_grad_h(e1, x, 2);
                oracle += w * 0.5 * r * (2.0 * PI / m as f64) * rho * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        let grid = make_grid(2, 513, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(grid, |x| eval_h(e1, x, 2));
        let d = dirichlet_energy(&u, [0.0; 3], r).unwrap();
        assert_relative_eq!(d, oracle, max_relative = 3e-3);
    }

    #[test]
    fn cone_boundary_mass_scales_with_homogeneity() {
        // H(r) = r^{n+2} H(1) for the 3/2-homogeneous profile
        use crate::profiles::eval_h;
        let g = make_grid(2, 257, 1.0).unwrap();
        let u = crate::field::ScalarField::from_fn(g, |x| eval_h([1.0, 0.0, 0.0], x, 2));
        let h1 = boundary_mass(&u, [0.0; 3], 0.9).unwrap() / 0.9f64.powi(4);
        for r in [0.3f64, 0.6] {
            let h = boundary_mass(&u, [0.0; 3], r).unwrap();
            assert_relative_eq!(h, h1 * r.powi(4), max_relative = 2e-4);
        }
    }

    #[test]
    fn refinement_order_at_least_three_halves() {
        // Richardson check on three resolutions with a smooth integrand
        use crate::field::ScalarField;
        let f = |x: [f64; 3]| (1.3 * x[0]).cos() * (0.9 * x[1]).cos() + x[0] * x[1];
        let mut d_err = Vec::new();
        let mut h_err = Vec::new();
        // converged references from the finest grid
        let fine = make_grid(2, 1025, 1.0).unwrap();
        let uf = ScalarField::from_fn(fine, f);
        let d_ref = dirichlet_energy(&uf, [0.0; 3], 0.7).unwrap();
        let h_ref = boundary_mass(&uf, [0.0; 3], 0.7).unwrap();
        for res in [65usize, 129, 257] {
            let g = make_grid(2, res, 1.0).unwrap();
            let u = ScalarField::from_fn(g, f);
            d_err.push((dirichlet_energy(&u, [0.0; 3], 0.7).unwrap() - d_ref).abs());
            h_err.push((boundary_mass(&u, [0.0; 3], 0.7).unwrap() - h_ref).abs());
        }
        for errs in [d_err, h_err] {
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= 1.5, "observed order {order}: errors {errs:?}");
            }
        }
    }

    #[test]
    fn doubling_sphere_quality_refines_at_second_order() {
        // smooth even integrand evaluated directly on the sampling: both
        // qualities sit on the exact value, so their difference is tiny
        let f = |p: [f64; 3]| {
            let v = p[0] * p[0] + 0.5 * p[1] * p[1];
            v * v
        };
        for dim in [2usize, 3] {
            let s1 = SphereSampling::new(dim, [0.0; 3], 0.5, 1).unwrap();
            let s2 = SphereSampling::new(dim, [0.0; 3], 0.5, 2).unwrap();
            let (i1, i2) = (s1.integrate(f), s2.integrate(f));
            assert_relative_eq!(i1, i2, max_relative = 1e-10);
        }
    }
}
