//! Closed-form homogeneous solutions and their tangent fields.
//!
//! The 3/2-homogeneous profile attached to a unit direction e in the thin
//! plane is
//!
//!   h_e(x) = sqrt(2) Re[(x̂·e + i|x_n|)^{3/2}]
//!          = (2 s - sqrt(s^2 + t^2)) sqrt(sqrt(s^2 + t^2) + s),
//!
//! with s = x̂·e, t = x_n and the branch chosen so the trace on {x_n = 0}
//! is nonnegative. It vanishes on the half plane {x_n = 0, s <= 0}, is
//! harmonic off the thin plane, and its one-sided normal derivative there is
//! -(3/sqrt 2)|s|^{1/2} on {s < 0} and 0 on {s >= 0}.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use serde::{Deserialize, Serialize};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Re[(s + i|t|)^k] on the closed upper half plane (principal branch).
#[inline]
pub fn halfplane_power(s: f64, t: f64, k: f64) -> f64 {
    let rho = s.hypot(t);
    if rho == 0.0 {
        return 0.0;
    }
    let theta = t.abs().atan2(s);
    rho.powf(k) * (k * theta).cos()
}

/// (rho + s, rho - s) computed without cancellation: the ill-signed branch
/// goes through (rho + s)(rho - s) = t^2.
#[inline]
fn stable_splits(s: f64, t: f64) -> (f64, f64) {
    let rho = (s * s + t * t).sqrt();
    let rps = if s >= 0.0 { rho + s } else { t * t / (rho - s) };
    let rms = if s <= 0.0 { rho - s } else { t * t / (rho + s) };
    (rps, rms)
}

/// h_e evaluated through the direction's scalar coordinates (s, t), by the
/// algebraic form (cheaper than the complex power in hot loops; the test
/// suite pins agreement of the two forms).
#[inline]
pub fn cone_profile(s: f64, t: f64) -> f64 {
    let rho = (s * s + t * t).sqrt();
    let (rps, _) = stable_splits(s, t);
    (2.0 * s - rho) * rps.sqrt()
}

/// Gradient of h in the (s, t) chart; the t component is the one-sided
/// limit from above when t = 0. Closed algebraic form:
/// ∂_s h = (3/2) sqrt(rho + s), ∂_t h = -(3/2) sign(t) sqrt(rho - s).
#[inline]
pub fn cone_profile_grad(s: f64, t: f64) -> (f64, f64) {
    let (rps, rms) = stable_splits(s, t);
    let ds = 1.5 * rps.sqrt();
    let dt_upper = -1.5 * rms.sqrt();
    // even in t: the t derivative is odd
    if t < 0.0 {
        (ds, -dt_upper)
    } else {
        (ds, dt_upper)
    }
}

#[inline]
fn split(e: [f64; 3], x: [f64; 3], dim: usize) -> (f64, f64) {
    let mut s = 0.0;
    for a in 0..dim - 1 {
        s += x[a] * e[a];
    }
    (s, x[dim - 1])
}

/// h_e(x) for a unit direction e in the thin plane.
pub fn eval_h(e: [f64; 3], x: [f64; 3], dim: usize) -> f64 {
    let (s, t) = split(e, x, dim);
    cone_profile(s, t)
}

/// Complex-power form of h_e; the two printed forms must agree and the test
/// suite pins that.
pub fn eval_h_complex(e: [f64; 3], x: [f64; 3], dim: usize) -> f64 {
    let (s, t) = split(e, x, dim);
    SQRT2 * halfplane_power(s, t, 1.5)
}

/// ∇h_e(x); the thin component carries the one-sided limit from above on
/// the plane.
pub fn eval_grad_h(e: [f64; 3], x: [f64; 3], dim: usize) -> [f64; 3] {
    let (s, t) = split(e, x, dim);
    let (ds, dt) = cone_profile_grad(s, t);
    let mut g = [0.0; 3];
    for a in 0..dim - 1 {
        g[a] = ds * e[a];
    }
    g[dim - 1] = dt;
    g
}

/// One-sided normal derivative of h_e on the thin plane:
/// 0 where x̂·e >= 0 and -(3/sqrt2)|x̂·e|^{1/2} where x̂·e < 0.
pub fn normal_derivative_h(e: [f64; 3], x_hat: [f64; 3], dim: usize) -> f64 {
    let (s, _) = split(e, x_hat, dim);
    if s >= 0.0 {
        0.0
    } else {
        -(3.0 / SQRT2) * s.abs().sqrt()
    }
}

/// Tangent field v_{e,ξ}(x) = (x̂·ξ) sqrt(sqrt(s^2 + t^2) + s).
pub fn eval_tangent(e: [f64; 3], xi: [f64; 3], x: [f64; 3], dim: usize) -> f64 {
    let (s, t) = split(e, x, dim);
    let mut xdotxi = 0.0;
    for a in 0..dim - 1 {
        xdotxi += x[a] * xi[a];
    }
    let (rps, _) = stable_splits(s, t);
    xdotxi * rps.sqrt()
}

/// ∇v_{e,ξ}; one-sided from above on the plane, zero at the ridge where the
/// closed form degenerates (integrable singularity).
pub fn eval_grad_tangent(e: [f64; 3], xi: [f64; 3], x: [f64; 3], dim: usize) -> [f64; 3] {
    let (s, t) = split(e, x, dim);
    let mut xdotxi = 0.0;
    for a in 0..dim - 1 {
        xdotxi += x[a] * xi[a];
    }
    let rho = s.hypot(t);
    let (rps, _) = stable_splits(s, t);
    let w = rps.sqrt();
    let mut g = [0.0; 3];
    if rho < 1e-300 {
        return g;
    }
    // d/ds sqrt(rho + s) = w / (2 rho); d/dt = t / (2 rho w)
    let dws = w / (2.0 * rho);
    for a in 0..dim - 1 {
        g[a] = xi[a] * w + xdotxi * e[a] * dws;
    }
    if w > 1e-12 {
        g[dim - 1] = xdotxi * t / (2.0 * rho * w);
    } else if s < 0.0 {
        // ridge limit from above: t/(2 rho w) -> 1/sqrt(2|s|)
        g[dim - 1] = xdotxi / (2.0 * s.abs()).sqrt();
    }
    g
}

/// Closed-form evaluable fields used by cone projections.
pub trait AnalyticField {
    fn eval(&self, x: [f64; 3]) -> f64;
    fn grad(&self, x: [f64; 3]) -> [f64; 3];
}

pub struct ConeField {
    pub e: [f64; 3],
    pub dim: usize,
}

impl AnalyticField for ConeField {
    fn eval(&self, x: [f64; 3]) -> f64 {
        eval_h(self.e, x, self.dim)
    }
    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        eval_grad_h(self.e, x, self.dim)
    }
}

pub struct TangentField {
    pub e: [f64; 3],
    pub xi: [f64; 3],
    pub dim: usize,
}

impl AnalyticField for TangentField {
    fn eval(&self, x: [f64; 3]) -> f64 {
        eval_tangent(self.e, self.xi, x, self.dim)
    }
    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        eval_grad_tangent(self.e, self.xi, x, self.dim)
    }
}

/// A point of the 3/2-homogeneous blowup cone: lambda * h_e.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub lambda: f64,
    pub e: [f64; 3],
}

impl BlowupProfile {
    pub fn new(lambda: f64, e: [f64; 3], dim: usize) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::InvalidInput(format!("amplitude must be >= 0, got {lambda}")));
        }
        if e[dim - 1] != 0.0 {
            return Err(Error::InvalidInput("direction must lie in the thin plane".into()));
        }
        let mut norm2 = 0.0;
        for c in e.iter().take(dim) {
            norm2 += c * c;
        }
        if (norm2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "direction must be unit length, |e| = {}",
                norm2.sqrt()
            )));
        }
        Ok(BlowupProfile { lambda, e })
    }

    /// Direction at a given angle inside the thin plane (n=3), or the sign
    /// convention e = ±e_1 (n=2, where only the angles 0 and 180° exist).
    pub fn direction_from_angle(dim: usize, angle_rad: f64) -> [f64; 3] {
        if dim == 2 {
            [if angle_rad.cos() >= 0.0 { 1.0 } else { -1.0 }, 0.0, 0.0]
        } else {
            [angle_rad.cos(), angle_rad.sin(), 0.0]
        }
    }

    pub fn eval(&self, x: [f64; 3], dim: usize) -> f64 {
        self.lambda * eval_h(self.e, x, dim)
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        let (lambda, e, dim) = (self.lambda, self.e, grid.dim());
        ScalarField::from_fn(grid, move |x| lambda * eval_h(e, x, dim))
    }
}

/// Orthonormal basis of {e, e_n}^⊥ inside the thin plane (n - 2 vectors).
pub fn transverse_directions(e: [f64; 3], dim: usize) -> Vec<[f64; 3]> {
    if dim == 2 {
        Vec::new()
    } else {
        vec![[-e[1], e[0], 0.0]]
    }
}

/// Basis of the tangent space to the blowup cone at lambda h_e:
/// the field h_e (amplitude direction) plus v_{e,ξ} for the transverse ξ.
pub fn tangent_basis32(e: [f64; 3], grid: Grid) -> Vec<ScalarField> {
    let dim = grid.dim();
    let mut out = vec![ScalarField::from_fn(grid, move |x| eval_h(e, x, dim))];
    for xi in transverse_directions(e, dim) {
        out.push(ScalarField::from_fn(grid, move |x| eval_tangent(e, xi, x, dim)));
    }
    out
}

/// The same basis as closed-form fields.
pub fn tangent_profiles(e: [f64; 3], dim: usize) -> Vec<Box<dyn AnalyticField>> {
    let mut out: Vec<Box<dyn AnalyticField>> = vec![Box::new(ConeField { e, dim })];
    for xi in transverse_directions(e, dim) {
        out.push(Box::new(TangentField { e, xi, dim }));
    }
    out
}

/// Frequencies of the exact two-dimensional homogeneous solutions:
/// 2m - 1/2 for the half-odd family and 2m for the even family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyKind {
    HalfOdd { m: usize },
    Even { m: usize },
}

impl FrequencyKind {
    pub fn exponent(&self) -> f64 {
        match self {
            FrequencyKind::HalfOdd { m } => 2.0 * *m as f64 - 0.5,
            FrequencyKind::Even { m } => 2.0 * *m as f64,
        }
    }
}

/// Exact homogeneous solutions in the plane, used as solver ground truth:
/// the even extension of Re[(x_1 + i|x_2|)^k] with the branch giving a
/// nonnegative thin trace. The half-odd family has k = 2m - 1/2 (the branch
/// with nonpositive contact slope); the even family are the harmonic
/// polynomials Re[(x_1 + i x_2)^{2m}].
pub fn exact_profile_2d(kind: FrequencyKind, x: [f64; 3]) -> Result<f64> {
    match kind {
        FrequencyKind::HalfOdd { m } | FrequencyKind::Even { m } if m == 0 => {
            Err(Error::UnsupportedProfile("m must be >= 1".into()))
        }
        _ => Ok(halfplane_power(x[0], x[1], kind.exponent())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const E1: [f64; 3] = [1.0, 0.0, 0.0];

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(eval_h(E1, [1.0, 0.0, 0.0], 2), SQRT2, max_relative = 1e-14);
        assert_abs_diff_eq!(eval_h(E1, [-1.0, 0.0, 0.0], 2), 0.0, epsilon = 1e-14);
        // at the thin axis: sqrt2 Re(i^{3/2}) = -1
        assert_relative_eq!(eval_h(E1, [0.0, 1.0, 0.0], 2), -1.0, max_relative = 1e-14);
        assert_relative_eq!(eval_h(E1, [0.0, 0.0, 1.0], 3), -1.0, max_relative = 1e-14);
    }

    #[test]
    fn two_printed_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            let e = if dim == 2 {
                E1
            } else {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [a.cos(), a.sin(), 0.0]
            };
            for _ in 0..500 {
                let x = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    if dim == 3 { rng.gen_range(-1.0..1.0) } else { 0.0 },
                ];
                let a = eval_h(e, x, dim);
                let b = eval_h_complex(e, x, dim);
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn trace_vanishes_on_contact_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let s: f64 = rng.gen_range(-1.0..0.0);
            assert_abs_diff_eq!(eval_h(E1, [s, 0.0, 0.0], 2), 0.0, epsilon = 1e-13);
            let t: f64 = rng.gen_range(0.0..1.0);
            assert!(eval_h(E1, [t, 0.0, 0.0], 2) >= 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 1e-6;
        for _ in 0..200 {
            // keep clear of the plane so central differences apply
            let x = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                0.0,
            ];
            let g = eval_grad_h(E1, x, 2);
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += d;
                xm[a] -= d;
                let fd = (eval_h(E1, xp, 2) - eval_h(E1, xm, 2)) / (2.0 * d);
                assert_abs_diff_eq!(g[a], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn normal_derivative_branches() {
        assert_eq!(normal_derivative_h(E1, [1.0, 0.0, 0.0], 2), 0.0);
        assert_relative_eq!(
            normal_derivative_h(E1, [-1.0, 0.0, 0.0], 2),
            -3.0 / SQRT2,
            max_relative = 1e-14
        );
        // one-sided finite difference of the closed form at small step
        let s = -0.7;
        let d = 1e-6;
        let fd = (eval_h(E1, [s, d, 0.0], 2) - eval_h(E1, [s, 0.0, 0.0], 2)) / d;
        assert_abs_diff_eq!(fd, normal_derivative_h(E1, [s, 0.0, 0.0], 2), epsilon = 1e-5);
    }

    #[test]
    fn contact_product_identity() {
        // h_e(x̂,0) · ∂h_e/∂x_n(x̂,0+) = 0 on the plane
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let xh = [rng.gen_range(-1.0..1.0), 0.0, 0.0];
            let prod = eval_h(E1, xh, 2) * normal_derivative_h(E1, xh, 2);
            assert_abs_diff_eq!(prod, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn tangent_field_values() {
        let e = E1;
        let xi = [0.0, 1.0, 0.0];
        // prefactor vanishes
        assert_eq!(eval_tangent(e, xi, [1.0, 0.0, 0.5], 3), 0.0);
        // direct substitution
        assert_relative_eq!(
            eval_tangent(e, xi, [1.0, 1.0, 0.0], 3),
            SQRT2,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            eval_tangent(e, xi, [1.0, -1.0, 0.0], 3),
            -SQRT2,
            max_relative = 1e-14
        );
        assert_abs_diff_eq!(eval_tangent(e, xi, [-1.0, 1.0, 0.0], 3), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tangent_gradient_matches_finite_differences() {
        let e = E1;
        let xi = [0.0, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 1e-6;
        for _ in 0..100 {
            let x = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.0),
            ];
            let g = eval_grad_tangent(e, xi, x, 3);
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += d;
                xm[a] -= d;
                let fd = (eval_tangent(e, xi, xp, 3) - eval_tangent(e, xi, xm, 3)) / (2.0 * d);
                assert_abs_diff_eq!(g[a], fd, epsilon = 2e-5);
            }
        }
    }

    #[test]
    fn tangent_basis_counts() {
        let g2 = crate::grid::make_grid(2, 17, 1.0).unwrap();
        assert_eq!(tangent_basis32(E1, g2).len(), 1);
        let g3 = crate::grid::make_grid(3, 17, 1.0).unwrap();
        assert_eq!(tangent_basis32(E1, g3).len(), 2);
    }

    #[test]
    fn discrete_laplacian_small_off_plane() {
        // h_e is harmonic away from {x_n = 0}
        let g = crate::grid::make_grid(2, 129, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| eval_h(E1, x, 2));
        let h = g.spacing();
        let mid = g.mid();
        let mut worst = 0.0f64;
        for i in 2..g.resolution() - 2 {
            for j in 2..g.resolution() - 2 {
                if j.abs_diff(mid) < 3 {
                    continue; // C^3 bound degenerates near the plane
                }
                let lap = (u.at([i + 1, j, 0])
                    + u.at([i - 1, j, 0])
                    + u.at([i, j + 1, 0])
                    + u.at([i, j - 1, 0])
                    - 4.0 * u.at([i, j, 0]))
                    / (h * h);
                let p = g.point([i, j, 0]);
                // local C^3-type scale: |D^4 h| ~ rho^{-5/2}
                let rho = p[0].hypot(p[1]).max(3.0 * h);
                worst = worst.max(lap.abs() * rho.powf(2.5));
            }
        }
        assert!(worst < 60.0 * h * h, "scaled laplacian defect {worst}");
    }

    #[test]
    fn blowup_profile_validation() {
        assert!(BlowupProfile::new(1.0, E1, 2).is_ok());
        assert!(BlowupProfile::new(-0.1, E1, 2).is_err());
        assert!(BlowupProfile::new(1.0, [0.5, 0.0, 0.0], 2).is_err());
        assert!(BlowupProfile::new(1.0, [0.0, 1.0, 0.0], 2).is_err()); // thin component
    }

    #[test]
    fn exact_profiles_2d() {
        // k = 3/2 coincides with h_{e1} / sqrt2
        let kind = FrequencyKind::HalfOdd { m: 1 };
        for x in [[0.3, 0.4, 0.0], [-0.5, 0.2, 0.0], [0.9, -0.7, 0.0]] {
            assert_relative_eq!(
                exact_profile_2d(kind, x).unwrap(),
                eval_h(E1, x, 2) / SQRT2,
                max_relative = 1e-13
            );
        }
        // k = 2 is x_1^2 - x_2^2
        let kind = FrequencyKind::Even { m: 1 };
        for x in [[0.3, 0.4, 0.0], [-0.5, 0.2, 0.0]] {
            assert_relative_eq!(
                exact_profile_2d(kind, x).unwrap(),
                x[0] * x[0] - x[1] * x[1],
                max_relative = 1e-13
            );
        }
        // k = 7/2 vanishes on the negative ray and has nonnegative trace
        let kind = FrequencyKind::HalfOdd { m: 2 };
        assert_abs_diff_eq!(exact_profile_2d(kind, [-1.0, 0.0, 0.0]).unwrap(), 0.0, epsilon = 1e-12);
        for k in 0..100 {
            let s = -1.0 + 2.0 * (k as f64 + 0.5) / 100.0;
            assert!(exact_profile_2d(kind, [s, 0.0, 0.0]).unwrap() >= -1e-12);
        }
        assert!(exact_profile_2d(FrequencyKind::Even { m: 0 }, [0.0; 3]).is_err());
    }
}
