//! H1 distance and projection onto the homogeneous blowup families.
//!
//! The distance minimization over the 3/2 cone and the first-order
//! optimality diagnostics must share one inner product, so every pairing
//! here uses the same ball rule: grid fields carry their discrete gradient,
//! closed-form fields carry their exact gradient.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::poly::{basis_h2m_hat, thin_sphere_points, Poly2m, THIN_SPHERE_SAMPLES};
use crate::profiles::{AnalyticField, BlowupProfile, ConeField};
use crate::quad::for_each_ball_node;

/// Discrete gradient of a closed-form field at a node, using exactly the
/// stencil of [`ScalarField::gradient_at`]: central differences in the
/// interior, one-sided at box faces and from above on the thin plane. With
/// this rule a sampled profile and its closed form are indistinguishable to
/// every pairing below, which is what makes cone members project to
/// themselves exactly.
fn discrete_grad(
    p: &dyn AnalyticField,
    grid: &crate::grid::Grid,
    m: [usize; 3],
    x: [f64; 3],
    value: f64,
) -> [f64; 3] {
    let r = grid.resolution();
    let h = grid.spacing();
    let mid = grid.mid();
    let ta = grid.thin_axis();
    let mut g = [0.0f64; 3];
    for a in 0..grid.dim() {
        let i = m[a];
        let at = |idx: usize| {
            let mut q = x;
            q[a] = grid.coord(idx);
            p.eval(q)
        };
        g[a] = if a == ta && i == mid {
            (at(mid + 1) - value) / h
        } else if i == 0 {
            (at(1) - value) / h
        } else if i == r - 1 {
            (value - at(r - 2)) / h
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        };
    }
    g
}

/// Discrete H1(B_1) norm squared of a field (same rule as `h1_inner`).
pub fn h1_norm2(c: &ScalarField) -> f64 {
    let grid = *c.grid();
    let dim = grid.dim();
    let mut cc = 0.0;
    for_each_ball_node(&grid, [0.0; 3], 1.0, |flat, m, _, w| {
        let cv = c.values()[flat];
        let cg = c.gradient_at(m);
        let mut s = cv * cv;
        for a in 0..dim {
            s += cg[a] * cg[a];
        }
        cc += w * s;
    });
    cc
}

/// Pairings <c, p_i> and the Gram matrix <p_i, p_j> of closed-form fields
/// in the discrete H1 product (profiles sampled at nodes, gradients by the
/// shared stencil).
pub fn profile_products(
    c: &ScalarField,
    profiles: &[&dyn AnalyticField],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let grid = *c.grid();
    let dim = grid.dim();
    let k = profiles.len();
    let mut cp = vec![0.0; k];
    let mut pp = vec![vec![0.0; k]; k];
    let mut vals = vec![0.0f64; k];
    let mut grads = vec![[0.0f64; 3]; k];
    for_each_ball_node(&grid, [0.0; 3], 1.0, |flat, m, x, w| {
        let cv = c.values()[flat];
        let cg = c.gradient_at(m);
        for i in 0..k {
            vals[i] = profiles[i].eval(x);
            grads[i] = discrete_grad(profiles[i], &grid, m, x, vals[i]);
        }
        for i in 0..k {
            let mut s = cv * vals[i];
            for a in 0..dim {
                s += cg[a] * grads[i][a];
            }
            cp[i] += w * s;
            for j in i..k {
                let mut s = vals[i] * vals[j];
                for a in 0..dim {
                    s += grads[i][a] * grads[j][a];
                }
                pp[i][j] += w * s;
            }
        }
    });
    for i in 0..k {
        for j in 0..i {
            pp[i][j] = pp[j][i];
        }
    }
    (cp, pp)
}

/// One pass over B_1: ||c||_{H1}^2 plus [`profile_products`].
pub fn ball_products(
    c: &ScalarField,
    profiles: &[&dyn AnalyticField],
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let (cp, pp) = profile_products(c, profiles);
    (h1_norm2(c), cp, pp)
}

/// Result of the distance minimization over the 3/2 blowup cone.
#[derive(Clone, Copy, Debug)]
pub struct ConeFit {
    pub lambda: f64,
    pub e: [f64; 3],
    pub dist: f64,
    /// ||c||_{H1}, handy for relative near-cone checks.
    pub norm: f64,
}

impl ConeFit {
    pub fn profile(&self) -> BlowupProfile {
        BlowupProfile { lambda: self.lambda, e: self.e }
    }
}

/// Number of coarse scan directions on the thin-plane circle (n = 3).
pub const CONE_SCAN_ANGLES: usize = 1024;
/// Angular tolerance of the golden-section refinement.
pub const CONE_ANGLE_TOL: f64 = 1e-8;

fn squared_residual(cc: f64, cp: f64, pp: f64) -> (f64, f64) {
    let lambda = (cp / pp).max(0.0);
    (lambda, cc - 2.0 * lambda * cp + lambda * lambda * pp)
}

// (lambda*, ||c - lambda* h_e||^2) given the precomputed ||c||^2
fn cone_objective(c: &ScalarField, e: [f64; 3], cc: f64) -> (f64, f64) {
    let dim = c.grid().dim();
    let cone = ConeField { e, dim };
    let (cp, pp) = profile_products(c, &[&cone]);
    squared_residual(cc, cp[0], pp[0][0])
}

/// Minimize ||c - lambda h_e||_{H1(B_1)} over lambda >= 0 and unit e in the
/// thin plane.
///
/// n=2 has the two directions ±e_1 and is solved exhaustively. n=3 scans
/// [`CONE_SCAN_ANGLES`] coarse directions (on a decimated lattice when the
/// grid is large) and polishes the angle by golden section on the full grid
/// to [`CONE_ANGLE_TOL`]. Ties at lambda = 0 return the canonical e_1.
pub fn dist_to_cone32(c: &ScalarField) -> Result<ConeFit> {
    let grid = *c.grid();
    let dim = grid.dim();
    let cc = h1_norm2(c);
    let norm = cc.max(0.0).sqrt();
    if dim == 2 {
        let mut best: Option<ConeFit> = None;
        for e in [[1.0, 0.0, 0.0], [-1.0f64, 0.0, 0.0]] {
            let (lambda, obj) = cone_objective(c, e, cc);
            let fit = ConeFit { lambda, e, dist: obj.max(0.0).sqrt(), norm };
            if best.as_ref().map_or(true, |b| fit.dist < b.dist) {
                best = Some(fit);
            }
        }
        let mut fit = best.expect("two candidates");
        if fit.lambda == 0.0 {
            fit.e = [1.0, 0.0, 0.0];
        }
        return Ok(fit);
    }

    // coarse stage on a decimated lattice when affordable
    let coarse_owned;
    let coarse: &ScalarField = {
        let n1 = grid.resolution() - 1;
        let stride = [8usize, 4, 2]
            .into_iter()
            .find(|s| n1 % s == 0 && (n1 / s) % 2 == 0 && n1 / s >= 48);
        match stride {
            Some(s) => {
                coarse_owned = c.decimate(s)?;
                &coarse_owned
            }
            None => c,
        }
    };
    let coarse_cc = h1_norm2(coarse);
    let mut best_k = 0usize;
    let mut best_obj = f64::INFINITY;
    for k in 0..CONE_SCAN_ANGLES {
        let theta = k as f64 / CONE_SCAN_ANGLES as f64 * std::f64::consts::TAU;
        let (_, obj) = cone_objective(coarse, [theta.cos(), theta.sin(), 0.0], coarse_cc);
        if obj < best_obj {
            best_obj = obj;
            best_k = k;
        }
    }
    let step = std::f64::consts::TAU / CONE_SCAN_ANGLES as f64;
    let center = best_k as f64 * step;
    let obj_of = |theta: f64| cone_objective(c, [theta.cos(), theta.sin(), 0.0], cc).1;
    let theta = golden_argmin(obj_of, center - 1.5 * step, center + 1.5 * step, CONE_ANGLE_TOL);
    let e = [theta.cos(), theta.sin(), 0.0];
    let (lambda, obj) = cone_objective(c, e, cc);
    let mut fit = ConeFit { lambda, e, dist: obj.max(0.0).sqrt(), norm };
    if fit.lambda == 0.0 {
        fit.e = [1.0, 0.0, 0.0];
        fit.dist = fit.norm;
    }
    Ok(fit)
}

/// Golden-section argmin on an interval (tolerance in the argument).
pub fn golden_argmin(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Result of projecting onto the closed convex cone of admissible 2m
/// polynomials.
#[derive(Clone, Debug)]
pub struct H2mProjection {
    pub poly: Poly2m,
    /// H1 distance from c to the projection.
    pub dist: f64,
    /// Worst KKT residual at termination (complementarity and feasibility).
    pub kkt_residual: f64,
}

pub const PROJECTION_KKT_TOL: f64 = 1e-10;

/// H1-nearest point of the cone { Σ a_k p_k : trace >= 0 on the thin plane }:
/// a small convex QP over the basis coefficients with the positivity
/// constraint sampled on the thin sphere, solved by accelerated projected
/// gradient on the dual multipliers.
pub fn project_h2m(c: &ScalarField, m: usize) -> Result<H2mProjection> {
    let dim = c.grid().dim();
    let basis = basis_h2m_hat(dim, m)?;
    let k = basis.elements.len();
    let profiles: Vec<&dyn AnalyticField> =
        basis.elements.iter().map(|p| p as &dyn AnalyticField).collect();
    let (cc, b, g) = ball_products(c, &profiles);

    let points = thin_sphere_points(dim, THIN_SPHERE_SAMPLES);
    let amat: Vec<Vec<f64>> = points
        .iter()
        .map(|p| basis.elements.iter().map(|q| q.eval(*p)).collect())
        .collect();

    let ginv = invert_spd(&g)
        .ok_or_else(|| Error::InvalidInput("basis Gram matrix is singular".into()))?;

    // a(mu) = G^{-1} (b + A^T mu); minimize the dual by projected gradient
    let s = amat.len();
    let mut mu = vec![0.0f64; s];
    let apply_a = |a: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(amat.iter().map(|row| dot(row, a)));
    };
    let coeffs_of = |mu: &[f64]| -> Vec<f64> {
        let mut rhs = b.clone();
        for (i, row) in amat.iter().enumerate() {
            if mu[i] != 0.0 {
                for (j, r) in row.iter().enumerate() {
                    rhs[j] += mu[i] * r;
                }
            }
        }
        matvec(&ginv, &rhs)
    };

    // Lipschitz constant of the dual gradient by power iteration
    let mut v = vec![1.0f64; s];
    let mut lip = 1.0;
    for _ in 0..30 {
        // w = A G^{-1} A^T v
        let mut atv = vec![0.0f64; k];
        for (i, row) in amat.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                atv[j] += v[i] * r;
            }
        }
        let ga = matvec(&ginv, &atv);
        let mut w = Vec::with_capacity(s);
        apply_a(&ga, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lip = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let inv = 1.0 / norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi * inv;
        }
    }
    let step = 1.0 / lip.max(1e-300);

    let scale = 1.0 + b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut mu_prev = mu.clone();
    let mut t_prev = 1.0f64;
    let mut kkt = f64::INFINITY;
    let mut au = Vec::with_capacity(s);
    for it in 0..200_000 {
        // FISTA extrapolation
        let t = 0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt());
        let beta = (t_prev - 1.0) / t;
        let y: Vec<f64> = mu
            .iter()
            .zip(&mu_prev)
            .map(|(m1, m0)| m1 + beta * (m1 - m0))
            .collect();
        let a = coeffs_of(&y);
        apply_a(&a, &mut au);
        mu_prev = mu;
        mu = y
            .iter()
            .zip(&au)
            .map(|(yi, ai)| (yi - step * ai).max(0.0))
            .collect();
        t_prev = t;

        if it % 16 == 0 {
            let a = coeffs_of(&mu);
            apply_a(&a, &mut au);
            let infeas = au.iter().cloned().fold(0.0f64, |acc, v| acc.min(v)).min(0.0).abs();
            let compl = mu
                .iter()
                .zip(&au)
                .map(|(m, v)| (m * v).abs())
                .fold(0.0, f64::max);
            kkt = infeas.max(compl) / scale;
            if kkt <= PROJECTION_KKT_TOL {
                break;
            }
        }
    }

    let a = coeffs_of(&mu);
    let dist2 = cc - 2.0 * dot(&a, &b) + quad_form(&g, &a);
    Ok(H2mProjection {
        poly: Poly2m::new(dim, m, a)?,
        dist: dist2.max(0.0).sqrt(),
        kkt_residual: kkt,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn quad_form(m: &[Vec<f64>], v: &[f64]) -> f64 {
    dot(&matvec(m, v), v)
}

/// Dense inverse of a small symmetric positive definite matrix.
fn invert_spd(g: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = g.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col && a[i][col] != 0.0 {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

/// H1 norm of the difference of two 2m elements, through the Gram matrix of
/// the shared basis.
pub fn h2m_h1_distance(p: &Poly2m, q: &Poly2m) -> Result<f64> {
    if p.dim != q.dim || p.m != q.m {
        return Err(Error::InvalidInput("2m elements from different families".into()));
    }
    let basis = basis_h2m_hat(p.dim, p.m)?;
    let profiles: Vec<&dyn AnalyticField> =
        basis.elements.iter().map(|e| e as &dyn AnalyticField).collect();
    // Gram over a small grid-independent quadrature: reuse ball_products on
    // a zero field of a modest grid
    let grid = crate::grid::make_grid(p.dim, 65, 1.0)?;
    let zero = ScalarField::zeros(grid);
    let (_, _, g) = ball_products(&zero, &profiles);
    let d: Vec<f64> = p.coeffs.iter().zip(&q.coeffs).map(|(a, b)| a - b).collect();
    Ok(quad_form(&g, &d).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profiles::{eval_h, eval_tangent};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cone_member_is_recovered() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let c = ScalarField::from_fn(g, |x| eval_h([1.0, 0.0, 0.0], x, 2));
        let fit = dist_to_cone32(&c).unwrap();
        assert_relative_eq!(fit.lambda, 1.0, max_relative = 1e-6);
        assert_eq!(fit.e[0], 1.0);
        assert!(fit.dist < 1e-6 * fit.norm.max(1.0), "dist {}", fit.dist);
    }

    #[test]
    fn zero_field_ties_to_canonical_direction() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let c = ScalarField::zeros(g);
        let fit = dist_to_cone32(&c).unwrap();
        assert_eq!(fit.lambda, 0.0);
        assert_eq!(fit.e, [1.0, 0.0, 0.0]);
        assert_eq!(fit.dist, 0.0);
    }

    #[test]
    fn negative_direction_recovered() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let c = ScalarField::from_fn(g, |x| 0.7 * eval_h([-1.0, 0.0, 0.0], x, 2));
        let fit = dist_to_cone32(&c).unwrap();
        assert_eq!(fit.e[0], -1.0);
        assert_relative_eq!(fit.lambda, 0.7, max_relative = 1e-6);
    }

    #[test]
    fn angular_recovery_in_three_dims() {
        let g = make_grid(3, 49, 1.0).unwrap();
        let theta0 = 20f64.to_radians();
        let e0 = [theta0.cos(), theta0.sin(), 0.0];
        let c = ScalarField::from_fn(g, |x| 1.3 * eval_h(e0, x, 3));
        let fit = dist_to_cone32(&c).unwrap();
        let angle = fit.e[1].atan2(fit.e[0]);
        assert_abs_diff_eq!(angle, theta0, epsilon = 2e-3);
        assert_relative_eq!(fit.lambda, 1.3, max_relative = 1e-3);
        assert!(fit.dist < 1e-4 * fit.norm);
    }

    #[test]
    fn perturbed_cone_matches_brute_force() {
        let g = make_grid(2, 65, 1.0).unwrap();
        // bump supported away from the thin plane
        let bump = |x: [f64; 3]| {
            let d2 = (x[0] - 0.2) * (x[0] - 0.2) + (x[1].abs() - 0.5) * (x[1].abs() - 0.5);
            (-40.0 * d2).exp()
        };
        let c = ScalarField::from_fn(g, |x| eval_h([1.0, 0.0, 0.0], x, 2) + 0.05 * bump(x));
        let bump_field = ScalarField::from_fn(g, bump);
        let bump_norm = crate::quad::h1_norm(&bump_field).unwrap();
        let fit = dist_to_cone32(&c).unwrap();
        assert!(fit.dist > 0.0 && fit.dist <= 0.05 * bump_norm + 1e-9);

        // brute force over a dense (lambda, e) grid
        let mut best = f64::INFINITY;
        for e in [[1.0f64, 0.0, 0.0], [-1.0, 0.0, 0.0]] {
            let cone = ConeField { e, dim: 2 };
            let (cc, cp, pp) = ball_products(&c, &[&cone]);
            for i in 0..=4000 {
                let lambda = i as f64 * 2.0 / 4000.0;
                let obj = cc - 2.0 * lambda * cp[0] + lambda * lambda * pp[0][0];
                best = best.min(obj.max(0.0).sqrt());
            }
        }
        assert_abs_diff_eq!(fit.dist, best, epsilon = 1e-4);
    }

    #[test]
    fn distance_is_one_homogeneous() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let c = ScalarField::from_fn(g, |x| {
            eval_h([1.0, 0.0, 0.0], x, 2) + 0.03 * (x[0] * x[0] - x[1] * x[1])
        });
        let d1 = dist_to_cone32(&c).unwrap().dist;
        for alpha in [0.5f64, 2.0] {
            let scaled = c.scaled(alpha);
            let da = dist_to_cone32(&scaled).unwrap().dist;
            assert_relative_eq!(da, alpha * d1, max_relative = 1e-8);
        }
    }

    #[test]
    fn tangent_gram_well_conditioned() {
        let g = make_grid(3, 33, 1.0).unwrap();
        let e = [1.0, 0.0, 0.0];
        let basis = crate::profiles::tangent_profiles(e, 3);
        let refs: Vec<&dyn AnalyticField> = basis.iter().map(|b| b.as_ref()).collect();
        let zero = ScalarField::zeros(g);
        let (_, _, gram) = ball_products(&zero, &refs);
        // 2x2 condition number from eigenvalues
        let (a, b, d) = (gram[0][0], gram[0][1], gram[1][1]);
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        assert!(l2 > 0.0 && l1 / l2 < 1e6, "cond = {}", l1 / l2);
    }

    #[test]
    fn projection_fixes_cone_members() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let psi = Poly2m::new(2, 1, vec![0.8]).unwrap();
        let c = psi.sample(g);
        let proj = project_h2m(&c, 1).unwrap();
        assert_abs_diff_eq!(proj.poly.coeffs[0], 0.8, epsilon = 1e-4);
        // distance is pure discretization error
        assert!(proj.dist < 1e-2);
    }

    #[test]
    fn projection_of_negated_saddle_is_zero() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let psi = Poly2m::new(2, 1, vec![1.0]).unwrap();
        let c = psi.sample(g).scaled(-1.0);
        let proj = project_h2m(&c, 1).unwrap();
        assert!(proj.poly.coeffs[0].abs() <= 1e-8, "coeff {}", proj.poly.coeffs[0]);
    }

    #[test]
    fn projection_is_nonexpansive() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (a1, b1, c1): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let (a2, b2, c2): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let f1 = ScalarField::from_fn(g, |x| {
                a1 * (x[0] * x[0] - x[1] * x[1]) + 0.2 * b1 * x[0] + 0.1 * c1
            });
            let f2 = ScalarField::from_fn(g, |x| {
                a2 * (x[0] * x[0] - x[1] * x[1]) + 0.2 * b2 * x[0] + 0.1 * c2
            });
            let p1 = project_h2m(&f1, 1).unwrap();
            let p2 = project_h2m(&f2, 1).unwrap();
            let lhs = h2m_h1_distance(&p1.poly, &p2.poly).unwrap();
            let rhs = crate::quad::h1_norm(&f1.sub(&f2).unwrap()).unwrap();
            assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn tangent_orthogonality_at_minimizer() {
        // at the distance minimizer with lambda > 0, the residual is
        // orthogonal to the tangent fields in the shared inner product
        let g = make_grid(3, 49, 1.0).unwrap();
        let theta0 = 35f64.to_radians();
        let e0 = [theta0.cos(), theta0.sin(), 0.0];
        let c = ScalarField::from_fn(g, |x| {
            eval_h(e0, x, 3) + 0.04 * (x[0] * x[0] + x[1] * x[1] - 2.0 * x[2] * x[2])
        });
        let fit = dist_to_cone32(&c).unwrap();
        assert!(fit.lambda > 0.0);
        let basis = crate::profiles::tangent_profiles(fit.e, 3);
        let refs: Vec<&dyn AnalyticField> = basis.iter().map(|b| b.as_ref()).collect();
        let (cc, cp, pp) = ball_products(&c, &refs);
        // <z, zeta> = <c, zeta> - lambda <h, zeta>; h is basis[0]
        for i in 0..refs.len() {
            let zi = cp[i] - fit.lambda * pp[0][i];
            let znorm = fit.dist.max(1e-12);
            let pnorm = pp[i][i].sqrt();
            assert!(
                (zi / (znorm * pnorm)).abs() < 1e-3,
                "tangent residual {} for basis {i}, cc={cc}",
                zi / (znorm * pnorm)
            );
        }
        let _ = eval_tangent;
    }
}
