//! Projected SOR solver for the discrete Signorini problem: minimize the
//! Dirichlet energy over fields with prescribed values on the collar
//! outside B_1 and the unilateral constraint u >= 0 on the thin plane.
//!
//! The iteration runs on the half domain {x_n >= 0}. Even symmetry enters
//! as a Neumann reflection through the plane: the plane-row stencil counts
//! the node above twice. Each sweep relaxes the 5/7-point harmonic average
//! by omega and clamps plane nodes inside B_1 at zero, which is the
//! standard finite-difference complementarity scheme. Clamped nodes carry
//! the one-sided negative normal derivative through the stencil residual.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::poly::Poly2m;
use crate::profiles::BlowupProfile;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrder {
    Lexicographic,
    /// Two half-sweeps by node parity; updates within a color are
    /// independent, so this ordering admits parallel execution.
    RedBlack,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the largest nodal update in a sweep falls below this.
    pub tol: f64,
    /// 0 means the default 200 * resolution.
    pub max_iters: usize,
    /// Over-relaxation factor in [1, 2).
    pub omega: f64,
    pub order: SweepOrder,
    /// Record the discrete energy after every sweep (test instrumentation).
    pub record_energy: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iters: 0,
            omega: 1.8,
            order: SweepOrder::Lexicographic,
            record_energy: false,
        }
    }
}

/// The discrete problem: a grid whose box contains B_1 and a datum field
/// supplying the fixed values on the collar {|x| >= 1}.
#[derive(Clone, Debug)]
pub struct SignoriniProblem {
    grid: Grid,
    datum: ScalarField,
}

impl SignoriniProblem {
    pub fn new(datum: ScalarField) -> Result<Self> {
        let grid = *datum.grid();
        if !grid.contains_ball([0.0; 3], 1.0) {
            return Err(Error::BallNotContained { center: [0.0; 3], radius: 1.0 });
        }
        // compatibility: w >= 0 on the thin plane inside B_1
        let mid = grid.mid();
        let ta = grid.thin_axis();
        for flat in 0..grid.node_count() {
            let m = grid.multi(flat);
            if m[ta] != mid {
                continue;
            }
            let p = grid.point(m);
            if grid.norm(p) <= 1.0 && datum.values()[flat] < -1e-12 {
                return Err(Error::InfeasibleDatum);
            }
        }
        Ok(SignoriniProblem { grid, datum })
    }

    pub fn from_profile(grid: Grid, profile: &BlowupProfile) -> Result<Self> {
        Self::new(profile.sample(grid))
    }

    pub fn from_poly(grid: Grid, psi: &Poly2m) -> Result<Self> {
        Self::new(psi.sample(grid))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn datum(&self) -> &ScalarField {
        &self.datum
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplementarityReport {
    /// Minimum of u over thin-plane nodes inside B_1 (>= -1e-12 expected).
    pub min_value: f64,
    /// Maximum of the discrete one-sided normal derivative on the plane.
    pub max_normal_slope: f64,
    /// Maximum of |u * normal slope| over plane nodes.
    pub max_product: f64,
    /// True when u dips below -1e-12 on the plane.
    pub infeasible: bool,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub field: ScalarField,
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    pub complementarity: ComplementarityReport,
    /// Discrete energy per sweep when requested in the options.
    pub energy_trace: Vec<f64>,
}

impl Solution {
    pub fn kkt_residuals(&self) -> ComplementarityReport {
        kkt_residuals(&self.field)
    }
}

const FIXED: u8 = 0;
const INTERIOR: u8 = 1;
const PLANE: u8 = 2;

fn classify(grid: &Grid) -> Vec<u8> {
    let mid = grid.mid();
    let ta = grid.thin_axis();
    let mut kinds = vec![FIXED; grid.node_count()];
    for (flat, kind) in kinds.iter_mut().enumerate() {
        let m = grid.multi(flat);
        if m[ta] < mid {
            continue; // lower half mirrored at the end
        }
        let p = grid.point(m);
        if grid.norm(p) >= 1.0 {
            continue;
        }
        *kind = if m[ta] == mid { PLANE } else { INTERIOR };
    }
    kinds
}

/// Solve by projected SOR. Never fails on slow convergence: the returned
/// solution carries a `converged` flag instead.
pub fn solve(problem: &SignoriniProblem, opts: &SolverOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    if !(1.0..2.0).contains(&opts.omega) {
        return Err(Error::InvalidInput(format!("omega {} outside [1, 2)", opts.omega)));
    }
    let grid = problem.grid;
    let res = grid.resolution();
    let max_iters = if opts.max_iters == 0 { 200 * res } else { opts.max_iters };
    let kinds = classify(&grid);
    let mut field = problem.datum.clone();
    let omega = opts.omega;
    let inv = 1.0 / (2.0 * grid.dim() as f64);

    let mut energy_trace = Vec::new();
    let mut iterations = 0;
    let mut final_update = f64::INFINITY;
    let mut converged = false;

    // strides in the flat index; the thin axis is the fastest one
    let (si, sj) = if grid.dim() == 2 { (res, 0usize) } else { (res * res, res) };
    let mid = grid.mid();

    let colors: &[Option<usize>] = match opts.order {
        SweepOrder::Lexicographic => &[None],
        SweepOrder::RedBlack => &[Some(0), Some(1)],
    };

    while iterations < max_iters {
        let mut worst = 0.0f64;
        for color in colors {
            let v = field.values_mut();
            if grid.dim() == 2 {
                for i in 1..res - 1 {
                    for j in mid..res - 1 {
                        if let Some(c) = color {
                            if (i + j) % 2 != *c {
                                continue;
                            }
                        }
                        let f = i * si + j;
                        let kind = kinds[f];
                        if kind == FIXED {
                            continue;
                        }
                        let s = if kind == PLANE {
                            v[f - si] + v[f + si] + 2.0 * v[f + 1]
                        } else {
                            v[f - si] + v[f + si] + v[f - 1] + v[f + 1]
                        };
                        let mut new = v[f] + omega * (s * inv - v[f]);
                        if kind == PLANE && new < 0.0 {
                            new = 0.0;
                        }
                        let d = (new - v[f]).abs();
                        if d > worst {
                            worst = d;
                        }
                        v[f] = new;
                    }
                }
            } else {
                for i in 1..res - 1 {
                    for j in 1..res - 1 {
                        for k in mid..res - 1 {
                            if let Some(c) = color {
                                if (i + j + k) % 2 != *c {
                                    continue;
                                }
                            }
                            let f = i * si + j * sj + k;
                            let kind = kinds[f];
                            if kind == FIXED {
                                continue;
                            }
                            let s = if kind == PLANE {
                                v[f - si] + v[f + si] + v[f - sj] + v[f + sj] + 2.0 * v[f + 1]
                            } else {
                                v[f - si]
                                    + v[f + si]
                                    + v[f - sj]
                                    + v[f + sj]
                                    + v[f - 1]
                                    + v[f + 1]
                            };
                            let mut new = v[f] + omega * (s * inv - v[f]);
                            if kind == PLANE && new < 0.0 {
                                new = 0.0;
                            }
                            let d = (new - v[f]).abs();
                            if d > worst {
                                worst = d;
                            }
                            v[f] = new;
                        }
                    }
                }
            }
        }
        iterations += 1;
        final_update = worst;
        if opts.record_energy {
            energy_trace.push(half_domain_energy(&field));
        }
        if worst < opts.tol {
            converged = true;
            break;
        }
    }

    field.mirror_even();
    let complementarity = kkt_residuals(&field);
    Ok(Solution {
        field,
        iterations,
        final_update,
        converged,
        complementarity,
        energy_trace,
    })
}

/// Discrete Dirichlet energy of the half domain (plane-parallel edges on
/// the plane carry weight 1/2); the quantity the sweeps relax.
pub fn half_domain_energy(u: &ScalarField) -> f64 {
    let grid = *u.grid();
    let res = grid.resolution();
    let mid = grid.mid();
    let v = u.values();
    let mut acc = 0.0;
    if grid.dim() == 2 {
        for i in 0..res {
            for j in mid..res {
                let f = i * res + j;
                if i + 1 < res {
                    let d = v[f + res] - v[f];
                    acc += if j == mid { 0.5 * d * d } else { d * d };
                }
                if j + 1 < res {
                    let d = v[f + 1] - v[f];
                    acc += d * d;
                }
            }
        }
    } else {
        let si = res * res;
        for i in 0..res {
            for j in 0..res {
                for k in mid..res {
                    let f = i * si + j * res + k;
                    let w = if k == mid { 0.5 } else { 1.0 };
                    if i + 1 < res {
                        let d = v[f + si] - v[f];
                        acc += w * d * d;
                    }
                    if j + 1 < res {
                        let d = v[f + res] - v[f];
                        acc += w * d * d;
                    }
                    if k + 1 < res {
                        let d = v[f + 1] - v[f];
                        acc += d * d;
                    }
                }
            }
        }
    }
    acc
}

/// Complementarity diagnostics over thin-plane nodes inside B_1.
///
/// The one-sided normal derivative is read off the reflected stencil
/// residual, dn = (h/2) (Σ neighbors - 2 dim u)/h^2: zero at discretely
/// harmonic nodes, negative where the constraint binds. This is the
/// discrete counterpart of the contact identity u ∂_n u = 0.
pub fn kkt_residuals(u: &ScalarField) -> ComplementarityReport {
    let grid = *u.grid();
    let res = grid.resolution();
    let mid = grid.mid();
    let h = grid.spacing();
    let v = u.values();
    let (si, sj) = if grid.dim() == 2 { (res, 0usize) } else { (res * res, res) };
    let mut report = ComplementarityReport {
        min_value: f64::INFINITY,
        max_normal_slope: f64::NEG_INFINITY,
        max_product: 0.0,
        infeasible: false,
    };
    let mut visit = |f: usize| {
        let val = v[f];
        let stencil = if grid.dim() == 2 {
            v[f - si] + v[f + si] + 2.0 * v[f + 1] - 4.0 * val
        } else {
            v[f - si] + v[f + si] + v[f - sj] + v[f + sj] + 2.0 * v[f + 1] - 6.0 * val
        };
        let dn = 0.5 * stencil / h;
        report.min_value = report.min_value.min(val);
        report.max_normal_slope = report.max_normal_slope.max(dn);
        report.max_product = report.max_product.max((val * dn).abs());
    };
    if grid.dim() == 2 {
        for i in 1..res - 1 {
            let m = [i, mid, 0];
            if grid.norm(grid.point(m)) < 1.0 {
                visit(i * si + mid);
            }
        }
    } else {
        for i in 1..res - 1 {
            for j in 1..res - 1 {
                let m = [i, j, mid];
                if grid.norm(grid.point(m)) < 1.0 {
                    visit(i * si + j * sj + mid);
                }
            }
        }
    }
    if report.min_value == f64::INFINITY {
        report.min_value = 0.0;
        report.max_normal_slope = 0.0;
    }
    report.infeasible = report.min_value < -1e-12;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profiles::{eval_h, FrequencyKind};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const E1: [f64; 3] = [1.0, 0.0, 0.0];

    fn solve_datum(res: usize, datum: impl Fn([f64; 3]) -> f64) -> Solution {
        let g = make_grid(2, res, 1.0).unwrap();
        let problem = SignoriniProblem::new(ScalarField::from_fn(g, datum)).unwrap();
        solve(&problem, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn constant_datum_is_reproduced() {
        // positive harmonic extension is already admissible
        let sol = solve_datum(65, |_| 1.0);
        assert!(sol.converged);
        for v in sol.field.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
        }
        let r = sol.complementarity;
        assert!(r.max_normal_slope.abs() < 1e-8);
        assert!(r.max_product < 1e-8);
    }

    #[test]
    fn cone_datum_reproduces_cone() {
        let sol = solve_datum(129, |x| eval_h(E1, x, 2));
        assert!(sol.converged);
        let g = make_grid(2, 129, 1.0).unwrap();
        let exact = ScalarField::from_fn(g, |x| eval_h(E1, x, 2));
        let err = sol.field.linf_in_ball(&exact, 0.95).unwrap();
        assert!(err <= 2e-2, "L-inf error {err}");
        assert!(sol.complementarity.max_product <= 1e-6);
        assert!(sol.complementarity.min_value >= -1e-12);
    }

    #[test]
    fn saddle_polynomial_is_discretely_harmonic() {
        // x_1^2 - x_2^2 solves the discrete problem exactly: second
        // differences of quadratics are exact and the trace is nonnegative
        let sol = solve_datum(65, |x| x[0] * x[0] - x[1] * x[1]);
        assert!(sol.converged);
        let g = make_grid(2, 65, 1.0).unwrap();
        let exact = ScalarField::from_fn(g, |x| x[0] * x[0] - x[1] * x[1]);
        let err = sol.field.linf_in_ball(&exact, 1.0).unwrap();
        assert!(err <= 1e-8, "L-inf error {err}");
    }

    #[test]
    fn exact_profile_families_solve_discretely() {
        // sanity for the validation data: both families have nonnegative
        // traces, so they are admissible data
        for kind in [FrequencyKind::HalfOdd { m: 2 }, FrequencyKind::Even { m: 2 }] {
            let sol = solve_datum(65, |x| crate::profiles::exact_profile_2d(kind, x).unwrap());
            assert!(sol.converged);
            assert!(sol.complementarity.min_value >= -1e-12);
        }
    }

    #[test]
    fn energy_non_increasing() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let datum = ScalarField::from_fn(g, |x| {
            eval_h(E1, x, 2) + 0.1 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos()
        });
        // clip the thin trace to keep the datum admissible
        let mut vals = datum.values().to_vec();
        let mid = g.mid();
        for i in 0..g.resolution() {
            let f = g.flat([i, mid, 0]);
            vals[f] = vals[f].max(0.0);
        }
        let datum = ScalarField::from_values(g, vals).unwrap();
        let problem = SignoriniProblem::new(datum).unwrap();
        let opts = SolverOptions { record_energy: true, ..Default::default() };
        let sol = solve(&problem, &opts).unwrap();
        for w in sol.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn unconstrained_interior_nodes_average_neighbors() {
        let sol = solve_datum(65, |x| eval_h(E1, x, 2));
        let g = *sol.field.grid();
        let v = sol.field.values();
        let res = g.resolution();
        let mut worst = 0.0f64;
        for i in 1..res - 1 {
            for j in g.mid() + 1..res - 1 {
                let p = g.point([i, j, 0]);
                if g.norm(p) >= 1.0 {
                    continue;
                }
                let f = i * res + j;
                let avg = (v[f - res] + v[f + res] + v[f - 1] + v[f + 1]) / 4.0;
                worst = worst.max((v[f] - avg).abs());
            }
        }
        assert!(worst < 1e-8, "max residual {worst}");
    }

    #[test]
    fn solution_even_after_mirror() {
        let sol = solve_datum(65, |x| eval_h(E1, x, 2));
        assert_eq!(sol.field.even_symmetry_defect(), 0.0);
    }

    #[test]
    fn comparison_principle() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let a: f64 = rng.gen_range(0.5..1.5);
            let b: f64 = rng.gen_range(0.0..0.5);
            let w1 = ScalarField::from_fn(g, |x| a * eval_h(E1, x, 2));
            let w2 = ScalarField::from_fn(g, |x| {
                a * eval_h(E1, x, 2) + b * (1.0 + (2.0 * x[0]).sin() * 0.3)
            });
            let s1 = solve(&SignoriniProblem::new(w1).unwrap(), &SolverOptions::default()).unwrap();
            let s2 = solve(&SignoriniProblem::new(w2).unwrap(), &SolverOptions::default()).unwrap();
            let worst = s1
                .field
                .values()
                .iter()
                .zip(s2.field.values())
                .map(|(u1, u2)| u1 - u2)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= 1e-10, "comparison violated by {worst}");
        }
    }

    #[test]
    fn red_black_matches_lexicographic() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let datum = ScalarField::from_fn(g, |x| eval_h(E1, x, 2));
        let p = SignoriniProblem::new(datum).unwrap();
        let tight = SolverOptions { tol: 1e-13, ..Default::default() };
        let lex = solve(&p, &tight).unwrap();
        let rb = solve(&p, &SolverOptions { order: SweepOrder::RedBlack, ..tight }).unwrap();
        let err = lex.field.linf_in_ball(&rb.field, 1.0).unwrap();
        assert!(err <= 1e-10, "orderings disagree by {err}");
    }

    #[test]
    fn infeasible_datum_rejected() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let datum = ScalarField::from_fn(g, |x| x[0]); // negative on half the plane
        assert!(matches!(SignoriniProblem::new(datum), Err(Error::InfeasibleDatum)));
    }

    #[test]
    fn unconverged_flagged_not_error() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let datum = ScalarField::from_fn(g, |x| eval_h(E1, x, 2));
        let p = SignoriniProblem::new(datum).unwrap();
        let sol = solve(&p, &SolverOptions { max_iters: 1, ..Default::default() }).unwrap();
        assert!(!sol.converged);
        assert!(sol.iterations == 1);
    }

    #[test]
    fn hand_built_infeasible_field_flagged() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let bad = ScalarField::from_fn(g, |x| -1.0 + x[1] * x[1]);
        let report = kkt_residuals(&bad);
        assert!(report.infeasible);
    }
}
