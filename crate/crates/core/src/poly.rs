//! Even harmonic homogeneous polynomials: the 2m families.
//!
//! The basis of { p : 2m-homogeneous, Δp = 0, p = p(x̂, |x_n|) } is built
//! symbolically: enumerate the even-in-x_n monomials of degree 2m, solve
//! Δp = 0 by exact rational elimination, then Gram-Schmidt the kernel with
//! the exact sphere moment formula so the returned elements are orthonormal
//! in L^2(∂B_1). All exactness lives at build time; evaluation is f64.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::profiles::AnalyticField;
use num::{BigInt, BigRational, FromPrimitive, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type Exp = [u32; 3];

/// Multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RatPoly {
    pub terms: BTreeMap<Exp, BigRational>,
}

impl RatPoly {
    fn add_term(&mut self, e: Exp, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn partial(&self, axis: usize) -> RatPoly {
        let mut out = RatPoly::default();
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut en = *e;
            en[axis] -= 1;
            out.add_term(en, c * BigRational::from_integer(BigInt::from(e[axis])));
        }
        out
    }

    pub fn laplacian(&self, dim: usize) -> RatPoly {
        let mut out = RatPoly::default();
        for axis in 0..dim {
            let dd = self.partial(axis).partial(axis);
            for (e, c) in dd.terms {
                out.add_term(e, c);
            }
        }
        out
    }

    pub fn scaled(&self, f: &BigRational) -> RatPoly {
        let mut out = RatPoly::default();
        for (e, c) in &self.terms {
            out.add_term(*e, c * f);
        }
        out
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn to_f64(&self) -> PolyF {
        PolyF::new(
            self.terms
                .iter()
                .map(|(e, c)| (c.to_f64().expect("rational fits f64"), *e))
                .collect(),
        )
    }
}

/// ∫_{S^{n-1}} x^α dσ divided by the surface measure |S^{n-1}|, exact.
/// Zero when any exponent is odd; otherwise
/// Π (α_i - 1)!! / Π_{k=1..|α|/2} (n + 2k - 2).
fn sphere_moment(dim: usize, e: &Exp) -> BigRational {
    let mut total = 0u32;
    for a in 0..dim {
        if e[a] % 2 == 1 {
            return BigRational::zero();
        }
        total += e[a];
    }
    let mut num = BigInt::from(1);
    for a in 0..dim {
        let mut k = e[a] as i64 - 1;
        while k >= 2 {
            num *= BigInt::from(k);
            k -= 2;
        }
    }
    let mut den = BigInt::from(1);
    for k in 1..=(total / 2) as i64 {
        den *= BigInt::from(dim as i64 + 2 * k - 2);
    }
    BigRational::new(num, den)
}

/// L^2(∂B_1) pairing of two rational polynomials, up to the |S^{n-1}| factor.
fn sphere_inner(dim: usize, p: &RatPoly, q: &RatPoly) -> BigRational {
    let mut acc = BigRational::zero();
    for (ep, cp) in &p.terms {
        for (eq, cq) in &q.terms {
            let sum = [ep[0] + eq[0], ep[1] + eq[1], ep[2] + eq[2]];
            let m = sphere_moment(dim, &sum);
            if !m.is_zero() {
                acc += cp * cq * m;
            }
        }
    }
    acc
}

fn surface_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Polynomial with f64 coefficients and precomputed gradient terms.
#[derive(Clone, Debug)]
pub struct PolyF {
    pub terms: Vec<(f64, Exp)>,
    grad_terms: [Vec<(f64, Exp)>; 3],
}

impl PolyF {
    pub fn new(terms: Vec<(f64, Exp)>) -> Self {
        let mut grad_terms: [Vec<(f64, Exp)>; 3] = Default::default();
        for (c, e) in &terms {
            for (axis, bucket) in grad_terms.iter_mut().enumerate() {
                if e[axis] > 0 {
                    let mut en = *e;
                    en[axis] -= 1;
                    bucket.push((c * e[axis] as f64, en));
                }
            }
        }
        PolyF { terms, grad_terms }
    }

    pub fn scaled(&self, f: f64) -> PolyF {
        PolyF::new(self.terms.iter().map(|(c, e)| (c * f, *e)).collect())
    }

    pub fn add(&self, other: &PolyF) -> PolyF {
        let mut map: BTreeMap<Exp, f64> = BTreeMap::new();
        for (c, e) in self.terms.iter().chain(&other.terms) {
            *map.entry(*e).or_insert(0.0) += c;
        }
        PolyF::new(map.into_iter().map(|(e, c)| (c, e)).collect())
    }

    #[inline]
    fn eval_terms(terms: &[(f64, Exp)], x: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for (c, e) in terms {
            let mut t = *c;
            for a in 0..3 {
                if e[a] > 0 {
                    t *= x[a].powi(e[a] as i32);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).fold(0.0, f64::max)
    }

    /// Terms surviving on the thin plane {x_n = 0}.
    pub fn trace(&self, dim: usize) -> PolyF {
        PolyF::new(
            self.terms
                .iter()
                .filter(|(_, e)| e[dim - 1] == 0)
                .map(|(c, e)| (*c, *e))
                .collect(),
        )
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        let p = self.clone();
        ScalarField::from_fn(grid, move |x| p.eval(x))
    }
}

impl AnalyticField for PolyF {
    fn eval(&self, x: [f64; 3]) -> f64 {
        Self::eval_terms(&self.terms, x)
    }

    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        [
            Self::eval_terms(&self.grad_terms[0], x),
            Self::eval_terms(&self.grad_terms[1], x),
            Self::eval_terms(&self.grad_terms[2], x),
        ]
    }
}

/// Canonical basis of the tangent family: even harmonic 2m-homogeneous
/// polynomials, orthonormal in L^2(∂B_1).
pub struct HarmonicBasis {
    pub dim: usize,
    pub m: usize,
    /// Exact representatives (orthogonal, not normalized).
    pub exact: Vec<RatPoly>,
    /// f64 elements, orthonormal on the sphere.
    pub elements: Vec<PolyF>,
}

/// Identifier stored in serialized coefficient lists.
pub const BASIS_ID: &str = "even-harmonic-sphere-orthonormal-v1";

/// Build the basis for dimension `dim` and homogeneity `2m`.
pub fn basis_h2m_hat(dim: usize, m: usize) -> Result<HarmonicBasis> {
    if dim != 2 && dim != 3 {
        return Err(Error::BadDimension(dim));
    }
    if m == 0 {
        return Err(Error::InvalidInput("m must be >= 1".into()));
    }
    let deg = 2 * m as u32;
    let mons = even_monomials(dim, deg);
    let cons = even_monomials(dim, deg - 2);
    let col_of: BTreeMap<Exp, usize> = cons.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    // rows: coefficient of each degree-(2m-2) monomial in Δ x^α
    let mut matrix: Vec<Vec<BigRational>> =
        vec![vec![BigRational::zero(); mons.len()]; cons.len()];
    for (j, alpha) in mons.iter().enumerate() {
        let mut p = RatPoly::default();
        p.add_term(*alpha, BigRational::from_integer(BigInt::from(1)));
        for (e, c) in p.laplacian(dim).terms {
            matrix[col_of[&e]][j] = c;
        }
    }

    let kernel = rational_kernel(matrix, mons.len());
    let mut exact: Vec<RatPoly> = kernel
        .into_iter()
        .map(|coeffs| {
            let mut p = RatPoly::default();
            for (j, c) in coeffs.into_iter().enumerate() {
                p.add_term(mons[j], c);
            }
            p
        })
        .collect();

    // Gram-Schmidt with the exact sphere pairing
    for i in 0..exact.len() {
        for j in 0..i {
            let num = sphere_inner(dim, &exact[i], &exact[j]);
            let den = sphere_inner(dim, &exact[j], &exact[j]);
            let f = -num / den;
            exact[i] = exact[i].add(&exact[j].scaled(&f));
        }
    }

    let surf = surface_measure(dim);
    let elements = exact
        .iter()
        .map(|p| {
            let norm2 = sphere_inner(dim, p, p).to_f64().expect("norm fits f64") * surf;
            p.to_f64().scaled(1.0 / norm2.sqrt())
        })
        .collect();

    Ok(HarmonicBasis { dim, m, exact, elements })
}

fn even_monomials(dim: usize, deg: u32) -> Vec<Exp> {
    let mut out = Vec::new();
    if dim == 2 {
        for a in 0..=deg {
            let b = deg - a;
            if b % 2 == 0 {
                out.push([a, b, 0]);
            }
        }
    } else {
        for a in 0..=deg {
            for b in 0..=(deg - a) {
                let c = deg - a - b;
                if c % 2 == 0 {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Null-space basis of a rational matrix by Gauss-Jordan elimination.
fn rational_kernel(mut matrix: Vec<Vec<BigRational>>, cols: usize) -> Vec<Vec<BigRational>> {
    let rows = matrix.len();
    let mut pivot_col_of_row = Vec::new();
    let mut r = 0usize;
    for c in 0..cols {
        let Some(pr) = (r..rows).find(|&i| !matrix[i][c].is_zero()) else {
            continue;
        };
        matrix.swap(r, pr);
        let inv = matrix[r][c].recip();
        for v in matrix[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows {
            if i != r && !matrix[i][c].is_zero() {
                let f = matrix[i][c].clone();
                for j in 0..cols {
                    let t = &matrix[r][j] * &f;
                    matrix[i][j] -= t;
                }
            }
        }
        pivot_col_of_row.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let pivot_cols: std::collections::BTreeSet<usize> = pivot_col_of_row.iter().copied().collect();
    let mut kernel = Vec::new();
    for free in (0..cols).filter(|c| !pivot_cols.contains(c)) {
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::from_i64(1).unwrap();
        for (row, &pc) in pivot_col_of_row.iter().enumerate() {
            v[pc] = -matrix[row][free].clone();
        }
        kernel.push(v);
    }
    kernel
}

/// Element of the 2m family as coefficients over the canonical basis.
#[derive(Clone, Debug)]
pub struct Poly2m {
    pub dim: usize,
    pub m: usize,
    pub coeffs: Vec<f64>,
    poly: PolyF,
}

#[derive(Serialize, Deserialize)]
struct Poly2mWire {
    basis: String,
    dim: usize,
    m: usize,
    coeffs: Vec<f64>,
}

impl Serialize for Poly2m {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Poly2mWire {
            basis: BASIS_ID.to_string(),
            dim: self.dim,
            m: self.m,
            coeffs: self.coeffs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly2m {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = Poly2mWire::deserialize(d)?;
        if wire.basis != BASIS_ID {
            return Err(serde::de::Error::custom(format!("unknown basis {}", wire.basis)));
        }
        Poly2m::new(wire.dim, wire.m, wire.coeffs).map_err(serde::de::Error::custom)
    }
}

impl Poly2m {
    pub fn new(dim: usize, m: usize, coeffs: Vec<f64>) -> Result<Self> {
        let basis = basis_h2m_hat(dim, m)?;
        if coeffs.len() != basis.elements.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients for dim {dim}, m {m}, got {}",
                basis.elements.len(),
                coeffs.len()
            )));
        }
        let mut poly = PolyF::new(Vec::new());
        for (c, b) in coeffs.iter().zip(&basis.elements) {
            poly = poly.add(&b.scaled(*c));
        }
        Ok(Poly2m { dim, m, coeffs, poly })
    }

    pub fn poly(&self) -> &PolyF {
        &self.poly
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        self.poly.sample(grid)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl AnalyticField for Poly2m {
    fn eval(&self, x: [f64; 3]) -> f64 {
        self.poly.eval(x)
    }
    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        self.poly.grad(x)
    }
}

/// Thin-sphere sample points (unit sphere of the thin plane).
pub fn thin_sphere_points(dim: usize, count: usize) -> Vec<[f64; 3]> {
    if dim == 2 {
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
    } else {
        (0..count)
            .map(|k| {
                let t = (k as f64 + 0.5) / count as f64 * std::f64::consts::TAU;
                [t.cos(), t.sin(), 0.0]
            })
            .collect()
    }
}

pub const THIN_SPHERE_SAMPLES: usize = 4096;

/// Minimum of the thin-plane trace over the unit sphere of the plane,
/// by dense sampling plus a golden-section polish around the best angle.
pub fn trace_min_on_thin_sphere(psi: &Poly2m) -> f64 {
    let trace = psi.poly.trace(psi.dim);
    if psi.dim == 2 {
        return trace.eval([1.0, 0.0, 0.0]).min(trace.eval([-1.0, 0.0, 0.0]));
    }
    let n = THIN_SPHERE_SAMPLES;
    let f = |t: f64| trace.eval([t.cos(), t.sin(), 0.0]);
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64 * std::f64::consts::TAU;
        let v = f(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let w = std::f64::consts::TAU / n as f64;
    let polished = golden_min(f, best_t - w, best_t + w, 1e-12);
    best.min(polished)
}

/// Golden-section minimization on an interval.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
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
    fc.min(fd)
}

fn check_in_family(psi: &Poly2m) -> Result<f64> {
    let scale = psi.poly.max_coeff();
    if scale == 0.0 {
        return Err(Error::Degenerate("zero polynomial is not in the 2m family".into()));
    }
    let min = trace_min_on_thin_sphere(psi);
    if min < -1e-9 * scale {
        return Err(Error::InvalidInput(format!(
            "thin-plane trace dips to {min}, not admissible"
        )));
    }
    Ok(scale)
}

/// True when the thin trace is strictly positive away from the origin,
/// i.e. the element sits in the lowest stratum (isolated contact point).
pub fn is_lowest_stratum(psi: &Poly2m) -> Result<bool> {
    let scale = check_in_family(psi)?;
    Ok(trace_min_on_thin_sphere(psi) > 1e-8 * scale)
}

/// Dimension of the invariance subspace of the trace: directions ξ in the
/// thin plane with ∂_ξ (trace) ≡ 0. Lowest stratum means dimension 0.
pub fn stratum_dimension(psi: &Poly2m) -> Result<usize> {
    check_in_family(psi)?;
    let trace = psi.poly.trace(psi.dim);
    let scale = psi.poly.max_coeff().max(1e-300);
    let naxes = psi.dim - 1;
    // columns: partial derivatives of the trace as coefficient vectors
    let mut cols: Vec<BTreeMap<Exp, f64>> = Vec::new();
    for axis in 0..naxes {
        let mut col = BTreeMap::new();
        for (c, e) in &trace.terms {
            if e[axis] > 0 {
                let mut en = *e;
                en[axis] -= 1;
                *col.entry(en).or_insert(0.0) += c * e[axis] as f64;
            }
        }
        cols.push(col);
    }
    let tol = 1e-9 * scale;
    let dot = |a: &BTreeMap<Exp, f64>, b: &BTreeMap<Exp, f64>| -> f64 {
        a.iter().map(|(e, c)| c * b.get(e).copied().unwrap_or(0.0)).sum()
    };
    if naxes == 1 {
        let nz = dot(&cols[0], &cols[0]).sqrt() > tol;
        return Ok(if nz { 0 } else { 1 });
    }
    // naxes == 2: rank of the 2-column system via the Gram determinant
    let g00 = dot(&cols[0], &cols[0]);
    let g11 = dot(&cols[1], &cols[1]);
    let g01 = dot(&cols[0], &cols[1]);
    let det = g00 * g11 - g01 * g01;
    if det > tol * tol * (g00 + g11).max(tol * tol) {
        Ok(0)
    } else if g00.sqrt() > tol || g11.sqrt() > tol {
        Ok(1)
    } else {
        Ok(2)
    }
}
