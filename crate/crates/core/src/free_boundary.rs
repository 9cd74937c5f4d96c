//! Coincidence set and free boundary extraction, frequency classification,
//! blowup frame recovery and the graph description of the regular part.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::projection::dist_to_cone32;
use crate::radial::frequency_limit;
use serde::{Deserialize, Serialize};

/// Default contact tolerance: ten times the solver update tolerance.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
/// Classification slack on N(0+) around 3/2.
pub const CLASSIFY_SLACK: f64 = 0.05;

/// Mask over thin-plane lattice nodes (inside B_1).
#[derive(Clone, Debug)]
pub struct PlaneMask {
    grid: Grid,
    mask: Vec<bool>,
}

impl PlaneMask {
    fn plane_size(grid: &Grid) -> usize {
        grid.resolution().pow(grid.dim() as u32 - 1)
    }

    fn index(&self, m: &[usize]) -> usize {
        if self.grid.dim() == 2 {
            m[0]
        } else {
            m[0] * self.grid.resolution() + m[1]
        }
    }

    pub fn contains(&self, m: &[usize]) -> bool {
        self.mask[self.index(m)]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Plane lattice coordinates of all masked nodes.
    pub fn nodes(&self) -> Vec<[usize; 2]> {
        let res = self.grid.resolution();
        let mut out = Vec::new();
        if self.grid.dim() == 2 {
            for (i, on) in self.mask.iter().enumerate() {
                if *on {
                    out.push([i, 0]);
                }
            }
        } else {
            for (k, on) in self.mask.iter().enumerate() {
                if *on {
                    out.push([k / res, k % res]);
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    /// Point coordinates of a plane lattice node.
    pub fn point(&self, m: [usize; 2]) -> [f64; 3] {
        let mut full = [self.grid.mid(); 3];
        full[0] = m[0];
        if self.grid.dim() == 3 {
            full[1] = m[1];
        }
        full[self.grid.thin_axis()] = self.grid.mid();
        self.grid.point(full)
    }
}

fn plane_value(u: &ScalarField, m: [usize; 2]) -> f64 {
    let g = u.grid();
    let mid = g.mid();
    if g.dim() == 2 {
        u.at([m[0], mid, 0])
    } else {
        u.at([m[0], m[1], mid])
    }
}

/// The coincidence set: thin-plane nodes inside B_1 where u <= zero_tol.
pub fn coincidence_set(u: &ScalarField, zero_tol: f64) -> PlaneMask {
    let grid = *u.grid();
    let res = grid.resolution();
    let mut mask = vec![false; PlaneMask::plane_size(&grid)];
    let naxes = grid.dim() - 1;
    let walk = |i: usize, j: usize| {
        let m2 = [i, j];
        let mut full = [grid.mid(); 3];
        full[0] = i;
        if naxes == 2 {
            full[1] = j;
        }
        full[grid.thin_axis()] = grid.mid();
        let p = grid.point(full);
        if grid.norm(p) >= 1.0 {
            return (m2, false);
        }
        let v = if naxes == 1 { u.at([i, grid.mid(), 0]) } else { u.at([i, j, grid.mid()]) };
        (m2, v <= zero_tol)
    };
    if naxes == 1 {
        for i in 0..res {
            let (_, on) = walk(i, 0);
            mask[i] = on;
        }
    } else {
        for i in 0..res {
            for j in 0..res {
                let (_, on) = walk(i, j);
                mask[i * res + j] = on;
            }
        }
    }
    PlaneMask { grid, mask }
}

/// A free boundary point: a contact node with a non-contact plane neighbor,
/// refined along the crossing edge by linear interpolation of u.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FreeBoundaryPoint {
    pub point: [f64; 3],
    /// The contact-side plane lattice node the point was refined from.
    pub node: [usize; 2],
}

/// Extract the topological boundary of the contact set inside the plane.
/// Only neighbors inside B_1 count, so a contact set filling all of B_1'
/// has an empty free boundary.
pub fn free_boundary_points(
    u: &ScalarField,
    mask: &PlaneMask,
    zero_tol: f64,
) -> Vec<FreeBoundaryPoint> {
    let grid = *u.grid();
    let res = grid.resolution();
    let naxes = grid.dim() - 1;
    let mut out = Vec::new();
    let inside = |m: [usize; 2]| {
        let p = mask.point(m);
        grid.norm(p) < 1.0
    };
    for node in mask.nodes() {
        let mut neighbors: Vec<[usize; 2]> = Vec::new();
        if node[0] > 0 {
            neighbors.push([node[0] - 1, node[1]]);
        }
        if node[0] + 1 < res {
            neighbors.push([node[0] + 1, node[1]]);
        }
        if naxes == 2 {
            if node[1] > 0 {
                neighbors.push([node[0], node[1] - 1]);
            }
            if node[1] + 1 < res {
                neighbors.push([node[0], node[1] + 1]);
            }
        }
        for nb in neighbors {
            if !inside(nb) || mask.contains(&nb) {
                continue;
            }
            // crossing edge from the contact node to the free neighbor
            let ua = plane_value(u, node);
            let ub = plane_value(u, nb);
            let t = if (ub - ua).abs() < 1e-300 {
                0.5
            } else {
                ((zero_tol - ua) / (ub - ua)).clamp(0.0, 1.0)
            };
            let pa = mask.point(node);
            let pb = mask.point(nb);
            let mut p = [0.0; 3];
            for a in 0..3 {
                p[a] = pa[a] + t * (pb[a] - pa[a]);
            }
            out.push(FreeBoundaryPoint { point: p, node });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    pub point: [f64; 3],
    /// Extrapolated frequency N(0+).
    pub n0: f64,
    /// N(0+) within the classification slack of 3/2.
    pub regular: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub points: Vec<ClassifiedPoint>,
    /// Points skipped for lying too close to the unit sphere.
    pub skipped: usize,
}

/// Classify free boundary points by their extrapolated frequency. Points
/// outside B_0.8 lack the radius margin and are skipped with a notice in
/// the report.
pub fn classify_points(u: &ScalarField, points: &[FreeBoundaryPoint]) -> Result<Classification> {
    let g = u.grid();
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for fb in points {
        if g.norm(fb.point) > 0.8 {
            skipped += 1;
            continue;
        }
        // coarse grids leave no radius margin near the sphere
        let Ok(f) = frequency_limit(u, fb.point) else {
            skipped += 1;
            continue;
        };
        out.push(ClassifiedPoint {
            point: fb.point,
            n0: f.n0,
            regular: f.n0 <= 1.5 + CLASSIFY_SLACK,
        });
    }
    Ok(Classification { points: out, skipped })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LocalFrame {
    pub amplitude: f64,
    pub direction: [f64; 3],
    /// Cone distance of the blowup relative to its norm.
    pub rel_dist: f64,
    /// False when the blowup sits too far from the cone (wrong frequency
    /// or unresolved point).
    pub reliable: bool,
}

/// Recover the blowup frame (amplitude, direction) at a regular point: take
/// the homogeneous extension at the smallest reliable radius and project
/// onto the cone. The amplitude is the H1 projection coefficient.
pub fn local_frame(u: &ScalarField, x0: [f64; 3]) -> Result<LocalFrame> {
    let g = u.grid();
    let reach = 0.9 * (1.0 - g.norm(x0));
    let r = (16.0 * g.spacing()).max(0.08);
    if r > reach {
        return Err(Error::InvalidInput(format!(
            "no reliable blowup radius at {x0:?}: want {r}, reach {reach}"
        )));
    }
    let ext = u.homogeneous_extension(x0, r, 1.5)?;
    let fit = dist_to_cone32(&ext)?;
    let rel = fit.dist / fit.norm.max(1e-300);
    Ok(LocalFrame {
        amplitude: fit.lambda,
        direction: fit.e,
        rel_dist: rel,
        reliable: rel <= 0.5,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeConditionReport {
    /// Fraction of sampled points of C^+ where u is positive.
    pub positive_ok: f64,
    /// Fraction of sampled points of C^- where u stays at contact level.
    pub contact_ok: f64,
}

/// Graph description of the regular free boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GraphReport {
    /// n = 2: the free boundary is a discrete set; no chart exists.
    IsolatedPoints { points: Vec<ClassifiedPoint> },
    /// The directions spread beyond 45 degrees; a single chart cannot hold
    /// every point (partition required, not automated).
    NoSingleChart { max_spread_deg: f64 },
    Chart {
        base_point: [f64; 3],
        base_direction: [f64; 3],
        /// (arc coordinate, height) samples of the graph g.
        samples: Vec<(f64, f64)>,
        /// Log-log fit of |e(x) - e(y)| against |x - y| over pairs; None
        /// when the direction variation is zero (flat boundary).
        holder_exponent: Option<f64>,
        cone_conditions: ConeConditionReport,
    },
}

/// Fit the graph of the regular free boundary from classified points and
/// their frames (n = 3), verify the cone conditions at every point, and
/// estimate the direction Hölder exponent.
pub fn graph_fit(
    u: &ScalarField,
    points: &[(ClassifiedPoint, LocalFrame)],
    zero_tol: f64,
    epsilon: f64,
    delta: f64,
) -> Result<GraphReport> {
    let g = u.grid();
    if g.dim() == 2 {
        return Ok(GraphReport::IsolatedPoints {
            points: points.iter().map(|(c, _)| *c).collect(),
        });
    }
    let usable: Vec<&(ClassifiedPoint, LocalFrame)> = points
        .iter()
        .filter(|(c, f)| c.regular && f.reliable)
        .collect();
    if usable.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "graph fit needs at least 5 regular framed points, got {}",
            usable.len()
        )));
    }

    // medoid direction
    let angle = |a: [f64; 3], b: [f64; 3]| -> f64 {
        let dot = (a[0] * b[0] + a[1] * b[1]).clamp(-1.0, 1.0);
        dot.acos()
    };
    let mut spread = 0.0f64;
    for (ci, fi) in &usable {
        let _ = ci;
        for (_, fj) in &usable {
            spread = spread.max(angle(fi.direction, fj.direction));
        }
    }
    if spread > 45f64.to_radians() {
        return Ok(GraphReport::NoSingleChart { max_spread_deg: spread.to_degrees() });
    }
    let medoid = usable
        .iter()
        .min_by(|(_, fa), (_, fb)| {
            let cost = |f: &LocalFrame| -> f64 {
                usable.iter().map(|(_, fo)| angle(f.direction, fo.direction)).sum()
            };
            cost(fa).partial_cmp(&cost(fb)).unwrap()
        })
        .expect("nonempty");
    let base_point = medoid.0.point;
    let e = medoid.1.direction;
    let tau = [-e[1], e[0], 0.0];

    let mut samples: Vec<(f64, f64)> = usable
        .iter()
        .map(|(c, _)| {
            let d = [
                c.point[0] - base_point[0],
                c.point[1] - base_point[1],
                c.point[2] - base_point[2],
            ];
            (d[0] * tau[0] + d[1] * tau[1], d[0] * e[0] + d[1] * e[1])
        })
        .collect();
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Hölder exponent of the direction field over pairs
    let mut pts = Vec::new();
    for i in 0..usable.len() {
        for j in i + 1..usable.len() {
            let (ci, fi) = usable[i];
            let (cj, fj) = usable[j];
            let dx = ((ci.point[0] - cj.point[0]).powi(2)
                + (ci.point[1] - cj.point[1]).powi(2))
            .sqrt();
            let de = ((fi.direction[0] - fj.direction[0]).powi(2)
                + (fi.direction[1] - fj.direction[1]).powi(2))
            .sqrt();
            if dx > 1e-12 && de > 1e-10 {
                pts.push((dx.ln(), de.ln()));
            }
        }
    }
    let holder_exponent = if pts.len() < 3 {
        None
    } else {
        let k = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = k * sxx - sx * sx;
        if det.abs() < 1e-12 {
            None
        } else {
            Some((k * sxy - sx * sy) / det)
        }
    };

    // cone conditions at every usable point
    let mut pos_total = 0usize;
    let mut pos_ok = 0usize;
    let mut neg_total = 0usize;
    let mut neg_ok = 0usize;
    let h = g.spacing();
    for (c, f) in &usable {
        let e = f.direction;
        for side in [1.0f64, -1.0] {
            for ia in 0..8 {
                // directions inside the cone: |cos| >= epsilon
                let max_half = (epsilon.clamp(0.0, 1.0)).acos();
                let a = -max_half + (2.0 * max_half) * (ia as f64 + 0.5) / 8.0;
                let dir = [
                    side * (e[0] * a.cos() - e[1] * a.sin()),
                    side * (e[0] * a.sin() + e[1] * a.cos()),
                    0.0,
                ];
                for ir in 1..=6 {
                    let rr = 4.0 * h + (delta - 4.0 * h) * ir as f64 / 6.0;
                    let p = [c.point[0] + rr * dir[0], c.point[1] + rr * dir[1], 0.0];
                    if g.norm(p) >= 1.0 {
                        continue;
                    }
                    let val = u.interp(p);
                    if side > 0.0 {
                        pos_total += 1;
                        if val > zero_tol {
                            pos_ok += 1;
                        }
                    } else {
                        neg_total += 1;
                        if val <= zero_tol {
                            neg_ok += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(GraphReport::Chart {
        base_point,
        base_direction: e,
        samples,
        holder_exponent,
        cone_conditions: ConeConditionReport {
            positive_ok: pos_ok as f64 / pos_total.max(1) as f64,
            contact_ok: neg_ok as f64 / neg_total.max(1) as f64,
        },
    })
}
