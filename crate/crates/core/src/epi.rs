//! Epiperimetric energy-gain experiments: build admissible homogeneous
//! data near a blowup cone, compare the boundary adjusted energy of the
//! datum with the constrained minimizer's, and test first-order optimality
//! at the nearest cone point.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::poly::Poly2m;
use crate::profiles::{eval_h, tangent_profiles, AnalyticField, BlowupProfile};
use crate::projection::{ball_products, dist_to_cone32, project_h2m};
use crate::quad::{adjusted_energy, SphereSampling, DEFAULT_SPHERE_QUALITY};
use crate::solver::{solve, SignoriniProblem, SolverOptions};
use serde::{Deserialize, Serialize};

/// Absolute floor below which the adjusted energy of a datum counts as
/// zero. The discrete 𝒢 of an exact cone member carries quadrature bias of
/// order spacing^{3/2} scaled by the squared field norm, so the operative
/// cone marker combines this floor with the resolution-aware term in
/// [`epi_noise_floor`].
pub const EPI_NOISE_FLOOR: f64 = 1e-6;

/// Resolution-aware zero threshold for 𝒢_λ of a homogeneous datum.
pub fn epi_noise_floor(grid: &Grid, h1_norm2: f64) -> f64 {
    EPI_NOISE_FLOOR.max(0.05 * grid.spacing().powf(1.5) * h1_norm2)
}
/// Default near-cone admissibility cap: dist <= 0.1 ||c||.
pub const NEAR_CONE_CAP: f64 = 0.1;
/// Angular half-width of the equator clip corrections.
const CLIP_WIDTH: f64 = 0.35;

/// A trace perturbation mode on the unit sphere, even in x_n.
///
/// n=2: `l` is the Fourier index of cos(l a) in the circle angle (m is
/// ignored). n=3: the real spherical harmonic of degree l and order m >= 0,
/// cosine type; evenness requires l + m even.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Mode {
    pub l: usize,
    #[serde(default)]
    pub m: usize,
    pub amplitude: f64,
}

#[derive(Clone, Debug)]
pub enum DatumBase {
    Cone(BlowupProfile),
    Poly(Poly2m),
}

impl DatumBase {
    pub fn lambda_hom(&self) -> f64 {
        match self {
            DatumBase::Cone(_) => 1.5,
            DatumBase::Poly(p) => 2.0 * p.m as f64,
        }
    }

    fn trace(&self, dir: [f64; 3], dim: usize) -> f64 {
        match self {
            DatumBase::Cone(p) => p.lambda * eval_h(p.e, dir, dim),
            DatumBase::Poly(p) => p.eval(dir),
        }
    }
}

/// Associated Legendre P_l^m (no Condon-Shortley phase beyond (-1)^m).
fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let mut pmm = 1.0;
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2.0 * ll as f64 - 1.0) * pmmp1 - (ll as f64 + m as f64 - 1.0) * pmm)
            / (ll as f64 - m as f64);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Evaluate a perturbation mode at a unit direction (|x_n| used, so the
/// result is even in x_n).
fn mode_value(mode: &Mode, dir: [f64; 3], dim: usize) -> f64 {
    if dim == 2 {
        // cos(l a) with a the circle angle; reflection makes it even
        let a = dir[1].abs().atan2(dir[0]);
        (mode.l as f64 * a).cos()
    } else {
        let mu = dir[2].abs();
        let rho = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        let phi = if rho > 0.0 { dir[1].atan2(dir[0]) } else { 0.0 };
        let (l, m) = (mode.l, mode.m);
        let norm = ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * factorial(l - m)
            / factorial(l + m))
        .sqrt()
            * if m > 0 { std::f64::consts::SQRT_2 } else { 1.0 };
        norm * assoc_legendre(l, m, mu) * (m as f64 * phi).cos()
    }
}

/// Closed-form homogeneous datum: base trace plus perturbation modes on the
/// sphere, clipped so the thin-plane trace stays nonnegative, extended
/// lambda-homogeneously.
#[derive(Clone, Debug)]
pub struct HomogeneousDatum {
    pub dim: usize,
    pub lambda_hom: f64,
    base: DatumBase,
    modes: Vec<Mode>,
}

impl HomogeneousDatum {
    pub fn new(dim: usize, base: DatumBase, modes: Vec<Mode>) -> Result<Self> {
        if dim == 3 {
            for mode in &modes {
                if (mode.l + mode.m) % 2 != 0 {
                    return Err(Error::InvalidInput(format!(
                        "mode (l={}, m={}) is odd in x_n",
                        mode.l, mode.m
                    )));
                }
                if mode.m > mode.l {
                    return Err(Error::InvalidInput("mode order exceeds degree".into()));
                }
            }
        }
        let lambda_hom = base.lambda_hom();
        Ok(HomogeneousDatum { dim, lambda_hom, base, modes })
    }

    /// Unclipped trace on the unit sphere.
    pub fn raw_trace(&self, dir: [f64; 3]) -> f64 {
        let mut t = self.base.trace(dir, self.dim);
        for mode in &self.modes {
            t += mode.amplitude * mode_value(mode, dir, self.dim);
        }
        t
    }

    // violation of positivity at the equator point closest in azimuth
    fn equator_violation(&self, dir: [f64; 3]) -> f64 {
        let eq = self.equator_point(dir);
        (-self.raw_trace(eq)).max(0.0)
    }

    fn equator_point(&self, dir: [f64; 3]) -> [f64; 3] {
        if self.dim == 2 {
            [if dir[0] >= 0.0 { 1.0 } else { -1.0 }, 0.0, 0.0]
        } else {
            let rho = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            if rho < 1e-14 {
                [1.0, 0.0, 0.0]
            } else {
                [dir[0] / rho, dir[1] / rho, 0.0]
            }
        }
    }

    /// Clipped trace: the raw trace plus a correction that equals the
    /// positivity violation on the equator and fades away from the plane,
    /// so the thin trace is exactly max(raw, 0) and the datum stays
    /// continuous.
    pub fn trace(&self, dir: [f64; 3]) -> f64 {
        let polar = dir[self.dim - 1].abs();
        if polar >= CLIP_WIDTH {
            return self.raw_trace(dir);
        }
        let v = self.equator_violation(dir);
        if v == 0.0 {
            return self.raw_trace(dir);
        }
        let s = 1.0 - polar / CLIP_WIDTH;
        self.raw_trace(dir) + v * s * s
    }

    /// Homogeneous evaluation at any point (0 at the origin).
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut n2 = 0.0;
        for c in x.iter().take(self.dim) {
            n2 += c * c;
        }
        let norm = n2.sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let mut dir = [0.0; 3];
        for a in 0..self.dim {
            dir[a] = x[a] / norm;
        }
        norm.powf(self.lambda_hom) * self.trace(dir)
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatumReport {
    /// H1 distance to the relevant blowup family.
    pub dist: f64,
    /// H1 norm of the datum.
    pub norm: f64,
    /// L2(∂B_1) norm of the clip correction next to the perturbation norm.
    pub clip_change: f64,
    pub perturbation_norm: f64,
    /// Set when clipping moved the datum by more than half the
    /// perturbation norm.
    pub degenerate: bool,
    /// Set when the near-cone cap dist <= 0.1 ||c|| fails.
    pub far_from_cone: bool,
}

/// Build the admissible homogeneous datum field and measure it.
pub fn make_datum(
    datum: &HomogeneousDatum,
    grid: Grid,
) -> Result<(ScalarField, DatumReport)> {
    if grid.dim() != datum.dim {
        return Err(Error::GridMismatch);
    }
    let field = datum.sample(grid);
    let sph = SphereSampling::new(datum.dim, [0.0; 3], 1.0, DEFAULT_SPHERE_QUALITY)?;
    let clip_change = sph
        .integrate(|p| {
            let d = datum.trace(p) - datum.raw_trace(p);
            d * d
        })
        .max(0.0)
        .sqrt();
    let perturbation_norm = sph
        .integrate(|p| {
            let mut t = 0.0;
            for mode in &datum.modes {
                t += mode.amplitude * mode_value(mode, p, datum.dim);
            }
            t * t
        })
        .max(0.0)
        .sqrt();
    let (dist, norm) = match &datum.base {
        DatumBase::Cone(_) => {
            let fit = dist_to_cone32(&field)?;
            (fit.dist, fit.norm)
        }
        DatumBase::Poly(p) => {
            let proj = project_h2m(&field, p.m)?;
            (proj.dist, crate::projection::h1_norm2(&field).max(0.0).sqrt())
        }
    };
    // the clip is degenerate when it dominates the requested perturbation
    // or rises to the scale of the base trace on the equator
    let mut base_eq_max = 0.0f64;
    let mut violation_max = 0.0f64;
    for p in crate::poly::thin_sphere_points(datum.dim, 512) {
        base_eq_max = base_eq_max.max(datum.base.trace(p, datum.dim).abs());
        violation_max = violation_max.max(datum.trace(p) - datum.raw_trace(p));
    }
    let degenerate = (clip_change > 0.5 * perturbation_norm.max(1e-300) && clip_change > 1e-12)
        || violation_max > 0.5 * base_eq_max;
    let far_from_cone = dist > NEAR_CONE_CAP * norm;
    Ok((
        field,
        DatumReport { dist, norm, clip_change, perturbation_norm, degenerate, far_from_cone },
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpiGain {
    /// 𝒢_λ of the homogeneous datum.
    pub g_c: f64,
    /// 𝒢_λ of the constrained minimizer with the same boundary values.
    pub g_v: f64,
    /// 1 - g_v / g_c, when the datum energy is above the noise floor.
    pub kappa: Option<f64>,
    pub cone_like: bool,
    pub solver_converged: bool,
    /// g_c fell below -EPI_NOISE_FLOOR for a near-cone 3/2 datum.
    pub negative_energy: bool,
}

/// Measure the epiperimetric gain of a homogeneous datum: solve the thin
/// obstacle problem with the datum's boundary values and compare adjusted
/// energies on the shared grid (this cancels the leading quadrature bias).
pub fn epi_gain(c: &ScalarField, lambda_hom: f64, opts: &SolverOptions) -> Result<EpiGain> {
    let g_c = adjusted_energy(c, lambda_hom)?;
    let problem = SignoriniProblem::new(c.clone())?;
    let sol = solve(&problem, opts)?;
    let g_v = adjusted_energy(&sol.field, lambda_hom)?;
    let floor = epi_noise_floor(c.grid(), crate::projection::h1_norm2(c));
    let cone_like = g_c <= floor;
    Ok(EpiGain {
        g_c,
        g_v,
        kappa: if cone_like { None } else { Some(1.0 - g_v / g_c) },
        cone_like,
        solver_converged: sol.converged,
        negative_energy: g_c < -floor,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub lambda: f64,
    pub e: [f64; 3],
    pub dist: f64,
    /// Normalized pairings <z, ζ>/(||z|| ||ζ||) for each tangent basis
    /// field at the nearest cone point.
    pub residuals: Vec<f64>,
    /// The tangent space degenerates at lambda = 0; the check is skipped.
    pub skipped: bool,
}

/// First-order optimality at the nearest cone point: with ψ* = λ* h_{e*}
/// and z = c - ψ*, every tangent direction pairs to zero against z.
pub fn orthogonality_check(c: &ScalarField) -> Result<OrthogonalityReport> {
    let fit = dist_to_cone32(c)?;
    if fit.lambda == 0.0 {
        return Ok(OrthogonalityReport {
            lambda: 0.0,
            e: fit.e,
            dist: fit.dist,
            residuals: Vec::new(),
            skipped: true,
        });
    }
    let dim = c.grid().dim();
    let basis = tangent_profiles(fit.e, dim);
    let refs: Vec<&dyn AnalyticField> = basis.iter().map(|b| b.as_ref()).collect();
    let (_, cp, pp) = ball_products(c, &refs);
    let znorm = fit.dist;
    let mut residuals = Vec::with_capacity(refs.len());
    for i in 0..refs.len() {
        if znorm < 1e-9 * fit.norm.max(1e-300) {
            residuals.push(0.0); // z vanishes; orthogonality is vacuous
            continue;
        }
        let zi = cp[i] - fit.lambda * pp[0][i];
        residuals.push(zi / (znorm * pp[i][i].sqrt()));
    }
    Ok(OrthogonalityReport {
        lambda: fit.lambda,
        e: fit.e,
        dist: fit.dist,
        residuals,
        skipped: false,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FamilySpec {
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "2m")]
    Even { m: usize },
}

impl FamilySpec {
    pub fn label(&self) -> String {
        match self {
            FamilySpec::ThreeHalves => "3/2".into(),
            FamilySpec::Even { .. } => "2m".into(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            FamilySpec::ThreeHalves => 0,
            FamilySpec::Even { m } => *m,
        }
    }
}

/// Sweep description: one experiment row per (dim, resolution, family,
/// amplitude, seed); each row draws mode coefficients in
/// [-amplitude, amplitude] from its own seeded generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dims: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub families: Vec<FamilySpec>,
    /// Mode shapes to perturb with (amplitudes in the spec are scales).
    pub modes: Vec<Mode>,
    pub amplitudes: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Summary row of one epiperimetric experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpiExperiment {
    pub dim: usize,
    pub resolution: usize,
    pub family: String,
    pub m: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub dist: f64,
    pub norm: f64,
    pub g_c: f64,
    pub g_v: f64,
    pub kappa: Option<f64>,
    pub flags: Vec<String>,
}

/// A sweep row with the concrete fields kept for downstream diagnostics.
pub struct SweepRow {
    pub experiment: EpiExperiment,
    pub datum: ScalarField,
    pub solution: Option<crate::solver::Solution>,
}

/// Build the datum for one sweep row (deterministic in the seed).
///
/// Each row perturbs with a single mode — the one indexed by its seed
/// modulo the mode pool — at a random magnitude in [0.7, 1] times the
/// amplitude. The sign is the admissible one (mode value at the contact
/// side of the equator kept nonnegative), so the trace needs no clipping
/// and the observed gain stays tied to that one mode's decay rate, which
/// the decay-consistency criterion compares against.
pub fn row_datum(
    dim: usize,
    family: &FamilySpec,
    modes: &[Mode],
    amplitude: f64,
    seed: u64,
) -> Result<HomogeneousDatum> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaled: Vec<Mode> = if modes.is_empty() {
        Vec::new()
    } else {
        let pick = modes[seed as usize % modes.len()];
        let magnitude = amplitude * rng.gen_range(0.7..1.0f64);
        let contact_side = [-1.0, 0.0, 0.0];
        let mv = mode_value(&pick, contact_side, dim);
        let sign = if mv < 0.0 { -1.0 } else { 1.0 };
        vec![Mode { amplitude: sign * magnitude, ..pick }]
    };
    let base = match family {
        FamilySpec::ThreeHalves => {
            DatumBase::Cone(BlowupProfile { lambda: 1.0, e: [1.0, 0.0, 0.0] })
        }
        FamilySpec::Even { m } => {
            let basis_len = crate::poly::basis_h2m_hat(dim, *m)?.elements.len();
            let mut coeffs = vec![0.0; basis_len];
            coeffs[0] = 1.0;
            // fixed canonical base element of the lowest stratum for n=2;
            // n=3 uses the first basis element, checked downstream
            DatumBase::Poly(Poly2m::new(dim, *m, coeffs)?)
        }
    };
    HomogeneousDatum::new(dim, base, scaled)
}

/// Run the sweep; per-row failures are recorded in the row flags and the
/// sweep continues. Rows are ordered by the cartesian product
/// (dim, resolution, family, amplitude, seed).
pub fn perturbation_sweep(spec: &SweepSpec, opts: &SolverOptions) -> Vec<SweepRow> {
    perturbation_sweep_jobs(spec, opts, 1)
}

/// Sweep over a bounded worker pool. Rows are independent; the table is
/// assembled in row order, so the result does not depend on the job count.
pub fn perturbation_sweep_jobs(
    spec: &SweepSpec,
    opts: &SolverOptions,
    jobs: usize,
) -> Vec<SweepRow> {
    let mut params = Vec::new();
    for &dim in &spec.dims {
        for &resolution in &spec.resolutions {
            for family in &spec.families {
                for &amplitude in &spec.amplitudes {
                    for &seed in &spec.seeds {
                        params.push((dim, resolution, family.clone(), amplitude, seed));
                    }
                }
            }
        }
    }
    let jobs = jobs.max(1).min(params.len().max(1));
    if jobs == 1 {
        return params
            .into_iter()
            .map(|(d, r, f, a, s)| run_row(d, r, &f, spec, a, s, opts))
            .collect();
    }
    let mut slots: Vec<Option<SweepRow>> = Vec::new();
    slots.resize_with(params.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= params.len() {
                    break;
                }
                let (d, r, ref f, a, s) = params[i];
                let row = run_row(d, r, f, spec, a, s, opts);
                slots.lock().expect("sweep slots")[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .expect("sweep slots")
        .into_iter()
        .map(|r| r.expect("all rows computed"))
        .collect()
}

fn run_row(
    dim: usize,
    resolution: usize,
    family: &FamilySpec,
    spec: &SweepSpec,
    amplitude: f64,
    seed: u64,
    opts: &SolverOptions,
) -> SweepRow {
    let mut experiment = EpiExperiment {
        dim,
        resolution,
        family: family.label(),
        m: family.m(),
        amplitude,
        seed,
        dist: f64::NAN,
        norm: f64::NAN,
        g_c: f64::NAN,
        g_v: f64::NAN,
        kappa: None,
        flags: Vec::new(),
    };
    let fail = |mut experiment: EpiExperiment, grid: Grid, err: Error| {
        experiment.flags.push(format!("error:{err}"));
        SweepRow { experiment, datum: ScalarField::zeros(grid), solution: None }
    };
    let grid = match Grid::new(dim, resolution, 1.0) {
        Ok(g) => g,
        Err(e) => {
            return fail(experiment, Grid::new(2, 17, 1.0).expect("fallback grid"), e);
        }
    };
    let datum = match row_datum(dim, family, &spec.modes, amplitude, seed) {
        Ok(d) => d,
        Err(e) => return fail(experiment, grid, e),
    };
    let (field, report) = match make_datum(&datum, grid) {
        Ok(x) => x,
        Err(e) => return fail(experiment, grid, e),
    };
    experiment.dist = report.dist;
    experiment.norm = report.norm;
    if report.degenerate {
        experiment.flags.push("degenerate-clip".into());
    }
    if report.far_from_cone {
        experiment.flags.push("far-from-cone".into());
    }
    if let FamilySpec::Even { m } = family {
        match project_h2m(&field, *m).and_then(|p| crate::poly::is_lowest_stratum(&p.poly)) {
            Ok(true) => {}
            Ok(false) => experiment.flags.push("projection-not-lowest-stratum".into()),
            Err(e) => experiment.flags.push(format!("stratum-check:{e}")),
        }
    }
    let gain = match epi_gain(&field, datum.lambda_hom, opts) {
        Ok(g) => g,
        Err(e) => return fail(experiment, grid, e),
    };
    experiment.g_c = gain.g_c;
    experiment.g_v = gain.g_v;
    experiment.kappa = gain.kappa;
    if gain.cone_like {
        experiment.flags.push("cone-like".into());
    }
    if !gain.solver_converged {
        experiment.flags.push("unconverged".into());
    }
    if gain.negative_energy {
        experiment.flags.push("negative-energy".into());
    }
    // re-solve to keep the solution for downstream diagnostics
    let solution = SignoriniProblem::new(field.clone())
        .and_then(|p| solve(&p, opts))
        .ok();
    SweepRow { experiment, datum: field, solution }
}

/// Default near-cone sweep of the lowest frequency family (20 rows). The
/// pool holds the slowest admissible mode: its Weiss energy decays at the
/// measurable rate r^1, so the decay-consistency and dyadic-rate criteria
/// stay above quadrature noise while every row obeys the near-cone cap.
pub fn default_sweep_32() -> SweepSpec {
    SweepSpec {
        dims: vec![2],
        resolutions: vec![257],
        families: vec![FamilySpec::ThreeHalves],
        modes: vec![Mode { l: 2, m: 0, amplitude: 1.0 }],
        amplitudes: vec![0.08, 0.09, 0.10, 0.11],
        seeds: vec![1, 2, 3, 4, 5],
    }
}

/// Default sweep of the lowest even stratum (m = 1, 3 rows).
pub fn default_sweep_2m() -> SweepSpec {
    SweepSpec {
        dims: vec![2],
        resolutions: vec![257],
        families: vec![FamilySpec::Even { m: 1 }],
        modes: vec![
            Mode { l: 3, m: 0, amplitude: 1.0 },
            Mode { l: 4, m: 0, amplitude: 1.0 },
        ],
        amplitudes: vec![0.05],
        seeds: vec![1, 2, 3],
    }
}

/// CSV lines for a sweep (column names fixed by the reporting contract).
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("dim,resolution,family,m,amplitude,dist,G_c,G_v,kappa_obs,flags\n");
    for row in rows {
        let e = &row.experiment;
        out.push_str(&format!(
            "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{},{}\n",
            e.dim,
            e.resolution,
            e.family,
            e.m,
            e.amplitude,
            e.dist,
            e.g_c,
            e.g_v,
            e.kappa.map_or("nan".to_string(), |k| format!("{k:.12e}")),
            e.flags.join(";"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_abs_diff_eq;

    fn cone_datum(modes: Vec<Mode>) -> HomogeneousDatum {
        HomogeneousDatum::new(
            2,
            DatumBase::Cone(BlowupProfile { lambda: 1.0, e: [1.0, 0.0, 0.0] }),
            modes,
        )
        .unwrap()
    }

    #[test]
    fn zero_perturbation_reproduces_cone() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let (field, report) = make_datum(&cone_datum(vec![]), g).unwrap();
        assert!(report.dist < 1e-6, "dist {}", report.dist);
        assert!(!report.degenerate);
        let exact = ScalarField::from_fn(g, |x| eval_h([1.0, 0.0, 0.0], x, 2));
        assert!(field.linf_in_ball(&exact, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn mode_three_perturbation_is_near_cone() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let datum = cone_datum(vec![Mode { l: 3, m: 0, amplitude: 0.05 }]);
        let (_, report) = make_datum(&datum, g).unwrap();
        assert!(report.dist > 0.0 && report.dist < 0.2, "dist {}", report.dist);
        assert!(!report.degenerate);
    }

    #[test]
    fn negative_everywhere_spec_flagged_degenerate() {
        let g = make_grid(2, 129, 1.0).unwrap();
        // l = 0 is the constant mode; a large negative constant drives the
        // trace negative over the whole contact half
        let datum = cone_datum(vec![Mode { l: 0, m: 0, amplitude: -3.0 }]);
        let (field, report) = make_datum(&datum, g).unwrap();
        assert!(report.degenerate, "clip {} vs pert {}", report.clip_change, report.perturbation_norm);
        // and the thin trace is still admissible
        let mid = g.mid();
        for i in 0..g.resolution() {
            assert!(field.at([i, mid, 0]) >= -1e-12);
        }
    }

    #[test]
    fn datum_is_exactly_homogeneous() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let datum = cone_datum(vec![Mode { l: 3, m: 0, amplitude: 0.05 }]);
        let (field, _) = make_datum(&datum, g).unwrap();
        let mid = g.mid() as isize;
        for (di, dj) in [(40isize, 16isize), (-24, 32), (-16, -48)] {
            let big = field.at([(mid + di) as usize, (mid + dj) as usize, 0]);
            let small = field.at([(mid + di / 4) as usize, (mid + dj / 4) as usize, 0]);
            assert_abs_diff_eq!(small, 0.25f64.powf(1.5) * big, epsilon = 1e-10);
        }
    }

    #[test]
    fn gain_on_cone_is_cone_like() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let (field, _) = make_datum(&cone_datum(vec![]), g).unwrap();
        let gain = epi_gain(&field, 1.5, &SolverOptions::default()).unwrap();
        assert!(gain.cone_like, "g_c = {}", gain.g_c);
        assert!(!gain.negative_energy);
    }

    #[test]
    fn gain_positive_for_perturbed_cone() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let datum = cone_datum(vec![Mode { l: 3, m: 0, amplitude: 0.05 }]);
        let (field, report) = make_datum(&datum, g).unwrap();
        assert!(!report.far_from_cone);
        let gain = epi_gain(&field, 1.5, &SolverOptions::default()).unwrap();
        let kappa = gain.kappa.expect("datum is not cone-like");
        assert!(kappa > 0.0, "kappa {kappa}, g_c {}, g_v {}", gain.g_c, gain.g_v);
        assert!(gain.g_v <= gain.g_c + 1e-9, "minimizer energy must not exceed datum");
    }

    #[test]
    fn gain_positive_for_saddle_family() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let base = DatumBase::Poly(Poly2m::new(2, 1, vec![1.0]).unwrap());
        let datum =
            HomogeneousDatum::new(2, base, vec![Mode { l: 3, m: 0, amplitude: 0.05 }]).unwrap();
        let (field, _) = make_datum(&datum, g).unwrap();
        let gain = epi_gain(&field, 2.0, &SolverOptions::default()).unwrap();
        let kappa = gain.kappa.expect("perturbed saddle has positive energy");
        assert!(kappa > 0.0, "kappa {kappa}");
    }

    #[test]
    fn kappa_scale_invariant() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let datum = cone_datum(vec![Mode { l: 3, m: 0, amplitude: 0.05 }]);
        let (field, _) = make_datum(&datum, g).unwrap();
        let k1 = epi_gain(&field, 1.5, &SolverOptions::default())
            .unwrap()
            .kappa
            .unwrap();
        for alpha in [0.5f64, 2.0] {
            let ka = epi_gain(&field.scaled(alpha), 1.5, &SolverOptions::default())
                .unwrap()
                .kappa
                .unwrap();
            assert_abs_diff_eq!(ka, k1, epsilon = 1e-8);
        }
    }

    #[test]
    fn orthogonality_vacuous_on_cone() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let (field, _) = make_datum(&cone_datum(vec![]), g).unwrap();
        let rep = orthogonality_check(&field).unwrap();
        assert!(!rep.skipped);
        for r in &rep.residuals {
            assert_eq!(*r, 0.0);
        }
    }

    #[test]
    fn orthogonality_skipped_at_zero() {
        let g = make_grid(2, 65, 1.0).unwrap();
        let field = ScalarField::zeros(g);
        let rep = orthogonality_check(&field).unwrap();
        assert!(rep.skipped);
    }

    #[test]
    fn orthogonality_residuals_small_at_minimizer() {
        let g = make_grid(2, 129, 1.0).unwrap();
        let datum = cone_datum(vec![
            Mode { l: 3, m: 0, amplitude: 0.04 },
            Mode { l: 4, m: 0, amplitude: -0.03 },
        ]);
        let (field, _) = make_datum(&datum, g).unwrap();
        let rep = orthogonality_check(&field).unwrap();
        assert!(!rep.skipped);
        for r in &rep.residuals {
            assert!(r.abs() <= 1e-3, "residual {r}");
        }
    }

    #[test]
    fn sweep_cardinality_and_determinism() {
        let spec = SweepSpec {
            dims: vec![2],
            resolutions: vec![65],
            families: vec![FamilySpec::ThreeHalves],
            modes: vec![Mode { l: 3, m: 0, amplitude: 1.0 }],
            amplitudes: vec![0.03, 0.05, 0.07],
            seeds: vec![1, 2],
        };
        let opts = SolverOptions::default();
        let rows = perturbation_sweep(&spec, &opts);
        assert_eq!(rows.len(), 6);
        let rows2 = perturbation_sweep(&spec, &opts);
        assert_eq!(sweep_csv(&rows), sweep_csv(&rows2));
    }

    #[test]
    fn empty_sweep() {
        let spec = SweepSpec {
            dims: vec![],
            resolutions: vec![257],
            families: vec![FamilySpec::ThreeHalves],
            modes: vec![],
            amplitudes: vec![],
            seeds: vec![],
        };
        assert!(perturbation_sweep(&spec, &SolverOptions::default()).is_empty());
    }
}
