//! JSON configuration surface of the command line tool.

use crate::epi::{DatumBase, HomogeneousDatum, Mode, SweepSpec};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::poly::Poly2m;
use crate::profiles::BlowupProfile;
use crate::solver::{SignoriniProblem, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_radius() -> f64 {
    1.0
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub dim: usize,
    pub resolution: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub datum: DatumConfig,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum DatumConfig {
    /// lambda h_e with an optional trace perturbation.
    #[serde(rename = "cone32")]
    Cone32 {
        #[serde(default = "default_lambda")]
        lambda: f64,
        /// Direction angle inside the thin plane, degrees.
        #[serde(default)]
        angle_deg: f64,
        #[serde(default)]
        perturbation: Vec<Mode>,
    },
    /// An even 2m-homogeneous polynomial by basis coefficients.
    #[serde(rename = "poly2m")]
    Poly2m {
        m: usize,
        coeffs: Vec<f64>,
        #[serde(default)]
        perturbation: Vec<Mode>,
    },
    /// A field file whose samples provide the datum directly.
    #[serde(rename = "trace-file")]
    TraceFile { path: String },
}

/// A problem together with the homogeneity of its datum (when known).
pub struct BuiltProblem {
    pub problem: SignoriniProblem,
    pub options: SolverOptions,
    pub lambda_hom: Option<f64>,
}

impl ProblemConfig {
    pub fn solver_options(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(o) = self.omega {
            opts.omega = o;
        }
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        opts
    }

    pub fn build(&self, base_dir: &Path) -> Result<BuiltProblem> {
        let grid = Grid::new(self.dim, self.resolution, self.radius)?;
        let (datum_field, lambda_hom) = match &self.datum {
            DatumConfig::Cone32 { lambda, angle_deg, perturbation } => {
                let e = BlowupProfile::direction_from_angle(self.dim, angle_deg.to_radians());
                let base = DatumBase::Cone(BlowupProfile { lambda: *lambda, e });
                let hd = HomogeneousDatum::new(self.dim, base, perturbation.clone())?;
                (hd.sample(grid), Some(1.5))
            }
            DatumConfig::Poly2m { m, coeffs, perturbation } => {
                let psi = Poly2m::new(self.dim, *m, coeffs.clone())?;
                let lambda = 2.0 * *m as f64;
                let base = DatumBase::Poly(psi);
                let hd = HomogeneousDatum::new(self.dim, base, perturbation.clone())?;
                (hd.sample(grid), Some(lambda))
            }
            DatumConfig::TraceFile { path } => {
                let field = crate::io::read_field(&base_dir.join(path))?;
                if field.grid() != &grid {
                    return Err(Error::Config(format!(
                        "trace file grid {:?} does not match the requested {}^{} box",
                        field.grid(),
                        self.resolution,
                        self.dim
                    )));
                }
                (field, None)
            }
        };
        Ok(BuiltProblem {
            problem: SignoriniProblem::new(datum_field)?,
            options: self.solver_options(),
            lambda_hom,
        })
    }
}

/// Radii list for profile-style commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiiConfig {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl RadiiConfig {
    pub fn build(&self) -> Vec<f64> {
        crate::radial::linspace(self.lo, self.hi, self.count.max(2))
    }
}

fn default_center() -> Vec<f64> {
    vec![0.0; 3]
}

/// Field input: either a stored field file or a problem solved on the fly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSource {
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
}

impl FieldSource {
    pub fn load(&self, base_dir: &Path) -> Result<ScalarField> {
        match (&self.field, &self.problem) {
            (Some(path), None) => crate::io::read_field(&base_dir.join(path)),
            (None, Some(cfg)) => {
                let built = cfg.build(base_dir)?;
                let sol = crate::solver::solve(&built.problem, &built.options)?;
                Ok(sol.field)
            }
            _ => Err(Error::Config("specify exactly one of `field` or `problem`".into())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(flatten)]
    pub source: FieldSource,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    pub radii: RadiiConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitiesConfig {
    #[serde(flatten)]
    pub source: FieldSource,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    pub radii: RadiiConfig,
}

fn default_zero_tol() -> f64 {
    crate::free_boundary::DEFAULT_ZERO_TOL
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeBoundaryConfig {
    #[serde(flatten)]
    pub source: FieldSource,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    /// Cone-condition aperture for the graph check.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cone-condition reach for the graph check.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpiConfig {
    /// "3/2", "2m" or "all" selects the built-in default sweeps.
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl EpiConfig {
    pub fn sweeps(&self) -> Result<Vec<SweepSpec>> {
        match (&self.default, &self.sweep) {
            (Some(name), None) => match name.as_str() {
                "3/2" => Ok(vec![crate::epi::default_sweep_32()]),
                "2m" => Ok(vec![crate::epi::default_sweep_2m()]),
                "all" => Ok(vec![crate::epi::default_sweep_32(), crate::epi::default_sweep_2m()]),
                other => Err(Error::Config(format!("unknown default sweep `{other}`"))),
            },
            (None, Some(spec)) => Ok(vec![spec.clone()]),
            _ => Err(Error::Config("specify exactly one of `default` or `sweep`".into())),
        }
    }
}

pub fn center_point(center: &[f64]) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (a, c) in center.iter().take(3).enumerate() {
        p[a] = *c;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_problem_roundtrip() {
        let json = r#"{
            "dim": 2, "resolution": 65,
            "datum": {"type": "cone32", "lambda": 1.0, "angle_deg": 0.0},
            "tol": 1e-9
        }"#;
        let cfg: ProblemConfig = serde_json::from_str(json).unwrap();
        let built = cfg.build(Path::new(".")).unwrap();
        assert_eq!(built.lambda_hom, Some(1.5));
        assert_eq!(built.options.tol, 1e-9);
        assert_eq!(built.problem.grid().resolution(), 65);
    }

    #[test]
    fn poly_problem_with_perturbation() {
        let json = r#"{
            "dim": 2, "resolution": 65,
            "datum": {"type": "poly2m", "m": 1, "coeffs": [1.0],
                      "perturbation": [{"l": 3, "amplitude": 0.02}]}
        }"#;
        let cfg: ProblemConfig = serde_json::from_str(json).unwrap();
        let built = cfg.build(Path::new(".")).unwrap();
        assert_eq!(built.lambda_hom, Some(2.0));
    }

    #[test]
    fn field_source_requires_exactly_one() {
        let bad: FieldSource = serde_json::from_str("{}").unwrap();
        assert!(bad.load(Path::new(".")).is_err());
    }

    #[test]
    fn epi_defaults() {
        let cfg: EpiConfig = serde_json::from_str(r#"{"default": "all"}"#).unwrap();
        assert_eq!(cfg.sweeps().unwrap().len(), 2);
        let bad: EpiConfig = serde_json::from_str(r#"{"default": "x"}"#).unwrap();
        assert!(bad.sweeps().is_err());
    }
}
