//! Command line laboratory: solve thin obstacle problems, emit radial
//! diagnostics, run epiperimetric sweeps, extract free boundaries, and run
//! the validation battery.

use clap::{Args, Parser, Subcommand};
use signorini::config::{
    center_point, EpiConfig, FreeBoundaryConfig, IdentitiesConfig, ProblemConfig, ProfileConfig,
};
use signorini::epi::{perturbation_sweep_jobs, sweep_csv};
use signorini::error::{Error, Result};
use signorini::free_boundary::{
    classify_points, coincidence_set, free_boundary_points, graph_fit, local_frame,
};
use signorini::radial::{nondegeneracy_constant, profile_csv, radial_profile, weiss_decay_fit};
use signorini::solver::solve;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "signorini",
    about = "Thin obstacle problem laboratory: solver, monotonicity diagnostics, epiperimetric sweeps, free boundary charts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the seeded suites and sweeps.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker pool size for independent jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the grid resolution of the configured problem.
    #[arg(long)]
    resolution: Option<usize>,
    /// Override the solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem; writes the field and a JSON report.
    Solve(Common),
    /// Radial profile H, D, N, W of a field or solved problem.
    Profile(Common),
    /// Epiperimetric gain experiments (a sweep or the built-in defaults).
    Epi(Common),
    /// Free boundary chart of a solved field.
    Fb(Common),
    /// Radial derivative identity residuals.
    Identities(Common),
    /// Run the validation battery and print the pass/fail matrix.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Identity suite only (under a minute).
        #[arg(long)]
        quick: bool,
    },
}

fn read_config<T: serde::de::DeserializeOwned>(common: &Common) -> Result<(T, PathBuf)> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("malformed config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((cfg, base))
}

fn apply_overrides(cfg: &mut ProblemConfig, common: &Common) {
    if let Some(r) = common.resolution {
        cfg.resolution = r;
    }
    if let Some(t) = common.tol {
        cfg.tol = Some(t);
    }
}

fn cmd_solve(common: &Common) -> Result<()> {
    let (mut cfg, base): (ProblemConfig, _) = read_config(common)?;
    apply_overrides(&mut cfg, common);
    let built = cfg.build(&base)?;
    let sol = solve(&built.problem, &built.options)?;
    std::fs::create_dir_all(&common.out)?;
    signorini::io::write_field(&common.out.join("solution.bin"), &sol.field)?;
    let report = serde_json::json!({
        "iterations": sol.iterations,
        "final_update": sol.final_update,
        "converged": sol.converged,
        "complementarity": sol.complementarity,
        "lambda_hom": built.lambda_hom,
    });
    std::fs::write(
        common.out.join("solve_report.json"),
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!(
        "solved in {} sweeps (converged: {}), complementarity {:.3e}",
        sol.iterations, sol.converged, sol.complementarity.max_product
    );
    Ok(())
}

fn cmd_profile(common: &Common) -> Result<()> {
    let (mut cfg, base): (ProfileConfig, _) = read_config(common)?;
    if let Some(p) = &mut cfg.source.problem {
        apply_overrides(p, common);
    }
    let field = cfg.source.load(&base)?;
    let profile = radial_profile(&field, center_point(&cfg.center), &cfg.radii.build())?;
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join("profile.csv"), profile_csv(&profile))?;
    let decay = weiss_decay_fit(&profile);
    let nondeg = nondegeneracy_constant(&profile);
    let n_monotone = profile.n.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b >= a - 1e-3,
        _ => true,
    });
    let w_monotone = profile.w.windows(2).all(|w| w[1] >= w[0] - 1e-3);
    let report = serde_json::json!({
        "profile": profile,
        "decay_fit": decay,
        "nondegeneracy": nondeg,
        "n_monotone": n_monotone,
        "w_monotone": w_monotone,
    });
    std::fs::write(
        common.out.join("profile_report.json"),
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!(
        "profile over {} radii: N monotone {}, W monotone {}",
        profile.radii.len(),
        n_monotone,
        w_monotone
    );
    Ok(())
}

fn cmd_epi(common: &Common) -> Result<()> {
    let (cfg, _): (EpiConfig, _) = read_config(common)?;
    let mut opts = signorini::solver::SolverOptions::default();
    if let Some(t) = cfg.tol.or(common.tol) {
        opts.tol = t;
    }
    std::fs::create_dir_all(&common.out)?;
    for (i, mut spec) in cfg.sweeps()?.into_iter().enumerate() {
        if let Some(r) = common.resolution {
            spec.resolutions = vec![r];
        }
        let rows = perturbation_sweep_jobs(&spec, &opts, common.jobs);
        let csv = sweep_csv(&rows);
        std::fs::write(common.out.join(format!("epi_sweep_{i}.csv")), &csv)?;
        let table: Vec<_> = rows.iter().map(|r| &r.experiment).collect();
        std::fs::write(
            common.out.join(format!("epi_sweep_{i}.json")),
            serde_json::to_string_pretty(&table).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        let kappas: Vec<f64> = rows.iter().filter_map(|r| r.experiment.kappa).collect();
        let min = kappas.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "sweep {i}: {} rows, {} with kappa, min kappa {:.4}",
            rows.len(),
            kappas.len(),
            min
        );
    }
    Ok(())
}

fn cmd_fb(common: &Common) -> Result<()> {
    let (mut cfg, base): (FreeBoundaryConfig, _) = read_config(common)?;
    if let Some(p) = &mut cfg.source.problem {
        apply_overrides(p, common);
    }
    let field = cfg.source.load(&base)?;
    let mask = coincidence_set(&field, cfg.zero_tol);
    let points = free_boundary_points(&field, &mask, cfg.zero_tol);
    let classified = classify_points(&field, &points)?;
    let mut framed = Vec::new();
    for c in &classified.points {
        if let Ok(frame) = local_frame(&field, c.point) {
            framed.push((*c, frame));
        }
    }
    let graph = graph_fit(&field, &framed, cfg.zero_tol, cfg.epsilon, cfg.delta).ok();
    std::fs::create_dir_all(&common.out)?;
    let chart = serde_json::json!({
        "contact_nodes": mask.count(),
        "boundary_points": points,
        "classified": classified,
        "frames": framed.iter().map(|(c, f)| serde_json::json!({
            "point": c.point, "n0": c.n0, "regular": c.regular,
            "amplitude": f.amplitude, "direction": f.direction,
            "reliable": f.reliable,
        })).collect::<Vec<_>>(),
        "graph": graph,
    });
    std::fs::write(
        common.out.join("free_boundary.json"),
        serde_json::to_string_pretty(&chart).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    let mut csv = String::from("x1,x2,x3,n0,regular\n");
    for c in &classified.points {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.6},{}\n",
            c.point[0], c.point[1], c.point[2], c.n0, c.regular
        ));
    }
    std::fs::write(common.out.join("free_boundary.csv"), csv)?;
    println!(
        "contact nodes: {}, boundary points: {}, classified: {} ({} skipped)",
        mask.count(),
        points.len(),
        classified.points.len(),
        classified.skipped
    );
    Ok(())
}

fn cmd_identities(common: &Common) -> Result<()> {
    let (mut cfg, base): (IdentitiesConfig, _) = read_config(common)?;
    if let Some(p) = &mut cfg.source.problem {
        apply_overrides(p, common);
    }
    let field = cfg.source.load(&base)?;
    let report =
        signorini::radial::check_identities(&field, center_point(&cfg.center), &cfg.radii.build())?;
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(
        common.out.join("identities.json"),
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!("max identity residual {:.3e}", report.max_residual);
    Ok(())
}

fn cmd_validate(common: &Common, quick: bool) -> Result<bool> {
    let results = signorini::validate::run(&common.out, common.seed, quick, common.jobs)?;
    let mut all = true;
    for r in &results {
        println!("{}", r.line());
        all &= r.passed;
    }
    println!("{}", if all { "validation PASSED" } else { "validation FAILED" });
    Ok(all)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // malformed invocation: print the message (includes usage)
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(c) => cmd_solve(c).map(|_| true),
        Command::Profile(c) => cmd_profile(c).map(|_| true),
        Command::Epi(c) => cmd_epi(c).map(|_| true),
        Command::Fb(c) => cmd_fb(c).map(|_| true),
        Command::Identities(c) => cmd_identities(c).map(|_| true),
        Command::Validate { common, quick } => cmd_validate(common, *quick),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
