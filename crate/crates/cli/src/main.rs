use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hdiv_eigen::adapt::{adaptive_loop, error_rate};
use hdiv_eigen::io::{write_convergence_csv, write_vtk, RefinementMode, RunConfig};
use hdiv_eigen::DomainTag;

/// Adaptive divergence-conforming DG solver for the smallest Stokes eigenvalue.
#[derive(Debug, Parser)]
#[command(name = "hdiv-eigen", version)]
struct Args {
    /// square | lshape | slit
    #[arg(long, default_value = "square")]
    domain: DomainTag,
    /// Polynomial degree k of RT_k x Q_k (1..=3)
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Interior penalty parameter [default: (k+1)(k+2)]
    #[arg(long)]
    gamma: Option<f64>,
    /// Doerfler bulk parameter
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// uniform | adaptive
    #[arg(long, default_value = "adaptive")]
    mode: RefinementMode,
    /// Stop before a level with more unknowns than this
    #[arg(long, default_value_t = 200_000)]
    max_dofs: usize,
    #[arg(long, default_value_t = 25)]
    max_levels: usize,
    /// Eigensolver residual tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Reference eigenvalue for the error column, or "none" [default: built in per domain]
    #[arg(long)]
    reference_lambda: Option<String>,
    /// 0 warnings, 1 progress, 2 solver details, 3 everything
    #[arg(long, default_value_t = 1)]
    verbosity: u8,
}

fn config(args: &Args) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::new(args.domain, args.degree);
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    cfg.nu = args.nu;
    cfg.theta = args.theta;
    cfg.mode = args.mode;
    cfg.max_dofs = args.max_dofs;
    cfg.max_levels = args.max_levels;
    cfg.tol = args.tol;
    cfg.out_dir = args.out.clone();
    match args.reference_lambda.as_deref() {
        None => {}
        Some("none") => cfg.reference_lambda = None,
        Some(s) => cfg.reference_lambda = Some(s.parse().map_err(|_| format!("invalid reference eigenvalue '{s}'"))?),
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(args: Args) -> Result<(), String> {
    let level = match args.verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_target(false).init();

    let cfg = config(&args)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| format!("{}: {e}", cfg.out_dir.display()))?;
    let outcome = adaptive_loop(&cfg).map_err(|e| e.to_string())?;
    let csv = cfg.out_dir.join("convergence.csv");
    let vtk = cfg.out_dir.join("eigenfunction.vtk");
    write_convergence_csv(&outcome.records, &csv).map_err(|e| e.to_string())?;
    write_vtk(&vtk, &outcome.mesh, &outcome.dofmap, &outcome.pair, &outcome.estimate).map_err(|e| e.to_string())?;

    let last = outcome.records.last().expect("at least one level");
    println!("lambda_h = {:.12} on {} cells, N = {}", last.lambda, last.n_cells, last.n_dofs);
    if let Some(e) = last.err_lambda {
        println!("|lambda - lambda_ref| = {e:.3e}");
    }
    if let Some(s) = error_rate(&outcome.records, 4.min(outcome.records.len())) {
        println!("error slope vs N (last levels): {s:.3}");
    }
    println!("wrote {} and {}", csv.display(), vtk.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
