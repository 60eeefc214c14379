//! Solve, estimate, mark and refine.

use std::collections::BTreeSet;
use std::time::Instant;

use log::info;

use crate::assembly::assemble;
use crate::eigsolver::{smallest_eigenpair, EigenOptions, EigenPair, Pencil};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorBreakdown};
use crate::io::{RefinementMode, RunConfig};
use crate::mesh::{make_domain, CellId, Mesh};
use crate::spaces::{build_dofmap, DofMap};

/// One row of a convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    /// Velocity plus pressure unknowns after condensation.
    pub n_dofs: usize,
    pub lambda: f64,
    /// `|lambda_ref - lambda|` when a reference value is configured.
    pub err_lambda: Option<f64>,
    pub eta_sq: f64,
    pub eta_r_sq: f64,
    pub eta_e_sq: f64,
    pub eta_j_sq: f64,
    pub n_cells: usize,
    pub wall_ms: f64,
}

/// Bulk marking: the smallest set of cells whose indicators add up to at
/// least `theta` times the total. Cells are taken by decreasing indicator,
/// ties by ascending id.
pub fn doerfler_mark(indicators: &[(CellId, f64)], theta: f64) -> Result<BTreeSet<CellId>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("bulk parameter must lie in (0, 1], got {theta}")));
    }
    if let Some(&(c, v)) = indicators.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("indicator of cell {c} is {v}")));
    }
    let mut sorted: Vec<(CellId, f64)> = indicators.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: f64 = sorted.iter().map(|&(_, v)| v).sum();
    let mut marked = BTreeSet::new();
    if total == 0.0 {
        return Ok(marked);
    }
    let goal = theta * total;
    let mut acc = 0.0;
    for (c, v) in sorted {
        if acc >= goal {
            break;
        }
        acc += v;
        marked.insert(c);
    }
    Ok(marked)
}

/// Final level of a run together with its history.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub pair: EigenPair,
    pub estimate: EstimatorBreakdown,
}

/// Initial mesh of a run: `initial_divisions` per direction followed by
/// `pre_refinements` uniform refinements.
pub fn initial_mesh(config: &RunConfig) -> Result<Mesh> {
    let mut mesh = make_domain(config.domain, config.initial_divisions)?;
    for _ in 0..config.pre_refinements {
        mesh = mesh.refine_uniform();
    }
    Ok(mesh)
}

/// Runs the adaptive (or uniform) loop. A level whose problem size exceeds
/// `max_dofs` is not solved; the loop also stops after `max_levels` levels.
pub fn adaptive_loop(config: &RunConfig) -> Result<LoopOutcome> {
    config.validate()?;
    let opts = EigenOptions { tol: config.tol, ..EigenOptions::default() };
    let mut mesh = initial_mesh(config)?;
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut last = None;
    for level in 0..config.max_levels {
        debug_assert!(mesh.check_invariants().is_ok());
        let start = Instant::now();
        let dofmap = build_dofmap(&mesh, config.degree);
        let n_dofs = dofmap.n_u() + dofmap.n_p();
        if n_dofs > config.max_dofs {
            if records.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "initial mesh has {n_dofs} unknowns, above max_dofs = {}",
                    config.max_dofs
                )));
            }
            break;
        }
        let at = |e: Error| Error::AtLevel { level, source: Box::new(e) };
        let sys = assemble(&mesh, &dofmap, config.nu, config.gamma, config.degree).map_err(at)?;
        let pencil = Pencil::from_blocks(&sys.a, &sys.b, &sys.c, &sys.m);
        let pair = smallest_eigenpair(&pencil, &opts).map_err(at)?;
        let est = estimate(&mesh, &dofmap, &pair, config.nu, config.gamma);
        let record = ConvergenceRecord {
            level,
            n_dofs,
            lambda: pair.lambda,
            err_lambda: config.reference_lambda.map(|r| (r - pair.lambda).abs()),
            eta_sq: est.total(),
            eta_r_sq: est.total_r(),
            eta_e_sq: est.total_e(),
            eta_j_sq: est.total_j(),
            n_cells: mesh.num_active(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        info!(
            "level {level}: cells {}, N {n_dofs}, lambda {:.12}, eta^2 {:.4e}, {:.0} ms",
            record.n_cells, record.lambda, record.eta_sq, record.wall_ms
        );
        records.push(record);

        let next = if level + 1 < config.max_levels {
            match config.mode {
                RefinementMode::Uniform => Some(mesh.refine_uniform()),
                RefinementMode::Adaptive => {
                    let marked = doerfler_mark(&est.indicators(), config.theta)?;
                    if marked.is_empty() {
                        None
                    } else {
                        Some(mesh.refine(&marked)?)
                    }
                }
            }
        } else {
            None
        };
        match next {
            Some(next) => {
                let prev = std::mem::replace(&mut mesh, next);
                last = Some((prev, dofmap, pair, est));
            }
            None => {
                last = Some((mesh, dofmap, pair, est));
                break;
            }
        }
    }
    let (mesh, dofmap, pair, estimate) = last.expect("at least one level is solved");
    Ok(LoopOutcome { records, mesh, dofmap, pair, estimate })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope of the eigenvalue error against `N` over the last `last` levels
/// (all levels when `last` is 0).
pub fn error_rate(records: &[ConvergenceRecord], last: usize) -> Option<f64> {
    let tail = if last == 0 || last > records.len() { records } else { &records[records.len() - last..] };
    let n: Vec<f64> = tail.iter().map(|r| r.n_dofs as f64).collect();
    let e: Option<Vec<f64>> = tail.iter().map(|r| r.err_lambda).collect();
    log_slope(&n, &e?)
}

/// Ratios `err_l / err_{l+1}` of consecutive levels.
pub fn error_ratios(records: &[ConvergenceRecord]) -> Vec<f64> {
    records
        .windows(2)
        .filter_map(|w| Some(w[0].err_lambda? / w[1].err_lambda?))
        .collect()
}
