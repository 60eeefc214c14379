//! Run configuration and file output: convergence CSV, legacy VTK and
//! MatrixMarket.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adapt::ConvergenceRecord;
use crate::assembly::{default_gamma, DEFAULT_GAMMA_FLOOR};
use crate::eigsolver::EigenPair;
use crate::error::{Error, Result};
use crate::estimator::EstimatorBreakdown;
use crate::mesh::{DomainTag, Mesh};
use crate::sourceprob::RateTable;
use crate::spaces::{map_pressure, map_velocity, sample_pressure, sample_velocity, DofMap, PressureBasis, VelocityBasis};
use crate::sparse::{CsrMatrix, Triplets};

pub const CSV_HEADER: &str = "level,n_dofs,lambda_h,err_lambda,eta_sq,eta_R_sq,eta_E_sq,eta_J_sq,n_cells,wall_ms";

/// Reference eigenvalue of each model domain.
pub fn reference_lambda(domain: DomainTag) -> f64 {
    match domain {
        DomainTag::Square => 52.344691168,
        DomainTag::LShape => 32.13269465,
        DomainTag::Slit => 29.9168629,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

impl FromStr for RefinementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RefinementMode::Uniform),
            "adaptive" => Ok(RefinementMode::Adaptive),
            _ => Err(Error::InvalidArgument(format!("unknown refinement mode '{s}' (uniform|adaptive)"))),
        }
    }
}

impl fmt::Display for RefinementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefinementMode::Uniform => "uniform",
            RefinementMode::Adaptive => "adaptive",
        })
    }
}

/// Everything that determines a run. Runs are fully deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainTag,
    pub degree: usize,
    pub nu: f64,
    pub gamma: f64,
    pub theta: f64,
    pub mode: RefinementMode,
    pub max_dofs: usize,
    pub max_levels: usize,
    /// Eigensolver residual tolerance.
    pub tol: f64,
    pub out_dir: PathBuf,
    pub reference_lambda: Option<f64>,
    /// Cells per direction of the initial grid (see `make_domain`).
    pub initial_divisions: usize,
    pub pre_refinements: usize,
}

impl RunConfig {
    /// Defaults for a domain and degree: `nu = 1`, `theta = 1/2`, the default
    /// penalty of the degree, adaptive refinement up to `2e5` unknowns or 25
    /// levels. The square starts from a 4x4 grid; the L-shape and the slit
    /// from 2x2 cells refined uniformly once.
    pub fn new(domain: DomainTag, degree: usize) -> Self {
        let (initial_divisions, pre_refinements) = match domain {
            DomainTag::Square => (4, 0),
            DomainTag::LShape | DomainTag::Slit => (2, 1),
        };
        RunConfig {
            domain,
            degree,
            nu: 1.0,
            gamma: default_gamma(degree),
            theta: 0.5,
            mode: RefinementMode::Adaptive,
            max_dofs: 200_000,
            max_levels: 25,
            tol: 1e-10,
            out_dir: PathBuf::from("out"),
            reference_lambda: Some(reference_lambda(domain)),
            initial_divisions,
            pre_refinements,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(1..=3).contains(&self.degree) {
            return bad(format!("degree must be 1, 2 or 3, got {}", self.degree));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("viscosity must be positive, got {}", self.nu));
        }
        if !(self.gamma >= DEFAULT_GAMMA_FLOOR && self.gamma.is_finite()) {
            return bad(format!("penalty must be at least {DEFAULT_GAMMA_FLOOR}, got {}", self.gamma));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("bulk parameter must lie in (0, 1], got {}", self.theta));
        }
        if !(1e-14..=1e-6).contains(&self.tol) {
            return bad(format!("tol must lie in [1e-14, 1e-6], got {:e}", self.tol));
        }
        if self.max_levels == 0 {
            return bad("max_levels must be at least 1".into());
        }
        if let Some(r) = self.reference_lambda {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("reference eigenvalue must be positive, got {r}"));
            }
        }
        Ok(())
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the convergence history with the fixed header.
pub fn write_convergence_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no convergence records to write".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.n_dofs,
            fmt_float(r.lambda),
            r.err_lambda.map(fmt_float).unwrap_or_default(),
            fmt_float(r.eta_sq),
            fmt_float(r.eta_r_sq),
            fmt_float(r.eta_e_sq),
            fmt_float(r.eta_j_sq),
            r.n_cells,
            fmt_float(r.wall_ms),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_convergence_csv`].
pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected header '{header}'")));
    }
    let parse_err = |line: usize, what: &str| Error::InvalidArgument(format!("line {line}: bad {what}"));
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(parse_err(i + 2, "field count"));
        }
        let float = |s: &str, what: &str| s.parse::<f64>().map_err(|_| parse_err(i + 2, what));
        out.push(ConvergenceRecord {
            level: f[0].parse().map_err(|_| parse_err(i + 2, "level"))?,
            n_dofs: f[1].parse().map_err(|_| parse_err(i + 2, "n_dofs"))?,
            lambda: float(f[2], "lambda_h")?,
            err_lambda: if f[3].is_empty() { None } else { Some(float(f[3], "err_lambda")?) },
            eta_sq: float(f[4], "eta_sq")?,
            eta_r_sq: float(f[5], "eta_R_sq")?,
            eta_e_sq: float(f[6], "eta_E_sq")?,
            eta_j_sq: float(f[7], "eta_J_sq")?,
            n_cells: f[8].parse().map_err(|_| parse_err(i + 2, "n_cells"))?,
            wall_ms: float(f[9], "wall_ms")?,
        });
    }
    Ok(out)
}

pub const RATE_CSV_HEADER: &str = "level,N,err_triple,err_l2,slope_triple,slope_l2";

/// Writes a manufactured-solution rate table; slopes of the first level are empty.
pub fn write_rate_csv(table: &RateTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RATE_CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.level,
            r.n_dofs,
            fmt_float(r.errors.triple),
            fmt_float(r.errors.velocity_l2),
            r.slope_triple.map(fmt_float).unwrap_or_default(),
            r.slope_l2.map(fmt_float).unwrap_or_default(),
        )?;
    }
    w.flush()?;
    Ok(())
}

const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// Legacy VTK unstructured grid with four private corner points per cell,
/// so the discontinuous fields are shown as computed.
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    dofmap: &DofMap,
    pair: &EigenPair,
    estimate: &EstimatorBreakdown,
) -> Result<()> {
    let ncell = dofmap.cells().len();
    if estimate.cells.as_slice() != dofmap.cells() {
        return Err(Error::InvalidArgument("estimator cells do not match the dof map".into()));
    }
    let vb = VelocityBasis::new(dofmap.degree());
    let pb = PressureBasis::new(dofmap.degree());
    let vref: Vec<_> = CORNERS.iter().map(|&c| vb.eval_reference(c)).collect();
    let pref: Vec<_> = CORNERS.iter().map(|&c| pb.eval_reference(c)).collect();

    let mut points = Vec::with_capacity(4 * ncell);
    let mut velocity = Vec::with_capacity(4 * ncell);
    let mut pressure = Vec::with_capacity(4 * ncell);
    for (pos, &cid) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(cid);
        let (dx, dy) = (cell.dx(), cell.dy());
        let uc = dofmap.gather_velocity(pos, &pair.u);
        let pc = dofmap.gather_pressure(pos, &pair.p);
        for (c, corner) in CORNERS.iter().enumerate() {
            points.push(cell.to_physical(*corner));
            velocity.push(sample_velocity(&map_velocity(&vref[c], dx, dy), &uc).value);
            let (values, grads) = map_pressure(&pref[c], dx, dy);
            pressure.push(sample_pressure(&values, &grads, &pc).0);
        }
    }

    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "Stokes eigenfunction, lambda = {}", fmt_float(pair.lambda))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", points.len())?;
    for p in &points {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", ncell, 5 * ncell)?;
    for c in 0..ncell {
        writeln!(w, "4 {} {} {} {}", 4 * c, 4 * c + 1, 4 * c + 2, 4 * c + 3)?;
    }
    writeln!(w, "CELL_TYPES {ncell}")?;
    for _ in 0..ncell {
        writeln!(w, "9")?;
    }
    writeln!(w, "POINT_DATA {}", points.len())?;
    writeln!(w, "VECTORS velocity double")?;
    for v in &velocity {
        writeln!(w, "{} {} 0", v[0], v[1])?;
    }
    writeln!(w, "SCALARS pressure double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for p in &pressure {
        writeln!(w, "{p}")?;
    }
    writeln!(w, "CELL_DATA {ncell}")?;
    writeln!(w, "SCALARS eta_sq double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in estimate.per_cell() {
        writeln!(w, "{e}")?;
    }
    w.flush()?;
    Ok(())
}

/// MatrixMarket coordinate file, one-based indices.
pub fn write_matrix_market(path: &Path, a: &CsrMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (r, c, v) in a.iter() {
        writeln!(w, "{} {} {}", r + 1, c + 1, fmt_float(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a general real coordinate MatrixMarket file.
pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let bad = |msg: &str| Error::InvalidArgument(format!("MatrixMarket: {msg}"));
    let mut lines = reader.lines();
    let banner = lines.next().transpose()?.ok_or_else(|| bad("empty file"))?;
    if !banner.starts_with("%%MatrixMarket matrix coordinate real general") {
        return Err(bad("unsupported banner"));
    }
    let mut size = None;
    let mut t = None;
    for line in lines {
        let line = line?;
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match (&size, f.len()) {
            (None, 3) => {
                let dims: Vec<usize> = f.iter().map(|s| s.parse().map_err(|_| bad("size line"))).collect::<Result<_>>()?;
                size = Some(dims.clone());
                t = Some(Triplets::new(dims[0], dims[1]));
            }
            (Some(_), 3) => {
                let r: usize = f[0].parse().map_err(|_| bad("row index"))?;
                let c: usize = f[1].parse().map_err(|_| bad("column index"))?;
                let v: f64 = f[2].parse().map_err(|_| bad("value"))?;
                if r == 0 || c == 0 {
                    return Err(bad("indices are one-based"));
                }
                t.as_mut().unwrap().push(r - 1, c - 1, v);
            }
            _ => return Err(bad("malformed line")),
        }
    }
    Ok(t.ok_or_else(|| bad("missing size line"))?.to_csr())
}
