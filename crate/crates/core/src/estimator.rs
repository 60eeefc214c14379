//! Residual a posteriori error estimator for the discrete eigenpair.
//!
//! Per active cell `K`:
//! - `eta_R^2 = h_K^2 / nu * ||lambda u + nu lap u - grad p||_K^2`
//! - `eta_E^2 = sum over interior faces of h_E / nu * ||[[(p I - nu grad u) n]]||_E^2`
//! - `eta_J^2 = sum over all faces of nu gamma / h_E * ||[[u (x) n]]||_E^2`
//!
//! Face terms are added in full to every cell adjacent to the face. `h_K` is
//! the cell diameter; on hanging faces `h_E` is the length of the fine edge.

use crate::eigsolver::EigenPair;
use crate::error::{Error, Result};
use crate::mesh::{CellId, Mesh};
use crate::spaces::{face_sides, map_pressure, map_velocity, sample_pressure, sample_velocity, DofMap, ElementTables};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorBreakdown {
    /// Active cells in ascending id order; the per-cell vectors follow it.
    pub cells: Vec<CellId>,
    pub eta_r_sq: Vec<f64>,
    pub eta_e_sq: Vec<f64>,
    pub eta_j_sq: Vec<f64>,
}

impl EstimatorBreakdown {
    /// `eta_K^2` per cell.
    pub fn per_cell(&self) -> Vec<f64> {
        (0..self.cells.len()).map(|i| self.eta_r_sq[i] + self.eta_e_sq[i] + self.eta_j_sq[i]).collect()
    }

    pub fn total(&self) -> f64 {
        self.per_cell().iter().sum()
    }

    pub fn total_r(&self) -> f64 {
        self.eta_r_sq.iter().sum()
    }

    pub fn total_e(&self) -> f64 {
        self.eta_e_sq.iter().sum()
    }

    pub fn total_j(&self) -> f64 {
        self.eta_j_sq.iter().sum()
    }

    /// `(cell, eta_K^2)` pairs for marking.
    pub fn indicators(&self) -> Vec<(CellId, f64)> {
        self.cells.iter().copied().zip(self.per_cell()).collect()
    }
}

/// Estimator of a converged eigenpair.
pub fn estimate(mesh: &Mesh, dofmap: &DofMap, pair: &EigenPair, nu: f64, gamma: f64) -> EstimatorBreakdown {
    estimate_fields(mesh, dofmap, pair.lambda, &pair.u, &pair.p, nu, gamma)
}

/// Estimator for arbitrary coefficient vectors `u`, `p` and value `lambda`.
pub fn estimate_fields(
    mesh: &Mesh,
    dofmap: &DofMap,
    lambda: f64,
    u: &[f64],
    p: &[f64],
    nu: f64,
    gamma: f64,
) -> EstimatorBreakdown {
    let tables = ElementTables::new(dofmap.degree());
    estimate_with_tables(mesh, dofmap, &tables, lambda, u, p, nu, gamma)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_with_tables(
    mesh: &Mesh,
    dofmap: &DofMap,
    tables: &ElementTables,
    lambda: f64,
    u: &[f64],
    p: &[f64],
    nu: f64,
    gamma: f64,
) -> EstimatorBreakdown {
    assert_eq!(u.len(), dofmap.n_u());
    assert_eq!(p.len(), dofmap.n_p());
    let ncell = dofmap.cells().len();
    let mut eta_r_sq = vec![0.0; ncell];
    let mut eta_e_sq = vec![0.0; ncell];
    let mut eta_j_sq = vec![0.0; ncell];

    for (pos, &cid) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(cid);
        let (dx, dy) = (cell.dx(), cell.dy());
        let uc = dofmap.gather_velocity(pos, u);
        let pc = dofmap.gather_pressure(pos, p);
        let mut sum = 0.0;
        for ((_, w), (vr, pr)) in tables.cell_rule.iter().zip(tables.cell_velocity.iter().zip(&tables.cell_pressure)) {
            let s = sample_velocity(&map_velocity(vr, dx, dy), &uc);
            let (values, grads) = map_pressure(pr, dx, dy);
            let (_, gp) = sample_pressure(&values, &grads, &pc);
            let r = [
                lambda * s.value[0] + nu * s.laplacian[0] - gp[0],
                lambda * s.value[1] + nu * s.laplacian[1] - gp[1],
            ];
            sum += w * dx * dy * (r[0] * r[0] + r[1] * r[1]);
        }
        let h = cell.diameter();
        eta_r_sq[pos] = h * h / nu * sum;
    }

    for edge in mesh.active_edges() {
        let he = edge.length();
        let n = edge.normal;
        let (plus, minus) = face_sides(mesh, edge);
        let ppos = dofmap.position(plus.cell);
        let trace = |side: &crate::spaces::FaceSide, pos: usize| {
            let cell = mesh.cell(side.cell);
            let (dx, dy) = (cell.dx(), cell.dy());
            let uc = dofmap.gather_velocity(pos, u);
            let pc = dofmap.gather_pressure(pos, p);
            let vel = tables.face_velocity(side.face, side.segment);
            let pre = tables.face_pressure(side.face, side.segment);
            vel.iter()
                .zip(pre)
                .map(|(vr, pr)| {
                    let s = sample_velocity(&map_velocity(vr, dx, dy), &uc);
                    let pv: f64 = pr.values.iter().zip(&pc).map(|(a, b)| a * b).sum();
                    // Normal stress (p I - nu grad u) n and the trace.
                    let gn = [s.grad[0][0] * n[0] + s.grad[0][1] * n[1], s.grad[1][0] * n[0] + s.grad[1][1] * n[1]];
                    ([pv * n[0] - nu * gn[0], pv * n[1] - nu * gn[1]], s.value)
                })
                .collect::<Vec<_>>()
        };
        let tp = trace(&plus, ppos);
        let weights = tables.edge_rule.weights.iter().map(|w| w * he);
        match minus {
            Some(minus) => {
                let mpos = dofmap.position(minus.cell);
                let tm = trace(&minus, mpos);
                let (mut stress, mut jump) = (0.0, 0.0);
                for ((w, (sp, vp)), (sm, vm)) in weights.zip(&tp).zip(&tm) {
                    let ds = [sp[0] - sm[0], sp[1] - sm[1]];
                    let dv = [vp[0] - vm[0], vp[1] - vm[1]];
                    stress += w * (ds[0] * ds[0] + ds[1] * ds[1]);
                    jump += w * (dv[0] * dv[0] + dv[1] * dv[1]);
                }
                let e = he / nu * stress;
                let j = nu * gamma / he * jump;
                for pos in [ppos, mpos] {
                    eta_e_sq[pos] += e;
                    eta_j_sq[pos] += j;
                }
            }
            None => {
                let jump: f64 = weights.zip(&tp).map(|(w, (_, v))| w * (v[0] * v[0] + v[1] * v[1])).sum();
                eta_j_sq[ppos] += nu * gamma / he * jump;
            }
        }
    }

    EstimatorBreakdown { cells: dofmap.cells().to_vec(), eta_r_sq, eta_e_sq, eta_j_sq }
}

/// Efficiency ratio of one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EfficiencyRatio {
    Ratio(f64),
    /// The eigenvalue error vanished to machine precision.
    Saturated,
}

impl EfficiencyRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            EfficiencyRatio::Ratio(r) => Some(r),
            EfficiencyRatio::Saturated => None,
        }
    }
}

/// `eta_l^2 / |lambda_ref - lambda_l|` per level.
pub fn efficiency_ratio(eta_sq: &[f64], lambda: &[f64], lambda_ref: f64) -> Result<Vec<EfficiencyRatio>> {
    if eta_sq.len() != lambda.len() {
        return Err(Error::InvalidArgument("estimator and eigenvalue histories differ in length".into()));
    }
    if eta_sq.len() < 2 {
        return Err(Error::InvalidArgument("efficiency ratios need at least two levels".into()));
    }
    Ok(eta_sq
        .iter()
        .zip(lambda)
        .map(|(&e, &l)| {
            let err = (lambda_ref - l).abs();
            if err <= 4.0 * f64::EPSILON * lambda_ref.abs() {
                EfficiencyRatio::Saturated
            } else {
                EfficiencyRatio::Ratio(e / err)
            }
        })
        .collect())
}
