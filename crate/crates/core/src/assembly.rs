//! Assembly of the symmetric interior-penalty form, the divergence coupling
//! and the velocity mass matrix, condensed onto the constrained DOFs.
//!
//! Interior faces use the sum operator for gradients, `{{grad u}} = grad u+ +
//! grad u-`, together with the `nu/2` prefactor, and the jump
//! `[[v (x) n]] = (v+ - v-) (x) n+`. On boundary faces the jump is the trace
//! itself and the penalty carries an extra factor 2.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::spaces::{
    face_sides, map_pressure, map_velocity, pressure_mean_vector, DofMap, ElementTables, FaceSide, VelocityPhys,
};
use crate::sparse::CsrMatrix;

/// Smallest accepted penalty parameter.
pub const DEFAULT_GAMMA_FLOOR: f64 = 0.5;

/// Default penalty `d(d+1)` with `d = k+1` the polynomial degree of `RT_k`.
///
/// Smaller values such as `k(k+1)/2` leave the form indefinite on square
/// cells and produce spurious eigenvalues.
pub fn default_gamma(k: usize) -> f64 {
    ((k + 1) * (k + 2)) as f64
}

/// Condensed operators of the discrete Stokes problem.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// DG velocity form `a_h`, `n_u x n_u`.
    pub a: CsrMatrix,
    /// `(B v)_q = (q, div v)`, `n_p x n_u`.
    pub b: CsrMatrix,
    /// Velocity mass matrix.
    pub m: CsrMatrix,
    /// `c_q = integral of q`.
    pub c: Vec<f64>,
    pub nu: f64,
    pub gamma: f64,
    pub k: usize,
}

/// Global velocity DOF sets per cell and face-neighbor lists, used to build
/// sparsity patterns before accumulation.
struct Connectivity {
    cell_dofs: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    dof_cells: Vec<Vec<usize>>,
}

impl Connectivity {
    fn new(mesh: &Mesh, dofmap: &DofMap) -> Self {
        let ncell = dofmap.cells().len();
        let mut cell_dofs = Vec::with_capacity(ncell);
        let mut dof_cells = vec![Vec::new(); dofmap.n_u()];
        for pos in 0..ncell {
            let mut set: Vec<usize> = (0..dofmap.local_velocity_dim())
                .flat_map(|a| dofmap.velocity_row(pos, a).iter().map(|&(g, _)| g))
                .collect();
            set.sort_unstable();
            set.dedup();
            for &g in &set {
                dof_cells[g].push(pos);
            }
            cell_dofs.push(set);
        }
        let mut neighbors = vec![Vec::new(); ncell];
        for e in mesh.edges() {
            if let (true, Some(m)) = (e.is_integration_face(), e.minus) {
                let (p, q) = (dofmap.position(e.plus.cell), dofmap.position(m.cell));
                neighbors[p].push(q);
                neighbors[q].push(p);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Connectivity { cell_dofs, neighbors, dof_cells }
    }

    fn velocity_pattern(&self, with_neighbors: bool) -> Vec<Vec<usize>> {
        let mut rows = Vec::with_capacity(self.dof_cells.len());
        let mut scratch = Vec::new();
        for cells in &self.dof_cells {
            scratch.clear();
            for &c in cells {
                scratch.extend_from_slice(&self.cell_dofs[c]);
                if with_neighbors {
                    for &n in &self.neighbors[c] {
                        scratch.extend_from_slice(&self.cell_dofs[n]);
                    }
                }
            }
            scratch.sort_unstable();
            scratch.dedup();
            rows.push(scratch.clone());
        }
        rows
    }
}

/// Scatters a dense local matrix through the constraint rows.
fn scatter(
    target: &mut CsrMatrix,
    rows: &[&[(usize, f64)]],
    cols: &[&[(usize, f64)]],
    local: &[f64],
) {
    let nc = cols.len();
    for (a, ra) in rows.iter().enumerate() {
        for (b, cb) in cols.iter().enumerate() {
            let v = local[a * nc + b];
            if v == 0.0 {
                continue;
            }
            for &(g, cg) in ra.iter() {
                for &(h, ch) in cb.iter() {
                    target.add(g, h, cg * ch * v);
                }
            }
        }
    }
}

/// Per-point data of one side of a face.
pub(crate) struct SideValues {
    pub phys: Vec<VelocityPhys>,
}

pub(crate) fn side_values(mesh: &Mesh, tables: &ElementTables, side: &FaceSide) -> SideValues {
    let cell = mesh.cell(side.cell);
    let (dx, dy) = (cell.dx(), cell.dy());
    SideValues {
        phys: tables.face_velocity(side.face, side.segment).iter().map(|r| map_velocity(r, dx, dy)).collect(),
    }
}

/// Assembles `A`, `B`, `M` and `c` for degree `k`.
pub fn assemble(mesh: &Mesh, dofmap: &DofMap, nu: f64, gamma: f64, k: usize) -> Result<AssembledSystem> {
    assemble_with_floor(mesh, dofmap, nu, gamma, k, DEFAULT_GAMMA_FLOOR)
}

pub fn assemble_with_floor(
    mesh: &Mesh,
    dofmap: &DofMap,
    nu: f64,
    gamma: f64,
    k: usize,
    gamma_floor: f64,
) -> Result<AssembledSystem> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    if !(gamma >= gamma_floor) {
        return Err(Error::InvalidArgument(format!(
            "penalty parameter {gamma} is below the floor {gamma_floor}; the DG form may lose coercivity"
        )));
    }
    if dofmap.degree() != k {
        return Err(Error::InvalidArgument(format!("dof map has degree {}, requested {k}", dofmap.degree())));
    }
    let tables = ElementTables::new(k);
    let conn = Connectivity::new(mesh, dofmap);
    let mut a = CsrMatrix::from_pattern(dofmap.n_u(), conn.velocity_pattern(true));
    let mut m = CsrMatrix::from_pattern(dofmap.n_u(), conn.velocity_pattern(false));
    let b_rows: Vec<Vec<usize>> = (0..dofmap.cells().len())
        .flat_map(|pos| std::iter::repeat_n(conn.cell_dofs[pos].clone(), dofmap.local_pressure_dim()))
        .collect();
    let mut b = CsrMatrix::from_pattern(dofmap.n_u(), b_rows);

    let nl = dofmap.local_velocity_dim();
    let npl = dofmap.local_pressure_dim();
    let mut a_loc = vec![0.0; nl * nl];
    let mut m_loc = vec![0.0; nl * nl];
    let mut b_loc = vec![0.0; npl * nl];

    for (pos, &cid) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(cid);
        let (dx, dy) = (cell.dx(), cell.dy());
        let jac = dx * dy;
        a_loc.fill(0.0);
        m_loc.fill(0.0);
        b_loc.fill(0.0);
        for ((_, w), (vr, pr)) in tables.cell_rule.iter().zip(tables.cell_velocity.iter().zip(&tables.cell_pressure)) {
            let phys = map_velocity(vr, dx, dy);
            let (q, _) = map_pressure(pr, dx, dy);
            let wj = w * jac;
            for i in 0..nl {
                let (gi, vi) = (phys.grads[i], phys.values[i]);
                for j in 0..nl {
                    let (gj, vj) = (phys.grads[j], phys.values[j]);
                    let gg = gi[0][0] * gj[0][0] + gi[0][1] * gj[0][1] + gi[1][0] * gj[1][0] + gi[1][1] * gj[1][1];
                    a_loc[i * nl + j] += wj * nu * gg;
                    m_loc[i * nl + j] += wj * (vi[0] * vj[0] + vi[1] * vj[1]);
                }
                for (r, qr) in q.iter().enumerate() {
                    b_loc[r * nl + i] += wj * qr * phys.divs[i];
                }
            }
        }
        let rows: Vec<&[(usize, f64)]> = (0..nl).map(|i| dofmap.velocity_row(pos, i)).collect();
        scatter(&mut a, &rows, &rows, &a_loc);
        scatter(&mut m, &rows, &rows, &m_loc);
        for (r, g) in dofmap.pressure_dofs(pos).enumerate() {
            for (i, row) in rows.iter().enumerate() {
                let v = b_loc[r * nl + i];
                if v != 0.0 {
                    for &(h, ch) in row.iter() {
                        b.add(g, h, ch * v);
                    }
                }
            }
        }
    }

    for edge in mesh.active_edges() {
        let he = edge.length();
        let n = edge.normal;
        let (plus, minus) = face_sides(mesh, edge);
        let pv = side_values(mesh, &tables, &plus);
        let ppos = dofmap.position(plus.cell);
        let weights: Vec<f64> = tables.edge_rule.weights.iter().map(|w| w * he).collect();
        match minus {
            Some(minus) => {
                let mv = side_values(mesh, &tables, &minus);
                let mpos = dofmap.position(minus.cell);
                let nt = 2 * nl;
                let mut loc = vec![0.0; nt * nt];
                let penalty = nu * gamma / he;
                for (qp, &w) in weights.iter().enumerate() {
                    // Combined local functions: jump values and summed normal gradients.
                    let mut jump = Vec::with_capacity(nt);
                    let mut gn = Vec::with_capacity(nt);
                    for (side, sign) in [(&pv.phys[qp], 1.0), (&mv.phys[qp], -1.0)] {
                        for i in 0..nl {
                            let v = side.values[i];
                            let g = side.grads[i];
                            jump.push([sign * v[0], sign * v[1]]);
                            gn.push([g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]]);
                        }
                    }
                    for i in 0..nt {
                        for j in 0..nt {
                            let jj = jump[i][0] * jump[j][0] + jump[i][1] * jump[j][1];
                            let c_ji = gn[j][0] * jump[i][0] + gn[j][1] * jump[i][1];
                            let c_ij = gn[i][0] * jump[j][0] + gn[i][1] * jump[j][1];
                            loc[i * nt + j] += w * (penalty * jj - 0.5 * nu * (c_ji + c_ij));
                        }
                    }
                }
                let rows: Vec<&[(usize, f64)]> = (0..nl)
                    .map(|i| dofmap.velocity_row(ppos, i))
                    .chain((0..nl).map(|i| dofmap.velocity_row(mpos, i)))
                    .collect();
                scatter(&mut a, &rows, &rows, &loc);
            }
            None => {
                let mut loc = vec![0.0; nl * nl];
                let penalty = 2.0 * nu * gamma / he;
                for (qp, &w) in weights.iter().enumerate() {
                    let side = &pv.phys[qp];
                    for i in 0..nl {
                        let vi = side.values[i];
                        let gi = side.grads[i];
                        let gni = [gi[0][0] * n[0] + gi[0][1] * n[1], gi[1][0] * n[0] + gi[1][1] * n[1]];
                        for j in 0..nl {
                            let vj = side.values[j];
                            let gj = side.grads[j];
                            let gnj = [gj[0][0] * n[0] + gj[0][1] * n[1], gj[1][0] * n[0] + gj[1][1] * n[1]];
                            let vv = vi[0] * vj[0] + vi[1] * vj[1];
                            let c_ji = gnj[0] * vi[0] + gnj[1] * vi[1];
                            let c_ij = gni[0] * vj[0] + gni[1] * vj[1];
                            loc[i * nl + j] += w * (penalty * vv - nu * (c_ji + c_ij));
                        }
                    }
                }
                let rows: Vec<&[(usize, f64)]> = (0..nl).map(|i| dofmap.velocity_row(ppos, i)).collect();
                scatter(&mut a, &rows, &rows, &loc);
            }
        }
    }

    Ok(AssembledSystem { a, b, m, c: pressure_mean_vector(mesh, dofmap), nu, gamma, k })
}

/// Load vector `(f, phi_i)` over the constrained velocity DOFs.
pub fn assemble_load(mesh: &Mesh, dofmap: &DofMap, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    assemble_load_with(mesh, dofmap, &ElementTables::new(dofmap.degree()), f)
}

pub(crate) fn assemble_load_with(
    mesh: &Mesh,
    dofmap: &DofMap,
    tables: &ElementTables,
    f: impl Fn([f64; 2]) -> [f64; 2],
) -> Vec<f64> {
    let nl = dofmap.local_velocity_dim();
    let mut out = vec![0.0; dofmap.n_u()];
    for (pos, &cid) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(cid);
        let (dx, dy) = (cell.dx(), cell.dy());
        let mut loc = vec![0.0; nl];
        for ((p, w), vr) in tables.cell_rule.iter().zip(&tables.cell_velocity) {
            let fx = f(cell.to_physical(*p));
            if fx == [0.0, 0.0] {
                continue;
            }
            let phys = map_velocity(vr, dx, dy);
            for i in 0..nl {
                loc[i] += w * dx * dy * (fx[0] * phys.values[i][0] + fx[1] * phys.values[i][1]);
            }
        }
        for (i, v) in loc.iter().enumerate() {
            for &(g, c) in dofmap.velocity_row(pos, i) {
                out[g] += c * v;
            }
        }
    }
    out
}
