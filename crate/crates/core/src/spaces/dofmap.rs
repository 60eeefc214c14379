use std::collections::HashMap;
use std::ops::Range;

use super::basis::{hanging_coefficients, PressureBasis, VelocityBasis};
use crate::mesh::{CellId, EdgeId, FaceLink, Mesh};
use crate::quadrature::cell_rule;

/// Global numbering of the constrained `RT_k x Q_k` space.
///
/// Every local velocity DOF of an active cell maps to a (possibly empty)
/// linear combination of global DOFs: shared faces map to the same global
/// moments, boundary normal moments map to nothing (`v.n = 0`), and the
/// moments of a fine face on a hanging edge are expressed through the master
/// edge moments. Constrained DOFs never receive a global index.
#[derive(Debug, Clone)]
pub struct DofMap {
    k: usize,
    n_u: usize,
    n_p: usize,
    local_u: usize,
    local_p: usize,
    cells: Vec<CellId>,
    position: HashMap<CellId, usize>,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    /// Velocity plus pressure unknowns.
    pub fn n_total(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn local_velocity_dim(&self) -> usize {
        self.local_u
    }

    pub fn local_pressure_dim(&self) -> usize {
        self.local_p
    }

    /// Active cells in the order used for pressure numbering.
    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn position(&self, cell: CellId) -> usize {
        self.position[&cell]
    }

    /// Global combination feeding local velocity DOF `local` of the cell at
    /// `pos`.
    pub fn velocity_row(&self, pos: usize, local: usize) -> &[(usize, f64)] {
        let r = pos * self.local_u + local;
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn pressure_dofs(&self, pos: usize) -> Range<usize> {
        pos * self.local_p..(pos + 1) * self.local_p
    }

    /// Local velocity coefficients of one cell from a global vector.
    pub fn gather_velocity(&self, pos: usize, global: &[f64]) -> Vec<f64> {
        (0..self.local_u)
            .map(|a| self.velocity_row(pos, a).iter().map(|&(g, c)| c * global[g]).sum())
            .collect()
    }

    pub fn gather_pressure(&self, pos: usize, global: &[f64]) -> Vec<f64> {
        global[self.pressure_dofs(pos)].to_vec()
    }

    /// Returns a copy whose velocity unknowns are renumbered: old global
    /// index `g` becomes `perm[g]`.
    pub fn with_velocity_permutation(&self, perm: &[usize]) -> DofMap {
        assert_eq!(perm.len(), self.n_u);
        let mut out = self.clone();
        for e in &mut out.entries {
            e.0 = perm[e.0];
        }
        out
    }
}

/// Builds the global numbering for degree `k` on `mesh`.
pub fn build_dofmap(mesh: &Mesh, k: usize) -> DofMap {
    let vb = VelocityBasis::new(k);
    let local_u = vb.dim();
    let local_p = PressureBasis::new(k).dim();
    let nf = k + 1;
    let hanging = [hanging_coefficients(k, 0), hanging_coefficients(k, 1)];

    let cells: Vec<CellId> = mesh.active_cells().to_vec();
    let position: HashMap<CellId, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut edge_base: HashMap<EdgeId, usize> = HashMap::new();
    let mut next = 0usize;
    let mut base_of = |edge: EdgeId, next: &mut usize| {
        *edge_base.entry(edge).or_insert_with(|| {
            let b = *next;
            *next += nf;
            b
        })
    };

    let mut offsets = Vec::with_capacity(cells.len() * local_u + 1);
    let mut entries = Vec::new();
    offsets.push(0);
    for &c in &cells {
        let links = mesh.face_links(c);
        for (face, link) in links.iter().enumerate() {
            for i in 0..nf {
                debug_assert_eq!(vb.face_dof(face, i), face * nf + i);
                match *link {
                    FaceLink::Boundary => {}
                    FaceLink::Regular { edge, .. } | FaceLink::Master { edge } => {
                        entries.push((base_of(edge, &mut next) + i, 1.0));
                    }
                    FaceLink::Slave { edge, half, .. } => {
                        let master = mesh.edges()[edge].master.expect("slave edge has a master");
                        let base = base_of(master, &mut next);
                        for (j, &coef) in hanging[half][i].iter().enumerate() {
                            if coef.abs() > 1e-15 {
                                entries.push((base + j, coef));
                            }
                        }
                    }
                }
                offsets.push(entries.len());
            }
        }
        for _ in 4 * nf..local_u {
            entries.push((next, 1.0));
            next += 1;
            offsets.push(entries.len());
        }
    }

    DofMap {
        k,
        n_u: next,
        n_p: cells.len() * local_p,
        local_u,
        local_p,
        cells,
        position,
        offsets,
        entries,
    }
}

/// `c_i = integral of pressure basis function i over the domain`.
pub fn pressure_mean_vector(mesh: &Mesh, dofmap: &DofMap) -> Vec<f64> {
    let pb = PressureBasis::new(dofmap.degree());
    let rule = cell_rule(dofmap.degree()).expect("valid degree");
    let reference: Vec<_> = rule.points.iter().map(|&p| pb.eval_reference(p).values).collect();
    let mut c = vec![0.0; dofmap.n_p()];
    for (pos, &cell) in dofmap.cells().iter().enumerate() {
        let area = mesh.cell(cell).area();
        for (g, i) in dofmap.pressure_dofs(pos).zip(0..) {
            let m: f64 = rule.weights.iter().zip(&reference).map(|(w, v)| w * v[i]).sum();
            c[g] = if m.abs() < 1e-14 { 0.0 } else { m * area };
        }
    }
    c
}
