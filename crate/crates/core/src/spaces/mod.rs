//! Discrete spaces: reference bases, the contravariant Piola map for
//! rectangles and the global DOF map with hanging-edge constraints.

mod basis;
mod dofmap;

pub use basis::{
    face_normal_component, face_point, hanging_coefficients, legendre_norm_sq, shifted_legendre, PressureBasis,
    PressureRef, VelocityBasis, VelocityRef,
};
pub use dofmap::{build_dofmap, pressure_mean_vector, DofMap};

use crate::mesh::{Cell, Mesh};
use crate::quadrature::{cell_rule, edge_rule, gauss_1d, Rule1d, Rule2d};

/// Physical values of all velocity basis functions at one point.
#[derive(Debug, Clone, Default)]
pub struct VelocityPhys {
    pub values: Vec<[f64; 2]>,
    /// `grads[i][c][d] = d v_c / d x_d`
    pub grads: Vec<[[f64; 2]; 2]>,
    pub divs: Vec<f64>,
    pub laplacians: Vec<[f64; 2]>,
}

/// Contravariant Piola map `v = J v_ref / det J` with `J = diag(dx, dy)`.
pub fn map_velocity(reference: &VelocityRef, dx: f64, dy: f64) -> VelocityPhys {
    let det = dx * dy;
    let n = reference.values.len();
    let mut out = VelocityPhys {
        values: Vec::with_capacity(n),
        grads: Vec::with_capacity(n),
        divs: Vec::with_capacity(n),
        laplacians: Vec::with_capacity(n),
    };
    for i in 0..n {
        let v = reference.values[i];
        let g = reference.grads[i];
        let s = reference.second[i];
        out.values.push([v[0] / dy, v[1] / dx]);
        out.grads.push([[g[0][0] / det, g[0][1] / (dy * dy)], [g[1][0] / (dx * dx), g[1][1] / det]]);
        out.divs.push((g[0][0] + g[1][1]) / det);
        out.laplacians.push([
            (s[0][0] / (dx * dx) + s[0][1] / (dy * dy)) / dy,
            (s[1][0] / (dx * dx) + s[1][1] / (dy * dy)) / dx,
        ]);
    }
    out
}

/// Physical pressure values and gradients (pressure is mapped by value).
pub fn map_pressure(reference: &PressureRef, dx: f64, dy: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let grads = reference.grads.iter().map(|g| [g[0] / dx, g[1] / dy]).collect();
    (reference.values.clone(), grads)
}

/// Evaluates the velocity basis of `cell` at a physical point.
pub fn eval_velocity(basis: &VelocityBasis, cell: &Cell, x: [f64; 2]) -> VelocityPhys {
    map_velocity(&basis.eval_reference(cell.to_reference(x)), cell.dx(), cell.dy())
}

/// Which part of a face an integration edge covers: the whole face, or its
/// lower/upper half (coarse side of a hanging edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSegment {
    Full,
    Half(usize),
}

impl FaceSegment {
    fn index(self) -> usize {
        match self {
            FaceSegment::Full => 0,
            FaceSegment::Half(h) => 1 + h,
        }
    }

    /// Face parameter of edge parameter `s`.
    pub fn face_parameter(self, s: f64) -> f64 {
        match self {
            FaceSegment::Full => s,
            FaceSegment::Half(h) => 0.5 * (h as f64 + s),
        }
    }
}

/// Reference tabulations shared by every cell of a given degree.
#[derive(Debug, Clone)]
pub struct ElementTables {
    pub velocity: VelocityBasis,
    pub pressure: PressureBasis,
    pub cell_rule: Rule2d,
    pub edge_rule: Rule1d,
    pub cell_velocity: Vec<VelocityRef>,
    pub cell_pressure: Vec<PressureRef>,
    face_velocity: Vec<Vec<VelocityRef>>,
    face_pressure: Vec<Vec<PressureRef>>,
}

impl ElementTables {
    /// Tables on the standard rules for degree `k` (`k+2` points per direction).
    pub fn new(k: usize) -> Self {
        Self::with_rules(k, cell_rule(k).expect("valid degree"), edge_rule(k).expect("valid degree"))
    }

    /// Tables on Gauss rules with `points` points per direction.
    pub fn with_points(k: usize, points: usize) -> Self {
        let r = gauss_1d(points).expect("valid rule size");
        Self::with_rules(k, r.tensor(), r)
    }

    fn with_rules(k: usize, cell_rule: Rule2d, edge_rule: Rule1d) -> Self {
        let velocity = VelocityBasis::new(k);
        let pressure = PressureBasis::new(k);
        let cell_velocity = cell_rule.points.iter().map(|&p| velocity.eval_reference(p)).collect();
        let cell_pressure = cell_rule.points.iter().map(|&p| pressure.eval_reference(p)).collect();
        let mut face_velocity = Vec::with_capacity(12);
        let mut face_pressure = Vec::with_capacity(12);
        for face in 0..4 {
            for seg in [FaceSegment::Full, FaceSegment::Half(0), FaceSegment::Half(1)] {
                let pts: Vec<[f64; 2]> =
                    edge_rule.abscissae().map(|s| face_point(face, seg.face_parameter(s))).collect();
                face_velocity.push(pts.iter().map(|&p| velocity.eval_reference(p)).collect());
                face_pressure.push(pts.iter().map(|&p| pressure.eval_reference(p)).collect());
            }
        }
        ElementTables {
            velocity,
            pressure,
            cell_rule,
            edge_rule,
            cell_velocity,
            cell_pressure,
            face_velocity,
            face_pressure,
        }
    }

    pub fn degree(&self) -> usize {
        self.velocity.degree()
    }

    /// Velocity reference values at the edge-rule points of `face`/`segment`.
    pub fn face_velocity(&self, face: usize, segment: FaceSegment) -> &[VelocityRef] {
        &self.face_velocity[face * 3 + segment.index()]
    }

    pub fn face_pressure(&self, face: usize, segment: FaceSegment) -> &[PressureRef] {
        &self.face_pressure[face * 3 + segment.index()]
    }
}

/// Interpolates a physical vector field into the constrained velocity space
/// using the DOF functionals of the cell that owns each global DOF.
pub fn interpolate_velocity(mesh: &Mesh, dofmap: &DofMap, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let basis = VelocityBasis::new(dofmap.degree());
    let rule = gauss_1d(10).expect("valid rule size");
    let mut out = vec![0.0; dofmap.n_u()];
    for (pos, &c) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(c);
        let (dx, dy) = (cell.dx(), cell.dy());
        let reference_field = |xi: [f64; 2]| {
            let v = field(cell.to_physical(xi));
            [v[0] * dy, v[1] * dx]
        };
        let moments = basis.apply_functionals(&rule, reference_field);
        for (a, m) in moments.iter().enumerate() {
            if let [(g, c)] = dofmap.velocity_row(pos, a) {
                if *c == 1.0 {
                    out[*g] = *m;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;

/// One cell's side of an integration face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceSide {
    pub cell: crate::mesh::CellId,
    pub face: usize,
    pub segment: FaceSegment,
}

/// Sides of an integration edge: the `plus` side (whose outward normal is
/// `edge.normal`) and, for interior edges, the `minus` side.
pub fn face_sides(mesh: &Mesh, edge: &crate::mesh::Edge) -> (FaceSide, Option<FaceSide>) {
    let plus = FaceSide { cell: edge.plus.cell, face: edge.plus.face, segment: FaceSegment::Full };
    let minus = edge.minus.map(|m| {
        let segment = match edge.master {
            Some(master) => {
                let slaves = mesh.edges()[master].slaves.expect("master edge lists its slaves");
                FaceSegment::Half(if slaves[0] == edge.id { 0 } else { 1 })
            }
            None => FaceSegment::Full,
        };
        FaceSide { cell: m.cell, face: m.face, segment }
    });
    (plus, minus)
}

/// Velocity field of one cell at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VelocitySample {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub div: f64,
    pub laplacian: [f64; 2],
}

pub fn sample_velocity(phys: &VelocityPhys, coeffs: &[f64]) -> VelocitySample {
    let mut s = VelocitySample::default();
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for d in 0..2 {
            s.value[d] += c * phys.values[i][d];
            s.laplacian[d] += c * phys.laplacians[i][d];
            for e in 0..2 {
                s.grad[d][e] += c * phys.grads[i][d][e];
            }
        }
        s.div += c * phys.divs[i];
    }
    s
}

/// Pressure value and gradient from mapped basis values.
pub fn sample_pressure(values: &[f64], grads: &[[f64; 2]], coeffs: &[f64]) -> (f64, [f64; 2]) {
    let mut p = 0.0;
    let mut g = [0.0; 2];
    for ((v, gr), &c) in values.iter().zip(grads).zip(coeffs) {
        p += c * v;
        g[0] += c * gr[0];
        g[1] += c * gr[1];
    }
    (p, g)
}
