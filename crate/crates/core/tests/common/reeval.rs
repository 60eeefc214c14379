//! Re-evaluation of the quadratic forms and the estimator with higher-order
//! rules, direct loops and geometric face pairing.

use super::gauss;
use hdiv_eigen::spaces::{DofMap, PressureBasis, VelocityBasis};
use hdiv_eigen::{DomainTag, Mesh};

#[derive(Debug, Clone, Default)]
pub struct Energies {
    /// `a_h(u, u)`
    pub a: f64,
    /// `(p, div u)`
    pub b: f64,
    /// `(u, u)`
    pub mass: f64,
    /// `||div u||^2`
    pub div_sq: f64,
    pub eta_r: Vec<f64>,
    pub eta_e: Vec<f64>,
    pub eta_j: Vec<f64>,
}

#[derive(Clone, Copy, Default)]
struct Point {
    u: [f64; 2],
    grad: [[f64; 2]; 2],
    lap: [f64; 2],
    div: f64,
    p: f64,
    grad_p: [f64; 2],
}

struct Evaluator<'a> {
    mesh: &'a Mesh,
    dofmap: &'a DofMap,
    vb: VelocityBasis,
    pb: PressureBasis,
    u: &'a [f64],
    p: &'a [f64],
}

impl Evaluator<'_> {
    fn eval(&self, pos: usize, x: [f64; 2]) -> Point {
        let cell = self.mesh.cell(self.dofmap.cells()[pos]);
        let h = [cell.upper[0] - cell.lower[0], cell.upper[1] - cell.lower[1]];
        let xi = [(x[0] - cell.lower[0]) / h[0], (x[1] - cell.lower[1]) / h[1]];
        let det = h[0] * h[1];
        let vr = self.vb.eval_reference(xi);
        let mut out = Point::default();
        for i in 0..vr.values.len() {
            let mut coef = 0.0;
            for &(g, c) in self.dofmap.velocity_row(pos, i) {
                coef += c * self.u[g];
            }
            if coef == 0.0 {
                continue;
            }
            for c in 0..2 {
                let s = coef * h[c] / det;
                out.u[c] += s * vr.values[i][c];
                for d in 0..2 {
                    out.grad[c][d] += s * vr.grads[i][c][d] / h[d];
                    out.lap[c] += s * vr.second[i][c][d] / (h[d] * h[d]);
                }
            }
        }
        out.div = out.grad[0][0] + out.grad[1][1];
        let pr = self.pb.eval_reference(xi);
        for (j, g) in self.dofmap.pressure_dofs(pos).enumerate() {
            out.p += self.p[g] * pr.values[j];
            out.grad_p[0] += self.p[g] * pr.grads[j][0] / h[0];
            out.grad_p[1] += self.p[g] * pr.grads[j][1] / h[1];
        }
        out
    }
}

fn outside(domain: DomainTag, x: [f64; 2]) -> bool {
    match domain {
        DomainTag::Square => !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]),
        DomainTag::LShape => x[0].abs() > 1.0 || x[1].abs() > 1.0 || (x[0] > 0.0 && x[1] > 0.0),
        DomainTag::Slit => x[0].abs() > 1.0 || x[1].abs() > 1.0,
    }
}

fn on_slit(domain: DomainTag, a: [f64; 2], b: [f64; 2]) -> bool {
    domain == DomainTag::Slit && a[0] == 0.0 && b[0] == 0.0 && a[1].max(b[1]) <= 0.0
}

fn locate(mesh: &Mesh, dofmap: &DofMap, x: [f64; 2]) -> Option<usize> {
    dofmap.cells().iter().position(|&c| {
        let cell = mesh.cell(c);
        (0..2).all(|d| cell.lower[d] < x[d] && x[d] < cell.upper[d])
    })
}

/// Velocity of the discrete field at a point inside an active cell.
pub fn velocity_at(mesh: &Mesh, dofmap: &DofMap, u: &[f64], x: [f64; 2]) -> Option<[f64; 2]> {
    let k = dofmap.degree();
    let p = vec![0.0; dofmap.n_p()];
    let ev = Evaluator { mesh, dofmap, vb: VelocityBasis::new(k), pb: PressureBasis::new(k), u, p: &p };
    locate(mesh, dofmap, x).map(|pos| ev.eval(pos, x).u)
}

/// Forms and estimator components with `k + boost` Gauss points.
#[allow(clippy::too_many_arguments)]
pub fn reevaluate_forms(
    mesh: &Mesh,
    dofmap: &DofMap,
    lambda: f64,
    u: &[f64],
    p: &[f64],
    nu: f64,
    gamma: f64,
    boost: usize,
) -> Energies {
    let k = dofmap.degree();
    let rule = gauss::rule(k + boost);
    let ev = Evaluator { mesh, dofmap, vb: VelocityBasis::new(k), pb: PressureBasis::new(k), u, p };
    let ncell = dofmap.cells().len();
    let mut e = Energies {
        eta_r: vec![0.0; ncell],
        eta_e: vec![0.0; ncell],
        eta_j: vec![0.0; ncell],
        ..Default::default()
    };

    for pos in 0..ncell {
        let cell = mesh.cell(dofmap.cells()[pos]);
        let h = [cell.upper[0] - cell.lower[0], cell.upper[1] - cell.lower[1]];
        let mut res = 0.0;
        for &(s, ws) in &rule {
            for &(t, wt) in &rule {
                let w = ws * wt * h[0] * h[1];
                let x = [cell.lower[0] + s * h[0], cell.lower[1] + t * h[1]];
                let q = ev.eval(pos, x);
                let mut gg = 0.0;
                for c in 0..2 {
                    for d in 0..2 {
                        gg += q.grad[c][d] * q.grad[c][d];
                    }
                    let r = lambda * q.u[c] + nu * q.lap[c] - q.grad_p[c];
                    res += w * r * r;
                }
                e.a += w * nu * gg;
                e.mass += w * (q.u[0] * q.u[0] + q.u[1] * q.u[1]);
                e.b += w * q.p * q.div;
                e.div_sq += w * q.div * q.div;
            }
        }
        e.eta_r[pos] = (h[0] * h[0] + h[1] * h[1]) / nu * res;
    }

    for pos in 0..ncell {
        let cell = mesh.cell(dofmap.cells()[pos]);
        let (lo, hi) = (cell.lower, cell.upper);
        let sides = [
            ([lo[0], lo[1]], [lo[0], hi[1]], [-1.0, 0.0]),
            ([hi[0], lo[1]], [hi[0], hi[1]], [1.0, 0.0]),
            ([lo[0], lo[1]], [hi[0], lo[1]], [0.0, -1.0]),
            ([lo[0], hi[1]], [hi[0], hi[1]], [0.0, 1.0]),
        ];
        for (a, b, n) in sides {
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            // a quarter point avoids the seam between two finer neighbours
            let mid = [0.75 * a[0] + 0.25 * b[0], 0.75 * a[1] + 0.25 * b[1]];
            let eps = 1e-9 * len;
            let probe = [mid[0] + eps * n[0], mid[1] + eps * n[1]];
            let neighbour = if outside(mesh.domain(), probe) || on_slit(mesh.domain(), a, b) {
                None
            } else {
                Some(locate(mesh, dofmap, probe).expect("interior probe lies in a cell"))
            };
            let weight = match neighbour {
                None => 1.0,
                Some(nb) => {
                    let other = mesh.cell(dofmap.cells()[nb]);
                    let d = if n[0] != 0.0 { 1 } else { 0 };
                    let other_len = other.upper[d] - other.lower[d];
                    if other_len < len * (1.0 - 1e-12) {
                        continue; // the finer neighbours integrate this side
                    } else if other_len > len * (1.0 + 1e-12) {
                        1.0
                    } else {
                        0.5
                    }
                }
            };
            let (mut pen, mut cons, mut stress) = (0.0, 0.0, 0.0);
            for &(t, wt) in &rule {
                let w = wt * len;
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let q = ev.eval(pos, x);
                let gn = |q: &Point| {
                    [q.grad[0][0] * n[0] + q.grad[0][1] * n[1], q.grad[1][0] * n[0] + q.grad[1][1] * n[1]]
                };
                match neighbour {
                    None => {
                        let g = gn(&q);
                        pen += w * (q.u[0] * q.u[0] + q.u[1] * q.u[1]);
                        cons += w * (g[0] * q.u[0] + g[1] * q.u[1]);
                    }
                    Some(nb) => {
                        let r = ev.eval(nb, x);
                        let (g1, g2) = (gn(&q), gn(&r));
                        let j = [q.u[0] - r.u[0], q.u[1] - r.u[1]];
                        pen += w * (j[0] * j[0] + j[1] * j[1]);
                        cons += w * ((g1[0] + g2[0]) * j[0] + (g1[1] + g2[1]) * j[1]);
                        let s = [
                            (q.p - r.p) * n[0] - nu * (g1[0] - g2[0]),
                            (q.p - r.p) * n[1] - nu * (g1[1] - g2[1]),
                        ];
                        stress += w * (s[0] * s[0] + s[1] * s[1]);
                    }
                }
            }
            match neighbour {
                None => {
                    e.a += 2.0 * nu * gamma / len * pen - 2.0 * nu * cons;
                    e.eta_j[pos] += nu * gamma / len * pen;
                }
                Some(nb) => {
                    e.a += weight * (nu * gamma / len * pen - nu * cons);
                    for c in [pos, nb] {
                        e.eta_j[c] += weight * nu * gamma / len * pen;
                        e.eta_e[c] += weight * len / nu * stress;
                    }
                }
            }
        }
    }
    e
}
