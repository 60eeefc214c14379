//! Reference Raviart–Thomas and tensor-Legendre bases on `[0,1]^2`.

use nalgebra::DMatrix;

use crate::quadrature::{gauss_1d, Rule1d};

/// Shifted Legendre polynomials `L_j(t) = P_j(2t-1)` on `[0,1]` for
/// `j = 0..=n`, with first and second derivatives in `t`.
pub fn shifted_legendre(n: usize, t: f64) -> Vec<[f64; 3]> {
    let s = 2.0 * t - 1.0;
    let mut out = Vec::with_capacity(n + 1);
    out.push([1.0, 0.0, 0.0]);
    if n >= 1 {
        out.push([s, 1.0, 0.0]);
    }
    for j in 1..n {
        let jf = j as f64;
        let a = 2.0 * jf + 1.0;
        let [p, dp, ddp] = out[j];
        let [pm, dpm, ddpm] = out[j - 1];
        out.push([
            (a * s * p - jf * pm) / (jf + 1.0),
            (a * (p + s * dp) - jf * dpm) / (jf + 1.0),
            (a * (2.0 * dp + s * ddp) - jf * ddpm) / (jf + 1.0),
        ]);
    }
    // Chain rule for s = 2t - 1.
    for v in &mut out {
        v[1] *= 2.0;
        v[2] *= 4.0;
    }
    out
}

/// Squared `L^2(0,1)` norm of `L_j`.
pub fn legendre_norm_sq(j: usize) -> f64 {
    1.0 / (2.0 * j as f64 + 1.0)
}

/// Reference point on face `face` at tangential parameter `t`.
pub fn face_point(face: usize, t: f64) -> [f64; 2] {
    match face {
        0 => [0.0, t],
        1 => [1.0, t],
        2 => [t, 0.0],
        3 => [t, 1.0],
        _ => panic!("face index {face} out of range"),
    }
}

/// Velocity component normal to a face (x for faces 0/1, y for 2/3). DOFs use
/// this fixed coordinate direction, not the outward normal, so both cells of a
/// shared face see the same functional.
pub fn face_normal_component(face: usize) -> usize {
    face / 2
}

/// Reference values of all basis functions at one point.
#[derive(Debug, Clone, Default)]
pub struct VelocityRef {
    pub values: Vec<[f64; 2]>,
    /// `grads[i][c][d] = d v_c / d xi_d`
    pub grads: Vec<[[f64; 2]; 2]>,
    /// `second[i][c][d] = d^2 v_c / d xi_d^2`
    pub second: Vec<[[f64; 2]; 2]>,
}

/// `RT_k` on the reference square, as the dual basis of its DOF functionals:
/// `4(k+1)` edge normal moments against `L_0..L_k` (face-major), then interior
/// moments against `P_{k-1,k} x 0` and `0 x P_{k,k-1}`.
#[derive(Debug, Clone)]
pub struct VelocityBasis {
    k: usize,
    /// Row `i` holds the primal expansion of basis function `i`.
    coeffs: DMatrix<f64>,
}

impl VelocityBasis {
    pub fn new(k: usize) -> Self {
        assert!((1..=3).contains(&k), "RT degree must be 1..=3");
        let n = 2 * (k + 1) * (k + 2);
        let rule = gauss_1d(k + 3).expect("valid rule size");
        let mut functionals = DMatrix::<f64>::zeros(n, n);
        let primal = |p: [f64; 2]| Self::primal_values(k, p);
        // Edge moments.
        for face in 0..4 {
            let comp = face_normal_component(face);
            for (t, w) in rule.iter() {
                let vals = primal(face_point(face, t[0]));
                let leg = shifted_legendre(k, t[0]);
                for i in 0..=k {
                    let row = face * (k + 1) + i;
                    for (p, v) in vals.iter().enumerate() {
                        functionals[(row, p)] += w * v[comp] * leg[i][0];
                    }
                }
            }
        }
        // Interior moments.
        let interior = Self::interior_test_functions(k);
        for (ty, wy) in rule.iter() {
            for (tx, wx) in rule.iter() {
                let pt = [tx[0], ty[0]];
                let vals = primal(pt);
                let lx = shifted_legendre(k, pt[0]);
                let ly = shifted_legendre(k, pt[1]);
                for (m, &(comp, a, b)) in interior.iter().enumerate() {
                    let row = 4 * (k + 1) + m;
                    let q = lx[a][0] * ly[b][0];
                    for (p, v) in vals.iter().enumerate() {
                        functionals[(row, p)] += wx * wy * v[comp] * q;
                    }
                }
            }
        }
        let inv = functionals.try_inverse().expect("RT functionals are unisolvent");
        VelocityBasis { k, coeffs: inv.transpose() }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * (self.k + 1) * (self.k + 2)
    }

    pub fn dofs_per_face(&self) -> usize {
        self.k + 1
    }

    pub fn face_dof(&self, face: usize, moment: usize) -> usize {
        face * (self.k + 1) + moment
    }

    /// `(component, x-degree, y-degree)` of each interior test function.
    fn interior_test_functions(k: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(2 * k * (k + 1));
        for a in 0..k {
            for b in 0..=k {
                out.push((0, a, b));
            }
        }
        for a in 0..=k {
            for b in 0..k {
                out.push((1, a, b));
            }
        }
        out
    }

    fn primal_count_x(k: usize) -> usize {
        (k + 2) * (k + 1)
    }

    /// Tensor-Legendre primal basis of `P_{k+1,k} x P_{k,k+1}` with
    /// derivatives: `(value, d/dxi, d/deta, d2/dxi2, d2/deta2)` and component.
    fn primal_full(k: usize, p: [f64; 2]) -> Vec<(usize, [f64; 5])> {
        let lx = shifted_legendre(k + 1, p[0]);
        let ly = shifted_legendre(k + 1, p[1]);
        let mut out = Vec::with_capacity(2 * Self::primal_count_x(k));
        let mut push = |comp: usize, a: usize, b: usize| {
            let (x, y) = (lx[a], ly[b]);
            out.push((comp, [x[0] * y[0], x[1] * y[0], x[0] * y[1], x[2] * y[0], x[0] * y[2]]));
        };
        for a in 0..=k + 1 {
            for b in 0..=k {
                push(0, a, b);
            }
        }
        for a in 0..=k {
            for b in 0..=k + 1 {
                push(1, a, b);
            }
        }
        out
    }

    fn primal_values(k: usize, p: [f64; 2]) -> Vec<[f64; 2]> {
        Self::primal_full(k, p)
            .into_iter()
            .map(|(c, v)| if c == 0 { [v[0], 0.0] } else { [0.0, v[0]] })
            .collect()
    }

    /// Evaluates every basis function and its first and second derivatives.
    pub fn eval_reference(&self, p: [f64; 2]) -> VelocityRef {
        let n = self.dim();
        let primal = Self::primal_full(self.k, p);
        let mut out = VelocityRef {
            values: vec![[0.0; 2]; n],
            grads: vec![[[0.0; 2]; 2]; n],
            second: vec![[[0.0; 2]; 2]; n],
        };
        for i in 0..n {
            let (mut v, mut g, mut s) = ([0.0; 2], [[0.0; 2]; 2], [[0.0; 2]; 2]);
            for (j, (c, d)) in primal.iter().enumerate() {
                let a = self.coeffs[(i, j)];
                if a == 0.0 {
                    continue;
                }
                v[*c] += a * d[0];
                g[*c][0] += a * d[1];
                g[*c][1] += a * d[2];
                s[*c][0] += a * d[3];
                s[*c][1] += a * d[4];
            }
            out.values[i] = v;
            out.grads[i] = g;
            out.second[i] = s;
        }
        out
    }

    /// Applies the DOF functionals to a reference vector field.
    pub fn apply_functionals(&self, rule: &Rule1d, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; self.dim()];
        for face in 0..4 {
            let comp = face_normal_component(face);
            for (t, w) in rule.iter() {
                let v = field(face_point(face, t[0]));
                let leg = shifted_legendre(k, t[0]);
                for i in 0..=k {
                    out[face * (k + 1) + i] += w * v[comp] * leg[i][0];
                }
            }
        }
        let interior = Self::interior_test_functions(k);
        for (ty, wy) in rule.iter() {
            for (tx, wx) in rule.iter() {
                let pt = [tx[0], ty[0]];
                let v = field(pt);
                let lx = shifted_legendre(k, pt[0]);
                let ly = shifted_legendre(k, pt[1]);
                for (m, &(comp, a, b)) in interior.iter().enumerate() {
                    out[4 * (k + 1) + m] += wx * wy * v[comp] * lx[a][0] * ly[b][0];
                }
            }
        }
        out
    }
}

/// Reference values of the pressure basis at one point.
#[derive(Debug, Clone, Default)]
pub struct PressureRef {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

/// `Q_k` basis `L_a(xi) L_b(eta)` ordered with `a` major; function 0 is the
/// constant and all others have zero cell mean.
#[derive(Debug, Clone, Copy)]
pub struct PressureBasis {
    k: usize,
}

impl PressureBasis {
    pub fn new(k: usize) -> Self {
        PressureBasis { k }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn eval_reference(&self, p: [f64; 2]) -> PressureRef {
        let lx = shifted_legendre(self.k, p[0]);
        let ly = shifted_legendre(self.k, p[1]);
        let mut out = PressureRef { values: Vec::with_capacity(self.dim()), grads: Vec::with_capacity(self.dim()) };
        for x in &lx {
            for y in &ly {
                out.values.push(x[0] * y[0]);
                out.grads.push([x[1] * y[0], x[0] * y[1]]);
            }
        }
        out
    }
}

/// Coefficients expressing the moments of a half-edge normal trace through
/// the moments of the full edge: `slave_i = sum_j c[i][j] master_j` for the
/// lower (`half = 0`) or upper (`half = 1`) half.
pub fn hanging_coefficients(k: usize, half: usize) -> Vec<Vec<f64>> {
    let rule = gauss_1d(k + 2).expect("valid rule size");
    let mut c = vec![vec![0.0; k + 1]; k + 1];
    for (s, w) in rule.iter() {
        let sigma = s[0];
        let fine = shifted_legendre(k, sigma);
        let coarse = shifted_legendre(k, 0.5 * (half as f64 + sigma));
        for i in 0..=k {
            for j in 0..=k {
                c[i][j] += w * fine[i][0] * coarse[j][0] / (2.0 * legendre_norm_sq(j));
            }
        }
    }
    c
}
