//! Smallest eigenpair of the Stokes saddle-point pencil by shift-invert
//! Arnoldi on top of an in-repo sparse LU.

mod lu;
mod multifrontal;
mod ordering;

pub use lu::{factorize, factorize_with_order, SparseLu};
pub use ordering::nested_dissection;

use log::{debug, trace, warn};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix, Triplets};

/// Generalized eigenproblem `K x = lambda N x` with
/// `K = [[A, -B^T, 0], [-B, 0, c], [0, c^T, 0]]` and `N = blockdiag(M, 0, 0)`.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    n_u: usize,
    n_p: usize,
    has_multiplier: bool,
}

impl Pencil {
    /// Builds the augmented operator from its blocks.
    pub fn from_blocks(a: &CsrMatrix, b: &CsrMatrix, c: &[f64], m: &CsrMatrix) -> Self {
        let n_u = a.n_rows();
        let n_p = b.n_rows();
        assert_eq!(b.n_cols(), n_u);
        assert_eq!(c.len(), n_p);
        let n = n_u + n_p + 1;
        let mut t = Triplets::new(n, n);
        for (r, col, v) in a.iter() {
            t.push(r, col, v);
        }
        for (r, col, v) in b.iter() {
            t.push(n_u + r, col, -v);
            t.push(col, n_u + r, -v);
        }
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                t.push(n_u + i, n - 1, ci);
                t.push(n - 1, n_u + i, ci);
            }
        }
        Pencil { stiffness: t.to_csr(), mass: m.clone(), n_u, n_p, has_multiplier: true }
    }

    /// A pencil given directly by `K` and an SPD leading block `M` of `N`;
    /// the trailing unknowns carry no multiplier.
    pub fn from_parts(stiffness: CsrMatrix, mass: CsrMatrix) -> Self {
        let n_u = mass.n_rows();
        let n = stiffness.n_rows();
        assert!(n >= n_u);
        Pencil { stiffness, mass, n_u, n_p: n - n_u, has_multiplier: false }
    }

    pub fn dim(&self) -> usize {
        self.stiffness.n_rows()
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    /// `N x`
    pub fn apply_mass(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mu = self.mass.mul_vec(&x[..self.n_u]);
        out[..self.n_u].copy_from_slice(&mu);
        out
    }

    /// `||K x - lambda N x||_2 / ||x||_2`
    pub fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let kx = self.stiffness.mul_vec(x);
        let nx = self.apply_mass(x);
        let r: Vec<f64> = kx.iter().zip(&nx).map(|(a, b)| a - lambda * b).collect();
        norm2(&r) / norm2(x)
    }

    fn mass_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mass.mul_vec(&y[..self.n_u]);
        dot(&x[..self.n_u], &my)
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub subspace_dim: usize,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, subspace_dim: 20, max_restarts: 50 }
    }
}

/// Converged eigenpair with `u^T M u = 1` and the largest-magnitude velocity
/// coefficient positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Pencil residual `||K x - lambda N x|| / ||x||` at return.
    pub residual: f64,
    /// Applications of `K^{-1} N`.
    pub iterations: usize,
    /// Discarded mean-value Lagrange multiplier.
    pub multiplier: f64,
}

impl EigenPair {
    /// Full pencil vector `(u, p, multiplier)`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.p.len() + 1);
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.p);
        x.push(self.multiplier);
        x
    }
}

/// Normalizes in the mass norm and fixes the sign convention.
fn normalize(pencil: &Pencil, x: &mut [f64]) {
    let norm = pencil.mass_inner(x, x).sqrt();
    let mut big = 0.0f64;
    for &v in &x[..pencil.n_u] {
        if v.abs() > big.abs() {
            big = v;
        }
    }
    let s = if big < 0.0 { -1.0 / norm } else { 1.0 / norm };
    x.iter_mut().for_each(|v| *v *= s);
}

/// Dominant eigenvalue of a small Hessenberg matrix and its eigenvector.
fn dominant_ritz(h: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let m = h.nrows();
    let eigs = h.clone().schur().complex_eigenvalues();
    let best = eigs
        .iter()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .copied()
        .ok_or(Error::NoPositiveEigenvalue)?;
    if best.im.abs() > 1e-8 * best.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::ComplexRitzValue { re: best.re, im: best.im });
    }
    let theta = best.re;
    // Inverse iteration on the small matrix.
    let shift = theta * (1.0 + 1e-13) + 1e-300;
    let shifted = h - DMatrix::identity(m, m) * shift;
    let lu = shifted.lu();
    let mut s = nalgebra::DVector::from_element(m, 1.0);
    for _ in 0..3 {
        s = lu.solve(&s).unwrap_or_else(|| s.clone());
        let n = s.norm();
        s /= n;
    }
    Ok((theta, s.iter().copied().collect()))
}

/// Computes the smallest positive eigenvalue of the pencil.
///
/// Runs restarted Arnoldi with full orthogonalization on `T = K^{-1} N` in
/// the (semi-)inner product induced by `N`, in which `T` is self-adjoint. The
/// dominant Ritz value `theta` gives `lambda = 1 / theta`.
pub fn smallest_eigenpair(pencil: &Pencil, opts: &EigenOptions) -> Result<EigenPair> {
    if !(1e-14..=1e-6).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!("tol must lie in [1e-14, 1e-6], got {:e}", opts.tol)));
    }
    if opts.subspace_dim < 10 {
        return Err(Error::InvalidArgument(format!("subspace_dim must be at least 10, got {}", opts.subspace_dim)));
    }
    let lu = factorize(&pencil.stiffness)?;
    debug!("pencil n = {}, factor nnz = {}", pencil.dim(), lu.factor_nnz());
    let n = pencil.dim();
    let apply = |x: &[f64]| lu.solve(&pencil.apply_mass(x));

    let mut iterations = 0;
    let mut start = vec![0.0; n];
    for (i, v) in start[..pencil.n_u].iter_mut().enumerate() {
        // Deterministic, non-symmetric start so no mode is excluded by symmetry.
        *v = 1.0 + 0.1 * ((i * 7919) % 1013) as f64 / 1013.0;
    }
    let mut x = apply(&start);
    iterations += 1;
    let mut last_residual = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        let m = opts.subspace_dim.min(pencil.n_u);
        let norm0 = pencil.mass_inner(&x, &x).sqrt();
        if !(norm0 > 0.0) {
            return Err(Error::NoPositiveEigenvalue);
        }
        let mut basis: Vec<Vec<f64>> = vec![x.iter().map(|v| v / norm0).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut steps = m;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            iterations += 1;
            let w_norm = pencil.mass_inner(&w, &w).sqrt();
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = pencil.mass_inner(v, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = pencil.mass_inner(&w, &w).sqrt();
            h[(j + 1, j)] = beta;
            // An invariant subspace shows up as cancellation down to rounding level.
            if beta <= 1e-10 * w_norm || j + 1 == m {
                steps = j + 1;
                if j + 1 < m {
                    trace!("Arnoldi breakdown at step {}", j + 1);
                }
                break;
            }
            basis.push(w.iter().map(|v| v / beta).collect());
        }
        let hm = h.view((0, 0), (steps, steps)).into_owned();
        let (theta, s) = dominant_ritz(&hm)?;
        if theta <= 0.0 {
            return Err(Error::NoPositiveEigenvalue);
        }
        let mut y = vec![0.0; n];
        for (v, &c) in basis.iter().zip(&s) {
            y.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
        }
        // N ignores pressure, so one more application makes the pressure
        // consistent with the velocity.
        let mut y = apply(&y);
        iterations += 1;
        normalize(pencil, &mut y);
        let lambda = 1.0 / theta;
        let residual = pencil.residual(lambda, &y);
        trace!("restart {restart}: lambda = {lambda:.15e}, residual = {residual:.3e}");
        last_residual = residual;
        if residual <= opts.tol {
            let multiplier = if pencil.has_multiplier { y[n - 1] } else { 0.0 };
            if multiplier.abs() >= 1e-8 {
                warn!("mean-value multiplier {multiplier:.3e} is not negligible");
            }
            debug!("converged: lambda = {lambda:.12}, {iterations} applications, residual {residual:.2e}");
            return Ok(EigenPair {
                lambda,
                u: y[..pencil.n_u].to_vec(),
                p: y[pencil.n_u..pencil.n_u + pencil.n_p].to_vec(),
                residual,
                iterations,
                multiplier,
            });
        }
        x = y;
    }
    Err(Error::NotConverged { restarts: opts.max_restarts, residual: last_residual, tol: opts.tol })
}

/// `|u^T A u - lambda u^T M u| / lambda` for a converged pair.
pub fn rayleigh_check(a: &CsrMatrix, m: &CsrMatrix, pair: &EigenPair) -> f64 {
    let au = a.mul_vec(&pair.u);
    let mu = m.mul_vec(&pair.u);
    (dot(&pair.u, &au) - pair.lambda * dot(&pair.u, &mu)).abs() / pair.lambda
}
