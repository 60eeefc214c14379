//! Dense generalized eigensolver for small Stokes pencils.

use hdiv_eigen::assembly::AssembledSystem;
use nalgebra::{DMatrix, DVector};

pub const MAX_DIM: usize = 2000;

/// Dense copies of the augmented operator and the mass operator.
pub struct DenseSystem {
    pub k: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub n_u: usize,
    pub n_p: usize,
}

fn dense(m: &hdiv_eigen::sparse::CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.n_rows(), m.n_cols());
    for (r, c, v) in m.iter() {
        d[(r, c)] += v;
    }
    d
}

impl DenseSystem {
    pub fn new(sys: &AssembledSystem) -> Self {
        let a = dense(&sys.a);
        let b = dense(&sys.b);
        let m = dense(&sys.m);
        let (n_u, n_p) = (a.nrows(), b.nrows());
        let dim = n_u + n_p + 1;
        assert!(dim <= MAX_DIM, "dense oracle limited to {MAX_DIM} unknowns");
        let mut k = DMatrix::zeros(dim, dim);
        let mut n = DMatrix::zeros(dim, dim);
        k.view_mut((0, 0), (n_u, n_u)).copy_from(&a);
        k.view_mut((n_u, 0), (n_p, n_u)).copy_from(&(-&b));
        k.view_mut((0, n_u), (n_u, n_p)).copy_from(&(-b.transpose()));
        for (i, &c) in sys.c.iter().enumerate() {
            k[(n_u + i, dim - 1)] = c;
            k[(dim - 1, n_u + i)] = c;
        }
        n.view_mut((0, 0), (n_u, n_u)).copy_from(&m);
        DenseSystem { k, n, n_u, n_p }
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.k.view((0, 0), (self.n_u, self.n_u)).into_owned()
    }

    pub fn b(&self) -> DMatrix<f64> {
        -self.k.view((self.n_u, 0), (self.n_p, self.n_u)).into_owned()
    }

    pub fn m(&self) -> DMatrix<f64> {
        self.n.view((0, 0), (self.n_u, self.n_u)).into_owned()
    }

    /// Orthonormal basis of the discretely divergence-free velocities.
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        let b = self.b();
        let btb = b.transpose() * &b;
        let eig = btb.symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        let cols: Vec<DVector<f64>> = (0..self.n_u)
            .filter(|&i| eig.eigenvalues[i].abs() < 1e-10 * scale)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Eigenvalues of `A` restricted to divergence-free velocities, ascending.
    pub fn restricted_stiffness_eigenvalues(&self) -> Vec<f64> {
        let z = self.kernel_basis();
        let ar = z.transpose() * self.a() * &z;
        let mut ev: Vec<f64> = ar.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Smallest eigenpair of `K x = lambda N x`.
///
/// The infinite eigenvalues are deflated by restricting to the kernel of the
/// divergence block; the reduced symmetric problem gives a shift that is then
/// polished by inverse iteration with a dense LU of `K - sigma N`.
pub fn dense_smallest_eig(sys: &DenseSystem) -> (f64, DVector<f64>) {
    let z = sys.kernel_basis();
    let ar = z.transpose() * sys.a() * &z;
    let mr = z.transpose() * sys.m() * &z;
    let l = mr.cholesky().expect("mass is SPD on the kernel").l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * ar * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let (imin, &lam0) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let yr = linv.transpose() * eig.eigenvectors.column(imin);
    let mut x = DVector::zeros(sys.k.nrows());
    x.rows_mut(0, sys.n_u).copy_from(&(&z * yr));

    let sigma = lam0 * (1.0 - 1e-9);
    let lu = (&sys.k - &sys.n * sigma).lu();
    let mut lambda = lam0;
    for _ in 0..4 {
        let mut y = lu.solve(&(&sys.n * &x)).expect("shifted operator is regular");
        let norm = (y.transpose() * &sys.n * &y)[(0, 0)].sqrt();
        y /= norm;
        lambda = (y.transpose() * &sys.k * &y)[(0, 0)];
        x = y;
    }
    (lambda, x)
}

/// `||K x - lambda N x|| / ||x||`
pub fn residual(sys: &DenseSystem, lambda: f64, x: &DVector<f64>) -> f64 {
    (&sys.k * x - &sys.n * x * lambda).norm() / x.norm()
}
