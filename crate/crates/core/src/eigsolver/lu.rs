//! Sparse LU with threshold partial pivoting. The default path is the
//! supernodal multifrontal code; a left-looking column factorization
//! (Gilbert–Peierls) with unrestricted row pivoting is the fallback.

use super::multifrontal::{factorize_ordered, MultifrontalLu};
use super::ordering::nested_dissection;
use log::debug;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A diagonal candidate is kept as pivot if it is at least this fraction of
/// the largest candidate in its column.
pub(crate) const PIVOT_THRESHOLD: f64 = 0.1;
/// Pivots below this multiple of `max |a_ij|` are treated as zero.
const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Default)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LeftLooking {
    /// Row permutation: row `i` of the ordered matrix is pivot row `pinv[i]`.
    pinv: Vec<usize>,
    /// Unit lower triangular; diagonal stored first in each column.
    l: Csc,
    /// Upper triangular; diagonal stored last in each column.
    u: Csc,
}

#[derive(Debug, Clone)]
enum Factors {
    LeftLooking(LeftLooking),
    Multifrontal(MultifrontalLu),
}

/// Factorization `L U = P (D A D)(Q, Q)` of a square sparse matrix, with a
/// diagonal scaling `D` and a symmetric fill-reducing order `Q`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Elimination order: `q[k]` is the original unknown eliminated at step `k`.
    q: Vec<usize>,
    scale: Vec<f64>,
    factors: Factors,
    /// Copy of the factored matrix for iterative refinement.
    matrix: CsrMatrix,
}

const UNSET: usize = usize::MAX;

/// Factorizes `a` with a nested-dissection column ordering.
pub fn factorize(a: &CsrMatrix) -> Result<SparseLu> {
    let q = nested_dissection(a);
    factorize_with_order(a, q)
}

pub fn factorize_with_order(a: &CsrMatrix, q: Vec<usize>) -> Result<SparseLu> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::InvalidArgument(format!("LU needs a square matrix, got {}x{}", n, a.n_cols())));
    }
    assert_eq!(q.len(), n);
    let scale = symmetric_scaling(a);
    let mut rank = vec![0usize; n];
    for (k, &i) in q.iter().enumerate() {
        rank[i] = k;
    }
    // Scaled matrix with rows and columns in elimination order.
    let mut ordered = a.permute_symmetric(&rank);
    for r in 0..n {
        let (cols, vals) = ordered.row_mut(r);
        for (&c, v) in cols.iter().zip(vals) {
            *v *= scale[q[r]] * scale[q[c]];
        }
    }
    let anorm = ordered.max_abs();
    if !anorm.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let tiny = SINGULAR_TOL * anorm;

    let factors = match factorize_ordered(&ordered, tiny) {
        Ok(mf) => {
            debug!("multifrontal LU: {} factor entries, {} delayed pivots", mf.nnz(), mf.delayed_pivots());
            Factors::Multifrontal(mf)
        }
        Err(Error::SingularMatrix { pivot, .. }) => {
            debug!("multifrontal LU failed at pivot {pivot}, refactoring with unrestricted pivoting");
            Factors::LeftLooking(left_looking(&ordered, tiny)?)
        }
        Err(e) => return Err(e),
    };
    Ok(SparseLu { n, q, scale, factors, matrix: a.clone() })
}

fn left_looking(a: &CsrMatrix, tiny: f64) -> Result<LeftLooking> {
    let n = a.n_rows();
    // Columns of A are rows of A^T.
    let at = a.transpose();

    let mut l = Csc { col_ptr: Vec::with_capacity(n + 1), ..Default::default() };
    let mut u = Csc { col_ptr: Vec::with_capacity(n + 1), ..Default::default() };
    let mut pinv = vec![UNSET; n];
    let mut x = vec![0.0; n];
    let mut xi = vec![0usize; n];
    let mut mark = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut pstack = vec![0usize; n];

    for k in 0..n {
        let col = k;
        l.col_ptr.push(l.row_idx.len());
        u.col_ptr.push(u.row_idx.len());
        let generation = k + 1;
        let (brows, bvals) = at.row(col);

        // Nonzero pattern of L \ A(:,col) by depth-first search.
        let mut top = n;
        for &start in brows {
            if mark[start] == generation {
                continue;
            }
            let mut head = 0usize;
            stack[0] = start;
            loop {
                let j = stack[head];
                let jcol = pinv[j];
                if mark[j] != generation {
                    mark[j] = generation;
                    pstack[head] = if jcol == UNSET { 0 } else { l.col_ptr[jcol] };
                }
                let end = if jcol == UNSET { 0 } else { l.col_ptr[jcol + 1] };
                let mut descended = false;
                let mut p = pstack[head];
                while p < end {
                    let i = l.row_idx[p];
                    p += 1;
                    if mark[i] != generation {
                        pstack[head] = p;
                        head += 1;
                        stack[head] = i;
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }

        // Sparse triangular solve.
        for &i in &xi[top..n] {
            x[i] = 0.0;
        }
        for (&r, &v) in brows.iter().zip(bvals) {
            x[r] = v;
        }
        for &j in &xi[top..n] {
            let jcol = pinv[j];
            if jcol == UNSET {
                continue;
            }
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in l.col_ptr[jcol] + 1..l.col_ptr[jcol + 1] {
                x[l.row_idx[p]] -= l.values[p] * xj;
            }
        }

        // Pivot choice.
        let mut ipiv = UNSET;
        let mut best = -1.0f64;
        for &i in &xi[top..n] {
            if pinv[i] == UNSET {
                let t = x[i].abs();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else {
                u.row_idx.push(pinv[i]);
                u.values.push(x[i]);
            }
        }
        if ipiv == UNSET || !(best > tiny) {
            return Err(Error::SingularMatrix { pivot: k, dim: n });
        }
        if pinv[col] == UNSET && mark[col] == generation && x[col].abs() >= PIVOT_THRESHOLD * best {
            ipiv = col;
        }
        let pivot = x[ipiv];
        u.row_idx.push(k);
        u.values.push(pivot);
        pinv[ipiv] = k;
        l.row_idx.push(ipiv);
        l.values.push(1.0);
        for &i in &xi[top..n] {
            if pinv[i] == UNSET {
                l.row_idx.push(i);
                l.values.push(x[i] / pivot);
            }
            x[i] = 0.0;
        }
    }
    l.col_ptr.push(l.row_idx.len());
    u.col_ptr.push(u.row_idx.len());
    for r in &mut l.row_idx {
        *r = pinv[*r];
    }
    Ok(LeftLooking { pinv, l, u })
}

/// Scaling that gives unknowns with a nonzero diagonal a unit diagonal.
/// Unknowns with a zero diagonal (multipliers) are scaled so that their
/// scaled couplings to already scaled unknowns have unit norm; this keeps
/// threshold pivoting on the diagonal for saddle point systems.
fn symmetric_scaling(a: &CsrMatrix) -> Vec<f64> {
    let n = a.n_rows();
    let mut scale = vec![0.0; n];
    for (i, s) in scale.iter_mut().enumerate() {
        let d = a.get(i, i).abs();
        if d > 0.0 {
            *s = 1.0 / d.sqrt();
        }
    }
    loop {
        let mut next = scale.clone();
        let mut changed = false;
        for i in (0..n).filter(|&i| scale[i] == 0.0) {
            let (cols, vals) = a.row(i);
            let sq: f64 = cols.iter().zip(vals).map(|(&c, &v)| (v * scale[c]).powi(2)).sum();
            if sq > 0.0 {
                next[i] = 1.0 / sq.sqrt();
                changed = true;
            }
        }
        scale = next;
        if !changed {
            break;
        }
    }
    for s in &mut scale {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    scale
}

impl SparseLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` together.
    pub fn factor_nnz(&self) -> usize {
        match &self.factors {
            Factors::LeftLooking(f) => f.l.values.len() + f.u.values.len(),
            Factors::Multifrontal(f) => f.nnz(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.solve_into(b, &mut out);
        out
    }

    /// Solves `A x = b` followed by one step of iterative refinement.
    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        self.apply_inverse(b, out);
        let ax = self.matrix.mul_vec(out);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut d = vec![0.0; self.n];
        self.apply_inverse(&r, &mut d);
        for (o, di) in out.iter_mut().zip(&d) {
            *o += di;
        }
    }

    fn apply_inverse(&self, b: &[f64], out: &mut [f64]) {
        let mut x: Vec<f64> = self.q.iter().map(|&i| b[i] * self.scale[i]).collect();
        match &self.factors {
            Factors::LeftLooking(f) => f.solve_in_place(&mut x),
            Factors::Multifrontal(f) => f.solve_in_place(&mut x),
        }
        for (k, &c) in self.q.iter().enumerate() {
            out[c] = x[k] * self.scale[c];
        }
    }
}

impl LeftLooking {
    fn solve_in_place(&self, x: &mut Vec<f64>) {
        let n = x.len();
        let mut y = vec![0.0; n];
        for (i, &v) in x.iter().enumerate() {
            y[self.pinv[i]] = v;
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l.col_ptr[j] + 1..self.l.col_ptr[j + 1] {
                    y[self.l.row_idx[p]] -= self.l.values[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let last = self.u.col_ptr[j + 1] - 1;
            y[j] /= self.u.values[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u.col_ptr[j]..last {
                    y[self.u.row_idx[p]] -= self.u.values[p] * yj;
                }
            }
        }
        *x = y;
    }
}
