//! Supernodal multifrontal LU for matrices with a symmetric sparsity pattern.
//!
//! Each supernode is a contiguous range of columns in elimination order that
//! is factored as one dense frontal matrix. Pivots are chosen by threshold
//! partial pivoting among the fully summed rows of the front. A column with
//! no acceptable pivot is delayed: it is passed to the parent front together
//! with one unpivoted row. Columns still delayed at a root are reported as a
//! singular pivot so the caller can fall back to the left-looking code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Hard limit on the number of columns merged into one supernode.
const MAX_SUPERNODE: usize = 128;
/// Supernodes this narrow are always merged with a structurally linked column.
const SMALL_SUPERNODE: usize = 16;
/// Fraction of explicit zeros tolerated when merging wider supernodes.
const RELAX_FRACTION: f64 = 0.15;
/// A pivot must be at least this fraction of the largest entry of its column
/// in the whole front, otherwise the column is delayed.
const DELAY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone)]
struct Supernode {
    first: usize,
    ncols: usize,
    /// Off-block row indices, ascending.
    rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct NodeFactor {
    /// Global rows and columns eliminated here, in pivot order.
    piv_rows: Vec<usize>,
    piv_cols: Vec<usize>,
    /// Remaining rows of the `L` panel and columns of the `U` panel.
    rest_rows: Vec<usize>,
    rest_cols: Vec<usize>,
    /// `L` panel, `(npiv + rest) x npiv`, column-major; unit diagonal implied.
    l: Vec<f64>,
    /// `U11`, `npiv x npiv`, column-major (upper part used).
    u11: Vec<f64>,
    /// `U12`, `npiv x rest`, column-major.
    u12: Vec<f64>,
}

/// Contribution block passed from a front to its parent.
struct Update {
    rows: Vec<usize>,
    cols: Vec<usize>,
    /// Number of leading rows and columns that are delayed pivots.
    delayed: usize,
    values: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct MultifrontalLu {
    factors: Vec<NodeFactor>,
    /// Columns eliminated through delays into another front.
    delayed: usize,
}

/// Rows of the symmetrized pattern below the diagonal, per column.
fn lower_pattern(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut low = vec![Vec::new(); n];
    for (r, c, _) in a.iter() {
        if r > c {
            low[c].push(r);
        } else if c > r {
            low[r].push(c);
        }
    }
    for l in &mut low {
        l.sort_unstable();
        l.dedup();
    }
    low
}

fn merge_sorted(a: &[usize], b: &[usize], above: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j == b.len() || (i < a.len() && a[i] <= b[j]) {
            let v = a[i];
            i += 1;
            if j < b.len() && b[j] == v {
                j += 1;
            }
            v
        } else {
            let v = b[j];
            j += 1;
            v
        };
        if next > above {
            out.push(next);
        }
    }
    out
}

/// Relaxed supernode partition; children are keyed by their smallest
/// off-block row.
fn symbolic(low: &[Vec<usize>]) -> (Vec<Supernode>, Vec<Vec<usize>>) {
    let n = low.len();
    let mut nodes: Vec<Supernode> = Vec::new();
    // Supernodes waiting for the column holding their smallest off-block row.
    let mut waiting: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut children: Vec<Vec<usize>> = Vec::new();

    let mut cur: Option<(Supernode, Vec<usize>)> = None;
    for j in 0..n {
        // Structure contributed by column j itself and its children.
        let mut rows = low[j].clone();
        for &c in &waiting[j] {
            rows = merge_sorted(&rows, &nodes[c].rows, j);
        }
        let kids = std::mem::take(&mut waiting[j]);

        if let Some((mut node, mut node_kids)) = cur.take() {
            let linked = node.rows.first() == Some(&j);
            let merged = merge_sorted(&node.rows, &rows, j);
            let added = merged.len() + 1 - node.rows.len();
            let width = node.ncols + 1;
            let front = width + merged.len();
            let accept = linked
                && width <= MAX_SUPERNODE
                && (added == 0
                    || node.ncols < SMALL_SUPERNODE
                    || (added * node.ncols) as f64 <= RELAX_FRACTION * (front * width) as f64);
            if accept {
                node.ncols += 1;
                node.rows = merged;
                node_kids.extend(kids);
                cur = Some((node, node_kids));
                continue;
            }
            let id = nodes.len();
            if let Some(&r) = node.rows.first() {
                waiting[r].push(id);
            }
            nodes.push(node);
            children.push(node_kids);
            // Column j may now have node `id` as child.
            if waiting[j].contains(&id) {
                waiting[j].clear();
                rows = merge_sorted(&rows, &nodes[id].rows, j);
                let mut k = kids;
                k.push(id);
                cur = Some((Supernode { first: j, ncols: 1, rows }, k));
                continue;
            }
        }
        cur = Some((Supernode { first: j, ncols: 1, rows }, kids));
    }
    if let Some((node, kids)) = cur {
        nodes.push(node);
        children.push(kids);
    }
    (nodes, children)
}

/// Factors `a`, whose rows and columns are already in elimination order.
/// Entries below `tiny` in magnitude are not accepted as pivots.
pub(crate) fn factorize_ordered(a: &CsrMatrix, tiny: f64) -> Result<MultifrontalLu> {
    let n = a.n_rows();
    let at = a.transpose();
    let low = lower_pattern(a);
    let (nodes, children) = symbolic(&low);
    drop(low);

    let mut row_pos = vec![usize::MAX; n];
    let mut col_pos = vec![usize::MAX; n];
    let mut updates: Vec<Option<Update>> = (0..nodes.len()).map(|_| None).collect();
    let mut factors = Vec::with_capacity(nodes.len());
    let mut total_delayed = 0;

    for (s, node) in nodes.iter().enumerate() {
        let (f, nc) = (node.first, node.ncols);
        let kids: Vec<Update> =
            children[s].iter().map(|&c| updates[c].take().expect("child update consumed twice")).collect();
        let mut rows: Vec<usize> = (f..f + nc).collect();
        let mut cols = rows.clone();
        for u in &kids {
            rows.extend_from_slice(&u.rows[..u.delayed]);
            cols.extend_from_slice(&u.cols[..u.delayed]);
        }
        let nfs = rows.len();
        rows.extend_from_slice(&node.rows);
        cols.extend_from_slice(&node.rows);
        let m = rows.len();
        for (p, (&r, &c)) in rows.iter().zip(&cols).enumerate() {
            row_pos[r] = p;
            col_pos[c] = p;
        }

        let mut front = DMatrix::<f64>::zeros(m, m);
        for j in f..f + nc {
            let lj = col_pos[j];
            let (ri, vals) = at.row(j);
            for (&i, &v) in ri.iter().zip(vals) {
                if i >= f {
                    front[(row_pos[i], lj)] += v;
                }
            }
            let (ci, vals) = a.row(j);
            for (&i, &v) in ci.iter().zip(vals) {
                if i >= f + nc {
                    front[(row_pos[j], col_pos[i])] += v;
                }
            }
        }
        for u in kids {
            let ridx: Vec<usize> = u.rows.iter().map(|&g| row_pos[g]).collect();
            for (cj, &g) in u.cols.iter().enumerate() {
                let src = u.values.column(cj);
                let mut dst = front.column_mut(col_pos[g]);
                for (ci, &li) in ridx.iter().enumerate() {
                    dst[li] += src[ci];
                }
            }
        }

        // Right-looking elimination of the fully summed block; failed
        // columns are swapped behind the remaining candidates.
        let mut npiv = 0;
        let mut end = nfs;
        while npiv < end {
            let c = npiv;
            let mut best = 0.0f64;
            let mut p = c;
            for r in c..nfs {
                let v = front[(r, c)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            let col_max = (c..m).map(|r| front[(r, c)].abs()).fold(best, f64::max);
            if !(best > tiny) || best < DELAY_THRESHOLD * col_max {
                end -= 1;
                front.swap_columns(c, end);
                cols.swap(c, end);
                continue;
            }
            if front[(c, c)].abs() >= super::lu::PIVOT_THRESHOLD * best {
                p = c;
            }
            if p != c {
                front.swap_rows(c, p);
                rows.swap(c, p);
            }
            let piv = front[(c, c)];
            for r in c + 1..m {
                front[(r, c)] /= piv;
            }
            for j in c + 1..nfs {
                let ucj = front[(c, j)];
                if ucj != 0.0 {
                    for r in c + 1..m {
                        let lrc = front[(r, c)];
                        front[(r, j)] -= lrc * ucj;
                    }
                }
            }
            npiv += 1;
        }
        let delayed = nfs - npiv;
        // U12 = L11^{-1} A12 for the columns outside the fully summed block.
        for j in nfs..m {
            for c in 0..npiv {
                let v = front[(c, j)];
                if v != 0.0 {
                    for r in c + 1..npiv {
                        let lrc = front[(r, c)];
                        front[(r, j)] -= lrc * v;
                    }
                }
            }
        }
        let nr = m - npiv;
        if nr > 0 && npiv > 0 {
            let l21 = front.view((npiv, 0), (nr, npiv)).clone_owned();
            let u12 = front.view((0, nfs), (npiv, m - nfs)).clone_owned();
            let mut schur = front.view_mut((npiv, nfs), (nr, m - nfs));
            schur.gemm(-1.0, &l21, &u12, 1.0);
        }
        if nr > 0 {
            if node.rows.is_empty() && delayed > 0 {
                return Err(Error::SingularMatrix { pivot: cols[npiv], dim: n });
            }
            updates[s] = Some(Update {
                rows: rows[npiv..].to_vec(),
                cols: cols[npiv..].to_vec(),
                delayed,
                values: front.view((npiv, npiv), (nr, nr)).clone_owned(),
            });
        }
        total_delayed += delayed;
        factors.push(NodeFactor {
            l: front.columns(0, npiv).iter().copied().collect(),
            u11: front.view((0, 0), (npiv, npiv)).iter().copied().collect(),
            u12: front.view((0, npiv), (npiv, nr)).iter().copied().collect(),
            piv_rows: rows[..npiv].to_vec(),
            piv_cols: cols[..npiv].to_vec(),
            rest_rows: rows[npiv..].to_vec(),
            rest_cols: cols[npiv..].to_vec(),
        });
    }
    Ok(MultifrontalLu { factors, delayed: total_delayed })
}

impl MultifrontalLu {
    pub(crate) fn nnz(&self) -> usize {
        self.factors.iter().map(|f| f.l.len() + f.u11.len() + f.u12.len()).sum()
    }

    pub(crate) fn delayed_pivots(&self) -> usize {
        self.delayed
    }

    /// Solves `A x = b` in place; `x` holds `b` on entry.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        // Forward: `w` is indexed by row, `y` by pivot.
        let mut y = vec![0.0; n];
        let mut tmp = Vec::new();
        let mut k0 = 0;
        for fac in &self.factors {
            let np = fac.piv_rows.len();
            let m = np + fac.rest_rows.len();
            tmp.clear();
            tmp.extend(fac.piv_rows.iter().map(|&r| x[r]));
            for c in 0..np {
                let v = tmp[c];
                if v != 0.0 {
                    let col = &fac.l[c * m..(c + 1) * m];
                    for r in c + 1..np {
                        tmp[r] -= col[r] * v;
                    }
                    for (r, &g) in fac.rest_rows.iter().enumerate() {
                        x[g] -= col[np + r] * v;
                    }
                }
            }
            y[k0..k0 + np].copy_from_slice(&tmp);
            k0 += np;
        }
        // Backward: solution indexed by column.
        for fac in self.factors.iter().rev() {
            let np = fac.piv_cols.len();
            k0 -= np;
            tmp.clear();
            tmp.extend_from_slice(&y[k0..k0 + np]);
            for (r, &g) in fac.rest_cols.iter().enumerate() {
                let v = x[g];
                if v != 0.0 {
                    let col = &fac.u12[r * np..(r + 1) * np];
                    for c in 0..np {
                        tmp[c] -= col[c] * v;
                    }
                }
            }
            for c in (0..np).rev() {
                let col = &fac.u11[c * np..(c + 1) * np];
                tmp[c] /= col[c];
                let v = tmp[c];
                if v != 0.0 {
                    for r in 0..c {
                        tmp[r] -= col[r] * v;
                    }
                }
            }
            for (&g, &v) in fac.piv_cols.iter().zip(&tmp) {
                x[g] = v;
            }
        }
    }
}
