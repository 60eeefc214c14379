//! Fill-reducing ordering by nested dissection with BFS level-set separators,
//! run on the graph compressed to supervariables (unknowns with identical
//! closed neighborhoods).

use std::collections::{HashMap, VecDeque};

use crate::sparse::CsrMatrix;

/// Subgraphs at or below this many unknowns are not dissected further.
const LEAF_WEIGHT: usize = 96;

/// Symmetrized adjacency of a square matrix without self loops.
fn adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut adj = vec![Vec::new(); n];
    for (r, c, _) in a.iter() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

/// Groups nodes with the same closed neighborhood. Returns the group of each
/// node and the members of each group; `skip` nodes get no group.
fn supervariables(adj: &[Vec<usize>], skip: &[bool]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = adj.len();
    let mut group = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for i in (0..n).filter(|&i| !skip[i]) {
        let mut key = adj[i].clone();
        let pos = key.binary_search(&i).unwrap_or_else(|p| p);
        key.insert(pos, i);
        let g = *seen.entry(key).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        group[i] = g;
        members[g].push(i);
    }
    (group, members)
}

struct Dissector<'a> {
    adj: &'a [Vec<usize>],
    weight: &'a [usize],
    /// Subset membership stamp: node `i` belongs to the current subset iff
    /// `owner[i] == stamp`.
    owner: Vec<usize>,
    level: Vec<usize>,
    stamp: usize,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn claim(&mut self, nodes: &[usize]) -> usize {
        self.stamp += 1;
        for &v in nodes {
            self.owner[v] = self.stamp;
        }
        self.stamp
    }

    /// BFS inside the subset `stamp`; returns nodes in visit order with levels
    /// stored in `self.level`.
    fn bfs(&mut self, start: usize, stamp: usize, visited_stamp: usize) -> Vec<usize> {
        let mut out = vec![start];
        let mut queue = VecDeque::from([start]);
        self.owner[start] = visited_stamp;
        self.level[start] = 0;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if self.owner[w] == stamp {
                    self.owner[w] = visited_stamp;
                    self.level[w] = self.level[v] + 1;
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out
    }

    fn total(&self, nodes: &[usize]) -> usize {
        nodes.iter().map(|&v| self.weight[v]).sum()
    }

    fn dissect(&mut self, nodes: Vec<usize>) {
        if self.total(&nodes) <= LEAF_WEIGHT {
            self.order.extend(nodes);
            return;
        }
        // Split into connected components first.
        let stamp = self.claim(&nodes);
        let mut components = Vec::new();
        for &v in &nodes {
            if self.owner[v] == stamp {
                let visited = self.stamp + 1;
                self.stamp += 1;
                let comp = self.bfs(v, stamp, visited);
                components.push(comp);
                // Re-use stamp for the remaining unvisited nodes: visited ones
                // now carry a different stamp.
            }
        }
        if components.len() > 1 {
            for comp in components {
                self.dissect(comp);
            }
            return;
        }
        let nodes = components.pop().unwrap();

        // Pseudo-peripheral start: repeat BFS from the last node reached.
        let mut start = nodes[0];
        let mut depth = 0;
        let mut visit = Vec::new();
        let mut visited = 0;
        for _ in 0..4 {
            let stamp = self.claim(&nodes);
            visited = stamp + 1;
            self.stamp += 1;
            visit = self.bfs(start, stamp, visited);
            let far = *visit.last().unwrap();
            let d = self.level[far];
            if d <= depth && depth > 0 {
                break;
            }
            depth = d;
            start = far;
        }
        let levels = self.level[*visit.last().unwrap()] + 1;
        if levels < 3 {
            self.order.extend(visit);
            return;
        }
        // Separator: the lightest level that leaves at least a third of the
        // weight on either side, falling back to the median level.
        let mut counts = vec![0usize; levels];
        for &v in &visit {
            counts[self.level[v]] += self.weight[v];
        }
        let total = self.total(&nodes);
        let mut acc = 0;
        let mut mid = 0;
        let mut best = usize::MAX;
        let mut median = 0;
        for (l, &c) in counts.iter().enumerate() {
            let below = acc;
            acc += c;
            if median == 0 && acc >= total / 2 {
                median = l.clamp(1, levels - 2);
            }
            let above = total - acc;
            if l >= 1 && l + 1 < levels && 3 * below >= total && 3 * above >= total && c < best {
                best = c;
                mid = l;
            }
        }
        if mid == 0 {
            mid = median;
        }
        let (mut below, mut sep, mut above) = (Vec::new(), Vec::new(), Vec::new());
        for &v in &visit {
            match self.level[v].cmp(&mid) {
                std::cmp::Ordering::Less => below.push(v),
                std::cmp::Ordering::Equal => sep.push(v),
                std::cmp::Ordering::Greater => above.push(v),
            }
        }
        // Separator nodes without a neighbor above can join the lower part.
        let mut thin = Vec::with_capacity(sep.len());
        for &v in &sep {
            if self.adj[v].iter().any(|&w| self.owner[w] == visited && self.level[w] == mid + 1) {
                thin.push(v);
            } else {
                below.push(v);
            }
        }
        self.dissect(below);
        self.dissect(above);
        self.order.extend(thin);
    }
}

/// Column ordering for factorization: nested dissection of the graph of
/// `A + A^T`; rows with very high degree (e.g. a mean-value constraint) are
/// ordered last. Returns `perm` with `perm[k]` = original index of the `k`-th
/// eliminated unknown.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let adj = adjacency(a);
    let dense_threshold = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let dense: Vec<bool> = adj.iter().map(|l| l.len() > dense_threshold).collect();
    let trimmed: Vec<Vec<usize>> = adj
        .iter()
        .enumerate()
        .map(|(i, l)| if dense[i] { Vec::new() } else { l.iter().copied().filter(|&w| !dense[w]).collect() })
        .collect();
    let (group, members) = supervariables(&trimmed, &dense);
    let ng = members.len();
    let mut quotient = vec![Vec::new(); ng];
    for (g, list) in members.iter().enumerate() {
        let mut nb: Vec<usize> = trimmed[list[0]].iter().map(|&w| group[w]).filter(|&h| h != g).collect();
        nb.sort_unstable();
        nb.dedup();
        quotient[g] = nb;
    }
    let weight: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut d = Dissector {
        adj: &quotient,
        weight: &weight,
        owner: vec![0; ng],
        level: vec![0; ng],
        stamp: 0,
        order: Vec::with_capacity(ng),
    };
    d.dissect((0..ng).collect());
    let expanded: Vec<usize> = d.order.iter().flat_map(|&g| members[g].iter().copied()).collect();
    let mut order = isolated_multipliers_last(a, &trimmed, &expanded);
    order.extend((0..n).filter(|&i| dense[i]));
    debug_assert_eq!(order.len(), n);
    order
}

/// Zero-diagonal unknowns coupled only to other zero-diagonal unknowns
/// (a multiplier acting on multipliers) are moved to the end.
fn isolated_multipliers_last(a: &CsrMatrix, adj: &[Vec<usize>], order: &[usize]) -> Vec<usize> {
    let zero = |i: usize| a.get(i, i) == 0.0;
    let isolated = |i: usize| zero(i) && adj[i].iter().all(|&w| zero(w));
    let mut out: Vec<usize> = order.iter().copied().filter(|&v| !isolated(v)).collect();
    out.extend(order.iter().copied().filter(|&v| isolated(v)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    fn grid_laplacian(m: usize) -> CsrMatrix {
        let n = m * m;
        let mut t = Triplets::new(n, n);
        for j in 0..m {
            for i in 0..m {
                let v = j * m + i;
                t.push(v, v, 4.0);
                if i + 1 < m {
                    t.push(v, v + 1, -1.0);
                    t.push(v + 1, v, -1.0);
                }
                if j + 1 < m {
                    t.push(v, v + m, -1.0);
                    t.push(v + m, v, -1.0);
                }
            }
        }
        t.to_csr()
    }

    #[test]
    fn ordering_is_a_permutation() {
        let a = grid_laplacian(40);
        let p = nested_dissection(&a);
        let mut seen = vec![false; a.n_rows()];
        for &i in &p {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn dense_rows_go_last() {
        let m = 30;
        let n = m * m;
        let base = grid_laplacian(m);
        let mut t = Triplets::new(n + 1, n + 1);
        for (r, c, v) in base.iter() {
            t.push(r, c, v);
        }
        for i in 0..n {
            t.push(i, n, 1.0);
            t.push(n, i, 1.0);
        }
        let p = nested_dissection(&t.to_csr());
        assert_eq!(*p.last().unwrap(), n);
    }
}
