//! Brute-force reference implementations used by the integration tests.
//!
//! Nothing here calls the production quadrature, Piola map, face pairing or
//! solvers; only the reference basis tabulation and the DOF map are shared.
#![allow(dead_code)]

pub mod dense;
pub mod gauss;
pub mod checks;
pub mod reeval;

use std::collections::BTreeSet;

use hdiv_eigen::{make_domain, DomainTag, Mesh};

/// Uniform `n x n` grid of the domain with one cell refined, which leaves
/// hanging nodes on its neighbours.
pub fn one_hanging_mesh(domain: DomainTag, n: usize) -> Mesh {
    let mesh = make_domain(domain, n).unwrap();
    let mut marked = BTreeSet::new();
    marked.insert(mesh.active_cells()[0]);
    let mesh = mesh.refine(&marked).unwrap();
    assert!(mesh.hanging_master_count() > 0);
    mesh
}

/// Smallest number of entries of `v` adding up to at least `theta * sum(v)`,
/// by enumeration of all subsets.
pub fn brute_force_bulk(v: &[f64], theta: f64) -> usize {
    assert!(v.len() <= 20);
    let total: f64 = v.iter().sum();
    let n = v.len();
    let mut best = n;
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        if k >= best {
            continue;
        }
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        if s >= theta * total {
            best = k;
        }
    }
    best
}
