//! Fixtures shared by the benchmarks.

use hdiv_eigen::assembly::{assemble, default_gamma, AssembledSystem};
use hdiv_eigen::eigsolver::Pencil;
use hdiv_eigen::spaces::{build_dofmap, DofMap};
use hdiv_eigen::{make_domain, DomainTag, Mesh};

/// A mesh of `domain` with `divisions` cells per side, refined uniformly
/// `refinements` times and then once more near the origin.
pub fn mesh(domain: DomainTag, divisions: usize, refinements: usize) -> Mesh {
    let mut mesh = make_domain(domain, divisions).expect("valid domain");
    for _ in 0..refinements {
        mesh = mesh.refine_uniform();
    }
    let marked = mesh
        .active_cells()
        .iter()
        .copied()
        .filter(|&c| {
            let x = mesh.cell(c).center();
            x[0].hypot(x[1]) < 0.3
        })
        .collect();
    mesh.refine(&marked).expect("refinement succeeds")
}

pub struct Problem {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub system: AssembledSystem,
    pub pencil: Pencil,
    pub gamma: f64,
}

pub fn problem(domain: DomainTag, k: usize, refinements: usize) -> Problem {
    let mesh = mesh(domain, 4, refinements);
    let dofmap = build_dofmap(&mesh, k);
    let gamma = default_gamma(k);
    let system = assemble(&mesh, &dofmap, 1.0, gamma, k).expect("assembly succeeds");
    let pencil = Pencil::from_blocks(&system.a, &system.b, &system.c, &system.m);
    Problem { mesh, dofmap, system, pencil, gamma }
}
