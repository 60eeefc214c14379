mod common;

use common::checks::{forms_vs_reevaluation, sparse_vs_dense};
use common::dense::{dense_smallest_eig, DenseSystem};
use common::reeval::reevaluate_forms;
use common::{gauss, one_hanging_mesh};
use hdiv_eigen::assembly::{assemble, default_gamma};
use hdiv_eigen::spaces::{build_dofmap, interpolate_velocity};
use hdiv_eigen::sparse::CsrMatrix;
use hdiv_eigen::{make_domain, DomainTag};

#[test]
fn gauss_oracle_is_exact() {
    for n in 1..12 {
        let r = gauss::rule(n);
        for d in 0..2 * n {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(d as i32)).sum();
            assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n {n} degree {d}");
        }
    }
}

#[test]
fn dense_oracle_on_diagonal_pencil() {
    // K = diag(2, 3) with an empty divergence block
    let sys = hdiv_eigen::assembly::AssembledSystem {
        a: CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 3.0]]),
        b: CsrMatrix::from_dense(&[vec![0.0, 0.0]]),
        m: CsrMatrix::identity(2),
        c: vec![1.0],
        nu: 1.0,
        gamma: 1.0,
        k: 1,
    };
    let (lambda, x) = dense_smallest_eig(&DenseSystem::new(&sys));
    assert!((lambda - 2.0).abs() < 1e-12);
    assert!((x[0].abs() - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
}

#[test]
fn sparse_eigenvalue_matches_dense_oracle() {
    let meshes = [
        ("2x2 square", make_domain(DomainTag::Square, 2).unwrap()),
        ("hanging square", one_hanging_mesh(DomainTag::Square, 2)),
        ("hanging L-shape", one_hanging_mesh(DomainTag::LShape, 2)),
    ];
    for (name, mesh) in &meshes {
        for k in 1..=2 {
            let (diff, res, rayleigh) = sparse_vs_dense(mesh, k);
            assert!(diff < 1e-9, "{name} k={k}: relative difference {diff:e}");
            assert!(res < 1e-9, "{name} k={k}: dense residual {res:e}");
            assert!(rayleigh < 1e-9, "{name} k={k}: Rayleigh defect {rayleigh:e}");
        }
    }
}

#[test]
fn restricted_stiffness_is_coercive_with_default_penalty() {
    for k in 1..=3 {
        let mesh = make_domain(DomainTag::Square, 2).unwrap();
        let dm = build_dofmap(&mesh, k);
        let sys = assemble(&mesh, &dm, 1.0, default_gamma(k), k).unwrap();
        let ev = DenseSystem::new(&sys).restricted_stiffness_eigenvalues();
        assert!(ev[0] > 0.0, "k={k}: {}", ev[0]);
    }
}

#[test]
fn forms_and_estimator_match_reevaluation() {
    let meshes = [
        make_domain(DomainTag::Square, 2).unwrap(),
        one_hanging_mesh(DomainTag::Square, 2),
        one_hanging_mesh(DomainTag::LShape, 2),
        one_hanging_mesh(DomainTag::Slit, 2),
    ];
    for (i, mesh) in meshes.iter().enumerate() {
        for k in 1..=2 {
            let worst = forms_vs_reevaluation(mesh, k, 17 + i as u64);
            assert!(worst < 1e-10, "mesh {i} k={k}: {worst:e}");
        }
    }
}

#[test]
fn zero_coefficients_give_zero_energies() {
    let mesh = one_hanging_mesh(DomainTag::Square, 2);
    let dm = build_dofmap(&mesh, 2);
    let e = reevaluate_forms(&mesh, &dm, 5.0, &vec![0.0; dm.n_u()], &vec![0.0; dm.n_p()], 1.0, 12.0, 4);
    assert_eq!(e.a, 0.0);
    assert_eq!(e.mass, 0.0);
    assert!(e.eta_r.iter().chain(&e.eta_e).chain(&e.eta_j).all(|v| *v == 0.0));
}

#[test]
fn conforming_field_has_no_jump_on_either_path() {
    let mesh = one_hanging_mesh(DomainTag::Square, 2);
    let dm = build_dofmap(&mesh, 2);
    // quadratic bubble field, continuous and zero on the boundary
    let field = |x: [f64; 2]| {
        let s = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        [s, -s]
    };
    let u = interpolate_velocity(&mesh, &dm, field);
    let p = vec![0.0; dm.n_p()];
    let o = reevaluate_forms(&mesh, &dm, 1.0, &u, &p, 1.0, 12.0, 4);
    let est = hdiv_eigen::estimator::estimate_fields(&mesh, &dm, 1.0, &u, &p, 1.0, 12.0);
    assert!(o.eta_j.iter().all(|v| v.abs() < 1e-20));
    assert!(est.eta_j_sq.iter().all(|v| v.abs() < 1e-20));
}
