use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::*;
use crate::mesh::{make_domain, DomainTag, EdgeKind};

fn hanging_mesh() -> Mesh {
    let m = make_domain(DomainTag::Square, 2).unwrap();
    let m = m.refine(&BTreeSet::from([0])).unwrap();
    let child = m.cell(0).children.unwrap()[3];
    m.refine(&BTreeSet::from([child])).unwrap()
}

#[test]
fn k1_has_twelve_functions_and_identity_map_on_unit_cell() {
    let b = VelocityBasis::new(1);
    let mesh = make_domain(DomainTag::Square, 1).unwrap();
    let cell = mesh.cell(0);
    let p = [0.3, 0.7];
    let phys = eval_velocity(&b, cell, p);
    let reference = b.eval_reference(p);
    assert_eq!(phys.values.len(), 12);
    for i in 0..12 {
        assert_eq!(phys.values[i], reference.values[i]);
        assert_eq!(phys.grads[i], reference.grads[i]);
    }
}

#[test]
fn mapped_divergence_matches_boundary_flux() {
    let mesh = make_domain(DomainTag::LShape, 2).unwrap();
    let cell = mesh.cell(1);
    for k in 1..=3 {
        let tables = ElementTables::new(k);
        let (dx, dy) = (cell.dx(), cell.dy());
        let n = tables.velocity.dim();
        let mut volume = vec![0.0; n];
        for ((_, w), r) in tables.cell_rule.iter().zip(&tables.cell_velocity) {
            let phys = map_velocity(r, dx, dy);
            for i in 0..n {
                volume[i] += w * dx * dy * phys.divs[i];
            }
        }
        let mut flux = vec![0.0; n];
        for face in 0..4 {
            let normal = crate::mesh::FACE_OUTWARD_NORMALS[face];
            let len = if face < 2 { dy } else { dx };
            for ((_, w), r) in tables.edge_rule.iter().zip(tables.face_velocity(face, FaceSegment::Full)) {
                let phys = map_velocity(r, dx, dy);
                for i in 0..n {
                    let v = phys.values[i];
                    flux[i] += w * len * (v[0] * normal[0] + v[1] * normal[1]);
                }
            }
        }
        for i in 0..n {
            assert!((volume[i] - flux[i]).abs() < 1e-12, "k={k} i={i}");
        }
    }
}

#[test]
fn divergence_lies_in_pressure_space() {
    let mesh = make_domain(DomainTag::Square, 3).unwrap();
    let cell = mesh.cell(4);
    for k in 1..=3 {
        // Rules with extra points so the projection residual is measured honestly.
        let tables = ElementTables::with_points(k, k + 4);
        let (dx, dy) = (cell.dx(), cell.dy());
        let np = tables.pressure.dim();
        for i in 0..tables.velocity.dim() {
            // L2 projection onto the orthogonal Legendre basis.
            let mut coef = vec![0.0; np];
            let mut norms = vec![0.0; np];
            for (((_, w), r), q) in tables.cell_rule.iter().zip(&tables.cell_velocity).zip(&tables.cell_pressure) {
                let div = map_velocity(r, dx, dy).divs[i];
                for j in 0..np {
                    coef[j] += w * div * q.values[j];
                    norms[j] += w * q.values[j] * q.values[j];
                }
            }
            let mut residual = 0.0;
            let mut total = 0.0;
            for ((_, w), (r, q)) in tables.cell_rule.iter().zip(tables.cell_velocity.iter().zip(&tables.cell_pressure)) {
                let div = map_velocity(r, dx, dy).divs[i];
                let proj: f64 = (0..np).map(|j| coef[j] / norms[j] * q.values[j]).sum();
                residual += w * (div - proj).powi(2);
                total += w * div * div;
            }
            assert!(residual.sqrt() <= 1e-12 * total.sqrt().max(1.0), "k={k} i={i}");
        }
    }
}

#[test]
fn dof_counts_on_two_by_two_square() {
    let mesh = make_domain(DomainTag::Square, 2).unwrap();
    let dm = build_dofmap(&mesh, 1);
    // Enumerate: every cell owns 4 interior moments; every interior edge
    // carries 2 shared normal moments; boundary normals are removed.
    let interior_edges = mesh.edges().iter().filter(|e| e.kind == EdgeKind::InteriorRegular).count();
    let expected = mesh.num_active() * 4 + interior_edges * 2;
    assert_eq!(dm.n_u(), expected);
    assert_eq!(dm.n_u(), 24);
    assert_eq!(dm.n_p(), 16);
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn normal_component_is_continuous_across_interior_edges() {
    for mesh in [hanging_mesh(), make_domain(DomainTag::Slit, 4).unwrap().refine(&BTreeSet::from([5])).unwrap()] {
        for k in 1..=3 {
            let dm = build_dofmap(&mesh, k);
            let basis = VelocityBasis::new(k);
            let u = random_vector(dm.n_u(), 7 + k as u64);
            let rule = crate::quadrature::gauss_1d(k + 2).unwrap();
            let eval = |cell_id, x: [f64; 2]| {
                let pos = dm.position(cell_id);
                let local = dm.gather_velocity(pos, &u);
                let phys = eval_velocity(&basis, mesh.cell(cell_id), x);
                let mut v = [0.0; 2];
                for (a, c) in local.iter().enumerate() {
                    v[0] += c * phys.values[a][0];
                    v[1] += c * phys.values[a][1];
                }
                v
            };
            for e in mesh.active_edges() {
                for s in rule.abscissae() {
                    let x = e.point_at(s);
                    let vp = eval(e.plus.cell, x);
                    let np = vp[0] * e.normal[0] + vp[1] * e.normal[1];
                    match e.minus {
                        Some(m) => {
                            let vm = eval(m.cell, x);
                            let nm = vm[0] * e.normal[0] + vm[1] * e.normal[1];
                            assert!((np - nm).abs() < 1e-12, "k={k} edge {}: {np} vs {nm}", e.id);
                        }
                        None => assert!(np.abs() < 1e-12, "boundary normal flux {np}"),
                    }
                }
            }
        }
    }
}

#[test]
fn pressure_mean_vector_entries() {
    let single = make_domain(DomainTag::Square, 1).unwrap();
    let c = pressure_mean_vector(&single, &build_dofmap(&single, 1));
    assert_eq!(c.len(), 4);
    assert!((c[0] - 1.0).abs() < 1e-15);
    assert_eq!(&c[1..], &[0.0, 0.0, 0.0]);

    let mesh = make_domain(DomainTag::Square, 2).unwrap();
    let c = pressure_mean_vector(&mesh, &build_dofmap(&mesh, 1));
    let nonzero: Vec<f64> = c.iter().copied().filter(|v| *v != 0.0).collect();
    assert_eq!(nonzero.len(), 4);
    assert!(nonzero.iter().all(|v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn interpolation_reproduces_polynomials_on_hanging_mesh() {
    let mesh = hanging_mesh();
    for k in 1..=3 {
        let dm = build_dofmap(&mesh, k);
        let basis = VelocityBasis::new(k);
        // In RT_k on every cell with zero normal trace on the boundary of (0,1)^2.
        let field = move |x: [f64; 2]| {
            let kk = k as i32;
            [x[0] * (1.0 - x[0]) * (0.5 + x[1].powi(kk)), x[1] * (1.0 - x[1]) * (0.7 * x[0].powi(kk) - 0.25)]
        };
        let u = interpolate_velocity(&mesh, &dm, field);
        let mut max_err: f64 = 0.0;
        for (pos, &c) in dm.cells().iter().enumerate() {
            let local = dm.gather_velocity(pos, &u);
            let cell = mesh.cell(c);
            for xi in [[0.1, 0.2], [0.5, 0.5], [0.9, 0.33], [0.0, 0.7], [1.0, 1.0]] {
                let x = cell.to_physical(xi);
                let phys = eval_velocity(&basis, cell, x);
                let mut v = [0.0; 2];
                for (a, co) in local.iter().enumerate() {
                    v[0] += co * phys.values[a][0];
                    v[1] += co * phys.values[a][1];
                }
                let f = field(x);
                max_err = max_err.max((v[0] - f[0]).abs()).max((v[1] - f[1]).abs());
            }
        }
        assert!(max_err < 1e-11, "k={k}: {max_err}");
    }
}
