//! Measurements shared by the oracle tests and the acceptance suite. Each
//! returns the worst observed discrepancy.

use super::dense::{dense_smallest_eig, residual, DenseSystem};
use super::reeval::reevaluate_forms;
use hdiv_eigen::assembly::{assemble, default_gamma};
use hdiv_eigen::eigsolver::{smallest_eigenpair, EigenOptions, Pencil};
use hdiv_eigen::estimator::estimate_fields;
use hdiv_eigen::spaces::build_dofmap;
use hdiv_eigen::Mesh;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

/// Relative eigenvalue difference between the sparse solver and the dense
/// oracle, plus the dense pencil residual and its Rayleigh identity defect.
pub fn sparse_vs_dense(mesh: &Mesh, k: usize) -> (f64, f64, f64) {
    let dm = build_dofmap(mesh, k);
    let sys = assemble(mesh, &dm, 1.0, default_gamma(k), k).unwrap();
    let pencil = Pencil::from_blocks(&sys.a, &sys.b, &sys.c, &sys.m);
    let sparse = smallest_eigenpair(&pencil, &EigenOptions::default()).unwrap();
    let ds = DenseSystem::new(&sys);
    // entrywise agreement of the augmented operator
    for i in 0..ds.k.nrows() {
        for j in 0..ds.k.ncols() {
            assert!((ds.k[(i, j)] - pencil.stiffness.get(i, j)).abs() < 1e-13 * ds.k.amax());
        }
    }
    let (lambda, x) = dense_smallest_eig(&ds);
    let u = x.rows(0, ds.n_u).into_owned();
    let rayleigh = ((u.transpose() * ds.a() * &u)[(0, 0)] - lambda * (u.transpose() * ds.m() * &u)[(0, 0)]).abs() / lambda;
    (rel(sparse.lambda, lambda, lambda), residual(&ds, lambda, &x), rayleigh)
}

/// Worst relative disagreement of `a_h(u,u)`, `(p, div u)`, `(u,u)` and every
/// per-cell estimator component between production and re-evaluation, for
/// random coefficients.
pub fn forms_vs_reevaluation(mesh: &Mesh, k: usize, seed: u64) -> f64 {
    let dm = build_dofmap(mesh, k);
    let (nu, gamma) = (0.7, default_gamma(k));
    let sys = assemble(mesh, &dm, nu, gamma, k).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let u: Vec<f64> = (0..dm.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p: Vec<f64> = (0..dm.n_p()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lambda = 30.0;
    let o = reevaluate_forms(mesh, &dm, lambda, &u, &p, nu, gamma, 4);

    let quad = |m: &hdiv_eigen::sparse::CsrMatrix, l: &[f64], r: &[f64]| -> f64 {
        m.mul_vec(r).iter().zip(l).map(|(a, b)| a * b).sum()
    };
    let a = quad(&sys.a, &u, &u);
    let b = quad(&sys.b, &p, &u);
    let mass = quad(&sys.m, &u, &u);
    let mut worst = rel(a, o.a, o.a.abs())
        .max(rel(b, o.b, o.b.abs().max(1.0)))
        .max(rel(mass, o.mass, o.mass));

    let est = estimate_fields(mesh, &dm, lambda, &u, &p, nu, gamma);
    for (prod, orac) in [(&est.eta_r_sq, &o.eta_r), (&est.eta_e_sq, &o.eta_e), (&est.eta_j_sq, &o.eta_j)] {
        let scale = orac.iter().cloned().fold(0.0, f64::max);
        for (x, y) in prod.iter().zip(orac) {
            worst = worst.max(rel(*x, *y, scale));
        }
    }
    worst
}

/// One measured invariant.
pub struct Measure {
    pub name: String,
    pub value: f64,
    pub bound: f64,
}

impl Measure {
    pub fn ok(&self) -> bool {
        self.value <= self.bound
    }
}

fn worst(name: &str, bound: f64, values: impl IntoIterator<Item = f64>) -> Measure {
    let value = values.into_iter().fold(0.0, f64::max);
    Measure { name: name.to_string(), value, bound }
}

/// The structural invariants on a set of small meshes, without reference
/// eigenvalues.
pub fn invariant_suite() -> Vec<Measure> {
    use hdiv_eigen::adapt::doerfler_mark;
    use hdiv_eigen::eigsolver::rayleigh_check;
    use hdiv_eigen::estimator::estimate;
    use hdiv_eigen::quadrature::{cell_rule, gauss_1d};
    use hdiv_eigen::spaces::{interpolate_velocity, pressure_mean_vector};
    use hdiv_eigen::{make_domain, DomainTag};

    let meshes = vec![
        make_domain(DomainTag::Square, 4).unwrap(),
        super::one_hanging_mesh(DomainTag::Square, 4),
        super::one_hanging_mesh(DomainTag::LShape, 2).refine_uniform(),
        super::one_hanging_mesh(DomainTag::Slit, 2),
    ];
    let opts = EigenOptions::default();
    let (mut sym, mut div, mut mean, mut ray, mut res, mut bulk) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for mesh in &meshes {
        for k in 1..=2 {
            let dm = build_dofmap(mesh, k);
            let gamma = default_gamma(k);
            let sys = assemble(mesh, &dm, 1.0, gamma, k).unwrap();
            sym.push(sys.a.asymmetry() / sys.a.max_abs());
            let pencil = Pencil::from_blocks(&sys.a, &sys.b, &sys.c, &sys.m);
            let pair = smallest_eigenpair(&pencil, &opts).unwrap();
            let o = reevaluate_forms(mesh, &dm, pair.lambda, &pair.u, &pair.p, 1.0, gamma, 4);
            div.push(o.div_sq.sqrt());
            mean.push(pressure_mean_vector(mesh, &dm).iter().zip(&pair.p).map(|(a, b)| a * b).sum::<f64>().abs());
            ray.push(rayleigh_check(&sys.a, &sys.m, &pair));
            res.push(pencil.residual(pair.lambda, &pair.stacked()).max(pair.residual) / opts.tol);
            let ind = estimate(mesh, &dm, &pair, 1.0, gamma).indicators();
            if ind.len() <= 20 {
                let v: Vec<f64> = ind.iter().map(|x| x.1).collect();
                for theta in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
                    let marked = doerfler_mark(&ind, theta).unwrap();
                    let sum: f64 = ind.iter().filter(|(c, _)| marked.contains(c)).map(|x| x.1).sum();
                    let reaches = sum >= theta * v.iter().sum::<f64>();
                    let minimal = marked.len() == super::brute_force_bulk(&v, theta);
                    bulk.push(if reaches && minimal { 0.0 } else { 1.0 });
                }
            }
        }
    }

    // polynomial fields of RT_k with vanishing normal trace, through hanging edges
    let mut interp = vec![];
    let fields: [fn([f64; 2]) -> [f64; 2]; 2] = [
        |x| [x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1])],
        |x| [x[0] * (1.0 - x[0]) * x[1] * x[1], x[1] * (1.0 - x[1]) * x[0]],
    ];
    for mesh in &meshes[..2] {
        for k in 1..=3 {
            for f in fields.iter().take(if k >= 2 { 2 } else { 1 }) {
                let dm = build_dofmap(mesh, k);
                let u = interpolate_velocity(mesh, &dm, f);
                for i in 0..37 {
                    for j in 0..37 {
                        let x = [(i as f64 + 0.31) / 37.0, (j as f64 + 0.57) / 37.0];
                        let v = super::reeval::velocity_at(mesh, &dm, &u, x).unwrap();
                        let e = f(x);
                        interp.push((v[0] - e[0]).abs().max((v[1] - e[1]).abs()));
                    }
                }
            }
        }
    }

    let mut quad = vec![];
    for n in 1..=12 {
        let r = gauss_1d(n).unwrap();
        for d in 0..2 * n {
            let s: f64 = r.iter().map(|(x, w)| w * x[0].powi(d as i32)).sum();
            quad.push((s - 1.0 / (d as f64 + 1.0)).abs());
        }
    }
    for k in 1..=3 {
        let r = cell_rule(k).unwrap();
        let top = 2 * (k + 2) - 1;
        for a in 0..=top {
            for b in 0..=top {
                let s: f64 = r.iter().map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
                quad.push((s - 1.0 / ((a + 1) * (b + 1)) as f64).abs());
            }
        }
    }

    vec![
        worst("symmetry of A", 1e-12, sym),
        worst("||div u_h||", 1e-10, div),
        worst("|int p_h|", 1e-10, mean),
        worst("Rayleigh identity", 1e-9, ray),
        worst("eigenresidual / tol", 1.0, res),
        worst("bulk marking minimality (failures)", 0.0, bulk),
        worst("hanging interpolation reproduction", 1e-11, interp),
        worst("quadrature exactness", 1e-14, quad),
    ]
}
