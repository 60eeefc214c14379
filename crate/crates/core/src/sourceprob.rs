//! Stokes source problem on the eigenvalue discretization and convergence
//! rates by manufactured solutions.

use log::debug;

use crate::adapt::log_slope;
use crate::assembly::{assemble, assemble_load_with, default_gamma};
use crate::eigsolver::{factorize, Pencil};
use crate::error::{Error, Result};
use crate::mesh::{make_domain, DomainTag, Mesh};
use crate::spaces::{
    build_dofmap, face_sides, map_pressure, map_velocity, sample_pressure, sample_velocity, DofMap, ElementTables,
};

type Field = fn([f64; 2]) -> [f64; 2];
type Gradient = fn([f64; 2]) -> [[f64; 2]; 2];
type Scalar = fn([f64; 2]) -> f64;

/// Closed-form Stokes solution with its derivatives.
///
/// `velocity` must be divergence free and vanish on the boundary, and
/// `pressure` must have zero mean.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub domain: DomainTag,
    pub nu: f64,
    pub velocity: Field,
    /// `grad[c][d] = d u_c / d x_d`
    pub velocity_gradient: Gradient,
    pub velocity_laplacian: Field,
    pub pressure: Scalar,
    pub pressure_gradient: Field,
}

fn b(t: f64) -> [f64; 4] {
    // b = t^2 (1-t)^2 and its first three derivatives
    [
        t * t * (1.0 - t) * (1.0 - t),
        2.0 * t - 6.0 * t * t + 4.0 * t * t * t,
        2.0 - 12.0 * t + 12.0 * t * t,
        -12.0 + 24.0 * t,
    ]
}

impl ManufacturedCase {
    /// `u = curl(b(x) b(y))`, `b(t) = t^2 (1-t)^2`, `p = x^3 y^3 - 1/16` on
    /// the unit square.
    pub fn polynomial_square(nu: f64) -> Self {
        ManufacturedCase {
            domain: DomainTag::Square,
            nu,
            velocity: |x| {
                let (bx, by) = (b(x[0]), b(x[1]));
                [bx[0] * by[1], -bx[1] * by[0]]
            },
            velocity_gradient: |x| {
                let (bx, by) = (b(x[0]), b(x[1]));
                [[bx[1] * by[1], bx[0] * by[2]], [-bx[2] * by[0], -bx[1] * by[1]]]
            },
            velocity_laplacian: |x| {
                let (bx, by) = (b(x[0]), b(x[1]));
                [bx[2] * by[1] + bx[0] * by[3], -(bx[3] * by[0] + bx[1] * by[2])]
            },
            pressure: |x| x[0].powi(3) * x[1].powi(3) - 1.0 / 16.0,
            pressure_gradient: |x| [3.0 * x[0] * x[0] * x[1].powi(3), 3.0 * x[0].powi(3) * x[1] * x[1]],
        }
    }

    /// `f = -nu lap u + grad p`
    pub fn body_force(&self, x: [f64; 2]) -> [f64; 2] {
        let l = (self.velocity_laplacian)(x);
        let g = (self.pressure_gradient)(x);
        [-self.nu * l[0] + g[0], -self.nu * l[1] + g[1]]
    }
}

/// Discrete solution of the source problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Mean-value multiplier; vanishes for compatible data.
    pub multiplier: f64,
}

/// Solves `K [u; p; m] = [F; 0; 0]` with the load of `f`.
pub fn solve_source(
    mesh: &Mesh,
    dofmap: &DofMap,
    nu: f64,
    gamma: f64,
    k: usize,
    f: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<SourceSolution> {
    let sys = assemble(mesh, dofmap, nu, gamma, k)?;
    let pencil = Pencil::from_blocks(&sys.a, &sys.b, &sys.c, &sys.m);
    let lu = factorize(&pencil.stiffness)?;
    let tables = ElementTables::with_points(k, k + 4);
    let mut rhs = assemble_load_with(mesh, dofmap, &tables, f);
    let (n_u, n_p) = (dofmap.n_u(), dofmap.n_p());
    rhs.resize(n_u + n_p + 1, 0.0);
    let x = lu.solve(&rhs);
    let multiplier = x[n_u + n_p];
    debug!("source problem: N = {}, multiplier {multiplier:.2e}", n_u + n_p);
    Ok(SourceSolution { u: x[..n_u].to_vec(), p: x[n_u..n_u + n_p].to_vec(), multiplier })
}

/// Error norms of a discrete solution against a manufactured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceErrors {
    /// Mesh-dependent DG velocity-pressure norm of the error.
    pub triple: f64,
    pub velocity_l2: f64,
    pub pressure_l2: f64,
    /// `||div u_h||_0`
    pub divergence_l2: f64,
}

/// `|||(u - u_h, p - p_h)|||` with
/// `|||(v, q)|||^2 = nu ||grad_h v||^2 + nu gamma / h_E ||[[v (x) n]]||^2
/// (interior) + 2 nu gamma / h_E ||v (x) n||^2 (boundary) + ||q||^2 / nu`.
///
/// With `exact = None` the norm of the discrete pair itself is returned.
pub fn source_errors(
    mesh: &Mesh,
    dofmap: &DofMap,
    gamma: f64,
    nu: f64,
    sol: &SourceSolution,
    exact: Option<&ManufacturedCase>,
) -> SourceErrors {
    let k = dofmap.degree();
    let tables = ElementTables::with_points(k, k + 4);
    let (mut grad2, mut l2, mut p2, mut div2) = (0.0, 0.0, 0.0, 0.0);
    for (pos, &cid) in dofmap.cells().iter().enumerate() {
        let cell = mesh.cell(cid);
        let (dx, dy) = (cell.dx(), cell.dy());
        let uc = dofmap.gather_velocity(pos, &sol.u);
        let pc = dofmap.gather_pressure(pos, &sol.p);
        for ((xi, w), (vr, pr)) in tables.cell_rule.iter().zip(tables.cell_velocity.iter().zip(&tables.cell_pressure)) {
            let w = w * dx * dy;
            let x = cell.to_physical(*xi);
            let s = sample_velocity(&map_velocity(vr, dx, dy), &uc);
            let (values, grads) = map_pressure(pr, dx, dy);
            let (ph, _) = sample_pressure(&values, &grads, &pc);
            let (u, g, p) = match exact {
                Some(c) => ((c.velocity)(x), (c.velocity_gradient)(x), (c.pressure)(x)),
                None => ([0.0; 2], [[0.0; 2]; 2], 0.0),
            };
            for c in 0..2 {
                l2 += w * (u[c] - s.value[c]).powi(2);
                for d in 0..2 {
                    grad2 += w * (g[c][d] - s.grad[c][d]).powi(2);
                }
            }
            p2 += w * (p - ph).powi(2);
            div2 += w * s.div * s.div;
        }
    }

    // The exact velocity is continuous and vanishes on the boundary, so
    // only the discrete field contributes to the face terms.
    let mut jump2 = 0.0;
    for edge in mesh.active_edges() {
        let he = edge.length();
        let (plus, minus) = face_sides(mesh, edge);
        let values = |side: &crate::spaces::FaceSide| {
            let cell = mesh.cell(side.cell);
            let uc = dofmap.gather_velocity(dofmap.position(side.cell), &sol.u);
            tables
                .face_velocity(side.face, side.segment)
                .iter()
                .map(|vr| sample_velocity(&map_velocity(vr, cell.dx(), cell.dy()), &uc).value)
                .collect::<Vec<_>>()
        };
        let vp = values(&plus);
        let (vm, factor) = match minus {
            Some(m) => (values(&m), 1.0),
            None => (vec![[0.0; 2]; vp.len()], 2.0),
        };
        let mut s = 0.0;
        for ((w, a), c) in tables.edge_rule.weights.iter().zip(&vp).zip(&vm) {
            s += w * he * ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2));
        }
        jump2 += factor * nu * gamma / he * s;
    }

    SourceErrors {
        triple: (nu * grad2 + jump2 + p2 / nu).sqrt(),
        velocity_l2: l2.sqrt(),
        pressure_l2: p2.sqrt(),
        divergence_l2: div2.sqrt(),
    }
}

/// One level of a manufactured-solution study.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub level: usize,
    pub n_dofs: usize,
    /// Largest cell side.
    pub h: f64,
    pub errors: SourceErrors,
    /// Observed orders against `h` relative to the previous level.
    pub slope_triple: Option<f64>,
    pub slope_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub degree: usize,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Least-squares order of the triple-norm error against `h`.
    pub fn fit_triple(&self) -> Option<f64> {
        self.fit(|e| e.triple)
    }

    /// Least-squares order of the velocity `L2` error against `h`.
    pub fn fit_l2(&self) -> Option<f64> {
        self.fit(|e| e.velocity_l2)
    }

    fn fit(&self, pick: impl Fn(&SourceErrors) -> f64) -> Option<f64> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| pick(&r.errors)).collect();
        log_slope(&h, &e)
    }
}

/// Solves the manufactured case on `levels` uniformly refined meshes,
/// starting from a 4x4 grid, with the default penalty of degree `k`.
pub fn mms_rates(case: &ManufacturedCase, k: usize, levels: usize) -> Result<RateTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!("rate study needs at least 3 levels, got {levels}")));
    }
    let gamma = default_gamma(k);
    let mut mesh = make_domain(case.domain, 4)?;
    let mut rows: Vec<RateRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let dofmap = build_dofmap(&mesh, k);
        let sol = solve_source(&mesh, &dofmap, case.nu, gamma, k, |x| case.body_force(x))
            .map_err(|e| Error::AtLevel { level, source: Box::new(e) })?;
        let errors = source_errors(&mesh, &dofmap, gamma, case.nu, &sol, Some(case));
        let h = mesh.active_cells().iter().map(|&c| mesh.cell(c).dx().max(mesh.cell(c).dy())).fold(0.0, f64::max);
        let (slope_triple, slope_l2) = match rows.last() {
            Some(prev) => {
                let r = (prev.h / h).ln();
                (
                    Some((prev.errors.triple / errors.triple).ln() / r),
                    Some((prev.errors.velocity_l2 / errors.velocity_l2).ln() / r),
                )
            }
            None => (None, None),
        };
        debug!("mms level {level}: triple {:.3e}, l2 {:.3e}", errors.triple, errors.velocity_l2);
        rows.push(RateRow { level, n_dofs: dofmap.n_u() + dofmap.n_p(), h, errors, slope_triple, slope_l2 });
        mesh = mesh.refine_uniform();
    }
    Ok(RateTable { degree: k, rows })
}
