//! Gauss–Legendre rules on the unit interval and the unit square.

use crate::error::{Error, Result};

/// A quadrature rule on `[0,1]^D`. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

pub type Rule1d = QuadratureRule<1>;
pub type Rule2d = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl Rule1d {
    /// Abscissae as plain scalars.
    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[0])
    }

    /// Tensor product of `self` with itself.
    pub fn tensor(&self) -> Rule2d {
        let mut points = Vec::with_capacity(self.len() * self.len());
        let mut weights = Vec::with_capacity(self.len() * self.len());
        for (py, wy) in self.iter() {
            for (px, wx) in self.iter() {
                points.push([px[0], py[0]]);
                weights.push(wx * wy);
            }
        }
        QuadratureRule { points, weights }
    }
}

pub const MAX_GAUSS_POINTS: usize = 20;

/// `n`-point Gauss–Legendre rule mapped to `[0,1]`; exact for degree `2n-1`.
pub fn gauss_1d(n: usize) -> Result<Rule1d> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(Error::InvalidArgument(format!(
            "Gauss rule needs 1..={MAX_GAUSS_POINTS} points, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots are symmetric; solve for the upper half on (-1,1) by Newton.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        points: nodes.iter().map(|&x| [0.5 * (x + 1.0)]).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Points per direction used for element degree `k`.
pub fn points_for_degree(k: usize) -> usize {
    k + 2
}

fn check_degree(k: usize) -> Result<()> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("element degree must be 1..=3, got {k}")));
    }
    Ok(())
}

/// Tensor Gauss rule on the reference square for degree-`k` elements.
pub fn cell_rule(k: usize) -> Result<Rule2d> {
    check_degree(k)?;
    Ok(gauss_1d(points_for_degree(k))?.tensor())
}

/// Gauss rule on the reference edge for degree-`k` elements.
pub fn edge_rule(k: usize) -> Result<Rule1d> {
    check_degree(k)?;
    gauss_1d(points_for_degree(k))
}
