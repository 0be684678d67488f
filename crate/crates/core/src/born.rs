//! Born-approximation initializer: the linear map from a weak scatterer to
//! boundary-integral data over pairs of directions, and its Tikhonov
//! inversion.
//!
//! Rows are indexed by `(i, j)` with `d1 = d(angles[i])` the incident
//! direction and `d2 = d(angles[j])` the direction of the plane-wave test
//! function, row index `i * n + j`. Columns are the active grid cells.

use crate::error::{Error, Result};
use crate::forward::BoundaryTrace;
use crate::grid::{Grid, GridField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn dir(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

/// Assembled Born system at one wavenumber.
#[derive(Debug, Clone)]
pub struct BornSystem {
    pub operator: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
    pub k: f64,
    pub alpha: f64,
    /// grid cell index of each column
    pub cells: Vec<usize>,
}

/// `A[(i,j), c] = k^2 exp(ik x_c.(d1 + d2)) |c|`, midpoint rule on the
/// cells listed in `cells`.
pub fn assemble_born_operator(grid: &Grid, cells: &[usize], k: f64, angles: &[f64]) -> Result<DMatrix<Complex64>> {
    if cells.is_empty() || angles.is_empty() {
        return Err(Error::Contract("Born operator needs at least one cell and one angle".into()));
    }
    let n = angles.len();
    let area = grid.cell_area();
    let centers: Vec<[f64; 2]> = cells.iter().map(|&c| grid.center(c)).collect();
    let mut a = DMatrix::<Complex64>::zeros(n * n, cells.len());
    for i in 0..n {
        let d1 = dir(angles[i]);
        for j in 0..n {
            let d2 = dir(angles[j]);
            let xi = [k * (d1[0] + d2[0]), k * (d1[1] + d2[1])];
            for (c, x) in centers.iter().enumerate() {
                a[(i * n + j, c)] = (I * (xi[0] * x[0] + xi[1] * x[1])).exp() * (k * k * area);
            }
        }
    }
    Ok(a)
}

/// Right-hand side from scattered traces: `traces[i]` belongs to incidence
/// angle `angles[i]`. Both boundary integrals use the trapezoidal rule at
/// the trace angles on the circle of radius `r`.
pub fn born_rhs(traces: &[&BoundaryTrace], k: f64, angles: &[f64], r: f64) -> Result<DVector<Complex64>> {
    if traces.len() != angles.len() {
        return Err(Error::Missing(format!(
            "Born right-hand side needs {} traces, got {}",
            angles.len(),
            traces.len()
        )));
    }
    let n = angles.len();
    let mut f = DVector::<Complex64>::zeros(n * n);
    for (i, tr) in traces.iter().enumerate() {
        let d1 = dir(angles[i]);
        let m = tr.len();
        let w = TAU * r / m as f64;
        for j in 0..n {
            let d2 = dir(angles[j]);
            let mut acc = Complex64::new(0.0, 0.0);
            for (s, &t) in tr.angles().iter().enumerate() {
                let nrm = [t.cos(), t.sin()];
                let x = [r * nrm[0], r * nrm[1]];
                let nd1 = nrm[0] * d1[0] + nrm[1] * d1[1];
                let nd2 = nrm[0] * d2[0] + nrm[1] * d2[1];
                let test = (I * (k * (x[0] * d2[0] + x[1] * d2[1]))).exp();
                let inc = (I * (k * (x[0] * d1[0] + x[1] * d1[1]))).exp();
                acc += I * k * nd2 * test * tr.dirichlet()[s] - test * tr.neumann()[s];
                acc += test * inc * (I * k * (nd2 - nd1));
            }
            f[i * n + j] = acc * w;
        }
    }
    Ok(f)
}

/// Estimate of the largest squared singular value of `a` by power iteration
/// on `A A*`.
pub fn largest_singular_sq(a: &DMatrix<Complex64>, iterations: usize) -> f64 {
    let mut x = DVector::from_element(a.nrows(), Complex64::new(1.0, 0.0));
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let y = a * (a.adjoint() * &x);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / x.norm();
        x = y / Complex64::new(norm, 0.0);
    }
    lambda
}

/// Gram matrix `A A*` computed in parallel over rows.
fn gram(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let rows = a.nrows();
    let at = a.transpose();
    let cols: Vec<Vec<Complex64>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let ri = at.column(i);
            (0..rows)
                .map(|j| {
                    let rj = at.column(j);
                    ri.iter().zip(rj.iter()).map(|(x, y)| x * y.conj()).sum()
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(rows, rows, |i, j| cols[i][j])
}

/// `q = (A*A + alpha I)^{-1} A* f`, evaluated through the equivalent dual
/// form `A* (A A* + alpha I)^{-1} f`, whichever of the two Hermitian
/// systems is smaller.
pub fn tikhonov_solve(a: &DMatrix<Complex64>, f: &DVector<Complex64>, alpha: f64) -> Result<DVector<Complex64>> {
    if !(alpha > 0.0) {
        return Err(Error::Contract(format!("Tikhonov weight must be positive, got {alpha}")));
    }
    if f.len() != a.nrows() {
        return Err(Error::Contract(format!("{} data for {} operator rows", f.len(), a.nrows())));
    }
    let fail = || Error::Solver("Tikhonov system not positive definite".into());
    if a.nrows() <= a.ncols() {
        let mut g = gram(a);
        for i in 0..g.nrows() {
            g[(i, i)] += alpha;
        }
        let y = g.cholesky().ok_or_else(fail)?.solve(f);
        Ok(a.adjoint() * y)
    } else {
        let mut g = a.adjoint() * a;
        for i in 0..g.nrows() {
            g[(i, i)] += alpha;
        }
        Ok(g.cholesky().ok_or_else(fail)?.solve(&(a.adjoint() * f)))
    }
}

/// Born initial guess for `sigma` on `grid`: cells inside `support` are the
/// unknowns, `alpha = alpha_rel * sigma_max(A)^2`, `sigma0 = k Im(q0)`
/// clamped to `bounds`.
#[allow(clippy::too_many_arguments)]
pub fn born_initialize(
    grid: &Grid,
    support: f64,
    k: f64,
    angles: &[f64],
    traces: &[&BoundaryTrace],
    r: f64,
    alpha_rel: f64,
    bounds: (f64, f64),
) -> Result<(GridField, BornSystem)> {
    let cells = grid.cells_within(support);
    let operator = assemble_born_operator(grid, &cells, k, angles)?;
    let rhs = born_rhs(traces, k, angles, r)?;
    let alpha = alpha_rel * largest_singular_sq(&operator, 30);
    let q = tikhonov_solve(&operator, &rhs, alpha)?;
    let mut sigma = GridField::zeros(grid.clone());
    for (c, v) in cells.iter().zip(q.iter()) {
        sigma.values_mut()[*c] = (k * v.im).clamp(bounds.0, bounds.1);
    }
    Ok((sigma, BornSystem { operator, rhs, k, alpha, cells }))
}
