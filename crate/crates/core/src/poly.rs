//! Polynomials of bounded total degree and weighted least-squares
//! projections onto them.
//!
//! Polynomials are kept in a centred, scaled monomial basis
//! `((x - c) / s)^beta`, which keeps Gram matrices well conditioned on small
//! cubes.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction, IndexBox, LocalField};
use crate::linalg;

/// Gram matrices whose condition number exceeds this are rejected in strict
/// mode.
pub const MAX_CONDITION: f64 = 1e12;

/// Multi-indices `beta` with `|beta| <= d`, ordered by total degree.
pub fn multi_indices(n: usize, d: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=d {
        if n == 1 {
            out.push([total, 0]);
        } else {
            for a in (0..=total).rev() {
                out.push([a, total - a]);
            }
        }
    }
    out
}

pub fn dim_polynomials(n: usize, d: usize) -> usize {
    multi_indices(n, d).len()
}

pub(crate) fn monomial(y: [f64; 2], beta: [usize; 2]) -> f64 {
    y[0].powi(beta[0] as i32) * y[1].powi(beta[1] as i32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub n: usize,
    pub degree: usize,
    pub center: [f64; 2],
    pub scale: f64,
    /// Coefficients aligned with [`multi_indices`]`(n, degree)`.
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero(n: usize, degree: usize, center: [f64; 2], scale: f64) -> Self {
        Polynomial { n, degree, center, scale, coeffs: vec![0.0; dim_polynomials(n, degree)] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y = [(x[0] - self.center[0]) / self.scale, if self.n == 2 { (x[1] - self.center[1]) / self.scale } else { 0.0 }];
        multi_indices(self.n, self.degree)
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| c * monomial(y, *b))
            .sum()
    }

    /// Samples on a block of lattice cells.
    pub fn sample(&self, grid: &Grid, window: &IndexBox) -> LocalField {
        let mut lf = LocalField::zeros(*grid, *window);
        let idx = multi_indices(self.n, self.degree);
        let mut k = 0;
        window.for_each(|m| {
            let y = self.local_coords(grid, m);
            lf.values[k] = idx.iter().zip(&self.coeffs).map(|(b, c)| c * monomial(y, *b)).sum();
            k += 1;
        });
        lf
    }

    fn local_coords(&self, grid: &Grid, m: [usize; 2]) -> [f64; 2] {
        let y0 = (grid.coord(m[0]) - self.center[0]) / self.scale;
        let y1 = if self.n == 2 { (grid.coord(m[1]) - self.center[1]) / self.scale } else { 0.0 };
        [y0, y1]
    }
}

/// How singular Gram matrices are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    /// Reject condition numbers above [`MAX_CONDITION`].
    Strict,
    /// Minimum-norm solution on the numerically determined subspace. The
    /// orthogonality relations still hold, so moments of `f - P` vanish.
    Pseudo,
}

/// Result of a weighted projection together with its diagnostics.
#[derive(Clone, Debug)]
pub struct Projection {
    pub poly: Polynomial,
    pub condition: f64,
}

/// Factored Gram system of a weight, reusable for many right-hand sides.
///
/// The solve is linear in the data, so projections of a sum equal the sum of
/// projections up to rounding, in both conditioning modes.
#[derive(Clone, Debug)]
pub struct Projector {
    zero: Polynomial,
    weight: LocalField,
    idx: Vec<[usize; 2]>,
    solver: Solver,
    pub condition: f64,
}

#[derive(Clone, Debug)]
enum Solver {
    Cholesky(Vec<f64>),
    /// Row-major pseudo-inverse.
    Pseudo(Vec<f64>),
}

impl Projector {
    pub fn new(weight: LocalField, d: usize, center: [f64; 2], scale: f64, mode: Conditioning) -> Result<Self> {
        let grid = weight.grid;
        let n = grid.dim();
        let idx = multi_indices(n, d);
        let m = idx.len();
        let zero = Polynomial::zero(n, d, center, scale);
        let mut gram = vec![0.0; m * m];
        let mut mass = 0.0;
        let mut mono = vec![0.0; m];
        weight.for_each(|cell, w| {
            if w == 0.0 {
                return;
            }
            mass += w;
            let y = zero.local_coords(&grid, cell);
            for (k, b) in idx.iter().enumerate() {
                mono[k] = monomial(y, *b);
            }
            for a in 0..m {
                for b in a..m {
                    gram[a * m + b] += w * mono[a] * mono[b];
                }
            }
        });
        if !(mass > 0.0) {
            return Err(Error::InvalidInput("projection weight has no mass".into()));
        }
        for a in 0..m {
            for b in 0..a {
                gram[a * m + b] = gram[b * m + a];
            }
        }
        let condition = if m == 1 { 1.0 } else { linalg::condition_number(&gram, m) };
        let chol = if condition <= MAX_CONDITION { linalg::cholesky(&gram, m) } else { None };
        let solver = match (chol, mode) {
            (Some(l), _) => Solver::Cholesky(l),
            (None, Conditioning::Strict) => return Err(Error::IllConditioned { condition }),
            (None, Conditioning::Pseudo) => {
                let mut pinv = vec![0.0; m * m];
                let mut e = vec![0.0; m];
                for c in 0..m {
                    e.iter_mut().enumerate().for_each(|(i, v)| *v = if i == c { 1.0 } else { 0.0 });
                    let col = linalg::pseudo_solve(&gram, m, &e, 1e-13);
                    for r in 0..m {
                        pinv[r * m + c] = col[r];
                    }
                }
                Solver::Pseudo(pinv)
            }
        };
        Ok(Projector { zero, weight, idx, solver, condition })
    }

    pub fn weight(&self) -> &LocalField {
        &self.weight
    }

    /// Projection of the data `v(cell)` sampled on the weight's window.
    pub fn project_with(&self, v: impl Fn([usize; 2]) -> f64) -> Polynomial {
        let grid = self.weight.grid;
        let m = self.idx.len();
        let mut rhs = vec![0.0; m];
        self.weight.for_each(|cell, w| {
            if w == 0.0 {
                return;
            }
            let fv = v(cell) * w;
            if fv == 0.0 {
                return;
            }
            let y = self.zero.local_coords(&grid, cell);
            for (k, b) in self.idx.iter().enumerate() {
                rhs[k] += fv * monomial(y, *b);
            }
        });
        let coeffs = match &self.solver {
            Solver::Cholesky(l) => linalg::cholesky_solve(l, m, &rhs),
            Solver::Pseudo(pinv) => (0..m).map(|r| (0..m).map(|c| pinv[r * m + c] * rhs[c]).sum()).collect(),
        };
        Polynomial { coeffs, ..self.zero.clone() }
    }

    pub fn project(&self, f: &GridFunction) -> Result<Polynomial> {
        f.grid().check_same(&self.weight.grid)?;
        Ok(self.project_with(|m| f.at(m)))
    }
}

/// The polynomial `P` of degree `<= d` with `sum (f - P) y^beta w h^n = 0`
/// for every `|beta| <= d`, where `w` is the weight on its window.
///
/// The basis is centred at `center` and scaled by `scale`.
pub fn project_weighted(
    f: &GridFunction,
    weight: &LocalField,
    d: usize,
    center: [f64; 2],
    scale: f64,
    mode: Conditioning,
) -> Result<Projection> {
    f.grid().check_same(&weight.grid)?;
    let pr = Projector::new(weight.clone(), d, center, scale, mode)?;
    Ok(Projection { poly: pr.project_with(|m| f.at(m)), condition: pr.condition })
}

/// Largest `|sum (f - P) y^beta w| h^n` over `|beta| <= d`, in the
/// projection's own centred basis.
pub fn orthogonality_residual(f: &GridFunction, weight: &LocalField, p: &Polynomial) -> f64 {
    let grid = *f.grid();
    let idx = multi_indices(p.n, p.degree);
    let mut acc = vec![0.0; idx.len()];
    weight.for_each(|cell, w| {
        if w == 0.0 {
            return;
        }
        let y = p.local_coords(&grid, cell);
        let pv: f64 = idx.iter().zip(&p.coeffs).map(|(b, c)| c * monomial(y, *b)).sum();
        let r = (f.at(cell) - pv) * w;
        for (k, b) in idx.iter().enumerate() {
            acc[k] += r * monomial(y, *b);
        }
    });
    acc.iter().fold(0.0, |m, v| m.max(v.abs())) * grid.cell_measure()
}

/// Unweighted projection on the lattice cells centred in `cube`.
pub fn project_on_cube(g: &GridFunction, cube: &Cube, d: usize) -> Result<Projection> {
    let grid = *g.grid();
    let cells = cube.cells_centered(&grid);
    let needed = dim_polynomials(grid.dim(), d);
    let per_axis_ok = (0..grid.dim()).all(|ax| cells.extent(ax) > d);
    if cells.len() < needed || !per_axis_ok {
        return Err(Error::DegenerateCube { cells: cells.len(), needed });
    }
    let mut w = LocalField::zeros(grid, cells);
    w.values.iter_mut().for_each(|v| *v = 1.0);
    project_weighted(g, &w, d, cube.center, cube.side / 2.0, Conditioning::Strict)
}
