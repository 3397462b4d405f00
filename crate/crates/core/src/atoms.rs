//! Special local atoms, their validation, synthesis and coefficient norms.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exponent::{atom_moment_degree, ExponentField};
use crate::grid::{Cube, Grid, GridFunction, LocalField};
use crate::luxemburg;
use crate::poly::{monomial, multi_indices};

/// Threshold for normalised moment residuals.
pub const MOMENT_TOL: f64 = 1e-8;
/// Slack on the size condition for rounding in the normalisation.
pub const SIZE_TOL: f64 = 1e-12;

/// Samples supported in a cube, with size exponent `q` (possibly infinite)
/// and moment degree `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub cube: Cube,
    pub samples: LocalField,
    pub q: f64,
    pub d: usize,
}

impl Atom {
    pub fn grid(&self) -> &Grid {
        &self.samples.grid
    }

    pub fn lq_norm(&self) -> f64 {
        self.samples.lq_norm(self.q)
    }

    pub fn to_grid_function(&self) -> GridFunction {
        self.samples.to_grid_function()
    }

    pub fn scaled(&self, c: f64) -> Atom {
        let mut a = self.clone();
        a.samples.values.iter_mut().for_each(|v| *v *= c);
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomReport {
    /// Nonzero samples at lattice points outside the closed cube.
    pub support_violations: usize,
    /// `||a||_q / |Q|^{1/q}`.
    pub size_ratio: f64,
    /// `max_alpha |int a (x - c_Q)^alpha| / (||a||_q |Q|^{1/q'} l(Q)^{|alpha|})`
    /// over `|alpha| <= d`; only for `|Q| < 1`.
    pub moment_residual: Option<f64>,
    pub pass: bool,
}

/// Raw moments `int a (x - c)^alpha dx` over `|alpha| <= d`.
pub fn centered_moments(samples: &LocalField, center: [f64; 2], d: usize) -> Vec<f64> {
    let g = samples.grid;
    let idx = multi_indices(g.dim(), d);
    let mut acc = alloc::vec![0.0; idx.len()];
    samples.for_each(|m, v| {
        if v == 0.0 {
            return;
        }
        let y = [g.coord(m[0]) - center[0], if g.dim() == 2 { g.coord(m[1]) - center[1] } else { 0.0 }];
        for (k, b) in idx.iter().enumerate() {
            acc[k] += v * monomial(y, *b);
        }
    });
    acc.iter().map(|v| v * g.cell_measure()).collect()
}

pub fn validate_atom(a: &Atom, p: &ExponentField) -> Result<AtomReport> {
    let required = atom_moment_degree(p);
    if a.d < required {
        return Err(Error::DegreeTooLow { degree: a.d, required });
    }
    a.grid().check_same(p.grid())?;
    Ok(check_atom(a))
}

/// The three defining conditions without the degree precondition.
pub fn check_atom(a: &Atom) -> AtomReport {
    let g = *a.grid();
    let n = g.dim();
    let mut violations = 0;
    a.samples.for_each(|m, v| {
        if v != 0.0 {
            let x = [g.coord(m[0]), if n == 2 { g.coord(m[1]) } else { 0.0 }];
            if !a.cube.contains_point(&x[..n]) {
                violations += 1;
            }
        }
    });
    let measure = a.cube.measure();
    let norm = a.lq_norm();
    let size_ratio = if a.q.is_infinite() { norm } else { norm / measure.powf(1.0 / a.q) };
    let moment_residual = if measure < 1.0 {
        if norm == 0.0 {
            Some(0.0)
        } else {
            let q_dual_inv = if a.q.is_infinite() { 1.0 } else { 1.0 - 1.0 / a.q };
            let base = norm * measure.powf(q_dual_inv);
            let moments = centered_moments(&a.samples, a.cube.center, a.d);
            let idx = multi_indices(n, a.d);
            let worst = moments
                .iter()
                .zip(&idx)
                .map(|(mo, b)| mo.abs() / (base * a.cube.side.powi((b[0] + b[1]) as i32)))
                .fold(0.0, f64::max);
            Some(worst)
        }
    } else {
        None
    };
    let pass = violations == 0
        && size_ratio <= 1.0 + SIZE_TOL
        && moment_residual.is_none_or(|r| r <= MOMENT_TOL);
    AtomReport { support_violations: violations, size_ratio, moment_residual, pass }
}

/// Where a decomposition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Manual,
    CalderonZygmund,
    Finite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicDecomposition {
    pub grid: Grid,
    pub atoms: Vec<Atom>,
    pub coefficients: Vec<f64>,
    pub provenance: Provenance,
}

impl AtomicDecomposition {
    pub fn new(grid: Grid, atoms: Vec<Atom>, coefficients: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if atoms.len() != coefficients.len() {
            return Err(Error::InvalidInput("atom and coefficient counts differ".into()));
        }
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInput("coefficients must be finite and nonnegative".into()));
        }
        for a in &atoms {
            a.grid().check_same(&grid)?;
        }
        Ok(AtomicDecomposition { grid, atoms, coefficients, provenance })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Whether `q` lies in the range admitted by the synthesis bound:
/// `p^+ < q <= inf` when `p^+ >= 1`, and `1 < q <= inf` otherwise.
pub fn q_in_synthesis_range(q: f64, p: &ExponentField) -> bool {
    if p.p_plus >= 1.0 {
        q > p.p_plus
    } else {
        q > 1.0
    }
}

/// `sum lambda_j a_j`, accumulated in order of decreasing coefficient.
pub fn synthesize(dec: &AtomicDecomposition) -> GridFunction {
    let mut order: Vec<usize> = (0..dec.len()).collect();
    order.sort_by(|&i, &j| dec.coefficients[j].total_cmp(&dec.coefficients[i]).then(i.cmp(&j)));
    let mut out = GridFunction::zeros(dec.grid);
    for i in order {
        dec.atoms[i].samples.add_into(&mut out, dec.coefficients[i]);
    }
    out
}

/// `(sum_j (lambda_j chi_{Q_j})^s)^{1/s}` with cubes snapped outward.
pub fn coefficient_function(dec: &AtomicDecomposition, s: f64) -> GridFunction {
    let g = dec.grid;
    let mut acc = GridFunction::zeros(g);
    let vals = acc.values_mut();
    for (a, lam) in dec.atoms.iter().zip(&dec.coefficients) {
        let ls = lam.powf(s);
        a.cube.cells_touching(&g).for_each(|m| vals[g.flat_index(m)] += ls);
    }
    acc.map(|v| v.powf(1.0 / s))
}

pub fn coefficient_norm(dec: &AtomicDecomposition, p: &ExponentField, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidInput("aggregation exponent must be positive".into()));
    }
    luxemburg::norm(&coefficient_function(dec, s), p)
}
