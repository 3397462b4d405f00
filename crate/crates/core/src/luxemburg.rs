//! The modular `int (|f|/lambda)^{p(x)} dx`, the Luxemburg norm and
//! executable forms of the classical inequalities in `L^{p(.)}`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exponent::{ExponentField, ExponentSpec};
use crate::grid::{Cube, GridFunction, IndexBox};

/// Default residual tolerance on `|modular - 1|`.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap of the bisection.
pub const MAX_ITERATIONS: usize = 200;
/// Above this exponent magnitude terms are summed in log space.
const LOG_SPACE_THRESHOLD: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modular {
    pub value: f64,
    /// The sum exceeded the floating point range and was clamped to `+inf`.
    pub overflow: bool,
}

/// Nonzero samples prepared as `(ln |f|, p)` pairs.
struct Terms {
    terms: Vec<(f64, f64)>,
    cell: f64,
    sup: f64,
}

impl Terms {
    fn new(f: &GridFunction, p: &ExponentField) -> Result<Terms> {
        f.grid().check_same(p.grid())?;
        if !f.is_finite() {
            return Err(Error::InvalidInput("non-finite samples".into()));
        }
        let terms: Vec<(f64, f64)> = f
            .values()
            .iter()
            .zip(p.values())
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, q)| (v.abs().ln(), *q))
            .collect();
        Ok(Terms { terms, cell: f.grid().cell_measure(), sup: f.max_abs() })
    }

    fn modular(&self, lambda: f64) -> Modular {
        let ll = lambda.ln();
        let mut max_log = f64::NEG_INFINITY;
        let mut direct = 0.0;
        for &(lf, q) in &self.terms {
            let e = q * (lf - ll);
            max_log = max_log.max(e);
            if max_log <= LOG_SPACE_THRESHOLD {
                direct += e.exp();
            }
        }
        if max_log <= LOG_SPACE_THRESHOLD {
            return Modular { value: direct * self.cell, overflow: false };
        }
        let s: f64 = self.terms.iter().map(|&(lf, q)| (q * (lf - ll) - max_log).exp()).sum();
        let log_total = max_log + s.ln() + self.cell.ln();
        if log_total > f64::MAX.ln() {
            Modular { value: f64::INFINITY, overflow: true }
        } else {
            Modular { value: log_total.exp(), overflow: false }
        }
    }
}

pub fn modular(f: &GridFunction, p: &ExponentField, lambda: f64) -> Result<Modular> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("lambda must be positive".into()));
    }
    Ok(Terms::new(f, p)?.modular(lambda))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormResult {
    pub value: f64,
    /// `|modular(f / value) - 1|`, zero for the zero function.
    pub residual: f64,
    pub iterations: usize,
    /// The iteration cap was hit before the tolerance was met.
    pub capped: bool,
}

/// `inf { lambda > 0 : modular(f, p, lambda) <= 1 }` by bisection in
/// `log lambda`.
pub fn luxemburg_norm(f: &GridFunction, p: &ExponentField, tol: f64) -> Result<NormResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let t = Terms::new(f, p)?;
    if t.terms.is_empty() {
        return Ok(NormResult { value: 0.0, residual: 0.0, iterations: 0, capped: false });
    }
    let g = f.grid();
    let mut lo = t.sup * g.cell_measure().powf(1.0 / p.p_minus);
    let mut hi = t.sup * (g.box_measure() + 1.0);
    while t.modular(lo).value < 1.0 {
        lo *= 0.5;
    }
    while t.modular(hi).value > 1.0 {
        hi *= 2.0;
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, hi);
    for it in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (llo + lhi);
        let lambda = mid.exp();
        let m = t.modular(lambda).value;
        let r = (m - 1.0).abs();
        if r < best.0 {
            best = (r, lambda);
        }
        if r <= tol {
            return Ok(NormResult { value: lambda, residual: r, iterations: it, capped: false });
        }
        if m > 1.0 {
            llo = mid;
        } else {
            lhi = mid;
        }
        if lhi - llo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(NormResult { value: best.1, residual: best.0, iterations: MAX_ITERATIONS, capped: true })
}

/// Norm value with the default tolerance.
pub fn norm(f: &GridFunction, p: &ExponentField) -> Result<f64> {
    luxemburg_norm(f, p, DEFAULT_TOL).map(|r| r.value)
}

/// Pointwise harmonic combination `1/p = 1/p1 + 1/p2`.
pub fn holder_exponent(p1: &ExponentField, p2: &ExponentField) -> Result<ExponentField> {
    p1.grid().check_same(p2.grid())?;
    let values = p1.values().iter().zip(p2.values()).map(|(a, b)| 1.0 / (1.0 / a + 1.0 / b)).collect();
    let p_inf = 1.0 / (1.0 / p1.p_infinity + 1.0 / p2.p_infinity);
    crate::exponent::build_exponent(&ExponentSpec::Samples { values, p_inf }, *p1.grid())
}

/// `(||f g||_{p}, ||f||_{p1} ||g||_{p2})` with `1/p = 1/p1 + 1/p2`.
pub fn holder_pairing(
    f: &GridFunction,
    g: &GridFunction,
    p1: &ExponentField,
    p2: &ExponentField,
) -> Result<(f64, f64)> {
    let p = holder_exponent(p1, p2)?;
    let fg = f.mul(g)?;
    Ok((norm(&fg, &p)?, norm(f, p1)? * norm(g, p2)?))
}

/// `(||f + g||^{p_-}, ||f||^{p_-} + ||g||^{p_-})` with `p_- = min(p^-, 1)`.
pub fn triangle_pairing(f: &GridFunction, g: &GridFunction, p: &ExponentField) -> Result<(f64, f64)> {
    let e = p.p_lower;
    let s = f.add(g)?;
    Ok((norm(&s, p)?.powf(e), norm(f, p)?.powf(e) + norm(g, p)?.powf(e)))
}

/// Indicator of a block of lattice cells.
pub fn indicator(grid: &crate::grid::Grid, cells: &IndexBox) -> GridFunction {
    let mut out = GridFunction::zeros(*grid);
    let vals = out.values_mut();
    cells.for_each(|m| vals[grid.flat_index(m)] = 1.0);
    out
}

/// `||chi_Q||` with `Q` snapped outward to lattice cells, together with the
/// measure of the snapped cube.
pub fn chi_norm(cube: &Cube, p: &ExponentField) -> Result<(f64, f64)> {
    let g = p.grid();
    let cells = cube.cells_touching(g);
    let measure = cells.len() as f64 * g.cell_measure();
    Ok((norm(&indicator(g, &cells), p)?, measure))
}

/// `||chi_B||` for a block of lattice cells, solved to near machine precision.
///
/// The modular `sum_i h^n lambda^{-p_i}` equals one somewhere between the
/// smallest and largest `m^{1/p_i}`, `m` the block measure.
pub fn chi_norm_cells(p: &ExponentField, cells: &IndexBox) -> f64 {
    let g = p.grid();
    let cell = g.cell_measure();
    let m = cells.len() as f64 * cell;
    if cells.is_empty() {
        return 0.0;
    }
    let mut exps = Vec::with_capacity(cells.len());
    cells.for_each(|c| exps.push(p.values()[g.flat_index(c)]));
    let (lo_p, hi_p) = exps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    if lo_p == hi_p {
        return m.powf(1.0 / lo_p);
    }
    let ln_m = m.ln();
    let (mut a, mut b) = ((ln_m / lo_p).min(ln_m / hi_p), (ln_m / lo_p).max(ln_m / hi_p));
    let modular = |t: f64| exps.iter().map(|q| (-q * t).exp()).sum::<f64>() * cell;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if modular(mid) > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    (0.5 * (a + b)).exp()
}

/// `||chi_Q|| / |Q|^{1/p(x_Q)}`, the small-cube asymptotic ratio.
pub fn chi_ratio_small(cube: &Cube, p: &ExponentField) -> Result<f64> {
    let (v, m) = chi_norm(cube, p)?;
    let px = p.at_point(&cube.center[..cube.n]);
    Ok(v / m.powf(1.0 / px))
}

/// `||chi_Q|| / |Q|^{1/p_inf}`, the large-cube asymptotic ratio.
pub fn chi_ratio_large(cube: &Cube, p: &ExponentField) -> Result<f64> {
    let (v, m) = chi_norm(cube, p)?;
    Ok(v / m.powf(1.0 / p.p_infinity))
}

/// Both sides of the Grafakos–Kalton inequality for cubes `Q_j` and
/// nonnegative `F_j`, with averaging exponent `q` (constant) and norm
/// exponent `p`: returns `(||sum chi_Qj F_j||, ||sum (avg_Qj F_j^q)^{1/q} chi_Qj||)`.
pub fn grafakos_kalton_pairing(
    cubes: &[Cube],
    fs: &[GridFunction],
    q: f64,
    p: &ExponentField,
) -> Result<(f64, f64)> {
    let g = *p.grid();
    let mut lhs = GridFunction::zeros(g);
    let mut rhs = GridFunction::zeros(g);
    for (cube, f) in cubes.iter().zip(fs) {
        f.grid().check_same(&g)?;
        let cells = cube.cells_touching(&g);
        if cells.is_empty() {
            continue;
        }
        let mut acc = 0.0;
        cells.for_each(|m| acc += f.at(m).abs().powf(q));
        let avg = (acc / cells.len() as f64).powf(1.0 / q);
        let lvals = lhs.values_mut();
        cells.for_each(|m| lvals[g.flat_index(m)] += f.at(m).abs());
        let rvals = rhs.values_mut();
        cells.for_each(|m| rvals[g.flat_index(m)] += avg);
    }
    Ok((norm(&lhs, p)?, norm(&rhs, p)?))
}
