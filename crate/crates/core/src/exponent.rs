//! Variable exponents `p(.)`, their summary statistics and log-Hölder
//! diagnostics.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stats;

/// Closed-form or sampled description of an exponent.
#[derive(Clone, Debug, PartialEq)]
pub enum ExponentSpec {
    Constant(f64),
    /// `p_inf + c / log(e + |x|)`.
    LogFamily { p_inf: f64, c: f64 },
    /// `base + amplitude * exp(1 - 1/(1 - |x - center|^2 / radius^2))`
    /// inside the ball, `base` outside. The peak value is `base + amplitude`.
    Bump { base: f64, amplitude: f64, center: [f64; 2], radius: f64 },
    /// Raw lattice samples with a declared limit at infinity.
    Samples { values: Vec<f64>, p_inf: f64 },
}

impl ExponentSpec {
    /// Closed-form value at a point, `None` for sampled exponents.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match *self {
            ExponentSpec::Constant(p) => Some(p),
            ExponentSpec::LogFamily { p_inf, c } => Some(p_inf + c / (core::f64::consts::E + r).ln()),
            ExponentSpec::Bump { base, amplitude, center, radius } => {
                let d2: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / (radius * radius);
                Some(if d2 < 1.0 { base + amplitude * (1.0 - 1.0 / (1.0 - d2)).exp() } else { base })
            }
            ExponentSpec::Samples { .. } => None,
        }
    }

    pub fn p_infinity(&self) -> f64 {
        match *self {
            ExponentSpec::Constant(p) => p,
            ExponentSpec::LogFamily { p_inf, .. } => p_inf,
            ExponentSpec::Bump { base, .. } => base,
            ExponentSpec::Samples { p_inf, .. } => p_inf,
        }
    }
}

/// Sampled exponent with its summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    values: Vec<f64>,
    spec: ExponentSpec,
    pub p_minus: f64,
    pub p_plus: f64,
    pub p_infinity: f64,
    /// `min(p_minus, 1)`.
    pub p_lower: f64,
    /// Boundary samples of a log-family exponent differ from `p_infinity` by
    /// more than `1e-2`.
    pub p_infinity_inconsistent: bool,
}

/// Tolerance of the boundary-versus-limit consistency check.
pub const P_INFINITY_CHECK: f64 = 1e-2;

pub fn build_exponent(spec: &ExponentSpec, grid: Grid) -> Result<ExponentField> {
    let values: Vec<f64> = match spec {
        ExponentSpec::Samples { values, .. } => {
            if values.len() != grid.len() {
                return Err(Error::InvalidInput(alloc::format!(
                    "exponent has {} samples, grid has {}",
                    values.len(),
                    grid.len()
                )));
            }
            values.clone()
        }
        _ => (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                spec.eval(&p[..grid.dim()]).expect("closed form")
            })
            .collect(),
    };
    from_samples(grid, values, spec.clone())
}

fn from_samples(grid: Grid, values: Vec<f64>, spec: ExponentSpec) -> Result<ExponentField> {
    for (index, &value) in values.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidExponent { index, value });
        }
    }
    let p_inf = spec.p_infinity();
    if !(p_inf.is_finite() && p_inf > 0.0) {
        return Err(Error::InvalidExponent { index: usize::MAX, value: p_inf });
    }
    let p_minus = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_plus = values.iter().cloned().fold(0.0, f64::max);
    let mut inconsistent = false;
    if let ExponentSpec::LogFamily { .. } = spec {
        let side = grid.side();
        let boundary_dev = (0..grid.len())
            .filter(|&i| {
                let m = grid.multi_index(i);
                (0..grid.dim()).any(|d| m[d] == 0 || m[d] + 1 == side)
            })
            .map(|i| (values[i] - p_inf).abs())
            .fold(0.0, f64::max);
        inconsistent = boundary_dev > P_INFINITY_CHECK;
    }
    Ok(ExponentField {
        grid,
        values,
        spec,
        p_minus,
        p_plus,
        p_infinity: p_inf,
        p_lower: p_minus.min(1.0),
        p_infinity_inconsistent: inconsistent,
    })
}

impl ExponentField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> &ExponentSpec {
        &self.spec
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// Exponent at an arbitrary point: the closed form when available, else
    /// the sample of the containing cell (clamped to the box).
    pub fn at_point(&self, x: &[f64]) -> f64 {
        if let Some(v) = self.spec.eval(x) {
            return v;
        }
        let g = &self.grid;
        let mut m = [0usize; 2];
        for d in 0..g.dim() {
            let k = ((x[d] + g.half_width()) / g.spacing()).floor();
            m[d] = k.max(0.0).min((g.side() - 1) as f64) as usize;
        }
        self.values[g.flat_index(m)]
    }

    /// The same exponent on another lattice; sampled exponents can only be
    /// re-used on their own grid.
    pub fn on_grid(&self, grid: Grid) -> Result<ExponentField> {
        if grid == self.grid {
            return Ok(self.clone());
        }
        match self.spec {
            ExponentSpec::Samples { .. } => {
                Err(Error::InvalidInput("sampled exponents cannot be resampled".into()))
            }
            _ => build_exponent(&self.spec, grid),
        }
    }

    fn derived(&self, values: Vec<f64>, p_inf: f64) -> Result<ExponentField> {
        let spec = ExponentSpec::Samples { values: values.clone(), p_inf };
        from_samples(self.grid, values, spec)
    }
}

pub fn conjugate(p: &ExponentField) -> Result<ExponentField> {
    if !(p.p_minus > 1.0) {
        return Err(Error::ConjugateUndefined { p_minus: p.p_minus });
    }
    let conj = |v: f64| v / (v - 1.0);
    if let ExponentSpec::Constant(c) = p.spec {
        return build_exponent(&ExponentSpec::Constant(conj(c)), p.grid);
    }
    let values = p.values.iter().map(|v| conj(*v)).collect();
    p.derived(values, conj(p.p_infinity.max(p.p_minus)))
}

/// `1/q = 1/p - alpha/n`.
pub fn sobolev_shift(p: &ExponentField, alpha: f64) -> Result<ExponentField> {
    let n = p.grid.dim() as f64;
    if !(alpha > 0.0 && alpha < n) || alpha / n >= 1.0 / p.p_plus {
        return Err(Error::ShiftUndefined { alpha, p_plus: p.p_plus });
    }
    let shift = |v: f64| 1.0 / (1.0 / v - alpha / n);
    if let ExponentSpec::Constant(c) = p.spec {
        return build_exponent(&ExponentSpec::Constant(shift(c)), p.grid);
    }
    let values = p.values.iter().map(|v| shift(*v)).collect();
    let inf = if 1.0 / p.p_infinity > alpha / n { shift(p.p_infinity) } else { p.p_plus };
    p.derived(values, inf)
}

/// Smallest `d >= 0` with `p_minus (n + d + 1) > n`.
pub fn moment_degree(p_minus: f64, n: usize) -> usize {
    let n = n as f64;
    let mut d = 0usize;
    while p_minus * (n + d as f64 + 1.0) <= n {
        d += 1;
    }
    d
}

pub fn atom_moment_degree(p: &ExponentField) -> usize {
    moment_degree(p.p_minus, p.grid.dim())
}

/// Worst pair found for one log-Hölder clause.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LHReport {
    /// `sup |p(x) - p(y)| * (-log |x - y|)` over tested pairs with
    /// `0 < |x - y| <= 1/2`.
    pub c_local: f64,
    /// `sup |p(x) - p(y)| * log(e + |x|)` over tested pairs with `|y| >= |x|`.
    pub c_decay: f64,
    pub local_witness: Option<Witness>,
    pub decay_witness: Option<Witness>,
    pub pairs_tested: usize,
    /// Local constant restricted to lattice offsets of `2^k` cells, finest
    /// first, as `(distance, constant)`.
    pub bands: Vec<(f64, f64)>,
    /// The local constant keeps growing over the finest bands, the signature
    /// of a discontinuous exponent.
    pub diverging: bool,
}

/// Estimates both log-Hölder constants from all nearest-neighbour and
/// dyadic-offset lattice pairs plus `pair_budget` seeded random pairs.
pub fn log_holder_constants(p: &ExponentField, pair_budget: usize, seed: u64) -> LHReport {
    let g = p.grid;
    let h = g.spacing();
    let n = g.dim();
    let side = g.side();
    let mut rep = LHReport {
        c_local: 0.0,
        c_decay: 0.0,
        local_witness: None,
        decay_witness: None,
        pairs_tested: 0,
        bands: Vec::new(),
        diverging: false,
    };

    let consider = |rep: &mut LHReport, i: usize, j: usize| -> f64 {
        let x = g.point(i);
        let y = g.point(j);
        let dist = norm(&sub(x, y)[..n]);
        let diff = (p.values[i] - p.values[j]).abs();
        rep.pairs_tested += 1;
        let mut local = 0.0;
        if dist > 0.0 && dist <= 0.5 {
            local = diff * -dist.ln();
            if local > rep.c_local {
                rep.c_local = local;
                rep.local_witness = Some(Witness { x, y, value: local });
            }
        }
        let (nx, ny) = (norm(&x[..n]), norm(&y[..n]));
        let (a, b) = if nx <= ny { (x, y) } else { (y, x) };
        let decay = diff * (core::f64::consts::E + nx.min(ny)).ln();
        if decay > rep.c_decay {
            rep.c_decay = decay;
            rep.decay_witness = Some(Witness { x: a, y: b, value: decay });
        }
        local
    };

    let mut offset = 1usize;
    while (offset as f64) * h <= 0.5 && offset < side {
        let mut band = 0.0f64;
        for i in 0..g.len() {
            let m = g.multi_index(i);
            for axis in 0..n {
                if m[axis] + offset < side {
                    let mut m2 = m;
                    m2[axis] += offset;
                    band = band.max(consider(&mut rep, i, g.flat_index(m2)));
                }
            }
        }
        rep.bands.push((offset as f64 * h, band));
        offset *= 2;
    }

    let mut rng = stats::rng(seed);
    let reach = ((0.5 / h).floor() as usize).max(1);
    for t in 0..pair_budget {
        let i = rng.gen_range(0..g.len());
        let j = if t % 2 == 0 {
            // a nearby pair for the local clause
            let m = g.multi_index(i);
            let mut m2 = m;
            for axis in 0..n {
                let delta = rng.gen_range(0..=reach) as i64 * if rng.gen::<bool>() { 1 } else { -1 };
                m2[axis] = (m[axis] as i64 + delta).clamp(0, side as i64 - 1) as usize;
            }
            g.flat_index(m2)
        } else {
            rng.gen_range(0..g.len())
        };
        if i != j {
            consider(&mut rep, i, j);
        }
    }

    let k = rep.bands.len();
    if k >= 3 {
        let b = &rep.bands;
        rep.diverging = b[1].1 > 1.01 * b[2].1 && b[0].1 > 1.01 * b[1].1 && b[0].1 > 0.0;
    }
    rep
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}
