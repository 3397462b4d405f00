//! Inhomogeneous Calderón–Zygmund kernels, the local fractional integral and
//! ratio experiments for operator boundedness.
//!
//! Operators act on lattice samples by cell quadrature: the value at a cell
//! centre is `sum_y K(x, y) f(y) h^n` over the other cells. The diagonal cell
//! is dropped, and for odd convolution kernels the offsets `m` and `-m` are
//! combined before summation so the leading singular parts cancel exactly.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;

use crate::atoms::Atom;
use crate::duals::{bmo_norm, CubeTable};
use crate::error::{Error, Result};
use crate::exponent::{sobolev_shift, ExponentField};
use crate::grid::{convolve_direct, Convolver, Cube, Grid, GridFunction, OffsetKernel};
use crate::littlewood_paley::{hp_norm, FilterBank};
use crate::luxemburg;
use crate::profile::{bump_mass, Plateau, Profile};
use crate::stats;

/// Members of the kernel library.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// `phi_0(z) z_1 / |z|^{n+1}` with `z = x - y` and the standard cut-off
    /// `phi_0`: a truncated Hilbert (n = 1) or first Riesz (n = 2) kernel.
    LocalizedHilbert,
    /// `sum_{k >= 0} (-1)^k (beta_{2^-k} - beta_{2^-k-1})(x - y)` with
    /// `beta_t(z) = t^{-n} beta(z / t)` and `beta` the unit-radius bump.
    DifferenceOfBumps,
    /// `K = c` everywhere; violates the decay clause.
    Constant(f64),
    /// `b(x) K_0(x - y)` with `K_0` the localized Hilbert kernel and `b` the
    /// lacunary coefficient of [`coefficient`]; not of convolution type and
    /// `T^*(1) != 0`.
    VariableCoefficient,
    /// `psi(x - y) (b(x) - b(y))` with `psi` the unit-mass bump of radius one:
    /// the commutator `[b, psi *]`, bounded but with `T^*(1) = b * psi - b`.
    Commutator,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub n: usize,
    pub kind: KernelKind,
    pub delta: f64,
    pub epsilon: f64,
    /// Subtract a unit-scale bump from `T(a)` so that small-cube atoms have
    /// images with vanishing integral.
    pub moment_corrected: bool,
}

fn plateau_factor(n: usize, z: &[f64]) -> f64 {
    Plateau::standard(n).eval(z)
}

fn unit_bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}

impl KernelSpec {
    /// Library kernel with declared `delta = 1`, `epsilon = 1/2`.
    pub fn library(n: usize, kind: KernelKind) -> Self {
        KernelSpec { n, kind, delta: 1.0, epsilon: 0.5, moment_corrected: false }
    }

    pub fn corrected(mut self, on: bool) -> Self {
        self.moment_corrected = on;
        self
    }

    pub fn is_convolution(&self) -> bool {
        !matches!(self.kind, KernelKind::VariableCoefficient | KernelKind::Commutator)
    }

    pub fn is_odd(&self) -> bool {
        matches!(self.kind, KernelKind::LocalizedHilbert)
    }

    /// Half-width of the cube outside which `K(x, x + z)` vanishes in `z`.
    pub fn reach(&self) -> f64 {
        match self.kind {
            KernelKind::Constant(_) => f64::INFINITY,
            KernelKind::DifferenceOfBumps | KernelKind::Commutator => 1.0,
            KernelKind::LocalizedHilbert | KernelKind::VariableCoefficient => Plateau::standard(self.n).outer,
        }
    }

    /// Convolution profile `K_0(z)` for `z != 0`.
    fn profile(&self, z: &[f64]) -> f64 {
        let n = self.n;
        let r2: f64 = z[..n].iter().map(|v| v * v).sum();
        match self.kind {
            KernelKind::Constant(c) => c,
            KernelKind::LocalizedHilbert | KernelKind::VariableCoefficient => {
                plateau_factor(n, z) * z[0] / r2.sqrt().powi(n as i32 + 1)
            }
            KernelKind::Commutator => unit_bump(r2) / bump_mass(n),
            KernelKind::DifferenceOfBumps => {
                let mut acc = 0.0;
                let mut t = 1.0f64;
                let mut sign = 1.0;
                for _ in 0..64 {
                    if r2 >= t * t {
                        break;
                    }
                    let s = t / 2.0;
                    let a = unit_bump(r2 / (t * t)) / t.powi(n as i32);
                    let b = unit_bump(r2 / (s * s)) / s.powi(n as i32);
                    acc += sign * (a - b);
                    sign = -sign;
                    t = s;
                }
                acc
            }
        }
    }

    /// `K(x, y)` for `x != y`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let z = [x[0] - y[0], if n == 2 { x[1] - y[1] } else { 0.0 }];
        let k0 = self.profile(&z);
        match self.kind {
            KernelKind::VariableCoefficient => coefficient(x) * k0,
            KernelKind::Commutator => k0 * (coefficient(x) - coefficient(y)),
            _ => k0,
        }
    }

    /// Both sides of the smoothness clause at one triple:
    /// `(|K(x,y) - K(x,y')| + |K(y,x) - K(y',x)|, |y-y'|^eps / |x-y|^{n+eps})`.
    pub fn smoothness_terms(&self, x: &[f64], y: &[f64], y2: &[f64]) -> (f64, f64) {
        let lhs = (self.eval(x, y) - self.eval(x, y2)).abs() + (self.eval(y, x) - self.eval(y2, x)).abs();
        let r = dist(x, y, self.n);
        let s = dist(y, y2, self.n);
        (lhs, s.powf(self.epsilon) / r.powf(self.n as f64 + self.epsilon))
    }

    /// `min(|z|^{-n}, |z|^{-n-delta})`.
    pub fn size_envelope(&self, r: f64) -> f64 {
        let n = self.n as f64;
        r.powf(-n).min(r.powf(-n - self.delta))
    }
}

/// Number of octaves in the variable coefficient.
pub const COEFFICIENT_OCTAVES: i32 = 6;

/// `b(x) = 1 + 0.3 sum_{k<6} 2^{-k/2} sin(2^k pi x_1 + k)`, Hölder of
/// order 1/2 uniformly in the octave count and bounded in `[0.1, 1.9]`.
pub fn coefficient(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..COEFFICIENT_OCTAVES {
        let f = 2f64.powi(k);
        acc += (2f64.powf(-0.5 * k as f64)) * (f * PI * x[0] + k as f64).sin();
    }
    1.0 + 0.3 * acc
}

fn dist(a: &[f64], b: &[f64], n: usize) -> f64 {
    (0..n).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

/// Separations probed by the condition checker: `[NEAR_MIN, NEAR_MAX]` and
/// the far range `[NEAR_MIN, FAR_MAX]`.
pub const NEAR_MIN: f64 = 1.0 / 1024.0;
pub const NEAR_MAX: f64 = 4.0;
pub const FAR_MAX: f64 = 1024.0;
/// A clause passes when widening the range grows its constant by at most
/// this factor.
pub const STABILITY_FACTOR: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelReport {
    pub size_near: f64,
    pub size_far: f64,
    pub smooth_near: f64,
    pub smooth_far: f64,
    pub size_ok: bool,
    pub smooth_ok: bool,
    pub pass: bool,
    pub samples: usize,
}

fn random_direction(rng: &mut impl Rng, n: usize) -> [f64; 2] {
    if n == 1 {
        [if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 0.0]
    } else {
        let t = rng.gen_range(0.0..2.0 * PI);
        [t.cos(), t.sin()]
    }
}

fn sample_constants(k: &KernelSpec, budget: usize, r_max: f64, seed: u64) -> (f64, f64) {
    let mut rng = stats::rng(seed);
    let n = k.n;
    let (lo, hi) = (NEAR_MIN.ln(), r_max.ln());
    let mut size = 0.0f64;
    let mut smooth = 0.0f64;
    for _ in 0..budget {
        let x = [rng.gen_range(-1.0..1.0), if n == 2 { rng.gen_range(-1.0..1.0) } else { 0.0 }];
        let r = rng.gen_range(lo..hi).exp();
        let u = random_direction(&mut rng, n);
        let y = [x[0] - r * u[0], x[1] - r * u[1]];
        let v = k.eval(&x, &y).abs() / k.size_envelope(r);
        size = size.max(v);
        let s = 0.5 * r * rng.gen_range(1e-3..1.0f64);
        let w = random_direction(&mut rng, n);
        let y2 = [y[0] + s * w[0], y[1] + s * w[1]];
        let (lhs, rhs) = k.smoothness_terms(&x, &y, &y2);
        smooth = smooth.max(lhs / rhs);
    }
    (size, smooth)
}

/// Empirical constants of the size and smoothness clauses over seeded
/// off-diagonal samples, on a near range and a far range of separations.
pub fn check_kernel(k: &KernelSpec, budget: usize, seed: u64) -> KernelReport {
    let budget = budget.max(1);
    let (size_near, smooth_near) = sample_constants(k, budget, NEAR_MAX, seed);
    let (size_far, smooth_far) = sample_constants(k, budget, FAR_MAX, seed);
    let stable = |a: f64, b: f64| a.is_finite() && b.is_finite() && b <= STABILITY_FACTOR * a + f64::MIN_POSITIVE;
    let size_ok = stable(size_near, size_far);
    let smooth_ok = stable(smooth_near, smooth_far);
    KernelReport {
        size_near,
        size_far,
        smooth_near,
        smooth_far,
        size_ok,
        smooth_ok,
        pass: size_ok && smooth_ok && k.delta > 0.0 && k.epsilon > 0.0 && k.epsilon < 1.0,
        samples: budget,
    }
}

/// Offset weights `K_0(m h) h^n` for a convolution kernel, zero at `m = 0`.
fn convolution_weights(k: &KernelSpec, grid: &Grid) -> Result<OffsetKernel> {
    let n = grid.dim();
    let h = grid.spacing();
    let radius = if k.reach().is_finite() {
        ((k.reach() / h).ceil() as usize).min(grid.side())
    } else {
        grid.side()
    };
    let width = 2 * radius + 1;
    let mut weights = vec![0.0; width.pow(n as u32)];
    let limit = h.powi(-2 * n as i32);
    for (idx, w) in weights.iter_mut().enumerate() {
        let (i, j) = if n == 1 { (idx, radius) } else { (idx / width, idx % width) };
        if i == radius && j == radius {
            continue;
        }
        let z = [(i as f64 - radius as f64) * h, (j as f64 - radius as f64) * h];
        let v = k.profile(&z);
        if v.abs() > limit {
            return Err(Error::Resolution(alloc::format!("|K| = {v:.3e} exceeds h^(-2n) = {limit:.3e}")));
        }
        *w = v * grid.cell_measure();
    }
    Ok(OffsetKernel { n, radius, weights })
}

/// Weights `psi(m h) h^n` of the commutator's bump, diagonal included
/// (the commutator kernel vanishes there).
fn smooth_weights(k: &KernelSpec, grid: &Grid) -> OffsetKernel {
    let n = grid.dim();
    let h = grid.spacing();
    let radius = ((k.reach() / h).ceil() as usize).min(grid.side());
    let width = 2 * radius + 1;
    let mut weights = vec![0.0; width.pow(n as u32)];
    for (idx, w) in weights.iter_mut().enumerate() {
        let (i, j) = if n == 1 { (idx, radius) } else { (idx / width, idx % width) };
        let z = [(i as f64 - radius as f64) * h, (j as f64 - radius as f64) * h];
        *w = k.profile(&z) * grid.cell_measure();
    }
    OffsetKernel { n, radius, weights }
}

fn check_kernel_grid(k: &KernelSpec, f: &GridFunction) -> Result<()> {
    if k.n != f.grid().dim() {
        return Err(Error::InvalidInput("kernel and grid dimensions differ".into()));
    }
    Ok(())
}

/// Odd-kernel quadrature: `sum_{m > 0} w_m (f(x - m) - f(x + m))`.
fn odd_quadrature(f: &GridFunction, w: &OffsetKernel) -> GridFunction {
    let g = *f.grid();
    let side = g.side() as i64;
    let r = w.radius as i64;
    let at = |p: [i64; 2]| -> f64 {
        if p[0] < 0 || p[0] >= side || (g.dim() == 2 && (p[1] < 0 || p[1] >= side)) {
            0.0
        } else {
            f.at([p[0] as usize, p[1] as usize])
        }
    };
    let mut out = GridFunction::zeros(g);
    let vals = out.values_mut();
    g.full_box().for_each(|x| {
        let xi = [x[0] as i64, x[1] as i64];
        let mut acc = 0.0;
        if g.dim() == 1 {
            for a in 1..=r {
                acc += w.weight([a, 0]) * (at([xi[0] - a, 0]) - at([xi[0] + a, 0]));
            }
        } else {
            for a in 0..=r {
                let b_lo = if a == 0 { 1 } else { -r };
                for b in b_lo..=r {
                    let wt = w.weight([a, b]);
                    if wt != 0.0 {
                        acc += wt * (at([xi[0] - a, xi[1] - b]) - at([xi[0] + a, xi[1] + b]));
                    }
                }
            }
        }
        vals[g.flat_index(x)] = acc;
    });
    out
}

/// `T f` by cell quadrature with the diagonal cell excluded.
pub fn apply_operator(k: &KernelSpec, f: &GridFunction) -> Result<GridFunction> {
    check_kernel_grid(k, f)?;
    let g = *f.grid();
    if k.is_convolution() {
        let w = convolution_weights(k, &g)?;
        return Ok(if k.is_odd() { odd_quadrature(f, &w) } else { convolve_direct(f, &w) });
    }
    let b = GridFunction::from_fn(g, coefficient);
    match k.kind {
        KernelKind::Commutator => {
            let w = smooth_weights(k, &g);
            let bf = b.mul(f)?;
            Ok(b.mul(&convolve_direct(f, &w))?.sub(&convolve_direct(&bf, &w))?)
        }
        _ => {
            let base = KernelSpec { kind: KernelKind::LocalizedHilbert, ..*k };
            let w = convolution_weights(&base, &g)?;
            Ok(b.mul(&odd_quadrature(f, &w))?)
        }
    }
}

/// The same discrete operator evaluated through zero-padded FFT
/// convolution; only defined for convolution kernels.
pub fn apply_operator_fft(k: &KernelSpec, f: &GridFunction) -> Result<GridFunction> {
    check_kernel_grid(k, f)?;
    if !k.is_convolution() {
        return Err(Error::InvalidInput("FFT path needs a convolution kernel".into()));
    }
    let w = convolution_weights(k, f.grid())?;
    Ok(Convolver::new(f).apply(&w))
}

/// Unit-mass bump of radius one centred at `c`, normalised on the lattice.
pub fn correction_bump(grid: &Grid, c: [f64; 2]) -> GridFunction {
    let n = grid.dim();
    let b = GridFunction::from_fn(*grid, |x| {
        let r2: f64 = (0..n).map(|d| (x[d] - c[d]).powi(2)).sum();
        unit_bump(r2)
    });
    let mass = b.integrate();
    if mass > 0.0 {
        b.scaled(1.0 / mass)
    } else {
        b
    }
}

/// `T a`, minus `(int T a)` times the correction bump at `c_Q` when the
/// kernel is moment corrected and `|Q| < 1`.
pub fn apply_to_atom(k: &KernelSpec, a: &Atom) -> Result<GridFunction> {
    let ta = apply_operator(k, &a.to_grid_function())?;
    if k.moment_corrected && a.cube.measure() < 1.0 {
        let i = ta.integrate();
        let mut out = ta;
        out.axpy(-i, &correction_bump(a.grid(), a.cube.center))?;
        Ok(out)
    } else {
        Ok(ta)
    }
}

/// Nodes and weights of 5-point Gauss–Legendre quadrature on `[-1, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let step = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for i in 0..pieces {
        let mid = a + (i as f64 + 0.5) * step;
        for (t, w) in GL5 {
            acc += w * f(mid + 0.5 * step * t);
        }
    }
    0.5 * step * acc
}

/// `int_a^b |y|^{alpha-1} dy`.
fn power_integral_1d(a: f64, b: f64, alpha: f64) -> f64 {
    let prim = |y: f64| y.signum() * y.abs().powf(alpha) / alpha;
    prim(b) - prim(a)
}

/// `int_{[-h/2, h/2]^2} |y|^{alpha-2} dy` in polar coordinates.
fn centre_cell_integral_2d(h: f64, alpha: f64) -> f64 {
    let angular = gauss(0.0, PI / 4.0, 8, |t| (2.0 * t.cos()).powf(-alpha));
    8.0 / alpha * angular * h.powf(alpha)
}

/// Cell weights `int_cell phi_0(y) |y|^{alpha-n} dy` on lattice offsets.
fn fractional_weights(grid: &Grid, alpha: f64) -> OffsetKernel {
    let n = grid.dim();
    let h = grid.spacing();
    let phi = Plateau::standard(n);
    let radius = ((phi.outer / h).ceil() as usize).min(grid.side());
    let width = 2 * radius + 1;
    let mut weights = vec![0.0; width.pow(n as u32)];
    for (idx, w) in weights.iter_mut().enumerate() {
        let (i, j) = if n == 1 { (idx, radius) } else { (idx / width, idx % width) };
        let c = [(i as f64 - radius as f64) * h, (j as f64 - radius as f64) * h];
        *w = if n == 1 {
            let (a, b) = (c[0] - h / 2.0, c[0] + h / 2.0);
            if b.abs().max(a.abs()) <= phi.inner {
                power_integral_1d(a, b, alpha)
            } else if a.abs().min(b.abs()) >= phi.outer {
                0.0
            } else {
                gauss(a, b, 4, |y| phi.factor(y) * y.abs().powf(alpha - 1.0))
            }
        } else if i == radius && j == radius {
            centre_cell_integral_2d(h, alpha)
        } else {
            let near = (i as i64 - radius as i64).abs().max((j as i64 - radius as i64).abs()) <= 2;
            let pieces = if near { 8 } else { 1 };
            gauss(c[0] - h / 2.0, c[0] + h / 2.0, pieces, |y0| {
                gauss(c[1] - h / 2.0, c[1] + h / 2.0, pieces, |y1| {
                    let y = [y0, y1];
                    phi.eval(&y) * (y0 * y0 + y1 * y1).sqrt().powf(alpha - 2.0)
                })
            })
        };
    }
    OffsetKernel { n, radius, weights }
}

/// `I_alpha^loc f(x) = int phi_0(y) |y|^{alpha-n} f(x - y) dy` with `f`
/// taken piecewise constant on cells and each cell weight integrated
/// accurately (exactly for the singular cell when `n = 1`).
pub fn local_fractional(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let n = f.grid().dim() as f64;
    if !(alpha > 0.0 && alpha < n) {
        return Err(Error::InvalidInput(alloc::format!("alpha = {alpha} must lie in (0, n)")));
    }
    Ok(convolve_direct(f, &fractional_weights(f.grid(), alpha)))
}

/// Operators available to the experiment harness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorHandle {
    Kernel(KernelSpec),
    Fractional { alpha: f64 },
}

/// Norms used on either side of a ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Space {
    Lp,
    Hp,
    Bmo { q: f64, d: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentInput {
    Function(GridFunction),
    Atom(Atom),
}

impl ExperimentInput {
    fn small_cube(&self) -> bool {
        matches!(self, ExperimentInput::Atom(a) if a.cube.measure() < 1.0)
    }

    fn function(&self) -> GridFunction {
        match self {
            ExperimentInput::Function(f) => f.clone(),
            ExperimentInput::Atom(a) => a.to_grid_function(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// `||op f||_out / ||f||_in` per member, `None` for skipped members.
    pub ratios: Vec<Option<f64>>,
    pub max: f64,
    pub median: f64,
    /// Largest ratio over atoms on cubes with `|Q| < 1`.
    pub small_cube_max: Option<f64>,
    pub skipped: usize,
    /// Relative change of `max` against a coarser run, when supplied.
    pub refinement_delta: Option<f64>,
}

/// Rejects Calderón–Zygmund experiments outside
/// `max(n/(n+eps), n/(n+delta)) < p^-`.
pub fn check_triple(k: &KernelSpec, p: &ExponentField) -> Result<()> {
    let n = k.n as f64;
    let floor = (n / (n + k.epsilon)).max(n / (n + k.delta));
    if !(p.p_minus > floor) || !(k.epsilon > 0.0 && k.epsilon < 1.0 && k.delta > 0.0) {
        return Err(Error::Regime(alloc::format!(
            "need max(n/(n+eps), n/(n+delta)) = {floor:.4} < p_minus = {} with 0 < eps < 1, delta > 0",
            p.p_minus
        )));
    }
    Ok(())
}

/// Target space of `I_alpha^loc` on `h^{p(.)}` with `1/q = 1/p - alpha/n`:
/// `L^{q(.)}` when `q^- > 1`, `h^{q(.)}` when `q^+ <= 1`.
pub fn fractional_target(p_in: &ExponentField, alpha: f64) -> Result<(ExponentField, Space)> {
    let q = sobolev_shift(p_in, alpha)?;
    let space = if q.p_minus > 1.0 {
        Space::Lp
    } else if q.p_plus <= 1.0 {
        Space::Hp
    } else {
        return Err(Error::Regime(alloc::format!(
            "shifted exponent straddles 1 (q_minus = {}, q_plus = {})",
            q.p_minus, q.p_plus
        )));
    };
    Ok((q, space))
}

fn check_fractional_target(p_in: &ExponentField, alpha: f64, p_out: &ExponentField, out: Space) -> Result<()> {
    let (q, space) = fractional_target(p_in, alpha)?;
    p_out.grid().check_same(q.grid())?;
    let same = q.values().iter().zip(p_out.values()).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same || space != out {
        return Err(Error::InvalidInput("output exponent and space must be the Sobolev shift of the input".into()));
    }
    Ok(())
}

pub fn space_norm(f: &GridFunction, space: Space, p: &ExponentField, bank: &FilterBank) -> Result<f64> {
    match space {
        Space::Lp => luxemburg::norm(f, p),
        Space::Hp => hp_norm(f, p, bank),
        Space::Bmo { q, d } => Ok(bmo_norm(f, p, q, d, &CubeTable::dyadic(p, true))?.value),
    }
}

/// Ratio sweep of an operator over a family: `||op f||_{out, p_out}` against
/// `||f||_{in, p_in}`. Members with zero input norm are skipped.
#[allow(clippy::too_many_arguments)]
pub fn boundedness_experiment(
    op: &OperatorHandle,
    family: &[ExperimentInput],
    p_in: &ExponentField,
    in_space: Space,
    p_out: &ExponentField,
    out_space: Space,
    bank: &FilterBank,
    coarse: Option<&ExperimentReport>,
) -> Result<ExperimentReport> {
    match op {
        OperatorHandle::Kernel(k) => check_triple(k, p_in)?,
        OperatorHandle::Fractional { alpha } => check_fractional_target(p_in, *alpha, p_out, out_space)?,
    }
    let mut ratios = Vec::with_capacity(family.len());
    let mut small_max: Option<f64> = None;
    for member in family {
        let f = member.function();
        let denom = space_norm(&f, in_space, p_in, bank)?;
        if !(denom > 0.0) {
            ratios.push(None);
            continue;
        }
        let image = match (op, member) {
            (OperatorHandle::Kernel(k), ExperimentInput::Atom(a)) => apply_to_atom(k, a)?,
            (OperatorHandle::Kernel(k), ExperimentInput::Function(f)) => apply_operator(k, f)?,
            (OperatorHandle::Fractional { alpha }, _) => local_fractional(&f, *alpha)?,
        };
        let r = space_norm(&image, out_space, p_out, bank)? / denom;
        if member.small_cube() {
            small_max = Some(small_max.map_or(r, |m| m.max(r)));
        }
        ratios.push(Some(r));
    }
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    let max = kept.iter().copied().fold(0.0, f64::max);
    let median = if kept.is_empty() { 0.0 } else { stats::median(&kept) };
    Ok(ExperimentReport {
        skipped: ratios.iter().filter(|r| r.is_none()).count(),
        ratios,
        max,
        median,
        small_cube_max: small_max,
        refinement_delta: coarse.map(|c| stats::relative_change(c.max, max)),
    })
}

/// Cube `Q(c_Q, l(Q) + 4)` that contains the support of `I_alpha^loc a`.
pub fn fractional_support_cube(c: &Cube) -> Cube {
    Cube::new(c.n, c.center, c.side + 4.0)
}
