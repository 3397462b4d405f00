//! Hardy–Littlewood, local vertical, non-tangential, Peetre-type and grand
//! maximal functions.
//!
//! Continuous suprema over `t in (0, 1)` are replaced by the fixed scale set
//! `{2^-j : 0 <= j <= J} ∪ {1.5 * 2^-j : 1 <= j <= J}`; scales at which the
//! dilated kernel has fewer than four samples across its support are dropped
//! and listed in the result.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Convolver, Grid, GridFunction, OffsetKernel};
use crate::jet::Jet;
use crate::profile::{Bump, Profile};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaximalOp {
    HardyLittlewood,
    Vertical,
    NonTangential,
    Peetre,
    GrandVertical,
    GrandNonTangential,
}

#[derive(Clone, Debug)]
pub struct MaximalResult {
    pub values: GridFunction,
    pub op: MaximalOp,
    /// Scales that contributed.
    pub scales: Vec<f64>,
    /// Scales skipped as under-resolved.
    pub dropped: Vec<f64>,
    pub dictionary: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl MaximalResult {
    fn new(values: GridFunction, op: MaximalOp) -> Self {
        MaximalResult { values, op, scales: Vec::new(), dropped: Vec::new(), dictionary: None, a: None, b: None }
    }
}

/// The documented scale set for a grid at level `J`.
pub fn scale_set(grid: &Grid) -> Vec<f64> {
    let j = grid.level() as i32;
    let mut s: Vec<f64> = (0..=j).map(|k| 2f64.powi(-k)).collect();
    s.extend((1..=j).map(|k| 1.5 * 2f64.powi(-k)));
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Dyadic scales `2^-j`, `0 <= j <= J`.
pub fn dyadic_scales(grid: &Grid) -> Vec<f64> {
    (0..=grid.level() as i32).map(|k| 2f64.powi(-k)).collect()
}

/// Standard `psi_0`: unit-mass radial bump on the unit ball.
pub fn default_psi0(n: usize) -> Bump {
    Bump::unit_mass(n, 1.0)
}

/// `|psi_t * f|` at every resolvable scale.
fn responses(
    conv: &mut Convolver<'_>,
    grid: &Grid,
    psi: &dyn Profile,
    scales: &[f64],
    used: &mut Vec<f64>,
    dropped: &mut Vec<f64>,
) -> Vec<(f64, GridFunction)> {
    let mut out = Vec::new();
    for &t in scales {
        match OffsetKernel::scaled(grid, psi, t) {
            Ok(k) => {
                out.push((t, conv.apply(&k).abs()));
                if !used.contains(&t) {
                    used.push(t);
                }
            }
            Err(_) => {
                if !dropped.contains(&t) {
                    dropped.push(t);
                }
            }
        }
    }
    out
}

fn pointwise_max(acc: &mut GridFunction, v: &GridFunction) {
    for (a, b) in acc.values_mut().iter_mut().zip(v.values()) {
        *a = a.max(*b);
    }
}

/// Uncentred maximal function over lattice-aligned dyadic windows and their
/// half-shifted copies, computed from summed-area tables.
pub fn hl_maximal(f: &GridFunction) -> MaximalResult {
    let g = *f.grid();
    let n = g.dim();
    let side = g.side();
    let abs = f.abs();
    // prefix sums with a leading zero row/column
    let w = side + 1;
    let mut sat = vec![0.0; if n == 1 { w } else { w * w }];
    if n == 1 {
        for i in 0..side {
            sat[i + 1] = sat[i] + abs.values()[i];
        }
    } else {
        for i in 0..side {
            let mut row = 0.0;
            for j in 0..side {
                row += abs.values()[i * side + j];
                sat[(i + 1) * w + j + 1] = sat[i * w + j + 1] + row;
            }
        }
    }
    let rect = |lo: [usize; 2], hi: [usize; 2]| -> f64 {
        if n == 1 {
            sat[hi[0]] - sat[lo[0]]
        } else {
            sat[hi[0] * w + hi[1]] - sat[lo[0] * w + hi[1]] - sat[hi[0] * w + lo[1]] + sat[lo[0] * w + lo[1]]
        }
    };
    let mut out = abs.clone();
    let mut width = 1usize;
    loop {
        let shifts: &[usize] = if width == 1 { &[0] } else { &[0, width / 2] };
        for &s in shifts {
            let starts: Vec<(usize, usize)> = {
                let mut v = Vec::new();
                let mut a: isize = s as isize - if s > 0 { width as isize } else { 0 };
                while a < side as isize {
                    let lo = a.max(0) as usize;
                    let hi = ((a + width as isize) as usize).min(side);
                    v.push((lo, hi));
                    a += width as isize;
                }
                v
            };
            let cells = (width as f64).powi(n as i32);
            let vals = out.values_mut();
            if n == 1 {
                for &(lo, hi) in &starts {
                    let avg = rect([lo, 0], [hi, 0]) / cells;
                    for v in &mut vals[lo..hi] {
                        *v = v.max(avg);
                    }
                }
            } else {
                for &(lo0, hi0) in &starts {
                    for &(lo1, hi1) in &starts {
                        let avg = rect([lo0, lo1], [hi0, hi1]) / cells;
                        for i in lo0..hi0 {
                            for v in &mut vals[i * side + lo1..i * side + hi1] {
                                *v = v.max(avg);
                            }
                        }
                    }
                }
            }
        }
        if width >= side {
            break;
        }
        width *= 2;
    }
    MaximalResult::new(out, MaximalOp::HardyLittlewood)
}

/// `max_j |(psi0)_j * f|` over `j = 0..=J`.
pub fn local_vertical_maximal(f: &GridFunction, psi0: &dyn Profile) -> MaximalResult {
    let g = *f.grid();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut conv = Convolver::new(f);
    let mut acc = GridFunction::zeros(g);
    for (_, r) in responses(&mut conv, &g, psi0, &dyadic_scales(&g), &mut used, &mut dropped) {
        pointwise_max(&mut acc, &r);
    }
    let mut res = MaximalResult::new(acc, MaximalOp::Vertical);
    res.scales = used;
    res.dropped = dropped;
    res
}

/// Sliding maximum of radius `r` along a strided line.
fn sliding_max_line(src: &[f64], dst: &mut [f64], r: usize) {
    let m = src.len();
    let mut dq: VecDeque<usize> = VecDeque::new();
    for j in 0..m + r {
        if j < m {
            while let Some(&b) = dq.back() {
                if src[b] <= src[j] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(j);
        }
        if j >= r {
            let i = j - r;
            while let Some(&fr) = dq.front() {
                if fr + r < i {
                    dq.pop_front();
                } else {
                    break;
                }
            }
            dst[i] = src[*dq.front().expect("window is never empty")];
        }
    }
}

/// Largest integer `k >= 0` with `k < x`, for `x > 0`.
fn below(x: f64) -> usize {
    ((x * (1.0 - 1e-12)).ceil() as isize - 1).max(0) as usize
}

/// `max_{|x - y| < t} u(y)` over lattice points.
pub fn ball_max(u: &GridFunction, t: f64) -> GridFunction {
    let g = *u.grid();
    let h = g.spacing();
    let side = g.side();
    let r = below(t / h);
    if g.dim() == 1 {
        let mut out = vec![0.0; side];
        sliding_max_line(u.values(), &mut out, r);
        return GridFunction::from_raw(g, out);
    }
    let widths: Vec<usize> = (0..=r)
        .map(|dy| {
            let rem = (t / h) * (t / h) - (dy * dy) as f64;
            if rem > 0.0 {
                below(rem.sqrt())
            } else {
                0
            }
        })
        .collect();
    let mut distinct: Vec<usize> = widths.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut rowmax: Vec<(usize, Vec<f64>)> = Vec::new();
    for &wd in &distinct {
        let mut buf = vec![0.0; g.len()];
        for i in 0..side {
            sliding_max_line(&u.values()[i * side..(i + 1) * side], &mut buf[i * side..(i + 1) * side], wd);
        }
        rowmax.push((wd, buf));
    }
    let lookup = |wd: usize| &rowmax.iter().find(|(w, _)| *w == wd).expect("width present").1;
    let mut out = vec![0.0f64; g.len()];
    for i in 0..side {
        for dy in -(r as isize)..=(r as isize) {
            let src = i as isize + dy;
            if src < 0 || src >= side as isize {
                continue;
            }
            let rm = lookup(widths[dy.unsigned_abs()]);
            let srow = &rm[src as usize * side..(src as usize + 1) * side];
            for (o, v) in out[i * side..(i + 1) * side].iter_mut().zip(srow) {
                *o = o.max(*v);
            }
        }
    }
    GridFunction::from_raw(g, out)
}

/// `max over (t, y)` with `|x - y| < t` of `|(psi0)_t * f(y)|`.
pub fn local_nontangential_maximal(f: &GridFunction, psi0: &dyn Profile) -> MaximalResult {
    let g = *f.grid();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut conv = Convolver::new(f);
    let mut acc = GridFunction::zeros(g);
    for (t, r) in responses(&mut conv, &g, psi0, &scale_set(&g), &mut used, &mut dropped) {
        pointwise_max(&mut acc, &ball_max(&r, t));
    }
    let mut res = MaximalResult::new(acc, MaximalOp::NonTangential);
    res.scales = used;
    res.dropped = dropped;
    res
}

/// Lattice offsets sorted by length, with their lengths.
fn sorted_offsets(g: &Grid) -> Vec<([isize; 2], f64)> {
    let side = g.side() as isize;
    let h = g.spacing();
    let mut v = Vec::new();
    if g.dim() == 1 {
        for k in -(side - 1)..side {
            v.push(([k, 0], (k.abs() as f64) * h));
        }
    } else {
        for a in -(side - 1)..side {
            for b in -(side - 1)..side {
                v.push(([a, b], ((a * a + b * b) as f64).sqrt() * h));
            }
        }
    }
    v.sort_by(|x, y| x.1.total_cmp(&y.1));
    v
}

/// `max_{j, y} |(psi0)_j * f(x - y)| / ((1 + 2^j |y|)^A 2^{B |y|})`.
pub fn peetre_maximal(f: &GridFunction, psi0: &dyn Profile, a: f64, b: f64) -> Result<MaximalResult> {
    if !(a >= 1.0 && b >= 1.0) {
        return Err(Error::InvalidInput("Peetre parameters must satisfy A, B >= 1".into()));
    }
    let g = *f.grid();
    let side = g.side() as isize;
    let n = g.dim();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut conv = Convolver::new(f);
    let offsets = sorted_offsets(&g);
    let mut acc = GridFunction::zeros(g);
    for (t, u) in responses(&mut conv, &g, psi0, &dyadic_scales(&g), &mut used, &mut dropped) {
        let big = u.max_abs();
        if big == 0.0 {
            continue;
        }
        let denom: Vec<f64> =
            offsets.iter().map(|(_, d)| (1.0 + d / t).powf(a) * 2f64.powf(b * d)).collect();
        let uv = u.values();
        let out = acc.values_mut();
        for x in 0..g.len() {
            let m = g.multi_index(x);
            let mut best = out[x];
            for (k, (off, _)) in offsets.iter().enumerate() {
                if big / denom[k] <= best {
                    break;
                }
                let z0 = m[0] as isize - off[0];
                if z0 < 0 || z0 >= side {
                    continue;
                }
                let z = if n == 1 {
                    z0 as usize
                } else {
                    let z1 = m[1] as isize - off[1];
                    if z1 < 0 || z1 >= side {
                        continue;
                    }
                    z0 as usize * side as usize + z1 as usize
                };
                let v = uv[z] / denom[k];
                if v > best {
                    best = v;
                }
            }
            out[x] = best;
        }
    }
    let mut res = MaximalResult::new(acc, MaximalOp::Peetre);
    res.scales = used;
    res.dropped = dropped;
    res.a = Some(a);
    res.b = Some(b);
    Ok(res)
}

/// Member of the finite test-function dictionary: the profile
/// `scale * (1 + (x_1/rho)^degree) * exp(1/(|x/rho|^2 - 1))` (the factor is
/// `1` for `degree = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct DictMember {
    pub n: usize,
    pub radius: f64,
    pub degree: u32,
    pub scale: f64,
    /// `max_{|alpha| <= N+1} ||D^alpha psi||_inf` of the normalised member.
    pub derivative_sup: f64,
}

impl DictMember {
    fn shape(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().take(self.n).map(|v| v * v).sum::<f64>() / (self.radius * self.radius);
        if r2 >= 1.0 {
            return 0.0;
        }
        let poly = if self.degree == 0 { 1.0 } else { 1.0 + (x[0] / self.radius).powi(self.degree as i32) };
        poly * (1.0 / (r2 - 1.0)).exp()
    }

    /// Taylor jet of the unnormalised shape at `x`.
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let x0 = Jet::variable(order, 0, x[0]).scale(1.0 / self.radius);
        let mut r2 = &x0 * &x0;
        if self.n == 2 {
            let x1 = Jet::variable(order, 1, x[1]).scale(1.0 / self.radius);
            r2 = &r2 + &(&x1 * &x1);
        }
        let bump = r2.add_constant(-1.0).recip().exp();
        if self.degree == 0 {
            return bump;
        }
        let mut pw = Jet::constant(order, 1.0);
        for _ in 0..self.degree {
            pw = &pw * &x0;
        }
        &pw.add_constant(1.0) * &bump
    }

    /// `max_{|alpha| <= order} sup |D^alpha shape|` by dense sampling plus
    /// local pattern-search refinement of each maximiser.
    fn derivative_sups(&self, order: usize, density: usize) -> Vec<f64> {
        let alphas: Vec<[usize; 2]> = crate::poly::multi_indices(self.n, order);
        let eval = |p: [f64; 2], a: [usize; 2]| -> f64 {
            let r2 = (p[0] * p[0] + p[1] * p[1]) / (self.radius * self.radius);
            if r2 >= 0.999 * 0.999 {
                return 0.0;
            }
            let v = self.jet(p, order).derivative(a[0], a[1]).abs();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let samples: Vec<[f64; 2]> = if self.n == 1 {
            let m = density * 40;
            (0..m).map(|i| [self.radius * (-1.0 + (i as f64 + 0.5) * 2.0 / m as f64), 0.0]).collect()
        } else {
            let m = density;
            let mut v = Vec::new();
            for i in 0..m {
                for j in 0..m {
                    let s = |k: usize| self.radius * (-1.0 + (k as f64 + 0.5) * 2.0 / m as f64);
                    v.push([s(i), s(j)]);
                }
            }
            v
        };
        let step0 = self.radius * 2.0 / if self.n == 1 { density as f64 * 40.0 } else { density as f64 };
        let mut sups = vec![0.0f64; alphas.len()];
        let mut argmax = vec![[0.0f64; 2]; alphas.len()];
        for p in &samples {
            let jet = {
                let r2 = (p[0] * p[0] + p[1] * p[1]) / (self.radius * self.radius);
                if r2 >= 0.999 * 0.999 {
                    continue;
                }
                self.jet(*p, order)
            };
            for (k, a) in alphas.iter().enumerate() {
                let v = jet.derivative(a[0], a[1]).abs();
                if v.is_finite() && v > sups[k] {
                    sups[k] = v;
                    argmax[k] = *p;
                }
            }
        }
        for (k, a) in alphas.iter().enumerate() {
            let mut p = argmax[k];
            let mut best = sups[k];
            let mut step = step0;
            while step > step0 * 1e-6 {
                let mut moved = false;
                for axis in 0..self.n {
                    for dir in [-1.0, 1.0] {
                        let mut q = p;
                        q[axis] += dir * step;
                        let v = eval(q, *a);
                        if v > best {
                            best = v;
                            p = q;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            sups[k] = best;
        }
        sups
    }
}

impl Profile for DictMember {
    fn eval(&self, x: &[f64]) -> f64 {
        self.scale * self.shape(x)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Sample count per axis (times 40 in one dimension) when tabulating
/// derivative bounds.
const SAMPLING_DENSITY: usize = 100;

/// Default derivative order of the dictionary.
pub const DEFAULT_N: usize = 5;
/// Normalised members satisfy `max ||D^alpha psi||_inf = 1 - NORMALISATION_GAP`.
pub const NORMALISATION_GAP: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct TestFunctionDictionary {
    pub n: usize,
    /// Derivative order `N`; members are normalised up to order `N + 1`.
    pub order: usize,
    /// Nominal support bound `R` before clipping.
    pub r_nominal: f64,
    /// Radius actually used for the largest members.
    pub r_effective: f64,
    pub members: Vec<DictMember>,
    pub id: String,
}

/// `2^{3(10+n)}`, the support bound of the full grand maximal function.
pub fn full_radius(n: usize) -> f64 {
    2f64.powi(3 * (10 + n as i32))
}

impl TestFunctionDictionary {
    /// Eight members (degrees 0..3, two radii) for support bound `r`, clipped
    /// to `2L`. For `r > 1` the `r = 1` members are included as well.
    pub fn new(n: usize, order: usize, r: f64, half_width: f64) -> Result<Self> {
        Self::build(n, order, r, half_width, &[1.0, 0.5])
    }

    /// Larger dictionary with four radii per support bound.
    pub fn doubled(n: usize, order: usize, r: f64, half_width: f64) -> Result<Self> {
        Self::build(n, order, r, half_width, &[1.0, 0.75, 0.5, 0.375])
    }

    fn build(n: usize, order: usize, r: f64, half_width: f64, fractions: &[f64]) -> Result<Self> {
        if !(r > 0.0) || (n != 1 && n != 2) {
            return Err(Error::InvalidInput("dictionary radius must be positive".into()));
        }
        let r_eff = r.min(2.0 * half_width);
        let mut bounds = vec![r_eff];
        if r_eff > 1.0 {
            bounds.push(1.0);
        }
        let mut members = Vec::new();
        for &bound in &bounds {
            for &frac in fractions {
                for degree in 0..4u32 {
                    let mut m = DictMember { n, radius: bound * frac, degree, scale: 1.0, derivative_sup: 0.0 };
                    let sups = m.derivative_sups(order + 1, SAMPLING_DENSITY);
                    let top = sups.iter().cloned().fold(0.0, f64::max);
                    m.scale = (1.0 - NORMALISATION_GAP) / top;
                    m.derivative_sup = top * m.scale;
                    members.push(m);
                }
            }
        }
        let id = alloc::format!("N{}-R{}-m{}", order, r_eff, members.len());
        Ok(TestFunctionDictionary { n, order, r_nominal: r, r_effective: r_eff, members, id })
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Re-checks `||D^alpha psi||_inf <= 1` on an independent, denser sample.
    pub fn validate(&self) -> bool {
        self.members.iter().all(|m| {
            m.derivative_sups(self.order + 1, SAMPLING_DENSITY * 3 / 2 + 1).iter().all(|v| v * m.scale <= 1.0)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrandMode {
    Vertical,
    NonTangential,
}

/// Pointwise maximum over dictionary members of the corresponding
/// single-profile maximal function over the full scale set.
pub fn grand_maximal(f: &GridFunction, dict: &TestFunctionDictionary, mode: GrandMode) -> Result<MaximalResult> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let g = *f.grid();
    let scales = scale_set(&g);
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut conv = Convolver::new(f);
    let mut acc = GridFunction::zeros(g);
    for m in &dict.members {
        for (t, r) in responses(&mut conv, &g, m, &scales, &mut used, &mut dropped) {
            match mode {
                GrandMode::Vertical => pointwise_max(&mut acc, &r),
                GrandMode::NonTangential => pointwise_max(&mut acc, &ball_max(&r, t)),
            }
        }
    }
    dropped.retain(|t| !used.contains(t));
    let op = match mode {
        GrandMode::Vertical => MaximalOp::GrandVertical,
        GrandMode::NonTangential => MaximalOp::GrandNonTangential,
    };
    let mut res = MaximalResult::new(acc, op);
    res.scales = used;
    res.dropped = dropped;
    res.dictionary = Some(dict.id.clone());
    Ok(res)
}
