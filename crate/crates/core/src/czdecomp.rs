//! Whitney decompositions of level sets, smooth partitions of unity, the
//! Calderón–Zygmund decomposition and the atomic decompositions built from
//! a tower of them.
//!
//! Open sets are unions of lattice cells. Whitney cubes are dyadic blocks of
//! cells anchored at the lower corner of the box, so every cube is exactly a
//! union of cells.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::atoms::{check_atom, validate_atom, Atom, AtomReport, AtomicDecomposition, Provenance};
use crate::error::{Error, Result};
use crate::exponent::{atom_moment_degree, ExponentField};
use crate::grid::{Cube, Grid, GridFunction, IndexBox, LocalField};
use crate::luxemburg;
use crate::poly::{Conditioning, Polynomial, Projector};
use crate::profile::smooth_step;

/// Largest side of a Whitney cube.
pub const MAX_WHITNEY_SIDE: f64 = 2.0;
/// Maximal number of non-trivial heights in an atomization. Pieces at
/// heights far below the maximum are differences of numbers of the size of
/// `f` and drown in rounding, which would break their moment conditions.
pub const MAX_LEVELS: usize = 20;
/// A piece whose moment-free part is below this fraction of its size is
/// treated as rounding noise.
const NOISE_RATIO: f64 = 1e-6;
/// Tolerance for the cancellation of the correction polynomials.
pub const TELESCOPE_TOL: f64 = 1e-10;

const FAR: u32 = u32::MAX / 4;

/// Dilation factors `a < b`: cubes satisfy `b l(Q) <= dist(Q, complement)`
/// and the partition functions live on `aQ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dilation {
    pub a: f64,
    pub b: f64,
}

impl Dilation {
    /// `a = 1 + 2^{-(11+n)}`, `b = 1 + 2^{-(10+n)}`.
    pub fn standard(n: usize) -> Self {
        Dilation { a: 1.0 + 2f64.powi(-(11 + n as i32)), b: 1.0 + 2f64.powi(-(10 + n as i32)) }
    }

    /// Transition layers several cells wide, so that the partition functions
    /// are resolved by the lattice.
    pub fn wide() -> Self {
        Dilation { a: 1.5, b: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyCube {
    pub cells: IndexBox,
    pub cube: Cube,
    /// `a Q`.
    pub star: Cube,
    /// Cells centred in `a Q`, clipped to the box.
    pub star_cells: IndexBox,
}

impl WhitneyCube {
    pub fn side(&self) -> f64 {
        self.cube.side
    }
}

#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    pub grid: Grid,
    pub omega: Vec<bool>,
    pub cubes: Vec<WhitneyCube>,
    pub dilation: Dilation,
}

/// Invariant checks of a Whitney decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WhitneyCheck {
    /// Cubes are pairwise disjoint and cover exactly the cells of the set.
    pub exact_cover: bool,
    /// Every `aQ` contains only cells of the set.
    pub stars_inside: bool,
    /// Largest number of stars containing one cell centre.
    pub overlap: usize,
}

impl WhitneyDecomposition {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn check(&self) -> WhitneyCheck {
        let g = self.grid;
        let mut cover = vec![0u32; g.len()];
        let mut stars = vec![0usize; g.len()];
        let mut stars_inside = true;
        for c in &self.cubes {
            c.cells.for_each(|m| cover[g.flat_index(m)] += 1);
            c.star_cells.for_each(|m| {
                let i = g.flat_index(m);
                stars[i] += 1;
                stars_inside &= self.omega[i];
            });
        }
        let exact_cover = cover.iter().zip(&self.omega).all(|(c, o)| *c == u32::from(*o));
        WhitneyCheck { exact_cover, stars_inside, overlap: stars.into_iter().max().unwrap_or(0) }
    }
}

/// Chebyshev distance, in cells, from each cell to the nearest cell outside
/// the mask; [`FAR`] when the complement is empty.
fn chebyshev_distance(grid: &Grid, mask: &[bool]) -> Vec<u32> {
    let s = grid.side();
    let two = grid.dim() == 2;
    let rows = if two { s } else { 1 };
    let at = |i: usize, j: usize| if two { i * s + j } else { i };
    let mut d: Vec<u32> = mask.iter().map(|&m| if m { FAR } else { 0 }).collect();
    for i in 0..s {
        for j in 0..rows {
            let mut v = d[at(i, j)];
            if i > 0 {
                v = v.min(d[at(i - 1, j)] + 1);
                if two && j > 0 {
                    v = v.min(d[at(i - 1, j - 1)] + 1);
                }
                if two && j + 1 < rows {
                    v = v.min(d[at(i - 1, j + 1)] + 1);
                }
            }
            if two && j > 0 {
                v = v.min(d[at(i, j - 1)] + 1);
            }
            d[at(i, j)] = v.min(FAR);
        }
    }
    for i in (0..s).rev() {
        for j in (0..rows).rev() {
            let mut v = d[at(i, j)];
            if i + 1 < s {
                v = v.min(d[at(i + 1, j)] + 1);
                if two && j + 1 < rows {
                    v = v.min(d[at(i + 1, j + 1)] + 1);
                }
                if two && j > 0 {
                    v = v.min(d[at(i + 1, j - 1)] + 1);
                }
            }
            if two && j + 1 < rows {
                v = v.min(d[at(i, j + 1)] + 1);
            }
            d[at(i, j)] = v.min(FAR);
        }
    }
    d
}

/// Cells per side of the top-level blocks: the largest power of two that
/// divides the lattice side and keeps the block side at most
/// [`MAX_WHITNEY_SIDE`].
fn top_block(grid: &Grid) -> usize {
    let mut s = 1usize;
    while grid.side().is_multiple_of(2 * s) && (2 * s) as f64 * grid.spacing() <= MAX_WHITNEY_SIDE + 1e-12 {
        s *= 2;
    }
    s
}

fn make_cube(grid: &Grid, cells: IndexBox, a: f64) -> WhitneyCube {
    let cube = Cube::from_cells(grid, &cells);
    let star = cube.dilate(a);
    WhitneyCube { cells, cube, star, star_cells: star.cells_centered(grid) }
}

/// Maximal dyadic blocks `Q` inside the set with `b l(Q) <= dist(Q, complement)`
/// in the Chebyshev metric. Single cells are always accepted, so the union
/// equals the set exactly. A set without complement is tiled by the top
/// blocks.
pub fn whitney(grid: Grid, omega: &[bool], dilation: Dilation) -> Result<WhitneyDecomposition> {
    if omega.len() != grid.len() {
        return Err(Error::InvalidInput("mask length does not match grid".into()));
    }
    if !(dilation.a > 1.0 && dilation.b >= dilation.a) {
        return Err(Error::InvalidInput("dilations must satisfy 1 < a <= b".into()));
    }
    let n = grid.dim();
    let h = grid.spacing();
    let dist = chebyshev_distance(&grid, omega);
    let top = top_block(&grid);
    let blocks = grid.side() / top;
    let mut stack: Vec<([usize; 2], usize)> = Vec::new();
    for bi in 0..blocks {
        for bj in 0..if n == 2 { blocks } else { 1 } {
            stack.push(([bi * top, bj * top], top));
        }
    }
    let mut cubes = Vec::new();
    while let Some((lo, size)) = stack.pop() {
        let hi = [lo[0] + size, if n == 2 { lo[1] + size } else { 1 }];
        let cells = IndexBox::new(n, lo, hi);
        let mut inside = 0usize;
        let mut min_d = FAR;
        cells.for_each(|m| {
            let i = grid.flat_index(m);
            if omega[i] {
                inside += 1;
                min_d = min_d.min(dist[i]);
            }
        });
        if inside == 0 {
            continue;
        }
        let side = size as f64 * h;
        let accept = inside == cells.len()
            && (size == 1 || min_d >= FAR || dilation.b * side <= (min_d - 1) as f64 * h + 1e-12 * side);
        if accept {
            cubes.push(make_cube(&grid, cells, dilation.a));
        } else {
            let half = size / 2;
            for dx in 0..2 {
                for dy in 0..if n == 2 { 2 } else { 1 } {
                    stack.push(([lo[0] + dx * half, lo[1] + dy * half], half));
                }
            }
        }
    }
    cubes.sort_by(|p, q| {
        q.cube.side.total_cmp(&p.cube.side).then_with(|| (p.cells.lo[1], p.cells.lo[0]).cmp(&(q.cells.lo[1], q.cells.lo[0])))
    });
    Ok(WhitneyDecomposition { grid, omega: omega.to_vec(), cubes, dilation })
}

/// `eta_i` as local fields on the star cells; `sum eta_i = chi_Omega`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub eta: Vec<LocalField>,
}

fn cutoff(t: f64, half: f64, margin: f64) -> f64 {
    1.0 - smooth_step((t.abs() - half) / margin)
}

/// Smooth tensor bumps equal to one on each cube and vanishing outside its
/// star, normalised by their sum on the set.
pub fn partition_of_unity(w: &WhitneyDecomposition) -> Result<PartitionOfUnity> {
    let g = w.grid;
    let n = g.dim();
    let mut total = vec![0.0; g.len()];
    let mut beta = Vec::with_capacity(w.len());
    for c in &w.cubes {
        let half = c.side() / 2.0;
        let margin = (w.dilation.a - 1.0) * half;
        let mut lf = LocalField::zeros(g, c.star_cells);
        let mut k = 0;
        c.star_cells.for_each(|m| {
            let i = g.flat_index(m);
            let mut v = 1.0;
            if w.omega[i] {
                for d in 0..n {
                    v *= cutoff(g.coord(m[d]) - c.cube.center[d], half, margin);
                }
            } else {
                v = 0.0;
            }
            lf.values[k] = v;
            total[i] += v;
            k += 1;
        });
        beta.push(lf);
    }
    for (i, (t, o)) in total.iter().zip(&w.omega).enumerate() {
        if *o && !(*t > 0.0) {
            return Err(Error::ConstructionFailure(format!("cell {i} of the open set is not covered")));
        }
    }
    for lf in &mut beta {
        let win = lf.window;
        let mut k = 0;
        win.for_each(|m| {
            let t = total[g.flat_index(m)];
            if lf.values[k] != 0.0 {
                lf.values[k] /= t;
            }
            k += 1;
        });
    }
    Ok(PartitionOfUnity { eta: beta })
}

/// `max_i l_i max |D eta_i|`, with forward differences between neighbouring
/// lattice points.
pub fn gradient_constant(w: &WhitneyDecomposition, pou: &PartitionOfUnity) -> f64 {
    let g = w.grid;
    let h = g.spacing();
    let mut worst: f64 = 0.0;
    for (c, eta) in w.cubes.iter().zip(&pou.eta) {
        let win = eta.window;
        let mut grow = win;
        for d in 0..g.dim() {
            grow.lo[d] = grow.lo[d].saturating_sub(1);
            grow.hi[d] = (grow.hi[d] + 1).min(g.side());
        }
        let mut local: f64 = 0.0;
        grow.for_each(|m| {
            for d in 0..g.dim() {
                if m[d] + 1 < g.side() {
                    let mut m2 = m;
                    m2[d] += 1;
                    local = local.max((eta.get(m2) - eta.get(m)).abs() / h);
                }
            }
        });
        worst = worst.max(local * c.side());
    }
    worst
}

/// Outcome of one Calderón–Zygmund decomposition `f = g + sum b_i`.
#[derive(Clone, Debug)]
pub struct CZDecomposition {
    pub height: f64,
    pub degree: usize,
    pub whitney: WhitneyDecomposition,
    pub pou: PartitionOfUnity,
    /// Weighted projectors for cubes of side below one.
    pub projectors: Vec<Option<Projector>>,
    pub projections: Vec<Option<Polynomial>>,
    /// `f - P_i` on the star cells of small cubes.
    pub residuals: Vec<Option<LocalField>>,
    pub bad: Vec<LocalField>,
    pub good: GridFunction,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CzReport {
    /// `max |f - g - sum b_i|`.
    pub reconstruction: f64,
    /// Every `b_i` vanishes outside its star.
    pub supports_ok: bool,
    /// Largest normalised moment `|int b_i y^beta| / int |f eta_i|` over
    /// small cubes, in the cube's scaled coordinates.
    pub moment_residual: f64,
    /// `||g||_inf / lambda`.
    pub good_ratio: f64,
}

/// Decomposition at height `lambda` of the set `{gmax > lambda}`.
pub fn cz_decompose(
    f: &GridFunction,
    gmax: &GridFunction,
    lambda: f64,
    p: &ExponentField,
    d: usize,
    dilation: Dilation,
) -> Result<CZDecomposition> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput("height must be positive".into()));
    }
    let required = atom_moment_degree(p);
    if d < required {
        return Err(Error::DegreeTooLow { degree: d, required });
    }
    f.grid().check_same(gmax.grid())?;
    f.grid().check_same(p.grid())?;
    let omega: Vec<bool> = gmax.values().iter().map(|v| *v > lambda).collect();
    cz_from_mask(f, &omega, lambda, d, dilation)
}

/// Decomposition over an explicitly given open set.
pub fn cz_from_mask(f: &GridFunction, omega: &[bool], lambda: f64, d: usize, dilation: Dilation) -> Result<CZDecomposition> {
    let g = *f.grid();
    let whitney = whitney(g, omega, dilation)?;
    let pou = partition_of_unity(&whitney)?;
    let mut projectors = Vec::with_capacity(whitney.len());
    let mut projections = Vec::with_capacity(whitney.len());
    let mut residuals = Vec::with_capacity(whitney.len());
    let mut bad = Vec::with_capacity(whitney.len());
    let mut good = f.clone();
    for (c, eta) in whitney.cubes.iter().zip(&pou.eta) {
        let mut b = LocalField::zeros(g, eta.window);
        if c.side() < 1.0 {
            let pr = Projector::new(eta.clone(), d, c.cube.center, c.side() / 2.0, Conditioning::Pseudo)?;
            let poly = pr.project(f)?;
            let ps = poly.sample(&g, &eta.window);
            let mut r = LocalField::zeros(g, eta.window);
            let mut k = 0;
            eta.window.for_each(|m| {
                r.values[k] = f.at(m) - ps.values[k];
                b.values[k] = r.values[k] * eta.values[k];
                k += 1;
            });
            projectors.push(Some(pr));
            projections.push(Some(poly));
            residuals.push(Some(r));
        } else {
            let mut k = 0;
            eta.window.for_each(|m| {
                b.values[k] = f.at(m) * eta.values[k];
                k += 1;
            });
            projectors.push(None);
            projections.push(None);
            residuals.push(None);
        }
        b.add_into(&mut good, -1.0);
        bad.push(b);
    }
    Ok(CZDecomposition { height: lambda, degree: d, whitney, pou, projectors, projections, residuals, bad, good })
}

/// Moments of `b` in the cube's scaled coordinates relative to `mass`.
fn normalised_moments(b: &LocalField, cube: &Cube, d: usize, mass: f64) -> f64 {
    let g = b.grid;
    let idx = crate::poly::multi_indices(g.dim(), d);
    let mut acc = vec![0.0; idx.len()];
    let s = cube.side / 2.0;
    b.for_each(|m, v| {
        if v == 0.0 {
            return;
        }
        let y = [(g.coord(m[0]) - cube.center[0]) / s, if g.dim() == 2 { (g.coord(m[1]) - cube.center[1]) / s } else { 0.0 }];
        for (k, beta) in idx.iter().enumerate() {
            acc[k] += v * crate::poly::monomial(y, *beta);
        }
    });
    if !(mass > 0.0) {
        return 0.0;
    }
    acc.iter().fold(0.0, |m, v| m.max(v.abs())) / mass
}

impl CZDecomposition {
    fn whitney_eta(&self, i: usize) -> &LocalField {
        &self.pou.eta[i]
    }

    pub fn report(&self, f: &GridFunction) -> CzReport {
        let g = *f.grid();
        let mut sum = self.good.clone();
        let mut supports_ok = true;
        let mut moment_residual: f64 = 0.0;
        for (i, b) in self.bad.iter().enumerate() {
            b.add_into(&mut sum, 1.0);
            let c = &self.whitney.cubes[i];
            b.for_each(|m, v| {
                if v != 0.0 {
                    let x = g.point(g.flat_index(m));
                    supports_ok &= c.star.contains_point(&x[..g.dim()]);
                }
            });
            if c.side() < 1.0 {
                let eta = self.whitney_eta(i);
                let mut mass = 0.0;
                eta.for_each(|m, e| mass += (f.at(m) * e).abs());
                moment_residual = moment_residual.max(normalised_moments(b, &c.cube, self.degree, mass));
            }
        }
        let reconstruction = sum.sub(f).map(|r| r.max_abs()).unwrap_or(f64::INFINITY);
        CzReport { reconstruction, supports_ok, moment_residual, good_ratio: self.good.max_abs() / self.height }
    }
}

/// Parameters of an atomization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomizeParams {
    pub q: f64,
    pub d: usize,
    pub dilation: Dilation,
}

/// Which rewriting of `h_i^k` applies: 1 for `l_i >= 1`, 2 for
/// `1/(16n) <= l_i^n < 1`, 3 for `l_i^n < 1/(16n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomCase {
    Large,
    Intermediate,
    Small,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomRecord {
    pub level: i32,
    /// One-based position among the atoms of its level.
    pub index: usize,
    pub case: AtomCase,
    pub whitney_side: f64,
}

/// Runtime checks of the geometric and algebraic lemmas between levels
/// `k` and `k + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelDiagnostics {
    pub level: i32,
    pub cubes: usize,
    pub overlap: usize,
    /// `max l_j^{k+1} / l_i^k` over overlapping pairs.
    pub side_ratio: f64,
    /// Every overlapping `Q_j^{(k+1)*}` lies in `2^6 n Q_i^{k*}`.
    pub stars_nested: bool,
    /// Largest number of level-`k` cubes overlapping one level-`k+1` cube.
    pub overlap_count: usize,
    /// `max |P_ij eta_j| / 2^{k+1}` over small `j`.
    pub correction_bound: f64,
    /// `max_j |sum_i P_ij| / max_i |P_ij|` in coefficient norm.
    pub telescoping: f64,
    /// `||g^k||_inf / 2^k`.
    pub good_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct Atomization {
    pub decomposition: AtomicDecomposition,
    pub records: Vec<AtomRecord>,
    pub levels: Vec<LevelDiagnostics>,
    /// The constant `C` in `lambda_{i,k} = C 2^k`.
    pub normalization: f64,
    /// Bottom and top heights `2^k` used.
    pub k_range: (i32, i32),
    /// `||f - sum lambda a||_2 / ||f||_2`.
    pub reconstruction_error: f64,
    pub nested: bool,
}

/// `2^6 n` times the star, or `gamma` times it for very large cubes.
fn support_cube(c: &WhitneyCube, n: usize) -> Cube {
    let gamma = 1.0 + 2f64.powi(-12 - n as i32);
    if c.side() < 2.0 / (gamma - 1.0) {
        c.star.dilate(64.0 * n as f64)
    } else {
        c.star.dilate(gamma)
    }
}

/// Compressed lists of the cubes whose partition function is positive at
/// each cell.
struct Cover {
    start: Vec<usize>,
    items: Vec<u32>,
}

impl Cover {
    fn new(grid: &Grid, pou: &PartitionOfUnity) -> Cover {
        let mut count = vec![0usize; grid.len() + 1];
        for eta in &pou.eta {
            eta.for_each(|m, v| {
                if v > 0.0 {
                    count[grid.flat_index(m) + 1] += 1;
                }
            });
        }
        for i in 0..grid.len() {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut items = vec![0u32; count[grid.len()]];
        for (j, eta) in pou.eta.iter().enumerate() {
            eta.for_each(|m, v| {
                if v > 0.0 {
                    let c = grid.flat_index(m);
                    items[fill[c]] = j as u32;
                    fill[c] += 1;
                }
            });
        }
        Cover { start: count, items }
    }

    fn at(&self, cell: usize) -> &[u32] {
        &self.items[self.start[cell]..self.start[cell + 1]]
    }
}

fn level_mask(gmax: &GridFunction, k: i32, bottom: i32) -> Vec<bool> {
    if k <= bottom {
        return vec![true; gmax.grid().len()];
    }
    let t = 2f64.powi(k);
    gmax.values().iter().map(|v| *v > t).collect()
}

fn size_ratio(h: &LocalField, q: f64, cube: &Cube) -> f64 {
    let norm = h.lq_norm(q);
    if q.is_infinite() {
        norm
    } else {
        norm / cube.measure().powf(1.0 / q)
    }
}

/// One `h_i^k` with its support cube.
struct Piece {
    level: i32,
    index: usize,
    h: LocalField,
    cube: Cube,
    case: AtomCase,
    side: f64,
}

/// Differences `g^{k+1} - g^k = sum_i h_i^k` with their diagnostics.
fn level_pieces(
    f: &GridFunction,
    lo: &CZDecomposition,
    hi: &CZDecomposition,
    k: i32,
) -> Result<(Vec<Piece>, LevelDiagnostics)> {
    let g = *f.grid();
    let n = g.dim();
    let cover = Cover::new(&g, &hi.pou);
    let mut diag = LevelDiagnostics {
        level: k,
        cubes: lo.whitney.len(),
        overlap: lo.whitney.check().overlap,
        side_ratio: 0.0,
        stars_nested: true,
        overlap_count: 0,
        correction_bound: 0.0,
        telescoping: 0.0,
        good_ratio: lo.good.max_abs() / 2f64.powi(k),
    };
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); hi.whitney.len()];
    let mut scales = vec![0.0f64; hi.whitney.len()];
    let mut counts = vec![0usize; hi.whitney.len()];
    let next_height = 2f64.powi(k + 1);
    let mut pieces = Vec::with_capacity(lo.whitney.len());
    let small_threshold = 1.0 / (16.0 * n as f64);
    for (i, ci) in lo.whitney.cubes.iter().enumerate() {
        let eta_i = &lo.pou.eta[i];
        let mut js: Vec<u32> = Vec::new();
        eta_i.for_each(|m, v| {
            if v > 0.0 {
                js.extend_from_slice(cover.at(g.flat_index(m)));
            }
        });
        js.sort_unstable();
        js.dedup();
        let q_tilde = support_cube(ci, n);
        let mut window = eta_i.window;
        for &j in &js {
            let cj = &hi.whitney.cubes[j as usize];
            window = window.hull(&cj.star_cells);
            diag.side_ratio = diag.side_ratio.max(cj.side() / ci.side());
            diag.stars_nested &= ci.star.dilate(64.0 * n as f64).contains_cube(&cj.star);
            counts[j as usize] += 1;
        }
        let mut h = LocalField::zeros(g, window);
        for (m, v) in iter_field(&lo.bad[i]) {
            *h.get_mut(m) += v;
        }
        let mut touches_large = false;
        for &j in &js {
            let j = j as usize;
            let bj = &hi.bad[j];
            eta_i.for_each(|m, e| {
                if e != 0.0 {
                    let v = bj.get(m);
                    if v != 0.0 {
                        *h.get_mut(m) -= v * e;
                    }
                }
            });
            match (&hi.projectors[j], &hi.residuals[j]) {
                (Some(pr), Some(r)) => {
                    let pij = pr.project_with(|m| r.get(m) * eta_i.get(m));
                    let eta_j = &hi.pou.eta[j];
                    let ps = pij.sample(&g, &eta_j.window);
                    let mut k2 = 0;
                    let mut sup: f64 = 0.0;
                    eta_j.window.for_each(|m| {
                        let v = ps.values[k2] * eta_j.values[k2];
                        sup = sup.max(v.abs());
                        *h.get_mut(m) += v;
                        k2 += 1;
                    });
                    diag.correction_bound = diag.correction_bound.max(sup / next_height);
                    if sums[j].is_empty() {
                        sums[j] = vec![0.0; pij.coeffs.len()];
                    }
                    for (s, c) in sums[j].iter_mut().zip(&pij.coeffs) {
                        *s += c;
                    }
                    let mut fsup: f64 = 0.0;
                    eta_j.for_each(|m, e| {
                        if e > 0.0 {
                            fsup = fsup.max(f.at(m).abs());
                        }
                    });
                    scales[j] = scales[j].max(pij.coeffs.iter().fold(fsup, |m, c| m.max(c.abs())));
                }
                _ => touches_large = true,
            }
        }
        let side = ci.side();
        let case = if side >= 1.0 {
            AtomCase::Large
        } else if side.powi(n as i32) >= small_threshold {
            AtomCase::Intermediate
        } else {
            AtomCase::Small
        };
        if q_tilde.measure() < 1.0 && touches_large {
            return Err(Error::ConstructionFailure(format!(
                "level {k}: cube {i} of side {side} needs vanishing moments but meets a cube of side >= 1 at the next level"
            )));
        }
        if q_tilde.measure() < 1.0 && h.max_abs() > 0.0 {
            remove_moment_rounding(&mut h, &q_tilde, lo.degree)?;
        }
        if h.max_abs() > 0.0 {
            pieces.push(Piece { level: k, index: pieces.len() + 1, h, cube: q_tilde, case, side });
        }
    }
    diag.overlap_count = counts.into_iter().max().unwrap_or(0);
    for (s, sc) in sums.iter().zip(&scales) {
        if *sc > 0.0 {
            let r = s.iter().fold(0.0, |m, v| m.max(v.abs())) / sc;
            diag.telescoping = diag.telescoping.max(r);
        }
    }
    if !diag.stars_nested || diag.side_ratio > 16.0 * (n as f64).sqrt() {
        return Err(Error::ConstructionFailure(format!(
            "level {k}: consecutive Whitney cubes violate the size comparison (ratio {:.3})",
            diag.side_ratio
        )));
    }
    if diag.telescoping > TELESCOPE_TOL {
        return Err(Error::ConstructionFailure(format!(
            "level {k}: correction polynomials do not cancel (residual {:.3e})",
            diag.telescoping
        )));
    }
    Ok((pieces, diag))
}

/// The moments of `h` vanish in exact arithmetic, but `h` is a difference of
/// terms of the size of `f`, so pieces far below that size carry moments at
/// rounding level relative to `f`, which can be large relative to `h`. The
/// weighted projection of `h` onto polynomials on its own support is exactly
/// that rounding component; subtracting it restores the moments. A piece that
/// is almost entirely such a polynomial is rounding noise and is zeroed.
fn remove_moment_rounding(h: &mut LocalField, cube: &Cube, d: usize) -> Result<()> {
    let before = h.max_abs();
    let mut w = LocalField::zeros(h.grid, h.window);
    for (wv, hv) in w.values.iter_mut().zip(&h.values) {
        *wv = if *hv != 0.0 { 1.0 } else { 0.0 };
    }
    let pr = Projector::new(w.clone(), d, cube.center, cube.side / 2.0, Conditioning::Pseudo)?;
    let poly = pr.project_with(|m| h.get(m));
    let ps = poly.sample(&h.grid, &h.window);
    for ((hv, pv), wv) in h.values.iter_mut().zip(&ps.values).zip(&w.values) {
        *hv -= pv * wv;
    }
    if h.max_abs() <= NOISE_RATIO * before {
        h.values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

fn iter_field(lf: &LocalField) -> Vec<([usize; 2], f64)> {
    let mut out = Vec::new();
    lf.for_each(|m, v| {
        if v != 0.0 {
            out.push((m, v))
        }
    });
    out
}

/// Heights `2^k` spanned by the positive values of `gmax`:
/// `(floor(log2 min+) - 1, ceil(log2 max))`, or `None` for zero input.
pub fn level_range(gmax: &GridFunction) -> Option<(i32, i32)> {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for &v in gmax.values() {
        if v > 0.0 {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if max == 0.0 {
        return None;
    }
    let hi = max.log2().ceil() as i32;
    let lo = (min.log2().floor() as i32 - 1).max(hi - MAX_LEVELS as i32);
    Some((lo, hi))
}

/// Atomic decomposition from the level sets `{gmax > 2^k}`.
///
/// The bottom level is the whole box, so that its good part vanishes, and
/// the top level is empty, so that its good part is `f`; the differences of
/// consecutive good parts split into the pieces `h_i^k`.
pub fn atomize(f: &GridFunction, gmax: &GridFunction, p: &ExponentField, params: AtomizeParams) -> Result<Atomization> {
    f.grid().check_same(gmax.grid())?;
    f.grid().check_same(p.grid())?;
    if !(params.q >= 1.0) {
        return Err(Error::InvalidInput("size exponent q must be at least 1".into()));
    }
    let required = atom_moment_degree(p);
    if params.d < required {
        return Err(Error::DegreeTooLow { degree: params.d, required });
    }
    let g = *f.grid();
    let empty = |range| Atomization {
        decomposition: AtomicDecomposition::new(g, Vec::new(), Vec::new(), Provenance::CalderonZygmund).unwrap(),
        records: Vec::new(),
        levels: Vec::new(),
        normalization: 0.0,
        k_range: range,
        reconstruction_error: 0.0,
        nested: true,
    };
    let Some((k_lo, k_hi)) = level_range(gmax) else {
        return Ok(empty((0, 0)));
    };
    let mut nested = true;
    let mut raw: Vec<Piece> = Vec::new();
    let mut levels = Vec::new();
    let mut prev_mask = level_mask(gmax, k_lo, k_lo);
    let mut lower = cz_from_mask(f, &prev_mask, 2f64.powi(k_lo), params.d, params.dilation)?;
    for k in k_lo..k_hi {
        let mask = level_mask(gmax, k + 1, k_lo);
        nested &= mask.iter().zip(&prev_mask).all(|(a, b)| !*a || *b);
        let upper = cz_from_mask(f, &mask, 2f64.powi(k + 1), params.d, params.dilation)?;
        let (pieces, diag) = level_pieces(f, &lower, &upper, k)?;
        raw.extend(pieces);
        levels.push(diag);
        lower = upper;
        prev_mask = mask;
    }
    let q = params.q;
    let c_norm = raw.iter().map(|r| size_ratio(&r.h, q, &r.cube) / 2f64.powi(r.level)).fold(0.0, f64::max);
    if c_norm == 0.0 {
        return Ok(empty((k_lo, k_hi)));
    }
    let mut atoms = Vec::with_capacity(raw.len());
    let mut coefficients = Vec::with_capacity(raw.len());
    let mut records = Vec::with_capacity(raw.len());
    for Piece { level, index, mut h, cube, case, side } in raw {
        let lambda = c_norm * 2f64.powi(level);
        h.values.iter_mut().for_each(|v| *v /= lambda);
        let atom = Atom { cube, samples: h, q, d: params.d };
        let report = validate_atom(&atom, p)?;
        if !report.pass {
            return Err(atom_failure(level, index, &report));
        }
        atoms.push(atom);
        coefficients.push(lambda);
        records.push(AtomRecord { level, index, case, whitney_side: side });
    }
    let decomposition = AtomicDecomposition::new(g, atoms, coefficients, Provenance::CalderonZygmund)?;
    let synth = crate::atoms::synthesize(&decomposition);
    let err = synth.sub(f)?.l2_norm();
    let fnorm = f.l2_norm();
    Ok(Atomization {
        decomposition,
        records,
        levels,
        normalization: c_norm,
        k_range: (k_lo, k_hi),
        reconstruction_error: if fnorm > 0.0 { err / fnorm } else { err },
        nested,
    })
}

fn atom_failure(k: i32, idx: usize, r: &AtomReport) -> Error {
    Error::ConstructionFailure(format!(
        "atom {idx} of level {k} fails validation: support violations {}, size ratio {:.6}, moment residual {:?}",
        r.support_violations, r.size_ratio, r.moment_residual
    ))
}

/// Result of truncating an atomization to finitely many terms plus a
/// remainder split over unit cubes.
#[derive(Clone, Debug)]
pub struct FiniteAtomization {
    pub decomposition: AtomicDecomposition,
    /// Truncation index `N`: terms with `|k| + i <= N` are kept.
    pub truncation: usize,
    pub kept: usize,
    pub remainder_pieces: usize,
    /// Remainder pieces whose coefficient had to exceed `eps / ||chi_Q||`.
    pub bumped: usize,
    /// `eps |Q0|^{1/q} / ||chi_Q0||` with `Q0` the box.
    pub threshold: f64,
    /// `||f - f_N||_q`.
    pub residual: f64,
    pub coefficient_norm: f64,
}

/// Finite decomposition from a full atomization.
pub fn finite_atomize(
    f: &GridFunction,
    full: &Atomization,
    p: &ExponentField,
    eps: f64,
) -> Result<FiniteAtomization> {
    let g = *f.grid();
    f.grid().check_same(p.grid())?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput("remainder budget must be positive".into()));
    }
    let q = full.decomposition.atoms.first().map(|a| a.q).unwrap_or(2.0);
    if !q.is_finite() {
        return Err(Error::InvalidInput("finite decompositions need a finite size exponent".into()));
    }
    let units = 2.0 * g.half_width();
    if (units - units.round()).abs() > 1e-12 || units < 1.0 {
        return Err(Error::InvalidInput("box side must be a whole number of units".into()));
    }
    let side = g.side();
    let mut boundary_mass = 0.0;
    for i in 0..g.len() {
        let m = g.multi_index(i);
        if (0..g.dim()).any(|d| m[d] == 0 || m[d] + 1 == side) {
            boundary_mass += f.values()[i].abs();
        }
    }
    if boundary_mass > 0.0 {
        return Err(Error::InvalidInput("function must vanish near the boundary of the box".into()));
    }
    let box_cube = Cube::from_cells(&g, &g.full_box());
    let (chi_box, box_measure) = luxemburg::chi_norm(&box_cube, p)?;
    let threshold = eps * box_measure.powf(1.0 / q) / chi_box;

    let dec = &full.decomposition;
    let mut order: Vec<usize> = (0..dec.len()).collect();
    let key = |t: usize| full.records[t].level.unsigned_abs() as usize + full.records[t].index;
    order.sort_by_key(|&t| (key(t), full.records[t].level, full.records[t].index));

    let mut residual = f.clone();
    let mut best = residual.lq_norm(q);
    let mut chosen: Option<(usize, usize, f64)> = if best < threshold { Some((0, 0, best)) } else { None };
    let mut pos = 0;
    while chosen.is_none() && pos < order.len() {
        let n_key = key(order[pos]);
        while pos < order.len() && key(order[pos]) == n_key {
            let t = order[pos];
            dec.atoms[t].samples.add_into(&mut residual, -dec.coefficients[t]);
            pos += 1;
        }
        let r = residual.lq_norm(q);
        best = best.min(r);
        if r < threshold {
            chosen = Some((n_key, pos, r));
        }
    }
    let Some((truncation, kept, res_norm)) = chosen else {
        return Err(Error::BudgetInfeasible { achievable: best, requested: threshold });
    };
    let mut atoms = Vec::with_capacity(kept);
    let mut coefficients = Vec::with_capacity(kept);
    for &t in &order[..kept] {
        atoms.push(dec.atoms[t].clone());
        coefficients.push(dec.coefficients[t]);
    }
    // The residual is recomputed from the kept terms in synthesis order.
    let kept_dec = AtomicDecomposition::new(g, atoms.clone(), coefficients.clone(), Provenance::Finite)?;
    let remainder = f.sub(&crate::atoms::synthesize(&kept_dec))?;
    let per_unit = (1.0 / g.spacing()).round() as usize;
    let tiles = side / per_unit;
    let mut pieces = 0;
    let mut bumped = 0;
    for ti in 0..tiles {
        for tj in 0..if g.dim() == 2 { tiles } else { 1 } {
            let lo = [ti * per_unit, tj * per_unit];
            let hi = [lo[0] + per_unit, if g.dim() == 2 { lo[1] + per_unit } else { 1 }];
            let cells = IndexBox::new(g.dim(), lo, hi);
            let piece = remainder.window(&cells);
            if piece.max_abs() == 0.0 {
                continue;
            }
            let cube = Cube::from_cells(&g, &cells);
            let (chi, measure) = luxemburg::chi_norm(&cube, p)?;
            let nominal = eps / chi;
            let needed = piece.lq_norm(q) / measure.powf(1.0 / q);
            let mu = if needed > nominal {
                bumped += 1;
                needed
            } else {
                nominal
            };
            let mut samples = piece;
            samples.values.iter_mut().for_each(|v| *v /= mu);
            let atom = Atom { cube, samples, q, d: full.decomposition.atoms.first().map(|a| a.d).unwrap_or(0) };
            let rep = check_atom(&atom);
            if !rep.pass {
                return Err(Error::ConstructionFailure(format!("remainder piece {pieces} is not an atom: {rep:?}")));
            }
            atoms.push(atom);
            coefficients.push(mu);
            pieces += 1;
        }
    }
    let decomposition = AtomicDecomposition::new(g, atoms, coefficients, Provenance::Finite)?;
    let coefficient_norm = crate::atoms::coefficient_norm(&decomposition, p, 1.0)?;
    Ok(FiniteAtomization {
        decomposition,
        truncation,
        kept,
        remainder_pieces: pieces,
        bumped,
        threshold,
        residual: res_norm,
        coefficient_norm,
    })
}
