//! Uniform lattices on `[-L, L]^n`, dyadic cubes, midpoint quadrature and
//! zero-extension convolution.
//!
//! Lattice points are cell centres `-L + (k + 1/2) h` with `h = 2^{-J}`.
//! Multi-dimensional data is stored row-major with the first coordinate
//! varying slowest.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, C64};
use crate::profile::Profile;

/// Kernels with at most this many taps are applied by direct summation.
const DIRECT_TAPS: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
    level: u32,
    side: usize,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, level: u32) -> Result<Grid> {
        if n != 1 && n != 2 {
            return Err(Error::InvalidGrid("dimension must be 1 or 2"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid("half-width must be positive"));
        }
        if level > 24 {
            return Err(Error::InvalidGrid("resolution level too large"));
        }
        let count = 2.0 * half_width * (1u64 << level) as f64;
        let rounded = count.round();
        if (count - rounded).abs() > 1e-9 * count.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidGrid("2L * 2^J must be a positive integer"));
        }
        Ok(Grid { n, half_width, level, side: rounded as usize })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (1u64 << self.level) as f64
    }

    /// Lattice points per coordinate direction.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    pub fn box_measure(&self) -> f64 {
        (2.0 * self.half_width).powi(self.n as i32)
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.spacing()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx / self.side, idx % self.side]
        }
    }

    pub fn flat_index(&self, m: [usize; 2]) -> usize {
        if self.n == 1 {
            m[0]
        } else {
            m[0] * self.side + m[1]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let m = self.multi_index(idx);
        if self.n == 1 {
            [self.coord(m[0]), 0.0]
        } else {
            [self.coord(m[0]), self.coord(m[1])]
        }
    }

    /// Cell containing coordinate `x` along one axis, if inside the box.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let k = ((x + self.half_width) / self.spacing()).floor();
        if k >= 0.0 && (k as usize) < self.side {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn refined(&self) -> Grid {
        Grid::new(self.n, self.half_width, self.level + 1).expect("refinement of a valid grid")
    }

    pub fn full_box(&self) -> IndexBox {
        IndexBox::new(self.n, [0, 0], [self.side, if self.n == 1 { 1 } else { self.side }])
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Rectangular block of lattice indices, `lo` inclusive and `hi` exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexBox {
    pub n: usize,
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl IndexBox {
    pub fn new(n: usize, lo: [usize; 2], hi: [usize; 2]) -> Self {
        let mut b = IndexBox { n, lo, hi };
        if n == 1 {
            b.lo[1] = 0;
            b.hi[1] = 1;
        }
        b
    }

    pub fn extent(&self, d: usize) -> usize {
        self.hi[d].saturating_sub(self.lo[d])
    }

    pub fn len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, m: [usize; 2]) -> bool {
        (0..self.n).all(|d| m[d] >= self.lo[d] && m[d] < self.hi[d])
    }

    pub fn intersect(&self, o: &IndexBox) -> IndexBox {
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for d in 0..2 {
            lo[d] = self.lo[d].max(o.lo[d]);
            hi[d] = self.hi[d].min(o.hi[d]).max(lo[d]);
        }
        IndexBox { n: self.n, lo, hi }
    }

    /// Smallest box containing both.
    pub fn hull(&self, o: &IndexBox) -> IndexBox {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for d in 0..2 {
            lo[d] = self.lo[d].min(o.lo[d]);
            hi[d] = self.hi[d].max(o.hi[d]);
        }
        IndexBox { n: self.n, lo, hi }
    }

    /// Visits multi-indices in row-major order.
    pub fn for_each(&self, mut f: impl FnMut([usize; 2])) {
        for i in self.lo[0]..self.hi[0] {
            for j in self.lo[1]..self.hi[1] {
                f([i, j]);
            }
        }
    }

    /// Position of a multi-index inside this box's own row-major storage.
    pub fn local_offset(&self, m: [usize; 2]) -> usize {
        (m[0] - self.lo[0]) * self.extent(1) + (m[1] - self.lo[1])
    }
}

/// Dyadic cube `2^{-j}(k + [0,1]^n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub n: usize,
    pub level: i32,
    pub k: [i64; 2],
}

impl DyadicCube {
    pub fn new(n: usize, level: i32, k: [i64; 2]) -> Self {
        let mut k = k;
        if n == 1 {
            k[1] = 0;
        }
        DyadicCube { n, level, k }
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [self.k[0] as f64 * s, if self.n == 2 { self.k[1] as f64 * s } else { 0.0 }]
    }

    pub fn to_cube(&self) -> Cube {
        let s = self.side();
        let c = self.corner();
        let mut center = [c[0] + s / 2.0, 0.0];
        if self.n == 2 {
            center[1] = c[1] + s / 2.0;
        }
        Cube::new(self.n, center, s)
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let mut out = Vec::with_capacity(1 << self.n);
        let ys: &[i64] = if self.n == 2 { &[0, 1] } else { &[0] };
        for dx in 0..2 {
            for &dy in ys {
                out.push(DyadicCube::new(
                    self.n,
                    self.level + 1,
                    [2 * self.k[0] + dx, 2 * self.k[1] + dy],
                ));
            }
        }
        out
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube::new(self.n, self.level - 1, [self.k[0].div_euclid(2), self.k[1].div_euclid(2)])
    }

    /// Lattice block covered by the cube; exact when the cube is aligned.
    pub fn cells(&self, grid: &Grid) -> IndexBox {
        self.to_cube().cells_centered(grid)
    }
}

/// Closed axis-parallel cube given by centre and side length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cube {
    pub n: usize,
    pub center: [f64; 2],
    pub side: f64,
}

impl Cube {
    pub fn new(n: usize, center: [f64; 2], side: f64) -> Self {
        let mut center = center;
        if n == 1 {
            center[1] = 0.0;
        }
        Cube { n, center, side }
    }

    pub fn measure(&self) -> f64 {
        self.side.powi(self.n as i32)
    }

    pub fn dilate(&self, factor: f64) -> Cube {
        Cube::new(self.n, self.center, self.side * factor)
    }

    pub fn lower(&self, d: usize) -> f64 {
        self.center[d] - self.side / 2.0
    }

    pub fn upper(&self, d: usize) -> f64 {
        self.center[d] + self.side / 2.0
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        (0..self.n).all(|d| (p[d] - self.center[d]).abs() <= self.side / 2.0 * (1.0 + 1e-12))
    }

    pub fn contains_cube(&self, o: &Cube) -> bool {
        (0..self.n).all(|d| {
            o.lower(d) >= self.lower(d) - 1e-12 * self.side.max(1.0)
                && o.upper(d) <= self.upper(d) + 1e-12 * self.side.max(1.0)
        })
    }

    /// Whether the closed cubes share at least one point.
    pub fn intersects(&self, o: &Cube) -> bool {
        (0..self.n).all(|d| (self.center[d] - o.center[d]).abs() <= (self.side + o.side) / 2.0)
    }

    /// Lattice cells whose centres lie in the closed cube.
    pub fn cells_centered(&self, grid: &Grid) -> IndexBox {
        let h = grid.spacing();
        let l = grid.half_width();
        let mut lo = [0usize; 2];
        let mut hi = [1usize; 2];
        for d in 0..self.n {
            let a = ((self.lower(d) + l) / h - 0.5 - 1e-9).ceil().max(0.0);
            let b = ((self.upper(d) + l) / h - 0.5 + 1e-9).floor() + 1.0;
            let b = b.min(grid.side() as f64).max(a);
            lo[d] = a as usize;
            hi[d] = b as usize;
        }
        IndexBox::new(self.n, lo, hi)
    }

    /// Lattice cells whose interior meets the cube (outward snap).
    pub fn cells_touching(&self, grid: &Grid) -> IndexBox {
        let h = grid.spacing();
        let l = grid.half_width();
        let mut lo = [0usize; 2];
        let mut hi = [1usize; 2];
        for d in 0..self.n {
            let a = ((self.lower(d) + l) / h + 1e-9).floor().max(0.0);
            let b = ((self.upper(d) + l) / h - 1e-9).ceil().min(grid.side() as f64).max(a);
            lo[d] = a as usize;
            hi[d] = b as usize;
        }
        IndexBox::new(self.n, lo, hi)
    }

    /// Cube formed by a block of lattice cells.
    pub fn from_cells(grid: &Grid, cells: &IndexBox) -> Cube {
        let h = grid.spacing();
        let l = grid.half_width();
        let mut center = [0.0; 2];
        let mut side: f64 = 0.0;
        for d in 0..grid.dim() {
            let a = -l + cells.lo[d] as f64 * h;
            let b = -l + cells.hi[d] as f64 * h;
            center[d] = (a + b) / 2.0;
            side = side.max(b - a);
        }
        Cube::new(grid.dim(), center, side)
    }
}

/// Real samples on every lattice point of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!("non-finite sample at index {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction { grid, values: vec![c; grid.len()] }
    }

    /// Samples a closed form at every lattice point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..grid.dim()])
            })
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn at(&self, m: [usize; 2]) -> f64 {
        self.values[self.grid.flat_index(m)]
    }

    /// Midpoint quadrature `sum f * h^n`.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
        (s * self.grid.cell_measure()).powf(1.0 / q)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lq_norm(2.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction { grid: self.grid, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, o: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&o.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&o.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, o: &GridFunction) -> Result<Self> {
        self.zip_with(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &GridFunction) -> Result<Self> {
        self.zip_with(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &GridFunction) -> Result<Self> {
        self.zip_with(o, |a, b| a * b)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, o: &GridFunction) -> Result<()> {
        self.grid.check_same(&o.grid)?;
        for (a, b) in self.values.iter_mut().zip(&o.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Lattice translation by whole cells with zero fill.
    pub fn translated(&self, shift: [i64; 2]) -> Self {
        let g = self.grid;
        let side = g.side() as i64;
        let mut out = vec![0.0; g.len()];
        g.full_box().for_each(|m| {
            let src0 = m[0] as i64 - shift[0];
            let src1 = if g.dim() == 2 { m[1] as i64 - shift[1] } else { 0 };
            let ok1 = g.dim() == 1 || (0..side).contains(&src1);
            if (0..side).contains(&src0) && ok1 {
                out[g.flat_index(m)] = self.values[g.flat_index([src0 as usize, src1 as usize])];
            }
        });
        GridFunction { grid: g, values: out }
    }

    /// Restriction to a block of cells.
    pub fn window(&self, b: &IndexBox) -> LocalField {
        let mut lf = LocalField::zeros(self.grid, *b);
        b.for_each(|m| {
            let off = b.local_offset(m);
            lf.values[off] = self.values[self.grid.flat_index(m)];
        });
        lf
    }

    /// Bounding block of the nonzero samples, if any.
    pub fn support_box(&self) -> Option<IndexBox> {
        let g = self.grid;
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        let mut any = false;
        for (i, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                any = true;
                let m = g.multi_index(i);
                for d in 0..2 {
                    lo[d] = lo[d].min(m[d]);
                    hi[d] = hi[d].max(m[d] + 1);
                }
            }
        }
        any.then(|| IndexBox::new(g.dim(), lo, hi))
    }
}

/// Samples on a rectangular block of a grid; zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalField {
    pub grid: Grid,
    pub window: IndexBox,
    pub values: Vec<f64>,
}

impl LocalField {
    pub fn zeros(grid: Grid, window: IndexBox) -> Self {
        LocalField { grid, window, values: vec![0.0; window.len()] }
    }

    pub fn get(&self, m: [usize; 2]) -> f64 {
        if self.window.contains(m) {
            self.values[self.window.local_offset(m)]
        } else {
            0.0
        }
    }

    pub fn get_mut(&mut self, m: [usize; 2]) -> &mut f64 {
        let off = self.window.local_offset(m);
        &mut self.values[off]
    }

    /// Visits `(multi-index, value)` pairs over the window.
    pub fn for_each(&self, mut f: impl FnMut([usize; 2], f64)) {
        let w = self.window;
        let mut k = 0;
        w.for_each(|m| {
            f(m, self.values[k]);
            k += 1;
        });
    }

    pub fn add_into(&self, target: &mut GridFunction, scale: f64) {
        let g = self.grid;
        let vals = target.values_mut();
        self.for_each(|m, v| vals[g.flat_index(m)] += scale * v);
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let mut out = GridFunction::zeros(self.grid);
        self.add_into(&mut out, 1.0);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
        (s * self.grid.cell_measure()).powf(1.0 / q)
    }

    /// Bounding block of the nonzero samples.
    pub fn support_box(&self) -> Option<IndexBox> {
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        let mut any = false;
        self.for_each(|m, v| {
            if v != 0.0 {
                any = true;
                for d in 0..2 {
                    lo[d] = lo[d].min(m[d]);
                    hi[d] = hi[d].max(m[d] + 1);
                }
            }
        });
        any.then(|| IndexBox::new(self.grid.dim(), lo, hi))
    }
}

/// Convolution weights on the lattice offsets `m` with `|m_d| <= radius`,
/// already multiplied by the cell measure.
#[derive(Clone, Debug)]
pub struct OffsetKernel {
    pub n: usize,
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl OffsetKernel {
    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weight(&self, m: [i64; 2]) -> f64 {
        let r = self.radius as i64;
        if m[0].abs() > r || (self.n == 2 && m[1].abs() > r) {
            return 0.0;
        }
        let w = self.width();
        let i = (m[0] + r) as usize;
        if self.n == 1 {
            self.weights[i]
        } else {
            self.weights[i * w + (m[1] + r) as usize]
        }
    }

    /// Samples `psi_t(x) = t^{-n} psi(x/t)` on lattice offsets.
    pub fn scaled(grid: &Grid, psi: &dyn Profile, t: f64) -> Result<OffsetKernel> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput("scale must be positive".to_string()));
        }
        let h = grid.spacing();
        let reach = t * psi.support_radius();
        let samples = 2.0 * reach / h;
        if samples < 4.0 {
            return Err(Error::UnderResolved { samples });
        }
        let n = grid.dim();
        let radius = ((reach / h).floor() as usize).min(grid.side());
        let width = 2 * radius + 1;
        let norm = t.powi(-(n as i32)) * grid.cell_measure();
        let mut weights = vec![0.0; width.pow(n as u32)];
        for (idx, w) in weights.iter_mut().enumerate() {
            let (i, j) = if n == 1 { (idx, radius) } else { (idx / width, idx % width) };
            let x = [(i as f64 - radius as f64) * h / t, (j as f64 - radius as f64) * h / t];
            *w = norm * psi.eval(&x[..n]);
        }
        Ok(OffsetKernel { n, radius, weights })
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Applies many kernels to one function, caching its padded spectra.
pub struct Convolver<'a> {
    f: &'a GridFunction,
    spectra: BTreeMap<usize, Vec<C64>>,
}

impl<'a> Convolver<'a> {
    pub fn new(f: &'a GridFunction) -> Self {
        Convolver { f, spectra: BTreeMap::new() }
    }

    /// `out[x] = sum_m w[m] f[x - m]` with zero extension.
    pub fn apply(&mut self, k: &OffsetKernel) -> GridFunction {
        if k.weights.len() <= DIRECT_TAPS {
            return convolve_direct(self.f, k);
        }
        let g = *self.f.grid();
        let n = g.dim();
        let side = g.side();
        let pad = (side + k.radius + 1).next_power_of_two();
        let f_hat = self.spectra.entry(pad).or_insert_with(|| {
            let mut buf = vec![C64::ZERO; pad.pow(n as u32)];
            g.full_box().for_each(|m| {
                let p = if n == 1 { m[0] } else { m[0] * pad + m[1] };
                buf[p] = C64::new(self.f.values()[g.flat_index(m)], 0.0);
            });
            fft_nd(&mut buf, n, pad, false);
            buf
        });
        let mut kbuf = vec![C64::ZERO; pad.pow(n as u32)];
        let r = k.radius as i64;
        let w = k.width();
        for (idx, wt) in k.weights.iter().enumerate() {
            let (a, b) = if n == 1 { (idx as i64 - r, 0) } else { ((idx / w) as i64 - r, (idx % w) as i64 - r) };
            let pa = a.rem_euclid(pad as i64) as usize;
            let pb = b.rem_euclid(pad as i64) as usize;
            let p = if n == 1 { pa } else { pa * pad + pb };
            kbuf[p] = C64::new(*wt, 0.0);
        }
        fft_nd(&mut kbuf, n, pad, false);
        for (kv, fv) in kbuf.iter_mut().zip(f_hat.iter()) {
            *kv = *kv * *fv;
        }
        fft_nd(&mut kbuf, n, pad, true);
        let mut out = vec![0.0; g.len()];
        g.full_box().for_each(|m| {
            let p = if n == 1 { m[0] } else { m[0] * pad + m[1] };
            out[g.flat_index(m)] = kbuf[p].re;
        });
        GridFunction::from_raw(g, out)
    }
}

/// Direct O(N * taps) zero-extension convolution.
pub fn convolve_direct(f: &GridFunction, k: &OffsetKernel) -> GridFunction {
    let g = *f.grid();
    let side = g.side() as i64;
    let r = k.radius as i64;
    let vals = f.values();
    let mut out = vec![0.0; g.len()];
    if g.dim() == 1 {
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let lo = (-r).max(x as i64 - side + 1);
            let hi = r.min(x as i64);
            for m in lo..=hi {
                acc += k.weights[(m + r) as usize] * vals[(x as i64 - m) as usize];
            }
            *o = acc;
        }
    } else {
        let w = k.width();
        g.full_box().for_each(|p| {
            let mut acc = 0.0;
            for a in (-r).max(p[0] as i64 - side + 1)..=r.min(p[0] as i64) {
                let row = (p[0] as i64 - a) as usize * g.side();
                let krow = (a + r) as usize * w;
                for b in (-r).max(p[1] as i64 - side + 1)..=r.min(p[1] as i64) {
                    acc += k.weights[krow + (b + r) as usize] * vals[row + (p[1] as i64 - b) as usize];
                }
            }
            out[g.flat_index(p)] = acc;
        });
    }
    GridFunction::from_raw(g, out)
}

/// `psi_t * f` with `psi_t(x) = t^{-n} psi(x / t)`, zero extension outside
/// the box.
pub fn convolve_scaled(f: &GridFunction, psi: &dyn Profile, t: f64) -> Result<GridFunction> {
    let k = OffsetKernel::scaled(f.grid(), psi, t)?;
    Ok(Convolver::new(f).apply(&k))
}
