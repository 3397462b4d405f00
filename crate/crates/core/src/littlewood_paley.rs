//! Exact-unity Littlewood–Paley filter bank, local square functions and the
//! `h^{p(.)}` norm.
//!
//! Frequencies are in cycles per unit length. With the window
//! `theta(r) = exp(1/((r - 1/2)(r - 2)))` on `(1/2, 2)` and
//! `S(r) = sum_k theta(2^-k r)^2` the filters are
//!
//! * `phi_hat(xi)^2 = theta(|xi|)^2 / S(|xi|)`, supported in `1/2 < |xi| < 2`;
//! * `Phi_hat(xi)^2 = sum_{j <= 0} theta(2^-j |xi|)^2 / S(|xi|)`, with
//!   `Phi_hat(0) = 1`.
//!
//! Since `S` is dilation invariant the identity
//! `Phi_hat^2 + sum_{j=1}^{J_max} phi_hat(2^-j .)^2 = 1` holds for every
//! `|xi| <= 2^{J_max}` up to rounding. Convolutions are evaluated on a
//! zero-padded lattice twice the size of the box.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::fft::{fft_nd, signed_bin, C64};
use crate::grid::{Grid, GridFunction};
use crate::luxemburg;

/// Tolerance of the unity identity.
pub const UNITY_TOL: f64 = 1e-12;

pub fn theta(r: f64) -> f64 {
    if r > 0.5 && r < 2.0 {
        (1.0 / ((r - 0.5) * (r - 2.0))).exp()
    } else {
        0.0
    }
}

/// `sum_k theta(2^-k r)^2` for `r > 0`.
fn dilation_sum(r: f64) -> f64 {
    // bring r into [1, 2) and sum the at most three contributing octaves
    let k = r.log2().floor();
    let base = r * 2f64.powf(-k);
    theta(base * 0.5).powi(2) + theta(base).powi(2) + theta(base * 2.0).powi(2)
}

/// `|phi_hat(xi)|^2` as a function of `r = |xi|`.
pub fn phi_hat_sq(r: f64) -> f64 {
    let t = theta(r);
    if t == 0.0 {
        0.0
    } else {
        t * t / dilation_sum(r)
    }
}

/// `|Phi_hat(xi)|^2` as a function of `r = |xi|`.
pub fn big_phi_hat_sq(r: f64) -> f64 {
    if r <= 0.5 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let s = dilation_sum(r);
    let mut acc = 0.0;
    let mut j = 0;
    loop {
        let rr = r * 2f64.powi(j);
        if rr >= 2.0 {
            break;
        }
        acc += theta(rr).powi(2);
        j += 1;
    }
    acc / s
}

#[derive(Clone, Debug)]
pub struct FilterBank {
    grid: Grid,
    pub j_max: u32,
    pad: usize,
    /// Per level `j = 0..=j_max`, the nonnegative multipliers on the padded
    /// frequency lattice; level 0 is `Phi_hat`.
    multipliers: Vec<Vec<f64>>,
    pub unity_residual: f64,
}

impl FilterBank {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn padded_side(&self) -> usize {
        self.pad
    }

    pub fn multiplier(&self, j: usize) -> &[f64] {
        &self.multipliers[j]
    }

    /// Radial frequency of a padded bin.
    pub fn frequency(&self, bin: usize) -> f64 {
        let n = self.grid.dim();
        let step = 1.0 / (self.pad as f64 * self.grid.spacing());
        let (a, b) = if n == 1 { (bin, 0) } else { (bin / self.pad, bin % self.pad) };
        let fa = signed_bin(a, self.pad) as f64 * step;
        let fb = if n == 1 { 0.0 } else { signed_bin(b, self.pad) as f64 * step };
        (fa * fa + fb * fb).sqrt()
    }

    fn spectrum(&self, f: &GridFunction) -> Vec<C64> {
        let g = self.grid;
        let n = g.dim();
        let mut buf = vec![C64::ZERO; self.pad.pow(n as u32)];
        g.full_box().for_each(|m| {
            let p = if n == 1 { m[0] } else { m[0] * self.pad + m[1] };
            buf[p] = C64::new(f.at(m), 0.0);
        });
        fft_nd(&mut buf, n, self.pad, false);
        buf
    }

    fn inverse_padded(&self, spec: &[C64], mult: &[f64]) -> Vec<f64> {
        let n = self.grid.dim();
        let mut buf: Vec<C64> = spec.iter().zip(mult).map(|(s, m)| s.scale(*m)).collect();
        fft_nd(&mut buf, n, self.pad, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn restrict(&self, padded: &[f64]) -> GridFunction {
        let g = self.grid;
        let n = g.dim();
        let mut out = vec![0.0; g.len()];
        g.full_box().for_each(|m| {
            let p = if n == 1 { m[0] } else { m[0] * self.pad + m[1] };
            out[g.flat_index(m)] = padded[p];
        });
        GridFunction::from_raw(g, out)
    }

    /// `phi_j * f` on the box, `phi_0 = Phi`.
    pub fn filter(&self, f: &GridFunction, j: usize) -> Result<GridFunction> {
        f.grid().check_same(&self.grid)?;
        let spec = self.spectrum(f);
        Ok(self.restrict(&self.inverse_padded(&spec, &self.multipliers[j])))
    }

    /// All levels `phi_j * f`, `j = 0..=j_max`, on the box.
    pub fn filter_all(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        f.grid().check_same(&self.grid)?;
        let spec = self.spectrum(f);
        Ok(self.multipliers.iter().map(|m| self.restrict(&self.inverse_padded(&spec, m))).collect())
    }

    /// Energies `||phi_j * f||_2^2` on the padded lattice together with
    /// `||f_band||_2^2`, where `f_band` keeps frequencies `|xi| <= 2^{j_max}`.
    pub fn energies(&self, f: &GridFunction) -> Result<(Vec<f64>, f64)> {
        f.grid().check_same(&self.grid)?;
        let spec = self.spectrum(f);
        let cell = self.grid.cell_measure();
        let total_bins = spec.len() as f64;
        let limit = 2f64.powi(self.j_max as i32);
        let band: f64 = spec
            .iter()
            .enumerate()
            .filter(|(k, _)| self.frequency(*k) <= limit)
            .map(|(_, s)| s.norm_sqr())
            .sum::<f64>()
            * cell
            / total_bins;
        let levels = self
            .multipliers
            .iter()
            .map(|m| {
                let v = self.inverse_padded(&spec, m);
                v.iter().map(|x| x * x).sum::<f64>() * cell
            })
            .collect();
        Ok((levels, band))
    }
}

pub fn build_filter_bank(grid: Grid, j_max: u32) -> Result<FilterBank> {
    if j_max > grid.level() {
        return Err(Error::InvalidInput("J_max exceeds the grid level".into()));
    }
    let n = grid.dim();
    let pad = (2 * grid.side()).next_power_of_two();
    let mut bank = FilterBank { grid, j_max, pad, multipliers: Vec::new(), unity_residual: 0.0 };
    let bins = pad.pow(n as u32);
    let radii: Vec<f64> = (0..bins).map(|k| bank.frequency(k)).collect();
    let mut levels = Vec::with_capacity(j_max as usize + 1);
    levels.push(radii.iter().map(|r| big_phi_hat_sq(*r).sqrt()).collect::<Vec<f64>>());
    for j in 1..=j_max {
        let s = 2f64.powi(-(j as i32));
        levels.push(radii.iter().map(|r| phi_hat_sq(r * s).sqrt()).collect());
    }
    let limit = 2f64.powi(j_max as i32);
    let mut worst = 0.0f64;
    for (k, r) in radii.iter().enumerate() {
        if *r <= limit {
            let s: f64 = levels.iter().map(|l| l[k] * l[k]).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    if worst > UNITY_TOL {
        return Err(Error::ConstructionFailure(alloc::format!("unity residual {worst:e}")));
    }
    bank.multipliers = levels;
    bank.unity_residual = worst;
    Ok(bank)
}

fn root_sum_squares(levels: &[GridFunction]) -> GridFunction {
    let g = *levels[0].grid();
    let mut acc = vec![0.0; g.len()];
    for l in levels {
        for (a, v) in acc.iter_mut().zip(l.values()) {
            *a += v * v;
        }
    }
    GridFunction::from_raw(g, acc.into_iter().map(f64::sqrt).collect())
}

/// `(sum_{j=0}^{J_max} |phi_j * f|^2)^{1/2}`.
pub fn square_function(f: &GridFunction, bank: &FilterBank) -> Result<GridFunction> {
    Ok(root_sum_squares(&bank.filter_all(f)?))
}

/// Lattice index of the cell whose lower corner is the given coordinate.
fn corner_cell(grid: &Grid, corner: f64) -> usize {
    ((corner + grid.half_width()) / grid.spacing()).round() as usize
}

/// Piecewise-constant sampling of `|v|` on dyadic cubes of side `2^-j`, with
/// the value taken at the lattice point in the lower corner cell.
pub fn sample_at_corners(v: &GridFunction, j: usize) -> GridFunction {
    let g = *v.grid();
    let n = g.dim();
    let side = g.side();
    let width = (1usize << (g.level() as usize - j.min(g.level() as usize))).max(1);
    let mut out = vec![0.0; g.len()];
    g.full_box().for_each(|m| {
        let mut c = [0usize; 2];
        for d in 0..n {
            let x = g.coord(m[d]);
            let s = 2f64.powi(-(j as i32));
            let corner = (x / s).floor() * s;
            c[d] = corner_cell(&g, corner).min(side - 1);
            debug_assert!(m[d] >= c[d] && m[d] < c[d] + width);
        }
        out[g.flat_index(m)] = v.at(c).abs();
    });
    GridFunction::from_raw(g, out)
}

/// `(sum_j sum_k |phi_j * f(2^-j k)|^2 chi_{Q_jk})^{1/2}`.
pub fn discrete_square_function(f: &GridFunction, bank: &FilterBank) -> Result<GridFunction> {
    let levels = bank.filter_all(f)?;
    let sampled: Vec<GridFunction> = levels.iter().enumerate().map(|(j, l)| sample_at_corners(l, j)).collect();
    Ok(root_sum_squares(&sampled))
}

/// The two terms `||Phi * f||` and `||(sum_{j>=1} |phi_j * f|^2)^{1/2}||`.
pub fn hp_norm_parts(f: &GridFunction, p: &ExponentField, bank: &FilterBank) -> Result<(f64, f64)> {
    let levels = bank.filter_all(f)?;
    let first = luxemburg::norm(&levels[0], p)?;
    let second = if levels.len() > 1 { luxemburg::norm(&root_sum_squares(&levels[1..]), p)? } else { 0.0 };
    Ok((first, second))
}

pub fn hp_norm(f: &GridFunction, p: &ExponentField, bank: &FilterBank) -> Result<f64> {
    let (a, b) = hp_norm_parts(f, p, bank)?;
    Ok(a + b)
}
