//! Dual-space seminorms of `h^{p(.)}`: the local Campanato, Lipschitz and
//! Carleson measure norms, the Campanato type norms over cube families, and
//! the pairing bound against finite atomic decompositions.
//!
//! Suprema over all cubes are replaced by suprema over an enumeration:
//! lattice-dyadic blocks of `2^s` cells anchored at the box corner, with
//! optional half-shifted copies, from single cells up to side two.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::atoms::{synthesize, AtomicDecomposition};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{Cube, Grid, GridFunction, IndexBox};
use crate::littlewood_paley::FilterBank;
use crate::luxemburg::{self, chi_norm_cells};
use crate::poly::project_on_cube;
use crate::stats;

/// A cube of the enumeration with its cells and `||chi_Q||`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableCube {
    pub cube: Cube,
    pub cells: IndexBox,
    pub chi: f64,
    /// Measure of the cell block.
    pub measure: f64,
}

impl TableCube {
    pub fn new(cube: Cube, p: &ExponentField) -> Self {
        let g = p.grid();
        let cells = cube.cells_centered(g);
        TableCube { cube, cells, chi: chi_norm_cells(p, &cells), measure: cells.len() as f64 * g.cell_measure() }
    }

    pub fn is_small(&self) -> bool {
        self.cube.measure() < 1.0
    }
}

/// Enumerated cubes with precomputed indicator norms.
#[derive(Clone, Debug)]
pub struct CubeTable {
    pub grid: Grid,
    pub cubes: Vec<TableCube>,
}

/// Lattice-dyadic blocks inside the box, sides from one cell up to
/// `min(2, 2L)`, plus copies shifted by half a side when `shifted`.
pub fn enumerate_cubes(grid: &Grid, shifted: bool) -> Vec<(Cube, IndexBox)> {
    let n = grid.dim();
    let side = grid.side();
    let h = grid.spacing();
    let mut out = Vec::new();
    let mut s = 1usize;
    while s <= side && s as f64 * h <= 2.0 + 1e-12 {
        let mut offsets = vec![0usize];
        if shifted && s >= 2 {
            offsets.push(s / 2);
        }
        for &off in &offsets {
            let mut a = off;
            while a + s <= side {
                let mut b = off;
                loop {
                    if n == 2 && b + s > side {
                        break;
                    }
                    let lo = [a, if n == 2 { b } else { 0 }];
                    let hi = [a + s, if n == 2 { b + s } else { 1 }];
                    let cells = IndexBox::new(n, lo, hi);
                    out.push((Cube::from_cells(grid, &cells), cells));
                    if n == 1 {
                        break;
                    }
                    b += s;
                }
                a += s;
            }
        }
        s *= 2;
    }
    out
}

impl CubeTable {
    pub fn dyadic(p: &ExponentField, shifted: bool) -> Self {
        let g = *p.grid();
        let cubes = enumerate_cubes(&g, shifted)
            .into_iter()
            .map(|(cube, cells)| TableCube {
                cube,
                cells,
                chi: chi_norm_cells(p, &cells),
                measure: cells.len() as f64 * g.cell_measure(),
            })
            .collect();
        CubeTable { grid: g, cubes }
    }

    pub fn with_cubes(p: &ExponentField, cubes: &[Cube]) -> Self {
        CubeTable { grid: *p.grid(), cubes: cubes.iter().map(|c| TableCube::new(*c, p)).collect() }
    }

    pub fn extend(&mut self, p: &ExponentField, cubes: &[Cube]) {
        self.cubes.extend(cubes.iter().map(|c| TableCube::new(*c, p)));
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualNormResult {
    pub value: f64,
    pub small: f64,
    pub large: f64,
    pub small_argmax: Option<Cube>,
    pub large_argmax: Option<Cube>,
    /// Cubes too small to carry the polynomial fit.
    pub skipped: usize,
    pub cubes: usize,
}

fn conjugate_exponent(q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidInput("q must lie in (1, inf)".into()));
    }
    Ok(q / (q - 1.0))
}

fn require_small_exponent(p: &ExponentField) -> Result<()> {
    if p.p_plus > 1.0 {
        return Err(Error::Regime(alloc::format!(
            "p_plus = {} exceeds 1; use the Campanato type norm",
            p.p_plus
        )));
    }
    Ok(())
}

/// `(avg_Q |v|^{q'})^{1/q'}` over the cells of the block.
fn block_average(cells: &IndexBox, qd: f64, v: impl Fn([usize; 2]) -> f64) -> f64 {
    let mut acc = 0.0;
    cells.for_each(|m| acc += v(m).abs().powf(qd));
    (acc / cells.len() as f64).powf(1.0 / qd)
}

/// Oscillation term of one cube, `None` when the fit is degenerate.
fn oscillation_term(g: &GridFunction, c: &TableCube, qd: f64, d: usize) -> Option<f64> {
    let pr = project_on_cube(g, &c.cube, d).ok()?;
    let grid = *g.grid();
    let pv = pr.poly.sample(&grid, &c.cells);
    Some(block_average(&c.cells, qd, |m| g.at(m) - pv.values[c.cells.local_offset(m)]))
}

fn size_term(g: &GridFunction, c: &TableCube, qd: f64) -> f64 {
    block_average(&c.cells, qd, |m| g.at(m))
}

/// Per-cube integrand `(|Q|/||chi_Q||) (avg_Q |g - P_Q g|^{q'})^{1/q'}` for
/// small cubes and the same with `g` for large cubes.
pub fn bmo_cube_term(g: &GridFunction, c: &TableCube, q: f64, d: usize) -> Result<Option<f64>> {
    let qd = conjugate_exponent(q)?;
    let inner = if c.is_small() { oscillation_term(g, c, qd, d) } else { Some(size_term(g, c, qd)) };
    Ok(inner.map(|v| c.measure / c.chi * v))
}

struct TwoRegime {
    res: DualNormResult,
}

impl TwoRegime {
    fn new(cubes: usize) -> Self {
        TwoRegime {
            res: DualNormResult {
                value: 0.0,
                small: 0.0,
                large: 0.0,
                small_argmax: None,
                large_argmax: None,
                skipped: 0,
                cubes,
            },
        }
    }

    fn offer(&mut self, c: &TableCube, v: Option<f64>) {
        let Some(v) = v else {
            self.res.skipped += 1;
            return;
        };
        let (best, arg) = if c.is_small() {
            (&mut self.res.small, &mut self.res.small_argmax)
        } else {
            (&mut self.res.large, &mut self.res.large_argmax)
        };
        if v > *best || arg.is_none() {
            *best = best.max(v);
            if v >= *best {
                *arg = Some(c.cube);
            }
        }
    }

    fn finish(mut self) -> DualNormResult {
        self.res.value = self.res.small + self.res.large;
        self.res
    }
}

pub fn bmo_norm(g: &GridFunction, p: &ExponentField, q: f64, d: usize, table: &CubeTable) -> Result<DualNormResult> {
    require_small_exponent(p)?;
    g.grid().check_same(p.grid())?;
    let qd = conjugate_exponent(q)?;
    let mut acc = TwoRegime::new(table.cubes.len());
    for c in &table.cubes {
        let inner = if c.is_small() { oscillation_term(g, c, qd, d) } else { Some(size_term(g, c, qd)) };
        acc.offer(c, inner.map(|v| c.measure / c.chi * v));
    }
    Ok(acc.finish())
}

pub fn lip_norm(g: &GridFunction, p: &ExponentField, table: &CubeTable) -> Result<DualNormResult> {
    require_small_exponent(p)?;
    g.grid().check_same(p.grid())?;
    let mut acc = TwoRegime::new(table.cubes.len());
    for c in &table.cubes {
        let (mut lo, mut hi, mut sup) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        c.cells.for_each(|m| {
            let v = g.at(m);
            lo = lo.min(v);
            hi = hi.max(v);
            sup = sup.max(v.abs());
        });
        let inner = if c.is_small() { hi - lo } else { sup };
        acc.offer(c, Some(c.measure / c.chi * inner));
    }
    Ok(acc.finish())
}

/// Energies `|Q| |phi_j * g(z_Q)|^2` of the absolute dyadic cubes at levels
/// `0..=J_max` lying in the box, keyed by `(j, k)`.
fn cube_energies(g: &GridFunction, bank: &FilterBank) -> Result<Vec<BTreeMap<[i64; 2], f64>>> {
    let grid = *g.grid();
    let n = grid.dim();
    let levels = bank.filter_all(g)?;
    let l = grid.half_width();
    let h = grid.spacing();
    let mut out = Vec::with_capacity(levels.len());
    for (j, v) in levels.iter().enumerate() {
        let s = 2f64.powi(-(j as i32));
        let k_lo = (-l / s - 1e-9).ceil() as i64;
        let k_hi = (l / s + 1e-9).floor() as i64;
        let mut map = BTreeMap::new();
        let kys: Vec<i64> = if n == 2 { (k_lo..k_hi).collect() } else { vec![0] };
        for kx in k_lo..k_hi {
            for &ky in &kys {
                let mut m = [0usize; 2];
                m[0] = ((kx as f64 * s + l) / h).round() as usize;
                if n == 2 {
                    m[1] = ((ky as f64 * s + l) / h).round() as usize;
                }
                let val = v.at(m);
                map.insert([kx, ky], s.powi(n as i32) * val * val);
            }
        }
        out.push(map);
    }
    Ok(out)
}

/// `sup_P (|P| / ||chi_P||^2 sum_{Q subset P} |Q|^{-1} |<g, psi_Q>|^2 |Q|)^{1/2}`
/// over absolute dyadic `P` of side at most one, with
/// `<g, psi_Q> = |Q|^{1/2} (phi_j * g)(z_Q)` from the filter bank.
pub fn cmo_norm(g: &GridFunction, p: &ExponentField, bank: &FilterBank) -> Result<DualNormResult> {
    require_small_exponent(p)?;
    g.grid().check_same(p.grid())?;
    let grid = *g.grid();
    let n = grid.dim();
    let energies = cube_energies(g, bank)?;
    let mut acc = energies.clone();
    for j in (0..acc.len().saturating_sub(1)).rev() {
        let (upper, lower) = acc.split_at_mut(j + 1);
        for (k, v) in upper[j].iter_mut() {
            let ys: &[i64] = if n == 2 { &[0, 1] } else { &[0] };
            for dx in 0..2 {
                for &dy in ys {
                    let child = [2 * k[0] + dx, if n == 2 { 2 * k[1] + dy } else { 0 }];
                    *v += lower[0].get(&child).copied().unwrap_or(0.0);
                }
            }
        }
    }
    let mut best = 0.0f64;
    let mut arg = None;
    let mut count = 0;
    for (j, level) in acc.iter().enumerate() {
        let s = 2f64.powi(-(j as i32));
        for (k, v) in level {
            let corner = [k[0] as f64 * s, k[1] as f64 * s];
            let cube = Cube::new(n, [corner[0] + s / 2.0, corner[1] + s / 2.0], s);
            let cells = cube.cells_centered(&grid);
            let chi = chi_norm_cells(p, &cells);
            let val = (cube.measure() * v / (chi * chi)).sqrt();
            count += 1;
            if val > best || arg.is_none() {
                best = best.max(val);
                arg = Some(cube);
            }
        }
    }
    Ok(DualNormResult {
        value: best,
        small: best,
        large: 0.0,
        small_argmax: arg,
        large_argmax: None,
        skipped: 0,
        cubes: count,
    })
}

/// Finitely many cubes with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeFamily {
    pub cubes: Vec<Cube>,
    pub weights: Vec<f64>,
}

/// Local form with separate small- and large-cube suprema, or the global
/// form where every cube contributes its oscillation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TildeMode {
    Local,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TildeResult {
    pub value: f64,
    pub small: f64,
    pub large: f64,
    /// Index of the maximising family in each regime.
    pub small_argmax: Option<usize>,
    pub large_argmax: Option<usize>,
}

/// `||sum lambda_i chi_Qi||^{-1} sum_j lambda_j |Q_j| term_j` for one family.
fn family_score(
    g: &GridFunction,
    p: &ExponentField,
    members: &[(TableCube, f64)],
    qd: f64,
    d: usize,
    oscillation: bool,
) -> Result<Option<f64>> {
    let grid = *p.grid();
    let mut sum = GridFunction::zeros(grid);
    let vals = sum.values_mut();
    let mut num = 0.0;
    let mut any = false;
    for (c, w) in members {
        if *w == 0.0 {
            continue;
        }
        let term = if oscillation { oscillation_term(g, c, qd, d) } else { Some(size_term(g, c, qd)) };
        let Some(term) = term else { continue };
        any = true;
        num += w * c.measure * term;
        c.cells.for_each(|m| vals[grid.flat_index(m)] += w);
    }
    if !any {
        return Ok(None);
    }
    let den = luxemburg::norm(&sum, p)?;
    Ok((den > 0.0).then(|| num / den))
}

/// Lower-bound estimate of the Campanato type norm over the given families.
pub fn tilde_bmo_norm(
    g: &GridFunction,
    p: &ExponentField,
    q: f64,
    d: usize,
    families: &[CubeFamily],
    mode: TildeMode,
) -> Result<TildeResult> {
    g.grid().check_same(p.grid())?;
    let qd = conjugate_exponent(q)?;
    let mut res = TildeResult { value: 0.0, small: 0.0, large: 0.0, small_argmax: None, large_argmax: None };
    for (fi, fam) in families.iter().enumerate() {
        if fam.cubes.len() != fam.weights.len() || fam.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("cube family needs one nonnegative weight per cube".into()));
        }
        let members: Vec<(TableCube, f64)> =
            fam.cubes.iter().zip(&fam.weights).map(|(c, w)| (TableCube::new(*c, p), *w)).collect();
        let total: f64 = members.iter().map(|(c, w)| c.chi * w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput(alloc::format!("cube family {fi} is degenerate")));
        }
        match mode {
            TildeMode::Global => {
                if let Some(v) = family_score(g, p, &members, qd, d, true)? {
                    if v > res.small || res.small_argmax.is_none() {
                        res.small = res.small.max(v);
                        res.small_argmax = Some(fi);
                    }
                }
            }
            TildeMode::Local => {
                let (small, large): (Vec<_>, Vec<_>) = members.into_iter().partition(|(c, _)| c.is_small());
                if let Some(v) = family_score(g, p, &small, qd, d, true)? {
                    if v > res.small || res.small_argmax.is_none() {
                        res.small = res.small.max(v);
                        res.small_argmax = Some(fi);
                    }
                }
                if let Some(v) = family_score(g, p, &large, qd, d, false)? {
                    if v > res.large || res.large_argmax.is_none() {
                        res.large = res.large.max(v);
                        res.large_argmax = Some(fi);
                    }
                }
            }
        }
    }
    res.value = res.small + res.large;
    Ok(res)
}

/// Families built from the best single-cube scorers of a table: each of the
/// top `k` cubes alone, the union of the top `k` in each regime with weights
/// `1/||chi_Q||`, and `random` seeded random subsets with random weights.
pub fn generate_families(
    g: &GridFunction,
    table: &CubeTable,
    q: f64,
    d: usize,
    k: usize,
    random: usize,
    seed: u64,
) -> Result<Vec<CubeFamily>> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    for c in &table.cubes {
        if let Some(v) = bmo_cube_term(g, c, q, d)? {
            if c.is_small() {
                small.push((v, *c));
            } else {
                large.push((v, *c));
            }
        }
    }
    let mut fams = Vec::new();
    let mut pool = Vec::new();
    for list in [&mut small, &mut large] {
        list.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top: Vec<TableCube> = list.iter().take(k).map(|(_, c)| *c).collect();
        for c in &top {
            fams.push(CubeFamily { cubes: vec![c.cube], weights: vec![1.0] });
        }
        if top.len() > 1 {
            fams.push(CubeFamily {
                cubes: top.iter().map(|c| c.cube).collect(),
                weights: top.iter().map(|c| 1.0 / c.chi).collect(),
            });
        }
        pool.extend(list.iter().take(2 * k).map(|(_, c)| *c));
    }
    let mut rng = stats::rng(seed);
    for _ in 0..random {
        if pool.is_empty() {
            break;
        }
        let size = rng.gen_range(1..=pool.len().min(8));
        let mut chosen = pool.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(size);
        let weights = chosen.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        fams.push(CubeFamily { cubes: chosen.iter().map(|c| c.cube).collect(), weights });
    }
    Ok(fams)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingReport {
    pub pairing: f64,
    pub bound: f64,
    /// `|pairing| / bound`, zero when both vanish.
    pub ratio: f64,
    /// `sum lambda_j ||chi_Qj||`.
    pub kappa: f64,
    pub bmo: f64,
}

/// `int (sum lambda_j a_j) g` against `(sum lambda_j ||chi_Qj||) ||g||_bmo`,
/// with the Campanato norm taken over the table extended by the atoms' cubes.
pub fn duality_pairing(
    dec: &AtomicDecomposition,
    g: &GridFunction,
    p: &ExponentField,
    q: f64,
    d: usize,
    table: &CubeTable,
) -> Result<PairingReport> {
    g.grid().check_same(&dec.grid)?;
    let f = synthesize(dec);
    let pairing = f.mul(g)?.integrate();
    let atom_cubes: Vec<Cube> = dec.atoms.iter().map(|a| a.cube).collect();
    let mut t = table.clone();
    t.extend(p, &atom_cubes);
    let bmo = bmo_norm(g, p, q, d, &t)?.value;
    let kappa: f64 = dec
        .coefficients
        .iter()
        .zip(&atom_cubes)
        .map(|(l, c)| l * chi_norm_cells(p, &c.cells_centered(p.grid())))
        .sum();
    let bound = kappa * bmo;
    let ratio = if bound > 0.0 {
        pairing.abs() / bound
    } else if pairing == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(PairingReport { pairing, bound, ratio, kappa, bmo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{build_exponent, ExponentSpec};

    fn setup() -> (Grid, ExponentField) {
        let g = Grid::new(1, 4.0, 5).unwrap();
        (g, build_exponent(&ExponentSpec::Constant(1.0), g).unwrap())
    }

    #[test]
    fn constants_have_only_large_terms() {
        let (g, p) = setup();
        let t = CubeTable::dyadic(&p, true);
        let c = GridFunction::constant(g, 3.0);
        let b = bmo_norm(&c, &p, 2.0, 1, &t).unwrap();
        assert!(b.small < 1e-12 && (b.large - 3.0).abs() < 1e-12, "{b:?}");
        let l = lip_norm(&c, &p, &t).unwrap();
        assert!(l.small == 0.0 && (l.large - 3.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_oscillation_vanishes() {
        let (g, p) = setup();
        let t = CubeTable::dyadic(&p, true);
        let f = GridFunction::from_fn(g, |x| 1.0 + x[0] - 0.5 * x[0] * x[0]);
        let b = bmo_norm(&f, &p, 2.0, 2, &t).unwrap();
        assert!(b.small < 1e-9, "{b:?}");
        assert!(b.skipped > 0);
    }

    #[test]
    fn regime_error_above_one() {
        let (g, _) = setup();
        let p = build_exponent(&ExponentSpec::Constant(1.5), g).unwrap();
        let t = CubeTable::dyadic(&p, false);
        assert!(matches!(bmo_norm(&GridFunction::zeros(g), &p, 2.0, 0, &t), Err(Error::Regime(_))));
    }

    #[test]
    fn single_cube_family_matches_cube_term() {
        let (g, p) = setup();
        let f = GridFunction::from_fn(g, |x| (2.0 * x[0]).sin());
        let cube = Cube::new(1, [0.25, 0.0], 0.5);
        let fam = CubeFamily { cubes: vec![cube], weights: vec![2.0] };
        let r = tilde_bmo_norm(&f, &p, 2.0, 1, &[fam], TildeMode::Local).unwrap();
        let term = bmo_cube_term(&f, &TableCube::new(cube, &p), 2.0, 1).unwrap().unwrap();
        assert!((r.value - term).abs() < 1e-8 * term.max(1.0), "{} vs {term}", r.value);
    }

    #[test]
    fn cmo_of_zero_and_scaling() {
        let (g, p) = setup();
        let bank = crate::littlewood_paley::build_filter_bank(g, 4).unwrap();
        assert_eq!(cmo_norm(&GridFunction::zeros(g), &p, &bank).unwrap().value, 0.0);
        let f = GridFunction::from_fn(g, |x| (-(x[0] * x[0])).exp() * (3.0 * x[0]).sin());
        let a = cmo_norm(&f, &p, &bank).unwrap().value;
        let b = cmo_norm(&f.scaled(-2.0), &p, &bank).unwrap().value;
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }
}
