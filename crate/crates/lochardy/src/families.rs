//! Deterministic seeded test families.
//!
//! Every member is multiplied by a smooth window equal to one on
//! `[-(L - 3/2), L - 3/2]^n` and vanishing outside `(-(L - 1/2), L - 1/2)^n`,
//! so members stay clear of the box boundary (the finite atomization needs a
//! vanishing boundary layer). Boxes with `L < 2` use proportionally narrower
//! margins.

use lochardy_core::atoms::{Atom, AtomicDecomposition, Provenance};
use lochardy_core::poly::project_on_cube;
use lochardy_core::profile::{Plateau, Profile};
use lochardy_core::stats::rng;
use lochardy_core::{Cube, Grid, GridFunction, IndexBox, LocalField};
use rand::Rng;
use std::f64::consts::PI;

/// Family names accepted by [`functions`].
pub const FAMILIES: [&str; 3] = ["standard20", "atoms", "random"];

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub name: String,
    pub f: GridFunction,
}

fn window(g: &Grid) -> Plateau {
    let l = g.half_width();
    let (inner, outer) = if l >= 2.0 { (l - 1.5, l - 0.5) } else { (0.25 * l, 0.75 * l) };
    Plateau { n: g.dim(), inner, outer }
}

fn windowed(g: Grid, f: impl Fn(&[f64]) -> f64) -> GridFunction {
    let w = window(&g);
    GridFunction::from_fn(g, |x| {
        let s = w.eval(x);
        if s == 0.0 {
            0.0
        } else {
            s * f(x)
        }
    })
}

/// Region where members are placed: centres within this half-width.
fn placement(g: &Grid) -> f64 {
    0.5 * window(g).inner.max(0.25)
}

fn random_point(r: &mut impl Rng, n: usize, a: f64) -> [f64; 2] {
    [r.gen_range(-a..a), if n == 2 { r.gen_range(-a..a) } else { 0.0 }]
}

fn dist2(x: &[f64], c: [f64; 2], n: usize) -> f64 {
    (0..n).map(|d| (x[d] - c[d]).powi(2)).sum()
}

/// Haar-type step: `+1` on the left half of the cube along the first axis,
/// `-1` on the right half.
fn haar(x: &[f64], c: [f64; 2], side: f64, n: usize) -> f64 {
    let inside = (0..n).all(|d| (x[d] - c[d]).abs() < side / 2.0);
    if !inside {
        0.0
    } else if x[0] < c[0] {
        1.0
    } else {
        -1.0
    }
}

/// Twenty members: five Gaussians, Haar-type atoms at five scales, five
/// band-limited noise signals and five translates of one profile.
pub fn standard20(g: Grid, seed: u64) -> Vec<Member> {
    let mut r = rng(seed);
    let n = g.dim();
    let a = placement(&g);
    let mut out = Vec::with_capacity(20);
    for i in 0..5 {
        let c = random_point(&mut r, n, a);
        let w = r.gen_range(0.15..1.0);
        let amp = if r.gen_bool(0.5) { 1.0 } else { -1.0 } * r.gen_range(0.5..2.0);
        out.push(Member {
            name: format!("gaussian_{i}"),
            f: windowed(g, |x| amp * (-PI * dist2(x, c, n) / (w * w)).exp()),
        });
    }
    for k in 0..5 {
        let side = 2f64.powi(1 - k);
        let c = random_point(&mut r, n, a);
        let amp = side.powf(-0.5);
        out.push(Member { name: format!("haar_{k}"), f: windowed(g, |x| amp * haar(x, c, side, n)) });
    }
    for i in 0..5 {
        // random phases and amplitudes on integer frequencies up to 4 per unit
        let terms: Vec<([f64; 2], f64, f64)> = (0..8)
            .map(|_| {
                let k = [r.gen_range(-4.0..4.0f64).round(), if n == 2 { r.gen_range(-4.0..4.0f64).round() } else { 0.0 }];
                (k, r.gen_range(0.0..2.0 * PI), r.gen_range(-1.0..1.0))
            })
            .collect();
        out.push(Member {
            name: format!("noise_{i}"),
            f: windowed(g, |x| {
                terms.iter().map(|(k, ph, amp)| amp * (PI * (k[0] * x[0] + k[1] * x.get(1).copied().unwrap_or(0.0)) + ph).cos()).sum()
            }),
        });
    }
    let width = r.gen_range(0.3..0.6);
    for i in 0..5 {
        let c = random_point(&mut r, n, a);
        out.push(Member {
            name: format!("translate_{i}"),
            f: windowed(g, |x| {
                let d2 = dist2(x, c, n);
                (-d2 / (width * width)).exp() * (3.0 * (x[0] - c[0]) / width).sin()
            }),
        });
    }
    out
}

/// Ten members, each a sum of three to six random bumps.
pub fn random(g: Grid, seed: u64) -> Vec<Member> {
    let mut r = rng(seed);
    let n = g.dim();
    let a = placement(&g);
    (0..10)
        .map(|i| {
            let bumps: Vec<([f64; 2], f64, f64)> = (0..r.gen_range(3..7))
                .map(|_| (random_point(&mut r, n, a), r.gen_range(0.1..0.8), r.gen_range(-2.0..2.0)))
                .collect();
            let f = windowed(g, |x| {
                bumps.iter().map(|(c, w, amp)| amp * (-dist2(x, *c, n) / (w * w)).exp()).sum()
            });
            Member { name: format!("random_{i}"), f }
        })
        .collect()
}

/// Symmetric step on a lattice-aligned cube of `2^k` cells per side:
/// `-1` on the outer quarters along the first axis and `+1` on the middle
/// half, so the zeroth and first moments vanish exactly.
pub fn step_atom(g: Grid, lo: [usize; 2], cells: usize) -> Atom {
    let n = g.dim();
    let window = IndexBox::new(n, lo, [lo[0] + cells, if n == 2 { lo[1] + cells } else { 1 }]);
    let cube = Cube::from_cells(&g, &window);
    let mut samples = LocalField::zeros(g, window);
    window.for_each(|m| {
        let i = m[0] - lo[0];
        *samples.get_mut(m) = if i < cells / 4 || i >= 3 * cells / 4 { -1.0 } else { 1.0 };
    });
    Atom { cube, samples, q: f64::INFINITY, d: 1 }
}

/// Large-cube atom: a smooth bump of height at most one on a lattice-aligned
/// cube of side one or two.
fn large_atom(g: Grid, lo: [usize; 2], cells: usize, amp: f64) -> Atom {
    let n = g.dim();
    let window = IndexBox::new(n, lo, [lo[0] + cells, if n == 2 { lo[1] + cells } else { 1 }]);
    let cube = Cube::from_cells(&g, &window);
    let mut samples = LocalField::zeros(g, window);
    window.for_each(|m| {
        let x = g.point(g.flat_index(m));
        let r2 = dist2(&x[..n], cube.center, n) / (cube.side * cube.side / 4.0);
        *samples.get_mut(m) = if r2 < 1.0 { amp * (1.0 - 1.0 / (1.0 - r2)).exp() } else { 0.0 };
    });
    Atom { cube, samples, q: f64::INFINITY, d: 1 }
}

fn random_anchor(r: &mut impl Rng, g: &Grid, cells: usize) -> [usize; 2] {
    // keep atoms inside the window's plateau, aligned to their own size
    let margin = ((g.half_width() - window(g).inner) / g.spacing()).ceil() as usize;
    let slots = (g.side().saturating_sub(2 * margin)) / cells;
    let pick = |r: &mut dyn rand::RngCore| {
        let s = if slots > 0 { r.gen_range(0..slots) } else { 0 };
        (margin.div_ceil(cells) * cells + s * cells).min(g.side() - cells)
    };
    let a = pick(r);
    let b = if g.dim() == 2 { pick(r) } else { 0 };
    [a, b]
}

/// Twelve atoms with unit coefficients: ten symmetric steps on cubes of
/// `2^k` cells (at least four cells, side below one) and two large bumps.
pub fn atoms(g: Grid, seed: u64) -> AtomicDecomposition {
    let mut r = rng(seed);
    let h = g.spacing();
    let max_k = ((1.0 / h).log2().floor() as u32).saturating_sub(1).max(2);
    let mut list = Vec::new();
    for _ in 0..10 {
        let cells = 1usize << r.gen_range(2..=max_k);
        let lo = random_anchor(&mut r, &g, cells);
        list.push(step_atom(g, lo, cells));
    }
    for side in [1.0, 2.0] {
        let cells = ((side / h).round() as usize).min(g.side());
        let lo = random_anchor(&mut r, &g, cells);
        list.push(large_atom(g, lo, cells, r.gen_range(0.3..1.0)));
    }
    let count = list.len();
    AtomicDecomposition::new(g, list, vec![1.0; count], Provenance::Manual).expect("unit coefficients")
}

/// Atom with `q = 2` on the block of `cells` cells at `lo`: random samples
/// minus their least-squares linear fit when the cube is small, scaled to
/// `||a||_2 = u |Q|^{1/2}` with `u` in `[1/2, 1)`.
fn random_q2_atom(g: Grid, lo: [usize; 2], cells: usize, r: &mut impl Rng) -> Atom {
    let n = g.dim();
    let window = IndexBox::new(n, lo, [lo[0] + cells, if n == 2 { lo[1] + cells } else { 1 }]);
    let cube = Cube::from_cells(&g, &window);
    let mut raw = GridFunction::zeros(g);
    window.for_each(|m| raw.values_mut()[g.flat_index(m)] = r.gen_range(-1.0..1.0));
    let mut samples = raw.window(&window);
    if cube.measure() < 1.0 {
        if let Ok(pr) = project_on_cube(&raw, &cube, 1) {
            let fit = pr.poly.sample(&g, &window);
            for (v, p) in samples.values.iter_mut().zip(&fit.values) {
                *v -= p;
            }
        }
    }
    let norm = samples.lq_norm(2.0);
    let target = cube.measure().sqrt() * r.gen_range(0.5..1.0);
    if norm > 0.0 {
        samples.values.iter_mut().for_each(|v| *v *= target / norm);
    }
    Atom { cube, samples, q: 2.0, d: 1 }
}

/// One to five `q = 2`, degree-one atoms on lattice-aligned dyadic blocks
/// with coefficients in `[0.1, 3)`. With `small_only` every cube has side
/// below one.
pub fn random_decomposition(g: Grid, seed: u64, small_only: bool) -> AtomicDecomposition {
    let mut r = rng(seed);
    let h = g.spacing();
    let count = r.gen_range(1..6);
    let small_top = ((0.5 / h).log2().floor() as u32).max(2);
    let big_top = ((2.0 / h).log2().floor() as u32).min(g.side().trailing_zeros());
    let top = if small_only { small_top } else { big_top.max(small_top) };
    let mut list = Vec::new();
    for _ in 0..count {
        let cells = 1usize << r.gen_range(2..=top);
        let lo = [cells * r.gen_range(0..g.side() / cells), if g.dim() == 2 { cells * r.gen_range(0..g.side() / cells) } else { 0 }];
        list.push(random_q2_atom(g, lo, cells, &mut r));
    }
    let coeffs = (0..count).map(|_| r.gen_range(0.1..3.0)).collect();
    AtomicDecomposition::new(g, list, coeffs, Provenance::Manual).expect("valid coefficients")
}

/// Functions of a named family; `atoms` yields the atoms as functions.
pub fn functions(name: &str, g: Grid, seed: u64) -> Option<Vec<Member>> {
    match name {
        "standard20" => Some(standard20(g, seed)),
        "random" => Some(random(g, seed)),
        "atoms" => Some(
            atoms(g, seed)
                .atoms
                .iter()
                .enumerate()
                .map(|(i, a)| Member { name: format!("atom_{i:02}"), f: a.to_grid_function() })
                .collect(),
        ),
        _ => None,
    }
}
