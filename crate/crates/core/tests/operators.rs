#![allow(clippy::too_many_arguments)]

use lochardy_core::atoms::Atom;
use lochardy_core::exponent::{build_exponent, ExponentSpec};
use lochardy_core::littlewood_paley::build_filter_bank;
use lochardy_core::operators::{
    apply_operator, apply_operator_fft, apply_to_atom, boundedness_experiment, check_kernel, fractional_support_cube,
    fractional_target, local_fractional, ExperimentInput, KernelKind, KernelSpec, OperatorHandle, Space,
};
use lochardy_core::profile::Plateau;
use lochardy_core::{Cube, Grid, GridFunction, LocalField};

fn g1(l: f64, j: u32) -> Grid {
    Grid::new(1, l, j).unwrap()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn kernel_constants_are_stable_under_budget_doubling() {
    for kind in [KernelKind::LocalizedHilbert, KernelKind::DifferenceOfBumps] {
        let k = KernelSpec::library(1, kind);
        let a = check_kernel(&k, 4000, 9);
        let b = check_kernel(&k, 8000, 9);
        assert!(a.pass && b.pass, "{kind:?}");
        assert!(relative(a.size_far, b.size_far) < 0.2, "{a:?} {b:?}");
        assert!(relative(a.smooth_far, b.smooth_far) < 0.2, "{a:?} {b:?}");
    }
}

#[test]
fn hilbert_smoothness_matches_derivative_bound() {
    // inside the plateau the kernel is 1/(x - y); both clause terms equal
    // |1/(x-y) - 1/(x-y')| and the mean value theorem bounds them by
    // |y - y'| / min(|x-y|, |x-y'|)^2
    let k = KernelSpec::library(1, KernelKind::LocalizedHilbert);
    for (x, y, y2) in [(0.1, 0.0, 0.02), (0.0, 0.3, 0.25), (-0.2, 0.1, 0.2), (0.05, -0.01, -0.02), (0.3, 0.5, 0.45)] {
        let (lhs, _) = k.smoothness_terms(&[x], &[y], &[y2]);
        let exact = 2.0 * (1.0 / (x - y) - 1.0 / (x - y2)).abs();
        assert!(relative(lhs, exact) < 1e-12, "{lhs} vs {exact}");
        let near = (x - y).abs().min((x - y2).abs());
        assert!(lhs <= 2.0 * (y - y2).abs() / (near * near) * (1.0 + 1e-12));
    }
}

#[test]
fn operator_is_linear_and_translation_invariant() {
    let g = g1(4.0, 7);
    let f = GridFunction::from_fn(g, |x| (-(x[0] - 0.2).powi(2) * 5.0).exp());
    let h = GridFunction::from_fn(g, |x| if x[0].abs() < 0.7 { (3.0 * x[0]).sin() } else { 0.0 });
    for kind in [
        KernelKind::LocalizedHilbert,
        KernelKind::DifferenceOfBumps,
        KernelKind::VariableCoefficient,
        KernelKind::Commutator,
    ] {
        let k = KernelSpec::library(1, kind);
        let mut comb = f.scaled(1.5);
        comb.axpy(-0.7, &h).unwrap();
        let lhs = apply_operator(&k, &comb).unwrap();
        let mut rhs = apply_operator(&k, &f).unwrap().scaled(1.5);
        rhs.axpy(-0.7, &apply_operator(&k, &h).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * lhs.max_abs().max(1.0), "{kind:?}");
        if k.is_convolution() {
            let a = apply_operator(&k, &f.translated([13, 0])).unwrap();
            let b = apply_operator(&k, &f).unwrap().translated([13, 0]);
            for i in 0..g.len() {
                if g.coord(i).abs() < 2.0 {
                    assert!((a.values()[i] - b.values()[i]).abs() <= 1e-13 * b.max_abs());
                }
            }
        }
    }
}

#[test]
fn quadrature_and_fft_paths_agree_in_two_dimensions() {
    let g = Grid::new(2, 2.0, 4).unwrap();
    let f = GridFunction::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
    for kind in [KernelKind::LocalizedHilbert, KernelKind::DifferenceOfBumps] {
        let k = KernelSpec::library(2, kind);
        let a = apply_operator(&k, &f).unwrap();
        let b = apply_operator_fft(&k, &f).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-8 * a.max_abs(), "{kind:?}");
    }
}

/// Adaptive Simpson rule with the classical Richardson stopping test.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `int_{x-1/4}^{x} phi_0(y) |y|^{-1/2} dy`, split at the origin and
/// substituted `y = +-u^2` so the integrand is smooth.
fn fractional_oracle(x: f64) -> f64 {
    let phi = Plateau::standard(1);
    let (a, b) = (x - 0.25, x);
    let piece = |lo: f64, hi: f64, sign: f64| {
        simpson(&|u: f64| 2.0 * phi.factor(sign * u * u), lo.abs().sqrt(), hi.abs().sqrt(), 1e-13)
    };
    if a >= 0.0 {
        piece(a, b, 1.0)
    } else if b <= 0.0 {
        piece(b, a, -1.0)
    } else {
        piece(0.0, b, 1.0) + piece(0.0, a, -1.0)
    }
}

#[test]
fn fractional_integral_matches_adaptive_quadrature() {
    let g = g1(2.0, 8);
    let f = GridFunction::from_fn(g, |x| if (0.0..0.25).contains(&x[0]) { 1.0 } else { 0.0 });
    let out = local_fractional(&f, 0.5).unwrap();
    // the first probe sits in the plateau, the others cross the cut-off ramp
    for probe in [0.1, 0.63, 0.81, -0.55] {
        let idx = g.cell_of(probe).unwrap();
        let x = g.coord(idx);
        let want = fractional_oracle(x);
        assert!((out.values()[idx] - want).abs() < 1e-6, "x={x}: {} vs {want}", out.values()[idx]);
    }
    let x = g.coord(g.cell_of(0.1).unwrap());
    assert!((fractional_oracle(x) - 2.0 * (x.sqrt() + (0.25 - x).sqrt())).abs() < 1e-10);
}

fn step_atom(g: Grid, c: f64, side: f64) -> Atom {
    let cube = Cube::new(1, [c, 0.0], side);
    let cells = cube.cells_centered(&g);
    let mut samples = LocalField::zeros(g, cells);
    cells.for_each(|m| *samples.get_mut(m) = if (g.coord(m[0]) - c).abs() < side / 4.0 { 1.0 } else { -1.0 });
    Atom { cube, samples, q: f64::INFINITY, d: 1 }
}

#[test]
fn fractional_support_monotonicity_and_linearity() {
    let g = g1(4.0, 7);
    for (c, s) in [(0.25, 0.5), (-1.0, 0.25), (1.5, 1.0)] {
        let a = step_atom(g, c, s);
        let out = local_fractional(&a.to_grid_function(), 0.5).unwrap();
        let big = fractional_support_cube(&a.cube);
        for (i, v) in out.values().iter().enumerate() {
            if !big.contains_point(&[g.coord(i)]) {
                assert_eq!(*v, 0.0);
            }
        }
    }
    let lo = GridFunction::from_fn(g, |x| (-(x[0] * x[0])).exp());
    let hi = lo.add(&GridFunction::from_fn(g, |x| if x[0].abs() < 0.3 { 0.5 } else { 0.0 })).unwrap();
    let (a, b) = (local_fractional(&lo, 0.4).unwrap(), local_fractional(&hi, 0.4).unwrap());
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x <= y));
    let both = local_fractional(&lo.scaled(2.0).add(&hi).unwrap(), 0.4).unwrap();
    let sep = a.scaled(2.0).add(&b).unwrap();
    assert!(both.sub(&sep).unwrap().max_abs() <= 1e-12 * sep.max_abs());
}

fn atom_family(g: Grid) -> Vec<ExperimentInput> {
    [(0.3, 0.5), (-1.0, 0.25), (1.2, 0.125), (-0.4, 0.0625), (0.0, 2.0)]
        .iter()
        .map(|&(c, s)| ExperimentInput::Atom(step_atom(g, c, s)))
        .collect()
}

#[test]
fn fractional_ratio_table_is_refinement_stable() {
    let run = |j: u32| {
        let g = g1(4.0, j);
        let bank = build_filter_bank(g, j).unwrap();
        let p = build_exponent(&ExponentSpec::Constant(0.75), g).unwrap();
        let (q, space) = fractional_target(&p, 0.2).unwrap();
        let op = OperatorHandle::Fractional { alpha: 0.2 };
        boundedness_experiment(&op, &atom_family(g), &p, Space::Hp, &q, space, &bank, None).unwrap()
    };
    let (a, b) = (run(7), run(8));
    assert!(a.max.is_finite() && a.max > 0.0 && a.skipped == 0);
    assert!(relative(a.max, b.max) < 0.2, "{} {}", a.max, b.max);
}

#[test]
fn corrected_operator_is_stable_and_smaller_on_small_atoms() {
    let run = |j: u32, corrected: bool| {
        let g = g1(4.0, j);
        let bank = build_filter_bank(g, j).unwrap();
        let p = build_exponent(&ExponentSpec::Constant(0.75), g).unwrap();
        let k = KernelSpec::library(1, KernelKind::Commutator).corrected(corrected);
        let fam = atom_family(g);
        for m in &fam {
            if let ExperimentInput::Atom(a) = m {
                if corrected && a.cube.measure() < 1.0 {
                    let i = apply_to_atom(&k, a).unwrap().integrate();
                    assert!(i.abs() <= 1e-8 * a.lq_norm() * a.cube.measure());
                }
            }
        }
        boundedness_experiment(&OperatorHandle::Kernel(k), &fam, &p, Space::Hp, &p, Space::Hp, &bank, None).unwrap()
    };
    let (c7, c8) = (run(7, true), run(8, true));
    assert!(c7.max.is_finite() && relative(c7.max, c8.max) < 0.2, "{} {}", c7.max, c8.max);
    let u7 = run(7, false);
    assert!(c7.small_cube_max.unwrap() < u7.small_cube_max.unwrap());
}
