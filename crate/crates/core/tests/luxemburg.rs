use lochardy_core::exponent::{build_exponent, ExponentField, ExponentSpec};
use lochardy_core::luxemburg::{
    chi_norm, chi_ratio_large, chi_ratio_small, grafakos_kalton_pairing, holder_pairing, indicator, luxemburg_norm,
    modular, norm, triangle_pairing,
};
use lochardy_core::profile::{Bump, Profile};
use lochardy_core::stats::{rng, Bracket};
use lochardy_core::{Cube, Grid, GridFunction, IndexBox};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-10;

fn g1(l: f64, j: u32) -> Grid {
    Grid::new(1, l, j).unwrap()
}

fn log_family(g: Grid) -> ExponentField {
    build_exponent(&ExponentSpec::LogFamily { p_inf: 1.8, c: 0.4 }, g).unwrap()
}

fn bump_fn(g: Grid, c: f64, r: f64, amp: f64) -> GridFunction {
    let b = Bump::new(1, r);
    GridFunction::from_fn(g, |x| amp * b.eval(&[x[0] - c]))
}

#[test]
fn modular_examples() {
    let g = g1(2.0, 6);
    let chi = GridFunction::from_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
    let p2 = build_exponent(&ExponentSpec::Constant(2.0), g).unwrap();
    assert!((modular(&chi, &p2, 0.5).unwrap().value - 4.0).abs() < 1e-12);
    assert!((luxemburg_norm(&chi, &p2, TOL).unwrap().value - 1.0).abs() < 1e-9);
    assert!((luxemburg_norm(&chi.scaled(3.0), &p2, TOL).unwrap().value - 3.0).abs() < 3e-9);
    let zero = luxemburg_norm(&GridFunction::zeros(g), &p2, TOL).unwrap();
    assert_eq!(zero.value, 0.0);
    let mut bad = chi.clone();
    bad.values_mut()[4] = f64::NAN;
    assert!(luxemburg_norm(&bad, &p2, TOL).is_err());
}

#[test]
fn modular_overflow_is_flagged_not_nan() {
    let g = g1(1.0, 4);
    let p = build_exponent(&ExponentSpec::Constant(40.0), g).unwrap();
    let f = GridFunction::constant(g, 1e300);
    let m = modular(&f, &p, 1e-300).unwrap();
    assert!(m.overflow && m.value.is_infinite());
    let n = luxemburg_norm(&f, &p, TOL).unwrap();
    assert!(n.value.is_finite() && n.residual <= TOL);
}

// The midpoint rule at J+3 is the quadrature oracle; the integrand is smooth
// apart from the |x| kink of the exponent at a cell boundary.
#[test]
fn modular_matches_refined_quadrature() {
    let (j, l) = (11, 2.0);
    let coarse = g1(l, j);
    let fine = g1(l, j + 3);
    for lambda in [0.5, 1.0, 3.0] {
        let a = modular(&bump_fn(coarse, 0.2, 1.0, 2.0), &log_family(coarse), lambda).unwrap().value;
        let b = modular(&bump_fn(fine, 0.2, 1.0, 2.0), &log_family(fine), lambda).unwrap().value;
        assert!((a - b).abs() / b < 1e-8, "lambda={lambda}: {a} vs {b}");
    }
}

#[test]
fn norm_matches_refined_grid_oracle() {
    let j = 9;
    let coarse = g1(4.0, j);
    let fine = g1(4.0, j + 3);
    for (c, r) in [(0.2, 1.0), (-1.3, 0.6), (0.9, 2.0)] {
        let a = luxemburg_norm(&bump_fn(coarse, c, r, 1.0), &log_family(coarse), TOL).unwrap();
        let b = luxemburg_norm(&bump_fn(fine, c, r, 1.0), &log_family(fine), TOL).unwrap();
        assert!(!a.capped && a.residual <= TOL);
        assert!((a.value - b.value).abs() / b.value < 1e-6);
    }
}

#[test]
fn constant_exponent_closed_form() {
    let g = g1(4.0, 9);
    let mut r = rng(11);
    for _ in 0..50 {
        let p0 = r.gen_range(0.3..4.0);
        let p = build_exponent(&ExponentSpec::Constant(p0), g).unwrap();
        let (c, s, a) = (r.gen_range(-2.0..2.0), r.gen_range(0.1..1.5), r.gen_range(0.1..20.0));
        let f = bump_fn(g, c, s, a);
        let exact = f.values().iter().map(|v| v.abs().powf(p0)).sum::<f64>() * g.cell_measure();
        let exact = exact.powf(1.0 / p0);
        let got = luxemburg_norm(&f, &p, TOL).unwrap().value;
        assert!((got - exact).abs() / exact < 1e-8, "p={p0}: {got} vs {exact}");
    }
}

fn random_bump(g: Grid, r: &mut impl Rng) -> GridFunction {
    let (c, s, a) = (r.gen_range(-2.5..2.5), r.gen_range(0.1..1.5), r.gen_range(0.05..5.0));
    bump_fn(g, c, s, a)
}

#[test]
fn holder_ratio_is_bounded() {
    let g = g1(4.0, 8);
    let p1 = log_family(g);
    let p2 = build_exponent(&ExponentSpec::Bump { base: 2.0, amplitude: 1.0, center: [0.5, 0.0], radius: 2.0 }, g).unwrap();
    let chi = GridFunction::from_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
    let two = build_exponent(&ExponentSpec::Constant(2.0), g).unwrap();
    let (l, rr) = holder_pairing(&chi, &chi, &two, &two).unwrap();
    assert!((l - 1.0).abs() < 1e-9 && (rr - 1.0).abs() < 1e-9);
    let (l0, _) = holder_pairing(&GridFunction::zeros(g), &chi, &p1, &p2).unwrap();
    assert_eq!(l0, 0.0);

    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (f, h) = (random_bump(g, &mut r), random_bump(g, &mut r));
        let (lhs, rhs) = holder_pairing(&f, &h, &p1, &p2).unwrap();
        worst = worst.max(lhs / rhs);
    }
    assert!(worst <= 4.0, "{worst}");
}

#[test]
fn triangle_and_indicator_bounds() {
    let g = g1(4.0, 8);
    let low = build_exponent(&ExponentSpec::Bump { base: 0.5, amplitude: 0.8, center: [0.0, 0.0], radius: 3.0 }, g).unwrap();
    let high = log_family(g);
    let mut r = rng(8);
    for _ in 0..100 {
        let (f, h) = (random_bump(g, &mut r), random_bump(g, &mut r));
        let (lhs, rhs) = triangle_pairing(&f, &h, &low).unwrap();
        assert!(lhs <= rhs + 1e-8 * rhs.max(1.0));
        // a union of two random blocks of cells
        let mut e = GridFunction::zeros(g);
        for _ in 0..2 {
            let a = r.gen_range(0..g.side() - 1);
            let b = r.gen_range(a + 1..=g.side());
            e = e.zip_with(&indicator(&g, &IndexBox::new(1, [a, 0], [b, 1])), f64::max).unwrap();
        }
        let measure = e.integrate();
        assert!(norm(&e, &high).unwrap() <= measure + 1.0 + 1e-8);
    }
}

fn chi_brackets(j: u32) -> (Bracket, Bracket) {
    let g = g1(8.0, j);
    let p = build_exponent(&ExponentSpec::Bump { base: 1.5, amplitude: 1.0, center: [0.3, 0.0], radius: 2.5 }, g).unwrap();
    let mut r = rng(21);
    let (mut small, mut large) = (Bracket::empty(), Bracket::empty());
    for _ in 0..40 {
        let c = r.gen_range(-3.0..3.0);
        let side = 2f64.powf(r.gen_range(-5.0..1.0));
        small.push(chi_ratio_small(&Cube::new(1, [c, 0.0], side), &p).unwrap());
        let side = r.gen_range(1.0..6.0);
        let c = r.gen_range(-(8.0 - side / 2.0)..(8.0 - side / 2.0));
        large.push(chi_ratio_large(&Cube::new(1, [c, 0.0], side), &p).unwrap());
    }
    (small, large)
}

#[test]
fn chi_norm_asymptotics_are_refinement_stable() {
    let (s8, l8) = chi_brackets(8);
    let (s9, l9) = chi_brackets(9);
    assert!(s8.is_finite() && l8.is_finite());
    assert!(s8.spread_change(&s9) < 0.2, "{s8:?} {s9:?}");
    assert!(l8.spread_change(&l9) < 0.2, "{l8:?} {l9:?}");
}

#[test]
fn chi_norm_of_lattice_cube() {
    let g = g1(4.0, 6);
    let p = build_exponent(&ExponentSpec::Constant(3.0), g).unwrap();
    let (v, m) = chi_norm(&Cube::new(1, [0.5, 0.0], 1.0), &p).unwrap();
    assert!((m - 1.0).abs() < 1e-12);
    assert!((v - 1.0).abs() < 1e-9);
}

#[test]
fn grafakos_kalton_ratio_is_stable() {
    let ratio = |j: u32| {
        let g = g1(4.0, j);
        let p = log_family(g);
        let mut r = rng(4);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let cubes: Vec<Cube> =
                (0..4).map(|_| Cube::new(1, [r.gen_range(-2.0..2.0), 0.0], r.gen_range(0.1..1.5))).collect();
            let fs: Vec<GridFunction> = (0..4).map(|_| random_bump(g, &mut r).abs()).collect();
            let (lhs, rhs) = grafakos_kalton_pairing(&cubes, &fs, 2.0, &p).unwrap();
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
        }
        worst
    };
    let (a, b) = (ratio(8), ratio(9));
    assert!(a.is_finite() && a > 0.0);
    assert!((a - b).abs() / b < 0.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_is_homogeneous(c in -50.0f64..50.0, s in 0.2f64..1.5) {
        prop_assume!(c.abs() > 1e-3);
        let g = g1(2.0, 7);
        let p = log_family(g);
        let f = bump_fn(g, 0.1, s, 1.0);
        let a = luxemburg_norm(&f, &p, TOL).unwrap().value;
        let b = luxemburg_norm(&f.scaled(c), &p, TOL).unwrap().value;
        prop_assert!((b - c.abs() * a).abs() <= 1e-9 * b);
    }

    #[test]
    fn modular_is_monotone(l1 in 0.01f64..10.0, l2 in 0.01f64..10.0) {
        let g = g1(2.0, 6);
        let p = log_family(g);
        let f = bump_fn(g, -0.3, 1.0, 2.0);
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(modular(&f, &p, lo).unwrap().value >= modular(&f, &p, hi).unwrap().value);
    }
}
