#![allow(clippy::needless_range_loop)]

use lochardy_core::exponent::{
    atom_moment_degree, build_exponent, conjugate, log_holder_constants, moment_degree, sobolev_shift, ExponentSpec,
};
use lochardy_core::grid::{convolve_direct, Convolver, OffsetKernel};
use lochardy_core::profile::{Bump, FnProfile, Profile};
use lochardy_core::{DyadicCube, Error, Grid, GridFunction};
use proptest::prelude::*;

fn g1(l: f64, j: u32) -> Grid {
    Grid::new(1, l, j).unwrap()
}

#[test]
fn grid_sizes() {
    let g = g1(8.0, 9);
    assert_eq!(g.len(), 8192);
    assert_eq!(g.spacing(), 1.0 / 512.0);
    assert_eq!(g1(1.0, 0).len(), 2);
    assert_eq!(g1(1.0, 0).spacing(), 1.0);
    let g2 = Grid::new(2, 4.0, 5).unwrap();
    assert_eq!(g2.side(), 256);
    assert_eq!(g2.len(), 256 * 256);
    assert!(Grid::new(3, 1.0, 2).is_err());
    assert!(Grid::new(1, 0.3, 1).is_err());
}

#[test]
fn integrate_examples() {
    let g = g1(8.0, 9);
    assert!((GridFunction::constant(g, 1.0).integrate() - 16.0).abs() < 1e-12);
    let chi = GridFunction::from_fn(g, |x| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 });
    assert!((chi.integrate() - 1.0).abs() <= g.spacing());
    let odd = GridFunction::from_fn(g, |x| x[0]);
    assert_eq!(odd.integrate(), 0.0);
}

#[test]
fn child_cubes_partition_parent() {
    let g = Grid::new(2, 2.0, 5).unwrap();
    let parent = DyadicCube::new(2, 1, [1, -2]);
    let pc = parent.cells(&g);
    let kids = parent.children();
    assert_eq!(kids.len(), 4);
    let total: usize = kids.iter().map(|c| c.cells(&g).len()).sum();
    assert_eq!(total, pc.len());
    for (i, a) in kids.iter().enumerate() {
        assert_eq!(a.parent(), parent);
        assert_eq!(pc.intersect(&a.cells(&g)).len(), a.cells(&g).len());
        for b in &kids[i + 1..] {
            assert!(a.cells(&g).intersect(&b.cells(&g)).is_empty());
        }
    }
}

/// Brute-force zero-extension quadrature of `psi_t * f`.
fn brute_convolve(f: &GridFunction, psi: &dyn Profile, t: f64) -> Vec<f64> {
    let g = *f.grid();
    let h = g.spacing();
    (0..g.len())
        .map(|x| {
            let mut acc = 0.0;
            for y in 0..g.len() {
                let z = (x as f64 - y as f64) * h / t;
                acc += psi.eval(&[z]) * f.values()[y];
            }
            acc * h / t
        })
        .collect()
}

#[test]
fn convolution_matches_brute_force_quadrature() {
    let g = g1(4.0, 7);
    let f = GridFunction::from_fn(g, |x| (-(x[0] - 0.3).powi(2) * 3.0).exp() * (2.0 * x[0]).cos());
    let psi = FnProfile { f: |x: &[f64]| (-4.0 * x[0] * x[0]).exp() * (1.0 - x[0] * x[0]).max(0.0), radius: 1.0 };
    for &t in &[0.75, 0.25, 0.0625] {
        let k = OffsetKernel::scaled(&g, &psi, t).unwrap();
        let fast = Convolver::new(&f).apply(&k);
        let direct = convolve_direct(&f, &k);
        let oracle = brute_convolve(&f, &psi, t);
        for i in 0..g.len() {
            assert!((fast.values()[i] - oracle[i]).abs() < 1e-10, "t={t} i={i}");
            assert!((direct.values()[i] - oracle[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn unit_mass_kernel_reproduces_constants_in_the_interior() {
    let g = g1(4.0, 8);
    let one = GridFunction::constant(g, 1.0);
    let psi = Bump::unit_mass(1, 1.0);
    let t = 0.5;
    let k = OffsetKernel::scaled(&g, &psi, t).unwrap();
    let out = Convolver::new(&one).apply(&k);
    let s = k.sum();
    for i in 0..g.len() {
        if g.coord(i).abs() < 4.0 - 2.0 * t {
            assert!((out.values()[i] - s).abs() < 1e-10);
        }
    }
    // midpoint sum of a smooth compactly supported bump
    assert!((s - 1.0).abs() < 1e-10);
}

#[test]
fn approximate_identity_improves_as_t_halves() {
    let g = g1(4.0, 9);
    let f = GridFunction::from_fn(g, |x| (-x[0] * x[0]).exp());
    let psi = Bump::unit_mass(1, 1.0);
    let err = |t: f64| {
        let k = OffsetKernel::scaled(&g, &psi, t).unwrap();
        Convolver::new(&f).apply(&k).sub(&f).unwrap().max_abs()
    };
    let e1 = err(0.125);
    let e2 = err(0.0625);
    assert!(e2 < e1);
}

#[test]
fn convolution_commutes_with_interior_translation() {
    let g = g1(4.0, 7);
    let f = GridFunction::from_fn(g, |x| (-(4.0 * x[0] * x[0])).exp());
    let k = OffsetKernel::scaled(&g, &Bump::unit_mass(1, 1.0), 0.25).unwrap();
    let a = Convolver::new(&f.translated([9, 0])).apply(&k);
    let b = Convolver::new(&f).apply(&k).translated([9, 0]);
    for i in 0..g.len() {
        if g.coord(i).abs() < 3.0 {
            assert!((a.values()[i] - b.values()[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn log_family_extremes() {
    let g = g1(8.0, 9);
    let p = build_exponent(&ExponentSpec::LogFamily { p_inf: 1.8, c: 0.4 }, g).unwrap();
    // lattice points nearest 0 sit at +-h/2 and the edge at 8 - h/2
    let h = g.spacing();
    let closed = |r: f64| 1.8 + 0.4 / (std::f64::consts::E + r).ln();
    assert!((p.p_plus - closed(h / 2.0)).abs() < 1e-14);
    assert!((p.p_plus - 2.2).abs() < 1e-3);
    assert!((p.p_minus - closed(8.0 - h / 2.0)).abs() < 1e-14);
    assert_eq!(p.p_infinity, 1.8);
}

#[test]
fn zero_sample_is_rejected() {
    let g = g1(1.0, 2);
    let mut v = vec![1.5; g.len()];
    v[3] = 0.0;
    let e = build_exponent(&ExponentSpec::Samples { values: v, p_inf: 1.5 }, g).unwrap_err();
    assert!(matches!(e, Error::InvalidExponent { index: 3, .. }));
}

#[test]
fn log_holder_constants_behave() {
    let c = build_exponent(&ExponentSpec::Constant(2.0), g1(4.0, 7)).unwrap();
    let r = log_holder_constants(&c, 500, 1);
    assert_eq!((r.c_local, r.c_decay), (0.0, 0.0));

    let spec = ExponentSpec::LogFamily { p_inf: 1.8, c: 0.4 };
    let a = log_holder_constants(&build_exponent(&spec, g1(8.0, 8)).unwrap(), 2000, 5);
    let b = log_holder_constants(&build_exponent(&spec, g1(8.0, 9)).unwrap(), 2000, 5);
    assert!(a.c_local.is_finite() && a.c_decay.is_finite());
    assert!((a.c_local - b.c_local).abs() / b.c_local < 0.05, "{} {}", a.c_local, b.c_local);
    assert!((a.c_decay - b.c_decay).abs() / b.c_decay < 0.05);
    assert!(!b.diverging);

    let step = |j| {
        let g = g1(2.0, j);
        let v = (0..g.len()).map(|i| if g.coord(i) < 0.0 { 1.5 } else { 2.5 }).collect();
        log_holder_constants(&build_exponent(&ExponentSpec::Samples { values: v, p_inf: 2.0 }, g).unwrap(), 200, 3)
    };
    let (s6, s9) = (step(6), step(9));
    assert!(s9.c_local > s6.c_local * 1.3);
    assert!(s9.diverging);
}

#[test]
fn conjugate_and_shift_examples() {
    let g = g1(1.0, 3);
    let c = |v| build_exponent(&ExponentSpec::Constant(v), g).unwrap();
    assert_eq!(conjugate(&c(2.0)).unwrap().p_plus, 2.0);
    assert!((conjugate(&c(4.0)).unwrap().p_plus - 4.0 / 3.0).abs() < 1e-15);
    assert!(conjugate(&c(1.0)).is_err());
    assert!((sobolev_shift(&c(1.0), 0.5).unwrap().p_plus - 2.0).abs() < 1e-14);
    assert!((sobolev_shift(&c(2.0 / 3.0), 0.5).unwrap().p_plus - 1.0).abs() < 1e-14);
    assert!(sobolev_shift(&c(2.0), 0.5).is_err());
}

#[test]
fn moment_degree_examples() {
    assert_eq!(moment_degree(1.0, 1), 0);
    assert_eq!(moment_degree(0.4, 1), 1);
    // smallest d with 0.3 (3 + d) > 2
    assert_eq!(moment_degree(0.3, 2), 4);
    let p = build_exponent(&ExponentSpec::Constant(0.4), g1(1.0, 2)).unwrap();
    assert_eq!(atom_moment_degree(&p), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.1f64..2.0) {
        let g = g1(2.0, 6);
        let f = GridFunction::from_fn(g, |x| (s * x[0]).sin() + 0.2);
        let h = GridFunction::from_fn(g, |x| (-(x[0] * x[0]) * s).exp());
        let mut comb = f.scaled(a);
        comb.axpy(b, &h).unwrap();
        let lhs = comb.integrate();
        let rhs = a * f.integrate() + b * h.integrate();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn conjugate_is_an_involution(base in 1.1f64..3.0, amp in 0.0f64..2.0) {
        let g = g1(2.0, 5);
        let p = build_exponent(&ExponentSpec::Bump { base, amplitude: amp, center: [0.2, 0.0], radius: 1.0 }, g).unwrap();
        let back = conjugate(&conjugate(&p).unwrap()).unwrap();
        for (x, y) in p.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() < 1e-14 * x.max(1.0) * 4.0);
        }
    }

    #[test]
    fn shift_increases_exponent(base in 0.3f64..1.5, amp in 0.0f64..0.4, alpha in 0.05f64..0.3) {
        let g = g1(2.0, 5);
        let p = build_exponent(&ExponentSpec::Bump { base, amplitude: amp, center: [0.0, 0.0], radius: 1.5 }, g).unwrap();
        if let Ok(q) = sobolev_shift(&p, alpha) {
            for (a, b) in p.values().iter().zip(q.values()) {
                prop_assert!(b > a);
            }
        }
    }

    #[test]
    fn moment_degree_is_nonincreasing(a in 0.05f64..3.0, b in 0.05f64..3.0, n in 1usize..3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(moment_degree(hi, n) <= moment_degree(lo, n));
    }
}
