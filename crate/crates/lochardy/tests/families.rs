use lochardy::families::{atoms, functions, random, random_decomposition, standard20, FAMILIES};
use lochardy_core::atoms::{check_atom, validate_atom};
use lochardy_core::exponent::{build_exponent, ExponentSpec};
use lochardy_core::Grid;

#[test]
fn standard20_has_the_documented_composition() {
    for g in [Grid::new(1, 4.0, 8).unwrap(), Grid::new(2, 4.0, 5).unwrap()] {
        let fam = standard20(g, 7);
        assert_eq!(fam.len(), 20);
        for prefix in ["gaussian_", "haar_", "noise_", "translate_"] {
            assert_eq!(fam.iter().filter(|m| m.name.starts_with(prefix)).count(), 5);
        }
        // the window keeps a half-unit boundary layer at zero
        for m in &fam {
            assert!(m.f.max_abs() > 0.0, "{}", m.name);
            for i in 0..g.len() {
                let x = g.point(i);
                if x[..g.dim()].iter().any(|c| c.abs() >= 3.5) {
                    assert_eq!(m.f.values()[i], 0.0, "{}", m.name);
                }
            }
        }
        assert_eq!(fam, standard20(g, 7));
        assert_ne!(fam, standard20(g, 8));
    }
}

#[test]
fn atoms_family_members_are_valid() {
    let g = Grid::new(1, 4.0, 8).unwrap();
    let p = build_exponent(&ExponentSpec::LogFamily { p_inf: 0.9, c: 0.4 }, g).unwrap();
    for seed in 0..5 {
        let dec = atoms(g, seed);
        assert_eq!(dec.len(), 12);
        for a in &dec.atoms {
            assert!(validate_atom(a, &p).unwrap().pass, "{:?}", check_atom(a));
        }
    }
    let g2 = Grid::new(2, 4.0, 5).unwrap();
    let p2 = build_exponent(&ExponentSpec::Constant(0.8), g2).unwrap();
    for a in &atoms(g2, 1).atoms {
        assert!(validate_atom(a, &p2).unwrap().pass);
    }
}

#[test]
fn random_decompositions_hold_valid_atoms() {
    let g = Grid::new(1, 4.0, 8).unwrap();
    for seed in 0..20 {
        for small in [false, true] {
            let dec = random_decomposition(g, seed, small);
            for a in &dec.atoms {
                assert!(check_atom(a).pass);
                if small {
                    assert!(a.cube.measure() < 1.0);
                }
            }
        }
    }
}

#[test]
fn random_family_depends_on_the_seed() {
    let g = Grid::new(1, 4.0, 7).unwrap();
    assert_eq!(random(g, 1), random(g, 1));
    assert_ne!(random(g, 1), random(g, 2));
    for name in FAMILIES {
        assert!(functions(name, g, 0).is_some_and(|v| !v.is_empty()));
    }
    assert!(functions("other", g, 0).is_none());
}
