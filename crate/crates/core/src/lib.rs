//! Numerical core for local Hardy spaces with variable exponent.
//!
//! Everything here operates on uniformly sampled functions over a truncated
//! box `[-L, L]^n` (`n` is 1 or 2) with zero extension outside the box:
//!
//! * [`grid`]: lattices, dyadic cubes, quadrature and scaled convolution.
//! * [`exponent`]: variable exponents `p(.)` and their log-Hölder diagnostics.
//! * [`luxemburg`]: modular, Luxemburg norm and the classical inequalities.
//! * [`maximal`]: Hardy–Littlewood, local vertical/non-tangential/Peetre and
//!   grand maximal functions over a finite test-function dictionary.
//! * [`littlewood_paley`]: the exact-unity filter bank, square functions and
//!   the `h^{p(.)}` norm.
//! * [`atoms`], [`czdecomp`]: special local atoms, the Calderón–Zygmund
//!   decomposition and the constructive (finite) atomic decompositions.
//! * [`duals`]: Campanato, Lipschitz, Carleson-measure and family-type dual
//!   seminorms together with the duality pairing bound.
//! * [`operators`]: inhomogeneous Calderón–Zygmund kernels, the local
//!   fractional integral and boundedness experiments.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod atoms;
pub mod czdecomp;
pub mod duals;
pub mod error;
pub mod exponent;
pub mod fft;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod littlewood_paley;
pub mod luxemburg;
pub mod maximal;
pub mod operators;
pub mod poly;
pub mod profile;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Cube, DyadicCube, Grid, GridFunction, IndexBox, LocalField};
