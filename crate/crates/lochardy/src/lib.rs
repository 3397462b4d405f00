//! Std companion of `lochardy-core`: file formats, seeded test families,
//! the maximal-function equivalence table, JSON reports and the `lochardy`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod equivalence;
pub mod families;
pub mod formats;
pub mod report;
