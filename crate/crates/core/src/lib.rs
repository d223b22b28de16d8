//! Exact cohomology computations for Bott towers and Hirzebruch surface bundles.
//!
//! The crate is layered bottom-up:
//!
//! - [`ring`]: normal forms in `H*(B_n)` and graded maps between such rings.
//! - [`fiber`]: the automorphisms of `H*(Sigma_a)` and its square-zero classes.
//! - [`extension`]: which fiber automorphisms extend over a base, with a brute-force oracle.
//! - [`classifier`]: certificate-producing decisions for bundle isomorphisms.
//! - [`harness`]: bounded exhaustive sweeps and reports.

pub mod lattice;
pub mod classifier;
pub mod extension;
pub mod fiber;
pub mod harness;
pub mod ring;
