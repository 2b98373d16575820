//! Harmonic analysis on finite abelian groups and the machinery around
//! skew-corner-free sets: exact counting, Bohr sets, simultaneous spreadness
//! with density increments, the structure-vs-pseudorandomness pipeline and
//! exact search on small grids.

pub mod error;
pub mod bohr;
pub mod config;
pub mod corners;
pub mod corpus;
pub mod function;
pub mod group;
pub mod pipeline;
pub mod search;
pub mod spread;
pub mod subspace;
pub mod suite;

pub use error::{Error, Result};
pub use function::{
    fourier_transform, fourier_transform_naive, inverse_fourier, is_spectrally_nonneg, lp_norm, DualFunction,
    GroupFunction, Measure, NormOrder, RationalFunction, RealFunction,
};
pub use group::{AbelianGroup, DualElement, ElementSet, GroupElement};
