//! Exact homological algebra, cubical higher Chow cycles and numerical
//! regulator periods.

pub mod complex;
pub mod cyclo;
pub mod gysin;
pub mod json;
pub mod dsl;
pub mod klm;
pub mod cycles;
pub mod linalg;
pub mod periods;
pub mod polylog;
pub mod poly;
pub mod quad;
pub mod random;
pub mod scenarios;

pub use complex::{ChainMap, CochainComplex, DoubleComplex, FilteredCochainComplex, LongExactSequence, SpectralSequencePage};
pub use linalg::{LinearMap, Matrix, Rational};
