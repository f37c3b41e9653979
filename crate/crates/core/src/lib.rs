//! Approximation of periodic functions from Korobov spaces by translates of
//! the Korobov kernel placed on Smolyak sparse grids.
//!
//! Functions are represented as f = κ_{r,d} ∗ g with g a trigonometric
//! polynomial. Every approximation operator is available in two exactly
//! linked forms: a finite combination of kernel translates, and an aliased
//! Fourier expansion used to compute errors.

pub mod analysis;
pub mod caps;
pub mod error;
pub mod experiment;
pub mod fourier;
pub(crate) mod index;
pub mod korobov;
pub mod smolyak;
pub mod special;
pub mod translate;

pub use error::{Error, Result};
pub use fourier::{FourierCoefficients, Frequency, GridSignal};
pub use korobov::{KorobovElement, KorobovParams};
pub use translate::{RationalNode, TensorOperator, TranslateCombination, UnivariateOp};
