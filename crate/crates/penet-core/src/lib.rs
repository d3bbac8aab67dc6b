//! Image enhancement engine built on a Laplacian pyramid.
//!
//! The pipeline decomposes an image into three detail components plus a
//! low-resolution base, enhances each component with per-level context,
//! edge and low-frequency-filter branches, and reconstructs the result.
//! All operators ship with analytic backward passes verified against a
//! central finite-difference oracle, plus a deterministic weight container
//! and a PPM codec for the command line front end.
//!
//! Everything is deterministic: fixed summation orders, f64 accumulators,
//! and seeded SplitMix64 streams wherever randomness is involved.

pub mod error;
pub mod gradcheck;
pub mod image;
pub mod model;
pub mod ops;
pub mod pyramid;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
