//! Dense matrices, probability helpers and the seeded random source shared by
//! every other module. All arithmetic is `f64`.

pub(crate) mod matrix;
pub(crate) mod prob;
mod rng;

pub use matrix::RealMatrix;
pub use prob::{cosine_distance, cross_entropy, entropy, softmax, ProbVector, LOG_CLAMP};
pub use rng::{sample_beta, RandomSource, PRNG_ID};
