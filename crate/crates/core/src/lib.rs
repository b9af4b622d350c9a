//! Numerics for associative submanifolds of flat G2 models.

pub mod algebra;
pub mod boundary;
pub mod certify;
pub mod cy;
pub mod dec;
pub mod dirac;
pub mod error;
pub mod geometry;
pub mod gradient;
pub mod mesh;
pub mod sparse;
pub mod spectral;

pub use algebra::{chi, cross, Vec7};
pub use error::{G2Error, Result};

/// Caps the number of threads used by dense linear algebra.
pub fn set_thread_cap(threads: usize) {
    faer::set_global_parallelism(if threads <= 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(threads)
    });
}
