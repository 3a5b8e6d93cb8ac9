//! Operator-valued pseudo-differential calculus on the discretized d-torus.
//!
//! Functions take values in the q×q matrices and live on a uniform grid of the
//! torus `[0,1)^d`. The crate covers Littlewood-Paley families, matrix-valued
//! symbols and their calculus, operator application and norm estimation,
//! Triebel-Lizorkin/Besov/Sobolev norms, smooth atoms, and the quantum torus
//! with its transference to operator-valued functions.

pub mod atoms;
pub mod config;
pub mod error;
pub mod exemplars;
pub mod grid;
pub mod io;
pub mod lp;
pub mod mat;
pub mod norms;
pub mod pdo;
pub mod qtorus;
pub mod rng;
pub mod symbol;

pub use error::{Error, Result};
pub use grid::{GridSpec, OpFn};
pub use num_complex::Complex64 as C64;
