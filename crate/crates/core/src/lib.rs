//! Simulation and design toolkit for space-time coded reconfigurable
//! intelligent surfaces.
//!
//! - [`codes`]: periodic cell codes, rotation and enumeration.
//! - [`harmonics`]: harmonic coefficients of a code, closed form and oracle.
//! - [`codebook`]: PSK codebooks built from shifts or exhaustive search.
//! - [`array`]: steering law and array-factor patterns.
//! - [`linksim`]: end-to-end baseband link with an FFT receiver.

pub mod array;
pub mod codebook;
pub mod codes;
pub mod export;
pub mod harmonics;
pub mod linksim;

pub use codes::{Alphabet, CellState, TimeCode};
pub use num_complex::Complex64;
