//! Harmonic coefficients generated by periodic time coding.
//!
//! Each bit of an `L`-bit code contributes one complex vector to the `n`-th
//! harmonic,
//!
//! ```text
//! B_m = A_m / L * sinc(pi n / L) * exp(-j n (2m - 1) pi / L)
//! ```
//!
//! and the harmonic coefficient is the sum of those vectors. Coefficients are
//! normalized to a unit-amplitude carrier. [`oracle_coefficient`] integrates the
//! piecewise-constant waveform directly and is kept independent of the
//! closed form so the two can check each other.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::codes::{check_enumeration, Alphabet, CodeError, TimeCode};
use crate::export::{fmt_num, phase_deg};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicsError {
    #[error("bit index {m} out of range 1..={len}")]
    BitIndex { m: usize, len: usize },
    #[error("oracle resolution {resolution} below the minimum of {minimum} samples per period")]
    Resolution { resolution: usize, minimum: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `sinc(pi n / L)`, exactly zero at nonzero multiples of `L`.
fn harmonic_envelope(n: i64, len: usize) -> f64 {
    let len = len as i64;
    if n != 0 && n % len == 0 {
        return 0.0;
    }
    sinc(PI * n.unsigned_abs() as f64 / len as f64)
}

/// `exp(-j n (2m - 1) pi / L)` with the angle reduced in integer arithmetic.
fn bit_phasor(n: i64, m: usize, len: usize) -> Complex64 {
    let two_l = 2 * len as i128;
    let k = (n as i128 * (2 * m as i128 - 1)).rem_euclid(two_l);
    Complex64::from_polar(1.0, -PI * k as f64 / len as f64)
}

/// Contribution of bit `m` (1-based) to harmonic `n`.
pub fn bit_vector(code: &TimeCode, m: usize, n: i64) -> Result<Complex64, HarmonicsError> {
    let state = code
        .bit(m)
        .ok_or(HarmonicsError::BitIndex { m, len: code.len() })?;
    if state.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let len = code.len();
    let scale = harmonic_envelope(n, len) / len as f64;
    Ok(state.weight() * bit_phasor(n, m, len) * scale)
}

/// Closed-form `n`-th harmonic coefficient: the sum of all bit vectors.
pub fn harmonic_coefficient(code: &TimeCode, n: i64) -> Complex64 {
    let len = code.len();
    let envelope = harmonic_envelope(n, len);
    if envelope == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // Away from multiples of L the bit phasors sum to zero, so a common
    // level can be removed; constant codes then give exact zeros.
    let level = if n.rem_euclid(len as i64) == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        code.states()[0].weight()
    };
    let sum: Complex64 = code
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.weight() != level)
        .map(|(i, s)| (s.weight() - level) * bit_phasor(n, i + 1, len))
        .sum();
    sum * (envelope / len as f64)
}

/// Fourier coefficient `(1/T) * integral_0^T w(t) exp(-j 2 pi n t / T) dt` of
/// the piecewise-constant waveform, integrated exactly on `resolution`
/// sub-intervals per period.
pub fn oracle_coefficient(
    code: &TimeCode,
    n: i64,
    resolution: usize,
) -> Result<Complex64, HarmonicsError> {
    let len = code.len();
    let minimum = 16 * len;
    if resolution < minimum {
        return Err(HarmonicsError::Resolution {
            resolution,
            minimum,
        });
    }
    let pieces_per_bit = resolution.div_ceil(len);
    let total_pieces = (pieces_per_bit * len) as f64;
    let omega = 2.0 * PI * n as f64;
    // Integral of exp(-j omega u) over [u0, u1], u = t / T.
    let segment = |u0: f64, u1: f64| -> Complex64 {
        if n == 0 {
            Complex64::new(u1 - u0, 0.0)
        } else {
            let e0 = Complex64::from_polar(1.0, -omega * u0);
            let e1 = Complex64::from_polar(1.0, -omega * u1);
            (e0 - e1) / Complex64::new(0.0, omega)
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, state) in code.states().iter().enumerate() {
        if state.is_zero() {
            continue;
        }
        let mut bit_sum = Complex64::new(0.0, 0.0);
        for p in 0..pieces_per_bit {
            let start = (i * pieces_per_bit + p) as f64 / total_pieces;
            let end = (i * pieces_per_bit + p + 1) as f64 / total_pieces;
            bit_sum += segment(start, end);
        }
        acc += state.weight() * bit_sum;
    }
    Ok(acc)
}

/// Amplitude and phase of one generated harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPoint {
    pub order: i64,
    /// Offset from the carrier, `n / (L tau)`.
    pub frequency_hz: f64,
    pub coefficient: Complex64,
}

/// Harmonics `-n_max..=n_max` of a code.
pub fn spectrum(code: &TimeCode, n_max: u32) -> Vec<HarmonicPoint> {
    let n_max = n_max as i64;
    let spacing = 1.0 / code.period();
    (-n_max..=n_max)
        .map(|n| HarmonicPoint {
            order: n,
            frequency_hz: n as f64 * spacing,
            coefficient: harmonic_coefficient(code, n),
        })
        .collect()
}

/// Every achievable coefficient of one harmonic for one code length.
#[derive(Debug, Clone)]
pub struct ConstellationMap {
    pub len: usize,
    pub order: i64,
    pub alphabet: Alphabet,
    pub points: Vec<(TimeCode, Complex64)>,
}

impl ConstellationMap {
    /// Point with the largest magnitude; ties within `1e-12` go to the
    /// earliest (lexicographically smallest) code.
    pub fn strongest(&self) -> Option<&(TimeCode, Complex64)> {
        let max = self
            .points
            .iter()
            .map(|(_, c)| c.norm())
            .fold(0.0f64, f64::max);
        self.points.iter().find(|(_, c)| c.norm() >= max - 1e-12)
    }
}

/// Enumerates all `a^L` codes and their harmonic-`n` coefficients, in
/// lexicographic code order.
pub fn constellation_map(
    len: usize,
    n: i64,
    alphabet: Alphabet,
    bit_duration: f64,
    cap: u64,
) -> Result<ConstellationMap, HarmonicsError> {
    let total = check_enumeration(len, alphabet, cap)?;
    // Validates the bit duration once.
    TimeCode::from_index(0, len, bit_duration, alphabet)?;
    let points = (0..total)
        .into_par_iter()
        .map(|idx| {
            let code =
                TimeCode::from_index(idx, len, bit_duration, alphabet).expect("validated above");
            let c = harmonic_coefficient(&code, n);
            (code, c)
        })
        .collect();
    Ok(ConstellationMap {
        len,
        order: n,
        alphabet,
        points,
    })
}

/// Writes `n,freq_hz,re,im,mag,phase_deg` rows.
pub fn write_spectrum_csv<W: Write>(mut out: W, points: &[HarmonicPoint]) -> io::Result<()> {
    writeln!(out, "n,freq_hz,re,im,mag,phase_deg")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.order,
            fmt_num(p.frequency_hz),
            fmt_num(p.coefficient.re),
            fmt_num(p.coefficient.im),
            fmt_num(p.coefficient.norm()),
            fmt_num(phase_deg(p.coefficient)),
        )?;
    }
    Ok(())
}

/// Writes `code,re,im,mag,phase_deg` rows.
pub fn write_map_csv<W: Write>(mut out: W, map: &ConstellationMap) -> io::Result<()> {
    writeln!(out, "code,re,im,mag,phase_deg")?;
    for (code, c) in &map.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            code,
            fmt_num(c.re),
            fmt_num(c.im),
            fmt_num(c.norm()),
            fmt_num(phase_deg(*c)),
        )?;
    }
    Ok(())
}
