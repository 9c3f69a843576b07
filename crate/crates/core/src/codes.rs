//! Periodic cell-state codes.
//!
//! A [`TimeCode`] is the `L`-bit sequence that drives one cell (or one column
//! of cells) of the surface. Bit `m` is held for `bit_duration` seconds and the
//! whole sequence repeats with period `L * bit_duration`. Bits are addressed
//! 1-based (`m = 1..=L`) wherever a formula refers to them.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of codes an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodeError {
    #[error("empty code string")]
    Empty,
    #[error("invalid character {found:?} at position {position} for {alphabet} alphabet")]
    InvalidCharacter {
        /// 1-based position of the offending character.
        position: usize,
        found: char,
        alphabet: Alphabet,
    },
    #[error("bit duration must be finite and positive, got {0}")]
    InvalidBitDuration(f64),
    #[error("enumeration of {estimate} codes exceeds the cap of {cap}")]
    EnumerationCap { estimate: f64, cap: u64 },
    #[error("code length must be at least 1")]
    ZeroLength,
    #[error("column {column} has length {len} and bit duration {tau}, expected {expected_len} and {expected_tau}")]
    MismatchedColumn {
        column: usize,
        len: usize,
        tau: f64,
        expected_len: usize,
        expected_tau: f64,
    },
    #[error("a space-time code matrix needs at least one column")]
    NoColumns,
}

/// State set a cell may switch between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    /// On-off switching, `{0, 1}`, written `0`/`1`.
    #[default]
    Binary,
    /// `{0, 1∠0, 1∠π}`, written `0`/`+`/`-`.
    Ternary,
}

impl Alphabet {
    pub fn states(self) -> &'static [CellState] {
        match self {
            Alphabet::Binary => &[CellState::Off, CellState::On],
            Alphabet::Ternary => &[CellState::Off, CellState::On, CellState::Inverted],
        }
    }

    pub fn size(self) -> usize {
        self.states().len()
    }

    fn symbol(self, state: CellState) -> char {
        match (self, state) {
            (_, CellState::Off) => '0',
            (Alphabet::Binary, CellState::On) => '1',
            (Alphabet::Ternary, CellState::On) => '+',
            // Binary codes never hold an inverted state.
            (_, CellState::Inverted) => '-',
        }
    }

    fn parse_symbol(self, c: char) -> Option<CellState> {
        match (self, c) {
            (_, '0') => Some(CellState::Off),
            (Alphabet::Binary, '1') | (Alphabet::Ternary, '+') => Some(CellState::On),
            (Alphabet::Ternary, '-') => Some(CellState::Inverted),
            _ => None,
        }
    }

    /// Number of codes of length `len`, as a float so huge lengths do not overflow.
    pub fn count_estimate(self, len: usize) -> f64 {
        (self.size() as f64).powi(len as i32)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::Binary => f.write_str("binary"),
            Alphabet::Ternary => f.write_str("ternary"),
        }
    }
}

impl std::str::FromStr for Alphabet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Alphabet::Binary),
            "ternary" => Ok(Alphabet::Ternary),
            other => Err(format!(
                "unknown alphabet {other:?} (expected binary or ternary)"
            )),
        }
    }
}

/// Reflection weight of a cell during one bit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellState {
    Off,
    /// `1∠0`
    On,
    /// `1∠π`
    Inverted,
}

impl CellState {
    pub fn weight(self) -> Complex64 {
        match self {
            CellState::Off => Complex64::new(0.0, 0.0),
            CellState::On => Complex64::new(1.0, 0.0),
            CellState::Inverted => Complex64::new(-1.0, 0.0),
        }
    }

    pub fn is_zero(self) -> bool {
        self == CellState::Off
    }
}

/// An `L`-bit periodic cell code with bit duration `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCode {
    states: Vec<CellState>,
    bit_duration: f64,
    alphabet: Alphabet,
}

impl TimeCode {
    pub fn new(
        states: Vec<CellState>,
        bit_duration: f64,
        alphabet: Alphabet,
    ) -> Result<Self, CodeError> {
        if states.is_empty() {
            return Err(CodeError::Empty);
        }
        check_bit_duration(bit_duration)?;
        for (i, s) in states.iter().enumerate() {
            if !alphabet.states().contains(s) {
                return Err(CodeError::InvalidCharacter {
                    position: i + 1,
                    found: alphabet.symbol(*s),
                    alphabet,
                });
            }
        }
        Ok(Self {
            states,
            bit_duration,
            alphabet,
        })
    }

    /// Parses a code string, leftmost character is bit `m = 1`.
    pub fn parse(text: &str, bit_duration: f64, alphabet: Alphabet) -> Result<Self, CodeError> {
        if text.is_empty() {
            return Err(CodeError::Empty);
        }
        check_bit_duration(bit_duration)?;
        let states = text
            .chars()
            .enumerate()
            .map(|(i, c)| {
                alphabet.parse_symbol(c).ok_or(CodeError::InvalidCharacter {
                    position: i + 1,
                    found: c,
                    alphabet,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            states,
            bit_duration,
            alphabet,
        })
    }

    /// Decodes the `index`-th code of the lexicographic enumeration.
    pub fn from_index(
        index: u64,
        len: usize,
        bit_duration: f64,
        alphabet: Alphabet,
    ) -> Result<Self, CodeError> {
        if len == 0 {
            return Err(CodeError::ZeroLength);
        }
        check_bit_duration(bit_duration)?;
        let digits = alphabet.states();
        let base = digits.len() as u64;
        let mut states = vec![CellState::Off; len];
        let mut rest = index;
        for slot in states.iter_mut().rev() {
            *slot = digits[(rest % base) as usize];
            rest /= base;
        }
        Ok(Self {
            states,
            bit_duration,
            alphabet,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Always false; codes hold at least one bit.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn bit_duration(&self) -> f64 {
        self.bit_duration
    }

    /// Code period `L * tau` in seconds.
    pub fn period(&self) -> f64 {
        self.states.len() as f64 * self.bit_duration
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    /// State of bit `m`, 1-based.
    pub fn bit(&self, m: usize) -> Option<CellState> {
        m.checked_sub(1).and_then(|i| self.states.get(i).copied())
    }

    /// Cyclic rotation that advances the waveform in time by `s` bits:
    /// output bit `m` is input bit `((m + s - 1) mod L) + 1`.
    pub fn rotate(&self, s: i64) -> TimeCode {
        let len = self.states.len();
        let shift = s.rem_euclid(len as i64) as usize;
        let mut states = self.states.clone();
        states.rotate_left(shift);
        TimeCode {
            states,
            bit_duration: self.bit_duration,
            alphabet: self.alphabet,
        }
    }

    pub fn with_bit_duration(&self, bit_duration: f64) -> Result<TimeCode, CodeError> {
        check_bit_duration(bit_duration)?;
        Ok(TimeCode {
            bit_duration,
            ..self.clone()
        })
    }

    /// Number of non-off states.
    pub fn active_bits(&self) -> usize {
        self.states.iter().filter(|s| !s.is_zero()).count()
    }
}

impl fmt::Display for TimeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.states {
            write!(f, "{}", self.alphabet.symbol(*s))?;
        }
        Ok(())
    }
}

fn check_bit_duration(tau: f64) -> Result<(), CodeError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(CodeError::InvalidBitDuration(tau))
    }
}

/// Rejects enumerations larger than `cap`.
pub fn check_enumeration(len: usize, alphabet: Alphabet, cap: u64) -> Result<u64, CodeError> {
    if len == 0 {
        return Err(CodeError::ZeroLength);
    }
    let estimate = alphabet.count_estimate(len);
    if estimate > cap as f64 {
        return Err(CodeError::EnumerationCap { estimate, cap });
    }
    Ok((alphabet.size() as u64).pow(len as u32))
}

/// Lazy lexicographic stream over all codes of one length.
#[derive(Debug, Clone)]
pub struct CodeEnumeration {
    next: u64,
    total: u64,
    len: usize,
    bit_duration: f64,
    alphabet: Alphabet,
}

impl Iterator for CodeEnumeration {
    type Item = TimeCode;

    fn next(&mut self) -> Option<TimeCode> {
        if self.next >= self.total {
            return None;
        }
        let code = TimeCode::from_index(self.next, self.len, self.bit_duration, self.alphabet)
            .expect("enumeration parameters validated at construction");
        self.next += 1;
        Some(code)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for CodeEnumeration {}

/// Enumerates every code of length `len` in lexicographic order
/// (`0 < 1` for binary, `0 < + < -` for ternary).
pub fn enumerate_codes(
    len: usize,
    bit_duration: f64,
    alphabet: Alphabet,
    cap: u64,
) -> Result<CodeEnumeration, CodeError> {
    let total = check_enumeration(len, alphabet, cap)?;
    check_bit_duration(bit_duration)?;
    Ok(CodeEnumeration {
        next: 0,
        total,
        len,
        bit_duration,
        alphabet,
    })
}

/// Per-column codes of a space-time coded surface. All columns share `L` and `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeCodeMatrix {
    columns: Vec<TimeCode>,
}

impl SpaceTimeCodeMatrix {
    pub fn new(columns: Vec<TimeCode>) -> Result<Self, CodeError> {
        let first = columns.first().ok_or(CodeError::NoColumns)?;
        let (len, tau) = (first.len(), first.bit_duration());
        for (k, c) in columns.iter().enumerate() {
            if c.len() != len || c.bit_duration() != tau {
                return Err(CodeError::MismatchedColumn {
                    column: k,
                    len: c.len(),
                    tau: c.bit_duration(),
                    expected_len: len,
                    expected_tau: tau,
                });
            }
        }
        Ok(Self { columns })
    }

    /// Column `k` carries `base` rotated by `k * shift` bits.
    pub fn shifted(base: &TimeCode, columns: usize, shift: i64) -> Result<Self, CodeError> {
        Self::new(
            (0..columns)
                .map(|k| base.rotate(k as i64 * shift))
                .collect(),
        )
    }

    pub fn columns(&self) -> &[TimeCode] {
        &self.columns
    }

    pub fn code_length(&self) -> usize {
        self.columns[0].len()
    }
}
