//! PSK codebooks: one time code per symbol, chosen so that the symbols'
//! harmonic-`n` coefficients sit on a ring at uniformly spaced phases.
//!
//! Two constructions are provided. [`design_by_shift`] rotates a single base
//! code, which by the shift theorem moves the harmonic phase by `2 pi n s / L`
//! while keeping the magnitude. [`search_codebook`] enumerates every code of
//! a given length and picks the largest ring the targets can share.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{Alphabet, CodeError, TimeCode, DEFAULT_ENUMERATION_CAP};
use crate::harmonics::{constellation_map, harmonic_coefficient, HarmonicsError};

/// Coefficients at or below this magnitude are treated as zero.
pub const MIN_COEFFICIENT: f64 = 1e-9;

/// Default leakage ratio above which a symbol is flagged.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 0.25;

/// Float comparisons in tie-breaking treat values this close as equal.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodebookError {
    #[error("modulation order {0} is not a power of two >= 2")]
    InvalidOrder(usize),
    #[error("phase offset must be finite")]
    InvalidOffset,
    #[error("scheme unreachable by shifts for (L={len}, n={harmonic}, M={order})")]
    UnreachableByShift {
        len: usize,
        harmonic: i64,
        order: usize,
    },
    #[error("base code {code} has a zero harmonic-{harmonic} coefficient")]
    ZeroBaseCoefficient { code: String, harmonic: i64 },
    #[error("amplitude tolerance {0} outside (0, 0.5]")]
    AmplitudeTolerance(f64),
    #[error("phase tolerance {tol} outside (0, pi/{order}]")]
    PhaseTolerance { tol: f64, order: usize },
    #[error("no feasible ring; best phase error per target (rad): {}", fmt_errors(.best_phase_error))]
    Infeasible {
        /// Smallest phase error any nonzero code achieves for each target,
        /// `inf` when no code has a nonzero coefficient.
        best_phase_error: Vec<f64>,
    },
    #[error("symbol {symbol} has a zero harmonic coefficient, leakage undefined")]
    ZeroSymbolCoefficient { symbol: usize },
    #[error("payload of {bits} bits is not a multiple of {required}")]
    IndivisiblePayload { bits: usize, required: usize },
    #[error("repetitions must be at least 1")]
    ZeroRepetitions,
    #[error("invalid codebook document: {0}")]
    Document(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
}

fn fmt_errors(errs: &[f64]) -> String {
    errs.iter()
        .enumerate()
        .map(|(k, e)| format!("{k}:{e:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// M-PSK target phases in harmonic `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationScheme {
    order: usize,
    harmonic: i64,
    phase_offset: f64,
}

impl ModulationScheme {
    pub fn new(order: usize, harmonic: i64, phase_offset: f64) -> Result<Self, CodebookError> {
        if order < 2 || !order.is_power_of_two() {
            return Err(CodebookError::InvalidOrder(order));
        }
        if !phase_offset.is_finite() {
            return Err(CodebookError::InvalidOffset);
        }
        Ok(Self {
            order,
            harmonic,
            phase_offset: phase_offset.rem_euclid(TAU),
        })
    }

    pub fn bpsk(harmonic: i64) -> Self {
        Self::new(2, harmonic, 0.0).unwrap()
    }

    pub fn qpsk(harmonic: i64) -> Self {
        Self::new(4, harmonic, 0.0).unwrap()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn harmonic(&self) -> i64 {
        self.harmonic
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn target_phase(&self, k: usize) -> f64 {
        self.phase_offset + TAU * k as f64 / self.order as f64
    }

    pub fn target_phases(&self) -> Vec<f64> {
        (0..self.order).map(|k| self.target_phase(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub symbol: usize,
    pub code: TimeCode,
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub max_phase_err_rad: f64,
    /// Largest relative deviation of an entry magnitude from the ring amplitude.
    pub amp_spread: f64,
    /// Largest of `|c_{2n}| / |c_n|` and `|c_{n+1}| / |c_n|` over all entries.
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    scheme: ModulationScheme,
    ring_amplitude: f64,
    entries: Vec<CodebookEntry>,
    quality: Quality,
}

impl Codebook {
    fn assemble(
        scheme: ModulationScheme,
        ring_amplitude: f64,
        entries: Vec<CodebookEntry>,
    ) -> Self {
        let n = scheme.harmonic;
        let mut quality = Quality {
            max_phase_err_rad: 0.0,
            amp_spread: 0.0,
            leakage: 0.0,
        };
        for e in &entries {
            let mag = e.coefficient.norm();
            let err = wrap_pi(e.coefficient.arg() - scheme.target_phase(e.symbol)).abs();
            quality.max_phase_err_rad = quality.max_phase_err_rad.max(err);
            quality.amp_spread = quality.amp_spread.max((mag / ring_amplitude - 1.0).abs());
            if mag > 0.0 {
                let (second, adjacent) = leakage_ratios(&e.code, n, mag);
                quality.leakage = quality.leakage.max(second).max(adjacent);
            }
        }
        Self {
            scheme,
            ring_amplitude,
            entries,
            quality,
        }
    }

    pub fn scheme(&self) -> &ModulationScheme {
        &self.scheme
    }

    pub fn ring_amplitude(&self) -> f64 {
        self.ring_amplitude
    }

    /// Entries ordered by symbol index.
    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn quality(&self) -> &Quality {
        &self.quality
    }

    pub fn code_length(&self) -> usize {
        self.entries[0].code.len()
    }

    pub fn bit_duration(&self) -> f64 {
        self.entries[0].code.bit_duration()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.entries[0].code.alphabet()
    }

    pub fn code(&self, symbol: usize) -> &TimeCode {
        &self.entries[symbol].code
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.coefficient).collect()
    }

    /// Index of the entry whose coefficient is nearest to `z`.
    pub fn nearest_symbol(&self, z: Complex64) -> usize {
        self.entries
            .iter()
            .map(|e| (e.symbol, (z - e.coefficient).norm_sqr()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s)
            .expect("codebooks are never empty")
    }

    pub fn to_document(&self) -> CodebookDocument {
        CodebookDocument {
            scheme: SchemeDocument {
                order: self.scheme.order,
                harmonic: self.scheme.harmonic,
                code_length: self.code_length(),
                phase_offset_rad: self.scheme.phase_offset,
                alphabet: self.alphabet(),
            },
            bit_duration_s: self.bit_duration(),
            ring_amplitude: self.ring_amplitude,
            entries: self
                .entries
                .iter()
                .map(|e| EntryDocument {
                    symbol: e.symbol,
                    code: e.code.to_string(),
                    coeff: ComplexDocument {
                        re: e.coefficient.re,
                        im: e.coefficient.im,
                    },
                })
                .collect(),
            quality: self.quality,
        }
    }

    /// Rebuilds a codebook from its document. Coefficients are recomputed
    /// from the codes; the stored ones are only checked for consistency.
    pub fn from_document(doc: &CodebookDocument) -> Result<Self, CodebookError> {
        let scheme = ModulationScheme::new(
            doc.scheme.order,
            doc.scheme.harmonic,
            doc.scheme.phase_offset_rad,
        )?;
        if doc.entries.len() != scheme.order {
            return Err(CodebookError::Document(format!(
                "{} entries for a {}-ary scheme",
                doc.entries.len(),
                scheme.order
            )));
        }
        let mut entries = Vec::with_capacity(scheme.order);
        for (k, e) in doc.entries.iter().enumerate() {
            if e.symbol != k {
                return Err(CodebookError::Document(format!(
                    "entry {k} carries symbol {}",
                    e.symbol
                )));
            }
            let code = TimeCode::parse(&e.code, doc.bit_duration_s, doc.scheme.alphabet)?;
            if code.len() != doc.scheme.code_length {
                return Err(CodebookError::Document(format!(
                    "code {} is not {} bits long",
                    e.code, doc.scheme.code_length
                )));
            }
            let coefficient = harmonic_coefficient(&code, scheme.harmonic);
            let stored = Complex64::new(e.coeff.re, e.coeff.im);
            if (stored - coefficient).norm() > 1e-9 {
                return Err(CodebookError::Document(format!(
                    "stored coefficient of symbol {k} does not match code {}",
                    e.code
                )));
            }
            entries.push(CodebookEntry {
                symbol: k,
                code,
                coefficient,
            });
        }
        Ok(Self::assemble(scheme, doc.ring_amplitude, entries))
    }
}

/// Serialized codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub scheme: SchemeDocument,
    pub bit_duration_s: f64,
    pub ring_amplitude: f64,
    pub entries: Vec<EntryDocument>,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDocument {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "n")]
    pub harmonic: i64,
    #[serde(rename = "L")]
    pub code_length: usize,
    #[serde(default)]
    pub phase_offset_rad: f64,
    #[serde(default)]
    pub alphabet: Alphabet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDocument {
    pub symbol: usize,
    pub code: String,
    pub coeff: ComplexDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexDocument {
    pub re: f64,
    pub im: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Finds the shift step `s` and the symbol-index multiplier such that symbol
/// `k` is the base rotated by `(k * multiplier mod M) * s` bits.
fn shift_step(len: usize, harmonic: i64, order: usize) -> Option<(i64, usize)> {
    let len_i = len as i64;
    let m = order as i64;
    let mut fallback = None;
    for s in 1..=len_i {
        let prod = harmonic * s * m;
        if prod.rem_euclid(len_i) != 0 || (harmonic * s).rem_euclid(len_i) == 0 {
            continue;
        }
        // Phase step is 2 pi j / M.
        let j = (prod / len_i).rem_euclid(m) as u64;
        if gcd(j, order as u64) != 1 {
            continue;
        }
        if j == 1 {
            return Some((s, 1));
        }
        if fallback.is_none() {
            let inverse = (1..order).find(|&x| (x as u64 * j) % order as u64 == 1)?;
            fallback = Some((s, inverse));
        }
    }
    fallback
}

/// Builds a codebook from cyclic rotations of `base`.
///
/// The returned scheme's phase offset is the base code's own harmonic phase;
/// symbol `k` then sits exactly at `offset + 2 pi k / M`.
pub fn design_by_shift(
    base: &TimeCode,
    scheme: &ModulationScheme,
) -> Result<Codebook, CodebookError> {
    let n = scheme.harmonic;
    let base_coeff = harmonic_coefficient(base, n);
    if base_coeff.norm() <= MIN_COEFFICIENT {
        return Err(CodebookError::ZeroBaseCoefficient {
            code: base.to_string(),
            harmonic: n,
        });
    }
    let (step, multiplier) =
        shift_step(base.len(), n, scheme.order).ok_or(CodebookError::UnreachableByShift {
            len: base.len(),
            harmonic: n,
            order: scheme.order,
        })?;
    let entries = (0..scheme.order)
        .map(|k| {
            let code = base.rotate(((k * multiplier) % scheme.order) as i64 * step);
            let coefficient = harmonic_coefficient(&code, n);
            CodebookEntry {
                symbol: k,
                code,
                coefficient,
            }
        })
        .collect();
    let scheme = ModulationScheme::new(scheme.order, n, base_coeff.arg())?;
    Ok(Codebook::assemble(scheme, base_coeff.norm(), entries))
}

/// Lexicographically smallest code with the largest harmonic-`n` magnitude.
pub fn strongest_code(
    len: usize,
    harmonic: i64,
    alphabet: Alphabet,
    bit_duration: f64,
) -> Result<TimeCode, CodebookError> {
    let map = constellation_map(
        len,
        harmonic,
        alphabet,
        bit_duration,
        DEFAULT_ENUMERATION_CAP,
    )?;
    let (code, c) = map.strongest().expect("maps are never empty");
    if c.norm() <= MIN_COEFFICIENT {
        return Err(CodebookError::ZeroBaseCoefficient {
            code: code.to_string(),
            harmonic,
        });
    }
    Ok(code.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Relative half-width of the magnitude window around the ring.
    pub amp_tol: f64,
    /// Largest accepted phase error in radians.
    pub phase_tol: f64,
    pub alphabet: Alphabet,
    pub bit_duration: f64,
    pub cap: u64,
}

impl SearchOptions {
    pub fn new(amp_tol: f64, phase_tol: f64) -> Self {
        Self {
            amp_tol,
            phase_tol,
            alphabet: Alphabet::Binary,
            bit_duration: crate::linksim::DEFAULT_BIT_DURATION,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    magnitude: f64,
    phase_error: f64,
}

fn cmp_eps(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= TIE_EPS {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Exhaustive codebook search.
///
/// Picks the largest ring amplitude `A` such that every target phase has a
/// code with `|c_n|` in `[A(1 - amp_tol), A(1 + amp_tol)]` and phase error at
/// most `phase_tol`. Within that window each symbol takes the code with the
/// smallest phase error, then the smallest leakage, then the
/// lexicographically smallest code. The reported ring amplitude is the
/// midrange of the chosen magnitudes.
pub fn search_codebook(
    len: usize,
    scheme: &ModulationScheme,
    opts: &SearchOptions,
) -> Result<Codebook, CodebookError> {
    let order = scheme.order;
    if !(opts.amp_tol > 0.0 && opts.amp_tol <= 0.5) {
        return Err(CodebookError::AmplitudeTolerance(opts.amp_tol));
    }
    if !(opts.phase_tol > 0.0 && opts.phase_tol <= PI / order as f64 + 1e-15) {
        return Err(CodebookError::PhaseTolerance {
            tol: opts.phase_tol,
            order,
        });
    }
    let n = scheme.harmonic;
    let map = constellation_map(len, n, opts.alphabet, opts.bit_duration, opts.cap)?;
    let step = TAU / order as f64;

    let mut per_target: Vec<Vec<Candidate>> = vec![Vec::new(); order];
    let mut best_error = vec![f64::INFINITY; order];
    for (index, (_, c)) in map.points.iter().enumerate() {
        let magnitude = c.norm();
        if magnitude <= MIN_COEFFICIENT {
            continue;
        }
        let rel = c.arg() - scheme.phase_offset;
        let nearest = (rel / step).round() as i64;
        for k in [nearest - 1, nearest, nearest + 1] {
            let k = k.rem_euclid(order as i64) as usize;
            let phase_error = wrap_pi(c.arg() - scheme.target_phase(k)).abs();
            if phase_error < best_error[k] {
                best_error[k] = phase_error;
            }
            if phase_error <= opts.phase_tol
                && !per_target[k].iter().any(|cand| cand.index == index)
            {
                per_target[k].push(Candidate {
                    index,
                    magnitude,
                    phase_error,
                });
            }
        }
    }
    let infeasible = || CodebookError::Infeasible {
        best_phase_error: best_error.clone(),
    };
    if per_target.iter().any(|c| c.is_empty()) {
        return Err(infeasible());
    }

    let lo_scale = 1.0 - opts.amp_tol;
    let hi_scale = 1.0 + opts.amp_tol;
    let slack = 1.0 + TIE_EPS;
    let mut sorted: Vec<Vec<f64>> = per_target
        .iter()
        .map(|cands| {
            let mut m: Vec<f64> = cands.iter().map(|c| c.magnitude).collect();
            m.sort_by(f64::total_cmp);
            m
        })
        .collect();
    for m in &mut sorted {
        m.dedup();
    }
    let covers = |mags: &[f64], lo: f64, hi: f64| {
        let i = mags.partition_point(|&m| m < lo);
        i < mags.len() && mags[i] <= hi
    };
    let mut rings: Vec<f64> = sorted.iter().flatten().map(|m| m / lo_scale).collect();
    rings.sort_by(|a, b| b.total_cmp(a));
    rings.dedup();
    let ring = rings
        .into_iter()
        .find(|&a| {
            let (lo, hi) = (a * lo_scale / slack, a * hi_scale * slack);
            sorted.iter().all(|mags| covers(mags, lo, hi))
        })
        .ok_or_else(infeasible)?;
    let (lo, hi) = (ring * lo_scale / slack, ring * hi_scale * slack);

    let mut entries = Vec::with_capacity(order);
    for (k, cands) in per_target.iter().enumerate() {
        let chosen = cands
            .iter()
            .filter(|c| c.magnitude >= lo && c.magnitude <= hi)
            .map(|c| {
                let code = &map.points[c.index].0;
                let (second, adjacent) = leakage_ratios(code, n, c.magnitude);
                (c, second.max(adjacent))
            })
            .min_by(|(a, la), (b, lb)| {
                cmp_eps(a.phase_error, b.phase_error)
                    .then(cmp_eps(*la, *lb))
                    .then(a.index.cmp(&b.index))
            })
            .map(|(c, _)| c)
            .ok_or_else(infeasible)?;
        let (code, coefficient) = map.points[chosen.index].clone();
        entries.push(CodebookEntry {
            symbol: k,
            code,
            coefficient,
        });
    }
    let (min_mag, max_mag) = entries.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
        let m = e.coefficient.norm();
        (lo.min(m), hi.max(m))
    });
    Ok(Codebook::assemble(
        *scheme,
        0.5 * (min_mag + max_mag),
        entries,
    ))
}

fn leakage_ratios(code: &TimeCode, n: i64, magnitude: f64) -> (f64, f64) {
    let second = harmonic_coefficient(code, 2 * n).norm() / magnitude;
    let adjacent = harmonic_coefficient(code, n + 1).norm() / magnitude;
    (second, adjacent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolLeakage {
    pub symbol: usize,
    /// `|c_{2n}| / |c_n|`
    pub second_harmonic: f64,
    /// `|c_{n+1}| / |c_n|`
    pub adjacent_harmonic: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub symbols: Vec<SymbolLeakage>,
    pub max_second_harmonic: f64,
    pub max_adjacent_harmonic: f64,
    pub threshold: f64,
}

impl LeakageReport {
    pub fn max(&self) -> f64 {
        self.max_second_harmonic.max(self.max_adjacent_harmonic)
    }

    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.symbols.iter().filter(|s| s.flagged).map(|s| s.symbol)
    }
}

/// Per-symbol leakage into the neighbouring and doubled harmonic.
pub fn leakage_metrics(book: &Codebook, threshold: f64) -> Result<LeakageReport, CodebookError> {
    let n = book.scheme.harmonic;
    let mut symbols = Vec::with_capacity(book.entries.len());
    for e in &book.entries {
        let mag = e.coefficient.norm();
        if mag <= MIN_COEFFICIENT {
            return Err(CodebookError::ZeroSymbolCoefficient { symbol: e.symbol });
        }
        let (second, adjacent) = leakage_ratios(&e.code, n, mag);
        symbols.push(SymbolLeakage {
            symbol: e.symbol,
            second_harmonic: second,
            adjacent_harmonic: adjacent,
            flagged: second > threshold || adjacent > threshold,
        });
    }
    Ok(LeakageReport {
        max_second_harmonic: symbols
            .iter()
            .map(|s| s.second_harmonic)
            .fold(0.0, f64::max),
        max_adjacent_harmonic: symbols
            .iter()
            .map(|s| s.adjacent_harmonic)
            .fold(0.0, f64::max),
        symbols,
        threshold,
    })
}

pub fn gray_encode(k: usize) -> usize {
    k ^ (k >> 1)
}

pub fn gray_decode(g: usize) -> usize {
    let mut k = g;
    let mut shift = g >> 1;
    while shift != 0 {
        k ^= shift;
        shift >>= 1;
    }
    k
}

/// Groups payload bits (MSB first) into Gray-mapped symbol indices.
pub fn bits_to_symbols(payload: &[bool], order: usize) -> Result<Vec<usize>, CodebookError> {
    if order < 2 || !order.is_power_of_two() {
        return Err(CodebookError::InvalidOrder(order));
    }
    let width = order.trailing_zeros() as usize;
    if !payload.len().is_multiple_of(width) {
        return Err(CodebookError::IndivisiblePayload {
            bits: payload.len(),
            required: width,
        });
    }
    Ok(payload
        .chunks(width)
        .map(|chunk| gray_decode(chunk.iter().fold(0, |acc, &b| (acc << 1) | b as usize)))
        .collect())
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[usize], order: usize) -> Vec<bool> {
    let width = order.trailing_zeros() as usize;
    symbols
        .iter()
        .flat_map(|&s| {
            let g = gray_encode(s);
            (0..width).rev().map(move |i| (g >> i) & 1 == 1)
        })
        .collect()
}

/// One code per bit interval group: each symbol's code repeated `reps` times.
pub fn symbols_to_schedule(
    book: &Codebook,
    symbols: &[usize],
    reps: usize,
) -> Result<Vec<TimeCode>, CodebookError> {
    if reps == 0 {
        return Err(CodebookError::ZeroRepetitions);
    }
    Ok(symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(book.code(s).clone(), reps))
        .collect())
}

/// Gray-maps `payload` onto codebook symbols and expands to a code schedule.
pub fn map_bits_to_schedule(
    book: &Codebook,
    payload: &[bool],
    reps: usize,
) -> Result<Vec<TimeCode>, CodebookError> {
    if reps == 0 {
        return Err(CodebookError::ZeroRepetitions);
    }
    let symbols = bits_to_symbols(payload, book.scheme.order)?;
    symbols_to_schedule(book, &symbols, reps)
}

impl fmt::Display for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}-PSK on harmonic {} (L={}), ring {:.6}",
            self.scheme.order,
            self.scheme.harmonic,
            self.code_length(),
            self.ring_amplitude
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "  {:>2}  {}  |c|={:.6}  {:8.3} deg",
                e.symbol,
                e.code,
                e.coefficient.norm(),
                e.coefficient.arg().to_degrees()
            )?;
        }
        Ok(())
    }
}
