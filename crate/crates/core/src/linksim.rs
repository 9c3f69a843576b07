//! End-to-end baseband simulation of a space-time coded surface link.
//!
//! The illuminating carrier is modeled as a complex tone at `f_offset` (the
//! receiver's downconverted view of it). Every column reflects the tone with
//! a piecewise-constant coefficient driven by its code schedule, the columns
//! add up with the geometric phase of the receiver direction, and a channel
//! model is applied. The receiver is genie-synchronized: it correlates each
//! symbol window against the wanted harmonic, removes a common complex gain
//! estimated from leading pilot symbols and decides the nearest codebook
//! point.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{ArrayError, ArrayGeometry};
use crate::codebook::{
    bits_to_symbols, design_by_shift, search_codebook, strongest_code, Codebook, CodebookError,
    ComplexDocument, ModulationScheme, SearchOptions,
};
use crate::codes::{Alphabet, CellState, CodeError, TimeCode, DEFAULT_ENUMERATION_CAP};
use crate::export::fmt_num;

/// Bit duration of the reference measurement, in seconds.
pub const DEFAULT_BIT_DURATION: f64 = 3.74e-3;
/// Carrier offset of the reference measurement, in hertz.
pub const DEFAULT_F_OFFSET: f64 = 500e3;
/// Carrier offset of the reduced-rate profile used for quick runs.
pub const FAST_F_OFFSET: f64 = 2e3;

const PAYLOAD_STREAM: u64 = 0;
const NOISE_STREAM_BASE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sample rate {sample_rate} Hz below the required {required} Hz")]
    Nyquist { sample_rate: f64, required: f64 },
    #[error("bit duration spans {0} samples; need an integer count of at least 8")]
    SamplesPerBit(f64),
    #[error("received {got} samples, expected {expected} for the symbol windows")]
    WindowMismatch { expected: usize, got: usize },
    #[error("pilot unusable")]
    PilotUnusable,
    #[error("negative or undefined noise power ({0})")]
    NegativeNoise(f64),
    #[error("record of {got} samples shorter than one code period ({needed})")]
    RecordTooShort { got: usize, needed: usize },
    #[error("column schedules differ in length or timing")]
    ScheduleMismatch,
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Array(#[from] ArrayError),
}

/// One delayed, scaled copy of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub gain: ComplexDocument,
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelModel {
    #[default]
    Ideal,
    Awgn {
        es_n0_db: f64,
    },
    Multipath {
        taps: Vec<Tap>,
        #[serde(default)]
        es_n0_db: Option<f64>,
    },
}

impl ChannelModel {
    /// Synthetic office profile: taps at 0, -6 and -12 dB delayed by 0, 0.5
    /// and 1.2 bit durations. Not a measured channel.
    pub fn office(bit_duration: f64, es_n0_db: Option<f64>) -> Self {
        let tap = |db: f64, frac: f64| Tap {
            gain: ComplexDocument {
                re: 10f64.powf(db / 20.0),
                im: 0.0,
            },
            delay_s: frac * bit_duration,
        };
        ChannelModel::Multipath {
            taps: vec![tap(0.0, 0.0), tap(-6.0, 0.5), tap(-12.0, 1.2)],
            es_n0_db,
        }
    }

    fn es_n0_db(&self) -> Option<f64> {
        match self {
            ChannelModel::Ideal => None,
            ChannelModel::Awgn { es_n0_db } => Some(*es_n0_db),
            ChannelModel::Multipath { es_n0_db, .. } => *es_n0_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DesignMethod {
    #[default]
    Shift,
    Search,
}

/// How the link's codebook is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    pub order: usize,
    #[serde(default = "one")]
    pub harmonic: i64,
    #[serde(default)]
    pub method: DesignMethod,
    /// Base code for the shift method; defaults to the strongest code.
    #[serde(default)]
    pub base_code: Option<String>,
    #[serde(default)]
    pub phase_offset_rad: f64,
    #[serde(default = "default_amp_tol")]
    pub amp_tol: f64,
    /// Defaults to `pi / (2M)`.
    #[serde(default)]
    pub phase_tol: Option<f64>,
    #[serde(default)]
    pub alphabet: Alphabet,
}

fn one() -> i64 {
    1
}

fn default_amp_tol() -> f64 {
    0.05
}

impl ModulationConfig {
    pub fn psk(order: usize) -> Self {
        Self {
            order,
            harmonic: 1,
            method: DesignMethod::Shift,
            base_code: None,
            phase_offset_rad: 0.0,
            amp_tol: default_amp_tol(),
            phase_tol: None,
            alphabet: Alphabet::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Code length `L`.
    pub code_length: usize,
    /// Bit duration `tau` in seconds.
    #[serde(default = "default_bit_duration")]
    pub bit_duration: f64,
    #[serde(default = "default_f_offset")]
    pub f_offset: f64,
    pub sample_rate: f64,
    /// `(Gamma_off, Gamma_on)`.
    #[serde(default = "default_reflection")]
    pub reflection_states: [ComplexDocument; 2],
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub rx_angle_deg: f64,
    #[serde(default = "default_one_usize")]
    pub reps: usize,
    #[serde(default = "default_one_usize")]
    pub pilot_count: usize,
    #[serde(default)]
    pub seed: u64,
    pub modulation: ModulationConfig,
    /// Bit shift between adjacent columns.
    #[serde(default)]
    pub shift_per_column: i64,
    /// Number of data symbols after the pilots.
    pub data_symbols: usize,
    /// Half-width of the reported spectrum, in harmonic spacings.
    #[serde(default = "default_span")]
    pub spectrum_span_harmonics: u32,
}

fn default_bit_duration() -> f64 {
    DEFAULT_BIT_DURATION
}
fn default_f_offset() -> f64 {
    DEFAULT_F_OFFSET
}
fn default_one_usize() -> usize {
    1
}
fn default_span() -> u32 {
    8
}
fn default_reflection() -> [ComplexDocument; 2] {
    [
        ComplexDocument { re: 0.0, im: 0.0 },
        ComplexDocument { re: 1.0, im: 0.0 },
    ]
}

impl LinkConfig {
    fn profile(order: usize, code_length: usize, f_offset: f64, samples_per_bit: usize) -> Self {
        Self {
            code_length,
            bit_duration: DEFAULT_BIT_DURATION,
            f_offset,
            sample_rate: samples_per_bit as f64 / DEFAULT_BIT_DURATION,
            reflection_states: default_reflection(),
            channel: ChannelModel::Ideal,
            geometry: ArrayGeometry::default(),
            rx_angle_deg: 0.0,
            reps: 1,
            pilot_count: 1,
            seed: 0,
            modulation: ModulationConfig::psk(order),
            shift_per_column: 0,
            data_symbols: 100,
            spectrum_span_harmonics: default_span(),
        }
    }

    /// Reference timing: `tau = 3.74 ms`, 500 kHz offset, 7500 samples per bit.
    pub fn reference_profile(order: usize, code_length: usize) -> Self {
        Self::profile(order, code_length, DEFAULT_F_OFFSET, 7500)
    }

    /// Same timing with a 2 kHz offset and 40 samples per bit.
    pub fn fast_profile(order: usize, code_length: usize) -> Self {
        Self::profile(order, code_length, FAST_F_OFFSET, 40)
    }

    pub fn samples_per_bit(&self) -> Result<usize, LinkError> {
        let exact = self.bit_duration * self.sample_rate;
        let rounded = exact.round();
        if !exact.is_finite() || rounded < 8.0 || (exact - rounded).abs() > 1e-6 * exact {
            return Err(LinkError::SamplesPerBit(exact));
        }
        Ok(rounded as usize)
    }

    /// Samples in one symbol window, `reps * L * tau * fs`.
    pub fn window_samples(&self) -> Result<usize, LinkError> {
        Ok(self.reps * self.code_length * self.samples_per_bit()?)
    }

    pub fn code_period(&self) -> f64 {
        self.code_length as f64 * self.bit_duration
    }

    pub fn harmonic_spacing(&self) -> f64 {
        1.0 / self.code_period()
    }

    pub fn gamma_off(&self) -> Complex64 {
        let g = self.reflection_states[0];
        Complex64::new(g.re, g.im)
    }

    pub fn gamma_on(&self) -> Complex64 {
        let g = self.reflection_states[1];
        Complex64::new(g.re, g.im)
    }

    /// Reflection coefficient for one cell state; the states map linearly
    /// so that `0 -> Gamma_off` and `1 -> Gamma_on`.
    pub fn reflection(&self, state: CellState) -> Complex64 {
        let off = self.gamma_off();
        off + (self.gamma_on() - off) * state.weight()
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if self.code_length == 0 {
            return Err(LinkError::Config("code_length must be at least 1".into()));
        }
        if !(self.bit_duration.is_finite() && self.bit_duration > 0.0) {
            return Err(LinkError::Config("bit_duration must be positive".into()));
        }
        if !self.f_offset.is_finite() || !self.sample_rate.is_finite() {
            return Err(LinkError::Config(
                "f_offset and sample_rate must be finite".into(),
            ));
        }
        let required = 4.0 * (self.f_offset.abs() + 2.0 / self.code_period());
        if self.sample_rate < required {
            return Err(LinkError::Nyquist {
                sample_rate: self.sample_rate,
                required,
            });
        }
        self.samples_per_bit()?;
        if self.reps == 0 {
            return Err(LinkError::Config("reps must be at least 1".into()));
        }
        if self.pilot_count == 0 {
            return Err(LinkError::Config("pilot_count must be at least 1".into()));
        }
        if !(-90.0..=90.0).contains(&self.rx_angle_deg) {
            return Err(LinkError::Config(format!(
                "rx_angle_deg {} outside [-90, 90]",
                self.rx_angle_deg
            )));
        }
        self.geometry.validate()?;
        if let ChannelModel::Multipath { taps, .. } = &self.channel {
            if taps.is_empty()
                || taps
                    .iter()
                    .any(|t| !(t.delay_s >= 0.0 && t.delay_s.is_finite()))
            {
                return Err(LinkError::Config(
                    "multipath needs at least one tap with a finite non-negative delay".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Seeded ChaCha stream; distinct `stream` values never overlap.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the codebook described by `cfg.modulation`.
pub fn build_codebook(cfg: &LinkConfig) -> Result<Codebook, LinkError> {
    let m = &cfg.modulation;
    let scheme = ModulationScheme::new(m.order, m.harmonic, m.phase_offset_rad)?;
    let book = match m.method {
        DesignMethod::Shift => {
            let base = match &m.base_code {
                Some(text) => TimeCode::parse(text, cfg.bit_duration, m.alphabet)?,
                None => strongest_code(cfg.code_length, m.harmonic, m.alphabet, cfg.bit_duration)?,
            };
            if base.len() != cfg.code_length {
                return Err(LinkError::Config(format!(
                    "base code {} is not {} bits long",
                    base, cfg.code_length
                )));
            }
            design_by_shift(&base, &scheme)?
        }
        DesignMethod::Search => {
            let opts = SearchOptions {
                amp_tol: m.amp_tol,
                phase_tol: m.phase_tol.unwrap_or(PI / (2.0 * m.order as f64)),
                alphabet: m.alphabet,
                bit_duration: cfg.bit_duration,
                cap: DEFAULT_ENUMERATION_CAP,
            };
            search_codebook(cfg.code_length, &scheme, &opts)?
        }
    };
    Ok(book)
}

/// Pilots followed by data symbols and the per-column code schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// Symbol indices, pilots first.
    pub symbols: Vec<usize>,
    /// `schedules[k]` lists the codes column `k` plays, one per code period.
    pub schedules: Vec<Vec<TimeCode>>,
}

/// Draws a random payload from the seed's payload stream and lays it out
/// after `pilot_count` copies of symbol 0.
pub fn plan_transmission(cfg: &LinkConfig, book: &Codebook) -> Result<Transmission, LinkError> {
    let order = book.scheme().order();
    let width = book.scheme().bits_per_symbol();
    let mut rng = rng_stream(cfg.seed, PAYLOAD_STREAM);
    let payload: Vec<bool> = (0..cfg.data_symbols * width)
        .map(|_| rng.random())
        .collect();
    let mut symbols = vec![0usize; cfg.pilot_count];
    symbols.extend(bits_to_symbols(&payload, order)?);
    let schedules = column_schedules(
        book,
        &symbols,
        cfg.geometry.columns,
        cfg.shift_per_column,
        cfg.reps,
    )?;
    Ok(Transmission { symbols, schedules })
}

/// Column `k` plays each symbol's code advanced by `k * shift` bits, `reps` times.
pub fn column_schedules(
    book: &Codebook,
    symbols: &[usize],
    columns: usize,
    shift: i64,
    reps: usize,
) -> Result<Vec<Vec<TimeCode>>, LinkError> {
    if reps == 0 {
        return Err(CodebookError::ZeroRepetitions.into());
    }
    Ok((0..columns)
        .map(|k| {
            symbols
                .iter()
                .flat_map(|&s| std::iter::repeat_n(book.code(s).rotate(k as i64 * shift), reps))
                .collect()
        })
        .collect())
}

fn carrier(freq: f64, sample_rate: f64, i: usize) -> Complex64 {
    let cycles = freq * i as f64 / sample_rate;
    Complex64::from_polar(1.0, 2.0 * PI * (cycles - cycles.floor()))
}

/// Received samples for the given column schedules.
pub fn synthesize_rx_waveform(
    schedules: &[Vec<TimeCode>],
    cfg: &LinkConfig,
) -> Result<Vec<Complex64>, LinkError> {
    cfg.validate()?;
    let spb = cfg.samples_per_bit()?;
    let first = schedules.first().ok_or(LinkError::ScheduleMismatch)?;
    let periods = first.len();
    for sched in schedules {
        if sched.len() != periods
            || sched
                .iter()
                .any(|c| c.len() != cfg.code_length || c.bit_duration() != cfg.bit_duration)
        {
            return Err(LinkError::ScheduleMismatch);
        }
    }
    let spatial: Vec<Complex64> = (0..schedules.len())
        .map(|k| cfg.geometry.steering_factor(k, cfg.rx_angle_deg))
        .collect();
    let mut out = Vec::with_capacity(periods * cfg.code_length * spb);
    for p in 0..periods {
        for bit in 0..cfg.code_length {
            let level: Complex64 = schedules
                .iter()
                .zip(&spatial)
                .map(|(sched, a)| cfg.reflection(sched[p].states()[bit]) * a)
                .sum();
            let start = out.len();
            out.extend(
                (start..start + spb).map(|i| level * carrier(cfg.f_offset, cfg.sample_rate, i)),
            );
        }
    }
    Ok(out)
}

/// Main-lobe symbol amplitude the noise level is referenced to:
/// `ring * |Gamma_on - Gamma_off| * columns`.
pub fn reference_amplitude(cfg: &LinkConfig, book: &Codebook) -> f64 {
    book.ring_amplitude() * (cfg.gamma_on() - cfg.gamma_off()).norm() * cfg.geometry.columns as f64
}

/// Applies the configured channel. Noise is drawn from stream `noise_stream`
/// of the configured seed, with Es/N0 referenced to a symbol of amplitude
/// `symbol_amplitude` after the receiver's window correlation.
pub fn apply_channel(
    samples: &[Complex64],
    cfg: &LinkConfig,
    symbol_amplitude: f64,
    noise_stream: u64,
) -> Result<Vec<Complex64>, LinkError> {
    let mut out = match &cfg.channel {
        ChannelModel::Ideal | ChannelModel::Awgn { .. } => samples.to_vec(),
        ChannelModel::Multipath { taps, .. } => {
            let mut y = vec![Complex64::new(0.0, 0.0); samples.len()];
            for tap in taps {
                let delay = (tap.delay_s * cfg.sample_rate).round() as usize;
                let gain = Complex64::new(tap.gain.re, tap.gain.im);
                for (dst, src) in y.iter_mut().skip(delay).zip(samples) {
                    *dst += gain * src;
                }
            }
            y
        }
    };
    if let Some(db) = cfg.channel.es_n0_db() {
        let window = cfg.window_samples()? as f64;
        let es_n0 = 10f64.powf(db / 10.0);
        let variance = symbol_amplitude * symbol_amplitude * window / es_n0;
        if variance.is_nan() || variance < 0.0 || variance.is_infinite() {
            return Err(LinkError::NegativeNoise(variance));
        }
        if variance > 0.0 {
            let sigma = (variance / 2.0).sqrt();
            let mut rng = rng_stream(cfg.seed, noise_stream);
            for s in &mut out {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex64::new(re, im) * sigma;
            }
        }
    }
    Ok(out)
}

/// Single-frequency correlation of every symbol window at the wanted harmonic.
pub fn correlate_symbols(
    samples: &[Complex64],
    cfg: &LinkConfig,
    harmonic: i64,
    symbol_count: usize,
) -> Result<Vec<Complex64>, LinkError> {
    let window = cfg.window_samples()?;
    let expected = window * symbol_count;
    if samples.len() != expected {
        return Err(LinkError::WindowMismatch {
            expected,
            got: samples.len(),
        });
    }
    let freq = cfg.f_offset + harmonic as f64 * cfg.harmonic_spacing();
    Ok(samples
        .chunks(window)
        .enumerate()
        .map(|(j, chunk)| {
            let base = j * window;
            let acc: Complex64 = chunk
                .iter()
                .enumerate()
                .map(|(i, r)| r * carrier(freq, cfg.sample_rate, base + i).conj())
                .sum();
            acc / window as f64
        })
        .collect())
}

/// Power spectrum estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    /// Power relative to a unit-amplitude tone, in dB.
    pub power_db: Vec<f64>,
    pub resolution_hz: f64,
}

impl Psd {
    pub fn bin_of(&self, freq: f64) -> usize {
        let i = self.freqs_hz.partition_point(|&f| f < freq);
        if i == 0 {
            0
        } else if i >= self.freqs_hz.len() {
            self.freqs_hz.len() - 1
        } else if (self.freqs_hz[i] - freq).abs() < (freq - self.freqs_hz[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    pub fn power_at(&self, freq: f64) -> f64 {
        self.power_db[self.bin_of(freq)]
    }

    /// Strongest bin within `freq +/- halfwidth`, refined by a parabola on the dB values.
    pub fn peak_near(&self, freq: f64, halfwidth: f64) -> (f64, f64) {
        let lo = self.bin_of(freq - halfwidth);
        let hi = self.bin_of(freq + halfwidth);
        let best = (lo..=hi)
            .max_by(|&a, &b| self.power_db[a].total_cmp(&self.power_db[b]))
            .expect("non-empty range");
        if best == 0 || best + 1 >= self.freqs_hz.len() {
            return (self.freqs_hz[best], self.power_db[best]);
        }
        let (y0, y1, y2) = (
            self.power_db[best - 1],
            self.power_db[best],
            self.power_db[best + 1],
        );
        let denom = y0 - 2.0 * y1 + y2;
        let delta = if denom < 0.0 {
            (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        (
            self.freqs_hz[best] + delta * self.resolution_hz,
            y1 - 0.25 * (y0 - y2) * delta,
        )
    }

    /// Bins within `[lo, hi]`.
    pub fn band(&self, lo: f64, hi: f64) -> Psd {
        let start = self.freqs_hz.partition_point(|&f| f < lo);
        let end = self.freqs_hz.partition_point(|&f| f <= hi);
        Psd {
            freqs_hz: self.freqs_hz[start..end].to_vec(),
            power_db: self.power_db[start..end].to_vec(),
            resolution_hz: self.resolution_hz,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "freq_hz,power_db")?;
        for (f, p) in self.freqs_hz.iter().zip(&self.power_db) {
            writeln!(out, "{},{}", fmt_num(*f), fmt_num(*p))?;
        }
        Ok(())
    }
}

/// Periodic-Hann windowed periodogram.
///
/// Records shorter than three code periods are zero-padded to three periods
/// so adjacent harmonics stay resolved; records shorter than one period are
/// rejected. Power is normalized so a unit-amplitude tone on a bin reads 0 dB.
pub fn spectrum_estimate(
    samples: &[Complex64],
    sample_rate: f64,
    code_period: f64,
) -> Result<Psd, LinkError> {
    let period_samples = (code_period * sample_rate).round() as usize;
    let len = samples.len();
    if len == 0 || len < period_samples {
        return Err(LinkError::RecordTooShort {
            got: len,
            needed: period_samples,
        });
    }
    let fft_len = len.max((3.0 * code_period * sample_rate).ceil() as usize);
    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect();
    let gain: f64 = window.iter().sum();
    let mut buf: Vec<Complex64> = samples.iter().zip(&window).map(|(s, w)| s * w).collect();
    buf.resize(fft_len, Complex64::new(0.0, 0.0));
    FftPlanner::new()
        .plan_fft_forward(fft_len)
        .process(&mut buf);
    let resolution = sample_rate / fft_len as f64;
    let half = fft_len / 2;
    let mut freqs = Vec::with_capacity(fft_len);
    let mut power = Vec::with_capacity(fft_len);
    // Reorder from [0, fs) to [-fs/2, fs/2).
    for j in 0..fft_len {
        let k = (j + fft_len - half) % fft_len;
        let signed = if k >= fft_len - half {
            k as i64 - fft_len as i64
        } else {
            k as i64
        };
        freqs.push(signed as f64 * resolution);
        let p = buf[k].norm_sqr() / (gain * gain);
        power.push(10.0 * p.max(1e-300).log10());
    }
    Ok(Psd {
        freqs_hz: freqs,
        power_db: power,
        resolution_hz: resolution,
    })
}

/// Receiver output for one link run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RxReport {
    /// Spectrum of the full record around the carrier offset.
    #[serde(skip)]
    pub spectrum: Psd,
    /// Pilot-corrected decision statistics of the data symbols.
    pub constellation: Vec<Complex64>,
    pub decisions: Vec<usize>,
    pub truth: Vec<usize>,
    pub evm_pct: f64,
    pub ser: f64,
    /// `mean |x|^2 / mean |z - x|^2` over data symbols, in dB.
    pub post_filter_snr_db: f64,
    /// Mean `|y|^2` of the raw window correlations.
    pub mean_symbol_power: f64,
    pub pilot_gain: Complex64,
}

impl RxReport {
    pub fn write_constellation_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "symbol_index,re,im,decided,truth")?;
        for (i, ((z, d), t)) in self
            .constellation
            .iter()
            .zip(&self.decisions)
            .zip(&self.truth)
            .enumerate()
        {
            writeln!(out, "{},{},{},{},{}", i, fmt_num(z.re), fmt_num(z.im), d, t)?;
        }
        Ok(())
    }
}

/// Pilot gain, corrected data points, decisions, SER, EVM % and SNR dB.
type Decided = (Complex64, Vec<Complex64>, Vec<usize>, f64, f64, f64);

fn decide(
    correlations: &[Complex64],
    cfg: &LinkConfig,
    book: &Codebook,
    symbols: &[usize],
) -> Result<Decided, LinkError> {
    let pilots = cfg.pilot_count.min(symbols.len());
    let ideal = |s: usize| book.entries()[s].coefficient;
    let (num, den) = correlations[..pilots]
        .iter()
        .zip(&symbols[..pilots])
        .fold((Complex64::new(0.0, 0.0), 0.0), |(n, d), (y, &s)| {
            (n + y * ideal(s).conj(), d + ideal(s).norm_sqr())
        });
    let gain = if den > 0.0 {
        num / den
    } else {
        Complex64::new(0.0, 0.0)
    };
    let floor = 1e-12 * (cfg.gamma_on() - cfg.gamma_off()).norm() * cfg.geometry.columns as f64;
    if !(gain.norm().is_finite() && gain.norm() > floor) {
        return Err(LinkError::PilotUnusable);
    }
    let constellation: Vec<Complex64> = correlations[pilots..].iter().map(|y| y / gain).collect();
    let decisions: Vec<usize> = constellation
        .iter()
        .map(|z| book.nearest_symbol(*z))
        .collect();
    let truth = &symbols[pilots..];
    let count = truth.len().max(1) as f64;
    let errors = decisions.iter().zip(truth).filter(|(d, t)| d != t).count();
    let err_power: f64 = constellation
        .iter()
        .zip(truth)
        .map(|(z, &t)| (z - ideal(t)).norm_sqr())
        .sum::<f64>()
        / count;
    let sig_power: f64 = truth.iter().map(|&t| ideal(t).norm_sqr()).sum::<f64>() / count;
    let evm = 100.0 * err_power.sqrt() / book.ring_amplitude();
    let snr_db = 10.0 * (sig_power / err_power).log10();
    Ok((
        gain,
        constellation,
        decisions,
        errors as f64 / count,
        evm,
        snr_db,
    ))
}

/// Genie-synchronized receiver.
///
/// `symbols` are the transmitted indices, pilots first; they provide the
/// pilot reference and the truth for SER and EVM.
pub fn demodulate(
    samples: &[Complex64],
    cfg: &LinkConfig,
    book: &Codebook,
    symbols: &[usize],
) -> Result<RxReport, LinkError> {
    if symbols.len() < cfg.pilot_count || cfg.pilot_count == 0 {
        return Err(LinkError::Config(
            "pilot symbols missing from the record".into(),
        ));
    }
    let harmonic = book.scheme().harmonic();
    let correlations = correlate_symbols(samples, cfg, harmonic, symbols.len())?;
    let (pilot_gain, constellation, decisions, ser, evm_pct, post_filter_snr_db) =
        decide(&correlations, cfg, book, symbols)?;
    let mean_symbol_power =
        correlations.iter().map(|y| y.norm_sqr()).sum::<f64>() / correlations.len() as f64;
    let span = cfg.spectrum_span_harmonics as f64 * cfg.harmonic_spacing();
    let spectrum = spectrum_estimate(samples, cfg.sample_rate, cfg.code_period())?
        .band(cfg.f_offset - span, cfg.f_offset + span);
    Ok(RxReport {
        spectrum,
        constellation,
        decisions,
        truth: symbols[cfg.pilot_count..].to_vec(),
        evm_pct,
        ser,
        post_filter_snr_db,
        mean_symbol_power,
        pilot_gain,
    })
}

/// Everything produced by one run of the chain.
#[derive(Debug, Clone)]
pub struct LinkRun {
    pub codebook: Codebook,
    pub transmission: Transmission,
    pub report: RxReport,
}

/// Runs codebook design, synthesis, channel and receiver for `cfg`.
pub fn run_link(cfg: &LinkConfig) -> Result<LinkRun, LinkError> {
    cfg.validate()?;
    let book = build_codebook(cfg)?;
    run_link_with(cfg, &book, NOISE_STREAM_BASE)
}

fn run_link_with(
    cfg: &LinkConfig,
    book: &Codebook,
    noise_stream: u64,
) -> Result<LinkRun, LinkError> {
    let transmission = plan_transmission(cfg, book)?;
    let clean = synthesize_rx_waveform(&transmission.schedules, cfg)?;
    let rx = apply_channel(&clean, cfg, reference_amplitude(cfg, book), noise_stream)?;
    let report = demodulate(&rx, cfg, book, &transmission.symbols)?;
    Ok(LinkRun {
        codebook: book.clone(),
        transmission,
        report,
    })
}

/// One receiver direction of an angular sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub angle_deg: f64,
    /// Harmonic power relative to the strongest angle of the sweep.
    pub power_db: f64,
    /// `None` when the pilot was unusable at this angle (e.g. an exact null).
    pub report: Option<RxReport>,
}

/// Runs the chain at every angle with `shift` bits between columns. The
/// payload is the same at every angle; noise uses an independent stream per
/// angle, so results do not depend on evaluation order.
pub fn angular_sweep(
    shift: i64,
    book: &Codebook,
    cfg: &LinkConfig,
    angles: &[f64],
) -> Result<Vec<SweepPoint>, LinkError> {
    if let Some(a) = angles.iter().find(|a| !(-90.0..=90.0).contains(*a)) {
        return Err(LinkError::Config(format!(
            "sweep angle {a} outside [-90, 90]"
        )));
    }
    let mut base = cfg.clone();
    base.shift_per_column = shift;
    base.validate()?;
    let transmission = plan_transmission(&base, book)?;
    let reference = reference_amplitude(&base, book);
    let raw: Vec<(f64, f64, Option<RxReport>)> = angles
        .par_iter()
        .enumerate()
        .map(|(i, &angle)| {
            let mut c = base.clone();
            c.rx_angle_deg = angle;
            let clean = synthesize_rx_waveform(&transmission.schedules, &c)?;
            let rx = apply_channel(&clean, &c, reference, NOISE_STREAM_BASE + i as u64)?;
            let corr = correlate_symbols(
                &rx,
                &c,
                book.scheme().harmonic(),
                transmission.symbols.len(),
            )?;
            let power = corr.iter().map(|y| y.norm_sqr()).sum::<f64>() / corr.len() as f64;
            let report = match demodulate(&rx, &c, book, &transmission.symbols) {
                Ok(r) => Some(r),
                Err(LinkError::PilotUnusable) => None,
                Err(e) => return Err(e),
            };
            Ok((angle, power, report))
        })
        .collect::<Result<_, LinkError>>()?;
    let max = raw.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(raw
        .into_iter()
        .map(|(angle_deg, power, report)| SweepPoint {
            angle_deg,
            power_db: if max > 0.0 && power > 0.0 {
                10.0 * (power / max).log10()
            } else {
                f64::NEG_INFINITY
            },
            report,
        })
        .collect())
}

/// Writes `angle_deg,power_db,evm_pct,ser` rows; failed angles get empty metrics.
pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> io::Result<()> {
    writeln!(out, "angle_deg,power_db,evm_pct,ser")?;
    for p in points {
        let (evm, ser) = match &p.report {
            Some(r) => (fmt_num(r.evm_pct), fmt_num(r.ser)),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{}",
            fmt_num(p.angle_deg),
            fmt_num(p.power_db),
            evm,
            ser
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::ModulationScheme;
    use crate::harmonics::harmonic_coefficient;

    fn code(s: &str) -> TimeCode {
        TimeCode::parse(s, DEFAULT_BIT_DURATION, Alphabet::Binary).unwrap()
    }

    fn qpsk_book() -> Codebook {
        design_by_shift(&code("00001111"), &ModulationScheme::qpsk(1)).unwrap()
    }

    #[test]
    fn profiles_validate() {
        let fast = LinkConfig::fast_profile(4, 8);
        fast.validate().unwrap();
        assert_eq!(fast.samples_per_bit().unwrap(), 40);
        let reference = LinkConfig::reference_profile(4, 8);
        reference.validate().unwrap();
        assert_eq!(reference.samples_per_bit().unwrap(), 7500);
        assert!((reference.harmonic_spacing() - 33.422_459_893).abs() < 1e-6);
    }

    #[test]
    fn config_errors() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.sample_rate = 8000.0;
        assert!(matches!(cfg.validate(), Err(LinkError::Nyquist { .. })));
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.sample_rate = 40.5 / DEFAULT_BIT_DURATION;
        assert!(matches!(cfg.validate(), Err(LinkError::SamplesPerBit(_))));
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.rx_angle_deg = 95.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn all_off_is_silent() {
        let cfg = LinkConfig::fast_profile(4, 8);
        let sched = vec![vec![code("00000000"); 3]; 8];
        let rx = synthesize_rx_waveform(&sched, &cfg).unwrap();
        assert_eq!(rx.len(), 3 * 8 * 40);
        assert!(rx.iter().all(|s| *s == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn all_on_is_a_pure_tone() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.rx_angle_deg = 23.0;
        let sched = vec![vec![code("11111111"); 25]; 8];
        let rx = synthesize_rx_waveform(&sched, &cfg).unwrap();
        let amp = rx[0].norm();
        for (i, s) in rx.iter().enumerate() {
            let expected = rx[0] * carrier(cfg.f_offset, cfg.sample_rate, i);
            assert!((s - expected).norm() < 1e-9 * amp.max(1.0));
        }
    }

    #[test]
    fn channel_determinism_and_passthrough() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        let sched = vec![vec![code("00000001"); 4]; 2];
        cfg.geometry.columns = 2;
        let clean = synthesize_rx_waveform(&sched, &cfg).unwrap();
        assert_eq!(apply_channel(&clean, &cfg, 1.0, 1).unwrap(), clean);
        cfg.channel = ChannelModel::Awgn {
            es_n0_db: f64::INFINITY,
        };
        assert_eq!(apply_channel(&clean, &cfg, 1.0, 1).unwrap(), clean);
        cfg.channel = ChannelModel::Awgn { es_n0_db: 10.0 };
        cfg.seed = 42;
        let a = apply_channel(&clean, &cfg, 1.0, 1).unwrap();
        let b = apply_channel(&clean, &cfg, 1.0, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, clean);
        let c = apply_channel(&clean, &cfg, 1.0, 2).unwrap();
        assert_ne!(a, c);
        cfg.channel = ChannelModel::Awgn { es_n0_db: f64::NAN };
        assert!(matches!(
            apply_channel(&clean, &cfg, 1.0, 1),
            Err(LinkError::NegativeNoise(_))
        ));
        cfg.channel = ChannelModel::Awgn { es_n0_db: 10.0 };
        assert!(matches!(
            apply_channel(&clean, &cfg, -f64::INFINITY, 1),
            Err(LinkError::NegativeNoise(_))
        ));
    }

    #[test]
    fn multipath_single_tap_scales() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.geometry.columns = 1;
        let sched = vec![vec![code("00000111"); 2]];
        let clean = synthesize_rx_waveform(&sched, &cfg).unwrap();
        cfg.channel = ChannelModel::Multipath {
            taps: vec![Tap {
                gain: ComplexDocument { re: 0.0, im: 2.0 },
                delay_s: 0.0,
            }],
            es_n0_db: None,
        };
        let y = apply_channel(&clean, &cfg, 1.0, 1).unwrap();
        for (a, b) in y.iter().zip(&clean) {
            assert_eq!(*a, b * Complex64::new(0.0, 2.0));
        }
    }

    #[test]
    fn first_harmonic_energy_matches_coefficient() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.geometry.columns = 1;
        for s in ["00000001", "00001111", "01101000", "11100101"] {
            let c = code(s);
            let rx = synthesize_rx_waveform(&[vec![c.clone(); 3]], &cfg).unwrap();
            let y = correlate_symbols(&rx, &cfg, 1, 3).unwrap();
            let expected = harmonic_coefficient(&c, 1).norm();
            for v in y {
                assert!((v.norm() / expected - 1.0).abs() < 0.005, "{s}");
            }
        }
    }

    #[test]
    fn noiseless_qpsk_broadside_and_steered() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.data_symbols = 200;
        let run = run_link(&cfg).unwrap();
        assert_eq!(run.report.ser, 0.0);
        assert!(run.report.evm_pct < 1.0);
        assert_eq!(run.report.constellation.len(), 200);

        cfg.shift_per_column = 2;
        cfg.rx_angle_deg = 30.0;
        let steered = run_link(&cfg).unwrap();
        assert_eq!(steered.report.ser, 0.0);
        assert!(steered.report.evm_pct < 1.0);
    }

    #[test]
    fn pilot_gain_invariance() {
        let mut cfg = LinkConfig::fast_profile(8, 8);
        cfg.data_symbols = 100;
        let base = run_link(&cfg).unwrap();
        cfg.channel = ChannelModel::Multipath {
            taps: vec![Tap {
                gain: ComplexDocument { re: -0.3, im: 0.7 },
                delay_s: 0.0,
            }],
            es_n0_db: None,
        };
        let scaled = run_link(&cfg).unwrap();
        assert_eq!(base.report.decisions, scaled.report.decisions);
        assert_eq!(scaled.report.ser, 0.0);
        for (a, b) in base
            .report
            .constellation
            .iter()
            .zip(&scaled.report.constellation)
        {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn demodulate_errors() {
        let cfg = LinkConfig::fast_profile(4, 8);
        let book = qpsk_book();
        let short = vec![Complex64::new(1.0, 0.0); 100];
        assert!(matches!(
            demodulate(&short, &cfg, &book, &[0, 1]),
            Err(LinkError::WindowMismatch { .. })
        ));
        let zeros = vec![Complex64::new(0.0, 0.0); 2 * 8 * 40];
        assert_eq!(
            demodulate(&zeros, &cfg, &book, &[0, 1]),
            Err(LinkError::PilotUnusable)
        );
    }

    #[test]
    fn spectrum_of_tone_and_comb() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.geometry.columns = 1;
        // 25 periods put the 2 kHz offset exactly on a bin.
        let ones = synthesize_rx_waveform(&[vec![code("11111111"); 25]], &cfg).unwrap();
        let psd = spectrum_estimate(&ones, cfg.sample_rate, cfg.code_period()).unwrap();
        let (f, p) = psd.peak_near(cfg.f_offset, 5.0);
        assert!((f - cfg.f_offset).abs() < 1e-6);
        assert!(p.abs() < 1e-9);
        for k in [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0] {
            assert!(psd.power_at(cfg.f_offset + k * cfg.harmonic_spacing()) < p - 100.0);
        }

        let comb = synthesize_rx_waveform(&[vec![code("00000001"); 25]], &cfg).unwrap();
        let psd = spectrum_estimate(&comb, cfg.sample_rate, cfg.code_period()).unwrap();
        for k in -5i64..=5 {
            let nominal = cfg.f_offset + k as f64 * cfg.harmonic_spacing();
            let (f, _) = psd.peak_near(nominal, 0.4 * cfg.harmonic_spacing());
            assert!((f - nominal).abs() < 0.2, "k={k}: {f}");
        }
    }

    #[test]
    fn spectrum_short_record() {
        let cfg = LinkConfig::fast_profile(4, 8);
        let rx = vec![Complex64::new(1.0, 0.0); 100];
        assert!(matches!(
            spectrum_estimate(&rx, cfg.sample_rate, cfg.code_period()),
            Err(LinkError::RecordTooShort { .. })
        ));
        // One period is padded to three.
        let rx = vec![Complex64::new(1.0, 0.0); 320];
        let psd = spectrum_estimate(&rx, cfg.sample_rate, cfg.code_period()).unwrap();
        assert!(psd.resolution_hz <= cfg.harmonic_spacing() / 3.0 + 1e-9);
    }

    #[test]
    fn run_is_deterministic() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.channel = ChannelModel::office(DEFAULT_BIT_DURATION, Some(12.0));
        cfg.seed = 7;
        cfg.data_symbols = 50;
        let a = run_link(&cfg).unwrap().report;
        let b = run_link(&cfg).unwrap().report;
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_peaks_at_steering_angle() {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.data_symbols = 20;
        let book = qpsk_book();
        let angles: Vec<f64> = (-12..=12).map(|i| i as f64 * 5.0).collect();
        let pts = angular_sweep(0, &book, &cfg, &angles).unwrap();
        let best = pts
            .iter()
            .max_by(|a, b| a.power_db.total_cmp(&b.power_db))
            .unwrap();
        assert_eq!(best.angle_deg, 0.0);
        assert!(angular_sweep(0, &book, &cfg, &[100.0]).is_err());
    }
}
