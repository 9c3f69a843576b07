//! Column-wise space-time coded array: steering law and array factor.
//!
//! Column `k` of the surface carries the base code advanced by `k * s` bits,
//! which by the shift theorem gives its harmonic-`n` coefficient a phase of
//! `2 pi n s k / L`. The far-field pattern of the harmonic is
//!
//! ```text
//! AF(theta) = sum_k c_k * exp(-j 2 pi d k sin(theta))
//! ```
//!
//! with `d` in wavelengths. Angles are measured so that a positive shift
//! steers toward positive `theta`, giving `sin(theta) = n s / (L d)`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::TimeCode;
use crate::export::fmt_num;
use crate::harmonics::harmonic_coefficient;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrayError {
    #[error("evanescent: no real steering angle (sin theta = {ratio})")]
    Evanescent { ratio: f64 },
    #[error("array needs at least one column")]
    NoColumns,
    #[error("element spacing must be positive, got {0}")]
    Spacing(f64),
    #[error("empty coefficient list")]
    EmptyCoefficients,
    #[error("angle grid needs at least 2 samples within [-90, 90] degrees")]
    Grid,
    #[error("empty pattern")]
    EmptyPattern,
}

/// Far-field element pattern applied on top of the array factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementPattern {
    #[default]
    Isotropic,
    /// `cos(theta)` projected-aperture roll-off.
    Cosine,
}

impl ElementPattern {
    pub fn gain(self, theta_deg: f64) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::Cosine => theta_deg.to_radians().cos().max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub columns: usize,
    /// Column pitch in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub element: ElementPattern,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn new(columns: usize, spacing: f64) -> Result<Self, ArrayError> {
        let geom = Self {
            columns,
            spacing,
            element: ElementPattern::Isotropic,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        if self.columns == 0 {
            return Err(ArrayError::NoColumns);
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(ArrayError::Spacing(self.spacing));
        }
        Ok(())
    }

    /// Phase factor of column `k` seen from `theta_deg`, including the element gain.
    pub fn steering_factor(&self, k: usize, theta_deg: f64) -> Complex64 {
        let phase =
            -2.0 * std::f64::consts::PI * self.spacing * k as f64 * theta_deg.to_radians().sin();
        Complex64::from_polar(self.element.gain(theta_deg), phase)
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            columns: 8,
            spacing: 0.5,
            element: ElementPattern::Isotropic,
        }
    }
}

/// Base code, per-column shift and the harmonic being steered.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPlan {
    pub base: TimeCode,
    pub shift: i64,
    pub harmonic: i64,
}

impl SteeringPlan {
    pub fn column_code(&self, k: usize) -> TimeCode {
        self.base.rotate(k as i64 * self.shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringAngle {
    pub degrees: f64,
    /// Set when the main lobe lies exactly at +/-90 degrees.
    pub endfire: bool,
}

/// Main-lobe direction `arcsin(2 n s / L)` at half-wavelength spacing.
pub fn steering_angle(n: i64, s: i64, len: usize) -> Result<SteeringAngle, ArrayError> {
    steering_angle_with_spacing(n, s, len, 0.5)
}

/// Main-lobe direction `arcsin(n s / (L d))` for pitch `d` in wavelengths.
pub fn steering_angle_with_spacing(
    n: i64,
    s: i64,
    len: usize,
    spacing: f64,
) -> Result<SteeringAngle, ArrayError> {
    let ratio = (n * s) as f64 / (len as f64 * spacing);
    if ratio.abs() > 1.0 {
        return Err(ArrayError::Evanescent { ratio });
    }
    Ok(SteeringAngle {
        degrees: ratio.asin().to_degrees(),
        endfire: ratio.abs() == 1.0,
    })
}

/// Harmonic coefficient of every column, computed from the rotated codes.
pub fn column_coefficients(plan: &SteeringPlan, columns: usize) -> Vec<Complex64> {
    (0..columns)
        .map(|k| harmonic_coefficient(&plan.column_code(k), plan.harmonic))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub theta_deg: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `20 log10 |AF|` normalized to 0 dB at the maximum.
    pub mag_db: Vec<f64>,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.theta_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_deg.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "theta_deg,re,im,mag_db")?;
        for ((t, v), db) in self.theta_deg.iter().zip(&self.values).zip(&self.mag_db) {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_num(*t),
                fmt_num(v.re),
                fmt_num(v.im),
                fmt_num(*db)
            )?;
        }
        Ok(())
    }
}

/// Uniform grid from `start` to `stop` inclusive.
pub fn angle_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

/// Evaluates the array factor of `coeffs` on `grid` (degrees).
pub fn array_factor(
    coeffs: &[Complex64],
    geom: &ArrayGeometry,
    grid: &[f64],
) -> Result<Pattern, ArrayError> {
    if coeffs.is_empty() {
        return Err(ArrayError::EmptyCoefficients);
    }
    geom.validate()?;
    if grid.len() < 2 || grid.iter().any(|t| !(-90.0..=90.0).contains(t)) {
        return Err(ArrayError::Grid);
    }
    let values: Vec<Complex64> = grid
        .par_iter()
        .map(|&theta| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * geom.steering_factor(k, theta))
                .sum()
        })
        .collect();
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mag_db = values
        .iter()
        .map(|v| {
            if peak == 0.0 {
                f64::NEG_INFINITY
            } else {
                20.0 * (v.norm() / peak).log10()
            }
        })
        .collect();
    Ok(Pattern {
        theta_deg: grid.to_vec(),
        values,
        mag_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub angle_deg: f64,
    /// Interpolated peak level relative to the pattern maximum.
    pub magnitude_db: f64,
}

/// Grid argmax refined by a parabola through the three nearest samples.
///
/// Equal maxima resolve toward the smaller `|angle|`, then the negative side.
pub fn find_peak(pattern: &Pattern) -> Result<Peak, ArrayError> {
    if pattern.is_empty() {
        return Err(ArrayError::EmptyPattern);
    }
    let mags: Vec<f64> = pattern.values.iter().map(|v| v.norm()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let tol = max * 1e-12;
    let best = (0..mags.len())
        .filter(|&i| mags[i] >= max - tol)
        .min_by(|&a, &b| {
            let (ta, tb) = (pattern.theta_deg[a], pattern.theta_deg[b]);
            ta.abs().total_cmp(&tb.abs()).then(ta.total_cmp(&tb))
        })
        .expect("non-empty");
    let theta = pattern.theta_deg[best];
    if best == 0 || best + 1 == mags.len() || max == 0.0 {
        return Ok(Peak {
            angle_deg: theta,
            magnitude_db: 0.0,
        });
    }
    let (y0, y1, y2) = (mags[best - 1], mags[best], mags[best + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let delta = if denom < 0.0 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let step = if delta >= 0.0 {
        pattern.theta_deg[best + 1] - theta
    } else {
        theta - pattern.theta_deg[best - 1]
    };
    let refined = y1 - 0.25 * (y0 - y2) * delta;
    Ok(Peak {
        angle_deg: theta + delta * step,
        magnitude_db: 20.0 * (refined / max).log10(),
    })
}
