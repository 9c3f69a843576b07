//! Number formatting shared by the CSV writers.

use num_complex::Complex64;

/// Significant digits used for every floating-point CSV field.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits in scientific notation.
///
/// Negative zero prints as `0`, non-finite values as `inf`, `-inf` or `nan`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
}

/// Phase in degrees, `0` for a zero phasor.
pub fn phase_deg(c: Complex64) -> f64 {
    if c.re == 0.0 && c.im == 0.0 {
        0.0
    } else {
        c.arg().to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.125), "1.25000000000e-1");
        assert_eq!(fmt_num(-33.42245989304813), "-3.34224598930e1");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        assert_eq!("1.25000000000e-1".parse::<f64>().unwrap(), 0.125);
    }
}
