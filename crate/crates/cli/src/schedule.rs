//! Text schedule consumed by the cell controller.
//!
//! ```text
//! # stc schedule v1
//! # tau_s=3.74000000000e-3
//! # L=8
//! # reps=1
//! # shift=0
//! # columns=8
//! # symbols=4
//! 00000000
//! 11111111
//! ...
//! ```
//!
//! After the `#` header there is one line per bit interval. Each line holds
//! one character per column, column 0 first, split into space-separated
//! groups of eight columns.

use std::fmt::Write as _;

use stc_core::codes::TimeCode;
use stc_core::export::fmt_num;

pub struct ScheduleHeader {
    pub bit_duration: f64,
    pub code_length: usize,
    pub reps: usize,
    pub shift: i64,
    pub symbols: usize,
}

/// Renders per-column code schedules; all columns must have equal length.
pub fn render(header: &ScheduleHeader, columns: &[Vec<TimeCode>]) -> String {
    let mut out = String::new();
    out.push_str("# stc schedule v1\n");
    let _ = writeln!(out, "# tau_s={}", fmt_num(header.bit_duration));
    let _ = writeln!(out, "# L={}", header.code_length);
    let _ = writeln!(out, "# reps={}", header.reps);
    let _ = writeln!(out, "# shift={}", header.shift);
    let _ = writeln!(out, "# columns={}", columns.len());
    let _ = writeln!(out, "# symbols={}", header.symbols);
    let rendered: Vec<Vec<Vec<char>>> = columns
        .iter()
        .map(|sched| {
            sched
                .iter()
                .map(|c| c.to_string().chars().collect())
                .collect()
        })
        .collect();
    let periods = rendered.first().map_or(0, Vec::len);
    for p in 0..periods {
        for bit in 0..header.code_length {
            for (k, col) in rendered.iter().enumerate() {
                if k > 0 && k % 8 == 0 {
                    out.push(' ');
                }
                out.push(col[p][bit]);
            }
            out.push('\n');
        }
    }
    out
}

/// Parses `--payload`: hexadecimal digits (optionally `0x`-prefixed), or a
/// binary string prefixed with `0b`. Bits are taken MSB first.
pub fn parse_payload(text: &str) -> Result<Vec<bool>, String> {
    if let Some(bin) = text.strip_prefix("0b") {
        return bin
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid binary payload digit {other:?}")),
            })
            .collect();
    }
    let hex = text.strip_prefix("0x").unwrap_or(text);
    if hex.is_empty() {
        return Err("empty payload".into());
    }
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        let v = c
            .to_digit(16)
            .ok_or_else(|| format!("invalid hex payload digit {c:?}"))?;
        bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stc_core::codes::Alphabet;

    #[test]
    fn payload_parsing() {
        assert_eq!(
            parse_payload("DE").unwrap(),
            vec![true, true, false, true, true, true, true, false]
        );
        assert_eq!(
            parse_payload("0x1").unwrap(),
            vec![false, false, false, true]
        );
        assert_eq!(parse_payload("0b101").unwrap(), vec![true, false, true]);
        assert!(parse_payload("xyz").is_err());
        assert!(parse_payload("").is_err());
        assert!(parse_payload("0b12").is_err());
    }

    #[test]
    fn groups_of_eight() {
        let c = TimeCode::parse("01", 1e-3, Alphabet::Binary).unwrap();
        let cols = vec![vec![c]; 10];
        let text = render(
            &ScheduleHeader {
                bit_duration: 1e-3,
                code_length: 2,
                reps: 1,
                shift: 0,
                symbols: 1,
            },
            &cols,
        );
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["00000000 00", "11111111 11"]);
    }
}
