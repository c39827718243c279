//! Touchstone v1 reader for one-port (`.s1p`) and two-port (`.s2p`) files.
//!
//! Only S-parameter data is accepted. Values are returned in linear
//! real/imaginary form and frequencies in Hz, whatever the option line says.

use num_complex::Complex64;

use super::StateRecord;
use crate::error::{Error, Result};

/// Number of ports described by a Touchstone file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortCount {
    One,
    Two,
}

impl PortCount {
    /// Columns per data row: frequency plus one (a, b) pair per parameter.
    pub fn columns(self) -> usize {
        match self {
            PortCount::One => 3,
            PortCount::Two => 9,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            PortCount::One => 1,
            PortCount::Two => 2,
        }
    }

    /// Port count implied by a file extension (`s1p`, `s2p`, case-insensitive).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "s1p" => Some(PortCount::One),
            "s2p" => Some(PortCount::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataFormat {
    RealImag,
    MagAngle,
    DbAngle,
}

impl DataFormat {
    fn to_complex(self, a: f64, b: f64) -> Complex64 {
        match self {
            DataFormat::RealImag => Complex64::new(a, b),
            DataFormat::MagAngle => Complex64::from_polar(a, b.to_radians()),
            DataFormat::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OptionLine {
    unit_hz: f64,
    format: DataFormat,
    reference_ohm: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        OptionLine {
            unit_hz: 1e9,
            format: DataFormat::MagAngle,
            reference_ohm: 50.0,
        }
    }
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let err = |message: String| Error::Touchstone { line, message };
    let mut opts = OptionLine::default();
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit_hz = 1.0,
            "KHZ" => opts.unit_hz = 1e3,
            "MHZ" => opts.unit_hz = 1e6,
            "GHZ" => opts.unit_hz = 1e9,
            "S" => {}
            "Y" | "Z" | "G" | "H" => {
                return Err(err(format!(
                    "malformed option line: parameter type {tok} is not supported (only S)"
                )))
            }
            "RI" => opts.format = DataFormat::RealImag,
            "MA" => opts.format = DataFormat::MagAngle,
            "DB" => opts.format = DataFormat::DbAngle,
            "R" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| err("malformed option line: R without a value".into()))?;
                opts.reference_ohm = value.parse::<f64>().map_err(|_| {
                    err(format!("malformed option line: bad reference impedance {value:?}"))
                })?;
                if !(opts.reference_ohm > 0.0) {
                    return Err(err("malformed option line: reference impedance must be > 0".into()));
                }
            }
            _ => return Err(err(format!("malformed option line: unexpected token {tok:?}"))),
        }
    }
    Ok(opts)
}

/// One parsed Touchstone file: the state's samples plus its own frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneState {
    pub frequencies_hz: Vec<f64>,
    pub record: StateRecord,
    pub reference_ohm: f64,
}

impl TouchstoneState {
    pub fn port_count(&self) -> PortCount {
        if self.record.s21.is_some() {
            PortCount::Two
        } else {
            PortCount::One
        }
    }
}

/// Parses a Touchstone v1 file.
///
/// With `ports = None` the port count is taken from the arity of the first
/// data row; every later row must have the same arity.
pub fn parse_touchstone(
    file_bytes: &[u8],
    state_id: &str,
    ports: Option<PortCount>,
) -> Result<TouchstoneState> {
    let text = std::str::from_utf8(file_bytes).map_err(|e| Error::Touchstone {
        line: 0,
        message: format!("file is not valid UTF-8: {e}"),
    })?;

    let mut options: Option<OptionLine> = None;
    let mut ports = ports;
    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    let mut s21 = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(body) = content.strip_prefix('#') {
            if !freqs.is_empty() {
                return Err(Error::Touchstone {
                    line,
                    message: "malformed option line: option line after data rows".into(),
                });
            }
            // Later option lines are ignored, as in the v1 format.
            if options.is_none() {
                options = Some(parse_option_line(body, line)?);
            }
            continue;
        }
        let opts = *options.get_or_insert_with(OptionLine::default);

        let fields: Vec<&str> = content.split_whitespace().collect();
        let expected = match ports {
            Some(p) => p.columns(),
            None => {
                let p = match fields.len() {
                    3 => PortCount::One,
                    9 => PortCount::Two,
                    n => {
                        return Err(Error::Touchstone {
                            line,
                            message: format!(
                                "row arity mismatch: {n} columns (expected 3 for .s1p or 9 for .s2p)"
                            ),
                        })
                    }
                };
                ports = Some(p);
                p.columns()
            }
        };
        if fields.len() != expected {
            return Err(Error::Touchstone {
                line,
                message: format!(
                    "row arity mismatch: {} columns, expected {expected}",
                    fields.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v = f.parse::<f64>().map_err(|_| Error::Touchstone {
                line,
                message: format!("not a number: {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Touchstone {
                    line,
                    message: format!("non-finite value: {f:?}"),
                });
            }
            values.push(v);
        }

        let freq = values[0] * opts.unit_hz;
        if let Some(&prev) = freqs.last() {
            if freq <= prev {
                return Err(Error::Touchstone {
                    line,
                    message: format!("non-monotone frequencies: {freq} Hz follows {prev} Hz"),
                });
            }
        }
        freqs.push(freq);
        s11.push(opts.format.to_complex(values[1], values[2]));
        if expected == 9 {
            s21.push(opts.format.to_complex(values[3], values[4]));
        }
    }

    if freqs.is_empty() {
        return Err(Error::Touchstone {
            line: text.lines().count(),
            message: "no data rows".into(),
        });
    }

    let two_port = ports == Some(PortCount::Two);
    Ok(TouchstoneState {
        frequencies_hz: freqs,
        record: StateRecord {
            state_id: state_id.to_string(),
            s11,
            s21: two_port.then_some(s21),
        },
        reference_ohm: options.unwrap_or_default().reference_ohm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn ri_ghz_row() {
        let st = parse_touchstone(b"# GHZ S RI R 50\n5.0  -1.0 0.0\n", "x", None).unwrap();
        assert_eq!(st.frequencies_hz, vec![5e9]);
        assert_eq!(st.record.s11, vec![Complex64::new(-1.0, 0.0)]);
        assert!(st.record.s21.is_none());
        assert_eq!(st.port_count(), PortCount::One);
    }

    #[test]
    fn ma_mhz_row() {
        let st = parse_touchstone(b"# MHZ S MA R 50\n100 0.5 180\n", "x", None).unwrap();
        assert_eq!(st.frequencies_hz, vec![1e8]);
        assert!(close(st.record.s11[0], Complex64::new(-0.5, 0.0), 1e-12));
    }

    #[test]
    fn db_row_matches_hand_conversion() {
        let st = parse_touchstone(b"# GHZ S DB R 50\n5.3 -6.0206 90\n", "x", None).unwrap();
        // 10^(-6.0206/20) = 0.49999..., rotated by 90 degrees.
        let mag = 10f64.powf(-6.0206 / 20.0);
        assert!((mag - 0.5).abs() < 1e-5);
        assert!(close(st.record.s11[0], Complex64::new(0.0, 0.5), 1e-5));
        assert!((st.frequencies_hz[0] - 5.3e9).abs() < 1e-3);
    }

    #[test]
    fn two_port_rows_and_comments() {
        let text = "! measured cell\n# HZ S RI R 50\n1e9 0.1 0.2 0.3 0.4 0 0 0 0 ! inline\n2e9 0.1 0.2 0.5 0.6 0 0 0 0\n";
        let st = parse_touchstone(text.as_bytes(), "on", None).unwrap();
        assert_eq!(st.port_count(), PortCount::Two);
        let s21 = st.record.s21.unwrap();
        assert_eq!(s21[1], Complex64::new(0.5, 0.6));
    }

    #[test]
    fn missing_option_line_uses_defaults() {
        let st = parse_touchstone(b"1.0 1.0 0\n", "x", None).unwrap();
        assert_eq!(st.frequencies_hz, vec![1e9]);
        assert_eq!(st.reference_ohm, 50.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_opt = parse_touchstone(b"! c\n# GHZ Z RI R 50\n1 0 0\n", "x", None).unwrap_err();
        assert!(matches!(bad_opt, Error::Touchstone { line: 2, .. }), "{bad_opt}");

        let bad_tok = parse_touchstone(b"# GHZ S XX\n", "x", None).unwrap_err();
        assert!(matches!(bad_tok, Error::Touchstone { line: 1, .. }));

        let non_mono = parse_touchstone(b"# GHZ S RI\n1 0 0\n2 0 0\n2 0 0\n", "x", None).unwrap_err();
        assert!(matches!(non_mono, Error::Touchstone { line: 4, .. }), "{non_mono}");

        let arity = parse_touchstone(b"# GHZ S RI\n1 0 0\n2 0 0 1\n", "x", None).unwrap_err();
        assert!(matches!(arity, Error::Touchstone { line: 3, .. }), "{arity}");

        let forced = parse_touchstone(b"# GHZ S RI\n1 0 0\n", "x", Some(PortCount::Two)).unwrap_err();
        assert!(matches!(forced, Error::Touchstone { line: 2, .. }));

        let empty = parse_touchstone(b"# GHZ S RI\n! nothing\n", "x", None).unwrap_err();
        assert!(matches!(empty, Error::Touchstone { .. }));
    }
}
