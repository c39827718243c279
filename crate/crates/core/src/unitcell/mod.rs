//! Unit-cell characterization: S-parameter ingestion, maximum contrast
//! curves and Bandwidth of Influence (BoI) extraction.
//!
//! A unit cell is described by one S-parameter sample set per
//! reconfiguration state. The maximum contrast at a frequency is the
//! largest distance between the complex coefficients of any two states; the
//! BoI is the frequency set where that contrast reaches a threshold.

mod boi;
mod contrast;
pub mod manifest;
pub mod touchstone;

pub use boi::{
    extract_boi, normalize_interval, normalized_boi, normalized_csv, BandOfInfluence,
    NormalizedCurve,
};
pub use contrast::{
    effective_s11, max_contrast, max_contrast_effective, ContrastCurve, ContrastKind,
};
pub use touchstone::{parse_touchstone, PortCount, TouchstoneState};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Numerical slack on the passivity bound |S| <= 1.
pub const PASSIVITY_SLACK: f64 = 1e-6;

/// S-parameter samples of one unit-cell state on the table's frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub state_id: String,
    pub s11: Vec<Complex64>,
    /// Present iff the table is two-port.
    pub s21: Option<Vec<Complex64>>,
}

/// All states of one unit cell on a shared frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SParameterTable {
    frequencies_hz: Vec<f64>,
    states: Vec<StateRecord>,
    port_count: PortCount,
}

/// A sample whose magnitude exceeds the passivity bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivityViolation {
    pub state_id: String,
    pub frequency_hz: f64,
    pub parameter: &'static str,
    pub magnitude: f64,
}

impl SParameterTable {
    pub fn new(
        frequencies_hz: Vec<f64>,
        states: Vec<StateRecord>,
        port_count: PortCount,
    ) -> Result<Self> {
        if frequencies_hz.len() < 2 {
            return Err(Error::InvalidArgument(
                "frequency grid needs at least 2 samples".into(),
            ));
        }
        if frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if states.is_empty() {
            return Err(Error::InvalidArgument("table needs at least one state".into()));
        }
        let n = frequencies_hz.len();
        for (i, st) in states.iter().enumerate() {
            if states[..i].iter().any(|o| o.state_id == st.state_id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate state id {:?}",
                    st.state_id
                )));
            }
            if st.s11.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: st.s11.len(),
                });
            }
            match (&st.s21, port_count) {
                (Some(s21), PortCount::Two) if s21.len() == n => {}
                (Some(s21), PortCount::Two) => {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: s21.len(),
                    })
                }
                (None, PortCount::One) => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "state {:?}: S21 must be present iff the table is two-port",
                        st.state_id
                    )))
                }
            }
        }
        let table = SParameterTable {
            frequencies_hz,
            states,
            port_count,
        };
        for v in table.passivity_violations() {
            log::warn!(
                "state {:?}: |{}| = {:.6} > 1 at {} Hz",
                v.state_id,
                v.parameter,
                v.magnitude,
                v.frequency_hz
            );
        }
        Ok(table)
    }

    /// Builds a table from parsed files, resampling onto a common grid when
    /// the files disagree.
    ///
    /// If every file has the same grid it is used as-is. Otherwise the grid is
    /// the first file's samples inside the intersection of all frequency
    /// ranges, plus the intersection endpoints; every state is linearly
    /// interpolated onto it. Nothing is extrapolated.
    pub fn from_touchstone(parsed: Vec<TouchstoneState>) -> Result<Self> {
        let first = parsed
            .first()
            .ok_or_else(|| Error::InvalidArgument("no state files given".into()))?;
        let ports = first.port_count();
        if let Some(other) = parsed.iter().find(|p| p.port_count() != ports) {
            return Err(Error::InvalidArgument(format!(
                "state {:?} has a different port count than {:?}",
                other.record.state_id, first.record.state_id
            )));
        }
        if parsed.iter().all(|p| p.frequencies_hz == first.frequencies_hz) {
            let freqs = first.frequencies_hz.clone();
            let states = parsed.into_iter().map(|p| p.record).collect();
            return SParameterTable::new(freqs, states, ports);
        }

        let lo = parsed
            .iter()
            .map(|p| p.frequencies_hz[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = parsed
            .iter()
            .map(|p| *p.frequencies_hz.last().unwrap())
            .fold(f64::INFINITY, f64::min);
        if !(lo < hi) {
            return Err(Error::InvalidArgument(
                "state frequency ranges do not overlap".into(),
            ));
        }
        let mut grid = vec![lo];
        grid.extend(first.frequencies_hz.iter().copied().filter(|&f| f > lo && f < hi));
        grid.push(hi);

        let states = parsed
            .iter()
            .map(|p| StateRecord {
                state_id: p.record.state_id.clone(),
                s11: resample(&p.frequencies_hz, &p.record.s11, &grid),
                s21: p
                    .record
                    .s21
                    .as_ref()
                    .map(|s| resample(&p.frequencies_hz, s, &grid)),
            })
            .collect();
        SParameterTable::new(grid, states, ports)
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn states(&self) -> &[StateRecord] {
        &self.states
    }

    pub fn port_count(&self) -> PortCount {
        self.port_count
    }

    pub fn passivity_violations(&self) -> Vec<PassivityViolation> {
        let mut out = Vec::new();
        for st in &self.states {
            let mut check = |name: &'static str, vals: &[Complex64]| {
                for (f, v) in self.frequencies_hz.iter().zip(vals) {
                    if v.norm() > 1.0 + PASSIVITY_SLACK {
                        out.push(PassivityViolation {
                            state_id: st.state_id.clone(),
                            frequency_hz: *f,
                            parameter: name,
                            magnitude: v.norm(),
                        });
                    }
                }
            };
            check("S11", &st.s11);
            if let Some(s21) = &st.s21 {
                check("S21", s21);
            }
        }
        out
    }
}

/// Piecewise-linear interpolation of complex samples; `at` must lie inside
/// the source range.
fn resample(src_f: &[f64], src: &[Complex64], at: &[f64]) -> Vec<Complex64> {
    at.iter()
        .map(|&f| {
            let idx = src_f.partition_point(|&x| x < f);
            if idx < src_f.len() && src_f[idx] == f {
                return src[idx];
            }
            let (i0, i1) = (idx - 1, idx);
            let t = (f - src_f[i0]) / (src_f[i1] - src_f[i0]);
            src[i0] + (src[i1] - src[i0]) * t
        })
        .collect()
}
