use num_complex::Complex64;

use super::{PortCount, SParameterTable};
use crate::error::{Error, Result};

/// Which S-parameter a contrast curve was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastKind {
    /// From S11.
    Reflection,
    /// From S21; needs a two-port table.
    Transmission,
}

impl std::str::FromStr for ContrastKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflection" => Ok(ContrastKind::Reflection),
            "transmission" => Ok(ContrastKind::Transmission),
            other => Err(Error::InvalidArgument(format!(
                "unknown contrast kind {other:?} (expected reflection or transmission)"
            ))),
        }
    }
}

/// Maximum pairwise contrast per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastCurve {
    pub frequencies_hz: Vec<f64>,
    pub contrast: Vec<f64>,
    pub kind: ContrastKind,
}

impl ContrastCurve {
    pub fn new(frequencies_hz: Vec<f64>, contrast: Vec<f64>, kind: ContrastKind) -> Result<Self> {
        if frequencies_hz.len() != contrast.len() {
            return Err(Error::DimensionMismatch {
                expected: frequencies_hz.len(),
                actual: contrast.len(),
            });
        }
        if frequencies_hz.is_empty() {
            return Err(Error::InvalidArgument("empty contrast curve".into()));
        }
        if frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if contrast.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "contrast values must be finite and non-negative".into(),
            ));
        }
        Ok(ContrastCurve {
            frequencies_hz,
            contrast,
            kind,
        })
    }

    /// Piecewise-linear value at `f`, or `None` outside the sampled range.
    pub fn value_at(&self, f: f64) -> Option<f64> {
        let fs = &self.frequencies_hz;
        if f < fs[0] || f > *fs.last()? {
            return None;
        }
        let idx = fs.partition_point(|&x| x < f);
        if fs[idx] == f {
            return Some(self.contrast[idx]);
        }
        let t = (f - fs[idx - 1]) / (fs[idx] - fs[idx - 1]);
        Some(self.contrast[idx - 1] + t * (self.contrast[idx] - self.contrast[idx - 1]))
    }

    /// CSV with header `frequency_hz,contrast`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,contrast\n");
        for (f, c) in self.frequencies_hz.iter().zip(&self.contrast) {
            out.push_str(&format!("{f},{c}\n"));
        }
        out
    }
}

fn pairwise_max(samples: &[Complex64]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

fn contrast_with(
    table: &SParameterTable,
    kind: ContrastKind,
    map: impl Fn(Complex64) -> Complex64,
) -> Result<ContrastCurve> {
    if kind == ContrastKind::Transmission && table.port_count() != PortCount::Two {
        return Err(Error::InvalidArgument(
            "transmission contrast needs a two-port table".into(),
        ));
    }
    let states = table.states();
    let mut column = Vec::with_capacity(states.len());
    let contrast = (0..table.frequencies_hz().len())
        .map(|i| {
            column.clear();
            column.extend(states.iter().map(|st| {
                let s = match kind {
                    ContrastKind::Reflection => st.s11[i],
                    ContrastKind::Transmission => st.s21.as_ref().expect("two-port")[i],
                };
                map(s)
            }));
            pairwise_max(&column)
        })
        .collect();
    Ok(ContrastCurve {
        frequencies_hz: table.frequencies_hz().to_vec(),
        contrast,
        kind,
    })
}

/// Maximum contrast over all unordered state pairs, per frequency.
pub fn max_contrast(table: &SParameterTable, kind: ContrastKind) -> Result<ContrastCurve> {
    contrast_with(table, kind, |s| s)
}

/// Effective reflection coefficient of a switched delay-line cell:
/// `(1 - |s11|) * exp(j arg s11)`, with `arg 0 = 0`.
pub fn effective_s11(s11: Complex64) -> Complex64 {
    let mag = s11.norm();
    let phase = if mag == 0.0 { 0.0 } else { s11.arg() };
    Complex64::from_polar(1.0 - mag, phase)
}

/// [`max_contrast`] applied after mapping every sample through [`effective_s11`].
pub fn max_contrast_effective(
    table: &SParameterTable,
    kind: ContrastKind,
) -> Result<ContrastCurve> {
    contrast_with(table, kind, effective_s11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitcell::StateRecord;
    use std::f64::consts::PI;

    fn table(states: Vec<Vec<Complex64>>) -> SParameterTable {
        let n = states[0].len();
        let freqs = (0..n).map(|i| 1e9 + i as f64 * 1e6).collect();
        let recs = states
            .into_iter()
            .enumerate()
            .map(|(i, s11)| StateRecord {
                state_id: format!("s{i}"),
                s11,
                s21: None,
            })
            .collect();
        SParameterTable::new(freqs, recs, PortCount::One).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn antipodal_states_reach_upper_bound() {
        let t = table(vec![vec![c(1.0, 0.0); 3], vec![c(-1.0, 0.0); 3]]);
        let curve = max_contrast(&t, ContrastKind::Reflection).unwrap();
        assert!(curve.contrast.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn single_state_is_flat_zero() {
        let t = table(vec![vec![c(0.3, 0.4); 4]]);
        let curve = max_contrast(&t, ContrastKind::Reflection).unwrap();
        assert!(curve.contrast.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_states_exhaustive_pairs() {
        // Pair distances: |0.9+0.1| = 1.0, |0.9-0.3j| = 0.9487, |-0.1-0.3j| = 0.3162.
        let t = table(vec![
            vec![c(0.9, 0.0), c(0.0, 0.0)],
            vec![c(-0.1, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.3), c(0.0, 0.0)],
        ]);
        let curve = max_contrast(&t, ContrastKind::Reflection).unwrap();
        assert!((curve.contrast[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transmission_on_one_port_rejected() {
        let t = table(vec![vec![c(0.0, 0.0); 2]]);
        assert!(max_contrast(&t, ContrastKind::Transmission).is_err());
    }

    #[test]
    fn transmission_uses_s21() {
        let rec = |id: &str, s21: f64| StateRecord {
            state_id: id.into(),
            s11: vec![c(0.0, 0.0); 2],
            s21: Some(vec![c(s21, 0.0); 2]),
        };
        let t = SParameterTable::new(vec![1.0, 2.0], vec![rec("a", 0.7), rec("b", -0.7)], PortCount::Two)
            .unwrap();
        let ct = max_contrast(&t, ContrastKind::Transmission).unwrap();
        let cr = max_contrast(&t, ContrastKind::Reflection).unwrap();
        assert!((ct.contrast[0] - 1.4).abs() < 1e-12);
        assert_eq!(cr.contrast[0], 0.0);
    }

    #[test]
    fn effective_s11_cases() {
        assert!(effective_s11(Complex64::from_polar(1.0, 0.7)).norm() < 1e-15);
        assert_eq!(effective_s11(c(0.0, 0.0)), c(1.0, 0.0));
        let e = effective_s11(Complex64::from_polar(0.2, PI / 3.0));
        assert!((e - Complex64::from_polar(0.8, PI / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn effective_contrast_cases() {
        let zero = table(vec![vec![c(0.0, 0.0); 2], vec![c(0.0, 0.0); 2]]);
        let curve = max_contrast_effective(&zero, ContrastKind::Reflection).unwrap();
        assert_eq!(curve.contrast[0], 0.0);

        // S11 = 0 maps to 1, S11 = e^{j pi} maps to 0.
        let t = table(vec![vec![c(0.0, 0.0); 2], vec![Complex64::from_polar(1.0, PI); 2]]);
        let curve = max_contrast_effective(&t, ContrastKind::Reflection).unwrap();
        assert!((curve.contrast[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn value_at_interpolates() {
        let curve = ContrastCurve::new(vec![1.0, 2.0], vec![0.0, 2.0], ContrastKind::Reflection).unwrap();
        assert_eq!(curve.value_at(1.5), Some(1.0));
        assert_eq!(curve.value_at(2.0), Some(2.0));
        assert_eq!(curve.value_at(2.5), None);
    }

    #[test]
    fn csv_header() {
        let curve = ContrastCurve::new(vec![5e9], vec![1.5], ContrastKind::Reflection).unwrap();
        assert_eq!(curve.to_csv(), "frequency_hz,contrast\n5000000000,1.5\n");
    }
}
