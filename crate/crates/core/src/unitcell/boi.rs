use super::ContrastCurve;
use crate::error::{Error, Result};

/// Frequency intervals where a contrast curve is at or above `c_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandOfInfluence {
    /// Maximal super-threshold intervals `(f1, f2)`, ascending and disjoint.
    pub intervals: Vec<(f64, f64)>,
    /// Index of the widest interval (lowest frequency wins ties).
    pub principal: Option<usize>,
    /// Midpoint of the principal interval.
    pub f0_hz: Option<f64>,
    /// Width of the principal interval.
    pub width_hz: Option<f64>,
    pub c_min: f64,
}

impl BandOfInfluence {
    pub fn principal_interval(&self) -> Option<(f64, f64)> {
        self.principal.map(|i| self.intervals[i])
    }

    pub fn contains(&self, f: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| f >= a && f <= b)
    }

    /// One `name,f1_hz,f2_hz,f0_hz,width_hz` row (no header) for the
    /// principal interval; fields are empty when there is no BoI.
    pub fn summary_row(&self, name: &str) -> String {
        match self.principal_interval() {
            Some((f1, f2)) => format!(
                "{name},{f1},{f2},{},{}\n",
                self.f0_hz.unwrap(),
                self.width_hz.unwrap()
            ),
            None => format!("{name},,,,\n"),
        }
    }

    pub const SUMMARY_HEADER: &'static str = "name,f1_hz,f2_hz,f0_hz,width_hz\n";
}

/// Extracts the BoI of `curve` at threshold `c_min`.
///
/// Interval edges between samples are placed where the linear interpolant
/// crosses `c_min`; edges at the ends of the sampled band stay at the band
/// edge.
pub fn extract_boi(curve: &ContrastCurve, c_min: f64) -> Result<BandOfInfluence> {
    if !(c_min > 0.0 && c_min <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "c_min = {c_min} is outside the contrast range (0, 2]"
        )));
    }
    let f = &curve.frequencies_hz;
    let c = &curve.contrast;
    if f.is_empty() || f.len() != c.len() {
        return Err(Error::InvalidArgument("empty or ragged contrast curve".into()));
    }
    let n = f.len();
    let crossing = |a: usize, b: usize| f[a] + (c_min - c[a]) / (c[b] - c[a]) * (f[b] - f[a]);

    let mut intervals = Vec::new();
    let mut i = 0;
    while i < n {
        if c[i] < c_min {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && c[i + 1] >= c_min {
            i += 1;
        }
        let end = i;
        let f1 = if start == 0 { f[0] } else { crossing(start - 1, start) };
        let f2 = if end == n - 1 { f[n - 1] } else { crossing(end + 1, end) };
        if f2 > f1 {
            intervals.push((f1, f2));
        }
        i += 1;
    }

    let mut principal: Option<usize> = None;
    for (k, &(a, b)) in intervals.iter().enumerate() {
        let wider = match principal {
            None => true,
            Some(p) => (b - a) > intervals[p].1 - intervals[p].0,
        };
        if wider {
            principal = Some(k);
        }
    }
    let (f0_hz, width_hz) = match principal {
        Some(p) => {
            let (a, b) = intervals[p];
            (Some((a + b) / 2.0), Some(b - a))
        }
        None => (None, None),
    };
    Ok(BandOfInfluence {
        intervals,
        principal,
        f0_hz,
        width_hz,
        c_min,
    })
}

/// A contrast curve re-indexed by `f / f0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCurve {
    pub name: String,
    pub f0_hz: f64,
    pub normalized_frequency: Vec<f64>,
    pub contrast: Vec<f64>,
}

/// Puts several designs on a common `f / f0` axis.
pub fn normalized_boi(curves: &[(String, ContrastCurve, f64)]) -> Result<Vec<NormalizedCurve>> {
    curves
        .iter()
        .map(|(name, curve, f0)| {
            if !(*f0 > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name}: central frequency must be > 0, got {f0}"
                )));
            }
            Ok(NormalizedCurve {
                name: name.clone(),
                f0_hz: *f0,
                normalized_frequency: curve.frequencies_hz.iter().map(|f| f / f0).collect(),
                contrast: curve.contrast.clone(),
            })
        })
        .collect()
}

/// Long-format CSV `name,normalized_frequency,contrast` for all curves.
pub fn normalized_csv(curves: &[NormalizedCurve]) -> String {
    let mut out = String::from("name,normalized_frequency,contrast\n");
    for c in curves {
        for (x, y) in c.normalized_frequency.iter().zip(&c.contrast) {
            out.push_str(&format!("{},{x},{y}\n", c.name));
        }
    }
    out
}

/// Interval edges divided by `f0`.
pub fn normalize_interval((f1, f2): (f64, f64), f0: f64) -> (f64, f64) {
    (f1 / f0, f2 / f0)
}
