//! Grid sweeps with and without the RIS, per-cell classification and
//! Area-of-Influence extraction.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::link::{self, LinkBudget, RisMode};
use crate::localization;
use crate::scene::{ClassRule, Grid, Scene};
use crate::secrecy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricId {
    GainDb,
    TxPowerDbm,
    SeBpsHz,
    PebM,
    SseBpsHz,
}

impl MetricId {
    pub const ALL: [MetricId; 5] = [
        MetricId::GainDb,
        MetricId::TxPowerDbm,
        MetricId::SeBpsHz,
        MetricId::PebM,
        MetricId::SseBpsHz,
    ];

    /// Short name used on the command line and in file names.
    pub fn name(self) -> &'static str {
        match self {
            MetricId::GainDb => "gain",
            MetricId::TxPowerDbm => "tx_power",
            MetricId::SeBpsHz => "se",
            MetricId::PebM => "peb",
            MetricId::SseBpsHz => "sse",
        }
    }

    /// Field identifier including the unit.
    pub fn field_id(self) -> &'static str {
        match self {
            MetricId::GainDb => "gain_db",
            MetricId::TxPowerDbm => "tx_power_dbm",
            MetricId::SeBpsHz => "se_bps_hz",
            MetricId::PebM => "peb_m",
            MetricId::SseBpsHz => "sse_bps_hz",
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            MetricId::TxPowerDbm | MetricId::PebM => Sense::LowerBetter,
            _ => Sense::HigherBetter,
        }
    }

    pub fn rule(self, scene: &Scene) -> ClassRule {
        let t = &scene.thresholds;
        match self {
            MetricId::GainDb => t.gain_db,
            MetricId::TxPowerDbm => t.tx_power_dbm,
            MetricId::SeBpsHz => t.se_bps_hz,
            MetricId::PebM => t.peb_m,
            MetricId::SseBpsHz => t.sse_bps_hz,
        }
    }

    /// Maps a field value to the unit in which changes are judged, NaN
    /// when the cell has no service under the metric's feasibility rule.
    pub fn comparison_value(self, v: f64, scene: &Scene) -> f64 {
        match self {
            MetricId::PebM if v.is_finite() && v <= scene.thresholds.peb_feasible_m => 20.0 * v.log10(),
            MetricId::PebM => f64::NAN,
            MetricId::SseBpsHz if v >= scene.thresholds.sse_q_th_bps_hz => v,
            MetricId::SseBpsHz => f64::NAN,
            _ => v,
        }
    }

    /// Signed improvement of `with` over `without` in the comparison unit,
    /// ignoring feasibility.
    pub fn improvement(self, without: f64, with: f64) -> f64 {
        let (a, b) = match self {
            MetricId::PebM => (20.0 * without.log10(), 20.0 * with.log10()),
            _ => (without, with),
        };
        let d = match self.sense() {
            Sense::HigherBetter => b - a,
            Sense::LowerBetter => a - b,
        };
        if d.is_finite() {
            d
        } else {
            f64::NAN
        }
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name() == s || m.field_id() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = MetricId::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown metric {s:?}; allowed: {}",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Unchanged,
    Boosted,
    Enabled,
    Degraded,
    /// Improvement between the unchanged and boost thresholds.
    Marginal,
    /// No service with or without the RIS.
    InfeasibleBoth,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::Unchanged,
        Label::Boosted,
        Label::Enabled,
        Label::Degraded,
        Label::Marginal,
        Label::InfeasibleBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::Unchanged => "unchanged",
            Label::Boosted => "boosted",
            Label::Enabled => "enabled",
            Label::Degraded => "degraded",
            Label::Marginal => "marginal",
            Label::InfeasibleBoth => "infeasible_both",
        }
    }

    pub fn is_desired(self) -> bool {
        matches!(self, Label::Enabled | Label::Boosted | Label::Marginal)
    }

    pub fn is_undesired(self) -> bool {
        self == Label::Degraded
    }
}

/// Labels one cell. NaN means no service. Values are in the comparison
/// unit of the metric (dB for gains, powers and PEB).
pub fn classify_cell(without: f64, with: f64, rule: ClassRule, sense: Sense) -> Label {
    match (without.is_nan(), with.is_nan()) {
        (true, true) => Label::InfeasibleBoth,
        (true, false) => Label::Enabled,
        (false, true) => Label::Degraded,
        (false, false) => {
            let d = match sense {
                Sense::HigherBetter => with - without,
                Sense::LowerBetter => without - with,
            };
            if d >= rule.boost {
                Label::Boosted
            } else if d <= -rule.unchanged {
                Label::Degraded
            } else if d.abs() < rule.unchanged {
                Label::Unchanged
            } else {
                Label::Marginal
            }
        }
    }
}

/// Per-cell values of one metric under one RIS setting. Row-major over the
/// grid; NaN marks cells without a defined value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub metric: MetricId,
    pub with_ris: bool,
}

impl MetricField {
    pub fn new(grid: Grid, values: Vec<f64>, metric: MetricId, with_ris: bool) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.cell_count(),
                actual: values.len(),
            });
        }
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { f64::NAN })
            .collect();
        Ok(MetricField {
            grid,
            values,
            metric,
            with_ris,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMap {
    pub grid: Grid,
    pub labels: Vec<Label>,
    /// Signed improvement in the comparison unit; NaN when undefined.
    pub delta: Vec<f64>,
    pub aoi_cells: Vec<usize>,
    pub desired_aoi_cells: Vec<usize>,
    pub undesired_aoi_cells: Vec<usize>,
}

impl InfluenceMap {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn cells(&self, label: Label) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

/// Builds the influence map from comparison-unit values and improvements.
pub fn classify_values(
    grid: &Grid,
    without: &[f64],
    with: &[f64],
    delta: Vec<f64>,
    rule: ClassRule,
    sense: Sense,
) -> Result<InfluenceMap> {
    let n = grid.cell_count();
    for len in [without.len(), with.len(), delta.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let labels: Vec<Label> = without
        .iter()
        .zip(with)
        .map(|(&a, &b)| classify_cell(a, b, rule, sense))
        .collect();
    let pick = |f: fn(Label) -> bool| (0..n).filter(|&i| f(labels[i])).collect::<Vec<_>>();
    Ok(InfluenceMap {
        grid: grid.clone(),
        aoi_cells: pick(|l| l.is_desired() || l.is_undesired()),
        desired_aoi_cells: pick(Label::is_desired),
        undesired_aoi_cells: pick(Label::is_undesired),
        labels,
        delta,
    })
}

/// Classifies a with/without field pair under the scene's thresholds.
pub fn classify(without: &MetricField, with: &MetricField, scene: &Scene) -> Result<InfluenceMap> {
    if without.grid != with.grid {
        return Err(Error::Incompatible("fields are on different grids".into()));
    }
    if without.metric != with.metric {
        return Err(Error::Incompatible("fields hold different metrics".into()));
    }
    let m = without.metric;
    let cmp = |f: &MetricField| -> Vec<f64> {
        f.values.iter().map(|&v| m.comparison_value(v, scene)).collect()
    };
    let delta = without
        .values
        .iter()
        .zip(&with.values)
        .map(|(&a, &b)| m.improvement(a, b))
        .collect();
    classify_values(&without.grid, &cmp(without), &cmp(with), delta, m.rule(scene), m.sense())
}

/// Cells with value at or above `q_th`.
pub fn aoi_threshold_mask(field: &MetricField, q_th: f64) -> Vec<usize> {
    (0..field.values.len())
        .filter(|&i| field.values[i] >= q_th)
        .collect()
}

/// Copy of `field` with sub-threshold cells set to zero.
pub fn apply_threshold(field: &MetricField, q_th: f64) -> MetricField {
    let mut out = field.clone();
    for v in out.values.iter_mut() {
        if *v < q_th {
            *v = 0.0;
        }
    }
    out
}

fn point_pair(scene: &Scene, metric: MetricId, index: usize) -> Result<(f64, f64)> {
    let p = scene.ue_grid.point(index);
    let bs = scene.link.serving_bs;
    let budget = || LinkBudget::from_scene(scene);
    let nan = f64::NAN;
    Ok(match metric {
        MetricId::GainDb | MetricId::TxPowerDbm | MetricId::SeBpsHz => {
            let off = link::equivalent_gain(scene, bs, &p, RisMode::Off);
            let on = if scene.ris.is_some() && off.is_finite() {
                link::equivalent_gain(scene, bs, &p, RisMode::Optimized)
            } else {
                off
            };
            match metric {
                MetricId::GainDb => (off, on),
                MetricId::TxPowerDbm => {
                    let b = budget();
                    let f = |g| link::required_tx_power(g, &b).unwrap_or(nan);
                    (f(off), f(on))
                }
                _ => {
                    let b = budget();
                    let f = |g| link::spectral_efficiency(g, &b).unwrap_or(nan);
                    (f(off), f(on))
                }
            }
        }
        MetricId::PebM => {
            let idx = index as u64;
            let f = |with| match localization::peb_at(scene, &p, idx, with) {
                Ok(v) if v.is_finite() => v,
                _ => nan,
            };
            let without = f(false);
            let with = if scene.ris.is_some() { f(true) } else { without };
            (without, with)
        }
        MetricId::SseBpsHz => match secrecy::sse_pair(scene, &p, index as u64) {
            Ok(r) => r,
            Err(Error::Coincident(_)) => (nan, nan),
            Err(e) => return Err(e),
        },
    })
}

/// Checks that `metric` can be evaluated on `scene`.
pub fn check_compatible(scene: &Scene, metric: MetricId) -> Result<()> {
    if metric == MetricId::SseBpsHz && scene.eve.is_none() {
        return Err(Error::Incompatible(
            "the sse metric needs an eavesdropper (`eve`) in the scene".into(),
        ));
    }
    Ok(())
}

/// Evaluates `metric` on every grid cell without and with the RIS. Cells are
/// processed in parallel on the current rayon pool; results are ordered by
/// cell index.
pub fn sweep(scene: &Scene, metric: MetricId) -> Result<(MetricField, MetricField)> {
    check_compatible(scene, metric)?;
    let pairs: Vec<(f64, f64)> = (0..scene.ue_grid.cell_count())
        .into_par_iter()
        .map(|i| point_pair(scene, metric, i))
        .collect::<Result<_>>()?;
    let (without, with): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        MetricField::new(scene.ue_grid.clone(), without, metric, false)?,
        MetricField::new(scene.ue_grid.clone(), with, metric, true)?,
    ))
}
