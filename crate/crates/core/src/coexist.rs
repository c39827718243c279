//! Monte-Carlo model of an operator's link adaptation running on outdated
//! CSI while another operator's RIS switches profiles inside its band.
//!
//! The victim BS combines with MRC weights computed from the CSI report and
//! has no knowledge of the RIS. Each slot the foreign RIS resamples its
//! profile with some probability; the rate is selected from the SNR that was
//! reported `csi_delay_slots` earlier and a block fails when it exceeds the
//! capacity of the channel actually seen.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::beamforming::{self, RisConfig};
use crate::error::{Error, Result};
use crate::propagation::{self, PathChannel, RisChannel};
use crate::scene::{Point, Scene};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct CoexistConfig {
    pub slots: usize,
    pub switch_probability: f64,
    pub csi_delay_slots: usize,
    /// Shannon gap applied to the reported SNR when choosing the rate.
    pub mcs_gap_db: f64,
    /// Optional discrete rate table in bit/s/Hz; the largest entry not above
    /// the gap-adjusted Shannon rate is used (zero when none fits).
    pub rate_table: Option<Vec<f64>>,
    pub codebook: Vec<RisConfig>,
    pub seed: u64,
}

impl CoexistConfig {
    /// Defaults with the scene's default RIS codebook for the serving BS.
    pub fn for_scene(scene: &Scene, slots: usize, switch_probability: f64) -> Result<Self> {
        let codebook = match scene.ris {
            Some(_) => beamforming::default_codebook(scene, scene.link.serving_bs)?,
            None => Vec::new(),
        };
        Ok(CoexistConfig {
            slots,
            switch_probability,
            csi_delay_slots: 1,
            mcs_gap_db: 3.0,
            rate_table: None,
            codebook,
            seed: scene.seed,
        })
    }

    pub fn validate(&self, scene: &Scene) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.slots == 0 {
            return bad("slots: must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.switch_probability) {
            return bad(format!(
                "switch probability {} not in [0, 1]",
                self.switch_probability
            ));
        }
        if self.csi_delay_slots == 0 {
            return bad("csi delay: must be >= 1 slot".into());
        }
        if !(self.mcs_gap_db >= 0.0) || !self.mcs_gap_db.is_finite() {
            return bad(format!("mcs gap {} dB: must be finite and >= 0", self.mcs_gap_db));
        }
        if scene.ris.is_some() && self.codebook.is_empty() {
            return bad("codebook: must not be empty".into());
        }
        if let Some(ris) = &scene.ris {
            if let Some(c) = self.codebook.iter().find(|c| c.phases.len() != ris.element_count) {
                return Err(Error::DimensionMismatch {
                    expected: ris.element_count,
                    actual: c.phases.len(),
                });
            }
        }
        Ok(())
    }

    fn select_rate(&self, snr_reported: f64) -> f64 {
        let gap = 10f64.powf(self.mcs_gap_db / 10.0);
        let r = (1.0 + snr_reported / gap).log2();
        match &self.rate_table {
            Some(t) => t.iter().copied().filter(|&x| x <= r).fold(0.0, f64::max),
            None => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub snr_db: f64,
    pub selected_rate: f64,
    pub actual_capacity: f64,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoexistResult {
    pub bler: f64,
    /// Actual SNR of every transmitting slot.
    pub snr_trace_db: Vec<f64>,
    pub error_slots: Vec<usize>,
    pub records: Vec<SlotRecord>,
}

impl CoexistResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("slot,snr_db,selected_rate,actual_capacity,error\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.slot, r.snr_db, r.selected_rate, r.actual_capacity, r.error as u8
            )
            .unwrap();
        }
        s
    }
}

/// `[entry][subcarrier][antenna]`.
type Responses = Vec<Vec<Vec<Complex64>>>;

/// Per-subcarrier channels seen by the victim for each codebook entry (a
/// single entry when the scene has no RIS).
fn responses(
    scene: &Scene,
    point: &Point,
    codebook: &[RisConfig],
) -> Result<(Vec<PathChannel>, Option<RisChannel>, Responses)> {
    let bs = scene.link.serving_bs;
    let direct = propagation::direct_channel(scene, bs, point)?;
    let n = scene.subcarrier_count;
    let dn = scene.subcarrier_spacing_hz;
    let ris = match scene.ris {
        Some(_) => Some(propagation::ris_channel(scene, bs, point)?),
        None => None,
    };
    let h = match &ris {
        Some(r) if !codebook.is_empty() => codebook
            .iter()
            .map(|c| {
                (0..n)
                    .map(|k| propagation::frequency_response(&direct, Some((r, &c.phases)), k, dn))
                    .collect()
            })
            .collect(),
        _ => vec![(0..n).map(|k| propagation::frequency_response(&direct, None, k, dn)).collect()],
    };
    Ok((direct, ris, h))
}

/// `snr[old][new]`: linear SNR with MRC weights from profile `old` applied
/// to the channel under profile `new`, averaged over subcarriers.
fn snr_table(scene: &Scene, h: &[Vec<Vec<Complex64>>]) -> Vec<Vec<f64>> {
    let p_mw = 10f64.powf(scene.link.max_tx_power_dbm / 10.0);
    let noise_mw = 10f64.powf(scene.noise_power_dbm(scene.subcarrier_spacing_hz) / 10.0);
    let n = scene.subcarrier_count as f64;
    h.iter()
        .map(|old| {
            let w: Vec<Option<Vec<Complex64>>> = old.iter().map(|hk| beamforming::mrc_weights(hk)).collect();
            h.iter()
                .map(|new| {
                    let g: f64 = w
                        .iter()
                        .zip(new)
                        .map(|(w, hk)| w.as_ref().map_or(0.0, |w| beamforming::combined_gain(w, hk)))
                        .sum();
                    p_mw * g / n / noise_mw
                })
                .collect()
        })
        .collect()
}

/// Runs the slot recursion at `point`. Every slot consumes the same two
/// uniform draws whatever the switching probability, so runs that differ
/// only in that probability share their random numbers.
pub fn simulate(scene: &Scene, point: &Point, config: &CoexistConfig) -> Result<CoexistResult> {
    config.validate(scene)?;
    let (_, _, h) = responses(scene, point, &config.codebook)?;
    let table = snr_table(scene, &h);
    let k = table.len();
    let mut rng = seed::rng(config.seed, seed::COEXIST, 0);
    let mut state = Vec::with_capacity(config.slots);
    let mut current = rng.random_range(0..k);
    for _ in 0..config.slots {
        let u: f64 = rng.random();
        let pick = rng.random_range(0..k);
        if u < config.switch_probability {
            current = pick;
        }
        state.push(current);
    }

    let d = config.csi_delay_slots;
    let mut records = Vec::with_capacity(config.slots.saturating_sub(d));
    for t in d..config.slots {
        let old = state[t - d];
        let reported = table[old][old];
        let actual = table[old][state[t]];
        let rate = config.select_rate(reported);
        let capacity = (1.0 + actual).log2();
        records.push(SlotRecord {
            slot: t,
            snr_db: 10.0 * actual.log10(),
            selected_rate: rate,
            actual_capacity: capacity,
            error: capacity < rate,
        });
    }
    let error_slots: Vec<usize> = records.iter().filter(|r| r.error).map(|r| r.slot).collect();
    let bler = if records.is_empty() {
        0.0
    } else {
        error_slots.len() as f64 / records.len() as f64
    };
    Ok(CoexistResult {
        bler,
        snr_trace_db: records.iter().map(|r| r.snr_db).collect(),
        error_slots,
        records,
    })
}

/// Mean RIS-path power over the codebook relative to the direct-path power,
/// in dB; `-inf` without an RIS.
pub fn ris_to_direct_db(scene: &Scene, point: &Point, codebook: &[RisConfig]) -> Result<f64> {
    let (direct, ris, _) = responses(scene, point, &[])?;
    let Some(ris) = ris else {
        return Ok(f64::NEG_INFINITY);
    };
    if codebook.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let pd: f64 = direct.iter().map(|p| p.complex_gain.norm_sqr()).sum();
    let pr = codebook
        .iter()
        .map(|c| ris.cascade(&c.phases).map(|v| beamforming::norm_sqr(&v)))
        .sum::<Result<f64>>()?
        / codebook.len() as f64;
    Ok(10.0 * (pr / pd).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x_m: f64,
    pub y_m: f64,
    pub ris_to_direct_db: f64,
    pub bler: f64,
}

/// BLER at each point with its RIS-to-direct power ratio. All points share
/// the same random numbers.
pub fn bler_vs_overlap_curve(scene: &Scene, points: &[Point], config: &CoexistConfig) -> Result<Vec<CurveRow>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points given".into()));
    }
    points
        .par_iter()
        .map(|p| {
            Ok(CurveRow {
                x_m: p.x,
                y_m: p.y,
                ris_to_direct_db: ris_to_direct_db(scene, p, &config.codebook)?,
                bler: simulate(scene, p, config)?.bler,
            })
        })
        .collect()
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("x_m,y_m,ris_to_direct_db,bler\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.x_m, r.y_m, r.ris_to_direct_db, r.bler).unwrap();
    }
    s
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with tied values given their average rank.
/// NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_known_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // Ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rate_table_picks_largest_fitting_entry() {
        let c = CoexistConfig {
            slots: 1,
            switch_probability: 0.0,
            csi_delay_slots: 1,
            mcs_gap_db: 0.0,
            rate_table: Some(vec![0.5, 1.0, 2.0, 4.0]),
            codebook: vec![],
            seed: 1,
        };
        // Shannon rate at SNR 7 is 3.
        assert_eq!(c.select_rate(7.0), 2.0);
        assert_eq!(c.select_rate(0.1), 0.0);
    }

    #[test]
    fn neg_inf_formatting() {
        let rows = [CurveRow { x_m: 1.0, y_m: 2.0, ris_to_direct_db: f64::NEG_INFINITY, bler: 0.0 }];
        assert_eq!(curve_csv(&rows), "x_m,y_m,ris_to_direct_db,bler\n1,2,-inf,0\n");
    }
}
