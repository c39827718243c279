//! Uplink link metrics: equivalent channel gain after BS combining, the
//! transmit power a voice link needs, and rate-adapted spectral efficiency.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::beamforming::{
    self, multistart_ascent, rotated_starts, AscentObjective, RisConfig, DEFAULT_MAX_ROUNDS,
};
use crate::error::Result;
use crate::propagation::{self, PathChannel, RisChannel};
use crate::scene::{Point, Scene};

/// Largest lookup^M for which the RIS profile is found by enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisMode {
    /// No RIS path.
    Off,
    /// RIS configured for maximum gain; switching it off stays an option.
    Optimized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub target_snr_db: f64,
    pub max_tx_power_dbm: f64,
    pub min_tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub se_max_bps_hz: f64,
}

impl LinkBudget {
    pub fn from_scene(scene: &Scene) -> Self {
        LinkBudget {
            target_snr_db: scene.link.target_snr_db,
            max_tx_power_dbm: scene.link.max_tx_power_dbm,
            min_tx_power_dbm: scene.link.min_tx_power_dbm,
            noise_power_dbm: scene.noise_power_dbm(scene.bandwidth_hz()),
            se_max_bps_hz: scene.link.se_max_bps_hz,
        }
    }
}

/// Wideband objective `mean_n |h_n|^2` with O(N * antennas) single-element
/// updates. `h` starts as the direct response; `value` adds the RIS terms.
struct WidebandGain {
    products: Vec<Vec<Complex64>>,
    /// Per-element phase step between adjacent subcarriers.
    rot: Vec<Complex64>,
    phasors: Vec<Complex64>,
    n: usize,
    /// Current response `[subcarrier][antenna]`.
    h: Vec<Vec<Complex64>>,
    cached: Option<(usize, Complex64)>,
}

impl WidebandGain {
    fn new(scene: &Scene, direct: &[PathChannel], ris: &RisChannel, lookup: &[f64]) -> Self {
        let n = scene.subcarrier_count;
        let dn = scene.subcarrier_spacing_hz;
        WidebandGain {
            products: ris.products(),
            rot: ris
                .element_delays_s
                .iter()
                .map(|t| Complex64::from_polar(1.0, -2.0 * PI * dn * t))
                .collect(),
            phasors: lookup.iter().map(|p| Complex64::from_polar(1.0, *p)).collect(),
            n,
            h: (0..n)
                .map(|k| direct.iter().map(|p| p.per_subcarrier(k, dn)).collect())
                .collect(),
            cached: None,
        }
    }

    fn add(&mut self, m: usize, coef: Complex64) {
        let mut rk = coef;
        for k in 0..self.n {
            for (h, c) in self.h[k].iter_mut().zip(&self.products[m]) {
                *h += c * rk;
            }
            rk *= self.rot[m];
        }
        self.cached = None;
    }

    fn current(&self) -> f64 {
        self.h.iter().map(|v| beamforming::norm_sqr(v)).sum::<f64>() / self.n as f64
    }

    /// `mean_n <h_n, c_{m,n}>`.
    fn overlap(&mut self, m: usize) -> Complex64 {
        if let Some((cm, x)) = self.cached {
            if cm == m {
                return x;
            }
        }
        let mut x = Complex64::new(0.0, 0.0);
        let mut rk = Complex64::new(1.0, 0.0);
        for k in 0..self.n {
            for (h, c) in self.h[k].iter().zip(&self.products[m]) {
                x += h.conj() * c * rk;
            }
            rk *= self.rot[m];
        }
        x /= self.n as f64;
        self.cached = Some((m, x));
        x
    }
}

impl AscentObjective for WidebandGain {
    fn value(&mut self, config: &[usize]) -> f64 {
        for (m, &i) in config.iter().enumerate() {
            self.add(m, self.phasors[i]);
        }
        self.current()
    }

    fn trial(&mut self, config: &[usize], m: usize, candidate: usize) -> f64 {
        let delta = self.phasors[candidate] - self.phasors[config[m]];
        let x = self.overlap(m);
        let y = beamforming::norm_sqr(&self.products[m]);
        self.current() + 2.0 * (delta * x).re + delta.norm_sqr() * y
    }

    fn accept(&mut self, config: &[usize], m: usize, previous: usize) {
        let delta = self.phasors[config[m]] - self.phasors[previous];
        self.add(m, delta);
    }
}

/// Gain of the best RIS profile found over the lookup, with the profile.
pub fn optimize_ris(
    scene: &Scene,
    direct: &[PathChannel],
    ris: &RisChannel,
) -> (f64, RisConfig) {
    let lookup = &scene.ris.as_ref().expect("RIS present").phase_lookup;
    let m = ris.element_count();
    let l = lookup.len();
    let exhaustive = (l as f64).powi(m as i32) <= EXHAUSTIVE_LIMIT as f64;
    if exhaustive {
        let total = l.pow(m as u32);
        let mut best = (f64::NEG_INFINITY, vec![0; m]);
        let mut idx = vec![0usize; m];
        for code in 0..total {
            let mut c = code;
            for i in idx.iter_mut() {
                *i = c % l;
                c /= l;
            }
            let cfg = RisConfig::from_indices(idx.clone(), lookup);
            let g = beamforming::config_gain(scene, direct, ris, &cfg);
            if g > best.0 {
                best = (g, idx.clone());
            }
        }
        return (best.0, RisConfig::from_indices(best.1, lookup));
    }

    // Start from per-element alignment with the direct path on the carrier,
    // under every common rotation of the surface.
    let d: Vec<Complex64> = direct.iter().map(|p| p.complex_gain).collect();
    let aligned: Vec<f64> = ris
        .products()
        .iter()
        .map(|c| {
            let proj: Complex64 = d.iter().zip(c).map(|(d, c)| d.conj() * c).sum();
            if proj == Complex64::new(0.0, 0.0) {
                -c.first().map_or(0.0, |z| z.arg())
            } else {
                -proj.arg()
            }
        })
        .collect();
    let res = multistart_ascent(
        rotated_starts(&aligned, lookup),
        l,
        || WidebandGain::new(scene, direct, ris, lookup),
        DEFAULT_MAX_ROUNDS,
    );
    let cfg = RisConfig::from_indices(res.indices, lookup);
    (beamforming::config_gain(scene, direct, ris, &cfg), cfg)
}

/// Linear post-MRC power gain and the RIS profile used (`None` when the RIS
/// is off or absent or when switching it off is better).
pub fn gain_linear(
    scene: &Scene,
    bs: usize,
    point: &Point,
    mode: RisMode,
) -> Result<(f64, Option<RisConfig>)> {
    let direct = propagation::direct_channel(scene, bs, point)?;
    let n = scene.subcarrier_count;
    let off = (0..n)
        .map(|k| {
            beamforming::norm_sqr(&propagation::frequency_response(
                &direct,
                None,
                k,
                scene.subcarrier_spacing_hz,
            ))
        })
        .sum::<f64>()
        / n as f64;
    if mode == RisMode::Off || scene.ris.is_none() {
        return Ok((off, None));
    }
    let ris = propagation::ris_channel(scene, bs, point)?;
    let (g, cfg) = optimize_ris(scene, &direct, &ris);
    if g > off {
        Ok((g, Some(cfg)))
    } else {
        Ok((off, None))
    }
}

/// Equivalent gain in dB; NaN at points coinciding with a node.
pub fn equivalent_gain(scene: &Scene, bs: usize, point: &Point, mode: RisMode) -> f64 {
    match gain_linear(scene, bs, point, mode) {
        Ok((g, _)) => 10.0 * g.log10(),
        Err(_) => f64::NAN,
    }
}

/// Transmit power giving the target SNR, clamped below at the device
/// minimum; `None` when it would exceed the maximum or the gain is unknown.
pub fn required_tx_power(gain_db: f64, budget: &LinkBudget) -> Option<f64> {
    if !gain_db.is_finite() {
        return None;
    }
    let p = budget.target_snr_db + budget.noise_power_dbm - gain_db;
    if p > budget.max_tx_power_dbm {
        None
    } else {
        Some(p.max(budget.min_tx_power_dbm))
    }
}

/// Rate-adapted SE at maximum power, capped at `se_max`; `None` when the
/// voice target SNR is out of reach.
pub fn spectral_efficiency(gain_db: f64, budget: &LinkBudget) -> Option<f64> {
    if !gain_db.is_finite() {
        return None;
    }
    let snr_db = budget.max_tx_power_dbm + gain_db - budget.noise_power_dbm;
    if snr_db < budget.target_snr_db {
        return None;
    }
    Some((1.0 + 10f64.powf(snr_db / 10.0)).log2().min(budget.se_max_bps_hz))
}

/// Energy efficiency of a fixed-rate voice link in dB relative to
/// 1 bit/J/Hz: rate over transmit power.
pub fn energy_efficiency_db(tx_power_dbm: f64, rate_bps_hz: f64) -> f64 {
    10.0 * rate_bps_hz.log10() - (tx_power_dbm - 30.0)
}

/// Self-exposure utility in dB: rate over the exposure of the user to its own
/// emissions, which is proportional to its transmit power.
pub fn self_exposure_utility_db(tx_power_dbm: f64, rate_bps_hz: f64, exposure_db_per_w: f64) -> f64 {
    10.0 * rate_bps_hz.log10() - (tx_power_dbm - 30.0 + exposure_db_per_w)
}
