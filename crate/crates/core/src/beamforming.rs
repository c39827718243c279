//! BS combining, RIS phase design and the sounding-phase codebook sweep.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagation::{self, RisChannel};
use crate::scene::{Point, Scene};

/// Tolerance used when comparing circular distances for tie-breaking.
const TIE_EPS: f64 = 1e-12;

/// Relative per-round improvement below which coordinate ascent stops.
pub const ASCENT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 20;

/// One RIS phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfig {
    pub phases: Vec<f64>,
    /// Lookup index per element when the profile is quantized.
    pub codebook_indices: Option<Vec<usize>>,
}

impl RisConfig {
    pub fn continuous(phases: Vec<f64>) -> Self {
        RisConfig {
            phases,
            codebook_indices: None,
        }
    }

    pub fn from_indices(indices: Vec<usize>, lookup: &[f64]) -> Self {
        RisConfig {
            phases: indices.iter().map(|&i| lookup[i]).collect(),
            codebook_indices: Some(indices),
        }
    }

    /// The all-zero (specular) profile.
    pub fn specular(element_count: usize, lookup: &[f64]) -> Self {
        let zero = nearest_index(0.0, lookup);
        RisConfig::from_indices(vec![zero; element_count], lookup)
    }
}

pub fn norm_sqr(h: &[Complex64]) -> f64 {
    h.iter().map(|x| x.norm_sqr()).sum()
}

/// Maximal-ratio combiner `h / |h|`; `None` for the zero vector.
pub fn mrc_weights(h: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = norm_sqr(h).sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(h.iter().map(|x| x / n).collect())
}

/// Post-combining power gain `|w^H h|^2`.
pub fn combined_gain(w: &[Complex64], h: &[Complex64]) -> f64 {
    w.iter().zip(h).map(|(w, h)| w.conj() * h).sum::<Complex64>().norm_sqr()
}

fn arg0(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Phases that co-phase every element product with `direct`:
/// `phi_m = arg(direct) - arg(product_m)`.
pub fn optimal_phases_continuous(products: &[Complex64], direct: Complex64) -> RisConfig {
    let target = arg0(direct);
    RisConfig::continuous(products.iter().map(|p| wrap(target - arg0(*p))).collect())
}

/// Wraps to `(-pi, pi]`.
pub fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Index of the lookup entry nearest to `phi` on the circle; ties go to the
/// smaller index.
pub fn nearest_index(phi: f64, lookup: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &l) in lookup.iter().enumerate() {
        let d = circular_distance(phi, l);
        if d < best_d - TIE_EPS {
            best = i;
            best_d = d;
        }
    }
    best
}

pub fn quantize_config(config: &RisConfig, lookup: &[f64]) -> Result<RisConfig> {
    if lookup.is_empty() {
        return Err(Error::InvalidArgument("empty phase lookup".into()));
    }
    let idx = config.phases.iter().map(|&p| nearest_index(p, lookup)).collect();
    Ok(RisConfig::from_indices(idx, lookup))
}

/// An objective that can price single-element changes cheaply.
pub trait AscentObjective {
    /// Objective value of `config`.
    fn value(&mut self, config: &[usize]) -> f64;

    /// Objective value of `config` with element `m` set to `candidate`.
    fn trial(&mut self, config: &[usize], m: usize, candidate: usize) -> f64;

    /// Called after element `m` of `config` was changed from `previous`.
    fn accept(&mut self, _config: &[usize], _m: usize, _previous: usize) {}
}

/// Adapter for plain closures over the whole index vector.
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[usize]) -> f64> AscentObjective for FnObjective<F> {
    fn value(&mut self, config: &[usize]) -> f64 {
        (self.0)(config)
    }

    fn trial(&mut self, config: &[usize], m: usize, candidate: usize) -> f64 {
        let mut c = config.to_vec();
        c[m] = candidate;
        (self.0)(&c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub indices: Vec<usize>,
    pub value: f64,
    /// Objective after initialization and after every element step.
    pub trace: Vec<f64>,
    pub rounds: usize,
}

/// Element-wise best-response sweeps over the lookup. A change is taken
/// only on strict improvement, so ties keep the current entry and, among
/// improving candidates, the lowest index wins.
pub fn coordinate_ascent<O: AscentObjective>(
    init: Vec<usize>,
    lookup_len: usize,
    objective: &mut O,
    max_rounds: usize,
) -> AscentResult {
    let mut config = init;
    let mut value = objective.value(&config);
    let mut trace = vec![value];
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let start = value;
        for m in 0..config.len() {
            let current = config[m];
            let mut best = current;
            let mut best_v = value;
            for cand in 0..lookup_len {
                if cand == current {
                    continue;
                }
                let v = objective.trial(&config, m, cand);
                if v > best_v {
                    best = cand;
                    best_v = v;
                }
            }
            if best != current {
                config[m] = best;
                objective.accept(&config, m, current);
                value = best_v;
            }
            trace.push(value);
        }
        if value - start <= ASCENT_TOLERANCE * start.abs() {
            break;
        }
    }
    AscentResult {
        indices: config,
        value,
        trace,
        rounds,
    }
}

/// Quantized starting profiles from continuous `phases`: the profile
/// snapped to the lookup after a common rotation by each lookup step
/// (duplicates removed, unrotated first).
pub fn rotated_starts(phases: &[f64], lookup: &[f64]) -> Vec<Vec<usize>> {
    let base = lookup.first().copied().unwrap_or(0.0);
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(lookup.len());
    for &step in lookup {
        let idx: Vec<usize> = phases
            .iter()
            .map(|&p| nearest_index(p + step - base, lookup))
            .collect();
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    out
}

/// Runs [`coordinate_ascent`] from every start with a fresh objective and
/// keeps the best result (earliest start on ties).
pub fn multistart_ascent<O: AscentObjective>(
    starts: Vec<Vec<usize>>,
    lookup_len: usize,
    mut make_objective: impl FnMut() -> O,
    max_rounds: usize,
) -> AscentResult {
    starts
        .into_iter()
        .map(|s| coordinate_ascent(s, lookup_len, &mut make_objective(), max_rounds))
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one start")
}

/// Evaluates every codebook entry with `gain` and returns the best one
/// (first wins ties) with its gain.
pub fn codebook_sweep(
    codebook: &[RisConfig],
    mut gain: impl FnMut(&RisConfig) -> f64,
) -> Result<(usize, &RisConfig, f64)> {
    if codebook.is_empty() {
        return Err(Error::InvalidArgument("empty codebook".into()));
    }
    let mut best = 0;
    let mut best_g = f64::NEG_INFINITY;
    for (i, c) in codebook.iter().enumerate() {
        let g = gain(c);
        if g > best_g {
            best = i;
            best_g = g;
        }
    }
    Ok((best, &codebook[best], best_g))
}

/// Post-MRC gain at `point`, averaged over the scene's subcarriers, with the
/// RIS set to `config`.
pub fn config_gain(
    scene: &Scene,
    direct: &[propagation::PathChannel],
    ris: &RisChannel,
    config: &RisConfig,
) -> f64 {
    let n = scene.subcarrier_count;
    (0..n)
        .map(|k| {
            norm_sqr(&propagation::frequency_response(
                direct,
                Some((ris, &config.phases)),
                k,
                scene.subcarrier_spacing_hz,
            ))
        })
        .sum::<f64>()
        / n as f64
}

/// Codebook sweep at one point: the sounding procedure run through the
/// channel model. With `sounding_snr_db` set in the scene, each sounded gain
/// is perturbed by multiplicative Gaussian error of that SNR.
pub fn sweep_at(
    scene: &Scene,
    bs: usize,
    point: &Point,
    codebook: &[RisConfig],
    point_index: u64,
) -> Result<(usize, f64)> {
    use rand_distr::{Distribution, Normal};
    let direct = propagation::direct_channel(scene, bs, point)?;
    let ris = propagation::ris_channel(scene, bs, point)?;
    let mut noise = scene.codebook.sounding_snr_db.map(|snr| {
        let sd = 10f64.powf(-snr / 20.0);
        (crate::seed::rng(scene.seed, crate::seed::SOUNDING, point_index), Normal::new(0.0, sd).expect("finite sd"))
    });
    let (i, _, _) = codebook_sweep(codebook, |c| {
        let g = config_gain(scene, &direct, &ris, c);
        match noise.as_mut() {
            Some((rng, dist)) => g * (1.0 + dist.sample(rng)),
            None => g,
        }
    })?;
    Ok((i, config_gain(scene, &direct, &ris, &codebook[i])))
}

/// Default sounding codebook for BS `bs`: `beams` quantized profiles that
/// re-radiate the BS's wave towards a uniform fan of directions across the
/// RIS's front half-plane, followed by the specular all-zero profile.
pub fn default_codebook(scene: &Scene, bs: usize) -> Result<Vec<RisConfig>> {
    let ris = scene
        .ris
        .as_ref()
        .ok_or_else(|| Error::Incompatible("scene has no RIS".into()))?;
    let lookup = &ris.phase_lookup;
    let k = 2.0 * PI / scene.wavelength_m();
    let els = ris.element_positions();
    let q = scene.bs_list[bs].position_m;
    let incident: Vec<f64> = els.iter().map(|r| k * (r - q).norm()).collect();
    let mid = (ris.element_count as f64 - 1.0) / 2.0;
    let beams = scene.codebook.beams;
    let mut book = Vec::with_capacity(beams + 1);
    for b in 0..beams {
        let psi = -PI / 2.0 + (b as f64 + 0.5) * PI / beams as f64;
        let phases: Vec<f64> = (0..ris.element_count)
            .map(|m| {
                let s = (m as f64 - mid) * ris.element_spacing_m;
                wrap(incident[m] - k * s * psi.sin())
            })
            .collect();
        book.push(quantize_config(&RisConfig::continuous(phases), lookup)?);
    }
    book.push(RisConfig::specular(ris.element_count, lookup));
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn two_bit() -> Vec<f64> {
        vec![0.0, FRAC_PI_2, PI, -FRAC_PI_2]
    }

    #[test]
    fn mrc_basics() {
        let e1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let w = mrc_weights(&e1).unwrap();
        assert_eq!(w, e1);
        assert_eq!(combined_gain(&w, &e1), 1.0);
        let h3: Vec<Complex64> = e1.iter().map(|x| x * 3.0).collect();
        assert!((norm_sqr(&h3) - 9.0).abs() < 1e-12);
        assert!(mrc_weights(&[Complex64::new(0.0, 0.0)]).is_none());
    }

    #[test]
    fn continuous_phase_examples() {
        let c = optimal_phases_continuous(&[Complex64::from_polar(1.0, PI / 4.0)], Complex64::new(0.0, 0.0));
        assert!((c.phases[0] + PI / 4.0).abs() < 1e-15);
        let c = optimal_phases_continuous(&[Complex64::new(2.0, 0.0); 3], Complex64::new(1.0, 0.0));
        assert!(c.phases.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn quantization_examples() {
        let l = two_bit();
        assert_eq!(nearest_index(PI / 5.0, &l), 0);
        assert_eq!(nearest_index(PI / 4.0, &l), 0);
        assert_eq!(nearest_index(3.0 * PI / 4.0, &l), 1);
        assert_eq!(nearest_index(-3.0 * PI / 4.0, &l), 2);
        assert_eq!(nearest_index(-PI, &l), 2);
        assert_eq!(nearest_index(1.9 * PI, &l), 0);
        assert!(quantize_config(&RisConfig::continuous(vec![0.0]), &[]).is_err());
    }

    #[test]
    fn ascent_on_single_element_is_exhaustive() {
        let vals = [0.3, 0.9, 0.1, 0.5];
        let mut obj = FnObjective(|c: &[usize]| vals[c[0]]);
        let r = coordinate_ascent(vec![0], 4, &mut obj, DEFAULT_MAX_ROUNDS);
        assert_eq!(r.indices, vec![1]);
        assert_eq!(r.value, 0.9);
    }

    #[test]
    fn constant_objective_stops_after_one_round() {
        let mut obj = FnObjective(|_: &[usize]| 1.0);
        let r = coordinate_ascent(vec![2, 3, 1], 4, &mut obj, DEFAULT_MAX_ROUNDS);
        assert_eq!(r.indices, vec![2, 3, 1]);
        assert_eq!(r.rounds, 1);
    }

    #[test]
    fn rotated_starts_cover_common_phase() {
        let l = two_bit();
        let starts = rotated_starts(&[0.1, FRAC_PI_2], &l);
        assert_eq!(starts, vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]]);
        // A two-entry lookup collapses the rotations of an aligned profile.
        assert_eq!(rotated_starts(&[0.0], &[0.0, PI]).len(), 2);
    }

    #[test]
    fn multistart_beats_single_start_trap() {
        // Index vector [1, 1] is the global max; [0, 0] is a local trap.
        let f = |c: &[usize]| match (c[0], c[1]) {
            (1, 1) => 3.0,
            (0, 0) => 2.0,
            _ => 0.0,
        };
        let single = coordinate_ascent(vec![0, 0], 2, &mut FnObjective(f), DEFAULT_MAX_ROUNDS);
        assert_eq!(single.value, 2.0);
        let multi = multistart_ascent(vec![vec![0, 0], vec![1, 1]], 2, || FnObjective(f), DEFAULT_MAX_ROUNDS);
        assert_eq!((multi.indices, multi.value), (vec![1, 1], 3.0));
    }

    #[test]
    fn sweep_ties_go_to_first() {
        let book = vec![
            RisConfig::continuous(vec![0.0]),
            RisConfig::continuous(vec![1.0]),
            RisConfig::continuous(vec![2.0]),
        ];
        let (i, _, g) = codebook_sweep(&book, |c| if c.phases[0] > 0.5 { 2.0 } else { 1.0 }).unwrap();
        assert_eq!((i, g), (1, 2.0));
        assert!(codebook_sweep(&[], |_| 0.0).is_err());
    }
}
