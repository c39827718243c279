//! Secrecy spectral efficiency of a multi-antenna BS -> RX link with an
//! eavesdropper, and an alternating covariance / RIS-phase optimizer.
//!
//! Only a single transmit covariance `Q` and the quantized RIS phases are
//! optimized. Channels are Friis amplitudes times i.i.d. unit-variance
//! complex Gaussian fading per link.

use std::f64::consts::LN_2;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::beamforming::{
    coordinate_ascent, nearest_index, AscentObjective, RisConfig, DEFAULT_MAX_ROUNDS,
};
use crate::error::{Error, Result};
use crate::link::EXHAUSTIVE_LIMIT;
use crate::propagation;
use crate::scene::{Point, Scene};
use crate::seed;

type CMat = DMatrix<Complex64>;

const PGA_MAX_ITERATIONS: usize = 100;
const PGA_TOLERANCE: f64 = 1e-5;
const OUTER_TOLERANCE: f64 = 1e-6;

/// Physical MIMO wiretap link.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoLink {
    pub h_rx: CMat,
    pub h_eve: CMat,
    pub noise_variance: f64,
    pub power_budget: f64,
}

/// `log2 det(I + H Q H^H)`.
fn rate(h: &CMat, q: &CMat) -> f64 {
    let n = h.nrows();
    let m = h * q * h.adjoint() + CMat::identity(n, n);
    logdet_hpd(m) / LN_2
}

/// `log2 det(I + F F^H)`, evaluated on the smaller Gram matrix.
fn rate_factor(f: &CMat) -> f64 {
    let g = if f.nrows() <= f.ncols() {
        f * f.adjoint()
    } else {
        f.adjoint() * f
    };
    let n = g.nrows();
    logdet_hpd(g + CMat::identity(n, n)) / LN_2
}

fn logdet_hpd(m: CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match Cholesky::new(m.clone()) {
        Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>(),
        None => m.symmetric_eigen().eigenvalues.iter().map(|l| l.max(1e-300).ln()).sum(),
    }
}

fn hermitian(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Secrecy rate in bit/s/Hz for covariance `q`, clamped at zero.
pub fn secrecy_rate(link: &MimoLink, q: &CMat) -> Result<f64> {
    let n = link.h_rx.ncols();
    if q.nrows() != n || q.ncols() != n || link.h_eve.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.nrows(),
        });
    }
    if !(link.noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be > 0".into()));
    }
    let scale = q.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    if (q - q.adjoint()).iter().any(|z| z.norm() > 1e-9 * scale) {
        return Err(Error::InvalidArgument("covariance is not Hermitian".into()));
    }
    let eig = hermitian(q).symmetric_eigen().eigenvalues;
    if eig.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::InvalidArgument("covariance is not positive semidefinite".into()));
    }
    let tr: f64 = eig.iter().sum();
    if tr > link.power_budget * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "covariance trace {tr} exceeds the power budget {}",
            link.power_budget
        )));
    }
    let s = Complex64::new(1.0 / link.noise_variance.sqrt(), 0.0);
    let a = &link.h_rx * s;
    let b = &link.h_eve * s;
    Ok((rate(&a, q) - rate(&b, q)).max(0.0))
}

/// Projects a Hermitian matrix onto `{Q >= 0, tr Q <= 1}`.
fn project(q: &CMat) -> CMat {
    let eig = hermitian(q).symmetric_eigen();
    let mut lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = lambda.iter().sum();
    if total > 1.0 {
        // Water level tau with sum(max(l - tau, 0)) = 1.
        let mut sorted = lambda.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        let mut tau = 0.0;
        for (k, l) in sorted.iter().enumerate() {
            acc += l;
            let t = (acc - 1.0) / (k + 1) as f64;
            if k + 1 == sorted.len() || sorted[k + 1] <= t {
                tau = t;
                break;
            }
        }
        for l in lambda.iter_mut() {
            *l = (*l - tau).max(0.0);
        }
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        lambda.len(),
        lambda.iter().map(|&l| Complex64::new(l, 0.0)),
    ));
    hermitian(&(u * d * u.adjoint()))
}

/// Unclamped secrecy objective on SNR-normalized channels, with `tr Q <= 1`.
fn objective(a: &CMat, b: &CMat, q: &CMat) -> f64 {
    rate(a, q) - rate(b, q)
}

fn gradient(a: &CMat, b: &CMat, q: &CMat) -> CMat {
    let part = |h: &CMat| -> CMat {
        let n = h.nrows();
        let m = h * q * h.adjoint() + CMat::identity(n, n);
        match Cholesky::new(m.clone()) {
            Some(c) => h.adjoint() * c.solve(h),
            None => h.adjoint() * m.try_inverse().expect("HPD matrix") * h,
        }
    };
    hermitian(&(part(a) - part(b))) * Complex64::new(1.0 / LN_2, 0.0)
}

/// Generalized eigenvectors of `(I + A^H A, I + B^H B)`, unit norm, by
/// decreasing eigenvalue. The leading one maximizes
/// `(1 + |A v|^2) / (1 + |B v|^2)`.
fn generalized_beams(a: &CMat, b: &CMat) -> Vec<DVector<Complex64>> {
    let n = a.ncols();
    let ra = a.adjoint() * a + CMat::identity(n, n);
    let rb = b.adjoint() * b + CMat::identity(n, n);
    let l = Cholesky::new(rb).expect("I + B^H B is positive definite").l();
    let linv = l.try_inverse().expect("triangular factor is invertible");
    let c = hermitian(&(&linv * ra * linv.adjoint()));
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order
        .into_iter()
        .map(|i| {
            let v = linv.adjoint() * eig.eigenvectors.column(i);
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        })
        .collect()
}

/// Equal-power covariances on the leading 1, 2, ... generalized beams.
fn beam_starts(a: &CMat, b: &CMat) -> Vec<CMat> {
    let beams = generalized_beams(a, b);
    let n = a.ncols();
    let mut acc = CMat::zeros(n, n);
    let mut out = Vec::with_capacity(beams.len());
    for (r, v) in beams.iter().enumerate() {
        acc += v * v.adjoint();
        out.push(project(&(&acc * Complex64::new(1.0 / (r + 1) as f64, 0.0))));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceResult {
    /// Normalized covariance, `tr Q <= 1`.
    pub q: CMat,
    pub value: f64,
    pub iterations: usize,
}

/// Projected gradient ascent over the trace ball with step halving.
/// `a` and `b` are the RX and Eve channels scaled by `sqrt(P / sigma^2)`.
pub fn optimize_covariance(a: &CMat, b: &CMat, start: CMat) -> CovarianceResult {
    let mut q = project(&start);
    let mut f = objective(a, b, &q);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < PGA_MAX_ITERATIONS {
        iterations += 1;
        let g = gradient(a, b, &q);
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let mut improved = None;
        for _ in 0..40 {
            let cand = project(&(&q + &g * Complex64::new(step / gn, 0.0)));
            let fc = objective(a, b, &cand);
            if fc > f {
                improved = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = improved else { break };
        let gain = fc - f;
        q = cand;
        f = fc;
        step = (step * 2.0).min(4.0);
        if gain <= PGA_TOLERANCE * f.abs().max(1.0) {
            break;
        }
    }
    CovarianceResult {
        q,
        value: f,
        iterations,
    }
}

/// Covariance optimization from the best of the isotropic input and
/// equal-power allocations over the leading generalized eigenvectors.
pub fn best_covariance(a: &CMat, b: &CMat) -> CovarianceResult {
    let n = a.ncols();
    let iso = CMat::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0);
    let mut best = (objective(a, b, &iso), iso);
    for q in beam_starts(a, b) {
        let f = objective(a, b, &q);
        if f > best.0 {
            best = (f, q);
        }
    }
    optimize_covariance(a, b, best.1)
}

/// SNR-normalized channel components at one RX position and fading draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyChannels {
    pub d_rx: CMat,
    /// RIS -> RX, `N_rx x M`.
    pub a_rx: CMat,
    pub d_eve: CMat,
    pub a_eve: CMat,
    /// BS -> RIS, `M x N_bs`, including the element efficiency.
    pub g: CMat,
    pub lookup: Vec<f64>,
}

impl SecrecyChannels {
    pub fn element_count(&self) -> usize {
        self.g.nrows()
    }

    fn with_phases(&self, d: &CMat, a: &CMat, phases: Option<&[f64]>) -> CMat {
        match phases {
            Some(p) if !p.is_empty() => {
                let theta = DMatrix::from_diagonal(&DVector::from_iterator(
                    p.len(),
                    p.iter().map(|&x| Complex64::from_polar(1.0, x)),
                ));
                d + a * theta * &self.g
            }
            _ => d.clone(),
        }
    }

    /// Effective RX channel; `None` removes the RIS path.
    pub fn h_rx(&self, phases: Option<&[f64]>) -> CMat {
        self.with_phases(&self.d_rx, &self.a_rx, phases)
    }

    pub fn h_eve(&self, phases: Option<&[f64]>) -> CMat {
        self.with_phases(&self.d_eve, &self.a_eve, phases)
    }
}

/// RIS-step objective with `Q = V V^H` fixed; element changes are rank-one
/// updates of `F = H V`.
struct RisStep<'a> {
    ch: &'a SecrecyChannels,
    v: CMat,
    /// Rows of `G V`.
    gv: CMat,
    phasors: Vec<Complex64>,
    f_rx: CMat,
    f_eve: CMat,
}

impl<'a> RisStep<'a> {
    fn new(ch: &'a SecrecyChannels, q: &CMat) -> Self {
        let eig = hermitian(q).symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let cols: Vec<DVector<Complex64>> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > 1e-12 * top && eig.eigenvalues[i] > 0.0)
            .map(|i| eig.eigenvectors.column(i) * Complex64::new(eig.eigenvalues[i].sqrt(), 0.0))
            .collect();
        let v = if cols.is_empty() {
            CMat::zeros(q.nrows(), 1)
        } else {
            CMat::from_columns(&cols)
        };
        RisStep {
            gv: &ch.g * &v,
            phasors: ch.lookup.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
            f_rx: CMat::zeros(0, 0),
            f_eve: CMat::zeros(0, 0),
            ch,
            v,
        }
    }

    fn updated(f: &CMat, a: &CMat, gv: &CMat, m: usize, delta: Complex64) -> CMat {
        f + a.column(m) * gv.row(m) * delta
    }
}

impl AscentObjective for RisStep<'_> {
    fn value(&mut self, config: &[usize]) -> f64 {
        let phases: Vec<f64> = config.iter().map(|&i| self.ch.lookup[i]).collect();
        self.f_rx = self.ch.h_rx(Some(&phases)) * &self.v;
        self.f_eve = self.ch.h_eve(Some(&phases)) * &self.v;
        rate_factor(&self.f_rx) - rate_factor(&self.f_eve)
    }

    fn trial(&mut self, config: &[usize], m: usize, candidate: usize) -> f64 {
        let delta = self.phasors[candidate] - self.phasors[config[m]];
        let fr = Self::updated(&self.f_rx, &self.ch.a_rx, &self.gv, m, delta);
        let fe = Self::updated(&self.f_eve, &self.ch.a_eve, &self.gv, m, delta);
        rate_factor(&fr) - rate_factor(&fe)
    }

    fn accept(&mut self, config: &[usize], m: usize, previous: usize) {
        let delta = self.phasors[config[m]] - self.phasors[previous];
        self.f_rx = Self::updated(&self.f_rx, &self.ch.a_rx, &self.gv, m, delta);
        self.f_eve = Self::updated(&self.f_eve, &self.ch.a_eve, &self.gv, m, delta);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseOutcome {
    pub sse_without: f64,
    /// Best of the alternating optimum and the RIS-free value.
    pub sse_with: f64,
    /// Normalized covariance achieving `sse_with`.
    pub q: CMat,
    /// `None` when the RIS path does not help.
    pub config: Option<RisConfig>,
    /// Unclamped objective after every Q-step and RIS-step.
    pub trace: Vec<f64>,
}

/// Alternating RIS-steps and Q-steps from `indices` and `q`; returns the
/// final objective, profile, covariance and the objective trace.
fn alternate(
    ch: &SecrecyChannels,
    mut indices: Vec<usize>,
    mut q: CMat,
    outer_rounds: usize,
) -> (f64, Vec<usize>, CMat, Vec<f64>) {
    let phases = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| ch.lookup[i]).collect() };
    let p = phases(&indices);
    let mut f = objective(&ch.h_rx(Some(&p)), &ch.h_eve(Some(&p)), &q);
    let mut trace = vec![f];
    for _ in 0..outer_rounds {
        let start = f;

        let mut step = RisStep::new(ch, &q);
        let res = coordinate_ascent(indices.clone(), ch.lookup.len(), &mut step, DEFAULT_MAX_ROUNDS);
        if res.value > f {
            indices = res.indices;
            f = res.value;
        }
        trace.push(f);

        let p = phases(&indices);
        let cov = optimize_covariance(&ch.h_rx(Some(&p)), &ch.h_eve(Some(&p)), q.clone());
        if cov.value > f {
            q = cov.q;
            f = cov.value;
        }
        trace.push(f);

        if f - start <= OUTER_TOLERANCE * f.abs().max(1e-12) {
            break;
        }
    }
    (f, indices, q, trace)
}

fn arg0(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Starting points for the alternation, each a profile and a covariance:
/// all index 0, the profile that co-phases every element with the direct RX
/// signal under the principal beam of `q`, and the one that opposes the
/// direct Eve signal, all with `q`. For small surfaces also every profile
/// scored with its own generalized-beam covariances, best first.
fn starts(ch: &SecrecyChannels, q: &CMat) -> Vec<(Vec<usize>, CMat)> {
    let m = ch.element_count();
    let l = ch.lookup.len();
    let mut profiles = vec![vec![0usize; m]];

    let eig = hermitian(q).symmetric_eigen();
    let top = (0..eig.eigenvalues.len())
        .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .expect("non-empty covariance");
    let v = eig.eigenvectors.column(top).into_owned();
    let gv = &ch.g * &v;
    let snap = |target: &DVector<Complex64>, a: &CMat, offset: f64| -> Vec<usize> {
        (0..m)
            .map(|e| {
                let c = a.column(e) * gv[e];
                let phi = offset - arg0(target.dotc(&c));
                nearest_index(phi, &ch.lookup)
            })
            .collect()
    };
    profiles.push(snap(&(&ch.d_rx * &v), &ch.a_rx, 0.0));
    profiles.push(snap(&(&ch.d_eve * &v), &ch.a_eve, std::f64::consts::PI));
    profiles.dedup();
    let mut out: Vec<(Vec<usize>, CMat)> = profiles.into_iter().map(|p| (p, q.clone())).collect();

    if (l as f64).powi(m as i32) <= EXHAUSTIVE_LIMIT as f64 {
        let mut idx = vec![0usize; m];
        let mut best: Option<(f64, Vec<usize>, CMat)> = None;
        for code in 0..l.pow(m as u32) {
            let mut c = code;
            for i in idx.iter_mut() {
                *i = c % l;
                c /= l;
            }
            let p: Vec<f64> = idx.iter().map(|&i| ch.lookup[i]).collect();
            let (a, b) = (ch.h_rx(Some(&p)), ch.h_eve(Some(&p)));
            for cand in beam_starts(&a, &b) {
                let f = objective(&a, &b, &cand);
                if best.as_ref().is_none_or(|(bf, _, _)| f > *bf) {
                    best = Some((f, idx.clone(), cand));
                }
            }
        }
        let (_, idx, cand) = best.expect("non-empty codebook");
        out.insert(0, (idx, cand));
    }
    out
}

/// Optimizes the covariance without the RIS, then alternates RIS-steps and
/// Q-steps for up to `outer_rounds` rounds from each starting profile and
/// keeps the best run.
pub fn optimize_sse(ch: &SecrecyChannels, outer_rounds: usize) -> SseOutcome {
    let without = best_covariance(&ch.d_rx, &ch.d_eve);
    let sse_without = without.value.max(0.0);
    let m = ch.element_count();
    if m == 0 || ch.lookup.is_empty() {
        return SseOutcome {
            sse_without,
            sse_with: sse_without,
            q: without.q,
            config: None,
            trace: vec![without.value],
        };
    }

    let (f, indices, q, trace) = starts(ch, &without.q)
        .into_iter()
        .map(|(init, q)| alternate(ch, init, q, outer_rounds))
        .reduce(|best, run| if run.0 > best.0 { run } else { best })
        .expect("at least one start");

    if f.max(0.0) > sse_without {
        SseOutcome {
            sse_without,
            sse_with: f.max(0.0),
            q,
            config: Some(RisConfig::from_indices(indices, &ch.lookup)),
            trace,
        }
    } else {
        SseOutcome {
            sse_without,
            sse_with: sse_without,
            q: without.q,
            config: None,
            trace,
        }
    }
}

fn fading(rng: &mut impl Rng, rows: usize, cols: usize, amp: impl Fn(usize, usize) -> f64) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill keeps the draw order fixed.
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(r, c)] = Complex64::new(re * s, im * s) * amp(r, c);
        }
    }
    m
}

fn friis(scene: &Scene, a: &Point, b: &Point) -> Result<f64> {
    Ok(propagation::hop(a, b, scene.carrier_hz, &scene.walls)?.complex_gain.norm())
}

/// Builds the channels for RX at `point`. Links not touching the RX come
/// from a per-draw stream shared by all grid cells.
pub fn channels(scene: &Scene, point: &Point, point_index: u64, draw: usize) -> Result<SecrecyChannels> {
    let eve = scene
        .eve
        .as_ref()
        .ok_or_else(|| Error::Incompatible("secrecy needs an eavesdropper (`eve`) in the scene".into()))?;
    let set = &scene.secrecy;
    let bs = scene.bs_list.get(set.bs_index).ok_or_else(|| {
        Error::InvalidArgument(format!("secrecy.bs_index {} out of range", set.bs_index))
    })?;
    let coincident = |what: &str| Error::Coincident(format!("point {point:?} coincides with {what}"));
    let noise_dbm = scene.noise_power_dbm(scene.bandwidth_hz());
    let snr = 10f64.powf((set.bs_tx_power_dbm - noise_dbm) / 20.0);
    let nbs = bs.antenna_count;
    let nrx = set.rx_antenna_count;
    let neve = eve.antenna_count;
    let elements = scene.ris.as_ref().map(|r| r.element_positions()).unwrap_or_default();
    let eff = scene.ris.as_ref().map_or(1.0, |r| r.element_efficiency);
    let m = elements.len();

    let d_bs_rx = friis(scene, &bs.position_m, point).map_err(|_| coincident("the BS"))?;
    let d_bs_eve = friis(scene, &bs.position_m, &eve.position_m)?;
    let bs_ris: Vec<f64> = elements
        .iter()
        .map(|e| friis(scene, &bs.position_m, e))
        .collect::<Result<_>>()?;
    let ris_eve: Vec<f64> = elements
        .iter()
        .map(|e| friis(scene, e, &eve.position_m))
        .collect::<Result<_>>()?;
    let ris_rx: Vec<f64> = elements
        .iter()
        .map(|e| friis(scene, e, point))
        .collect::<Result<_>>()
        .map_err(|_| coincident("an RIS element"))?;

    let draw = draw as u64;
    let mut fixed = seed::rng(scene.seed, seed::SECRECY_FIXED, draw);
    let d_eve = fading(&mut fixed, neve, nbs, |_, _| d_bs_eve * snr);
    let g = fading(&mut fixed, m, nbs, |r, _| bs_ris[r] * eff);
    let a_eve = fading(&mut fixed, neve, m, |_, c| ris_eve[c] * snr);

    let draws = set.fading_draws.max(1) as u64;
    let mut rx = seed::rng(scene.seed, seed::SECRECY_RX, point_index * draws + draw);
    let d_rx = fading(&mut rx, nrx, nbs, |_, _| d_bs_rx * snr);
    let a_rx = fading(&mut rx, nrx, m, |_, c| ris_rx[c] * snr);

    Ok(SecrecyChannels {
        d_rx,
        a_rx,
        d_eve,
        a_eve,
        g,
        lookup: scene.ris.as_ref().map(|r| r.phase_lookup.clone()).unwrap_or_default(),
    })
}

/// SSE without and with the RIS at one RX position, averaged over the
/// configured fading draws.
pub fn sse_pair(scene: &Scene, point: &Point, point_index: u64) -> Result<(f64, f64)> {
    let draws = scene.secrecy.fading_draws.max(1);
    let mut acc = (0.0, 0.0);
    for d in 0..draws {
        let ch = channels(scene, point, point_index, d)?;
        let out = optimize_sse(&ch, scene.secrecy.outer_rounds);
        acc.0 += out.sse_without;
        acc.1 += out.sse_with;
    }
    Ok((acc.0 / draws as f64, acc.1 / draws as f64))
}
