//! Position error bound from multicarrier pilots, with and without a
//! near-field RIS path.
//!
//! Every BS sends `K` pilots on `N` subcarriers over orthogonal resources.
//! Each BS contributes one observed stream through its direct path,
//! `alpha_b * exp(-j 2 pi n df tau_b(p))`; BSs are treated as single-antenna
//! (the reference antenna of an array). When the RIS is enabled, the BS
//! closest to it (or the one named in the scene) additionally contributes an
//! RIS stream
//!
//! ```text
//! beta * sum_m A_m(p) z_{m,k} exp(-j 2 pi (fc + n df) tau_m(p))
//! ```
//!
//! with exact per-element Friis amplitudes `A_m` and delays `tau_m`, and a
//! random lookup profile `z_k` per pilot. Every stream has its own unknown
//! complex gain, so the equivalent position FIM is a sum of per-stream Schur
//! complements.
//!
//! Pilot `k` uses RIS profile `k mod ris_config_count`. Profiles are drawn
//! from the scene seed and the grid cell index, so evaluation order never
//! matters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::influence::{classify_cell, Label, Sense};
use crate::propagation::{fspl_amplitude, wall_attenuation, MIN_DISTANCE_M, SPEED_OF_LIGHT};
use crate::scene::{ClassRule, Point, Scene};
use crate::seed;

/// Condition number above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// One independently observed signal `gain * u(p)` with an unknown complex
/// gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    /// True value of the nuisance gain.
    pub gain: Complex64,
    /// Noise-free unit-gain samples, `[subcarrier, column]`.
    pub u: DMatrix<Complex64>,
    pub du_dx: DMatrix<Complex64>,
    pub du_dy: DMatrix<Complex64>,
    /// Number of pilots that observe each column.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fim {
    /// Full FIM over `[p_x, p_y, Re g_1, Im g_1, ...]`.
    pub matrix: DMatrix<f64>,
    /// Equivalent FIM of the position after removing the gains.
    pub position: Matrix2<f64>,
    pub nuisance_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PebResult {
    /// Position error bound in meters, `+inf` when unidentifiable.
    pub peb_m: f64,
    pub fim_condition: f64,
}

/// Noise variance per subcarrier sample, mW.
pub fn noise_variance(scene: &Scene) -> f64 {
    10f64.powf(scene.noise_power_dbm(scene.subcarrier_spacing_hz) / 10.0)
}

fn subcarrier_power_mw(scene: &Scene) -> f64 {
    10f64.powf(scene.localization.bs_tx_power_dbm / 10.0) / scene.subcarrier_count as f64
}

/// The `ris_config_count` random lookup profiles used at grid cell
/// `point_index`, in pilot order.
pub fn ris_profiles(scene: &Scene, point_index: u64) -> Vec<Vec<f64>> {
    let Some(ris) = scene.ris.as_ref() else {
        return Vec::new();
    };
    let mut rng = seed::rng(scene.seed, seed::LOCALIZATION_PROFILES, point_index);
    let l = ris.phase_lookup.len();
    (0..scene.localization.ris_config_count)
        .map(|_| {
            (0..ris.element_count)
                .map(|_| ris.phase_lookup[rng.random_range(0..l)])
                .collect()
        })
        .collect()
}

/// Pilots per profile when `pilots` cycle through `profiles` profiles.
pub fn pilot_weights(pilots: usize, profiles: usize) -> Vec<f64> {
    (0..profiles)
        .map(|c| (pilots / profiles + usize::from(c < pilots % profiles)) as f64)
        .collect()
}

fn planar_gradient(p: &Point, from: &Point, d: f64) -> (f64, f64) {
    ((p.x - from.x) / d, (p.y - from.y) / d)
}

/// Direct stream of BS `b` at `p`.
pub fn direct_stream(scene: &Scene, b: usize, p: &Point) -> Result<Stream> {
    let q = scene.bs_list[b].position_m;
    let d = (p - q).norm();
    if d <= MIN_DISTANCE_M {
        return Err(Error::Coincident(format!("point {p:?} is at BS {b}")));
    }
    let (gx, gy) = planar_gradient(p, &q, d);
    let amp = fspl_amplitude(d, scene.carrier_hz)? * wall_attenuation(&q, p, &scene.walls);
    let tau = d / SPEED_OF_LIGHT;
    let n = scene.subcarrier_count;
    let df = scene.subcarrier_spacing_hz;
    let u = DMatrix::from_fn(n, 1, |k, _| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * df * tau));
    let slope = |k: usize| Complex64::new(0.0, -2.0 * PI * k as f64 * df / SPEED_OF_LIGHT);
    let du_dx = DMatrix::from_fn(n, 1, |k, _| u[k] * slope(k) * gx);
    let du_dy = DMatrix::from_fn(n, 1, |k, _| u[k] * slope(k) * gy);
    Ok(Stream {
        gain: Complex64::from_polar(
            subcarrier_power_mw(scene).sqrt() * amp,
            -2.0 * PI * scene.carrier_hz * tau,
        ),
        u,
        du_dx,
        du_dy,
        weights: vec![scene.localization.pilot_count as f64],
    })
}

/// RIS stream of BS `b` at `p` under the given per-column profiles.
pub fn ris_stream(scene: &Scene, b: usize, p: &Point, profiles: &[Vec<f64>]) -> Result<Stream> {
    let ris = scene
        .ris
        .as_ref()
        .ok_or_else(|| Error::Incompatible("scene has no RIS".into()))?;
    let q = scene.bs_list[b].position_m;
    let elements = ris.element_positions();
    let m_count = elements.len();
    let n = scene.subcarrier_count;
    let df = scene.subcarrier_spacing_hz;
    let fc = scene.carrier_hz;
    let c_count = profiles.len();

    let mut tau = Vec::with_capacity(m_count);
    let mut amp = Vec::with_capacity(m_count);
    let mut grad = Vec::with_capacity(m_count);
    for (m, r) in elements.iter().enumerate() {
        let d1 = (r - q).norm();
        let d2 = (p - r).norm();
        if d2 <= MIN_DISTANCE_M {
            return Err(Error::Coincident(format!("point {p:?} is at RIS element {m}")));
        }
        let a = fspl_amplitude(d1, fc)?
            * fspl_amplitude(d2, fc)?
            * wall_attenuation(&q, r, &scene.walls)
            * wall_attenuation(r, p, &scene.walls);
        amp.push(a);
        tau.push((d1 + d2) / SPEED_OF_LIGHT);
        let (gx, gy) = planar_gradient(p, r, d2);
        grad.push((gx, gy, d2));
    }

    // Stack the element weights for u, the amplitude derivative and the
    // delay derivative side by side so one product gives all five blocks.
    let z = |m: usize, c: usize| Complex64::from_polar(1.0, profiles[c][m]);
    let mut w = DMatrix::<Complex64>::zeros(m_count, 5 * c_count);
    for m in 0..m_count {
        let (gx, gy, d2) = grad[m];
        let a = amp[m];
        for c in 0..c_count {
            let zc = z(m, c);
            w[(m, c)] = zc * a;
            w[(m, c_count + c)] = zc * (-a * gx / d2);
            w[(m, 2 * c_count + c)] = zc * (-a * gy / d2);
            w[(m, 3 * c_count + c)] = zc * (a * gx);
            w[(m, 4 * c_count + c)] = zc * (a * gy);
        }
    }
    let e = DMatrix::from_fn(n, m_count, |k, m| {
        Complex64::from_polar(1.0, -2.0 * PI * (fc + k as f64 * df) * tau[m])
    });
    let prod = e * w;
    let mut u = DMatrix::zeros(n, c_count);
    let mut du_dx = DMatrix::zeros(n, c_count);
    let mut du_dy = DMatrix::zeros(n, c_count);
    for k in 0..n {
        let slope = Complex64::new(0.0, -2.0 * PI * (fc + k as f64 * df) / SPEED_OF_LIGHT);
        for c in 0..c_count {
            u[(k, c)] = prod[(k, c)];
            du_dx[(k, c)] = prod[(k, c_count + c)] + slope * prod[(k, 3 * c_count + c)];
            du_dy[(k, c)] = prod[(k, 2 * c_count + c)] + slope * prod[(k, 4 * c_count + c)];
        }
    }
    Ok(Stream {
        gain: Complex64::new(subcarrier_power_mw(scene).sqrt() * ris.element_efficiency, 0.0),
        u,
        du_dx,
        du_dy,
        weights: pilot_weights(scene.localization.pilot_count, c_count),
    })
}

/// All streams observed at `p`.
pub fn streams(scene: &Scene, p: &Point, point_index: u64, with_ris: bool) -> Result<Vec<Stream>> {
    let mut out = Vec::with_capacity(scene.bs_list.len() + 1);
    for b in 0..scene.bs_list.len() {
        out.push(direct_stream(scene, b, p)?);
    }
    if with_ris && scene.ris.is_some() {
        let profiles = ris_profiles(scene, point_index);
        out.push(ris_stream(scene, scene.localization.ris_bs, p, &profiles)?);
    }
    Ok(out)
}

/// Weighted inner products `sum w conj(a) b` of all derivative pairs.
struct Moments {
    xx: f64,
    yy: f64,
    xy: Complex64,
    xu: Complex64,
    yu: Complex64,
    uu: f64,
}

fn moments(s: &Stream) -> Moments {
    let mut m = Moments {
        xx: 0.0,
        yy: 0.0,
        xy: Complex64::new(0.0, 0.0),
        xu: Complex64::new(0.0, 0.0),
        yu: Complex64::new(0.0, 0.0),
        uu: 0.0,
    };
    for (c, &w) in s.weights.iter().enumerate() {
        let (mut xx, mut yy, mut uu) = (0.0, 0.0, 0.0);
        let (mut xy, mut xu, mut yu) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for k in 0..s.u.nrows() {
            let (u, ux, uy) = (s.u[(k, c)], s.du_dx[(k, c)], s.du_dy[(k, c)]);
            xx += ux.norm_sqr();
            yy += uy.norm_sqr();
            uu += u.norm_sqr();
            xy += ux.conj() * uy;
            xu += ux.conj() * u;
            yu += uy.conj() * u;
        }
        m.xx += w * xx;
        m.yy += w * yy;
        m.uu += w * uu;
        m.xy += xy * w;
        m.xu += xu * w;
        m.yu += yu * w;
    }
    m
}

/// `(2 / sigma^2) Re{J^H J}` over `[x, y, Re g_s, Im g_s]` for all streams.
pub fn fim_from_streams(streams: &[Stream], noise_var: f64) -> Fim {
    let dim = 2 + 2 * streams.len();
    let mut f = DMatrix::<f64>::zeros(dim, dim);
    let j = Complex64::new(0.0, 1.0);
    for (s_idx, s) in streams.iter().enumerate() {
        let m = moments(s);
        let g = s.gain;
        let g2 = g.norm_sqr();
        f[(0, 0)] += g2 * m.xx;
        f[(1, 1)] += g2 * m.yy;
        f[(0, 1)] += g2 * m.xy.re;
        let r = 2 + 2 * s_idx;
        // d mu / d Re g = u, d mu / d Im g = j u.
        f[(0, r)] = (g.conj() * m.xu).re;
        f[(0, r + 1)] = (g.conj() * j * m.xu).re;
        f[(1, r)] = (g.conj() * m.yu).re;
        f[(1, r + 1)] = (g.conj() * j * m.yu).re;
        f[(r, r)] = m.uu;
        f[(r + 1, r + 1)] = m.uu;
    }
    f[(1, 0)] = f[(0, 1)];
    for c in 2..dim {
        f[(c, 0)] = f[(0, c)];
        f[(c, 1)] = f[(1, c)];
    }
    f *= 2.0 / noise_var;

    // The nuisance block is diagonal (one gain per stream), so the Schur
    // complement is a sum of per-parameter rank-one corrections.
    let mut schur = f.fixed_view::<2, 2>(0, 0).into_owned();
    let mut nuisance_singular = false;
    for c in 2..dim {
        let d = f[(c, c)];
        if !(d > 0.0) || !d.is_finite() {
            nuisance_singular = true;
            continue;
        }
        let v = nalgebra::Vector2::new(f[(0, c)], f[(1, c)]);
        schur -= v * v.transpose() / d;
    }
    let position = if nuisance_singular {
        Matrix2::zeros()
    } else {
        (schur + schur.transpose()) * 0.5
    };
    Fim {
        matrix: f,
        position,
        nuisance_singular,
    }
}

pub fn build_fim(scene: &Scene, p: &Point, point_index: u64, with_ris: bool) -> Result<Fim> {
    let s = streams(scene, p, point_index, with_ris)?;
    Ok(fim_from_streams(&s, noise_variance(scene)))
}

/// `sqrt(trace(F^-1))` of a symmetric 2x2 position FIM.
pub fn peb(fim: &Matrix2<f64>) -> Result<PebResult> {
    let (a, b, c, d) = (fim[(0, 0)], fim[(0, 1)], fim[(1, 0)], fim[(1, 1)]);
    let scale = a.abs().max(d.abs()).max(b.abs()).max(c.abs());
    if (b - c).abs() > 1e-9 * scale {
        return Err(Error::InvalidArgument("FIM is not symmetric".into()));
    }
    let mean = (a + d) / 2.0;
    let radius = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    let (lmax, lmin) = (mean + radius, mean - radius);
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(cond <= SINGULAR_CONDITION) {
        return Ok(PebResult {
            peb_m: f64::INFINITY,
            fim_condition: cond,
        });
    }
    let det = a * d - b * c;
    Ok(PebResult {
        peb_m: ((a + d) / det).sqrt(),
        fim_condition: cond,
    })
}

/// PEB at `p`, `+inf` when unidentifiable; errors on coincident points.
pub fn peb_at(scene: &Scene, p: &Point, point_index: u64, with_ris: bool) -> Result<f64> {
    let fim = build_fim(scene, p, point_index, with_ris)?;
    if fim.nuisance_singular {
        return Ok(f64::INFINITY);
    }
    Ok(peb(&fim.position)?.peb_m)
}

/// Labels one cell from its PEB without and with the RIS. PEB above
/// `feasible_m` counts as no localization service; improvements are in dB of
/// meters.
pub fn classify_peb(without: f64, with: f64, rule: ClassRule, feasible_m: f64) -> Label {
    let db = |v: f64| {
        if v.is_finite() && v <= feasible_m {
            20.0 * v.log10()
        } else {
            f64::NAN
        }
    };
    classify_cell(db(without), db(with), rule, Sense::LowerBetter)
}

/// Maximum-likelihood position estimate from noisy observations of
/// `streams`, by Gauss-Newton on position and gains started at `p0`.
pub struct MlProblem<'a> {
    pub scene: &'a Scene,
    pub point_index: u64,
    pub with_ris: bool,
}

impl MlProblem<'_> {
    fn streams_at(&self, p: &Point) -> Result<Vec<Stream>> {
        streams(self.scene, p, self.point_index, self.with_ris)
    }

    /// Noisy pilot-averaged observations at the true point `p`.
    pub fn observe(&self, p: &Point, rng: &mut impl Rng) -> Result<Vec<DMatrix<Complex64>>> {
        let sigma2 = noise_variance(self.scene);
        let streams = self.streams_at(p)?;
        Ok(streams
            .iter()
            .map(|s| {
                let mut y = &s.u * s.gain;
                for c in 0..y.ncols() {
                    let sd = (sigma2 / s.weights[c] / 2.0).sqrt();
                    for k in 0..y.nrows() {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        y[(k, c)] += Complex64::new(re * sd, im * sd);
                    }
                }
                y
            })
            .collect())
    }

    /// Gauss-Newton from `p0` with gains initialized by least squares.
    pub fn estimate(&self, y: &[DMatrix<Complex64>], p0: &Point, iterations: usize) -> Result<Point> {
        let mut p = *p0;
        let j = Complex64::new(0.0, 1.0);
        for _ in 0..iterations {
            let streams = self.streams_at(&p)?;
            // Gains concentrated out at the current position.
            let gains: Vec<Complex64> = streams
                .iter()
                .zip(y)
                .map(|(s, y)| {
                    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
                    for c in 0..y.ncols() {
                        for k in 0..y.nrows() {
                            num += s.u[(k, c)].conj() * y[(k, c)] * s.weights[c];
                            den += s.u[(k, c)].norm_sqr() * s.weights[c];
                        }
                    }
                    num / den
                })
                .collect();
            let with_gains: Vec<Stream> = streams
                .into_iter()
                .zip(&gains)
                .map(|(mut s, g)| {
                    s.gain = *g;
                    s
                })
                .collect();
            let info = fim_from_streams(&with_gains, 2.0).matrix;
            let dim = info.nrows();
            let mut grad = nalgebra::DVector::<f64>::zeros(dim);
            for (s_idx, (s, y)) in with_gains.iter().zip(y).enumerate() {
                let r0 = 2 + 2 * s_idx;
                for c in 0..y.ncols() {
                    for k in 0..y.nrows() {
                        let res = (y[(k, c)] - s.gain * s.u[(k, c)]) * s.weights[c];
                        grad[0] += ((s.gain * s.du_dx[(k, c)]).conj() * res).re;
                        grad[1] += ((s.gain * s.du_dy[(k, c)]).conj() * res).re;
                        grad[r0] += (s.u[(k, c)].conj() * res).re;
                        grad[r0 + 1] += ((j * s.u[(k, c)]).conj() * res).re;
                    }
                }
            }
            let step = info
                .lu()
                .solve(&grad)
                .ok_or_else(|| Error::InvalidArgument("singular Gauss-Newton system".into()))?;
            p.x += step[0];
            p.y += step[1];
            if step[0].hypot(step[1]) < 1e-12 {
                break;
            }
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scene;

    #[test]
    fn peb_closed_forms() {
        let r = peb(&Matrix2::identity()).unwrap();
        assert!((r.peb_m - 2f64.sqrt()).abs() < 1e-15);
        let r = peb(&Matrix2::new(4.0, 0.0, 0.0, 4.0)).unwrap();
        assert!((r.peb_m - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(peb(&Matrix2::new(1.0, 0.5, 0.4, 1.0)).is_err());
        assert_eq!(peb(&Matrix2::new(1.0, 1.0, 1.0, 1.0)).unwrap().peb_m, f64::INFINITY);
    }

    #[test]
    fn classification_examples() {
        let rule = ClassRule { boost: 3.0, unchanged: 2.0 };
        assert_eq!(classify_peb(0.5, 0.05, rule, 0.1), Label::Enabled);
        assert_eq!(classify_peb(0.05, 0.05, rule, 0.1), Label::Unchanged);
        assert_eq!(classify_peb(0.08, 0.04, rule, 0.1), Label::Boosted);
        assert_eq!(classify_peb(0.05, 0.038, rule, 0.1), Label::Marginal);
        assert_eq!(classify_peb(0.5, 0.4, rule, 0.1), Label::InfeasibleBoth);
    }

    #[test]
    fn pilot_weights_cycle() {
        assert_eq!(pilot_weights(40, 40), vec![1.0; 40]);
        assert_eq!(pilot_weights(160, 40), vec![4.0; 40]);
        assert_eq!(pilot_weights(5, 3), vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn single_bs_range_only_is_unidentifiable() {
        let s = parse_scene(
            r#"{"spec_version": 1, "carrier_hz": 28e9, "subcarrier_count": 16,
                "bs_list": [{"position_m": [0, 0]}],
                "ue_grid": {"x_min": 0, "x_max": 5, "y_min": 0, "y_max": 5, "resolution_m": 1}}"#,
        )
        .unwrap();
        let fim = build_fim(&s, &Point::new(2.0, 1.0, 0.0), 0, false).unwrap();
        let eig = fim.position.symmetric_eigen();
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        assert!(lo.abs() <= 1e-9 * hi, "{lo} {hi}");
        assert_eq!(peb(&fim.position).unwrap().peb_m, f64::INFINITY);
    }
}
