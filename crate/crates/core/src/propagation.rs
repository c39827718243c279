//! Deterministic channel synthesis: free-space loss, wall penetration,
//! uniform-linear-array steering and the near-field RIS cascade.
//!
//! Baseband conventions: a path of length `d` has complex gain
//! `fspl(d) * walls * exp(-j 2 pi d / lambda)` at the carrier, and subcarrier
//! `n` (offset `n * spacing` from the carrier) adds `exp(-j 2 pi n spacing tau)`.

use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::{Point, Scene, Ula, Wall};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are treated as coincident points.
pub const MIN_DISTANCE_M: f64 = 1e-9;

/// Friis amplitude gain `lambda / (4 pi d)`.
pub fn fspl_amplitude(distance_m: f64, f_hz: f64) -> Result<f64> {
    if !(distance_m > MIN_DISTANCE_M) {
        return Err(Error::Coincident(format!("path length {distance_m} m")));
    }
    Ok(SPEED_OF_LIGHT / f_hz / (4.0 * PI * distance_m))
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn within_box(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test in the plane, touching and collinear
/// overlap included.
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && within_box(q1, q2, p1))
        || (d2 == 0.0 && within_box(q1, q2, p2))
        || (d3 == 0.0 && within_box(p1, p2, q1))
        || (d4 == 0.0 && within_box(p1, p2, q2))
}

/// Amplitude factor of all walls crossed by the straight path `a -> b`.
/// Each wall counts at most once.
pub fn wall_attenuation(a: &Point, b: &Point, walls: &[Wall]) -> f64 {
    let (pa, pb) = ([a.x, a.y], [b.x, b.y]);
    walls
        .iter()
        .filter(|w| segments_intersect(pa, pb, w.p1_m, w.p2_m))
        .map(|w| 10f64.powf(-w.penetration_loss_db / 20.0))
        .product()
}

/// Far-field ULA response towards unit direction `u`: element `m` gets
/// `exp(-j 2 pi m d sin(theta) / lambda)`, with `sin(theta) = u . axis`.
pub fn ula_steering(array: &Ula, antenna_count: usize, u: &Point, lambda: f64) -> Vec<Complex64> {
    let s = u.dot(&array.axis());
    (0..antenna_count)
        .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 * array.spacing_m * s / lambda))
        .collect()
}

/// One propagation path: complex carrier gain and group delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathChannel {
    pub complex_gain: Complex64,
    pub delay_s: f64,
}

impl PathChannel {
    pub fn per_subcarrier(&self, n: usize, spacing_hz: f64) -> Complex64 {
        self.complex_gain * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * spacing_hz * self.delay_s)
    }
}

/// Single-hop line-of-sight channel between two points at `f_hz`.
pub fn hop(a: &Point, b: &Point, f_hz: f64, walls: &[Wall]) -> Result<PathChannel> {
    let d = (b - a).norm();
    let amp = fspl_amplitude(d, f_hz)? * wall_attenuation(a, b, walls);
    let lambda = SPEED_OF_LIGHT / f_hz;
    Ok(PathChannel {
        complex_gain: Complex64::from_polar(amp, -2.0 * PI * d / lambda),
        delay_s: d / SPEED_OF_LIGHT,
    })
}

/// Direct channel from every antenna of BS `bs` to `point`.
pub fn direct_channel(scene: &Scene, bs: usize, point: &Point) -> Result<Vec<PathChannel>> {
    let station = &scene.bs_list[bs];
    let base = hop(&station.position_m, point, scene.carrier_hz, &scene.walls)
        .map_err(|_| Error::Coincident(format!("point {point:?} is at BS {bs}")))?;
    let u = (point - station.position_m).normalize();
    let steer = ula_steering(&station.array, station.antenna_count, &u, scene.wavelength_m());
    Ok(steer
        .into_iter()
        .map(|s| PathChannel {
            complex_gain: base.complex_gain * s,
            delay_s: base.delay_s,
        })
        .collect())
}

/// Per-element hops of the BS -> RIS -> point path.
#[derive(Debug, Clone, PartialEq)]
pub struct RisChannel {
    /// `[element][bs antenna]`: BS array to element hop.
    pub bs_to_elements: Vec<Vec<Complex64>>,
    pub elements_to_point: Vec<Complex64>,
    /// `(|q_b - r_m| + |r_m - p|) / c`.
    pub element_delays_s: Vec<f64>,
    pub efficiency: f64,
}

impl RisChannel {
    pub fn element_count(&self) -> usize {
        self.elements_to_point.len()
    }

    pub fn antenna_count(&self) -> usize {
        self.bs_to_elements.first().map_or(0, |v| v.len())
    }

    /// Per-element two-hop products `[element][antenna]`, efficiency included.
    pub fn products(&self) -> Vec<Vec<Complex64>> {
        self.bs_to_elements
            .iter()
            .zip(&self.elements_to_point)
            .map(|(g, a)| g.iter().map(|g| g * a * self.efficiency).collect())
            .collect()
    }

    /// Carrier-frequency cascade `sum_m a_m exp(j phi_m) g_m`, per BS antenna.
    pub fn cascade(&self, phases: &[f64]) -> Result<Vec<Complex64>> {
        if phases.len() != self.element_count() {
            return Err(Error::DimensionMismatch {
                expected: self.element_count(),
                actual: phases.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.antenna_count()];
        for ((g, a), phi) in self.bs_to_elements.iter().zip(&self.elements_to_point).zip(phases) {
            let w = a * Complex64::from_polar(self.efficiency, *phi);
            for (o, g) in out.iter_mut().zip(g) {
                *o += w * g;
            }
        }
        Ok(out)
    }
}

/// Near-field RIS channel: exact distances to every element on both hops.
pub fn ris_channel(scene: &Scene, bs: usize, point: &Point) -> Result<RisChannel> {
    let ris = scene
        .ris
        .as_ref()
        .ok_or_else(|| Error::Incompatible("scene has no RIS".into()))?;
    let station = &scene.bs_list[bs];
    let lambda = scene.wavelength_m();
    let f = scene.carrier_hz;
    let elements = ris.element_positions();
    let mut bs_to_elements = Vec::with_capacity(elements.len());
    let mut elements_to_point = Vec::with_capacity(elements.len());
    let mut element_delays_s = Vec::with_capacity(elements.len());
    for (m, r) in elements.iter().enumerate() {
        let first = hop(&station.position_m, r, f, &scene.walls)
            .map_err(|_| Error::Coincident(format!("BS {bs} is at RIS element {m}")))?;
        let second = hop(r, point, f, &scene.walls)
            .map_err(|_| Error::Coincident(format!("point {point:?} is at RIS element {m}")))?;
        let u = (r - station.position_m).normalize();
        let steer = ula_steering(&station.array, station.antenna_count, &u, lambda);
        bs_to_elements.push(steer.iter().map(|s| first.complex_gain * s).collect());
        elements_to_point.push(second.complex_gain);
        element_delays_s.push(first.delay_s + second.delay_s);
    }
    Ok(RisChannel {
        bs_to_elements,
        elements_to_point,
        element_delays_s,
        efficiency: ris.element_efficiency,
    })
}

/// Total channel per BS antenna on subcarrier `n`: direct paths plus the
/// RIS cascade under `phases` (when given).
pub fn frequency_response(
    direct: &[PathChannel],
    ris: Option<(&RisChannel, &[f64])>,
    n: usize,
    spacing_hz: f64,
) -> Vec<Complex64> {
    let mut h: Vec<Complex64> = direct.iter().map(|p| p.per_subcarrier(n, spacing_hz)).collect();
    if let Some((ch, phases)) = ris {
        for (m, phi) in phases.iter().enumerate() {
            let rot = Complex64::from_polar(
                ch.efficiency,
                phi - 2.0 * PI * n as f64 * spacing_hz * ch.element_delays_s[m],
            ) * ch.elements_to_point[m];
            for (h, g) in h.iter_mut().zip(&ch.bs_to_elements[m]) {
                *h += rot * g;
            }
        }
    }
    h
}

/// Debug dump of the RIS channel at `point`, one row per element and BS
/// antenna.
pub fn ris_channel_csv(scene: &Scene, bs: usize, point: &Point) -> Result<String> {
    let ch = ris_channel(scene, bs, point)?;
    let mut s = String::from(
        "element,antenna,bs_to_element_re,bs_to_element_im,element_to_point_re,element_to_point_im,delay_s\n",
    );
    for (m, (g, a)) in ch.bs_to_elements.iter().zip(&ch.elements_to_point).enumerate() {
        for (k, g) in g.iter().enumerate() {
            writeln!(s, "{m},{k},{},{},{},{},{}", g.re, g.im, a.re, a.im, ch.element_delays_s[m]).unwrap();
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scene;

    fn wall(p1: [f64; 2], p2: [f64; 2], db: f64) -> Wall {
        Wall {
            p1_m: p1,
            p2_m: p2,
            penetration_loss_db: db,
        }
    }

    #[test]
    fn friis_reference_values() {
        let a1 = fspl_amplitude(1.0, 28e9).unwrap();
        let oracle = 299_792_458.0 / 28e9 / (4.0 * std::f64::consts::PI);
        assert!((a1 - oracle).abs() < 1e-18);
        assert!((20.0 * a1.log10() + 61.3909).abs() < 1e-4);
        assert!((fspl_amplitude(2.0, 28e9).unwrap() * 2.0 - a1).abs() < 1e-18);
        assert!(fspl_amplitude(0.0, 28e9).is_err());
    }

    #[test]
    fn walls_counted_once_each() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(10.0, 0.0, 0.0);
        assert_eq!(wall_attenuation(&a, &b, &[]), 1.0);
        let one = [wall([5.0, -1.0], [5.0, 1.0], 20.0)];
        assert!((wall_attenuation(&a, &b, &one) - 0.1).abs() < 1e-15);
        let two = [wall([3.0, -1.0], [3.0, 1.0], 10.0), wall([6.0, -1.0], [6.0, 1.0], 10.0)];
        assert!((wall_attenuation(&a, &b, &two) - 0.1).abs() < 1e-15);
        // Touching an endpoint and running along a wall each count once.
        let touch = [wall([5.0, 0.0], [5.0, 3.0], 20.0)];
        assert!((wall_attenuation(&a, &b, &touch) - 0.1).abs() < 1e-15);
        let along = [wall([2.0, 0.0], [8.0, 0.0], 20.0)];
        assert!((wall_attenuation(&a, &b, &along) - 0.1).abs() < 1e-15);
        let miss = [wall([5.0, 1.0], [5.0, 3.0], 20.0)];
        assert_eq!(wall_attenuation(&a, &b, &miss), 1.0);
    }

    const SCENE: &str = r#"{
        "spec_version": 1,
        "carrier_hz": 28e9,
        "subcarrier_count": 8,
        "subcarrier_spacing_hz": 240e3,
        "bs_list": [{"position_m": [0, 0], "antenna_count": 4, "array": {"orientation_rad": 1.5707963267948966}}],
        "ris": {"position_m": [4, 0], "element_count": 2},
        "ue_grid": {"x_min": 0, "x_max": 5, "y_min": 0, "y_max": 5, "resolution_m": 1}
    }"#;

    #[test]
    fn broadside_and_thirty_degree_steering() {
        let s = parse_scene(SCENE).unwrap();
        // Array axis is +y, so +x is broadside.
        let h = direct_channel(&s, 0, &Point::new(3.0, 0.0, 0.0)).unwrap();
        for p in &h[1..] {
            assert!((p.complex_gain - h[0].complex_gain).norm() < 1e-18);
        }
        let th = 30f64.to_radians();
        let h = direct_channel(&s, 0, &Point::new(3.0 * th.cos(), 3.0 * th.sin(), 0.0)).unwrap();
        for w in h.windows(2) {
            let step = (w[1].complex_gain / w[0].complex_gain).arg();
            assert!((step + PI / 2.0).abs() < 1e-9, "{step}");
        }
        assert!(direct_channel(&s, 0, &Point::zeros()).is_err());
    }

    #[test]
    fn ris_symmetric_point_and_cascade_cancellation() {
        let s = parse_scene(SCENE).unwrap();
        let ch = ris_channel(&s, 0, &Point::new(4.0, 2.0, 0.0)).unwrap();
        let (a, b) = (ch.elements_to_point[0], ch.elements_to_point[1]);
        assert!((a - b).norm() < 1e-15 * a.norm().max(1.0));

        let unit = RisChannel {
            bs_to_elements: vec![vec![Complex64::new(1.0, 0.0)]; 2],
            elements_to_point: vec![Complex64::new(1.0, 0.0); 2],
            element_delays_s: vec![0.0; 2],
            efficiency: 1.0,
        };
        assert!(unit.cascade(&[0.0, PI]).unwrap()[0].norm() < 1e-15);
        assert!(unit.cascade(&[0.0]).is_err());
    }

    #[test]
    fn far_point_matches_plane_wave() {
        // The residual curvature phase at a fixed multiple of the aperture
        // grows with M; three half-wavelength elements stay below 1e-3 rad.
        let text = SCENE.replace("\"element_count\": 2", "\"element_count\": 3");
        let s = parse_scene(&text).unwrap();
        let ris = s.ris.as_ref().unwrap();
        let dist = 1000.0 * ris.aperture_m();
        let psi = 0.4f64;
        let u = Point::new(psi.sin(), psi.cos(), 0.0);
        let p = ris.position_m + u * dist;
        let ch = ris_channel(&s, 0, &p).unwrap();
        let k = 2.0 * PI / s.wavelength_m();
        let els = ris.element_positions();
        let ref_phase = ch.elements_to_point[1].arg();
        for (m, a) in ch.elements_to_point.iter().enumerate() {
            let expected = ref_phase + k * (els[m] - ris.position_m).dot(&u);
            let err = (a.arg() - expected + PI).rem_euclid(2.0 * PI) - PI;
            assert!(err.abs() < 1e-3, "element {m}: {err}");
        }
    }

    #[test]
    fn subcarrier_phase_slope_matches_delay() {
        let p = PathChannel {
            complex_gain: Complex64::new(0.3, -0.2),
            delay_s: 37e-9,
        };
        let spacing = 240e3;
        let mut prev = p.per_subcarrier(0, spacing).arg();
        let mut unwrapped = vec![prev];
        for n in 1..64 {
            let a = p.per_subcarrier(n, spacing).arg();
            let mut d = a - prev;
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            unwrapped.push(unwrapped[n - 1] + d);
            prev = a;
        }
        let nbar = 31.5;
        let ybar = unwrapped.iter().sum::<f64>() / 64.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (n, y) in unwrapped.iter().enumerate() {
            sxy += (n as f64 - nbar) * (y - ybar);
            sxx += (n as f64 - nbar).powi(2);
        }
        let slope = sxy / sxx;
        assert!((slope + 2.0 * PI * spacing * p.delay_s).abs() < 1e-9);
    }
}
