use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risplan_core::link::{required_tx_power, spectral_efficiency, LinkBudget};
use risplan_core::localization::peb_at;
use risplan_core::scene::{parse_scene, Point, Scene};
use risplan_core::secrecy::{self, best_covariance, secrecy_rate, MimoLink, SecrecyChannels};

type CMat = DMatrix<Complex64>;

fn budget() -> LinkBudget {
    LinkBudget {
        target_snr_db: 5.0,
        max_tx_power_dbm: 23.0,
        min_tx_power_dbm: -40.0,
        noise_power_dbm: -100.0,
        se_max_bps_hz: 7.4,
    }
}

fn cn(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale
    })
}

fn unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    cn(rng, n, n, 1.0).qr().q()
}

fn rate(h: &CMat, q: &CMat) -> f64 {
    let n = h.nrows();
    let m = h * q * h.adjoint() + CMat::identity(n, n);
    m.determinant().re.log2()
}

/// Localization scene with three BSs and an RIS, rotated about the origin.
fn localization_scene(psi: f64, bs: &[(f64, f64)], ris: (f64, f64, f64)) -> Scene {
    let rot = |(x, y): (f64, f64)| (x * psi.cos() - y * psi.sin(), x * psi.sin() + y * psi.cos());
    let bs: Vec<String> = bs
        .iter()
        .map(|&p| {
            let (x, y) = rot(p);
            format!(r#"{{"position_m": [{x}, {y}]}}"#)
        })
        .collect();
    let (rx, ry) = rot((ris.0, ris.1));
    parse_scene(&format!(
        r#"{{"spec_version": 1, "carrier_hz": 28e9, "subcarrier_count": 32,
            "subcarrier_spacing_hz": 240e3, "bs_list": [{}],
            "ris": {{"position_m": [{rx}, {ry}], "element_count": 16, "orientation_rad": {}}},
            "ue_grid": {{"x_min": 0, "x_max": 1, "y_min": 0, "y_max": 1, "resolution_m": 1}},
            "localization": {{"pilot_count": 8, "ris_config_count": 8, "bs_tx_power_dbm": 0}},
            "seed": 3}}"#,
        bs.join(","),
        ris.2 + psi
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_shift_moves_required_power(g in -140.0..-60.0f64, k in -20.0..20.0f64) {
        let b = budget();
        if let (Some(p0), Some(p1)) = (required_tx_power(g, &b), required_tx_power(g + k, &b)) {
            let clamped = |p: f64| p <= b.min_tx_power_dbm;
            if !clamped(p0) && !clamped(p1) {
                prop_assert!((p1 - (p0 - k)).abs() < 1e-9);
            }
        }
        let se0 = spectral_efficiency(g, &b);
        let se1 = spectral_efficiency(g + k.abs(), &b);
        if let Some(s0) = se0 {
            prop_assert!(se1.unwrap() >= s0);
        }
    }

    #[test]
    fn ris_never_raises_peb(
        ux in 0.5..4.5f64, uy in 0.5..4.5f64, idx in 0u64..1000,
    ) {
        let s = localization_scene(0.0, &[(0.5, 1.0), (4.8, 4.8), (1.0, 4.8)], (4.0, 0.0, 0.0));
        let p = Point::new(ux, uy, 0.0);
        let (Ok(without), Ok(with)) = (peb_at(&s, &p, idx, false), peb_at(&s, &p, idx, true)) else {
            return Ok(());
        };
        prop_assert!(with <= without * (1.0 + 1e-9), "{} > {}", with, without);
    }

    #[test]
    fn peb_is_rotation_invariant(
        psi in -3.1..3.1f64,
        bs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..4),
        ris in (-10.0..10.0f64, -10.0..10.0f64, 0.0..3.1f64),
        p in (-10.0..10.0f64, -10.0..10.0f64),
        with_ris in any::<bool>(),
    ) {
        let base = localization_scene(0.0, &bs, ris);
        let turned = localization_scene(psi, &bs, ris);
        let (c, s) = (psi.cos(), psi.sin());
        let a = peb_at(&base, &Point::new(p.0, p.1, 0.0), 5, with_ris);
        let b = peb_at(&turned, &Point::new(p.0 * c - p.1 * s, p.0 * s + p.1 * c, 0.0), 5, with_ris);
        match (a, b) {
            (Ok(a), Ok(b)) if a.is_finite() => prop_assert!((a - b).abs() <= 1e-9 * a, "{} vs {}", a, b),
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn sse_is_between_zero_and_rx_rate(seed in any::<u64>(), nt in 1usize..5, nr in 1usize..4, ne in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let link = MimoLink {
            h_rx: cn(&mut rng, nr, nt, 2.0),
            h_eve: cn(&mut rng, ne, nt, 2.0),
            noise_variance: 0.5,
            power_budget: 3.0,
        };
        let a = &link.h_rx * Complex64::new((link.power_budget / link.noise_variance).sqrt(), 0.0);
        let b = &link.h_eve * Complex64::new((link.power_budget / link.noise_variance).sqrt(), 0.0);
        let q = best_covariance(&a, &b).q * Complex64::new(link.power_budget, 0.0);
        let sse = secrecy_rate(&link, &q).unwrap();
        let rx = rate(&(&link.h_rx * Complex64::new(1.0 / link.noise_variance.sqrt(), 0.0)), &q);
        prop_assert!(sse >= 0.0 && sse <= rx + 1e-9);
    }

    #[test]
    fn alternation_trace_never_drops(seed in any::<u64>(), m in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = SecrecyChannels {
            d_rx: cn(&mut rng, 2, 3, 1.0),
            a_rx: cn(&mut rng, 2, m, 1.0),
            d_eve: cn(&mut rng, 2, 3, 1.0),
            a_eve: cn(&mut rng, 2, m, 1.0),
            g: cn(&mut rng, m, 3, 1.0),
            lookup: vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::FRAC_PI_2],
        };
        let out = secrecy::optimize_sse(&ch, 5);
        for w in out.trace.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(out.sse_with >= out.sse_without);
        let phases = out.config.as_ref().map(|c| c.phases.clone());
        let (hr, he) = (ch.h_rx(phases.as_deref()), ch.h_eve(phases.as_deref()));
        let achieved = (rate(&hr, &out.q) - rate(&he, &out.q)).max(0.0);
        prop_assert!((achieved - out.sse_with).abs() < 1e-9);
    }
}

#[test]
fn left_unitaries_leave_sse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let ch = SecrecyChannels {
            d_rx: cn(&mut rng, 3, 4, 1.0),
            a_rx: cn(&mut rng, 3, 6, 1.0),
            d_eve: cn(&mut rng, 2, 4, 1.0),
            a_eve: cn(&mut rng, 2, 6, 1.0),
            g: cn(&mut rng, 6, 4, 1.0),
            lookup: vec![0.0, std::f64::consts::PI],
        };
        let (ur, ue) = (unitary(&mut rng, 3), unitary(&mut rng, 2));
        let turned = SecrecyChannels {
            d_rx: &ur * &ch.d_rx,
            a_rx: &ur * &ch.a_rx,
            d_eve: &ue * &ch.d_eve,
            a_eve: &ue * &ch.a_eve,
            ..ch.clone()
        };
        let a = secrecy::optimize_sse(&ch, 5);
        let b = secrecy::optimize_sse(&turned, 5);
        assert!((a.sse_without - b.sse_without).abs() < 1e-6, "{} vs {}", a.sse_without, b.sse_without);
        assert!((a.sse_with - b.sse_with).abs() < 1e-6, "{} vs {}", a.sse_with, b.sse_with);
    }
}

#[test]
fn silent_eve_leaves_rx_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = cn(&mut rng, 2, 3, 1.0);
    let link = MimoLink { h_rx: h.clone(), h_eve: CMat::zeros(2, 3), noise_variance: 1.0, power_budget: 1.0 };
    let q = CMat::identity(3, 3) * Complex64::new(1.0 / 3.0, 0.0);
    assert!((secrecy_rate(&link, &q).unwrap() - rate(&h, &q)).abs() < 1e-12);
}

#[test]
fn vanishing_cascade_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ch = SecrecyChannels {
        d_rx: cn(&mut rng, 2, 4, 1.0),
        a_rx: cn(&mut rng, 2, 8, 1e-9),
        d_eve: cn(&mut rng, 2, 4, 1.0),
        a_eve: cn(&mut rng, 2, 8, 1e-9),
        g: cn(&mut rng, 8, 4, 1e-9),
        lookup: vec![0.0, std::f64::consts::PI],
    };
    let out = secrecy::optimize_sse(&ch, 5);
    assert!((out.sse_with - out.sse_without).abs() < 1e-6);
}
