use risplan_core::coexist::{self, CoexistConfig};
use risplan_core::scene::{parse_scene, Point, Scene};

fn scene(with_ris: bool) -> Scene {
    let ris = if with_ris {
        r#", "ris": {"position_m": [0, 40, 3], "element_count": 16}"#
    } else {
        ""
    };
    parse_scene(&format!(
        r#"{{"spec_version": 1, "carrier_hz": 3.5e9, "subcarrier_count": 4,
            "subcarrier_spacing_hz": 30e3,
            "bs_list": [{{"position_m": [0, 0, 10], "antenna_count": 4}}],
            "walls": [{{"p1_m": [-60, 30], "p2_m": [-1, 30], "penetration_loss_db": 40}}],
            "ue_grid": {{"x_min": -40, "x_max": 10, "y_min": 20, "y_max": 45,
                         "resolution_m": 1, "fixed_height_m": 1.5}},
            "codebook": {{"beams": 8}},
            "seed": 7{ris}}}"#
    ))
    .unwrap()
}

#[test]
fn same_seed_same_trace() {
    let s = scene(true);
    let p = Point::new(-4.0, 38.0, 1.5);
    let cfg = CoexistConfig::for_scene(&s, 3000, 0.5).unwrap();
    let a = coexist::simulate(&s, &p, &cfg).unwrap();
    let b = coexist::simulate(&s, &p, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace_csv(), b.trace_csv());
    assert!(a.bler > 0.0);

    let other = coexist::simulate(&s.clone().with_seed(8), &p, &CoexistConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(other.error_slots, a.error_slots);
}

#[test]
fn no_switching_no_errors() {
    let s = scene(true);
    for x in [-30.0, -10.0, -2.0, 5.0] {
        let p = Point::new(x, 38.0, 1.5);
        let cfg = CoexistConfig::for_scene(&s, 2000, 0.0).unwrap();
        let r = coexist::simulate(&s, &p, &cfg).unwrap();
        assert_eq!(r.bler, 0.0, "x = {x}");
        assert_eq!(r.records.len(), 2000 - cfg.csi_delay_slots);
    }
}

#[test]
fn no_ris_no_errors() {
    let s = scene(false);
    let p = Point::new(-2.0, 38.0, 1.5);
    let cfg = CoexistConfig::for_scene(&s, 2000, 1.0).unwrap();
    assert!(cfg.codebook.is_empty());
    let r = coexist::simulate(&s, &p, &cfg).unwrap();
    assert_eq!(r.bler, 0.0);
    assert_eq!(coexist::ris_to_direct_db(&s, &p, &cfg.codebook).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn invalid_configs_are_rejected() {
    let s = scene(true);
    let p = Point::new(-2.0, 38.0, 1.5);
    let base = CoexistConfig::for_scene(&s, 100, 0.5).unwrap();
    for cfg in [
        CoexistConfig { slots: 0, ..base.clone() },
        CoexistConfig { switch_probability: 1.5, ..base.clone() },
        CoexistConfig { csi_delay_slots: 0, ..base.clone() },
        CoexistConfig { mcs_gap_db: -1.0, ..base.clone() },
        CoexistConfig { codebook: Vec::new(), ..base.clone() },
    ] {
        assert!(coexist::simulate(&s, &p, &cfg).is_err());
    }
}

#[test]
fn rank_correlation_reference() {
    assert_eq!(coexist::spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]), 1.0);
    assert_eq!(coexist::spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    // Ties take mid ranks.
    let r = coexist::spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
    assert!((r - 0.9486832980505138).abs() < 1e-12, "{r}");
}
