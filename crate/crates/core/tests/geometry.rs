use num_complex::Complex64;
use proptest::prelude::*;
use risplan_core::beamforming::optimal_phases_continuous;
use risplan_core::propagation::{self, hop, wall_attenuation};
use risplan_core::scene::{parse_scene, Grid, Point, Scene, Wall};

fn coord() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn wall() -> impl Strategy<Value = Wall> {
    (coord(), coord(), coord(), coord(), 0.0..40.0f64).prop_map(|(a, b, c, d, db)| Wall {
        p1_m: [a, b],
        p2_m: [c, d],
        penetration_loss_db: db,
    })
}

/// Scene text with a random subset of the optional sections.
fn scene_text() -> impl Strategy<Value = String> {
    (
        (1.0..40.0f64, 1..64usize, 1e3..1e6f64),
        prop::collection::vec((coord(), coord(), 0.0..20.0f64, 1..5usize), 1..4),
        prop::option::of((coord(), coord(), 1..32usize, 0.0..3.0f64)),
        prop::option::of((coord(), coord(), 1..5usize)),
        prop::collection::vec(wall(), 0..4),
        (0.1..5.0f64, 0.0..2.0f64, any::<u64>()),
    )
        .prop_map(|((fc, n, df), bs, ris, eve, walls, (res, h, seed))| {
            let bs: Vec<String> = bs
                .iter()
                .map(|(x, y, z, k)| format!(r#"{{"position_m": [{x}, {y}, {z}], "antenna_count": {k}}}"#))
                .collect();
            let mut extra = String::new();
            if let Some((x, y, m, o)) = ris {
                extra += &format!(
                    r#", "ris": {{"position_m": [{x}, {y}], "element_count": {m}, "orientation_rad": {o}}}"#
                );
            }
            if let Some((x, y, k)) = eve {
                extra += &format!(r#", "eve": {{"position_m": [{x}, {y}, 1.5], "antenna_count": {k}}}"#);
            }
            if !walls.is_empty() {
                let w: Vec<String> = walls
                    .iter()
                    .map(|w| {
                        format!(
                            r#"{{"p1_m": [{}, {}], "p2_m": [{}, {}], "penetration_loss_db": {}}}"#,
                            w.p1_m[0], w.p1_m[1], w.p2_m[0], w.p2_m[1], w.penetration_loss_db
                        )
                    })
                    .collect();
                extra += &format!(r#", "walls": [{}]"#, w.join(","));
            }
            format!(
                r#"{{"spec_version": 1, "carrier_hz": {}, "subcarrier_count": {n},
                    "subcarrier_spacing_hz": {df}, "bs_list": [{}],
                    "ue_grid": {{"x_min": -10, "x_max": 10, "y_min": -5, "y_max": 5,
                                 "resolution_m": {res}, "fixed_height_m": {h}}},
                    "seed": {seed}{extra}}}"#,
                fc * 1e9,
                bs.join(",")
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dump_round_trips(text in scene_text()) {
        let s = parse_scene(&text).unwrap();
        let again = parse_scene(&s.canonical_dump()).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(again.canonical_dump(), s.canonical_dump());
    }

    #[test]
    fn grid_enumeration_is_bijective(
        x0 in -20.0..20.0f64, w in 0.0..30.0f64,
        y0 in -20.0..20.0f64, h in 0.0..30.0f64,
        res in 0.25..4.0f64,
    ) {
        let g = Grid::new(x0, x0 + w, y0, y0 + h, res, 0.0).unwrap();
        let mut seen = vec![false; g.cell_count()];
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let i = g.index(ix, iy);
                prop_assert!(!seen[i]);
                seen[i] = true;
                prop_assert_eq!(g.coords(i), (ix, iy));
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert!(g.x(g.nx() - 1) <= x0 + w + 1e-9 && g.y(g.ny() - 1) <= y0 + h + 1e-9);
    }

    #[test]
    fn hops_are_reciprocal(
        a in (coord(), coord(), 0.0..10.0f64),
        b in (coord(), coord(), 0.0..10.0f64),
        walls in prop::collection::vec(wall(), 0..6),
        fc in 1e9..60e9f64,
    ) {
        let (a, b) = (Point::new(a.0, a.1, a.2), Point::new(b.0, b.1, b.2));
        prop_assume!((a - b).norm() > 1e-3);
        let ab = hop(&a, &b, fc, &walls).unwrap();
        let ba = hop(&b, &a, fc, &walls).unwrap();
        prop_assert_eq!(ab.complex_gain.norm(), ba.complex_gain.norm());
        prop_assert_eq!(ab.delay_s, ba.delay_s);
        prop_assert_eq!(wall_attenuation(&a, &b, &walls), wall_attenuation(&b, &a, &walls));
    }

    #[test]
    fn cascade_obeys_triangle_bound(
        text in scene_text(),
        p in (coord(), coord()),
        phases in prop::collection::vec(-3.2..3.2f64, 32),
    ) {
        let s = parse_scene(&text).unwrap();
        prop_assume!(s.ris.is_some());
        let p = Point::new(p.0, p.1, s.ue_grid.fixed_height_m);
        let (Ok(direct), Ok(ris)) =
            (propagation::direct_channel(&s, 0, &p), propagation::ris_channel(&s, 0, &p))
        else {
            return Ok(());
        };
        let m = ris.element_count();
        let d = direct[0].complex_gain;
        let products: Vec<Complex64> = ris.products().iter().map(|v| v[0]).collect();
        let bound = d.norm() + products.iter().map(|z| z.norm()).sum::<f64>();

        let any = ris.cascade(&phases[..m]).unwrap()[0];
        prop_assert!((d + any).norm() <= bound * (1.0 + 1e-12));

        let aligned = optimal_phases_continuous(&products, d);
        let best = ris.cascade(&aligned.phases).unwrap()[0];
        prop_assert!(((d + best).norm() - bound).abs() <= 1e-9 * bound);
    }
}

#[test]
fn parallel_walls_stack() {
    let walls = [
        Wall { p1_m: [1.0, -5.0], p2_m: [1.0, 5.0], penetration_loss_db: 10.0 },
        Wall { p1_m: [2.0, -5.0], p2_m: [2.0, 5.0], penetration_loss_db: 10.0 },
        Wall { p1_m: [5.0, -5.0], p2_m: [5.0, 5.0], penetration_loss_db: 10.0 },
    ];
    let a = Point::new(0.0, 0.0, 0.0);
    let b = Point::new(3.0, 1.0, 0.0);
    assert!((wall_attenuation(&a, &b, &walls) - 0.1).abs() < 1e-15);
}

#[test]
fn subcarrier_phase_slope_matches_delay() {
    let s: Scene = parse_scene(
        r#"{"spec_version": 1, "carrier_hz": 28e9, "subcarrier_count": 64,
            "subcarrier_spacing_hz": 240e3, "bs_list": [{"position_m": [0, 0]}],
            "ue_grid": {"x_min": 0, "x_max": 1, "y_min": 0, "y_max": 1, "resolution_m": 1}}"#,
    )
    .unwrap();
    let p = Point::new(37.0, -12.0, 1.5);
    let path = propagation::direct_channel(&s, 0, &p).unwrap()[0];
    let df = s.subcarrier_spacing_hz;
    // Least-squares slope of the unwrapped phase over the subcarrier index.
    let mut prev = path.per_subcarrier(0, df).arg();
    let mut unwrapped = vec![prev];
    for n in 1..s.subcarrier_count {
        let mut a = path.per_subcarrier(n, df).arg();
        while a - prev > std::f64::consts::PI {
            a -= 2.0 * std::f64::consts::PI;
        }
        while a - prev < -std::f64::consts::PI {
            a += 2.0 * std::f64::consts::PI;
        }
        unwrapped.push(a);
        prev = a;
    }
    let n = unwrapped.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = unwrapped.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in unwrapped.iter().enumerate() {
        sxy += (i as f64 - mx) * (y - my);
        sxx += (i as f64 - mx).powi(2);
    }
    let slope = sxy / sxx;
    let expected = -2.0 * std::f64::consts::PI * df * path.delay_s;
    assert!((slope - expected).abs() < 1e-9, "{slope} vs {expected}");
}
