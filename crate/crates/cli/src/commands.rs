use std::path::{Path, PathBuf};

use risplan_core::coexist::{self, CoexistConfig};
use risplan_core::{export, propagation};
use risplan_core::influence::{self, Label, MetricId};
use risplan_core::Error;
use risplan_core::scene::{parse_scene, Point, Scene};
use risplan_core::unitcell::manifest::BoiManifest;
use risplan_core::unitcell::{
    extract_boi, max_contrast, max_contrast_effective, normalized_boi, normalized_csv,
    BandOfInfluence, ContrastKind,
};
use serde_json::json;

use crate::output::{read_input, CliError, CliResult, Outputs};

/// Keeps scene and cell names usable as file-name prefixes.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn kind_name(kind: ContrastKind) -> &'static str {
    match kind {
        ContrastKind::Reflection => "reflection",
        ContrastKind::Transmission => "transmission",
    }
}

fn load_scene(path: &Path, seed: Option<u64>) -> CliResult<Scene> {
    let text = read_input(path)?;
    let scene = parse_scene(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(match seed {
        Some(s) => scene.with_seed(s),
        None => scene,
    })
}

fn scene_echo(scene: &Scene) -> serde_json::Value {
    serde_json::from_str(&scene.canonical_dump()).expect("canonical dump is JSON")
}

pub fn boi(
    manifest_path: &Path,
    c_min: f64,
    default_kind: ContrastKind,
    out: &Path,
    force: bool,
) -> CliResult<()> {
    if !(c_min > 0.0 && c_min <= 2.0) {
        return Err(CliError::input(format!("--cmin {c_min}: must be in (0, 2]")));
    }
    let text = read_input(manifest_path)?;
    let manifest = BoiManifest::parse(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut names: Vec<String> = manifest
        .cells
        .iter()
        .map(|c| format!("{}_contrast.csv", file_stem(&c.name)))
        .collect();
    names.push("boi_summary.csv".into());
    if manifest.cells.len() > 1 {
        names.push("normalized.csv".into());
    }
    Outputs::check_clobber(out, &names, force)?;

    let mut outputs = Outputs::new(out);
    let mut summary = String::from(BandOfInfluence::SUMMARY_HEADER);
    let mut for_normalizing = Vec::new();
    let mut cells_echo = Vec::new();
    for cell in &manifest.cells {
        let table = cell.load(base).map_err(|e| match e {
            Error::Io { .. } => CliError::input(e.to_string()),
            e => e.into(),
        })?;
        let kind = cell.kind_or(default_kind);
        let curve = if cell.effective {
            max_contrast_effective(&table, kind)?
        } else {
            max_contrast(&table, kind)?
        };
        let boi = extract_boi(&curve, c_min)?;
        if boi.intervals.is_empty() {
            log::warn!("{}: contrast never reaches {c_min}", cell.name);
        }
        outputs.add(format!("{}_contrast.csv", file_stem(&cell.name)), curve.to_csv());
        summary.push_str(&boi.summary_row(&cell.name));
        cells_echo.push(json!({
            "name": cell.name,
            "kind": kind_name(kind),
            "effective": cell.effective,
            "states": cell.states.iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
        }));
        match cell.f0_hz.or(boi.f0_hz) {
            Some(f0) => for_normalizing.push((cell.name.clone(), curve, f0)),
            None if manifest.cells.len() > 1 => {
                return Err(CliError::runtime(format!(
                    "{}: no BoI and no f0_hz, cannot normalize",
                    cell.name
                )))
            }
            None => {}
        }
    }
    outputs.add("boi_summary.csv", summary);
    if manifest.cells.len() > 1 {
        outputs.add("normalized.csv", normalized_csv(&normalized_boi(&for_normalizing)?));
    }
    let config = json!({ "c_min": c_min, "default_kind": kind_name(default_kind), "cells": cells_echo });
    outputs.finish("boi", manifest_path, config, None)
}

pub fn aoi(
    scene_path: &Path,
    metric: MetricId,
    out_dir: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    dump_channels: Option<(f64, f64)>,
    force: bool,
) -> CliResult<()> {
    let scene = load_scene(scene_path, seed)?;
    influence::check_compatible(&scene, metric)?;
    if jobs == Some(0) {
        return Err(CliError::input("--jobs: must be >= 1"));
    }
    let prefix = format!("{}_{}", file_stem(&scene.name), metric.name());
    let mut names: Vec<String> = ["without", "with", "delta", "labels"]
        .iter()
        .flat_map(|part| ["csv", "ppm"].map(|ext| format!("{prefix}_{part}.{ext}")))
        .collect();
    let dump = match dump_channels {
        Some((x, y)) => {
            let p = Point::new(x, y, scene.ue_grid.fixed_height_m);
            let csv = propagation::ris_channel_csv(&scene, scene.link.serving_bs, &p)?;
            names.push(format!("{}_channels.csv", file_stem(&scene.name)));
            Some(csv)
        }
        None => None,
    };
    Outputs::check_clobber(out_dir, &names, force)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    let (without, with) = pool.install(|| influence::sweep(&scene, metric))?;
    let map = influence::classify(&without, &with, &scene)?;
    for label in Label::ALL {
        log::info!("{}: {} cells", label.name(), map.count(label));
    }

    let grid = &scene.ue_grid;
    let mut outputs = Outputs::new(out_dir);
    outputs.add(format!("{prefix}_without.csv"), export::field_csv(&without)?);
    outputs.add(format!("{prefix}_without.ppm"), export::ppm(grid, &without.values)?);
    outputs.add(format!("{prefix}_with.csv"), export::field_csv(&with)?);
    outputs.add(format!("{prefix}_with.ppm"), export::ppm(grid, &with.values)?);
    outputs.add(format!("{prefix}_delta.csv"), export::csv(grid, &map.delta)?);
    outputs.add(format!("{prefix}_delta.ppm"), export::ppm(grid, &map.delta)?);
    outputs.add(format!("{prefix}_labels.csv"), export::labels_csv(&map)?);
    outputs.add(format!("{prefix}_labels.ppm"), export::labels_ppm(&map)?);
    if let Some(csv) = dump {
        outputs.add(names.last().expect("dump name"), csv);
    }
    debug_assert_eq!(outputs.names(), names);

    let config = json!({
        "metric": metric.name(),
        "dump_channels_m": dump_channels.map(|(x, y)| [x, y]),
        "scene": scene_echo(&scene),
    });
    outputs.finish("aoi", scene_path, config, Some(scene.seed))
}

pub struct CoexistArgs {
    pub scene: PathBuf,
    pub switch_prob: f64,
    pub slots: usize,
    pub ue: (f64, f64),
    pub csi_delay: usize,
    pub gap_db: f64,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub force: bool,
}

pub fn coexist(args: &CoexistArgs) -> CliResult<()> {
    let scene = load_scene(&args.scene, args.seed)?;
    let mut config = CoexistConfig::for_scene(&scene, args.slots, args.switch_prob)?;
    config.csi_delay_slots = args.csi_delay;
    config.mcs_gap_db = args.gap_db;
    config.validate(&scene)?;

    let prefix = format!("{}_coexist", file_stem(&scene.name));
    let names = vec![format!("{prefix}_trace.csv"), format!("{prefix}_summary.json")];
    Outputs::check_clobber(&args.out, &names, args.force)?;

    let point = Point::new(args.ue.0, args.ue.1, scene.ue_grid.fixed_height_m);
    let result = coexist::simulate(&scene, &point, &config)?;
    let ratio_db = coexist::ris_to_direct_db(&scene, &point, &config.codebook)?;
    log::info!("bler {} over {} slots", result.bler, config.slots);

    let summary = json!({
        "bler": result.bler,
        "errors": result.error_slots.len(),
        "transmitting_slots": result.records.len(),
        "ris_to_direct_db": if ratio_db.is_finite() { json!(ratio_db) } else { json!(null) },
    });
    let mut summary_text = serde_json::to_string_pretty(&summary).expect("serializable");
    summary_text.push('\n');

    let mut outputs = Outputs::new(&args.out);
    outputs.add(&names[0], result.trace_csv());
    outputs.add(&names[1], summary_text);
    let echo = json!({
        "switch_probability": config.switch_probability,
        "slots": config.slots,
        "ue_m": [point.x, point.y, point.z],
        "csi_delay_slots": config.csi_delay_slots,
        "mcs_gap_db": config.mcs_gap_db,
        "codebook_size": config.codebook.len(),
        "scene": scene_echo(&scene),
    });
    outputs.finish("coexist", &args.scene, echo, Some(scene.seed))
}
