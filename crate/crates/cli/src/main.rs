//! `risplan`: BoI extraction, AoI heatmaps and coexistence runs.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 runtime error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use risplan_core::influence::MetricId;
use risplan_core::unitcell::ContrastKind;

#[derive(Debug, Parser)]
#[command(name = "risplan", version, about = "RIS deployment planning")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Contrast curves and bandwidth of influence for unit-cell designs.
    Boi {
        /// Cell manifest (JSON) listing Touchstone state files.
        manifest: PathBuf,
        /// Contrast threshold, in (0, 2].
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        cmin: f64,
        /// Contrast kind for cells whose manifest entry has none.
        #[arg(long, default_value = "reflection", value_parser = parse_kind)]
        kind: ContrastKind,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// With/without-RIS fields and the area-of-influence labels for one metric.
    Aoi {
        scene: PathBuf,
        #[arg(long, value_parser = parse_metric)]
        metric: MetricId,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the scene seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write the per-element RIS channels at UE position `x,y`.
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        dump_channels: Option<(f64, f64)>,
        #[arg(long)]
        force: bool,
    },
    /// Link adaptation on outdated CSI next to a switching foreign RIS.
    Coexist {
        scene: PathBuf,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        switch_prob: f64,
        #[arg(long, default_value_t = 10_000)]
        slots: usize,
        /// UE position `x,y` in meters; height comes from the scene grid.
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        ue: (f64, f64),
        #[arg(long, default_value_t = 1)]
        csi_delay: usize,
        #[arg(long, default_value_t = 3.0)]
        gap_db: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
}

fn parse_metric(s: &str) -> Result<MetricId, String> {
    s.parse().map_err(|e: risplan_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<ContrastKind, String> {
    s.parse().map_err(|e: risplan_core::Error| e.to_string())
}

fn parse_xy(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a finite number: {v:?}"))
    };
    Ok((num(x)?, num(y)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // Built without reading the environment so runs depend on flags only.
    env_logger::Builder::new().filter_level(level).init();

    let result = match cli.command {
        Command::Boi { manifest, cmin, kind, out, force } => {
            commands::boi(&manifest, cmin, kind, &out, force)
        }
        Command::Aoi { scene, metric, out_dir, seed, jobs, dump_channels, force } => {
            commands::aoi(&scene, metric, &out_dir, seed, jobs, dump_channels, force)
        }
        Command::Coexist {
            scene,
            switch_prob,
            slots,
            ue,
            csi_delay,
            gap_db,
            out,
            seed,
            force,
        } => commands::coexist(&commands::CoexistArgs {
            scene,
            switch_prob,
            slots,
            ue,
            csi_delay,
            gap_db,
            out,
            seed,
            force,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
