//! Deployment scenario: geometry, radio parameters and thresholds.
//!
//! Scenes are read from JSON. Unknown keys are rejected, every optional key
//! has a documented default, and [`Scene::canonical_dump`] writes the fully
//! resolved scene back out so a run can be reproduced from its echo.
//!
//! Positions may be given as `[x, y]` or `[x, y, z]`; a missing height is 0.
//! Distances are always taken in 3D, which reduces to the planar distance
//! when every height is 0.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::SPEED_OF_LIGHT;

pub type Point = Vector3<f64>;

pub const SCHEMA_VERSION: u32 = 1;

/// Uniform linear array with isotropic elements in the horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Ula {
    pub spacing_m: f64,
    /// Angle of the array axis from the +x axis, radians.
    pub orientation_rad: f64,
}

impl Ula {
    pub fn axis(&self) -> Point {
        Point::new(self.orientation_rad.cos(), self.orientation_rad.sin(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub position_m: Point,
    pub antenna_count: usize,
    pub array: Ula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ris {
    /// Center of the array.
    pub position_m: Point,
    pub element_count: usize,
    pub element_spacing_m: f64,
    pub orientation_rad: f64,
    /// Realizable element phases, radians.
    pub phase_lookup: Vec<f64>,
    /// Amplitude reflection efficiency of every element, in (0, 1].
    pub element_efficiency: f64,
}

impl Ris {
    /// Element positions along the array axis, centered on `position_m`.
    pub fn element_positions(&self) -> Vec<Point> {
        let axis = Point::new(self.orientation_rad.cos(), self.orientation_rad.sin(), 0.0);
        let mid = (self.element_count as f64 - 1.0) / 2.0;
        (0..self.element_count)
            .map(|m| self.position_m + axis * ((m as f64 - mid) * self.element_spacing_m))
            .collect()
    }

    pub fn aperture_m(&self) -> f64 {
        (self.element_count as f64 - 1.0) * self.element_spacing_m
    }
}

/// Vertical wall, infinitely tall, between two planar points.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub p1_m: [f64; 2],
    pub p2_m: [f64; 2],
    pub penetration_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eve {
    pub position_m: Point,
    pub antenna_count: usize,
}

/// Rectangular evaluation grid. Cells are enumerated row-major, y outer and
/// x inner, starting at `(x_min, y_min)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution_m: f64,
    pub fixed_height_m: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        resolution_m: f64,
        fixed_height_m: f64,
    ) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max, resolution_m, fixed_height_m];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::scene("ue_grid", "values must be finite"));
        }
        if !(resolution_m > 0.0) {
            return Err(Error::scene("ue_grid.resolution_m", "must be > 0"));
        }
        if x_max < x_min {
            return Err(Error::scene("ue_grid.x_max", "must be >= x_min"));
        }
        if y_max < y_min {
            return Err(Error::scene("ue_grid.y_max", "must be >= y_min"));
        }
        let count = |extent: f64| (extent / resolution_m + 1e-9).floor() as usize + 1;
        Ok(Grid {
            x_min,
            x_max,
            y_min,
            y_max,
            resolution_m,
            fixed_height_m,
            nx: count(x_max - x_min),
            ny: count(y_max - y_min),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.resolution_m
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.resolution_m
    }

    pub fn point(&self, index: usize) -> Point {
        let (ix, iy) = self.coords(index);
        Point::new(self.x(ix), self.y(iy), self.fixed_height_m)
    }

    /// All cell centers in index order.
    pub fn points(&self) -> Vec<Point> {
        (0..self.cell_count()).map(|i| self.point(i)).collect()
    }
}

/// Improvement thresholds for one metric, in the metric's comparison unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRule {
    /// Improvement at or above which a cell counts as boosted.
    pub boost: f64,
    /// Changes strictly smaller than this (in magnitude) count as unchanged.
    pub unchanged: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub gain_db: ClassRule,
    pub tx_power_dbm: ClassRule,
    pub se_bps_hz: ClassRule,
    pub peb_m: ClassRule,
    pub sse_bps_hz: ClassRule,
    /// PEB at or below which localization is feasible.
    pub peb_feasible_m: f64,
    /// Minimum secrecy spectral efficiency for coverage.
    pub sse_q_th_bps_hz: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            gain_db: ClassRule { boost: 3.0, unchanged: 2.0 },
            tx_power_dbm: ClassRule { boost: 0.1, unchanged: 0.1 },
            se_bps_hz: ClassRule { boost: 0.1, unchanged: 0.1 },
            peb_m: ClassRule { boost: 3.0, unchanged: 2.0 },
            sse_bps_hz: ClassRule { boost: 0.1, unchanged: 0.1 },
            peb_feasible_m: 0.1,
            sse_q_th_bps_hz: 26.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSettings {
    pub target_snr_db: f64,
    pub max_tx_power_dbm: f64,
    pub min_tx_power_dbm: f64,
    pub se_max_bps_hz: f64,
    pub serving_bs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationSettings {
    pub pilot_count: usize,
    pub bs_tx_power_dbm: f64,
    /// The BS whose transmissions also reach the UE through the RIS.
    pub ris_bs: usize,
    /// Number of random RIS profiles the pilots cycle through.
    pub ris_config_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecySettings {
    pub bs_index: usize,
    pub rx_antenna_count: usize,
    pub bs_tx_power_dbm: f64,
    pub fading_draws: usize,
    pub outer_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSettings {
    /// Steering beams in the default codebook.
    pub beams: usize,
    /// Sounding SNR for a noisy sweep; `None` sounds noiselessly.
    pub sounding_snr_db: Option<f64>,
}

/// A validated, immutable deployment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub carrier_hz: f64,
    pub subcarrier_count: usize,
    pub subcarrier_spacing_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bs_list: Vec<BaseStation>,
    pub ue_grid: Grid,
    pub ris: Option<Ris>,
    pub walls: Vec<Wall>,
    pub eve: Option<Eve>,
    pub link: LinkSettings,
    pub localization: LocalizationSettings,
    pub secrecy: SecrecySettings,
    pub codebook: CodebookSettings,
    pub thresholds: Thresholds,
    pub seed: u64,
}

impl Scene {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.subcarrier_count as f64 * self.subcarrier_spacing_hz
    }

    /// Thermal noise plus noise figure over `bandwidth_hz`, in dBm.
    pub fn noise_power_dbm(&self, bandwidth_hz: f64) -> f64 {
        self.noise_psd_dbm_hz + self.noise_figure_db + 10.0 * bandwidth_hz.log10()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Grid points in deterministic row-major order.
    pub fn grid_points(&self) -> Vec<Point> {
        self.ue_grid.points()
    }

    /// Pretty JSON with every default filled in. Parsing it yields this scene.
    pub fn canonical_dump(&self) -> String {
        let mut s = serde_json::to_string_pretty(&SceneFile::from(self)).expect("serializable");
        s.push('\n');
        s
    }
}

/// Parses and validates a scene.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        Error::scene(path, e.inner().to_string())
    })?;
    file.resolve()
}

// --- on-disk schema -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    spec_version: u32,
    #[serde(default)]
    name: Option<String>,
    carrier_hz: f64,
    #[serde(default)]
    subcarrier_count: Option<usize>,
    #[serde(default)]
    subcarrier_spacing_hz: Option<f64>,
    #[serde(default)]
    noise_psd_dbm_hz: Option<f64>,
    #[serde(default)]
    noise_figure_db: Option<f64>,
    bs_list: Vec<BsFile>,
    ue_grid: GridFile,
    #[serde(default)]
    ris: Option<RisFile>,
    #[serde(default)]
    walls: Option<Vec<WallFile>>,
    #[serde(default)]
    eve: Option<EveFile>,
    #[serde(default)]
    link: Option<LinkFile>,
    #[serde(default)]
    localization: Option<LocalizationFile>,
    #[serde(default)]
    secrecy: Option<SecrecyFile>,
    #[serde(default)]
    codebook: Option<CodebookFile>,
    #[serde(default)]
    thresholds: Option<ThresholdsFile>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsFile {
    position_m: Vec<f64>,
    #[serde(default)]
    antenna_count: Option<usize>,
    #[serde(default)]
    array: Option<UlaFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UlaFile {
    #[serde(default)]
    spacing_m: Option<f64>,
    #[serde(default)]
    orientation_rad: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    resolution_m: f64,
    #[serde(default)]
    fixed_height_m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RisFile {
    position_m: Vec<f64>,
    element_count: usize,
    #[serde(default)]
    element_spacing_m: Option<f64>,
    #[serde(default)]
    orientation_rad: Option<f64>,
    #[serde(default)]
    phase_lookup: Option<Vec<f64>>,
    #[serde(default)]
    element_efficiency: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WallFile {
    p1_m: [f64; 2],
    p2_m: [f64; 2],
    penetration_loss_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EveFile {
    position_m: Vec<f64>,
    #[serde(default)]
    antenna_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    #[serde(default)]
    target_snr_db: Option<f64>,
    #[serde(default)]
    max_tx_power_dbm: Option<f64>,
    #[serde(default)]
    min_tx_power_dbm: Option<f64>,
    #[serde(default)]
    se_max_bps_hz: Option<f64>,
    #[serde(default)]
    serving_bs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalizationFile {
    #[serde(default)]
    pilot_count: Option<usize>,
    #[serde(default)]
    bs_tx_power_dbm: Option<f64>,
    #[serde(default)]
    ris_bs: Option<usize>,
    #[serde(default)]
    ris_config_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecrecyFile {
    #[serde(default)]
    bs_index: Option<usize>,
    #[serde(default)]
    rx_antenna_count: Option<usize>,
    #[serde(default)]
    bs_tx_power_dbm: Option<f64>,
    #[serde(default)]
    fading_draws: Option<usize>,
    #[serde(default)]
    outer_rounds: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookFile {
    #[serde(default)]
    beams: Option<usize>,
    #[serde(default)]
    sounding_snr_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdsFile {
    #[serde(default)]
    gain_db: Option<ClassRule>,
    #[serde(default)]
    tx_power_dbm: Option<ClassRule>,
    #[serde(default)]
    se_bps_hz: Option<ClassRule>,
    #[serde(default)]
    peb_m: Option<ClassRule>,
    #[serde(default)]
    sse_bps_hz: Option<ClassRule>,
    #[serde(default)]
    peb_feasible_m: Option<f64>,
    #[serde(default)]
    sse_q_th_bps_hz: Option<f64>,
}

fn point(v: &[f64], path: &str) -> Result<Point> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::scene(path, "coordinates must be finite"));
    }
    match *v {
        [x, y] => Ok(Point::new(x, y, 0.0)),
        [x, y, z] => Ok(Point::new(x, y, z)),
        _ => Err(Error::scene(path, format!("expected 2 or 3 coordinates, got {}", v.len()))),
    }
}

fn check(cond: bool, path: &str, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::scene(path, message))
    }
}

fn finite(v: f64, path: &str) -> Result<f64> {
    check(v.is_finite(), path, "must be finite")?;
    Ok(v)
}

fn default_phase_lookup() -> Vec<f64> {
    vec![0.0, FRAC_PI_2, PI, -FRAC_PI_2]
}

impl SceneFile {
    fn resolve(self) -> Result<Scene> {
        check(
            self.spec_version == SCHEMA_VERSION,
            "spec_version",
            &format!("unsupported schema version (expected {SCHEMA_VERSION})"),
        )?;
        check(self.carrier_hz > 0.0 && self.carrier_hz.is_finite(), "carrier_hz", "must be > 0")?;
        let lambda = SPEED_OF_LIGHT / self.carrier_hz;

        let subcarrier_count = self.subcarrier_count.unwrap_or(1);
        check(subcarrier_count >= 1, "subcarrier_count", "must be >= 1")?;
        let subcarrier_spacing_hz = self.subcarrier_spacing_hz.unwrap_or(240e3);
        check(
            subcarrier_spacing_hz > 0.0 && subcarrier_spacing_hz.is_finite(),
            "subcarrier_spacing_hz",
            "must be > 0",
        )?;
        let noise_psd_dbm_hz = finite(self.noise_psd_dbm_hz.unwrap_or(-174.0), "noise_psd_dbm_hz")?;
        let noise_figure_db = finite(self.noise_figure_db.unwrap_or(9.0), "noise_figure_db")?;

        check(!self.bs_list.is_empty(), "bs_list", "at least one BS is required")?;
        let mut bs_list = Vec::with_capacity(self.bs_list.len());
        for (i, bs) in self.bs_list.iter().enumerate() {
            let p = format!("bs_list[{i}]");
            let position_m = point(&bs.position_m, &format!("{p}.position_m"))?;
            let antenna_count = bs.antenna_count.unwrap_or(1);
            check(antenna_count >= 1, &format!("{p}.antenna_count"), "must be >= 1")?;
            let arr = bs.array.clone().unwrap_or(UlaFile {
                spacing_m: None,
                orientation_rad: None,
            });
            let spacing_m = arr.spacing_m.unwrap_or(lambda / 2.0);
            check(
                spacing_m > 0.0 && spacing_m.is_finite(),
                &format!("{p}.array.spacing_m"),
                "must be > 0",
            )?;
            let orientation_rad =
                finite(arr.orientation_rad.unwrap_or(0.0), &format!("{p}.array.orientation_rad"))?;
            bs_list.push(BaseStation {
                position_m,
                antenna_count,
                array: Ula {
                    spacing_m,
                    orientation_rad,
                },
            });
        }

        let g = &self.ue_grid;
        let ue_grid = Grid::new(
            g.x_min,
            g.x_max,
            g.y_min,
            g.y_max,
            g.resolution_m,
            g.fixed_height_m.unwrap_or(0.0),
        )?;

        let ris = match &self.ris {
            None => None,
            Some(r) => {
                let position_m = point(&r.position_m, "ris.position_m")?;
                check(r.element_count >= 1, "ris.element_count", "must be >= 1")?;
                let element_spacing_m = r.element_spacing_m.unwrap_or(lambda / 2.0);
                check(
                    element_spacing_m > 0.0 && element_spacing_m.is_finite(),
                    "ris.element_spacing_m",
                    "must be > 0",
                )?;
                let orientation_rad = finite(r.orientation_rad.unwrap_or(0.0), "ris.orientation_rad")?;
                let phase_lookup = r.phase_lookup.clone().unwrap_or_else(default_phase_lookup);
                check(!phase_lookup.is_empty(), "ris.phase_lookup", "must not be empty")?;
                check(
                    phase_lookup.iter().all(|p| p.is_finite()),
                    "ris.phase_lookup",
                    "phases must be finite",
                )?;
                let element_efficiency = r.element_efficiency.unwrap_or(1.0);
                check(
                    element_efficiency > 0.0 && element_efficiency <= 1.0,
                    "ris.element_efficiency",
                    "must be in (0, 1]",
                )?;
                Some(Ris {
                    position_m,
                    element_count: r.element_count,
                    element_spacing_m,
                    orientation_rad,
                    phase_lookup,
                    element_efficiency,
                })
            }
        };

        let mut walls = Vec::new();
        for (i, w) in self.walls.iter().flatten().enumerate() {
            let p = format!("walls[{i}]");
            check(
                w.p1_m.iter().chain(&w.p2_m).all(|v| v.is_finite()),
                &format!("{p}.p1_m"),
                "coordinates must be finite",
            )?;
            check(w.p1_m != w.p2_m, &format!("{p}.p2_m"), "wall endpoints must differ")?;
            check(
                w.penetration_loss_db >= 0.0 && w.penetration_loss_db.is_finite(),
                &format!("{p}.penetration_loss_db"),
                "must be >= 0",
            )?;
            walls.push(Wall {
                p1_m: w.p1_m,
                p2_m: w.p2_m,
                penetration_loss_db: w.penetration_loss_db,
            });
        }

        let eve = match &self.eve {
            None => None,
            Some(e) => {
                let antenna_count = e.antenna_count.unwrap_or(1);
                check(antenna_count >= 1, "eve.antenna_count", "must be >= 1")?;
                Some(Eve {
                    position_m: point(&e.position_m, "eve.position_m")?,
                    antenna_count,
                })
            }
        };

        let bs_count = bs_list.len();
        let lf = self.link.clone().unwrap_or(LinkFile {
            target_snr_db: None,
            max_tx_power_dbm: None,
            min_tx_power_dbm: None,
            se_max_bps_hz: None,
            serving_bs: None,
        });
        let link = LinkSettings {
            target_snr_db: finite(lf.target_snr_db.unwrap_or(5.0), "link.target_snr_db")?,
            max_tx_power_dbm: finite(lf.max_tx_power_dbm.unwrap_or(23.0), "link.max_tx_power_dbm")?,
            min_tx_power_dbm: finite(lf.min_tx_power_dbm.unwrap_or(-40.0), "link.min_tx_power_dbm")?,
            se_max_bps_hz: lf.se_max_bps_hz.unwrap_or(7.4),
            serving_bs: lf.serving_bs.unwrap_or(0),
        };
        check(
            link.min_tx_power_dbm < link.max_tx_power_dbm,
            "link.min_tx_power_dbm",
            "must be < max_tx_power_dbm",
        )?;
        check(link.se_max_bps_hz > 0.0, "link.se_max_bps_hz", "must be > 0")?;
        check(link.serving_bs < bs_count, "link.serving_bs", "no such BS")?;

        let nearest_to_ris = ris
            .as_ref()
            .map(|r| {
                let mut best = 0;
                for (i, bs) in bs_list.iter().enumerate() {
                    if (bs.position_m - r.position_m).norm()
                        < (bs_list[best].position_m - r.position_m).norm()
                    {
                        best = i;
                    }
                }
                best
            })
            .unwrap_or(0);
        let loc = self.localization.clone().unwrap_or(LocalizationFile {
            pilot_count: None,
            bs_tx_power_dbm: None,
            ris_bs: None,
            ris_config_count: None,
        });
        let pilot_count = loc.pilot_count.unwrap_or(40);
        let localization = LocalizationSettings {
            pilot_count,
            bs_tx_power_dbm: finite(loc.bs_tx_power_dbm.unwrap_or(30.0), "localization.bs_tx_power_dbm")?,
            ris_bs: loc.ris_bs.unwrap_or(nearest_to_ris),
            ris_config_count: loc.ris_config_count.unwrap_or(pilot_count),
        };
        check(localization.pilot_count >= 1, "localization.pilot_count", "must be >= 1")?;
        check(localization.ris_bs < bs_count, "localization.ris_bs", "no such BS")?;
        check(
            localization.ris_config_count >= 1,
            "localization.ris_config_count",
            "must be >= 1",
        )?;

        let sf = self.secrecy.clone().unwrap_or(SecrecyFile {
            bs_index: None,
            rx_antenna_count: None,
            bs_tx_power_dbm: None,
            fading_draws: None,
            outer_rounds: None,
        });
        let secrecy = SecrecySettings {
            bs_index: sf.bs_index.unwrap_or(0),
            rx_antenna_count: sf.rx_antenna_count.unwrap_or(1),
            bs_tx_power_dbm: finite(sf.bs_tx_power_dbm.unwrap_or(30.0), "secrecy.bs_tx_power_dbm")?,
            fading_draws: sf.fading_draws.unwrap_or(1),
            outer_rounds: sf.outer_rounds.unwrap_or(5),
        };
        check(secrecy.bs_index < bs_count, "secrecy.bs_index", "no such BS")?;
        check(secrecy.rx_antenna_count >= 1, "secrecy.rx_antenna_count", "must be >= 1")?;
        check(secrecy.fading_draws >= 1, "secrecy.fading_draws", "must be >= 1")?;
        check(secrecy.outer_rounds >= 1, "secrecy.outer_rounds", "must be >= 1")?;

        let cf = self.codebook.clone().unwrap_or(CodebookFile {
            beams: None,
            sounding_snr_db: None,
        });
        let codebook = CodebookSettings {
            beams: cf.beams.unwrap_or(16),
            sounding_snr_db: cf.sounding_snr_db,
        };
        check(codebook.beams >= 1, "codebook.beams", "must be >= 1")?;
        if let Some(s) = codebook.sounding_snr_db {
            finite(s, "codebook.sounding_snr_db")?;
        }

        let d = Thresholds::default();
        let tf = self.thresholds.clone().unwrap_or(ThresholdsFile {
            gain_db: None,
            tx_power_dbm: None,
            se_bps_hz: None,
            peb_m: None,
            sse_bps_hz: None,
            peb_feasible_m: None,
            sse_q_th_bps_hz: None,
        });
        let thresholds = Thresholds {
            gain_db: tf.gain_db.unwrap_or(d.gain_db),
            tx_power_dbm: tf.tx_power_dbm.unwrap_or(d.tx_power_dbm),
            se_bps_hz: tf.se_bps_hz.unwrap_or(d.se_bps_hz),
            peb_m: tf.peb_m.unwrap_or(d.peb_m),
            sse_bps_hz: tf.sse_bps_hz.unwrap_or(d.sse_bps_hz),
            peb_feasible_m: tf.peb_feasible_m.unwrap_or(d.peb_feasible_m),
            sse_q_th_bps_hz: finite(
                tf.sse_q_th_bps_hz.unwrap_or(d.sse_q_th_bps_hz),
                "thresholds.sse_q_th_bps_hz",
            )?,
        };
        for (name, r) in [
            ("gain_db", thresholds.gain_db),
            ("tx_power_dbm", thresholds.tx_power_dbm),
            ("se_bps_hz", thresholds.se_bps_hz),
            ("peb_m", thresholds.peb_m),
            ("sse_bps_hz", thresholds.sse_bps_hz),
        ] {
            check(
                r.boost >= 0.0 && r.boost.is_finite(),
                &format!("thresholds.{name}.boost"),
                "must be >= 0",
            )?;
            check(
                r.unchanged >= 0.0 && r.unchanged.is_finite(),
                &format!("thresholds.{name}.unchanged"),
                "must be >= 0",
            )?;
        }
        check(thresholds.peb_feasible_m > 0.0, "thresholds.peb_feasible_m", "must be > 0")?;

        Ok(Scene {
            name: self.name.clone().unwrap_or_else(|| "scene".to_string()),
            carrier_hz: self.carrier_hz,
            subcarrier_count,
            subcarrier_spacing_hz,
            noise_psd_dbm_hz,
            noise_figure_db,
            bs_list,
            ue_grid,
            ris,
            walls,
            eve,
            link,
            localization,
            secrecy,
            codebook,
            thresholds,
            seed: self.seed.unwrap_or(1),
        })
    }
}

fn vec3(p: &Point) -> Vec<f64> {
    vec![p.x, p.y, p.z]
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        let t = &s.thresholds;
        SceneFile {
            spec_version: SCHEMA_VERSION,
            name: Some(s.name.clone()),
            carrier_hz: s.carrier_hz,
            subcarrier_count: Some(s.subcarrier_count),
            subcarrier_spacing_hz: Some(s.subcarrier_spacing_hz),
            noise_psd_dbm_hz: Some(s.noise_psd_dbm_hz),
            noise_figure_db: Some(s.noise_figure_db),
            bs_list: s
                .bs_list
                .iter()
                .map(|b| BsFile {
                    position_m: vec3(&b.position_m),
                    antenna_count: Some(b.antenna_count),
                    array: Some(UlaFile {
                        spacing_m: Some(b.array.spacing_m),
                        orientation_rad: Some(b.array.orientation_rad),
                    }),
                })
                .collect(),
            ue_grid: GridFile {
                x_min: s.ue_grid.x_min,
                x_max: s.ue_grid.x_max,
                y_min: s.ue_grid.y_min,
                y_max: s.ue_grid.y_max,
                resolution_m: s.ue_grid.resolution_m,
                fixed_height_m: Some(s.ue_grid.fixed_height_m),
            },
            ris: s.ris.as_ref().map(|r| RisFile {
                position_m: vec3(&r.position_m),
                element_count: r.element_count,
                element_spacing_m: Some(r.element_spacing_m),
                orientation_rad: Some(r.orientation_rad),
                phase_lookup: Some(r.phase_lookup.clone()),
                element_efficiency: Some(r.element_efficiency),
            }),
            walls: Some(
                s.walls
                    .iter()
                    .map(|w| WallFile {
                        p1_m: w.p1_m,
                        p2_m: w.p2_m,
                        penetration_loss_db: w.penetration_loss_db,
                    })
                    .collect(),
            ),
            eve: s.eve.as_ref().map(|e| EveFile {
                position_m: vec3(&e.position_m),
                antenna_count: Some(e.antenna_count),
            }),
            link: Some(LinkFile {
                target_snr_db: Some(s.link.target_snr_db),
                max_tx_power_dbm: Some(s.link.max_tx_power_dbm),
                min_tx_power_dbm: Some(s.link.min_tx_power_dbm),
                se_max_bps_hz: Some(s.link.se_max_bps_hz),
                serving_bs: Some(s.link.serving_bs),
            }),
            localization: Some(LocalizationFile {
                pilot_count: Some(s.localization.pilot_count),
                bs_tx_power_dbm: Some(s.localization.bs_tx_power_dbm),
                ris_bs: Some(s.localization.ris_bs),
                ris_config_count: Some(s.localization.ris_config_count),
            }),
            secrecy: Some(SecrecyFile {
                bs_index: Some(s.secrecy.bs_index),
                rx_antenna_count: Some(s.secrecy.rx_antenna_count),
                bs_tx_power_dbm: Some(s.secrecy.bs_tx_power_dbm),
                fading_draws: Some(s.secrecy.fading_draws),
                outer_rounds: Some(s.secrecy.outer_rounds),
            }),
            codebook: Some(CodebookFile {
                beams: Some(s.codebook.beams),
                sounding_snr_db: s.codebook.sounding_snr_db,
            }),
            thresholds: Some(ThresholdsFile {
                gain_db: Some(t.gain_db),
                tx_power_dbm: Some(t.tx_power_dbm),
                se_bps_hz: Some(t.se_bps_hz),
                peb_m: Some(t.peb_m),
                sse_bps_hz: Some(t.sse_bps_hz),
                peb_feasible_m: Some(t.peb_feasible_m),
                sse_q_th_bps_hz: Some(t.sse_q_th_bps_hz),
            }),
            seed: Some(s.seed),
        }
    }
}
