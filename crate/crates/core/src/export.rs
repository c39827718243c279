//! CSV, PGM and PPM writers for fields and label maps.
//!
//! Images are row-major with the north edge (largest y) on top. The color
//! scale runs blue (minimum) through green (midpoint) to red (maximum);
//! NaN cells are black.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::influence::{InfluenceMap, Label, MetricField};
use crate::scene::Grid;

fn finite_range(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied().filter(|v| v.is_finite());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Position of `v` on the scale, in [0, 1]; `None` for NaN.
fn scale(v: f64, range: Option<(f64, f64)>) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    let (lo, hi) = range?;
    if hi > lo {
        Some(((v - lo) / (hi - lo)).clamp(0.0, 1.0))
    } else {
        Some(0.5)
    }
}

fn warn_degenerate(values: &[f64]) -> Option<(f64, f64)> {
    let range = finite_range(values);
    if let Some((lo, hi)) = range {
        if lo == hi {
            log::warn!("degenerate value range [{lo}, {hi}]: writing a uniform mid-scale image");
        }
    }
    range
}

/// Three-stop color map: 0 -> blue, 0.5 -> green, 1 -> red.
pub fn colormap(t: f64) -> [u8; 3] {
    let c = |x: f64| (255.0 * x).round() as u8;
    if t < 0.5 {
        let s = 2.0 * t;
        [0, c(s), c(1.0 - s)]
    } else {
        let s = 2.0 * t - 1.0;
        [c(s), c(1.0 - s), 0]
    }
}

/// Fixed label colors.
pub fn label_color(label: Label) -> [u8; 3] {
    match label {
        Label::Unchanged => [200, 200, 200],
        Label::Boosted => [0, 160, 0],
        Label::Enabled => [0, 90, 255],
        Label::Degraded => [220, 0, 0],
        Label::Marginal => [240, 200, 0],
        Label::InfeasibleBoth => [0, 0, 0],
    }
}

/// Rows from north to south, each west to east.
fn raster<T: Copy>(grid: &Grid, cells: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(cells.len());
    for iy in (0..grid.ny()).rev() {
        for ix in 0..grid.nx() {
            out.push(cells[grid.index(ix, iy)]);
        }
    }
    out
}

fn check(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.cell_count(),
            actual: len,
        });
    }
    Ok(())
}

/// CSV `x_m,y_m,value` in row-major cell order. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn csv(grid: &Grid, values: &[f64]) -> Result<String> {
    check(grid, values.len())?;
    let mut s = String::from("x_m,y_m,value\n");
    for (i, v) in values.iter().enumerate() {
        let (ix, iy) = grid.coords(i);
        writeln!(s, "{},{},{}", grid.x(ix), grid.y(iy), v).unwrap();
    }
    Ok(s)
}

pub fn field_csv(field: &MetricField) -> Result<String> {
    csv(&field.grid, &field.values)
}

pub fn labels_csv(map: &InfluenceMap) -> Result<String> {
    check(&map.grid, map.labels.len())?;
    let mut s = String::from("x_m,y_m,value\n");
    for (i, l) in map.labels.iter().enumerate() {
        let (ix, iy) = map.grid.coords(i);
        writeln!(s, "{},{},{}", map.grid.x(ix), map.grid.y(iy), l.name()).unwrap();
    }
    Ok(s)
}

/// Parses a numeric CSV written by [`csv`] into `(x, y, value)` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("x_m,y_m,value") => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "expected header x_m,y_m,value, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::InvalidArgument(format!("line {}: {s:?}: {e}", i + 2))
                })
            };
            if cols.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected 3 columns, found {}",
                    i + 2,
                    cols.len()
                )));
            }
            Ok((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?))
        })
        .collect()
}

/// Plain (P2) grayscale image, NaN -> 0.
pub fn pgm(grid: &Grid, values: &[f64]) -> Result<String> {
    check(grid, values.len())?;
    let range = warn_degenerate(values);
    let mut s = format!("P2\n{} {}\n255\n", grid.nx(), grid.ny());
    for row in raster(grid, values).chunks(grid.nx()) {
        let px: Vec<String> = row
            .iter()
            .map(|&v| scale(v, range).map_or(0, |t| (255.0 * t).round() as u8).to_string())
            .collect();
        s.push_str(&px.join(" "));
        s.push('\n');
    }
    Ok(s)
}

fn ppm_from(grid: &Grid, pixels: Vec<[u8; 3]>) -> String {
    let mut s = format!("P3\n{} {}\n255\n", grid.nx(), grid.ny());
    for row in pixels.chunks(grid.nx()) {
        let px: Vec<String> = row
            .iter()
            .map(|[r, g, b]| format!("{r} {g} {b}"))
            .collect();
        s.push_str(&px.join(" "));
        s.push('\n');
    }
    s
}

/// Plain (P3) color image using [`colormap`].
pub fn ppm(grid: &Grid, values: &[f64]) -> Result<String> {
    check(grid, values.len())?;
    let range = warn_degenerate(values);
    let pixels = raster(grid, values)
        .into_iter()
        .map(|v| scale(v, range).map_or([0, 0, 0], colormap))
        .collect();
    Ok(ppm_from(grid, pixels))
}

pub fn labels_ppm(map: &InfluenceMap) -> Result<String> {
    check(&map.grid, map.labels.len())?;
    let pixels = raster(&map.grid, &map.labels)
        .into_iter()
        .map(label_color)
        .collect();
    Ok(ppm_from(&map.grid, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> Grid {
        Grid::new(0.0, nx as f64 - 1.0, 0.0, ny as f64 - 1.0, 1.0, 1.5).unwrap()
    }

    #[test]
    fn single_cell_csv() {
        let g = Grid::new(2.5, 2.5, -1.0, -1.0, 0.5, 0.0).unwrap();
        assert_eq!(csv(&g, &[5.0]).unwrap(), "x_m,y_m,value\n2.5,-1,5\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = grid(3, 2);
        let v = vec![0.1 + 0.2, f64::NAN, -1e-310, 1.0 / 3.0, 6.02e23, -0.0];
        let back = parse_csv(&csv(&g, &v).unwrap()).unwrap();
        for (a, (_, _, b)) in v.iter().zip(&back) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn pgm_two_cells() {
        let g = grid(2, 1);
        assert_eq!(pgm(&g, &[0.0, 1.0]).unwrap(), "P2\n2 1\n255\n0 255\n");
        assert_eq!(pgm(&g, &[f64::NAN, 1.0]).unwrap(), "P2\n2 1\n255\n0 128\n");
    }

    #[test]
    fn colormap_stops() {
        assert_eq!(colormap(0.0), [0, 0, 255]);
        assert_eq!(colormap(0.5), [0, 255, 0]);
        assert_eq!(colormap(1.0), [255, 0, 0]);
        let g = grid(3, 1);
        assert_eq!(
            ppm(&g, &[0.0, 1.0, 2.0]).unwrap(),
            "P3\n3 1\n255\n0 0 255 0 255 0 255 0 0\n"
        );
    }

    #[test]
    fn north_row_first() {
        let g = grid(1, 2);
        assert_eq!(pgm(&g, &[0.0, 1.0]).unwrap(), "P2\n1 2\n255\n255\n0\n");
    }
}
