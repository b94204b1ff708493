use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Geofence;
use crate::error::ConfigError;
use crate::lidar::PointCloudFrame;

/// How the density channel maps a point count to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityNorm {
    /// `min(1, ln(N+1) / ln 64)`: saturates at 63 points per cell.
    #[default]
    LogRatio,
    /// `min(1, ln(N+1) / 64)`, which never saturates in practice.
    Literal,
}

impl DensityNorm {
    pub fn apply(self, n: usize) -> f64 {
        let l = ((n + 1) as f64).ln();
        match self {
            DensityNorm::LogRatio => (l / 64f64.ln()).min(1.0),
            DensityNorm::Literal => (l / 64.0).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BevConfig {
    /// Cells across (along sensor y).
    pub width: usize,
    /// Cells deep (along sensor x).
    pub height: usize,
    pub range_x: f64,
    pub range_y: f64,
    pub density: DensityNorm,
}

impl Default for BevConfig {
    fn default() -> Self {
        BevConfig {
            width: 608,
            height: 608,
            range_x: 50.0,
            range_y: 50.0,
            density: DensityNorm::LogRatio,
        }
    }
}

impl BevConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::invalid(
                "bev",
                "grid must have at least one cell",
            ));
        }
        if !(self.range_x > 0.0 && self.range_y > 0.0) {
            return Err(ConfigError::invalid("bev", "ranges must be > 0"));
        }
        Ok(())
    }

    /// Row and column of the cell a point falls in; points on the far edge
    /// go to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let (xn, yn) = normalize_point(x, y, self);
        let bin = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (bin(xn, self.height), bin(yn, self.width))
    }
}

/// Continuous grid coordinates of a geofenced point: depth along rows and
/// lateral offset along columns, with `y = 0` at the center column.
pub fn normalize_point(x: f64, y: f64, grid: &BevConfig) -> (f64, f64) {
    let h = grid.height as f64;
    let w = grid.width as f64;
    (x * h / grid.range_x, y * h / grid.range_y + 0.5 * w)
}

/// Three-channel raster: density, normalized max height, max intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct BevMap {
    pub width: usize,
    pub height: usize,
    pub range_x: f64,
    pub range_y: f64,
    /// Row-major `height × width`.
    pub cells: Vec<[f32; 3]>,
}

impl BevMap {
    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        self.cells[row * self.width + col]
    }

    /// 8-bit RGB raster, `round(channel × 255)`.
    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.cells
            .iter()
            .flat_map(|c| c.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8))
            .collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<(), image::ImageError> {
        let img =
            image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb_bytes())
                .expect("buffer length matches grid");
        img.save_with_format(path, image::ImageFormat::Png)
    }
}

/// Rasterize an already geofenced frame. `region.z` fixes the height scale.
pub fn build_bev(frame: &PointCloudFrame, grid: &BevConfig, region: &Geofence) -> BevMap {
    let n = grid.width * grid.height;
    let mut count = vec![0usize; n];
    let mut max_z = vec![f64::NEG_INFINITY; n];
    let mut max_i = vec![0f64; n];
    for p in &frame.points {
        let (r, c) = grid.cell_of(p.x as f64, p.y as f64);
        let k = r * grid.width + c;
        count[k] += 1;
        max_z[k] = max_z[k].max(p.z as f64);
        max_i[k] = max_i[k].max(p.i as f64);
    }
    let [z_lo, z_hi] = region.z;
    let cells = (0..n)
        .map(|k| {
            if count[k] == 0 {
                return [0.0; 3];
            }
            let z_r = grid.density.apply(count[k]);
            let z_g = ((max_z[k] - z_lo) / (z_hi - z_lo)).clamp(0.0, 1.0);
            let z_b = max_i[k].clamp(0.0, 1.0);
            [z_r as f32, z_g as f32, z_b as f32]
        })
        .collect();
    BevMap {
        width: grid.width,
        height: grid.height,
        range_x: grid.range_x,
        range_y: grid.range_y,
        cells,
    }
}
