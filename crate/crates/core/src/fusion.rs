//! Averaging of overlapping window predictions and of multi-date masks.

use crate::error::{Error, Result};
use crate::extract::MaskTriple;
use crate::raster::{GeoTransform, Raster};

pub const DEFAULT_WINDOW: usize = 256;
/// A quarter of the window: each interior pixel is covered 4 x 4 = 16 times.
pub const DEFAULT_STRIDE: usize = DEFAULT_WINDOW / 4;

/// Masks predicted for one window placed at `(row, col)` of the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPrediction {
    pub row: usize,
    pub col: usize,
    pub masks: MaskTriple,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Top-left origins of `window`-sized tiles stepping by `stride` along one
/// axis of length `len`. A final tile is aligned to the far edge when the
/// stride does not land on it.
pub fn window_starts(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window and stride must be >= 1".into()));
    }
    if window > len {
        return Err(Error::InvalidArgument(format!(
            "window {window} larger than grid dimension {len}"
        )));
    }
    let mut starts: Vec<usize> = (0..=len - window).step_by(stride).collect();
    if *starts.last().unwrap() != len - window {
        starts.push(len - window);
    }
    Ok(starts)
}

/// All `(row, col)` window origins tiling a `height x width` grid.
pub fn window_origins(
    width: usize,
    height: usize,
    window: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    let rows = window_starts(height, window, stride)?;
    let cols = window_starts(width, window, stride)?;
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect())
}

/// Per-pixel arithmetic mean of every window covering the pixel.
pub fn mosaic_windows(
    windows: &[WindowPrediction],
    width: usize,
    height: usize,
    geotransform: GeoTransform,
) -> Result<MaskTriple> {
    let n = width * height;
    let mut acc = vec![[Compensated::default(); 3]; n];
    let mut count = vec![0u32; n];
    for win in windows {
        let (ww, wh) = (win.masks.width(), win.masks.height());
        if win.row + wh > height || win.col + ww > width {
            return Err(Error::ShapeMismatch(format!(
                "window {ww}x{wh} at ({}, {}) exceeds the {width}x{height} grid",
                win.row, win.col
            )));
        }
        let layers = win.masks.layers();
        for r in 0..wh {
            for c in 0..ww {
                let dst = (win.row + r) * width + win.col + c;
                let src = r * ww + c;
                for (k, layer) in layers.iter().enumerate() {
                    acc[dst][k].add(layer.data()[src] as f64);
                }
                count[dst] += 1;
            }
        }
    }
    let gaps: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    if let Some(&first) = gaps.first() {
        return Err(Error::UncoveredPixels {
            count: gaps.len(),
            first_row: first / width,
            first_col: first % width,
        });
    }
    let layer = |k: usize| -> Result<Raster> {
        let data = (0..n)
            .map(|i| (acc[i][k].value() / count[i] as f64) as f32)
            .collect();
        Ok(Raster::from_band(width, height, data)?.with_geotransform(geotransform))
    };
    MaskTriple::new(layer(0)?, layer(1)?, layer(2)?)
}

/// Number of windows covering each pixel.
pub fn coverage_counts(origins: &[(usize, usize)], window: usize, width: usize, height: usize) -> Vec<u32> {
    let mut count = vec![0u32; width * height];
    for &(r0, c0) in origins {
        for r in r0..(r0 + window).min(height) {
            for c in c0..(c0 + window).min(width) {
                count[r * width + c] += 1;
            }
        }
    }
    count
}

/// Per-pixel mean of each mask across dates.
pub fn consensus(series: &[MaskTriple]) -> Result<MaskTriple> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidArgument("consensus needs at least one date".into()))?;
    if let Some(i) = series.iter().position(|m| !m.same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "date {i} differs in shape from date 0"
        )));
    }
    let n = first.width() * first.height();
    let k = series.len() as f64;
    let mut layers = Vec::with_capacity(3);
    for layer_idx in 0..3 {
        let mut acc = vec![Compensated::default(); n];
        for m in series {
            for (a, &v) in acc.iter_mut().zip(m.layers()[layer_idx].data()) {
                a.add(v as f64);
            }
        }
        let data = acc.iter().map(|a| (a.value() / k) as f32).collect();
        layers.push(
            Raster::from_band(first.width(), first.height(), data)?
                .with_geotransform(first.geotransform()),
        );
    }
    let distance = layers.pop().unwrap();
    let boundary = layers.pop().unwrap();
    let extent = layers.pop().unwrap();
    MaskTriple::new(extent, boundary, distance)
}
