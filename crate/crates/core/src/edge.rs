//! Scharr edge magnitude and percentile-scaled pseudoprobabilities, the
//! conventional edge-detection baseline for boundary masks.

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScharrOptions {
    /// Divide kernel responses by 16 (the sum of the positive weights).
    pub normalize: bool,
}

/// When bands are combined relative to percentile rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandComposite {
    /// Average per-band magnitudes, then rescale once.
    #[default]
    AverageThenRescale,
    /// Rescale each band's magnitude, then average.
    RescaleThenAverage,
}

const LOW_PERCENTILE: f64 = 0.05;
const HIGH_PERCENTILE: f64 = 0.95;

/// Per-band Scharr gradient magnitude averaged across bands.
///
/// Kernels are `[-3 0 3; -10 0 10; -3 0 3]` and its transpose; borders use
/// edge replication.
pub fn scharr_magnitude(image: &Raster, opts: ScharrOptions) -> Result<Raster> {
    check_size(image)?;
    let n = image.len();
    let mut acc = vec![0f64; n];
    for b in 0..image.bands() {
        let mag = band_magnitude(image, b, opts);
        for (a, m) in acc.iter_mut().zip(mag) {
            *a += m;
        }
    }
    let bands = image.bands() as f64;
    let data = acc.into_iter().map(|v| (v / bands) as f32).collect();
    Ok(Raster::from_band(image.width(), image.height(), data)?.with_geotransform(image.geotransform))
}

fn check_size(image: &Raster) -> Result<()> {
    if image.bands() == 0 {
        return Err(Error::InvalidArgument("image has no bands".into()));
    }
    if image.width() < 3 || image.height() < 3 {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} smaller than the 3x3 kernel",
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

fn band_magnitude(image: &Raster, b: usize, opts: ScharrOptions) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let band = image.band(b);
    let at = |r: isize, c: isize| -> f64 {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        band[r * w + c] as f64
    };
    let scale = if opts.normalize { 1.0 / 16.0 } else { 1.0 };
    let mut out = vec![0f64; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = 3.0 * (at(r - 1, c + 1) - at(r - 1, c - 1))
                + 10.0 * (at(r, c + 1) - at(r, c - 1))
                + 3.0 * (at(r + 1, c + 1) - at(r + 1, c - 1));
            let gy = 3.0 * (at(r + 1, c - 1) - at(r - 1, c - 1))
                + 10.0 * (at(r + 1, c) - at(r - 1, c))
                + 3.0 * (at(r + 1, c + 1) - at(r - 1, c + 1));
            out[r as usize * w + c as usize] = (gx * gx + gy * gy).sqrt() * scale;
        }
    }
    out
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of sorted values.
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Rescale a single-band raster so its 5th percentile maps to 0 and its
/// 95th to 1, clipping outside. Nodata and non-finite values are excluded
/// from the percentiles and passed through.
pub fn pseudoprobability(mag: &Raster) -> Result<Raster> {
    let mut values: Vec<f64> = mag
        .band(0)
        .iter()
        .filter(|v| v.is_finite() && !mag.is_nodata(**v))
        .map(|&v| v as f64)
        .collect();
    if values.is_empty() {
        return Err(Error::Degenerate("degenerate percentiles: no valid values".into()));
    }
    values.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&values, LOW_PERCENTILE);
    let hi = percentile_sorted(&values, HIGH_PERCENTILE);
    if !(hi > lo) {
        return Err(Error::Degenerate(format!(
            "degenerate percentiles: p5 = p95 = {lo}"
        )));
    }
    let mut out = mag.band_raster(0);
    for v in out.data_mut() {
        if v.is_finite() && !mag.is_nodata(*v) {
            *v = ((*v as f64 - lo) / (hi - lo)).clamp(0.0, 1.0) as f32;
        }
    }
    Ok(out)
}

/// Scharr magnitude turned into a boundary pseudoprobability raster.
pub fn edge_pseudoprobability(
    image: &Raster,
    opts: ScharrOptions,
    composite: BandComposite,
) -> Result<Raster> {
    match composite {
        BandComposite::AverageThenRescale => pseudoprobability(&scharr_magnitude(image, opts)?),
        BandComposite::RescaleThenAverage => {
            check_size(image)?;
            let n = image.len();
            let mut acc = vec![0f64; n];
            for b in 0..image.bands() {
                let mag = scharr_magnitude(&image.band_raster(b), opts)?;
                let p = pseudoprobability(&mag)?;
                for (a, v) in acc.iter_mut().zip(p.data()) {
                    *a += *v as f64;
                }
            }
            let bands = image.bands() as f64;
            let data = acc.into_iter().map(|v| (v / bands) as f32).collect();
            Ok(Raster::from_band(image.width(), image.height(), data)?
                .with_geotransform(image.geotransform))
        }
    }
}
