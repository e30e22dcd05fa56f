//! Per-field shape statistics from image moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::FieldLabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    /// Pixel count.
    pub area: u64,
    /// Mean pixel coordinates `(x = col, y = row)`.
    pub centroid: (f64, f64),
    /// Eccentricity of the ellipse with the same normalized second central
    /// moments: 0 for a circle, approaching 1 for a line.
    pub eccentricity: f64,
}

pub fn region_stats(labels: &FieldLabelMap, id: u32) -> Result<RegionStats> {
    let all = all_region_stats(labels);
    match all.get(id as usize) {
        Some(Some(s)) if id != 0 => Ok(*s),
        _ => Err(Error::UnknownField(id)),
    }
}

/// Statistics for every id in one pass, indexed by id (`None` where the id
/// is absent; index 0 is always `None`).
pub fn all_region_stats(labels: &FieldLabelMap) -> Vec<Option<RegionStats>> {
    let n = labels.max_label() as usize + 1;
    let mut acc = vec![MomentAcc::default(); n];
    let w = labels.width();
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 {
            acc[l as usize].add((i % w) as f64, (i / w) as f64);
        }
    }
    acc.iter()
        .enumerate()
        .map(|(id, a)| if id == 0 { None } else { a.finish() })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct MomentAcc {
    n: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl MomentAcc {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn finish(&self) -> Option<RegionStats> {
        if self.n == 0 {
            return None;
        }
        let n = self.n as f64;
        let (cx, cy) = (self.sx / n, self.sy / n);
        // Central moments; integer inputs keep these well conditioned at raster scale.
        let mu20 = (self.sxx / n - cx * cx).max(0.0);
        let mu02 = (self.syy / n - cy * cy).max(0.0);
        let mu11 = self.sxy / n - cx * cy;
        Some(RegionStats {
            area: self.n,
            centroid: (cx, cy),
            eccentricity: ellipse_eccentricity(mu20, mu02, mu11),
        })
    }
}

pub(crate) fn ellipse_eccentricity(mu20: f64, mu02: f64, mu11: f64) -> f64 {
    let half_trace = (mu20 + mu02) / 2.0;
    let root = (((mu20 - mu02) / 2.0).powi(2) + mu11 * mu11).sqrt();
    let major = half_trace + root;
    let minor = (half_trace - root).max(0.0);
    if major <= 0.0 {
        return 0.0;
    }
    (1.0 - minor / major).clamp(0.0, 1.0).sqrt()
}
