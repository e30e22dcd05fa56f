//! Field instance extraction from extent / boundary / distance masks.
//!
//! Two methods:
//!
//! * **cutoff**: threshold extent and boundary, label the cores
//!   `extent >= t_extent && boundary < t_boundary`, then hand every remaining
//!   extent pixel to the geodesically nearest core so neighbouring fields abut.
//! * **watershed**: seeds are connected regions of `distance >= t_distance`;
//!   they flood the surface `boundary + (1 - extent)` in priority order over
//!   the region `extent >= t_extent`. Each catchment is one field.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::components::connected_components;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Connectivity, FieldLabelMap, GeoTransform, Raster};

/// Extent, boundary and distance probability layers of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTriple {
    pub extent: Raster,
    pub boundary: Raster,
    pub distance: Raster,
}

impl MaskTriple {
    pub fn new(extent: Raster, boundary: Raster, distance: Raster) -> Result<Self> {
        for (name, r) in [("extent", &extent), ("boundary", &boundary), ("distance", &distance)] {
            if r.bands() != 1 {
                return Err(Error::ShapeMismatch(format!("{name} mask must have one band")));
            }
            if r.width() != extent.width() || r.height() != extent.height() {
                return Err(Error::ShapeMismatch(format!(
                    "{name} mask is {}x{}, extent is {}x{}",
                    r.width(),
                    r.height(),
                    extent.width(),
                    extent.height()
                )));
            }
            if let Some(v) = r
                .data()
                .iter()
                .find(|v| !r.is_nodata(**v) && !(0.0..=1.0).contains(*v))
            {
                return Err(Error::InvalidArgument(format!(
                    "{name} mask value {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            extent,
            boundary,
            distance,
        })
    }

    /// Split a 3-band raster ordered extent, boundary, distance.
    pub fn from_stacked(r: &Raster) -> Result<Self> {
        if r.bands() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "mask raster must have 3 bands (extent, boundary, distance), got {}",
                r.bands()
            )));
        }
        Self::new(r.band_raster(0), r.band_raster(1), r.band_raster(2))
    }

    pub fn to_stacked(&self) -> Raster {
        Raster::stack(&[&self.extent, &self.boundary, &self.distance]).expect("validated shapes")
    }

    pub fn width(&self) -> usize {
        self.extent.width()
    }

    pub fn height(&self) -> usize {
        self.extent.height()
    }

    pub fn geotransform(&self) -> GeoTransform {
        self.extent.geotransform
    }

    pub fn same_shape(&self, other: &MaskTriple) -> bool {
        self.extent.same_shape(&other.extent)
    }

    pub fn layers(&self) -> [&Raster; 3] {
        [&self.extent, &self.boundary, &self.distance]
    }

    pub fn layers_mut(&mut self) -> [&mut Raster; 3] {
        [&mut self.extent, &mut self.boundary, &mut self.distance]
    }
}

/// Post-processing thresholds, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub t_extent: f64,
    pub t_boundary: f64,
    pub t_distance: f64,
}

impl ThresholdSet {
    pub fn new(t_extent: f64, t_boundary: f64, t_distance: f64) -> Result<Self> {
        for (name, t) in [
            ("t_extent", t_extent),
            ("t_boundary", t_boundary),
            ("t_distance", t_distance),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("{name} = {t} outside [0, 1]")));
            }
        }
        Ok(Self {
            t_extent,
            t_boundary,
            t_distance,
        })
    }
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self {
            t_extent: 0.5,
            t_boundary: 0.5,
            t_distance: 0.5,
        }
    }
}

impl FromStr for ThresholdSet {
    type Err = Error;

    /// Parses `extent,boundary,distance`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad threshold list {s:?}: {e}")))?;
        match parts.as_slice() {
            [e, b, d] => ThresholdSet::new(*e, *b, *d),
            _ => Err(Error::InvalidArgument(format!(
                "expected three comma-separated thresholds, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cutoff,
    #[default]
    Watershed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cutoff => "cutoff",
            Method::Watershed => "watershed",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cutoff" => Ok(Method::Cutoff),
            "watershed" => Ok(Method::Watershed),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtractOptions {
    /// Connectivity used to label cores and seeds.
    pub connectivity: Connectivity,
    /// Fields smaller than this many pixels are dropped.
    pub min_field_size: usize,
}

pub fn extract(masks: &MaskTriple, t: &ThresholdSet, method: Method) -> FieldLabelMap {
    extract_with(masks, t, method, &ExtractOptions::default())
}

pub fn extract_with(
    masks: &MaskTriple,
    t: &ThresholdSet,
    method: Method,
    opts: &ExtractOptions,
) -> FieldLabelMap {
    match method {
        Method::Cutoff => extract_cutoff_with(masks, t, opts),
        Method::Watershed => extract_watershed_with(masks, t, opts),
    }
}

pub fn extract_cutoff(masks: &MaskTriple, t: &ThresholdSet) -> FieldLabelMap {
    extract_cutoff_with(masks, t, &ExtractOptions::default())
}

pub fn extract_cutoff_with(
    masks: &MaskTriple,
    t: &ThresholdSet,
    opts: &ExtractOptions,
) -> FieldLabelMap {
    let region = masks.extent.threshold(0, t.t_extent as f32);
    let boundary = masks.boundary.band(0);
    let tb = t.t_boundary as f32;
    let core_bits = region
        .bits()
        .iter()
        .zip(boundary)
        .map(|(&r, &b)| r && b < tb)
        .collect();
    let core = BinaryMask::new(masks.width(), masks.height(), core_bits).expect("shape");
    let mut labels = connected_components(&core, opts.connectivity);
    grow_to_nearest(&mut labels, &region);
    labels.remove_small(opts.min_field_size);
    labels
}

/// Multi-source breadth-first growth: every unlabeled pixel of `allowed`
/// reachable through `allowed` (4-connected) takes the label of the nearest
/// labeled pixel. Ties go to whichever source was queued first, in pixel
/// index order.
pub(crate) fn grow_to_nearest(labels: &mut FieldLabelMap, allowed: &BinaryMask) {
    let (w, h) = (labels.width(), labels.height());
    let allowed = allowed.bits();
    let l = labels.labels_mut();
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| l[i] != 0).collect();
    while let Some(idx) = queue.pop_front() {
        let id = l[idx];
        for n in neighbors4(idx, w, h) {
            if l[n] == 0 && allowed[n] {
                l[n] = id;
                queue.push_back(n);
            }
        }
    }
}

#[inline]
fn neighbors4(idx: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (idx / w, idx % w);
    let up = (r > 0).then(|| idx - w);
    let left = (c > 0).then(|| idx - 1);
    let right = (c + 1 < w).then(|| idx + 1);
    let down = (r + 1 < h).then(|| idx + w);
    [up, left, right, down].into_iter().flatten()
}

pub fn extract_watershed(masks: &MaskTriple, t: &ThresholdSet) -> FieldLabelMap {
    extract_watershed_with(masks, t, &ExtractOptions::default())
}

pub fn extract_watershed_with(
    masks: &MaskTriple,
    t: &ThresholdSet,
    opts: &ExtractOptions,
) -> FieldLabelMap {
    let (w, h) = (masks.width(), masks.height());
    let region = masks.extent.threshold(0, t.t_extent as f32);
    let distance = masks.distance.band(0);
    let td = t.t_distance as f32;
    // Seeds outside the flooding region are dropped.
    let seed_bits = region
        .bits()
        .iter()
        .zip(distance)
        .map(|(&r, &d)| r && d >= td)
        .collect();
    let seeds = BinaryMask::new(w, h, seed_bits).expect("shape");
    let mut labels = connected_components(&seeds, opts.connectivity);
    let surface: Vec<f32> = masks
        .boundary
        .band(0)
        .iter()
        .zip(masks.extent.band(0))
        .map(|(&b, &e)| (b + (1.0 - e)).max(0.0))
        .collect();
    flood(&mut labels, &surface, &region);
    labels.remove_small(opts.min_field_size);
    labels
}

/// Priority flood from the labeled pixels of `labels` over `region`.
///
/// Pixels are processed by increasing surface value; equal values are
/// processed first-in first-out, and initial seeds enter in pixel index
/// order, so the result is fully deterministic.
pub(crate) fn flood(labels: &mut FieldLabelMap, surface: &[f32], region: &BinaryMask) {
    let (w, h) = (labels.width(), labels.height());
    let region = region.bits();
    let l = labels.labels_mut();
    // Keys pack (surface bits, push sequence); `order[seq]` is the pixel.
    // Non-negative floats order like their bit patterns.
    let key = |idx: usize, seq: usize| ((surface[idx].to_bits() as u64) << 32) | seq as u64;
    let mut order: Vec<u32> = (0..l.len() as u32).filter(|&i| l[i as usize] != 0).collect();
    let mut heap: BinaryHeap<Reverse<u64>> = order
        .iter()
        .enumerate()
        .map(|(seq, &i)| Reverse(key(i as usize, seq)))
        .collect();
    while let Some(Reverse(k)) = heap.pop() {
        let idx = order[(k & 0xffff_ffff) as usize] as usize;
        let id = l[idx];
        for n in neighbors4(idx, w, h) {
            if l[n] == 0 && region[n] {
                l[n] = id;
                heap.push(Reverse(key(n, order.len())));
                order.push(n as u32);
            }
        }
    }
}
