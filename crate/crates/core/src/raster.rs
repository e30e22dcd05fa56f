//! Raster data model shared by every stage of the pipeline.
//!
//! All grids are stored row-major. Multi-band rasters are band-sequential:
//! band `b` occupies `data[b * width * height..(b + 1) * width * height]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// North-up affine transform: pixel `(col, row)` has its upper-left corner at
/// `(origin_x + col * pixel_size, origin_y - row * pixel_size)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

impl Default for GeoTransform {
    fn default() -> Self {
        Self {
            origin_x: 0.0,
            origin_y: 0.0,
            pixel_size: 1.0,
        }
    }
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size: f64) -> Result<Self> {
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pixel_size must be > 0, got {pixel_size}"
            )));
        }
        Ok(Self {
            origin_x,
            origin_y,
            pixel_size,
        })
    }

    /// Map coordinates of a pixel-grid vertex (corner) `(col, row)`.
    pub fn vertex_to_map(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + col * self.pixel_size,
            self.origin_y - row * self.pixel_size,
        )
    }

    /// Map coordinates of the center of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.vertex_to_map(col as f64 + 0.5, row as f64 + 0.5)
    }
}

/// Shape and placement of a raster grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub geotransform: GeoTransform,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, geotransform: GeoTransform) -> Self {
        Self {
            width,
            height,
            geotransform,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Neighbourhood used when deciding whether two pixels touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// Edge neighbours only; diagonal contact does not connect.
    #[default]
    Four,
    Eight,
}

/// Single- or multi-band grid of `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f32>,
    pub geotransform: GeoTransform,
    pub nodata: Option<f32>,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        data: Vec<f32>,
        geotransform: GeoTransform,
    ) -> Result<Self> {
        if data.len() != width * height * bands {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {width}x{height}x{bands}",
                data.len()
            )));
        }
        GeoTransform::new(
            geotransform.origin_x,
            geotransform.origin_y,
            geotransform.pixel_size,
        )?;
        Ok(Self {
            width,
            height,
            bands,
            data,
            geotransform,
            nodata: None,
        })
    }

    pub fn filled(width: usize, height: usize, bands: usize, value: f32) -> Self {
        Self {
            width,
            height,
            bands,
            data: vec![value; width * height * bands],
            geotransform: GeoTransform::default(),
            nodata: None,
        }
    }

    /// Single-band raster from row-major values.
    pub fn from_band(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(width, height, 1, data, GeoTransform::default())
    }

    /// Stack single-band rasters of equal shape into one multi-band raster.
    pub fn stack(layers: &[&Raster]) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot stack zero rasters".into()))?;
        let mut data = Vec::with_capacity(first.len() * layers.len());
        for layer in layers {
            if layer.width != first.width || layer.height != first.height {
                return Err(Error::ShapeMismatch("stacked layers differ in shape".into()));
            }
            data.extend_from_slice(&layer.data);
        }
        let mut out = Self::new(
            first.width,
            first.height,
            data.len() / first.len().max(1),
            data,
            first.geotransform,
        )?;
        out.nodata = first.nodata;
        Ok(out)
    }

    pub fn with_geotransform(mut self, geotransform: GeoTransform) -> Self {
        self.geotransform = geotransform;
        self
    }

    pub fn with_nodata(mut self, nodata: Option<f32>) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Pixels per band.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.width, self.height, self.geotransform)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn band(&self, b: usize) -> &[f32] {
        let n = self.len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f32] {
        let n = self.len();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Copy of band `b` as a single-band raster.
    pub fn band_raster(&self, b: usize) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            bands: 1,
            data: self.band(b).to_vec(),
            geotransform: self.geotransform,
            nodata: self.nodata,
        }
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[band * self.len() + row * self.width + col]
    }

    pub fn is_nodata(&self, value: f32) -> bool {
        match self.nodata {
            Some(nd) if nd.is_nan() => value.is_nan(),
            Some(nd) => value == nd,
            None => false,
        }
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }

    /// Pixels where `value >= threshold` (nodata counts as background).
    pub fn threshold(&self, band: usize, threshold: f32) -> BinaryMask {
        let bits = self
            .band(band)
            .iter()
            .map(|&v| !self.is_nodata(v) && v >= threshold)
            .collect();
        BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

/// Two-valued grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "mask length {} != {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn to_raster(&self, geotransform: GeoTransform) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            bands: 1,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            geotransform,
            nodata: None,
        }
    }
}

/// Integer grid assigning each pixel a field id; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldLabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl FieldLabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "label length {} != {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Distinct non-zero ids in increasing order.
    pub fn field_ids(&self) -> Vec<u32> {
        let mut present = vec![false; self.max_label() as usize + 1];
        for &l in &self.labels {
            present[l as usize] = true;
        }
        (1..present.len() as u32).filter(|&id| present[id as usize]).collect()
    }

    pub fn field_count(&self) -> usize {
        self.field_ids().len()
    }

    /// Pixel count per id, indexed by id (index 0 is background).
    pub fn areas(&self) -> Vec<u64> {
        let mut areas = vec![0u64; self.max_label() as usize + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    pub fn extent(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l != 0).collect(),
        }
    }

    pub fn same_shape(&self, other: &FieldLabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Renumber ids to 1..N preserving their relative order.
    pub fn relabel_dense(&mut self) -> usize {
        let ids = self.field_ids();
        if ids.is_empty() {
            return 0;
        }
        let mut lut = vec![0u32; *ids.last().unwrap() as usize + 1];
        for (i, &id) in ids.iter().enumerate() {
            lut[id as usize] = i as u32 + 1;
        }
        for l in &mut self.labels {
            *l = lut[*l as usize];
        }
        ids.len()
    }

    /// Zero out fields with fewer than `min_pixels` pixels, then renumber densely.
    pub fn remove_small(&mut self, min_pixels: usize) -> usize {
        if min_pixels > 0 {
            let areas = self.areas();
            for l in &mut self.labels {
                if (areas[*l as usize] as usize) < min_pixels {
                    *l = 0;
                }
            }
        }
        self.relabel_dense()
    }

    pub fn to_raster(&self, geotransform: GeoTransform) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            bands: 1,
            data: self.labels.iter().map(|&l| l as f32).collect(),
            geotransform,
            nodata: None,
        }
    }
}

/// Per-band `(value - mean) / std`; nodata pixels are passed through.
pub fn standardize(image: &Raster, means: &[f64], stds: &[f64]) -> Result<Raster> {
    if means.len() != image.bands() || stds.len() != image.bands() {
        return Err(Error::ShapeMismatch(format!(
            "{} bands but {} means and {} stds",
            image.bands(),
            means.len(),
            stds.len()
        )));
    }
    if let Some(b) = stds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "standard deviation of band {b} must be > 0"
        )));
    }
    let mut out = image.clone();
    for b in 0..image.bands() {
        let (mean, std) = (means[b], stds[b]);
        let nodata = image.nodata;
        for v in out.band_mut(b) {
            let is_nd = match nodata {
                Some(nd) if nd.is_nan() => v.is_nan(),
                Some(nd) => *v == nd,
                None => false,
            };
            if !is_nd {
                *v = ((*v as f64 - mean) / std) as f32;
            }
        }
    }
    Ok(out)
}
