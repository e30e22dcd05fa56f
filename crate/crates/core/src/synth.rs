//! Deterministic synthetic field mosaics.
//!
//! A scene is a Voronoi tessellation of seeded random sites. A subset of
//! cells become fields; the rest are background. The generator returns a
//! 4-band image, the reference field map, the reference label layers and
//! "oracle" masks (the label layers, optionally blurred to look like soft
//! network output).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::components::{connected_components, split_components};
use crate::error::{Error, Result};
use crate::extract::{grow_to_nearest, MaskTriple};
use crate::geometry::{FieldPolygon, FieldPolygonSet, Polygon, Ring};
use crate::labelgen::{rasterize_polygons, LabelSet};
use crate::raster::{BinaryMask, Connectivity, FieldLabelMap, GeoTransform, GridSpec, Raster};

pub const IMAGE_BANDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    /// Width and height in pixels.
    pub size: usize,
    /// Number of Voronoi cells that become fields.
    pub n_fields: usize,
    /// Share of all cells that are fields; the cell count is
    /// `ceil(n_fields / crop_fraction)`.
    pub crop_fraction: f64,
    /// Standard deviation of additive reflectance noise.
    pub noise_sigma: f64,
    /// Gaussian blur (pixels) applied to the oracle masks.
    pub blur_sigma: f64,
    pub rng_seed: u64,
    pub pixel_size: f64,
    pub buffer_px: usize,
    /// Rasterized fields smaller than this are returned to background.
    pub min_field_pixels: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            size: 256,
            n_fields: 40,
            crop_fraction: 0.8,
            noise_sigma: 0.02,
            blur_sigma: 1.0,
            rng_seed: 0,
            pixel_size: 10.0,
            buffer_px: 1,
            min_field_pixels: 32,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 64 {
            return Err(Error::InvalidArgument(format!("scene size {} < 64", self.size)));
        }
        if self.n_fields < 1 {
            return Err(Error::InvalidArgument("n_fields must be >= 1".into()));
        }
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "crop_fraction {} outside (0, 1]",
                self.crop_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.blur_sigma >= 0.0) {
            return Err(Error::InvalidArgument("sigmas must be >= 0".into()));
        }
        if self.buffer_px < 1 {
            return Err(Error::InvalidArgument("buffer_px must be >= 1".into()));
        }
        GeoTransform::new(0.0, 0.0, self.pixel_size)?;
        Ok(())
    }

    pub fn geotransform(&self) -> GeoTransform {
        GeoTransform {
            origin_x: 0.0,
            origin_y: self.size as f64 * self.pixel_size,
            pixel_size: self.pixel_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Raster,
    pub reference: FieldLabelMap,
    pub labels: LabelSet,
    pub oracle_masks: MaskTriple,
    /// Voronoi cells selected as fields, before rasterization.
    pub cell_polygons: FieldPolygonSet,
}

// Independent random streams derived from one seed.
const STREAM_SITES: u64 = 1;
const STREAM_CROPS: u64 = 2;
const STREAM_REFLECTANCE: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let size = spec.size;
    let gt = spec.geotransform();
    let extent_map = size as f64 * spec.pixel_size;
    let n_cells = ((spec.n_fields as f64 / spec.crop_fraction).ceil() as usize).max(spec.n_fields);

    let sites = sample_sites(n_cells, extent_map, &mut stream(spec.rng_seed, STREAM_SITES));
    let mut order: Vec<usize> = (0..n_cells).collect();
    order.shuffle(&mut stream(spec.rng_seed, STREAM_CROPS));
    let crop_cells = &order[..spec.n_fields];

    let fields = crop_cells
        .iter()
        .enumerate()
        .map(|(k, &cell)| {
            let ring = voronoi_cell(&sites, cell, extent_map);
            FieldPolygon::new(k as u32 + 1, Polygon::new(Ring::new(ring), vec![]))
        })
        .collect();
    let cell_polygons = FieldPolygonSet::new(fields)?;
    let grid = GridSpec::new(size, size, gt);
    let rasterized = rasterize_polygons(&cell_polygons, &grid);
    let mut reference = split_components(&rasterized, Connectivity::Four);
    reference.remove_small(spec.min_field_pixels);

    let mut labels = LabelSet::from_labels(&reference, spec.buffer_px);
    labels.distance.geotransform = gt;
    let image = render_image(spec, &sites, &reference, gt);
    let oracle_masks = oracle_masks(&labels, spec.blur_sigma, gt)?;
    Ok(Scene {
        image,
        reference,
        labels,
        oracle_masks,
        cell_polygons,
    })
}

/// Dart throwing with a minimum spacing that relaxes if sites do not fit.
fn sample_sites(n: usize, extent: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut min_dist = 0.7 * extent / (n as f64).sqrt();
    let mut sites: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut misses = 0;
    while sites.len() < n {
        let p = (rng.random::<f64>() * extent, rng.random::<f64>() * extent);
        let ok = sites
            .iter()
            .all(|s| (s.0 - p.0).powi(2) + (s.1 - p.1).powi(2) >= min_dist * min_dist);
        if ok {
            sites.push(p);
            misses = 0;
        } else {
            misses += 1;
            if misses > 200 {
                min_dist *= 0.9;
                misses = 0;
            }
        }
    }
    sites
}

/// Voronoi cell of `sites[i]` clipped to `[0, extent]^2`, counter-clockwise.
fn voronoi_cell(sites: &[(f64, f64)], i: usize, extent: f64) -> Vec<(f64, f64)> {
    let mut poly = vec![(0.0, 0.0), (extent, 0.0), (extent, extent), (0.0, extent)];
    let (px, py) = sites[i];
    for (j, &(qx, qy)) in sites.iter().enumerate() {
        if j == i {
            continue;
        }
        // Keep points x with (x - m) . (q - p) <= 0, m the midpoint.
        let (nx, ny) = (qx - px, qy - py);
        let (mx, my) = ((px + qx) / 2.0, (py + qy) / 2.0);
        let side = |v: (f64, f64)| (v.0 - mx) * nx + (v.1 - my) * ny;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for k in 0..poly.len() {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            let (sa, sb) = (side(a), side(b));
            if sa <= 0.0 {
                next.push(a);
            }
            if (sa <= 0.0) != (sb <= 0.0) {
                let t = sa / (sa - sb);
                next.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        poly = next;
        if poly.is_empty() {
            break;
        }
    }
    poly
}

fn render_image(
    spec: &SceneSpec,
    sites: &[(f64, f64)],
    reference: &FieldLabelMap,
    gt: GeoTransform,
) -> Raster {
    let size = spec.size;
    let n_fields = reference.max_label() as usize;
    let mut rng = stream(spec.rng_seed, STREAM_REFLECTANCE);
    let mut draw = |n: usize| -> Vec<[f32; IMAGE_BANDS]> {
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.05f32..0.45)))
            .collect()
    };
    let field_refl = draw(n_fields + 1);
    let cell_refl = draw(sites.len());

    let mut noise_rng = stream(spec.rng_seed, STREAM_NOISE);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("sigma >= 0");
    let n = size * size;
    let mut data = vec![0f32; n * IMAGE_BANDS];
    for r in 0..size {
        for c in 0..size {
            let i = r * size + c;
            let id = reference.labels()[i] as usize;
            let base = if id != 0 {
                field_refl[id]
            } else {
                let (x, y) = gt.pixel_center(c, r);
                cell_refl[nearest_site(sites, x, y)]
            };
            for b in 0..IMAGE_BANDS {
                let eps = if spec.noise_sigma > 0.0 {
                    noise.sample(&mut noise_rng) as f32
                } else {
                    0.0
                };
                data[b * n + i] = base[b] + eps;
            }
        }
    }
    Raster::new(size, size, IMAGE_BANDS, data, gt).expect("shape")
}

fn nearest_site(sites: &[(f64, f64)], x: f64, y: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, s) in sites.iter().enumerate() {
        let d = (s.0 - x).powi(2) + (s.1 - y).powi(2);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

fn oracle_masks(labels: &LabelSet, blur_sigma: f64, gt: GeoTransform) -> Result<MaskTriple> {
    let layer = |r: Raster| -> Raster {
        let mut r = gaussian_blur(&r, blur_sigma);
        for v in r.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        r.with_geotransform(gt)
    };
    MaskTriple::new(
        layer(labels.extent.to_raster(gt)),
        layer(labels.boundary.to_raster(gt)),
        layer(labels.distance.clone()),
    )
}

/// Separable Gaussian blur with edge replication; `sigma <= 0` is a copy.
pub fn gaussian_blur(r: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return r.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let (w, h) = (r.width() as isize, r.height() as isize);
    let mut out = r.clone();
    for b in 0..r.bands() {
        let src = r.band(b);
        let mut tmp = vec![0f64; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - radius).clamp(0, w - 1);
                    acc += kv * src[(y * w + xx) as usize] as f64;
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let dst = out.band_mut(b);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - radius).clamp(0, h - 1);
                    acc += kv * tmp[(yy * w + x) as usize];
                }
                dst[(y * w + x) as usize] = acc as f32;
            }
        }
    }
    out
}

/// Outcome of [`degrade_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct Degraded {
    pub masks: MaskTriple,
    /// Field regions identified in the input.
    pub regions: usize,
    /// Regions zeroed out.
    pub dropped: usize,
}

const STREAM_DROPOUT: u64 = 1;
const STREAM_MASK_NOISE: u64 = 2;

/// Simulate a poor acquisition date: zero out whole field regions with
/// probability `dropout_rate`, then add clipped Gaussian noise.
pub fn degrade(masks: &MaskTriple, dropout_rate: f64, noise_sigma: f64, rng_seed: u64) -> Result<MaskTriple> {
    Ok(degrade_with_report(masks, dropout_rate, noise_sigma, rng_seed)?.masks)
}

/// [`degrade`] that also reports how many regions were dropped.
///
/// Field regions are the 4-connected cores `extent >= 0.5 && boundary <
/// 0.5`, each grown to every pixel where any mask is non-zero and that the
/// core reaches first.
pub fn degrade_with_report(
    masks: &MaskTriple,
    dropout_rate: f64,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<Degraded> {
    if !(0.0..=1.0).contains(&dropout_rate) {
        return Err(Error::InvalidArgument(format!("dropout_rate {dropout_rate} outside [0, 1]")));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
    }
    let (w, h) = (masks.width(), masks.height());
    let (e, b, d) = (masks.extent.band(0), masks.boundary.band(0), masks.distance.band(0));
    let core = BinaryMask::new(w, h, (0..w * h).map(|i| e[i] >= 0.5 && b[i] < 0.5).collect())?;
    let mut regions = connected_components(&core, Connectivity::Four);
    let support = BinaryMask::new(w, h, (0..w * h).map(|i| e[i] > 0.0 || b[i] > 0.0 || d[i] > 0.0).collect())?;
    grow_to_nearest(&mut regions, &support);
    let n_regions = regions.max_label() as usize;

    let mut rng = stream(rng_seed, STREAM_DROPOUT);
    let drop: Vec<bool> = std::iter::once(false)
        .chain((0..n_regions).map(|_| rng.random::<f64>() < dropout_rate))
        .collect();
    let mut out = masks.clone();
    for layer in out.layers_mut() {
        for (v, &reg) in layer.data_mut().iter_mut().zip(regions.labels()) {
            if drop[reg as usize] {
                *v = 0.0;
            }
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = stream(rng_seed, STREAM_MASK_NOISE);
        let noise = Normal::new(0.0, noise_sigma).expect("sigma > 0");
        for layer in out.layers_mut() {
            for v in layer.data_mut() {
                *v = (*v + noise.sample(&mut rng) as f32).clamp(0.0, 1.0);
            }
        }
    }
    Ok(Degraded {
        masks: out,
        regions: n_regions,
        dropped: drop.iter().filter(|&&x| x).count(),
    })
}
