//! Reference label construction: extent, boundary and normalized distance
//! rasters from field polygons.

use crate::distance::squared_distance_to_seeds;
use crate::geometry::FieldPolygonSet;
use crate::raster::{BinaryMask, FieldLabelMap, GridSpec, Raster};

/// The three reference layers derived from a field label map.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub extent: BinaryMask,
    pub boundary: BinaryMask,
    /// Per-field normalized distance in `[0, 1]`, 0 outside fields.
    pub distance: Raster,
}

impl LabelSet {
    pub fn from_labels(labels: &FieldLabelMap, buffer_px: usize) -> Self {
        Self {
            extent: labels.extent(),
            boundary: make_boundary_mask(labels, buffer_px),
            distance: make_distance_labels(labels),
        }
    }
}

/// Burn polygons into `grid`, sampling at pixel centers with the even-odd
/// rule over all rings of a field. Where fields overlap the lowest id wins.
pub fn rasterize_polygons(polys: &FieldPolygonSet, grid: &GridSpec) -> FieldLabelMap {
    let (w, h) = (grid.width, grid.height);
    let gt = grid.geotransform;
    let mut labels = vec![0u32; w * h];
    let mut order: Vec<_> = polys.fields().iter().collect();
    order.sort_by_key(|f| f.id);

    let mut crossings = Vec::new();
    for field in order {
        let edges: Vec<_> = field.rings().flat_map(|r| r.edges()).collect();
        if edges.is_empty() {
            continue;
        }
        let (ymin, ymax) = edges.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, e| {
            (acc.0.min(e.0 .1.min(e.1 .1)), acc.1.max(e.0 .1.max(e.1 .1)))
        });
        // Rows whose center y lies in [ymin, ymax].
        let r_lo = (((gt.origin_y - ymax) / gt.pixel_size - 0.5).floor().max(0.0)) as usize;
        let r_hi = (((gt.origin_y - ymin) / gt.pixel_size - 0.5).ceil() + 1.0).max(0.0) as usize;
        for r in r_lo..r_hi.min(h) {
            let cy = gt.origin_y - (r as f64 + 0.5) * gt.pixel_size;
            crossings.clear();
            for &((x0, y0), (x1, y1)) in &edges {
                if (y0 > cy) != (y1 > cy) {
                    crossings.push(x0 + (cy - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let (xa, xb) = (span[0], span[1]);
                let c_lo = ((xa - gt.origin_x) / gt.pixel_size - 0.5).floor().max(0.0) as usize;
                for c in c_lo..w {
                    let cx = gt.origin_x + (c as f64 + 0.5) * gt.pixel_size;
                    if cx >= xb {
                        break;
                    }
                    if cx >= xa {
                        let px = &mut labels[r * w + c];
                        if *px == 0 {
                            *px = field.id;
                        }
                    }
                }
            }
        }
    }
    FieldLabelMap::new(w, h, labels).expect("shape preserved")
}

/// Pixels within Chebyshev distance `buffer_px` of a label discontinuity:
/// a pixel is marked when some pixel in its `(2b+1)^2` window (clipped to
/// the grid) carries a different label. The grid edge is not a
/// discontinuity. `buffer_px = 1` marks one pixel on each side of an edge.
pub fn make_boundary_mask(labels: &FieldLabelMap, buffer_px: usize) -> BinaryMask {
    let (w, h) = (labels.width(), labels.height());
    let l = labels.labels();
    if buffer_px == 0 || l.is_empty() {
        return BinaryMask::zeros(w, h);
    }
    let (lo, hi) = window_min_max(l, w, h, buffer_px);
    let bits = (0..w * h).map(|i| lo[i] != l[i] || hi[i] != l[i]).collect();
    BinaryMask::new(w, h, bits).expect("shape preserved")
}

fn window_min_max(l: &[u32], w: usize, h: usize, b: usize) -> (Vec<u32>, Vec<u32>) {
    let mut rmin = vec![0u32; w * h];
    let mut rmax = vec![0u32; w * h];
    for r in 0..h {
        let row = &l[r * w..(r + 1) * w];
        for c in 0..w {
            let win = &row[c.saturating_sub(b)..(c + b + 1).min(w)];
            rmin[r * w + c] = *win.iter().min().unwrap();
            rmax[r * w + c] = *win.iter().max().unwrap();
        }
    }
    let mut lo = vec![0u32; w * h];
    let mut hi = vec![0u32; w * h];
    for r in 0..h {
        let (r0, r1) = (r.saturating_sub(b), (r + b + 1).min(h));
        for c in 0..w {
            let (mut mn, mut mx) = (u32::MAX, 0u32);
            for rr in r0..r1 {
                mn = mn.min(rmin[rr * w + c]);
                mx = mx.max(rmax[rr * w + c]);
            }
            lo[r * w + c] = mn;
            hi[r * w + c] = mx;
        }
    }
    (lo, hi)
}

/// Per-field Euclidean distance to the nearest pixel outside the field,
/// divided by that field's maximum. Pixels beyond the grid edge count as
/// outside. Background is 0 and every field's maximum is exactly 1.
pub fn make_distance_labels(labels: &FieldLabelMap) -> Raster {
    let (w, h) = (labels.width(), labels.height());
    let l = labels.labels();
    let mut out = vec![0f32; w * h];
    for (id, bbox) in field_bboxes(labels) {
        // Bounding box padded by one ring of out-of-field pixels.
        let (r0, r1, c0, c1) = bbox;
        let bw = c1 - c0 + 3;
        let bh = r1 - r0 + 3;
        let mut seeds = vec![true; bw * bh];
        for r in r0..=r1 {
            for c in c0..=c1 {
                seeds[(r - r0 + 1) * bw + (c - c0 + 1)] = l[r * w + c] != id;
            }
        }
        let sq = squared_distance_to_seeds(&seeds, bw, bh);
        let max_sq = (r0..=r1)
            .flat_map(|r| (c0..=c1).map(move |c| (r, c)))
            .filter(|&(r, c)| l[r * w + c] == id)
            .map(|(r, c)| sq[(r - r0 + 1) * bw + (c - c0 + 1)])
            .fold(0.0f64, f64::max);
        let max_d = max_sq.sqrt();
        for r in r0..=r1 {
            for c in c0..=c1 {
                if l[r * w + c] == id {
                    let d = sq[(r - r0 + 1) * bw + (c - c0 + 1)].sqrt();
                    out[r * w + c] = (d / max_d) as f32;
                }
            }
        }
    }
    Raster::from_band(w, h, out).expect("shape preserved")
}

/// `(id, (row_min, row_max, col_min, col_max))` for every non-zero id, by id.
pub(crate) fn field_bboxes(labels: &FieldLabelMap) -> Vec<(u32, (usize, usize, usize, usize))> {
    let n = labels.max_label() as usize + 1;
    let mut boxes = vec![(usize::MAX, 0usize, usize::MAX, 0usize); n];
    let w = labels.width();
    for (i, &id) in labels.labels().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (r, c) = (i / w, i % w);
        let b = &mut boxes[id as usize];
        b.0 = b.0.min(r);
        b.1 = b.1.max(r);
        b.2 = b.2.min(c);
        b.3 = b.3.max(c);
    }
    boxes
        .into_iter()
        .enumerate()
        .filter(|(id, b)| *id != 0 && b.0 != usize::MAX)
        .map(|(id, b)| (id as u32, b))
        .collect()
}
