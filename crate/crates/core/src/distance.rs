//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
//! Huttenlocher): one pass down the columns, one along the rows. Squared
//! distances are integers held in `f64`, so results are exact.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Raster};

/// Distance (in pixels) from every foreground pixel to the nearest
/// background pixel. Background pixels hold 0.
pub fn euclidean_distance_transform(mask: &BinaryMask) -> Result<Raster> {
    let (w, h) = (mask.width(), mask.height());
    let seeds: Vec<bool> = mask.bits().iter().map(|&b| !b).collect();
    if !mask.is_empty() && !seeds.iter().any(|&s| s) {
        return Err(Error::NoBackgroundReference);
    }
    let sq = squared_distance_to_seeds(&seeds, w, h);
    let data = sq.iter().map(|&d| d.sqrt() as f32).collect();
    Raster::from_band(w, h, data)
}

/// Squared Euclidean distance from each pixel to the nearest `true` pixel of
/// `seeds`. Pixels with no seed anywhere get a value larger than any
/// in-grid distance.
pub(crate) fn squared_distance_to_seeds(seeds: &[bool], w: usize, h: usize) -> Vec<f64> {
    let far = unreachable_value(w, h);
    let mut grid: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { far }).collect();
    let n = w.max(h);
    let mut scratch = Envelope::with_capacity(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    for c in 0..w {
        for r in 0..h {
            line[r] = grid[r * w + c];
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for r in 0..h {
            grid[r * w + c] = out[r];
        }
    }
    for r in 0..h {
        let row = &mut grid[r * w..(r + 1) * w];
        line[..w].copy_from_slice(row);
        scratch.transform(&line[..w], row);
    }
    grid
}

fn unreachable_value(w: usize, h: usize) -> f64 {
    let d = (w + h + 1) as f64;
    2.0 * d * d
}

struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertices: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// 1-D squared distance transform of sampled function `f`.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        if n == 0 {
            return;
        }
        let v = &mut self.vertices;
        let z = &mut self.bounds;
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..n {
            let fq = f[q] + (q * q) as f64;
            let intersect = |p: usize| (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            let mut s = intersect(v[k]);
            // z[0] is -inf, so k never underflows.
            while s <= z[k] {
                k -= 1;
                s = intersect(v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let p = v[k];
            let d = q as f64 - p as f64;
            *o = d * d + f[p];
        }
    }
}
