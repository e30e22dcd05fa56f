//! Label map to polygons by tracing pixel-edge outlines.

use crate::components::split_components;
use crate::geometry::{FieldPolygon, FieldPolygonSet, Polygon, Ring};
use crate::raster::{Connectivity, FieldLabelMap, GeoTransform};

// Directions in map orientation (y up). Turning left is +1 mod 4.
const EAST: u8 = 0;
const NORTH: u8 = 1;
const WEST: u8 = 2;
const SOUTH: u8 = 3;

/// One polygon part per 4-connected piece of each label, tracing pixel
/// outlines in map coordinates. Exteriors are counter-clockwise, holes
/// clockwise, collinear vertices removed. Rasterizing the result at pixel
/// centers reproduces `labels`.
pub fn vectorize(labels: &FieldLabelMap, geotransform: &GeoTransform) -> FieldPolygonSet {
    let (w, h) = (labels.width(), labels.height());
    let pieces = split_components(labels, Connectivity::Four);
    let comp = pieces.labels();
    let l = labels.labels();
    let n_comp = pieces.max_label() as usize;

    // Directed edge table: for vertex v (grid (vx, vy), vy down) and
    // direction d, the component whose outline runs along it (0 = none).
    let vw = w + 1;
    let mut edges = vec![[0u32; 4]; vw * (h + 1)];
    let vid = |vx: usize, vy: usize| vy * vw + vx;
    for r in 0..h {
        for c in 0..w {
            let id = l[r * w + c];
            if id == 0 {
                continue;
            }
            let k = comp[r * w + c];
            let differs = |rr: isize, cc: isize| {
                rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize
                    || l[rr as usize * w + cc as usize] != id
            };
            let (ri, ci) = (r as isize, c as isize);
            // Interior kept on the left of each edge.
            if differs(ri + 1, ci) {
                edges[vid(c, r + 1)][EAST as usize] = k;
            }
            if differs(ri, ci + 1) {
                edges[vid(c + 1, r + 1)][NORTH as usize] = k;
            }
            if differs(ri - 1, ci) {
                edges[vid(c + 1, r)][WEST as usize] = k;
            }
            if differs(ri, ci - 1) {
                edges[vid(c, r)][SOUTH as usize] = k;
            }
        }
    }

    let step = |vx: usize, vy: usize, d: u8| -> (usize, usize) {
        match d {
            EAST => (vx + 1, vy),
            NORTH => (vx, vy - 1),
            WEST => (vx - 1, vy),
            _ => (vx, vy + 1),
        }
    };

    let mut exteriors: Vec<Option<Ring>> = vec![None; n_comp + 1];
    let mut holes: Vec<Vec<Ring>> = vec![Vec::new(); n_comp + 1];
    let mut comp_label = vec![0u32; n_comp + 1];
    for (i, &k) in comp.iter().enumerate() {
        comp_label[k as usize] = l[i];
    }

    for vy in 0..=h {
        for vx in 0..=w {
            for d0 in 0..4u8 {
                let k = edges[vid(vx, vy)][d0 as usize];
                if k == 0 {
                    continue;
                }
                // Trace a ring starting along this edge.
                let mut verts: Vec<(usize, usize)> = Vec::new();
                let (mut x, mut y, mut d) = (vx, vy, d0);
                loop {
                    edges[vid(x, y)][d as usize] = 0;
                    verts.push((x, y));
                    let (nx, ny) = step(x, y, d);
                    // Prefer left turn, then straight, then right: at a
                    // diagonal pinch this keeps 4-connected pieces apart.
                    let next = [(d + 1) % 4, d, (d + 3) % 4]
                        .into_iter()
                        .find(|&nd| edges[vid(nx, ny)][nd as usize] == k);
                    x = nx;
                    y = ny;
                    match next {
                        Some(nd) => d = nd,
                        None => break,
                    }
                }
                let ring = Ring::new(simplify(&verts, geotransform));
                if ring.is_ccw() {
                    exteriors[k as usize] = Some(ring);
                } else {
                    holes[k as usize].push(ring);
                }
            }
        }
    }

    let mut by_label: std::collections::BTreeMap<u32, Vec<Polygon>> = Default::default();
    for k in 1..=n_comp {
        if let Some(ext) = exteriors[k].take() {
            by_label
                .entry(comp_label[k])
                .or_default()
                .push(Polygon::new(ext, std::mem::take(&mut holes[k])));
        }
    }
    let fields = by_label
        .into_iter()
        .map(|(id, parts)| FieldPolygon { id, parts })
        .collect();
    FieldPolygonSet::new(fields).expect("ids come from a label map")
}

/// Drop vertices where the outline continues straight, then map to
/// geographic coordinates.
fn simplify(verts: &[(usize, usize)], gt: &GeoTransform) -> Vec<(f64, f64)> {
    let n = verts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (px, py) = verts[(i + n - 1) % n];
        let (x, y) = verts[i];
        let (nx, ny) = verts[(i + 1) % n];
        let collinear = (x as isize - px as isize) * (ny as isize - y as isize)
            == (y as isize - py as isize) * (nx as isize - x as isize);
        if !collinear {
            out.push(gt.vertex_to_map(x as f64, y as f64));
        }
    }
    out
}
