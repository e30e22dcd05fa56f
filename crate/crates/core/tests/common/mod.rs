//! Brute-force reference implementations used as test oracles.
#![allow(dead_code)]

pub mod pipeline;

use std::collections::{BTreeMap, VecDeque};

use fieldgrid::threshold::Candidate;
use fieldgrid::{BinaryMask, FieldLabelMap};

/// Nearest-background distance by scanning every background pixel.
pub fn brute_edt(mask: &BinaryMask) -> Vec<f32> {
    let (w, h) = (mask.width(), mask.height());
    let bg: Vec<(i64, i64)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| !mask.get(r, c))
        .map(|(r, c)| (r as i64, c as i64))
        .collect();
    let mut out = vec![0f32; w * h];
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) {
                let d2 = bg
                    .iter()
                    .map(|&(br, bc)| (br - r as i64).pow(2) + (bc - c as i64).pow(2))
                    .min()
                    .unwrap();
                out[r * w + c] = (d2 as f64).sqrt() as f32;
            }
        }
    }
    out
}

/// Per-field distance to the nearest non-field pixel (the ring just outside
/// the grid counts as non-field), normalized by the field maximum.
pub fn brute_distance_labels(labels: &FieldLabelMap) -> Vec<f32> {
    let (w, h) = (labels.width() as i64, labels.height() as i64);
    let at = |r: i64, c: i64| -> u32 {
        if r < 0 || c < 0 || r >= h || c >= w {
            0
        } else {
            labels.get(r as usize, c as usize)
        }
    };
    let mut sq = vec![0i64; (w * h) as usize];
    for r in 0..h {
        for c in 0..w {
            let id = at(r, c);
            if id == 0 {
                continue;
            }
            let mut best = i64::MAX;
            for rr in -1..=h {
                for cc in -1..=w {
                    if at(rr, cc) != id {
                        best = best.min((rr - r).pow(2) + (cc - c).pow(2));
                    }
                }
            }
            sq[(r * w + c) as usize] = best;
        }
    }
    let mut max_sq: BTreeMap<u32, i64> = BTreeMap::new();
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 {
            let m = max_sq.entry(l).or_insert(0);
            *m = (*m).max(sq[i]);
        }
    }
    labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l == 0 {
                0.0
            } else {
                ((sq[i] as f64).sqrt() / (max_sq[&l] as f64).sqrt()) as f32
            }
        })
        .collect()
}

/// Non-dominated candidates by pairwise comparison, in input order.
pub fn brute_front(cands: &[Candidate]) -> Vec<Candidate> {
    cands
        .iter()
        .filter(|c| {
            !cands.iter().any(|o| {
                o.s_over >= c.s_over
                    && o.s_under >= c.s_under
                    && (o.s_over > c.s_over || o.s_under > c.s_under)
            })
        })
        .copied()
        .collect()
}

/// Pixel sets per label, as sorted pixel indices.
pub fn pixel_sets(labels: &FieldLabelMap) -> BTreeMap<u32, Vec<usize>> {
    let mut sets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 {
            sets.entry(l).or_default().push(i);
        }
    }
    sets
}

/// True when every label's pixels form one 4-connected region.
pub fn labels_are_4_connected(labels: &FieldLabelMap) -> bool {
    let (w, h) = (labels.width(), labels.height());
    for (id, pixels) in pixel_sets(labels) {
        let mut seen = vec![false; w * h];
        let mut q = VecDeque::from([pixels[0]]);
        seen[pixels[0]] = true;
        let mut count = 0;
        while let Some(i) = q.pop_front() {
            count += 1;
            let (r, c) = (i / w, i % w);
            let mut nb = Vec::new();
            if r > 0 {
                nb.push(i - w);
            }
            if r + 1 < h {
                nb.push(i + w);
            }
            if c > 0 {
                nb.push(i - 1);
            }
            if c + 1 < w {
                nb.push(i + 1);
            }
            for n in nb {
                if !seen[n] && labels.labels()[n] == id {
                    seen[n] = true;
                    q.push_back(n);
                }
            }
        }
        if count != pixels.len() {
            return false;
        }
    }
    true
}

/// Object metrics from explicit pixel sets: per reference field the
/// intersection-weighted s_over, s_under and shift, then the
/// reference-area-weighted summary and the 50%-overlap hit rate.
pub struct BruteObject {
    pub pairs: Vec<(u32, u32, u64)>,
    pub hit_rate: f64,
    pub s_over: f64,
    pub s_under: f64,
    pub shift: f64,
}

pub fn brute_object_metrics(extracted: &FieldLabelMap, reference: &FieldLabelMap) -> BruteObject {
    let w = reference.width();
    let t_sets = pixel_sets(reference);
    let e_sets = pixel_sets(extracted);
    let centroid = |px: &[usize]| {
        let n = px.len() as f64;
        let x = px.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
        let y = px.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
        (x, y)
    };
    let mut pairs = Vec::new();
    let (mut total_area, mut so_acc, mut su_acc, mut hits) = (0.0, 0.0, 0.0, 0usize);
    let (mut shift_acc, mut shift_area) = (0.0, 0.0);
    for (&tid, tpx) in &t_sets {
        let t_area = tpx.len() as f64;
        total_area += t_area;
        let (mut inter_sum, mut so, mut su, mut sh, mut best) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
        let tc = centroid(tpx);
        for (&eid, epx) in &e_sets {
            let inter = tpx.iter().filter(|i| epx.binary_search(i).is_ok()).count();
            if inter == 0 {
                continue;
            }
            pairs.push((tid, eid, inter as u64));
            let iw = inter as f64;
            inter_sum += iw;
            so += iw * (iw / t_area);
            su += iw * (iw / epx.len() as f64);
            let ec = centroid(epx);
            sh += iw * ((tc.0 - ec.0).powi(2) + (tc.1 - ec.1).powi(2)).sqrt();
            best = best.max(iw / t_area);
        }
        if best >= 0.5 {
            hits += 1;
        }
        if inter_sum > 0.0 {
            so_acc += t_area * so / inter_sum;
            su_acc += t_area * su / inter_sum;
            shift_acc += t_area * sh / inter_sum;
            shift_area += t_area;
        }
    }
    BruteObject {
        pairs,
        hit_rate: hits as f64 / t_sets.len() as f64,
        s_over: so_acc / total_area,
        s_under: su_acc / total_area,
        shift: if shift_area > 0.0 { shift_acc / shift_area } else { 0.0 },
    }
}

/// Random label map: rectangles stamped in order, then split so every id
/// is one 4-connected region and ids are dense.
pub fn random_label_map(w: usize, h: usize, n_rects: usize, rng: &mut impl rand::Rng) -> FieldLabelMap {
    let mut l = vec![0u32; w * h];
    for id in 1..=n_rects as u32 {
        let r0 = rng.random_range(0..h);
        let c0 = rng.random_range(0..w);
        let r1 = (r0 + rng.random_range(1..=h / 2)).min(h);
        let c1 = (c0 + rng.random_range(1..=w / 2)).min(w);
        for r in r0..r1 {
            for c in c0..c1 {
                l[r * w + c] = id;
            }
        }
    }
    let m = FieldLabelMap::new(w, h, l).unwrap();
    fieldgrid::split_components(&m, fieldgrid::Connectivity::Four)
}
