//! Connected-component labelling.

use crate::raster::{BinaryMask, Connectivity, FieldLabelMap};

/// Label foreground regions of `mask`.
///
/// Components are numbered 1..N in raster order of their first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> FieldLabelMap {
    let (w, h) = (mask.width(), mask.height());
    let labels = flood_label(w, h, connectivity, |i| mask.bits()[i], |a, b| {
        mask.bits()[a] == mask.bits()[b]
    });
    FieldLabelMap::new(w, h, labels).expect("shape preserved")
}

/// Split every non-zero id of `labels` into its connected pieces.
///
/// Two pixels share an output id iff they carry the same input id and are
/// connected through pixels of that id.
pub fn split_components(labels: &FieldLabelMap, connectivity: Connectivity) -> FieldLabelMap {
    let (w, h) = (labels.width(), labels.height());
    let l = labels.labels();
    let out = flood_label(w, h, connectivity, |i| l[i] != 0, |a, b| l[a] == l[b]);
    FieldLabelMap::new(w, h, out).expect("shape preserved")
}

// Two-pass union-find labelling; ids follow raster order of each
// component's first pixel.
fn flood_label(
    w: usize,
    h: usize,
    connectivity: Connectivity,
    is_fg: impl Fn(usize) -> bool,
    same: impl Fn(usize, usize) -> bool,
) -> Vec<u32> {
    const NONE: u32 = u32::MAX;
    let n = w * h;
    let mut parent: Vec<u32> = vec![NONE; n];
    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            let p = parent[i as usize];
            parent[i as usize] = parent[p as usize];
            i = p;
        }
        i
    }
    let eight = connectivity == Connectivity::Eight;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !is_fg(i) {
                continue;
            }
            parent[i] = i as u32;
            let mut link = |j: usize| {
                if parent[j] != NONE && same(i, j) {
                    let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                    if a != b {
                        // Smaller index as root keeps the first pixel on top.
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        parent[hi as usize] = lo;
                    }
                }
            };
            if c > 0 {
                link(i - 1);
            }
            if r > 0 {
                link(i - w);
                if eight {
                    if c > 0 {
                        link(i - w - 1);
                    }
                    if c + 1 < w {
                        link(i - w + 1);
                    }
                }
            }
        }
    }
    let mut out = vec![0u32; n];
    let mut next = 0u32;
    for i in 0..n {
        if parent[i] == NONE {
            continue;
        }
        let root = find(&mut parent, i as u32) as usize;
        if root == i {
            next += 1;
            out[i] = next;
        } else {
            out[i] = out[root];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_background_has_no_components() {
        let m = BinaryMask::zeros(8, 8);
        let l = connected_components(&m, Connectivity::Four);
        assert_eq!(l.field_count(), 0);
        assert!(l.labels().iter().all(|&v| v == 0));
    }

    #[test]
    fn two_squares_split_by_zero_column() {
        let m = BinaryMask::from_fn(7, 3, |_, c| c != 3);
        let l = connected_components(&m, Connectivity::Four);
        assert_eq!(l.field_count(), 2);
        assert_eq!(l.get(0, 0), 1);
        assert_eq!(l.get(2, 6), 2);
    }

    #[test]
    fn diagonal_chain_depends_on_connectivity() {
        let m = BinaryMask::from_fn(8, 8, |r, c| r == c);
        assert_eq!(connected_components(&m, Connectivity::Four).field_count(), 8);
        assert_eq!(connected_components(&m, Connectivity::Eight).field_count(), 1);
    }

    #[test]
    fn split_keeps_distinct_ids_apart() {
        // Two different ids touching: stay separate; one id in two pieces: split.
        let l = FieldLabelMap::new(5, 1, vec![1, 2, 0, 1, 1]).unwrap();
        let s = split_components(&l, Connectivity::Four);
        assert_eq!(s.labels(), &[1, 2, 0, 3, 3]);
    }
}
