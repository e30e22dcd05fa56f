//! Pixel- and object-based accuracy metrics and the paired Wilcoxon
//! signed-rank test.
//!
//! Over- and undersegmentation are reported in accuracy orientation:
//! `|T ∩ E| / |T|` and `|T ∩ E| / |E|`, so 1 means perfect. The raw error
//! rates are `1 -` these values. The eccentricity factor is likewise
//! `1 - |ecc(T) - ecc(E)|`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, FieldLabelMap};
use crate::region::{all_region_stats, RegionStats};

/// Fraction of a reference field an extracted field must cover for the
/// reference field to count as detected.
pub const HIT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    /// Tally `pred` against `reference`, skipping pixels where `valid` is false.
    pub fn from_masks(
        pred: &BinaryMask,
        reference: &BinaryMask,
        valid: Option<&BinaryMask>,
    ) -> Result<Self> {
        if pred.width() != reference.width() || pred.height() != reference.height() {
            return Err(Error::ShapeMismatch("prediction and reference differ in shape".into()));
        }
        if let Some(v) = valid {
            if v.len() != pred.len() {
                return Err(Error::ShapeMismatch("validity mask differs in shape".into()));
            }
        }
        let mut cm = ConfusionMatrix::default();
        for (i, (&p, &r)) in pred.bits().iter().zip(reference.bits()).enumerate() {
            if valid.is_some_and(|v| !v.bits()[i]) {
                continue;
            }
            match (p, r) {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (true, false) => cm.fp += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn overall_accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    /// Matthews correlation coefficient; `None` when a marginal is empty.
    pub fn mcc(&self) -> Option<f64> {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let den = ((tp + fn_) * (tp + fp) * (tn + fp) * (tn + fn_)).sqrt();
        (den > 0.0).then(|| (tp * tn - fp * fn_) / den)
    }

    pub fn f_positive(&self) -> f64 {
        ratio(2.0 * self.tp as f64, (2 * self.tp + self.fp + self.fn_) as f64)
    }

    pub fn f_negative(&self) -> f64 {
        ratio(2.0 * self.tn as f64, (2 * self.tn + self.fp + self.fn_) as f64)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMetrics {
    pub oa: f64,
    pub mcc: f64,
    /// Set when the MCC denominator is zero; `mcc` is then reported as 0.
    pub mcc_undefined: bool,
    pub f_pos: f64,
    pub f_neg: f64,
    pub confusion: ConfusionMatrix,
}

impl From<ConfusionMatrix> for PixelMetrics {
    fn from(cm: ConfusionMatrix) -> Self {
        let mcc = cm.mcc();
        PixelMetrics {
            oa: cm.overall_accuracy(),
            mcc: mcc.unwrap_or(0.0),
            mcc_undefined: mcc.is_none(),
            f_pos: cm.f_positive(),
            f_neg: cm.f_negative(),
            confusion: cm,
        }
    }
}

pub fn pixel_metrics(pred: &BinaryMask, reference: &BinaryMask) -> Result<PixelMetrics> {
    pixel_metrics_masked(pred, reference, None)
}

pub fn pixel_metrics_masked(
    pred: &BinaryMask,
    reference: &BinaryMask,
    valid: Option<&BinaryMask>,
) -> Result<PixelMetrics> {
    Ok(ConfusionMatrix::from_masks(pred, reference, valid)?.into())
}

/// Metrics for one intersecting (reference, extracted) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub reference_id: u32,
    pub extracted_id: u32,
    pub intersection: u64,
    pub s_over: f64,
    pub s_under: f64,
    pub eccentricity_factor: f64,
    pub location_shift: f64,
}

/// Per-reference-field aggregates, weighted by intersection area across the
/// extracted fields it overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFieldMetrics {
    pub reference_id: u32,
    pub area: u64,
    pub matches: usize,
    /// Largest `|T ∩ E| / |T|` over extracted fields.
    pub best_overlap: f64,
    pub detected: bool,
    pub s_over: f64,
    pub s_under: f64,
    pub eccentricity_factor: Option<f64>,
    pub location_shift: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub n_reference: usize,
    pub n_extracted: usize,
    pub n_detected: usize,
    pub hit_rate: f64,
    /// Reference-area-weighted mean; undetected fields (no overlap) count as 0.
    pub s_over: f64,
    pub s_under: f64,
    /// Reference-area-weighted mean over fields with at least one match.
    pub eccentricity_factor: f64,
    pub location_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub pairs: Vec<PairMetrics>,
    pub fields: Vec<ReferenceFieldMetrics>,
    pub summary: ObjectSummary,
}

/// Pixel-count overlap of two label maps.
pub(crate) struct OverlapTable {
    pub ref_area: Vec<u64>,
    pub ext_area: Vec<u64>,
    /// `(reference_id, extracted_id, count)` with both ids non-zero,
    /// sorted by reference then extracted id.
    pub pairs: Vec<(u32, u32, u64)>,
}

impl OverlapTable {
    pub fn new(extracted: &FieldLabelMap, reference: &FieldLabelMap) -> Result<Self> {
        if !extracted.same_shape(reference) {
            return Err(Error::ShapeMismatch("extracted and reference grids differ".into()));
        }
        let ref_area = reference.areas();
        let ext_area = extracted.areas();
        let (nt, ne) = (ref_area.len(), ext_area.len());
        let mut pairs = Vec::new();
        if nt.saturating_mul(ne) <= 1 << 22 {
            let mut dense = vec![0u64; nt * ne];
            for (&t, &e) in reference.labels().iter().zip(extracted.labels()) {
                if t != 0 && e != 0 {
                    dense[t as usize * ne + e as usize] += 1;
                }
            }
            for t in 1..nt {
                for e in 1..ne {
                    let c = dense[t * ne + e];
                    if c > 0 {
                        pairs.push((t as u32, e as u32, c));
                    }
                }
            }
        } else {
            let mut map: HashMap<(u32, u32), u64> = HashMap::new();
            for (&t, &e) in reference.labels().iter().zip(extracted.labels()) {
                if t != 0 && e != 0 {
                    *map.entry((t, e)).or_default() += 1;
                }
            }
            pairs = map.into_iter().map(|((t, e), c)| (t, e, c)).collect();
            pairs.sort_unstable();
        }
        Ok(Self {
            ref_area,
            ext_area,
            pairs,
        })
    }

    /// Area-weighted `(s_over, s_under, hit_rate)` without shape metrics.
    ///
    /// Matches `object_metrics(..).summary` for those three values.
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.ref_area.len();
        let mut inter = vec![0u64; n];
        let mut best = vec![0u64; n];
        let mut over = vec![0.0; n];
        let mut under = vec![0.0; n];
        for &(t, e, c) in &self.pairs {
            let (t, cf) = (t as usize, c as f64);
            // Intersection-weighted sums of c/|T| and c/|E|.
            over[t] += cf * cf / self.ref_area[t] as f64;
            under[t] += cf * cf / self.ext_area[e as usize] as f64;
            inter[t] += c;
            best[t] = best[t].max(c);
        }
        let (mut over_sum, mut under_sum, mut total_area) = (0.0, 0.0, 0.0);
        let (mut hits, mut n_ref) = (0usize, 0usize);
        for t in 1..n {
            let area = self.ref_area[t];
            if area == 0 {
                continue;
            }
            n_ref += 1;
            total_area += area as f64;
            if inter[t] > 0 {
                let w = area as f64 / inter[t] as f64;
                over_sum += w * over[t];
                under_sum += w * under[t];
            }
            if best[t] as f64 >= HIT_OVERLAP * area as f64 {
                hits += 1;
            }
        }
        if n_ref == 0 {
            return (0.0, 0.0, 0.0);
        }
        (
            over_sum / total_area,
            under_sum / total_area,
            hits as f64 / n_ref as f64,
        )
    }
}

/// Compare extracted fields with reference fields on the same grid.
pub fn object_metrics(extracted: &FieldLabelMap, reference: &FieldLabelMap) -> Result<ObjectReport> {
    let table = OverlapTable::new(extracted, reference)?;
    let n_reference = table.ref_area.iter().skip(1).filter(|&&a| a > 0).count();
    if n_reference == 0 {
        return Err(Error::InvalidArgument("reference contains no fields".into()));
    }
    let n_extracted = table.ext_area.iter().skip(1).filter(|&&a| a > 0).count();
    let ref_stats = all_region_stats(reference);
    let ext_stats = all_region_stats(extracted);

    let pairs: Vec<PairMetrics> = table
        .pairs
        .iter()
        .map(|&(t, e, c)| {
            let ts: &RegionStats = ref_stats[t as usize].as_ref().expect("present");
            let es: &RegionStats = ext_stats[e as usize].as_ref().expect("present");
            let (dx, dy) = (ts.centroid.0 - es.centroid.0, ts.centroid.1 - es.centroid.1);
            PairMetrics {
                reference_id: t,
                extracted_id: e,
                intersection: c,
                s_over: c as f64 / ts.area as f64,
                s_under: c as f64 / es.area as f64,
                eccentricity_factor: 1.0 - (ts.eccentricity - es.eccentricity).abs(),
                location_shift: (dx * dx + dy * dy).sqrt(),
            }
        })
        .collect();

    let mut fields = Vec::with_capacity(n_reference);
    let mut i = 0;
    for (t, stats) in ref_stats.iter().enumerate() {
        let Some(stats) = stats else { continue };
        let start = i;
        while i < pairs.len() && pairs[i].reference_id == t as u32 {
            i += 1;
        }
        let group = &pairs[start..i];
        let weight: f64 = group.iter().map(|p| p.intersection as f64).sum();
        let wmean = |f: fn(&PairMetrics) -> f64| -> f64 {
            group.iter().map(|p| p.intersection as f64 * f(p)).sum::<f64>() / weight
        };
        let best_overlap = group.iter().map(|p| p.s_over).fold(0.0, f64::max);
        let matched = !group.is_empty();
        fields.push(ReferenceFieldMetrics {
            reference_id: t as u32,
            area: stats.area,
            matches: group.len(),
            best_overlap,
            detected: best_overlap >= HIT_OVERLAP,
            s_over: if matched { wmean(|p| p.s_over) } else { 0.0 },
            s_under: if matched { wmean(|p| p.s_under) } else { 0.0 },
            eccentricity_factor: matched.then(|| wmean(|p| p.eccentricity_factor)),
            location_shift: matched.then(|| wmean(|p| p.location_shift)),
        });
    }

    let total_area: f64 = fields.iter().map(|f| f.area as f64).sum();
    let matched_area: f64 = fields
        .iter()
        .filter(|f| f.matches > 0)
        .map(|f| f.area as f64)
        .sum();
    let area_mean = |f: &dyn Fn(&ReferenceFieldMetrics) -> f64| -> f64 {
        fields.iter().map(|x| x.area as f64 * f(x)).sum::<f64>() / total_area
    };
    let matched_mean = |f: &dyn Fn(&ReferenceFieldMetrics) -> Option<f64>| -> f64 {
        if matched_area == 0.0 {
            return 0.0;
        }
        fields
            .iter()
            .filter_map(|x| f(x).map(|v| x.area as f64 * v))
            .sum::<f64>()
            / matched_area
    };
    let n_detected = fields.iter().filter(|f| f.detected).count();
    let summary = ObjectSummary {
        n_reference,
        n_extracted,
        n_detected,
        hit_rate: n_detected as f64 / n_reference as f64,
        s_over: area_mean(&|f| f.s_over),
        s_under: area_mean(&|f| f.s_under),
        eccentricity_factor: matched_mean(&|f| f.eccentricity_factor),
        location_shift: matched_mean(&|f| f.location_shift),
    };
    Ok(ObjectReport {
        pairs,
        fields,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs remaining after dropping zero differences.
    pub n: usize,
    pub p_two_sided: f64,
    pub method: PValueMethod,
}

/// Largest sample size for which the null distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 50;
const WILCOXON_MIN_N: usize = 6;

/// Paired Wilcoxon signed-rank test of `a - b`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. For
/// `n <= 50` the p-value comes from the exact (tie-conditional) null
/// distribution; above that from the normal approximation with tie and
/// continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite difference".into()));
    }
    let n = diffs.len();
    if n < WILCOXON_MIN_N {
        return Err(Error::InvalidArgument(format!(
            "need at least {WILCOXON_MIN_N} non-zero differences, got {n}"
        )));
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    // Doubled average ranks stay integral.
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64; // 2 * mean of ranks i+1..=j+1
        for r in &mut ranks2[i..=j] {
            *r = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_minus2 = total2 - w_plus2;
    let w2 = w_plus2.min(w_minus2);

    let (p, method) = if n <= WILCOXON_EXACT_MAX_N {
        // counts[s] = number of sign assignments with doubled W+ = s.
        let mut counts = vec![0f64; total2 as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks2 {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / all;
        ((2.0 * lower).min(1.0), PValueMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = ((w2 as f64 / 2.0 - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        ((2.0 * normal.cdf(-z.abs())).min(1.0), PValueMethod::Normal)
    };
    Ok(WilcoxonResult {
        statistic: w2 as f64 / 2.0,
        w_plus: w_plus2 as f64 / 2.0,
        w_minus: w_minus2 as f64 / 2.0,
        n,
        p_two_sided: p,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_hand_values() {
        let cm = ConfusionMatrix::new(40, 40, 10, 10);
        let m = PixelMetrics::from(cm);
        assert_eq!(m.oa, 0.8);
        assert!((m.mcc - 0.6).abs() < 1e-15);
        assert!((m.f_pos - 0.8).abs() < 1e-15);
        assert!(!m.mcc_undefined);
    }

    #[test]
    fn perfect_and_inverted() {
        let r = BinaryMask::from_fn(6, 6, |r, c| (r + c) % 3 == 0);
        let same = pixel_metrics(&r, &r).unwrap();
        assert_eq!((same.oa, same.mcc, same.f_pos, same.f_neg), (1.0, 1.0, 1.0, 1.0));
        let inv = pixel_metrics(&r.not(), &r).unwrap();
        assert_eq!(inv.oa, 0.0);
        assert_eq!(inv.mcc, -1.0);
    }

    #[test]
    fn mcc_zero_denominator_flags() {
        let all = BinaryMask::from_fn(3, 3, |_, _| true);
        let m = pixel_metrics(&all, &all).unwrap();
        assert!(m.mcc_undefined);
        assert_eq!(m.mcc, 0.0);
    }

    #[test]
    fn masked_pixels_are_skipped() {
        let p = BinaryMask::new(2, 1, vec![true, true]).unwrap();
        let r = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let v = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let m = pixel_metrics_masked(&p, &r, Some(&v)).unwrap();
        assert_eq!(m.confusion, ConfusionMatrix::new(1, 0, 0, 0));
    }

    fn block_map(w: usize, h: usize, blocks: &[(u32, usize, usize, usize, usize)]) -> FieldLabelMap {
        let mut v = vec![0u32; w * h];
        for &(id, r0, r1, c0, c1) in blocks {
            for r in r0..r1 {
                for c in c0..c1 {
                    v[r * w + c] = id;
                }
            }
        }
        FieldLabelMap::new(w, h, v).unwrap()
    }

    #[test]
    fn identical_maps_are_perfect() {
        let m = block_map(20, 20, &[(1, 0, 10, 0, 10), (2, 10, 20, 5, 15)]);
        let rep = object_metrics(&m, &m).unwrap();
        let s = rep.summary;
        assert_eq!((s.s_over, s.s_under, s.hit_rate), (1.0, 1.0, 1.0));
        assert_eq!((s.eccentricity_factor, s.location_shift), (1.0, 0.0));
    }

    #[test]
    fn half_coverage() {
        let t = block_map(20, 20, &[(1, 0, 10, 0, 10)]);
        let e = block_map(20, 20, &[(1, 0, 10, 0, 5)]);
        let rep = object_metrics(&e, &t).unwrap();
        assert_eq!(rep.pairs[0].s_over, 0.5);
        assert_eq!(rep.pairs[0].s_under, 1.0);
        assert!(rep.fields[0].detected);
    }

    #[test]
    fn shifted_square() {
        let t = block_map(30, 30, &[(1, 5, 15, 5, 15)]);
        let e = block_map(30, 30, &[(1, 9, 19, 8, 18)]);
        let rep = object_metrics(&e, &t).unwrap();
        assert!((rep.pairs[0].location_shift - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rates_agree_with_report() {
        let t = block_map(20, 20, &[(1, 0, 10, 0, 10), (2, 10, 20, 0, 20), (3, 0, 10, 12, 20)]);
        let e = block_map(20, 20, &[(1, 0, 15, 0, 6), (2, 0, 15, 6, 20)]);
        let rep = object_metrics(&e, &t).unwrap();
        let (o, u, h) = OverlapTable::new(&e, &t).unwrap().rates();
        assert!((o - rep.summary.s_over).abs() < 1e-12);
        assert!((u - rep.summary.s_under).abs() < 1e-12);
        assert_eq!(h, rep.summary.hit_rate);
    }

    #[test]
    fn empty_reference_errors() {
        let z = FieldLabelMap::empty(4, 4);
        assert!(object_metrics(&z, &z).is_err());
    }

    #[test]
    fn wilcoxon_degenerate_and_exact() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        assert!(matches!(wilcoxon_signed_rank(&a, &a), Err(Error::Degenerate(_))));
        let a: Vec<f64> = (0..10).map(|i| i as f64 * 1.7).collect();
        let b: Vec<f64> = a.iter().map(|x| x - 2.5).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        // All ten differences tie at 2.5: ranks 5.5 each, only the two
        // all-same-sign assignments reach W = 0.
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_two_sided - 2.0 / 1024.0).abs() < 1e-15);
        assert_eq!(r.method, PValueMethod::Exact);
    }
}
