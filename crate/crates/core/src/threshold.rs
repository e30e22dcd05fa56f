//! Threshold selection.
//!
//! The extent threshold maximizes MCC against a reference extent. Instance
//! thresholds are tuned by evaluating candidates against reference fields,
//! keeping the Pareto-optimal ones in (s_over, s_under), and picking the
//! front member closest to the s_over = s_under line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_with, ExtractOptions, MaskTriple, Method, ThresholdSet};
use crate::metrics::{ConfusionMatrix, OverlapTable};
use crate::raster::{BinaryMask, FieldLabelMap, Raster};

/// Lower and upper bound of every threshold search.
pub const SEARCH_MIN: f64 = 0.01;
pub const SEARCH_MAX: f64 = 0.99;
pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_RANDOM_BUDGET: usize = 250;

/// Placeholder distance threshold reported for the cutoff method, which
/// does not use it.
const UNUSED_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub thresholds: ThresholdSet,
    pub s_over: f64,
    pub s_under: f64,
    pub hit_rate: f64,
    pub n_fields: usize,
}

impl Candidate {
    pub fn new(thresholds: ThresholdSet, s_over: f64, s_under: f64) -> Self {
        Self {
            thresholds,
            s_over,
            s_under,
            hit_rate: 0.0,
            n_fields: 0,
        }
    }

    /// Weak Pareto dominance, both objectives maximized.
    pub fn dominates(&self, other: &Candidate) -> bool {
        self.s_over >= other.s_over
            && self.s_under >= other.s_under
            && (self.s_over > other.s_over || self.s_under > other.s_under)
    }
}

/// Candidates not dominated by any other, in input order.
pub fn pareto_front(cands: &[Candidate]) -> Vec<Candidate> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        cands[b]
            .s_over
            .total_cmp(&cands[a].s_over)
            .then(cands[b].s_under.total_cmp(&cands[a].s_under))
    });
    let mut keep = vec![false; cands.len()];
    // Best s_under among candidates with strictly larger s_over.
    let mut best_before = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let o = cands[order[i]].s_over;
        let mut j = i;
        while j < order.len() && cands[order[j]].s_over == o {
            j += 1;
        }
        let group_max = cands[order[i]].s_under;
        for &k in &order[i..j] {
            let u = cands[k].s_under;
            keep[k] = !(best_before >= u || group_max > u);
        }
        best_before = best_before.max(group_max);
        i = j;
    }
    cands
        .iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(*c))
        .collect()
}

/// Front member minimizing `|s_over - s_under|`; ties go to the larger
/// `s_over + s_under`, then to the earliest.
pub fn select_threshold(front: &[Candidate]) -> Result<Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in front {
        let better = match best {
            None => true,
            Some(b) => {
                let (gc, gb) = ((c.s_over - c.s_under).abs(), (b.s_over - b.s_under).abs());
                gc < gb || (gc == gb && c.s_over + c.s_under > b.s_over + b.s_under)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best.copied()
        .ok_or_else(|| Error::InvalidArgument("empty Pareto front".into()))
}

/// Thresholds `k / n` for `k = 1..n`, `n = round(1 / step)`.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0, 0.5)")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((1..n).map(|k| k as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtentThreshold {
    pub threshold: f64,
    pub mcc: f64,
}

/// Sweep `prob >= t` over the threshold grid and return the `t` with the
/// highest MCC against `reference` (lowest `t` on ties). Nodata pixels of
/// `prob` are ignored.
pub fn optimize_extent_threshold(
    prob: &Raster,
    reference: &BinaryMask,
    step: f64,
) -> Result<ExtentThreshold> {
    if prob.width() != reference.width() || prob.height() != reference.height() {
        return Err(Error::ShapeMismatch("probability and reference differ in shape".into()));
    }
    let grid = threshold_grid(step)?;
    let grid32: Vec<f32> = grid.iter().map(|&t| t as f32).collect();
    // hist[k][class]: pixels whose value passes exactly the first k thresholds.
    let mut hist = vec![[0u64; 2]; grid.len() + 1];
    let (mut pos, mut neg) = (0u64, 0u64);
    for (&v, &r) in prob.band(0).iter().zip(reference.bits()) {
        if prob.is_nodata(v) || v.is_nan() {
            continue;
        }
        let k = grid32.partition_point(|&t| t <= v);
        hist[k][r as usize] += 1;
        if r {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::MccUndefined);
    }
    // Predicted positive at threshold index i: pixels passing > i thresholds.
    let mut above = [0u64; 2];
    let mut mccs = vec![0.0; grid.len()];
    for i in (0..grid.len()).rev() {
        above[0] += hist[i + 1][0];
        above[1] += hist[i + 1][1];
        let cm = ConfusionMatrix::new(above[1], neg - above[0], above[0], pos - above[1]);
        mccs[i] = cm.mcc().unwrap_or(0.0);
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if mccs[i] > mccs[best] {
            best = i;
        }
    }
    Ok(ExtentThreshold {
        threshold: grid[best],
        mcc: mccs[best],
    })
}

/// How the extent threshold is treated during the instance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ExtentStrategy {
    /// Searched jointly with the other thresholds.
    Joint,
    /// Held at a given value.
    Fixed(f64),
    /// Fixed by the MCC sweep against the reference extent first.
    Mcc,
}

impl ExtentStrategy {
    /// Cutoff fixes the extent threshold by MCC and grid-searches the
    /// boundary threshold; watershed draws all three thresholds at random.
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Cutoff => ExtentStrategy::Mcc,
            Method::Watershed => ExtentStrategy::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSearch {
    pub method: Method,
    /// Random candidates drawn for the watershed method.
    pub budget: usize,
    pub seed: u64,
    pub extent: ExtentStrategy,
    /// Grid spacing for the cutoff search and the MCC sweep.
    pub grid_step: f64,
    pub extract: ExtractOptions,
}

impl InstanceSearch {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            budget: DEFAULT_RANDOM_BUDGET,
            seed: 0,
            extent: ExtentStrategy::default_for(method),
            grid_step: DEFAULT_GRID_STEP,
            extract: ExtractOptions::default(),
        }
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn extent(mut self, extent: ExtentStrategy) -> Self {
        self.extent = extent;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub method: Method,
    pub extent: Option<ExtentThreshold>,
    pub candidates: Vec<Candidate>,
    pub front: Vec<Candidate>,
    pub selected: Candidate,
}

/// Enumerate the candidate threshold sets for a search, without evaluating.
pub fn candidate_thresholds(search: &InstanceSearch, fixed_extent: Option<f64>) -> Result<Vec<ThresholdSet>> {
    match search.method {
        Method::Cutoff => {
            let grid = threshold_grid(search.grid_step)?;
            let extents = match fixed_extent {
                Some(t) => vec![t],
                None => grid.clone(),
            };
            let mut out = Vec::with_capacity(extents.len() * grid.len());
            for &te in &extents {
                for &tb in &grid {
                    out.push(ThresholdSet::new(te, tb, UNUSED_DISTANCE)?);
                }
            }
            Ok(out)
        }
        Method::Watershed => {
            if search.budget == 0 {
                return Err(Error::InvalidArgument("search budget must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            (0..search.budget)
                .map(|_| {
                    let te = match fixed_extent {
                        Some(t) => t,
                        None => rng.random_range(SEARCH_MIN..=SEARCH_MAX),
                    };
                    let tb = rng.random_range(SEARCH_MIN..=SEARCH_MAX);
                    let td = rng.random_range(SEARCH_MIN..=SEARCH_MAX);
                    ThresholdSet::new(te, tb, td)
                })
                .collect()
        }
    }
}

/// Extract with `t` and score against `reference`.
pub fn evaluate_candidate(
    masks: &MaskTriple,
    reference: &FieldLabelMap,
    t: ThresholdSet,
    method: Method,
    opts: &ExtractOptions,
) -> Result<Candidate> {
    let labels = extract_with(masks, &t, method, opts);
    let n_fields = labels.max_label() as usize;
    let (s_over, s_under, hit_rate) = OverlapTable::new(&labels, reference)?.rates();
    Ok(Candidate {
        thresholds: t,
        s_over,
        s_under,
        hit_rate,
        n_fields,
    })
}

/// Full search: candidates, Pareto front and the selected trade-off.
pub fn search_instance_thresholds(
    masks: &MaskTriple,
    reference: &FieldLabelMap,
    search: &InstanceSearch,
) -> Result<SearchOutcome> {
    if masks.width() != reference.width() || masks.height() != reference.height() {
        return Err(Error::ShapeMismatch("masks and reference differ in shape".into()));
    }
    if reference.max_label() == 0 {
        return Err(Error::InvalidArgument("reference contains no fields".into()));
    }
    let extent = match search.extent {
        ExtentStrategy::Mcc => Some(optimize_extent_threshold(
            &masks.extent,
            &reference.extent(),
            search.grid_step,
        )?),
        ExtentStrategy::Fixed(t) => {
            ThresholdSet::new(t, 0.5, 0.5)?;
            Some(ExtentThreshold {
                threshold: t,
                mcc: f64::NAN,
            })
        }
        ExtentStrategy::Joint => None,
    };
    let thresholds = candidate_thresholds(search, extent.map(|e| e.threshold))?;
    let candidates: Vec<Candidate> = thresholds
        .into_par_iter()
        .map(|t| evaluate_candidate(masks, reference, t, search.method, &search.extract))
        .collect::<Result<_>>()?;
    let viable: Vec<Candidate> = candidates.iter().copied().filter(|c| c.n_fields > 0).collect();
    if viable.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    let front = pareto_front(&viable);
    let selected = select_threshold(&front)?;
    Ok(SearchOutcome {
        method: search.method,
        extent: extent.map(|e| ExtentThreshold {
            mcc: if e.mcc.is_nan() { 0.0 } else { e.mcc },
            ..e
        }),
        candidates,
        front,
        selected,
    })
}

/// Tune instance thresholds with the default search for `method`.
pub fn optimize_instance_thresholds(
    masks: &MaskTriple,
    reference: &FieldLabelMap,
    method: Method,
    budget: usize,
    rng_seed: u64,
) -> Result<ThresholdSet> {
    let search = InstanceSearch::new(method).budget(budget).seed(rng_seed);
    Ok(search_instance_thresholds(masks, reference, &search)?
        .selected
        .thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(o: f64, u: f64) -> Candidate {
        Candidate::new(ThresholdSet::default(), o, u)
    }

    fn pairs(v: &[Candidate]) -> Vec<(f64, f64)> {
        v.iter().map(|c| (c.s_over, c.s_under)).collect()
    }

    #[test]
    fn front_examples() {
        assert_eq!(pairs(&pareto_front(&[c(0.3, 0.4)])), vec![(0.3, 0.4)]);
        let three = [c(0.9, 0.2), c(0.2, 0.9), c(0.5, 0.5)];
        assert_eq!(pareto_front(&three).len(), 3);
        assert_eq!(pairs(&pareto_front(&[c(0.9, 0.9), c(0.5, 0.5)])), vec![(0.9, 0.9)]);
        // Equal duplicates do not dominate each other.
        assert_eq!(pareto_front(&[c(0.5, 0.5), c(0.5, 0.5)]).len(), 2);
        // Same s_over, smaller s_under is dominated.
        assert_eq!(pairs(&pareto_front(&[c(0.5, 0.4), c(0.5, 0.6)])), vec![(0.5, 0.6)]);
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_threshold(&[c(0.8, 0.8)]).unwrap().s_over, 0.8);
        let s = select_threshold(&[c(0.9, 0.3), c(0.7, 0.69)]).unwrap();
        assert_eq!((s.s_over, s.s_under), (0.7, 0.69));
        let s = select_threshold(&[c(0.6, 0.6), c(0.8, 0.8)]).unwrap();
        assert_eq!((s.s_over, s.s_under), (0.8, 0.8));
        assert!(select_threshold(&[]).is_err());
    }

    #[test]
    fn grid_covers_one_to_ninety_nine_percent() {
        let g = threshold_grid(0.01).unwrap();
        assert_eq!(g.len(), 99);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[98], 0.99);
    }

    #[test]
    fn extent_exact_reference_ties_to_lowest() {
        let bits: Vec<bool> = (0..64).map(|i| i % 3 == 0).collect();
        let reference = BinaryMask::new(8, 8, bits.clone()).unwrap();
        let prob = Raster::from_band(8, 8, bits.iter().map(|&b| b as u8 as f32).collect()).unwrap();
        let r = optimize_extent_threshold(&prob, &reference, 0.01).unwrap();
        assert_eq!(r.threshold, 0.01);
        assert_eq!(r.mcc, 1.0);
    }

    #[test]
    fn extent_single_class_errors() {
        let reference = BinaryMask::zeros(4, 4);
        let prob = Raster::filled(4, 4, 1, 0.3);
        assert!(matches!(
            optimize_extent_threshold(&prob, &reference, 0.01),
            Err(Error::MccUndefined)
        ));
    }

    #[test]
    fn random_candidates_are_seeded() {
        let s = InstanceSearch::new(Method::Watershed).budget(5).seed(3);
        let a = candidate_thresholds(&s, None).unwrap();
        assert_eq!(a, candidate_thresholds(&s, None).unwrap());
        assert_ne!(a, candidate_thresholds(&s.seed(4), None).unwrap());
        assert!(a.iter().all(|t| (SEARCH_MIN..=SEARCH_MAX).contains(&t.t_boundary)));
        let fixed = candidate_thresholds(&s, Some(0.4)).unwrap();
        assert!(fixed.iter().all(|t| t.t_extent == 0.4));
        assert!(candidate_thresholds(&s.budget(0), None).is_err());
    }

    #[test]
    fn cutoff_grid_sizes() {
        let s = InstanceSearch::new(Method::Cutoff);
        assert_eq!(candidate_thresholds(&s, None).unwrap().len(), 99 * 99);
        assert_eq!(candidate_thresholds(&s, Some(0.5)).unwrap().len(), 99);
    }
}
