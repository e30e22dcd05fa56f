//! Tanimoto similarity kernels for multitask segmentation training.
//!
//! `tanimoto` is a similarity in `[0, 1]` (1 = perfect agreement). The
//! corresponding loss is `1 - similarity`; `multitask_loss` follows that
//! convention. Sums use pairwise reduction so results do not depend on the
//! caller's chunking or thread count.

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Optional stabilizer added to numerator and denominator. Off (0) by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TanimotoOptions {
    pub epsilon: f64,
}

impl TanimotoOptions {
    pub const STABLE: TanimotoOptions = TanimotoOptions { epsilon: 1e-12 };
}

/// Validated prediction / label pair.
#[derive(Debug, Clone, Copy)]
pub struct ProbVector<'a> {
    p: &'a [f64],
    l: &'a [f64],
}

impl<'a> ProbVector<'a> {
    pub fn new(p: &'a [f64], l: &'a [f64]) -> Result<Self> {
        if p.len() != l.len() {
            return Err(Error::ShapeMismatch(format!(
                "prediction length {} != label length {}",
                p.len(),
                l.len()
            )));
        }
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if let Some(v) = p.iter().chain(l).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { p, l })
    }

    pub fn predictions(&self) -> &'a [f64] {
        self.p
    }

    pub fn labels(&self) -> &'a [f64] {
        self.l
    }
}

pub(crate) fn pairwise_sum(n: usize, term: &impl Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 16 {
            (lo..hi).map(term).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, term)
}

struct Sums {
    pl: f64,
    sq: f64,
}

impl Sums {
    fn of(p: &[f64], l: &[f64], complement: bool) -> Sums {
        let get = |i: usize| {
            if complement {
                (1.0 - p[i], 1.0 - l[i])
            } else {
                (p[i], l[i])
            }
        };
        Sums {
            pl: pairwise_sum(p.len(), &|i| {
                let (a, b) = get(i);
                a * b
            }),
            sq: pairwise_sum(p.len(), &|i| {
                let (a, b) = get(i);
                a * a + b * b
            }),
        }
    }

    fn ratio(&self, eps: f64) -> Result<f64> {
        let num = self.pl + eps;
        let den = self.sq - self.pl + eps;
        if den == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        Ok(num / den)
    }
}

/// `sum(p*l) / (sum(p^2 + l^2) - sum(p*l))`.
pub fn tanimoto(p: &[f64], l: &[f64]) -> Result<f64> {
    tanimoto_with(p, l, TanimotoOptions::default())
}

pub fn tanimoto_with(p: &[f64], l: &[f64], opts: TanimotoOptions) -> Result<f64> {
    let v = ProbVector::new(p, l)?;
    Sums::of(v.p, v.l, false).ratio(opts.epsilon)
}

/// Mean of `tanimoto(p, l)` and `tanimoto(1 - p, 1 - l)`.
pub fn tanimoto_dual(p: &[f64], l: &[f64]) -> Result<f64> {
    tanimoto_dual_with(p, l, TanimotoOptions::default())
}

pub fn tanimoto_dual_with(p: &[f64], l: &[f64], opts: TanimotoOptions) -> Result<f64> {
    let v = ProbVector::new(p, l)?;
    let direct = Sums::of(v.p, v.l, false).ratio(opts.epsilon)?;
    let comp = Sums::of(v.p, v.l, true).ratio(opts.epsilon)?;
    Ok((direct + comp) / 2.0)
}

/// Analytic gradient of `tanimoto_dual` with respect to each `p[i]`.
pub fn tanimoto_dual_grad(p: &[f64], l: &[f64]) -> Result<Vec<f64>> {
    tanimoto_dual_grad_with(p, l, TanimotoOptions::default())
}

pub fn tanimoto_dual_grad_with(p: &[f64], l: &[f64], opts: TanimotoOptions) -> Result<Vec<f64>> {
    let v = ProbVector::new(p, l)?;
    let eps = opts.epsilon;
    let direct = Sums::of(v.p, v.l, false);
    let comp = Sums::of(v.p, v.l, true);
    let (n1, d1) = (direct.pl + eps, direct.sq - direct.pl + eps);
    let (n2, d2) = (comp.pl + eps, comp.sq - comp.pl + eps);
    if d1 == 0.0 || d2 == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(p.iter()
        .zip(l)
        .map(|(&pi, &li)| {
            // d/dp of N/D with dN = l, dD = 2p - l.
            let g1 = (li * d1 - n1 * (2.0 * pi - li)) / (d1 * d1);
            let (qi, mi) = (1.0 - pi, 1.0 - li);
            // Complement term: chain rule through q = 1 - p.
            let g2 = -(mi * d2 - n2 * (2.0 * qi - mi)) / (d2 * d2);
            (g1 + g2) / 2.0
        })
        .collect())
}

/// Average over tasks of `1 - tanimoto_dual(pred, label)`.
///
/// Expects the four tasks in order extent, boundary, distance,
/// reconstruction; each prediction must match its label's shape.
pub fn multitask_loss(preds: &[Raster], labels: &[Raster]) -> Result<f64> {
    if preds.len() != 4 || labels.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "expected 4 prediction/label pairs, got {}/{}",
            preds.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (task, (p, l)) in preds.iter().zip(labels).enumerate() {
        if !p.same_shape(l) {
            return Err(Error::ShapeMismatch(format!("task {task}: prediction and label differ")));
        }
        let pv: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
        let lv: Vec<f64> = l.data().iter().map(|&v| v as f64).collect();
        total += 1.0 - tanimoto_dual(&pv, &lv)?;
    }
    Ok(total / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_disjoint_and_half() {
        let a = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(tanimoto(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn dual_values() {
        let l = [1.0, 0.0, 1.0];
        let inv = [0.0, 1.0, 0.0];
        assert_eq!(tanimoto_dual(&l, &l).unwrap(), 1.0);
        assert_eq!(tanimoto_dual(&inv, &l).unwrap(), 0.0);
        assert_eq!(tanimoto_dual(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn zero_zero_is_undefined_unless_stabilized() {
        let z = [0.0, 0.0];
        assert!(matches!(tanimoto(&z, &z), Err(Error::UndefinedRatio)));
        assert_eq!(tanimoto_with(&z, &z, TanimotoOptions::STABLE).unwrap(), 1.0);
        assert!(tanimoto_dual(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(tanimoto(&[0.5], &[0.5, 0.5]).is_err());
        assert!(tanimoto(&[], &[]).is_err());
        assert!(tanimoto(&[1.5], &[0.5]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let l = [1.0, 0.0, 1.0, 0.0, 1.0];
        let p = [1.0, 0.0, 1.0, 0.0, 1.0];
        let g = tanimoto_dual_grad(&p, &l).unwrap();
        // Feasible directions at the optimum point inwards; the gradient is
        // zero there because the maximum is attained with matched sums.
        for gi in g {
            assert!(gi.abs() < 1e-12, "{gi}");
        }
    }

    #[test]
    fn multitask_extremes() {
        let l = Raster::from_band(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let inv = Raster::from_band(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let labels = vec![l.clone(), l.clone(), l.clone(), l.clone()];
        assert_eq!(multitask_loss(&labels, &labels).unwrap(), 0.0);
        let wrong = vec![inv.clone(), inv.clone(), inv.clone(), inv];
        assert_eq!(multitask_loss(&wrong, &labels).unwrap(), 1.0);
        assert!(multitask_loss(&labels[..3], &labels[..3]).is_err());
    }
}
