//! Closed-form post hoc bounds on the number of false positives `|S ∩ H0|`.
//!
//! Every bound here has the shape
//! `V(S) = min_k { #{i in S : p_i >= t_k} + k - 1 } ∧ |S|`
//! for some nondecreasing threshold sequence `t_k`, and holds simultaneously over
//! all selections `S` once the thresholds are calibrated.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{IndexSet, PValueVector};
use crate::error::{invalid, Result};
use crate::templates::TemplateFamily;

/// A bound value together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub v: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("level alpha={alpha} must lie in (0, 1)"));
    }
    Ok(())
}

/// `min_k (#{p >= t_k} + k - 1)` over the given thresholds, capped at `sorted.len()`.
/// `sorted` must be ascending.
pub(crate) fn min_over_thresholds(sorted: &[f64], thresholds: impl Iterator<Item = f64>) -> usize {
    let n = sorted.len();
    let mut best = n;
    for (k_minus_1, t) in thresholds.enumerate() {
        if k_minus_1 >= best {
            break;
        }
        let below = sorted.partition_point(|&p| p < t);
        best = best.min(n - below + k_minus_1);
    }
    best
}

/// Something that maps any selection to an upper bound on its false positives.
pub trait PostHocBound: Sync {
    fn bound(&self, set: &IndexSet) -> usize;

    /// Bounds on the level sets `S_1 ⊂ .. ⊂ S_m` given by `order` (indices by increasing p-value).
    /// Implementations with structure to exploit override this.
    fn level_set_bounds(&self, order: &[usize]) -> Option<Vec<usize>> {
        let _ = order;
        None
    }
}

impl<F> PostHocBound for F
where
    F: Fn(&IndexSet) -> usize + Sync,
{
    fn bound(&self, set: &IndexSet) -> usize {
        self(set)
    }
}

/// `k0`-Bonferroni post hoc bound.
#[derive(Debug, Clone, Copy)]
pub struct KBonferroni<'a> {
    pub p: &'a PValueVector,
    pub alpha: f64,
    pub k0: usize,
}

impl<'a> KBonferroni<'a> {
    pub fn new(p: &'a PValueVector, alpha: f64, k0: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if k0 == 0 || k0 > p.len() {
            return invalid(format!("k0={k0} must lie in [1, {}]", p.len()));
        }
        Ok(Self { p, alpha, k0 })
    }

    fn cutoff(&self) -> f64 {
        self.alpha * self.k0 as f64 / self.p.len() as f64
    }
}

impl PostHocBound for KBonferroni<'_> {
    fn bound(&self, set: &IndexSet) -> usize {
        let t = self.cutoff();
        let count = set.iter().filter(|&i| self.p.get(i) >= t).count();
        set.len().min(count + self.k0 - 1)
    }
}

/// Simes post hoc bound: thresholds `alpha k / m`.
#[derive(Debug, Clone, Copy)]
pub struct Simes<'a> {
    pub p: &'a PValueVector,
    pub alpha: f64,
}

impl<'a> Simes<'a> {
    pub fn new(p: &'a PValueVector, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { p, alpha })
    }

    fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.p.len() as f64;
        (1..=self.p.len()).map(move |k| self.alpha * k as f64 / m)
    }
}

impl PostHocBound for Simes<'_> {
    fn bound(&self, set: &IndexSet) -> usize {
        let sorted = restricted(self.p, set);
        min_over_thresholds(&sorted, self.thresholds().take(set.len()))
    }

    fn level_set_bounds(&self, order: &[usize]) -> Option<Vec<usize>> {
        Some(level_set_bounds_from_thresholds(self.p, order, &self.thresholds().collect::<Vec<_>>()))
    }
}

/// Template bound `V^lambda` with curves `k <= min(|S|, K)`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdBound<'a, T: TemplateFamily + ?Sized> {
    pub p: &'a PValueVector,
    pub template: &'a T,
    pub lambda: f64,
}

impl<'a, T: TemplateFamily + ?Sized> ThresholdBound<'a, T> {
    pub fn new(p: &'a PValueVector, template: &'a T, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return invalid(format!("lambda {lambda} outside [0, 1]"));
        }
        if template.m() != p.len() {
            return invalid(format!(
                "template is scaled to m={} but there are {} p-values",
                template.m(),
                p.len()
            ));
        }
        Ok(Self { p, template, lambda })
    }

    pub fn thresholds(&self) -> Vec<f64> {
        (1..=self.template.size())
            .map(|k| self.template.threshold(k, self.lambda))
            .collect()
    }
}

impl<T: TemplateFamily + ?Sized> PostHocBound for ThresholdBound<'_, T> {
    fn bound(&self, set: &IndexSet) -> usize {
        let sorted = restricted(self.p, set);
        let curves = set.len().min(self.template.size());
        min_over_thresholds(&sorted, (1..=curves).map(|k| self.template.threshold(k, self.lambda)))
    }

    fn level_set_bounds(&self, order: &[usize]) -> Option<Vec<usize>> {
        Some(level_set_bounds_from_thresholds(self.p, order, &self.thresholds()))
    }
}

fn restricted(p: &PValueVector, set: &IndexSet) -> Vec<f64> {
    let mut v: Vec<f64> = set.iter().map(|i| p.get(i)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// On a level set of size `k`, the restricted p-values are the `k` globally smallest,
/// so `#{i in S_k : p_i < t_j} = min(k, N_j)` with `N_j = #{i : p_i < t_j}`.
fn level_set_bounds_from_thresholds(p: &PValueVector, order: &[usize], thresholds: &[f64]) -> Vec<usize> {
    let sorted: Vec<f64> = order.iter().map(|&i| p.get(i)).collect();
    let below: Vec<usize> = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&x| x < t))
        .collect();
    (1..=order.len())
        .map(|k| {
            let mut best = k;
            for (j, &n_j) in below.iter().enumerate().take(k) {
                if j >= best {
                    break;
                }
                best = best.min(k.saturating_sub(n_j) + j);
            }
            best
        })
        .collect()
}

pub fn k0_bonferroni(p: &PValueVector, set: &IndexSet, alpha: f64, k0: usize) -> Result<BoundValue> {
    let b = KBonferroni::new(p, alpha, k0)?;
    Ok(BoundValue {
        v: b.bound(set),
        method: format!("bonferroni(k0={k0})"),
        alpha: Some(alpha),
        lambda: None,
    })
}

pub fn simes_bound(p: &PValueVector, set: &IndexSet, alpha: f64) -> Result<BoundValue> {
    let b = Simes::new(p, alpha)?;
    Ok(BoundValue { v: b.bound(set), method: "simes".into(), alpha: Some(alpha), lambda: None })
}

/// `|S| - V^Sim(S)` computed from the shifted-line characterization:
/// the least `u` with `p_(v:S) >= alpha (v - u) / m` for every `v > u`.
pub fn simes_graphical_u(p: &PValueVector, set: &IndexSet, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    let sorted = p.sorted_restriction(set)?;
    let m = p.len() as f64;
    let n = sorted.len();
    let u = (0..=n)
        .find(|&u| (u + 1..=n).all(|v| sorted[v - 1] >= alpha * (v - u) as f64 / m))
        .unwrap_or(n);
    Ok(u)
}

pub fn threshold_bound<T: TemplateFamily + ?Sized>(
    p: &PValueVector,
    set: &IndexSet,
    template: &T,
    lambda: f64,
) -> Result<BoundValue> {
    let b = ThresholdBound::new(p, template, lambda)?;
    Ok(BoundValue {
        v: b.bound(set),
        method: format!("threshold({})", template.name()),
        alpha: None,
        lambda: Some(lambda),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub k: usize,
    pub v: usize,
    pub tp_lower: usize,
    pub fdp_upper: f64,
}

/// Post hoc bounds along the p-value level sets `S_k` (the `k` smallest p-values).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub rows: Vec<EnvelopeRow>,
}

impl Envelope {
    pub fn from_bounds(bounds: &[usize]) -> Self {
        let rows = bounds
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let k = i + 1;
                EnvelopeRow { k, v, tp_lower: k - v, fdp_upper: v as f64 / k as f64 }
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn tp_lower(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.tp_lower).collect()
    }

    pub fn fdp_upper(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fdp_upper).collect()
    }
}

/// Evaluates `bound` on every level set; ties in p are broken by index.
pub fn envelope<B: PostHocBound + ?Sized>(p: &PValueVector, bound: &B) -> Envelope {
    let order = p.rank_order();
    let values = bound.level_set_bounds(&order).unwrap_or_else(|| generic_level_set_bounds(p, bound, &order));
    Envelope::from_bounds(&values)
}

pub(crate) fn generic_level_set_bounds<B: PostHocBound + ?Sized>(
    p: &PValueVector,
    bound: &B,
    order: &[usize],
) -> Vec<usize> {
    (1..=order.len())
        .into_par_iter()
        .map(|k| bound.bound(&IndexSet::from_unsorted_unique(order[..k].to_vec(), p.len())))
        .collect()
}
