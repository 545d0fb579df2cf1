//! Permutation calibration of template bounds.
//!
//! Under the randomization hypothesis the null p-values are invariant in
//! distribution under column permutations. The pivot
//! `Psi(x) = min_k t_k^{-1}(p_(k:m)(x))` is evaluated on `B` transformed copies
//! of the data (the first being the data itself) and `lambda` is taken as the
//! `(floor(alpha B) + 1)`-th smallest pivot.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{check_alpha, BoundValue, PostHocBound, ThresholdBound};
use crate::data::{check_permutation, IndexSet, PValueVector, Statistic, TwoSampleDataset};
use crate::error::{invalid, Error, Result};
use crate::templates::{Template, TemplateFamily};

/// `B` column permutations: the identity followed by `B - 1` i.i.d. uniform draws.
///
/// Draw `j` comes from its own ChaCha stream keyed by `(seed, j)`, so any
/// permutation can be regenerated on its own and in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PermutationPlan {
    pub b: usize,
    pub seed: u64,
    pub n: usize,
}

impl PermutationPlan {
    pub fn new(b: usize, seed: u64, n: usize) -> Result<Self> {
        if b < 2 {
            return invalid(format!("need B >= 2 permutations, got {b}"));
        }
        if n == 0 {
            return invalid("permutation plan over zero samples");
        }
        Ok(Self { b, seed, n })
    }

    /// The `j`-th group element (0-based); `j = 0` is the identity.
    pub fn permutation(&self, j: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.n).collect();
        if j > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(j as u64);
            perm.shuffle(&mut rng);
        }
        perm
    }
}

/// Applies a group element: columns reordered as `X^(g(j))`, labels unchanged.
pub fn apply_group_element(ds: &TwoSampleDataset, g: &[usize]) -> Result<TwoSampleDataset> {
    ds.permuted(g)
}

/// `Psi = min_{k <= K} t_k^{-1}(p_(k:m))`.
pub fn pivot_statistic<T: TemplateFamily + ?Sized>(p: &PValueVector, template: &T) -> Result<f64> {
    if template.m() != p.len() {
        return invalid(format!(
            "template is scaled to m={} but there are {} p-values",
            template.m(),
            p.len()
        ));
    }
    Ok(pivot_of_sorted(&p.sorted(), template))
}

fn pivot_of_sorted<T: TemplateFamily + ?Sized>(sorted: &[f64], template: &T) -> f64 {
    sorted
        .iter()
        .take(template.size())
        .enumerate()
        .map(|(i, &p)| template.inverse(i + 1, p))
        .fold(1.0, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub lambda: f64,
    /// Pivots of all `B` transformed datasets, ascending.
    pub pivots: Vec<f64>,
    pub alpha: f64,
    /// 1-based rank of `lambda` among the pivots.
    pub rank: usize,
    pub template: String,
    pub b: usize,
    pub seed: u64,
}

/// 1-based order-statistic index `floor(alpha B) + 1`.
pub fn lambda_rank(alpha: f64, b: usize) -> Result<usize> {
    check_alpha(alpha)?;
    let rank = (alpha * b as f64).floor() as usize + 1;
    if rank > b {
        return Err(Error::Config(format!("alpha={alpha} is too large for B={b}")));
    }
    Ok(rank)
}

/// Calibrates `lambda` with the known-variance two-sample statistic.
pub fn calibrate_lambda<T: TemplateFamily + ?Sized>(
    ds: &TwoSampleDataset,
    alpha: f64,
    template: &T,
    plan: &PermutationPlan,
) -> Result<CalibrationResult> {
    calibrate_lambda_with(ds, alpha, template, plan, Statistic::KnownVariance)
}

pub fn calibrate_lambda_with<T: TemplateFamily + ?Sized>(
    ds: &TwoSampleDataset,
    alpha: f64,
    template: &T,
    plan: &PermutationPlan,
    statistic: Statistic,
) -> Result<CalibrationResult> {
    let rank = lambda_rank(alpha, plan.b)?;
    if plan.n != ds.n() {
        return invalid(format!("plan permutes {} columns but the dataset has {}", plan.n, ds.n()));
    }
    if template.m() != ds.m() {
        return invalid(format!("template is scaled to m={} but the dataset has {} rows", template.m(), ds.m()));
    }
    let mut pivots: Vec<f64> = (0..plan.b)
        .into_par_iter()
        .map(|j| {
            let perm = plan.permutation(j);
            debug_assert!(check_permutation(&perm, ds.n()).is_ok());
            let p = ds.pvalues_under((j > 0).then_some(perm.as_slice()), statistic);
            pivot_of_sorted(&p.sorted(), template)
        })
        .collect();
    pivots.sort_by(f64::total_cmp);
    Ok(CalibrationResult {
        lambda: pivots[rank - 1],
        pivots,
        alpha,
        rank,
        template: template.name(),
        b: plan.b,
        seed: plan.seed,
    })
}

/// Template bound on `set` at the calibrated `lambda`.
pub fn calibrated_bound<T: TemplateFamily + ?Sized>(
    ds: &TwoSampleDataset,
    alpha: f64,
    template: &T,
    plan: &PermutationPlan,
    set: &IndexSet,
) -> Result<BoundValue> {
    let cal = calibrate_lambda(ds, alpha, template, plan)?;
    let p = ds.pvalues(Statistic::KnownVariance);
    let bound = ThresholdBound::new(&p, template, cal.lambda)?;
    Ok(BoundValue {
        v: bound.bound(set),
        method: format!("calibrated({})", template.name()),
        alpha: Some(alpha),
        lambda: Some(cal.lambda),
    })
}

/// Budget for a single fixed region `R1` from the beta template calibrated on the rows of `R1`.
pub fn single_set_beta_zeta(
    ds: &TwoSampleDataset,
    region: &IndexSet,
    alpha: f64,
    plan: &PermutationPlan,
) -> Result<usize> {
    single_set_beta_zeta_with(ds, region, alpha, plan, Statistic::KnownVariance)
}

pub fn single_set_beta_zeta_with(
    ds: &TwoSampleDataset,
    region: &IndexSet,
    alpha: f64,
    plan: &PermutationPlan,
    statistic: Statistic,
) -> Result<usize> {
    if region.is_empty() {
        return invalid("reference region must be nonempty");
    }
    let sub = ds.restrict_rows(region)?;
    let template = Template::beta(region.len());
    let cal = calibrate_lambda_with(&sub, alpha, &template, plan, statistic)?;
    let p = sub.pvalues(statistic);
    Ok(ThresholdBound::new(&p, &template, cal.lambda)?.bound(&IndexSet::full(region.len())))
}
