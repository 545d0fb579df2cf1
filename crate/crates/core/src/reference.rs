//! Reference families `(R_k, zeta_k)` and the post hoc bounds interpolated from them.
//!
//! A family controls the joint error rate at level `alpha` when, with probability
//! at least `1 - alpha`, every region satisfies `|R_k ∩ H0| <= zeta_k`. Any such
//! family yields the optimal bound
//! `V*(S) = max { |S ∩ A| : |R_k ∩ A| <= zeta_k for all k }`
//! and two cheaper relaxations, [`augmentation_bound`] and [`disjoint_sum_bound`].

use serde::{Deserialize, Serialize};

use crate::bounds::{check_alpha, PostHocBound};
use crate::data::{GroundTruth, IndexSet, PValueVector};
use crate::error::{invalid, Error, Result};

/// Largest selection accepted by the exhaustive [`optimal_bound`].
pub const OPTIMAL_BOUND_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    General,
    /// `R_1 ⊆ R_2 ⊆ .. ⊆ R_K`.
    Nested,
    /// Pairwise disjoint regions.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSet {
    pub region: IndexSet,
    pub zeta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceFamily {
    items: Vec<ReferenceSet>,
    structure: Structure,
}

impl ReferenceFamily {
    /// Validates the claimed structure and clamps each `zeta_k` to `|R_k|`.
    pub fn new(items: Vec<(IndexSet, usize)>, structure: Structure) -> Result<Self> {
        let items: Vec<ReferenceSet> = items
            .into_iter()
            .map(|(region, zeta)| {
                let zeta = zeta.min(region.len());
                ReferenceSet { region, zeta }
            })
            .collect();
        match structure {
            Structure::General => {}
            Structure::Nested => {
                if let Some(k) = items.windows(2).position(|w| !w[0].region.is_subset(&w[1].region)) {
                    return invalid(format!("family tagged nested but R_{} is not contained in R_{}", k + 1, k + 2));
                }
            }
            Structure::Disjoint => {
                let universe = items.iter().map(|it| it.region.universe()).max().unwrap_or(0);
                let mut owner = vec![usize::MAX; universe];
                for (k, it) in items.iter().enumerate() {
                    for i in it.region.iter() {
                        if owner[i] != usize::MAX {
                            return invalid(format!(
                                "family tagged disjoint but R_{} and R_{} share index {}",
                                owner[i] + 1,
                                k + 1,
                                i + 1
                            ));
                        }
                        owner[i] = k;
                    }
                }
            }
        }
        Ok(Self { items, structure })
    }

    pub fn empty() -> Self {
        Self { items: Vec::new(), structure: Structure::General }
    }

    /// Level-set family `R_k = {i : p_i < t_k}`, `zeta_k = k - 1`; nested when `t` is nondecreasing.
    pub fn from_thresholds(p: &PValueVector, thresholds: &[f64]) -> Result<Self> {
        let items = thresholds
            .iter()
            .enumerate()
            .map(|(k, &t)| (IndexSet::from_predicate(p.len(), |i| p.get(i) < t), k))
            .collect();
        let nested = thresholds.windows(2).all(|w| w[0] <= w[1]);
        Self::new(items, if nested { Structure::Nested } else { Structure::General })
    }

    pub fn items(&self) -> &[ReferenceSet] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }
}

/// Exact `V*(S)` by branch and bound over subsets of `S`; a test oracle for small `S`.
pub fn optimal_bound(set: &IndexSet, family: &ReferenceFamily) -> Result<usize> {
    if set.len() > OPTIMAL_BOUND_LIMIT {
        return Err(Error::TooLarge { size: set.len(), limit: OPTIMAL_BOUND_LIMIT });
    }
    let elems = set.as_slice();
    // binding constraints restricted to S: (member mask, budget)
    let constraints: Vec<(u32, usize)> = family
        .items
        .iter()
        .filter_map(|it| {
            let mask = elems
                .iter()
                .enumerate()
                .filter(|(_, &i)| it.region.contains(i))
                .fold(0u32, |acc, (bit, _)| acc | (1 << bit));
            (mask.count_ones() as usize > it.zeta).then_some((mask, it.zeta))
        })
        .collect();

    let load = |bit: usize| constraints.iter().filter(|(mask, _)| mask & (1 << bit) != 0).count();
    let (mut constrained, free): (Vec<usize>, Vec<usize>) = (0..elems.len()).partition(|&b| load(b) > 0);
    constrained.sort_by_key(|&b| std::cmp::Reverse(load(b)));

    let mut search = Search { constraints: &constraints, order: &constrained, used: vec![0; constraints.len()], best: 0 };
    search.run(0, 0);
    Ok(free.len() + search.best)
}

struct Search<'a> {
    constraints: &'a [(u32, usize)],
    order: &'a [usize],
    used: Vec<usize>,
    best: usize,
}

impl Search<'_> {
    fn run(&mut self, depth: usize, taken: usize) {
        if taken + (self.order.len() - depth) <= self.best {
            return;
        }
        if depth == self.order.len() {
            self.best = taken;
            return;
        }
        let bit = 1u32 << self.order[depth];
        let fits = self
            .constraints
            .iter()
            .zip(&self.used)
            .all(|((mask, zeta), &used)| mask & bit == 0 || used < *zeta);
        if fits {
            self.touch(bit, true);
            self.run(depth + 1, taken + 1);
            self.touch(bit, false);
        }
        self.run(depth + 1, taken);
    }

    fn touch(&mut self, bit: u32, add: bool) {
        for ((mask, _), used) in self.constraints.iter().zip(self.used.iter_mut()) {
            if mask & bit != 0 {
                if add {
                    *used += 1;
                } else {
                    *used -= 1;
                }
            }
        }
    }
}

/// `min_k (|S \ R_k| + zeta_k) ∧ |S|`.
pub fn augmentation_bound(set: &IndexSet, family: &ReferenceFamily) -> usize {
    family
        .items
        .iter()
        .map(|it| set.difference_len(&it.region) + it.zeta)
        .fold(set.len(), usize::min)
}

/// `(Σ_k min(|S ∩ R_k|, zeta_k) + |S \ ∪_k R_k|) ∧ |S|`.
pub fn disjoint_sum_bound(set: &IndexSet, family: &ReferenceFamily) -> usize {
    let covered: usize = {
        let mut hit = vec![false; set.len()];
        for it in &family.items {
            for (slot, i) in set.iter().enumerate() {
                if it.region.contains(i) {
                    hit[slot] = true;
                }
            }
        }
        hit.into_iter().filter(|&h| h).count()
    };
    let inside: usize = family
        .items
        .iter()
        .map(|it| set.intersection_len(&it.region).min(it.zeta))
        .sum();
    (inside + set.len() - covered).min(set.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    Augmentation,
    DisjointSum,
}

/// Interpolation bound from a fixed reference family.
#[derive(Debug, Clone)]
pub struct Interpolation<'a> {
    pub family: &'a ReferenceFamily,
    pub relaxation: Relaxation,
}

impl PostHocBound for Interpolation<'_> {
    fn bound(&self, set: &IndexSet) -> usize {
        match self.relaxation {
            Relaxation::Augmentation => augmentation_bound(set, self.family),
            Relaxation::DisjointSum => disjoint_sum_bound(set, self.family),
        }
    }
}

/// Markov budget `|R1| ∧ floor(#{i in R1 : p_i > t} / (1 - t/alpha))` for fixed `t in (0, alpha)`.
pub fn markov_zeta(p: &PValueVector, region: &IndexSet, alpha: f64, t: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return invalid(format!("level alpha={alpha} must be positive"));
    }
    if !(t > 0.0 && t < alpha) {
        return invalid(format!("Markov threshold t={t} must lie in (0, alpha={alpha})"));
    }
    let count = region.iter().filter(|&i| p.get(i) > t).count();
    let raw = (count as f64 / (1.0 - t / alpha)).floor() as usize;
    Ok(raw.min(region.len()))
}

/// Order of the floor and the square in the DKW budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DkwRounding {
    /// `floor(x)^2`.
    #[default]
    FloorThenSquare,
    /// `floor(x^2)`.
    SquareThenFloor,
}

/// DKW budget `|R1| ∧ min_t r(C/(2(1-t)) + sqrt(C²/(4(1-t)²) + N(t)/(1-t)))` where
/// `N(t) = #{i in R1 : p_i > t}`, `C = sqrt(log(1/alpha)/2)` and `r` is the rounding rule.
pub fn dkw_zeta(p: &PValueVector, region: &IndexSet, alpha: f64) -> Result<usize> {
    dkw_zeta_with(p, region, alpha, DkwRounding::FloorThenSquare)
}

pub fn dkw_zeta_with(p: &PValueVector, region: &IndexSet, alpha: f64, rounding: DkwRounding) -> Result<usize> {
    check_alpha(alpha)?;
    let sorted = p.sorted_restriction(region)?;
    let n = sorted.len();
    if n == 0 {
        return Ok(0);
    }
    let c = (0.5 * (1.0 / alpha).ln()).sqrt();
    // For fixed N(t) the objective grows with t, and N only drops at t = p_i,
    // so the minimum sits at t = 0 or at one of the p-values below 1.
    let mut candidates = sorted.clone();
    candidates.dedup();
    let best = std::iter::once(0.0)
        .chain(candidates.into_iter().filter(|&t| t > 0.0 && t < 1.0))
        .map(|t| {
            let count = n - sorted.partition_point(|&x| x <= t);
            dkw_objective(count, t, c, rounding)
        })
        .min()
        .unwrap_or(usize::MAX);
    Ok(best.min(n))
}

pub(crate) fn dkw_objective(count: usize, t: f64, c: f64, rounding: DkwRounding) -> usize {
    let s = 1.0 - t;
    let x = c / (2.0 * s) + (c * c / (4.0 * s * s) + count as f64 / s).sqrt();
    match rounding {
        DkwRounding::FloorThenSquare => {
            let f = x.floor();
            (f * f) as usize
        }
        DkwRounding::SquareThenFloor => (x * x).floor() as usize,
    }
}

/// Whether every region respects its budget given the true nulls.
pub fn jer_holds(family: &ReferenceFamily, truth: &GroundTruth) -> bool {
    family
        .items
        .iter()
        .all(|it| it.region.intersection_len(&truth.h0) <= it.zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::simes_bound;
    use proptest::prelude::*;

    fn set(v: &[usize], m: usize) -> IndexSet {
        IndexSet::from_one_based(v.iter().copied(), m).unwrap()
    }

    fn overlapping() -> ReferenceFamily {
        ReferenceFamily::new(vec![(set(&[1, 2, 3], 5), 1), (set(&[3, 4, 5], 5), 1)], Structure::General).unwrap()
    }

    #[test]
    fn optimal_examples() {
        let all = IndexSet::full(5);
        assert_eq!(optimal_bound(&all, &ReferenceFamily::empty()).unwrap(), 5);
        assert_eq!(optimal_bound(&all, &overlapping()).unwrap(), 2);
        let blocked = ReferenceFamily::new(vec![(IndexSet::full(5), 0)], Structure::General).unwrap();
        assert_eq!(optimal_bound(&all, &blocked).unwrap(), 0);
        let big = IndexSet::full(30);
        assert!(matches!(optimal_bound(&big, &ReferenceFamily::empty()), Err(Error::TooLarge { size: 30, .. })));
    }

    #[test]
    fn relaxation_examples() {
        let all = IndexSet::full(5);
        assert_eq!(augmentation_bound(&all, &overlapping()), 3);
        assert_eq!(disjoint_sum_bound(&all, &overlapping()), 2);
        assert_eq!(augmentation_bound(&all, &ReferenceFamily::empty()), 5);

        let nested =
            ReferenceFamily::new(vec![(set(&[1, 2], 6), 1), (set(&[1, 2, 3, 4], 6), 2)], Structure::Nested).unwrap();
        assert_eq!(augmentation_bound(&set(&[1, 2], 6), &nested), 1);
        assert_eq!(augmentation_bound(&set(&[2], 6), &nested), 1);

        let singletons = ReferenceFamily::new((0..4).map(|i| (IndexSet::new([i], 4).unwrap(), 0)).collect(), Structure::Disjoint)
            .unwrap();
        assert_eq!(disjoint_sum_bound(&IndexSet::full(4), &singletons), 0);
        let outside = ReferenceFamily::new(vec![(set(&[1, 2], 6), 0)], Structure::Disjoint).unwrap();
        assert_eq!(disjoint_sum_bound(&set(&[4, 5, 6], 6), &outside), 3);
    }

    #[test]
    fn structure_is_validated_and_budgets_clamped() {
        assert!(ReferenceFamily::new(vec![(set(&[1, 2], 4), 1), (set(&[2, 3], 4), 1)], Structure::Nested).is_err());
        assert!(ReferenceFamily::new(vec![(set(&[1, 2], 4), 1), (set(&[2, 3], 4), 1)], Structure::Disjoint).is_err());
        let fam = ReferenceFamily::new(vec![(set(&[1, 2], 4), 9)], Structure::Disjoint).unwrap();
        assert_eq!(fam.items()[0].zeta, 2);
    }

    #[test]
    fn markov_examples() {
        let p = PValueVector::new(vec![0.05, 0.6, 0.7, 0.02, 0.9, 0.03]).unwrap();
        let all = IndexSet::full(6);
        assert_eq!(markov_zeta(&p, &all, 0.2, 0.05).unwrap(), 4);
        let small = PValueVector::new(vec![0.01, 0.02, 0.03]).unwrap();
        assert_eq!(markov_zeta(&small, &IndexSet::full(3), 0.2, 0.05).unwrap(), 0);
        let large = PValueVector::new(vec![0.5, 0.6, 0.7]).unwrap();
        assert_eq!(markov_zeta(&large, &IndexSet::full(3), 0.2, 0.05).unwrap(), 3);
        assert!(markov_zeta(&p, &all, 0.2, 0.2).is_err());
        assert!(markov_zeta(&p, &all, 0.2, 0.0).is_err());
    }

    #[test]
    fn dkw_examples() {
        let zeros = PValueVector::new(vec![0.0; 10]).unwrap();
        assert_eq!(dkw_zeta(&zeros, &IndexSet::full(10), 0.05).unwrap(), 1);
        let ones = PValueVector::new(vec![0.9; 4]).unwrap();
        assert_eq!(dkw_zeta(&ones, &IndexSet::full(4), 0.001).unwrap(), 4);
        assert_eq!(dkw_zeta(&ones, &IndexSet::empty(4), 0.05).unwrap(), 0);
    }

    #[test]
    fn rounding_orders_compare() {
        // floor(x)^2 <= floor(x^2)
        let p = PValueVector::new((0..40).map(|i| (i as f64 + 0.5) / 40.0).collect()).unwrap();
        let r = IndexSet::full(40);
        let printed = dkw_zeta_with(&p, &r, 0.1, DkwRounding::FloorThenSquare).unwrap();
        let alt = dkw_zeta_with(&p, &r, 0.1, DkwRounding::SquareThenFloor).unwrap();
        assert!(printed <= alt);
    }

    #[test]
    fn jer_examples() {
        let truth = GroundTruth::new(set(&[1, 2, 3], 5));
        let trivial = ReferenceFamily::new(vec![(set(&[1, 2, 3], 5), 3), (set(&[4, 5], 5), 2)], Structure::Disjoint).unwrap();
        assert!(jer_holds(&trivial, &truth));
        let tight = ReferenceFamily::new(vec![(set(&[1, 2], 5), 1)], Structure::General).unwrap();
        assert!(!jer_holds(&tight, &truth));
    }

    type Raw = (usize, Vec<(Vec<bool>, usize)>, Vec<bool>);

    fn raw_family(max_k: usize) -> impl Strategy<Value = Raw> {
        (1usize..=12).prop_flat_map(move |m| {
            (
                Just(m),
                prop::collection::vec((prop::collection::vec(any::<bool>(), m), 0usize..=m), 0..=max_k),
                prop::collection::vec(any::<bool>(), m),
            )
        })
    }

    fn mask_set(mask: &[bool]) -> IndexSet {
        IndexSet::from_predicate(mask.len(), |i| mask[i])
    }

    fn nested_parts() -> impl Strategy<Value = (usize, Vec<u32>, Vec<usize>, Vec<usize>, Vec<bool>)> {
        (1usize..=12, 0usize..=5).prop_flat_map(|(m, k)| {
            (
                Just(m),
                prop::collection::vec(any::<u32>(), m),
                prop::collection::vec(0..=m, k),
                prop::collection::vec(0..=m, k),
                prop::collection::vec(any::<bool>(), m),
            )
        })
    }

    fn disjoint_parts() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>, Vec<bool>)> {
        (1usize..=12, 0usize..=5).prop_flat_map(|(m, k)| {
            (
                Just(m),
                // owner == k means the index is outside every region
                prop::collection::vec(0..=k, m),
                prop::collection::vec(0..=m, k),
                prop::collection::vec(any::<bool>(), m),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn jer_matches_recount((m, raw, h0) in raw_family(6)) {
            let fam = ReferenceFamily::new(raw.iter().map(|(r, z)| (mask_set(r), *z)).collect(), Structure::General).unwrap();
            let truth = GroundTruth::new(mask_set(&h0));
            let mut ok = true;
            for (r, z) in &raw {
                let inside = (0..m).filter(|&i| r[i] && h0[i]).count();
                let budget = (*z).min(r.iter().filter(|&&b| b).count());
                ok &= inside <= budget;
            }
            prop_assert_eq!(jer_holds(&fam, &truth), ok);
        }

        #[test]
        fn optimal_is_brute_force((m, raw, s) in raw_family(5)) {
            let fam = ReferenceFamily::new(raw.iter().map(|(r, z)| (mask_set(r), *z)).collect(), Structure::General).unwrap();
            let s = mask_set(&s);
            let brute = (0u32..1 << m)
                .filter(|a| fam.items().iter().all(|it| it.region.iter().filter(|&i| a & (1 << i) != 0).count() <= it.zeta))
                .map(|a| s.iter().filter(|&i| a & (1 << i) != 0).count())
                .max()
                .unwrap();
            prop_assert_eq!(optimal_bound(&s, &fam).unwrap(), brute);
        }

        #[test]
        fn relaxations_dominate_optimal((m, raw, s) in raw_family(6)) {
            let fam = ReferenceFamily::new(raw.iter().map(|(r, z)| (mask_set(r), *z)).collect(), Structure::General).unwrap();
            let s = mask_set(&s);
            let v = optimal_bound(&s, &fam).unwrap();
            prop_assert!(v <= augmentation_bound(&s, &fam));
            prop_assert!(v <= disjoint_sum_bound(&s, &fam));
            prop_assert!(v <= m);
        }

        #[test]
        fn nested_augmentation_is_exact((m, keys, sizes, zetas, s) in nested_parts()) {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&i| keys[i]);
            let mut sizes = sizes;
            sizes.sort_unstable();
            let items = sizes
                .iter()
                .zip(&zetas)
                .map(|(&len, &z)| (IndexSet::new(order[..len].iter().copied(), m).unwrap(), z))
                .collect();
            let fam = ReferenceFamily::new(items, Structure::Nested).unwrap();
            let s = mask_set(&s);
            prop_assert_eq!(augmentation_bound(&s, &fam), optimal_bound(&s, &fam).unwrap());
        }

        #[test]
        fn disjoint_sum_is_exact((m, owner, zetas, s) in disjoint_parts()) {
            let items = zetas
                .iter()
                .enumerate()
                .map(|(k, &z)| (IndexSet::from_predicate(m, |i| owner[i] == k), z))
                .collect();
            let fam = ReferenceFamily::new(items, Structure::Disjoint).unwrap();
            let s = mask_set(&s);
            prop_assert_eq!(disjoint_sum_bound(&s, &fam), optimal_bound(&s, &fam).unwrap());
        }

        #[test]
        fn true_positive_bounds_are_superadditive((m, raw, split) in raw_family(6), side in prop::collection::vec(any::<bool>(), 12)) {
            let fam = ReferenceFamily::new(raw.iter().map(|(r, z)| (mask_set(r), *z)).collect(), Structure::General).unwrap();
            let s1 = IndexSet::from_predicate(m, |i| split[i] && side[i]);
            let s2 = IndexSet::from_predicate(m, |i| split[i] && !side[i]);
            let u = s1.union(&s2);
            let tp = |s: &IndexSet| s.len() - optimal_bound(s, &fam).unwrap();
            prop_assert!(tp(&u) >= tp(&s1) + tp(&s2));
        }

        #[test]
        fn simes_is_a_nested_family(vals in prop::collection::vec(0.0f64..=0.3, 1..30), alpha in 0.05f64..0.9, pick in prop::collection::vec(any::<bool>(), 30)) {
            let p = PValueVector::new(vals).unwrap();
            let m = p.len();
            let thresholds: Vec<f64> = (1..=m).map(|k| alpha * k as f64 / m as f64).collect();
            let fam = ReferenceFamily::from_thresholds(&p, &thresholds).unwrap();
            prop_assert_eq!(fam.structure(), Structure::Nested);
            let s = IndexSet::from_predicate(m, |i| pick[i]);
            prop_assert_eq!(augmentation_bound(&s, &fam), simes_bound(&p, &s, alpha).unwrap().v);
        }

        #[test]
        fn dkw_budget_inequality(vals in prop::collection::vec(0.0f64..=1.0, 1..200), alpha in 0.001f64..0.5) {
            let p = PValueVector::new(vals).unwrap();
            let all = IndexSet::full(p.len());
            let c = (0.5 * (1.0 / alpha).ln()).sqrt();
            let above_half = p.values().iter().filter(|&&x| x > 0.5).count();
            for rounding in [DkwRounding::FloorThenSquare, DkwRounding::SquareThenFloor] {
                let at_half = dkw_objective(above_half, 0.5, c, rounding) as f64;
                prop_assert!(at_half <= 2.0 * ((1.0 / alpha).ln() + 2.0 * above_half as f64) + 1e-9);
                prop_assert!(dkw_zeta_with(&p, &all, alpha, rounding).unwrap() as f64 <= at_half);
            }
        }
    }
}
