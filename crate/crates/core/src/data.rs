//! Domain primitives: p-value vectors, index sets, two-sample datasets.
//!
//! Indices are 0-based throughout the library. Text interfaces (CLI, HTTP)
//! speak 1-based positions and convert at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::gaussian_tail;

/// A vector of `m >= 1` p-values, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueVector {
    values: Vec<f64>,
}

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("p-value vector must contain at least one entry");
        }
        if let Some((i, p)) = values
            .iter()
            .enumerate()
            .find(|(_, p)| p.is_nan() || **p < 0.0 || **p > 1.0)
        {
            return invalid(format!("p-value at position {} is {p}, outside [0, 1]", i + 1));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// All p-values in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Indices ordered by increasing p-value; ties keep the original index order.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        order
    }

    /// The `k` most significant hypotheses (ties broken by index).
    pub fn level_set(&self, k: usize) -> IndexSet {
        let order = self.rank_order();
        IndexSet::from_unsorted_unique(order[..k.min(order.len())].to_vec(), self.len())
    }

    /// Ascending p-values restricted to `set`, duplicates kept.
    pub fn sorted_restriction(&self, set: &IndexSet) -> Result<Vec<f64>> {
        if let Some(&i) = set.as_slice().last() {
            if i >= self.len() {
                return invalid(format!(
                    "index {} out of range for {} p-values",
                    i + 1,
                    self.len()
                ));
            }
        }
        let mut v: Vec<f64> = set.iter().map(|i| self.values[i]).collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Restriction to `set`, renumbered `0..|set|`.
    pub fn restrict(&self, set: &IndexSet) -> Result<Self> {
        let v: Vec<f64> = set
            .iter()
            .map(|i| {
                self.values
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("index {} out of range", i + 1)))
            })
            .collect::<Result<_>>()?;
        Self::new(v)
    }
}

/// Ascending p-values of `p` restricted to `set`.
pub fn sorted_restriction(p: &PValueVector, set: &IndexSet) -> Result<Vec<f64>> {
    p.sorted_restriction(set)
}

/// A subset of `{0, .., m-1}`, stored as a strictly increasing list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    universe: usize,
}

impl IndexSet {
    /// Builds a set from 0-based indices in any order. Duplicates and indices `>= m` are rejected.
    pub fn new(indices: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate index {}", w[0] + 1));
        }
        if let Some(&last) = indices.last() {
            if last >= m {
                return invalid(format!("index {} outside [1, {m}]", last + 1));
            }
        }
        Ok(Self { indices, universe: m })
    }

    /// Builds a set from 1-based positions.
    pub fn from_one_based(positions: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let zero_based = positions
            .into_iter()
            .map(|i| i.checked_sub(1).ok_or_else(|| Error::InvalidInput("index 0 is not a valid 1-based position".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based, m)
    }

    pub(crate) fn from_unsorted_unique(mut indices: Vec<usize>, m: usize) -> Self {
        indices.sort_unstable();
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices, universe: m }
    }

    pub fn full(m: usize) -> Self {
        Self { indices: (0..m).collect(), universe: m }
    }

    pub fn empty(m: usize) -> Self {
        Self { indices: Vec::new(), universe: m }
    }

    /// Contiguous block `start..end` (0-based, half open).
    pub fn range(start: usize, end: usize, m: usize) -> Self {
        assert!(start <= end && end <= m, "range {start}..{end} outside universe {m}");
        Self { indices: (start..end).collect(), universe: m }
    }

    pub fn from_predicate(m: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        Self { indices: (0..m).filter(|&i| pred(i)).collect(), universe: m }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// `|self ∩ other|`, by a merge walk.
    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        let mut n = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a.next();
                    b.next();
                }
            }
        }
        n
    }

    /// `|self \ other|`.
    pub fn difference_len(&self, other: &IndexSet) -> usize {
        self.len() - self.intersection_len(other)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        let indices = self.iter().filter(|&i| other.contains(i)).collect();
        Self { indices, universe: self.universe.max(other.universe) }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut indices: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices, universe: self.universe.max(other.universe) }
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        let indices = self.iter().filter(|&i| !other.contains(i)).collect();
        Self { indices, universe: self.universe }
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.intersection_len(other) == self.len()
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.intersection_len(other) == 0
    }

    /// 1-based positions, for reporting.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

/// Row-wise two-sample statistic used to turn a dataset into p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `|mean2 - mean1| / sqrt(1/n1 + 1/n2)`, unit variance assumed.
    #[default]
    KnownVariance,
    /// Welch-style studentized difference, referred to the normal distribution.
    Welch,
}

/// `m x n` measurements (rows are hypotheses, columns are samples) with group labels in `{1, 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleDataset {
    data: Vec<f64>,
    m: usize,
    n: usize,
    labels: Vec<u8>,
    n1: usize,
}

impl TwoSampleDataset {
    /// `data` is row-major with `m` rows of `labels.len()` columns.
    pub fn new(data: Vec<f64>, m: usize, labels: Vec<u8>) -> Result<Self> {
        let n = labels.len();
        if m == 0 {
            return invalid("dataset has no rows");
        }
        if data.len() != m * n {
            return invalid(format!(
                "matrix has {} cells, expected {m} rows x {n} labelled columns",
                data.len()
            ));
        }
        if let Some(j) = labels.iter().position(|&l| l != 1 && l != 2) {
            return invalid(format!("label of column {} is {}, expected 1 or 2", j + 1, labels[j]));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return invalid(format!("non-finite value at row {}, column {}", k / n + 1, k % n + 1));
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        if n1 == 0 || n1 == n {
            return invalid("both groups need at least one sample");
        }
        Ok(Self { data, m, n, labels, n1 })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let m = rows.len();
        if let Some(i) = rows.iter().position(|r| r.len() != labels.len()) {
            return invalid(format!(
                "row {} has {} values but there are {} labels",
                i + 1,
                rows[i].len(),
                labels.len()
            ));
        }
        Self::new(rows.into_iter().flatten().collect(), m, labels)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n - self.n1
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `(mean of group 1, mean of group 2)` for row `i`.
    pub fn group_means(&self, i: usize) -> (f64, f64) {
        self.group_means_under(i, None)
    }

    fn group_means_under(&self, i: usize, perm: Option<&[usize]>) -> (f64, f64) {
        let row = self.row(i);
        let (mut s1, mut s2) = (0.0, 0.0);
        for (j, &label) in self.labels.iter().enumerate() {
            let x = match perm {
                Some(p) => row[p[j]],
                None => row[j],
            };
            if label == 1 {
                s1 += x;
            } else {
                s2 += x;
            }
        }
        (s1 / self.n1 as f64, s2 / self.n2() as f64)
    }

    fn group_stats_under(&self, i: usize, perm: Option<&[usize]>) -> [(f64, f64); 2] {
        let (mu1, mu2) = self.group_means_under(i, perm);
        let row = self.row(i);
        let (mut ss1, mut ss2) = (0.0, 0.0);
        for (j, &label) in self.labels.iter().enumerate() {
            let x = match perm {
                Some(p) => row[p[j]],
                None => row[j],
            };
            if label == 1 {
                ss1 += (x - mu1) * (x - mu1);
            } else {
                ss2 += (x - mu2) * (x - mu2);
            }
        }
        let var = |ss: f64, n: usize| if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        [(mu1, var(ss1, self.n1)), (mu2, var(ss2, self.n2()))]
    }

    /// Dataset with columns reordered as `X^(perm[j])`; labels stay positional.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.m {
            let row = self.row(i);
            data.extend(perm.iter().map(|&j| row[j]));
        }
        Ok(Self { data, ..self.clone() })
    }

    /// Keeps only the rows in `set`, in increasing order.
    pub fn restrict_rows(&self, set: &IndexSet) -> Result<Self> {
        if set.is_empty() {
            return invalid("row restriction must be nonempty");
        }
        let mut data = Vec::with_capacity(set.len() * self.n);
        for i in set.iter() {
            if i >= self.m {
                return invalid(format!("row {} out of range", i + 1));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self { data, m: set.len(), ..self.clone() })
    }

    /// Two-sided p-values of the chosen statistic.
    pub fn pvalues(&self, statistic: Statistic) -> PValueVector {
        self.pvalues_under(None, statistic)
    }

    /// p-values of the dataset after the column permutation `perm`, without materializing it.
    /// `perm` must be a valid permutation of `0..n`.
    pub(crate) fn pvalues_under(&self, perm: Option<&[usize]>, statistic: Statistic) -> PValueVector {
        let scale = (1.0 / self.n1 as f64 + 1.0 / self.n2() as f64).sqrt();
        let values = (0..self.m)
            .map(|i| {
                let z = match statistic {
                    Statistic::KnownVariance => {
                        let (mu1, mu2) = self.group_means_under(i, perm);
                        (mu2 - mu1).abs() / scale
                    }
                    Statistic::Welch => {
                        let [(mu1, v1), (mu2, v2)] = self.group_stats_under(i, perm);
                        let se = (v1 / self.n1 as f64 + v2 / self.n2() as f64).sqrt();
                        let d = (mu2 - mu1).abs();
                        if d == 0.0 {
                            0.0
                        } else if se == 0.0 {
                            f64::INFINITY
                        } else {
                            d / se
                        }
                    }
                };
                (2.0 * gaussian_tail(z)).min(1.0)
            })
            .collect();
        PValueVector { values }
    }

    /// Fold change `mean2 / mean1` per row.
    pub fn fold_changes(&self) -> Vec<FoldChange> {
        (0..self.m)
            .map(|i| {
                let (mu1, mu2) = self.group_means(i);
                FoldChange::from_means(mu1, mu2)
            })
            .collect()
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return invalid(format!("permutation has length {}, expected {n}", perm.len()));
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return invalid("group element is not a bijection of the sample columns");
        }
    }
    Ok(())
}

/// Two-sided p-values under the known unit-variance statistic.
pub fn two_sample_pvalues(ds: &TwoSampleDataset) -> PValueVector {
    ds.pvalues(Statistic::KnownVariance)
}

/// Ratio of group means `mean2 / mean1` and its natural log; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldChange {
    pub ratio: Option<f64>,
    pub log: Option<f64>,
}

impl FoldChange {
    pub fn from_means(mean1: f64, mean2: f64) -> Self {
        if mean1 == 0.0 {
            return Self { ratio: None, log: None };
        }
        let ratio = mean2 / mean1;
        let log = (ratio > 0.0).then(|| ratio.ln());
        Self { ratio: Some(ratio), log }
    }
}

pub fn fold_change(ds: &TwoSampleDataset) -> Vec<FoldChange> {
    ds.fold_changes()
}

/// True null set of a simulated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub h0: IndexSet,
}

impl GroundTruth {
    pub fn new(h0: IndexSet) -> Self {
        Self { h0 }
    }

    pub fn m(&self) -> usize {
        self.h0.universe()
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.h0.contains(i)
    }
}
