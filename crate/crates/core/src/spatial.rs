//! Spatially structured reference families.
//!
//! Hypotheses are laid out along chromosomes. Each chromosome is cut into
//! consecutive segments of a fixed size, budgets are attached to each segment
//! through a union bound, and neighbouring segments can be merged pairwise into a
//! binary aggregation tree whose bound is the best multi-scale partition of `S`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{single_set_beta_zeta_with, PermutationPlan};
use crate::data::{IndexSet, PValueVector, Statistic, TwoSampleDataset};
use crate::error::{invalid, Result};
use crate::reference::{dkw_zeta, markov_zeta, ReferenceFamily, Structure};

/// A contiguous half-open interval `[start, end)` of 0-based hypothesis positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// `|S ∩ [start, end)|` by binary search on the sorted indices.
    pub fn count_in(&self, set: &IndexSet) -> usize {
        let s = set.as_slice();
        s.partition_point(|&i| i < self.end) - s.partition_point(|&i| i < self.start)
    }

    pub fn to_set(&self, m: usize) -> IndexSet {
        IndexSet::range(self.start, self.end, m)
    }

    fn disjoint(&self, other: &Interval) -> bool {
        self.end <= other.start || other.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub chrom: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentFamily {
    m: usize,
    segment_size: usize,
    chrom_sizes: Vec<usize>,
    /// `segments[chrom_ranges[c].0..chrom_ranges[c].1]` belong to chromosome `c`.
    chrom_ranges: Vec<(usize, usize)>,
    segments: Vec<Segment>,
}

/// Cuts each chromosome into segments of `s` consecutive positions; the last one may be short.
pub fn build_segments(m_per_chrom: &[usize], s: usize) -> Result<SegmentFamily> {
    if s == 0 {
        return invalid("segment size must be at least 1");
    }
    if m_per_chrom.is_empty() {
        return invalid("at least one chromosome is required");
    }
    if let Some(c) = m_per_chrom.iter().position(|&mc| mc == 0) {
        return invalid(format!("chromosome {} has no hypotheses", c + 1));
    }
    let mut segments = Vec::new();
    let mut chrom_ranges = Vec::with_capacity(m_per_chrom.len());
    let mut offset = 0;
    for (c, &mc) in m_per_chrom.iter().enumerate() {
        let first = segments.len();
        let mut start = 0;
        while start < mc {
            let end = (start + s).min(mc);
            segments.push(Segment { chrom: c, interval: Interval { start: offset + start, end: offset + end } });
            start = end;
        }
        chrom_ranges.push((first, segments.len()));
        offset += mc;
    }
    Ok(SegmentFamily { m: offset, segment_size: s, chrom_sizes: m_per_chrom.to_vec(), chrom_ranges, segments })
}

impl SegmentFamily {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn segment_size(&self) -> usize {
        self.segment_size
    }

    pub fn chromosomes(&self) -> usize {
        self.chrom_sizes.len()
    }

    pub fn chrom_size(&self, c: usize) -> usize {
        self.chrom_sizes[c]
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn chromosome(&self, c: usize) -> &[Segment] {
        let (a, b) = self.chrom_ranges[c];
        &self.segments[a..b]
    }

    /// `alpha_c = alpha m_c / m`.
    pub fn chrom_alpha(&self, c: usize, alpha: f64) -> f64 {
        alpha * self.chrom_sizes[c] as f64 / self.m as f64
    }
}

/// How a single region's budget `zeta = f(R, level, X)` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BudgetRule {
    /// Markov budget at threshold `t`; `None` uses `t = level^2`.
    Markov { t: Option<f64> },
    Dkw,
    /// Beta template calibrated by permutation on the rows of the region.
    PermBeta { b: usize, seed: u64 },
}

impl BudgetRule {
    pub fn name(&self) -> String {
        match self {
            BudgetRule::Markov { t: Some(t) } => format!("markov(t={t})"),
            BudgetRule::Markov { t: None } => "markov".into(),
            BudgetRule::Dkw => "dkw".into(),
            BudgetRule::PermBeta { b, .. } => format!("perm_beta(B={b})"),
        }
    }
}

/// Data the budgets are computed from.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    PValues(&'a PValueVector),
    Dataset(&'a TwoSampleDataset, Statistic),
}

enum Prepared<'a> {
    Owned(PValueVector, Option<(&'a TwoSampleDataset, Statistic)>),
    Borrowed(&'a PValueVector),
}

impl<'a> Prepared<'a> {
    fn new(ev: Evidence<'a>, m: usize) -> Result<Self> {
        let out = match ev {
            Evidence::PValues(p) => Prepared::Borrowed(p),
            Evidence::Dataset(ds, stat) => Prepared::Owned(ds.pvalues(stat), Some((ds, stat))),
        };
        if out.p().len() != m {
            return invalid(format!("evidence has {} hypotheses but the segments cover {m}", out.p().len()));
        }
        Ok(out)
    }

    fn p(&self) -> &PValueVector {
        match self {
            Prepared::Owned(p, _) => p,
            Prepared::Borrowed(p) => p,
        }
    }

    fn dataset(&self) -> Option<(&'a TwoSampleDataset, Statistic)> {
        match self {
            Prepared::Owned(_, ds) => *ds,
            Prepared::Borrowed(_) => None,
        }
    }

    fn zeta(&self, region: &IndexSet, level: f64, rule: BudgetRule) -> Result<usize> {
        match rule {
            BudgetRule::Markov { t } => markov_zeta(self.p(), region, level, t.unwrap_or(level * level)),
            BudgetRule::Dkw => dkw_zeta(self.p(), region, level),
            BudgetRule::PermBeta { b, seed } => {
                let Some((ds, stat)) = self.dataset() else {
                    return invalid("the perm_beta budget needs the two-sample data, not just p-values");
                };
                let plan = PermutationPlan::new(b, seed, ds.n())?;
                single_set_beta_zeta_with(ds, region, level, &plan, stat)
            }
        }
    }
}

/// Budgets for every segment at level `alpha_c / K_c`; the result is a disjoint family in segment order.
pub fn calibrate_family(
    evidence: Evidence<'_>,
    fam: &SegmentFamily,
    alpha: f64,
    rule: BudgetRule,
) -> Result<ReferenceFamily> {
    crate::bounds::check_alpha(alpha)?;
    let prepared = Prepared::new(evidence, fam.m)?;
    let items = fam
        .segments
        .par_iter()
        .map(|seg| {
            let (a, b) = fam.chrom_ranges[seg.chrom];
            let level = fam.chrom_alpha(seg.chrom, alpha) / (b - a) as f64;
            let region = seg.interval.to_set(fam.m);
            let zeta = prepared.zeta(&region, level, rule)?;
            Ok((region, zeta))
        })
        .collect::<Result<Vec<_>>>()?;
    ReferenceFamily::new(items, Structure::Disjoint)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub chrom: usize,
    pub interval: Interval,
    pub zeta: usize,
    /// Height above the leaves (leaves are 0).
    pub level: usize,
    pub children: Vec<usize>,
}

/// Binary aggregation tree over a [`SegmentFamily`]. Children always precede their parent in `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationTree {
    m: usize,
    nodes: Vec<TreeNode>,
    roots: Vec<usize>,
}

impl AggregationTree {
    /// Topology only: merges neighbours left to right, an unpaired last node moves up unchanged.
    /// Every budget starts at the trivial `|R_v|`.
    pub fn from_segments(fam: &SegmentFamily) -> Self {
        let mut nodes = Vec::new();
        let mut roots = Vec::new();
        for c in 0..fam.chromosomes() {
            let mut frontier: Vec<usize> = fam
                .chromosome(c)
                .iter()
                .map(|seg| {
                    nodes.push(TreeNode {
                        chrom: c,
                        interval: seg.interval,
                        zeta: seg.interval.len(),
                        level: 0,
                        children: Vec::new(),
                    });
                    nodes.len() - 1
                })
                .collect();
            let mut level = 0;
            while frontier.len() > 1 {
                level += 1;
                let mut next = Vec::with_capacity(frontier.len().div_ceil(2));
                for pair in frontier.chunks(2) {
                    if let [l, r] = *pair {
                        let interval = Interval { start: nodes[l].interval.start, end: nodes[r].interval.end };
                        nodes.push(TreeNode { chrom: c, interval, zeta: interval.len(), level, children: vec![l, r] });
                        next.push(nodes.len() - 1);
                    } else {
                        next.push(pair[0]);
                    }
                }
                frontier = next;
            }
            roots.extend(frontier);
        }
        Self { m: fam.m(), nodes, roots }
    }

    /// Leaves only: the segment family itself without coarser nodes.
    pub fn flat(fam: &SegmentFamily) -> Self {
        let nodes: Vec<TreeNode> = fam
            .segments()
            .iter()
            .map(|seg| TreeNode { chrom: seg.chrom, interval: seg.interval, zeta: seg.interval.len(), level: 0, children: Vec::new() })
            .collect();
        let roots = (0..nodes.len()).collect();
        Self { m: fam.m(), nodes, roots }
    }

    /// Replaces every budget with `f(node)`, clamped to the node size.
    pub fn with_budgets(mut self, mut f: impl FnMut(usize, &TreeNode) -> usize) -> Self {
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.zeta = f(i, node).min(node.interval.len());
        }
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn nodes_in_chrom(&self, c: usize) -> usize {
        self.nodes.iter().filter(|n| n.chrom == c).count()
    }

    /// The leaves alone, as a disjoint family.
    pub fn leaf_family(&self) -> ReferenceFamily {
        let items = self
            .nodes
            .iter()
            .filter(|n| n.children.is_empty())
            .map(|n| (n.interval.to_set(self.m), n.zeta))
            .collect();
        ReferenceFamily::new(items, Structure::Disjoint).expect("leaves are disjoint")
    }

    /// All nodes as a general reference family.
    pub fn family(&self) -> ReferenceFamily {
        let items = self.nodes.iter().map(|n| (n.interval.to_set(self.m), n.zeta)).collect();
        ReferenceFamily::new(items, Structure::General).expect("general families always validate")
    }
}

/// Tree with every node budgeted at level `alpha_c / N_c`, `N_c` the node count of chromosome `c`.
pub fn build_tree(evidence: Evidence<'_>, fam: &SegmentFamily, alpha: f64, rule: BudgetRule) -> Result<AggregationTree> {
    crate::bounds::check_alpha(alpha)?;
    let prepared = Prepared::new(evidence, fam.m)?;
    let mut tree = AggregationTree::from_segments(fam);
    let counts: Vec<usize> = (0..fam.chromosomes()).map(|c| tree.nodes_in_chrom(c)).collect();
    let zetas = tree
        .nodes
        .par_iter()
        .map(|node| {
            let level = fam.chrom_alpha(node.chrom, alpha) / counts[node.chrom] as f64;
            prepared.zeta(&node.interval.to_set(fam.m), level, rule)
        })
        .collect::<Result<Vec<_>>>()?;
    tree = tree.with_budgets(|i, _| zetas[i]);
    Ok(tree)
}

/// Best bound over partitions of `S` by tree nodes:
/// `best(v) = min(min(zeta_v, |S ∩ R_v|), Σ_children best(w))`, summed over the roots.
pub fn tree_bound(set: &IndexSet, tree: &AggregationTree) -> usize {
    let mut best = vec![0usize; tree.nodes.len()];
    for (i, node) in tree.nodes.iter().enumerate() {
        let own = node.zeta.min(node.interval.count_in(set));
        best[i] = if node.children.is_empty() {
            own
        } else {
            own.min(node.children.iter().map(|&c| best[c]).sum())
        };
    }
    let covered: usize = tree.roots.iter().map(|&r| tree.nodes[r].interval.count_in(set)).sum();
    let total = tree.roots.iter().map(|&r| best[r]).sum::<usize>() + set.len() - covered;
    total.min(set.len())
}

/// Same as [`tree_bound`] for a checked pair of universes.
pub fn tree_bound_checked(set: &IndexSet, tree: &AggregationTree) -> Result<usize> {
    if set.universe() != tree.m {
        return invalid(format!("selection lives in m={} but the tree covers m={}", set.universe(), tree.m));
    }
    Ok(tree_bound(set, tree))
}

/// Exhaustive minimum over every collection of pairwise disjoint nodes; a test oracle.
#[doc(hidden)]
pub fn tree_bound_exhaustive(set: &IndexSet, tree: &AggregationTree) -> Option<usize> {
    let n = tree.nodes.len();
    if n > 20 {
        return None;
    }
    let mut best = set.len();
    'outer: for mask in 0u32..(1 << n) {
        let chosen: Vec<&TreeNode> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &tree.nodes[i]).collect();
        for (a, x) in chosen.iter().enumerate() {
            for y in &chosen[a + 1..] {
                if !x.interval.disjoint(&y.interval) {
                    continue 'outer;
                }
            }
        }
        let inside: usize = chosen.iter().map(|v| v.interval.count_in(set)).sum();
        let budget: usize = chosen.iter().map(|v| v.zeta.min(v.interval.count_in(set))).sum();
        best = best.min(budget + set.len() - inside);
    }
    Some(best)
}
