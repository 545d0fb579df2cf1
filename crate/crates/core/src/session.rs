//! A loaded analysis: identifiers, p-values, optional two-sample data, calibrations and
//! an optional spatial tree, plus selection resolution and the JSON report types.
//!
//! The CLI, the HTTP server and the Python bindings all answer queries through
//! [`Session`], so identical inputs give identical numbers everywhere.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{check_alpha, envelope, KBonferroni, PostHocBound, Simes, ThresholdBound};
use crate::calibration::{calibrate_lambda_with, CalibrationResult, PermutationPlan};
use crate::data::{FoldChange, IndexSet, PValueVector, Statistic, TwoSampleDataset};
use crate::error::{invalid, Error, Result};
use crate::reference::{disjoint_sum_bound, ReferenceFamily};
use crate::sim::CoverageReport;
use crate::spatial::{build_segments, build_tree, calibrate_family, tree_bound, AggregationTree, BudgetRule, Evidence};
use crate::templates::{Template, TemplateFamily, TemplateKind};

pub const SCHEMA_VERSION: u32 = 1;

/// A bound method as named on the command line and over HTTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Simes,
    Bonferroni { k0: usize },
    /// Template bound at the session's calibrated `lambda`; `None` picks the first calibration.
    Calibrated { template: Option<TemplateKind> },
    /// Tree (or flat segment) bound from the session's spatial family.
    Spatial,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.as_str(), None),
        };
        let method = match (head, arg) {
            ("simes", None) => Method::Simes,
            ("bonf" | "bonferroni", None) => Method::Bonferroni { k0: 1 },
            ("bonf" | "bonferroni", Some(k)) => Method::Bonferroni {
                k0: k.parse().map_err(|_| Error::InvalidInput(format!("bad k0 '{k}' in method '{s}'")))?,
            },
            ("calibrated", None) => Method::Calibrated { template: None },
            ("calibrated", Some(t)) => Method::Calibrated { template: Some(t.parse()?) },
            ("linear" | "beta", None) => Method::Calibrated { template: Some(head.parse()?) },
            ("spatial", None) => Method::Spatial,
            _ => return invalid(format!("unknown method '{s}'; expected simes, bonf[:k0], calibrated[:linear|beta] or spatial")),
        };
        Ok(method)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Simes => f.write_str("simes"),
            Method::Bonferroni { k0 } => write!(f, "bonf:{k0}"),
            Method::Calibrated { template: Some(t) } => write!(f, "calibrated:{t}"),
            Method::Calibrated { template: None } => f.write_str("calibrated"),
            Method::Spatial => f.write_str("spatial"),
        }
    }
}

/// Filters combined by intersection; with no filter at all the selection is every hypothesis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
    /// 1-based positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    /// The `k` smallest p-values, ties broken by position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    /// Hypotheses rejected by the BH step-up procedure at this level (used only as a selector).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bh: Option<f64>,
    /// `log(fold change) > x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fc_above: Option<f64>,
    /// `log(fold change) < x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fc_below: Option<f64>,
    /// `p < x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_below: Option<f64>,
}

impl SelectionSpec {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn is_all(&self) -> bool {
        *self == Self::default()
    }

    /// Parses `term&term&...` with terms `all`, `top:K`, `bh:Q`, `fc>X`, `fc<X`, `p<X`,
    /// `ids:a,b,c` and `idx:1,2,3`.
    pub fn parse(expr: &str) -> Result<Self> {
        let mut spec = Self::default();
        for term in expr.split('&').map(str::trim) {
            let num = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number in selection term '{term}'")))
            };
            let dup = |taken: bool| if taken { invalid(format!("selection term '{term}' repeats a filter")) } else { Ok(()) };
            if term.eq_ignore_ascii_case("all") {
                continue;
            } else if let Some(k) = term.strip_prefix("top:") {
                dup(spec.top.is_some())?;
                spec.top = Some(k.trim().parse().map_err(|_| Error::InvalidInput(format!("bad count in '{term}'")))?);
            } else if let Some(q) = term.strip_prefix("bh:") {
                dup(spec.bh.is_some())?;
                spec.bh = Some(num(q)?);
            } else if let Some(x) = term.strip_prefix("fc>") {
                dup(spec.fc_above.is_some())?;
                spec.fc_above = Some(num(x)?);
            } else if let Some(x) = term.strip_prefix("fc<") {
                dup(spec.fc_below.is_some())?;
                spec.fc_below = Some(num(x)?);
            } else if let Some(x) = term.strip_prefix("p<") {
                dup(spec.p_below.is_some())?;
                spec.p_below = Some(num(x)?);
            } else if let Some(list) = term.strip_prefix("ids:") {
                dup(spec.ids.is_some())?;
                spec.ids = Some(list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect());
            } else if let Some(list) = term.strip_prefix("idx:") {
                dup(spec.indices.is_some())?;
                let parsed = list
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad index '{s}' in '{term}'"))))
                    .collect::<Result<Vec<_>>>()?;
                spec.indices = Some(parsed);
            } else {
                return invalid(format!("unknown selection term '{term}'"));
            }
        }
        Ok(spec)
    }
}

/// A selection with a display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSelection {
    pub name: String,
    pub spec: SelectionSpec,
}

impl NamedSelection {
    /// `name=expr`, or a bare `expr` which also serves as the name.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, expr) = match text.split_once('=') {
            Some((n, e)) if !n.contains(['<', '>', ':', '&']) => (n.trim().to_string(), e),
            _ => (text.trim().to_string(), text),
        };
        Ok(Self { name, spec: SelectionSpec::parse(expr)? })
    }
}

/// Benjamini–Hochberg step-up cutoff `q k*/m`, with `k* = max{k : p_(k) <= q k/m}`; `None` when nothing is rejected.
pub fn bh_cutoff(p: &PValueVector, q: f64) -> Option<f64> {
    let sorted = p.sorted();
    let m = sorted.len() as f64;
    (1..=sorted.len()).rev().find(|&k| sorted[k - 1] <= q * k as f64 / m).map(|k| q * k as f64 / m)
}

/// Bound on one selection, as reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub name: String,
    pub size: usize,
    #[serde(rename = "V")]
    pub v: usize,
    pub tp_lower: usize,
    pub fdp_upper: f64,
}

impl SelectionResult {
    pub fn new(name: impl Into<String>, size: usize, v: usize) -> Self {
        let fdp_upper = if size == 0 { 0.0 } else { v as f64 / size as f64 };
        Self { name: name.into(), size, v, tp_lower: size - v, fdp_upper }
    }
}

/// Answer to a single bound query over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundAnswer {
    pub size: usize,
    #[serde(rename = "V")]
    pub v: usize,
    pub tp_lower: usize,
    pub fdp_upper: f64,
    pub method: String,
    pub lambda: Option<f64>,
}

/// Envelope over the level sets, as parallel arrays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub k: Vec<usize>,
    /// Identifier added at each step, i.e. `S_k = order[..k]`.
    pub order: Vec<String>,
    #[serde(rename = "V")]
    pub v: Vec<usize>,
    pub tp_lower: Vec<usize>,
    pub fdp_upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub template: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub alpha: f64,
    pub rank: usize,
    pub lambda: f64,
    pub pivots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialNode {
    pub chrom: String,
    /// 1-based inclusive positions.
    pub first: usize,
    pub last: usize,
    pub level: usize,
    pub zeta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialSummary {
    pub segment_size: usize,
    pub budget: String,
    pub tree: bool,
    pub nodes: Vec<SpatialNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub method: String,
    pub scenario: crate::sim::ScenarioConfig,
    pub null_count: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub coverage: f64,
    pub mc_sd: f64,
}

impl From<&CoverageReport> for SimulationSummary {
    fn from(r: &CoverageReport) -> Self {
        Self {
            method: r.method.clone(),
            scenario: r.scenario,
            null_count: r.null_count,
            violations: r.violations,
            violation_rate: r.violation_rate,
            coverage: r.coverage,
            mc_sd: r.mc_sd,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    pub input_sha256: BTreeMap<String, String>,
}

/// The machine-readable report written by every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub method: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub selections: Vec<SelectionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    pub provenance: Provenance,
}

impl BoundReport {
    pub fn new(method: impl Into<String>, alpha: f64, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: method.into(),
            alpha,
            lambda: None,
            selections: Vec::new(),
            envelope: None,
            calibration: None,
            spatial: None,
            simulation: None,
            provenance,
        }
    }
}

/// Constant description of a session, served at `/api/meta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub m: usize,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub alpha: f64,
    pub templates: Vec<String>,
    pub lambda: BTreeMap<String, f64>,
    pub methods: Vec<String>,
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub id: String,
    pub p: f64,
    pub log_fc: Option<f64>,
}

#[derive(Debug, Clone)]
struct Calibration {
    template: Template,
    result: CalibrationResult,
}

#[derive(Debug, Clone)]
struct SpatialState {
    chrom_names: Vec<String>,
    segment_size: usize,
    rule: BudgetRule,
    tree: bool,
    structure: AggregationTree,
    leaves: ReferenceFamily,
}

#[derive(Debug, Clone)]
pub struct Session {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
    p: PValueVector,
    dataset: Option<TwoSampleDataset>,
    statistic: Statistic,
    fold: Option<Vec<FoldChange>>,
    alpha: f64,
    calibrations: Vec<Calibration>,
    spatial: Option<SpatialState>,
    digest: Option<String>,
}

impl Session {
    pub fn from_pvalues(ids: Vec<String>, p: PValueVector, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let lookup = index_ids(&ids, p.len())?;
        Ok(Self {
            ids,
            lookup,
            p,
            dataset: None,
            statistic: Statistic::KnownVariance,
            fold: None,
            alpha,
            calibrations: Vec::new(),
            spatial: None,
            digest: None,
        })
    }

    pub fn from_dataset(ids: Vec<String>, ds: TwoSampleDataset, alpha: f64, statistic: Statistic) -> Result<Self> {
        let p = ds.pvalues(statistic);
        let mut session = Self::from_pvalues(ids, p, alpha)?;
        session.fold = Some(ds.fold_changes());
        session.dataset = Some(ds);
        session.statistic = statistic;
        Ok(session)
    }

    /// Content digest reported in `/api/meta`.
    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.digest = Some(digest.into());
        self
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn pvalues(&self) -> &PValueVector {
        &self.p
    }

    pub fn dataset(&self) -> Option<&TwoSampleDataset> {
        self.dataset.as_ref()
    }

    /// Calibrates `lambda` for a template of size `size` (default `m`) and keeps the result.
    pub fn calibrate(&mut self, kind: TemplateKind, size: Option<usize>, b: usize, seed: u64) -> Result<&CalibrationResult> {
        let Some(ds) = &self.dataset else {
            return Err(Error::Config("calibrated methods need two-sample input, not a p-value file".into()));
        };
        let template = Template::new(kind, self.p.len(), size.unwrap_or(self.p.len()))?;
        let plan = PermutationPlan::new(b, seed, ds.n())?;
        let result = calibrate_lambda_with(ds, self.alpha, &template, &plan, self.statistic)?;
        self.calibrations.retain(|c| c.template.kind != kind);
        self.calibrations.push(Calibration { template, result });
        Ok(&self.calibrations.last().expect("just pushed").result)
    }

    pub fn calibration(&self, kind: Option<TemplateKind>) -> Option<&CalibrationResult> {
        self.find_calibration(kind).map(|c| &c.result)
    }

    pub fn calibration_summary(&self, kind: Option<TemplateKind>) -> Option<CalibrationSummary> {
        self.find_calibration(kind).map(|c| CalibrationSummary {
            template: c.template.kind.to_string(),
            k: c.template.size,
            b: c.result.b,
            seed: c.result.seed,
            alpha: c.result.alpha,
            rank: c.result.rank,
            lambda: c.result.lambda,
            pivots: c.result.pivots.clone(),
        })
    }

    fn find_calibration(&self, kind: Option<TemplateKind>) -> Option<&Calibration> {
        match kind {
            Some(k) => self.calibrations.iter().find(|c| c.template.kind == k),
            None => self.calibrations.first(),
        }
    }

    /// Builds segment budgets over chromosomes given by consecutive runs of `chrom_labels`
    /// (one label per hypothesis; `None` means a single chromosome).
    pub fn attach_spatial(
        &mut self,
        chrom_labels: Option<&[String]>,
        segment_size: usize,
        rule: BudgetRule,
        tree: bool,
    ) -> Result<()> {
        let (names, sizes) = match chrom_labels {
            Some(labels) => chromosome_runs(labels, self.m())?,
            None => (vec!["1".to_string()], vec![self.m()]),
        };
        let segments = build_segments(&sizes, segment_size)?;
        let evidence = match &self.dataset {
            Some(ds) => Evidence::Dataset(ds, self.statistic),
            None => Evidence::PValues(&self.p),
        };
        let (structure, leaves) = if tree {
            let t = build_tree(evidence, &segments, self.alpha, rule)?;
            let leaves = t.leaf_family();
            (t, leaves)
        } else {
            let fam = calibrate_family(evidence, &segments, self.alpha, rule)?;
            let mut zetas = fam.items().iter().map(|it| it.zeta);
            let flat = AggregationTree::flat(&segments).with_budgets(|_, _| zetas.next().expect("one budget per segment"));
            (flat, fam)
        };
        self.spatial = Some(SpatialState { chrom_names: names, segment_size, rule, tree, structure, leaves });
        Ok(())
    }

    pub fn spatial_summary(&self) -> Option<SpatialSummary> {
        self.spatial.as_ref().map(|s| SpatialSummary {
            segment_size: s.segment_size,
            budget: s.rule.name(),
            tree: s.tree,
            nodes: s
                .structure
                .nodes()
                .iter()
                .map(|n| SpatialNode {
                    chrom: s.chrom_names[n.chrom].clone(),
                    first: n.interval.start + 1,
                    last: n.interval.end,
                    level: n.level,
                    zeta: n.zeta,
                })
                .collect(),
        })
    }

    /// Method names this session can answer.
    pub fn methods(&self) -> Vec<String> {
        let mut out = vec!["simes".to_string(), "bonf".to_string()];
        out.extend(self.calibrations.iter().map(|c| format!("calibrated:{}", c.template.kind)));
        if self.spatial.is_some() {
            out.push("spatial".into());
        }
        out
    }

    pub fn meta(&self) -> Meta {
        Meta {
            m: self.m(),
            n1: self.dataset.as_ref().map(|d| d.n1()),
            n2: self.dataset.as_ref().map(|d| d.n2()),
            alpha: self.alpha,
            templates: self.calibrations.iter().map(|c| c.template.name()).collect(),
            lambda: self.calibrations.iter().map(|c| (c.template.name(), c.result.lambda)).collect(),
            methods: self.methods(),
            digest: self.digest.clone(),
        }
    }

    /// One record per hypothesis in input order; needs two-sample data for the fold changes.
    pub fn points(&self) -> Result<Vec<Point>> {
        let Some(fold) = &self.fold else {
            return Err(Error::Config("points need two-sample input; this session only has p-values".into()));
        };
        Ok(self
            .ids
            .iter()
            .zip(self.p.values())
            .zip(fold)
            .map(|((id, &p), fc)| Point { id: id.clone(), p, log_fc: fc.log })
            .collect())
    }

    pub fn resolve(&self, spec: &SelectionSpec) -> Result<IndexSet> {
        let m = self.m();
        let mut keep = vec![true; m];
        let mut restrict = |mask: Vec<bool>| keep.iter_mut().zip(mask).for_each(|(k, b)| *k &= b);
        if let Some(ids) = &spec.ids {
            let mut mask = vec![false; m];
            let mut unknown = Vec::new();
            for id in ids {
                match self.lookup.get(id) {
                    Some(&i) => mask[i] = true,
                    None => unknown.push(id.clone()),
                }
            }
            if !unknown.is_empty() {
                return Err(Error::UnknownIds(unknown));
            }
            restrict(mask);
        }
        if let Some(idx) = &spec.indices {
            let set = IndexSet::from_one_based(idx.iter().copied().collect::<std::collections::BTreeSet<_>>(), m)?;
            restrict((0..m).map(|i| set.contains(i)).collect());
        }
        if let Some(k) = spec.top {
            let mut mask = vec![false; m];
            self.p.rank_order().into_iter().take(k).for_each(|i| mask[i] = true);
            restrict(mask);
        }
        if let Some(q) = spec.bh {
            if !(q > 0.0 && q <= 1.0) {
                return invalid(format!("BH level {q} outside (0, 1]"));
            }
            let cut = bh_cutoff(&self.p, q);
            restrict(self.p.values().iter().map(|&x| cut.is_some_and(|c| x <= c)).collect());
        }
        for (bound, above) in [(spec.fc_above, true), (spec.fc_below, false)] {
            if let Some(x) = bound {
                let Some(fold) = &self.fold else {
                    return Err(Error::Config("fold-change filters need two-sample input".into()));
                };
                restrict(fold.iter().map(|fc| fc.log.is_some_and(|l| if above { l > x } else { l < x })).collect());
            }
        }
        if let Some(x) = spec.p_below {
            restrict(self.p.values().iter().map(|&v| v < x).collect());
        }
        Ok(IndexSet::from_predicate(m, |i| keep[i]))
    }

    fn evaluator(&self, method: Method) -> Result<(Box<dyn PostHocBound + '_>, Option<f64>, String)> {
        Ok(match method {
            Method::Simes => (Box::new(Simes::new(&self.p, self.alpha)?), None, method.to_string()),
            Method::Bonferroni { k0 } => (Box::new(KBonferroni::new(&self.p, self.alpha, k0)?), None, method.to_string()),
            Method::Calibrated { template } => {
                let cal = self.find_calibration(template).ok_or_else(|| {
                    Error::Config(match template {
                        Some(t) => format!("no calibration for the {t} template in this session"),
                        None => "no calibrated template in this session".into(),
                    })
                })?;
                let bound = ThresholdBound::new(&self.p, &cal.template, cal.result.lambda)?;
                (Box::new(bound), Some(cal.result.lambda), format!("calibrated:{}", cal.template.kind))
            }
            Method::Spatial => {
                let state = self.spatial.as_ref().ok_or_else(|| Error::Config("no spatial family in this session".into()))?;
                let name = format!("spatial:{}", state.rule.name());
                if state.tree {
                    (Box::new(move |s: &IndexSet| tree_bound(s, &state.structure)), None, name)
                } else {
                    (Box::new(move |s: &IndexSet| disjoint_sum_bound(s, &state.leaves)), None, name)
                }
            }
        })
    }

    /// Bound on an already resolved set.
    pub fn bound_set(&self, method: Method, set: &IndexSet) -> Result<BoundAnswer> {
        if set.universe() != self.m() {
            return invalid(format!("selection lives in m={} but the session has m={}", set.universe(), self.m()));
        }
        let (bound, lambda, name) = self.evaluator(method)?;
        let r = SelectionResult::new("", set.len(), bound.bound(set));
        Ok(BoundAnswer { size: r.size, v: r.v, tp_lower: r.tp_lower, fdp_upper: r.fdp_upper, method: name, lambda })
    }

    pub fn bound(&self, method: Method, spec: &SelectionSpec) -> Result<BoundAnswer> {
        self.bound_set(method, &self.resolve(spec)?)
    }

    pub fn bound_named(&self, method: Method, sel: &NamedSelection) -> Result<SelectionResult> {
        let ans = self.bound(method, &sel.spec)?;
        Ok(SelectionResult::new(sel.name.clone(), ans.size, ans.v))
    }

    /// Method display name and `lambda`, without evaluating anything.
    pub fn describe(&self, method: Method) -> Result<(String, Option<f64>)> {
        let (_, lambda, name) = self.evaluator(method)?;
        Ok((name, lambda))
    }

    pub fn envelope(&self, method: Method) -> Result<EnvelopeReport> {
        let (bound, lambda, name) = self.evaluator(method)?;
        let env = envelope(&self.p, bound.as_ref());
        let order = self.p.rank_order().into_iter().map(|i| self.ids[i].clone()).collect();
        Ok(EnvelopeReport {
            method: name,
            lambda,
            k: env.rows.iter().map(|r| r.k).collect(),
            order,
            v: env.rows.iter().map(|r| r.v).collect(),
            tp_lower: env.tp_lower(),
            fdp_upper: env.fdp_upper(),
        })
    }
}

fn index_ids(ids: &[String], m: usize) -> Result<HashMap<String, usize>> {
    if ids.len() != m {
        return invalid(format!("{} identifiers for {m} hypotheses", ids.len()));
    }
    let mut lookup = HashMap::with_capacity(m);
    for (i, id) in ids.iter().enumerate() {
        if let Some(j) = lookup.insert(id.clone(), i) {
            return invalid(format!("identifier '{id}' appears at positions {} and {}", j + 1, i + 1));
        }
    }
    Ok(lookup)
}

/// Consecutive runs of equal labels; a label reappearing after another run is rejected.
pub fn chromosome_runs(labels: &[String], m: usize) -> Result<(Vec<String>, Vec<usize>)> {
    if labels.len() != m {
        return invalid(format!("{} chromosome labels for {m} hypotheses", labels.len()));
    }
    let mut names: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if names.last() == Some(label) {
            *sizes.last_mut().expect("paired with names") += 1;
        } else {
            if names.contains(label) {
                return invalid(format!(
                    "chromosome '{label}' resumes at position {} after another chromosome; sort the rows by position",
                    i + 1
                ));
            }
            names.push(label.clone());
            sizes.push(1);
        }
    }
    Ok((names, sizes))
}
