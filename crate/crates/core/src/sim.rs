//! Monte Carlo scenarios and coverage experiments.
//!
//! Replicate `r` of a scenario draws from `ChaCha8Rng` seeded with the scenario
//! seed on stream `r`, so any replicate can be regenerated on its own and the
//! results do not depend on thread scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::check_alpha;
use crate::calibration::{calibrate_lambda, PermutationPlan};
use crate::data::{GroundTruth, IndexSet, PValueVector, Statistic, TwoSampleDataset};
use crate::error::{invalid, Result};
use crate::reference::{dkw_zeta, jer_holds, markov_zeta, ReferenceFamily, Structure};
use crate::spatial::{build_segments, build_tree, calibrate_family, BudgetRule, Evidence};
use crate::special::{gaussian_tail, gaussian_tail_inv_unchecked};
use crate::templates::{Template, TemplateFamily, TemplateKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// i.i.d. uniform p-values, every hypothesis null.
    FullNullIid,
    /// Unit-variance Gaussian two-sample data; the last `alt_fraction` of the rows get
    /// group-2 mean `delta / s` with `s = sqrt(1/n1 + 1/n2)`.
    TwoSampleGaussian { delta: f64, alt_fraction: f64 },
    /// Two blocks of `m/2` identical one-sided p-values `Φ̄(X_1)`, `Φ̄(X_2)` with `corr(X_1, X_2) = rho`.
    EquicorrelatedPairs { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn full_null(m: usize, alpha: f64, replications: usize, seed: u64) -> Self {
        Self { kind: ScenarioKind::FullNullIid, m, n1: 0, n2: 0, alpha, replications, seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.m == 0 {
            return invalid("scenario needs m >= 1");
        }
        if self.replications == 0 {
            return invalid("scenario needs at least one replication");
        }
        match self.kind {
            ScenarioKind::FullNullIid => {}
            ScenarioKind::TwoSampleGaussian { delta, alt_fraction } => {
                if !(delta >= 0.0) || !delta.is_finite() {
                    return invalid(format!("delta={delta} must be finite and >= 0"));
                }
                if !(0.0..=1.0).contains(&alt_fraction) {
                    return invalid(format!("alternative fraction {alt_fraction} outside [0, 1]"));
                }
                if self.n1 == 0 || self.n2 == 0 {
                    return invalid("two-sample scenario needs n1 >= 1 and n2 >= 1");
                }
            }
            ScenarioKind::EquicorrelatedPairs { rho } => {
                if !(-1.0..=1.0).contains(&rho) {
                    return invalid(format!("rho={rho} outside [-1, 1]"));
                }
                if self.m % 2 != 0 {
                    return invalid(format!("equicorrelated pairs need an even m, got {}", self.m));
                }
            }
        }
        Ok(())
    }

    /// Null set implied by the scenario.
    pub fn truth(&self) -> GroundTruth {
        let m = self.m;
        match self.kind {
            ScenarioKind::TwoSampleGaussian { delta, alt_fraction } if delta > 0.0 => {
                let alt = (alt_fraction * m as f64).round() as usize;
                GroundTruth::new(IndexSet::range(0, m - alt, m))
            }
            _ => GroundTruth::new(IndexSet::full(m)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Sample {
    PValues(PValueVector),
    Dataset(TwoSampleDataset),
}

#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: usize,
    pub sample: Sample,
    pub truth: GroundTruth,
    /// Seed handed to any permutation plan run on this replicate.
    pub plan_seed: u64,
}

impl Replicate {
    pub fn pvalues(&self) -> PValueVector {
        match &self.sample {
            Sample::PValues(p) => p.clone(),
            Sample::Dataset(ds) => ds.pvalues(Statistic::KnownVariance),
        }
    }

    pub fn dataset(&self) -> Option<&TwoSampleDataset> {
        match &self.sample {
            Sample::Dataset(ds) => Some(ds),
            Sample::PValues(_) => None,
        }
    }
}

fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Draws replicate `r` of the scenario.
pub fn replicate(cfg: &ScenarioConfig, r: usize) -> Result<Replicate> {
    cfg.validate()?;
    Ok(draw(cfg, r, cfg.truth()))
}

fn draw(cfg: &ScenarioConfig, r: usize, truth: GroundTruth) -> Replicate {
    let mut rng = replicate_rng(cfg.seed, r);
    let m = cfg.m;
    let sample = match cfg.kind {
        ScenarioKind::FullNullIid => {
            Sample::PValues(PValueVector::new((0..m).map(|_| rng.random::<f64>()).collect()).expect("uniform draws"))
        }
        ScenarioKind::TwoSampleGaussian { delta, .. } => {
            let (n1, n2) = (cfg.n1, cfg.n2);
            let shift = delta / (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();
            let n = n1 + n2;
            let mut data = Vec::with_capacity(m * n);
            for i in 0..m {
                let mean2 = if truth.is_null(i) { 0.0 } else { shift };
                for j in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(if j < n1 { z } else { z + mean2 });
                }
            }
            let mut labels = vec![1u8; n1];
            labels.resize(n, 2);
            Sample::Dataset(TwoSampleDataset::new(data, m, labels).expect("valid shape"))
        }
        ScenarioKind::EquicorrelatedPairs { rho } => {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let x2 = rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2;
            let (p1, p2) = (gaussian_tail(z1), gaussian_tail(x2));
            let vals = (0..m).map(|i| if i < m / 2 { p1 } else { p2 }).collect();
            Sample::PValues(PValueVector::new(vals).expect("tail probabilities"))
        }
    };
    let plan_seed = rng.next_u64();
    Replicate { index: r, sample, truth, plan_seed }
}

/// All replicates in order.
pub fn simulate(cfg: &ScenarioConfig) -> Result<impl Iterator<Item = Replicate> + '_> {
    cfg.validate()?;
    let truth = cfg.truth();
    Ok((0..cfg.replications).map(move |r| draw(cfg, r, truth.clone())))
}

/// Single-region budget rules with `R1` the whole index set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SingleSetRule {
    Markov { t: f64 },
    Dkw,
    PermBeta { b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CoverageMethod {
    /// Uniform k0-Bonferroni bound over all selections.
    Bonferroni { k0: usize },
    Simes,
    /// Full-size template at a fixed `lambda`.
    Threshold { template: TemplateKind, lambda: f64 },
    /// Full-size template at the permutation-calibrated `lambda`.
    Calibrated { template: TemplateKind, b: usize },
    SingleSet { rule: SingleSetRule },
    Spatial { segment_size: usize, rule: BudgetRule, tree: bool },
    /// Non-uniform k0-Bonferroni bound `Σ_{i∈Ŝ} 1{p_i >= alpha k0/s0} + k0 - 1` applied to the
    /// `s0` smallest p-values, a bound that ignores the selection.
    SelectionEffect { s0: usize, k0: usize },
}

impl CoverageMethod {
    pub fn name(&self) -> String {
        match self {
            CoverageMethod::Bonferroni { k0 } => format!("bonferroni(k0={k0})"),
            CoverageMethod::Simes => "simes".into(),
            CoverageMethod::Threshold { template, lambda } => format!("threshold({template}, lambda={lambda})"),
            CoverageMethod::Calibrated { template, b } => format!("calibrated({template}, B={b})"),
            CoverageMethod::SingleSet { rule } => match rule {
                SingleSetRule::Markov { t } => format!("single_set(markov, t={t})"),
                SingleSetRule::Dkw => "single_set(dkw)".into(),
                SingleSetRule::PermBeta { b } => format!("single_set(perm_beta, B={b})"),
            },
            CoverageMethod::Spatial { segment_size, rule, tree } => {
                format!("spatial(s={segment_size}, {}, tree={tree})", rule.name())
            }
            CoverageMethod::SelectionEffect { s0, k0 } => format!("selection_effect(s0={s0}, k0={k0})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub method: String,
    pub scenario: ScenarioConfig,
    pub null_count: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub coverage: f64,
    /// Binomial standard error of the violation rate.
    pub mc_sd: f64,
    pub diagnostics: Vec<ReplicateOutcome>,
}

/// `∃k <= min(|H0|, thresholds.len()) : p_(k:H0) < t_k`.
fn threshold_violation(p: &PValueVector, truth: &GroundTruth, thresholds: impl Fn(usize) -> f64, size: usize) -> bool {
    let nulls = p.sorted_restriction(&truth.h0).expect("same universe");
    nulls.iter().take(size).enumerate().any(|(k, &x)| x < thresholds(k + 1))
}

fn need_dataset(rep: &Replicate, what: &str) -> Result<TwoSampleDataset> {
    rep.dataset().cloned().ok_or_else(|| {
        crate::error::Error::Config(format!("{what} needs a two-sample scenario"))
    })
}

fn evaluate(method: &CoverageMethod, rep: &Replicate, alpha: f64) -> Result<ReplicateOutcome> {
    let p = rep.pvalues();
    let m = p.len();
    let truth = &rep.truth;
    let outcome = |violated| ReplicateOutcome { violated, lambda: None };
    match *method {
        CoverageMethod::Bonferroni { k0 } => {
            if k0 == 0 || k0 > m {
                return invalid(format!("k0={k0} outside [1, {m}]"));
            }
            let cut = alpha * k0 as f64 / m as f64;
            let hits = truth.h0.iter().filter(|&i| p.get(i) < cut).count();
            Ok(outcome(hits >= k0))
        }
        CoverageMethod::Simes => {
            let v = threshold_violation(&p, truth, |k| alpha * k as f64 / m as f64, m);
            Ok(outcome(v))
        }
        CoverageMethod::Threshold { template, lambda } => {
            if !(0.0..=1.0).contains(&lambda) {
                return invalid(format!("lambda {lambda} outside [0, 1]"));
            }
            let tpl = Template::full(template, m)?;
            Ok(outcome(threshold_violation(&p, truth, |k| tpl.threshold(k, lambda), tpl.size())))
        }
        CoverageMethod::Calibrated { template, b } => {
            let ds = need_dataset(rep, "calibration")?;
            let tpl = Template::full(template, m)?;
            let plan = PermutationPlan::new(b, rep.plan_seed, ds.n())?;
            let cal = calibrate_lambda(&ds, alpha, &tpl, &plan)?;
            let v = threshold_violation(&p, truth, |k| tpl.threshold(k, cal.lambda), tpl.size());
            Ok(ReplicateOutcome { violated: v, lambda: Some(cal.lambda) })
        }
        CoverageMethod::SingleSet { rule } => {
            let all = IndexSet::full(m);
            let zeta = match rule {
                SingleSetRule::Markov { t } => markov_zeta(&p, &all, alpha, t)?,
                SingleSetRule::Dkw => dkw_zeta(&p, &all, alpha)?,
                SingleSetRule::PermBeta { b } => {
                    let ds = need_dataset(rep, "the perm_beta rule")?;
                    let plan = PermutationPlan::new(b, rep.plan_seed, ds.n())?;
                    crate::calibration::single_set_beta_zeta(&ds, &all, alpha, &plan)?
                }
            };
            let fam = ReferenceFamily::new(vec![(all, zeta)], Structure::Disjoint)?;
            Ok(outcome(!jer_holds(&fam, truth)))
        }
        CoverageMethod::Spatial { segment_size, rule, tree } => {
            let segments = build_segments(&[m], segment_size)?;
            let evidence = match rep.dataset() {
                Some(ds) => Evidence::Dataset(ds, Statistic::KnownVariance),
                None => Evidence::PValues(&p),
            };
            let rule = match rule {
                BudgetRule::PermBeta { b, .. } => BudgetRule::PermBeta { b, seed: rep.plan_seed },
                other => other,
            };
            let fam = if tree {
                build_tree(evidence, &segments, alpha, rule)?.family()
            } else {
                calibrate_family(evidence, &segments, alpha, rule)?
            };
            Ok(outcome(!jer_holds(&fam, truth)))
        }
        CoverageMethod::SelectionEffect { s0, k0 } => {
            if k0 == 0 || k0 > s0 || s0 > m {
                return invalid(format!("need 1 <= k0 <= s0 <= m, got k0={k0}, s0={s0}, m={m}"));
            }
            let cut = alpha * k0 as f64 / s0 as f64;
            let selected = &p.rank_order()[..s0];
            let v = selected.iter().filter(|&&i| p.get(i) >= cut).count() + k0 - 1;
            let false_pos = selected.iter().filter(|&&i| truth.is_null(i)).count();
            Ok(outcome(false_pos > v))
        }
    }
}

/// Runs `cfg.replications` replicates in parallel and tallies violations of the method's guarantee.
pub fn coverage_experiment(cfg: &ScenarioConfig, method: &CoverageMethod) -> Result<CoverageReport> {
    cfg.validate()?;
    let truth = cfg.truth();
    let diagnostics = (0..cfg.replications)
        .into_par_iter()
        .map(|r| evaluate(method, &draw(cfg, r, truth.clone()), cfg.alpha))
        .collect::<Result<Vec<_>>>()?;
    let violations = diagnostics.iter().filter(|d| d.violated).count();
    let n = cfg.replications as f64;
    let rate = violations as f64 / n;
    Ok(CoverageReport {
        method: method.name(),
        scenario: *cfg,
        null_count: truth.h0.len(),
        violations,
        violation_rate: rate,
        coverage: 1.0 - rate,
        mc_sd: (rate * (1.0 - rate) / n).sqrt(),
        diagnostics,
    })
}

/// Probability that the Simes bound fails in the two-block equicorrelated setting:
/// `alpha/2 + ∫_{alpha/2}^{alpha} Φ̄((q(alpha) - rho q(w))/r) dw + ∫_{alpha}^{1} Φ̄((q(alpha/2) - rho q(w))/r) dw`
/// with `q = Φ̄^{-1}` and `r = sqrt(1 - rho^2)`.
pub fn simes_violation_probability(rho: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(rho > -1.0 && rho < 1.0) {
        return invalid(format!("rho={rho} must lie strictly inside (-1, 1)"));
    }
    let r = (1.0 - rho * rho).sqrt();
    let q_a = gaussian_tail_inv_unchecked(alpha);
    let q_half = gaussian_tail_inv_unchecked(alpha / 2.0);
    // substitute w = Φ̄(z): dw = φ(z) dz, which keeps the integrands smooth near w = 1
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let first = adaptive_simpson(|z| gaussian_tail((q_a - rho * z) / r) * phi(z), q_a, q_half, 1e-12);
    let second = adaptive_simpson(|z| gaussian_tail((q_half - rho * z) / r) * phi(z), -40.0, q_a, 1e-12);
    Ok(alpha / 2.0 + first + second)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 50)
}
