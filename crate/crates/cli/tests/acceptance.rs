//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Oracles here are written independently of the library code they check.

use std::process::Command;
use std::time::{Duration, Instant};

use posthoc::{
    augmentation_bound, beta_cdf, build_segments, build_tree, coverage_experiment, disjoint_sum_bound, dkw_zeta,
    gaussian_tail, optimal_bound, simes_bound, simes_graphical_u, simes_violation_probability, threshold_bound,
    tree_bound, AggregationTree, BudgetRule, CoverageMethod, Evidence, IndexSet, PValueVector, ReferenceFamily,
    ScenarioConfig, ScenarioKind, SingleSetRule, Structure, Template, TemplateKind,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

fn selection_effect() -> Outcome {
    let start = Instant::now();
    let analytic = 1.0 - beta_cdf(0.025, 5.0, 496.0).unwrap();
    // P(5th order statistic of 500 uniforms >= 0.025) = P(Bin(500, 0.025) <= 4)
    let binomial: f64 = (0..=4u64)
        .map(|j| (ln_choose(500, j) + j as f64 * 0.025f64.ln() + (500 - j) as f64 * 0.975f64.ln()).exp())
        .sum();
    let cfg = ScenarioConfig::full_null(500, 0.05, 100_000, 11);
    let rep = coverage_experiment(&cfg, &CoverageMethod::SelectionEffect { s0: 10, k0: 5 }).unwrap();
    let elapsed = start.elapsed();
    let near = |x: f64| (x - 0.005).abs() <= 0.002;
    outcome(
        near(analytic) && near(binomial) && near(rep.coverage) && (analytic - binomial).abs() < 1e-10 && elapsed.as_secs_f64() < 10.0,
        format!("beta {analytic:.5}, binomial {binomial:.5}, simulated {:.5} (10^5 reps), {}", rep.coverage, secs(elapsed)),
    )
}

fn bonferroni_coverage() -> Outcome {
    let start = Instant::now();
    let (m, alpha) = (500, 0.05);
    let cfg = ScenarioConfig::full_null(m, alpha, 10_000, 21);
    let rep = coverage_experiment(&cfg, &CoverageMethod::Bonferroni { k0: 1 }).unwrap();
    let target = (1.0 - alpha / m as f64).powi(m as i32);
    let elapsed = start.elapsed();
    outcome(
        (rep.coverage - target).abs() <= 0.01 && elapsed.as_secs_f64() < 30.0,
        format!("coverage {:.4} vs {target:.4}, {}", rep.coverage, secs(elapsed)),
    )
}

fn simes_jer() -> Outcome {
    let alpha = 0.1;
    let cfg = ScenarioConfig::full_null(200, alpha, 10_000, 31);
    let rep = coverage_experiment(&cfg, &CoverageMethod::Simes).unwrap();
    let limit = alpha + 3.0 * (alpha * (1.0 - alpha) / 1e4).sqrt();
    outcome(rep.violation_rate <= limit, format!("violation {:.4} <= {limit:.4}", rep.violation_rate))
}

fn calibration_validity() -> Outcome {
    let start = Instant::now();
    let alpha = 0.2;
    let mut worst = Vec::new();
    let mut pass = true;
    for (label, delta) in [("full-null", 0.0), ("half-null", 3.0)] {
        for template in [TemplateKind::Linear, TemplateKind::Beta] {
            let cfg = ScenarioConfig {
                kind: ScenarioKind::TwoSampleGaussian { delta, alt_fraction: 0.5 },
                m: 50,
                n1: 50,
                n2: 50,
                alpha,
                replications: 1000,
                seed: 41,
            };
            let rep = coverage_experiment(&cfg, &CoverageMethod::Calibrated { template, b: 100 }).unwrap();
            let ok = rep.violation_rate <= alpha + 3.0 * rep.mc_sd;
            pass &= ok;
            worst.push(format!("{label}/{template} {:.3}", rep.violation_rate));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 600.0;
    outcome(pass, format!("{} (limit alpha + 3 sd), {}", worst.join(", "), secs(elapsed)))
}

/// `max{|A| : A ⊆ S, |A ∩ R_k| <= zeta_k ∀k}` by subset dynamic programming.
fn brute_vstar(m: usize, regions: &[(u32, usize)]) -> Vec<usize> {
    let feasible = |a: u32| regions.iter().all(|&(r, z)| (a & r).count_ones() as usize <= z);
    let mut best = vec![0usize; 1 << m];
    for s in 0u32..(1 << m) {
        best[s as usize] = if feasible(s) {
            s.count_ones() as usize
        } else {
            (0..m).filter(|&i| s & (1 << i) != 0).map(|i| best[(s & !(1 << i)) as usize]).max().unwrap_or(0)
        };
    }
    best
}

fn to_set(mask: u32, m: usize) -> IndexSet {
    IndexSet::from_predicate(m, |i| mask & (1 << i) != 0)
}

fn random_family(r: &mut ChaCha8Rng, m: usize, structure: Structure) -> Vec<(u32, usize)> {
    let k = r.random_range(1..=4usize);
    let regions: Vec<u32> = match structure {
        Structure::General => (0..k).map(|_| r.random_range(0..(1u32 << m))).collect(),
        Structure::Nested => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(r);
            let mut cuts: Vec<usize> = (0..k).map(|_| r.random_range(0..=m)).collect();
            cuts.sort_unstable();
            cuts.iter().map(|&c| order[..c].iter().fold(0u32, |acc, &i| acc | 1 << i)).collect()
        }
        Structure::Disjoint => {
            let mut parts = vec![0u32; k];
            for i in 0..m {
                let owner = r.random_range(0..=k);
                if owner < k {
                    parts[owner] |= 1 << i;
                }
            }
            parts
        }
    };
    regions
        .into_iter()
        .map(|reg| {
            let size = reg.count_ones() as usize;
            (reg, r.random_range(0..=size))
        })
        .collect()
}

fn oracle_equivalences() -> Outcome {
    let mut r = rng(51);
    let mut exceptions = 0usize;
    let mut checked = 0usize;
    for inst in 0..500 {
        let m = r.random_range(1..=12usize);
        let structure = [Structure::General, Structure::Nested, Structure::Disjoint][inst % 3];
        let regions = random_family(&mut r, m, structure);
        let family =
            ReferenceFamily::new(regions.iter().map(|&(reg, z)| (to_set(reg, m), z)).collect(), structure).unwrap();
        let oracle = brute_vstar(m, &regions);
        for s in 0u32..(1 << m) {
            let set = to_set(s, m);
            let vstar = optimal_bound(&set, &family).unwrap();
            let aug = augmentation_bound(&set, &family);
            let dis = disjoint_sum_bound(&set, &family);
            checked += 1;
            let ok = vstar == oracle[s as usize]
                && vstar <= aug
                && vstar <= dis
                && (structure != Structure::Nested || aug == vstar)
                && (structure != Structure::Disjoint || dis == vstar);
            if !ok {
                exceptions += 1;
            }
        }
    }
    outcome(exceptions == 0, format!("{exceptions} exceptions over 500 families, {checked} selections"))
}

fn identities() -> Outcome {
    let mut r = rng(61);
    let mut exceptions = 0;
    for _ in 0..1000 {
        let m = r.random_range(1..=40usize);
        let ties = r.random_bool(0.3);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let x: f64 = r.random::<f64>() * r.random::<f64>();
                if ties {
                    (x * 20.0).round() / 20.0
                } else {
                    x
                }
            })
            .collect();
        let p = PValueVector::new(p).unwrap();
        let alpha = r.random_range(0.01..0.5);
        let set = IndexSet::from_predicate(m, |_| r.random_bool(0.6));
        let simes = simes_bound(&p, &set, alpha).unwrap().v;
        let linear = threshold_bound(&p, &set, &Template::linear(m), alpha).unwrap().v;
        let u = simes_graphical_u(&p, &set, alpha).unwrap();
        if simes != linear || set.len() - simes != u {
            exceptions += 1;
        }
    }
    outcome(exceptions == 0, format!("{exceptions} exceptions over 1000 instances"))
}

fn psi() -> Outcome {
    let alpha = 0.2;
    let at_zero = simes_violation_probability(0.0, alpha).unwrap();
    let mut pass = (at_zero - alpha).abs() <= 1e-6;
    let mut notes = vec![format!("Psi(0)={at_zero:.9}")];
    let n = 1_000_000usize;
    for (j, rho) in [-0.5f64, 0.0, 0.5, 0.9].into_iter().enumerate() {
        let quad = simes_violation_probability(rho, alpha).unwrap();
        let mut r = rng(71 + j as u64);
        let c = (1.0 - rho * rho).sqrt();
        let mut hits = 0usize;
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            let (p1, p2) = (gaussian_tail(z1), gaussian_tail(rho * z1 + c * z2));
            if p1.min(p2) < alpha / 2.0 || p1.max(p2) < alpha {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let sd = (quad * (1.0 - quad) / n as f64).sqrt();
        let ok = (mc - quad).abs() <= 3.0 * sd;
        pass &= ok;
        notes.push(format!("rho={rho}: {quad:.5} vs MC {mc:.5}"));
    }
    outcome(pass, notes.join(", "))
}

/// Same objective evaluated on the grid `t = j / 10^4`.
fn dkw_grid(p: &[f64], alpha: f64) -> usize {
    let n = p.len();
    let c = ((1.0 / alpha).ln() / 2.0).sqrt();
    let mut best = n;
    for j in 0..10_000 {
        let t = j as f64 / 1e4;
        let above = p.iter().filter(|&&x| x > t).count();
        let s = 1.0 - t;
        let root = c / (2.0 * s) + (c * c / (4.0 * s * s) + above as f64 / s).sqrt();
        let f = root.floor();
        best = best.min((f * f) as usize);
    }
    best
}

fn dkw() -> Outcome {
    let mut r = rng(81);
    let mut exceptions = 0;
    for _ in 0..200 {
        let m = r.random_range(1..=60usize);
        let skew = r.random_range(1.0..4.0f64);
        let p: Vec<f64> = (0..m).map(|_| (r.random::<f64>().powf(skew) * 1e4).floor() / 1e4).collect();
        let pv = PValueVector::new(p.clone()).unwrap();
        let region = IndexSet::from_predicate(m, |_| r.random_bool(0.7));
        let alpha = r.random_range(0.01..0.5);
        let sub: Vec<f64> = region.iter().map(|i| p[i]).collect();
        if dkw_zeta(&pv, &region, alpha).unwrap() != dkw_grid(&sub, alpha) {
            exceptions += 1;
        }
    }
    let alpha = 0.1;
    let cfg = ScenarioConfig::full_null(100, alpha, 5000, 82);
    let rep = coverage_experiment(&cfg, &CoverageMethod::SingleSet { rule: SingleSetRule::Dkw }).unwrap();
    let ok = rep.violation_rate <= alpha + 3.0 * rep.mc_sd;
    outcome(
        exceptions == 0 && ok,
        format!("{exceptions} grid mismatches over 200 inputs; full-null violation {:.4}", rep.violation_rate),
    )
}

/// Minimum over every collection of pairwise disjoint nodes, uncovered selected points counted in full.
fn partition_oracle(tree: &AggregationTree, s: u64) -> usize {
    let nodes: Vec<(u64, usize)> = tree
        .nodes()
        .iter()
        .map(|n| ((n.interval.start..n.interval.end).fold(0u64, |acc, i| acc | 1 << i), n.zeta))
        .collect();
    let total = s.count_ones() as usize;
    let mut best = total;
    for pick in 0u32..(1 << nodes.len()) {
        let mut covered = 0u64;
        let mut value = 0usize;
        let mut disjoint = true;
        for (k, &(mask, zeta)) in nodes.iter().enumerate() {
            if pick & (1 << k) != 0 {
                if covered & mask != 0 {
                    disjoint = false;
                    break;
                }
                covered |= mask;
                value += zeta.min((s & mask).count_ones() as usize);
            }
        }
        if disjoint {
            best = best.min(value + (s & !covered).count_ones() as usize);
        }
    }
    best
}

fn random_tree(r: &mut ChaCha8Rng) -> AggregationTree {
    loop {
        let seg = r.random_range(1..=4usize);
        let chroms = r.random_range(1..=2usize);
        let sizes: Vec<usize> = (0..chroms).map(|_| r.random_range(1..=8 * seg).min(40 / chroms)).collect();
        let fam = build_segments(&sizes, seg).unwrap();
        let tree = AggregationTree::from_segments(&fam);
        let levels = tree.nodes().iter().map(|n| n.level).max().unwrap_or(0) + 1;
        if tree.nodes().len() <= 16 && levels <= 4 {
            return tree.with_budgets(|_, n| r.random_range(0..=n.interval.len()));
        }
    }
}

fn tree_dp() -> Outcome {
    let mut r = rng(91);
    let mut exceptions = 0;
    for _ in 0..500 {
        let tree = random_tree(&mut r);
        let m = tree.m();
        let want = r.random_range(0..=12.min(m));
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut r);
        idx.truncate(want);
        let s = idx.iter().fold(0u64, |acc, &i| acc | 1 << i);
        let set = IndexSet::new(idx, m).unwrap();
        if tree_bound(&set, &tree) != partition_oracle(&tree, s) {
            exceptions += 1;
        }
    }

    // planted block: 20 strong signals inside one neighbourhood of a long null sequence
    let m = 2000;
    let mut r = rng(92);
    let mut p: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
    let block = 600..620;
    for (j, i) in block.clone().enumerate() {
        p[i] = 1e-4 * (j + 1) as f64;
    }
    let pv = PValueVector::new(p).unwrap();
    let alpha = 0.05;
    let fam = build_segments(&[m], 20).unwrap();
    let tree = build_tree(Evidence::PValues(&pv), &fam, alpha, BudgetRule::Dkw).unwrap();
    let set = IndexSet::range(block.start, block.end, m);
    let tree_v = tree_bound(&set, &tree);
    let tpl = Template::linear(m);
    let thresholds: Vec<f64> = (1..=m).map(|k| alpha * k as f64 / m as f64).collect();
    let global = ReferenceFamily::from_thresholds(&pv, &thresholds).unwrap();
    let aug_v = augmentation_bound(&set, &global);
    let simes_v = threshold_bound(&pv, &set, &tpl, alpha).unwrap().v;
    let smoke = tree_v < set.len() && aug_v == set.len() && simes_v == aug_v;
    outcome(
        exceptions == 0 && smoke,
        format!(
            "{exceptions} mismatches over 500 trees; planted block |S|=20: tree V={tree_v}, global linear V={aug_v}"
        ),
    )
}

fn cli_determinism() -> Outcome {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let data = dir.join("demo_matrix.csv");
    let labels = dir.join("demo_labels.csv");
    let ann = dir.join("demo_annotations.csv");
    let (data, labels, ann) = (data.to_str().unwrap(), labels.to_str().unwrap(), ann.to_str().unwrap());
    let runs: Vec<Vec<&str>> = vec![
        vec!["bound", "--data", data, "--labels", labels, "--method", "calibrated:beta", "--B", "200", "--seed", "5", "--select-top", "20"],
        vec!["envelope", "--data", data, "--labels", labels, "--method", "calibrated:linear", "--B", "100", "--seed", "9"],
        vec![
            "spatial", "--data", data, "--labels", labels, "--annotations", ann, "--chrom-col", "chrom", "--segment-size", "10",
            "--budget", "perm-beta", "--B", "50", "--seed", "2", "--tree",
        ],
        vec!["simulate", "--scenario", "two_sample_gaussian", "--method", "calibrated", "--m", "20", "--n1", "8", "--n2", "8", "--reps", "50", "--B", "40", "--seed", "3"],
    ];
    let mut identical = 0;
    for args in &runs {
        let once = || Command::new(env!("CARGO_BIN_EXE_posthoc")).args(args).output().unwrap();
        let (a, b) = (once(), once());
        if a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout {
            identical += 1;
        }
    }
    outcome(identical == runs.len(), format!("{identical}/{} commands byte-identical across two runs", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("selection effect 0.005 +/- 0.002", selection_effect),
        ("k0=1 Bonferroni coverage, m=500", bonferroni_coverage),
        ("Simes JER under independence, m=200", simes_jer),
        ("calibrated lambda JER, two-sample m=50", calibration_validity),
        ("reference family oracle equivalences", oracle_equivalences),
        ("Simes identity suite", identities),
        ("Psi quadrature and MC oracle", psi),
        ("DKW grid oracle and validity", dkw),
        ("tree DP oracle and planted block", tree_dp),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{}]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            secs(start.elapsed())
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
