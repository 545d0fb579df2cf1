//! Subcommand bodies. Each builds a [`BoundReport`] and writes it as pretty JSON.

use std::fmt;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;

use anyhow::{Context, Result};
use posthoc::session::Provenance;
use posthoc::{
    coverage_experiment, BoundReport, BudgetRule, CoverageMethod, Method, NamedSelection, ScenarioConfig, ScenarioKind,
    SelectionSpec, Session, SingleSetRule, Statistic, TemplateKind,
};

use crate::input::{self, Digests, Table};
use crate::{
    BoundArgs, CalibrateArgs, CalibrationArgs, EnvelopeArgs, InputArgs, OutArgs, SelectArgs, ServeArgs, SimulateArgs,
    SpatialArgs, SpatialOpts,
};

/// A malformed request (bad flag combination, method or selection); exits with 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn as_usage<T>(r: posthoc::Result<T>) -> Result<T> {
    r.map_err(|e| Usage(e.to_string()).into())
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<posthoc::Error>() {
            if matches!(e, posthoc::Error::Config(_) | posthoc::Error::UnknownIds(_)) {
                return 2;
            }
        }
    }
    1
}

/// Loaded session plus what the report needs to cite.
struct Opened {
    session: Session,
    digests: Digests,
    /// The p-value file, kept for annotation columns.
    pvalue_table: Option<Table>,
    annotations: Option<Table>,
}

fn open(args: &InputArgs) -> Result<Opened> {
    let mut digests = Digests::new();
    let session = match (&args.pvalues, &args.data, &args.labels) {
        (Some(path), None, None) => {
            let loaded = input::load(path)?;
            digests.insert("pvalues".into(), loaded.sha256);
            let got = input::pvalues(loaded.table)?;
            let session = Session::from_pvalues(got.ids, got.p, args.alpha)?;
            return finish(args, session, digests, Some(got.table));
        }
        (None, Some(data), Some(labels)) => {
            let d = input::load(data)?;
            let l = input::load(labels)?;
            digests.insert("data".into(), d.sha256);
            digests.insert("labels".into(), l.sha256);
            let got = input::two_sample(d.table, l.table)?;
            let statistic = if args.welch { Statistic::Welch } else { Statistic::KnownVariance };
            Session::from_dataset(got.ids, got.ds, args.alpha, statistic)?
        }
        _ => return usage("give either --pvalues FILE or both --data FILE and --labels FILE"),
    };
    finish(args, session, digests, None)
}

fn finish(args: &InputArgs, session: Session, mut digests: Digests, pvalue_table: Option<Table>) -> Result<Opened> {
    let annotations = match &args.annotations {
        Some(path) => {
            let loaded = input::load(path)?;
            digests.insert("annotations".into(), loaded.sha256);
            Some(loaded.table)
        }
        None => None,
    };
    let digest = combined_digest(&digests);
    Ok(Opened { session: session.with_digest(digest), digests, pvalue_table, annotations })
}

fn combined_digest(digests: &Digests) -> String {
    digests.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(";")
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

/// Named selections from `--select` plus one unnamed selection from the filter flags.
/// With neither, `default_all` decides between `[all]` and nothing.
fn selections(args: &SelectArgs, default_all: bool) -> Result<Vec<NamedSelection>> {
    let mut out = Vec::new();
    for text in &args.select {
        out.push(as_usage(NamedSelection::parse(text)).with_context(|| format!("--select '{text}'"))?);
    }
    let indices = match &args.indices {
        Some(s) => Some(
            split_list(s)
                .iter()
                .map(|x| x.parse::<usize>().map_err(|_| Usage(format!("--indices: '{x}' is not a positive integer"))))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let spec = SelectionSpec {
        ids: args.ids.as_deref().map(split_list),
        indices,
        top: args.select_top,
        bh: args.bh_level,
        fc_above: args.fc_above,
        fc_below: args.fc_below,
        p_below: None,
    };
    if !spec.is_all() {
        out.push(NamedSelection { name: "selection".into(), spec });
    }
    if out.is_empty() && default_all {
        out.push(NamedSelection { name: "all".into(), spec: SelectionSpec::all() });
    }
    Ok(out)
}

/// Parses `--method`, calibrating the session first when the method needs it.
fn prepare_method(session: &mut Session, method: &str, cal: &CalibrationArgs) -> Result<Method> {
    let mut method: Method = as_usage(method.parse())?;
    if let Method::Calibrated { template } = &mut method {
        let kind = match (*template, cal.template) {
            (Some(a), Some(b)) if a != b => {
                return usage(format!("--method names the {a} template but --template says {b}"));
            }
            (Some(a), _) => a,
            (None, b) => b.unwrap_or(TemplateKind::Linear),
        };
        *template = Some(kind);
        session.calibrate(kind, cal.k, cal.b, cal.seed)?;
    } else if method == Method::Spatial {
        return usage("the spatial method is served by the `spatial` subcommand");
    }
    Ok(method)
}

fn provenance(opened: &Opened, randomized: Option<(u64, usize)>) -> Provenance {
    Provenance {
        seed: randomized.map(|r| r.0),
        b: randomized.map(|r| r.1),
        input_sha256: opened.digests.clone(),
    }
}

fn bound_selections(session: &Session, method: Method, sels: &[NamedSelection], report: &mut BoundReport) -> Result<()> {
    for sel in sels {
        let r = session.bound_named(method, sel).with_context(|| format!("selection '{}'", sel.name))?;
        report.selections.push(r);
    }
    Ok(())
}

fn emit(report: &BoundReport, out: &OutArgs) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn method_report(opened: &mut Opened, method: &str, cal: &CalibrationArgs) -> Result<(Method, BoundReport)> {
    let method = prepare_method(&mut opened.session, method, cal)?;
    let (name, lambda) = opened.session.describe(method)?;
    let calibrated = matches!(method, Method::Calibrated { .. });
    let mut report = BoundReport::new(name, opened.session.alpha(), provenance(opened, calibrated.then_some((cal.seed, cal.b))));
    report.lambda = lambda;
    if let Method::Calibrated { template } = method {
        report.calibration = opened.session.calibration_summary(template);
    }
    Ok((method, report))
}

pub fn bound(args: BoundArgs) -> Result<()> {
    let sels = selections(&args.select, true)?;
    let mut opened = open(&args.input)?;
    let (method, mut report) = method_report(&mut opened, &args.method, &args.calibration)?;
    bound_selections(&opened.session, method, &sels, &mut report)?;
    emit(&report, &args.out)
}

pub fn envelope(args: EnvelopeArgs) -> Result<()> {
    let sels = selections(&args.select, false)?;
    let mut opened = open(&args.input)?;
    let (method, mut report) = method_report(&mut opened, &args.method, &args.calibration)?;
    bound_selections(&opened.session, method, &sels, &mut report)?;
    let env = opened.session.envelope(method)?;
    if let Some(path) = &args.csv {
        write_envelope_csv(path, &env)?;
    }
    report.envelope = Some(env);
    emit(&report, &args.out)
}

fn write_envelope_csv(path: &Path, env: &posthoc::EnvelopeReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["k", "id", "V", "tp_lower", "fdp_upper"])?;
    for i in 0..env.k.len() {
        w.write_record([
            env.k[i].to_string(),
            env.order[i].clone(),
            env.v[i].to_string(),
            env.tp_lower[i].to_string(),
            env.fdp_upper[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let sels = selections(&args.select, false)?;
    let mut opened = open(&args.input)?;
    let method = match args.calibration.template {
        Some(t) => format!("calibrated:{t}"),
        None => "calibrated".into(),
    };
    let (method, mut report) = method_report(&mut opened, &method, &args.calibration)?;
    bound_selections(&opened.session, method, &sels, &mut report)?;
    emit(&report, &args.out)
}

fn budget_rule(text: &str, b: usize, seed: u64) -> Result<BudgetRule> {
    let text = text.trim().to_ascii_lowercase();
    match text.split_once(':') {
        None if text == "markov" => Ok(BudgetRule::Markov { t: None }),
        None if text == "dkw" => Ok(BudgetRule::Dkw),
        None if text == "perm-beta" || text == "perm_beta" => Ok(BudgetRule::PermBeta { b, seed }),
        Some(("markov", t)) => match t.parse::<f64>() {
            Ok(t) if t > 0.0 && t < 1.0 => Ok(BudgetRule::Markov { t: Some(t) }),
            _ => usage(format!("--budget markov:t needs 0 < t < 1, got '{t}'")),
        },
        _ => usage(format!("unknown budget '{text}'; expected markov[:t], dkw or perm-beta")),
    }
}

fn attach_spatial(opened: &mut Opened, opts: &SpatialOpts, segment_size: usize, b: usize, seed: u64) -> Result<()> {
    let rule = budget_rule(&opts.budget, b, seed)?;
    let labels = match &opts.chrom_col {
        None => None,
        Some(col) => {
            let source = match (&opened.annotations, &opened.pvalue_table) {
                (Some(t), _) => t,
                (None, Some(t)) if t.column(col).is_some() => t,
                _ => return usage(format!("--chrom-col {col} needs --annotations or a p-value file with that column")),
            };
            Some(input::annotation(source, col, opened.session.ids())?)
        }
    };
    Ok(opened.session.attach_spatial(labels.as_deref(), segment_size, rule, opts.tree)?)
}

pub fn spatial(args: SpatialArgs) -> Result<()> {
    let Some(size) = args.spatial.segment_size else {
        return usage("spatial needs --segment-size");
    };
    let sels = selections(&args.select, true)?;
    let mut opened = open(&args.input)?;
    attach_spatial(&mut opened, &args.spatial, size, args.b, args.seed)?;
    let (name, _) = opened.session.describe(Method::Spatial)?;
    let perm = args.spatial.budget.to_ascii_lowercase().starts_with("perm");
    let mut report = BoundReport::new(name, opened.session.alpha(), provenance(&opened, perm.then_some((args.seed, args.b))));
    report.spatial = opened.session.spatial_summary();
    bound_selections(&opened.session, Method::Spatial, &sels, &mut report)?;
    emit(&report, &args.out)
}

fn scenario(args: &SimulateArgs) -> Result<ScenarioConfig> {
    let kind = match args.scenario.to_ascii_lowercase().replace('-', "_").as_str() {
        "full_null_iid" | "full_null" => ScenarioKind::FullNullIid,
        "two_sample_gaussian" | "two_sample" => {
            ScenarioKind::TwoSampleGaussian { delta: args.delta, alt_fraction: args.alt_fraction }
        }
        "equicorrelated_pairs" | "pairs" => ScenarioKind::EquicorrelatedPairs { rho: args.rho },
        other => {
            return usage(format!(
                "unknown scenario '{other}'; expected full_null_iid, two_sample_gaussian or equicorrelated_pairs"
            ))
        }
    };
    let cfg = ScenarioConfig {
        kind,
        m: args.m,
        n1: args.n1,
        n2: args.n2,
        alpha: args.alpha,
        replications: args.reps,
        seed: args.seed,
    };
    as_usage(cfg.validate())?;
    Ok(cfg)
}

fn coverage_method(args: &SimulateArgs) -> Result<CoverageMethod> {
    let name = args.method.to_ascii_lowercase().replace('_', "-");
    Ok(match name.as_str() {
        "bonf" | "bonferroni" => CoverageMethod::Bonferroni { k0: args.k0 },
        "simes" => CoverageMethod::Simes,
        "threshold" => CoverageMethod::Threshold { template: args.template, lambda: args.lambda.unwrap_or(args.alpha) },
        "calibrated" => CoverageMethod::Calibrated { template: args.template, b: args.b },
        "markov" => CoverageMethod::SingleSet {
            rule: SingleSetRule::Markov { t: args.t.unwrap_or(args.alpha * args.alpha) },
        },
        "dkw" => CoverageMethod::SingleSet { rule: SingleSetRule::Dkw },
        "perm-beta" => CoverageMethod::SingleSet { rule: SingleSetRule::PermBeta { b: args.b } },
        "spatial" => {
            let Some(segment_size) = args.spatial.segment_size else {
                return usage("the spatial method needs --segment-size");
            };
            CoverageMethod::Spatial {
                segment_size,
                rule: budget_rule(&args.spatial.budget, args.b, args.seed)?,
                tree: args.spatial.tree,
            }
        }
        "selection-effect" => CoverageMethod::SelectionEffect { s0: args.s0, k0: args.k0 },
        other => return usage(format!("unknown simulation method '{other}'")),
    })
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = scenario(&args)?;
    let method = coverage_method(&args)?;
    let result = coverage_experiment(&cfg, &method)?;
    let uses_b = matches!(
        method,
        CoverageMethod::Calibrated { .. }
            | CoverageMethod::SingleSet { rule: SingleSetRule::PermBeta { .. } }
            | CoverageMethod::Spatial { rule: BudgetRule::PermBeta { .. }, .. }
    );
    let prov = Provenance { seed: Some(args.seed), b: uses_b.then_some(args.b), input_sha256: Default::default() };
    let mut report = BoundReport::new(method.name(), args.alpha, prov);
    report.simulation = Some((&result).into());
    emit(&report, &args.out)
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|_| Usage(format!("cannot listen on '{}:{}'", args.host, args.port)))?;
    let opened = open(&args.input)?;
    let templates = if !args.templates.is_empty() {
        args.templates.clone()
    } else if opened.session.dataset().is_some() {
        vec![TemplateKind::Linear, TemplateKind::Beta]
    } else {
        Vec::new()
    };
    if !templates.is_empty() && opened.session.dataset().is_none() {
        return usage("--template needs two-sample input (--data and --labels)");
    }
    let segment_size = args.spatial.segment_size;
    if let Some(size) = segment_size {
        budget_rule(&args.spatial.budget, args.b, args.seed)?;
        if size == 0 {
            return usage("--segment-size must be at least 1");
        }
    }
    let runtime = tokio::runtime::Runtime::new()?;
    let static_dir = args.static_dir.clone();
    let spatial = args.spatial.clone();
    let (k, b, seed) = (args.k, args.b, args.seed);
    runtime.block_on(async move {
        posthoc_server::run(addr, static_dir.as_deref(), move || {
            let mut opened = opened;
            for t in templates {
                opened.session.calibrate(t, k, b, seed)?;
            }
            if let Some(size) = segment_size {
                attach_spatial(&mut opened, &spatial, size, b, seed)
                    .map_err(|e| posthoc::Error::Config(format!("{e:#}")))?;
            }
            Ok(opened.session)
        })
        .await
    })?;
    Ok(())
}
