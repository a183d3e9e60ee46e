use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use factoid_core::corpus::{compute_stats, open_jsonl, read_records, read_values, serialize_record, HallucinationCategory};
use factoid_core::embedding::{entity_token, token_surface, EntityClass, Metric, NeighborQuery, SearchMode};
use factoid_core::eval::{
    category_accuracy, compare_detectors, cross_entropy_loss, render_tables, span_summary, AccuracyScope,
    CategoryAccuracyTable, EvalError, PredRecord,
};
use factoid_core::forge::{forge_pipeline, AutoAccept, BnMode, ForgeContext, Reviewer, SeedRecord};
use factoid_core::gate::{evaluate_paraphraser, CandidateSet, Gate, GateReport};
use factoid_core::hvi::{damping_factors_with, final_hvi, tally_counts, DampingOptions, DetectionRecord, StatsBasis};
use factoid_core::oracle::{Paraphraser, StubEntailment};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::config::{resolve, CliConfig, Patch};
use crate::error::CliError;
use crate::output::{emit, json_doc, meta, text_header};
use crate::providers::{self, provider_flags, Stack};
use crate::review::LineReviewer;

pub struct Io<'a> {
    pub stdin: &'a mut (dyn BufRead + Send),
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut (dyn Write + Send),
}

pub struct Globals<'a> {
    pub cli: &'a Cli,
    pub env: &'a BTreeMap<String, String>,
}

impl Globals<'_> {
    fn resolve(&self, mut patch: Patch) -> Result<CliConfig, CliError> {
        patch.opt("jobs", self.cli.jobs);
        resolve(self.env, self.cli.config.as_deref(), patch)
    }
}

fn pool(cfg: &CliConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Internal(format!("worker pool: {e}")))
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Cosine => Metric::Cosine,
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str, flag: &str) -> Result<(String, T), CliError> {
    let bad = || CliError::Usage(format!("{flag} expects NAME=VALUE, got `{s}`"));
    let (k, v) = s.rsplit_once('=').ok_or_else(bad)?;
    let v = v.trim().parse().map_err(|_| bad())?;
    if k.trim().is_empty() {
        return Err(bad());
    }
    Ok((k.trim().to_string(), v))
}

pub fn forge(g: &Globals, a: &ForgeArgs, io: &mut Io) -> Result<(), CliError> {
    let mut p = Patch::new();
    p.opt("forge.rng_seed", a.seed);
    let bn = match (a.bn_mode, a.bn_fraction, a.bn_delta) {
        (Some(BnModeArg::Absolute), _, Some(delta)) | (None, None, Some(delta)) => Some(BnMode::Absolute { delta }),
        (Some(BnModeArg::Absolute), _, None) => return Err(CliError::Usage("--bn-mode absolute needs --bn-delta".into())),
        (Some(BnModeArg::Relative), f, _) => Some(BnMode::Relative {
            fraction: f.unwrap_or(0.20),
        }),
        (None, Some(fraction), _) => Some(BnMode::Relative { fraction }),
        (None, None, None) => None,
    };
    p.opt("forge.bn_mode", bn);
    p.opt("forge.paraphrases_per_variant", a.paraphrases);
    p.opt("forge.variants_per_entity", a.variants);
    p.opt("forge.ti_max_year", a.ti_max_year);
    p.opt("forge.tau_near", a.tau_near);
    p.opt("forge.tau_far", a.tau_far);
    p.opt("forge.metric", a.metric.map(metric));
    p.opt("forge.med_threshold", a.med_threshold);
    provider_flags(&a.provider, &mut p);
    if a.ti_offset_min.is_some() || a.ti_offset_max.is_some() {
        let base = g.resolve(p.clone())?;
        let [lo, hi] = base.forge.ti_offset_range;
        p.set("forge.ti_offset_range", [a.ti_offset_min.unwrap_or(lo), a.ti_offset_max.unwrap_or(hi)]);
    }
    let cfg = g.resolve(p)?;

    let mut seeds: Vec<SeedRecord> = read_values(&a.input)?;
    if !a.category.is_empty() {
        let want = a
            .category
            .iter()
            .map(|c| c.parse::<HallucinationCategory>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        seeds.retain(|s| s.category.parse().is_ok_and(|c| want.contains(&c)));
    }

    let table = a
        .embeddings
        .as_deref()
        .map(|e| providers::load_table(e, a.gazetteer.as_deref()))
        .transpose()?;
    let stack = Stack::build(&a.provider, &cfg)?;
    let model = cfg.provider.model.clone();
    let client = stack.client(&model);
    let entailment = providers::entailment(a.provider.entailment, &stack, &model);
    let ner = providers::ner(table.as_ref(), a.gazetteer.as_deref(), &stack, &model)?;

    let out = {
        let auto = AutoAccept;
        let line;
        let reviewer: &dyn Reviewer = if a.auto_accept {
            &auto
        } else {
            line = LineReviewer::new(&mut *io.stdin, &mut *io.stderr);
            &line
        };
        let ctx = ForgeContext {
            paraphraser: &client,
            qa: &client,
            entailment: entailment.as_ref(),
            ner: ner.as_ref(),
            table: table.as_ref(),
            reviewer,
        };
        pool(&cfg)?.install(|| forge_pipeline(&seeds, &cfg.forge, &ctx))?
    };

    let header = meta("forge", &cfg);
    let mut text = String::new();
    let _ = writeln!(text, "{}", json!({ "meta": header }));
    for pair in &out.pairs {
        text.push_str(&serialize_record(pair));
        text.push('\n');
    }
    emit(a.out.as_deref(), io.stdout, text.as_bytes())?;
    if let Some(path) = &a.skips {
        let mut s = String::new();
        let _ = writeln!(s, "{}", json!({ "meta": header }));
        for skip in &out.skips {
            let _ = writeln!(s, "{}", serde_json::to_string(skip).expect("skip serializes"));
        }
        crate::output::atomic_write(path, s.as_bytes())?;
    }
    stack.finish(&a.provider)?;
    stack.log_metrics();
    let _ = writeln!(
        io.stderr,
        "forged {} pairs from {} seeds, {} skipped",
        out.pairs.len(),
        seeds.len(),
        out.skips.len()
    );
    Ok(())
}

pub fn gate(g: &Globals, a: &GateArgs, io: &mut Io) -> Result<(), CliError> {
    let mut p = Patch::new();
    p.opt("forge.med_threshold", a.med_threshold);
    provider_flags(&a.provider, &mut p);
    let cfg = g.resolve(p)?;
    let sets: Vec<CandidateSet> = read_values(&a.input)?;
    let gate = Gate {
        med_threshold: cfg.forge.med_threshold,
    };
    let name = a.name.clone().unwrap_or_else(|| cfg.provider.model.clone());
    let report = match a.provider.entailment {
        EntailmentSource::Stub => pool(&cfg)?.install(|| evaluate_paraphraser(&name, &sets, &StubEntailment::default(), &gate))?,
        EntailmentSource::Provider => {
            let stack = Stack::build(&a.provider, &cfg)?;
            let client = stack.client(&cfg.provider.model);
            let r = pool(&cfg)?.install(|| evaluate_paraphraser(&name, &sets, &client, &gate))?;
            stack.finish(&a.provider)?;
            r
        }
    };
    let body = match a.format {
        Format::Json => json_doc(meta("gate", &cfg), "report", serde_json::to_value(&report).expect("report serializes")),
        Format::Text => text_header("gate", &cfg) + &GateReport::render_table(&[report]),
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

#[derive(Deserialize)]
struct SourceLine {
    #[serde(alias = "text")]
    source: String,
}

pub fn eval_paraphrasers(g: &Globals, a: &EvalParaphrasersArgs, io: &mut Io) -> Result<(), CliError> {
    let mut p = Patch::new();
    p.opt("forge.med_threshold", a.med_threshold);
    p.opt("forge.paraphrases_per_variant", a.paraphrases);
    provider_flags(&a.provider, &mut p);
    let cfg = g.resolve(p)?;
    let sources: Vec<SourceLine> = read_values(&a.input)?;
    let stack = Stack::build(&a.provider, &cfg)?;
    let entailment = providers::entailment(a.provider.entailment, &stack, &cfg.provider.model);
    let gate = Gate {
        med_threshold: cfg.forge.med_threshold,
    };
    let n = cfg.forge.paraphrases_per_variant;
    let pool = pool(&cfg)?;
    let mut reports = Vec::new();
    for model in &a.models {
        let client = stack.client(model);
        let report = pool.install(|| -> Result<GateReport, CliError> {
            let sets = sources
                .par_iter()
                .map(|s| Ok(CandidateSet::new(s.source.clone(), client.generate_paraphrases(&s.source, n)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(evaluate_paraphraser(model, &sets, entailment.as_ref(), &gate)?)
        })?;
        reports.push(report);
    }
    stack.finish(&a.provider)?;
    let body = match a.format {
        Format::Json => json_doc(
            meta("eval-paraphrasers", &cfg),
            "reports",
            serde_json::to_value(&reports).expect("reports serialize"),
        ),
        Format::Text => text_header("eval-paraphrasers", &cfg) + &GateReport::render_table(&reports),
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

pub fn hvi(g: &Globals, a: &HviArgs, io: &mut Io) -> Result<(), CliError> {
    let mut p = Patch::new();
    p.opt("hvi.lambda", a.lambda);
    p.opt("hvi.delta_floor", a.delta_floor);
    p.opt("hvi.precision", a.precision);
    p.opt(
        "hvi.basis",
        a.basis.map(|b| match b {
            BasisArg::CategoryCounts => StatsBasis::CategoryCounts,
            BasisArg::InitialHvi => StatsBasis::InitialHvi,
        }),
    );
    let cfg = g.resolve(p)?;
    let detections: Vec<DetectionRecord> = read_values(&a.detections)?;
    let mut u = BTreeMap::new();
    if let Some(n) = a.u {
        for d in &detections {
            u.insert(d.llm.clone(), n);
        }
    }
    for s in &a.u_per_llm {
        let (k, v) = parse_pair::<u64>(s, "--u-per-llm")?;
        u.insert(k, v);
    }
    let sizes = a
        .size
        .iter()
        .map(|s| parse_pair::<String>(s, "--size"))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let counts = tally_counts(detections, &u)?;
    let options = DampingOptions {
        lambda: cfg.hvi.lambda,
        floor: cfg.hvi.delta_floor,
        basis: cfg.hvi.basis,
    };
    let factors = damping_factors_with(&counts, options)?;
    let report = final_hvi(&counts, &factors)?.with_sizes(&sizes);
    let body = match a.format {
        Format::Json => {
            let exact: serde_json::Map<String, Value> = report
                .entries
                .iter()
                .filter_map(|e| e.exact.map(|r| (e.llm.clone(), Value::String(r.to_string()))))
                .collect();
            json_doc(
                meta("hvi", &cfg),
                "hvi",
                json!({
                    "counts": counts,
                    "factors": factors,
                    "entries": report.entries,
                    "exact": exact,
                }),
            )
        }
        Format::Text => text_header("hvi", &cfg) + &report.render_spectrum(cfg.hvi.precision),
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

pub fn stats(g: &Globals, a: &StatsArgs, io: &mut Io) -> Result<(), CliError> {
    let cfg = g.resolve(Patch::new())?;
    let stats = compute_stats(open_jsonl(&a.input)?.records())?;
    let body = match a.format {
        Format::Json => json_doc(meta("stats", &cfg), "stats", serde_json::to_value(&stats).expect("stats serialize")),
        Format::Text => text_header("stats", &cfg) + &stats.render_table(),
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

fn label_key(v: impl serde::Serialize) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn fe_score(g: &Globals, a: &FeScoreArgs, io: &mut Io) -> Result<(), CliError> {
    let cfg = g.resolve(Patch::new())?;
    let gold = read_records(&a.gold)?;
    let pred: Vec<PredRecord> = read_values(&a.pred)?;
    for p in &pred {
        p.check_scores()?;
    }
    let mut tables = Vec::new();
    if matches!(a.scope, ScopeArg::All | ScopeArg::Both) {
        tables.push(category_accuracy(&a.name, &gold, &pred, AccuracyScope::All)?);
    }
    if matches!(a.scope, ScopeArg::Refute | ScopeArg::Both) {
        let name = format!("{} (refute only)", a.name);
        tables.push(category_accuracy(&name, &gold, &pred, AccuracyScope::RefuteOnly)?);
    }
    let spans = span_summary(&gold, &pred)?;

    // Mean cross-entropy of the `label` head where scores are given.
    let gold_label: BTreeMap<&str, String> = gold.iter().map(|g| (g.id.as_str(), label_key(g.label))).collect();
    let mut losses = Vec::new();
    for p in &pred {
        let (Some(dist), Some(want)) = (p.scores.as_ref().and_then(|s| s.get("label")), gold_label.get(p.id.as_str())) else {
            continue;
        };
        let idx = dist
            .keys()
            .position(|k| k == want)
            .ok_or_else(|| EvalError::Schema(format!("{}: label head has no `{want}` class", p.id)))?;
        let v: Vec<f64> = dist.values().copied().collect();
        losses.push(cross_entropy_loss(&v, idx)?);
    }
    let ce = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);

    let body = match a.format {
        Format::Json => json_doc(
            meta("fe-eval score", &cfg),
            "score",
            json!({ "tables": tables, "spans": spans, "label_cross_entropy": ce }),
        ),
        Format::Text => {
            let mut s = text_header("fe-eval score", &cfg) + &render_tables(&tables);
            let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "orig span F1 {} over {}", f(spans.orig.map(|x| x.f1)), spans.orig_count);
            let _ = writeln!(s, "para span F1 {} over {}", f(spans.para.map(|x| x.f1)), spans.para_count);
            let _ = writeln!(s, "label cross-entropy {}", f(ce));
            s
        }
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

fn parse_row(s: &str) -> Result<CategoryAccuracyTable, CliError> {
    let bad = || CliError::Usage(format!("--row expects NAME=IF,P,BN,TI, got `{s}`"));
    let (name, vals) = s.rsplit_once('=').ok_or_else(bad)?;
    let vals: Vec<f64> = vals
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let vals: [f64; 4] = vals.try_into().map_err(|_| bad())?;
    Ok(CategoryAccuracyTable::from_report_order(name.trim(), vals))
}

pub fn fe_compare(g: &Globals, a: &FeCompareArgs, io: &mut Io) -> Result<(), CliError> {
    let cfg = g.resolve(Patch::new())?;
    let mut tables = Vec::new();
    for path in &a.table {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
        let t: CategoryAccuracyTable = serde_json::from_str(&text).map_err(|e| CliError::input(path.display(), e))?;
        tables.push(t.checked()?);
    }
    for r in &a.row {
        tables.push(parse_row(r)?);
    }
    if tables.is_empty() {
        return Err(CliError::Usage("give at least one --table or --row".into()));
    }
    let cmp = compare_detectors(&tables)?;
    let body = match a.format {
        Format::Json => json_doc(
            meta("fe-eval compare", &cfg),
            "comparison",
            serde_json::to_value(&cmp).expect("comparison serializes"),
        ),
        Format::Text => text_header("fe-eval compare", &cfg) + &cmp.render(),
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}

pub fn embed(g: &Globals, a: &EmbedArgs, io: &mut Io) -> Result<(), CliError> {
    let cfg = g.resolve(Patch::new())?;
    let table = providers::load_table(&a.embeddings, a.gazetteer.as_deref())?;
    let query = match (&a.token, &a.vector) {
        (Some(t), _) => NeighborQuery::token(entity_token(t)),
        (None, Some(v)) => NeighborQuery::vector(v.clone()),
        (None, None) => return Err(CliError::Usage("give --token or --vector".into())),
    };
    let query = query
        .k(a.k)
        .metric(metric(a.metric))
        .mode(match a.mode {
            ModeArg::Nearest => SearchMode::Nearest,
            ModeArg::Farthest => SearchMode::Farthest,
        })
        .threshold(a.threshold)
        .class(a.class.map(|c| match c {
            ClassArg::Person => EntityClass::Person,
            ClassArg::Location => EntityClass::Location,
            ClassArg::Other => EntityClass::Other,
        }));
    let found = table.neighbors(&query)?;
    let body = match a.format {
        Format::Json => {
            let rows: Vec<Value> = found
                .iter()
                .map(|n| json!({ "token": n.token, "surface": token_surface(&n.token), "distance": n.distance }))
                .collect();
            json_doc(meta("embed", &cfg), "neighbors", Value::Array(rows))
        }
        Format::Text => {
            let mut s = text_header("embed", &cfg);
            for n in &found {
                let _ = writeln!(s, "{}\t{:.6}", token_surface(&n.token), n.distance);
            }
            s
        }
    };
    emit(a.out.as_deref(), io.stdout, body.as_bytes())
}
