mod common;

use std::fs;

use common::*;
use factoid_core::corpus::{parse_record, EntailmentLabel, HallucinationCategory};
use factoid_core::forge::{ForgeConfig, SeedRecord};
use factoid_core::oracle::{KeyedRequest, OracleRequest};
use serde_json::{json, Value};

fn committed_fixtures() -> (String, String) {
    let seeds: Vec<SeedRecord> = fs::read_to_string(fixture("seeds.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let vectors = fs::read_to_string(fixture("vectors.txt")).unwrap();
    let gazetteer = fs::read_to_string(fixture("gazetteer.tsv")).unwrap();
    let (oracle, _) = record_fixtures(&seeds, &vectors, &gazetteer, &ForgeConfig::default());

    // Two paraphrasers for the comparison table: one echoes its input.
    let mut para = String::new();
    for line in fs::read_to_string(fixture("sources.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let s = v.get("source").or_else(|| v.get("text")).unwrap().as_str().unwrap();
        for (model, out) in [("echo", vec![s.to_string(); 3]), ("templates", paraphrase(s, 5))] {
            let req = KeyedRequest::new(model, OracleRequest::Paraphrase { sentence: s.into(), n: 5 });
            para.push_str(&json!({ "request": req, "response": out }).to_string());
            para.push('\n');
        }
    }
    (oracle, para)
}

#[test]
fn committed_replay_fixtures_are_current() {
    let (oracle, para) = committed_fixtures();
    let dir = fixture("replay");
    if std::env::var_os("FACTOID_REGEN_FIXTURES").is_some() {
        fs::write(dir.join("oracle.jsonl"), &oracle).unwrap();
        fs::write(dir.join("paraphrasers.jsonl"), &para).unwrap();
    }
    assert_eq!(fs::read_to_string(dir.join("oracle.jsonl")).unwrap(), oracle);
    assert_eq!(fs::read_to_string(dir.join("paraphrasers.jsonl")).unwrap(), para);
}

fn forge_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "forge",
        "--input",
        fixture_str("seeds.jsonl"),
        "--replay",
        fixture_str("replay"),
        "--embeddings",
        fixture_str("vectors.txt"),
        "--gazetteer",
        fixture_str("gazetteer.tsv"),
        "--out",
        out,
    ];
    v.extend_from_slice(extra);
    v
}

fn fixture_str(name: &str) -> &'static str {
    Box::leak(fixture(name).into_os_string().into_string().unwrap().into_boxed_str())
}

fn records(path: &std::path::Path) -> (Value, Vec<factoid_core::corpus::EntailmentPair>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let recs = lines.enumerate().map(|(i, l)| parse_record(l, i + 2).unwrap()).collect();
    (meta, recs)
}

#[test]
fn stats_on_empty_input_is_zero() {
    let r = cli(&["stats", "--input", fixture_str("empty.jsonl")], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["stats"]["total_positive"], 0);
    assert_eq!(v["stats"]["total_negative"], 0);
    for c in ["BN", "TI", "IF", "P"] {
        assert_eq!(v["stats"]["categories"][c], json!({"positive": 0, "negative": 0}));
    }
    assert_eq!(v["meta"]["tool"], "factoid");
}

#[test]
fn forge_bn_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let r = cli(&forge_args(p(out), &["--category", "bn", "--seed", "7", "--auto-accept"]), "");
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (meta, recs) = records(&a);
    assert_eq!(meta["meta"]["rng_seed"], 7);
    assert!(!recs.is_empty());
    for r in &recs {
        assert_eq!(r.category, HallucinationCategory::BothersomeNumber);
        assert_eq!(r.label, EntailmentLabel::Refute);
        assert_eq!(r.orig_span.unwrap().slice(&r.original), Some("8%"));
    }
    let c = dir.path().join("c.jsonl");
    cli(&forge_args(p(&c), &["--category", "bn", "--seed", "8", "--auto-accept"]), "");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn forge_all_categories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus.jsonl");
    let skips = dir.path().join("skips.jsonl");
    let r = cli(&forge_args(p(&out), &["--auto-accept", "--skips", p(&skips), "--jobs", "3"]), "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, recs) = records(&out);
    for c in HallucinationCategory::ALL {
        assert!(recs.iter().any(|r| r.category == c), "no {c} records");
    }
    assert!(recs.iter().any(|r| r.label == EntailmentLabel::Support));
    for r in &recs {
        r.validate().unwrap();
    }
    let p_swaps: Vec<_> = recs
        .iter()
        .filter(|r| r.category == HallucinationCategory::Place && r.label == EntailmentLabel::Refute)
        .map(|r| r.provenance.as_ref().unwrap().replacement_surface.as_str())
        .collect();
    assert!(p_swaps.contains(&"Tokyo") && p_swaps.contains(&"Melbourne"));

    let s = cli(&["stats", "--input", p(&out), "--format", "text"], "");
    assert_eq!(s.code, 0, "{}", s.stderr);
    assert!(s.stdout.starts_with("# factoid"));
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");
    let mut args = vec!["--config", fixture_str("config.toml")];
    args.extend(forge_args(p(&out), &["--category", "bn", "--auto-accept"]));
    let r = cli(&args, "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (meta, recs) = records(&out);
    assert_eq!(meta["meta"]["rng_seed"], 11);
    assert!(meta["meta"]["config"].get("jobs").is_none());
    assert_eq!(meta["meta"]["config"]["forge"]["variants_per_entity"], 2);
    assert_eq!(meta["meta"]["config"]["hvi"]["lambda"], 0.5);
    assert!(!recs.is_empty());

    args.extend(["--seed", "12"]);
    cli(&args, "");
    let (meta, _) = records(&out);
    assert_eq!(meta["meta"]["rng_seed"], 12);
}

#[test]
fn interactive_review() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ti.jsonl");
    let r = cli(&forge_args(p(&out), &["--category", "ti"]), "r\n");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("temporal plan: Obama (2013)"), "{}", r.stderr);
    assert!(records(&out).1.is_empty());

    let r = cli(&forge_args(p(&out), &["--category", "ti"]), "");
    assert_eq!(r.code, 0);
    assert!(records(&out).1.is_empty(), "EOF rejects");

    let r = cli(&forge_args(p(&out), &["--category", "ti"]), "e\nObama\nLincoln\n");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, recs) = records(&out);
    assert!(!recs.is_empty());
    for rec in &recs {
        rec.validate().unwrap();
        let prov = rec.provenance.as_ref().unwrap();
        assert_eq!(prov.replaced_surface, "Obama");
        assert_eq!(prov.replacement_surface, "Lincoln");
        assert_eq!(rec.para_span.unwrap().slice(&rec.paraphrase), Some("Lincoln"));
    }

    let r = cli(&forge_args(p(&out), &["--category", "ti"]), "a\n");
    let (_, accepted) = records(&out);
    assert_eq!(r.code, 0);
    assert_eq!(accepted.len(), recs.len());
}

#[test]
fn hvi_lambda_zero_is_share() {
    let r = cli(
        &["hvi", "--detections", fixture_str("detections.jsonl"), "--u", "4", "--lambda", "0"],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let totals = [("alpha", 4.0), ("beta", 4.0), ("gamma", 5.0), ("delta", 1.0)];
    for (llm, total) in totals {
        let e = v["hvi"]["entries"].as_array().unwrap().iter().find(|e| e["llm"] == llm).unwrap();
        assert_eq!(e["score"].as_f64().unwrap(), (100.0 * total / 4.0f64).min(100.0));
    }
    assert_eq!(v["hvi"]["exact"]["alpha"], "100");
    assert_eq!(v["hvi"]["exact"]["delta"], "25");

    let t = cli(
        &["hvi", "--detections", fixture_str("detections.jsonl"), "--u", "8", "--u-per-llm", "delta=2", "--format", "text", "--precision", "1"],
        "",
    );
    assert_eq!(t.code, 0, "{}", t.stderr);
    assert!(t.stdout.lines().nth(1).unwrap().trim_start().starts_with("1 "));
}

#[test]
fn hvi_missing_u_is_input_error() {
    let r = cli(&["hvi", "--detections", fixture_str("detections.jsonl"), "--u-per-llm", "alpha=4"], "");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("error:"));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["forge", "--bogus"], "").code, 1);
    assert_eq!(cli(&[], "").code, 1);
    assert_eq!(cli(&["--help"], "").code, 0);
    assert_eq!(cli(&["--version"], "").code, 0);
    assert_eq!(cli(&["stats", "--input", "/no/such/file.jsonl"], "").code, 2);

    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("replay")).unwrap();
    let out = dir.path().join("o.jsonl");
    let r = cli(
        &["forge", "--input", fixture_str("seeds.jsonl"), "--replay", p(&dir.path().join("replay")), "--auto-accept", "--out", p(&out)],
        "",
    );
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(!out.exists(), "failed runs leave no output");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[forge]\nti_offset_range = [150, 50]\n").unwrap();
    assert_eq!(cli(&["--config", p(&bad), "stats", "--input", fixture_str("empty.jsonl")], "").code, 1);
    let r = cli(&forge_args(p(&out), &["--bn-mode", "absolute"]), "");
    assert_eq!(r.code, 1);
}

#[test]
fn fe_compare_rows() {
    let r = cli(
        &["fe-eval", "compare", "--row", "Baseline=0.44,0.49,0.23,0.12", "--row", "FE=0.69,0.71,0.67,0.59", "--format", "json"],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let tables = v["comparison"]["tables"].as_array().unwrap();
    assert!((tables[0]["macro"].as_f64().unwrap() - 0.32).abs() < 1e-12);
    assert!((tables[1]["macro"].as_f64().unwrap() - 0.665).abs() < 1e-12);
    assert!((v["comparison"]["deltas"][1]["absolute"].as_f64().unwrap() - 0.345).abs() < 1e-12);
}

#[test]
fn fe_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.jsonl");
    let r = cli(&forge_args(p(&gold), &["--auto-accept"]), "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, recs) = records(&gold);
    let pred: String = recs
        .iter()
        .map(|r| {
            let mut v = json!({ "id": r.id, "label": r.label, "orig_span": r.orig_span, "para_span": r.para_span });
            let class = serde_json::to_value(r.label).unwrap();
            let mut dist = serde_json::Map::new();
            for c in ["neutral", "refute", "support"] {
                dist.insert(c.into(), json!(if class == c { 1.0 } else { 0.0 }));
            }
            v["scores"] = json!({ "label": dist });
            v.to_string() + "\n"
        })
        .collect();
    let pred_path = dir.path().join("pred.jsonl");
    fs::write(&pred_path, pred).unwrap();
    let r = cli(&["fe-eval", "score", "--gold", p(&gold), "--pred", p(&pred_path), "--name", "oracle"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["score"]["tables"][0]["macro"], 1.0);
    assert_eq!(v["score"]["tables"][1]["name"], "oracle (refute only)");
    assert_eq!(v["score"]["spans"]["orig"]["f1"], 1.0);
    assert!(v["score"]["label_cross_entropy"].as_f64().unwrap() < 1e-11);
}

#[test]
fn embed_neighbors() {
    let r = cli(
        &["embed", "--embeddings", fixture_str("vectors.txt"), "--gazetteer", fixture_str("gazetteer.tsv"), "--token", "Nevada", "--mode", "farthest", "--class", "location", "--k", "3"],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let names: Vec<&str> = v["neighbors"].as_array().unwrap().iter().map(|n| n["surface"].as_str().unwrap()).collect();
    assert_eq!(names, ["Tokyo", "Oslo", "Melbourne"]);

    let r = cli(&["embed", "--embeddings", fixture_str("vectors.txt"), "--token", "Atlantis"], "");
    assert_eq!(r.code, 2);
    let r = cli(&["embed", "--embeddings", fixture_str("vectors.txt"), "--vector", "-1,0", "--k", "1", "--format", "text"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.lines().nth(1).unwrap().starts_with("Hasan Cetin") || r.stdout.lines().nth(1).unwrap().starts_with("Nevada"));
}

#[test]
fn gate_report() {
    let r = cli(&["gate", "--input", fixture_str("candidates.jsonl"), "--name", "demo"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let per = v["report"]["per_source"].as_array().unwrap();
    // Candidate two is one word away from its source, candidate three
    // changes the number.
    assert_eq!(per[0]["med_survivors"].as_array().unwrap().len(), 2);
    assert_eq!(per[0]["survivors"].as_array().unwrap().len(), 1);
    assert_eq!(v["report"]["model"], "demo");
}

#[test]
fn eval_paraphrasers_table() {
    let r = cli(
        &["eval-paraphrasers", "--input", fixture_str("sources.jsonl"), "--models", "echo,templates", "--replay", fixture_str("replay")],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert!(lines[1].starts_with("Model"));
    assert!(lines[3].starts_with("echo") && lines[3].contains("0.00"), "{}", lines[3]);
    assert!(lines[4].starts_with("templates") && lines[4].contains("100.00%"), "{}", lines[4]);
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.jsonl");
    let out = dir.path().join("o.jsonl");
    let r = cli(&forge_args(p(&out), &["--category", "p", "--record", p(&rec), "--auto-accept"]), "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let replay = dir.path().join("again.jsonl");
    let r = cli(
        &["forge", "--input", fixture_str("seeds.jsonl"), "--category", "p", "--replay", p(&rec), "--embeddings", fixture_str("vectors.txt"), "--gazetteer", fixture_str("gazetteer.tsv"), "--auto-accept", "--out", p(&replay)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&replay).unwrap());
}
