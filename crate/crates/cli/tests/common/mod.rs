//! Test support: a deterministic stand-in for the LLM provider, a synthetic
//! seed corpus with a matching embedding table and gazetteer, and a recorder
//! that turns a forge run over the stand-in into replay fixtures.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use factoid_core::embedding::EmbeddingTable;
use factoid_core::forge::{forge_pipeline, AutoAccept, ForgeConfig, ForgeContext, ForgeOutput, SeedRecord};
use factoid_core::oracle::{
    GazetteerNer, KeyedRequest, OracleClient, OracleError, OracleRequest, OracleResponse, Provider,
    QuestionAnswerer, RecordingProvider, StubEntailment,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MODEL: &str = "gpt-3.5-turbo";

const FIRST: [&str; 16] = [
    "Amara", "Bilal", "Chen", "Dario", "Elif", "Farah", "Goran", "Hana", "Ivo", "Jana", "Kofi", "Lena", "Milo", "Nadia",
    "Omar", "Petra",
];
const LAST: [&str; 8] = ["Okafor", "Haddad", "Novak", "Silva", "Berg", "Yilmaz", "Moreau", "Tanaka"];
const CITIES: [&str; 24] = [
    "Nevada", "Tokyo", "Oslo", "Melbourne", "Lagos", "Lima", "Quito", "Hanoi", "Dakar", "Riga", "Perth", "Cairo",
    "Nairobi", "Lisbon", "Manila", "Bogota", "Tunis", "Accra", "Kyoto", "Porto", "Zagreb", "Tallinn", "Muscat", "Suva",
];
/// People the NER knows but the table does not.
const UNTABLED: [&str; 4] = ["Zora Quill", "Brannoc Ulm", "Tesni Vaar", "Orrin Pell"];

const TEMPLATES: [&str; 5] = [
    "Reports say that {s}",
    "{s} Officials confirmed this on Monday.",
    "According to local sources, {s}",
    "As noted in several accounts, {s}",
    "{s} The news spread quickly afterwards.",
];

pub fn paraphrase(sentence: &str, n: usize) -> Vec<String> {
    TEMPLATES.iter().take(n).map(|t| t.replace("{s}", sentence)).collect()
}

pub fn persons() -> Vec<String> {
    FIRST.iter().flat_map(|f| LAST.iter().map(move |l| format!("{f} {l}"))).collect()
}

fn last_year(text: &str) -> Option<i64> {
    text.split(|c: char| !c.is_ascii_digit())
        .filter(|t| t.len() == 4)
        .filter_map(|t| t.parse().ok())
        .next_back()
}

/// Answers paraphrase and question requests by fixed rules; judges
/// entailment with the stub. NER is not offered.
pub struct SyntheticOracle {
    people: Vec<String>,
}

impl Default for SyntheticOracle {
    fn default() -> Self {
        Self { people: persons() }
    }
}

impl SyntheticOracle {
    fn answer(&self, q: &str) -> String {
        if let Some(rest) = q.strip_prefix("In what year did the event in this sentence happen? ") {
            return match last_year(rest) {
                Some(y) => format!("It happened in {y}."),
                None => "Nobody recorded it.".into(),
            };
        }
        if let Some(rest) = q.strip_prefix("Who held the role of ") {
            let (anchor, year) = rest.trim_end_matches('?').rsplit_once(" in ").unwrap_or((rest, "0"));
            let year: u64 = year.parse().unwrap_or(0);
            let h = anchor.bytes().map(u64::from).sum::<u64>() + year;
            let mut name = &self.people[(h % self.people.len() as u64) as usize];
            let words = anchor.split_whitespace().count();
            if name == anchor || name.split_whitespace().last() == Some(anchor) {
                name = &self.people[((h + 1) % self.people.len() as u64) as usize];
            }
            let name = if words == 1 { name.split_whitespace().last().unwrap() } else { name.as_str() };
            return format!("That was {name}.");
        }
        "I do not know.".into()
    }
}

impl Provider for SyntheticOracle {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        Ok(match &request.request {
            OracleRequest::Paraphrase { sentence, n } => OracleResponse::Paraphrases(paraphrase(sentence, *n)),
            OracleRequest::Answer { question } => OracleResponse::Answer(self.answer(question)),
            OracleRequest::Entailment { premise, hypothesis } => {
                OracleResponse::Verdict(StubEntailment::default().verdict(premise, hypothesis))
            }
            OracleRequest::Ner { .. } => return Err(OracleError::InvalidRequest("ner is not offered".into())),
        })
    }
}

/// Seeds plus the table and gazetteer they need, as file contents.
pub struct World {
    pub seeds: Vec<SeedRecord>,
    pub vectors: String,
    pub gazetteer: String,
}

fn seed(id: String, category: &str, hallucinated: bool, text: String) -> SeedRecord {
    SeedRecord {
        source_id: id,
        llm: "synthetic-llm".into(),
        text,
        hallucinated,
        category: category.into(),
        anchor_question: None,
        role_question: None,
        ti_offset: None,
    }
}

const NUMBERS: [&str; 8] = ["1,240", "37", "4.5", "62%", "18,900", "120", "9.75", "85%"];

/// A corpus of `per_category` hallucinated seeds per category plus as many
/// factual ones.
pub fn world(per_category: usize, rng_seed: u64) -> World {
    let people = persons();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds = Vec::new();
    for i in 0..per_category {
        let city = CITIES[i % CITIES.len()];
        let person = &people[(i * 5) % people.len()];
        seeds.push(seed(
            format!("bn{i:03}"),
            "BN",
            true,
            format!("The health office in {city} reported {} new cases during the past week.", NUMBERS[i % NUMBERS.len()]),
        ));
        seeds.push(seed(
            format!("ti{i:03}"),
            "TI",
            true,
            format!("{person} opened the new river bridge in {city} in {}.", 1900 + (i * 7) % 120),
        ));
        let figure = if i % 10 == 9 { UNTABLED[(i / 10) % UNTABLED.len()].to_string() } else { people[(i * 3 + 1) % people.len()].clone() };
        seeds.push(seed(
            format!("if{i:03}"),
            "IF",
            true,
            format!("One rescuer, {figure}, said the team worked through the night to reach survivors."),
        ));
        seeds.push(seed(
            format!("p{i:03}"),
            "P",
            true,
            format!("A small plane carrying four people landed safely in {city} on Friday evening."),
        ));
        seeds.push(seed(
            format!("f{i:03}"),
            ["BN", "TI", "IF", "P"][i % 4],
            false,
            format!("The city library in {city} keeps its reading rooms open every day of the week."),
        ));
    }
    let mut vectors = String::new();
    let mut gazetteer = String::new();
    let _ = writeln!(vectors, "{} 3", people.len() + CITIES.len());
    for name in people.iter().map(String::as_str).chain(CITIES) {
        let v: Vec<String> = (0..3).map(|_| format!("{:.3}", rng.random_range(-10.0..10.0))).collect();
        let _ = writeln!(vectors, "{} {}", name.replace(' ', "_"), v.join(" "));
    }
    for p in people.iter().map(String::as_str).chain(UNTABLED) {
        let _ = writeln!(gazetteer, "{p}\tperson");
    }
    for c in CITIES {
        let _ = writeln!(gazetteer, "{c}\tlocation");
    }
    World {
        seeds,
        vectors,
        gazetteer,
    }
}

pub fn table(vectors: &str, gazetteer: &str) -> EmbeddingTable {
    EmbeddingTable::parse_word2vec(vectors).unwrap().with_gazetteer_tsv(gazetteer).unwrap()
}

pub fn seeds_jsonl(seeds: &[SeedRecord]) -> String {
    seeds.iter().map(|s| serde_json::to_string(s).unwrap() + "\n").collect()
}

/// Forge `seeds` against the synthetic oracle and return the fixture JSONL.
/// Role questions are answered for every target year the offset range
/// allows, so the fixtures serve any rng seed.
pub fn record_fixtures(seeds: &[SeedRecord], vectors: &str, gazetteer: &str, cfg: &ForgeConfig) -> (String, ForgeOutput) {
    let table = table(vectors, gazetteer);
    let rec = Arc::new(RecordingProvider::new(SyntheticOracle::default()));
    let client = OracleClient::new(rec.clone(), MODEL);
    let ner = GazetteerNer::from_table(&table);
    let stub = StubEntailment::default();
    let ctx = ForgeContext {
        paraphraser: &client,
        qa: &client,
        entailment: &stub,
        ner: &ner,
        table: Some(&table),
        reviewer: &AutoAccept,
    };
    let out = forge_pipeline(seeds, cfg, &ctx).unwrap();
    let [lo, hi] = cfg.ti_offset_range;
    for s in seeds.iter().filter(|s| s.hallucinated && s.category == "TI") {
        let Some(anchor) = ner.extract(&s.text).into_iter().next() else { continue };
        let Some(year) = last_year(&s.text) else { continue };
        for y in (year - hi)..=(year - lo) {
            client.answer_question(&format!("Who held the role of {} in {y}?", anchor.surface)).unwrap();
        }
    }
    (rec.to_jsonl(), out)
}

/// Files on disk for a CLI run.
pub struct Layout {
    pub dir: tempfile::TempDir,
    pub seeds: PathBuf,
    pub vectors: PathBuf,
    pub gazetteer: PathBuf,
    pub replay: PathBuf,
}

pub fn lay_out(w: &World, cfg: &ForgeConfig) -> Layout {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.jsonl");
    let vectors = dir.path().join("vectors.txt");
    let gazetteer = dir.path().join("gazetteer.tsv");
    let replay = dir.path().join("replay");
    std::fs::create_dir(&replay).unwrap();
    std::fs::write(&seeds, seeds_jsonl(&w.seeds)).unwrap();
    std::fs::write(&vectors, &w.vectors).unwrap();
    std::fs::write(&gazetteer, &w.gazetteer).unwrap();
    let (fixtures, _) = record_fixtures(&w.seeds, &w.vectors, &w.gazetteer, cfg);
    std::fs::write(replay.join("oracle.jsonl"), fixtures).unwrap();
    Layout {
        dir,
        seeds,
        vectors,
        gazetteer,
        replay,
    }
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the CLI in-process with `stdin` as scripted input and no
/// environment.
pub fn cli(args: &[&str], stdin: &str) -> Outcome {
    let mut argv = vec!["factoid".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = factoid_cli::run_with_env(argv, &BTreeMap::new(), &mut input, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
