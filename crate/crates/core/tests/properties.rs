use std::collections::HashMap;

use factoid_core::corpus::{
    compute_stats, parse_record, serialize_record, EntailmentLabel, EntailmentPair, HallucinationCategory,
    ProvenanceTag, TextSpan,
};
use factoid_core::embedding::{EmbeddingTable, EntityClass, Metric, NeighborQuery, SearchMode};
use factoid_core::gate::{diversity_score, med_filter, word_edit_distance, CandidateSet};
use factoid_core::hvi::{score_cohort, CohortCounts, DampingOptions};
use num_rational::Ratio;
use proptest::prelude::*;
use serde_json::Map;

const VOCAB: [&str; 6] = ["the", "cat", "sat", "on", "a", "mat"];

fn sentence(max: usize) -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(&VOCAB[..]), 0..=max)
}

/// Top-down recursive edit distance, memoised on suffix positions.
fn lev_oracle(a: &[&str], b: &[&str]) -> usize {
    fn go(a: &[&str], b: &[&str], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let cost = usize::from(a[i] != b[j]);
        let v = (go(a, b, i + 1, j + 1, memo) + cost)
            .min(go(a, b, i + 1, j, memo) + 1)
            .min(go(a, b, i, j + 1, memo) + 1);
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn med_matches_recursive_oracle(a in sentence(10), b in sentence(10)) {
        prop_assert_eq!(word_edit_distance(&a.join(" "), &b.join(" ")), lev_oracle(&a, &b));
    }

    #[test]
    fn med_is_a_metric(a in sentence(8), b in sentence(8), c in sentence(8)) {
        let (a, b, c) = (a.join(" "), b.join(" "), c.join(" "));
        prop_assert_eq!(word_edit_distance(&a, &b), word_edit_distance(&b, &a));
        prop_assert!(word_edit_distance(&a, &c) <= word_edit_distance(&a, &b) + word_edit_distance(&b, &c));
        prop_assert_eq!(word_edit_distance(&a, &a), 0);
    }

    #[test]
    fn med_filter_is_pointwise(src in sentence(8), cands in prop::collection::vec(sentence(8), 0..6)) {
        let set = CandidateSet::new(src.join(" "), cands.iter().map(|c| c.join(" ")).collect());
        let kept = med_filter(&set, 2);
        let expect: Vec<String> = set
            .candidates
            .iter()
            .filter(|c| word_edit_distance(&set.source, c) > 2)
            .cloned()
            .collect();
        prop_assert_eq!(&kept.candidates, &expect);
        prop_assert_eq!(med_filter(&kept, 2), kept);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn diversity_at_least_one(src in sentence(8), cands in prop::collection::vec(sentence(8), 1..5)) {
        prop_assume!(!src.is_empty() && cands.iter().all(|c| !c.is_empty()));
        let set = CandidateSet::new(src.join(" "), cands.iter().map(|c| c.join(" ")).collect());
        let d = diversity_score(&set).unwrap();
        prop_assert!(d >= 1.0 - 1e-12, "{}", d);
    }
}

fn table_strategy() -> impl Strategy<Value = Vec<(i8, i8, u8)>> {
    prop::collection::vec((-3i8..=3, -3i8..=3, 0u8..3), 2..60)
}

fn build(rows: &[(i8, i8, u8)]) -> EmbeddingTable {
    let classes = [EntityClass::Person, EntityClass::Location, EntityClass::Other];
    EmbeddingTable::from_entries(2, rows.iter().enumerate().map(|(i, (x, y, _))| (format!("t{i:02}"), vec![f64::from(*x), f64::from(*y)])))
        .unwrap()
        .with_classes(rows.iter().enumerate().map(|(i, r)| (format!("t{i:02}"), classes[r.2 as usize])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn neighbors_match_scan(
        rows in table_strategy(),
        q in 0usize..60,
        k in 1usize..8,
        far in any::<bool>(),
        tau in prop::option::of(0.5f64..4.0),
        class in prop::option::of(0u8..3),
    ) {
        let q = q % rows.len();
        let table = build(&rows);
        let class = class.map(|c| [EntityClass::Person, EntityClass::Location, EntityClass::Other][c as usize]);
        let mode = if far { SearchMode::Farthest } else { SearchMode::Nearest };
        let qt = format!("t{q:02}");
        let query = NeighborQuery::token(&qt).k(k).mode(mode).threshold(tau).class(class).metric(Metric::Euclidean);
        let got = table.neighbors(&query);
        let (qx, qy) = (f64::from(rows[q].0), f64::from(rows[q].1));
        let mut scan: Vec<(f64, String)> = rows
            .iter()
            .enumerate()
            .filter(|(i, r)| *i != q && class.is_none_or(|c| [EntityClass::Person, EntityClass::Location, EntityClass::Other][r.2 as usize] == c))
            .map(|(i, r)| ((qx - f64::from(r.0)).hypot(qy - f64::from(r.1)), format!("t{i:02}")))
            .filter(|(d, _)| match tau {
                None => true,
                Some(t) if far => *d >= t,
                Some(t) => *d <= t,
            })
            .collect();
        scan.sort_by(|a, b| {
            let o = if far { b.0.partial_cmp(&a.0) } else { a.0.partial_cmp(&b.0) };
            o.unwrap().then_with(|| a.1.cmp(&b.1))
        });
        scan.truncate(k);
        let class_present = class.is_none_or(|c| rows.iter().any(|r| [EntityClass::Person, EntityClass::Location, EntityClass::Other][r.2 as usize] == c));
        if !class_present {
            prop_assert!(got.is_err());
        } else {
            let got: Vec<String> = got.unwrap().into_iter().map(|n| n.token).collect();
            let want: Vec<String> = scan.into_iter().map(|(_, t)| t).collect();
            prop_assert_eq!(got, want);
        }
    }
}

fn pair_strategy() -> impl Strategy<Value = EntailmentPair> {
    let cat = prop::sample::select(HallucinationCategory::ALL.to_vec());
    let label = prop::sample::select(vec![EntailmentLabel::Support, EntailmentLabel::Refute, EntailmentLabel::Neutral]);
    (
        "[a-z0-9]{1,8}",
        "[A-Za-z]{1,6}",
        cat,
        label,
        "[A-Za-zé ]{0,12}",
        "[a-zäö]{1,6}",
        "[A-Za-z ]{0,12}",
        "[a-zß]{0,6}",
        any::<u64>(),
    )
        .prop_map(|(id, llm, category, label, pre, surf, post, rep, seed)| {
            let original = format!("{pre}{surf}{post}");
            if label != EntailmentLabel::Refute {
                return EntailmentPair {
                    id,
                    llm,
                    category,
                    original: original.clone(),
                    paraphrase: format!("{post} {pre}"),
                    label,
                    orig_span: None,
                    para_span: None,
                    provenance: None,
                    extra: Map::new(),
                };
            }
            let start = pre.chars().count();
            let paraphrase = format!("{post}X{rep}{pre}");
            let pstart = post.chars().count() + 1;
            EntailmentPair {
                id: id.clone(),
                llm,
                category,
                orig_span: Some(TextSpan::at(start, &surf)),
                para_span: (!rep.is_empty()).then(|| TextSpan::at(pstart, &rep)),
                provenance: Some(ProvenanceTag {
                    method: category,
                    replaced_surface: surf,
                    replacement_surface: rep,
                    seed,
                    source_id: id,
                }),
                original,
                paraphrase,
                label,
                extra: Map::new(),
            }
        })
        .prop_filter("refute texts differ", |p| p.original != p.paraphrase)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_parse_round_trip(p in pair_strategy()) {
        p.validate().unwrap();
        let line = serialize_record(&p);
        let back = parse_record(&line, 1).unwrap();
        prop_assert_eq!(serialize_record(&back), line);
        prop_assert_eq!(back, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stats_are_order_invariant(mut pairs in prop::collection::vec(pair_strategy(), 0..40), seed in any::<u64>()) {
        let a = compute_stats(pairs.iter().cloned().map(Ok)).unwrap();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        pairs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = compute_stats(pairs.into_iter().map(Ok)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hvi_lambda_zero_is_share(
        cohort in prop::collection::vec((1u64..3000, [0u64..800, 0u64..800, 0u64..800, 0u64..800]), 1..6)
    ) {
        let mut c = CohortCounts::default();
        for (i, (u, n)) in cohort.iter().enumerate() {
            let n = n.map(|x| x.min(*u));
            c.insert(format!("llm{i}"), *u, n);
        }
        let r = score_cohort(&c, DampingOptions::new(0.0)).unwrap();
        for e in &r.entries {
            let lc = c.llms[&e.llm];
            let exact = Ratio::new(100 * lc.total(), lc.u);
            if exact <= Ratio::from_integer(100) {
                prop_assert_eq!(e.exact, Some(exact));
            } else {
                prop_assert_eq!(e.score, 100.0);
            }
        }
    }
}
