mod common;

use std::collections::HashSet;

use lecbench::corpus::{self, apply_urgency_rule, Dataset, Example, Fraction, LabelSchema, SplitSpec, TaskKind};
use lecbench::knowledge::{self, KnowledgeBase, Provenance};
use lecbench::metrics::{self, ConfusionMatrix, INVALID_LABEL};
use lecbench::parse::{self, ErrorClass, ParseKind};
use lecbench::prompt::{Component, PromptTemplate};
use lecbench::report::{self, Scores};
use lecbench::sampler::rus_select;
use proptest::collection::vec;
use proptest::prelude::*;

const LABELS: [&str; 6] = ["Surprise", "Curiosity", "Enjoyment", "Anxiety", "Confusion", "Neutral"];

fn schema() -> LabelSchema {
    LabelSchema::new("Epistemic Emotion Classification", TaskKind::Emotion, LABELS).unwrap()
}

fn dataset(golds: &[usize]) -> Dataset {
    let examples = golds
        .iter()
        .enumerate()
        .map(|(i, &g)| Example::new(format!("e{i}"), format!("text {i}"), LABELS[g]))
        .collect();
    Dataset::new(schema(), examples).unwrap()
}

fn golds(max: usize) -> impl Strategy<Value = Vec<usize>> {
    vec(0..LABELS.len(), 1..max)
}

fn matrix(labels: usize, pairs: &[(usize, usize)]) -> ConfusionMatrix {
    let names: Vec<String> = (0..labels).map(|i| format!("c{i}")).collect();
    let pairs = pairs.iter().map(|&(g, p)| {
        let g = names[g % labels].clone();
        let p = if p >= labels { INVALID_LABEL.to_owned() } else { names[p].clone() };
        (g, p)
    });
    ConfusionMatrix::from_pairs(names.clone(), pairs).unwrap()
}

fn pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..8).prop_flat_map(|k| (Just(k), vec((0..k, 0..=k), 1..200)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_partitions_exactly(g in golds(300), seed in any::<u64>()) {
        let d = dataset(&g);
        prop_assume!(d.len() >= 7);
        let (train, val, test) = corpus::split(&d, &SplitSpec::standard(seed)).unwrap();
        prop_assert_eq!(train.len() + val.len() + test.len(), d.len());
        let ids = |x: &Dataset| x.ids().map(str::to_owned).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&train), ids(&val), ids(&test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(a.len() + b.len() + c.len(), d.len());
    }

    #[test]
    fn test_subset_is_deterministic(g in golds(300), seed in any::<u64>(), num in 1u64..20) {
        let d = dataset(&g);
        let f = Fraction::new(num, 20).unwrap();
        let a: Vec<String> = corpus::sample_test_subset(&d, f, seed).unwrap().ids().map(str::to_owned).collect();
        let b: Vec<String> = corpus::sample_test_subset(&d, f, seed).unwrap().ids().map(str::to_owned).collect();
        prop_assert_eq!(a.len(), f.floor_of(d.len()));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn urgency_rule_is_monotone(a in 1.0f64..7.0, b in 1.0f64..7.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (l1, l2) = (apply_urgency_rule(lo).unwrap(), apply_urgency_rule(hi).unwrap());
        prop_assert!(l1 == l2 || l1 == "Low_urgency");
    }

    #[test]
    fn dataset_round_trips(texts in vec("[a-zA-Z0-9 ,.!?'\u{e9}\u{2019}]{1,40}", 1..40), seed in any::<u64>()) {
        let examples: Vec<Example> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.trim().is_empty())
            .map(|(i, t)| Example::new(format!("x{i}"), t.trim(), LABELS[(seed as usize + i) % 6]))
            .collect();
        prop_assume!(!examples.is_empty());
        let d = Dataset::new(schema(), examples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        d.write_jsonl(&path).unwrap();
        prop_assert_eq!(corpus::load_dataset(&path, schema()).unwrap(), d);
    }

    #[test]
    fn shot_sets_are_balanced_unique_and_covering(g in golds(120), n in 1usize..40, seed in any::<u64>()) {
        let d = dataset(&g);
        let set = rus_select(&d, n, seed).unwrap();
        prop_assert_eq!(&set, &rus_select(&d, n, seed).unwrap());
        let ids: HashSet<&str> = set.ids().collect();
        prop_assert_eq!(ids.len(), set.len());
        let stock: Vec<usize> = LABELS.iter().map(|l| g.iter().filter(|&&x| LABELS[x] == *l).count()).collect();
        let counts: Vec<usize> = LABELS.iter().map(|l| set.shots.iter().filter(|e| e.gold == *l).count()).collect();
        for a in 0..6 {
            for b in 0..6 {
                if counts[a] < stock[a] && counts[b] < stock[b] {
                    prop_assert!(counts[a].abs_diff(counts[b]) <= 1, "{:?} from {:?}", counts, stock);
                }
            }
        }
        if n >= 6 && stock.iter().all(|&s| s > 0) {
            prop_assert!(counts.iter().all(|&c| c >= 1));
        }
    }

    #[test]
    fn knowledge_mapping_round_trips(defs in vec("[A-Za-z ,.'\"\\\\:{}-]{1,60}", 6)) {
        prop_assume!(defs.iter().all(|d| !d.trim().is_empty()));
        let s = schema();
        let kb = KnowledgeBase::new(&s, LABELS.iter().zip(&defs).map(|(l, d)| (*l, d.as_str())), Provenance::Manual).unwrap();
        let literal = kb.mapping_literal(&s);
        let parsed = knowledge::parse_knowledge_response(&literal, &s, Provenance::Manual).unwrap();
        prop_assert_eq!(parsed.entries(), kb.entries());
        let again = knowledge::parse_knowledge_response(&parsed.mapping_literal(&s), &s, Provenance::Manual).unwrap();
        prop_assert_eq!(again, parsed);
    }

    #[test]
    fn prompts_grow_affinely_in_shot_text(shots in vec(("[a-z ]{1,30}", 0..6usize), 0..8), query in "[a-z]{1,20}") {
        let t = PromptTemplate::default();
        let s = schema();
        let kb = common::epistemic_knowledge();
        let shots: Vec<Example> = shots
            .iter()
            .enumerate()
            .filter(|(_, (text, _))| !text.trim().is_empty())
            .map(|(i, (text, g))| Example::new(format!("s{i}"), text.trim(), LABELS[*g]))
            .collect();
        let zero = t.render_agka(&s, &kb, &[], &query).unwrap();
        let few = t.render_agka(&s, &kb, &shots, &query).unwrap();
        let per_shot = "Text: \n\nLabel: \n\n".len();
        let shot_chars: usize = shots.iter().map(|e| e.text.len() + e.gold.len()).sum();
        prop_assert_eq!(few.text.len(), zero.text.len() + shots.len() * per_shot + shot_chars);
        match few.span(Component::ShotBlock) {
            Some(block) => prop_assert_eq!(few.text.replacen(block, "", 1), zero.text.clone()),
            None => prop_assert!(shots.is_empty()),
        }
        let query_span = few.span(Component::Query).unwrap();
        prop_assert!(query_span.contains(query.as_str()));
    }

    #[test]
    fn normalize_is_idempotent_and_closed(raw in "(?s).{0,60}", pick in 0..6usize) {
        let s = schema();
        let out = parse::normalize(&raw, &s);
        if let Some(label) = &out.label {
            prop_assert!(s.contains(label));
            let again = parse::normalize(label, &s);
            prop_assert_eq!(again.kind, ParseKind::ExactLabel);
            prop_assert_eq!(again.label.as_ref(), Some(label));
        }
        prop_assert!(out.all_found.iter().all(|l| s.contains(l)));
        let wrapped = format!("Label: \"{}\".", LABELS[pick].to_lowercase());
        let unwrapped = parse::normalize(&wrapped, &s);
        prop_assert_eq!(unwrapped.label.as_deref(), Some(LABELS[pick]));
    }

    #[test]
    fn error_class_agrees_with_scoring(raw in "(?s).{0,40}", pick in 0..6usize, gold in 0..6usize) {
        let s = schema();
        let gold = LABELS[gold];
        for outcome in [parse::normalize(&raw, &s), parse::normalize(LABELS[pick], &s)] {
            let class = parse::classify_error(Some(&outcome), gold);
            let scored = parse::scoring_label(Some(&outcome));
            if class == ErrorClass::None {
                prop_assert_eq!(scored, gold);
            }
            if scored == gold && outcome.kind == ParseKind::ExactLabel {
                prop_assert_eq!(class, ErrorClass::None);
            }
            if scored != gold {
                prop_assert_ne!(class, ErrorClass::None);
            }
        }
        prop_assert_eq!(parse::classify_error(None, gold), ErrorClass::ProviderFailure);
        prop_assert_eq!(parse::scoring_label(None), INVALID_LABEL);
    }

    #[test]
    fn weighted_f1_lies_between_class_extremes((k, p) in pairs()) {
        let cm = matrix(k, &p);
        let per_class = metrics::per_class_prf(&cm);
        let supported: Vec<f64> = per_class.values().filter(|c| c.support > 0).map(|c| 100.0 * c.f1).collect();
        let lo = supported.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = supported.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = metrics::weighted_f1(&cm).unwrap();
        prop_assert!(w >= lo - 1e-9 && w <= hi + 1e-9);
    }

    #[test]
    fn label_order_does_not_change_metrics((k, p) in pairs(), rotate in 0usize..8) {
        let cm = matrix(k, &p);
        let names: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let mut rotated = names.clone();
        rotated.rotate_left(rotate % k);
        let pairs: Vec<(String, String)> = p
            .iter()
            .map(|&(g, q)| (names[g % k].clone(), if q >= k { INVALID_LABEL.to_owned() } else { names[q].clone() }))
            .collect();
        let other = ConfusionMatrix::from_pairs(rotated, pairs).unwrap();
        prop_assert!((metrics::accuracy(&cm).unwrap() - metrics::accuracy(&other).unwrap()).abs() < 1e-9);
        prop_assert!((metrics::weighted_f1(&cm).unwrap() - metrics::weighted_f1(&other).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn correct_record_never_lowers_accuracy((k, p) in pairs(), class in 0usize..8) {
        let mut cm = matrix(k, &p);
        let before = metrics::accuracy(&cm).unwrap();
        let label = format!("c{}", class % k);
        cm.record(&label, &label).unwrap();
        prop_assert!(metrics::accuracy(&cm).unwrap() >= before);
    }

    #[test]
    fn gains_are_antisymmetric(a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0, d in 0.0f64..100.0) {
        let x = Scores { accuracy: a, weighted_f1: b };
        let y = Scores { accuracy: c, weighted_f1: d };
        let (xy, yx) = (report::gain(x, y), report::gain(y, x));
        prop_assert_eq!(xy.accuracy, -yx.accuracy);
        prop_assert_eq!(xy.weighted_f1, -yx.weighted_f1);
    }

    #[test]
    fn rendering_rounds_half_up(cents in 0u64..1_000_000, sub in 0u64..10) {
        // cents + sub/10 hundredths, rounded half-up on the third decimal
        let x = (cents * 10 + sub) as f64 / 1000.0;
        let expected = cents + u64::from(sub >= 5);
        prop_assert_eq!(report::fmt2(x), format!("{}.{:02}", expected / 100, expected % 100));
        let negated = report::fmt2_signed(-x);
        prop_assert_eq!(negated.trim_start_matches('-'), report::fmt2(x));
    }
}

#[test]
fn extraction_prompt_lists_each_label_once() {
    let s = schema();
    let p = knowledge::build_extraction_prompt(&PromptTemplate::default(), &s, "Guideline text.").unwrap();
    let list = "[\"Surprise\", \"Curiosity\", \"Enjoyment\", \"Anxiety\", \"Confusion\", \"Neutral\"]";
    assert_eq!(p.text.matches(list).count(), 1);
    for l in LABELS {
        assert_eq!(p.text.matches(&format!("\"{l}\"")).count(), 1, "{l}");
    }
}

#[test]
fn claim_lists_labels_in_schema_order_and_query_once() {
    let t = PromptTemplate::default();
    let p = t.render_vanilla(&common::schema("cognitive_presence"), "How do I begin?").unwrap();
    let claim = p.span(Component::TaskClaim).unwrap();
    assert!(claim.contains(r#"["Triggering_Event", "Exploration", "Integration", "Resolution", "Other"]"#));
    assert_eq!(p.text.matches("How do I begin?").count(), 1);
    assert!(p.span(Component::Query).unwrap().contains("How do I begin?"));
}
