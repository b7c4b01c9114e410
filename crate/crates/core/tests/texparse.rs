mod common;

use std::collections::BTreeMap;

use noveltrace::ingest::LatexBundle;
use noveltrace::texparse::*;
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Planted {
    key: String,
    marker: String,
}

#[derive(Deserialize)]
struct Expected {
    planted: Vec<Planted>,
    commented: Vec<String>,
}

#[tokio::test]
async fn planted_corpus_recall_through_the_archive_path() {
    let expected: Expected = common::read_json("texparse/planted_expected.json");
    let (arxiv, _) = common::clients();
    let bundle = arxiv.fetch_latex("2403.00012").await.unwrap();
    let bib = parse_bibliography(&bundle).unwrap();
    // commented keys are still bibliography entries; only the sites vanish
    for key in &expected.commented {
        assert!(bib.get(key).is_some(), "{key}");
    }
    let doc = to_plain_text(&bundle).unwrap().document;
    let contexts = extract_citation_contexts(&doc, &bib);

    let found = expected
        .planted
        .iter()
        .filter(|p| {
            contexts
                .iter()
                .any(|c| c.citation_key == p.key && c.sentence.contains(&p.marker))
        })
        .count();
    assert_eq!(found, 12);
    assert_eq!(contexts.len(), 12);
    for key in &expected.commented {
        assert!(contexts.iter().all(|c| &c.citation_key != key), "{key}");
    }
    // multi-key command: both keys share one sentence
    let zeta3: Vec<_> = contexts.iter().filter(|c| c.sentence.contains("ZETA3")).collect();
    assert_eq!(zeta3.len(), 2);
    assert_eq!(zeta3[0].sentence, zeta3[1].sentence);
    // included files keep their own headings
    let heading = |k: &str| contexts.iter().find(|c| c.citation_key == k).unwrap().section_heading.clone();
    assert_eq!(heading("eta2020"), "Background");
    assert_eq!(heading("nu2020"), "Method");
}

#[test]
fn annotated_sentences() {
    let paragraphs: Vec<Vec<String>> = common::read_json("texparse/sentences.json");
    assert_eq!(paragraphs.iter().map(Vec::len).sum::<usize>(), 50);
    let mut wrong = Vec::new();
    for expected in &paragraphs {
        let got = segment_sentences(&expected.join(" "));
        if &got != expected {
            wrong.push((expected.clone(), got));
        }
    }
    assert!(wrong.is_empty(), "{wrong:#?}");
}

#[test]
fn enclosing_sentence_examples() {
    let mut bib = Bibliography::default();
    bib.entries.insert(
        "x".into(),
        BibEntry { title: "X".into(), authors: vec![], year: None, raw: String::new() },
    );
    let doc = PlainDocument {
        source_id: "d".into(),
        sections: vec![Section {
            heading: "".into(),
            paragraphs: vec!["A ⟨cite:x⟩. B.".into(), "C ⟨cite:x⟩ and ⟨cite:x⟩ again. D.".into()],
        }],
    };
    let contexts = extract_citation_contexts(&doc, &bib);
    assert_eq!(contexts.len(), 2);
    assert_eq!(contexts[0].sentence, "A ⟨cite:x⟩.");
    assert_eq!(contexts[1].sentence, "C ⟨cite:x⟩ and ⟨cite:x⟩ again.");
}

const WORDS: &[&str] = &[
    "graph", "model", "routing", "sparse", "layer", "node", "edge", "result", "method", "data",
];

/// A generated sentence: words with citations interleaved.
#[derive(Debug, Clone)]
struct GenSentence {
    words: Vec<usize>,
    cites: Vec<(usize, Vec<u8>)>,
}

fn sentence_strategy() -> impl Strategy<Value = GenSentence> {
    (
        prop::collection::vec(0..WORDS.len(), 2..8),
        prop::collection::vec((0usize..8, prop::collection::vec(0u8..8, 1..3)), 0..3),
    )
        .prop_map(|(words, cites)| GenSentence { words, cites })
}

fn render(s: &GenSentence) -> String {
    let mut parts: Vec<String> = s.words.iter().map(|&w| WORDS[w].to_string()).collect();
    for (at, keys) in &s.cites {
        let keys: Vec<String> = keys.iter().map(|k| format!("k{k}")).collect();
        let at = (*at).min(parts.len());
        parts.insert(at, format!("\\cite{{{}}}", keys.join(",")));
    }
    let mut text = parts.join(" ");
    text[..1].make_ascii_uppercase();
    text + "."
}

/// k0..k5 are in the bibliography; k6 and k7 are not.
fn bundle(paragraphs: &[Vec<GenSentence>]) -> LatexBundle {
    let body: Vec<String> = paragraphs
        .iter()
        .map(|p| p.iter().map(render).collect::<Vec<_>>().join(" "))
        .collect();
    let mut b = LatexBundle::from_source(
        "gen",
        format!("\\begin{{document}}\n\\section{{Body}}\n{}\n\\end{{document}}\n", body.join("\n\n")),
    );
    b.bib_sources.push(
        (0..6)
            .map(|k| format!("@misc{{k{k}, title={{Paper {k}}}, year={{2020}}}}\n"))
            .collect(),
    );
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn citation_accounting_is_lossless(
        paragraphs in prop::collection::vec(prop::collection::vec(sentence_strategy(), 1..5), 1..4)
    ) {
        let bundle = bundle(&paragraphs);
        let bib = parse_bibliography(&bundle).unwrap();
        prop_assert_eq!(bib.len(), 6);
        let doc = to_plain_text(&bundle).unwrap().document;
        let contexts = extract_citation_contexts(&doc, &bib);

        // oracle: per generated sentence, the distinct in-bibliography keys
        let mut expected = BTreeMap::new();
        for (pi, p) in paragraphs.iter().enumerate() {
            for (si, s) in p.iter().enumerate() {
                for (_, keys) in &s.cites {
                    for &k in keys {
                        if k < 6 {
                            expected.insert((pi, si, format!("k{k}")), ());
                        }
                    }
                }
            }
        }
        let got: BTreeMap<_, _> = contexts
            .iter()
            .map(|c| ((c.position.paragraph, c.position.sentence, c.citation_key.clone()), ()))
            .collect();
        prop_assert_eq!(contexts.len(), got.len(), "duplicate (key, sentence) contexts");
        prop_assert_eq!(got, expected);

        for c in &contexts {
            prop_assert_eq!(doc.sentence_at(c.position), Some(c.sentence.clone()));
            prop_assert!(c.sentence.contains(&cite_token(&c.citation_key)));
        }
    }

    #[test]
    fn segmentation_is_lossless(text in "[A-Za-z0-9 .,!?()]{0,200}") {
        let sentences = segment_sentences(&text);
        prop_assert!(sentences.iter().all(|s| !s.is_empty() && s.trim() == s));
        let squash = |s: &str| s.split_whitespace().collect::<String>();
        prop_assert_eq!(squash(&sentences.join(" ")), squash(&text));
    }
}
