use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use noveltrace::graph::*;
use noveltrace::llm::{schema, Gateway, LlmSession, MockProvider, Step};
use noveltrace::texparse::{PlainDocument, Section};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

const KINDS: [NodeKind; 4] = [NodeKind::Title, NodeKind::Claim, NodeKind::Method, NodeKind::Experiment];

/// A random graph satisfying every invariant, with at most `max_n` nodes.
fn random_valid_graph(rng: &mut StdRng, max_n: usize) -> PaperGraph {
    let n = rng.gen_range(1..=max_n);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut levels: [Vec<String>; 4] = Default::default();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (i, &tag) in ids.iter().enumerate() {
        let id = format!("k{tag}");
        let level = if i == 0 {
            0
        } else {
            // a level is only available once its parent level is populated
            let top = (1..4).take_while(|&l| !levels[l - 1].is_empty()).last().unwrap_or(1);
            rng.gen_range(1..=top)
        };
        if level > 0 {
            let parents = &levels[level - 1];
            let p = parents[rng.gen_range(0..parents.len())].clone();
            edges.push(Edge::new(&p, &id));
            for q in parents {
                if *q != p && rng.gen_bool(0.15) {
                    edges.push(Edge::new(q, &id));
                }
            }
        }
        let excerpt = if level == 0 { String::new() } else { format!("text of {id}") };
        nodes.push(GraphNode::new(&id, KINDS[level], &id, &excerpt));
        levels[level].push(id);
    }
    PaperGraph { nodes, edges }
}

fn shuffled(g: &PaperGraph, rng: &mut StdRng) -> PaperGraph {
    let mut h = g.clone();
    h.nodes.shuffle(rng);
    h.edges.shuffle(rng);
    h
}

/// Independent checker: transitive closure for cycles, BFS for reachability.
fn brute_force_ok(g: &PaperGraph) -> bool {
    let n = g.nodes.len();
    if g.nodes.iter().filter(|x| x.kind == NodeKind::Title).count() != 1 {
        return false;
    }
    let mut pos = HashMap::new();
    for (i, x) in g.nodes.iter().enumerate() {
        if pos.insert(x.id.clone(), i).is_some() {
            return false;
        }
    }
    let mut reach = vec![vec![false; n]; n];
    for e in &g.edges {
        let (Some(&a), Some(&b)) = (pos.get(&e.from), pos.get(&e.to)) else { return false };
        let allowed = matches!(
            (g.nodes[a].kind, g.nodes[b].kind),
            (NodeKind::Title, NodeKind::Claim) | (NodeKind::Claim, NodeKind::Method) | (NodeKind::Method, NodeKind::Experiment)
        );
        if !allowed {
            return false;
        }
        reach[a][b] = true;
    }
    let direct = reach.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    if (0..n).any(|i| reach[i][i]) {
        return false;
    }
    let t = g.nodes.iter().position(|x| x.kind == NodeKind::Title).unwrap();
    let mut seen = vec![false; n];
    seen[t] = true;
    let mut q = VecDeque::from([t]);
    while let Some(u) = q.pop_front() {
        for v in 0..n {
            if direct[u][v] && !seen[v] {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    g.nodes.iter().enumerate().all(|(i, x)| {
        seen[i] && (x.kind == NodeKind::Title || !x.excerpt.trim().is_empty())
    })
}

/// Arbitrary small graphs, mostly invalid.
fn random_graph(rng: &mut StdRng) -> PaperGraph {
    let n = rng.gen_range(1..=8);
    let nodes: Vec<GraphNode> = (0..n)
        .map(|i| {
            let id = if rng.gen_bool(0.05) { "dup".to_string() } else { format!("n{i}") };
            let kind = KINDS[if i == 0 && rng.gen_bool(0.8) { 0 } else { rng.gen_range(0..4) }];
            let excerpt = if rng.gen_bool(0.95) { "x" } else { "" };
            GraphNode::new(&id, kind, &id, excerpt)
        })
        .collect();
    let m = rng.gen_range(0..=2 * n);
    let edges = (0..m)
        .map(|_| {
            let a = format!("n{}", rng.gen_range(0..n));
            let b = if rng.gen_bool(0.03) { "ghost".to_string() } else { format!("n{}", rng.gen_range(0..n)) };
            Edge::new(&a, &b)
        })
        .collect();
    PaperGraph { nodes, edges }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn linearization_respects_edges_and_ignores_list_order(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = random_valid_graph(&mut rng, 50);
        prop_assert_eq!(validate_graph(&g), Ok(()));
        let order = linear_order(&g).unwrap();
        let mut at = HashMap::new();
        for (k, &i) in order.iter().enumerate() {
            at.insert(g.nodes[i].id.as_str(), k);
        }
        prop_assert_eq!(at.len(), g.nodes.len());
        for e in &g.edges {
            prop_assert!(at[e.from.as_str()] < at[e.to.as_str()]);
        }
        let text = linearize(&g).unwrap();
        prop_assert_eq!(text.split("\n\n").count(), g.nodes.len());
        for _ in 0..3 {
            prop_assert_eq!(&linearize(&shuffled(&g, &mut rng)).unwrap(), &text);
        }
    }

    #[test]
    fn validator_agrees_with_brute_force(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = if rng.gen_bool(0.3) { random_valid_graph(&mut rng, 8) } else { random_graph(&mut rng) };
        prop_assert_eq!(validate_graph(&g).is_ok(), brute_force_ok(&g), "{:?}", g);
    }
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut p in permutations(rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

#[test]
fn diamond_follows_the_tie_break_among_all_topological_orders() {
    // claim "cb" (B) sorts before claim "cz" (A); both feed one method.
    let g = PaperGraph {
        nodes: vec![
            GraphNode::new("e", NodeKind::Experiment, "E", "e"),
            GraphNode::new("cz", NodeKind::Claim, "A", "a"),
            GraphNode::new("m", NodeKind::Method, "M", "m"),
            GraphNode::new("cb", NodeKind::Claim, "B", "b"),
            GraphNode::new("t", NodeKind::Title, "T", ""),
        ],
        edges: vec![
            Edge::new("t", "cz"),
            Edge::new("t", "cb"),
            Edge::new("cz", "m"),
            Edge::new("cb", "m"),
            Edge::new("m", "e"),
        ],
    };
    let idx = |id: &str| g.nodes.iter().position(|n| n.id == id).unwrap();
    let valid: Vec<Vec<usize>> = permutations((0..g.nodes.len()).collect())
        .into_iter()
        .filter(|p| {
            let at = |i: usize| p.iter().position(|&x| x == i).unwrap();
            g.edges.iter().all(|e| at(idx(&e.from)) < at(idx(&e.to)))
        })
        .collect();
    assert_eq!(valid.len(), 2);
    let out = linear_order(&g).unwrap();
    assert!(valid.contains(&out));
    let ids: Vec<&str> = out.iter().map(|&i| g.nodes[i].id.as_str()).collect();
    assert_eq!(ids, ["t", "cb", "cz", "m", "e"]);
}

fn doc() -> PlainDocument {
    PlainDocument {
        source_id: "arxiv:0000.00001".into(),
        sections: vec![Section {
            heading: "Introduction".into(),
            paragraphs: vec![
                "We propose sparse routing for graph transformers. The routing layer selects a few neighbours per node.".into(),
                "Experiments on citation graphs show a 2x speedup.".into(),
            ],
        }],
    }
}

fn fixed_graph() -> serde_json::Value {
    json!({
        "nodes": [
            {"id": "t", "kind": "title", "label": "Sparse Routing", "excerpt": ""},
            {"id": "c1", "kind": "claim", "label": "Sparse routing", "excerpt": "We propose sparse routing for graph transformers."},
            {"id": "m1", "kind": "method", "label": "Routing layer", "excerpt": "The routing layer selects a few neighbours per node."},
            {"id": "e1", "kind": "experiment", "label": "Speedup", "excerpt": "Experiments on citation graphs show a 2x speedup."}
        ],
        "edges": [{"from": "t", "to": "c1"}, {"from": "c1", "to": "m1"}, {"from": "m1", "to": "e1"}]
    })
}

fn session(mock: Arc<MockProvider>) -> LlmSession {
    Arc::new(Gateway::builder().provider("mock", mock).model("mock", "mock").build().unwrap())
        .session("mock")
        .unwrap()
}

#[tokio::test]
async fn fixed_valid_graph_passes_through_unchanged() {
    let mock = Arc::new(MockProvider::new());
    mock.rule(schema::PAPER_GRAPH, "Sparse Routing", fixed_graph());
    let out = extract_graph(&doc(), "Sparse Routing", &session(mock)).await.unwrap();
    let expected: PaperGraph = serde_json::from_value(fixed_graph()).unwrap();
    assert_eq!(out.graph, expected);
    assert!(!out.empty && out.flagged.is_empty());
    assert_eq!(out.rounds, 1);
}

#[tokio::test]
async fn hierarchy_violation_fails_after_repair() {
    let mut bad = fixed_graph();
    bad["edges"].as_array_mut().unwrap().push(json!({"from": "e1", "to": "c1"}));
    let mock = Arc::new(MockProvider::new());
    mock.rule(schema::PAPER_GRAPH, "Sparse Routing", bad);
    let err = extract_graph(&doc(), "Sparse Routing", &session(mock.clone())).await.unwrap_err();
    assert!(matches!(err, GraphError::ExtractionFailed(ref m) if m.contains("e1 -> c1")), "{err:?}");
    assert_eq!(mock.call_count(), 2);
}

#[tokio::test]
async fn repair_round_can_recover() {
    let mut bad = fixed_graph();
    bad["edges"].as_array_mut().unwrap().push(json!({"from": "e1", "to": "c1"}));
    let mock = Arc::new(MockProvider::new());
    mock.script(schema::PAPER_GRAPH, [Step::Respond(bad), Step::Respond(fixed_graph())]);
    let out = extract_graph(&doc(), "Sparse Routing", &session(mock)).await.unwrap();
    assert_eq!(out.rounds, 2);
}

#[tokio::test]
async fn hallucinated_excerpt_is_replaced_by_closest_sentence() {
    let mut g = fixed_graph();
    g["nodes"][2]["excerpt"] = json!("A routing layer that selects neighbours for each node.");
    let mock = Arc::new(MockProvider::new());
    mock.rule(schema::PAPER_GRAPH, "Sparse Routing", g);
    let d = doc();
    let out = extract_graph(&d, "Sparse Routing", &session(mock)).await.unwrap();

    // oracle: maximise the number of shared lowercase words over all sentences
    let sentences = d.sentences();
    let bag = |s: &str| -> std::collections::HashSet<String> {
        s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect()
    };
    let target = bag("A routing layer that selects neighbours for each node.");
    let best = sentences.iter().max_by_key(|s| bag(s).intersection(&target).count()).unwrap();

    let m1 = out.graph.node("m1").unwrap();
    assert_eq!(&m1.excerpt, best);
    assert!(m1.excerpt_flagged);
    assert_eq!(out.flagged, vec!["m1".to_string()]);
    assert!(!out.graph.node("c1").unwrap().excerpt_flagged);
}

#[tokio::test]
async fn no_claims_is_flagged_not_fatal() {
    let mock = Arc::new(MockProvider::new());
    mock.rule(schema::PAPER_GRAPH, "Sparse Routing", json!({"nodes": [{"id": "t", "kind": "title", "label": "Sparse Routing", "excerpt": ""}], "edges": []}));
    let out = extract_graph(&doc(), "Sparse Routing", &session(mock)).await.unwrap();
    assert!(out.empty);
}

#[tokio::test]
async fn synthetic_mock_graph_is_valid_and_verbatim() {
    let out = extract_graph(&doc(), "Sparse Routing", &session(Arc::new(MockProvider::synthetic()))).await.unwrap();
    assert!(out.flagged.is_empty());
    assert!(out.graph.count(NodeKind::Claim) >= 1);
}

#[tokio::test]
async fn empty_document_is_rejected() {
    let d = PlainDocument { source_id: "x".into(), sections: vec![] };
    let r = extract_graph(&d, "T", &session(Arc::new(MockProvider::synthetic()))).await;
    assert_eq!(r.unwrap_err(), GraphError::EmptyDocument);
}
