use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{NodeKind, PaperGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TitleCount { found: usize },
    DuplicateId { id: String },
    DanglingEdge { from: String, to: String },
    /// Ids of one strongly connected component (or a self-loop), sorted.
    Cycle { ids: Vec<String> },
    HierarchyEdge { from: String, to: String, from_kind: NodeKind, to_kind: NodeKind },
    Unreachable { id: String },
    MissingExcerpt { id: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TitleCount { found } => write!(f, "expected exactly one title node, found {found}"),
            Self::DuplicateId { id } => write!(f, "node id {id} is used more than once"),
            Self::DanglingEdge { from, to } => write!(f, "edge {from} -> {to} references a missing node"),
            Self::Cycle { ids } => write!(f, "cycle through {}", ids.join(", ")),
            Self::HierarchyEdge { from, to, from_kind, to_kind } => write!(
                f,
                "edge {from} -> {to} goes {from_kind} -> {to_kind}; only title->claim, claim->method and method->experiment are allowed"
            ),
            Self::Unreachable { id } => write!(f, "node {id} is not reachable from the title"),
            Self::MissingExcerpt { id } => write!(f, "node {id} has no excerpt"),
        }
    }
}

/// Every violated structural invariant of `g`, not just the first.
pub fn validate_graph(g: &PaperGraph) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();

    let titles = g.count(NodeKind::Title);
    if titles != 1 {
        out.push(Violation::TitleCount { found: titles });
    }

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dup_reported = BTreeSet::new();
    for (i, n) in g.nodes.iter().enumerate() {
        if index.contains_key(n.id.as_str()) {
            if dup_reported.insert(n.id.as_str()) {
                out.push(Violation::DuplicateId { id: n.id.clone() });
            }
        } else {
            index.insert(&n.id, i);
        }
    }

    let n = g.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        match (index.get(e.from.as_str()), index.get(e.to.as_str())) {
            (Some(&a), Some(&b)) => {
                adj[a].push(b);
                let (ka, kb) = (g.nodes[a].kind, g.nodes[b].kind);
                if ka.child() != Some(kb) {
                    out.push(Violation::HierarchyEdge {
                        from: e.from.clone(),
                        to: e.to.clone(),
                        from_kind: ka,
                        to_kind: kb,
                    });
                }
            }
            _ => out.push(Violation::DanglingEdge {
                from: e.from.clone(),
                to: e.to.clone(),
            }),
        }
    }

    for comp in cyclic_components(&adj) {
        let mut ids: Vec<String> = comp.iter().map(|&i| g.nodes[i].id.clone()).collect();
        ids.sort();
        out.push(Violation::Cycle { ids });
    }

    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| g.nodes[i].kind == NodeKind::Title).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    for (i, node) in g.nodes.iter().enumerate() {
        if node.kind != NodeKind::Title && !seen[i] && index.get(node.id.as_str()) == Some(&i) {
            out.push(Violation::Unreachable { id: node.id.clone() });
        }
    }

    for node in &g.nodes {
        if node.kind != NodeKind::Title && node.excerpt.trim().is_empty() {
            out.push(Violation::MissingExcerpt { id: node.id.clone() });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Strongly connected components that contain a cycle (size > 1 or a
/// self-loop), via iterative Tarjan.
fn cyclic_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next edge position)
        let mut work = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut pos)) = work.last_mut() {
            if *pos < adj[u].len() {
                let v = adj[u][*pos];
                *pos += 1;
                if index[v] == usize::MAX {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    work.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == u {
                            break;
                        }
                    }
                    if comp.len() > 1 || adj[u].contains(&u) {
                        comp.sort();
                        out.push(comp);
                    }
                }
            }
        }
    }
    out
}
