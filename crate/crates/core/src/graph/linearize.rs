use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{GraphError, NodeKind, PaperGraph};

/// Node indices in topological order. Among ready nodes the one with the
/// lowest (kind rank, id) goes first, so the order depends only on the graph,
/// not on how its node and edge lists happen to be ordered.
pub fn linear_order(g: &PaperGraph) -> Result<Vec<usize>, GraphError> {
    let index: HashMap<&str, usize> = g
        .nodes
        .iter()
        .enumerate()
        .rev()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let n = g.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        if let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) {
            adj[a].push(b);
            indegree[b] += 1;
        }
    }
    let key = |i: usize| Reverse((g.nodes[i].kind.rank(), g.nodes[i].id.as_str(), i));
    let mut ready: BinaryHeap<_> = (0..n).filter(|&i| indegree[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, _, u))) = ready.pop() {
        order.push(u);
        for &v in &adj[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(key(v));
            }
        }
    }
    if order.len() != n {
        return Err(GraphError::CyclicGraph);
    }
    Ok(order)
}

/// One paragraph per node in [`linear_order`], separated by blank lines.
pub fn linearize(g: &PaperGraph) -> Result<String, GraphError> {
    let order = linear_order(g)?;
    let paragraphs: Vec<String> = order
        .into_iter()
        .map(|i| {
            let node = &g.nodes[i];
            match node.kind {
                NodeKind::Title => format!("Title: {}", node.label.trim()),
                kind => {
                    let name = match kind {
                        NodeKind::Claim => "Claim",
                        NodeKind::Method => "Method",
                        _ => "Experiment",
                    };
                    format!("{name} {}: {}\nExcerpt: {}", node.id, node.label.trim(), node.excerpt.trim())
                }
            }
        })
        .collect();
    Ok(paragraphs.join("\n\n"))
}
