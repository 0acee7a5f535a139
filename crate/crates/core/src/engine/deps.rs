//! Producer/consumer graph between queries and the streams they read.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use petgraph::algo::toposort;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::Direction;

use crate::csparql::RegisteredQuery;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// A stream no registered query produces.
    Input(String),
    Query(String),
}

impl Node {
    pub fn label(&self) -> &str {
        match self {
            Node::Input(s) | Node::Query(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dependency cycle: {}", .path.join(" -> "))]
pub struct CycleError {
    /// Query names along the cycle; the first name is repeated at the end.
    pub path: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    graph: DiGraph<Node, ()>,
    queries: BTreeMap<String, NodeIndex>,
    inputs: BTreeMap<String, NodeIndex>,
}

impl DependencyGraph {
    /// Query `q` produces `stream_base + q.name`; an edge runs from a
    /// producer to every query with that IRI among its sources. Sources
    /// with unresolvable prefixes are ignored here.
    pub fn build(queries: &[RegisteredQuery], stream_base: &str) -> Self {
        let mut g = DependencyGraph::default();
        let mut produced: BTreeMap<String, NodeIndex> = BTreeMap::new();
        for q in queries {
            let idx = g.graph.add_node(Node::Query(q.name.clone()));
            g.queries.insert(q.name.clone(), idx);
            produced.insert(format!("{stream_base}{}", q.name), idx);
        }
        for q in queries {
            let consumer = g.queries[&q.name];
            for source in &q.sources {
                let Ok(iri) = q.resolve_iri(&source.stream) else {
                    continue;
                };
                let producer = match produced.get(&iri) {
                    Some(&p) => p,
                    None => *g
                        .inputs
                        .entry(iri.clone())
                        .or_insert_with(|| g.graph.add_node(Node::Input(iri.clone()))),
                };
                g.graph.update_edge(producer, consumer, ());
            }
        }
        g
    }

    /// Query names, producers before consumers; ties keep declaration order.
    pub fn topological_order(&self) -> Result<Vec<String>, CycleError> {
        if let Err(cycle) = toposort(&self.graph, None) {
            return Err(CycleError {
                path: self.cycle_through(cycle.node_id()),
            });
        }
        // petgraph's order does not preserve declaration order among
        // independent queries, so emit a stable Kahn order instead
        Ok(self.stable_order())
    }

    fn stable_order(&self) -> Vec<String> {
        let mut indegree: Vec<usize> = self
            .graph
            .node_indices()
            .map(|n| self.graph.neighbors_directed(n, Direction::Incoming).count())
            .collect();
        let mut done = vec![false; indegree.len()];
        let mut out = Vec::new();
        while let Some(next) = self
            .graph
            .node_indices()
            .find(|n| !done[n.index()] && indegree[n.index()] == 0)
        {
            done[next.index()] = true;
            for m in self.graph.neighbors_directed(next, Direction::Outgoing) {
                indegree[m.index()] -= 1;
            }
            if let Node::Query(name) = &self.graph[next] {
                out.push(name.clone());
            }
        }
        out
    }

    // Depth-first search from `start` back to itself, reported from the
    // earliest declared query on the cycle.
    fn cycle_through(&self, start: NodeIndex) -> Vec<String> {
        fn dfs(
            g: &DiGraph<Node, ()>,
            at: NodeIndex,
            target: NodeIndex,
            seen: &mut Vec<bool>,
            path: &mut Vec<NodeIndex>,
        ) -> bool {
            for next in g.neighbors_directed(at, Direction::Outgoing) {
                if next == target {
                    return true;
                }
                if !seen[next.index()] {
                    seen[next.index()] = true;
                    path.push(next);
                    if dfs(g, next, target, seen, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }
        let mut seen = vec![false; self.graph.node_count()];
        let mut path = vec![start];
        seen[start.index()] = true;
        dfs(&self.graph, start, start, &mut seen, &mut path);
        let first = (0..path.len())
            .min_by_key(|&i| path[i].index())
            .expect("path holds start");
        path.rotate_left(first);
        path.push(path[0]);
        path.into_iter().map(|n| self.graph[n].label().to_owned()).collect()
    }

    /// Names of queries or input stream IRIs that `query` reads directly.
    pub fn dependencies(&self, query: &str) -> Vec<String> {
        let Some(&idx) = self.queries.get(query) else {
            return Vec::new();
        };
        let mut deps: Vec<String> = self
            .graph
            .neighbors_directed(idx, Direction::Incoming)
            .map(|n| self.graph[n].label().to_owned())
            .collect();
        deps.sort();
        deps
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.inputs.keys().map(String::as_str)
    }

    /// Plain-text listing: inputs, then each query with what it reads.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for input in self.inputs.keys() {
            let _ = writeln!(s, "input <{input}>");
        }
        let order = self
            .topological_order()
            .unwrap_or_else(|_| self.queries.keys().cloned().collect());
        for name in order {
            let deps = self.dependencies(&name);
            if deps.is_empty() {
                let _ = writeln!(s, "query {name}");
            } else {
                let _ = writeln!(s, "query {name} <- {}", deps.join(", "));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csparql::parse_queries;

    const BASE: &str = "http://ex/stream/";

    fn q(name: &str, reads: &[&str]) -> String {
        let froms: String = reads
            .iter()
            .map(|r| format!(" FROM STREAM <{BASE}{r}> [RANGE 1m STEP 1m]"))
            .collect();
        format!("REGISTER STREAM {name} COMPUTED EVERY 1m AS SELECT ?x{froms} WHERE {{ ?x <http://ex/p> ?y }}\n")
    }

    #[test]
    fn diamond_order() {
        let src = [
            q("D", &["B", "C"]),
            q("B", &["raw"]),
            q("C", &["raw"]),
            q("Other", &["raw"]),
        ]
        .concat();
        let g = DependencyGraph::build(&parse_queries(&src).unwrap(), BASE);
        let order = g.topological_order().unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        assert!(pos("B") < pos("D") && pos("C") < pos("D"));
        assert_eq!(order.len(), 4);
        assert_eq!(g.dependencies("D"), vec!["B", "C"]);
        assert_eq!(g.inputs().collect::<Vec<_>>(), vec![format!("{BASE}raw")]);
    }

    #[test]
    fn cycle_is_reported_with_path() {
        let src = [q("A", &["B"]), q("B", &["A"])].concat();
        let g = DependencyGraph::build(&parse_queries(&src).unwrap(), BASE);
        let err = g.topological_order().unwrap_err();
        assert_eq!(err.path.len(), 3);
        assert_eq!(err.path.first(), err.path.last());
        assert!(err.to_string().contains("->"));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let g = DependencyGraph::build(&parse_queries(&q("A", &["A"])).unwrap(), BASE);
        assert_eq!(g.topological_order().unwrap_err().path, vec!["A", "A"]);
    }

    #[test]
    fn render_lists_edges() {
        let src = [q("B", &["raw"]), q("D", &["B"])].concat();
        let text = DependencyGraph::build(&parse_queries(&src).unwrap(), BASE).render();
        assert!(text.contains("query D <- B"));
        assert!(text.starts_with("input <http://ex/stream/raw>"));
    }
}
