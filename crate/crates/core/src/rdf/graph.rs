//! In-memory triple set with per-position indexes.

use std::collections::{HashMap, HashSet};

use super::{Bindings, Term, Triple, TriplePattern};

/// A set of triples indexed by subject, predicate and object.
///
/// Read-only after construction from the engine's point of view; `insert`
/// needs `&mut self`, so shared readers are safe by construction.
#[derive(Debug, Clone, Default)]
pub struct StaticGraph {
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    by_subject: HashMap<Term, Vec<u32>>,
    by_predicate: HashMap<Term, Vec<u32>>,
    by_object: HashMap<Term, Vec<u32>>,
}

impl StaticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple; returns false if it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if self.members.contains(&triple) {
            return false;
        }
        let idx = self.triples.len() as u32;
        self.by_subject.entry(triple.subject.clone()).or_default().push(idx);
        self.by_predicate.entry(triple.predicate.clone()).or_default().push(idx);
        self.by_object.entry(triple.object.clone()).or_default().push(idx);
        self.members.insert(triple.clone());
        self.triples.push(triple);
        true
    }

    pub fn extend(&mut self, triples: impl IntoIterator<Item = Triple>) {
        for t in triples {
            self.insert(t);
        }
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.members.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Triples in sorted order.
    pub fn sorted(&self) -> Vec<&Triple> {
        let mut v: Vec<_> = self.triples.iter().collect();
        v.sort();
        v
    }

    /// Candidate triples for a pattern whose positions may be partially
    /// ground, using the smallest available index.
    fn candidates<'a>(&'a self, s: &Term, p: &Term, o: &Term) -> Box<dyn Iterator<Item = &'a Triple> + 'a> {
        let mut best: Option<&Vec<u32>> = None;
        for (term, index) in [(s, &self.by_subject), (p, &self.by_predicate), (o, &self.by_object)] {
            if term.is_variable() {
                continue;
            }
            match index.get(term) {
                None => return Box::new(std::iter::empty()),
                Some(list) => {
                    if best.is_none_or(|b| list.len() < b.len()) {
                        best = Some(list);
                    }
                }
            }
        }
        match best {
            Some(list) => Box::new(list.iter().map(move |&i| &self.triples[i as usize])),
            None => Box::new(self.triples.iter()),
        }
    }

    /// Appends to `out` every extension of `seed` matching `pattern`, in
    /// index order. Callers needing determinism sort afterwards.
    pub(crate) fn extend_matches(&self, pattern: &TriplePattern, seed: &Bindings, out: &mut Vec<Bindings>) {
        let s = seed.substitute(&pattern.subject);
        let p = seed.substitute(&pattern.predicate);
        let o = seed.substitute(&pattern.object);
        if !s.is_variable() && !p.is_variable() && !o.is_variable() {
            let Ok(triple) = Triple::new(s, p, o) else { return };
            if self.contains(&triple) {
                out.push(seed.clone());
            }
            return;
        }
        for triple in self.candidates(&s, &p, &o) {
            let mut row = seed.clone();
            if unify(&s, &triple.subject, &mut row)
                && unify(&p, &triple.predicate, &mut row)
                && unify(&o, &triple.object, &mut row)
            {
                out.push(row);
            }
        }
    }
}

fn unify(pattern: &Term, value: &Term, row: &mut Bindings) -> bool {
    match pattern {
        Term::Variable(v) => row.bind(v.clone(), value.clone()),
        ground => ground == value,
    }
}

impl FromIterator<Triple> for StaticGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = StaticGraph::new();
        g.extend(iter);
        g
    }
}

impl PartialEq for StaticGraph {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for StaticGraph {}

/// Every extension of `seed` such that the substituted pattern is a triple
/// of `graph`, sorted.
pub fn match_pattern(graph: &StaticGraph, pattern: &TriplePattern, seed: &Bindings) -> Vec<Bindings> {
    let mut out = Vec::new();
    graph.extend_matches(pattern, seed, &mut out);
    out.sort();
    out
}

/// Evaluates a basic graph pattern by chaining `match_pattern` over the
/// patterns in order, starting from `seeds`. Results are sorted.
pub fn match_bgp(graph: &StaticGraph, patterns: &[TriplePattern], seeds: Vec<Bindings>) -> Vec<Bindings> {
    let mut rows = seeds;
    for pattern in patterns {
        let mut next = Vec::new();
        for row in &rows {
            graph.extend_matches(pattern, row, &mut next);
        }
        rows = next;
        if rows.is_empty() {
            break;
        }
    }
    rows.sort();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::vocab::SOSA_NS;
    use proptest::prelude::*;

    fn iri(s: &str) -> Term {
        Term::iri(format!("http://ex/{s}"))
    }

    fn observes() -> Term {
        Term::iri(format!("{SOSA_NS}observes"))
    }

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(iri(s), iri(p), iri(o)).unwrap()
    }

    #[test]
    fn duplicate_insert_is_a_no_op() {
        let mut g = StaticGraph::new();
        assert!(g.insert(t("a", "p", "b")));
        assert!(!g.insert(t("a", "p", "b")));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn single_pattern_match() {
        let g: StaticGraph = [Triple::new(iri("S1"), observes(), iri("F1")).unwrap()]
            .into_iter()
            .collect();
        let pattern = TriplePattern::new(Term::var("s"), observes(), Term::var("f"));
        let rows = match_pattern(&g, &pattern, &Bindings::new());
        let expected: Bindings = [("s".to_string(), iri("S1")), ("f".to_string(), iri("F1"))]
            .into_iter()
            .collect();
        assert_eq!(rows, vec![expected]);
    }

    #[test]
    fn ground_pattern_is_membership() {
        let g: StaticGraph = [t("a", "p", "b")].into_iter().collect();
        let present = TriplePattern::new(iri("a"), iri("p"), iri("b"));
        let absent = TriplePattern::new(iri("a"), iri("p"), iri("c"));
        let mut seed = Bindings::new();
        seed.bind("z", iri("zz"));
        assert_eq!(match_pattern(&g, &present, &seed), vec![seed.clone()]);
        assert!(match_pattern(&g, &absent, &seed).is_empty());
    }

    #[test]
    fn repeated_variable_must_agree() {
        let g: StaticGraph = [t("a", "p", "a"), t("a", "p", "b")].into_iter().collect();
        let pattern = TriplePattern::new(Term::var("x"), iri("p"), Term::var("x"));
        let rows = match_pattern(&g, &pattern, &Bindings::new());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].get("x"), Some(&iri("a")));
    }

    fn arb_graph() -> impl Strategy<Value = Vec<Triple>> {
        let name = prop::sample::select(vec!["a", "b", "c", "d"]);
        let pred = prop::sample::select(vec!["p", "q"]);
        prop::collection::vec((name.clone(), pred, name), 0..40)
            .prop_map(|v| v.into_iter().map(|(s, p, o)| t(s, p, o)).collect())
    }

    fn arb_pattern_term(names: &'static [&'static str]) -> impl Strategy<Value = Term> {
        prop_oneof![
            prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::var),
            prop::sample::select(names.to_vec()).prop_map(iri),
        ]
    }

    /// Brute-force oracle: try every combination of triples.
    fn brute_force(triples: &[Triple], patterns: &[TriplePattern]) -> Vec<Bindings> {
        let distinct: Vec<Triple> = {
            let mut v = triples.to_vec();
            v.sort();
            v.dedup();
            v
        };
        let mut rows = vec![Bindings::new()];
        for pattern in patterns {
            let mut next = Vec::new();
            for row in &rows {
                for triple in &distinct {
                    let mut r = row.clone();
                    let ok = [
                        (&pattern.subject, &triple.subject),
                        (&pattern.predicate, &triple.predicate),
                        (&pattern.object, &triple.object),
                    ]
                    .iter()
                    .all(|(p, v)| match p {
                        Term::Variable(name) => r.bind(name.clone(), (*v).clone()),
                        g => g == v,
                    });
                    if ok {
                        next.push(r);
                    }
                }
            }
            rows = next;
        }
        rows.sort();
        rows
    }

    proptest! {
        #[test]
        fn all_variable_pattern_returns_every_triple(triples in arb_graph()) {
            let g: StaticGraph = triples.iter().cloned().collect();
            let pattern = TriplePattern::new(Term::var("s"), Term::var("p"), Term::var("o"));
            prop_assert_eq!(match_pattern(&g, &pattern, &Bindings::new()).len(), g.len());
        }

        #[test]
        fn insertion_order_does_not_matter(triples in arb_graph(), seed in any::<u64>()) {
            let g1: StaticGraph = triples.iter().cloned().collect();
            let mut shuffled = triples.clone();
            // deterministic rotation + reversal as a cheap permutation
            if !shuffled.is_empty() {
                let k = (seed as usize) % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
            }
            let g2: StaticGraph = shuffled.into_iter().collect();
            let pattern = TriplePattern::new(Term::var("x"), iri("p"), Term::var("y"));
            prop_assert_eq!(match_pattern(&g1, &pattern, &Bindings::new()), match_pattern(&g2, &pattern, &Bindings::new()));
        }

        #[test]
        fn bgp_join_equals_brute_force(
            triples in arb_graph(),
            patterns in prop::collection::vec(
                (arb_pattern_term(&["a", "b", "c", "d"]), prop::sample::select(vec!["p", "q"]).prop_map(iri), arb_pattern_term(&["a", "b", "c", "d"]))
                    .prop_map(|(s, p, o)| TriplePattern::new(s, p, o)),
                1..4)
        ) {
            let g: StaticGraph = triples.iter().cloned().collect();
            prop_assert_eq!(match_bgp(&g, &patterns, vec![Bindings::new()]), brute_force(&triples, &patterns));
        }
    }
}
