//! Reader and writer for the Turtle subset used by asset models and fixtures:
//! `@prefix`/`PREFIX` directives, IRIs, prefixed names, plain/typed/numeric
//! literals, blank node labels, the `a` keyword, and `;`/`,` lists.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::lexer::{tokenize, Pos, Tok, Token};
use super::term::{check_iri, escape_string};
use super::vocab::{default_prefix, xsd, DEFAULT_PREFIXES, RDF_TYPE};
use super::{RdfError, StaticGraph, Term, Triple};

pub fn parse_turtle(text: &str) -> Result<StaticGraph, RdfError> {
    let tokens = tokenize(text).map_err(|e| RdfError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;
    let mut p = TurtleParser {
        tokens,
        i: 0,
        prefixes: BTreeMap::new(),
        graph: StaticGraph::new(),
    };
    p.document()?;
    Ok(p.graph)
}

struct TurtleParser {
    tokens: Vec<Token>,
    i: usize,
    prefixes: BTreeMap<String, String>,
    graph: StaticGraph,
}

impl TurtleParser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.i].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.i].clone();
        if self.i + 1 < self.tokens.len() {
            self.i += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, RdfError> {
        Err(RdfError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), RdfError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.syntax(format!("expected '{tok}', found '{}'", self.peek()))
        }
    }

    fn document(&mut self) -> Result<(), RdfError> {
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::At(kw) if kw == "prefix" => {
                    self.advance();
                    self.prefix_decl()?;
                    self.expect(Tok::Dot)?;
                }
                Tok::Word(kw) if kw.eq_ignore_ascii_case("prefix") => {
                    self.advance();
                    self.prefix_decl()?;
                }
                Tok::At(kw) => return self.syntax(format!("unsupported directive @{kw}")),
                _ => self.statement()?,
            }
        }
    }

    fn prefix_decl(&mut self) -> Result<(), RdfError> {
        let Tok::PName { prefix, local } = self.peek().clone() else {
            return self.syntax(format!("expected a prefix name, found '{}'", self.peek()));
        };
        if !local.is_empty() {
            return self.syntax(format!("expected a prefix name, found '{prefix}:{local}'"));
        }
        self.advance();
        let pos = self.pos();
        let Tok::IriRef(iri) = self.advance().tok else {
            return Err(RdfError::Syntax {
                pos,
                message: "expected an IRI after the prefix name".into(),
            });
        };
        check_iri(&iri)?;
        self.prefixes.insert(prefix, iri);
        Ok(())
    }

    fn statement(&mut self) -> Result<(), RdfError> {
        let subject = self.subject()?;
        loop {
            let predicate = self.predicate()?;
            loop {
                let object = self.object()?;
                let triple = Triple::new(subject.clone(), predicate.clone(), object)?;
                self.graph.insert(triple);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            if *self.peek() == Tok::Semicolon {
                self.advance();
                // a trailing ';' before '.' is allowed
                if *self.peek() == Tok::Dot {
                    break;
                }
            } else {
                break;
            }
        }
        self.expect(Tok::Dot)
    }

    fn iri_from(&self, tok: &Token) -> Result<Option<Term>, RdfError> {
        match &tok.tok {
            Tok::IriRef(iri) => {
                check_iri(iri)?;
                Ok(Some(Term::Iri(iri.clone())))
            }
            Tok::PName { prefix, local } => {
                let ns = self
                    .prefixes
                    .get(prefix)
                    .map(String::as_str)
                    .or_else(|| default_prefix(prefix))
                    .ok_or_else(|| RdfError::UnknownPrefix {
                        pos: tok.pos,
                        prefix: prefix.clone(),
                    })?;
                let iri = format!("{ns}{local}");
                check_iri(&iri)?;
                Ok(Some(Term::Iri(iri)))
            }
            _ => Ok(None),
        }
    }

    fn subject(&mut self) -> Result<Term, RdfError> {
        let tok = self.tokens[self.i].clone();
        if let Some(iri) = self.iri_from(&tok)? {
            self.advance();
            return Ok(iri);
        }
        if let Tok::Blank(label) = tok.tok {
            self.advance();
            return Ok(Term::BlankNode(label));
        }
        self.syntax(format!("expected a subject, found '{}'", tok.tok))
    }

    fn predicate(&mut self) -> Result<Term, RdfError> {
        let tok = self.tokens[self.i].clone();
        if tok.tok == Tok::Word("a".into()) {
            self.advance();
            return Ok(Term::iri(RDF_TYPE));
        }
        if let Some(iri) = self.iri_from(&tok)? {
            self.advance();
            return Ok(iri);
        }
        self.syntax(format!("expected a predicate, found '{}'", tok.tok))
    }

    fn object(&mut self) -> Result<Term, RdfError> {
        let tok = self.tokens[self.i].clone();
        if let Some(iri) = self.iri_from(&tok)? {
            self.advance();
            return Ok(iri);
        }
        match tok.tok {
            Tok::Blank(label) => {
                self.advance();
                Ok(Term::BlankNode(label))
            }
            Tok::Str(lexical) => {
                self.advance();
                match self.peek().clone() {
                    Tok::DoubleCaret => {
                        self.advance();
                        let dt_tok = self.advance();
                        match self.iri_from(&dt_tok)? {
                            Some(Term::Iri(dt)) => {
                                let lit = Term::literal(lexical, dt);
                                lit.validate().map_err(|e| RdfError::Syntax {
                                    pos: tok.pos,
                                    message: e.to_string(),
                                })?;
                                Ok(lit)
                            }
                            _ => Err(RdfError::Syntax {
                                pos: dt_tok.pos,
                                message: "expected a datatype IRI after '^^'".into(),
                            }),
                        }
                    }
                    Tok::At(_) => self.syntax("language-tagged literals are not supported"),
                    _ => Ok(Term::string(lexical)),
                }
            }
            Tok::Minus | Tok::Plus => {
                let negative = tok.tok == Tok::Minus;
                self.advance();
                match self.number()? {
                    Term::Literal { lexical, datatype } if negative => {
                        Ok(Term::literal(format!("-{lexical}"), datatype))
                    }
                    lit => Ok(lit),
                }
            }
            Tok::Integer(_) | Tok::Decimal(_) | Tok::Double(_) => self.number(),
            Tok::Word(w) if w == "true" || w == "false" => {
                self.advance();
                Ok(Term::literal(w, xsd::BOOLEAN))
            }
            other => self.syntax(format!("expected an object, found '{other}'")),
        }
    }

    fn number(&mut self) -> Result<Term, RdfError> {
        match self.peek().clone() {
            Tok::Integer(s) => {
                self.advance();
                Ok(Term::literal(s, xsd::INTEGER))
            }
            Tok::Decimal(s) => {
                self.advance();
                Ok(Term::literal(s, xsd::DECIMAL))
            }
            Tok::Double(s) => {
                self.advance();
                Ok(Term::literal(s, xsd::DOUBLE))
            }
            other => self.syntax(format!("expected a number, found '{other}'")),
        }
    }
}

fn is_safe_local(local: &str) -> bool {
    let mut chars = local.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn abbreviate(iri: &str, prefixes: &[(&str, &str)]) -> String {
    for (prefix, ns) in prefixes {
        if let Some(local) = iri.strip_prefix(ns) {
            if is_safe_local(local) {
                return format!("{prefix}:{local}");
            }
        }
    }
    format!("<{iri}>")
}

fn write_term(out: &mut String, term: &Term, prefixes: &[(&str, &str)]) {
    match term {
        Term::Iri(iri) => out.push_str(&abbreviate(iri, prefixes)),
        Term::BlankNode(label) => {
            let _ = write!(out, "_:{label}");
        }
        Term::Literal { lexical, datatype } => {
            let _ = write!(out, "\"{}\"", escape_string(lexical));
            if datatype != xsd::STRING {
                let _ = write!(out, "^^{}", abbreviate(datatype, prefixes));
            }
        }
        Term::Variable(name) => {
            let _ = write!(out, "?{name}");
        }
    }
}

/// Writes the graph as Turtle with the default prefixes, one statement per
/// subject, subjects and triples in sorted order.
pub fn serialize_turtle(graph: &StaticGraph) -> String {
    let prefixes: &[(&str, &str)] = &DEFAULT_PREFIXES;
    let mut out = String::new();
    for (prefix, ns) in prefixes {
        let _ = writeln!(out, "@prefix {prefix}: <{ns}> .");
    }
    let mut by_subject: BTreeMap<&Term, Vec<&Triple>> = BTreeMap::new();
    for t in graph.sorted() {
        by_subject.entry(&t.subject).or_default().push(t);
    }
    for (subject, triples) in by_subject {
        out.push('\n');
        write_term(&mut out, subject, prefixes);
        for (i, t) in triples.iter().enumerate() {
            out.push_str(if i == 0 { " " } else { " ;\n    " });
            match &t.predicate {
                Term::Iri(iri) if iri == RDF_TYPE => out.push('a'),
                pred => write_term(&mut out, pred, prefixes),
            }
            out.push(' ');
            write_term(&mut out, &t.object, prefixes);
        }
        out.push_str(" .\n");
    }
    out
}
