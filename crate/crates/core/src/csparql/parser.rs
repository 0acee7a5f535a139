//! Recursive-descent parser for the continuous query dialect. The grammar
//! is documented in `docs/grammar.ebnf`.

use crate::rdf::lexer::{tokenize, Pos, Tok, Token};
use crate::rdf::parse_decimal;
use crate::rdf::vocab::xsd;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("lexical error at {pos}: {message}")]
    Lexical { pos: Pos, message: String },
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("duplicate PREFIX '{prefix}:' at {pos}")]
    DuplicatePrefix { pos: Pos, prefix: String },
    #[error("malformed duration '{text}' at {pos}")]
    MalformedDuration { pos: Pos, text: String },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Lexical { pos, .. }
            | ParseError::Syntax { pos, .. }
            | ParseError::DuplicatePrefix { pos, .. }
            | ParseError::MalformedDuration { pos, .. } => *pos,
        }
    }
}

/// Parses exactly one `REGISTER` block.
pub fn parse_query(text: &str) -> Result<RegisteredQuery, ParseError> {
    let mut p = Parser::new(text)?;
    let q = p.register()?;
    if *p.peek() != Tok::Eof {
        return p.syntax(format!("unexpected '{}' after the end of the query", p.peek()));
    }
    Ok(q)
}

/// Parses a file holding any number of `REGISTER` blocks.
pub fn parse_queries(text: &str) -> Result<Vec<RegisteredQuery>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.register()?);
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
}

fn is_kw(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let tokens = tokenize(text).map_err(|e| ParseError::Lexical {
            pos: e.pos,
            message: e.message,
        })?;
        Ok(Parser { tokens, i: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.i].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.i].tok.clone();
        if self.i + 1 < self.tokens.len() {
            self.i += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn at_kw(&self, kw: &str) -> bool {
        is_kw(self.peek(), kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.syntax(format!("expected {kw}, found '{}'", self.peek()))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.syntax(format!("expected '{tok}', found '{}'", self.peek()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn var(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                Ok(v)
            }
            other => self.syntax(format!("expected a variable, found '{other}'")),
        }
    }

    fn register(&mut self) -> Result<RegisteredQuery, ParseError> {
        self.expect_kw("REGISTER")?;
        let kind = if self.at_kw("STREAM") {
            QueryKind::Stream
        } else if self.at_kw("QUERY") {
            QueryKind::Query
        } else {
            return self.syntax(format!("expected STREAM or QUERY, found '{}'", self.peek()));
        };
        self.advance();
        let name = match self.peek().clone() {
            Tok::Word(w) => {
                self.advance();
                w
            }
            other => return self.syntax(format!("expected a query name, found '{other}'")),
        };
        self.expect_kw("COMPUTED")?;
        self.expect_kw("EVERY")?;
        let compute_every = self.duration()?;
        self.expect_kw("AS")?;

        let mut prefixes: Vec<(String, String)> = Vec::new();
        while self.at_kw("PREFIX") {
            self.advance();
            let pos = self.pos();
            let prefix = match self.advance() {
                Tok::PName { prefix, local } if local.is_empty() => prefix,
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("expected a prefix name, found '{other}'"),
                    })
                }
            };
            if prefixes.iter().any(|(p, _)| *p == prefix) {
                return Err(ParseError::DuplicatePrefix { pos, prefix });
            }
            let ns = match self.advance() {
                Tok::IriRef(iri) => iri,
                other => return self.syntax(format!("expected a namespace IRI, found '{other}'")),
            };
            prefixes.push((prefix, ns));
        }

        self.expect_kw("SELECT")?;
        let mut select = Vec::new();
        while !self.at_kw("FROM") {
            if *self.peek() == Tok::Eof || self.at_kw("WHERE") {
                break;
            }
            select.push(self.select_item()?);
        }
        if select.is_empty() {
            return self.syntax("SELECT needs at least one item");
        }

        let mut sources = Vec::new();
        let mut static_graphs = Vec::new();
        while self.at_kw("FROM") {
            self.advance();
            if self.at_kw("STREAM") {
                self.advance();
                let stream = self.iri()?;
                self.expect(Tok::LBracket)?;
                self.expect_kw("RANGE")?;
                let range = self.duration()?;
                self.expect_kw("STEP")?;
                let step = self.duration()?;
                self.expect(Tok::RBracket)?;
                sources.push(StreamSource { stream, range, step });
            } else {
                static_graphs.push(self.iri()?);
            }
        }
        if sources.is_empty() {
            return self.syntax("expected at least one FROM STREAM clause");
        }

        let mut q = RegisteredQuery {
            kind,
            name,
            compute_every,
            prefixes,
            select,
            sources,
            static_graphs,
            where_clause: Vec::new(),
            filters: Vec::new(),
            aggregates: Vec::new(),
        };

        if self.at_kw("WHERE") {
            self.advance();
            self.where_group(&mut q)?;
        }
        loop {
            if self.at_kw("AGGREGATE") {
                self.advance();
                q.aggregates.push(self.aggregate()?);
            } else if self.at_kw("FILTER") {
                self.advance();
                q.filters.push(self.bracketted_expr()?);
            } else {
                break;
            }
        }
        if *self.peek() != Tok::Eof && !self.at_kw("REGISTER") {
            return self.syntax(format!("unexpected '{}'", self.peek()));
        }
        Ok(q)
    }

    fn duration(&mut self) -> Result<Duration, ParseError> {
        let pos = self.pos();
        match self.advance() {
            Tok::Duration { value, unit } => Duration::from_unit(value, &unit).ok_or(ParseError::MalformedDuration {
                pos,
                text: format!("{value}{unit}"),
            }),
            other => Err(ParseError::MalformedDuration {
                pos,
                text: other.to_string(),
            }),
        }
    }

    fn iri(&mut self) -> Result<IriRef, ParseError> {
        match self.peek().clone() {
            Tok::IriRef(i) => {
                self.advance();
                Ok(IriRef::Full(i))
            }
            Tok::PName { prefix, local } => {
                self.advance();
                Ok(IriRef::Prefixed { prefix, local })
            }
            other => self.syntax(format!("expected an IRI, found '{other}'")),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        // SPARQL form `(expr AS ?v)`; otherwise the dialect's `expr AS ?v`
        if *self.peek() == Tok::LParen {
            let save = self.i;
            self.advance();
            if let Ok(expr) = self.expr() {
                if self.at_kw("AS") {
                    self.advance();
                    let alias = self.var()?;
                    self.expect(Tok::RParen)?;
                    return Ok(SelectItem::aliased(expr, alias));
                }
            }
            self.i = save;
        }
        let start = self.pos();
        let expr = self.expr()?;
        if self.at_kw("AS") {
            self.advance();
            let alias = self.var()?;
            return Ok(SelectItem::aliased(expr, alias));
        }
        match expr {
            Expr::Var(v) => Ok(SelectItem::var(v)),
            _ => Err(ParseError::Syntax {
                pos: start,
                message: "a computed SELECT expression needs 'AS ?name'".into(),
            }),
        }
    }

    fn where_group(&mut self, q: &mut RegisteredQuery) -> Result<(), ParseError> {
        self.expect(Tok::LBrace)?;
        loop {
            if self.eat(&Tok::RBrace) {
                return Ok(());
            }
            if self.at_kw("FILTER") {
                self.advance();
                q.filters.push(self.bracketted_expr()?);
                self.eat(&Tok::Dot);
                continue;
            }
            let subject = self.pattern_term()?;
            loop {
                let predicate = if *self.peek() == Tok::Word("a".into()) {
                    self.advance();
                    PatternTerm::Iri(IriRef::Prefixed {
                        prefix: "rdf".into(),
                        local: "type".into(),
                    })
                } else {
                    self.pattern_term()?
                };
                loop {
                    let object = self.pattern_term()?;
                    q.where_clause.push(PatternTriple {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                    });
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                if !self.eat(&Tok::Semicolon) || matches!(self.peek(), Tok::Dot | Tok::RBrace) {
                    break;
                }
            }
            if !self.eat(&Tok::Dot) && *self.peek() != Tok::RBrace {
                return self.syntax(format!("expected '.' or '}}', found '{}'", self.peek()));
            }
        }
    }

    fn pattern_term(&mut self) -> Result<PatternTerm, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                Ok(PatternTerm::Var(v))
            }
            Tok::IriRef(_) | Tok::PName { .. } => Ok(PatternTerm::Iri(self.iri()?)),
            Tok::Str(lexical) => {
                self.advance();
                let datatype = if self.eat(&Tok::DoubleCaret) {
                    self.iri()?
                } else {
                    IriRef::full(xsd::STRING)
                };
                Ok(PatternTerm::Literal { lexical, datatype })
            }
            Tok::Integer(s) => {
                self.advance();
                Ok(PatternTerm::Literal {
                    lexical: s,
                    datatype: IriRef::full(xsd::INTEGER),
                })
            }
            Tok::Decimal(s) => {
                self.advance();
                Ok(PatternTerm::Literal {
                    lexical: s,
                    datatype: IriRef::full(xsd::DECIMAL),
                })
            }
            Tok::Double(s) => {
                self.advance();
                Ok(PatternTerm::Literal {
                    lexical: s,
                    datatype: IriRef::full(xsd::DOUBLE),
                })
            }
            Tok::Blank(_) => Err(ParseError::Syntax {
                pos,
                message: "blank nodes are not supported in query patterns".into(),
            }),
            other => self.syntax(format!("expected a pattern term, found '{other}'")),
        }
    }

    fn aggregate(&mut self) -> Result<AggregateClause, ParseError> {
        self.expect(Tok::LBrace)?;
        self.expect(Tok::LParen)?;
        let out_var = self.var()?;
        self.expect(Tok::Comma)?;
        let function = match self.peek().clone() {
            Tok::Word(w) => match AggregateFunction::from_keyword(&w) {
                Some(f) => {
                    self.advance();
                    f
                }
                None => return self.syntax(format!("unknown aggregate function {w}")),
            },
            other => return self.syntax(format!("expected an aggregate function, found '{other}'")),
        };
        self.expect(Tok::Comma)?;
        self.expect(Tok::LBrace)?;
        let mut over_vars = Vec::new();
        while let Tok::Var(v) = self.peek().clone() {
            self.advance();
            over_vars.push(v);
            self.eat(&Tok::Comma);
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::RParen)?;
        let filter = if self.at_kw("FILTER") {
            self.advance();
            Some(self.bracketted_expr()?)
        } else {
            None
        };
        self.expect(Tok::RBrace)?;
        Ok(AggregateClause {
            out_var,
            function,
            over_vars,
            filter,
        })
    }

    fn bracketted_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        let e = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            left = Expr::binary(BinOp::Or, left, self.and_expr()?);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.relational()?;
        while self.eat(&Tok::AndAnd) {
            left = Expr::binary(BinOp::And, left, self.relational()?);
        }
        Ok(left)
    }

    fn relational(&mut self) -> Result<Expr, ParseError> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(left),
        };
        self.advance();
        Ok(Expr::binary(op, left, self.additive()?))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            left = Expr::binary(op, left, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            left = Expr::binary(op, left, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Num(n) => Expr::Num(-n),
                other => Expr::binary(BinOp::Sub, Expr::num(0), other),
            });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Var(v) => {
                self.advance();
                Ok(Expr::Var(v))
            }
            Tok::Integer(s) | Tok::Decimal(s) => {
                self.advance();
                let n = parse_decimal(&s).ok_or_else(|| ParseError::Syntax {
                    pos,
                    message: format!("bad number {s}"),
                })?;
                Ok(Expr::Num(n))
            }
            Tok::Double(s) => {
                self.advance();
                let n = s
                    .parse::<f64>()
                    .ok()
                    .and_then(crate::rdf::number_from_f64)
                    .ok_or_else(|| ParseError::Syntax {
                        pos,
                        message: format!("bad number {s}"),
                    })?;
                Ok(Expr::Num(n))
            }
            Tok::IriRef(_) | Tok::PName { .. } => Ok(Expr::Iri(self.iri()?)),
            Tok::Duration { value, unit } => self.syntax(format!(
                "unexpected '{value}{unit}' in expression (missing space or operator?)"
            )),
            other => self.syntax(format!("expected an expression, found '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Number;

    fn n(v: i64) -> Expr {
        Expr::num(v)
    }

    fn v(name: &str) -> Expr {
        Expr::var(name)
    }

    fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::binary(op, l, r)
    }

    fn parse_expr(text: &str) -> Expr {
        let q = parse_query(&format!(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ({text} AS ?out) FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]"
        ))
        .unwrap();
        q.select[0].expr.clone()
    }

    #[test]
    fn minimal_query() {
        let q =
            parse_query("REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]")
                .unwrap();
        assert_eq!(q.kind, QueryKind::Query);
        assert_eq!(q.name, "Q");
        assert_eq!(q.compute_every.as_millis(), 60_000);
        assert_eq!(q.select, vec![SelectItem::var("x")]);
        assert_eq!(
            q.sources,
            vec![StreamSource {
                stream: IriRef::full("http://ex/s"),
                range: Duration::minutes(1),
                step: Duration::minutes(1),
            }]
        );
        assert!(q.where_clause.is_empty() && q.aggregates.is_empty() && q.filters.is_empty());
    }

    #[test]
    fn precedence() {
        assert_eq!(
            parse_expr("1 + 2 * 3"),
            bin(BinOp::Add, n(1), bin(BinOp::Mul, n(2), n(3)))
        );
        assert_eq!(
            parse_expr("(1 + 2) * 3"),
            bin(BinOp::Mul, bin(BinOp::Add, n(1), n(2)), n(3))
        );
        assert_eq!(
            parse_expr("8 - 4 - 2"),
            bin(BinOp::Sub, bin(BinOp::Sub, n(8), n(4)), n(2))
        );
        assert_eq!(
            parse_expr("?a < 1 + 1 && ?b = 2 || ?c"),
            bin(
                BinOp::Or,
                bin(
                    BinOp::And,
                    bin(BinOp::Lt, v("a"), bin(BinOp::Add, n(1), n(1))),
                    bin(BinOp::Eq, v("b"), n(2))
                ),
                v("c")
            )
        );
        assert_eq!(
            parse_expr("?a || ?b && ?c"),
            bin(BinOp::Or, v("a"), bin(BinOp::And, v("b"), v("c")))
        );
    }

    #[test]
    fn unary_minus_folds_into_constants() {
        assert_eq!(parse_expr("-5"), n(-5));
        assert_eq!(parse_expr("-?x"), bin(BinOp::Sub, n(0), v("x")));
        assert_eq!(parse_expr("0.25"), Expr::Num(Number::new(1.into(), 4.into())));
    }

    #[test]
    fn durations_canonicalize() {
        let at = |d: &str| {
            parse_query(&format!(
                "REGISTER QUERY Q COMPUTED EVERY {d} AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]"
            ))
            .unwrap()
            .compute_every
        };
        assert_eq!(at("24h"), at("1440m"));
        assert_eq!(at("24h"), at("86400s"));
        assert_eq!(at("1d"), at("86400000ms"));
        assert_eq!(at("24h").as_millis(), 86_400_000);
    }

    #[test]
    fn malformed_durations() {
        for d in ["0m", "5y", "5", "m"] {
            let err = parse_query(&format!(
                "REGISTER QUERY Q COMPUTED EVERY {d} AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]"
            ))
            .unwrap_err();
            assert!(matches!(err, ParseError::MalformedDuration { .. }), "{d}: {err:?}");
        }
    }

    #[test]
    fn duplicate_prefix() {
        let err = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS PREFIX a: <http://a/> PREFIX a: <http://b/> SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]",
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::DuplicatePrefix { ref prefix, .. } if prefix == "a"));
    }

    #[test]
    fn compound_select_needs_alias() {
        let err = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?a + 1 FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]",
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_query("REGISTER QUERY Q COMPUTED EVERY 1m AS\nSELECT ?x FROM STREAM <http://ex/s> [RANGE 1m]")
            .unwrap_err();
        assert_eq!(err.pos(), Pos { line: 2, col: 46 });
        assert!(matches!(
            parse_query("REGISTER QUERY Q ~"),
            Err(ParseError::Lexical { .. })
        ));
    }

    #[test]
    fn aggregate_with_filter_and_top_level_filter() {
        let q = parse_query(
            "REGISTER STREAM C COMPUTED EVERY 1h AS SELECT ?c FROM STREAM <http://ex/s> [RANGE 1h STEP 1m]
             WHERE { ?s <http://ex/p> ?o ; <http://ex/q> ?o2 , ?o3 . FILTER (?o > 1) }
             AGGREGATE {(?c, COUNT, {?o}) FILTER (?o < 5)}
             FILTER (?o2 != 0)",
        )
        .unwrap();
        assert_eq!(q.where_clause.len(), 3);
        assert_eq!(q.filters.len(), 2);
        assert_eq!(q.aggregates[0].function, AggregateFunction::Count);
        assert_eq!(q.aggregates[0].over_vars, vec!["o".to_string()]);
        assert!(q.aggregates[0].filter.is_some());
    }

    #[test]
    fn reserved_aggregates_parse() {
        let q = parse_query(
            "REGISTER STREAM C COMPUTED EVERY 1h AS SELECT ?c FROM STREAM <http://ex/s> [RANGE 1h STEP 1m]
             WHERE { ?s <http://ex/p> ?o } AGGREGATE {(?c, SUM, {?o})}",
        )
        .unwrap();
        assert_eq!(q.aggregates[0].function, AggregateFunction::Sum);
    }

    #[test]
    fn several_blocks_in_one_file() {
        let qs = parse_queries(
            "REGISTER QUERY A COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]\n\n\
             # second\nREGISTER STREAM B COMPUTED EVERY 1m AS SELECT ?y FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]\n",
        )
        .unwrap();
        assert_eq!(qs.iter().map(|q| q.name.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert!(parse_queries("").unwrap().is_empty());
    }
}
