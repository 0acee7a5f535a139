//! Tokenizer shared by the Turtle reader and the query parser.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    IriRef(String),
    /// `prefix:local`; `local` is empty for a bare namespace (`sosa:`).
    PName {
        prefix: String,
        local: String,
    },
    Var(String),
    Blank(String),
    Str(String),
    Integer(String),
    Decimal(String),
    Double(String),
    /// An integer immediately followed by a unit, e.g. `24h`.
    Duration {
        value: u64,
        unit: String,
    },
    Word(String),
    /// `@prefix`, `@base`, or a language tag.
    At(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Comma,
    Semicolon,
    DoubleCaret,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::IriRef(i) => write!(f, "<{i}>"),
            Tok::PName { prefix, local } => write!(f, "{prefix}:{local}"),
            Tok::Var(v) => write!(f, "?{v}"),
            Tok::Blank(b) => write!(f, "_:{b}"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Integer(s) | Tok::Decimal(s) | Tok::Double(s) => f.write_str(s),
            Tok::Duration { value, unit } => write!(f, "{value}{unit}"),
            Tok::Word(w) => f.write_str(w),
            Tok::At(w) => write!(f, "@{w}"),
            Tok::LBrace => f.write_str("{"),
            Tok::RBrace => f.write_str("}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::LBracket => f.write_str("["),
            Tok::RBracket => f.write_str("]"),
            Tok::Dot => f.write_str("."),
            Tok::Comma => f.write_str(","),
            Tok::Semicolon => f.write_str(";"),
            Tok::DoubleCaret => f.write_str("^^"),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Slash => f.write_str("/"),
            Tok::Lt => f.write_str("<"),
            Tok::Le => f.write_str("<="),
            Tok::Gt => f.write_str(">"),
            Tok::Ge => f.write_str(">="),
            Tok::Eq => f.write_str("="),
            Tok::Ne => f.write_str("!="),
            Tok::AndAnd => f.write_str("&&"),
            Tok::OrOr => f.write_str("||"),
            Tok::Bang => f.write_str("!"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_ws_and_comments();
        let pos = lx.pos();
        let Some(c) = lx.peek(0) else {
            out.push(Token { tok: Tok::Eof, pos });
            return Ok(out);
        };
        let tok = lx.next_token(c, pos)?;
        out.push(Token { tok, pos });
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl Lexer {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.i).copied()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, pos: Pos, message: impl Into<String>) -> LexError {
        LexError {
            pos,
            message: message.into(),
        }
    }

    fn skip_ws_and_comments(&mut self) {
        while let Some(c) = self.peek(0) {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn next_token(&mut self, c: char, pos: Pos) -> Result<Tok, LexError> {
        let next = self.peek(1);
        let two = |a: char, b: char| c == a && next == Some(b);
        if c == '<' {
            if let Some(iri) = self.try_iri() {
                return Ok(Tok::IriRef(iri));
            }
            self.bump();
            if self.peek(0) == Some('=') {
                self.bump();
                return Ok(Tok::Le);
            }
            return Ok(Tok::Lt);
        }
        if two('^', '^') {
            self.bump();
            self.bump();
            return Ok(Tok::DoubleCaret);
        }
        if two('&', '&') || two('|', '|') || two('>', '=') || two('!', '=') {
            self.bump();
            self.bump();
            return Ok(match c {
                '&' => Tok::AndAnd,
                '|' => Tok::OrOr,
                '>' => Tok::Ge,
                _ => Tok::Ne,
            });
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '.' => Some(Tok::Dot),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semicolon),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '>' => Some(Tok::Gt),
            '=' => Some(Tok::Eq),
            '!' => Some(Tok::Bang),
            _ => None,
        };
        if let Some(tok) = single {
            self.bump();
            return Ok(tok);
        }
        match c {
            '"' | '\'' => self.string(pos),
            '?' | '$' => {
                self.bump();
                let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(self.err(pos, "empty variable name"));
                }
                Ok(Tok::Var(name))
            }
            '@' => {
                self.bump();
                let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                if word.is_empty() {
                    return Err(self.err(pos, "expected a keyword after '@'"));
                }
                Ok(Tok::At(word))
            }
            '_' if self.peek(1) == Some(':') => {
                self.bump();
                self.bump();
                let label = self.local_name();
                if label.is_empty() {
                    return Err(self.err(pos, "empty blank node label"));
                }
                Ok(Tok::Blank(label))
            }
            c if c.is_ascii_digit() => self.number(pos),
            ':' => {
                self.bump();
                Ok(Tok::PName {
                    prefix: String::new(),
                    local: self.local_name(),
                })
            }
            c if is_name_start(c) => {
                let word = self.take_while(|c| is_name_char(c) || c == '.');
                // names cannot end with '.', that dot is a statement terminator
                let trimmed = word.trim_end_matches('.');
                self.unread(word.len() - trimmed.len());
                let word = trimmed.to_owned();
                if self.peek(0) == Some(':') {
                    self.bump();
                    Ok(Tok::PName {
                        prefix: word,
                        local: self.local_name(),
                    })
                } else {
                    Ok(Tok::Word(word))
                }
            }
            other => Err(self.err(pos, format!("unexpected character {other:?}"))),
        }
    }

    /// Steps back over `n` characters that are known not to be newlines.
    fn unread(&mut self, n: usize) {
        self.i -= n;
        self.col -= n;
    }

    fn local_name(&mut self) -> String {
        let word = self.take_while(|c| is_name_char(c) || c == '.' || c == ':' || c == '%');
        let trimmed = word.trim_end_matches('.');
        self.unread(word.len() - trimmed.len());
        trimmed.to_owned()
    }

    fn try_iri(&mut self) -> Option<String> {
        let mut j = self.i + 1;
        let mut s = String::new();
        loop {
            let c = *self.chars.get(j)?;
            if c == '>' {
                break;
            }
            if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
                return None;
            }
            s.push(c);
            j += 1;
        }
        if s.is_empty() {
            return None;
        }
        while self.i <= j {
            self.bump();
        }
        Some(s)
    }

    fn string(&mut self, pos: Pos) -> Result<Tok, LexError> {
        let quote = self.bump().expect("caller peeked a quote");
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err(pos, "unterminated string literal")),
                Some(c) if c == quote => return Ok(Tok::Str(s)),
                Some('\\') => {
                    let esc = self.bump().ok_or_else(|| self.err(pos, "unterminated escape"))?;
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        other => return Err(self.err(pos, format!("unknown escape \\{other}"))),
                    });
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, LexError> {
        let int = self.take_while(|c| c.is_ascii_digit());
        let mut text = int.clone();
        let mut is_decimal = false;
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            text.push('.');
            text.push_str(&self.take_while(|c| c.is_ascii_digit()));
            is_decimal = true;
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let sign = matches!(self.peek(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                for _ in 0..digit_at {
                    text.push(self.bump().unwrap());
                }
                text.push_str(&self.take_while(|c| c.is_ascii_digit()));
                return Ok(Tok::Double(text));
            }
        }
        if !is_decimal && self.peek(0).is_some_and(|c| c.is_ascii_alphabetic()) {
            let unit = self.take_while(|c| c.is_ascii_alphabetic());
            let value = int
                .parse::<u64>()
                .map_err(|_| self.err(pos, format!("duration value {int} out of range")))?;
            return Ok(Tok::Duration { value, unit });
        }
        Ok(if is_decimal {
            Tok::Decimal(text)
        } else {
            Tok::Integer(text)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn less_than_versus_iri() {
        assert_eq!(
            toks("?voltage < 5 && ?p = <http://ex/L>"),
            vec![
                Tok::Var("voltage".into()),
                Tok::Lt,
                Tok::Integer("5".into()),
                Tok::AndAnd,
                Tok::Var("p".into()),
                Tok::Eq,
                Tok::IriRef("http://ex/L".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks("?a <= 3")[1], Tok::Le);
    }

    #[test]
    fn trailing_dot_is_a_terminator() {
        assert_eq!(
            toks("?s sosa:observes ?voltage."),
            vec![
                Tok::Var("s".into()),
                Tok::PName {
                    prefix: "sosa".into(),
                    local: "observes".into()
                },
                Tok::Var("voltage".into()),
                Tok::Dot,
                Tok::Eof
            ]
        );
        assert_eq!(toks("ex:a.")[1], Tok::Dot);
    }

    #[test]
    fn durations_and_numbers() {
        assert_eq!(
            toks("24h")[0],
            Tok::Duration {
                value: 24,
                unit: "h".into()
            }
        );
        assert_eq!(
            toks("500ms")[0],
            Tok::Duration {
                value: 500,
                unit: "ms".into()
            }
        );
        assert_eq!(toks("4.2")[0], Tok::Decimal("4.2".into()));
        assert_eq!(toks("1e3")[0], Tok::Double("1e3".into()));
        assert_eq!(
            toks("1440-?d")[..3],
            [Tok::Integer("1440".into()), Tok::Minus, Tok::Var("d".into())]
        );
        assert_eq!(toks("5.")[..2], [Tok::Integer("5".into()), Tok::Dot]);
    }

    #[test]
    fn elided_iri_forms_lex_as_iris() {
        assert_eq!(
            toks("<http://../production>")[0],
            Tok::IriRef("http://../production".into())
        );
        assert_eq!(
            toks("<http://.../ASSEMBLY/AP1A>")[0],
            Tok::IriRef("http://.../ASSEMBLY/AP1A".into())
        );
    }

    #[test]
    fn errors_carry_positions() {
        let err = tokenize("ok\n  \"open").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 3 });
        let err = tokenize("a ~").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 3 });
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(toks("# hi\n.")[0], Tok::Dot);
    }
}
