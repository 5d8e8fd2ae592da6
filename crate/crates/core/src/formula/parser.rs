use thiserror::Error;

use super::{Cmp, DistanceFn, Formula, PredicateFn};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("negative interval bound {0}")]
    NegativeInterval(f64),
    #[error("inverted interval [{0},{1}]")]
    InvertedInterval(usize, usize),
    #[error("spatial bound must be positive and finite, got {0}")]
    InvalidBound(f64),
}

/// Parses a formula; any identifier is accepted as an attribute label.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    Parser::new(text, None)?.parse_all()
}

/// Parses a formula and rejects attribute labels outside `labels`.
pub fn parse_with_labels<S: AsRef<str>>(text: &str, labels: &[S]) -> Result<Formula, ParseError> {
    let labels: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
    Parser::new(text, Some(labels))?.parse_all()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64, String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Bang,
    Amp,
    Pipe,
    Le,
    Gt,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        let err = |msg: String| ParseError {
            line: tl,
            column: tc,
            kind: ParseErrorKind::Syntax(msg),
        };
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            '!' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '>' => Tok::Gt,
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 1;
                    Tok::Le
                } else {
                    return Err(err("expected `<=`".into()));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < chars.len() && (chars[i + 1].is_ascii_alphanumeric() || chars[i + 1] == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..=i].iter().collect())
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[j - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let raw: String = chars[start..j].iter().collect();
                let value: f64 = raw
                    .parse()
                    .map_err(|_| err(format!("malformed number `{raw}`")))?;
                i = j - 1;
                Tok::Num(value, raw)
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        };
        column += i + 1 - start;
        i += 1;
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    labels: Option<Vec<&'a str>>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, labels: Option<Vec<&'a str>>) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            labels,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, token: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: token.line,
            column: token.column,
            kind,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.error_at(self.here(), ParseErrorKind::Syntax(msg.into()))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == want {
            Ok(self.bump())
        } else {
            Err(self.syntax(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn parse_all(mut self) -> Result<Formula, ParseError> {
        let f = self.until()?;
        if *self.peek() != Tok::Eof {
            return Err(self.syntax(format!("unexpected {}", describe(self.peek()))));
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.or()?;
        while self.is_ident("U") && *self.peek2() == Tok::LBracket {
            self.bump();
            let (a, b) = self.interval()?;
            let rhs = self.or()?;
            lhs = Formula::until(a, b, lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.spatial()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.spatial()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn spatial(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let surround = if self.is_ident("R") && *self.peek2() == Tok::LBrace {
                false
            } else if self.is_ident("O") && *self.peek2() == Tok::LBrace {
                true
            } else {
                break;
            };
            self.bump();
            let (dist, bound) = self.distance_bound(Cmp::Le)?;
            let rhs = self.unary()?;
            lhs = if surround {
                Formula::surround(dist, bound, lhs, rhs)
            } else {
                Formula::reach(dist, bound, lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(name) if (name == "F" || name == "G") && *self.peek2() == Tok::LBracket => {
                self.bump();
                let (a, b) = self.interval()?;
                let body = self.unary()?;
                Ok(if name == "F" {
                    Formula::eventually(a, b, body)
                } else {
                    Formula::always(a, b, body)
                })
            }
            Tok::Ident(name) if name == "E" && *self.peek2() == Tok::LBrace => {
                self.bump();
                let (dist, bound) = self.distance_bound(Cmp::Gt)?;
                Ok(Formula::escape(dist, bound, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        let token = self.here().clone();
        match token.tok {
            Tok::LParen => {
                self.bump();
                let f = self.until()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(ref name) => {
                let name = name.clone();
                match name.as_str() {
                    "true" => {
                        self.bump();
                        Ok(Formula::True)
                    }
                    "false" => {
                        self.bump();
                        Ok(Formula::not(Formula::True))
                    }
                    "distTo" => {
                        self.bump();
                        self.expect(Tok::LParen, "`(`")?;
                        let mut point = vec![self.number()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            point.push(self.number()?);
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        self.comparison(PredicateFn::DistTo(point))
                    }
                    "coord" => {
                        self.bump();
                        self.expect(Tok::LParen, "`(`")?;
                        let axis = self.natural()?;
                        self.expect(Tok::RParen, "`)`")?;
                        self.comparison(PredicateFn::Coord(axis))
                    }
                    "minPairDist" => {
                        self.bump();
                        self.comparison(PredicateFn::MinPairDist)
                    }
                    _ if *self.peek2() == Tok::LParen => Err(self.error_at(
                        &token,
                        ParseErrorKind::UnknownPredicate(name),
                    )),
                    _ => {
                        if let Some(labels) = &self.labels {
                            if !labels.contains(&name.as_str()) {
                                return Err(
                                    self.error_at(&token, ParseErrorKind::UnknownAttribute(name))
                                );
                            }
                        }
                        self.bump();
                        Ok(Formula::Atom(name))
                    }
                }
            }
            ref other => Err(self.syntax(format!("expected a formula, found {}", describe(other)))),
        }
    }

    fn comparison(&mut self, func: PredicateFn) -> Result<Formula, ParseError> {
        let cmp = match self.peek() {
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            other => {
                return Err(self.syntax(format!("expected `<=` or `>`, found {}", describe(other))))
            }
        };
        self.bump();
        let threshold = self.number()?;
        Ok(Formula::Predicate {
            func,
            cmp,
            threshold,
        })
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Tok::Num(v, _) if v.is_finite() => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            other => Err(self.syntax(format!("expected a number, found {}", describe(other)))),
        }
    }

    fn natural(&mut self) -> Result<usize, ParseError> {
        let token = self.here().clone();
        match &token.tok {
            Tok::Num(v, raw) => {
                if *v < 0.0 {
                    return Err(self.error_at(&token, ParseErrorKind::NegativeInterval(*v)));
                }
                let n: usize = raw
                    .parse()
                    .map_err(|_| self.error_at(&token, ParseErrorKind::Syntax(format!("expected an integer, found `{raw}`"))))?;
                self.bump();
                Ok(n)
            }
            other => Err(self.syntax(format!("expected an integer, found {}", describe(other)))),
        }
    }

    fn interval(&mut self) -> Result<(usize, usize), ParseError> {
        let open = self.expect(Tok::LBracket, "`[`")?;
        let a = self.natural()?;
        self.expect(Tok::Comma, "`,`")?;
        let b = self.natural()?;
        self.expect(Tok::RBracket, "`]`")?;
        if a > b {
            return Err(self.error_at(&open, ParseErrorKind::InvertedInterval(a, b)));
        }
        Ok((a, b))
    }

    fn distance_bound(&mut self, want: Cmp) -> Result<(DistanceFn, f64), ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let dist = match self.peek() {
            Tok::Ident(s) if s == "hops" => DistanceFn::Hops,
            Tok::Ident(s) if s == "euclid" => DistanceFn::Euclid,
            other => {
                return Err(self.syntax(format!(
                    "expected `hops` or `euclid`, found {}",
                    describe(other)
                )))
            }
        };
        self.bump();
        match (want, self.peek()) {
            (Cmp::Le, Tok::Le) | (Cmp::Gt, Tok::Gt) => {
                self.bump();
            }
            (_, other) => {
                return Err(self.syntax(format!("expected `{want}`, found {}", describe(other))))
            }
        }
        let token = self.here().clone();
        let bound = self.number()?;
        if bound <= 0.0 {
            return Err(self.error_at(&token, ParseErrorKind::InvalidBound(bound)));
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok((dist, bound))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(_, raw) => format!("`{raw}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Le => "`<=`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Eof => "end of input".into(),
    }
}
