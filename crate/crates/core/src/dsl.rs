//! S-expression query syntax.
//!
//! ```text
//! E     := (rel NAME) | (select PRED E) | (project (PEXPR ...) E)
//!        | (join PRED E E) | (union E E) | (diff E E)
//!        | (agg (ATTR ...) (FUNC ATTR|*) E)
//! PEXPR := ATTR | (-> ATTR ATTR) | (-> LIT ATTR)
//! PRED  := (cmp OP ATTR ATTR|LIT) | (and PRED ...) | (or PRED ...)
//! LIT   := null | 12 | -3 | 7/2 | 1.25 | "text"
//! ```
//!
//! Anything between `;` and the end of a line is a comment.

use crate::algebra::{AggArg, AggFunc, CmpOp, Operand, Predicate, ProjExpr, QueryAst};
use crate::error::{Error, Position, Result};
use crate::relation::{Rational, Value};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
    Str(String),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            offset: self.offset,
            line: self.line,
            column: self.column,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek_char() {
            if c == ';' {
                while self.peek_char().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<(Token, Position)> {
        self.skip_blank();
        let pos = self.pos();
        let Some(c) = self.bump() else {
            return Ok((Token::End, pos));
        };
        let tok = match c {
            '(' => Token::Open,
            ')' => Token::Close,
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(parse_error(pos, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            _ => return Err(parse_error(self.pos(), "invalid escape")),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Token::Str(s)
            }
            _ => {
                let start = self.offset - c.len_utf8();
                while self
                    .peek_char()
                    .is_some_and(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '"' | ';'))
                {
                    self.bump();
                }
                Token::Atom(self.src[start..self.offset].to_owned())
            }
        };
        Ok((tok, pos))
    }
}

fn parse_error(pos: Position, msg: impl Into<String>) -> Error {
    Error::Parse {
        pos,
        msg: msg.into(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Token, Position)>,
}

/// Parses exactly one query.
pub fn parse_query(text: &str) -> Result<QueryAst> {
    let mut p = Parser {
        lexer: Lexer::new(text),
        peeked: None,
    };
    let q = p.query()?;
    match p.next()? {
        (Token::End, _) => Ok(q),
        (_, pos) => Err(parse_error(pos, "unexpected input after the query")),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '-'))
        && s != "null"
}

/// Reads an integer, a fraction `p/q` or a decimal such as `-1.25`.
pub fn parse_number(s: &str) -> Option<Value> {
    if let Ok(i) = s.parse::<i64>() {
        return Some(Value::Int(i));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.parse().ok()?;
        let d: i128 = d.parse().ok()?;
        return (d != 0).then(|| Value::Rat(Rational::new(n, d)));
    }
    let (whole, frac) = s.split_once('.')?;
    if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 30 {
        return None;
    }
    let negative = whole.starts_with('-');
    let whole: i128 = match whole {
        "" | "-" => 0,
        w => w.parse().ok()?,
    };
    let scale = 10i128.checked_pow(frac.len() as u32)?;
    let frac: i128 = frac.parse().ok()?;
    let magnitude = whole.checked_abs()?.checked_mul(scale)?.checked_add(frac)?;
    let numer = if negative { -magnitude } else { magnitude };
    Some(Value::Rat(Rational::new(numer, scale)))
}

impl Parser<'_> {
    fn next(&mut self) -> Result<(Token, Position)> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn peek(&mut self) -> Result<&Token> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(&self.peeked.as_ref().expect("just filled").0)
    }

    fn expect_open(&mut self) -> Result<Position> {
        match self.next()? {
            (Token::Open, pos) => Ok(pos),
            (Token::End, pos) => Err(parse_error(pos, "unexpected end of input, expected `(`")),
            (_, pos) => Err(parse_error(pos, "expected `(`")),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.next()? {
            (Token::Close, _) => Ok(()),
            (Token::End, pos) => Err(parse_error(pos, "unexpected end of input, expected `)`")),
            (_, pos) => Err(parse_error(pos, "expected `)`")),
        }
    }

    fn atom(&mut self, what: &str) -> Result<(String, Position)> {
        match self.next()? {
            (Token::Atom(s), pos) => Ok((s, pos)),
            (Token::End, pos) => Err(parse_error(pos, format!("unexpected end of input, expected {what}"))),
            (_, pos) => Err(parse_error(pos, format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let (s, pos) = self.atom(what)?;
        if is_ident(&s) {
            Ok(s)
        } else {
            Err(parse_error(pos, format!("expected {what}, found `{s}`")))
        }
    }

    /// Identifier or literal.
    fn operand(&mut self) -> Result<Operand> {
        match self.next()? {
            (Token::Str(s), _) => Ok(Operand::Lit(Value::Str(s))),
            (Token::Atom(s), _) if s == "null" => Ok(Operand::Lit(Value::Null)),
            (Token::Atom(s), _) if is_ident(&s) => Ok(Operand::Attr(s)),
            (Token::Atom(s), pos) => parse_number(&s)
                .map(Operand::Lit)
                .ok_or_else(|| parse_error(pos, format!("invalid literal `{s}`"))),
            (Token::End, pos) => Err(parse_error(pos, "unexpected end of input")),
            (_, pos) => Err(parse_error(pos, "expected an attribute or a literal")),
        }
    }

    fn query(&mut self) -> Result<QueryAst> {
        self.expect_open()?;
        let (head, pos) = self.atom("an operator")?;
        let q = match head.as_str() {
            "rel" => QueryAst::Rel(self.ident("a relation name")?),
            "select" => {
                let pred = self.predicate()?;
                QueryAst::select(pred, self.query()?)
            }
            "project" => {
                self.expect_open()?;
                let mut exprs = Vec::new();
                while *self.peek()? != Token::Close {
                    exprs.push(self.proj_expr()?);
                }
                self.expect_close()?;
                QueryAst::project(exprs, self.query()?)
            }
            "join" => {
                let pred = self.predicate()?;
                let left = self.query()?;
                QueryAst::join(pred, left, self.query()?)
            }
            "union" => {
                let left = self.query()?;
                QueryAst::union(left, self.query()?)
            }
            "diff" => {
                let left = self.query()?;
                QueryAst::diff(left, self.query()?)
            }
            "agg" => {
                self.expect_open()?;
                let mut group = Vec::new();
                while *self.peek()? != Token::Close {
                    group.push(self.ident("a group attribute")?);
                }
                self.expect_close()?;
                self.expect_open()?;
                let (name, fpos) = self.atom("an aggregate function")?;
                let func = AggFunc::from_name(&name)
                    .ok_or_else(|| parse_error(fpos, format!("unknown aggregate function `{name}`")))?;
                let (arg, apos) = self.atom("an attribute or `*`")?;
                let arg = if arg == "*" {
                    AggArg::Star
                } else if is_ident(&arg) {
                    AggArg::Attr(arg)
                } else {
                    return Err(parse_error(apos, format!("expected an attribute or `*`, found `{arg}`")));
                };
                self.expect_close()?;
                QueryAst::agg(group, func, arg, self.query()?)
            }
            _ => return Err(parse_error(pos, format!("unknown operator `{head}`"))),
        };
        self.expect_close()?;
        Ok(q)
    }

    fn proj_expr(&mut self) -> Result<ProjExpr> {
        match self.peek()? {
            Token::Open => {
                self.next()?;
                let (arrow, pos) = self.atom("`->`")?;
                if arrow != "->" {
                    return Err(parse_error(pos, format!("expected `->`, found `{arrow}`")));
                }
                let from = self.operand()?;
                let to = self.ident("an output attribute")?;
                self.expect_close()?;
                Ok(match from {
                    Operand::Attr(from) => ProjExpr::Rename { from, to },
                    Operand::Lit(value) => ProjExpr::Const { value, name: to },
                })
            }
            _ => Ok(ProjExpr::Attr(self.ident("an attribute")?)),
        }
    }

    fn predicate(&mut self) -> Result<Predicate> {
        self.expect_open()?;
        let (head, pos) = self.atom("`cmp`, `and` or `or`")?;
        let pred = match head.as_str() {
            "cmp" => {
                let (op, opos) = self.atom("a comparison operator")?;
                let op = CmpOp::from_symbol(&op)
                    .ok_or_else(|| parse_error(opos, format!("unknown comparison `{op}`")))?;
                let left = self.ident("an attribute")?;
                Predicate::Cmp {
                    op,
                    left,
                    right: self.operand()?,
                }
            }
            "and" | "or" => {
                let mut parts = Vec::new();
                while *self.peek()? != Token::Close {
                    parts.push(self.predicate()?);
                }
                if head == "and" {
                    Predicate::And(parts)
                } else {
                    Predicate::Or(parts)
                }
            }
            _ => return Err(parse_error(pos, format!("unknown predicate `{head}`"))),
        };
        self.expect_close()?;
        Ok(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_examples() {
        let q = parse_query(r#"(agg () (count *) (select (cmp = skill "SP") (rel works)))"#).unwrap();
        assert_eq!(
            q,
            QueryAst::agg(
                vec![],
                AggFunc::Count,
                AggArg::Star,
                QueryAst::select(
                    Predicate::cmp(CmpOp::Eq, "skill", Operand::Lit(Value::str("SP"))),
                    QueryAst::rel("works")
                )
            )
        );
        let q = parse_query("(diff (project (skill) (rel assign)) (project (skill) (rel works)))").unwrap();
        let skill = |r| QueryAst::project(vec![ProjExpr::Attr("skill".into())], QueryAst::rel(r));
        assert_eq!(q, QueryAst::diff(skill("assign"), skill("works")));
    }

    #[test]
    fn literals_and_renames() {
        let q = parse_query(
            "(project (a (-> a b) (-> 1 one) (-> -3/6 half) (-> 1.25 x) (-> \"q\\\"s\" s) (-> null n)) (rel r))",
        )
        .unwrap();
        let QueryAst::Project { exprs, .. } = q else { panic!() };
        assert_eq!(
            exprs,
            vec![
                ProjExpr::Attr("a".into()),
                ProjExpr::Rename {
                    from: "a".into(),
                    to: "b".into()
                },
                ProjExpr::Const {
                    value: Value::Int(1),
                    name: "one".into()
                },
                ProjExpr::Const {
                    value: Value::Rat(Rational::new(-1, 2)),
                    name: "half".into()
                },
                ProjExpr::Const {
                    value: Value::Rat(Rational::new(5, 4)),
                    name: "x".into()
                },
                ProjExpr::Const {
                    value: Value::str("q\"s"),
                    name: "s".into()
                },
                ProjExpr::Const {
                    value: Value::Null,
                    name: "n".into()
                },
            ]
        );
    }

    #[test]
    fn comments_and_whitespace() {
        let q = parse_query("; on duty\n(rel\n  works) ; done").unwrap();
        assert_eq!(q, QueryAst::rel("works"));
    }

    #[test]
    fn positioned_errors() {
        let err = |s| match parse_query(s) {
            Err(Error::Parse { pos, msg }) => (pos.line, pos.column, msg),
            other => panic!("{other:?}"),
        };
        let (line, col, msg) = err("(rel works");
        assert_eq!((line, col), (1, 11));
        assert!(msg.contains("end of input"), "{msg}");
        assert_eq!(err("(rel works) x").1, 13);
        assert_eq!(err("(frob (rel r))").1, 2);
        assert_eq!(err("(select (cmp ~ a 1) (rel r))").1, 14);
        assert_eq!(err("(agg () (median a) (rel r))").1, 10);
        let (line, col, _) = err("(union (rel r)\n  (rel 5))");
        assert_eq!((line, col), (2, 8));
        assert_eq!(err("(select (cmp = a \"x) (rel r))").1, 18);
    }
}
