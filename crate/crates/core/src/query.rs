//! Logical query language.
//!
//! ```text
//! query  := rule | expr
//! rule   := IF expr THEN atom
//! expr   := term (OR term)*
//! term   := factor (AND factor)*
//! factor := NOT factor | '(' expr ')' | atom
//! atom   := IDENT '=' VALUE
//! ```
//!
//! Keywords are case-insensitive and `.or.`, `.and.`, `.not.` are accepted as
//! synonyms. Values are normally single-quoted (`p5='y'`); a bare identifier
//! is accepted too. Names are resolved later, against a scope or network.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub var: String,
    pub value: String,
}

impl Atom {
    pub fn new(var: impl Into<String>, value: impl Into<String>) -> Self {
        Atom { var: var.into(), value: value.into() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}='{}'", self.var, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Atom(Atom),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Expr(Expr),
    Rule { premise: Expr, conclusion: Atom },
}

impl Expr {
    pub fn atom(var: &str, value: &str) -> Expr {
        Expr::Atom(Atom::new(var, value))
    }

    /// Variables mentioned, in name order.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Atom(a) => {
                out.insert(a.var.clone());
            }
            Expr::Not(e) => e.collect_vars(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect_vars(out)),
        }
    }

    /// Evaluates with `lookup` giving the current label of each variable.
    pub fn eval<'a>(&self, lookup: &impl Fn(&str) -> Option<&'a str>) -> Result<bool> {
        Ok(match self {
            Expr::Atom(a) => lookup(&a.var).ok_or_else(|| Error::unknown_variable(&a.var))? == a.value,
            Expr::Not(e) => !e.eval(lookup)?,
            Expr::And(es) => {
                let mut all = true;
                for e in es {
                    all &= e.eval(lookup)?;
                }
                all
            }
            Expr::Or(es) => {
                let mut any = false;
                for e in es {
                    any |= e.eval(lookup)?;
                }
                any
            }
        })
    }

    /// Checks every atom against the scope's variables and domains.
    pub fn check(&self, scope: &Scope) -> Result<()> {
        match self {
            Expr::Atom(a) => {
                scope.variable(&a.var).ok_or_else(|| Error::unknown_variable(&a.var))?.value_index(&a.value)?;
                Ok(())
            }
            Expr::Not(e) => e.check(scope),
            Expr::And(es) | Expr::Or(es) => es.iter().try_for_each(|e| e.check(scope)),
        }
    }

    /// The set of configurations of `scope` satisfying the expression.
    pub fn satisfying_set(&self, scope: &Scope) -> Result<FrameSet> {
        self.check(scope)?;
        let n = scope.frame_size()?;
        Ok(match self {
            Expr::Atom(a) => {
                let pos = scope.position(&a.var).unwrap();
                let want = scope.vars()[pos].value_index(&a.value)?;
                FrameSet::from_indices(n, (0..n).filter(|&i| scope.digit(i, pos) == want))
            }
            Expr::Not(e) => e.satisfying_set(scope)?.complement(),
            Expr::And(es) => {
                let mut acc = FrameSet::full(n);
                for e in es {
                    acc = acc.intersection(&e.satisfying_set(scope)?);
                }
                acc
            }
            Expr::Or(es) => {
                let mut acc = FrameSet::empty(n);
                for e in es {
                    acc = acc.union(&e.satisfying_set(scope)?);
                }
                acc
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Not(e) => write!(f, "not {}", Paren(e)),
            Expr::And(es) => join(f, es, " and "),
            Expr::Or(es) => join(f, es, " or "),
        }
    }
}

struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Atom(_) | Expr::Not(_) => write!(f, "{}", self.0),
            e => write!(f, "({e})"),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, es: &[Expr], sep: &str) -> fmt::Result {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{}", Paren(e))?;
    }
    Ok(())
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Expr(e) => write!(f, "{e}"),
            Query::Rule { premise, conclusion } => write!(f, "if {premise} then {conclusion}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Eq,
    LParen,
    RParen,
    And,
    Or,
    Not,
    If,
    Then,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Quoted(s) => format!("'{s}'"),
        Tok::Eq => "`=`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::And => "AND".into(),
        Tok::Or => "OR".into(),
        Tok::Not => "NOT".into(),
        Tok::If => "IF".into(),
        Tok::Then => "THEN".into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '(' => {
                it.next();
                out.push((pos, Tok::LParen));
            }
            ')' => {
                it.next();
                out.push((pos, Tok::RParen));
            }
            '=' => {
                it.next();
                out.push((pos, Tok::Eq));
            }
            '\'' => {
                it.next();
                let start = pos + 1;
                let mut end = None;
                for (p, ch) in it.by_ref() {
                    if ch == '\'' {
                        end = Some(p);
                        break;
                    }
                }
                let end = end.ok_or_else(|| Error::parse(pos, "unterminated quoted value"))?;
                out.push((pos, Tok::Quoted(text[start..end].to_string())));
            }
            '.' => {
                let rest = &text[pos..];
                let word: String = rest[1..].chars().take_while(|c| c.is_alphabetic()).collect();
                let after = 1 + word.len();
                if !rest[after..].starts_with('.') {
                    return Err(Error::parse(pos, "expected `.or.`, `.and.` or `.not.`"));
                }
                let tok = match word.to_ascii_lowercase().as_str() {
                    "or" => Tok::Or,
                    "and" => Tok::And,
                    "not" => Tok::Not,
                    _ => return Err(Error::parse(pos, format!("unknown operator `.{word}.`"))),
                };
                for _ in 0..after + 1 {
                    it.next();
                }
                out.push((pos, tok));
            }
            c if is_ident_char(c) => {
                let mut end = pos;
                while let Some(&(p, ch)) = it.peek() {
                    if !is_ident_char(ch) {
                        break;
                    }
                    end = p + ch.len_utf8();
                    it.next();
                }
                let word = &text[pos..end];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "if" => Tok::If,
                    "then" => Tok::Then,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((pos, tok));
            }
            other => return Err(Error::parse(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn unexpected(&self, wanted: &str) -> Error {
        match self.peek() {
            Some(t) => Error::parse(self.pos(), format!("expected {wanted}, found {}", describe(t))),
            None => Error::parse(self.end, format!("expected {wanted}, found end of input")),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn query(&mut self) -> Result<Query> {
        if self.eat(&Tok::If) {
            let premise = self.expr()?;
            if !self.eat(&Tok::Then) {
                return Err(self.unexpected("THEN"));
            }
            let conclusion = self.atom()?;
            Ok(Query::Rule { premise, conclusion })
        } else {
            Ok(Query::Expr(self.expr()?))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        while self.eat(&Tok::Or) {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Or(terms) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.factor()?];
        while self.eat(&Tok::And) {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::And(factors) })
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Not(Box::new(self.factor()?)));
        }
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            if !self.eat(&Tok::RParen) {
                return Err(self.unexpected("`)`"));
            }
            return Ok(e);
        }
        Ok(Expr::Atom(self.atom()?))
    }

    fn atom(&mut self) -> Result<Atom> {
        let var = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.unexpected("variable name")),
        };
        self.at += 1;
        if !self.eat(&Tok::Eq) {
            return Err(self.unexpected("`=`"));
        }
        let value = match self.peek() {
            Some(Tok::Quoted(s)) | Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.unexpected("value")),
        };
        self.at += 1;
        Ok(Atom { var, value })
    }
}

/// Parses an expression or an `if ... then ...` rule.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(Error::parse(0, "empty query"));
    }
    let mut p = Parser { toks, at: 0, end: text.len() };
    let q = p.query()?;
    if p.peek().is_some() {
        return Err(p.unexpected("end of input"));
    }
    Ok(q)
}

/// Parses a plain expression; rules are rejected.
pub fn parse_expr(text: &str) -> Result<Expr> {
    match parse_query(text)? {
        Query::Expr(e) => Ok(e),
        Query::Rule { .. } => Err(Error::parse(0, "expected an expression, found a rule")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Variable;

    #[test]
    fn dotted_or() {
        let q = parse_query("p5='y' .or. p1='n'").unwrap();
        assert_eq!(q, Query::Expr(Expr::Or(vec![Expr::atom("p5", "y"), Expr::atom("p1", "n")])));
    }

    #[test]
    fn rule_query() {
        let q = parse_query("if (p5='t' .or. p1='n') .and. p3='n' then p6='t'").unwrap();
        let premise =
            Expr::And(vec![Expr::Or(vec![Expr::atom("p5", "t"), Expr::atom("p1", "n")]), Expr::atom("p3", "n")]);
        assert_eq!(q, Query::Rule { premise, conclusion: Atom::new("p6", "t") });
    }

    #[test]
    fn precedence_and_case() {
        let e = parse_expr("a='1' OR b='1' And NOT c='1'").unwrap();
        assert_eq!(
            e,
            Expr::Or(vec![
                Expr::atom("a", "1"),
                Expr::And(vec![Expr::atom("b", "1"), Expr::Not(Box::new(Expr::atom("c", "1")))]),
            ])
        );
        assert_eq!(parse_expr("a=x").unwrap(), Expr::atom("a", "x"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_query("not (a='x'").unwrap_err();
        assert_eq!(err, Error::Parse { position: 10, message: "expected `)`, found end of input".into() });
        assert!(matches!(parse_query("a='x' b='y'"), Err(Error::Parse { position: 6, .. })));
        assert!(matches!(parse_query("a='x"), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(parse_query("   "), Err(Error::Parse { .. })));
        assert!(matches!(parse_query("a='x' .xor. b='y'"), Err(Error::Parse { position: 6, .. })));
    }

    #[test]
    fn display_round_trips() {
        for text in ["not (a='x' or b='y') and c='z'", "if a='t' then b='t'", "not not a='t'"] {
            let q = parse_query(text).unwrap();
            assert_eq!(parse_query(&q.to_string()).unwrap(), q);
        }
    }

    #[test]
    fn satisfying_sets_follow_the_elementary_cases() {
        let x1 = Variable::new("x1", ["a", "b", "c"]).unwrap();
        let x2 = Variable::new("x2", ["a", "b"]).unwrap();
        let s = Scope::new([x1, x2]).unwrap();
        // conjunction is a single configuration
        let and = parse_expr("x1='a' and x2='b'").unwrap().satisfying_set(&s).unwrap();
        assert_eq!(and.iter().collect::<Vec<_>>(), vec![s.encode(&[0, 1])]);
        // negation is the complement cylinder
        let not = parse_expr("not x1='a'").unwrap().satisfying_set(&s).unwrap();
        assert_eq!(not.count(), 4);
        // disjunction is the union of cylinders
        let or = parse_expr("x1='a' or x2='b'").unwrap().satisfying_set(&s).unwrap();
        assert_eq!(or.count(), 4);
        assert!(parse_expr("x3='a'").unwrap().satisfying_set(&s).is_err());
        assert!(parse_expr("x1='z'").unwrap().satisfying_set(&s).is_err());
    }
}
