//! The assignment/guard mini-language annotated on flows.
//!
//! Flow names carry assignments `target := value` and flow guards carry
//! boolean expressions over `==`/`!=` comparisons combined with `!`, `&&`
//! and `||`. Values are variable references with dot access; there are no
//! built-in types or literals other than names resolved against the model.
//! The word `else` is reserved: as a whole guard it marks the default branch
//! of a decision node and it cannot be used as an identifier.

use thiserror::Error;

/// A dot-separated variable reference, e.g. `sp_tk2.stand5`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarRef {
    pub segments: Vec<String>,
}

impl VarRef {
    pub fn new(segments: Vec<String>) -> Self {
        debug_assert!(!segments.is_empty());
        VarRef { segments }
    }

    pub fn single(name: impl Into<String>) -> Self {
        VarRef {
            segments: vec![name.into()],
        }
    }

    pub fn root(&self) -> &str {
        &self.segments[0]
    }
}

impl std::fmt::Display for VarRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.segments.join("."))
    }
}

/// `target := value` as written on an object flow name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub target: VarRef,
    pub value: VarRef,
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} := {}", self.target, self.value)
    }
}

/// A flow guard. `Else` and `Empty` only ever appear as a whole guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardExpr {
    Eq(VarRef, VarRef),
    Neq(VarRef, VarRef),
    Not(Box<GuardExpr>),
    And(Box<GuardExpr>, Box<GuardExpr>),
    Or(Box<GuardExpr>, Box<GuardExpr>),
    Else,
    Empty,
}

impl GuardExpr {
    /// Normalized surface form; parsing it back yields the same AST.
    pub fn pretty(&self) -> String {
        fn prec(e: &GuardExpr) -> u8 {
            match e {
                GuardExpr::Or(..) => 1,
                GuardExpr::And(..) => 2,
                GuardExpr::Not(..) => 3,
                _ => 4,
            }
        }
        fn go(e: &GuardExpr, min: u8, out: &mut String) {
            let p = prec(e);
            let wrap = p < min;
            if wrap {
                out.push('(');
            }
            match e {
                GuardExpr::Eq(a, b) => {
                    out.push_str(&format!("{} == {}", a, b));
                }
                GuardExpr::Neq(a, b) => {
                    out.push_str(&format!("{} != {}", a, b));
                }
                GuardExpr::Not(inner) => {
                    out.push_str("!(");
                    go(inner, 0, out);
                    out.push(')');
                }
                GuardExpr::And(l, r) => {
                    go(l, 2, out);
                    out.push_str(" && ");
                    go(r, 3, out);
                }
                GuardExpr::Or(l, r) => {
                    go(l, 1, out);
                    out.push_str(" || ");
                    go(r, 2, out);
                }
                GuardExpr::Else => out.push_str("else"),
                GuardExpr::Empty => {}
            }
            if wrap {
                out.push(')');
            }
        }
        let mut s = String::new();
        go(self, 0, &mut s);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    EmptyInput,
    #[error("illegal character `{ch}` at byte {at}")]
    IllegalChar { ch: char, at: usize },
    #[error("`else` is reserved and cannot be used as an identifier")]
    ReservedElse,
    #[error("expected {expected} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("missing right-hand side of `:=`")]
    MissingRhs,
    #[error("`else` cannot be combined with other guard syntax")]
    ElseCombined,
    #[error("trailing input at byte {at}")]
    Trailing { at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Else,
    Dot,
    Assign,
    EqEq,
    NotEq,
    Bang,
    AndAnd,
    OrOr,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            c if c.is_ascii_whitespace() => i += 1,
            '.' => {
                toks.push((Tok::Dot, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ':' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::Assign, i));
                i += 2;
            }
            '=' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::EqEq, i));
                i += 2;
            }
            '!' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::NotEq, i));
                i += 2;
            }
            '!' => {
                toks.push((Tok::Bang, i));
                i += 1;
            }
            '&' if bytes.get(i + 1) == Some(&b'&') => {
                toks.push((Tok::AndAnd, i));
                i += 2;
            }
            '|' if bytes.get(i + 1) == Some(&b'|') => {
                toks.push((Tok::OrOr, i));
                i += 2;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &text[start..i];
                if word == "else" {
                    toks.push((Tok::Else, start));
                } else {
                    toks.push((Tok::Ident(word.to_string()), start));
                }
            }
            other => return Err(ExprError::IllegalChar { ch: other, at: i }),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ExprError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            len: text.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_ident(&mut self) -> Result<String, ExprError> {
        let at = self.at();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(Tok::Else) => Err(ExprError::ReservedElse),
            _ => Err(ExprError::Expected {
                expected: "identifier",
                at,
            }),
        }
    }

    fn var_ref(&mut self) -> Result<VarRef, ExprError> {
        let mut segments = vec![self.expect_ident()?];
        while self.peek() == Some(&Tok::Dot) {
            self.bump();
            segments.push(self.expect_ident()?);
        }
        Ok(VarRef { segments })
    }

    fn finish(&self) -> Result<(), ExprError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(ExprError::Trailing { at: self.at() })
        }
    }

    // precedence: ! binds strongest, then &&, then ||
    fn or_expr(&mut self) -> Result<GuardExpr, ExprError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = GuardExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<GuardExpr, ExprError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.bump();
            let rhs = self.unary()?;
            lhs = GuardExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<GuardExpr, ExprError> {
        if self.peek() == Some(&Tok::Bang) {
            self.bump();
            let inner = self.unary()?;
            return Ok(GuardExpr::Not(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<GuardExpr, ExprError> {
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            let inner = self.or_expr()?;
            let at = self.at();
            match self.bump() {
                Some(Tok::RParen) => Ok(inner),
                _ => Err(ExprError::Expected {
                    expected: "`)`",
                    at,
                }),
            }
        } else if self.peek() == Some(&Tok::Else) {
            Err(ExprError::ElseCombined)
        } else {
            let lhs = self.var_ref()?;
            let at = self.at();
            match self.bump() {
                Some(Tok::EqEq) => Ok(GuardExpr::Eq(lhs, self.var_ref()?)),
                Some(Tok::NotEq) => Ok(GuardExpr::Neq(lhs, self.var_ref()?)),
                _ => Err(ExprError::Expected {
                    expected: "`==` or `!=`",
                    at,
                }),
            }
        }
    }
}

/// Parses a dot-separated variable reference. Surrounding whitespace is ignored.
pub fn parse_var_ref(text: &str) -> Result<VarRef, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::EmptyInput);
    }
    let mut p = Parser::new(text)?;
    let v = p.var_ref()?;
    p.finish()?;
    Ok(v)
}

/// Parses `target := value`. Both sides are variable references.
pub fn parse_assignment(text: &str) -> Result<Assignment, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::EmptyInput);
    }
    let mut p = Parser::new(text)?;
    let target = p.var_ref()?;
    let at = p.at();
    match p.bump() {
        Some(Tok::Assign) => {}
        _ => {
            return Err(ExprError::Expected {
                expected: "`:=`",
                at,
            })
        }
    }
    if p.peek().is_none() {
        return Err(ExprError::MissingRhs);
    }
    let value = p.var_ref()?;
    p.finish()?;
    Ok(Assignment { target, value })
}

/// Parses a guard. The empty string is the empty guard; the bare word `else`
/// is the default marker and cannot be combined with anything else.
pub fn parse_guard(text: &str) -> Result<GuardExpr, ExprError> {
    if text.trim().is_empty() {
        return Ok(GuardExpr::Empty);
    }
    let mut p = Parser::new(text)?;
    if p.peek() == Some(&Tok::Else) {
        p.bump();
        return match p.finish() {
            Ok(()) => Ok(GuardExpr::Else),
            Err(_) => Err(ExprError::ElseCombined),
        };
    }
    let g = p.or_expr()?;
    p.finish()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(parts: &[&str]) -> VarRef {
        VarRef::new(parts.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn var_ref_dot_access() {
        assert_eq!(
            parse_var_ref("sp_tk2.stand5").unwrap(),
            v(&["sp_tk2", "stand5"])
        );
        assert_eq!(parse_var_ref("x").unwrap(), v(&["x"]));
        assert_eq!(parse_var_ref("a.b.c").unwrap(), v(&["a", "b", "c"]));
        assert_eq!(parse_var_ref("  padded  ").unwrap(), v(&["padded"]));
    }

    #[test]
    fn var_ref_errors() {
        assert_eq!(parse_var_ref(""), Err(ExprError::EmptyInput));
        assert!(matches!(
            parse_var_ref("a-b"),
            Err(ExprError::Trailing { .. }) | Err(ExprError::IllegalChar { .. })
        ));
        assert!(matches!(
            parse_var_ref("9lives"),
            Err(ExprError::Expected { .. })
        ));
        assert_eq!(parse_var_ref("else"), Err(ExprError::ReservedElse));
        // primes are legal identifier characters
        assert_eq!(parse_var_ref("x'"), Ok(v(&["x'"])));
    }

    #[test]
    fn assignment_basic() {
        let a = parse_assignment("enabled := yes").unwrap();
        assert_eq!(a.target, v(&["enabled"]));
        assert_eq!(a.value, v(&["yes"]));
        assert_eq!(parse_assignment("a:=b").unwrap(), parse_assignment("a := b").unwrap());
        assert_eq!(parse_assignment("a := "), Err(ExprError::MissingRhs));
        assert!(parse_assignment("a = b").is_err());
    }

    #[test]
    fn guard_basic() {
        assert_eq!(
            parse_guard("bepaaldheid5 == BEPAALD").unwrap(),
            GuardExpr::Eq(v(&["bepaaldheid5"]), v(&["BEPAALD"]))
        );
        assert_eq!(parse_guard("").unwrap(), GuardExpr::Empty);
        assert_eq!(parse_guard("   ").unwrap(), GuardExpr::Empty);
        assert_eq!(parse_guard("else").unwrap(), GuardExpr::Else);
    }

    #[test]
    fn guard_precedence_not_over_and_over_or() {
        // frozen from the reference parser in tests/expr_oracle.rs
        let g = parse_guard("!(a == b) && c != d || e == f").unwrap();
        let expected = GuardExpr::Or(
            Box::new(GuardExpr::And(
                Box::new(GuardExpr::Not(Box::new(GuardExpr::Eq(v(&["a"]), v(&["b"]))))),
                Box::new(GuardExpr::Neq(v(&["c"]), v(&["d"]))),
            )),
            Box::new(GuardExpr::Eq(v(&["e"]), v(&["f"]))),
        );
        assert_eq!(g, expected);
    }

    #[test]
    fn guard_else_combined_is_rejected() {
        assert_eq!(parse_guard("else && a == b"), Err(ExprError::ElseCombined));
        assert_eq!(parse_guard("a == b || else"), Err(ExprError::ElseCombined));
    }

    #[test]
    fn guard_malformed() {
        assert!(parse_guard("a ==").is_err());
        assert!(parse_guard("(a == b").is_err());
        assert!(parse_guard("a").is_err());
        assert!(parse_guard("a == b &&").is_err());
    }

    #[test]
    fn pretty_roundtrips_worked_examples() {
        for src in [
            "a == b",
            "a != b",
            "!(a == b)",
            "a == b && c != d",
            "!(a == b) && c != d || e == f",
            "(a == b || c == d) && e != f",
            "else",
        ] {
            let ast = parse_guard(src).unwrap();
            let printed = ast.pretty();
            assert_eq!(parse_guard(&printed).unwrap(), ast, "via {printed:?}");
        }
    }
}
