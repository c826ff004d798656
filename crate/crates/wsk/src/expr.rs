//! Shared infix expression syntax for elements, polynomials, series and terms.

use crate::error::{Error, Result};
use num_rational::Rational64;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(i64),
    Var(String, usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational64),
    Call(String, Vec<Expr>, usize),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(i64),
    Ident(String),
    Sym(char),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    i: usize,
    end: usize,
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() {
            let mut j = k;
            while j < chars.len() && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            let end = if j < chars.len() { chars[j].0 } else { s.len() };
            let n: i64 = s[pos..end]
                .parse()
                .map_err(|_| Error::parse(pos, "integer literal too large"))?;
            out.push((Tok::Num(n), pos));
            k = j;
        } else if c.is_alphabetic() || c == '_' {
            let mut j = k;
            while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let end = if j < chars.len() { chars[j].0 } else { s.len() };
            out.push((Tok::Ident(s[pos..end].to_string()), pos));
            k = j;
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), pos));
            k += 1;
        } else {
            return Err(Error::parse(pos, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::parse(self.pos(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn signed_int(&mut self) -> Result<i64> {
        let neg = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.i += 1;
                Ok(if neg { -n } else { n })
            }
            _ => Err(Error::parse(self.pos(), "expected integer exponent")),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let e = if self.eat('(') {
                let n = self.signed_int()?;
                let d = if self.eat('/') { self.signed_int()? } else { 1 };
                self.expect(')')?;
                if d == 0 {
                    return Err(Error::parse(self.pos(), "zero denominator in exponent"));
                }
                Rational64::new(n, d)
            } else {
                Rational64::from_integer(self.signed_int()?)
            };
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.i += 1;
                Ok(Expr::Num(n))
            }
            Some(Tok::Ident(name)) => {
                self.i += 1;
                if self.eat('(') {
                    let mut args = Vec::new();
                    if !self.eat(')') {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(')') {
                                break;
                            }
                            self.expect(',')?;
                        }
                    }
                    Ok(Expr::Call(name, args, pos))
                } else {
                    Ok(Expr::Var(name, pos))
                }
            }
            Some(Tok::Sym('(')) => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(Error::parse(pos, "expected a number, variable or '('")),
        }
    }
}

/// Parses an infix expression.
pub fn parse_expr(s: &str) -> Result<Expr> {
    let toks = lex(s)?;
    let mut lx = Lexer {
        toks,
        i: 0,
        end: s.len(),
    };
    if lx.peek().is_none() {
        return Err(Error::parse(0, "empty expression"));
    }
    let e = lx.expr()?;
    if lx.peek().is_some() {
        return Err(Error::parse(lx.pos(), "trailing input"));
    }
    Ok(e)
}

impl Expr {
    /// Source position of the first variable or call, for error messages.
    pub fn pos(&self) -> usize {
        match self {
            Expr::Var(_, p) | Expr::Call(_, _, p) => *p,
            Expr::Num(_) => 0,
            Expr::Neg(a) | Expr::Pow(a, _) => a.pos(),
            Expr::Add(a, _) | Expr::Sub(a, _) | Expr::Mul(a, _) | Expr::Div(a, _) => a.pos(),
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    if prec(e) < min {
        format!("({e})")
    } else {
        e.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Var(v, _) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "-{}", wrap(a, 3)),
            Expr::Add(a, b) => write!(f, "{} + {}", a, wrap(b, 2)),
            Expr::Sub(a, b) => write!(f, "{} - {}", a, wrap(b, 2)),
            Expr::Mul(a, b) => write!(f, "{}*{}", wrap(a, 2), wrap(b, 3)),
            Expr::Div(a, b) => write!(f, "{}/{}", wrap(a, 2), wrap(b, 3)),
            Expr::Pow(a, e) => {
                if e.is_integer() && *e.numer() >= 0 {
                    write!(f, "{}^{}", wrap(a, 5), e.numer())
                } else {
                    write!(f, "{}^({})", wrap(a, 5), e)
                }
            }
            Expr::Call(n, args, _) => {
                let a: Vec<String> = args.iter().map(|x| x.to_string()).collect();
                write!(f, "{n}({})", a.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in ["x + 3", "inv(x - 1)", "F(x, 3*x)", "3^-1 + 2*3^0 + O(3^5)", "1 + t^(1/2)", "-(x + 1)*y^2"] {
            let e = parse_expr(s).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e.to_string(), again.to_string(), "{s}");
        }
    }

    #[test]
    fn errors_carry_positions() {
        match parse_expr("x + * 2") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("").is_err());
        assert!(parse_expr("(x").is_err());
    }
}
