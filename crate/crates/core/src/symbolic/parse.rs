//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ['-'] base ('^' ['-'] int)?
//! base   := rational | ident | ident ('\'' | '′')* '(' ident ')' ('\'' | '′')*
//!         | 'D[' ident (',' ident)* '](' ident ')' | 'exp(' expr ')' | '(' expr ')'
//! ```

use super::atom::{Atom, FuncKind, Head};
use super::expr::{exp_atom, Expr};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use std::collections::BTreeMap;

/// What an identifier denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    Independent(Atom),
    /// A dependent variable (original or promoted arbitrary element).
    Dependent(Head),
    /// An unknown infinitesimal component.
    Component(Head),
    Opaque(Head),
    /// A plain symbolic constant (group parameter, ansatz coefficient, ...).
    Constant(Atom),
}

#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    map: BTreeMap<String, Symbol>,
    /// Accept undeclared `F(t)` calls as opaque functions.
    pub auto_opaque: bool,
    /// Accept undeclared plain identifiers as symbolic constants.
    pub auto_constants: bool,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, sym: Symbol) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(Error::Duplicate(name.to_string()));
        }
        self.map.insert(name.to_string(), sym);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.map.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = (&String, &Symbol)> {
        self.map.iter()
    }

    /// Resolves an identifier used as a value.
    fn value_of(&self, name: &str) -> Result<Atom> {
        match self.get(name) {
            Some(Symbol::Independent(a)) | Some(Symbol::Constant(a)) => Ok(a),
            Some(Symbol::Dependent(h)) | Some(Symbol::Component(h)) => Ok(h.value()),
            Some(Symbol::Opaque(h)) => Err(Error::Input(format!(
                "opaque function `{}` must be applied to its argument",
                h.name()
            ))),
            None if self.auto_constants && name != "D" => Ok(Atom::var(name)),
            None => Err(Error::Undeclared(name.to_string())),
        }
    }
}

pub fn parse_expression(text: &str, table: &SymbolTable) -> Result<Expr> {
    let mut p = Parser {
        src: text.chars().collect(),
        pos: 0,
        table,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: Vec<char>,
    pos: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c == '#' {
                while self.pos < self.src.len() && self.src[self.pos] != '\n' {
                    self.pos += 1;
                }
            } else if c.is_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_alphanumeric() || c == '_' {
                if self.pos == start && c.is_ascii_digit() {
                    break;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected identifier"));
        }
        Ok(self.src[start..self.pos].iter().collect())
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s: String = self.src[start..self.pos].iter().collect();
        Ok(s.parse().unwrap())
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.factor()?);
            } else if self.eat('/') {
                let at = self.pos;
                let d = self.factor()?;
                acc = acc.div(&d).map_err(|_| Error::Parse {
                    pos: at,
                    msg: "division by zero".into(),
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(self.factor()?.neg());
        }
        let b = self.base()?;
        if self.eat('^') {
            let neg = self.eat('-');
            let at = self.pos;
            let n = self.integer()?;
            let n: i32 = i32::try_from(n).map_err(|_| self.err("exponent too large"))?;
            let n = if neg { -n } else { n };
            return b.pow(n).map_err(|_| Error::Parse {
                pos: at,
                msg: "zero raised to a negative power".into(),
            });
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(Expr::rational(n.into()))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                let name = self.ident()?;
                if name == "D" && self.src.get(self.pos) == Some(&'[') {
                    return self.derivative(start);
                }
                if name == "exp"
                    && self.src.get(self.pos) == Some(&'(')
                    && self.table.get("exp").is_none()
                {
                    return self.exponential();
                }
                let primes = self.src[self.pos..]
                    .iter()
                    .take_while(|c| **c == '\'' || **c == '′')
                    .count();
                if self.src.get(self.pos + primes) == Some(&'(') {
                    self.pos += primes;
                    return self.call(&name, start, primes as u16);
                }
                let a = self.table.value_of(&name).map_err(|e| match e {
                    Error::Undeclared(_) => e,
                    other => other,
                })?;
                Ok(Expr::atom(a))
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn derivative(&mut self, start: usize) -> Result<Expr> {
        self.pos += 1; // '['
        let mut index = vec![self.ident()?];
        while self.eat(',') {
            index.push(self.ident()?);
        }
        self.expect(']')?;
        self.expect('(')?;
        let target = self.ident()?;
        self.expect(')')?;
        let idx: Vec<Atom> = index
            .iter()
            .map(|n| self.table.value_of(n))
            .collect::<Result<_>>()?;
        let head = match self.table.get(&target) {
            Some(Symbol::Dependent(h)) | Some(Symbol::Component(h)) | Some(Symbol::Opaque(h)) => h,
            Some(Symbol::Independent(_)) | Some(Symbol::Constant(_)) => {
                return Err(Error::DerivativeOfIndependent(target))
            }
            None if self.table.auto_constants => {
                return Err(Error::DerivativeOfIndependent(target))
            }
            None => return Err(Error::Undeclared(target)),
        };
        let _ = start;
        match head.derivative_by(&idx) {
            Some(a) => Ok(Expr::atom(a)),
            None => {
                let bad = index
                    .iter()
                    .zip(&idx)
                    .find(|(_, a)| !head.args().contains(a))
                    .map(|(n, _)| n.clone())
                    .unwrap_or_default();
                Err(Error::NotAnArgument {
                    func: head.name(),
                    var: bad,
                })
            }
        }
    }

    /// `exp(r*s)` with rational `r` and a plain symbol `s`.
    fn exponential(&mut self) -> Result<Expr> {
        self.pos += 1; // '('
        let inner = self.expr()?;
        self.expect(')')?;
        let lin = inner.is_polynomial().then(|| {
            inner
                .numer()
                .terms()
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect::<Vec<_>>()
        });
        match lin.as_deref() {
            Some([(m, c)]) if m.degree() == 1 && m.factors()[0].0.is_var() => {
                Ok(Expr::atom(exp_atom(m.factors()[0].0, c)))
            }
            _ => Err(self.err("exp() takes a rational multiple of a symbol")),
        }
    }

    fn call(&mut self, name: &str, _start: usize, lead_primes: u16) -> Result<Expr> {
        self.pos += 1; // '('
        let arg_name = self.ident()?;
        self.expect(')')?;
        let arg = self.table.value_of(&arg_name)?;
        let head = match self.table.get(name) {
            Some(Symbol::Opaque(h)) => {
                if h.args()[0] != arg {
                    return Err(Error::NotAnArgument {
                        func: name.to_string(),
                        var: arg_name,
                    });
                }
                h
            }
            None if self.table.auto_opaque => Head::new(name, &[arg], FuncKind::Opaque),
            Some(_) => {
                return Err(self.err(&format!("`{}` is not a function", name)));
            }
            None => return Err(Error::Undeclared(name.to_string())),
        };
        let mut order = lead_primes;
        while self.pos < self.src.len() && (self.src[self.pos] == '\'' || self.src[self.pos] == '′')
        {
            order += 1;
            self.pos += 1;
        }
        Ok(Expr::atom(head.derivative(&[order])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SymbolTable {
        let mut t = SymbolTable::new();
        let x = Atom::var("x");
        let tt = Atom::var("t");
        t.insert("x", Symbol::Independent(x)).unwrap();
        t.insert("t", Symbol::Independent(tt)).unwrap();
        for n in ["U", "Q"] {
            t.insert(
                n,
                Symbol::Dependent(Head::new(n, &[x, tt], FuncKind::Dependent)),
            )
            .unwrap();
        }
        t
    }

    #[test]
    fn jets_and_products() {
        let t = table();
        let e = parse_expression("U*D[x](U) + Q*D[x,x,x](U)", &t).unwrap();
        assert_eq!(e.numer().len(), 2);
        assert_eq!(e.to_string(), "Q*D[x,x,x](U) + U*D[x](U)");
        let same = parse_expression("D[x,x,x](U)*Q + D[x](U)*U # comment", &t).unwrap();
        assert_eq!(e, same);
    }

    #[test]
    fn rational_cancellation() {
        let t = table();
        let e = parse_expression("(U^2 - 1)/(U - 1)", &t).unwrap();
        assert_eq!(e, parse_expression("U + 1", &t).unwrap());
    }

    #[test]
    fn derivative_of_independent_rejected() {
        let t = table();
        assert_eq!(
            parse_expression("D[x](x)", &t),
            Err(Error::DerivativeOfIndependent("x".into()))
        );
        assert!(matches!(
            parse_expression("V + 1", &t),
            Err(Error::Undeclared(_))
        ));
        assert!(matches!(
            parse_expression("U +", &t),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn opaque_with_primes() {
        let mut t = table();
        t.auto_opaque = true;
        let e = parse_expression("F1(t)'' - F1′′(t)", &t).unwrap();
        assert!(e.is_zero());
        let f = parse_expression("F1(t)'", &t).unwrap();
        assert_eq!(f.to_string(), "F1(t)'");
        assert_eq!(parse_expression(&f.to_string(), &t).unwrap(), f);
    }

    #[test]
    fn display_round_trip() {
        let t = table();
        for s in [
            "3/2*x - U^2/(1 + x^2)",
            "-(x + U)/(2*t)",
            "U/(t*x)",
            "1/(x^2)",
            "(x - 1)^-2",
        ] {
            let e = parse_expression(s, &t).unwrap();
            let back = parse_expression(&e.to_string(), &t).unwrap();
            assert_eq!(e, back, "{} -> {}", s, e);
        }
    }
}
