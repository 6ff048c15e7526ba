//! Generators, extended infinitesimals and the prolonged action.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::symbolic::{parse_expression, Atom, Expr, FuncKind, Head, SymbolTable};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// One infinitesimal generator: a component per zeroth-order coordinate.
#[derive(Clone, PartialEq, Eq)]
pub struct GeneratorCandidate {
    components: Vec<(Atom, Expr)>,
    concrete: bool,
}

impl GeneratorCandidate {
    /// Components as unknown functions of every coordinate.
    pub fn unknown(p: &Problem) -> Self {
        let components = p
            .coordinates()
            .into_iter()
            .map(|c| (c, Expr::atom(p.component_head(c).value())))
            .collect();
        GeneratorCandidate {
            components,
            concrete: false,
        }
    }

    /// The zero generator over the problem's coordinates.
    pub fn zero(p: &Problem) -> Self {
        Self::from_targets(
            p.coordinates()
                .into_iter()
                .map(|c| (c, Expr::zero()))
                .collect(),
        )
    }

    /// Concrete generator from `(coordinate, component)` pairs.
    pub fn from_targets(components: Vec<(Atom, Expr)>) -> Self {
        GeneratorCandidate {
            components,
            concrete: true,
        }
    }

    /// Concrete generator from component names (`xi_x`, `eta_U`, `theta_C`)
    /// or coordinate names; absent components are zero.
    pub fn from_named(p: &Problem, named: &BTreeMap<String, Expr>) -> Result<Self> {
        let mut g = Self::zero(p);
        for (name, e) in named {
            let target = p
                .component_by_name(name)
                .map(|c| c.target)
                .or_else(|| {
                    p.coordinates()
                        .into_iter()
                        .find(|c| &*c.name() == name.as_str())
                })
                .ok_or_else(|| Error::UnknownComponent(name.clone()))?;
            g.set(target, e.clone());
        }
        Ok(g)
    }

    /// Parses component strings; opaque calls like `F1(t)` and free symbolic
    /// constants are accepted.
    pub fn parse_named(p: &Problem, named: &BTreeMap<String, String>) -> Result<Self> {
        let table = Self::table_for(p);
        let mut exprs = BTreeMap::new();
        for (k, v) in named {
            exprs.insert(k.clone(), parse_expression(v, &table)?);
        }
        Self::from_named(p, &exprs)
    }

    /// Symbol table used for generator components: the problem's symbols
    /// plus automatic opaque functions and constants.
    pub fn table_for(p: &Problem) -> SymbolTable {
        let mut t = p.table().clone();
        t.auto_opaque = true;
        t.auto_constants = true;
        t
    }

    pub fn is_concrete(&self) -> bool {
        self.concrete
    }

    pub fn components(&self) -> &[(Atom, Expr)] {
        &self.components
    }

    pub fn get(&self, target: Atom) -> Expr {
        self.components
            .iter()
            .find(|(t, _)| *t == target)
            .map(|(_, e)| e.clone())
            .unwrap_or_default()
    }

    pub fn set(&mut self, target: Atom, e: Expr) {
        match self.components.iter_mut().find(|(t, _)| *t == target) {
            Some(slot) => slot.1 = e,
            None => self.components.push((target, e)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|(_, e)| e.is_zero())
    }

    pub fn scale(&self, c: &Expr) -> Self {
        self.map(|e| e.mul(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (t, e) in &other.components {
            let cur = out.get(*t);
            out.set(*t, cur.add(e));
        }
        out.concrete = self.concrete && other.concrete;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&Expr::int(-1)))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        GeneratorCandidate {
            components: self.components.iter().map(|(t, e)| (*t, f(e))).collect(),
            concrete: self.concrete,
        }
    }

    /// First-order action `g(f) = Σ g^z ∂f/∂z` over the coordinates.
    pub fn act(&self, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (t, c) in &self.components {
            if c.is_zero() {
                continue;
            }
            let d = f.partial(*t);
            if !d.is_zero() {
                acc = acc.add(&c.mul(&d));
            }
        }
        acc
    }

    /// Opaque function atoms appearing in the components.
    pub fn opaque_atoms(&self) -> Vec<Atom> {
        let mut v: Vec<Atom> = self
            .components
            .iter()
            .flat_map(|(_, e)| e.atoms())
            .filter(|a| {
                a.head()
                    .map(|h| h.kind() == FuncKind::Opaque)
                    .unwrap_or(false)
            })
            .collect();
        v.sort_by_key(|a| a.name().to_string());
        v.dedup();
        v
    }
}

impl fmt::Display for GeneratorCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (t, e) in &self.components {
            if e.is_zero() {
                continue;
            }
            let single = e.numer().len() == 1;
            let (neg, c) = if single && e.is_negative_leading() {
                (true, e.neg())
            } else {
                (false, e.clone())
            };
            let sep = match (first, neg) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            first = false;
            if c.as_constant()
                .map(|k| k == crate::symbolic::q(1))
                .unwrap_or(false)
            {
                write!(f, "{}d/d{}", sep, t.name())?;
            } else if single {
                write!(f, "{}{}*d/d{}", sep, c, t.name())?;
            } else {
                write!(f, "{}({})*d/d{}", sep, c, t.name())?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GeneratorCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Total derivative `D_v e` (see [`Problem::total_derivative`]).
pub fn total_derivative(p: &Problem, e: &Expr, v: Atom) -> Expr {
    p.total_derivative(e, v)
}

/// Memoizing evaluator of the prolongation of one generator.
pub struct Prolonger<'a> {
    p: &'a Problem,
    g: &'a GeneratorCandidate,
    memo: HashMap<(Head, Vec<u16>), Expr>,
    dxi: HashMap<(usize, usize), Expr>,
    max_order: usize,
}

impl<'a> Prolonger<'a> {
    pub fn new(p: &'a Problem, g: &'a GeneratorCandidate) -> Self {
        Prolonger {
            p,
            g,
            memo: HashMap::new(),
            dxi: HashMap::new(),
            max_order: p.order(),
        }
    }

    pub fn with_max_order(mut self, k: usize) -> Self {
        self.max_order = k;
        self
    }

    fn d_xi(&mut self, i: usize, j: usize) -> Expr {
        if let Some(e) = self.dxi.get(&(i, j)) {
            return e.clone();
        }
        let xs = self.p.independents();
        let e = self.p.total_derivative(&self.g.get(xs[j]), xs[i]);
        self.dxi.insert((i, j), e.clone());
        e
    }

    /// Extended infinitesimal of the jet `head` differentiated `orders` times.
    pub fn eta(&mut self, head: Head, orders: &[u16]) -> Result<Expr> {
        let total: usize = orders.iter().map(|&o| o as usize).sum();
        if total > self.max_order {
            return Err(Error::OrderBound {
                requested: total,
                bound: self.max_order,
            });
        }
        let key = (head, orders.to_vec());
        if let Some(e) = self.memo.get(&key) {
            return Ok(e.clone());
        }
        let e = if total == 0 {
            self.g.get(head.value())
        } else {
            let i = (0..orders.len()).rev().find(|&i| orders[i] > 0).unwrap();
            let mut prev = orders.to_vec();
            prev[i] -= 1;
            let lower = self.eta(head, &prev)?;
            let xs = self.p.independents().to_vec();
            let mut acc = self.p.total_derivative(&lower, xs[i]);
            for j in 0..xs.len() {
                let dx = self.d_xi(i, j);
                if dx.is_zero() {
                    continue;
                }
                let mut o = prev.clone();
                o[j] += 1;
                acc = acc.sub(&dx.mul(&Expr::atom(head.derivative(&o))));
            }
            acc
        };
        self.memo.insert(key, e.clone());
        Ok(e)
    }

    /// Coefficient of `∂/∂a` in the prolonged generator, if `a` is a coordinate or jet.
    pub fn coefficient(&mut self, a: Atom) -> Result<Option<Expr>> {
        if self.p.independents().contains(&a) {
            return Ok(Some(self.g.get(a)));
        }
        if self.p.is_jet(a) {
            let (h, o) = a.as_func().unwrap();
            return Ok(Some(self.eta(h, &o)?));
        }
        Ok(None)
    }

    /// `X^(k) e`.
    pub fn apply(&mut self, e: &Expr) -> Result<Expr> {
        let mut acc = Expr::zero();
        let mut atoms: Vec<Atom> = e.atoms().into_iter().collect();
        atoms.sort_by_key(|a| a.name().to_string());
        for a in atoms {
            if let Some(c) = self.coefficient(a)? {
                if c.is_zero() {
                    continue;
                }
                acc = acc.add(&c.mul(&e.partial(a)));
            }
        }
        Ok(acc)
    }
}

/// `η^(k)` for the dependent variable `mu` and the multi-index of independents.
pub fn extended_infinitesimal(
    p: &Problem,
    g: &GeneratorCandidate,
    mu: Head,
    multi_index: &[Atom],
) -> Result<Expr> {
    let xs = p.independents();
    let mut orders = vec![0u16; xs.len()];
    for v in multi_index {
        let k = xs.iter().position(|x| x == v).ok_or_else(|| {
            Error::Input(format!("`{}` is not an independent variable", v.name()))
        })?;
        orders[k] += 1;
    }
    Prolonger::new(p, g).eta(mu, &orders)
}

/// Prolonged generator applied to an expression.
pub fn apply_prolonged(p: &Problem, g: &GeneratorCandidate, e: &Expr) -> Result<Expr> {
    Prolonger::new(p, g).apply(e)
}

/// Commutator `[g1, g2]^A = g1(g2^A) - g2(g1^A)`.
pub fn lie_bracket(g1: &GeneratorCandidate, g2: &GeneratorCandidate) -> GeneratorCandidate {
    let mut targets: Vec<Atom> = g1.components.iter().map(|(t, _)| *t).collect();
    for (t, _) in &g2.components {
        if !targets.contains(t) {
            targets.push(*t);
        }
    }
    let comps = targets
        .into_iter()
        .map(|t| (t, g1.act(&g2.get(t)).sub(&g2.act(&g1.get(t)))))
        .collect();
    GeneratorCandidate::from_targets(comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVE: &str = "
independent x t
dependent U
arbitrary C function(U)
equation D[t](U) = C^2*D[x,x](U)
";

    fn gen(p: &Problem, pairs: &[(&str, &str)]) -> GeneratorCandidate {
        let m = pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        GeneratorCandidate::parse_named(p, &m).unwrap()
    }

    fn ex(p: &Problem, s: &str) -> Expr {
        parse_expression(s, p.table()).unwrap()
    }

    #[test]
    fn scaling_prolongations() {
        let p = Problem::parse(WAVE).unwrap();
        let x = Atom::var("x");
        let u = p.dependents()[0];
        let g = gen(&p, &[("xi_x", "x")]);
        assert_eq!(
            extended_infinitesimal(&p, &g, u, &[x]).unwrap(),
            ex(&p, "-D[x](U)")
        );
        let g = gen(&p, &[("eta_U", "U")]);
        assert_eq!(
            extended_infinitesimal(&p, &g, u, &[x]).unwrap(),
            ex(&p, "D[x](U)")
        );
        assert_eq!(
            extended_infinitesimal(&p, &g, u, &[x, x]).unwrap(),
            ex(&p, "D[x,x](U)")
        );
        assert!(matches!(
            extended_infinitesimal(&p, &g, u, &[x, x, x]),
            Err(Error::OrderBound { .. })
        ));
    }

    #[test]
    fn galilean_piece() {
        let p = Problem::parse(WAVE).unwrap();
        let t = Atom::var("t");
        let g = gen(&p, &[("xi_x", "t")]);
        let u = p.dependents()[0];
        assert_eq!(
            extended_infinitesimal(&p, &g, u, &[t]).unwrap(),
            ex(&p, "-D[x](U)")
        );
    }

    #[test]
    fn homogeneity_and_translation() {
        let p = Problem::parse(WAVE).unwrap();
        let g = gen(&p, &[("eta_U", "U")]);
        let r = ex(&p, "D[t](U) - C^2*D[x,x](U)");
        assert_eq!(apply_prolonged(&p, &g, &r).unwrap(), r);
        let g = gen(&p, &[("xi_x", "1")]);
        assert_eq!(
            apply_prolonged(&p, &g, &ex(&p, "x*D[x](U)")).unwrap(),
            ex(&p, "D[x](U)")
        );
    }

    #[test]
    fn brackets() {
        let p = Problem::parse(WAVE).unwrap();
        let dx = gen(&p, &[("xi_x", "1")]);
        let xdx = gen(&p, &[("xi_x", "x")]);
        assert_eq!(lie_bracket(&dx, &xdx), dx);
        let dt = gen(&p, &[("xi_t", "1")]);
        let tdx = gen(&p, &[("xi_x", "t")]);
        assert_eq!(lie_bracket(&dt, &tdx), dx);
    }

    #[test]
    fn unknown_chain_rule() {
        let p = Problem::parse(WAVE).unwrap();
        let x = Atom::var("x");
        let g = GeneratorCandidate::unknown(&p);
        let xi = g.get(x);
        let d = p.total_derivative(&xi, x);
        let s = d.to_string();
        assert!(
            s.contains("D[x](xi_x)")
                && s.contains("D[U](xi_x)*D[x](U)")
                && s.contains("D[C](xi_x)*D[x](C)"),
            "{}",
            s
        );
    }
}
