//! Canonical rational expressions: a numerator polynomial over a single
//! cleared denominator.

use super::atom::{bump, Atom, FuncKind};
use super::poly::{factor_class, q, Monomial, Poly, Q};
use crate::error::{Error, Result};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

/// Immutable normalized expression `num / den`.
///
/// Invariants: `gcd(num, den) = 1`, `den` is nonzero with display-leading
/// coefficient 1, and `num = 0` implies `den = 1`. Structural equality is
/// therefore mathematical equality of rational functions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr {
    num: Poly,
    den: Poly,
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl Expr {
    pub fn zero() -> Expr {
        Expr {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(q(n))
    }

    pub fn rational(c: Q) -> Expr {
        Expr::poly(Poly::constant(c))
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::poly(Poly::atom(a))
    }

    pub fn poly(p: Poly) -> Expr {
        Expr {
            num: p,
            den: Poly::one(),
        }
    }

    /// Builds `num / den` in canonical form.
    pub fn ratio(num: Poly, den: Poly) -> Result<Expr> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Expr::normalize(num, den))
    }

    fn normalize(num: Poly, den: Poly) -> Expr {
        if num.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = den.as_constant() {
            return Expr::poly(if c.is_one() {
                num
            } else {
                num.scale(&c.recip())
            });
        }
        let g = num.gcd(&den);
        let (num, den) = if g.is_constant() {
            (num, den)
        } else {
            (
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            )
        };
        if let Some(c) = den.as_constant() {
            return Expr::poly(num.scale(&c.recip()));
        }
        let lc = den.display_leading().unwrap().1.clone();
        if lc.is_one() {
            Expr { num, den }
        } else {
            let s = lc.recip();
            Expr {
                num: num.scale(&s),
                den: den.scale(&s),
            }
        }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.is_polynomial() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_atom(&self) -> Option<Atom> {
        if !self.is_polynomial() || self.num.len() != 1 {
            return None;
        }
        let (m, c) = self.num.terms().next().unwrap();
        match m.factors() {
            [(a, 1)] if c.is_one() => Some(*a),
            _ => None,
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut s = self.num.atoms();
        s.extend(self.den.atoms());
        s
    }

    pub fn contains(&self, a: Atom) -> bool {
        self.num.contains(a) || self.den.contains(a)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        if self.den == other.den {
            let num = self.num.add(&other.num);
            if self.den.is_one() {
                return Expr::poly(num);
            }
            return Expr::normalize(num, self.den.clone());
        }
        if self.den.is_one() {
            return Expr::normalize(self.num.mul(&other.den).add(&other.num), other.den.clone());
        }
        if other.den.is_one() {
            return Expr::normalize(self.num.add(&other.num.mul(&self.den)), self.den.clone());
        }
        let g = self.den.gcd(&other.den);
        let a = self.den.div_exact(&g).unwrap();
        let b = other.den.div_exact(&g).unwrap();
        let num = self.num.mul(&b).add(&other.num.mul(&a));
        Expr::normalize(num, self.den.mul(&b))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, c: &Q) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if self.den.is_one() && other.den.is_one() {
            return Expr::poly(self.num.mul(&other.num));
        }
        let g1 = self.num.gcd(&other.den);
        let g2 = other.num.gcd(&self.den);
        let n1 = self.num.div_exact(&g1).unwrap();
        let d2 = other.den.div_exact(&g1).unwrap();
        let n2 = other.num.div_exact(&g2).unwrap();
        let d1 = self.den.div_exact(&g2).unwrap();
        Expr::normalize(n1.mul(&n2), d1.mul(&d2))
    }

    pub fn recip(&self) -> Result<Expr> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Expr::normalize(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn pow(&self, n: i32) -> Result<Expr> {
        if n >= 0 {
            let n = n as u32;
            Ok(Expr {
                num: self.num.pow(n),
                den: self.den.pow(n),
            }
            .renormalized())
        } else {
            self.recip()?.pow(-n)
        }
    }

    fn renormalized(self) -> Expr {
        if self.den.is_one() {
            return self;
        }
        Expr::normalize(self.num, self.den)
    }

    /// Applies a derivation given by its action on atoms (quotient rule).
    pub fn derive(&self, mut on_atom: impl FnMut(Atom) -> Poly) -> Expr {
        let mut cache: HashMap<Atom, Poly> = HashMap::new();
        let mut f = |a: Atom| cache.entry(a).or_insert_with(|| on_atom(a)).clone();
        let dn = self.num.derive(&mut f);
        if self.den.is_one() {
            return Expr::poly(dn);
        }
        let dd = self.den.derive(&mut f);
        if dd.is_zero() {
            return Expr::normalize(dn, self.den.clone());
        }
        // common factors of d and d' cancel before forming n'd - nd' over d^2
        let g = self.den.gcd(&dd);
        let (dg, ddg) = if g.is_constant() {
            (self.den.clone(), dd)
        } else {
            (
                self.den.div_exact(&g).expect("gcd divides"),
                dd.div_exact(&g).expect("gcd divides"),
            )
        };
        let num = dn.mul(&dg).sub(&self.num.mul(&ddg));
        Expr::normalize(num, self.den.mul(&dg))
    }

    /// Formal partial derivative with jets held as independent coordinates.
    /// Unknown and opaque functions differentiate through their arguments.
    pub fn partial(&self, s: Atom) -> Expr {
        self.derive(|a| partial_of_atom(a, s))
    }

    /// Simultaneous substitution of atoms by expressions.
    pub fn substitute(&self, rules: &HashMap<Atom, Expr>) -> Result<Expr> {
        if rules.is_empty() {
            return Ok(self.clone());
        }
        let n = substitute_poly(&self.num, rules);
        if self.den.is_one() {
            return Ok(n);
        }
        let d = substitute_poly(&self.den, rules);
        n.div(&d)
    }

    /// Numeric value given values for every atom; `None` if some atom is
    /// unassigned. A vanishing denominator yields an infinite or NaN value.
    pub fn eval_f64(&self, value: &impl Fn(Atom) -> Option<f64>) -> Option<f64> {
        let n = self.num.eval_f64(value)?;
        let d = self.den.eval_f64(value)?;
        Some(n / d)
    }

    /// Splits the numerator by monomials in the atoms selected by `split`.
    /// The denominator must be free of split atoms; it is discarded.
    pub fn collect(&self, split: impl Fn(Atom) -> bool) -> Result<BTreeMap<Monomial, Poly>> {
        if self.den.atoms().into_iter().any(&split) {
            return Err(Error::NotPolynomial(self.to_string()));
        }
        Ok(self.num.collect_by(split))
    }

    /// Degree of the numerator jointly in the selected atoms.
    pub fn degree_in_set(&self, pred: impl Fn(Atom) -> bool) -> u32 {
        self.num
            .terms()
            .map(|(m, _)| m.factors().iter().filter(|p| pred(p.0)).map(|p| p.1).sum())
            .max()
            .unwrap_or(0)
    }

    /// Sign-normalized numerator: primitive over Z with positive leading term.
    /// Useful for comparing equations up to a nonzero factor.
    pub fn normalized_numerator(&self) -> Poly {
        self.num.primitive_integer()
    }

    pub fn is_negative_leading(&self) -> bool {
        self.num
            .display_leading()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false)
    }
}

/// Plain atom standing for `exp(rate*s)`. The name is its own parseable
/// display, so `exp(1/2*s)` prints and re-parses unchanged.
pub fn exp_atom(s: Atom, rate: &Q) -> Atom {
    Atom::var(&format!("exp({})", Expr::atom(s).scale(rate)))
}

/// Action of `∂/∂s` on a single atom.
pub fn partial_of_atom(a: Atom, s: Atom) -> Poly {
    if a == s {
        return Poly::one();
    }
    match a.as_func() {
        Some((head, _)) if head.kind() != FuncKind::Dependent => match bump(a, s) {
            Some(b) => Poly::atom(b),
            None => Poly::zero(),
        },
        _ => Poly::zero(),
    }
}

fn substitute_poly(p: &Poly, rules: &HashMap<Atom, Expr>) -> Expr {
    let all_poly = rules.values().all(|e| e.is_polynomial());
    let mut pow_cache: HashMap<(Atom, u32), Expr> = HashMap::new();
    let power = |a: Atom, e: u32, cache: &mut HashMap<(Atom, u32), Expr>| -> Expr {
        cache
            .entry((a, e))
            .or_insert_with(|| rules[&a].pow(e as i32).expect("nonnegative power"))
            .clone()
    };
    if all_poly {
        let mut out = Poly::zero();
        for (m, c) in p.terms() {
            let mut kept = Vec::new();
            let mut val = Poly::constant(c.clone());
            for &(a, e) in m.factors() {
                if rules.contains_key(&a) {
                    val = val.mul(&power(a, e, &mut pow_cache).num);
                } else {
                    kept.push((a, e));
                }
            }
            let km = Monomial::from_pairs(kept);
            out.add_assign(&val.mul_monomial(&km, &Q::one()));
        }
        return Expr::poly(out);
    }
    // Common denominator: product of rule denominators at their maximal power.
    let mut max_pow: HashMap<Atom, u32> = HashMap::new();
    for (m, _) in p.terms() {
        for &(a, e) in m.factors() {
            if let Some(r) = rules.get(&a) {
                if !r.is_polynomial() {
                    let slot = max_pow.entry(a).or_insert(0);
                    *slot = (*slot).max(e);
                }
            }
        }
    }
    let mut num = Poly::zero();
    for (m, c) in p.terms() {
        let mut kept = Vec::new();
        let mut val = Poly::constant(c.clone());
        let mut used: HashMap<Atom, u32> = HashMap::new();
        for &(a, e) in m.factors() {
            if rules.contains_key(&a) {
                let pw = power(a, e, &mut pow_cache);
                val = val.mul(&pw.num);
                if !rules[&a].is_polynomial() {
                    used.insert(a, e);
                }
            } else {
                kept.push((a, e));
            }
        }
        for (&a, &mx) in &max_pow {
            let have = used.get(&a).copied().unwrap_or(0);
            if mx > have {
                val = val.mul(&rules[&a].den.pow(mx - have));
            }
        }
        num.add_assign(&val.mul_monomial(&Monomial::from_pairs(kept), &Q::one()));
    }
    let mut den = Poly::one();
    for (&a, &mx) in &max_pow {
        den = den.mul(&rules[&a].den.pow(mx));
    }
    Expr::normalize(num, den)
}

fn fmt_poly(p: &Poly, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    for (i, (m, c)) in p.display_terms().into_iter().enumerate() {
        let neg = c.is_negative();
        if i == 0 {
            if neg {
                write!(f, "-")?;
            }
        } else {
            write!(f, "{}", if neg { " - " } else { " + " })?;
        }
        let a = c.abs();
        let factors = {
            let mut fs: Vec<(u8, String, u32)> = m
                .factors()
                .iter()
                .map(|(at, e)| (factor_class(*at), at.name().to_string(), *e))
                .collect();
            fs.sort();
            fs
        };
        let body: Vec<String> = factors
            .iter()
            .map(|(_, n, e)| {
                if *e == 1 {
                    n.clone()
                } else {
                    format!("{}^{}", n, e)
                }
            })
            .collect();
        if body.is_empty() {
            write!(f, "{}", a)?;
        } else if a.is_one() {
            write!(f, "{}", body.join("*"))?;
        } else {
            write!(f, "{}*{}", a, body.join("*"))?;
        }
    }
    Ok(())
}

struct PolyDisplay<'a>(&'a Poly);

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_poly(self.0, f)
    }
}

fn needs_parens(p: &Poly) -> bool {
    if p.len() > 1 {
        return true;
    }
    match p.terms().next() {
        Some((m, c)) => {
            let nfactors = m.factors().len();
            (!c.is_one() && nfactors > 0)
                || nfactors > 1
                || m.factors().iter().any(|f| f.1 > 1)
                || !c.denom().is_one()
        }
        None => false,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return fmt_poly(&self.num, f);
        }
        let n = PolyDisplay(&self.num);
        let d = PolyDisplay(&self.den);
        if self.num.len() > 1 {
            write!(f, "({})", n)?;
        } else {
            write!(f, "{}", n)?;
        }
        if needs_parens(&self.den) {
            write!(f, "/({})", d)
        } else {
            write!(f, "/{}", d)
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl From<Atom> for Expr {
    fn from(a: Atom) -> Self {
        Expr::atom(a)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Q> for Expr {
    fn from(c: Q) -> Self {
        Expr::rational(c)
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Sum of expressions with a single final normalization where possible.
pub fn sum<'a>(items: impl IntoIterator<Item = &'a Expr>) -> Expr {
    let mut poly = Poly::zero();
    let mut rest = Expr::zero();
    for e in items {
        if e.is_polynomial() {
            poly.add_assign(&e.num);
        } else {
            rest = rest.add(e);
        }
    }
    rest.add(&Expr::poly(poly))
}
