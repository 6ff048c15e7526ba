//! Sparse multivariate polynomials with exact rational coefficients.

use super::atom::Atom;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn qfrac(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Power product of atoms, sorted by atom id, exponents strictly positive.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(Atom, u32)>) -> Self {
        pairs.retain(|p| p.1 > 0);
        pairs.sort_by_key(|p| p.0);
        let mut out: Vec<(Atom, u32)> = Vec::with_capacity(pairs.len());
        for (a, e) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 += e,
                _ => out.push((a, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn degree_in(&self, a: Atom) -> u32 {
        self.0
            .binary_search_by_key(&a, |p| p.0)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = self.0.clone();
        for &(a, e) in &other.0 {
            let i = out.binary_search_by_key(&a, |p| p.0).ok()?;
            if out[i].1 < e {
                return None;
            }
            out[i].1 -= e;
        }
        out.retain(|p| p.1 > 0);
        Some(Monomial(out))
    }

    /// Removes `a` from the monomial, returning its exponent and the rest.
    pub fn split_off(&self, a: Atom) -> (u32, Monomial) {
        match self.0.binary_search_by_key(&a, |p| p.0) {
            Ok(i) => {
                let mut rest = self.0.clone();
                let (_, e) = rest.remove(i);
                (e, Monomial(rest))
            }
            Err(_) => (0, self.clone()),
        }
    }

    /// Splits into the factors selected by `pred` and the remaining ones.
    pub fn partition(&self, pred: impl Fn(Atom) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|p| pred(p.0));
        (Monomial(a), Monomial(b))
    }

    pub fn pow(&self, n: u32) -> Monomial {
        Monomial(self.0.iter().map(|&(a, e)| (a, e * n)).collect())
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.0.iter().map(|p| p.0)
    }

    /// Name-based sort key, independent of interning order.
    pub fn name_key(&self) -> Vec<(u8, String, u32)> {
        let mut k: Vec<(u8, String, u32)> = self
            .0
            .iter()
            .map(|&(a, e)| (factor_class(a), a.name().to_string(), e))
            .collect();
        k.sort();
        k
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(a, e)| {
                if *e == 1 {
                    a.to_string()
                } else {
                    format!("{}^{}", a, e)
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Display class of a factor: plain variables, then function values, then
/// derivatives.
pub fn factor_class(a: Atom) -> u8 {
    match a.as_func() {
        None => 0,
        Some(_) if a.order() == 0 => 1,
        Some(_) => 2,
    }
}

/// Total order on monomials used for display and normalization: higher
/// degree first, then lexicographic on sorted atom names.
pub fn display_cmp(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    b.degree()
        .cmp(&a.degree())
        .then_with(|| a.name_key().cmp(&b.name_key()))
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn atom(a: Atom) -> Self {
        Poly::term(Q::one(), Monomial::atom(a))
    }

    pub fn term(c: Q, m: Monomial) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(it: impl IntoIterator<Item = (Monomial, Q)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Q)> {
        self.terms.into_iter()
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn coefficient(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.terms.keys().flat_map(|m| m.atoms()).collect()
    }

    pub fn contains(&self, a: Atom) -> bool {
        self.terms.keys().any(|m| m.degree_in(a) > 0)
    }

    pub fn degree_in(&self, a: Atom) -> u32 {
        self.terms.keys().map(|m| m.degree_in(a)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(n, k)| (n.mul(m), k * c)).collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut acc: HashMap<Monomial, Q> = HashMap::with_capacity(self.len() * other.len());
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let c = c1 * c2;
                match acc.get_mut(&m) {
                    Some(v) => *v += c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Poly {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        if n == 0 {
            return Poly::one();
        }
        if self.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return Poly::term(num_traits::pow(c.clone(), n as usize), m.pow(n));
        }
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Applies the derivation defined by its action on atoms.
    pub fn derive(&self, mut on_atom: impl FnMut(Atom) -> Poly) -> Poly {
        let mut cache: HashMap<Atom, Poly> = HashMap::new();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for &(a, e) in m.factors() {
                let da = cache.entry(a).or_insert_with(|| on_atom(a));
                if da.is_zero() {
                    continue;
                }
                let (_, rest) = m.split_off(a);
                let rest = if e > 1 {
                    rest.mul(&Monomial::from_pairs(vec![(a, e - 1)]))
                } else {
                    rest
                };
                let k = c * Q::from_integer(BigInt::from(e));
                for (dm, dc) in &da.terms {
                    out.add_term(rest.mul(dm), &k * dc);
                }
            }
        }
        out
    }

    /// Coefficients with respect to powers of `a`, densely indexed by degree.
    pub fn coefficients_in(&self, a: Atom) -> Vec<Poly> {
        let mut out: Vec<Poly> = vec![Poly::zero(); self.degree_in(a) as usize + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(a);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn from_coefficients(a: Atom, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in coeffs.iter().enumerate() {
            let m = Monomial::from_pairs(vec![(a, e as u32)]);
            for (n, k) in &c.terms {
                out.add_term(n.mul(&m), k.clone());
            }
        }
        out
    }

    /// Groups terms by the part of each monomial selected by `pred`.
    pub fn collect_by(&self, pred: impl Fn(Atom) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (sel, rest) = m.partition(&pred);
            out.entry(sel).or_default().add_term(rest, c.clone());
        }
        out
    }

    /// Leading term under [`display_cmp`].
    pub fn display_leading(&self) -> Option<(&Monomial, &Q)> {
        self.terms.iter().min_by(|a, b| display_cmp(a.0, b.0))
    }

    /// Terms in display order.
    pub fn display_terms(&self) -> Vec<(&Monomial, &Q)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| display_cmp(a.0, b.0));
        v
    }

    /// Exact quotient `self / other`, or `None` if `other` does not divide `self`.
    pub fn div_exact(&self, other: &Poly) -> Option<Poly> {
        assert!(!other.is_zero(), "division by zero polynomial");
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = other.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        if other.len() == 1 {
            let (om, oc) = other.terms.iter().next().unwrap();
            let inv = oc.recip();
            let mut out = Poly::zero();
            for (m, c) in &self.terms {
                out.add_term(m.div(om)?, c * &inv);
            }
            return Some(out);
        }
        let v = other
            .terms
            .keys()
            .next_back()
            .unwrap()
            .atoms()
            .next()
            .unwrap();
        let db = other.degree_in(v) as usize;
        let b = other.coefficients_in(v);
        let mut a = self.coefficients_in(v);
        if a.len() < b.len() {
            return None;
        }
        let lcb = &b[db];
        let mut quot = vec![Poly::zero(); a.len() - db];
        for k in (db..a.len()).rev() {
            if a[k].is_zero() {
                continue;
            }
            let qk = a[k].div_exact(lcb)?;
            for (j, bj) in b.iter().enumerate() {
                if !bj.is_zero() {
                    a[k - db + j] = a[k - db + j].sub(&qk.mul(bj));
                }
            }
            quot[k - db] = qk;
        }
        if a.iter().any(|c| !c.is_zero()) {
            return None;
        }
        Some(Poly::from_coefficients(v, &quot))
    }

    /// Scales so that the leading term under [`display_cmp`] has coefficient 1.
    pub fn monic(&self) -> Poly {
        match self.display_leading() {
            None => Poly::zero(),
            Some((_, c)) => {
                if c.is_one() {
                    self.clone()
                } else {
                    self.scale(&c.recip())
                }
            }
        }
    }

    fn internal_monic(&self) -> Poly {
        match self.terms.iter().next_back() {
            None => Poly::zero(),
            Some((_, c)) => {
                if c.is_one() {
                    self.clone()
                } else {
                    self.scale(&c.recip())
                }
            }
        }
    }

    /// Greatest common divisor over Q, normalized by [`Poly::monic`].
    pub fn gcd(&self, other: &Poly) -> Poly {
        gcd_rec(self, other).monic()
    }

    /// Least common multiple, normalized by [`Poly::monic`].
    pub fn lcm(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let g = gcd_rec(self, other);
        self.div_exact(&g).expect("gcd divides").mul(other).monic()
    }

    /// Evaluates numerically given values for every atom.
    pub fn eval_f64(&self, value: &impl Fn(Atom) -> Option<f64>) -> Option<f64> {
        let mut s = 0.0;
        for (m, c) in &self.terms {
            let mut t = q_to_f64(c);
            for &(a, e) in m.factors() {
                t *= value(a)?.powi(e as i32);
            }
            s += t;
        }
        Some(s)
    }

    /// Multiplies by the least common denominator of the coefficients and
    /// divides by the integer content, making the polynomial primitive over Z
    /// with positive display-leading coefficient.
    pub fn primitive_integer(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        use num_integer::Integer;
        let mut l = BigInt::one();
        for c in self.terms.values() {
            l = l.lcm(c.denom());
        }
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            let n = c.numer() * (&l / c.denom());
            g = g.gcd(&n);
        }
        let mut s = Q::new(l, g);
        if self.display_leading().unwrap().1.is_negative() {
            s = -s;
        }
        self.scale(&s)
    }
}

pub fn q_to_f64(c: &Q) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn content_in(p: &Poly, v: Atom) -> Poly {
    let mut g = Poly::zero();
    for c in p.coefficients_in(v) {
        if c.is_zero() {
            continue;
        }
        g = if g.is_zero() {
            c.internal_monic()
        } else {
            gcd_rec(&g, &c)
        };
        if g.is_constant() {
            return Poly::one();
        }
    }
    g
}

/// `lc(b)^(deg a - deg b + 1) * a mod b`, coefficients in the other atoms.
fn pseudo_rem(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let db = b.len() - 1;
    let lcb = &b[db];
    let mut r: Vec<Poly> = a.to_vec();
    for k in (db..a.len()).rev() {
        let c = r[k].clone();
        for x in r.iter_mut() {
            *x = x.mul(lcb);
        }
        if !c.is_zero() {
            for (j, bj) in b.iter().enumerate() {
                r[k - db + j] = r[k - db + j].sub(&bj.mul(&c));
            }
        }
        r.pop();
    }
    while matches!(r.last(), Some(c) if c.is_zero()) {
        r.pop();
    }
    r
}

fn coefficient_quotient(r: &[Poly], d: &Poly) -> Vec<Poly> {
    r.iter()
        .map(|c| c.div_exact(d).expect("subresultant division is exact"))
        .collect()
}

/// Exact value with every atom replaced by a rational.
fn eval_q(p: &Poly, value: &impl Fn(Atom) -> Q) -> Q {
    let mut s = Q::zero();
    for (m, c) in &p.terms {
        let mut t = c.clone();
        for &(a, e) in m.factors() {
            t *= num_traits::pow(value(a), e as usize);
        }
        s += t;
    }
    s
}

/// Degree of the gcd of two dense univariate polynomials over Q.
fn univariate_gcd_degree(mut a: Vec<Q>, mut b: Vec<Q>) -> usize {
    let trim = |v: &mut Vec<Q>| {
        while matches!(v.last(), Some(c) if c.is_zero()) {
            v.pop();
        }
    };
    trim(&mut a);
    trim(&mut b);
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    while !b.is_empty() {
        let lb = b.last().unwrap().clone();
        while a.len() >= b.len() {
            let f = a.last().unwrap() / &lb;
            let shift = a.len() - b.len();
            for (j, bj) in b.iter().enumerate() {
                let d = &f * bj;
                a[shift + j] -= d;
            }
            a.pop();
            trim(&mut a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

/// Proves `gcd(a, b) = 1` through univariate images: for each shared atom
/// `v`, the other atoms are fixed at integers keeping both leading
/// coefficients in `v` nonzero; coprime images bound the gcd's degree in `v`
/// by zero. `false` means undecided.
fn coprime_by_images(a: &Poly, b: &Poly) -> bool {
    let vb = b.atoms();
    for v in a.atoms().into_iter().filter(|v| vb.contains(v)) {
        let (ca, cb) = (a.coefficients_in(v), b.coefficients_in(v));
        let mut decided = false;
        for attempt in 0..4u64 {
            let value = |x: Atom| -> Q {
                let h = (x.raw() as u64)
                    .wrapping_mul(2654435761)
                    .wrapping_add(attempt * 40503);
                Q::from_integer(BigInt::from(2 + (h % 89) as i64))
            };
            let ia: Vec<Q> = ca.iter().map(|c| eval_q(c, &value)).collect();
            let ib: Vec<Q> = cb.iter().map(|c| eval_q(c, &value)).collect();
            if ia.last().map(|c| c.is_zero()).unwrap_or(true)
                || ib.last().map(|c| c.is_zero()).unwrap_or(true)
            {
                continue;
            }
            if univariate_gcd_degree(ia, ib) > 0 {
                return false;
            }
            decided = true;
            break;
        }
        if !decided {
            return false;
        }
    }
    true
}

fn gcd_rec(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.internal_monic();
    }
    if b.is_zero() {
        return a.internal_monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.internal_monic();
    }
    if a.len() > 1 && b.len() > 1 && coprime_by_images(a, b) {
        return Poly::one();
    }
    let va = a.atoms();
    let vb = b.atoms();
    if let Some(&v) = va.difference(&vb).next() {
        let mut g = b.internal_monic();
        for c in a.coefficients_in(v) {
            if c.is_zero() {
                continue;
            }
            g = gcd_rec(&g, &c);
            if g.is_constant() {
                return Poly::one();
            }
        }
        return g;
    }
    if vb.difference(&va).next().is_some() {
        return gcd_rec(b, a);
    }
    // Monomial content.
    if a.len() == 1 || b.len() == 1 {
        let (single, other) = if a.len() == 1 { (a, b) } else { (b, a) };
        let m = single.terms.keys().next().unwrap();
        let mut pairs = Vec::new();
        for &(x, e) in m.factors() {
            let min = other
                .terms
                .keys()
                .map(|n| n.degree_in(x))
                .min()
                .unwrap_or(0);
            pairs.push((x, e.min(min)));
        }
        return Poly::term(Q::one(), Monomial::from_pairs(pairs));
    }
    let v = *va
        .iter()
        .min_by_key(|x| (a.degree_in(**x).max(b.degree_in(**x)), x.raw()))
        .unwrap();
    let ca = content_in(a, v);
    let cb = content_in(b, v);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let c = gcd_rec(&ca, &cb);
    let (mut r0, mut r1) = (pa.coefficients_in(v), pb.coefficients_in(v));
    if r0.len() < r1.len() {
        std::mem::swap(&mut r0, &mut r1);
    }
    // subresultant remainder sequence
    let (mut g, mut h) = (Poly::one(), Poly::one());
    loop {
        let delta = (r0.len() - r1.len()) as u32;
        let r = pseudo_rem(&r0, &r1);
        if r.is_empty() {
            break;
        }
        if r.len() == 1 {
            return c;
        }
        let divisor = g.mul(&h.pow(delta));
        r0 = std::mem::replace(&mut r1, coefficient_quotient(&r, &divisor));
        g = r0.last().unwrap().clone();
        h = if delta == 0 {
            h
        } else {
            g.pow(delta)
                .div_exact(&h.pow(delta - 1))
                .expect("subresultant division is exact")
        };
    }
    let g = Poly::from_coefficients(v, &r1);
    let cg = content_in(&g, v);
    c.mul(&g.div_exact(&cg).expect("content divides"))
        .internal_monic()
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .display_terms()
            .into_iter()
            .map(|(m, c)| format!("{}*{:?}", c, m))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Poly {
        Poly::atom(Atom::var(n))
    }

    #[test]
    fn exact_division_and_gcd() {
        let x = v("px");
        let y = v("py");
        let a = x.mul(&x).sub(&Poly::one()); // x^2 - 1
        let b = x.sub(&Poly::one());
        assert_eq!(a.div_exact(&b).unwrap(), x.add(&Poly::one()));
        assert!(b.div_exact(&x.add(&y)).is_none());
        let g = a.mul(&y).gcd(&b.mul(&y.add(&Poly::one())));
        assert_eq!(g, b.monic());
    }

    #[test]
    fn gcd_multivariate_common_factor() {
        let x = v("gx");
        let y = v("gy");
        let z = v("gz");
        let f = x.mul(&y).add(&z.pow(2)).add(&Poly::one());
        let a = f.mul(&x.add(&y)).mul(&z);
        let b = f.mul(&x.sub(&y).pow(2));
        assert_eq!(a.gcd(&b), f.monic());
        let l = a.lcm(&b);
        assert!(l.div_exact(&a).is_some() && l.div_exact(&b).is_some());
    }

    #[test]
    fn gcd_with_repeated_factors() {
        let x = v("hx");
        let y = v("hy");
        let s = x.add(&y);
        let a = s.pow(3).mul(&x.sub(&y));
        let b = s.pow(2).mul(&x.add(&y.scale(&q(2))).add(&Poly::one()));
        assert_eq!(a.gcd(&b), s.pow(2).monic());
        let d = x
            .mul(&y.pow(2))
            .sub(&x.pow(2).scale(&qfrac(1, 4)))
            .add(&Poly::constant(qfrac(-3, 4)));
        assert!(coprime_by_images(&d, &d.add(&Poly::one())));
        assert!(!coprime_by_images(&d.mul(&x.add(&Poly::one())), &d));
        assert_eq!(
            univariate_gcd_degree(vec![q(-1), q(0), q(1)], vec![q(1), q(1)]),
            1
        );
    }

    #[test]
    fn primitive_integer_form() {
        let x = v("ix");
        let p = x.scale(&qfrac(2, 3)).add(&Poly::constant(qfrac(-4, 9)));
        let pi = p.primitive_integer();
        assert_eq!(pi, x.scale(&q(3)).sub(&Poly::constant(q(2))));
    }
}
