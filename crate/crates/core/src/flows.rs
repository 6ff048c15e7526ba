//! Lie's theorem ODEs `d z*/dε = g(z*)`, `z*(0) = z`, and their integration
//! to one-parameter groups.
//!
//! Closed forms are found by a sequential scan: each equation must be linear
//! in its own variable once the variables solved earlier are substituted, or
//! of the form `dX/dε = c X^2`. Exponentials `exp(r ε)` with rational `r` are
//! written as integer powers of a single symbol `exp(ε/L)`.

use crate::error::{Error, Result};
use crate::linalg::{integer_row, solve};
use crate::prolong::GeneratorCandidate;
use crate::symbolic::{exp_atom, Atom, Expr, Monomial, Poly, Q};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use ode_solvers::{DVector, Dop853, OutputType, System};
use serde::Serialize;
use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};

/// `d target*/dε = rhs`, with `rhs` written in the unstarred coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LieOde {
    pub target: Atom,
    pub rhs: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solvability {
    ClosedForm,
    NumericOnly,
}

#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub param: Atom,
    pub odes: Vec<LieOde>,
    /// Denominator `L` of the exponential symbol `exp(ε/L)`, if one is used.
    pub exp_denominator: Option<u64>,
    /// Closed form per coordinate, in ODE order.
    pub closed: Option<Vec<(Atom, Expr)>>,
    /// Order in which the closed forms were found.
    pub order: Vec<Atom>,
}

pub fn lie_odes(g: &GeneratorCandidate) -> Result<Vec<LieOde>> {
    if let Some(a) = g.opaque_atoms().first() {
        return Err(Error::Input(format!(
            "flow of a generator with opaque function `{}`",
            a
        )));
    }
    Ok(g.components()
        .iter()
        .map(|(t, e)| LieOde {
            target: *t,
            rhs: e.clone(),
        })
        .collect())
}

struct Sequential {
    param: Atom,
    l: u64,
    solved: HashMap<Atom, Expr>,
}

impl Sequential {
    fn w(&self) -> Option<Atom> {
        (self.l > 0).then(|| exp_atom(self.param, &Q::new(BigInt::one(), BigInt::from(self.l))))
    }

    /// Exponent `k` with `exp(r ε) = w^k`, widening `L` if needed.
    fn exponent_of(&mut self, r: &Q) -> Option<i32> {
        let den = r.denom().to_u64()?;
        let new_l = if self.l == 0 { den } else { self.l.lcm(&den) };
        if new_l != self.l && self.l != 0 {
            let old = self.w().unwrap();
            let f = (new_l / self.l) as i32;
            self.l = new_l;
            let rule = HashMap::from([(old, Expr::atom(self.w().unwrap()).pow(f).ok()?)]);
            for e in self.solved.values_mut() {
                *e = e.substitute(&rule).ok()?;
            }
        }
        self.l = new_l;
        (r * Q::from_integer(BigInt::from(self.l)))
            .to_integer()
            .to_i32()
    }

    fn mentions_w(&self, e: &Expr) -> bool {
        self.w().map(|w| e.contains(w)).unwrap_or(false)
    }

    /// `μ` with `μ' = b μ`, `μ(0) = 1`.
    fn integrating_factor(&mut self, b: &Expr) -> Option<Expr> {
        if b.is_zero() {
            return Some(Expr::one());
        }
        if self.mentions_w(b) {
            return None;
        }
        if !b.contains(self.param) {
            let r = b.as_constant()?;
            let k = self.exponent_of(&r)?;
            return Expr::atom(self.w()?).pow(k).ok();
        }
        // b = m D'/D + r0
        let n = b.numer();
        let d = b.denom();
        let dp = d.derive(|a| {
            if a == self.param {
                Poly::one()
            } else {
                Poly::zero()
            }
        });
        let mut monos: Vec<&Monomial> = n
            .terms()
            .chain(d.terms())
            .chain(dp.terms())
            .map(|(m, _)| m)
            .collect();
        monos.sort();
        monos.dedup();
        let rows = monos.iter().map(|m| {
            integer_row([
                (0, dp.coefficient(m)),
                (1, d.coefficient(m)),
                (2, n.coefficient(m)),
            ])
        });
        let sol = solve(rows, 2)?;
        if !sol[0].is_integer() {
            return None;
        }
        let m = sol[0].to_integer().to_i32()?;
        let de = Expr::poly(d.clone());
        let d0 = de
            .substitute(&HashMap::from([(self.param, Expr::zero())]))
            .ok()?;
        if d0.is_zero() {
            return None;
        }
        let mut mu = de.div(&d0).ok()?.pow(m).ok()?;
        if !sol[1].is_zero() {
            let k = self.exponent_of(&sol[1])?;
            mu = mu.mul(&Expr::atom(self.w()?).pow(k).ok()?);
        }
        Some(mu)
    }

    /// `∫_0^ε s^j exp(n s/L) ds`.
    fn monomial_integral(&self, j: u32, n: i64) -> Option<Expr> {
        let eps = Expr::atom(self.param);
        if n == 0 {
            return Some(
                eps.pow(j as i32 + 1)
                    .ok()?
                    .scale(&Q::new(BigInt::one(), BigInt::from(j + 1))),
            );
        }
        let lam = Q::new(BigInt::from(n), BigInt::from(self.l));
        let mut sum = Expr::zero();
        let mut fall = Q::one(); // j!/(j-i)!
        let mut lam_pow = lam.clone();
        for i in 0..=j {
            let sign = if i % 2 == 0 { Q::one() } else { -Q::one() };
            let c = sign * &fall / &lam_pow;
            sum = sum.add(&eps.pow((j - i) as i32).ok()?.scale(&c));
            fall *= Q::from_integer(BigInt::from(j - i));
            lam_pow *= &lam;
        }
        let wn = Expr::atom(self.w()?).pow(n as i32).ok()?;
        let mut tail = Q::one();
        for k in 1..=j {
            tail *= Q::from_integer(BigInt::from(k));
        }
        let sign = if j.is_multiple_of(2) { Q::one() } else { -Q::one() };
        let lam_j1 = num_traits::pow::pow(lam, j as usize + 1);
        Some(sum.mul(&wn).sub(&Expr::rational(sign * tail / lam_j1)))
    }

    /// `∫_0^ε h ds` for `h` polynomial in ε and Laurent in the exponential.
    fn integral(&self, h: &Expr) -> Option<Expr> {
        if h.is_zero() {
            return Some(Expr::zero());
        }
        if h.denom().contains(self.param) {
            return None;
        }
        let w = self.w();
        let (k, rest) = match w {
            Some(w) if h.denom().contains(w) => {
                let degs: Vec<u32> = h.denom().terms().map(|(m, _)| m.degree_in(w)).collect();
                if degs.iter().any(|d| *d != degs[0]) {
                    return None;
                }
                let wk = Poly::term(Q::one(), Monomial::from_pairs(vec![(w, degs[0])]));
                (degs[0] as i64, h.denom().div_exact(&wk)?)
            }
            _ => (0, h.denom().clone()),
        };
        let mut acc = Expr::zero();
        for (m, c) in h.numer().terms() {
            let (j, m) = m.split_off(self.param);
            let (i, m) = match w {
                Some(w) => m.split_off(w),
                None => (0, m),
            };
            let part = self.monomial_integral(j, i as i64 - k)?;
            acc = acc.add(&part.mul(&Expr::poly(Poly::term(c.clone(), m))));
        }
        acc.div(&Expr::poly(rest)).ok()
    }

    /// Closed form of `v` given its ODE right-hand side with solved
    /// variables already substituted.
    fn solve_one(&mut self, v: Atom, f: &Expr) -> Option<Expr> {
        if f.denom().contains(v) {
            return None;
        }
        let cs = f.numer().coefficients_in(v);
        let den = Expr::poly(f.denom().clone());
        let part = |k: usize| -> Option<Expr> {
            Expr::poly(cs.get(k).cloned().unwrap_or_default())
                .div(&den)
                .ok()
        };
        let x = Expr::atom(v);
        match cs.len() {
            1 | 2 => {
                let a = part(0)?;
                let b = part(1)?;
                let mu = self.integrating_factor(&b)?;
                let int = self.integral(&a.div(&mu).ok()?)?;
                Some(mu.mul(&x.add(&int)))
            }
            3 if cs[0].is_zero() && cs[1].is_zero() => {
                let c = part(2)?;
                if c.contains(self.param) || self.mentions_w(&c) {
                    return None;
                }
                let den = Expr::one().sub(&c.mul(&Expr::atom(self.param)).mul(&x));
                x.div(&den).ok()
            }
            _ => None,
        }
    }
}

/// Integrates `g` in closed form where a sequential ordering exists;
/// otherwise the solution is tagged numeric-only.
pub fn integrate_closed_form(g: &GeneratorCandidate, param: &str) -> Result<FlowSolution> {
    let odes = lie_odes(g)?;
    let param = Atom::var(param);
    if odes
        .iter()
        .any(|o| o.target == param || o.rhs.contains(param))
    {
        return Err(Error::Input(format!(
            "parameter `{}` clashes with a coordinate",
            param
        )));
    }
    let mut seq = Sequential {
        param,
        l: 0,
        solved: HashMap::new(),
    };
    let coords: Vec<Atom> = odes.iter().map(|o| o.target).collect();
    let mut pending: Vec<&LieOde> = odes.iter().collect();
    let mut order = Vec::new();
    while !pending.is_empty() {
        let mut progressed = false;
        let mut k = 0;
        while k < pending.len() {
            let ode = pending[k];
            let ready =
                ode.rhs.atoms().into_iter().all(|a| {
                    a == ode.target || !coords.contains(&a) || seq.solved.contains_key(&a)
                });
            let sol = if ready {
                let f = ode.rhs.substitute(&seq.solved)?;
                seq.solve_one(ode.target, &f)
            } else {
                None
            };
            match sol {
                Some(x) => {
                    seq.solved.insert(ode.target, x);
                    order.push(ode.target);
                    pending.remove(k);
                    progressed = true;
                }
                None => k += 1,
            }
        }
        if !progressed {
            break;
        }
    }
    let closed = pending
        .is_empty()
        .then(|| coords.iter().map(|c| (*c, seq.solved[c].clone())).collect());
    let sol = FlowSolution {
        param,
        odes,
        exp_denominator: (seq.l > 0).then_some(seq.l),
        closed,
        order,
    };
    if sol.closed.is_some() && !sol.check_odes()? {
        return Err(Error::Input("closed form fails its own ODEs".into()));
    }
    Ok(sol)
}

impl FlowSolution {
    pub fn tag(&self) -> Solvability {
        if self.closed.is_some() {
            Solvability::ClosedForm
        } else {
            Solvability::NumericOnly
        }
    }

    /// The exponential symbol `exp(ε/L)`.
    pub fn exp_symbol(&self) -> Option<Atom> {
        self.exp_denominator
            .map(|l| exp_atom(self.param, &Q::new(BigInt::one(), BigInt::from(l))))
    }

    pub fn closed_form(&self, target: Atom) -> Option<&Expr> {
        self.closed
            .as_ref()?
            .iter()
            .find(|(t, _)| *t == target)
            .map(|(_, e)| e)
    }

    fn d_param(&self, e: &Expr) -> Expr {
        let w = self.exp_symbol();
        let l = self.exp_denominator.unwrap_or(1);
        e.derive(|a| {
            if a == self.param {
                Poly::one()
            } else if Some(a) == w {
                Poly::atom(a).scale(&Q::new(BigInt::one(), BigInt::from(l)))
            } else {
                Poly::zero()
            }
        })
    }

    fn at(&self, e: &Expr, eps: Expr, w: Expr) -> Result<Expr> {
        let mut rules = HashMap::from([(self.param, eps)]);
        if let Some(a) = self.exp_symbol() {
            rules.insert(a, w);
        }
        e.substitute(&rules)
    }

    fn closed_rules(&self) -> HashMap<Atom, Expr> {
        self.closed.iter().flatten().cloned().collect()
    }

    /// Symbolic check of the initial conditions and of every ODE.
    pub fn check_odes(&self) -> Result<bool> {
        let Some(closed) = &self.closed else {
            return Ok(false);
        };
        let rules = self.closed_rules();
        for (ode, (_, x)) in self.odes.iter().zip(closed) {
            if self.at(x, Expr::zero(), Expr::one())? != Expr::atom(ode.target) {
                return Ok(false);
            }
            if self.d_param(x) != ode.rhs.substitute(&rules)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `flow(ε1) ∘ flow(ε2) = flow(ε1 + ε2)`, symbolically.
    pub fn check_group_property(&self) -> Result<bool> {
        let Some(closed) = &self.closed else {
            return Ok(false);
        };
        let name = self.param.name();
        let e1 = Atom::var(&format!("{}_1", name));
        let e2 = Atom::var(&format!("{}_2", name));
        let rate = Q::new(
            BigInt::one(),
            BigInt::from(self.exp_denominator.unwrap_or(1)),
        );
        let w1 = Expr::atom(exp_atom(e1, &rate));
        let w2 = Expr::atom(exp_atom(e2, &rate));
        let mut inner = HashMap::new();
        for (t, x) in closed {
            inner.insert(*t, self.at(x, Expr::atom(e2), w2.clone())?);
        }
        for (_, x) in closed {
            let lhs = self.at(x, Expr::atom(e1), w1.clone())?.substitute(&inner)?;
            let rhs = self.at(x, Expr::atom(e1).add(&Expr::atom(e2)), w1.mul(&w2))?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Closed forms evaluated at a point; `None` if numeric-only or some
    /// value is not finite.
    pub fn eval_closed(&self, point: &HashMap<Atom, f64>, eps: f64) -> Option<Vec<(Atom, f64)>> {
        let closed = self.closed.as_ref()?;
        let w = self.exp_symbol();
        let l = self.exp_denominator.unwrap_or(1) as f64;
        let value = |a: Atom| {
            if a == self.param {
                Some(eps)
            } else if Some(a) == w {
                Some((eps / l).exp())
            } else {
                point.get(&a).copied()
            }
        };
        closed
            .iter()
            .map(|(t, e)| {
                e.eval_f64(&value)
                    .filter(|v| v.is_finite())
                    .map(|v| (*t, v))
            })
            .collect()
    }

    /// Closed forms as display strings keyed by coordinate name.
    pub fn strings(&self) -> BTreeMap<String, String> {
        self.closed
            .iter()
            .flatten()
            .map(|(t, e)| (t.name().to_string(), e.to_string()))
            .collect()
    }
}

struct Field<'a> {
    coords: &'a [Atom],
    rhs: &'a [Expr],
    consts: &'a HashMap<Atom, f64>,
    sign: f64,
    scale: f64,
    bad: Cell<Option<f64>>,
}

impl System<f64, DVector<f64>> for Field<'_> {
    fn system(&self, s: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let value = |a: Atom| match self.coords.iter().position(|c| *c == a) {
            Some(k) => Some(y[k]),
            None => self.consts.get(&a).copied(),
        };
        for (k, e) in self.rhs.iter().enumerate() {
            match e.eval_f64(&value) {
                Some(v) if v.is_finite() => dy[k] = self.sign * v,
                _ => {
                    if self.bad.get().is_none() {
                        self.bad.set(Some(s));
                    }
                    dy[k] = 0.0;
                }
            }
        }
    }

    fn solout(&mut self, s: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        if y.iter().any(|v| !v.is_finite() || v.abs() > self.scale) && self.bad.get().is_none() {
            self.bad.set(Some(s));
        }
        self.bad.get().is_some()
    }
}

/// Integrates the Lie ODEs numerically from `initial` to parameter `eps`.
/// `initial` must assign every coordinate and every free constant.
pub fn numeric_flow(
    g: &GeneratorCandidate,
    initial: &HashMap<Atom, f64>,
    eps: f64,
    tol: f64,
) -> Result<Vec<(Atom, f64)>> {
    let odes = lie_odes(g)?;
    let coords: Vec<Atom> = odes.iter().map(|o| o.target).collect();
    let rhs: Vec<Expr> = odes.iter().map(|o| o.rhs.clone()).collect();
    let mut y0 = Vec::new();
    for c in &coords {
        y0.push(
            *initial
                .get(c)
                .ok_or_else(|| Error::Input(format!("no initial value for `{}`", c)))?,
        );
    }
    for e in &rhs {
        for a in e.atoms() {
            if !coords.contains(&a) && !initial.contains_key(&a) {
                return Err(Error::Input(format!("no value for `{}`", a)));
            }
        }
    }
    if eps == 0.0 {
        return Ok(coords.into_iter().zip(y0).collect());
    }
    let big = y0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let field = Field {
        coords: &coords,
        rhs: &rhs,
        consts: initial,
        sign: eps.signum(),
        scale: 1e10 * big,
        bad: Cell::new(None),
    };
    let end = eps.abs();
    let t = (tol * 1e-3).max(1e-14);
    let mut solver = Dop853::new(field, 0.0, end, end, DVector::from_vec(y0), t, t);
    solver.set_output(OutputType::Sparse);
    let run = solver.integrate();
    let (xs, ys) = solver.results().get();
    let reached = xs.last().copied().unwrap_or(0.0);
    let last = ys.last().cloned();
    drop(solver);
    let singular = |at: f64| Error::Singularity {
        at: eps.signum() * at,
    };
    if run.is_err() { return Err(singular(reached)) }
    let last = last.ok_or_else(|| singular(0.0))?;
    if reached < end * (1.0 - 1e-12) || last.iter().any(|v| !v.is_finite() || v.abs() > 1e10 * big)
    {
        return Err(singular(reached));
    }
    let probe = Field {
        coords: &coords,
        rhs: &rhs,
        consts: initial,
        sign: 1.0,
        scale: 0.0,
        bad: Cell::new(None),
    };
    let mut dy = DVector::zeros(coords.len());
    probe.system(end, &last, &mut dy);
    if let Some(at) = probe.bad.get() {
        return Err(singular(at));
    }
    Ok(coords.into_iter().zip(last.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Problem;

    const WAVE: &str = "
independent x t
dependent U W
arbitrary C function(U)
equation D[x](W) = t*D[t](U) - U
equation D[t](W) = t*C^2*D[x](U)
";

    fn gen(p: &Problem, comps: &[(&str, &str)]) -> GeneratorCandidate {
        let m = comps
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        GeneratorCandidate::parse_named(p, &m).unwrap()
    }

    #[test]
    fn translation() {
        let p = Problem::parse(WAVE).unwrap();
        let g = gen(&p, &[("xi_x", "1")]);
        let f = integrate_closed_form(&g, "s").unwrap();
        assert_eq!(f.strings()["x"], "s + x");
        let x = Atom::var("x");
        let out = numeric_flow(
            &g,
            &p.coordinates().into_iter().map(|c| (c, 0.0)).collect(),
            1.0,
            1e-9,
        )
        .unwrap();
        let v = out.iter().find(|(a, _)| *a == x).unwrap().1;
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projective_group() {
        let p = Problem::parse(WAVE).unwrap();
        // minus the paper's generator, so that the parameter is B
        let g = gen(
            &p,
            &[
                ("xi_x", "-W"),
                ("xi_t", "-t*U"),
                ("eta_U", "-U^2"),
                ("theta_C", "2*U*C"),
            ],
        );
        let f = integrate_closed_form(&g, "B").unwrap();
        assert_eq!(f.tag(), Solvability::ClosedForm);
        let s = f.strings();
        assert_eq!(s["x"], "-B*W + x");
        assert_eq!(s["t"], "t/(B*U + 1)");
        assert_eq!(s["U"], "U/(B*U + 1)");
        assert_eq!(s["W"], "W");
        assert_eq!(s["C"], "B^2*C*U^2 + 2*B*C*U + C");
        assert!(f.check_group_property().unwrap());
        let one: HashMap<Atom, f64> = p.coordinates().into_iter().map(|c| (c, 1.0)).collect();
        let num = numeric_flow(&g, &one, 0.1, 1e-9).unwrap();
        let want = [0.9, 1.0 / 1.1, 1.0 / 1.1, 1.0, 1.21];
        for ((_, v), w) in num.iter().zip(want) {
            assert!((v - w).abs() < 1e-9, "{} vs {}", v, w);
        }
        let mut bad = one.clone();
        bad.insert(p.coordinates()[2], -10.0);
        let r = numeric_flow(&g, &bad, 0.1, 1e-9);
        assert!(matches!(r, Err(Error::Singularity { .. })), "{:?}", r);
    }

    #[test]
    fn exponential_scalings() {
        let p = Problem::parse(WAVE).unwrap();
        let g = gen(
            &p,
            &[
                ("xi_x", "-1/2*x"),
                ("xi_t", "-3/2*t + 1"),
                ("eta_U", "U"),
                ("theta_C", "2*C"),
            ],
        );
        let f = integrate_closed_form(&g, "s").unwrap();
        assert_eq!(f.exp_denominator, Some(2));
        let s = f.strings();
        assert_eq!(s["x"], "x/exp(1/2*s)");
        assert_eq!(s["C"], "exp(1/2*s)^4*C");
        assert!(f.check_group_property().unwrap());
        let pt: HashMap<Atom, f64> = p
            .coordinates()
            .into_iter()
            .zip([0.3, -1.2, 0.7, 2.0, 1.5])
            .collect();
        for eps in [-0.8, 0.4, 1.3] {
            let a = f.eval_closed(&pt, eps).unwrap();
            let b = numeric_flow(&g, &pt, eps, 1e-9).unwrap();
            for ((_, u), (_, v)) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coupled_without_ordering_is_numeric_only() {
        let p = Problem::parse(WAVE).unwrap();
        let g = gen(&p, &[("xi_x", "t"), ("xi_t", "-x")]);
        let f = integrate_closed_form(&g, "s").unwrap();
        assert_eq!(f.tag(), Solvability::NumericOnly);
        let pt: HashMap<Atom, f64> = p
            .coordinates()
            .into_iter()
            .zip([1.0, 0.0, 0.0, 0.0, 1.0])
            .collect();
        let out = numeric_flow(&g, &pt, 1.0, 1e-9).unwrap();
        assert!((out[0].1 - 1f64.cos()).abs() < 1e-9, "{:?}", out);
        assert!((out[1].1 + 1f64.sin()).abs() < 1e-9);
    }
}
