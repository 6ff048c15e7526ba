//! Reduction of the determining system and its polynomial/rational ansatz
//! solution by exact linear algebra.

use crate::determining::{generate_determining, is_unknown, DeterminingSystem, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{integer_row, null_space, solve, Echelon, Row};
use crate::problem::Problem;
use crate::prolong::GeneratorCandidate;
use crate::symbolic::{Atom, Expr, Head, Monomial, Poly, Q};
use num_traits::Zero;
use std::collections::{BTreeMap, HashMap};

/// Determining system after trivial reduction.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub system: DeterminingSystem,
    /// Remaining arguments of each component, in head order.
    pub arguments: Vec<Vec<Atom>>,
    /// Partials known to vanish (with all their further partials).
    pub zero_partials: Vec<Atom>,
}

struct ZeroSet {
    patterns: HashMap<Head, Vec<Vec<u16>>>,
}

impl ZeroSet {
    fn is_zero(&self, a: Atom) -> bool {
        let Some((h, o)) = a.as_func() else {
            return false;
        };
        self.patterns
            .get(&h)
            .map(|ps| ps.iter().any(|p| p.iter().zip(&o).all(|(x, y)| x <= y)))
            .unwrap_or(false)
    }

    fn add(&mut self, a: Atom) -> bool {
        if self.is_zero(a) {
            return false;
        }
        let (h, o) = a.as_func().unwrap();
        let ps = self.patterns.entry(h).or_default();
        ps.retain(|p| !o.iter().zip(p).all(|(x, y)| x <= y));
        ps.push(o);
        true
    }
}

fn strip(p: &Poly, zs: &ZeroSet) -> Poly {
    Poly::from_terms(
        p.terms()
            .filter(|(m, _)| !m.atoms().any(|a| zs.is_zero(a)))
            .map(|(m, c)| (m.clone(), c.clone())),
    )
}

/// Applies dependency restrictions, single-unknown eliminations and
/// duplicate removal until nothing changes.
pub fn trivial_reduce(ds: &DeterminingSystem) -> Result<ReducedSystem> {
    let mut zs = ZeroSet {
        patterns: HashMap::new(),
    };
    let mut eqs: Vec<Poly> = ds
        .equations
        .iter()
        .map(|(e, _)| e.numer().clone())
        .collect();
    loop {
        let mut changed = false;
        let mut next = Vec::new();
        for e in eqs {
            let e = strip(&e, &zs);
            if e.is_zero() {
                changed = true;
                continue;
            }
            if let Some(c) = e.as_constant() {
                return Err(Error::Contradiction(format!("{} = 0", c)));
            }
            let unknowns: Vec<Atom> = {
                let mut v: Vec<Atom> = e.atoms().into_iter().filter(|a| is_unknown(*a)).collect();
                v.dedup();
                v
            };
            if unknowns.len() == 1 {
                // Coefficient is a nonzero polynomial in the coordinates.
                if zs.add(unknowns[0]) {
                    changed = true;
                }
                continue;
            }
            next.push(e);
        }
        let mut seen = std::collections::HashSet::new();
        let before = next.len();
        next.retain(|e| seen.insert(e.primitive_integer()));
        if next.len() != before {
            changed = true;
        }
        eqs = next;
        if !changed {
            break;
        }
    }

    let mut zero_partials: Vec<Atom> = Vec::new();
    let mut arguments = Vec::new();
    for h in &ds.unknowns {
        let args = h.args();
        let mut keep = Vec::new();
        for (k, a) in args.iter().enumerate() {
            let mut o = vec![0u16; args.len()];
            o[k] = 1;
            if !zs.is_zero(h.derivative(&o)) {
                keep.push(*a);
            }
        }
        if zs.is_zero(h.value()) {
            keep.clear();
        }
        arguments.push(keep);
        if let Some(ps) = zs.patterns.get(h) {
            let mut ps = ps.clone();
            ps.sort();
            for p in ps {
                zero_partials.push(h.derivative(&p));
            }
        }
    }
    let mut equations: Vec<(Expr, Provenance)> = Vec::new();
    for a in &zero_partials {
        // Order-one restrictions are absorbed into the argument lists.
        if a.order() == 1 {
            continue;
        }
        equations.push((Expr::atom(*a), Provenance::Restriction));
    }
    let mut rest: Vec<(String, Expr)> = eqs
        .into_iter()
        .map(|p| {
            let e = Expr::poly(p);
            (e.to_string(), e)
        })
        .collect();
    rest.sort_by(|a, b| a.0.cmp(&b.0));
    equations.extend(rest.into_iter().map(|(_, e)| (e, Provenance::Split)));
    Ok(ReducedSystem {
        system: DeterminingSystem {
            equations,
            unknowns: ds.unknowns.clone(),
            targets: ds.targets.clone(),
            split_vars: ds.split_vars.clone(),
            raw_count: ds.raw_count,
        },
        arguments,
        zero_partials,
    })
}

/// Ansatz class of one component.
#[derive(Clone, Debug)]
pub struct ComponentAnsatz {
    pub args: Vec<Atom>,
    pub degree: u32,
    pub denominator: Poly,
}

#[derive(Clone, Debug)]
pub struct AnsatzSpec {
    pub components: Vec<ComponentAnsatz>,
}

impl AnsatzSpec {
    /// Ansatz from the problem's component declarations, restricted to the
    /// arguments surviving reduction. `degree` overrides the problem default
    /// for components without their own bound; `cap` bounds every degree.
    pub fn from_problem(
        p: &Problem,
        reduced: &ReducedSystem,
        degree: Option<u32>,
        cap: u32,
    ) -> Result<Self> {
        let mut comps = Vec::new();
        for (k, target) in reduced.system.targets.iter().enumerate() {
            let decl = p
                .component(*target)
                .ok_or_else(|| Error::UnknownComponent(target.name().to_string()))?;
            let d = decl
                .degree
                .unwrap_or(degree.unwrap_or(p.ansatz_degree()))
                .min(cap);
            let den = match &decl.denominator {
                None => Poly::one(),
                Some(e) => {
                    if !e.is_polynomial() {
                        return Err(Error::Ansatz(format!(
                            "denominator of {} must be polynomial",
                            decl.name
                        )));
                    }
                    e.numer().clone()
                }
            };
            let args: Vec<Atom> = reduced.arguments[k].clone();
            if let Some(bad) = den.atoms().into_iter().find(|a| !decl.allowed.contains(a)) {
                return Err(Error::Ansatz(format!(
                    "denominator of {} depends on `{}`",
                    decl.name,
                    bad.name()
                )));
            }
            comps.push(ComponentAnsatz {
                args,
                degree: d,
                denominator: den,
            });
        }
        Ok(AnsatzSpec { components: comps })
    }
}

/// Monomials of total degree `<= d` in `args`, graded then lexicographic
/// in argument order.
pub fn graded_monomials(args: &[Atom], d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut exps = Vec::new();
        gen_exps(args.len(), deg, &mut Vec::new(), &mut exps);
        for e in exps {
            out.push(Monomial::from_pairs(
                args.iter()
                    .zip(e)
                    .filter(|(_, k)| *k > 0)
                    .map(|(a, k)| (*a, k))
                    .collect(),
            ));
        }
    }
    out
}

fn gen_exps(n: usize, deg: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if cur.len() == n {
        if deg == 0 {
            out.push(cur.clone());
        }
        return;
    }
    if cur.len() + 1 == n {
        cur.push(deg);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for k in (0..=deg).rev() {
        cur.push(k);
        gen_exps(n, deg - k, cur, out);
        cur.pop();
    }
}

/// A basis of generators with the column layout used to normalize it.
#[derive(Clone, Debug)]
pub struct GeneratorBasis {
    pub members: Vec<GeneratorCandidate>,
    pub columns: usize,
    pub monomial_order: String,
}

impl GeneratorBasis {
    pub fn dimension(&self) -> usize {
        self.members.len()
    }
}

struct Column {
    func: Expr,
}

/// Solves the reduced system within the ansatz class.
pub fn ansatz_solve(rs: &ReducedSystem, spec: &AnsatzSpec) -> Result<GeneratorBasis> {
    let ds = &rs.system;
    let mut columns: Vec<Column> = Vec::new();
    let mut ranges: Vec<std::ops::Range<usize>> = Vec::new();
    for (k, ca) in spec.components.iter().enumerate() {
        let start = columns.len();
        let vanishes = rs
            .zero_partials
            .iter()
            .any(|a| *a == ds.unknowns[k].value());
        if !vanishes {
            let den = Expr::poly(ca.denominator.clone());
            for m in graded_monomials(&ca.args, ca.degree) {
                let f = Expr::poly(Poly::term(crate::symbolic::q(1), m)).div(&den)?;
                columns.push(Column { func: f });
            }
        }
        ranges.push(start..columns.len());
    }
    let ncols = columns.len();

    // Partial derivatives of each basis function, on demand.
    let mut partial_cache: HashMap<(usize, Atom), Expr> = HashMap::new();
    let mut partial_of = |col: usize, a: Atom, columns: &Vec<Column>| -> Expr {
        partial_cache
            .entry((col, a))
            .or_insert_with(|| {
                let (h, o) = a.as_func().unwrap();
                let mut e = columns[col].func.clone();
                for (arg, &n) in h.args().iter().zip(&o) {
                    for _ in 0..n {
                        e = e.partial(*arg);
                    }
                }
                e
            })
            .clone()
    };

    let mut ech = Echelon::new();
    for (e, _) in &ds.equations {
        if !e.is_polynomial() {
            return Err(Error::Nonlinear(e.to_string()));
        }
        // Coefficient of each unknown atom.
        let mut by_unknown: BTreeMap<Atom, Poly> = BTreeMap::new();
        for (m, c) in e.numer().terms() {
            let (u, rest) = m.partition(is_unknown);
            let f = u.factors();
            if f.len() != 1 || f[0].1 != 1 {
                return Err(Error::Nonlinear(e.to_string()));
            }
            by_unknown
                .entry(f[0].0)
                .or_insert_with(Poly::zero)
                .add_term(rest, c.clone());
        }
        let mut per_col: BTreeMap<usize, Expr> = BTreeMap::new();
        for (u, coeff) in &by_unknown {
            let head = u.head().unwrap();
            let k = ds
                .unknowns
                .iter()
                .position(|h| *h == head)
                .ok_or_else(|| Error::UnknownComponent(head.name()))?;
            for col in ranges[k].clone() {
                let d = partial_of(col, *u, &columns);
                if d.is_zero() {
                    continue;
                }
                let term = Expr::poly(coeff.clone()).mul(&d);
                let slot = per_col.entry(col).or_insert_with(Expr::zero);
                *slot = slot.add(&term);
            }
        }
        if per_col.is_empty() {
            continue;
        }
        let mut l = Poly::one();
        for v in per_col.values() {
            if !v.is_polynomial() {
                l = l.lcm(v.denom());
            }
        }
        let mut rows: BTreeMap<Monomial, Vec<(usize, Q)>> = BTreeMap::new();
        for (col, v) in &per_col {
            let scaled = if v.is_polynomial() {
                v.numer().mul(&l)
            } else {
                v.numer()
                    .mul(&l.div_exact(v.denom()).expect("lcm divisible"))
            };
            for (m, c) in scaled.terms() {
                rows.entry(m.clone()).or_default().push((*col, c.clone()));
            }
        }
        for (_, r) in rows {
            ech.push(integer_row(r));
        }
    }
    let basis = null_space(&ech, ncols);
    let mut members = Vec::new();
    for v in basis {
        let mut comps = Vec::new();
        for (k, target) in ds.targets.iter().enumerate() {
            let mut acc = Expr::zero();
            for col in ranges[k].clone() {
                if !v[col].is_zero() {
                    acc = acc.add(&columns[col].func.scale(&v[col]));
                }
            }
            comps.push((*target, acc));
        }
        members.push(GeneratorCandidate::from_targets(comps));
    }
    Ok(GeneratorBasis {
        members,
        columns: ncols,
        monomial_order: "component order, then graded lexicographic in declaration order".into(),
    })
}

/// Coefficients `λ` with `g = Σ λ_j basis_j`, or `None`.
pub fn span_membership(basis: &[GeneratorCandidate], g: &GeneratorCandidate) -> Option<Vec<Q>> {
    let n = basis.len();
    let mut targets: Vec<Atom> = g.components().iter().map(|(t, _)| *t).collect();
    for b in basis {
        for (t, _) in b.components() {
            if !targets.contains(t) {
                targets.push(*t);
            }
        }
    }
    let mut rows: Vec<Row> = Vec::new();
    for t in targets {
        let mut parts: Vec<(usize, Expr)> = basis
            .iter()
            .enumerate()
            .map(|(j, b)| (j, b.get(t)))
            .collect();
        parts.push((n, g.get(t)));
        let mut l = Poly::one();
        for (_, e) in &parts {
            if !e.is_polynomial() {
                l = l.lcm(e.denom());
            }
        }
        let mut by_mono: BTreeMap<Monomial, Vec<(usize, Q)>> = BTreeMap::new();
        for (j, e) in &parts {
            if e.is_zero() {
                continue;
            }
            let scaled = e
                .numer()
                .mul(&l.div_exact(e.denom()).expect("lcm divisible"));
            for (m, c) in scaled.terms() {
                by_mono.entry(m.clone()).or_default().push((*j, c.clone()));
            }
        }
        for (_, r) in by_mono {
            rows.push(integer_row(r));
        }
    }
    solve(rows, n)
}

/// Rank of a set of generators over Q.
pub fn rank(gens: &[GeneratorCandidate]) -> usize {
    let mut targets: Vec<Atom> = Vec::new();
    for g in gens {
        for (t, _) in g.components() {
            if !targets.contains(t) {
                targets.push(*t);
            }
        }
    }
    let mut index: BTreeMap<(usize, Monomial), usize> = BTreeMap::new();
    let mut rows: Vec<Vec<(usize, Q)>> = vec![Vec::new(); gens.len()];
    for (ti, t) in targets.iter().enumerate() {
        let mut l = Poly::one();
        for g in gens {
            let e = g.get(*t);
            if !e.is_polynomial() {
                l = l.lcm(e.denom());
            }
        }
        for (j, g) in gens.iter().enumerate() {
            let e = g.get(*t);
            if e.is_zero() {
                continue;
            }
            let scaled = e
                .numer()
                .mul(&l.div_exact(e.denom()).expect("lcm divisible"));
            for (m, c) in scaled.terms() {
                let n = index.len();
                let col = *index.entry((ti, m.clone())).or_insert(n);
                rows[j].push((col, c.clone()));
            }
        }
    }
    let mut ech = Echelon::new();
    for r in rows {
        ech.push(integer_row(r));
    }
    ech.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determining::generate_determining;
    use crate::symbolic::parse_expression;

    #[test]
    fn monomial_enumeration() {
        let x = Atom::var("x");
        let y = Atom::var("y");
        let ms = graded_monomials(&[x, y], 2);
        let names: Vec<String> = ms.iter().map(|m| format!("{:?}", m)).collect();
        assert_eq!(names, vec!["1", "x", "y", "x^2", "x*y", "y^2"]);
    }

    #[test]
    fn reduction_rules() {
        let src = "independent x t\ndependent U\nequation D[t](U) = D[x,x](U)\n";
        let p = Problem::parse(src).unwrap();
        let h = p.component_head(Atom::var("x"));
        let u = p.dependents()[0].value();
        let d_u = Expr::atom(h.derivative_by(&[u]).unwrap());
        let ds = DeterminingSystem {
            equations: vec![
                (d_u.clone(), Provenance::Restriction),
                (d_u.scale(&crate::symbolic::q(2)), Provenance::Split),
            ],
            unknowns: vec![h],
            targets: vec![Atom::var("x")],
            split_vars: vec![],
            raw_count: 2,
        };
        let r = trivial_reduce(&ds).unwrap();
        assert_eq!(r.arguments[0], vec![Atom::var("x"), Atom::var("t")]);
        assert!(r.system.equations.is_empty());

        let mut bad = ds.clone();
        bad.equations.push((Expr::one(), Provenance::Split));
        assert!(matches!(trivial_reduce(&bad), Err(Error::Contradiction(_))));
    }

    #[test]
    fn heat_equation_symmetries() {
        // u_t = u_xx: point symmetries with polynomial ansatz of degree 2.
        let src = "independent x t\ndependent U\nequation D[t](U) = D[x,x](U)\nansatz_degree 2\n";
        let p = Problem::parse(src).unwrap();
        let ds = generate_determining(&p, &GeneratorCandidate::unknown(&p)).unwrap();
        let rs = trivial_reduce(&ds).unwrap();
        let spec = AnsatzSpec::from_problem(&p, &rs, None, 6).unwrap();
        let basis = ansatz_solve(&rs, &spec).unwrap();
        // dx, dt, U dU, 2t dx - xU dU, 2t dt + x dx, 1 dU and the degree-2
        // members of the solution space of the linear equation.
        let mut m = BTreeMap::new();
        m.insert("xi_x".to_string(), "2*t".to_string());
        m.insert("eta_U".to_string(), "-x*U".to_string());
        let galilei = GeneratorCandidate::parse_named(&p, &m).unwrap();
        assert!(span_membership(&basis.members, &galilei).is_some());
        let _ = parse_expression("U", p.table()).unwrap();
        for g in &basis.members {
            for r in crate::determining::residual(&p, g).unwrap() {
                assert!(r.is_zero());
            }
        }
    }
}

/// Everything `derive` produces, with the intermediate counts.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub raw_count: usize,
    pub determining_count: usize,
    pub reduced_count: usize,
    pub basis: GeneratorBasis,
}

/// Determining system, reduction and ansatz solve in one call.
pub fn derive(p: &Problem, degree: Option<u32>, cap: u32) -> Result<Derivation> {
    let ds = generate_determining(p, &GeneratorCandidate::unknown(p))?;
    let raw_count = ds.raw_count;
    let determining_count = ds.len();
    let rs = trivial_reduce(&ds)?;
    let reduced_count = rs.system.len();
    let spec = AnsatzSpec::from_problem(p, &rs, degree, cap)?;
    let basis = ansatz_solve(&rs, &spec)?;
    Ok(Derivation {
        raw_count,
        determining_count,
        reduced_count,
        basis,
    })
}
