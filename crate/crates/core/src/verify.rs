//! Verification of given generators and affine point transformations
//! against a family.

use crate::determining::{is_unknown, residual};
use crate::error::{Error, Result};
use crate::problem::{total_of_atom, ArbitraryKind, Problem};
use crate::prolong::GeneratorCandidate;
use crate::symbolic::{parse_expression, Atom, Expr, FuncKind, Head, Poly};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Verified,
    Refuted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub status: Status,
    /// Nonzero residuals, one per failing equation.
    pub residuals: Vec<String>,
    /// Components depending on coordinates outside their declared set.
    pub violations: Vec<String>,
}

impl VerificationReport {
    fn new(residuals: Vec<String>, violations: Vec<String>) -> Self {
        let status = if residuals.is_empty() && violations.is_empty() {
            Status::Verified
        } else {
            Status::Refuted
        };
        VerificationReport {
            status,
            residuals,
            violations,
        }
    }

    pub fn verified(&self) -> bool {
        self.status == Status::Verified
    }
}

fn is_opaque(a: Atom) -> bool {
    a.head()
        .map(|h| h.kind() == FuncKind::Opaque)
        .unwrap_or(false)
}

/// Checks `g` on the solution manifold. Opaque calls `F(t)`, `F'(t)`, ...
/// are independent symbols, so a zero residual means zero coefficient of
/// every opaque monomial.
pub fn verify_generator(p: &Problem, g: &GeneratorCandidate) -> Result<VerificationReport> {
    let coords = p.coordinates();
    let mut violations = Vec::new();
    for (t, e) in g.components() {
        let Some(decl) = p.component(*t) else {
            continue;
        };
        for a in e.atoms().into_iter().filter(|a| is_opaque(*a)) {
            let arg = a.head().unwrap().args()[0];
            if !decl.allowed.contains(&arg) {
                return Err(Error::DisallowedOpaque {
                    func: a.head().unwrap().name(),
                    var: arg.name().to_string(),
                });
            }
        }
        for v in &coords {
            if !decl.allowed.contains(v) && !e.partial(*v).is_zero() {
                violations.push(format!("{} depends on {}", decl.name, v));
            }
        }
    }
    let residuals = residual(p, g)?
        .into_iter()
        .filter(|r| !r.is_zero())
        .map(|r| r.to_string())
        .collect();
    Ok(VerificationReport::new(residuals, violations))
}

/// Fills the components `free` of `g` from the split invariance condition.
/// Split variables are the jets of positive order plus coordinates outside
/// every open component's allowed set. Each pass solves one split equation that is linear in a single
/// undifferentiated free component, substitutes it, and recomputes.
pub fn complete_generator(
    p: &Problem,
    g: &GeneratorCandidate,
    free: &[Atom],
) -> Result<GeneratorCandidate> {
    let mut known = g.clone();
    let mut open: Vec<Atom> = free.to_vec();
    while !open.is_empty() {
        let mut cand = known.clone();
        for t in &open {
            cand.set(*t, Expr::atom(p.component_head(*t).value()));
        }
        // coordinates no open component may depend on split as well
        let barred: Vec<Atom> = p
            .coordinates()
            .into_iter()
            .filter(|v| {
                open.iter().all(|t| {
                    p.component(*t)
                        .map(|d| !d.allowed.contains(v))
                        .unwrap_or(false)
                })
            })
            .collect();
        let mut solved = None;
        'search: for r in residual(p, &cand)? {
            for (_, c) in r.collect(|a| (p.is_jet(a) && a.order() > 0) || barred.contains(&a))? {
                let e = Expr::poly(c);
                let unknowns: Vec<Atom> =
                    e.atoms().into_iter().filter(|a| is_unknown(*a)).collect();
                let [u] = unknowns[..] else { continue };
                let Some(t) = open
                    .iter()
                    .copied()
                    .find(|t| p.component_head(*t).value() == u)
                else {
                    continue;
                };
                let coef = e.partial(u);
                if coef.atoms().contains(&u) {
                    continue;
                }
                let rest = e.sub(&coef.mul(&Expr::atom(u)));
                solved = Some((t, rest.neg().div(&coef)?));
                break 'search;
            }
        }
        let (t, value) = solved.ok_or_else(|| {
            Error::Input("the remaining components are not fixed by the determining system".into())
        })?;
        known.set(t, value);
        open.retain(|x| *x != t);
    }
    Ok(known)
}

/// A point map `z -> z*` given by images of the coordinates; coordinates
/// without an image are fixed.
#[derive(Clone, Debug, Default)]
pub struct AffineMap {
    pub images: BTreeMap<Atom, Expr>,
}

impl AffineMap {
    /// Images keyed by coordinate name. Free symbols are constants.
    pub fn parse_named(p: &Problem, named: &BTreeMap<String, String>) -> Result<Self> {
        let mut table = p.table().clone();
        table.auto_constants = true;
        let coords = p.coordinates();
        let mut images = BTreeMap::new();
        for (k, v) in named {
            let target = coords
                .iter()
                .find(|c| &*c.name() == k.as_str())
                .ok_or_else(|| Error::UnknownComponent(k.clone()))?;
            images.insert(*target, parse_expression(v, &table)?);
        }
        Ok(AffineMap { images })
    }

    pub fn image(&self, a: Atom) -> Expr {
        self.images
            .get(&a)
            .cloned()
            .unwrap_or_else(|| Expr::atom(a))
    }
}

fn constant_heads(p: &Problem) -> Vec<Head> {
    p.arbitrary()
        .iter()
        .filter(|a| a.kind == ArbitraryKind::Constant)
        .map(|a| a.head)
        .collect()
}

/// Inverse of a square matrix of expressions, by Gauss-Jordan elimination.
fn invert(m: &[Vec<Expr>]) -> Result<Vec<Vec<Expr>>> {
    let n = m.len();
    let mut a: Vec<Vec<Expr>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .find(|&r| !a[r][c].is_zero())
            .ok_or_else(|| Error::NotInvertible("linear part of the map".into()))?;
        a.swap(c, piv);
        let inv = a[c][c].recip()?;
        a[c] = a[c].iter().map(|e| e.mul(&inv)).collect();
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let pivot_row = a[c].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                    *x = x.sub(&f.mul(y));
                }
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Substitutes the map into every family equation, with jets transformed by
/// the chain rule, and checks that each result vanishes on the solution
/// manifold of the original system. Arbitrary elements are replaced by their
/// images, so success means the family member with parameters `K*`.
pub fn verify_affine_transformation(p: &Problem, map: &AffineMap) -> Result<VerificationReport> {
    let xs = p.independents().to_vec();
    let deps: Vec<Atom> = p.dependents().iter().map(|h| h.value()).collect();
    let consts = constant_heads(p);
    let moving: Vec<Atom> = p
        .coordinates()
        .into_iter()
        .filter(|c| !c.head().map(|h| consts.contains(&h)).unwrap_or(false))
        .collect();
    let not_affine = |what: &str| Error::NotAffine(what.to_string());
    let coefficient_ok = |e: &Expr| moving.iter().all(|v| !e.contains(*v));

    let mut mat = Vec::new();
    for x in &xs {
        let img = map.image(*x);
        let mut row = Vec::new();
        let mut lin = Expr::zero();
        for y in &xs {
            let c = img.partial(*y);
            if !coefficient_ok(&c) {
                return Err(not_affine(&x.name()));
            }
            lin = lin.add(&c.mul(&Expr::atom(*y)));
            row.push(c);
        }
        if !coefficient_ok(&img.sub(&lin)) {
            return Err(not_affine(&x.name()));
        }
        mat.push(row);
    }
    for u in &deps {
        let img = map.image(*u);
        let mut lin = Expr::zero();
        for v in xs.iter().chain(&deps) {
            let c = img.partial(*v);
            if !coefficient_ok(&c) {
                return Err(not_affine(&u.name()));
            }
            lin = lin.add(&c.mul(&Expr::atom(*v)));
        }
        if !coefficient_ok(&img.sub(&lin)) {
            return Err(not_affine(&u.name()));
        }
    }
    let inv = invert(&mat)?;

    let total = |e: &Expr, v: Atom| -> Expr {
        e.derive(|a| match a.head() {
            Some(h) if consts.contains(&h) => Poly::zero(),
            _ => total_of_atom(a, v),
        })
    };
    // D*_i = Σ_j inv[j][i] D_j
    let starred = |e: &Expr, i: usize| -> Expr {
        let mut acc = Expr::zero();
        for (j, x) in xs.iter().enumerate() {
            if inv[j][i].is_zero() {
                continue;
            }
            acc = acc.add(&inv[j][i].mul(&total(e, *x)));
        }
        acc
    };

    let mut cache: HashMap<Atom, Expr> = HashMap::new();
    let mut residuals = Vec::new();
    for eq in p.equations() {
        let e = eq.residual_form();
        let mut rules = HashMap::new();
        for a in e.atoms() {
            if xs.contains(&a) {
                rules.insert(a, map.image(a));
                continue;
            }
            let Some((h, orders)) = a.as_func() else {
                continue;
            };
            if h.kind() != FuncKind::Dependent {
                continue;
            }
            cache.entry(a).or_insert_with(|| {
                let mut v = map.image(h.value());
                if consts.contains(&h) && orders.iter().any(|o| *o > 0) {
                    v = Expr::zero();
                } else {
                    for (i, &o) in orders.iter().enumerate() {
                        for _ in 0..o {
                            v = starred(&v, i);
                        }
                    }
                }
                v
            });
            rules.insert(a, cache[&a].clone());
        }
        let r = p.on_manifold(&e.substitute(&rules)?)?;
        if !r.is_zero() {
            residuals.push(r.to_string());
        }
    }
    Ok(VerificationReport::new(residuals, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KDV: &str = "
independent x t
dependent U
arbitrary A constant
arbitrary B constant
arbitrary Q constant
equation D[t](U) + A*D[x](U) + B*U*D[x](U) + Q*D[x,x,x](U) = 0
solve_for D[t](U)
";

    fn named(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn identity_map() {
        let p = Problem::parse(KDV).unwrap();
        let r = verify_affine_transformation(&p, &AffineMap::default()).unwrap();
        assert!(r.verified());
    }

    #[test]
    fn shift_removing_the_drift_term() {
        let p = Problem::parse(KDV).unwrap();
        let m = AffineMap::parse_named(&p, &named(&[("U", "U + A/B"), ("A", "0")])).unwrap();
        assert!(verify_affine_transformation(&p, &m).unwrap().verified());
        let wrong = AffineMap::parse_named(&p, &named(&[("U", "U + A/B")])).unwrap();
        assert!(!verify_affine_transformation(&p, &wrong).unwrap().verified());
    }

    #[test]
    fn general_point_transformation() {
        let p = Problem::parse(KDV).unwrap();
        let m = AffineMap::parse_named(
            &p,
            &named(&[
                ("x", "A5/(A6*A7)*(x - A4*t) + A1"),
                ("t", "A5/(A6^3*A7^3)*t + A2"),
                ("U", "A6^2*(U + A3)"),
                ("A", "A6^2*A7^2*(A - A3*B - A4)"),
                ("B", "A7^2*B"),
                ("Q", "A5^2*Q"),
            ]),
        )
        .unwrap();
        assert!(verify_affine_transformation(&p, &m).unwrap().verified());
    }

    #[test]
    fn singular_and_nonaffine_maps() {
        let p = Problem::parse(KDV).unwrap();
        let m = AffineMap::parse_named(&p, &named(&[("x", "t")])).unwrap();
        assert!(matches!(
            verify_affine_transformation(&p, &m),
            Err(Error::NotInvertible(_))
        ));
        let m = AffineMap::parse_named(&p, &named(&[("x", "x^2")])).unwrap();
        assert!(matches!(
            verify_affine_transformation(&p, &m),
            Err(Error::NotAffine(_))
        ));
    }

    #[test]
    fn generators_and_opaque_functions() {
        let p = Problem::parse(KDV).unwrap();
        let g = GeneratorCandidate::parse_named(&p, &named(&[("xi_x", "t"), ("theta_A", "1")]))
            .unwrap();
        assert!(verify_generator(&p, &g).unwrap().verified());
        let g = GeneratorCandidate::parse_named(&p, &named(&[("xi_x", "t")])).unwrap();
        let r = verify_generator(&p, &g).unwrap();
        assert_eq!(r.status, Status::Refuted);
        assert_eq!(r.residuals.len(), 1);
    }
}
