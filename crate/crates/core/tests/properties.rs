use equivgen::determining::residual;
use equivgen::flows::{integrate_closed_form, numeric_flow};
use equivgen::problem::Problem;
use equivgen::prolong::{GeneratorCandidate, Prolonger};
use equivgen::symbolic::{parse_expression, q, Expr, Poly, SymbolTable};
use proptest::prelude::*;
use std::collections::{BTreeMap, HashMap};

const KDV: &str = "
independent x t
dependent U
arbitrary A constant
arbitrary B constant
arbitrary Q constant
equation D[t](U) + A*D[x](U) + B*U*D[x](U) + Q*D[x,x,x](U) = 0
solve_for D[t](U)
";

fn kdv() -> Problem {
    Problem::parse(KDV).unwrap()
}

fn table(p: &Problem) -> SymbolTable {
    GeneratorCandidate::table_for(p)
}

/// Polynomial text over `vars` with small integer coefficients.
fn poly_text(vars: &'static [&'static str], max_terms: usize) -> impl Strategy<Value = String> {
    let n = vars.len();
    prop::collection::vec(
        (-4i32..=4, prop::collection::vec(0u32..=2, n)),
        1..=max_terms,
    )
    .prop_map(move |terms| {
        let parts: Vec<String> = terms
            .iter()
            .map(|(c, exps)| {
                let mut s = format!("({})", c);
                for (v, e) in vars.iter().zip(exps) {
                    if *e > 0 {
                        s.push_str(&format!("*{}^{}", v, e));
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    })
}

const JET_VARS: &[&str] = &["x", "t", "U", "D[x](U)", "D[t](U)", "A"];
const COORDS: &[&str] = &["x", "t", "U", "A", "B"];

fn rational_text() -> impl Strategy<Value = String> {
    (poly_text(JET_VARS, 4), poly_text(&["x", "U"], 2))
        .prop_map(|(n, d)| format!("({})/(3 + x^2 + ({}))", n, d))
}

fn expr(p: &Problem, text: &str) -> Expr {
    parse_expression(text, &table(p)).unwrap()
}

/// Random polynomial generator on KdV, components keyed by coordinate.
fn generator_texts() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(poly_text(COORDS, 3), 6)
}

fn generator(p: &Problem, texts: &[String]) -> GeneratorCandidate {
    let names = ["x", "t", "U", "A", "B", "Q"];
    let named: BTreeMap<String, String> = names
        .iter()
        .zip(texts)
        .map(|(n, s)| (n.to_string(), s.clone()))
        .collect();
    GeneratorCandidate::parse_named(p, &named).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normal_form_is_idempotent(s in rational_text()) {
        let p = kdv();
        let e = expr(&p, &s);
        let again = expr(&p, &e.to_string());
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), e.to_string());
        prop_assert_eq!(Expr::ratio(e.numer().clone(), e.denom().clone()).unwrap(), e);
    }

    #[test]
    fn product_rule(a in rational_text(), b in rational_text()) {
        let p = kdv();
        let (f, g) = (expr(&p, &a), expr(&p, &b));
        let x = p.independents()[0];
        let lhs = f.mul(&g).partial(x);
        let rhs = f.partial(x).mul(&g).add(&f.mul(&g.partial(x)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn collect_round_trip(s in poly_text(JET_VARS, 6)) {
        let p = kdv();
        let e = expr(&p, &s);
        let coeffs = e.collect(|a| p.is_jet(a) && a.order() > 0).unwrap();
        let mut back = Expr::zero();
        for (m, c) in coeffs {
            back = back.add(&Expr::poly(c).mul(&Expr::poly(Poly::term(q(1), m))));
        }
        prop_assert_eq!(back, e);
    }

    #[test]
    fn mixed_partials_commute(s in rational_text()) {
        let p = kdv();
        let e = expr(&p, &s);
        let (x, u) = (p.independents()[0], p.dependents()[0].value());
        prop_assert_eq!(e.partial(x).partial(u), e.partial(u).partial(x));
    }

    #[test]
    fn total_derivatives_commute(s in rational_text()) {
        let p = kdv();
        let e = expr(&p, &s);
        let (x, t) = (p.independents()[0], p.independents()[1]);
        let xt = p.total_derivative(&p.total_derivative(&e, x), t);
        let tx = p.total_derivative(&p.total_derivative(&e, t), x);
        prop_assert_eq!(xt, tx);
    }

    #[test]
    fn prolongation_recursion_matches_direct_expansion(texts in generator_texts()) {
        let p = kdv();
        let g = generator(&p, &texts);
        let xs = p.independents().to_vec();
        let u = p.dependents()[0];
        // characteristic Q = eta - xi^i u_i
        let mut q = g.get(u.value());
        for (i, x) in xs.iter().enumerate() {
            let mut o = vec![0u16; xs.len()];
            o[i] = 1;
            q = q.sub(&g.get(*x).mul(&Expr::atom(u.derivative(&o))));
        }
        let mut pr = Prolonger::new(&p, &g);
        for orders in [[1u16, 0], [0, 1], [2, 0], [1, 1], [3, 0]] {
            let mut direct = q.clone();
            for (i, &k) in orders.iter().enumerate() {
                for _ in 0..k {
                    direct = p.total_derivative(&direct, xs[i]);
                }
            }
            for (i, x) in xs.iter().enumerate() {
                let mut o = orders.to_vec();
                o[i] += 1;
                direct = direct.add(&g.get(*x).mul(&Expr::atom(u.derivative(&o))));
            }
            prop_assert_eq!(pr.eta(u, &orders).unwrap(), direct);
        }
    }

    #[test]
    fn residual_is_linear(a in generator_texts(), b in generator_texts(), c1 in -3i64..=3, c2 in -3i64..=3) {
        let p = kdv();
        let (g1, g2) = (generator(&p, &a), generator(&p, &b));
        let (k1, k2) = (Expr::int(c1), Expr::int(c2));
        let combo = g1.scale(&k1).add(&g2.scale(&k2));
        let r = residual(&p, &combo).unwrap();
        let r1 = residual(&p, &g1).unwrap();
        let r2 = residual(&p, &g2).unwrap();
        for ((r, r1), r2) in r.iter().zip(&r1).zip(&r2) {
            prop_assert_eq!(r, &r1.mul(&k1).add(&r2.mul(&k2)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Affine generators `(a_i + b_i z_i) d/dz_i` integrate in closed form.
    #[test]
    fn affine_flows(a in prop::collection::vec(-3i32..=3, 3), b in prop::collection::vec(-2i32..=2, 3),
                    z in prop::collection::vec(0.5f64..1.5, 3), eps in prop::collection::vec(-0.4f64..0.4, 5)) {
        let p = kdv();
        let names = ["x", "U", "A"];
        let named: BTreeMap<String, String> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), format!("{} + {}*{}", a[i], b[i], n)))
            .collect();
        let g = GeneratorCandidate::parse_named(&p, &named).unwrap();
        let sol = integrate_closed_form(&g, "s").unwrap();
        prop_assert!(sol.closed.is_some());
        prop_assert!(sol.check_group_property().unwrap());
        let coords = p.coordinates();
        let mut point = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            point.insert(*c, z[i % 3]);
        }
        for e in eps {
            let closed = sol.eval_closed(&point, e).unwrap();
            let numeric = numeric_flow(&g, &point, e, 1e-9).unwrap();
            for ((t1, v1), (t2, v2)) in closed.iter().zip(&numeric) {
                prop_assert_eq!(t1, t2);
                prop_assert!((v1 - v2).abs() <= 1e-9 * v1.abs().max(1.0), "{} {} {}", t1, v1, v2);
            }
        }
    }
}
