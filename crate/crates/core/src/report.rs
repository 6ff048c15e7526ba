//! Run reports: deterministic JSON with sorted keys, and LaTeX generator
//! lists.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::prolong::GeneratorCandidate;
use crate::symbolic::poly::factor_class;
use crate::symbolic::{Atom, Expr, FuncKind, Monomial, Poly, Q};
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub name: String,
    /// Nonzero components keyed by component name (`xi_x`, `eta_U`, ...).
    pub components: BTreeMap<String, String>,
    pub display: String,
}

impl GeneratorEntry {
    pub fn new(p: &Problem, name: &str, g: &GeneratorCandidate) -> Self {
        let components = g
            .components()
            .iter()
            .filter(|(_, e)| !e.is_zero())
            .map(|(t, e)| (p.component_name(*t), e.to_string()))
            .collect();
        GeneratorEntry {
            name: name.to_string(),
            components,
            display: g.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: BTreeMap<String, f64>,
    pub parameter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub generator: String,
    pub parameter: String,
    pub solvability: String,
    /// Right-hand sides of `d z*/dε = g(z*)`, keyed by coordinate.
    pub odes: BTreeMap<String, String>,
    pub closed_form: BTreeMap<String, String>,
    pub ode_check: bool,
    pub group_property: bool,
    #[serde(default)]
    pub evaluations: Vec<Evaluation>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationEntry {
    pub name: String,
    pub status: String,
    pub residuals: Vec<String>,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeterminingEntry {
    pub equation: String,
    pub provenance: String,
}

/// Counts that depend on canonical-form conventions; not contractual.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Informational {
    pub note: String,
    pub raw_split_count: usize,
    pub determining_count: usize,
    pub reduced_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz_columns: Option<usize>,
}

pub const INFORMATIONAL_NOTE: &str =
    "non-contractual: counts depend on the canonical form and the reduction order";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub generators: Vec<GeneratorEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub determining: Vec<DeterminingEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<FlowEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verification: Vec<VerificationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informational: Option<Informational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Wall time in seconds; only present when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str, digest: &str) -> Self {
        RunReport {
            command: command.to_string(),
            digest: digest.to_string(),
            ..Default::default()
        }
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("report: {}", e)))
    }

    /// One display-math line per generator.
    pub fn to_latex(&self, p: &Problem) -> Result<String> {
        let table = GeneratorCandidate::table_for(p);
        let mut out = String::new();
        for g in &self.generators {
            let mut parsed = BTreeMap::new();
            for (k, v) in &g.components {
                parsed.insert(k.clone(), crate::symbolic::parse_expression(v, &table)?);
            }
            let cand = GeneratorCandidate::from_named(p, &parsed)?;
            out.push_str(&format!(
                "\\[ {} = {} \\]\n",
                latex_name(&g.name),
                latex_generator(&cand)
            ));
        }
        Ok(out)
    }
}

fn latex_name(name: &str) -> String {
    let split = name.find(|c: char| c.is_ascii_digit());
    match split {
        Some(k) if k > 0 => format!("{}_{{{}}}", &name[..k], &name[k..]),
        _ => name.to_string(),
    }
}

fn latex_symbol(name: &str) -> String {
    let greek = [
        "alpha", "beta", "gamma", "delta", "epsilon", "theta", "kappa", "lambda", "mu", "nu",
        "rho", "sigma", "tau", "phi", "psi", "omega",
    ];
    if greek.contains(&name) {
        return format!("\\{}", name);
    }
    let split = name.find(|c: char| c.is_ascii_digit());
    match split {
        Some(k) if k > 0 && name[k..].chars().all(|c| c.is_ascii_digit()) => {
            format!("{}_{{{}}}", &name[..k], &name[k..])
        }
        _ if name.chars().count() > 1 => format!("\\mathrm{{{}}}", name),
        _ => name.to_string(),
    }
}

fn latex_atom(a: Atom) -> String {
    match a.as_func() {
        None => {
            let name = a.name();
            if let Some(inner) = name.strip_prefix("exp(").and_then(|s| s.strip_suffix(')')) {
                return format!("e^{{{}}}", inner.replace('*', " "));
            }
            latex_symbol(&name)
        }
        Some((h, orders)) => {
            let base = latex_symbol(&h.name());
            let args = h.args();
            match h.kind() {
                FuncKind::Opaque => {
                    let primes = "'".repeat(orders[0] as usize);
                    format!("{}{}({})", base, primes, latex_symbol(&args[0].name()))
                }
                _ => {
                    let mut sub = String::new();
                    for (v, &o) in args.iter().zip(&orders) {
                        for _ in 0..o {
                            sub.push_str(&latex_symbol(&v.name()));
                        }
                    }
                    if sub.is_empty() {
                        base
                    } else {
                        format!("{}_{{{}}}", base, sub)
                    }
                }
            }
        }
    }
}

fn latex_monomial(m: &Monomial) -> String {
    let mut factors = m.factors().to_vec();
    factors.sort_by_key(|(a, _)| (factor_class(*a), a.name().to_string()));
    factors
        .iter()
        .map(|&(a, e)| {
            let s = latex_atom(a);
            if e == 1 {
                s
            } else {
                format!("{}^{{{}}}", s, e)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn latex_rational(c: &Q) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", c.numer(), c.denom())
    }
}

fn latex_poly(p: &Poly) -> String {
    let terms = p.display_terms();
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (m, c)) in terms.iter().enumerate() {
        let neg = c.is_negative();
        let a = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if m.is_one() {
            out.push_str(&latex_rational(&a));
        } else if a.is_one() {
            out.push_str(&latex_monomial(m));
        } else {
            out.push_str(&format!("{} {}", latex_rational(&a), latex_monomial(m)));
        }
    }
    out
}

pub fn latex_expr(e: &Expr) -> String {
    if e.denom().is_one() {
        latex_poly(e.numer())
    } else {
        format!(
            "\\frac{{{}}}{{{}}}",
            latex_poly(e.numer()),
            latex_poly(e.denom())
        )
    }
}

/// `Σ c ∂/∂z` with the paper's fraction notation.
pub fn latex_generator(g: &GeneratorCandidate) -> String {
    let mut out = String::new();
    for (t, e) in g.components() {
        if e.is_zero() {
            continue;
        }
        let d = format!("\\frac{{\\partial}}{{\\partial {}}}", latex_atom(*t));
        let single = e.numer().len() == 1;
        let (neg, c) = if single && e.is_negative_leading() {
            (true, e.neg())
        } else {
            (false, e.clone())
        };
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let is_one = c.as_constant().map(|k| k.is_one()).unwrap_or(false);
        if is_one {
            out.push_str(&d);
        } else if single {
            out.push_str(&format!("{} {}", latex_expr(&c), d));
        } else {
            out.push_str(&format!("\\left({}\\right) {}", latex_expr(&c), d));
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVE: &str = "
independent x t
dependent U W
arbitrary C function(U)
equation D[x](W) = t*D[t](U) - U
equation D[t](W) = t*C^2*D[x](U)
";

    #[test]
    fn json_round_trip_and_sorted_keys() {
        let p = Problem::parse(WAVE).unwrap();
        let m: BTreeMap<String, String> = [
            ("xi_x", "W"),
            ("xi_t", "t*U"),
            ("eta_U", "U^2"),
            ("theta_C", "-2*U*C"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let g = GeneratorCandidate::parse_named(&p, &m).unwrap();
        let mut r = RunReport::new("derive", p.digest());
        r.dimension = Some(1);
        r.generators.push(GeneratorEntry::new(&p, "X1", &g));
        let s = r.to_json();
        assert_eq!(RunReport::from_json(&s).unwrap().to_json(), s);
        let keys: Vec<usize> = [
            "\"command\"",
            "\"digest\"",
            "\"dimension\"",
            "\"flags\"",
            "\"generators\"",
        ]
        .iter()
        .map(|k| s.find(k).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            r.to_latex(&p).unwrap(),
            "\\[ X_{1} = W \\frac{\\partial}{\\partial x} + t U \\frac{\\partial}{\\partial t} \
             + U^{2} \\frac{\\partial}{\\partial U} - 2 C U \\frac{\\partial}{\\partial C} \\]\n"
        );
    }

    #[test]
    fn latex_of_rational_and_jets() {
        let p = Problem::parse(WAVE).unwrap();
        let e =
            crate::symbolic::parse_expression("-x/(2*(U^2 + 1)) + D[x,t](W)", p.table()).unwrap();
        assert_eq!(
            latex_expr(&e),
            "\\frac{U^{2} W_{xt} - \\frac{1}{2} x + W_{xt}}{U^{2} + 1}"
        );
    }
}
