//! Declared DE families: variables, promoted arbitrary elements, solved
//! equations and their differential consequences.

use crate::error::{Error, Result};
use crate::symbolic::{
    bump, parse_expression, Atom, Expr, FuncKind, Head, Poly, Symbol, SymbolTable,
};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::Mutex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArbitraryKind {
    Constant,
    /// A function of the listed zeroth-order variables.
    Function(Vec<Atom>),
}

#[derive(Clone, Debug)]
pub struct Arbitrary {
    pub head: Head,
    pub kind: ArbitraryKind,
}

#[derive(Clone, Debug)]
pub struct Equation {
    pub lead: Atom,
    pub rhs: Expr,
}

impl Equation {
    /// `lead - rhs`, the expression that vanishes on solutions.
    pub fn residual_form(&self) -> Expr {
        Expr::atom(self.lead).sub(&self.rhs)
    }
}

/// Allowed arguments and ansatz settings of one infinitesimal component.
#[derive(Clone, Debug)]
pub struct ComponentDecl {
    pub name: String,
    /// The coordinate this component moves: an independent variable or a
    /// dependent value.
    pub target: Atom,
    pub allowed: Vec<Atom>,
    pub denominator: Option<Expr>,
    pub degree: Option<u32>,
}

/// Rewrite `atom^power -> replacement`, applied during on-manifold reduction.
#[derive(Clone, Debug)]
pub struct SideRule {
    pub atom: Atom,
    pub power: u32,
    pub replacement: Expr,
}

#[derive(Debug)]
pub struct Problem {
    digest: String,
    independents: Vec<Atom>,
    dependents: Vec<Head>,
    arbitrary: Vec<Arbitrary>,
    equations: Vec<Equation>,
    components: Vec<ComponentDecl>,
    side_rules: Vec<SideRule>,
    table: SymbolTable,
    order: usize,
    consequence_bound: usize,
    ansatz_degree: u32,
    solved: Mutex<HashMap<Atom, Expr>>,
}

impl Clone for Problem {
    fn clone(&self) -> Self {
        Problem {
            digest: self.digest.clone(),
            independents: self.independents.clone(),
            dependents: self.dependents.clone(),
            arbitrary: self.arbitrary.clone(),
            equations: self.equations.clone(),
            components: self.components.clone(),
            side_rules: self.side_rules.clone(),
            table: self.table.clone(),
            order: self.order,
            consequence_bound: self.consequence_bound,
            ansatz_degree: self.ansatz_degree,
            solved: Mutex::new(self.solved.lock().unwrap().clone()),
        }
    }
}

fn file_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ProblemFile {
        line,
        msg: msg.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

/// Extracts `name(...)` groups with balanced parentheses from an option list.
fn options(text: &str, line: usize) -> Result<Vec<(String, String)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        let name: String = chars[start..i].iter().collect();
        if name.is_empty() || i >= chars.len() || chars[i] != '(' {
            return Err(file_err(
                line,
                format!("malformed option near `{}`", &text[start.min(text.len())..]),
            ));
        }
        let mut depth = 0;
        let open = i;
        loop {
            if i >= chars.len() {
                return Err(file_err(line, "unbalanced parentheses"));
            }
            match chars[i] {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        out.push((name, chars[open + 1..i].iter().collect()));
        i += 1;
    }
    Ok(out)
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .collect()
}

struct PendingEquation {
    line: usize,
    lhs: Expr,
    rhs: Expr,
    lead: Option<Atom>,
}

struct PendingComponent {
    line: usize,
    name: String,
    allowed: Option<Vec<String>>,
    denominator: Option<String>,
    degree: Option<u32>,
}

impl Problem {
    /// Parses a problem file.
    pub fn parse(source: &str) -> Result<Problem> {
        let mut table = SymbolTable::new();
        let mut independents = Vec::new();
        let mut dep_names: Vec<String> = Vec::new();
        let mut arb_decls: Vec<(String, Option<Vec<String>>, usize)> = Vec::new();
        let mut heads_done = false;
        let mut dependents = Vec::new();
        let mut arbitrary = Vec::new();
        let mut pending: Vec<PendingEquation> = Vec::new();
        let mut comps: Vec<PendingComponent> = Vec::new();
        let mut side_src: Vec<(usize, String)> = Vec::new();
        let mut ansatz_degree = 3u32;
        let mut bound_override: Option<usize> = None;

        for (k, raw) in source.lines().enumerate() {
            let line = k + 1;
            let text = raw.split('#').next().unwrap().trim();
            if text.is_empty() {
                continue;
            }
            let (kw, rest) = match text.find(char::is_whitespace) {
                Some(p) => (&text[..p], text[p..].trim()),
                None => (text, ""),
            };
            let needs_heads = matches!(kw, "equation" | "solve_for" | "component" | "side");
            if needs_heads && !heads_done {
                if independents.is_empty() {
                    return Err(file_err(line, "no independent variables declared"));
                }
                // Dependent variables and arbitrary elements become functions of
                // all independent variables.
                for n in &dep_names {
                    let h = Head::new(n, &independents, FuncKind::Dependent);
                    table.insert(n, Symbol::Dependent(h))?;
                    dependents.push(h);
                }
                for (n, _, _) in &arb_decls {
                    let h = Head::new(n, &independents, FuncKind::Dependent);
                    table.insert(n, Symbol::Dependent(h))?;
                }
                for (n, vars, l) in &arb_decls {
                    let head = match table.get(n) {
                        Some(Symbol::Dependent(h)) => h,
                        _ => unreachable!(),
                    };
                    let kind = match vars {
                        None => ArbitraryKind::Constant,
                        Some(vs) => {
                            let mut atoms = Vec::new();
                            for v in vs {
                                match table.get(v) {
                                    Some(Symbol::Independent(a)) => atoms.push(a),
                                    Some(Symbol::Dependent(h)) if dependents.contains(&h) => {
                                        atoms.push(h.value())
                                    }
                                    _ => {
                                        return Err(file_err(
                                            *l,
                                            format!("`{}` is not a variable of the problem", v),
                                        ))
                                    }
                                }
                            }
                            ArbitraryKind::Function(atoms)
                        }
                    };
                    arbitrary.push(Arbitrary { head, kind });
                }
                heads_done = true;
            }
            if !needs_heads && heads_done && matches!(kw, "independent" | "dependent" | "arbitrary")
            {
                return Err(file_err(
                    line,
                    "variables must be declared before equations and components",
                ));
            }
            match kw {
                "independent" => {
                    for n in split_list(rest) {
                        if !is_ident(n) || n == "D" {
                            return Err(file_err(line, format!("bad identifier `{}`", n)));
                        }
                        let a = Atom::var(n);
                        table.insert(n, Symbol::Independent(a))?;
                        independents.push(a);
                    }
                }
                "dependent" => {
                    for n in split_list(rest) {
                        if !is_ident(n) || n == "D" {
                            return Err(file_err(line, format!("bad identifier `{}`", n)));
                        }
                        if dep_names.iter().any(|d| d == n) || arb_decls.iter().any(|a| a.0 == n) {
                            return Err(Error::Duplicate(n.to_string()));
                        }
                        dep_names.push(n.to_string());
                    }
                }
                "arbitrary" => {
                    let (name, spec) = match rest.find(char::is_whitespace) {
                        Some(p) => (&rest[..p], rest[p..].trim()),
                        None => {
                            return Err(file_err(
                                line,
                                "expected `arbitrary NAME constant|function(...)`",
                            ))
                        }
                    };
                    if !is_ident(name) {
                        return Err(file_err(line, format!("bad identifier `{}`", name)));
                    }
                    if dep_names.iter().any(|d| d == name) || arb_decls.iter().any(|a| a.0 == name)
                    {
                        return Err(Error::Duplicate(name.to_string()));
                    }
                    let vars = if spec == "constant" {
                        None
                    } else {
                        let opts = options(spec, line)?;
                        match opts.as_slice() {
                            [(f, args)] if f == "function" => {
                                Some(split_list(args).into_iter().map(String::from).collect())
                            }
                            _ => {
                                return Err(file_err(
                                    line,
                                    "expected `constant` or `function(...)`",
                                ))
                            }
                        }
                    };
                    arb_decls.push((name.to_string(), vars, line));
                }
                "equation" => {
                    let (l, r) = rest
                        .split_once('=')
                        .ok_or_else(|| file_err(line, "equation needs `=`"))?;
                    let lhs = parse_expression(l, &table)?;
                    let rhs = parse_expression(r, &table)?;
                    pending.push(PendingEquation {
                        line,
                        lhs,
                        rhs,
                        lead: None,
                    });
                }
                "solve_for" => {
                    let e = parse_expression(rest, &table)?;
                    let eq = pending
                        .last_mut()
                        .ok_or_else(|| file_err(line, "solve_for without a preceding equation"))?;
                    eq.lead =
                        Some(e.as_atom().ok_or_else(|| {
                            file_err(line, "solve_for expects a single derivative")
                        })?);
                }
                "component" => {
                    let (name, spec) = match rest.find(char::is_whitespace) {
                        Some(p) => (&rest[..p], rest[p..].trim()),
                        None => (rest, ""),
                    };
                    let mut pc = PendingComponent {
                        line,
                        name: name.to_string(),
                        allowed: None,
                        denominator: None,
                        degree: None,
                    };
                    for (opt, arg) in options(spec, line)? {
                        match opt.as_str() {
                            "depends" => {
                                pc.allowed =
                                    Some(split_list(&arg).into_iter().map(String::from).collect())
                            }
                            "denominator" => pc.denominator = Some(arg),
                            "degree" => {
                                pc.degree = Some(
                                    arg.trim()
                                        .parse()
                                        .map_err(|_| file_err(line, "bad degree"))?,
                                )
                            }
                            other => {
                                return Err(file_err(
                                    line,
                                    format!("unknown component option `{}`", other),
                                ))
                            }
                        }
                    }
                    comps.push(pc);
                }
                "ansatz_degree" => {
                    ansatz_degree = rest
                        .parse()
                        .map_err(|_| file_err(line, "bad ansatz degree"))?;
                }
                "consequence_bound" => {
                    bound_override = Some(rest.parse().map_err(|_| file_err(line, "bad bound"))?);
                }
                "side" => side_src.push((line, rest.to_string())),
                other => return Err(file_err(line, format!("unknown keyword `{}`", other))),
            }
        }
        if !heads_done {
            return Err(file_err(
                source.lines().count().max(1),
                "no equations declared",
            ));
        }

        let mut equations = Vec::new();
        for pe in pending {
            let lead = match pe.lead {
                Some(l) => l,
                None => pe
                    .lhs
                    .as_atom()
                    .filter(|a| a.order() > 0)
                    .ok_or_else(|| file_err(pe.line, "equation needs solve_for"))?,
            };
            let rhs = solve_linear(&pe.lhs.sub(&pe.rhs), lead)?;
            equations.push(Equation { lead, rhs });
        }

        let mut side_rules = Vec::new();
        for (line, s) in side_src {
            let (l, r) = s
                .split_once('=')
                .ok_or_else(|| file_err(line, "side rule needs `=`"))?;
            let lhs = parse_expression(l, &table)?;
            let rhs = parse_expression(r, &table)?;
            let (atom, power) = match lhs.numer().terms().next() {
                Some((m, c))
                    if lhs.is_polynomial()
                        && lhs.numer().len() == 1
                        && c == &crate::symbolic::q(1) =>
                {
                    match m.factors() {
                        [(a, e)] => (*a, *e),
                        _ => {
                            return Err(file_err(
                                line,
                                "side rule lhs must be a power of one symbol",
                            ))
                        }
                    }
                }
                _ => {
                    return Err(file_err(
                        line,
                        "side rule lhs must be a power of one symbol",
                    ))
                }
            };
            side_rules.push(SideRule {
                atom,
                power,
                replacement: rhs,
            });
        }

        let mut p = Problem {
            digest: hex::encode(Sha256::digest(source.as_bytes())),
            independents,
            dependents,
            arbitrary,
            equations,
            components: Vec::new(),
            side_rules,
            table,
            order: 0,
            consequence_bound: 0,
            ansatz_degree,
            solved: Mutex::new(HashMap::new()),
        };
        p.validate_equations()?;
        p.order = p.compute_order();
        p.consequence_bound = bound_override.unwrap_or(p.order + 2);
        p.components = p.build_components(comps)?;
        Ok(p)
    }

    fn compute_order(&self) -> usize {
        let mut k = 0;
        for eq in &self.equations {
            k = k.max(eq.lead.order() as usize);
            for a in eq.rhs.atoms() {
                if self.is_jet(a) {
                    k = k.max(a.order() as usize);
                }
            }
        }
        k
    }

    fn validate_equations(&self) -> Result<()> {
        for (i, eq) in self.equations.iter().enumerate() {
            if !self.is_jet(eq.lead) || eq.lead.order() == 0 {
                return Err(Error::NotSolvable {
                    lead: eq.lead.name().to_string(),
                    reason: "lead must be a derivative of a dependent variable".into(),
                });
            }
            if self.equations[..i].iter().any(|e| e.lead == eq.lead) {
                return Err(Error::DuplicateLead(eq.lead.name().to_string()));
            }
        }
        for eq in &self.equations {
            for a in eq.rhs.atoms() {
                if self.lead_for(a).is_some() {
                    return Err(Error::NotSolvable {
                        lead: eq.lead.name().to_string(),
                        reason: format!(
                            "right-hand side contains the solved derivative `{}`",
                            a.name()
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn build_components(&self, decls: Vec<PendingComponent>) -> Result<Vec<ComponentDecl>> {
        let mut out = Vec::new();
        let mut seen: HashMap<String, ()> = HashMap::new();
        let base_vars: Vec<Atom> = self
            .independents
            .iter()
            .copied()
            .chain(self.dependents.iter().map(|h| h.value()))
            .collect();
        let constants: Vec<Atom> = self
            .arbitrary
            .iter()
            .filter(|a| a.kind == ArbitraryKind::Constant)
            .map(|a| a.head.value())
            .collect();
        for target in self.coordinates() {
            let name = self.component_name(target);
            let allowed = if self.independents.contains(&target)
                || self.dependents.iter().any(|h| h.value() == target)
            {
                base_vars.clone()
            } else {
                let arb = self
                    .arbitrary
                    .iter()
                    .find(|a| a.head.value() == target)
                    .unwrap();
                match &arb.kind {
                    ArbitraryKind::Constant => constants.clone(),
                    ArbitraryKind::Function(vars) => {
                        let mut v = vars.clone();
                        v.push(target);
                        v
                    }
                }
            };
            out.push(ComponentDecl {
                name,
                target,
                allowed,
                denominator: None,
                degree: None,
            });
        }
        for d in decls {
            if seen.insert(d.name.clone(), ()).is_some() {
                return Err(Error::Duplicate(d.name));
            }
            let slot = out
                .iter_mut()
                .find(|c| c.name == d.name)
                .ok_or_else(|| Error::UnknownComponent(d.name.clone()))?;
            if let Some(names) = d.allowed {
                let mut atoms = Vec::new();
                for n in names {
                    let a = match self.table.get(&n) {
                        Some(Symbol::Independent(a)) => a,
                        Some(Symbol::Dependent(h)) => h.value(),
                        _ => {
                            return Err(file_err(
                                d.line,
                                format!("`{}` is not a zeroth-order variable", n),
                            ))
                        }
                    };
                    if !atoms.contains(&a) {
                        atoms.push(a);
                    }
                }
                // Keep coordinate order regardless of the listing order.
                let coords = self.coordinates();
                atoms.sort_by_key(|a| coords.iter().position(|c| c == a));
                slot.allowed = atoms;
            }
            if let Some(den) = d.denominator {
                let e = parse_expression(&den, &self.table)?;
                if e.is_zero() {
                    return Err(Error::ZeroDenominator);
                }
                if let Some(bad) = e.atoms().into_iter().find(|a| !slot.allowed.contains(a)) {
                    return Err(Error::Ansatz(format!(
                        "denominator of {} uses `{}` outside its arguments",
                        slot.name,
                        bad.name()
                    )));
                }
                slot.denominator = Some(e);
            }
            slot.degree = d.degree;
        }
        Ok(out)
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn independents(&self) -> &[Atom] {
        &self.independents
    }

    /// Original dependent variables.
    pub fn dependents(&self) -> &[Head] {
        &self.dependents
    }

    pub fn arbitrary(&self) -> &[Arbitrary] {
        &self.arbitrary
    }

    /// All dependent heads after promotion: original ones, then arbitrary elements.
    pub fn all_dependents(&self) -> Vec<Head> {
        self.dependents
            .iter()
            .copied()
            .chain(self.arbitrary.iter().map(|a| a.head))
            .collect()
    }

    /// Zeroth-order coordinates `(x, u, K)` in declaration order.
    pub fn coordinates(&self) -> Vec<Atom> {
        self.independents
            .iter()
            .copied()
            .chain(self.all_dependents().into_iter().map(|h| h.value()))
            .collect()
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn components(&self) -> &[ComponentDecl] {
        &self.components
    }

    pub fn component(&self, target: Atom) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| c.target == target)
    }

    pub fn component_by_name(&self, name: &str) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn side_rules(&self) -> &[SideRule] {
        &self.side_rules
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    /// Prolongation order: the highest derivative order in any equation.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn consequence_bound(&self) -> usize {
        self.consequence_bound
    }

    pub fn set_consequence_bound(&mut self, bound: usize) {
        self.consequence_bound = bound;
        self.solved.lock().unwrap().clear();
    }

    /// Replaces the ansatz denominator of a component.
    pub fn set_denominator(&mut self, name: &str, text: &str) -> Result<()> {
        let e = parse_expression(text, &self.table)?;
        let slot = self
            .components
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownComponent(name.to_string()))?;
        if let Some(bad) = e.atoms().into_iter().find(|a| !slot.allowed.contains(a)) {
            return Err(Error::Ansatz(format!(
                "denominator of {} uses `{}` outside its arguments",
                name,
                bad.name()
            )));
        }
        slot.denominator = Some(e);
        Ok(())
    }

    pub fn ansatz_degree(&self) -> u32 {
        self.ansatz_degree
    }

    pub fn component_name(&self, target: Atom) -> String {
        let name = target.name();
        if self.independents.contains(&target) {
            format!("xi_{}", name)
        } else if self.dependents.iter().any(|h| h.value() == target) {
            format!("eta_{}", name)
        } else {
            format!("theta_{}", name)
        }
    }

    /// Unknown-function head of a component, depending on every coordinate.
    pub fn component_head(&self, target: Atom) -> Head {
        Head::new(
            &self.component_name(target),
            &self.coordinates(),
            FuncKind::Unknown,
        )
    }

    pub fn is_jet(&self, a: Atom) -> bool {
        match a.head() {
            Some(h) => h.kind() == FuncKind::Dependent && self.all_dependents().contains(&h),
            None => false,
        }
    }

    /// Index of the first declared equation whose lead divides the jet `a`.
    pub fn lead_for(&self, a: Atom) -> Option<usize> {
        let (h, orders) = a.as_func()?;
        if h.kind() != FuncKind::Dependent {
            return None;
        }
        self.equations.iter().position(|eq| {
            let (lh, lo) = eq.lead.as_func().unwrap();
            lh == h && lo.iter().zip(&orders).all(|(l, o)| l <= o)
        })
    }

    /// Total derivative `D_v e`; jets gain an index, unknown and opaque
    /// functions differentiate through their arguments.
    pub fn total_derivative(&self, e: &Expr, v: Atom) -> Expr {
        e.derive(|a| total_of_atom(a, v))
    }

    /// The solved form of `lead` differentiated along `multi_index`, reached
    /// from that lead specifically.
    pub fn differential_consequence(&self, lead: Atom, multi_index: &[Atom]) -> Result<Expr> {
        let eq = self
            .equations
            .iter()
            .find(|e| e.lead == lead)
            .ok_or_else(|| Error::Input(format!("`{}` is not a solved lead", lead.name())))?;
        let total = lead.order() as usize + multi_index.len();
        if total > self.consequence_bound {
            return Err(Error::OrderBound {
                requested: total,
                bound: self.consequence_bound,
            });
        }
        let mut e = eq.rhs.clone();
        for &v in multi_index {
            e = self.on_manifold(&self.total_derivative(&e, v))?;
        }
        Ok(e)
    }

    fn solved_form(&self, a: Atom, depth: usize) -> Result<Expr> {
        if let Some(e) = self.solved.lock().unwrap().get(&a) {
            return Ok(e.clone());
        }
        if depth > 64 {
            return Err(Error::Circular);
        }
        if a.order() as usize > self.consequence_bound {
            return Err(Error::OrderBound {
                requested: a.order() as usize,
                bound: self.consequence_bound,
            });
        }
        let k = self.lead_for(a).expect("reducible jet");
        let eq = &self.equations[k];
        let e = if eq.lead == a {
            self.apply_side_rules(&eq.rhs)?
        } else {
            let (h, orders) = a.as_func().unwrap();
            let (_, lo) = eq.lead.as_func().unwrap();
            let i = (0..orders.len()).find(|&i| orders[i] > lo[i]).unwrap();
            let mut prev = orders.clone();
            prev[i] -= 1;
            let base = self.solved_form(h.derivative(&prev), depth + 1)?;
            let d = self.total_derivative(&base, self.independents[i]);
            self.reduce(&d, depth + 1)?
        };
        self.solved.lock().unwrap().insert(a, e.clone());
        Ok(e)
    }

    fn reduce(&self, e: &Expr, depth: usize) -> Result<Expr> {
        let mut rules = HashMap::new();
        for a in e.atoms() {
            if self.lead_for(a).is_some() {
                rules.insert(a, self.solved_form(a, depth)?);
            }
        }
        let out = e.substitute(&rules)?;
        let out = self.apply_side_rules(&out)?;
        if out.atoms().into_iter().any(|a| self.lead_for(a).is_some()) {
            if depth > 64 {
                return Err(Error::Circular);
            }
            return self.reduce(&out, depth + 1);
        }
        Ok(out)
    }

    /// Replaces every solved lead and differential consequence by its solved form.
    pub fn on_manifold(&self, e: &Expr) -> Result<Expr> {
        self.reduce(e, 0)
    }

    fn apply_side_rules(&self, e: &Expr) -> Result<Expr> {
        if self.side_rules.is_empty() {
            return Ok(e.clone());
        }
        let mut cur = e.clone();
        for _ in 0..32 {
            let n = rewrite_poly(cur.numer(), &self.side_rules)?;
            let d = rewrite_poly(cur.denom(), &self.side_rules)?;
            let next = n.div(&d)?;
            if next == cur {
                return Ok(next);
            }
            cur = next;
        }
        Err(Error::Circular)
    }

    /// Cross-derivative mismatches between leads of the same dependent
    /// variable, reduced on the manifold. Reported, not enforced.
    pub fn integrability_residuals(&self) -> Result<Vec<(Atom, Atom, Expr)>> {
        let mut out = Vec::new();
        for (i, a) in self.equations.iter().enumerate() {
            for b in &self.equations[i + 1..] {
                let (ha, oa) = a.lead.as_func().unwrap();
                let (hb, ob) = b.lead.as_func().unwrap();
                if ha != hb {
                    continue;
                }
                let top: Vec<u16> = oa.iter().zip(&ob).map(|(x, y)| *x.max(y)).collect();
                let path = |o: &[u16]| -> Vec<Atom> {
                    let mut idx = Vec::new();
                    for (k, (&t, &s)) in top.iter().zip(o).enumerate() {
                        for _ in s..t {
                            idx.push(self.independents[k]);
                        }
                    }
                    idx
                };
                let total: usize = top.iter().map(|&t| t as usize).sum();
                if total > self.consequence_bound {
                    continue;
                }
                let via_a = self.differential_consequence(a.lead, &path(&oa))?;
                let via_b = self.differential_consequence(b.lead, &path(&ob))?;
                let r = via_a.sub(&via_b);
                if !r.is_zero() {
                    out.push((a.lead, b.lead, r));
                }
            }
        }
        Ok(out)
    }
}

/// Action of the total derivative `D_v` on one atom.
pub fn total_of_atom(a: Atom, v: Atom) -> Poly {
    if a == v {
        return Poly::one();
    }
    let Some((head, _)) = a.as_func() else {
        return Poly::zero();
    };
    match head.kind() {
        FuncKind::Dependent => match bump(a, v) {
            Some(b) => Poly::atom(b),
            None => Poly::zero(),
        },
        FuncKind::Unknown | FuncKind::Opaque => {
            let mut out = Poly::zero();
            for arg in head.args() {
                let inner = total_of_atom(arg, v);
                if inner.is_zero() {
                    continue;
                }
                let d = bump(a, arg).expect("argument of head");
                out.add_assign(&inner.mul(&Poly::atom(d)));
            }
            out
        }
    }
}

/// Solves `f = 0` for `lead`, requiring `f` to be linear in it.
pub fn solve_linear(f: &Expr, lead: Atom) -> Result<Expr> {
    let err = |reason: &str| Error::NotSolvable {
        lead: lead.name().to_string(),
        reason: reason.to_string(),
    };
    if f.denom().contains(lead) {
        return Err(err("derivative appears in a denominator"));
    }
    let coeffs = f.numer().coefficients_in(lead);
    match coeffs.len() {
        0 | 1 => Err(err(
            "derivative does not appear after moving all terms to one side",
        )),
        2 => {
            let a = Expr::poly(coeffs[1].clone());
            let b = Expr::poly(coeffs[0].clone());
            let rhs = b.neg().div(&a)?;
            if rhs.contains(lead) {
                return Err(err("lead appears in the right-hand side"));
            }
            Ok(rhs)
        }
        _ => Err(err("equation is nonlinear in the derivative")),
    }
}

fn rewrite_poly(p: &Poly, rules: &[SideRule]) -> Result<Expr> {
    let mut acc = Expr::zero();
    let mut plain = Poly::zero();
    for (m, c) in p.terms() {
        let mut val = Expr::rational(c.clone());
        let mut kept = Vec::new();
        let mut touched = false;
        for &(a, e) in m.factors() {
            match rules.iter().find(|r| r.atom == a && e >= r.power) {
                Some(r) => {
                    touched = true;
                    let d = e / r.power;
                    let rem = e % r.power;
                    val = val.mul(&r.replacement.pow(d as i32)?);
                    if rem > 0 {
                        kept.push((a, rem));
                    }
                }
                None => kept.push((a, e)),
            }
        }
        let mono = Expr::poly(Poly::term(
            crate::symbolic::q(1),
            crate::symbolic::Monomial::from_pairs(kept),
        ));
        if touched {
            acc = acc.add(&val.mul(&mono));
        } else {
            plain.add_term(m.clone(), c.clone());
        }
    }
    Ok(acc.add(&Expr::poly(plain)))
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

    fn ex(p: &Problem, s: &str) -> Expr {
        parse_expression(s, p.table()).unwrap()
    }

    #[test]
    fn kdv_declaration() {
        let p = Problem::parse(KDV).unwrap();
        assert_eq!(p.all_dependents().len(), 4);
        assert_eq!(p.order(), 3);
        let eq = &p.equations()[0];
        assert_eq!(eq.rhs, ex(&p, "-A*D[x](U) - B*U*D[x](U) - Q*D[x,x,x](U)"));
        let th = p.component_by_name("theta_A").unwrap();
        assert_eq!(th.allowed.len(), 3);
    }

    #[test]
    fn kdv_consequence_in_x() {
        let p = Problem::parse(KDV).unwrap();
        let x = Atom::var("x");
        let lead = p.equations()[0].lead;
        let c = p.differential_consequence(lead, &[x]).unwrap();
        let want = ex(
            &p,
            "-D[x](A)*D[x](U) - A*D[x,x](U) - D[x](B)*U*D[x](U) - B*D[x](U)^2 - B*U*D[x,x](U) - D[x](Q)*D[x,x,x](U) - Q*D[x,x,x,x](U)",
        );
        assert_eq!(c, want);
        assert_eq!(p.on_manifold(&ex(&p, "D[x,t](U)")).unwrap(), want);
        assert_eq!(
            p.on_manifold(&ex(&p, "D[x](U)")).unwrap(),
            ex(&p, "D[x](U)")
        );
    }

    #[test]
    fn lead_in_rhs_rejected() {
        let src =
            "independent x t\ndependent U\nequation D[t](U) = D[t](U) + 1\nsolve_for D[t](U)\n";
        assert!(matches!(
            Problem::parse(src),
            Err(Error::NotSolvable { .. })
        ));
        let dup = "independent x t\ndependent U\nequation D[t](U) = U\nequation D[t](U) = 2*U\n";
        assert!(matches!(Problem::parse(dup), Err(Error::DuplicateLead(_))));
    }

    #[test]
    fn order_bound_enforced() {
        let p = Problem::parse(KDV).unwrap();
        let x = Atom::var("x");
        let lead = p.equations()[0].lead;
        assert!(matches!(
            p.differential_consequence(lead, &[x, x, x, x, x]),
            Err(Error::OrderBound { .. })
        ));
    }

    #[test]
    fn side_rule_power_reduction() {
        let src = "independent x t\ndependent U\narbitrary S constant\nequation D[t](U) = S^3*D[x](U)\nside S^2 = 1 - U\n";
        let p = Problem::parse(src).unwrap();
        let e = p.on_manifold(&ex(&p, "D[t](U)")).unwrap();
        assert_eq!(e, ex(&p, "S*D[x](U) - S*U*D[x](U)"));
    }
}
