//! `equivgen`: equivalence generators for families of differential equations.

use clap::{Parser, Subcommand, ValueEnum};
use equivgen::flows::{integrate_closed_form, lie_odes, numeric_flow, FlowSolution, Solvability};
use equivgen::problem::Problem;
use equivgen::prolong::GeneratorCandidate;
use equivgen::report::{
    DeterminingEntry, Evaluation, FlowEntry, GeneratorEntry, Informational, RunReport,
    VerificationEntry, INFORMATIONAL_NOTE,
};
use equivgen::solver::{derive, Derivation};
use equivgen::symbolic::{parse_expression, Atom, FuncKind, Head, Symbol};
use equivgen::verify::{
    verify_affine_transformation, verify_generator, AffineMap, VerificationReport,
};
use equivgen::{Error, Result};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const DOMAIN_NOTE: &str = "closed forms are reported without restrictions on the parameter domain";

#[derive(Parser)]
#[command(
    name = "equivgen",
    version,
    about = "Equivalence transformations of DE families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Latex,
}

#[derive(clap::Args)]
struct Common {
    /// Problem file.
    problem: PathBuf,
    /// Bound on the order of differential consequences.
    #[arg(long)]
    max_consequence_order: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Total degree of the polynomial ansatz.
    #[arg(long)]
    ansatz_degree: Option<u32>,
    /// Denominator for one component, `theta_A=(1 + K^2)^2`.
    #[arg(long, value_name = "COMP=EXPR")]
    denominator: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a basis of equivalence generators.
    Derive {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Include wall time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Emit the determining system.
    Split {
        #[command(flatten)]
        common: Common,
    },
    /// Check generators and affine maps from a JSON file.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Generators file.
        generators: PathBuf,
    },
    /// Integrate a generator to its one-parameter group.
    Flow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: SolveArgs,
        /// 1-based index into the derived basis, or a generators file
        /// (`file.json#Name` picks one entry).
        #[arg(long)]
        generator: String,
        #[arg(long, default_value = "s")]
        param_name: String,
        /// Evaluation request `x=1,t=1,U=1@0.1`.
        #[arg(long)]
        eval: Vec<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Derive, verify the basis and integrate every member.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, default_value = "s")]
        param_name: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        timing: bool,
    },
}

/// A failure together with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Contradiction(_) => 3,
            _ => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure {
        code: 4,
        message: msg.into(),
    }
}

fn degree_cap() -> std::result::Result<u32, Failure> {
    match std::env::var("EQUIVGEN_MAX_DEGREE") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| input(format!("EQUIVGEN_MAX_DEGREE: `{}` is not a degree", v))),
        Err(_) => Ok(6),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {}", path.display(), e)))
}

fn load(
    common: &Common,
    solve: Option<&SolveArgs>,
    flags: &mut BTreeMap<String, String>,
) -> std::result::Result<Problem, Failure> {
    let mut p = Problem::parse(&read(&common.problem)?)?;
    let file = common
        .problem
        .file_name()
        .map(|f| f.to_string_lossy().to_string())
        .unwrap_or_default();
    flags.insert("problem".into(), file);
    if let Some(k) = common.max_consequence_order {
        p.set_consequence_bound(k);
        flags.insert("max-consequence-order".into(), k.to_string());
    }
    if let Some(s) = solve {
        for d in &s.denominator {
            let (name, text) = d
                .split_once('=')
                .ok_or_else(|| input(format!("--denominator `{}`: expected COMP=EXPR", d)))?;
            p.set_denominator(name.trim(), text)?;
        }
        if !s.denominator.is_empty() {
            flags.insert("denominator".into(), s.denominator.join(";"));
        }
        if let Some(d) = s.ansatz_degree {
            flags.insert("ansatz-degree".into(), d.to_string());
        }
    }
    Ok(p)
}

fn emit(text: &str, out: &Option<PathBuf>) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| input(format!("{}: {}", path.display(), e)))
        }
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn render(r: &RunReport, p: &Problem, format: Format) -> std::result::Result<String, Failure> {
    Ok(match format {
        Format::Json => r.to_json(),
        Format::Latex => r.to_latex(p)?,
    })
}

fn informational(d: &Derivation) -> Informational {
    Informational {
        note: INFORMATIONAL_NOTE.into(),
        raw_split_count: d.raw_count,
        determining_count: d.determining_count,
        reduced_count: d.reduced_count,
        ansatz_columns: Some(d.basis.columns),
    }
}

fn run_derive(
    p: &Problem,
    solve: &SolveArgs,
    r: &mut RunReport,
) -> std::result::Result<Vec<GeneratorCandidate>, Failure> {
    let d = derive(p, solve.ansatz_degree, degree_cap()?)?;
    r.dimension = Some(d.basis.dimension());
    r.generators = d
        .basis
        .members
        .iter()
        .enumerate()
        .map(|(i, g)| GeneratorEntry::new(p, &format!("X{}", i + 1), g))
        .collect();
    r.informational = Some(informational(&d));
    Ok(d.basis.members)
}

fn verification_entry(name: &str, v: &VerificationReport) -> VerificationEntry {
    VerificationEntry {
        name: name.to_string(),
        status: if v.verified() { "verified" } else { "refuted" }.into(),
        residuals: v.residuals.clone(),
        violations: v.violations.clone(),
    }
}

fn solvability(s: Solvability) -> String {
    match s {
        Solvability::ClosedForm => "closed-form".into(),
        Solvability::NumericOnly => "numeric-only".into(),
    }
}

fn flow_entry(
    name: &str,
    g: &GeneratorCandidate,
    param: &str,
) -> Result<(FlowEntry, FlowSolution)> {
    let sol = integrate_closed_form(g, param)?;
    let odes = lie_odes(g)?
        .into_iter()
        .map(|o| (o.target.name().to_string(), o.rhs.to_string()))
        .collect();
    let closed = sol.closed.is_some();
    let entry = FlowEntry {
        generator: name.to_string(),
        parameter: param.to_string(),
        solvability: solvability(sol.tag()),
        odes,
        closed_form: sol.strings(),
        ode_check: closed && sol.check_odes()?,
        group_property: closed && sol.check_group_property()?,
        evaluations: Vec::new(),
    };
    Ok((entry, sol))
}

/// Opaque declarations `{"F1": "t"}` added to a generator symbol table.
fn opaque_table(
    p: &Problem,
    doc: &Value,
) -> std::result::Result<equivgen::symbolic::SymbolTable, Failure> {
    let mut table = GeneratorCandidate::table_for(p);
    if let Some(map) = doc.get("opaque").and_then(Value::as_object) {
        for (name, arg) in map {
            let arg = arg
                .as_str()
                .ok_or_else(|| input(format!("opaque `{}`: argument must be a string", name)))?;
            let var = p
                .independents()
                .iter()
                .chain(p.coordinates().iter())
                .find(|a| &*a.name() == arg)
                .copied()
                .ok_or_else(|| input(format!("opaque `{}`: unknown argument `{}`", name, arg)))?;
            table.insert(
                name,
                Symbol::Opaque(Head::new(name, &[var], FuncKind::Opaque)),
            )?;
        }
    }
    Ok(table)
}

fn string_map(v: &Value, what: &str) -> std::result::Result<BTreeMap<String, String>, Failure> {
    let obj = v
        .as_object()
        .ok_or_else(|| input(format!("{}: expected an object", what)))?;
    obj.iter()
        .map(|(k, v)| {
            let s = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                _ => {
                    return Err(input(format!(
                        "{}: `{}` must be an expression string",
                        what, k
                    )))
                }
            };
            Ok((k.clone(), s))
        })
        .collect()
}

/// Named generators from a generators document.
fn generators_from(
    p: &Problem,
    doc: &Value,
) -> std::result::Result<Vec<(String, GeneratorCandidate)>, Failure> {
    let table = opaque_table(p, doc)?;
    let mut out = Vec::new();
    let list = doc
        .get("generators")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    for (i, item) in list.iter().enumerate() {
        let name = item
            .get("name")
            .and_then(Value::as_str)
            .map(String::from)
            .unwrap_or_else(|| format!("X{}", i + 1));
        let comps = string_map(item.get("components").unwrap_or(&Value::Null), &name)?;
        let mut parsed = BTreeMap::new();
        for (k, v) in comps {
            parsed.insert(k, parse_expression(&v, &table)?);
        }
        out.push((name, GeneratorCandidate::from_named(p, &parsed)?));
    }
    Ok(out)
}

fn parse_doc(path: &Path) -> std::result::Result<Value, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {}", path.display(), e)))
}

fn number(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => text.parse().ok(),
    }
}

/// `x=1,t=1/2@0.1` into the point and the parameter value.
fn parse_eval(
    p: &Problem,
    text: &str,
) -> std::result::Result<(BTreeMap<String, f64>, HashMap<Atom, f64>, f64), Failure> {
    let bad = || {
        input(format!(
            "--eval `{}`: expected `name=value,...@parameter`",
            text
        ))
    };
    let (pt, eps) = text.rsplit_once('@').ok_or_else(bad)?;
    let eps = number(eps).ok_or_else(bad)?;
    let mut named = BTreeMap::new();
    let mut atoms = HashMap::new();
    for pair in pt.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(bad)?;
        let k = k.trim();
        let v = number(v).ok_or_else(bad)?;
        let atom = p
            .coordinates()
            .into_iter()
            .find(|a| &*a.name() == k)
            .unwrap_or_else(|| Atom::var(k));
        named.insert(k.to_string(), v);
        atoms.insert(atom, v);
    }
    Ok((named, atoms, eps))
}

fn named_values(v: Vec<(Atom, f64)>) -> BTreeMap<String, f64> {
    v.into_iter()
        .map(|(a, x)| (a.name().to_string(), x))
        .collect()
}

fn run(cli: Cli) -> std::result::Result<u8, Failure> {
    let start = Instant::now();
    let mut flags = BTreeMap::new();
    match cli.command {
        Command::Derive {
            common,
            solve,
            format,
            timing,
        } => {
            let p = load(&common, Some(&solve), &mut flags)?;
            let mut r = RunReport::new("derive", p.digest());
            r.flags = flags;
            let basis = run_derive(&p, &solve, &mut r)?;
            if timing {
                r.timing = Some(start.elapsed().as_secs_f64());
            }
            emit(&render(&r, &p, format)?, &common.out)?;
            Ok(if basis.is_empty() { 3 } else { 0 })
        }
        Command::Split { common } => {
            let p = load(&common, None, &mut flags)?;
            let ds =
                equivgen::determining::generate_determining(&p, &GeneratorCandidate::unknown(&p))?;
            let rs = equivgen::solver::trivial_reduce(&ds)?;
            let mut r = RunReport::new("split", p.digest());
            r.flags = flags;
            r.determining = ds
                .equations
                .iter()
                .map(|(e, prov)| DeterminingEntry {
                    equation: e.to_string(),
                    provenance: serde_json::to_value(prov)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default(),
                })
                .collect();
            r.informational = Some(Informational {
                note: INFORMATIONAL_NOTE.into(),
                raw_split_count: ds.raw_count,
                determining_count: ds.len(),
                reduced_count: rs.system.len(),
                ansatz_columns: None,
            });
            emit(&r.to_json(), &common.out)?;
            Ok(0)
        }
        Command::Verify { common, generators } => {
            let p = load(&common, None, &mut flags)?;
            let doc = parse_doc(&generators)?;
            let file = generators
                .file_name()
                .map(|f| f.to_string_lossy().to_string())
                .unwrap_or_default();
            flags.insert("generators".into(), file);
            let mut r = RunReport::new("verify", p.digest());
            r.flags = flags;
            for (name, g) in generators_from(&p, &doc)? {
                r.verification
                    .push(verification_entry(&name, &verify_generator(&p, &g)?));
            }
            let maps = doc
                .get("maps")
                .and_then(Value::as_array)
                .cloned()
                .unwrap_or_default();
            for (i, m) in maps.iter().enumerate() {
                let name = m
                    .get("name")
                    .and_then(Value::as_str)
                    .map(String::from)
                    .unwrap_or_else(|| format!("M{}", i + 1));
                let images = string_map(m.get("images").unwrap_or(&Value::Null), &name)?;
                let map = AffineMap::parse_named(&p, &images)?;
                r.verification.push(verification_entry(
                    &name,
                    &verify_affine_transformation(&p, &map)?,
                ));
            }
            let refuted = r.verification.iter().any(|v| v.status != "verified");
            emit(&r.to_json(), &common.out)?;
            Ok(if refuted { 2 } else { 0 })
        }
        Command::Flow {
            common,
            solve,
            generator,
            param_name,
            eval,
            tol,
        } => {
            let p = load(&common, Some(&solve), &mut flags)?;
            if !(tol > 0.0) {
                return Err(input("--tol must be positive"));
            }
            flags.insert("generator".into(), generator.clone());
            flags.insert("param-name".into(), param_name.clone());
            flags.insert("tol".into(), format!("{:e}", tol));
            if !eval.is_empty() {
                flags.insert("eval".into(), eval.join(";"));
            }
            let mut r = RunReport::new("flow", p.digest());
            let gens: Vec<(String, GeneratorCandidate)> = match generator.parse::<usize>() {
                Ok(k) => {
                    let basis = run_derive(&p, &solve, &mut r)?;
                    let g = basis.get(k.wrapping_sub(1)).cloned().ok_or_else(|| {
                        input(format!(
                            "--generator {}: the basis has {} members",
                            k,
                            basis.len()
                        ))
                    })?;
                    vec![(format!("X{}", k), g)]
                }
                Err(_) => {
                    let (path, pick) = match generator.split_once('#') {
                        Some((f, n)) => (f.to_string(), Some(n.to_string())),
                        None => (generator.clone(), None),
                    };
                    let all = generators_from(&p, &parse_doc(Path::new(&path))?)?;
                    let chosen: Vec<_> = all
                        .into_iter()
                        .filter(|(n, _)| pick.as_ref().map(|k| k == n).unwrap_or(true))
                        .collect();
                    if chosen.is_empty() {
                        return Err(input(format!(
                            "--generator {}: no matching generator",
                            generator
                        )));
                    }
                    r.generators = chosen
                        .iter()
                        .map(|(n, g)| GeneratorEntry::new(&p, n, g))
                        .collect();
                    chosen
                }
            };
            r.flags = flags;
            let evals = eval
                .iter()
                .map(|e| parse_eval(&p, e))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            for (name, g) in &gens {
                let (mut entry, sol) = flow_entry(name, g, &param_name)?;
                for (named, atoms, eps) in &evals {
                    let mut ev = Evaluation {
                        point: named.clone(),
                        parameter: *eps,
                        ..Default::default()
                    };
                    ev.closed_form = sol.eval_closed(atoms, *eps).map(named_values);
                    match numeric_flow(g, atoms, *eps, tol) {
                        Ok(v) => ev.numeric = Some(named_values(v)),
                        Err(e) => ev.error = Some(e.to_string()),
                    }
                    entry.evaluations.push(ev);
                }
                r.flows.push(entry);
            }
            r.notes.push(DOMAIN_NOTE.into());
            emit(&r.to_json(), &common.out)?;
            Ok(0)
        }
        Command::Report {
            common,
            solve,
            param_name,
            format,
            timing,
        } => {
            let p = load(&common, Some(&solve), &mut flags)?;
            flags.insert("param-name".into(), param_name.clone());
            let mut r = RunReport::new("report", p.digest());
            r.flags = flags;
            let basis = run_derive(&p, &solve, &mut r)?;
            for (i, g) in basis.iter().enumerate() {
                let name = format!("X{}", i + 1);
                r.verification
                    .push(verification_entry(&name, &verify_generator(&p, g)?));
                match flow_entry(&name, g, &param_name) {
                    Ok((entry, _)) => r.flows.push(entry),
                    Err(e) => r.notes.push(format!("{}: no flow ({})", name, e)),
                }
            }
            r.notes.push(DOMAIN_NOTE.into());
            if timing {
                r.timing = Some(start.elapsed().as_secs_f64());
            }
            emit(&render(&r, &p, format)?, &common.out)?;
            let refuted = r.verification.iter().any(|v| v.status != "verified");
            Ok(if basis.is_empty() {
                3
            } else if refuted {
                2
            } else {
                0
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
