mod common;

use common::*;
use equivgen::prolong::GeneratorCandidate;
use equivgen::report::RunReport;
use equivgen::symbolic::parse_expression;
use std::path::PathBuf;

const PROBLEMS: [&str; 4] = ["kdv", "wave_potential", "diffusion", "antiplane"];

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{}.json", name))
}

fn report(name: &str) -> String {
    let (code, out) = run(&["report", &problem_path(&format!("{}.eqv", name))]);
    assert_eq!(code, 0, "{}", name);
    out
}

#[test]
fn reports_match_golden_files() {
    for name in PROBLEMS {
        let first = report(name);
        assert_eq!(report(name), first, "{} is not deterministic", name);
        let path = golden(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &first).unwrap();
        }
        let expected = std::fs::read_to_string(&path).unwrap();
        assert!(expected == first, "{} differs from its golden file", name);
    }
}

#[test]
fn golden_reports_round_trip() {
    for name in PROBLEMS {
        let text = report(name);
        let r = RunReport::from_json(&text).unwrap();
        assert_eq!(r.to_json(), text);
        let p = problem(&format!("{}.eqv", name));
        let table = GeneratorCandidate::table_for(&p);
        let strings = r
            .generators
            .iter()
            .flat_map(|g| g.components.values())
            .chain(
                r.flows
                    .iter()
                    .flat_map(|f| f.closed_form.values().chain(f.odes.values())),
            );
        for s in strings {
            let e = parse_expression(s, &table).unwrap();
            assert_eq!(&e.to_string(), s);
        }
    }
}
