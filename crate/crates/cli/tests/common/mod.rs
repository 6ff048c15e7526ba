#![allow(dead_code)]

use equivgen::problem::Problem;
use equivgen::prolong::GeneratorCandidate;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn problem_path(name: &str) -> String {
    root()
        .join("problems")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

pub fn gens_path(name: &str) -> String {
    root()
        .join("problems/gens")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

pub fn problem(name: &str) -> Problem {
    Problem::parse(&std::fs::read_to_string(problem_path(name)).unwrap()).unwrap()
}

/// Exit code and stdout of the `equivgen` binary.
pub fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_equivgen"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

pub fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

/// Generators of a generators document or report.
pub fn generators(p: &Problem, doc: &Value) -> Vec<(String, GeneratorCandidate)> {
    doc["generators"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| {
            let comps: BTreeMap<String, String> = g["components"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
                .collect();
            (
                g["name"].as_str().unwrap().to_string(),
                GeneratorCandidate::parse_named(p, &comps).unwrap(),
            )
        })
        .collect()
}

pub fn generators_file(p: &Problem, name: &str) -> Vec<(String, GeneratorCandidate)> {
    generators(p, &json(&std::fs::read_to_string(gens_path(name)).unwrap()))
}

pub fn named(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
