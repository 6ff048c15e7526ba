mod common;

use common::*;

#[test]
fn derive_kdv_json_and_latex() {
    let (code, out) = run(&["derive", &problem_path("kdv.eqv"), "--ansatz-degree", "2"]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["dimension"], 7);
    assert_eq!(r["generators"].as_array().unwrap().len(), 7);
    assert_eq!(r["flags"]["ansatz-degree"], "2");
    assert!(r.get("timing").is_none());
    let (code, tex) = run(&["derive", &problem_path("kdv.eqv"), "--format", "latex"]);
    assert_eq!(code, 0);
    assert_eq!(tex.lines().count(), 7);
    assert!(tex
        .lines()
        .all(|l| l.starts_with("\\[ X_{") && l.ends_with(" \\]")));
}

#[test]
fn timing_only_on_request() {
    let (_, out) = run(&["derive", &problem_path("kdv.eqv"), "--timing"]);
    assert!(json(&out)["timing"].as_f64().unwrap() >= 0.0);
}

#[test]
fn empty_basis_exits_3() {
    let dir = std::env::temp_dir().join(format!("equivgen-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("frozen.eqv");
    std::fs::write(
        &path,
        "independent x t\ndependent U\nequation D[t](U) = x*t*U*D[x,x](U) + x\n\
         component xi_x depends()\ncomponent xi_t depends()\ncomponent eta_U depends()\n",
    )
    .unwrap();
    let (code, out) = run(&["derive", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    let r = json(&out);
    assert_eq!(r["dimension"], 0);
    assert!(r["generators"].as_array().unwrap().is_empty());
}

#[test]
fn input_errors_exit_4() {
    let (code, _) = run(&["derive", "/nonexistent/problem.eqv"]);
    assert_eq!(code, 4);
    let (code, _) = run(&[
        "derive",
        &problem_path("kdv.eqv"),
        "--denominator",
        "theta_A",
    ]);
    assert_eq!(code, 4);
    let (code, _) = run(&["flow", &problem_path("kdv.eqv"), "--generator", "99"]);
    assert_eq!(code, 4);
}

#[test]
fn degree_cap_from_environment() {
    let columns = |cap: &str| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_equivgen"))
            .args(["derive", &problem_path("kdv.eqv"), "--ansatz-degree", "3"])
            .env("EQUIVGEN_MAX_DEGREE", cap)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let r = json(&String::from_utf8(out.stdout).unwrap());
        r["informational"]["ansatz_columns"].as_u64().unwrap()
    };
    assert!(columns("2") < columns("3"));
    assert_eq!(columns("3"), columns("6"));
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_equivgen"))
        .args(["derive", &problem_path("kdv.eqv")])
        .env("EQUIVGEN_MAX_DEGREE", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_exit_codes() {
    let (code, out) = run(&[
        "verify",
        &problem_path("kdv_burgers.eqv"),
        &gens_path("x3_F1_t.json"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["verification"][0]["status"], "verified");
    let (code, out) = run(&[
        "verify",
        &problem_path("wave_potential.eqv"),
        &gens_path("wave_z1.json"),
    ]);
    assert_eq!(code, 2);
    let r = json(&out);
    assert_eq!(r["verification"][0]["status"], "refuted");
    assert!(!r["verification"][0]["residuals"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn verify_with_declared_opaque_function() {
    let (code, out) = run(&[
        "verify",
        &problem_path("kdv_burgers.eqv"),
        &gens_path("kdv_burgers_point.json"),
    ]);
    assert_eq!(code, 0, "{}", out);
    assert_eq!(json(&out)["verification"].as_array().unwrap().len(), 4);
}

#[test]
fn flow_from_basis_index() {
    let (code, out) = run(&[
        "flow",
        &problem_path("kdv.eqv"),
        "--generator",
        "1",
        "--eval",
        "x=0,t=0,U=0,A=1,B=1,Q=1@1",
    ]);
    assert_eq!(code, 0);
    let r = json(&out);
    let f = &r["flows"][0];
    assert_eq!(f["closed_form"]["x"], "s + x");
    let ev = &f["evaluations"][0];
    assert!((ev["numeric"]["x"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((ev["closed_form"]["x"].as_f64().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn flow_reports_singularity() {
    let g = format!("{}#minus_X8", gens_path("wave_x8.json"));
    let (code, out) = run(&[
        "flow",
        &problem_path("wave_potential.eqv"),
        "--generator",
        &g,
        "--param-name",
        "B",
        "--eval",
        "x=1,t=1,U=-10,W=1,C=1@0.1",
    ]);
    assert_eq!(code, 0);
    let ev = &json(&out)["flows"][0]["evaluations"][0];
    assert!(ev["error"].as_str().unwrap().contains("singularity"));
    assert!(ev.get("numeric").is_none());
}

#[test]
fn split_lists_determining_equations() {
    let (code, out) = run(&["split", &problem_path("kdv.eqv")]);
    assert_eq!(code, 0);
    let r = json(&out);
    let eqs = r["determining"].as_array().unwrap();
    assert_eq!(
        eqs.len() as u64,
        r["informational"]["determining_count"].as_u64().unwrap()
    );
    assert!(eqs.iter().any(|e| e["provenance"] == "split"));
    assert!(eqs.iter().any(|e| e["provenance"] == "restriction"));
}

#[test]
fn output_file() {
    let path = std::env::temp_dir().join(format!("equivgen-out-{}.json", std::process::id()));
    let (code, out) = run(&[
        "derive",
        &problem_path("kdv.eqv"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert_eq!(
        json(&std::fs::read_to_string(&path).unwrap())["dimension"],
        7
    );
}
