use kwick::cli::{parse_expr, parse_spec, Expr, ExprOp, OSCILLATOR_SPEC};
use kwick::{Branch, Error, FieldKind};
use proptest::prelude::*;
use serde_json::Value;
use std::process::Command;

fn kwick(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kwick"));
    cmd.args(args).env_remove("KW_DIM_CAP");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn spec_path(name: &str) -> String {
    format!("{}/specs/{}", env!("CARGO_MANIFEST_DIR"), name)
}

#[test]
fn expect_oscillator_pair() {
    let (t, tp) = (2.0f64, 0.75f64);
    let expr = format!("vev[Q-(x1,{}) Q+(x1,{})]", t, tp);
    let (code, out) = kwick(&["expect", "--expr", &expr], &[]);
    assert_eq!(code, 0, "{}", out);
    let v = json(&out);
    let want = kwick::C64::from_polar(0.5, -(t - tp));
    assert!((v["value"]["re"].as_f64().unwrap() - want.re).abs() < 1e-12);
    assert!((v["value"]["im"].as_f64().unwrap() - want.im).abs() < 1e-12);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["spec-hash"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_all_bundled_oscillator() {
    let (code, out) = kwick(&["verify", "all"], &[]);
    assert_eq!(code, 0, "{}", out);
    let v = json(&out);
    assert!(v["checks"].as_array().unwrap().len() > 20);
}

#[test]
fn verify_all_fermi_channel() {
    let (code, out) = kwick(&["--spec", &spec_path("fermi_channel.kw"), "verify", "all"], &[]);
    assert_eq!(code, 0, "{}", out);
}

#[test]
fn malformed_spec_exits_2() {
    let dir = std::env::temp_dir().join(format!("kwick-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.kw");
    std::fs::write(&p, "[channel]\nstatistics = bose\nspin = 1\n").unwrap();
    let (code, out) = kwick(&["--spec", p.to_str().unwrap(), "verify", "wick"], &[]);
    assert_eq!(code, 2);
    let v = json(&out);
    assert_eq!(v["error"]["line"], Value::from(3));
    assert_eq!(v["pass"], Value::Bool(false));
}

#[test]
fn bad_expression_and_usage_exit_2() {
    assert_eq!(kwick(&["expect", "--expr", "Q(x1,1.0)"], &[]).0, 2);
    assert_eq!(kwick(&["expect", "--expr", "Q+(y9,1.0)"], &[]).0, 2);
    assert_eq!(kwick(&["expect", "--expr", "psi+(x1,1.0)"], &[]).0, 2);
    assert_eq!(kwick(&["frobnicate"], &[]).0, 2);
    assert_eq!(kwick(&[], &[]).0, 2);
}

#[test]
fn output_is_deterministic_and_mirrored() {
    let dir = std::env::temp_dir().join(format!("kwick-det-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("out.json");
    let args = ["expand", "--expr", "Q-(x1,2) Q+(x1,1) Q-(x1,0.5) Q+(x1,-1)", "--json", p.to_str().unwrap()];
    let (c1, a) = kwick(&args, &[]);
    let (c2, b) = kwick(&args, &[]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    assert_eq!(std::fs::read_to_string(&p).unwrap(), a);
    assert_eq!(json(&a)["terms"].as_array().unwrap().len(), 10);
}

#[test]
fn expression_from_file() {
    let dir = std::env::temp_dir().join(format!("kwick-expr-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("e.txt");
    std::fs::write(&p, "vev[\n  Q+(x1,1.5)\n  Q+(x1,0.25)\n]\n").unwrap();
    let (code, out) = kwick(&["expect", "--expr", p.to_str().unwrap()], &[]);
    assert_eq!(code, 0, "{}", out);
}

#[test]
fn dim_cap_env_skips_oracle() {
    let (code, out) = kwick(&["expect", "--expr", "Q+(x1,1) Q+(x1,0)"], &[("KW_DIM_CAP", "2")]);
    assert_eq!(code, 0, "{}", out);
    assert_eq!(json(&out)["oracle"], Value::Null);
    assert_eq!(kwick(&["expect", "--expr", "Q+(x1,1)"], &[("KW_DIM_CAP", "lots")]).0, 2);
}

#[test]
fn phivac_matches_oracle() {
    let (code, out) = kwick(&["phivac", "--expr", "Q+(x1,0.3) Q-(x1,1.1) Q+(x1,-0.4)", "--tol", "1e-9"], &[]);
    assert_eq!(code, 0, "{}", out);
    let v = json(&out);
    assert_eq!(v["oracle_checked"], Value::Bool(true));
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 35);
}

#[test]
fn kernel_csv_dump() {
    let dir = std::env::temp_dir().join(format!("kwick-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("k.csv");
    let (code, _) = kwick(&["verify", "kernels", "--csv", p.to_str().unwrap()], &[]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("tau,re,im\n"));
    assert_eq!(text.lines().count(), 1025);
}

#[test]
fn spec_invariants() {
    let neg = OSCILLATOR_SPEC.replace("k1 1.0", "k1 -1.0");
    assert!(matches!(parse_spec(&neg), Err(Error::Invariant(_))));
    let holes = "[channel]\nnonrel = true\n[xlabels]\nx1\n[modes]\nk1 1.0  1 0  0.5 0  1 0  0 0\n";
    match parse_spec(holes) {
        Err(Error::Invariant(m)) => assert!(m.contains("line 6"), "{}", m),
        other => panic!("{:?}", other),
    }
    let short = "[channel]\n[xlabels]\nx1\n[modes]\nk1 1.0 1 0\n";
    assert!(matches!(parse_spec(short), Err(Error::Syntax { line: 5, .. })));
    let grid = format!("{}\n[grid]\nn = 1000\n", OSCILLATOR_SPEC);
    assert!(parse_spec(&grid).is_err());
    let coarse = format!("{}\n[grid]\ndt = 2.0\nn = 64\n", OSCILLATOR_SPEC);
    assert!(matches!(parse_spec(&coarse), Err(Error::Nyquist { .. })));
}

fn arb_op() -> impl Strategy<Value = ExprOp> {
    (
        prop_oneof![Just(FieldKind::Q), Just(FieldKind::Psi), Just(FieldKind::TPsi)],
        prop_oneof![Just(Branch::Plus), Just(Branch::Minus)],
        "[a-z][a-z0-9_]{0,4}",
        -1e6f64..1e6,
    )
        .prop_map(|(kind, branch, x, t)| ExprOp { kind, branch, x, t })
}

proptest! {
    #[test]
    fn print_parse_round_trip(vev in any::<bool>(), ops in prop::collection::vec(arb_op(), 1..6)) {
        let e = Expr { vev, ops };
        let back = parse_expr(&e.to_string()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,40}") {
        let _ = parse_expr(&s);
        let _ = parse_spec(&s);
    }
}
