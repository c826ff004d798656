use std::process::Command;

fn wsk(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wsk")).args(args).output().expect("run wsk");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf8"),
        String::from_utf8(out.stderr).expect("utf8"),
    )
}

#[test]
fn division_example() {
    let (code, out, _) = wsk(&["--field", "Qp p=3 prec=12", "wdiv", "--g", "x1^2", "--f", "x1-3"]);
    assert_eq!(code, 0);
    assert_eq!(out, "q=x1+3; r=9\n");
}

#[test]
fn checked_division_reports_seed() {
    let (code, out, _) = wsk(&["--seed", "17", "--check", "wdiv", "--g", "x1^3+r1", "--f", "x1^2+3*x1+3"]);
    assert_eq!(code, 0);
    assert!(out.ends_with("check=ok; trials=200; seed=17\n"), "{out}");
}

#[test]
fn norm_example() {
    let (code, out, _) = wsk(&["--check", "norm", "x+3"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "S={-3}");
    assert!(lines[1].starts_with("[1] |x| <= (0) && |x| > (1): R=x; E=1+3*x^-1"));
    assert!(lines[2].starts_with("[2] |x| < (1): R=3;"));
    assert!(lines[3].starts_with("[3] |x| = (1): R=x+3; E=1"));
    assert!(lines[4].starts_with("seed=0 "));
}

#[test]
fn selftest_exits_zero() {
    let (code, out, _) = wsk(&["selftest"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with("seed=0\n"));
}

#[test]
fn exit_codes() {
    assert_eq!(wsk(&["eval", "1/"]).0, 2);
    assert_eq!(wsk(&["nosuch"]).0, 2);
    assert_eq!(wsk(&["--field", "Q3", "eval", "1/O(3^2)"]).0, 3);
    let (code, _, err) = wsk(&["wdiv", "--g", "x1", "--f", "3"]);
    assert_eq!(code, 4);
    assert!(err.starts_with("error: domain"), "{err}");
    assert_eq!(wsk(&["--field", "Fpt p=3", "rv", "t", "--n", "3"]).0, 4);
}

#[test]
fn output_is_deterministic() {
    let args = ["--seed", "5", "--check", "--field", "Q3", "ml", "factor", "--host", "|x| <= (0) && |x-1| > (1)", "--f", "(x-1)^2*(x-3)/(x-4)"];
    let a = wsk(&args);
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a, wsk(&args));
}

#[test]
fn subcommands_run() {
    let cases: &[&[&str]] = &[
        &["eval", "(1+3)/(2-9)"],
        &["eval", "--teich", "2"],
        &["--field", "Hahn p=3 char=p trunc=6 cap=64", "eval", "(1+t^(1/2))*(1-t^(1/2))"],
        &["--field", "Q7", "eval", "--series", "x1^2+r1", "--at", "3,7"],
        &["eval", "--fun", "1/(x-1)", "--host", "|x-1| >= (0)", "--at", "3"],
        &["--sym", "G[0,1]=r1+r1^2", "eval", "--term", "G(3*x)", "--at", "1"],
        &["--check", "wprep", "--f", "x1*x2+3"],
        &["--check", "compose", "--f", "x1^2+r1", "--arg", "x1+3", "--arg", "3*x1"],
        &["--check", "snp", "--f", "3+x1*x2+9*x1^2", "--outer", "x1"],
        &["--check", "--field", "Q7", "annulus", "decompose", "|x^2-7| < (1); split ext=Q7[y^2-7]"],
        &["--check", "--field", "Q7", "annulus", "complement", "|x^2-2| <= (1)"],
        &["--check", "annulus", "intersect", "|x| <= (0)", "|x-1| < (0)"],
        &["--check", "annulus", "split", "|x^2-3| >= (2); split ext=Q3[y^2-3]"],
        &["annulus", "validate", "|x| <= (1)"],
        &["--check", "ml", "split", "--host", "|x| <= (0) && |x-1| > (1)", "--f", "(x-1)^2/(x-4)"],
        &["--check", "ml", "strongunit", "--host", "|x| < (0)", "--f", "1+3*x"],
        &["--check", "--field", "Q7", "hensel", "--coeffs", "-2,0,1", "--x0", "3"],
        &["rv", "12", "--ball", "1"],
        &["--field", "Q7", "jac", "--f", "x^2", "--center", "1", "--radius", "0"],
    ];
    for args in cases {
        let (code, out, err) = wsk(args);
        assert_eq!(code, 0, "{args:?}: {err}");
        assert!(!out.is_empty(), "{args:?}");
    }
}
