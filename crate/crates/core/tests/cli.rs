use std::process::{Command, Output};

use kl_ledger::fusion::{Estimate, VerdictKind};
use kl_ledger::verifier::{decide, HYPOTHESES, SCHEMA};
use proptest::prelude::*;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kl-ledger"))
        .args(args)
        .env_remove("KL_LEDGER_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_exit_codes() {
    for t in ["A1", "A2"] {
        let o = run(&["kl-verify", t, "2"]);
        assert_eq!(o.status.code(), Some(0), "{t}: {}", stdout(&o));
        let text = stdout(&o);
        assert!(text.contains("MATCH"));
        for h in HYPOTHESES {
            assert!(text.contains(h), "missing hypothesis {h}");
        }
    }
    let o = run(&["kl-verify", "A2", "1", "--allow-degenerate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("q-commutative ring"));

    assert_eq!(run(&["kl-verify", "A2", "1"]).status.code(), Some(64));
    assert_eq!(run(&["kl-verify", "Q7", "2"]).status.code(), Some(6));
    assert_eq!(run(&["bogus"]).status.code(), Some(64));
    assert_eq!(run(&["kl-verify", "A1", "two"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn json_reports_are_versioned_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let o = run(&["kl-verify", "A1", "3", "--stable", "--json", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let ja = std::fs::read(&a).unwrap();
    assert_eq!(ja, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["schema"], SCHEMA);
    assert_eq!(v["verdict"]["kind"], "MATCH");
    assert_eq!(v["hypotheses"].as_array().unwrap().len(), HYPOTHESES.len());
    assert!(v.get("timings").is_none());
    // Gram [[6]] gives |Gamma| = 6 and dim B = 3
    assert_eq!(v["fp_ledger"]["fp_modules"], 18);
}

#[test]
fn nichols_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    // A2 at p = 2: q_ii = -1, q_12 q_21 = -1
    std::fs::write(&q, r#"{"rank": 2, "exponents": [["1/2", "1/4"], ["1/4", "1/2"]]}"#).unwrap();
    let out = dir.path().join("out.json");
    let o = run(&["nichols", "--q-matrix", q.to_str().unwrap(), "--json", out.to_str().unwrap(), "--stable"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let degrees: Vec<u64> = serde_json::from_value(v["nichols"]["by_total_degree"].clone()).unwrap_or_default();
    assert_eq!(degrees.iter().sum::<u64>(), 8, "{text}");
}

#[test]
fn lattice_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let gram = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    };
    let z8 = gram("z8.json", "[[8]]");
    let o = run(&["lattice", "disc", "--gram", &z8]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains('8'));
    let o = run(&["lattice", "extend", "--gram", &z8]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1/2"), "{}", stdout(&o));
    assert_eq!(run(&["lattice", "disc", "--gram", &gram("bad.json", "[[1, 2], [2, 1]]")]).status.code(), Some(3));
}

#[test]
fn character_subcommand() {
    let o = run(&["character", "A1", "2", "--projection", "full"]);
    assert_eq!(o.status.code(), Some(0));
    let coeffs: Vec<(u64, u64)> = stdout(&o)
        .lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            match f[..] {
                [k, c] => Some((k.parse().ok()?, c.parse().ok()?)),
                _ => None,
            }
        })
        .collect();
    let expected = [1, 0, 1, 4, 5, 8, 10, 16, 22, 32, 47];
    let want: Vec<(u64, u64)> = (0..).zip(expected).filter(|(_, c)| *c != 0).collect();
    assert_eq!(coeffs, want);
}

fn oracle(dim: u64, value: f64, error: f64, rel: f64) -> VerdictKind {
    let tol = rel * dim as f64;
    let lo = value - error;
    let hi = value + error;
    // interval [lo, hi] versus band [dim - tol, dim + tol]
    if !value.is_finite() || !error.is_finite() {
        VerdictKind::Inconclusive
    } else if (value - dim as f64).abs() <= tol && error <= tol {
        VerdictKind::Match
    } else if hi < dim as f64 - tol || lo > dim as f64 + tol {
        VerdictKind::Mismatch
    } else {
        VerdictKind::Inconclusive
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decide_agrees_with_interval_rule(dim in 1u64..200, dev in -0.5f64..0.5, err in 0.0f64..0.3, rel in 0.01f64..0.2) {
        let value = dim as f64 * (1.0 + dev);
        let error = dim as f64 * err;
        let v = decide(dim, Estimate { value, error }, rel);
        prop_assert_eq!(v.kind, oracle(dim, value, error, rel));
        prop_assert_eq!(v.exit_code, v.kind.exit_code());
    }
}
