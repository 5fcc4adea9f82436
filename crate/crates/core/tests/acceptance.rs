use std::process::{Command, ExitCode};
use std::time::Instant;

use kl_ledger::fusion::{ledger_pointed_setup, Estimate};
use kl_ledger::lattice::{build_cocycle, discriminant_form, DiagonalBraiding, IntegralLattice};
use kl_ledger::nichols::{graded_dimensions, product_formula, product_formula_check, total_dimension, NicholsStatus, TotalDimension};
use kl_ledger::qseries::{
    asymptotic_dim, false_theta_character, quantum_dimension_of_fock, AsymptoticOptions, CharacterOptions, WeightLabel,
};
use kl_ledger::rational::{int, rat};
use kl_ledger::rootdata::build_from_label;
use kl_ledger::verifier::{screening_lattice, HYPOTHESES};

const SCHEDULE: [f64; 3] = [0.04, 0.01, 0.0025];

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn nichols_dimensions() -> Check {
    let cases: Vec<(&str, u32, u64)> =
        (2..=7).map(|p| ("A1", p, p as u64)).chain([("A2", 2, 8), ("A2", 3, 27), ("A3", 2, 64)]).collect();
    let mut slowest = 0.0f64;
    for (label, p, expected) in &cases {
        let start = Instant::now();
        let r = build_from_label(label).map_err(|e| e.to_string())?;
        let q = DiagonalBraiding::from_cartan(r.cartan(), *p);
        let d = total_dimension(&q, 24).map_err(|e| e.to_string())?;
        ensure(d == TotalDimension::Finite(*expected), format!("{label} p={p}: {d:?}"))?;
        ensure(product_formula(&r, *p).iter().sum::<u64>() == *expected, format!("{label} p={p}: product formula"))?;
        ensure(product_formula_check(&q, &r, *p).map_err(|e| e.to_string())?, format!("{label} p={p}: graded table"))?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        ensure(slowest < 60.0, format!("{label} p={p}: {slowest:.1}s"))?;
    }
    Ok(format!("{} cases, slowest {slowest:.2}s", cases.len()))
}

fn counterexamples() -> Check {
    let q = DiagonalBraiding::from_fractions(&[vec![(0, 1), (1, 2)], vec![(1, 2), (0, 1)]]);
    let t = graded_dimensions(&q, 10).map_err(|e| e.to_string())?;
    let expected: Vec<u64> = (0..=10).map(|m| m + 1).collect();
    ensure(t.by_total_degree == expected, format!("{:?}", t.by_total_degree))?;
    ensure(t.status == NicholsStatus::CutoffReached { cutoff: 10 }, format!("{:?}", t.status))?;
    let q = DiagonalBraiding::from_fractions(&[vec![(0, 1)]]);
    let t = graded_dimensions(&q, 10).map_err(|e| e.to_string())?;
    ensure(t.by_total_degree == vec![1; 11], format!("{:?}", t.by_total_degree))?;
    ensure(t.status == NicholsStatus::CutoffReached { cutoff: 10 }, format!("{:?}", t.status))?;
    Ok("m+1 and all-ones up to degree 10".into())
}

fn quadratic_identities() -> Check {
    let start = Instant::now();
    let grams = [
        vec![vec![2]],
        vec![vec![8]],
        vec![vec![4, -2], vec![-2, 4]],
        vec![vec![6, -3], vec![-3, 6]],
    ];
    for g in &grams {
        let form = discriminant_form(&IntegralLattice::from_integers(g).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let v = build_cocycle(&form).verify();
        ensure(v.passed(), format!("{g:?}: {v:?}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, format!("{secs:.1}s"))?;
    Ok(format!("4 lattices in {secs:.2}s"))
}

fn isotropic_extension() -> Check {
    let form = discriminant_form(&IntegralLattice::from_integers(&[vec![8]]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let subs = form.isotropic_subgroups(1000).map_err(|e| e.to_string())?;
    let i = subs.iter().find(|s| s.order() == 2).ok_or("no isotropic subgroup of order 2")?;
    let mut members: Vec<Vec<i64>> = i.indices().iter().map(|&k| form.element_at(k)).collect();
    members.sort();
    ensure(members == vec![vec![0], vec![4]], format!("{members:?}"))?;
    let local = form.extend_by_isotropic(i).map_err(|e| e.to_string())?;
    ensure(local.order() == 2, format!("|I^perp/I| = {}", local.order()))?;
    ensure(local.q_exponent(&local.element_at(1)) == rat(1, 2), "Q(gen) != i".into())?;
    let mut cases = 0;
    for g in [vec![vec![8]], vec![vec![18]], vec![vec![8, 0], vec![0, 8]], vec![vec![6, -3], vec![-3, 6]]] {
        let form = discriminant_form(&IntegralLattice::from_integers(&g).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        for sub in form.isotropic_subgroups(10_000).map_err(|e| e.to_string())? {
            let (gamma, n) = (form.order(), sub.order() as u64);
            ensure(form.orthogonal(&sub).order() as u64 * n == gamma, format!("{g:?}: orthogonal"))?;
            let ext = form.extend_by_isotropic(&sub).map_err(|e| e.to_string())?;
            ensure(ext.order() * n * n == gamma, format!("{g:?}: extension"))?;
            cases += 1;
        }
    }
    Ok(format!("Z/8 -> Z/2 with Q = i; {cases} subgroups"))
}

fn ledger() -> Check {
    let build = |label: &str, p: u64| -> Result<_, String> {
        let r = build_from_label(label).map_err(|e| e.to_string())?;
        let (lattice, _) = screening_lattice(&r, p).map_err(|e| e.to_string())?;
        let gamma = discriminant_form(&lattice).map_err(|e| e.to_string())?.order();
        let q = DiagonalBraiding::from_cartan(r.cartan(), p as u32);
        let TotalDimension::Finite(d) = total_dimension(&q, 24).map_err(|e| e.to_string())? else {
            return Err(format!("{label} p={p}: infinite"));
        };
        Ok(ledger_pointed_setup(gamma, d, Estimate { value: d as f64, error: 0.0 }))
    };
    let a1 = build("A1", 2)?;
    ensure((a1.fp_modules, a1.fp_relative_center) == (8, 16), format!("A1: {a1:?}"))?;
    let a2 = build("A2", 2)?;
    ensure((a2.fp_modules, a2.fp_relative_center) == (96, 768), format!("A2: {a2:?}"))?;
    for (label, p) in [("A1", 3), ("A1", 5), ("A1", 7), ("A2", 3), ("A3", 2)] {
        ensure(build(label, p)?.center_identity_holds(), format!("{label} p={p}"))?;
    }
    Ok("8/16 and 96/768; center identity on 7 inputs".into())
}

fn positivity() -> Check {
    for (label, p) in [("A1", 2u64), ("A1", 3), ("A2", 2)] {
        let r = build_from_label(label).map_err(|e| e.to_string())?;
        let vacuum = WeightLabel::vacuum(r.rank());
        let c = false_theta_character(&r, p, &vacuum, 10, &CharacterOptions::full(r.rank())).map_err(|e| e.to_string())?;
        let coeffs = c.full.integer_coefficients().ok_or("non-integral exponents")?;
        ensure(coeffs.len() == 11, format!("{label} p={p}: {} terms", coeffs.len()))?;
        ensure(coeffs.iter().all(|k| k.is_integer() && *k >= int(0)), format!("{label} p={p}: {coeffs:?}"))?;
    }
    Ok("A1/2, A1/3, A2/2 up to q^10".into())
}

fn asymptotics() -> Check {
    let start = Instant::now();
    let mut out = Vec::new();
    for (label, p, target, tol) in [("A1", 2u64, 0.5, 0.05), ("A1", 3, 1.0 / 3.0, 0.05), ("A2", 2, 0.125, 0.1)] {
        let r = build_from_label(label).map_err(|e| e.to_string())?;
        let vacuum = WeightLabel::vacuum(r.rank());
        let opts = AsymptoticOptions::for_label(&vacuum);
        let e = asymptotic_dim(&r, p, &vacuum, &SCHEDULE, &opts).map_err(|e| e.to_string())?;
        ensure((e.value - target).abs() <= tol, format!("{label} p={p}: {} vs {target}", e.value))?;
        let q = quantum_dimension_of_fock(&r, p, &vacuum, &SCHEDULE, &opts).map_err(|e| e.to_string())?;
        let expected = (p as f64).powi(r.positive_roots().len() as i32);
        // same relative tolerance as the cusp value
        ensure(
            (q.value - expected).abs() <= tol / target * expected,
            format!("{label} p={p}: qdim {} vs {expected}", q.value),
        )?;
        out.push(format!("{label}/{p} {:.4} qdim {:.3}", e.value, q.value));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("{secs:.0}s"))?;
    Ok(out.join(", "))
}

fn end_to_end() -> Check {
    let run = |args: &[&str]| -> Result<(Option<i32>, String), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_kl-ledger"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        Ok((o.status.code(), String::from_utf8_lossy(&o.stdout).into_owned()))
    };
    for t in ["A1", "A2"] {
        let (code, text) = run(&["kl-verify", t, "2"])?;
        ensure(code == Some(0), format!("{t} 2 exited {code:?}"))?;
        ensure(HYPOTHESES.iter().all(|h| text.contains(h)), format!("{t} 2: hypotheses missing"))?;
    }
    let (code, text) = run(&["kl-verify", "A2", "1", "--allow-degenerate"])?;
    ensure(code == Some(1), format!("A2 1 exited {code:?}"))?;
    ensure(text.contains("MISMATCH") && text.contains("q-commutative ring"), "A2 1: no counterexample text".into())?;
    Ok("A1 2 -> 0, A2 2 -> 0, A2 1 -> 1".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("nichols dimensions (exact)", nichols_dimensions),
        ("counterexample detection (exact)", counterexamples),
        ("quadratic-space identities (exact)", quadratic_identities),
        ("isotropic extension calculus (exact)", isotropic_extension),
        ("FP ledger (exact)", ledger),
        ("character positivity (exact)", positivity),
        ("asymptotics (+/-0.05, +/-0.1)", asymptotics),
        ("end-to-end verdicts (exit codes)", end_to_end),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
