use std::collections::BTreeMap;

use astro_float::{BigFloat, Consts, RoundingMode};
use kl_ledger::lattice::IntegralLattice;
use kl_ledger::qseries::{
    asymptotic_dim, eta_inverse_power, false_theta_character, lattice_theta, numeric_eval, quantum_dimension_of_fock,
    ratio, AsymptoticEstimate, AsymptoticOptions, CharacterOptions, Normalization, QSeriesError, RationalQSeries,
    WeightLabel, DEFAULT_PRECISION,
};
use kl_ledger::rational::{int, rat};
use kl_ledger::rootdata::{build_from_label, RootSystem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

const SCHEDULE: [f64; 3] = [0.04, 0.01, 0.0025];

/// Partitions of `k` into parts of `colors` colors, by listing them.
fn colored_partitions(k: u64, colors: u64) -> u64 {
    // parts are (size, color) pairs taken in non-increasing order
    fn rec(rest: u64, max: (u64, u64), colors: u64) -> u64 {
        if rest == 0 {
            return 1;
        }
        let mut total = 0;
        for size in (1..=rest.min(max.0)).rev() {
            for color in 0..colors {
                if (size, color) <= max {
                    total += rec(rest - size, (size, color), colors);
                }
            }
        }
        total
    }
    rec(k, (k, colors), colors)
}

#[test]
fn eta_powers_count_colored_partitions() {
    for n in 1..=3u32 {
        let s = eta_inverse_power(n, 12);
        assert_eq!(s.offset(), &rat(-(n as i64), 24));
        for k in 0..=12u64 {
            assert_eq!(
                s.coefficient(&int(k as i64)),
                int(colored_partitions(k, n as u64) as i64),
                "n={n} k={k}"
            );
        }
    }
}

#[test]
fn eta_evaluation_matches_partial_sum() {
    let s = eta_inverse_power(1, 40);
    let v = numeric_eval(&s, 1.0, DEFAULT_PRECISION).unwrap();
    let x = (-2.0 * std::f64::consts::PI).exp();
    let direct: f64 = (0..=40u64)
        .map(|k| colored_partitions(k, 1) as f64 * x.powf(k as f64 - 1.0 / 24.0))
        .sum();
    assert!((v.value - direct).abs() < 1e-12);
    assert!(v.tail_bound < 1e-12);
}

#[test]
fn eta_tail_bound_covers_the_product() {
    for (n, t, cutoff) in [(1u32, 0.1, 15u64), (2, 0.2, 10), (3, 0.05, 30)] {
        let s = eta_inverse_power(n, cutoff);
        let v = numeric_eval(&s, t, DEFAULT_PRECISION).unwrap();
        let x = (-2.0 * std::f64::consts::PI * t).exp();
        let full: f64 = x.powf(-(n as f64) / 24.0) / (1..5000).map(|j| (1.0 - x.powi(j)).powi(n as i32)).product::<f64>();
        let missing = full - v.value;
        assert!(missing >= -1e-12 && missing <= v.tail_bound, "n={n} missing {missing} bound {}", v.tail_bound);
    }
}

#[test]
fn gaussian_tail_bound_covers_theta() {
    let l = IntegralLattice::from_integers(&[vec![2]]).unwrap();
    for (t, cutoff) in [(0.05, 20i64), (0.01, 100), (0.2, 8)] {
        let s = lattice_theta(&l, &[int(0)], &[int(0)], &int(cutoff), Normalization::Full).unwrap();
        let v = numeric_eval(&s, t, DEFAULT_PRECISION).unwrap();
        let full: f64 = (-2000i64..=2000).map(|k| (-2.0 * std::f64::consts::PI * t * 2.0 * (k * k) as f64).exp()).sum();
        let missing = full - v.value;
        assert!(missing >= -1e-12 && missing <= v.tail_bound, "t={t} missing {missing} bound {}", v.tail_bound);
    }
}

#[test]
fn theta_matches_box_enumeration() {
    let gram = vec![vec![4, 1], vec![1, 2]];
    let l = IntegralLattice::from_integers(&gram).unwrap();
    let coset = [rat(1, 3), rat(-1, 2)];
    let shift = [rat(1, 5), int(0)];
    let cutoff = int(12);
    for norm in [Normalization::Half, Normalization::Full] {
        let s = lattice_theta(&l, &coset, &shift, &cutoff, norm).unwrap();
        let mut expected: BTreeMap<BigRational, BigRational> = BTreeMap::new();
        let f = match norm {
            Normalization::Half => rat(1, 2),
            Normalization::Full => int(1),
        };
        for a in -12i64..=12 {
            for b in -12i64..=12 {
                let v = [int(a) + &coset[0] - &shift[0], int(b) + &coset[1] - &shift[1]];
                let e = l.inner(&v, &v) * &f;
                if e <= cutoff {
                    *expected.entry(e).or_insert_with(BigRational::zero) += int(1);
                }
            }
        }
        assert_eq!(s.terms(), &expected);
    }
}

/// `D(alpha)` via `z = e^{eps x}`: the Weyl-character quotient
/// `sum det(w) e^{eps (w v, x)} / sum det(w) e^{eps (w rho, x)}`, Richardson
/// extrapolated to `eps = 0`.
fn weyl_quotient_limit(r: &RootSystem, v: &[i64], x: &[BigRational]) -> f64 {
    let p = 320;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().unwrap();
    let n = r.rank();
    let pair = |mu: &[i64]| -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..n {
            for j in 0..n {
                s += int(mu[i]) * &r.cartan_inverse()[i][j] * &x[j];
            }
        }
        s
    };
    let big = |q: &BigRational, cc: &mut Consts| -> BigFloat {
        let a = BigFloat::parse(&q.numer().to_string(), astro_float::Radix::Dec, p, rm, cc);
        let b = BigFloat::parse(&q.denom().to_string(), astro_float::Radix::Dec, p, rm, cc);
        a.div(&b, p, rm)
    };
    let rho = r.rho();
    let mut at = |eps: &BigRational| -> f64 {
        let mut num = BigFloat::from_f64(0.0, p);
        let mut den = BigFloat::from_f64(0.0, p);
        for w in r.weyl_elements().unwrap() {
            let d = BigFloat::from_f64(w.det() as f64, p);
            let e1 = big(&(eps * pair(&r.act_on_weight(w, v))), &mut cc).exp(p, rm, &mut cc);
            let e2 = big(&(eps * pair(&r.act_on_weight(w, &rho))), &mut cc).exp(p, rm, &mut cc);
            num = num.add(&d.mul(&e1, p, rm), p, rm);
            den = den.add(&d.mul(&e2, p, rm), p, rm);
        }
        let q = num.div(&den, p, rm);
        q.format(astro_float::Radix::Dec, rm, &mut cc).unwrap().parse::<f64>().unwrap()
    };
    let h = rat(1, 10_000);
    let (f1, f2, f4) = (at(&h), at(&(&h / int(2))), at(&(&h / int(4))));
    // f = D + c1 eps + c2 eps^2 + ...
    let r1 = 2.0 * f2 - f1;
    let r2 = 2.0 * f4 - f2;
    (4.0 * r2 - r1) / 3.0
}

fn exponent(r: &RootSystem, p: i64, a: &[i64], label: &WeightLabel) -> BigRational {
    let fund = r.root_to_weight(a);
    let x: Vec<i64> = (0..r.rank())
        .map(|i| p * (fund[i] + label.lambda_hat[i] + 1) + label.s[i] - 1)
        .collect();
    r.weight_inner(&x, &x) / int(2 * p)
}

#[test]
fn z_to_one_reduction_matches_weyl_quotient() {
    for (label_str, p, bound) in [("A1", 2i64, 6i64), ("A2", 2, 3)] {
        let r = build_from_label(label_str).unwrap();
        let n = r.rank();
        let label = WeightLabel::vacuum(n);
        let x: Vec<BigRational> = (0..n).map(|i| rat(37 + 21 * i as i64, 100)).collect();
        let cutoff = int(6);
        let mut expected: BTreeMap<BigRational, f64> = BTreeMap::new();
        let mut points = vec![vec![]];
        for _ in 0..n {
            points = points
                .into_iter()
                .flat_map(|pt: Vec<i64>| (-bound..=bound).map(move |k| [pt.clone(), vec![k]].concat()))
                .collect();
        }
        for a in points {
            let e = exponent(&r, p, &a, &label);
            let v: Vec<i64> = r.root_to_weight(&a).iter().map(|f| f + 1).collect();
            let d = weyl_quotient_limit(&r, &v, &x);
            let shifted: Vec<i64> = v.iter().map(|t| t - 1).collect();
            let (sign, dom) = r.signed_dominant_representative(&shifted);
            let exact = if sign == 0 { 0.0 } else { sign as f64 * r.weyl_dimension(&dom).unwrap().to_f64().unwrap() };
            assert!((d - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{label_str} alpha={a:?}: {d} vs {exact}");
            if e <= cutoff.clone() + exponent(&r, p, &vec![0; n], &label) {
                *expected.entry(e).or_insert(0.0) += d;
            }
        }
        let top = &cutoff + exponent(&r, p, &vec![0; n], &label);
        let c = false_theta_character(&r, p as u64, &label, 6, &CharacterOptions::full(n)).unwrap();
        for (e, d) in expected {
            if e <= top {
                let got = c.theta.coefficient(&e).to_f64().unwrap();
                assert!((got - d).abs() < 1e-5, "{label_str} exponent {e}: {got} vs {d}");
            }
        }
    }
}

#[test]
fn characters_are_nonnegative_integral() {
    for (label_str, p) in [("A1", 2u64), ("A1", 3), ("A1", 5), ("A2", 2), ("A2", 3)] {
        let r = build_from_label(label_str).unwrap();
        let label = WeightLabel::vacuum(r.rank());
        for opts in [CharacterOptions::full(r.rank()), CharacterOptions::singlet(&label)] {
            let c = false_theta_character(&r, p, &label, 10, &opts).unwrap();
            let coeffs = c.full.integer_coefficients().expect("integral keys");
            assert_eq!(coeffs.len(), 11);
            assert_eq!(coeffs[0], int(1));
            for k in &coeffs {
                assert!(k.is_integer() && *k >= int(0), "{label_str} p={p}: {coeffs:?}");
            }
            assert!(c.theta.all_coefficients_integral());
        }
    }
}

#[test]
fn vacuum_asymptotics() {
    for (label_str, p, target, tol) in [("A1", 2u64, 0.5, 0.05), ("A1", 3, 1.0 / 3.0, 0.05), ("A2", 2, 0.125, 0.1)] {
        let r = build_from_label(label_str).unwrap();
        let label = WeightLabel::vacuum(r.rank());
        let opts = AsymptoticOptions::for_label(&label);
        let e = asymptotic_dim(&r, p, &label, &SCHEDULE, &opts).unwrap();
        assert!((e.value - target).abs() <= tol, "{label_str} p={p}: {e:?}");
        assert!(e.samples.iter().all(|s| s.tail_bound < 1e-12));
        let q = quantum_dimension_of_fock(&r, p, &label, &SCHEDULE, &opts).unwrap();
        let expected = (p as f64).powi(r.positive_roots().len() as i32);
        assert!((q.value - expected).abs() <= tol * expected * 2.0, "{label_str} p={p}: {}", q.value);
    }
}

#[test]
fn ratio_rejects_near_zero_denominators() {
    let est = |value: f64, error: f64| AsymptoticEstimate {
        value,
        error,
        schedule: vec![],
        samples: vec![],
        model: vec![value],
        residual: 0.0,
        propagated_tail: 0.0,
        drop_change: 0.0,
    };
    assert!(matches!(ratio(&est(1.0, 0.0), &est(0.01, 0.02)), Err(QSeriesError::DivisionByNearZero { .. })));
    let (v, e) = ratio(&est(1.0, 0.0), &est(0.5, 0.01)).unwrap();
    assert!((v - 2.0).abs() < 1e-12 && e > 0.0 && e < 0.05);
}

fn series() -> impl Strategy<Value = RationalQSeries> {
    (prop::collection::vec((0i64..8, -5i64..6), 0..6), 3i64..9).prop_map(|(terms, cutoff)| {
        RationalQSeries::from_terms(terms.into_iter().map(|(e, c)| (rat(e, 2), int(c))), rat(cutoff, 2))
    })
}

proptest! {
    #[test]
    fn series_product_distributes(a in series(), b in series(), c in series()) {
        let lhs = a.add(&b).mul(&c);
        let rhs = a.mul(&c).add(&b.mul(&c));
        let cut = lhs.cutoff().clone().min(rhs.cutoff().clone());
        let (l, r) = (lhs.truncate(&cut), rhs.truncate(&cut));
        prop_assert_eq!(l.terms(), r.terms());
        for (e, _) in lhs.terms() {
            prop_assert!(e <= lhs.cutoff());
        }
    }

    #[test]
    fn series_sub_cancels(a in series()) {
        prop_assert!(a.sub(&a).is_zero());
        let two = a.scale(&int(2));
        let doubled = a.add(&a);
        prop_assert_eq!(two.terms(), doubled.terms());
    }

    #[test]
    fn products_are_exact_below_cutoff(a in series(), b in series()) {
        let p = a.mul(&b);
        let mut direct: BTreeMap<BigRational, BigRational> = BTreeMap::new();
        for (ea, ca) in a.terms() {
            for (eb, cb) in b.terms() {
                let e = ea + eb;
                if &e <= p.cutoff() {
                    *direct.entry(e).or_insert_with(BigRational::zero) += ca * cb;
                }
            }
        }
        direct.retain(|_, c| !c.is_zero());
        prop_assert_eq!(p.terms(), &direct);
    }
}

#[test]
fn bigint_coefficients_survive_products() {
    let s = eta_inverse_power(8, 30);
    let c = s.coefficient(&int(30));
    assert!(c > BigRational::from_integer(BigInt::from(10u64).pow(10)));
}
