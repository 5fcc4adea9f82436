use kl_ledger::fusion::simple_current_fpdim_check;
use kl_ledger::lattice::{build_cocycle, discriminant_form, DiscriminantForm, IntegralLattice};
use kl_ledger::rational::{int, rat};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn corpus() -> Vec<(&'static str, Vec<Vec<i64>>)> {
    vec![
        ("[[2]]", vec![vec![2]]),
        ("[[8]]", vec![vec![8]]),
        ("2A2", vec![vec![4, -2], vec![-2, 4]]),
        ("3A2", vec![vec![6, -3], vec![-3, 6]]),
    ]
}

fn frac(r: &BigRational) -> BigRational {
    r - r.floor()
}

/// The dual vector representing `a` through the stored generators.
fn vector(form: &DiscriminantForm, a: &[i64]) -> Vec<BigRational> {
    let g = form.generators().unwrap();
    let n = g[0].len();
    (0..n)
        .map(|j| a.iter().zip(g).fold(BigRational::zero(), |s, (k, row)| s + int(*k) * &row[j]))
        .collect()
}

fn check_against_gram(lattice: &IntegralLattice) {
    let form = discriminant_form(lattice).unwrap();
    assert_eq!(BigRational::from_integer(form.order().into()), lattice.determinant());
    let c = build_cocycle(&form);
    let els: Vec<Vec<i64>> = form.elements().collect();
    for a in &els {
        let va = vector(&form, a);
        assert!(lattice.in_dual(&va));
        let norm = lattice.inner(&va, &va);
        // Q(a) = e^{pi i (v, v)} = sigma(a, a)
        assert_eq!(frac(&(&norm / int(2))), c.sigma_exponent(a, a));
        for b in &els {
            let vb = vector(&form, b);
            let mono = c.sigma_exponent(a, b) + c.sigma_exponent(b, a);
            assert_eq!(frac(&mono), frac(&lattice.inner(&va, &vb)));
        }
    }
    let s = |a: &[i64], b: &[i64]| c.sigma_exponent(a, b);
    let w = |a: &[i64], b: &[i64], x: &[i64]| c.omega_exponent(a, b, x);
    for a in &els {
        for b in &els {
            let ab = form.add(a, b);
            for x in &els {
                let bx = form.add(b, x);
                let h1 = w(b, x, a) + s(a, &bx) + w(a, b, x) - s(a, b) - w(b, a, x) - s(a, x);
                let h2 = -w(x, a, b) + s(&ab, x) - w(a, b, x) - s(b, x) + w(a, x, b) - s(a, x);
                assert!(h1.is_integer() && h2.is_integer());
                for d in &els {
                    let xd = form.add(x, d);
                    let pent = w(&ab, x, d) + w(a, b, &xd) - w(a, b, x) - w(a, &bx, d) - w(b, x, d);
                    assert!(pent.is_integer());
                }
            }
        }
    }
    assert!(c.verify().passed());
}

#[test]
fn corpus_cocycles_satisfy_all_identities() {
    let start = std::time::Instant::now();
    for (_, g) in corpus() {
        check_against_gram(&IntegralLattice::from_integers(&g).unwrap());
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn corpus_group_orders() {
    let orders: Vec<u64> = corpus()
        .iter()
        .map(|(_, g)| discriminant_form(&IntegralLattice::from_integers(g).unwrap()).unwrap().order())
        .collect();
    assert_eq!(orders, vec![2, 8, 12, 27]);
}

#[test]
fn isotropic_extension_of_z8() {
    let form = discriminant_form(&IntegralLattice::from_integers(&[vec![8]]).unwrap()).unwrap();
    let subs = form.isotropic_subgroups(1000).unwrap();
    assert_eq!(subs.len(), 2);
    let i = &subs[1];
    let members: Vec<Vec<i64>> = i.indices().iter().map(|&k| form.element_at(k)).collect();
    let mut vs: Vec<BigRational> = members.iter().map(|m| vector(&form, m)[0].clone()).collect();
    vs.sort();
    assert_eq!(vs, vec![int(0), rat(1, 2)]);
    let local = form.extend_by_isotropic(i).unwrap();
    assert_eq!(local.order(), 2);
    // Q(gen) = e^{pi i / 2} = i
    let gen = local.element_at(1);
    assert_eq!(local.q_exponent(&gen), rat(1, 2));
    let q = local.evaluate_q(&gen).unwrap();
    assert_eq!(q.pow(2), -kl_ledger::cyclo::CycloScalar::one(q.order()));
}

#[test]
fn order_identities_on_all_isotropic_subgroups() {
    let mut grams = corpus().into_iter().map(|(_, g)| g).collect::<Vec<_>>();
    grams.extend([
        vec![vec![18]],
        vec![vec![8, 0], vec![0, 8]],
        vec![vec![4, 0], vec![0, 4]],
        vec![vec![8, -4], vec![-4, 8]],
        vec![vec![2, 0, 0], vec![0, 8, 0], vec![0, 0, 2]],
    ]);
    let mut cases = 0;
    for g in grams {
        let form = discriminant_form(&IntegralLattice::from_integers(&g).unwrap()).unwrap();
        for sub in form.isotropic_subgroups(10_000).unwrap() {
            let gamma = form.order();
            let i = sub.order() as u64;
            assert_eq!(form.orthogonal(&sub).order() as u64 * i, gamma);
            assert_eq!(form.extend_by_isotropic(&sub).unwrap().order() * i * i, gamma);
            assert!(simple_current_fpdim_check(&form, &sub).unwrap());
            cases += 1;
        }
    }
    assert!(cases > 10);
}

fn even_gram() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop_oneof![
        (1i64..8).prop_map(|a| vec![vec![2 * a]]),
        (1i64..5, 1i64..5, -3i64..4).prop_filter_map("positive definite", |(a, b, c)| {
            (4 * a * b > c * c).then(|| vec![vec![2 * a, c], vec![c, 2 * b]])
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_even_lattices_give_abelian_cocycles(g in even_gram()) {
        let lattice = IntegralLattice::from_integers(&g).unwrap();
        let form = discriminant_form(&lattice).unwrap();
        prop_assume!(form.order() <= 24);
        check_against_gram(&lattice);
        prop_assert!(form.is_nondegenerate());
        let one = BigRational::one();
        prop_assert!(form.elements().all(|a| form.q_exponent(&a) < int(2) * &one));
    }
}
