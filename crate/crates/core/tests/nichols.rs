use kl_ledger::cyclo::CycloScalar;
use kl_ledger::lattice::DiagonalBraiding;
use kl_ledger::nichols::{
    graded_dimensions, primitive_dimension, product_formula, product_formula_check, symmetrizer_rank,
    total_dimension, NicholsEngine, NicholsStatus, TotalDimension,
};
use kl_ledger::rational::rat;
use kl_ledger::rootdata::build_from_label;
use proptest::prelude::*;

/// Words with `d[i]` copies of letter `i`, in lexicographic order.
fn words(d: &[u32]) -> Vec<Vec<usize>> {
    fn rec(d: &mut Vec<u32>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d.iter().all(|&x| x == 0) {
            out.push(cur.clone());
            return;
        }
        for i in 0..d.len() {
            if d[i] > 0 {
                d[i] -= 1;
                cur.push(i);
                rec(d, cur, out);
                cur.pop();
                d[i] += 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut d.to_vec(), &mut Vec::new(), &mut out);
    out
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, m - 1);
            out.push(q);
        }
    }
    out
}

/// `T_pi` on a word: bubble-sort the target positions, applying the braiding
/// `x_a x_b -> q_ab x_b x_a` at each adjacent swap.
fn braided_permutation(q: &DiagonalBraiding, word: &[usize], target: &[usize]) -> (Vec<usize>, CycloScalar) {
    let order = q.common_order();
    let mut w = word.to_vec();
    let mut pos = target.to_vec();
    let mut c = CycloScalar::one(order);
    let m = w.len();
    for pass in 0..m {
        for k in 0..m - 1 - pass {
            if pos[k] > pos[k + 1] {
                c = &c * &q.q(w[k], w[k + 1]).embed(order);
                w.swap(k, k + 1);
                pos.swap(k, k + 1);
            }
        }
    }
    (w, c)
}

fn dense_rank(mut rows: Vec<Vec<CycloScalar>>) -> u64 {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else { continue };
        rows.swap(rank, p);
        let inv = rows[rank][col].inv().unwrap();
        let pivot: Vec<CycloScalar> = rows[rank].iter().map(|x| x * &inv).collect();
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in 0..ncols {
                    rows[r][c] = &rows[r][c] - &(&f * &pivot[c]);
                }
            }
        }
        rows[rank] = pivot;
        rank += 1;
    }
    rank as u64
}

/// Rank of `sum_{pi in S_m} T_pi` on the multidegree-`d` words.
fn dense_symmetrizer_rank(q: &DiagonalBraiding, d: &[u32]) -> u64 {
    let ws = words(d);
    let order = q.common_order();
    let index: std::collections::HashMap<Vec<usize>, usize> =
        ws.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let m = ws.first().map_or(0, |w| w.len());
    let mut matrix = vec![vec![CycloScalar::zero(order); ws.len()]; ws.len()];
    for (j, w) in ws.iter().enumerate() {
        for pi in permutations(m) {
            let (img, c) = braided_permutation(q, w, &pi);
            let i = index[&img];
            matrix[i][j] = &matrix[i][j] + &c;
        }
    }
    dense_rank(matrix)
}

fn braiding_strategy() -> impl Strategy<Value = DiagonalBraiding> {
    (1usize..=2, prop::collection::vec(0i64..12, 4)).prop_map(|(n, e)| {
        let m: Vec<Vec<_>> = (0..n)
            .map(|i| (0..n).map(|j| rat(e[i * 2 + j], 12)).collect())
            .collect();
        DiagonalBraiding::new(m).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symmetrizer_rank_matches_dense_oracle(q in braiding_strategy(), a in 0u32..4, b in 0u32..3) {
        let d: Vec<u32> = if q.rank() == 1 { vec![a + b] } else { vec![a, b] };
        prop_assume!(d.iter().sum::<u32>() <= 5);
        prop_assert_eq!(symmetrizer_rank(&q, &d).unwrap(), dense_symmetrizer_rank(&q, &d));
    }

    #[test]
    fn twist_equivalent_braidings_agree(p in 2u32..5, t in 0i64..8) {
        let r = build_from_label("A2").unwrap();
        let q = DiagonalBraiding::from_cartan(r.cartan(), p);
        // q'_12 = q_12 z, q'_21 = q_21 / z keeps q_12 q_21 and q_ii
        let mut e = q.exponents().clone();
        e[0][1] = &e[0][1] + rat(t, 8);
        e[1][0] = &e[1][0] - rat(t, 8);
        let twisted = DiagonalBraiding::new(e).unwrap();
        let a = graded_dimensions(&q, 10).unwrap();
        let b = graded_dimensions(&twisted, 10).unwrap();
        prop_assert_eq!(a.by_total_degree, b.by_total_degree);
    }

    #[test]
    fn relabeling_permutes_multidegrees(q in braiding_strategy()) {
        prop_assume!(q.rank() == 2);
        let a = graded_dimensions(&q, 6).unwrap();
        let b = graded_dimensions(&q.permuted(&[1, 0]), 6).unwrap();
        prop_assert_eq!(&a.by_total_degree, &b.by_total_degree);
        for (d, dim) in &a.by_multidegree {
            prop_assert_eq!(b.dimension(&[d[1], d[0]]), *dim);
        }
    }
}

#[test]
fn cartan_type_dimensions_match_product_formula() {
    let cases: Vec<(&str, u32, u64)> = (2..=7)
        .map(|p| ("A1", p, p as u64))
        .chain([("A2", 2, 8), ("A2", 3, 27), ("A3", 2, 64)])
        .collect();
    for (label, p, expected) in cases {
        let r = build_from_label(label).unwrap();
        let q = DiagonalBraiding::from_cartan(r.cartan(), p);
        let poly = product_formula(&r, p);
        assert_eq!(poly.iter().sum::<u64>(), expected);
        assert!(product_formula_check(&q, &r, p).unwrap(), "{label} p={p}");
        assert_eq!(total_dimension(&q, 24).unwrap(), TotalDimension::Finite(expected));
    }
}

#[test]
fn graded_tables_are_palindromic() {
    for (label, p) in [("A1", 5), ("A2", 2), ("A2", 3), ("A3", 2)] {
        let r = build_from_label(label).unwrap();
        let t = graded_dimensions(&DiagonalBraiding::from_cartan(r.cartan(), p), 24).unwrap();
        let h = t.hilbert_coeffs();
        let rev: Vec<u64> = h.iter().rev().copied().collect();
        assert_eq!(h, &rev[..], "{label} p={p}");
        let NicholsStatus::Finite { top_degree, .. } = t.status else { panic!() };
        for (d, dim) in &t.by_multidegree {
            let top: Vec<u32> = t
                .by_multidegree
                .keys()
                .max_by_key(|k| k.iter().sum::<u32>())
                .unwrap()
                .clone();
            assert_eq!(top.iter().sum::<u32>() as usize, top_degree);
            let mirror: Vec<u32> = top.iter().zip(d).map(|(a, b)| a - b).collect();
            assert_eq!(t.dimension(&mirror), *dim);
        }
    }
}

#[test]
fn q_commutative_ring_grows_linearly() {
    let q = DiagonalBraiding::from_fractions(&[vec![(0, 1), (1, 2)], vec![(1, 2), (0, 1)]]);
    let t = graded_dimensions(&q, 10).unwrap();
    let expected: Vec<u64> = (0..=10).map(|m| m + 1).collect();
    assert_eq!(t.by_total_degree, expected);
    assert_eq!(t.status, NicholsStatus::CutoffReached { cutoff: 10 });
    assert_eq!(total_dimension(&q, 10).unwrap(), TotalDimension::ExceedsCutoff);

    let free = DiagonalBraiding::from_fractions(&[vec![(0, 1)]]);
    let t = graded_dimensions(&free, 10).unwrap();
    assert_eq!(t.by_total_degree, vec![1; 11]);
    assert_eq!(t.status, NicholsStatus::CutoffReached { cutoff: 10 });
}

#[test]
fn primitives_live_in_degree_one() {
    for (label, p) in [("A1", 3), ("A2", 2), ("A2", 3)] {
        let r = build_from_label(label).unwrap();
        let q = DiagonalBraiding::from_cartan(r.cartan(), p);
        assert_eq!(primitive_dimension(&q, 1).unwrap(), r.rank() as u64);
        for m in 2..=5 {
            assert_eq!(primitive_dimension(&q, m).unwrap(), 0, "{label} p={p} m={m}");
        }
    }
}

#[test]
fn generated_in_degree_one() {
    for (label, p) in [("A1", 4), ("A2", 2), ("A2", 3)] {
        let r = build_from_label(label).unwrap();
        let e = NicholsEngine::new(&DiagonalBraiding::from_cartan(r.cartan(), p)).unwrap();
        let t = e.graded_dimensions(24).unwrap();
        for m in 1..t.by_total_degree.len() {
            let (rank, dim) = e.generation_rank(m).unwrap();
            assert_eq!(rank, dim);
            assert_eq!(dim, t.by_total_degree[m]);
        }
    }
}
