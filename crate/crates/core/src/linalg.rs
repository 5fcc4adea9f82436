//! Small exact linear algebra: Smith normal form over `Z` and dense rational
//! matrix routines used by the lattice and character code.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type IntMatrix = Vec<Vec<i128>>;
pub type RatMatrix = Vec<Vec<BigRational>>;

/// `left * m * right = diag(diag)`, with `left` and `right` unimodular and
/// `diag[i] | diag[i+1]`.
#[derive(Debug, Clone)]
pub struct Snf {
    pub diag: Vec<i128>,
    pub left: IntMatrix,
    pub right: IntMatrix,
}

pub fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}

pub fn int_matmul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let k = b.len();
    let n = if k == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| (0..k).map(|l| row[l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

pub fn smith_normal_form(m: &IntMatrix) -> Snf {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a = m.clone();
    let mut left = identity(rows);
    let mut right = identity(cols);

    let swap_rows = |a: &mut IntMatrix, u: &mut IntMatrix, i: usize, j: usize| {
        a.swap(i, j);
        u.swap(i, j);
    };
    let swap_cols = |a: &mut IntMatrix, v: &mut IntMatrix, i: usize, j: usize| {
        for row in a.iter_mut() {
            row.swap(i, j);
        }
        for row in v.iter_mut() {
            row.swap(i, j);
        }
    };
    // row_i -= f * row_j
    let row_op = |a: &mut IntMatrix, u: &mut IntMatrix, i: usize, j: usize, f: i128| {
        for c in 0..a[0].len() {
            a[i][c] -= f * a[j][c];
        }
        for c in 0..u[0].len() {
            u[i][c] -= f * u[j][c];
        }
    };
    let col_op = |a: &mut IntMatrix, v: &mut IntMatrix, i: usize, j: usize, f: i128| {
        for row in a.iter_mut() {
            row[i] -= f * row[j];
        }
        for row in v.iter_mut() {
            row[i] -= f * row[j];
        }
    };

    let steps = rows.min(cols);
    for t in 0..steps {
        loop {
            // pivot: smallest nonzero absolute value in the trailing block
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if a[i][j] != 0 && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            swap_rows(&mut a, &mut left, t, pi);
            swap_cols(&mut a, &mut right, t, pj);

            let mut clean = true;
            for i in t + 1..rows {
                let f = a[i][t].div_euclid(a[t][t]);
                if f != 0 {
                    row_op(&mut a, &mut left, i, t, f);
                }
                if a[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let f = a[t][j].div_euclid(a[t][t]);
                if f != 0 {
                    col_op(&mut a, &mut right, j, t, f);
                }
                if a[t][j] != 0 {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // enforce divisibility of the trailing block by the pivot
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| a[i][j] % a[t][t] != 0);
            match offender {
                Some((i, _)) => row_op(&mut a, &mut left, t, i, -1),
                None => break,
            }
        }
        if a[t][t] < 0 {
            for c in 0..cols {
                a[t][c] = -a[t][c];
            }
            for c in 0..rows {
                left[t][c] = -left[t][c];
            }
        }
    }
    Snf {
        diag: (0..steps).map(|i| a[i][i]).collect(),
        left,
        right,
    }
}

pub fn to_rational(m: &IntMatrix) -> RatMatrix {
    m.iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
        .collect()
}

pub fn rat_matmul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let k = b.len();
    let n = if k == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| {
                    (0..k).fold(BigRational::zero(), |acc, l| acc + &row[l] * &b[l][j])
                })
                .collect()
        })
        .collect()
}

pub fn rat_matvec(a: &RatMatrix, v: &[BigRational]) -> Vec<BigRational> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(BigRational::zero(), |acc, (x, y)| acc + x * y))
        .collect()
}

/// Bilinear form `u^T g v`.
pub fn bilinear(g: &RatMatrix, u: &[BigRational], v: &[BigRational]) -> BigRational {
    u.iter()
        .zip(rat_matvec(g, v))
        .fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
}

/// Inverse by Gauss-Jordan elimination; `None` for singular input.
pub fn rat_inverse(m: &RatMatrix) -> Option<RatMatrix> {
    let n = m.len();
    let mut aug: RatMatrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, piv);
        let p = aug[col][col].recip();
        for v in aug[col].iter_mut() {
            *v *= &p;
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in col..2 * n {
                    let t = &aug[col][c] * &f;
                    aug[r][c] -= t;
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn rat_determinant(m: &RatMatrix) -> BigRational {
    let n = m.len();
    let mut a = m.clone();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= &a[col][col];
        for r in col + 1..n {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let t = &a[col][c] * &f;
                    a[r][c] -= t;
                }
            }
        }
    }
    det
}

/// Sylvester's criterion on leading principal minors.
pub fn is_positive_definite(m: &RatMatrix) -> bool {
    (1..=m.len()).all(|k| {
        let minor: RatMatrix = m[..k].iter().map(|r| r[..k].to_vec()).collect();
        rat_determinant(&minor).is_positive()
    })
}

/// `m = L D L^T` with unit lower-triangular `L`; returns `(L, diag D)`.
/// Requires a positive definite input.
pub fn ldl(m: &RatMatrix) -> (RatMatrix, Vec<BigRational>) {
    let n = m.len();
    let mut l = vec![vec![BigRational::zero(); n]; n];
    let mut d = vec![BigRational::zero(); n];
    for j in 0..n {
        let mut dj = m[j][j].clone();
        for k in 0..j {
            dj -= &l[j][k] * &l[j][k] * &d[k];
        }
        d[j] = dj;
        l[j][j] = BigRational::one();
        for i in j + 1..n {
            let mut s = m[i][j].clone();
            for k in 0..j {
                s -= &l[i][k] * &l[j][k] * &d[k];
            }
            l[i][j] = s / &d[j];
        }
    }
    (l, d)
}
