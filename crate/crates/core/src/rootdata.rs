//! Simply-laced root systems.
//!
//! Roots are written in simple-root coordinates, weights in fundamental-weight
//! coordinates, and `(alpha_i, alpha_i) = 2`, so `(lambda, beta) = sum lambda_i beta_i`
//! when `lambda` is a weight and `beta` a root.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::linalg::{rat_inverse, to_rational, RatMatrix};
use crate::rational::int;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RootError {
    #[error("unsupported root system {0:?} (expected A_n, D_n with n >= 4, or E6/E7/E8)")]
    UnsupportedType(String),
    #[error("Weyl group of order {0} exceeds the enumeration bound {1}")]
    WeylTooLarge(u64, u64),
    #[error("weight {0:?} is not dominant")]
    NotDominant(Vec<i64>),
    #[error("weight {0:?} has {1} coordinates, rank is {2}")]
    RankMismatch(Vec<i64>, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootType {
    A,
    D,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CartanType {
    pub family: RootType,
    pub rank: usize,
}

impl CartanType {
    pub fn new(family: RootType, rank: usize) -> Result<Self, RootError> {
        let ok = match family {
            RootType::A => rank >= 1,
            RootType::D => rank >= 4,
            RootType::E => (6..=8).contains(&rank),
        };
        let t = CartanType { family, rank };
        if ok {
            Ok(t)
        } else {
            Err(RootError::UnsupportedType(t.to_string()))
        }
    }

    /// Order of the Weyl group.
    pub fn weyl_order(&self) -> u64 {
        let fact = |n: usize| (1..=n as u64).product::<u64>();
        match self.family {
            RootType::A => fact(self.rank + 1),
            RootType::D => (1u64 << (self.rank - 1)) * fact(self.rank),
            RootType::E => match self.rank {
                6 => 51_840,
                7 => 2_903_040,
                _ => 696_729_600,
            },
        }
    }
}

impl fmt::Display for CartanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.family {
            RootType::A => 'A',
            RootType::D => 'D',
            RootType::E => 'E',
        };
        write!(f, "{c}{}", self.rank)
    }
}

impl FromStr for CartanType {
    type Err = RootError;

    fn from_str(s: &str) -> Result<Self, RootError> {
        let err = || RootError::UnsupportedType(s.to_string());
        let t = s.trim();
        let mut chars = t.chars();
        let family = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('A') => RootType::A,
            Some('D') => RootType::D,
            Some('E') => RootType::E,
            _ => return Err(err()),
        };
        let rank: usize = chars.as_str().trim_start_matches('_').parse().map_err(|_| err())?;
        CartanType::new(family, rank).map_err(|_| err())
    }
}

pub fn cartan_matrix(t: CartanType) -> Vec<Vec<i64>> {
    let n = t.rank;
    let mut c = vec![vec![0i64; n]; n];
    let mut link = |i: usize, j: usize| {
        c[i][j] = -1;
        c[j][i] = -1;
    };
    match t.family {
        RootType::A => (1..n).for_each(|i| link(i - 1, i)),
        RootType::D => {
            (1..n - 1).for_each(|i| link(i - 1, i));
            link(n - 3, n - 1);
        }
        RootType::E => {
            // Bourbaki labels: 1-3-4-5-6-7-8 with 2 attached to 4
            link(0, 2);
            link(1, 3);
            (3..n).for_each(|i| link(i - 1, i));
        }
    }
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 2;
    }
    c
}

/// Element of the Weyl group: a reduced word in simple reflections and its
/// matrix on simple-root coordinates (columns are images of simple roots).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeylElement {
    pub word: Vec<usize>,
    pub matrix: Vec<Vec<i64>>,
}

impl WeylElement {
    pub fn length(&self) -> usize {
        self.word.len()
    }

    pub fn det(&self) -> i64 {
        if self.word.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn act_on_root(&self, beta: &[i64]) -> Vec<i64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug)]
pub struct RootSystem {
    cartan_type: CartanType,
    cartan: Vec<Vec<i64>>,
    cartan_inverse: RatMatrix,
    positive_roots: Vec<Vec<i64>>,
    theta: Vec<i64>,
    weyl: Result<Vec<WeylElement>, RootError>,
    multiplicity_cache: Mutex<HashMap<(Vec<i64>, Vec<i64>), BigUint>>,
}

pub const WEYL_BOUND: u64 = 1_000_000;

/// Builds all data; Weyl enumeration is attempted up to [`WEYL_BOUND`] and
/// otherwise reported through [`RootSystem::weyl_elements`].
pub fn build(t: CartanType) -> RootSystem {
    build_with_bound(t, WEYL_BOUND)
}

pub fn build_from_label(label: &str) -> Result<RootSystem, RootError> {
    Ok(build(label.parse()?))
}

pub fn build_with_bound(t: CartanType, weyl_bound: u64) -> RootSystem {
    let cartan = cartan_matrix(t);
    let n = t.rank;
    let cartan_inverse = rat_inverse(&to_rational(
        &cartan.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect(),
    ))
    .expect("Cartan matrix is invertible");

    // (beta, alpha_i) for root-coordinate beta
    let pair = |beta: &[i64], i: usize| -> i64 { (0..n).map(|j| beta[j] * cartan[j][i]).sum() };

    // simply-laced: beta + alpha_i is a root iff (beta, alpha_i) = -1
    let unit = |i: usize| -> Vec<i64> { (0..n).map(|j| i64::from(i == j)).collect() };
    let mut positive_roots: Vec<Vec<i64>> = (0..n).map(unit).collect();
    let mut seen: HashSet<Vec<i64>> = positive_roots.iter().cloned().collect();
    let mut layer = positive_roots.clone();
    while !layer.is_empty() {
        let mut next = Vec::new();
        for beta in &layer {
            for i in 0..n {
                if pair(beta, i) == -1 {
                    let mut up = beta.clone();
                    up[i] += 1;
                    if seen.insert(up.clone()) {
                        next.push(up);
                    }
                }
            }
        }
        next.sort();
        positive_roots.extend(next.iter().cloned());
        layer = next;
    }
    let theta = positive_roots.last().expect("nonempty").clone();

    let weyl = if t.weyl_order() > weyl_bound {
        Err(RootError::WeylTooLarge(t.weyl_order(), weyl_bound))
    } else {
        Ok(enumerate_weyl(&cartan))
    };

    RootSystem {
        cartan_type: t,
        cartan,
        cartan_inverse,
        positive_roots,
        theta,
        weyl,
        multiplicity_cache: Mutex::new(HashMap::new()),
    }
}

fn enumerate_weyl(cartan: &[Vec<i64>]) -> Vec<WeylElement> {
    let n = cartan.len();
    let identity: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect();
    // s_i(alpha_j) = alpha_j - C_ji alpha_i; left-multiplying w by s_i
    let reflect = |m: &Vec<Vec<i64>>, i: usize| -> Vec<Vec<i64>> {
        let mut out = m.clone();
        for col in 0..n {
            let p: i64 = (0..n).map(|r| m[r][col] * cartan[r][i]).sum();
            out[i][col] -= p;
        }
        out
    };
    let mut seen: HashSet<Vec<Vec<i64>>> = HashSet::from([identity.clone()]);
    let mut out = vec![WeylElement {
        word: vec![],
        matrix: identity.clone(),
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        for i in 0..n {
            let m = reflect(&out[idx].matrix, i);
            if seen.insert(m.clone()) {
                let mut word = vec![i];
                word.extend(&out[idx].word);
                out.push(WeylElement { word, matrix: m });
                queue.push_back(out.len() - 1);
            }
        }
    }
    out
}

impl RootSystem {
    pub fn cartan_type(&self) -> CartanType {
        self.cartan_type
    }

    pub fn rank(&self) -> usize {
        self.cartan_type.rank
    }

    pub fn cartan(&self) -> &[Vec<i64>] {
        &self.cartan
    }

    pub fn positive_roots(&self) -> &[Vec<i64>] {
        &self.positive_roots
    }

    pub fn heights(&self) -> Vec<i64> {
        self.positive_roots.iter().map(|b| b.iter().sum()).collect()
    }

    pub fn theta(&self) -> &[i64] {
        &self.theta
    }

    /// Weyl vector in fundamental coordinates.
    pub fn rho(&self) -> Vec<i64> {
        vec![1; self.rank()]
    }

    pub fn dual_coxeter(&self) -> i64 {
        self.theta.iter().sum::<i64>() + 1
    }

    pub fn weyl_elements(&self) -> Result<&[WeylElement], RootError> {
        self.weyl.as_deref().map_err(Clone::clone)
    }

    /// Root in simple-root coordinates to fundamental-weight coordinates.
    pub fn root_to_weight(&self, beta: &[i64]) -> Vec<i64> {
        let n = self.rank();
        (0..n).map(|j| (0..n).map(|i| beta[i] * self.cartan[i][j]).sum()).collect()
    }

    /// `(lambda, mu)` for weights in fundamental coordinates.
    pub fn weight_inner(&self, lambda: &[i64], mu: &[i64]) -> BigRational {
        let n = self.rank();
        let mut s = BigRational::zero();
        for i in 0..n {
            for j in 0..n {
                if lambda[i] != 0 && mu[j] != 0 {
                    s += &self.cartan_inverse[i][j] * int(lambda[i] * mu[j]);
                }
            }
        }
        s
    }

    pub fn cartan_inverse(&self) -> &RatMatrix {
        &self.cartan_inverse
    }

    /// `s_i` on a weight in fundamental coordinates.
    pub fn reflect_weight(&self, lambda: &[i64], i: usize) -> Vec<i64> {
        let c = lambda[i];
        lambda
            .iter()
            .zip(&self.cartan[i])
            .map(|(l, a)| l - c * a)
            .collect()
    }

    /// Applies a word right-to-left (`word[0]` acts last).
    pub fn act_on_weight(&self, w: &WeylElement, lambda: &[i64]) -> Vec<i64> {
        w.word
            .iter()
            .rev()
            .fold(lambda.to_vec(), |acc, &i| self.reflect_weight(&acc, i))
    }

    /// Dominant conjugate of a weight and the parity of the reflections used.
    pub fn dominant_conjugate(&self, lambda: &[i64]) -> (Vec<i64>, usize) {
        let mut v = lambda.to_vec();
        let mut steps = 0;
        while let Some(i) = v.iter().position(|&x| x < 0) {
            v = self.reflect_weight(&v, i);
            steps += 1;
        }
        (v, steps)
    }

    fn check_rank(&self, lambda: &[i64]) -> Result<(), RootError> {
        if lambda.len() != self.rank() {
            return Err(RootError::RankMismatch(lambda.to_vec(), lambda.len(), self.rank()));
        }
        Ok(())
    }

    /// `dim L_mu = prod_{beta > 0} (mu + rho, beta) / (rho, beta)`.
    pub fn weyl_dimension(&self, mu: &[i64]) -> Result<BigUint, RootError> {
        self.check_rank(mu)?;
        if mu.iter().any(|&x| x < 0) {
            return Err(RootError::NotDominant(mu.to_vec()));
        }
        let mut num = BigInt::from(1);
        let mut den = BigInt::from(1);
        for beta in &self.positive_roots {
            let ht: i64 = beta.iter().sum();
            let shifted: i64 = beta.iter().zip(mu).map(|(b, m)| b * (m + 1)).sum();
            num *= shifted;
            den *= ht;
        }
        debug_assert!((&num % &den).is_zero());
        Ok((num / den).to_biguint().expect("positive"))
    }

    /// Resolves `nu` to `(det w, w(nu + rho) - rho)` with `w(nu + rho)` dominant,
    /// or sign 0 when `nu + rho` is singular.
    pub fn signed_dominant_representative(&self, nu: &[i64]) -> (i32, Vec<i64>) {
        let shifted: Vec<i64> = nu.iter().map(|x| x + 1).collect();
        let (v, steps) = self.dominant_conjugate(&shifted);
        let dom: Vec<i64> = v.iter().map(|x| x - 1).collect();
        if v.contains(&0) {
            (0, dom)
        } else if steps % 2 == 0 {
            (1, dom)
        } else {
            (-1, dom)
        }
    }

    /// `lambda - mu` in simple-root coordinates, when it is an integral combination.
    pub fn root_coordinates(&self, diff: &[i64]) -> Option<Vec<i64>> {
        let n = self.rank();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let s = (0..n).fold(BigRational::zero(), |acc, j| {
                acc + &self.cartan_inverse[i][j] * int(diff[j])
            });
            if !s.is_integer() {
                return None;
            }
            out.push(s.to_integer().to_i64()?);
        }
        Some(out)
    }

    /// Multiplicity of the weight `mu` in `L_lambda` by Freudenthal's recursion.
    pub fn weight_multiplicity(&self, lambda: &[i64], mu: &[i64]) -> Result<BigUint, RootError> {
        self.check_rank(lambda)?;
        self.check_rank(mu)?;
        if lambda.iter().any(|&x| x < 0) {
            return Err(RootError::NotDominant(lambda.to_vec()));
        }
        Ok(self.freudenthal(lambda, mu))
    }

    fn freudenthal(&self, lambda: &[i64], mu: &[i64]) -> BigUint {
        let (d, _) = self.dominant_conjugate(mu);
        let below = |w: &[i64]| -> bool {
            let diff: Vec<i64> = lambda.iter().zip(w).map(|(a, b)| a - b).collect();
            self.root_coordinates(&diff)
                .is_some_and(|k| k.iter().all(|&x| x >= 0))
        };
        if !below(&d) {
            return BigUint::zero();
        }
        if d == lambda {
            return BigUint::from(1u32);
        }
        let key = (lambda.to_vec(), d.clone());
        if let Some(m) = self.multiplicity_cache.lock().unwrap().get(&key) {
            return m.clone();
        }
        let rho = self.rho();
        let norm = |w: &[i64]| {
            let s: Vec<i64> = w.iter().zip(&rho).map(|(a, b)| a + b).collect();
            self.weight_inner(&s, &s)
        };
        let denom = norm(lambda) - norm(&d);
        let mut total = BigRational::zero();
        for beta in &self.positive_roots {
            let bw = self.root_to_weight(beta);
            let mut k = 1i64;
            loop {
                let shifted: Vec<i64> = d.iter().zip(&bw).map(|(a, b)| a + k * b).collect();
                if !below(&shifted) {
                    break;
                }
                let pairing: i64 = shifted.iter().zip(beta).map(|(a, b)| a * b).sum();
                let m = self.freudenthal(lambda, &shifted);
                total += int(pairing) * BigRational::from_integer(BigInt::from(m));
                k += 1;
            }
        }
        let m = int(2) * total / denom;
        debug_assert!(m.is_integer() && !m.is_negative());
        let m = m.to_integer().to_biguint().expect("nonnegative multiplicity");
        self.multiplicity_cache.lock().unwrap().insert(key, m.clone());
        m
    }
}
