//! Exact arithmetic in cyclotomic fields `Q(zeta_N)`.
//!
//! A [`CycloScalar`] stores its value as a polynomial in `zeta_N` of degree
//! below `phi(N)`, reduced modulo the `N`-th cyclotomic polynomial. That
//! representation is canonical, so equality and the zero test are exact.
//! Scalars of different orders are combined after embedding both into the
//! field of order `lcm`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rational, parse_rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycloError {
    #[error("division by zero in Q(zeta_{0})")]
    DivisionByZero(u32),
    #[error("multiplicative order of zero is undefined")]
    ZeroInput,
    #[error("invalid cyclotomic scalar encoding: {0}")]
    Malformed(String),
}

/// Result of [`CycloScalar::mult_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultOrder {
    Finite(u32),
    NotFinite,
}

/// Integer coefficients of `Phi_N`, lowest degree first, plus `phi(N)`.
#[derive(Debug)]
struct FieldTables {
    order: u32,
    phi: usize,
    cyclotomic: Vec<i64>,
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    // den is monic
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let nd = num.len() - 1;
    let mut quot = vec![0i64; nd - dd + 1];
    for k in (0..=nd - dd).rev() {
        let c = rem[k + dd];
        quot[k] = c;
        if c != 0 {
            for (j, &d) in den.iter().enumerate() {
                rem[k + j] -= c * d;
            }
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0));
    quot
}

fn cyclotomic_poly(n: u32) -> Vec<i64> {
    // x^n - 1 divided by Phi_d for every proper divisor d of n
    let mut p = vec![0i64; n as usize + 1];
    p[0] = -1;
    p[n as usize] = 1;
    for d in 1..n {
        if n % d == 0 {
            p = poly_div_exact(&p, &cyclotomic_poly(d));
        }
    }
    p
}

fn tables(order: u32) -> Arc<FieldTables> {
    static CACHE: OnceLock<RwLock<HashMap<u32, Arc<FieldTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(t) = cache.read().expect("field cache poisoned").get(&order) {
        return t.clone();
    }
    let cyclotomic = cyclotomic_poly(order);
    let t = Arc::new(FieldTables {
        order,
        phi: cyclotomic.len() - 1,
        cyclotomic,
    });
    cache
        .write()
        .expect("field cache poisoned")
        .entry(order)
        .or_insert(t)
        .clone()
}

/// Euler's totient, computed from the degree of the cyclotomic polynomial.
pub fn euler_phi(n: u32) -> usize {
    tables(n).phi
}

/// An exact element of `Q(zeta_N)`.
#[derive(Clone)]
pub struct CycloScalar {
    field: Arc<FieldTables>,
    coeffs: Vec<BigRational>,
}

impl CycloScalar {
    pub fn zero(order: u32) -> Self {
        let field = tables(order.max(1));
        let coeffs = vec![BigRational::zero(); field.phi];
        CycloScalar { field, coeffs }
    }

    pub fn one(order: u32) -> Self {
        Self::from_rational(order, BigRational::one())
    }

    pub fn from_rational(order: u32, r: BigRational) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = r;
        s
    }

    pub fn from_integer(order: u32, k: i64) -> Self {
        Self::from_rational(order, BigRational::from_integer(BigInt::from(k)))
    }

    /// Builds `sum_k c_k zeta_N^k` from an arbitrary-length coefficient list.
    pub fn from_power_coeffs(order: u32, coeffs: &[BigRational]) -> Self {
        let order = order.max(1);
        let mut acc = Self::zero(order);
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc.add_scaled_power(c, k as u64);
            }
        }
        acc
    }

    /// `zeta_N^k` inside the field of order `N`.
    pub fn zeta_power(order: u32, k: i64) -> Self {
        let order = order.max(1);
        let mut s = Self::zero(order);
        s.add_scaled_power(&BigRational::one(), k.rem_euclid(order as i64) as u64);
        s
    }

    /// Realizes `e^{2 pi i r}`; the result lives in the field whose order is
    /// the denominator of `r mod 1`.
    pub fn root_of_unity(r: &BigRational) -> Self {
        let red = reduce_mod_one(r);
        let d = red.denom().to_u32().expect("root of unity order exceeds u32");
        let k = red.numer().to_i64().expect("numerator fits");
        Self::zeta_power(d, k)
    }

    pub fn order(&self) -> u32 {
        self.field.order
    }

    /// Canonical coefficients in the power basis `1, zeta, .., zeta^{phi-1}`.
    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(Zero::is_zero)
    }

    /// Returns the rational value when the scalar lies in `Q`.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    /// Adds `c * zeta^k` in place.
    fn add_scaled_power(&mut self, c: &BigRational, k: u64) {
        let n = self.field.order as u64;
        let k = (k % n) as usize;
        let phi = self.field.phi;
        if k < phi {
            self.coeffs[k] += c;
            return;
        }
        // reduce x^k through a scratch polynomial
        let mut poly = vec![BigRational::zero(); k + 1];
        poly[k] = c.clone();
        let red = self.reduce(poly);
        for (a, b) in self.coeffs.iter_mut().zip(red) {
            *a += b;
        }
    }

    fn reduce(&self, mut poly: Vec<BigRational>) -> Vec<BigRational> {
        let phi = self.field.phi;
        let cyc = &self.field.cyclotomic;
        if poly.len() > phi {
            for top in (phi..poly.len()).rev() {
                if poly[top].is_zero() {
                    continue;
                }
                let c = std::mem::take(&mut poly[top]);
                for (j, &d) in cyc[..phi].iter().enumerate() {
                    if d != 0 {
                        poly[top - phi + j] -= &c * BigInt::from(d);
                    }
                }
            }
        }
        poly.truncate(phi);
        poly.resize(phi, BigRational::zero());
        poly
    }

    /// Embeds into the field of order `target`, which must be a multiple of
    /// the current order.
    pub fn embed(&self, target: u32) -> Self {
        let n = self.order();
        if n == target {
            return self.clone();
        }
        assert!(target % n == 0, "cannot embed Q(zeta_{n}) into Q(zeta_{target})");
        let step = (target / n) as u64;
        let mut out = Self::zero(target);
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.add_scaled_power(c, k as u64 * step);
            }
        }
        out
    }

    fn unify(a: &Self, b: &Self) -> (Self, Self) {
        if a.order() == b.order() {
            return (a.clone(), b.clone());
        }
        let m = a.order().lcm(&b.order());
        (a.embed(m), b.embed(m))
    }

    fn mul_same(&self, other: &Self) -> Self {
        let phi = self.field.phi;
        let mut poly = vec![BigRational::zero(); 2 * phi - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    poly[i + j] += a * b;
                }
            }
        }
        let coeffs = self.reduce(poly);
        CycloScalar {
            field: self.field.clone(),
            coeffs,
        }
    }

    /// Multiplies by `zeta_N^k`; `k` is taken in this scalar's own order.
    pub fn mul_zeta_power(&self, k: i64) -> Self {
        let n = self.order() as i64;
        let k = k.rem_euclid(n) as u64;
        if k == 0 {
            return self.clone();
        }
        let mut out = Self::zero(self.order());
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.add_scaled_power(c, i as u64 + k);
            }
        }
        out
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        CycloScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.order());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_same(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_same(&base);
            }
        }
        acc
    }

    pub fn inv(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero(self.order()));
        }
        if let Some(r) = self.as_rational() {
            return Ok(Self::from_rational(self.order(), r.recip()));
        }
        // Solve (self * x) = 1 via the multiplication matrix in the power basis.
        let phi = self.field.phi;
        let mut cols = Vec::with_capacity(phi);
        let mut basis = Self::one(self.order());
        for _ in 0..phi {
            cols.push(self.mul_same(&basis).coeffs);
            basis = basis.mul_zeta_power(1);
        }
        let mut aug: Vec<Vec<BigRational>> = (0..phi)
            .map(|r| {
                let mut row: Vec<BigRational> = (0..phi).map(|c| cols[c][r].clone()).collect();
                row.push(if r == 0 { BigRational::one() } else { BigRational::zero() });
                row
            })
            .collect();
        for col in 0..phi {
            let piv = (col..phi)
                .find(|&r| !aug[r][col].is_zero())
                .ok_or(CycloError::DivisionByZero(self.order()))?;
            aug.swap(col, piv);
            let p = aug[col][col].recip();
            for v in aug[col].iter_mut() {
                *v *= &p;
            }
            for r in 0..phi {
                if r != col && !aug[r][col].is_zero() {
                    let f = aug[r][col].clone();
                    for c in col..=phi {
                        let t = &aug[col][c] * &f;
                        aug[r][c] -= t;
                    }
                }
            }
        }
        Ok(CycloScalar {
            field: self.field.clone(),
            coeffs: aug.into_iter().map(|mut row| row.pop().unwrap()).collect(),
        })
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, CycloError> {
        Ok(self * &other.inv()?)
    }

    /// Smallest `m >= 1` with `a^m = 1`, searched up to `2N`.
    pub fn mult_order(&self) -> Result<MultOrder, CycloError> {
        if self.is_zero() {
            return Err(CycloError::ZeroInput);
        }
        let bound = 2 * self.order().max(1);
        let mut acc = self.clone();
        for m in 1..=bound {
            if acc.is_one() {
                return Ok(MultOrder::Finite(m));
            }
            acc = acc.mul_same(self);
        }
        Ok(MultOrder::NotFinite)
    }

    /// Complex value as `(re, im)` in double precision.
    pub fn to_complex(&self) -> (f64, f64) {
        let n = self.order() as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let v = c.to_f64().unwrap_or(f64::NAN);
            let ang = 2.0 * std::f64::consts::PI * k as f64 / n;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        (re, im)
    }
}

/// `r mod 1` as a rational in `[0, 1)`.
pub fn reduce_mod_one(r: &BigRational) -> BigRational {
    r - r.floor()
}

/// `r mod m` in `[0, m)` for a positive integer modulus.
pub fn reduce_mod(r: &BigRational, m: i64) -> BigRational {
    let m = BigRational::from_integer(BigInt::from(m));
    r - (r / &m).floor() * m
}

impl PartialEq for CycloScalar {
    fn eq(&self, other: &Self) -> bool {
        if self.order() == other.order() {
            return self.coeffs == other.coeffs;
        }
        let (a, b) = Self::unify(self, other);
        a.coeffs == b.coeffs
    }
}

impl Eq for CycloScalar {}

impl fmt::Debug for CycloScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycloScalar[{}](", self.order())?;
        write!(f, "{self})")
    }
}

impl fmt::Display for CycloScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{}", format_rational(&a))?,
                _ => {
                    if !a.is_one() {
                        write!(f, "{}*", format_rational(&a))?;
                    }
                    if k == 1 {
                        write!(f, "z{}", self.order())?;
                    } else {
                        write!(f, "z{}^{}", self.order(), k)?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a CycloScalar> for &'a CycloScalar {
            type Output = CycloScalar;
            fn $m(self, rhs: &'a CycloScalar) -> CycloScalar {
                let f: fn(&CycloScalar, &CycloScalar) -> CycloScalar = $body;
                if self.order() == rhs.order() {
                    f(self, rhs)
                } else {
                    let (a, b) = CycloScalar::unify(self, rhs);
                    f(&a, &b)
                }
            }
        }
        impl $tr for CycloScalar {
            type Output = CycloScalar;
            fn $m(self, rhs: CycloScalar) -> CycloScalar {
                (&self).$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| CycloScalar {
    field: a.field.clone(),
    coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
});
binop!(Sub, sub, |a, b| CycloScalar {
    field: a.field.clone(),
    coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
});
binop!(Mul, mul, |a, b| a.mul_same(b));

impl Neg for &CycloScalar {
    type Output = CycloScalar;
    fn neg(self) -> CycloScalar {
        CycloScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycloScalar {
    type Output = CycloScalar;
    fn neg(self) -> CycloScalar {
        -&self
    }
}

/// JSON form: `{"order": N, "coeffs": ["p/q", ...]}` with `N` coefficients,
/// or the abbreviation `{"root": "k/n"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CycloJson {
    Dense { order: u32, coeffs: Vec<String> },
    Root { root: String },
}

impl From<&CycloScalar> for CycloJson {
    fn from(s: &CycloScalar) -> Self {
        let n = s.order() as usize;
        let mut coeffs: Vec<String> = s.coeffs.iter().map(format_rational).collect();
        coeffs.resize(n.max(1), "0".to_string());
        CycloJson::Dense {
            order: s.order(),
            coeffs,
        }
    }
}

impl TryFrom<&CycloJson> for CycloScalar {
    type Error = CycloError;
    fn try_from(j: &CycloJson) -> Result<Self, CycloError> {
        match j {
            CycloJson::Dense { order, coeffs } => {
                if *order == 0 {
                    return Err(CycloError::Malformed("order must be positive".into()));
                }
                let parsed = coeffs
                    .iter()
                    .map(|c| parse_rational(c).map_err(|e| CycloError::Malformed(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(CycloScalar::from_power_coeffs(*order, &parsed))
            }
            CycloJson::Root { root } => {
                let r = parse_rational(root).map_err(|e| CycloError::Malformed(e.to_string()))?;
                Ok(CycloScalar::root_of_unity(&r))
            }
        }
    }
}

impl Serialize for CycloScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CycloJson::from(self).serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(cyclotomic_poly(1), vec![-1, 1]);
        assert_eq!(cyclotomic_poly(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_poly(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_poly(12), vec![1, 0, -1, 0, 1]);
        assert_eq!(euler_phi(15), 8);
    }

    #[test]
    fn root_of_unity_examples() {
        assert!(CycloScalar::root_of_unity(&rat(0, 1)).is_one());
        assert_eq!(CycloScalar::root_of_unity(&rat(1, 4)), CycloScalar::zeta_power(4, 1));
        assert_eq!(CycloScalar::root_of_unity(&rat(1, 2)), CycloScalar::from_integer(1, -1));
        assert_eq!(CycloScalar::root_of_unity(&rat(-3, 4)), CycloScalar::zeta_power(4, 1));
    }

    #[test]
    fn field_op_examples() {
        let i = CycloScalar::zeta_power(4, 1);
        assert_eq!(&i * &i, CycloScalar::from_integer(4, -1));
        let z = CycloScalar::zeta_power(3, 1);
        let sum = &(&CycloScalar::one(3) + &z) + &(&z * &z);
        assert!(sum.is_zero());
        let z8 = CycloScalar::zeta_power(8, 1);
        assert_eq!(z8.inv().unwrap(), CycloScalar::zeta_power(8, 7));
        assert_eq!(
            CycloScalar::zero(5).inv(),
            Err(CycloError::DivisionByZero(5))
        );
    }

    #[test]
    fn mixed_orders_embed_into_lcm() {
        let a = CycloScalar::zeta_power(4, 1);
        let b = CycloScalar::zeta_power(6, 1);
        let c = &a * &b;
        assert_eq!(c.order(), 12);
        assert_eq!(c, CycloScalar::zeta_power(12, 5));
        assert_eq!(CycloScalar::zeta_power(2, 1), CycloScalar::zeta_power(12, 6));
    }

    #[test]
    fn mult_order_examples() {
        assert_eq!(CycloScalar::from_integer(1, -1).mult_order(), Ok(MultOrder::Finite(2)));
        assert_eq!(
            CycloScalar::root_of_unity(&rat(1, 5)).mult_order(),
            Ok(MultOrder::Finite(5))
        );
        let one_plus_i = &CycloScalar::one(4) + &CycloScalar::zeta_power(4, 1);
        assert_eq!(one_plus_i.mult_order(), Ok(MultOrder::NotFinite));
        assert_eq!(CycloScalar::zero(3).mult_order(), Err(CycloError::ZeroInput));
    }

    #[test]
    fn mult_order_of_all_small_roots() {
        for n in 1..=24i64 {
            for k in 1..=n {
                let expect = (n / k.gcd(&n)) as u32;
                let got = CycloScalar::root_of_unity(&rat(k, n)).mult_order().unwrap();
                assert_eq!(got, MultOrder::Finite(expect), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn json_round_trip_and_root_abbreviation() {
        let a = &CycloScalar::zeta_power(12, 5) + &CycloScalar::from_rational(12, rat(3, 7));
        let j = CycloJson::from(&a);
        let back = CycloScalar::try_from(&j).unwrap();
        assert_eq!(a, back);
        let r: CycloJson = serde_json::from_str(r#"{"root": "3/8"}"#).unwrap();
        assert_eq!(CycloScalar::try_from(&r).unwrap(), CycloScalar::zeta_power(8, 3));
    }
}
