//! Truncated q-series with rational exponents: eta powers, lattice thetas,
//! false-theta characters, high-precision evaluation at `q = e^{-2 pi t}` and
//! extrapolation to the cusp `t -> 0+`.

use std::collections::BTreeMap;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::IntegralLattice;
use crate::linalg::{is_positive_definite, ldl, RatMatrix};
use crate::rational::{format_rational, int, rat};
use crate::rootdata::{RootError, RootSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QSeriesError {
    #[error("ellipsoid enumeration exceeded {limit} lattice points")]
    EllipsoidOverflow { limit: usize },
    #[error("schedule has {0} points, at least 3 are needed")]
    ScheduleTooShort(usize),
    #[error("denominator {value} +/- {error} is not bounded away from zero")]
    DivisionByNearZero { value: f64, error: f64 },
    #[error("series carries no tail majorant")]
    TailBoundUnavailable,
    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("tail bound {bound:e} still above target {target:e}")]
    TailTooLarge { bound: f64, target: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Bound on `sum |c| e^{-2 pi t x}` over the terms with exponent `x` beyond the
/// cutoff that a truncated series leaves out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailMajorant {
    /// Nothing beyond the cutoff.
    Zero,
    /// Points of a shifted lattice: at most `(1 + 2 sqrt(x / a))^rank` points
    /// with exponent `<= x`, each with `|c| <= k (c + d sqrt(x))^power`.
    Gaussian {
        rank: usize,
        a: f64,
        k: f64,
        c: f64,
        d: f64,
        power: u32,
    },
    /// `q^offset prod (1 - q^j)^{-colors}` expanded in integer keys.
    Partitions { colors: u32 },
}

impl TailMajorant {
    fn scaled(&self, factor: f64) -> Self {
        match self {
            TailMajorant::Gaussian { rank, a, k, c, d, power } => TailMajorant::Gaussian {
                rank: *rank,
                a: *a,
                k: k * factor,
                c: *c,
                d: *d,
                power: *power,
            },
            other => other.clone(),
        }
    }
}

/// `q^offset * sum_e c_e q^e`, known exactly for keys `e <= cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalQSeries {
    terms: BTreeMap<BigRational, BigRational>,
    cutoff: BigRational,
    offset: BigRational,
    tail: Option<TailMajorant>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exponent: String,
    coeff: String,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    offset: String,
    cutoff: String,
    terms: Vec<TermJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tail: Option<TailMajorant>,
}

impl Serialize for RationalQSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SeriesJson {
            offset: format_rational(&self.offset),
            cutoff: format_rational(&self.cutoff),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    exponent: format_rational(e),
                    coeff: format_rational(c),
                })
                .collect(),
            tail: self.tail.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalQSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        use crate::rational::parse_rational;
        let j = SeriesJson::deserialize(d)?;
        let p = |s: &str| parse_rational(s).map_err(|e| D::Error::custom(e.0));
        let mut terms = Vec::new();
        for t in &j.terms {
            terms.push((p(&t.exponent)?, p(&t.coeff)?));
        }
        let mut out = RationalQSeries::from_terms(terms, p(&j.cutoff)?);
        out.offset = p(&j.offset)?;
        out.tail = j.tail;
        Ok(out)
    }
}

impl RationalQSeries {
    /// Terms beyond `cutoff` and zero coefficients are dropped; repeated
    /// exponents are summed.
    pub fn from_terms(
        terms: impl IntoIterator<Item = (BigRational, BigRational)>,
        cutoff: BigRational,
    ) -> Self {
        let mut map: BTreeMap<BigRational, BigRational> = BTreeMap::new();
        for (e, c) in terms {
            if e <= cutoff {
                *map.entry(e).or_insert_with(BigRational::zero) += c;
            }
        }
        map.retain(|_, c| !c.is_zero());
        RationalQSeries {
            terms: map,
            cutoff,
            offset: BigRational::zero(),
            tail: None,
        }
    }

    /// A finite sum, exact to every order.
    pub fn polynomial(terms: impl IntoIterator<Item = (BigRational, BigRational)>) -> Self {
        let terms: Vec<_> = terms.into_iter().collect();
        let cutoff = terms
            .iter()
            .map(|(e, _)| e.clone())
            .max()
            .unwrap_or_else(BigRational::zero);
        let mut s = Self::from_terms(terms, cutoff);
        s.tail = Some(TailMajorant::Zero);
        s
    }

    pub fn constant(c: BigRational) -> Self {
        Self::polynomial([(BigRational::zero(), c)])
    }

    pub fn monomial(exponent: BigRational, c: BigRational) -> Self {
        Self::polynomial([(exponent, c)])
    }

    pub fn zero(cutoff: BigRational) -> Self {
        Self::from_terms([], cutoff)
    }

    pub fn terms(&self) -> &BTreeMap<BigRational, BigRational> {
        &self.terms
    }

    pub fn cutoff(&self) -> &BigRational {
        &self.cutoff
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    pub fn tail(&self) -> Option<&TailMajorant> {
        self.tail.as_ref()
    }

    pub fn with_tail(mut self, tail: TailMajorant) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_offset(mut self, offset: BigRational) -> Self {
        self.offset = offset;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.tail, Some(TailMajorant::Zero))
    }

    /// Coefficient of `q^{offset + key}`.
    pub fn coefficient(&self, key: &BigRational) -> BigRational {
        self.terms.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Lowest key present, or the cutoff for a series known to vanish there.
    pub fn valuation(&self) -> BigRational {
        self.terms
            .keys()
            .next()
            .cloned()
            .unwrap_or_else(|| self.cutoff.clone())
    }

    /// Moves the offset into the keys of `other` so both share `self.offset`.
    fn rebased(&self, offset: &BigRational) -> (BTreeMap<BigRational, BigRational>, BigRational) {
        let delta = &self.offset - offset;
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e + &delta, c.clone()))
            .collect();
        (terms, &self.cutoff + &delta)
    }

    fn combine(&self, other: &Self, sign: i64) -> Self {
        let (b_terms, b_cut) = other.rebased(&self.offset);
        let exact = self.is_polynomial() && other.is_polynomial();
        let cutoff = if exact {
            self.cutoff.clone().max(b_cut)
        } else {
            self.cutoff.clone().min(b_cut)
        };
        let s = int(sign);
        let all = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.clone()))
            .chain(b_terms.into_iter().map(|(e, c)| (e, c * &s)));
        let mut out = Self::from_terms(all, cutoff);
        out.offset = self.offset.clone();
        if exact {
            out.tail = Some(TailMajorant::Zero);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1)
    }

    /// Exact product; the result is reliable up to
    /// `min(cutoff_a + val_b, cutoff_b + val_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let exact = self.is_polynomial() && other.is_polynomial();
        let cutoff = if exact {
            &self.cutoff + &other.cutoff
        } else {
            let x = &self.cutoff + other.valuation();
            let y = &other.cutoff + self.valuation();
            x.min(y)
        };
        let mut map: BTreeMap<BigRational, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea + eb;
                if e > cutoff {
                    break;
                }
                *map.entry(e).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        let mut out = Self::from_terms(map, cutoff);
        out.offset = &self.offset + &other.offset;
        if exact {
            out.tail = Some(TailMajorant::Zero);
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::from_terms(
            self.terms.iter().map(|(e, x)| (e.clone(), x * c)),
            self.cutoff.clone(),
        );
        out.offset = self.offset.clone();
        let factor = c.abs().to_f64().unwrap_or(f64::INFINITY);
        out.tail = self.tail.as_ref().map(|t| t.scaled(factor));
        out
    }

    /// Multiplies by `q^s`, absorbed into the offset.
    pub fn shift(&self, s: &BigRational) -> Self {
        let mut out = self.clone();
        out.offset = &self.offset + s;
        out
    }

    /// Re-expresses the series with offset `offset`, moving the difference into
    /// the keys.
    pub fn rebase(&self, offset: &BigRational) -> Self {
        let (terms, cutoff) = self.rebased(offset);
        let mut out = Self::from_terms(terms, cutoff);
        out.offset = offset.clone();
        out.tail = self.tail.clone();
        out
    }

    /// Restricts to keys `<= cutoff`.
    pub fn truncate(&self, cutoff: &BigRational) -> Self {
        if cutoff >= &self.cutoff {
            return self.clone();
        }
        let mut out = Self::from_terms(
            self.terms.iter().map(|(e, c)| (e.clone(), c.clone())),
            cutoff.clone(),
        );
        out.offset = self.offset.clone();
        out.tail = self.tail.as_ref().and_then(|t| match t {
            TailMajorant::Zero => None,
            other => Some(other.clone()),
        });
        out
    }

    /// Sum of coefficients: the exact `t -> 0` limit of a polynomial.
    pub fn coefficient_sum(&self) -> BigRational {
        self.terms.values().fold(BigRational::zero(), |a, c| a + c)
    }

    pub fn all_coefficients_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    pub fn all_coefficients_nonnegative(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    /// Coefficients of `q^{offset + k}` for `k = 0..=cutoff`, when all keys are
    /// integers.
    pub fn integer_coefficients(&self) -> Option<Vec<BigRational>> {
        let top = self.cutoff.floor().to_integer().to_i64()?;
        if top < 0 || self.terms.keys().any(|e| !e.is_integer() || e.is_negative()) {
            return None;
        }
        Some((0..=top).map(|k| self.coefficient(&int(k))).collect())
    }
}

/// `q^{-n/24} prod_j (1 - q^j)^{-n}` to `q^{cutoff}` in the keys.
pub fn eta_inverse_power(n: u32, cutoff: u64) -> RationalQSeries {
    let k = cutoff as usize;
    let mut single = vec![BigInt::zero(); k + 1];
    single[0] = BigInt::one();
    for part in 1..=k {
        for m in part..=k {
            let prev = single[m - part].clone();
            single[m] += prev;
        }
    }
    let mut acc = vec![BigInt::zero(); k + 1];
    acc[0] = BigInt::one();
    for _ in 0..n {
        let mut next = vec![BigInt::zero(); k + 1];
        for (i, a) in acc.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for j in 0..=k - i {
                next[i + j] += a * &single[j];
            }
        }
        acc = next;
    }
    let terms = acc
        .into_iter()
        .enumerate()
        .map(|(i, c)| (int(i as i64), BigRational::from_integer(c)));
    RationalQSeries::from_terms(terms, int(cutoff as i64))
        .with_offset(rat(-(n as i64), 24))
        .with_tail(TailMajorant::Partitions { colors: n })
}

/// Which quadratic form a theta exponent uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `|v|^2 / 2`
    Half,
    /// `|v|^2`
    Full,
}

impl Normalization {
    fn factor(self) -> BigRational {
        match self {
            Normalization::Half => rat(1, 2),
            Normalization::Full => int(1),
        }
    }
}

pub const DEFAULT_POINT_LIMIT: usize = 5_000_000;

/// Integer points `a` with `(a - center)^T G (a - center) <= r2`, found by
/// Fincke-Pohst recursion on `G = L D L^T`.  Bounds are computed in floating
/// point and widened, so `visit` sees a superset and must filter exactly.
fn ellipsoid_candidates(
    g: &RatMatrix,
    center: &[f64],
    r2: f64,
    limit: usize,
    visit: &mut dyn FnMut(&[i64]),
) -> Result<(), QSeriesError> {
    let n = g.len();
    let (l, d) = ldl(g);
    let lf: Vec<Vec<f64>> = l
        .iter()
        .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect())
        .collect();
    let df: Vec<f64> = d.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect();
    let r2 = r2 * (1.0 + 1e-9) + 1e-9;
    if n == 0 {
        visit(&[]);
        return Ok(());
    }
    let mut a = vec![0i64; n];
    let mut visited = 0usize;

    // x = a - center; sum_i d_i (x_i + sum_{j>i} L_ji x_j)^2
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        rem: f64,
        a: &mut Vec<i64>,
        lf: &[Vec<f64>],
        df: &[f64],
        center: &[f64],
        limit: usize,
        visited: &mut usize,
        visit: &mut dyn FnMut(&[i64]),
    ) -> Result<(), QSeriesError> {
        let n = a.len();
        let mut m = center[i];
        for j in i + 1..n {
            m -= lf[j][i] * (a[j] as f64 - center[j]);
        }
        let w = (rem.max(0.0) / df[i]).sqrt();
        let eps = 1e-7 * (1.0 + m.abs() + w);
        let lo = (m - w - eps).ceil() as i64;
        let hi = (m + w + eps).floor() as i64;
        for v in lo..=hi {
            a[i] = v;
            let y = v as f64 - m;
            let used = df[i] * y * y;
            if used > rem + 1e-7 * (1.0 + rem) {
                continue;
            }
            if i == 0 {
                *visited += 1;
                if *visited > limit {
                    return Err(QSeriesError::EllipsoidOverflow { limit });
                }
                visit(a);
            } else {
                rec(i - 1, rem - used, a, lf, df, center, limit, visited, visit)?;
            }
        }
        Ok(())
    }
    rec(n - 1, r2, &mut a, &lf, &df, center, limit, &mut visited, visit)
}

fn lattice_min_norm_bound(g: &RatMatrix) -> f64 {
    let (_, d) = ldl(g);
    d.iter()
        .map(|x| x.to_f64().unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// `sum_{alpha in Z^n} q^{norm(alpha + lambda - shift)}` over exponents
/// `<= cutoff`; vectors are in lattice-basis coordinates.
pub fn lattice_theta(
    lattice: &IntegralLattice,
    coset: &[BigRational],
    shift: &[BigRational],
    cutoff: &BigRational,
    normalization: Normalization,
) -> Result<RationalQSeries, QSeriesError> {
    let g = lattice.gram();
    let n = g.len();
    for v in [coset, shift] {
        if v.len() != n {
            return Err(QSeriesError::DimensionMismatch { got: v.len(), expected: n });
        }
    }
    if !is_positive_definite(g) {
        return Err(QSeriesError::NotPositiveDefinite);
    }
    let factor = normalization.factor();
    let base: Vec<BigRational> = coset.iter().zip(shift).map(|(l, q)| l - q).collect();
    let center: Vec<f64> = base.iter().map(|x| -x.to_f64().unwrap_or(0.0)).collect();
    let mut terms = Vec::new();
    if !cutoff.is_negative() {
        let r2 = (cutoff / &factor).to_f64().unwrap_or(f64::INFINITY);
        ellipsoid_candidates(g, &center, r2, DEFAULT_POINT_LIMIT, &mut |a| {
            let v: Vec<BigRational> = a.iter().zip(&base).map(|(&x, b)| int(x) + b).collect();
            let e = lattice.inner(&v, &v) * &factor;
            if &e <= cutoff {
                terms.push((e, BigRational::one()));
            }
        })?;
    }
    let scale = factor.to_f64().unwrap_or(1.0);
    Ok(RationalQSeries::from_terms(terms, cutoff.clone()).with_tail(TailMajorant::Gaussian {
        rank: n,
        a: scale * lattice_min_norm_bound(g),
        k: 1.0,
        c: 1.0,
        d: 0.0,
        power: 0,
    }))
}

/// Label `lambda = lambda_bar + lambda_hat` with
/// `lambda_bar = (1/sqrt p) sum s_i omega_i` and `lambda_hat` in the weight
/// lattice (fundamental coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightLabel {
    pub s: Vec<i64>,
    pub lambda_hat: Vec<i64>,
}

impl WeightLabel {
    pub fn vacuum(rank: usize) -> Self {
        WeightLabel {
            s: vec![0; rank],
            lambda_hat: vec![0; rank],
        }
    }
}

/// How the inner Weyl sum is reduced at `z = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// `sign * dim L`: the plain graded dimension.
    Full,
    /// `sign * mult_nu(L)`: the lattice-degree-`nu` part, by Kostant's formula.
    WeightSpace { nu: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterOptions {
    pub normalization: Normalization,
    pub projection: Projection,
    pub point_limit: usize,
}

impl CharacterOptions {
    pub fn full(rank: usize) -> Self {
        let _ = rank;
        CharacterOptions {
            normalization: Normalization::Half,
            projection: Projection::Full,
            point_limit: DEFAULT_POINT_LIMIT,
        }
    }

    /// The degree-`lambda_hat` part, which carries the cusp asymptotics.
    pub fn singlet(label: &WeightLabel) -> Self {
        CharacterOptions {
            normalization: Normalization::Half,
            projection: Projection::WeightSpace {
                nu: label.lambda_hat.clone(),
            },
            point_limit: DEFAULT_POINT_LIMIT,
        }
    }
}

/// `eta^n chi` (the theta part) and the character `chi` itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterSeries {
    pub theta: RationalQSeries,
    pub full: RationalQSeries,
    #[serde(with = "crate::rational::serde_rational")]
    pub lowest_exponent: BigRational,
    pub warnings: Vec<String>,
}

/// Checks `(sqrt(p) lambda_bar + rho, theta) <= p` and `p >= h - 1`.
pub fn label_warnings(r: &RootSystem, p: u64, label: &WeightLabel) -> Vec<String> {
    let mut out = Vec::new();
    let pairing: i64 = r
        .theta()
        .iter()
        .zip(&label.s)
        .map(|(t, s)| t * (s + 1))
        .sum();
    if pairing > p as i64 {
        out.push(format!(
            "(sqrt(p) lambda_bar + rho, theta) = {pairing} exceeds p = {p}; character formula outside its stated range"
        ));
    }
    if (p as i64) < r.dual_coxeter() - 1 {
        out.push(format!(
            "p = {p} is below h - 1 = {}; simplicity of the module is not covered",
            r.dual_coxeter() - 1
        ));
    }
    out
}

struct ThetaContext<'a> {
    r: &'a RootSystem,
    p: i64,
    /// `p (lambda_hat + rho) + s - rho` in fundamental coordinates.
    x0: Vec<i64>,
    /// `det(C) * C^{-1}`
    adj: Vec<Vec<i128>>,
    det: i128,
    /// `w` acting on fundamental coordinates, with `det w`.
    weyl: Vec<(Vec<Vec<i64>>, i64)>,
    normalization: Normalization,
}

impl<'a> ThetaContext<'a> {
    fn new(
        r: &'a RootSystem,
        p: u64,
        label: &WeightLabel,
        normalization: Normalization,
        need_weyl: bool,
    ) -> Result<Self, QSeriesError> {
        let n = r.rank();
        for v in [&label.s, &label.lambda_hat] {
            if v.len() != n {
                return Err(QSeriesError::DimensionMismatch { got: v.len(), expected: n });
            }
        }
        if p == 0 {
            return Err(QSeriesError::InvalidInput("p must be positive".into()));
        }
        if label.s.iter().any(|&x| x < 0 || x >= p as i64) {
            return Err(QSeriesError::InvalidInput(format!(
                "s = {:?} must satisfy 0 <= s_i <= p - 1",
                label.s
            )));
        }
        let p = p as i64;
        let x0 = (0..n)
            .map(|i| p * (label.lambda_hat[i] + 1) + label.s[i] - 1)
            .collect();
        let cinv = r.cartan_inverse();
        let det = cinv
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, x| num_integer::lcm(acc, x.denom().clone()));
        let adj: Vec<Vec<i128>> = cinv
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| (x * BigRational::from_integer(det.clone())).to_integer().to_i128().unwrap())
                    .collect()
            })
            .collect();
        let det = det.to_i128().unwrap();
        let weyl = if need_weyl {
            r.weyl_elements()?
                .iter()
                .map(|w| {
                    let cols: Vec<Vec<i64>> = (0..n)
                        .map(|j| {
                            let e: Vec<i64> = (0..n).map(|i| i64::from(i == j)).collect();
                            r.act_on_weight(w, &e)
                        })
                        .collect();
                    let m = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
                    (m, w.det())
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(ThetaContext {
            r,
            p,
            x0,
            adj,
            det,
            weyl,
            normalization,
        })
    }

    /// `p alpha + x0` in fundamental coordinates for root-coordinate `alpha`.
    fn shifted(&self, a: &[i64]) -> Vec<i64> {
        let fund = self.r.root_to_weight(a);
        fund.iter().zip(&self.x0).map(|(f, x)| self.p * f + x).collect()
    }

    fn exponent(&self, a: &[i64]) -> BigRational {
        let x = self.shifted(a);
        let n = x.len();
        let mut q: i128 = 0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] as i128 * self.adj[i][j] * x[j] as i128;
            }
        }
        let denom = match self.normalization {
            Normalization::Half => 2 * self.p as i128 * self.det,
            Normalization::Full => self.p as i128 * self.det,
        };
        BigRational::new(BigInt::from(q), BigInt::from(denom))
    }

    /// Scale `a` with `exponent = a |alpha - alpha0|^2` in the root norm.
    fn scale(&self) -> f64 {
        match self.normalization {
            Normalization::Half => self.p as f64 / 2.0,
            Normalization::Full => self.p as f64,
        }
    }

    /// `alpha0 = -C^{-1} x0 / p` in root coordinates.
    fn center(&self) -> Vec<f64> {
        let n = self.x0.len();
        (0..n)
            .map(|i| {
                let s: i128 = (0..n).map(|j| self.adj[i][j] * self.x0[j] as i128).sum();
                -(s as f64) / (self.det as f64 * self.p as f64)
            })
            .collect()
    }

    /// `v = alpha + lambda_hat + rho` in fundamental coordinates.
    fn weyl_vector(&self, a: &[i64], label: &WeightLabel) -> Vec<i64> {
        let fund = self.r.root_to_weight(a);
        fund.iter()
            .zip(&label.lambda_hat)
            .map(|(f, l)| f + l + 1)
            .collect()
    }

    /// `C^{-1} mu` when integral.
    fn to_root(&self, mu: &[i64]) -> Option<Vec<i64>> {
        let n = mu.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let s: i128 = (0..n).map(|j| self.adj[i][j] * mu[j] as i128).sum();
            if s % self.det != 0 {
                return None;
            }
            out.push((s / self.det) as i64);
        }
        Some(out)
    }

    fn majorant(&self, label: &WeightLabel) -> TailMajorant {
        let r = self.r;
        let n = r.rank();
        let p = self.p as f64;
        // |s - rho| in the weight norm
        let sr: Vec<i64> = label.s.iter().map(|s| s - 1).collect();
        let sr_norm = r.weight_inner(&sr, &sr).to_f64().unwrap_or(0.0).sqrt();
        let lh_norm = r
            .weight_inner(&label.lambda_hat, &label.lambda_hat)
            .to_f64()
            .unwrap_or(0.0)
            .sqrt();
        let hts: f64 = r.heights().iter().map(|&h| h as f64).product();
        let a = self.scale() * lattice_min_norm_bound(&cartan_rat(r));
        // |v| <= sqrt(x / scale) + |s - rho| / p + |lambda_hat|, dim <= prod sqrt2 |v| / ht
        let sqrt2 = std::f64::consts::SQRT_2;
        TailMajorant::Gaussian {
            rank: n,
            a,
            k: 1.0 / hts,
            c: sqrt2 * (sr_norm / p + lh_norm),
            d: sqrt2 / self.scale().sqrt(),
            power: r.positive_roots().len() as u32,
        }
    }
}

fn cartan_rat(r: &RootSystem) -> RatMatrix {
    r.cartan()
        .iter()
        .map(|row| row.iter().map(|&x| int(x)).collect())
        .collect()
}

/// Kostant partition function on a box of root-coordinate vectors.
struct KostantTable {
    dims: Vec<usize>,
    values: Vec<u128>,
}

impl KostantTable {
    fn new(positive_roots: &[Vec<i64>], top: &[i64], limit: usize) -> Result<Self, QSeriesError> {
        let dims: Vec<usize> = top.iter().map(|&t| t.max(0) as usize + 1).collect();
        let size = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&s| s <= limit)
            .ok_or(QSeriesError::EllipsoidOverflow { limit })?;
        let mut values = vec![0u128; size];
        values[0] = 1;
        let strides: Vec<usize> = (0..dims.len())
            .map(|i| dims[i + 1..].iter().product())
            .collect();
        for beta in positive_roots {
            let off: usize = beta.iter().zip(&strides).map(|(&b, s)| b as usize * s).sum();
            for idx in off..size {
                // skip when some coordinate of idx is below beta's
                let mut ok = true;
                let mut rest = idx;
                for (k, s) in strides.iter().enumerate() {
                    let c = rest / s;
                    rest %= s;
                    if (c as i64) < beta[k] {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    values[idx] = values[idx].saturating_add(values[idx - off]);
                }
            }
        }
        Ok(KostantTable { dims, values })
    }

    fn get(&self, gamma: &[i64]) -> u128 {
        let mut idx = 0usize;
        for (g, d) in gamma.iter().zip(&self.dims) {
            if *g < 0 || *g as usize >= *d {
                return 0;
            }
            idx = idx * d + *g as usize;
        }
        self.values[idx]
    }
}

/// Terms `(exponent, D(alpha))` of `eta^n chi` with exponent `<= cutoff`.
fn theta_part(
    r: &RootSystem,
    p: u64,
    label: &WeightLabel,
    cutoff: &BigRational,
    options: &CharacterOptions,
) -> Result<RationalQSeries, QSeriesError> {
    let need_weyl = matches!(options.projection, Projection::WeightSpace { .. });
    let ctx = ThetaContext::new(r, p, label, options.normalization, need_weyl)?;
    let n = r.rank();
    let mut points: Vec<(Vec<i64>, BigRational)> = Vec::new();
    if !cutoff.is_negative() {
        let r2 = cutoff.to_f64().unwrap_or(f64::INFINITY) / ctx.scale();
        let center = ctx.center();
        ellipsoid_candidates(&cartan_rat(r), &center, r2, options.point_limit, &mut |a| {
            let e = ctx.exponent(a);
            if &e <= cutoff {
                points.push((a.to_vec(), e));
            }
        })?;
    }
    let terms: Vec<(BigRational, BigRational)> = match &options.projection {
        Projection::Full => {
            let mut out = Vec::with_capacity(points.len());
            for (a, e) in points {
                let nu: Vec<i64> = ctx
                    .weyl_vector(&a, label)
                    .iter()
                    .map(|x| x - 1)
                    .collect();
                let (sign, dom) = r.signed_dominant_representative(&nu);
                if sign == 0 {
                    continue;
                }
                let d = BigInt::from(r.weyl_dimension(&dom)?) * sign;
                out.push((e, BigRational::from_integer(d)));
            }
            out
        }
        Projection::WeightSpace { nu } => {
            if nu.len() != n {
                return Err(QSeriesError::DimensionMismatch { got: nu.len(), expected: n });
            }
            // gamma = w(v) - rho - nu in root coordinates
            let mut needed: Vec<(usize, i64, Vec<i64>)> = Vec::new();
            let mut top = vec![0i64; n];
            for (idx, (a, _)) in points.iter().enumerate() {
                let v = ctx.weyl_vector(a, label);
                for (m, det) in &ctx.weyl {
                    let wv: Vec<i64> = (0..n)
                        .map(|i| (0..n).map(|j| m[i][j] * v[j]).sum::<i64>() - 1 - nu[i])
                        .collect();
                    let Some(gamma) = ctx.to_root(&wv) else { continue };
                    if gamma.iter().any(|&g| g < 0) {
                        continue;
                    }
                    for (t, g) in top.iter_mut().zip(&gamma) {
                        *t = (*t).max(*g);
                    }
                    needed.push((idx, *det, gamma));
                }
            }
            let table = KostantTable::new(r.positive_roots(), &top, 200_000_000)?;
            let mut acc: Vec<BigInt> = vec![BigInt::zero(); points.len()];
            for (idx, det, gamma) in needed {
                acc[idx] += BigInt::from(table.get(&gamma)) * det;
            }
            points
                .into_iter()
                .zip(acc)
                .filter(|(_, d)| !d.is_zero())
                .map(|((_, e), d)| (e, BigRational::from_integer(d)))
                .collect()
        }
    };
    Ok(RationalQSeries::from_terms(terms, cutoff.clone()).with_tail(ctx.majorant(label)))
}

/// The false-theta character: `eta^n chi` with rational exponents
/// `|sqrt(p)(alpha + lambda_hat + rho) + lambda_bar - rho/sqrt(p)|^2 / 2` (under
/// [`Normalization::Half`]) and `chi = eta^{-n} (eta^n chi)` expanded to
/// `cutoff` integer steps above its lowest exponent.
pub fn false_theta_character(
    r: &RootSystem,
    p: u64,
    label: &WeightLabel,
    cutoff: u64,
    options: &CharacterOptions,
) -> Result<CharacterSeries, QSeriesError> {
    let warnings = label_warnings(r, p, label);
    let k = int(cutoff as i64);
    let mut reach = k.clone() + int(1);
    let theta_raw = loop {
        let s = theta_part(r, p, label, &reach, options)?;
        if !s.is_zero() {
            break s;
        }
        if reach > int(1 << 40) {
            return Err(QSeriesError::InvalidInput("character vanishes identically".into()));
        }
        reach = reach * int(2);
    };
    let h0 = theta_raw.valuation();
    let theta = if &h0 + &k > reach {
        theta_part(r, p, label, &(&h0 + &k), options)?
    } else {
        theta_raw.truncate(&(&h0 + &k))
    };
    let relative = theta.rebase(&h0).truncate(&k);
    let full = relative
        .mul(&eta_inverse_power(r.rank() as u32, cutoff))
        .truncate(&k);
    Ok(CharacterSeries {
        theta,
        full,
        lowest_exponent: h0,
        warnings,
    })
}

/// `e^{-2 pi t x}` summed in high precision, with a bound on the omitted tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericValue {
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub digits: String,
}

pub const DEFAULT_PRECISION: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

fn big_rational(r: &BigRational, p: usize, cc: &mut Consts) -> BigFloat {
    let n = BigFloat::parse(&r.numer().to_string(), Radix::Dec, p, RM, cc);
    let d = BigFloat::parse(&r.denom().to_string(), Radix::Dec, p, RM, cc);
    n.div(&d, p, RM)
}

fn big_to_f64(x: &BigFloat, cc: &mut Consts) -> (f64, String) {
    let s = x.format(Radix::Dec, RM, cc).unwrap_or_else(|_| "NaN".into());
    let v = s.parse::<f64>().unwrap_or(f64::NAN);
    (v, s)
}

/// Upper bound on the terms a series with `tail` omits beyond actual exponent
/// `start` (for `Partitions`, beyond integer key `start_key` with the offset
/// applied separately).
pub fn tail_bound(tail: &TailMajorant, t: f64, offset: f64, cutoff: f64) -> f64 {
    match *tail {
        TailMajorant::Zero => 0.0,
        TailMajorant::Gaussian { rank, a, k, c, d, power } => {
            let start = (offset + cutoff).max(0.0);
            gaussian_tail(rank, a, k, c, d, power, t, start)
        }
        TailMajorant::Partitions { colors } => {
            partitions_tail(colors, t, cutoff.floor()) * (-2.0 * std::f64::consts::PI * t * offset).exp()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gaussian_tail(rank: usize, a: f64, k: f64, c: f64, d: f64, power: u32, t: f64, start: f64) -> f64 {
    if !(a > 0.0) || !(t > 0.0) {
        return f64::INFINITY;
    }
    let beta = 2.0 * std::f64::consts::PI * t;
    let h = 1.0 / beta;
    // ln of (points with exponent <= x) * (coefficient bound at x)
    let ln_g = |x: f64| -> f64 {
        rank as f64 * (1.0 + 2.0 * (x / a).sqrt()).ln() + k.ln() + power as f64 * (c + d * x.sqrt()).ln()
    };
    let mut total = 0.0f64;
    let mut j = 0u64;
    loop {
        let x = start + j as f64 * h;
        let ln_term = ln_g(x + h) - beta * x;
        let ln_next = ln_g(x + 2.0 * h) - beta * (x + h);
        if ln_term > 700.0 {
            return f64::INFINITY;
        }
        let term = ln_term.exp();
        total += term;
        let ratio = (ln_next - ln_term).exp();
        if ratio < 0.5 && term <= 1e-40 * total.max(1e-300) {
            return (total + term * ratio / (1.0 - ratio)) * (1.0 + 1e-9);
        }
        if ratio < 0.5 && term < 1e-300 {
            return (total + 2.0 * term) * (1.0 + 1e-9);
        }
        j += 1;
        if j > 10_000_000 {
            return f64::INFINITY;
        }
    }
}

/// `sum_{k > cutoff} p_n(k) x^k <= y^{-(K+1)} prod (1 - (xy)^j)^{-n}` and
/// `ln prod (1 - z^j)^{-1} <= z / (1 - z)^2`, minimized over a grid of `y`.
fn partitions_tail(colors: u32, t: f64, cutoff: f64) -> f64 {
    let ln_x = -2.0 * std::f64::consts::PI * t;
    let kk = cutoff + 1.0;
    let mut best = f64::INFINITY;
    for step in 1..=2000 {
        let theta = step as f64 / 2000.0;
        let ln_z = theta * ln_x;
        let z = ln_z.exp();
        if z >= 1.0 {
            continue;
        }
        let ln_y = ln_z - ln_x;
        let ln_bound = colors as f64 * z / ((1.0 - z) * (1.0 - z)) - kk * ln_y;
        best = best.min(ln_bound);
    }
    if best > 700.0 {
        f64::INFINITY
    } else {
        best.exp() * (1.0 + 1e-9)
    }
}

/// `sum c q^{offset + e}` at `q = e^{-2 pi t}` using `precision` bits.
pub fn numeric_eval(s: &RationalQSeries, t: f64, precision: usize) -> Result<NumericValue, QSeriesError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(QSeriesError::InvalidInput(format!("t = {t} must be positive")));
    }
    let tail = s.tail.as_ref().ok_or(QSeriesError::TailBoundUnavailable)?;
    let p = precision.max(64);
    let mut cc = Consts::new().map_err(|e| QSeriesError::InvalidInput(format!("{e:?}")))?;
    let two_pi_t = cc
        .pi(p, RM)
        .mul(&BigFloat::from_f64(2.0 * t, p), p, RM)
        .neg();
    let mut sum = BigFloat::from_f64(0.0, p);
    let mut magnitude = 0.0f64;
    for (e, c) in &s.terms {
        let x = big_rational(&(&s.offset + e), p, &mut cc);
        let w = two_pi_t.mul(&x, p, RM).exp(p, RM, &mut cc);
        let term = w.mul(&big_rational(c, p, &mut cc), p, RM);
        magnitude += big_to_f64(&term, &mut cc).0.abs();
        sum = sum.add(&term, p, RM);
    }
    let (value, digits) = big_to_f64(&sum, &mut cc);
    let rounding = magnitude * (s.terms.len() as f64 + 4.0) * 2f64.powi(-(p as i32) + 8);
    let bound = tail_bound(
        tail,
        t,
        s.offset.to_f64().unwrap_or(0.0),
        s.cutoff.to_f64().unwrap_or(f64::INFINITY),
    );
    Ok(NumericValue {
        t,
        value,
        tail_bound: bound + rounding,
        digits,
    })
}

/// Sample of a function on the way to the cusp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEstimate {
    pub value: f64,
    pub error: f64,
    pub schedule: Vec<f64>,
    pub samples: Vec<Sample>,
    /// `c0 + c1 sqrt(t) (+ c2 t)`
    pub model: Vec<f64>,
    pub residual: f64,
    pub propagated_tail: f64,
    pub drop_change: f64,
}

/// Least squares on `{1, sqrt t, t}[..=order]`; returns the coefficients and
/// the first row of the pseudo-inverse.
fn fit(samples: &[Sample], order: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = order + 1;
    let basis = |t: f64| -> Vec<f64> { [1.0, t.sqrt(), t][..k].to_vec() };
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| basis(s.t)).collect();
    let mut ata = vec![vec![0.0; k]; k];
    for r in &rows {
        for i in 0..k {
            for j in 0..k {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    // invert A^T A by Gauss-Jordan
    let mut inv = vec![vec![0.0; k]; k];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))?;
        if ata[piv][col].abs() < 1e-300 {
            return None;
        }
        ata.swap(col, piv);
        inv.swap(col, piv);
        let d = ata[col][col];
        for j in 0..k {
            ata[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..k {
            if r != col {
                let f = ata[r][col];
                for j in 0..k {
                    ata[r][j] -= f * ata[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    let first: Vec<f64> = rows
        .iter()
        .map(|r| (0..k).map(|j| inv[0][j] * r[j]).sum())
        .collect();
    let coeffs: Vec<f64> = (0..k)
        .map(|i| {
            rows.iter()
                .zip(samples)
                .map(|(r, s)| (0..k).map(|j| inv[i][j] * r[j]).sum::<f64>() * s.value)
                .sum()
        })
        .collect();
    Some((coeffs, first))
}

/// Extrapolates samples to `t = 0` with the model `c0 + c1 sqrt(t)` (order 1)
/// or `+ c2 t` (order 2).
pub fn cusp_limit(samples: &[Sample], order: usize) -> Result<AsymptoticEstimate, QSeriesError> {
    if samples.len() < 3 {
        return Err(QSeriesError::ScheduleTooShort(samples.len()));
    }
    if !(1..=2).contains(&order) {
        return Err(QSeriesError::InvalidInput(format!("model order {order} not in 1..=2")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.t.total_cmp(&a.t));
    let order = order.min(sorted.len() - 1);
    let (model, first) = fit(&sorted, order)
        .ok_or_else(|| QSeriesError::InvalidInput("degenerate schedule".into()))?;
    let eval = |t: f64| -> f64 { model[0] + model.get(1).map_or(0.0, |c| c * t.sqrt()) + model.get(2).map_or(0.0, |c| c * t) };
    let residual = sorted
        .iter()
        .map(|s| (eval(s.t) - s.value).abs())
        .fold(0.0, f64::max);
    let propagated_tail: f64 = first.iter().zip(&sorted).map(|(w, s)| w.abs() * s.tail_bound).sum();
    let dropped = &sorted[..sorted.len() - 1];
    let drop_order = order.min(dropped.len() - 1);
    let drop_change = fit(dropped, drop_order)
        .map(|(m, _)| (m[0] - model[0]).abs())
        .unwrap_or(f64::INFINITY);
    let error = residual.max(propagated_tail).max(drop_change);
    Ok(AsymptoticEstimate {
        value: model[0],
        error,
        schedule: sorted.iter().map(|s| s.t).collect(),
        samples: sorted,
        model,
        residual,
        propagated_tail,
        drop_change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOptions {
    pub order: usize,
    /// Decimal digits the tail of each sample must stay below.
    pub digits: u32,
    pub precision: usize,
    pub character: CharacterOptions,
}

impl AsymptoticOptions {
    pub fn for_label(label: &WeightLabel) -> Self {
        AsymptoticOptions {
            order: 1,
            digits: 15,
            precision: DEFAULT_PRECISION,
            character: CharacterOptions::singlet(label),
        }
    }
}

/// Evaluates the theta part at `t`, enlarging the ellipsoid until its tail
/// bound is below `10^-digits`.
pub fn theta_sample(
    r: &RootSystem,
    p: u64,
    label: &WeightLabel,
    t: f64,
    options: &AsymptoticOptions,
) -> Result<(Sample, usize), QSeriesError> {
    let target = 10f64.powi(-(options.digits as i32));
    let beta = 2.0 * std::f64::consts::PI * t;
    let mut x = (options.digits as f64 * std::f64::consts::LN_10 + 10.0) / beta;
    for _ in 0..40 {
        let cutoff = BigRational::from_float(x.ceil()).unwrap_or_else(|| int(1));
        let ctx = ThetaContext::new(r, p, label, options.character.normalization, false)?;
        let bound = tail_bound(&ctx.majorant(label), t, 0.0, x.ceil());
        if bound > target {
            x *= 1.5;
            continue;
        }
        let s = theta_part(r, p, label, &cutoff, &options.character)?;
        let v = numeric_eval(&s, t, options.precision)?;
        return Ok((
            Sample {
                t,
                value: v.value,
                tail_bound: v.tail_bound,
            },
            s.terms.len(),
        ));
    }
    Err(QSeriesError::TailTooLarge { bound: f64::INFINITY, target })
}

/// Cusp limit of `eta^n chi`, expected `dim L / p^{|Phi+|}` (for the singlet
/// projection).
pub fn asymptotic_dim(
    r: &RootSystem,
    p: u64,
    label: &WeightLabel,
    schedule: &[f64],
    options: &AsymptoticOptions,
) -> Result<AsymptoticEstimate, QSeriesError> {
    if schedule.len() < 3 {
        return Err(QSeriesError::ScheduleTooShort(schedule.len()));
    }
    let samples: Result<Vec<Sample>, QSeriesError> = schedule
        .par_iter()
        .map(|&t| theta_sample(r, p, label, t, options).map(|(s, _)| s))
        .collect();
    cusp_limit(&samples?, options.order)
}

/// `eta^n chi_Fock = q^{norm(lambda - Q)}` with `Q = (sqrt p - 1/sqrt p) rho`;
/// for the vacuum the exponent is `(p-1)^2 |rho|^2 / p` under the full norm.
pub fn fock_series(r: &RootSystem, p: u64, normalization: Normalization) -> RationalQSeries {
    let rho = r.rho();
    let rho2 = r.weight_inner(&rho, &rho);
    let p = p as i64;
    let e = rho2 * int((p - 1) * (p - 1)) / int(p) * normalization.factor();
    RationalQSeries::monomial(e, int(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumDimension {
    pub value: f64,
    pub error: f64,
    pub numerator: AsymptoticEstimate,
    pub denominator: AsymptoticEstimate,
}

/// Ratio of cusp limits `lim eta^n chi_Fock / lim eta^n chi_vacuum`.  The
/// numerator is a single power of `q`, so its limit is taken exactly.
pub fn quantum_dimension_of_fock(
    r: &RootSystem,
    p: u64,
    label: &WeightLabel,
    schedule: &[f64],
    options: &AsymptoticOptions,
) -> Result<QuantumDimension, QSeriesError> {
    let denominator = asymptotic_dim(r, p, label, schedule, options)?;
    let fock = fock_series(r, p, Normalization::Full);
    let mut samples = Vec::new();
    for &t in schedule {
        let v = numeric_eval(&fock, t, options.precision)?;
        samples.push(Sample {
            t,
            value: v.value,
            tail_bound: v.tail_bound,
        });
    }
    let mut numerator = cusp_limit(&samples, options.order)?;
    numerator.value = fock.coefficient_sum().to_f64().unwrap_or(f64::NAN);
    numerator.error = 0.0;
    ratio(&numerator, &denominator).map(|(value, error)| QuantumDimension {
        value,
        error,
        numerator,
        denominator,
    })
}

/// `a / b` with the worst-case error over both envelopes.
pub fn ratio(a: &AsymptoticEstimate, b: &AsymptoticEstimate) -> Result<(f64, f64), QSeriesError> {
    let (bv, be) = (b.value.abs(), b.error);
    if !(bv - be > 0.0) {
        return Err(QSeriesError::DivisionByNearZero { value: b.value, error: b.error });
    }
    let value = a.value / b.value;
    let hi = (a.value.abs() + a.error) / (bv - be);
    let lo = (a.value.abs() - a.error).max(0.0) / (bv + be);
    let error = (hi - value.abs()).max(value.abs() - lo);
    Ok((value, error))
}

/// `p^{|Phi+|}` as an integer, the expected Fock quantum dimension.
pub fn expected_quantum_dimension(r: &RootSystem, p: u64) -> BigUint {
    BigUint::from(p).pow(r.positive_roots().len() as u32)
}
