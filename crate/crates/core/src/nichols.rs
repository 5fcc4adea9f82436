//! Nichols algebras of diagonal type.
//!
//! `B(q)_d` is realized as the image of the quantum symmetrizer
//! `S_m = sum_{pi in S_m} T_pi` on the words of content `d`, inside the
//! quantum shuffle coalgebra. The image is built degree by degree from
//! `S_m = T*_m (S_{m-1} (x) 1)` where `T*_m = 1 + c_{m-1} + c_{m-2} c_{m-1} + ..`
//! moves the last letter to the left; ranks are exact over `Q(zeta_N)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::CycloScalar;
use crate::lattice::DiagonalBraiding;
use crate::rootdata::RootSystem;

/// Letters are packed four bits each, first letter lowest.
pub const MAX_RANK: usize = 16;
pub const MAX_DEGREE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NicholsError {
    #[error("component of degree {degree} and rank {rank} exceeds the supported bounds (degree <= {MAX_DEGREE}, rank <= {MAX_RANK})")]
    ComponentTooLarge { degree: usize, rank: usize },
    #[error("element is not homogeneous")]
    NotHomogeneous,
    #[error("braiding is not twist-equivalent to the one attached to the root system at p = {0}")]
    BraidingMismatch(u32),
    #[error("invalid q-matrix: {0}")]
    InvalidInput(String),
}

pub type Multidegree = Vec<u32>;
type Word = u128;
type Vector<K> = BTreeMap<K, CycloScalar>;

fn letter(w: Word, i: usize) -> usize {
    ((w >> (4 * i)) & 0xF) as usize
}

fn insert_letter(w: Word, k: usize, j: usize) -> Word {
    let low_mask = if k == 0 { 0 } else { (1u128 << (4 * k)) - 1 };
    let lower = w & low_mask;
    let upper = w.checked_shr(4 * k as u32).unwrap_or(0);
    lower | ((j as u128) << (4 * k)) | upper.checked_shl(4 * (k as u32 + 1)).unwrap_or(0)
}

#[cfg(test)]
fn word_from_letters(letters: &[usize]) -> Word {
    letters
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &l)| acc | ((l as u128) << (4 * i)))
}

fn letters_of(w: Word, len: usize) -> Vec<usize> {
    (0..len).map(|i| letter(w, i)).collect()
}

/// Row-echelon basis keyed by each row's smallest word; pivots are normalized to 1.
struct Echelon<K: Ord + Copy> {
    rows: BTreeMap<K, Vector<K>>,
}

impl<K: Ord + Copy> Echelon<K> {
    fn new() -> Self {
        Echelon { rows: BTreeMap::new() }
    }

    fn reduce(&self, mut v: Vector<K>) -> Vector<K> {
        loop {
            let Some((&w, c)) = v.iter().find(|(w, _)| self.rows.contains_key(w)) else {
                return v;
            };
            // only the minimal word matters for the pivot; clear every pivot we can
            let c = c.clone();
            for (&u, rc) in &self.rows[&w] {
                let delta = &c * rc;
                let entry = v.remove(&u).map_or_else(|| -&delta, |x| &x - &delta);
                if !entry.is_zero() {
                    v.insert(u, entry);
                }
            }
        }
    }

    /// Adds `v` to the span; returns whether it was independent.
    fn insert(&mut self, v: Vector<K>) -> bool {
        let v = self.reduce(v);
        let Some((&pivot, c)) = v.iter().next() else {
            return false;
        };
        let inv = c.inv().expect("nonzero pivot");
        let row: Vector<K> = v.into_iter().map(|(w, x)| (w, &x * &inv)).collect();
        self.rows.insert(pivot, row);
        true
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn into_rows(self) -> Vec<Vector<K>> {
        self.rows.into_values().collect()
    }
}

/// Braiding data prepared for symmetrizer computations.
#[derive(Debug, Clone)]
pub struct NicholsEngine {
    braiding: DiagonalBraiding,
    order: u32,
    exps: Vec<Vec<i64>>,
    zeta: Vec<CycloScalar>,
}

impl NicholsEngine {
    pub fn new(braiding: &DiagonalBraiding) -> Result<Self, NicholsError> {
        let n = braiding.rank();
        if n == 0 {
            return Err(NicholsError::InvalidInput("rank must be positive".into()));
        }
        if n > MAX_RANK {
            return Err(NicholsError::ComponentTooLarge { degree: 0, rank: n });
        }
        let order = braiding.common_order();
        Ok(NicholsEngine {
            braiding: braiding.clone(),
            order,
            exps: braiding.integer_exponents(),
            zeta: (0..order as i64).map(|k| CycloScalar::zeta_power(order, k)).collect(),
        })
    }

    pub fn rank(&self) -> usize {
        self.braiding.rank()
    }

    pub fn braiding(&self) -> &DiagonalBraiding {
        &self.braiding
    }

    fn zeta(&self, e: i64) -> &CycloScalar {
        &self.zeta[e.rem_euclid(self.order as i64) as usize]
    }

    fn check_degree(&self, m: usize) -> Result<(), NicholsError> {
        if m > MAX_DEGREE {
            return Err(NicholsError::ComponentTooLarge {
                degree: m,
                rank: self.rank(),
            });
        }
        Ok(())
    }

    /// `T*_m (v (x) x_j)` for `v` supported on words of length `len`.
    fn tstar(&self, v: &Vector<Word>, j: usize, len: usize) -> Vector<Word> {
        let mut out: Vector<Word> = BTreeMap::new();
        for (&u, c) in v {
            let mut e = 0i64;
            for k in (0..=len).rev() {
                if k < len {
                    e += self.exps[letter(u, k)][j];
                }
                let term = c * self.zeta(e);
                let w = insert_letter(u, k, j);
                accumulate(&mut out, w, term);
            }
        }
        out
    }

    /// Quantum shuffle `x_j * v` (left multiplication in the Nichols algebra).
    fn shuffle_left(&self, j: usize, v: &Vector<Word>, len: usize) -> Vector<Word> {
        let mut out: Vector<Word> = BTreeMap::new();
        for (&u, c) in v {
            let mut e = 0i64;
            for k in 0..=len {
                if k > 0 {
                    e += self.exps[j][letter(u, k - 1)];
                }
                accumulate(&mut out, insert_letter(u, k, j), c * self.zeta(e));
            }
        }
        out
    }

    fn unit_vector(&self) -> Vector<Word> {
        BTreeMap::from([(0, CycloScalar::one(self.order))])
    }

    /// Basis of `image(S_d)` from bases of `image(S_{d - e_j})`.
    fn component(
        &self,
        d: &Multidegree,
        previous: &BTreeMap<Multidegree, Vec<Vector<Word>>>,
    ) -> Vec<Vector<Word>> {
        let len: usize = d.iter().sum::<u32>() as usize - 1;
        let mut ech = Echelon::new();
        for j in 0..d.len() {
            if d[j] == 0 {
                continue;
            }
            let mut pred = d.clone();
            pred[j] -= 1;
            if let Some(basis) = previous.get(&pred) {
                for b in basis {
                    ech.insert(self.tstar(b, j, len));
                }
            }
        }
        ech.into_rows()
    }

    /// Layers of `image(S)` through total degree `cutoff`, optionally restricted
    /// to multidegrees below `bound`. Stops after the first zero layer.
    fn layers(
        &self,
        cutoff: usize,
        bound: Option<&Multidegree>,
    ) -> Result<Vec<BTreeMap<Multidegree, Vec<Vector<Word>>>>, NicholsError> {
        self.check_degree(cutoff)?;
        let n = self.rank();
        let mut layers = vec![BTreeMap::from([(vec![0u32; n], vec![self.unit_vector()])])];
        for _m in 1..=cutoff {
            let prev = layers.last().unwrap();
            let candidates: BTreeSet<Multidegree> = prev
                .iter()
                .filter(|(_, b)| !b.is_empty())
                .flat_map(|(d, _)| {
                    (0..n).map(move |j| {
                        let mut e = d.clone();
                        e[j] += 1;
                        e
                    })
                })
                .filter(|e| bound.map_or(true, |b| e.iter().zip(b).all(|(x, y)| x <= y)))
                .collect();
            let candidates: Vec<Multidegree> = candidates.into_iter().collect();
            let computed: Vec<(Multidegree, Vec<Vector<Word>>)> = candidates
                .par_iter()
                .map(|d| (d.clone(), self.component(d, prev)))
                .collect();
            let layer: BTreeMap<Multidegree, Vec<Vector<Word>>> = computed.into_iter().collect();
            let empty = layer.values().all(Vec::is_empty);
            layers.push(layer);
            if empty {
                break;
            }
        }
        Ok(layers)
    }

    pub fn symmetrizer_rank(&self, d: &[u32]) -> Result<u64, NicholsError> {
        if d.len() != self.rank() {
            return Err(NicholsError::InvalidInput("multidegree length differs from rank".into()));
        }
        let m = d.iter().sum::<u32>() as usize;
        let layers = self.layers(m, Some(&d.to_vec()))?;
        Ok(layers
            .get(m)
            .and_then(|l| l.get(d))
            .map_or(0, |b| b.len() as u64))
    }

    pub fn graded_dimensions(&self, cutoff: usize) -> Result<GradedDimensionTable, NicholsError> {
        if cutoff == 0 {
            return Err(NicholsError::InvalidInput("cutoff must be at least 1".into()));
        }
        let layers = self.layers(cutoff, None)?;
        let mut by_multidegree = BTreeMap::new();
        let mut by_total_degree = Vec::new();
        for layer in &layers {
            let mut total = 0u64;
            for (d, basis) in layer {
                by_multidegree.insert(d.clone(), basis.len() as u64);
                total += basis.len() as u64;
            }
            by_total_degree.push(total);
        }
        let status = if by_total_degree.last() == Some(&0) {
            by_total_degree.pop();
            NicholsStatus::Finite {
                top_degree: by_total_degree.len() - 1,
                total_dimension: by_total_degree.iter().sum(),
            }
        } else {
            NicholsStatus::CutoffReached { cutoff }
        };
        by_multidegree.retain(|_, v| *v > 0);
        Ok(GradedDimensionTable {
            braiding: self.braiding.clone(),
            by_multidegree,
            by_total_degree,
            status,
        })
    }

    /// `S(w)` for a single word, via `S(u x_j) = T*(S(u) (x) x_j)`.
    fn symmetrize_word(&self, letters: &[usize], memo: &mut HashMap<Vec<usize>, Vector<Word>>) -> Vector<Word> {
        if letters.is_empty() {
            return self.unit_vector();
        }
        if let Some(v) = memo.get(letters) {
            return v.clone();
        }
        let (last, prefix) = letters.split_last().unwrap();
        let s = self.symmetrize_word(prefix, memo);
        let out = self.tstar(&s, *last, prefix.len());
        memo.insert(letters.to_vec(), out.clone());
        out
    }

    fn symmetrize(&self, element: &Element) -> Result<Vector<Word>, NicholsError> {
        element.multidegree(self.rank())?;
        let mut memo = HashMap::new();
        let mut out = BTreeMap::new();
        for (c, w) in &element.terms {
            self.check_degree(w.len())?;
            if w.iter().any(|&l| l >= self.rank()) {
                return Err(NicholsError::InvalidInput(format!("letter out of range in {w:?}")));
            }
            for (u, x) in self.symmetrize_word(w, &mut memo) {
                accumulate(&mut out, u, c * &x);
            }
        }
        Ok(out)
    }

    /// Whether the element is zero in `B(q)`, i.e. lies in the kernel of the symmetrizer.
    pub fn relation_membership(&self, element: &Element) -> Result<bool, NicholsError> {
        Ok(self.symmetrize(element)?.is_empty())
    }

    /// Dimension of the elements of `image(S_m)` killed by every deconcatenation
    /// component `Delta_{i, m-i}` with `0 < i < m`.
    pub fn primitive_dimension(&self, m: usize) -> Result<u64, NicholsError> {
        if m == 0 {
            return Err(NicholsError::InvalidInput("degree must be at least 1".into()));
        }
        let layers = self.layers(m, None)?;
        let Some(layer) = layers.get(m) else {
            return Ok(0);
        };
        let mut kernel = 0u64;
        for basis in layer.values() {
            // coordinates of Delta: (split point, word) determine prefix (x) suffix
            let mut ech: Echelon<(u8, Word)> = Echelon::new();
            for b in basis {
                let mut img: Vector<(u8, Word)> = BTreeMap::new();
                for (&w, c) in b {
                    for i in 1..m {
                        img.insert((i as u8, w), c.clone());
                    }
                }
                ech.insert(img);
            }
            kernel += (basis.len() - ech.rank()) as u64;
        }
        Ok(kernel)
    }

    /// Rank of `x_j * B_{m-1}` inside `B_m`, paired with `dim B_m`.
    pub fn generation_rank(&self, m: usize) -> Result<(u64, u64), NicholsError> {
        if m == 0 {
            return Ok((1, 1));
        }
        let layers = self.layers(m, None)?;
        let (Some(prev), Some(layer)) = (layers.get(m - 1), layers.get(m)) else {
            return Ok((0, 0));
        };
        let mut rank = 0;
        let mut dim = 0;
        for (d, basis) in layer {
            dim += basis.len() as u64;
            let mut ech = Echelon::new();
            for j in 0..d.len() {
                if d[j] == 0 {
                    continue;
                }
                let mut pred = d.clone();
                pred[j] -= 1;
                for b in prev.get(&pred).into_iter().flatten() {
                    ech.insert(self.shuffle_left(j, b, m - 1));
                }
            }
            rank += ech.rank() as u64;
        }
        Ok((rank, dim))
    }
}

fn accumulate<K: Ord>(v: &mut Vector<K>, k: K, x: CycloScalar) {
    use std::collections::btree_map::Entry;
    match v.entry(k) {
        Entry::Vacant(e) => {
            if !x.is_zero() {
                e.insert(x);
            }
        }
        Entry::Occupied(mut e) => {
            let s = e.get() + &x;
            if s.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NicholsStatus {
    Finite { top_degree: usize, total_dimension: u64 },
    CutoffReached { cutoff: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GradedDimensionTable {
    pub braiding: DiagonalBraiding,
    #[serde(serialize_with = "serialize_multidegrees")]
    pub by_multidegree: BTreeMap<Multidegree, u64>,
    pub by_total_degree: Vec<u64>,
    pub status: NicholsStatus,
}

fn serialize_multidegrees<S: serde::Serializer>(
    m: &BTreeMap<Multidegree, u64>,
    s: S,
) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        multidegree: &'a Multidegree,
        dimension: u64,
    }
    s.collect_seq(m.iter().map(|(d, &dimension)| Entry { multidegree: d, dimension }))
}

impl GradedDimensionTable {
    pub fn hilbert_coeffs(&self) -> &[u64] {
        &self.by_total_degree
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.status, NicholsStatus::Finite { .. })
    }

    pub fn dimension(&self, d: &[u32]) -> u64 {
        self.by_multidegree.get(d).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TotalDimension {
    Finite(u64),
    ExceedsCutoff,
}

pub fn symmetrizer_rank(q: &DiagonalBraiding, d: &[u32]) -> Result<u64, NicholsError> {
    NicholsEngine::new(q)?.symmetrizer_rank(d)
}

pub fn graded_dimensions(q: &DiagonalBraiding, cutoff: usize) -> Result<GradedDimensionTable, NicholsError> {
    NicholsEngine::new(q)?.graded_dimensions(cutoff)
}

pub fn total_dimension(q: &DiagonalBraiding, cutoff: usize) -> Result<TotalDimension, NicholsError> {
    let t = graded_dimensions(q, cutoff)?;
    Ok(match t.status {
        NicholsStatus::Finite { total_dimension, .. } => TotalDimension::Finite(total_dimension),
        NicholsStatus::CutoffReached { .. } => TotalDimension::ExceedsCutoff,
    })
}

pub fn relation_membership(q: &DiagonalBraiding, element: &Element) -> Result<bool, NicholsError> {
    NicholsEngine::new(q)?.relation_membership(element)
}

pub fn primitive_dimension(q: &DiagonalBraiding, m: usize) -> Result<u64, NicholsError> {
    NicholsEngine::new(q)?.primitive_dimension(m)
}

/// Coefficients of `prod_{beta > 0} (1 + t^{ht} + .. + t^{(p-1) ht})`.
pub fn product_formula(root_system: &RootSystem, p: u32) -> Vec<u64> {
    let mut poly = vec![1u64];
    for h in root_system.heights() {
        let h = h as usize;
        let mut next = vec![0u64; poly.len() + (p as usize - 1) * h];
        for (i, &c) in poly.iter().enumerate() {
            for k in 0..p as usize {
                next[i + k * h] += c;
            }
        }
        poly = next;
    }
    poly
}

/// Compares the computed graded table with [`product_formula`].
pub fn product_formula_check(
    q: &DiagonalBraiding,
    root_system: &RootSystem,
    p: u32,
) -> Result<bool, NicholsError> {
    let expected = DiagonalBraiding::from_cartan(root_system.cartan(), p);
    if q.rank() != expected.rank() || q.twist_invariants() != expected.twist_invariants() {
        return Err(NicholsError::BraidingMismatch(p));
    }
    let poly = product_formula(root_system, p);
    let table = graded_dimensions(q, poly.len())?;
    Ok(table.is_finite() && table.by_total_degree == poly)
}

/// Formal linear combination of words in the generators.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub terms: Vec<(CycloScalar, Vec<usize>)>,
}

impl Element {
    pub fn generator(i: usize) -> Self {
        Element {
            terms: vec![(CycloScalar::one(1), vec![i])],
        }
    }

    pub fn word(letters: Vec<usize>) -> Self {
        Element {
            terms: vec![(CycloScalar::one(1), letters)],
        }
    }

    /// `x_i^m`.
    pub fn power(i: usize, m: usize) -> Self {
        Self::word(vec![i; m])
    }

    pub fn concat(&self, other: &Element) -> Element {
        let mut terms = Vec::new();
        for (a, u) in &self.terms {
            for (b, v) in &other.terms {
                let mut w = u.clone();
                w.extend(v);
                terms.push((a * b, w));
            }
        }
        Element { terms }
    }

    pub fn scaled(&self, c: &CycloScalar) -> Element {
        Element {
            terms: self.terms.iter().map(|(a, w)| (a * c, w.clone())).collect(),
        }
    }

    pub fn minus(&self, other: &Element) -> Element {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|(a, w)| (-a, w.clone())));
        Element { terms }
    }

    pub fn multidegree(&self, rank: usize) -> Result<Multidegree, NicholsError> {
        let mut out: Option<Multidegree> = None;
        for (_, w) in &self.terms {
            let mut d = vec![0u32; rank];
            for &l in w {
                if l >= rank {
                    return Err(NicholsError::InvalidInput(format!("letter {l} out of range")));
                }
                d[l] += 1;
            }
            match &out {
                None => out = Some(d),
                Some(e) if *e != d => return Err(NicholsError::NotHomogeneous),
                _ => {}
            }
        }
        Ok(out.unwrap_or_else(|| vec![0; rank]))
    }

    /// Braided commutator `ad_{x_i}(y) = x_i y - q_{i, deg y} y x_i`.
    pub fn ad(q: &DiagonalBraiding, i: usize, y: &Element) -> Result<Element, NicholsError> {
        let d = y.multidegree(q.rank())?;
        let e = d
            .iter()
            .enumerate()
            .fold(num_rational::BigRational::from_integer(0.into()), |acc, (j, &k)| {
                acc + q.exponent(i, j) * num_rational::BigRational::from_integer(k.into())
            });
        let x = Element::generator(i);
        Ok(x.concat(y).minus(&y.concat(&x).scaled(&CycloScalar::root_of_unity(&e))))
    }

    /// `ad_{x_i}^k (x_j)`.
    pub fn iterated_ad(q: &DiagonalBraiding, i: usize, j: usize, k: usize) -> Result<Element, NicholsError> {
        let mut y = Element::generator(j);
        for _ in 0..k {
            y = Element::ad(q, i, &y)?;
        }
        Ok(y)
    }
}

/// Parses `{"rank": n, "exponents": [["r/s", ..], ..]}`.
pub fn parse_q_matrix(text: &str) -> Result<DiagonalBraiding, NicholsError> {
    #[derive(Deserialize)]
    struct Raw {
        rank: usize,
        #[serde(with = "crate::rational::serde_rational_matrix")]
        exponents: Vec<Vec<num_rational::BigRational>>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| NicholsError::InvalidInput(e.to_string()))?;
    if raw.exponents.len() != raw.rank {
        return Err(NicholsError::InvalidInput(format!(
            "rank {} but {} exponent rows",
            raw.rank,
            raw.exponents.len()
        )));
    }
    DiagonalBraiding::new(raw.exponents).map_err(|e| NicholsError::InvalidInput(e.to_string()))
}

/// Words of a vector, for inspection in tests and reports.
pub fn expand_words(v: &BTreeMap<u128, CycloScalar>, len: usize) -> Vec<(Vec<usize>, CycloScalar)> {
    v.iter().map(|(&w, c)| (letters_of(w, len), c.clone())).collect()
}

impl NicholsEngine {
    /// `S(element)` as a list of `(word, coefficient)`.
    pub fn symmetrized(&self, element: &Element) -> Result<Vec<(Vec<usize>, CycloScalar)>, NicholsError> {
        let len = element.terms.first().map_or(0, |(_, w)| w.len());
        Ok(expand_words(&self.symmetrize(element)?, len))
    }

    /// `x_j * S(w)` via the quantum shuffle product.
    pub fn shuffle_with_symmetrized(&self, j: usize, w: &[usize]) -> Vec<(Vec<usize>, CycloScalar)> {
        let s = self.symmetrize_word(w, &mut HashMap::new());
        expand_words(&self.shuffle_left(j, &s, w.len()), w.len() + 1)
    }
}
