//! Even lattices and their discriminant quadratic spaces.
//!
//! A [`DiscriminantForm`] is the finite group `Gamma = L*/L` in Smith normal
//! form together with `Q(a) = e^{pi i q(a)}` (exponent kept mod 2) and its
//! polarization `B(a, b) = e^{2 pi i b(a, b)}` (exponent kept mod 1). Group
//! elements are coordinate tuples in the SNF basis.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::{reduce_mod, reduce_mod_one, CycloScalar};
use crate::linalg::{
    bilinear, is_positive_definite, rat_determinant, rat_matvec, smith_normal_form, IntMatrix,
    RatMatrix,
};
use crate::rational::{format_rational, int, is_integer, rat, serde_rational_matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("gram matrix is not square and symmetric")]
    NotSymmetric,
    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("lattice is not even integral")]
    NotEven,
    #[error("element {0:?} is out of range for factors {1:?}")]
    ElementOutOfRange(Vec<i64>, Vec<u64>),
    #[error("group of order {0} exceeds the enumeration bound {1}")]
    GroupTooLarge(u64, u64),
    #[error("subgroup is not isotropic")]
    NotIsotropic,
    #[error("charge {index} has self-pairing {pairing}, which is not 2/p for an integer p >= {min_p}")]
    BadSelfPairing {
        index: usize,
        pairing: String,
        min_p: u32,
    },
    #[error("charges {0} and {1} lie in the same coset of the lattice")]
    CosetCollision(usize, usize),
    #[error("charge {0} lies in the lattice (zero coset)")]
    ZeroCoset(usize),
    #[error("charge {0} is not in the dual lattice")]
    NotInDual(usize),
    #[error("charge {0} has dimension {1}, lattice rank is {2}")]
    DimensionMismatch(usize, usize, usize),
    #[error("invalid quadratic form data: {0}")]
    InvalidForm(String),
}

/// Positive definite lattice given by its Gram matrix in a fixed basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralLattice {
    gram: RatMatrix,
}

impl IntegralLattice {
    pub fn new(gram: RatMatrix) -> Result<Self, LatticeError> {
        let n = gram.len();
        if gram.iter().any(|r| r.len() != n) {
            return Err(LatticeError::NotSymmetric);
        }
        for i in 0..n {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(LatticeError::NotSymmetric);
                }
            }
        }
        if !is_positive_definite(&gram) {
            return Err(LatticeError::NotPositiveDefinite);
        }
        Ok(IntegralLattice { gram })
    }

    pub fn from_integers(gram: &[Vec<i64>]) -> Result<Self, LatticeError> {
        Self::new(gram.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect())
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &RatMatrix {
        &self.gram
    }

    pub fn determinant(&self) -> BigRational {
        rat_determinant(&self.gram)
    }

    pub fn is_even_integral(&self) -> bool {
        self.gram.iter().all(|r| r.iter().all(is_integer))
            && (0..self.rank()).all(|i| self.gram[i][i].to_integer().is_even())
    }

    pub fn inner(&self, u: &[BigRational], v: &[BigRational]) -> BigRational {
        bilinear(&self.gram, u, v)
    }

    /// Whether a rational coordinate vector lies in the dual lattice.
    pub fn in_dual(&self, v: &[BigRational]) -> bool {
        rat_matvec(&self.gram, v).iter().all(is_integer)
    }

    fn integer_gram(&self) -> Result<IntMatrix, LatticeError> {
        if !self.is_even_integral() {
            return Err(LatticeError::NotEven);
        }
        Ok(self
            .gram
            .iter()
            .map(|r| r.iter().map(|x| x.to_integer().to_i128().expect("gram entry fits i128")).collect())
            .collect())
    }
}

/// A finite quadratic space `(Gamma, Q, B)` presented as `Z/d_1 x .. x Z/d_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscriminantForm {
    factors: Vec<u64>,
    /// `q(e_i)` mod 2.
    q_gen: Vec<BigRational>,
    /// `b(e_i, e_j)` mod 1.
    b_gen: RatMatrix,
    /// Dual-lattice coordinates of each generator, when the form came from a lattice.
    generators: Option<RatMatrix>,
    /// Maps `G v` (for `v` in the dual) to SNF coordinates: rows of the left
    /// SNF transform belonging to nontrivial factors.
    coset_map: Option<Vec<Vec<i128>>>,
}

pub type Element = Vec<i64>;

/// Subgroup stored as the sorted list of its elements' flat indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subgroup {
    elements: Vec<usize>,
}

impl Subgroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.elements
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.elements.binary_search(&idx).is_ok()
    }

    pub fn from_indices(mut elements: Vec<usize>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        Subgroup { elements }
    }
}

pub const DEFAULT_GROUP_BOUND: u64 = 10_000;

impl DiscriminantForm {
    /// Abstract form from generator data; checks well-definedness.
    pub fn from_data(
        factors: Vec<u64>,
        q_gen: Vec<BigRational>,
        b_gen: RatMatrix,
    ) -> Result<Self, LatticeError> {
        let k = factors.len();
        if q_gen.len() != k || b_gen.len() != k || b_gen.iter().any(|r| r.len() != k) {
            return Err(LatticeError::InvalidForm("dimension mismatch".into()));
        }
        for i in 0..k {
            let d = int(factors[i] as i64);
            if factors[i] < 2 {
                return Err(LatticeError::InvalidForm("factors must be >= 2".into()));
            }
            if !reduce_mod(&(&d * &d * &q_gen[i]), 2).is_zero() {
                return Err(LatticeError::InvalidForm(format!("d^2 q(e_{i}) is not even")));
            }
            if reduce_mod_one(&(&b_gen[i][i] - &q_gen[i])) != BigRational::zero() {
                return Err(LatticeError::InvalidForm(format!("b(e_{i},e_{i}) != q(e_{i}) mod 1")));
            }
            for j in 0..k {
                if reduce_mod_one(&(&b_gen[i][j] - &b_gen[j][i])) != BigRational::zero() {
                    return Err(LatticeError::InvalidForm("b is not symmetric".into()));
                }
                if !is_integer(&(&d * &b_gen[i][j])) {
                    return Err(LatticeError::InvalidForm(format!("d_{i} b(e_{i},e_{j}) is not integral")));
                }
            }
        }
        Ok(DiscriminantForm {
            factors,
            q_gen: q_gen.iter().map(|q| reduce_mod(q, 2)).collect(),
            b_gen: b_gen.iter().map(|r| r.iter().map(reduce_mod_one).collect()).collect(),
            generators: None,
            coset_map: None,
        })
    }

    pub fn trivial() -> Self {
        DiscriminantForm {
            factors: vec![],
            q_gen: vec![],
            b_gen: vec![],
            generators: None,
            coset_map: None,
        }
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn order(&self) -> u64 {
        self.factors.iter().product()
    }

    pub fn q_generators(&self) -> &[BigRational] {
        &self.q_gen
    }

    pub fn b_generators(&self) -> &RatMatrix {
        &self.b_gen
    }

    pub fn generators(&self) -> Option<&RatMatrix> {
        self.generators.as_ref()
    }

    /// Exponent of the group (lcm of the factors).
    pub fn exponent(&self) -> u64 {
        self.factors.iter().fold(1, |acc, &d| acc.lcm(&d))
    }

    pub fn check_element(&self, a: &[i64]) -> Result<(), LatticeError> {
        if a.len() != self.factors.len()
            || a.iter().zip(&self.factors).any(|(&x, &d)| x < 0 || x as u64 >= d)
        {
            return Err(LatticeError::ElementOutOfRange(a.to_vec(), self.factors.clone()));
        }
        Ok(())
    }

    pub fn normalize(&self, a: &[i64]) -> Element {
        a.iter()
            .zip(&self.factors)
            .map(|(&x, &d)| x.rem_euclid(d as i64))
            .collect()
    }

    pub fn add(&self, a: &[i64], b: &[i64]) -> Element {
        let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        self.normalize(&s)
    }

    pub fn scale(&self, k: i64, a: &[i64]) -> Element {
        let s: Vec<i64> = a.iter().map(|x| k * x).collect();
        self.normalize(&s)
    }

    pub fn zero_element(&self) -> Element {
        vec![0; self.factors.len()]
    }

    /// Mixed-radix index, first coordinate fastest.
    pub fn index_of(&self, a: &[i64]) -> usize {
        let mut idx = 0usize;
        for (x, d) in a.iter().zip(&self.factors).rev() {
            idx = idx * (*d as usize) + *x as usize;
        }
        idx
    }

    pub fn element_at(&self, mut idx: usize) -> Element {
        self.factors
            .iter()
            .map(|&d| {
                let x = idx % d as usize;
                idx /= d as usize;
                x as i64
            })
            .collect()
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.order() as usize).map(|i| self.element_at(i))
    }

    /// `q(a)` mod 2 for any integer coordinate vector (not necessarily reduced).
    pub fn q_exponent(&self, a: &[i64]) -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..a.len() {
            if a[i] == 0 {
                continue;
            }
            s += &self.q_gen[i] * int(a[i] * a[i]);
            for j in i + 1..a.len() {
                s += &self.b_gen[i][j] * int(2 * a[i] * a[j]);
            }
        }
        reduce_mod(&s, 2)
    }

    /// `b(a, c)` mod 1.
    pub fn b_exponent(&self, a: &[i64], c: &[i64]) -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..a.len() {
            for j in 0..c.len() {
                if a[i] != 0 && c[j] != 0 {
                    s += &self.b_gen[i][j] * int(a[i] * c[j]);
                }
            }
        }
        reduce_mod_one(&s)
    }

    pub fn evaluate_q(&self, a: &[i64]) -> Result<CycloScalar, LatticeError> {
        self.check_element(a)?;
        Ok(CycloScalar::root_of_unity(&(self.q_exponent(a) / int(2))))
    }

    /// `B(a, b)`, computed as `Q(a+b) Q(a)^-1 Q(b)^-1` and checked against the
    /// stored polarization.
    pub fn evaluate_b(&self, a: &[i64], b: &[i64]) -> Result<CycloScalar, LatticeError> {
        self.check_element(a)?;
        self.check_element(b)?;
        let ab = self.add(a, b);
        let polar = (self.q_exponent(&ab) - self.q_exponent(a) - self.q_exponent(b)) / int(2);
        debug_assert_eq!(reduce_mod_one(&polar), self.b_exponent(a, b));
        Ok(CycloScalar::root_of_unity(&polar))
    }

    /// `{a : B(a, b) = 1 for all b}`.
    pub fn radical(&self) -> Subgroup {
        let k = self.factors.len();
        let unit = |j: usize| -> Element { (0..k).map(|i| i64::from(i == j)).collect() };
        let gens: Vec<Element> = (0..k).map(unit).collect();
        Subgroup::from_indices(
            self.elements()
                .filter(|a| gens.iter().all(|g| self.b_exponent(a, g).is_zero()))
                .map(|a| self.index_of(&a))
                .collect(),
        )
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.radical().order() == 1
    }

    pub fn is_isotropic(&self, sub: &Subgroup) -> bool {
        sub.indices()
            .iter()
            .all(|&i| self.q_exponent(&self.element_at(i)).is_zero())
    }

    fn is_subgroup(&self, sub: &Subgroup) -> bool {
        if !sub.contains(0) {
            return false;
        }
        let els: Vec<Element> = sub.indices().iter().map(|&i| self.element_at(i)).collect();
        els.iter()
            .all(|a| els.iter().all(|b| sub.contains(self.index_of(&self.add(a, b)))))
    }

    /// Subgroup generated by a set of elements.
    pub fn span(&self, gens: &[Element]) -> Subgroup {
        let mut seen: HashSet<usize> = HashSet::from([0]);
        let mut frontier = vec![self.zero_element()];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = self.add(&x, g);
                if seen.insert(self.index_of(&y)) {
                    frontier.push(y);
                }
            }
        }
        Subgroup::from_indices(seen.into_iter().collect())
    }

    /// All isotropic subgroups, smallest first.
    pub fn isotropic_subgroups(&self, bound: u64) -> Result<Vec<Subgroup>, LatticeError> {
        let order = self.order();
        if order > bound {
            return Err(LatticeError::GroupTooLarge(order, bound));
        }
        let isotropic: Vec<Element> = self
            .elements()
            .skip(1)
            .filter(|a| self.q_exponent(a).is_zero())
            .collect();
        let start = Subgroup::from_indices(vec![0]);
        let mut seen: HashSet<Subgroup> = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(h) = queue.pop_front() {
            let members: Vec<Element> = h.indices().iter().map(|&i| self.element_at(i)).collect();
            for g in &isotropic {
                if h.contains(self.index_of(g)) {
                    continue;
                }
                if !members.iter().all(|m| self.b_exponent(m, g).is_zero()) {
                    continue;
                }
                let mut gens = members.clone();
                gens.push(g.clone());
                let bigger = self.span(&gens);
                if seen.insert(bigger.clone()) {
                    queue.push_back(bigger);
                }
            }
        }
        let mut out: Vec<Subgroup> = seen.into_iter().collect();
        out.sort_by(|a, b| (a.order(), &a.elements).cmp(&(b.order(), &b.elements)));
        Ok(out)
    }

    /// `I^perp = {v : B(v, i) = 1 for all i in I}`.
    pub fn orthogonal(&self, sub: &Subgroup) -> Subgroup {
        let members: Vec<Element> = sub.indices().iter().map(|&i| self.element_at(i)).collect();
        Subgroup::from_indices(
            self.elements()
                .filter(|v| members.iter().all(|m| self.b_exponent(v, m).is_zero()))
                .map(|v| self.index_of(&v))
                .collect(),
        )
    }

    /// The local-module quadratic space `I^perp / I` with the induced form.
    pub fn extend_by_isotropic(&self, sub: &Subgroup) -> Result<DiscriminantForm, LatticeError> {
        if !self.is_subgroup(sub) || !self.is_isotropic(sub) {
            return Err(LatticeError::NotIsotropic);
        }
        let perp = self.orthogonal(sub);
        let k = self.factors.len();
        // Lift both subgroups to full-rank lattices in Z^k containing diag(d).
        let lift = |s: &Subgroup| -> IntMatrix {
            let mut cols: Vec<Vec<i128>> = s
                .indices()
                .iter()
                .map(|&i| self.element_at(i).iter().map(|&x| x as i128).collect())
                .collect();
            for (j, &d) in self.factors.iter().enumerate() {
                cols.push((0..k).map(|i| if i == j { d as i128 } else { 0 }).collect());
            }
            // k x m matrix with the generators as columns
            (0..k).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
        };
        let perp_gens = lift(&perp);
        let sub_gens = lift(sub);
        let snf_p = smith_normal_form(&perp_gens);
        // basis of the perp lattice: left^{-1} diag(s); coordinates of x are (left x)_i / s_i
        let coords = |x: &[i128]| -> Vec<i128> {
            (0..k)
                .map(|i| {
                    let v: i128 = (0..k).map(|j| snf_p.left[i][j] * x[j]).sum();
                    debug_assert_eq!(v % snf_p.diag[i], 0);
                    v / snf_p.diag[i]
                })
                .collect()
        };
        let relations: IntMatrix = {
            let cols: Vec<Vec<i128>> = (0..sub_gens[0].len())
                .map(|c| coords(&(0..k).map(|i| sub_gens[i][c]).collect::<Vec<_>>()))
                .collect();
            (0..k).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
        };
        let snf_r = smith_normal_form(&relations);
        let left_inv = crate::linalg::rat_inverse(&crate::linalg::to_rational(&snf_r.left))
            .expect("unimodular");
        let basis_inv = crate::linalg::rat_inverse(&crate::linalg::to_rational(&snf_p.left))
            .expect("unimodular");
        let mut factors = Vec::new();
        let mut gen_vectors: Vec<Element> = Vec::new();
        for (i, &d) in snf_r.diag.iter().enumerate() {
            if d == 1 {
                continue;
            }
            assert!(d > 1, "quotient of full-rank lattices is finite");
            // generator in perp-basis coordinates: column i of left_inv
            let c: Vec<BigRational> = (0..k).map(|r| left_inv[r][i].clone()).collect();
            // to Z^k: left_p^{-1} diag(s) c
            let scaled: Vec<BigRational> = c
                .iter()
                .enumerate()
                .map(|(j, x)| x * int(snf_p.diag[j] as i64))
                .collect();
            let v = rat_matvec(&basis_inv, &scaled);
            gen_vectors.push(v.iter().map(|x| x.to_integer().to_i64().unwrap()).collect());
            factors.push(d as u64);
        }
        let q_gen: Vec<BigRational> = gen_vectors.iter().map(|g| self.q_exponent(g)).collect();
        let b_gen: RatMatrix = gen_vectors
            .iter()
            .map(|g| gen_vectors.iter().map(|h| self.b_exponent(g, h)).collect())
            .collect();
        let mut out = DiscriminantForm::from_data(factors, q_gen, b_gen)?;
        if let Some(gens) = &self.generators {
            out.generators = Some(
                gen_vectors
                    .iter()
                    .map(|g| {
                        let n = gens.first().map_or(0, Vec::len);
                        (0..n)
                            .map(|c| {
                                g.iter()
                                    .zip(gens)
                                    .fold(BigRational::zero(), |acc, (&x, row)| acc + &row[c] * int(x))
                            })
                            .collect()
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// SNF coordinates of the coset `v + L` for a dual-lattice vector `v`.
    pub fn coset_of(&self, lattice: &IntegralLattice, v: &[BigRational]) -> Option<Element> {
        let map = self.coset_map.as_ref()?;
        let gv = rat_matvec(lattice.gram(), v);
        if !gv.iter().all(is_integer) {
            return None;
        }
        let z: Vec<i128> = gv.iter().map(|x| x.to_integer().to_i128().unwrap()).collect();
        let raw: Vec<i64> = map
            .iter()
            .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum::<i128>() as i64)
            .collect();
        Some(self.normalize(&raw))
    }

    pub fn report(&self) -> DiscriminantReport {
        DiscriminantReport {
            order: self.order(),
            factors: self.factors.clone(),
            q_exponents_on_generators: self.q_gen.iter().map(format_rational).collect(),
            b_exponents_on_generators: self
                .b_gen
                .iter()
                .map(|r| r.iter().map(format_rational).collect())
                .collect(),
            generators: self.generators.as_ref().map(|g| {
                g.iter().map(|r| r.iter().map(format_rational).collect()).collect()
            }),
            nondegenerate: self.is_nondegenerate(),
        }
    }
}

/// JSON summary of a discriminant form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiscriminantReport {
    pub order: u64,
    pub factors: Vec<u64>,
    pub q_exponents_on_generators: Vec<String>,
    pub b_exponents_on_generators: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<String>>>,
    pub nondegenerate: bool,
}

/// `L*/L` with `q(a) = (a, a) mod 2`, `b(a, b) = (a, b) mod 1`.
pub fn discriminant_form(lattice: &IntegralLattice) -> Result<DiscriminantForm, LatticeError> {
    let g = lattice.integer_gram()?;
    let snf = smith_normal_form(&g);
    let n = lattice.rank();
    let mut factors = Vec::new();
    let mut generators: RatMatrix = Vec::new();
    let mut coset_map = Vec::new();
    for (i, &d) in snf.diag.iter().enumerate() {
        debug_assert!(d > 0, "positive definite gram has full rank");
        if d == 1 {
            continue;
        }
        factors.push(d as u64);
        generators.push((0..n).map(|r| rat(snf.right[r][i] as i64, d as i64)).collect());
        coset_map.push(snf.left[i].clone());
    }
    let q_gen: Vec<BigRational> = generators
        .iter()
        .map(|y| reduce_mod(&lattice.inner(y, y), 2))
        .collect();
    let b_gen: RatMatrix = generators
        .iter()
        .map(|y| generators.iter().map(|z| reduce_mod_one(&lattice.inner(y, z))).collect())
        .collect();
    let mut form = DiscriminantForm::from_data(factors, q_gen, b_gen)?;
    debug_assert_eq!(int(form.order() as i64), lattice.determinant().abs());
    form.generators = Some(generators);
    form.coset_map = Some(coset_map);
    Ok(form)
}

/// Abelian 3-cocycle `(sigma, omega)` on a discriminant form.
///
/// Built from the upper-triangular bilinear lift
/// `theta(x, y) = sum_i q_i x_i y_i + 2 sum_{i<j} b_ij x_i y_j` on `Z^k`:
/// `sigma(a, b) = e^{pi i theta(a, b)}` on box representatives and
/// `omega(a, b, c) = e^{pi i theta(a, carry(b, c))}` where `carry` is the
/// multiple of `d` dropped when reducing `b + c`.
#[derive(Debug, Clone)]
pub struct AbelianCocycle {
    form: DiscriminantForm,
    /// All phases are integers modulo this unit (exponent `k / unit` of `e^{2 pi i}`).
    unit: i64,
    half_q: Vec<i64>,
    b_int: Vec<Vec<i64>>,
}

/// Identity-check failures; all zero means a valid abelian 3-cocycle.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CocycleCheck {
    pub pentagon_failures: u64,
    pub hexagon1_failures: u64,
    pub hexagon2_failures: u64,
    pub sigma_diagonal_failures: u64,
    pub sigma_monodromy_failures: u64,
    pub checks: u64,
}

impl CocycleCheck {
    pub fn passed(&self) -> bool {
        self.pentagon_failures == 0
            && self.hexagon1_failures == 0
            && self.hexagon2_failures == 0
            && self.sigma_diagonal_failures == 0
            && self.sigma_monodromy_failures == 0
    }
}

pub fn build_cocycle(form: &DiscriminantForm) -> AbelianCocycle {
    let half_q: Vec<BigRational> = form.q_gen.iter().map(|q| q / int(2)).collect();
    let unit = half_q
        .iter()
        .chain(form.b_gen.iter().flatten())
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let unit_r = BigRational::from_integer(unit.clone());
    let to_int = |r: &BigRational| (r * &unit_r).to_integer().to_i64().expect("phase fits");
    AbelianCocycle {
        form: form.clone(),
        unit: unit.to_i64().expect("unit fits"),
        half_q: half_q.iter().map(to_int).collect(),
        b_int: form.b_gen.iter().map(|r| r.iter().map(to_int).collect()).collect(),
    }
}

impl AbelianCocycle {
    pub fn form(&self) -> &DiscriminantForm {
        &self.form
    }

    /// `theta(x, y) / 2` in units of `1 / unit`.
    fn half_theta(&self, x: &[i64], y: &[i64]) -> i64 {
        let k = x.len();
        let mut s = 0i64;
        for i in 0..k {
            if x[i] == 0 {
                continue;
            }
            s += self.half_q[i] * x[i] * y[i];
            for j in i + 1..k {
                s += self.b_int[i][j] * x[i] * y[j];
            }
        }
        s.rem_euclid(self.unit)
    }

    fn carry(&self, b: &[i64], c: &[i64]) -> Vec<i64> {
        b.iter()
            .zip(c)
            .zip(&self.form.factors)
            .map(|((&x, &y), &d)| if x + y >= d as i64 { d as i64 } else { 0 })
            .collect()
    }

    fn sigma_phase(&self, a: &[i64], b: &[i64]) -> i64 {
        self.half_theta(a, b)
    }

    fn omega_phase(&self, a: &[i64], b: &[i64], c: &[i64]) -> i64 {
        self.half_theta(a, &self.carry(b, c))
    }

    fn phase_to_rational(&self, k: i64) -> BigRational {
        rat(k, self.unit)
    }

    /// `sigma(a, b)` as an exponent of `e^{2 pi i}` in `[0, 1)`.
    pub fn sigma_exponent(&self, a: &[i64], b: &[i64]) -> BigRational {
        self.phase_to_rational(self.sigma_phase(a, b))
    }

    pub fn omega_exponent(&self, a: &[i64], b: &[i64], c: &[i64]) -> BigRational {
        self.phase_to_rational(self.omega_phase(a, b, c))
    }

    pub fn sigma(&self, a: &[i64], b: &[i64]) -> CycloScalar {
        CycloScalar::root_of_unity(&self.sigma_exponent(a, b))
    }

    pub fn omega(&self, a: &[i64], b: &[i64], c: &[i64]) -> CycloScalar {
        CycloScalar::root_of_unity(&self.omega_exponent(a, b, c))
    }

    /// `omega` vanishes identically iff every `q(e_i) d_i` is even.
    pub fn omega_is_trivial(&self) -> bool {
        let els: Vec<Element> = self.form.elements().collect();
        els.iter().all(|a| {
            els.iter()
                .all(|b| els.iter().all(|c| self.omega_phase(a, b, c) == 0))
        })
    }

    /// Exhaustive check of the pentagon, both hexagons, `sigma(a,a) = Q(a)` and
    /// `sigma(a,b) sigma(b,a) = B(a,b)`.
    pub fn verify(&self) -> CocycleCheck {
        let f = &self.form;
        let els: Vec<Element> = f.elements().collect();
        let n = els.len();
        let u = self.unit;
        let m = |x: i64| x.rem_euclid(u);
        let add_idx: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).map(|j| f.index_of(&f.add(&els[i], &els[j]))).collect())
            .collect();
        let sig: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| self.sigma_phase(&els[i], &els[j])).collect())
            .collect();
        let om: Vec<i64> = (0..n * n * n)
            .map(|t| {
                let (a, b, c) = (t / (n * n), (t / n) % n, t % n);
                self.omega_phase(&els[a], &els[b], &els[c])
            })
            .collect();
        let w = |a: usize, b: usize, c: usize| om[(a * n + b) * n + c];
        let mut out = CocycleCheck::default();
        let q_unit = |a: usize| -> i64 {
            let q = f.q_exponent(&els[a]) / int(2) * int(u);
            debug_assert!(is_integer(&q));
            q.to_integer().to_i64().unwrap()
        };
        let b_unit = |a: usize, b: usize| -> i64 {
            (f.b_exponent(&els[a], &els[b]) * int(u)).to_integer().to_i64().unwrap()
        };
        for a in 0..n {
            out.checks += 1;
            if m(sig[a][a] - q_unit(a)) != 0 {
                out.sigma_diagonal_failures += 1;
            }
            for b in 0..n {
                out.checks += 1;
                if m(sig[a][b] + sig[b][a] - b_unit(a, b)) != 0 {
                    out.sigma_monodromy_failures += 1;
                }
                for c in 0..n {
                    let bc = add_idx[b][c];
                    let ab = add_idx[a][b];
                    // w(b,c,a) s(a,b+c) w(a,b,c) = s(a,b) w(b,a,c) s(a,c)
                    let h1 = w(b, c, a) + sig[a][bc] + w(a, b, c) - sig[a][b] - w(b, a, c) - sig[a][c];
                    // w(c,a,b)^-1 s(a+b,c) w(a,b,c)^-1 = s(b,c) w(a,c,b)^-1 s(a,c)
                    let h2 = -w(c, a, b) + sig[ab][c] - w(a, b, c) - sig[b][c] + w(a, c, b) - sig[a][c];
                    out.checks += 2;
                    if m(h1) != 0 {
                        out.hexagon1_failures += 1;
                    }
                    if m(h2) != 0 {
                        out.hexagon2_failures += 1;
                    }
                    for d in 0..n {
                        // w(a+b,c,d) w(a,b,c+d) = w(a,b,c) w(a,b+c,d) w(b,c,d)
                        let p = w(ab, c, d) + w(a, b, add_idx[c][d])
                            - w(a, b, c)
                            - w(a, bc, d)
                            - w(b, c, d);
                        out.checks += 1;
                        if m(p) != 0 {
                            out.pentagon_failures += 1;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Braiding `q_ij = e^{2 pi i r_ij}` on a diagonal braided vector space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalBraiding {
    rank: usize,
    #[serde(with = "serde_rational_matrix")]
    exponents: RatMatrix,
    /// Truncation parameters `p_i` when built from screening charges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    p: Vec<u32>,
}

impl DiagonalBraiding {
    pub fn new(exponents: RatMatrix) -> Result<Self, LatticeError> {
        let n = exponents.len();
        if exponents.iter().any(|r| r.len() != n) {
            return Err(LatticeError::InvalidForm("exponent matrix is not square".into()));
        }
        Ok(DiagonalBraiding {
            rank: n,
            exponents: exponents.iter().map(|r| r.iter().map(reduce_mod_one).collect()).collect(),
            p: vec![],
        })
    }

    pub fn from_fractions(entries: &[Vec<(i64, i64)>]) -> Self {
        Self::new(
            entries
                .iter()
                .map(|r| r.iter().map(|&(a, b)| rat(a, b)).collect())
                .collect(),
        )
        .expect("square exponent matrix")
    }

    /// `q_ij = e^{pi i C_ij / p}` for a Cartan matrix `C`.
    pub fn from_cartan(cartan: &[Vec<i64>], p: u32) -> Self {
        let mut b = Self::new(
            cartan
                .iter()
                .map(|r| r.iter().map(|&c| rat(c, 2 * p as i64)).collect())
                .collect(),
        )
        .expect("square Cartan matrix");
        b.p = vec![p; cartan.len()];
        b
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn exponent(&self, i: usize, j: usize) -> &BigRational {
        &self.exponents[i][j]
    }

    pub fn exponents(&self) -> &RatMatrix {
        &self.exponents
    }

    pub fn truncation_parameters(&self) -> &[u32] {
        &self.p
    }

    pub fn q(&self, i: usize, j: usize) -> CycloScalar {
        CycloScalar::root_of_unity(&self.exponents[i][j])
    }

    /// Smallest `N` with every `q_ij` an `N`-th root of unity.
    pub fn common_order(&self) -> u32 {
        self.exponents
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
            .to_u32()
            .expect("order fits u32")
    }

    /// Exponents as integers modulo [`Self::common_order`].
    pub fn integer_exponents(&self) -> Vec<Vec<i64>> {
        let n = int(self.common_order() as i64);
        self.exponents
            .iter()
            .map(|r| r.iter().map(|x| (x * &n).to_integer().to_i64().unwrap()).collect())
            .collect()
    }

    /// The pair `(q_ii, q_ij q_ji)` data that twist-equivalence preserves,
    /// as exponents mod 1.
    pub fn twist_invariants(&self) -> (Vec<BigRational>, Vec<Vec<BigRational>>) {
        let diag = (0..self.rank).map(|i| self.exponents[i][i].clone()).collect();
        let prod = (0..self.rank)
            .map(|i| {
                (0..self.rank)
                    .map(|j| reduce_mod_one(&(&self.exponents[i][j] + &self.exponents[j][i])))
                    .collect()
            })
            .collect();
        (diag, prod)
    }

    /// Same braiding with generators relabeled by `perm` (new `i` is old `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        DiagonalBraiding {
            rank: self.rank,
            exponents: perm
                .iter()
                .map(|&i| perm.iter().map(|&j| self.exponents[i][j].clone()).collect())
                .collect(),
            p: if self.p.is_empty() { vec![] } else { perm.iter().map(|&i| self.p[i]).collect() },
        }
    }
}

/// Screening charges `alpha_i` with `(alpha_i, alpha_i) = 2 / p_i` give
/// `q_ij = e^{pi i (alpha_i, alpha_j)}`. With `allow_degenerate` the
/// `p_i >= 2` and distinct-coset checks are relaxed to `p_i >= 1`.
pub fn braiding_from_charges(
    lattice: &IntegralLattice,
    charges: &[Vec<BigRational>],
    allow_degenerate: bool,
) -> Result<DiagonalBraiding, LatticeError> {
    let n = lattice.rank();
    let min_p = if allow_degenerate { 1 } else { 2 };
    let mut ps = Vec::with_capacity(charges.len());
    for (i, a) in charges.iter().enumerate() {
        if a.len() != n {
            return Err(LatticeError::DimensionMismatch(i, a.len(), n));
        }
        if !lattice.in_dual(a) {
            return Err(LatticeError::NotInDual(i));
        }
        let s = lattice.inner(a, a);
        let bad = || LatticeError::BadSelfPairing {
            index: i,
            pairing: format_rational(&s),
            min_p,
        };
        if !s.is_positive() {
            return Err(bad());
        }
        let p = int(2) / &s;
        if !is_integer(&p) || p < int(min_p as i64) {
            return Err(bad());
        }
        ps.push(p.to_integer().to_u32().ok_or_else(bad)?);
    }
    if !allow_degenerate {
        let in_lattice = |v: &[BigRational]| v.iter().all(is_integer);
        for (i, a) in charges.iter().enumerate() {
            if in_lattice(a) {
                return Err(LatticeError::ZeroCoset(i));
            }
            for (j, b) in charges.iter().enumerate().take(i) {
                let diff: Vec<BigRational> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                if in_lattice(&diff) {
                    return Err(LatticeError::CosetCollision(j, i));
                }
            }
        }
    }
    let exps: RatMatrix = charges
        .iter()
        .map(|a| charges.iter().map(|b| lattice.inner(a, b) / int(2)).collect())
        .collect();
    let mut braiding = DiagonalBraiding::new(exps)?;
    braiding.p = ps;
    Ok(braiding)
}

/// Input file: `{"gram": [[...]], "charges": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeInput {
    #[serde(with = "serde_rational_matrix")]
    pub gram: RatMatrix,
    #[serde(default, with = "serde_rational_matrix")]
    pub charges: RatMatrix,
}
