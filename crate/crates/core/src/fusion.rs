//! Based rings, Frobenius-Perron dimensions and the dimension ledger for
//! pointed braided categories extended by a Nichols algebra.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{DiscriminantForm, LatticeError, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FusionError {
    #[error("ring is not transitive")]
    NotTransitive,
    #[error("invalid structure constants: {0}")]
    InvalidRing(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A unital based ring with non-negative structure constants `N_ij^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionRing {
    labels: Vec<String>,
    unit: usize,
    /// `n[i][j][k] = N_ij^k`.
    n: Vec<Vec<Vec<u64>>>,
    projective_weights: Option<Vec<f64>>,
}

/// Rings up to this rank get an exhaustive associativity check on construction.
pub const ASSOCIATIVITY_CHECK_RANK: usize = 40;

impl FusionRing {
    pub fn new(labels: Vec<String>, unit: usize, n: Vec<Vec<Vec<u64>>>) -> Result<Self, FusionError> {
        let r = labels.len();
        let bad = |m: &str| Err(FusionError::InvalidRing(m.to_string()));
        if unit >= r {
            return bad("unit index out of range");
        }
        if n.len() != r || n.iter().any(|a| a.len() != r || a.iter().any(|b| b.len() != r)) {
            return bad("structure constants must be rank x rank x rank");
        }
        for i in 0..r {
            for k in 0..r {
                let e = u64::from(i == k);
                if n[unit][i][k] != e || n[i][unit][k] != e {
                    return bad("unit does not act as the identity");
                }
            }
        }
        if r <= ASSOCIATIVITY_CHECK_RANK {
            for i in 0..r {
                for j in 0..r {
                    for k in 0..r {
                        for l in 0..r {
                            let left: u64 = (0..r).map(|m| n[i][j][m] * n[m][k][l]).sum();
                            let right: u64 = (0..r).map(|m| n[j][k][m] * n[i][m][l]).sum();
                            if left != right {
                                return bad("structure constants are not associative");
                            }
                        }
                    }
                }
            }
        }
        Ok(FusionRing {
            labels,
            unit,
            n,
            projective_weights: None,
        })
    }

    /// `Z[Z/d_1 x .. x Z/d_k]`.
    pub fn group_ring(factors: &[u64]) -> Self {
        let order: u64 = factors.iter().product();
        let r = order as usize;
        let digits = |mut x: usize| -> Vec<usize> {
            factors
                .iter()
                .map(|&d| {
                    let v = x % d as usize;
                    x /= d as usize;
                    v
                })
                .collect()
        };
        let index = |v: &[usize]| -> usize {
            v.iter()
                .zip(factors)
                .rev()
                .fold(0, |acc, (&x, &d)| acc * d as usize + x)
        };
        let mut n = vec![vec![vec![0u64; r]; r]; r];
        for (i, row) in n.iter_mut().enumerate() {
            for (j, out) in row.iter_mut().enumerate() {
                let s: Vec<usize> = digits(i)
                    .iter()
                    .zip(digits(j))
                    .zip(factors)
                    .map(|((a, b), &d)| (a + b) % d as usize)
                    .collect();
                out[index(&s)] = 1;
            }
        }
        let labels = (0..r).map(|i| format!("{:?}", digits(i))).collect();
        FusionRing::new(labels, 0, n).expect("group rings are valid")
    }

    /// Fibonacci ring: `tau^2 = 1 + tau`.
    pub fn fibonacci() -> Self {
        let n = vec![
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![1, 1]],
        ];
        FusionRing::new(vec!["1".into(), "tau".into()], 0, n).expect("Fibonacci ring is valid")
    }

    pub fn with_projective_weights(mut self, w: Vec<f64>) -> Self {
        self.projective_weights = Some(w);
        self
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn unit(&self) -> usize {
        self.unit
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> u64 {
        self.n[i][j][k]
    }

    pub fn projective_weights(&self) -> Option<&[f64]> {
        self.projective_weights.as_deref()
    }

    /// Every basis element appears in `X Y` and `Y' X` for each `X`.
    pub fn is_transitive(&self) -> bool {
        let r = self.rank();
        (0..r).all(|x| {
            let right: HashSet<usize> = (0..r)
                .flat_map(|y| (0..r).filter(move |&k| self.n[x][y][k] > 0))
                .collect();
            let left: HashSet<usize> = (0..r)
                .flat_map(|y| (0..r).filter(move |&k| self.n[y][x][k] > 0))
                .collect();
            right.len() == r && left.len() == r
        })
    }

    /// Matrix of left multiplication by `sum x_i b_i`: column `j` is `x b_j`.
    pub fn multiplication_matrix(&self, x: &[u64]) -> Vec<Vec<u64>> {
        let r = self.rank();
        let mut m = vec![vec![0u64; r]; r];
        for (i, &c) in x.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for j in 0..r {
                for k in 0..r {
                    m[k][j] += c * self.n[i][j][k];
                }
            }
        }
        m
    }

    pub fn basis_element(&self, i: usize) -> Vec<u64> {
        (0..self.rank()).map(|j| u64::from(i == j)).collect()
    }

    /// Product of two elements in the basis expansion.
    pub fn multiply(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        let r = self.rank();
        let mut out = vec![0u64; r];
        for i in 0..r {
            for j in 0..r {
                if x[i] == 0 || y[j] == 0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += x[i] * y[j] * self.n[i][j][k];
                }
            }
        }
        out
    }
}

/// Perron-Frobenius eigenvalue with a certified enclosure `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpDim {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl FpDim {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

pub fn fp_dimension(ring: &FusionRing, x: &[u64]) -> Result<FpDim, FusionError> {
    if x.len() != ring.rank() {
        return Err(FusionError::InvalidRing("element has the wrong length".into()));
    }
    if !ring.is_transitive() {
        return Err(FusionError::NotTransitive);
    }
    Ok(perron_frobenius(&ring.multiplication_matrix(x)))
}

fn is_permutation(m: &[Vec<u64>]) -> bool {
    let r = m.len();
    (0..r).all(|j| (0..r).map(|i| m[i][j]).sum::<u64>() == 1 && m.iter().all(|row| row[j] <= 1))
        && (0..r).all(|i| m[i].iter().sum::<u64>() == 1)
}

/// Power iteration on `M + I`, bounded by the Collatz-Wielandt quotients of `M`.
pub fn perron_frobenius(m: &[Vec<u64>]) -> FpDim {
    let r = m.len();
    if r == 0 {
        return FpDim { value: 0.0, lower: 0.0, upper: 0.0, exact: true };
    }
    if is_permutation(m) {
        return FpDim { value: 1.0, lower: 1.0, upper: 1.0, exact: true };
    }
    let mf: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|&x| x as f64).collect()).collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        mf.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let mut v = vec![1.0f64; r];
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    for _ in 0..100_000 {
        let mv = apply(&v);
        let ratios: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a / b).collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        lower = lower.max(lo);
        upper = upper.min(hi);
        if upper - lower <= 1e-12 * upper.max(1.0) {
            break;
        }
        let mut next: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + b).collect();
        let norm = next.iter().cloned().fold(0.0, f64::max);
        // keep strictly positive so the quotient bounds stay valid
        for x in next.iter_mut() {
            *x = (*x / norm).max(1e-300);
        }
        v = next;
    }
    // one-ulp-scale widening for floating rounding in the quotients
    let slack = 4.0 * f64::EPSILON * upper.max(1.0) * r as f64;
    FpDim {
        value: 0.5 * (lower + upper),
        lower: lower - slack,
        upper: upper + slack,
        exact: false,
    }
}

/// A number with an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// FP dimensions of the pointed category `C` (grading group `Gamma`), the
/// Nichols-algebra module category and the relative center, together with the
/// quantities implied by a measured `FPdim(A)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpLedger {
    pub gamma_order: u64,
    pub dim_nichols: u64,
    /// FPdim of the pointed braided category: `|Gamma|`.
    pub fp_c: u64,
    /// FPdim of modules over the Nichols algebra: `|Gamma| dim B`.
    pub fp_modules: u64,
    /// FPdim of the relative center: `|Gamma| (dim B)^2`.
    pub fp_relative_center: u64,
    /// Predicted `FPdim(A) = dim B`.
    pub fp_a_algebraic: u64,
    /// Measured `FPdim(A)`.
    pub fp_a: Estimate,
    /// `FPdim(center) / FPdim(A)`.
    pub fp_ca: Estimate,
    /// `FPdim(center) / FPdim(A)^2`, the lower bound for local modules.
    pub fp_ca_loc_bound: Estimate,
    pub notes: Vec<LedgerNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerNote {
    pub entry: String,
    pub note: String,
}

impl FpLedger {
    /// `fp_relative_center = fp_modules * dim B`.
    pub fn center_identity_holds(&self) -> bool {
        self.fp_relative_center == self.fp_modules * self.dim_nichols
    }

    /// `fp_modules / fp_a_algebraic = |Gamma|`.
    pub fn local_equality_holds(&self) -> bool {
        self.fp_modules == self.fp_c * self.fp_a_algebraic
    }
}

pub fn ledger_pointed_setup(gamma_order: u64, dim_nichols: u64, fp_a: Estimate) -> FpLedger {
    let center = gamma_order * dim_nichols * dim_nichols;
    let a = fp_a.value;
    let rel = if a > 0.0 { fp_a.error / a } else { f64::INFINITY };
    let fp_ca = Estimate {
        value: center as f64 / a,
        error: center as f64 / a * rel,
    };
    let fp_ca_loc_bound = Estimate {
        value: center as f64 / (a * a),
        error: center as f64 / (a * a) * 2.0 * rel,
    };
    let note = |e: &str, n: &str| LedgerNote {
        entry: e.to_string(),
        note: n.to_string(),
    };
    FpLedger {
        gamma_order,
        dim_nichols,
        fp_c: gamma_order,
        fp_modules: gamma_order * dim_nichols,
        fp_relative_center: center,
        fp_a_algebraic: dim_nichols,
        fp_a,
        fp_ca,
        fp_ca_loc_bound,
        notes: vec![
            note("fp_c", "regular object of a pointed category: |Gamma| invertible simples of FPdim 1"),
            note(
                "fp_modules",
                "simples C_a have FPdim 1 and projective covers FPdim dim B; regular object gives |Gamma| dim B",
            ),
            note(
                "fp_relative_center",
                "modules over the adjoint algebra of FPdim dim B, with equality for local modules: |Gamma| (dim B)^2",
            ),
            note("fp_a", "quantum dimension from the cusp limit of characters, used as FPdim(A)"),
            note("fp_ca", "FPdim(C_A) = FPdim(ambient) / FPdim(A) with the relative center as ambient"),
            note(
                "fp_ca_loc_bound",
                "FPdim(C_A^loc) >= FPdim(ambient) / FPdim(A)^2, equality iff the braiding is nondegenerate",
            ),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Match,
    Mismatch,
    Inconclusive,
}

impl VerdictKind {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerdictKind::Match => 0,
            VerdictKind::Mismatch => 1,
            VerdictKind::Inconclusive => 2,
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Match => "MATCH",
            VerdictKind::Mismatch => "MISMATCH",
            VerdictKind::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub dim_nichols: u64,
    pub qdim: Estimate,
    /// Absolute tolerance actually applied (`relative_tolerance * dim B`).
    pub tolerance: f64,
    pub text: String,
}

pub const STANDING_HYPOTHESIS: &str =
    "the Frobenius-Perron dimension of the algebra equals its analytic quantum dimension (limit of character ratios at the cusp)";

/// `MATCH` if `|qdim - dim B| <= tol` and `error <= tol`, `MISMATCH` if
/// `|qdim - dim B| > tol + error`, else `INCONCLUSIVE`; `tol = relative_tolerance * dim B`.
pub fn kl_match_verdict(dim_nichols: u64, qdim: Estimate, relative_tolerance: f64) -> Verdict {
    let tol = relative_tolerance * dim_nichols as f64;
    let diff = (qdim.value - dim_nichols as f64).abs();
    let kind = if !qdim.value.is_finite() || !qdim.error.is_finite() {
        VerdictKind::Inconclusive
    } else if diff <= tol && qdim.error <= tol {
        VerdictKind::Match
    } else if diff > tol + qdim.error {
        VerdictKind::Mismatch
    } else {
        VerdictKind::Inconclusive
    };
    let text = format!(
        "{kind}: dim B = {dim_nichols}, quantum dimension {:.6} +/- {:.6}, tolerance {:.6}; assumes {STANDING_HYPOTHESIS}",
        qdim.value, qdim.error, tol
    );
    Verdict {
        kind,
        dim_nichols,
        qdim,
        tolerance: tol,
        text,
    }
}

/// Checks `|Gamma / I| = |Gamma| / |I|` by coset enumeration and
/// `|I^perp / I| = |Gamma| / |I|^2` from the induced form.
pub fn simple_current_fpdim_check(form: &DiscriminantForm, sub: &Subgroup) -> Result<bool, FusionError> {
    let quotient = form.extend_by_isotropic(sub)?;
    let members: Vec<Vec<i64>> = sub.indices().iter().map(|&i| form.element_at(i)).collect();
    let mut cosets: HashSet<Vec<usize>> = HashSet::new();
    for a in form.elements() {
        let mut c: Vec<usize> = members.iter().map(|m| form.index_of(&form.add(&a, m))).collect();
        c.sort_unstable();
        cosets.insert(c);
    }
    let g = form.order() as u128;
    let i = sub.order() as u128;
    let cosets_ok = cosets.len() as u128 * i == g;
    let local_ok = quotient.order() as u128 * i * i == g;
    Ok(cosets_ok && local_ok)
}
