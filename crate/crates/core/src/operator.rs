// SPDX-License-Identifier: Apache-2.0

//! Sparse Pauli-sum operators and the support sets of the diagonalization
//! cost.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, Phase};

/// Coefficients with magnitude below this are dropped after every merge.
pub const PRUNE_TOL: f64 = 1e-14;

/// Tolerance on imaginary parts for [`PauliSum::is_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A linear combination of Pauli strings with complex coefficients, kept
/// sorted by canonical string order.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(PauliString, Complex64)>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        PauliSum {
            n,
            terms: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::single(PauliString::identity(n), Complex64::new(1.0, 0.0))
    }

    pub fn single(p: PauliString, coeff: Complex64) -> Self {
        Self::from_terms(p.n(), [(p, coeff)]).expect("same qubit count")
    }

    /// Merges repeated strings and prunes negligible coefficients.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (p, c) in terms {
            if p.n() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: p.n(),
                });
            }
            *acc.entry(p).or_default() += c;
        }
        Ok(Self::from_sorted(n, acc.into_iter()))
    }

    pub fn from_real_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        Self::from_terms(
            n,
            terms.into_iter().map(|(p, c)| (p, Complex64::new(c, 0.0))),
        )
    }

    fn from_sorted(n: usize, it: impl Iterator<Item = (PauliString, Complex64)>) -> Self {
        PauliSum {
            n,
            terms: it.filter(|(_, c)| c.norm() >= PRUNE_TOL).collect(),
        }
    }

    fn from_map(n: usize, map: HashMap<PauliString, Complex64>) -> Self {
        let mut terms: Vec<_> = map
            .into_iter()
            .filter(|(_, c)| c.norm() >= PRUNE_TOL)
            .collect();
        terms.sort_unstable_by_key(|a| a.0);
        PauliSum { n, terms }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (nonzero) terms.
    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &(PauliString, Complex64)> {
        self.terms.iter()
    }

    pub fn strings(&self) -> impl Iterator<Item = PauliString> + '_ {
        self.terms.iter().map(|(p, _)| *p)
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        self.terms
            .binary_search_by(|(q, _)| q.cmp(p))
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    pub fn is_hermitian(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.im.abs() <= HERMITIAN_TOL)
    }

    /// Adjoint; Pauli strings are self-adjoint so only coefficients change.
    pub fn dagger(&self) -> Self {
        PauliSum {
            n: self.n,
            terms: self.terms.iter().map(|(p, c)| (*p, c.conj())).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_sorted(self.n, self.terms.iter().map(|(p, c)| (*p, c * s)))
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        check_n(self.n, other.n)?;
        Self::from_terms(self.n, self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn sub(&self, other: &PauliSum) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Distributed product with phase tracking.
    pub fn sum_multiply(&self, rhs: &PauliSum) -> Result<PauliSum> {
        check_n(self.n, rhs.n)?;
        let mut acc: HashMap<PauliString, Complex64> =
            HashMap::with_capacity(self.len() * rhs.len());
        for (pa, ca) in &self.terms {
            for (pb, cb) in &rhs.terms {
                let (ph, pc) = pa.mul_unchecked(pb);
                *acc.entry(pc).or_default() += ph.apply(ca * cb);
            }
        }
        Ok(Self::from_map(self.n, acc))
    }

    /// `K† · self · K`.
    pub fn conjugate(&self, k: &PauliSum) -> Result<PauliSum> {
        k.dagger().sum_multiply(self)?.sum_multiply(k)
    }

    /// Unnormalized `tr(A · P) = 2^n · a_P`, real part only (the value is
    /// real whenever `A` is Hermitian).
    pub fn trace_with(&self, p: &PauliString) -> f64 {
        self.trace_with_complex(p).re
    }

    pub fn trace_with_complex(&self, p: &PauliString) -> Complex64 {
        self.coeff(p) * (self.n as f64).exp2()
    }

    /// `‖A‖_F² = 2^n Σ |a_P|²`.
    pub fn frobenius_norm_sq(&self) -> f64 {
        (self.n as f64).exp2() * self.terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>()
    }

    /// Terms on diagonal strings only.
    pub fn diagonal_part(&self) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| p.is_diagonal())
                .copied()
                .collect(),
        }
    }

    pub fn off_diagonal_part(&self) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| !p.is_diagonal())
                .copied()
                .collect(),
        }
    }

    /// Parses the text Hamiltonian format: one `<real coefficient> <pauli
    /// word>` per line, `#` starts a comment, blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<PauliSum> {
        let mut n: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(c), Some(w), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Format {
                    line: line_no,
                    message: "expected '<coefficient> <pauli word>'".into(),
                });
            };
            let coeff: f64 = c.parse().map_err(|_| Error::Format {
                line: line_no,
                message: format!("bad coefficient '{c}'"),
            })?;
            if !coeff.is_finite() {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("non-finite coefficient '{c}'"),
                });
            }
            let p: PauliString = w.parse::<PauliString>().map_err(|e: Error| Error::Format {
                line: line_no,
                message: e.to_string(),
            })?;
            match n {
                None => n = Some(p.n()),
                Some(m) if m != p.n() => {
                    return Err(Error::Format {
                        line: line_no,
                        message: format!("word has {} qubits, expected {m}", p.n()),
                    })
                }
                _ => {}
            }
            terms.push((p, Complex64::new(coeff, 0.0)));
        }
        let n = n.ok_or(Error::Format {
            line: 0,
            message: "no terms".into(),
        })?;
        Self::from_terms(n, terms)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<PauliSum> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    /// Serializes the real parts in the text Hamiltonian format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.terms {
            let _ = writeln!(out, "{:.17e} {}", c.re, p);
        }
        out
    }
}

#[inline]
fn check_n(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

/// One way of realizing an orthogonality string: `P_{partner} P_j = phase · P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub j: usize,
    pub partner: usize,
    pub phase: Phase,
}

/// Index sets of the cost: `g1` holds the off-diagonal strings reachable as
/// `P_a Q_m P_b`, `g2` the non-identity products `P_i P_j` of ansatz strings
/// together with the pairs that realize each of them.
#[derive(Clone, Debug)]
pub struct SupportSets {
    pub g1: Vec<PauliString>,
    pub g2: Vec<PauliString>,
    pub g2_pairs: Vec<Vec<PairEntry>>,
}

impl SupportSets {
    pub fn g2_index(&self, p: &PauliString) -> Option<usize> {
        self.g2.binary_search(p).ok()
    }

    pub fn g1_contains(&self, p: &PauliString) -> bool {
        self.g1.binary_search(p).is_ok()
    }
}

pub(crate) fn check_ansatz(n: usize, ansatz: &[PauliString]) -> Result<()> {
    if ansatz.is_empty() {
        return Err(Error::invalid("ansatz must contain at least one string"));
    }
    let mut seen = BTreeSet::new();
    for p in ansatz {
        check_n(n, p.n())?;
        if !seen.insert(*p) {
            return Err(Error::invalid(format!("duplicate ansatz string {p}")));
        }
    }
    Ok(())
}

/// Computes `g1` from the closure `{P_a Q_m P_b}` and `g2` with its pair
/// tables.
pub fn build_support_sets(h: &PauliSum, ansatz: &[PauliString]) -> Result<SupportSets> {
    check_ansatz(h.n(), ansatz)?;
    let mut g1 = BTreeSet::new();
    for pa in ansatz {
        for (q, _) in h.iter() {
            let (_, aq) = pa.mul_unchecked(q);
            for pb in ansatz {
                let (_, s) = aq.mul_unchecked(pb);
                if !s.is_diagonal() {
                    g1.insert(s);
                }
            }
        }
    }
    let mut pairs: BTreeMap<PauliString, Vec<PairEntry>> = BTreeMap::new();
    for (j, pj) in ansatz.iter().enumerate() {
        for (partner, pp) in ansatz.iter().enumerate() {
            let (phase, s) = pp.mul_unchecked(pj);
            if !s.is_identity() {
                pairs
                    .entry(s)
                    .or_default()
                    .push(PairEntry { j, partner, phase });
            }
        }
    }
    let (g2, g2_pairs) = pairs.into_iter().unzip();
    Ok(SupportSets {
        g1: g1.into_iter().collect(),
        g2,
        g2_pairs,
    })
}
