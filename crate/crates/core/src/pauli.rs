// SPDX-License-Identifier: Apache-2.0

//! n-qubit Pauli strings in symplectic `(x, z)` form.
//!
//! Qubit `q` lives in bit `q` of both masks and is printed as the `q`-th
//! character from the left. A string with bits `(x, z)` stands for the
//! Hermitian operator `i^{|x & z|} X^x Z^z`, so a set bit in both masks is a
//! `Y` on that qubit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported qubit count; masks are `u32`.
pub const MAX_QUBITS: usize = 24;

/// A power of `i`, stored as the exponent mod 4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    #[inline]
    pub fn exponent(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn conj(self) -> Self {
        Phase((4 - self.0) & 3)
    }

    #[inline]
    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// `z · i^k` without a complex multiply.
    #[inline]
    pub fn apply(self, z: Complex64) -> Complex64 {
        match self.0 {
            0 => z,
            1 => Complex64::new(-z.im, z.re),
            2 => -z,
            _ => Complex64::new(z.im, -z.re),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    #[inline]
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) & 3)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["+1", "+i", "-1", "-i"][self.0 as usize])
    }
}

/// A tensor product of single-qubit Paulis on `n` qubits.
///
/// Ordering is by `(x_mask, z_mask)` and is what every sorted collection in
/// this crate iterates by.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    x: u32,
    z: u32,
    n: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(
            (1..=MAX_QUBITS).contains(&n),
            "qubit count {n} out of range"
        );
        PauliString {
            x: 0,
            z: 0,
            n: n as u8,
        }
    }

    pub fn from_masks(n: usize, x_mask: u32, z_mask: u32) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {n} out of range 1..={MAX_QUBITS}"
            )));
        }
        let full = low_mask(n);
        if x_mask & !full != 0 || z_mask & !full != 0 {
            return Err(Error::invalid(format!(
                "mask bits set above qubit {}",
                n - 1
            )));
        }
        Ok(PauliString {
            x: x_mask,
            z: z_mask,
            n: n as u8,
        })
    }

    /// Single-qubit operator `op` (one of `IXYZ`) on `qubit`.
    pub fn single(n: usize, qubit: usize, op: char) -> Result<Self> {
        Self::from_ops(n, &[(qubit, op)])
    }

    /// Builds a string from `(qubit, op)` pairs; unlisted qubits carry `I`.
    pub fn from_ops(n: usize, ops: &[(usize, char)]) -> Result<Self> {
        let mut p = Self::from_masks(n, 0, 0)?;
        for &(q, c) in ops {
            if q >= n {
                return Err(Error::invalid(format!(
                    "qubit {q} out of range for n = {n}"
                )));
            }
            let (xb, zb) =
                char_bits(c).ok_or_else(|| Error::invalid(format!("bad Pauli '{c}'")))?;
            let bit = 1u32 << q;
            p.x = (p.x & !bit) | if xb { bit } else { 0 };
            p.z = (p.z & !bit) | if zb { bit } else { 0 };
        }
        Ok(p)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let full = low_mask(n);
        PauliString {
            x: rng.gen::<u32>() & full,
            z: rng.gen::<u32>() & full,
            n: n as u8,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn x_mask(&self) -> u32 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u32 {
        self.z
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True iff every factor is `I` or `Z`.
    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Single-qubit factor at `qubit` as one of `IXYZ`.
    pub fn op_at(&self, qubit: usize) -> char {
        let bit = 1u32 << qubit;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    #[inline]
    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Product `self · rhs = phase · result`.
    pub fn multiply(&self, rhs: &PauliString) -> Result<(Phase, PauliString)> {
        if self.n != rhs.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: rhs.n(),
            });
        }
        Ok(self.mul_unchecked(rhs))
    }

    /// [`multiply`](Self::multiply) without the qubit-count check.
    #[inline]
    pub fn mul_unchecked(&self, rhs: &PauliString) -> (Phase, PauliString) {
        let out = PauliString {
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            n: self.n,
        };
        let k =
            self.y_count() + rhs.y_count() + 2 * (self.z & rhs.x).count_ones() + 3 * out.y_count();
        (Phase((k & 3) as u8), out)
    }

    pub fn commutes(&self, rhs: &PauliString) -> Result<bool> {
        if self.n != rhs.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: rhs.n(),
            });
        }
        Ok(self.commutes_unchecked(rhs))
    }

    #[inline]
    pub fn commutes_unchecked(&self, rhs: &PauliString) -> bool {
        ((self.x & rhs.z).count_ones() + (self.z & rhs.x).count_ones()).is_multiple_of(2)
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let p: PauliString = text.parse()?;
        if p.n() != n {
            return Err(Error::Parse {
                position: p.n().min(n),
                message: format!("expected {n} characters, found {}", p.n()),
            });
        }
        Ok(p)
    }

    /// Action on a computational basis column, with qubit 0 as the most
    /// significant bit of the matrix index: returns `(row, phase)` such that
    /// `P |col⟩ = phase |row⟩`.
    #[inline]
    pub fn apply_to_basis(&self, col: usize) -> (usize, Phase) {
        let n = self.n();
        let (xm, zm) = (
            reverse_bits(self.x, n) as usize,
            reverse_bits(self.z, n) as usize,
        );
        let sign = 2 * ((zm & col).count_ones() & 1);
        (col ^ xm, Phase(((self.y_count() + sign) & 3) as u8))
    }

    /// Iterates all `4^n` strings in canonical order. Intended for small `n`.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        let size = 1u64 << n;
        (0..size).flat_map(move |x| {
            (0..size).map(move |z| PauliString {
                x: x as u32,
                z: z as u32,
                n: n as u8,
            })
        })
    }
}

#[inline]
fn low_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

#[inline]
fn reverse_bits(mask: u32, n: usize) -> u32 {
    if mask == 0 {
        0
    } else {
        mask.reverse_bits() >> (32 - n)
    }
}

fn char_bits(c: char) -> Option<(bool, bool)> {
    match c {
        'I' => Some((false, false)),
        'X' => Some((true, false)),
        'Y' => Some((true, true)),
        'Z' => Some((false, true)),
        _ => None,
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let n = text.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Parse {
                position: 0,
                message: format!("length {n} out of range 1..={MAX_QUBITS}"),
            });
        }
        let (mut x, mut z) = (0u32, 0u32);
        for (pos, c) in text.chars().enumerate() {
            let (xb, zb) = char_bits(c).ok_or_else(|| Error::Parse {
                position: pos,
                message: format!("unexpected character '{c}'"),
            })?;
            x |= (xb as u32) << pos;
            z |= (zb as u32) << pos;
        }
        Ok(PauliString { x, z, n: n as u8 })
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n() {
            write!(f, "{}", self.op_at(q))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    // Independent kron-product construction, deliberately not using
    // `apply_to_basis`.
    fn dense(p: &PauliString) -> DMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut m = DMatrix::from_element(1, 1, one);
        for q in 0..p.n() {
            let s = match p.op_at(q) {
                'I' => DMatrix::from_row_slice(2, 2, &[one, zero, zero, one]),
                'X' => DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
                'Y' => DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
                _ => DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]),
            };
            m = m.kronecker(&s);
        }
        m
    }

    fn assert_dense_product(a: &PauliString, b: &PauliString) {
        let (ph, c) = a.multiply(b).unwrap();
        let lhs = dense(a) * dense(b);
        let rhs = dense(&c) * ph.to_complex();
        assert!((lhs - rhs).norm() < 1e-12, "{a} * {b}");
    }

    #[test]
    fn single_qubit_table() {
        assert_eq!(p("X").multiply(&p("Y")).unwrap(), (Phase::I, p("Z")));
        assert_eq!(p("Y").multiply(&p("X")).unwrap(), (Phase::MINUS_I, p("Z")));
        assert_eq!(p("Z").multiply(&p("X")).unwrap(), (Phase::I, p("Y")));
        assert_eq!(p("Y").multiply(&p("Z")).unwrap(), (Phase::I, p("X")));
        for s in ["I", "X", "Y", "Z", "XZYI"] {
            let a = p(s);
            let id = PauliString::identity(a.n());
            assert_eq!(a.multiply(&id).unwrap(), (Phase::ONE, a));
            assert_eq!(a.multiply(&a).unwrap(), (Phase::ONE, id));
        }
    }

    #[test]
    fn two_qubit_product_matches_dense() {
        assert_dense_product(&p("XZ"), &p("YX"));
        let (ph, c) = p("XZ").multiply(&p("YX")).unwrap();
        // XY ⊗ ZX = (iZ) ⊗ (iY) = -ZY
        assert_eq!((ph, c), (Phase::MINUS_ONE, p("ZY")));
    }

    #[test]
    fn exhaustive_dense_equivalence_small() {
        for n in 1..=2 {
            let all: Vec<_> = PauliString::all(n).collect();
            for a in &all {
                for b in &all {
                    assert_dense_product(a, b);
                }
            }
        }
    }

    #[test]
    fn commutation() {
        assert!(p("X").commutes(&p("X")).unwrap());
        assert!(!p("X").commutes(&p("Z")).unwrap());
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(p("XI").commutes(&p("YX")).is_ok_and(|c| !c));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            p("X").multiply(&p("XX")),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(p("X").commutes(&p("XX")).is_err());
    }

    #[test]
    fn diagonal_detection() {
        assert!(p("ZIZZ").is_diagonal());
        assert!(!p("ZIYZ").is_diagonal());
        assert!(PauliString::identity(3).is_diagonal());
    }

    #[test]
    fn text_encoding() {
        let s = p("XIYZ");
        assert_eq!(s.x_mask(), 0b0101);
        assert_eq!(s.z_mask(), 0b1100);
        assert_eq!(s.to_string(), "XIYZ");
        assert!(p("IIII").is_identity());
        match "Q".parse::<PauliString>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 0),
            other => panic!("unexpected {other:?}"),
        }
        match "XXQ".parse::<PauliString>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(PauliString::parse("XX", 3).is_err());
    }

    #[test]
    fn basis_action_matches_dense() {
        let mut rng = rand::thread_rng();
        for _ in 0..20 {
            let a = PauliString::random(3, &mut rng);
            let d = dense(&a);
            for col in 0..8 {
                let (row, ph) = a.apply_to_basis(col);
                assert!((d[(row, col)] - ph.to_complex()).norm() < 1e-15);
            }
        }
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        (0u32..(1 << n), 0u32..(1 << n))
            .prop_map(move |(x, z)| PauliString::from_masks(n, x, z).unwrap())
    }

    proptest! {
        #[test]
        fn associative(a in arb_pauli(6), b in arb_pauli(6), c in arb_pauli(6)) {
            let (p1, ab) = a.mul_unchecked(&b);
            let (p2, abc) = ab.mul_unchecked(&c);
            let (q1, bc) = b.mul_unchecked(&c);
            let (q2, abc2) = a.mul_unchecked(&bc);
            prop_assert_eq!(abc, abc2);
            prop_assert_eq!(p1 * p2, q1 * q2);
        }

        #[test]
        fn anticommutation_is_phase_two(a in arb_pauli(8), b in arb_pauli(8)) {
            let (pab, _) = a.mul_unchecked(&b);
            let (pba, _) = b.mul_unchecked(&a);
            let differ_by_two = (pab.exponent() + 4 - pba.exponent()) % 4 == 2;
            prop_assert_eq!(!a.commutes_unchecked(&b), differ_by_two);
            if !differ_by_two {
                prop_assert_eq!(pab, pba);
            }
        }

        #[test]
        fn text_round_trip(a in arb_pauli(10)) {
            let s = a.to_string();
            prop_assert_eq!(PauliString::parse(&s, 10).unwrap(), a);
        }

        #[test]
        fn sampled_three_qubit_dense(a in arb_pauli(3), b in arb_pauli(3)) {
            assert_dense_product(&a, &b);
        }

        #[test]
        fn commutes_matches_dense_commutator(a in arb_pauli(6), b in arb_pauli(6)) {
            let (da, db) = (dense(&a), dense(&b));
            let comm = &da * &db - &db * &da;
            prop_assert_eq!(a.commutes_unchecked(&b), comm.norm() < 1e-12);
        }
    }
}
