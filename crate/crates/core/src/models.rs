// SPDX-License-Identifier: Apache-2.0

//! Hamiltonian families and warm starts.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::KParams;
use crate::error::{Error, Result};
use crate::operator::PauliSum;
use crate::pauli::PauliString;
use crate::verify::{check_dense_n, eigh, pauli_coefficients, to_dense};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default coefficient cutoff for warm starts.
pub const WARM_START_PRUNE_TOL: f64 = 1e-12;

/// `U = Π_i exp(i c_i P_i)`, first factor leftmost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationProduct {
    factors: Vec<(f64, PauliString)>,
}

impl RotationProduct {
    pub fn new(factors: Vec<(f64, PauliString)>) -> Result<Self> {
        if let Some((_, first)) = factors.first() {
            if let Some((_, bad)) = factors.iter().find(|(_, p)| p.n() != first.n()) {
                return Err(Error::DimensionMismatch {
                    left: first.n(),
                    right: bad.n(),
                });
            }
        }
        Ok(RotationProduct { factors })
    }

    pub fn factors(&self) -> &[(f64, PauliString)] {
        &self.factors
    }

    /// Exact Pauli expansion; each factor is `cos c · I + i sin c · P`.
    pub fn expand_on(&self, n: usize) -> PauliSum {
        let mut u = PauliSum::identity(n);
        for &(c, p) in &self.factors {
            u = u.sum_multiply(&rotation(c, p)).expect("shared qubit count");
        }
        u
    }

    /// Like [`expand_on`](Self::expand_on) using the factors' own qubit count.
    pub fn expand(&self) -> PauliSum {
        let n = self.factors.first().map(|(_, p)| p.n()).unwrap_or(1);
        self.expand_on(n)
    }

    /// `U · a · U†`.
    pub fn conjugate(&self, a: &PauliSum) -> PauliSum {
        self.factors
            .iter()
            .rev()
            .fold(a.clone(), |acc, &(c, p)| conjugate_by_rotation(&acc, c, p))
    }
}

fn rotation(c: f64, p: PauliString) -> PauliSum {
    PauliSum::from_terms(
        p.n(),
        [
            (PauliString::identity(p.n()), Complex64::new(c.cos(), 0.0)),
            (p, Complex64::new(0.0, c.sin())),
        ],
    )
    .expect("same n")
}

/// `e^{icP} A e^{−icP}`: commuting terms are unchanged, anticommuting `Q`
/// maps to `cos(2c) Q + i sin(2c) P Q`.
pub fn conjugate_by_rotation(a: &PauliSum, c: f64, p: PauliString) -> PauliSum {
    let (cos2, sin2) = ((2.0 * c).cos(), (2.0 * c).sin());
    let mut terms = Vec::with_capacity(2 * a.len());
    for &(q, coeff) in a.iter() {
        if p.commutes_unchecked(&q) {
            terms.push((q, coeff));
        } else {
            let (ph, pq) = p.mul_unchecked(&q);
            terms.push((q, coeff * cos2));
            terms.push((pq, ph.apply(coeff * Complex64::new(0.0, sin2))));
        }
    }
    PauliSum::from_terms(a.n(), terms).expect("same n")
}

pub fn expand_rotation_product(rp: &RotationProduct) -> PauliSum {
    rp.expand()
}

/// `J Σ (X_i X_{i+1} + Y_i Y_{i+1}) + Δ Σ Z_i Z_{i+1}`, open boundary.
pub fn build_xxz(n: usize, j: f64, delta: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(Error::invalid(format!("XXZ chain needs n >= 2, got {n}")));
    }
    let mut terms = Vec::with_capacity(3 * (n - 1));
    for i in 0..n - 1 {
        terms.push((PauliString::from_ops(n, &[(i, 'X'), (i + 1, 'X')])?, j));
        terms.push((PauliString::from_ops(n, &[(i, 'Y'), (i + 1, 'Y')])?, j));
        terms.push((PauliString::from_ops(n, &[(i, 'Z'), (i + 1, 'Z')])?, delta));
    }
    PauliSum::from_real_terms(n, terms)
}

/// Qubit of spin orbital `(site, spin)`; spin 0 is up.
pub fn hubbard_qubit(site: usize, spin: usize) -> usize {
    2 * site + spin
}

/// `−t/2 Σ_σ Σ_j (X_{j+1,σ}X_{j,σ} + Y_{j+1,σ}Y_{j,σ}) + U/4 Σ_j (−Z_{j↑} − Z_{j↓} + Z_{j↑}Z_{j↓})`
/// on `2 · sites` qubits, identity term dropped.
pub fn build_hubbard(sites: usize, t: f64, u: f64) -> Result<PauliSum> {
    if sites == 0 {
        return Err(Error::invalid("Hubbard model needs at least one site"));
    }
    let n = 2 * sites;
    let mut terms = Vec::new();
    for spin in 0..2 {
        for j in 0..sites - 1 {
            let (a, b) = (hubbard_qubit(j, spin), hubbard_qubit(j + 1, spin));
            terms.push((PauliString::from_ops(n, &[(a, 'X'), (b, 'X')])?, -t / 2.0));
            terms.push((PauliString::from_ops(n, &[(a, 'Y'), (b, 'Y')])?, -t / 2.0));
        }
    }
    for j in 0..sites {
        let (up, dn) = (hubbard_qubit(j, 0), hubbard_qubit(j, 1));
        terms.push((PauliString::single(n, up, 'Z')?, -u / 4.0));
        terms.push((PauliString::single(n, dn, 'Z')?, -u / 4.0));
        terms.push((PauliString::from_ops(n, &[(up, 'Z'), (dn, 'Z')])?, u / 4.0));
    }
    PauliSum::from_real_terms(n, terms)
}

/// A random `H = U D U†` instance.
#[derive(Clone, Debug)]
pub struct RandomUdu {
    pub h: PauliSum,
    pub u: RotationProduct,
    pub d: PauliSum,
}

/// Diagonal part from `n_diag` distinct non-identity diagonal strings with
/// coefficients in `[−1, 1]`; rotations on `n_rot` distinct off-diagonal
/// strings with angles in `[−π/2, π/2]`.
pub fn build_random_udu(n: usize, n_diag: usize, n_rot: usize, seed: u64) -> Result<RandomUdu> {
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count {n} out of range")));
    }
    if n_diag == 0 {
        return Err(Error::invalid("n_diag must be at least 1"));
    }
    let diag_pool = (1u64 << n) - 1;
    if n_diag as u64 > diag_pool {
        return Err(Error::invalid(format!(
            "only {diag_pool} non-identity diagonal strings exist on {n} qubits"
        )));
    }
    let offdiag_pool = (1u64 << (2 * n)) - (1u64 << n);
    if n_rot as u64 > offdiag_pool {
        return Err(Error::invalid(format!(
            "only {offdiag_pool} off-diagonal strings exist on {n} qubits"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut diag = BTreeSet::new();
    let mut diag_terms = Vec::with_capacity(n_diag);
    while diag_terms.len() < n_diag {
        let z = rng.gen_range(1..=diag_pool) as u32;
        let p = PauliString::from_masks(n, 0, z)?;
        if diag.insert(p) {
            diag_terms.push((p, rng.gen_range(-1.0..=1.0)));
        }
    }
    let d = PauliSum::from_real_terms(n, diag_terms)?;

    let mut seen = BTreeSet::new();
    let mut factors = Vec::with_capacity(n_rot);
    while factors.len() < n_rot {
        let p = PauliString::random(n, &mut rng);
        if !p.is_diagonal() && seen.insert(p) {
            factors.push((rng.gen_range(-FRAC_PI_2..=FRAC_PI_2), p));
        }
    }
    let u = RotationProduct::new(factors)?;
    let h = real_part(&u.conjugate(&d))?;
    Ok(RandomUdu { h, u, d })
}

/// Drops imaginary parts that are rounding noise on a Hermitian sum.
fn real_part(a: &PauliSum) -> Result<PauliSum> {
    PauliSum::from_real_terms(a.n(), a.iter().map(|(p, c)| (*p, c.re)))
}

/// Gates accepted in the optional prefix of the exponential-algebra family.
/// Qubits are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    S { qubit: usize },
    Hadamard { qubit: usize },
    Cnot { control: usize, target: usize },
    Rotation { angle: f64, pauli: PauliString },
}

impl Gate {
    fn to_sum(&self, n: usize) -> Result<PauliSum> {
        let id = PauliString::identity(n);
        let terms = match *self {
            Gate::S { qubit } => vec![
                (id, Complex64::new(0.5, 0.5)),
                (
                    PauliString::single(n, qubit, 'Z')?,
                    Complex64::new(0.5, -0.5),
                ),
            ],
            Gate::Hadamard { qubit } => vec![
                (PauliString::single(n, qubit, 'X')?, ONE * FRAC_1_SQRT_2),
                (PauliString::single(n, qubit, 'Z')?, ONE * FRAC_1_SQRT_2),
            ],
            Gate::Cnot { control, target } => {
                if control == target {
                    return Err(Error::invalid("CNOT control equals target"));
                }
                vec![
                    (id, ONE * 0.5),
                    (PauliString::single(n, control, 'Z')?, ONE * 0.5),
                    (PauliString::single(n, target, 'X')?, ONE * 0.5),
                    (
                        PauliString::from_ops(n, &[(control, 'Z'), (target, 'X')])?,
                        ONE * -0.5,
                    ),
                ]
            }
            Gate::Rotation { angle, pauli } => {
                if pauli.n() != n {
                    return Err(Error::DimensionMismatch {
                        left: n,
                        right: pauli.n(),
                    });
                }
                return Ok(rotation(angle, pauli));
            }
        };
        PauliSum::from_terms(n, terms)
    }
}

#[derive(Clone, Debug)]
pub struct ExampleHams {
    pub h: PauliSum,
    pub u: PauliSum,
    pub d: PauliSum,
}

/// Generators `X₁Y₂, Z₁Y₂, Z₂, X₂Y₃⋯Y_{j−1}Z_j (3 ≤ j ≤ n)` (1-based
/// qubits) of the anticommuting factor.
pub fn anticommuting_generators(n: usize) -> Result<Vec<PauliString>> {
    let mut out = vec![
        PauliString::from_ops(n, &[(0, 'X'), (1, 'Y')])?,
        PauliString::from_ops(n, &[(0, 'Z'), (1, 'Y')])?,
        PauliString::single(n, 1, 'Z')?,
    ];
    for j in 2..n {
        let mut ops = vec![(1, 'X'), (j, 'Z')];
        ops.extend((2..j).map(|q| (q, 'Y')));
        out.push(PauliString::from_ops(n, &ops)?);
    }
    Ok(out)
}

/// `H = U D U†` with `U = prefix · exp(iθZ₂) · Σ_j c_j G_j` over the
/// anticommuting generators and `D = I + Σ_j d_j Y_j`.
///
/// The strings of this `H` close to a proper subalgebra of dimension
/// `2^{n−1}(2^n ± 1)`; see [`build_example_hams_on`] for other axes.
pub fn build_example_hams(
    n: usize,
    theta: f64,
    c: &[f64],
    d: &[f64],
    prefix: &[Gate],
) -> Result<ExampleHams> {
    build_example_hams_on(n, theta, c, d, 'Y', prefix)
}

/// [`build_example_hams`] with `D = I + Σ_j d_j A_j` for `A` one of
/// `X`, `Y`, `Z`. With `X` the strings of `H` generate all `4^n − 1`
/// non-identity strings; with `Z`, `D` is diagonal.
pub fn build_example_hams_on(
    n: usize,
    theta: f64,
    c: &[f64],
    d: &[f64],
    axis: char,
    prefix: &[Gate],
) -> Result<ExampleHams> {
    if !matches!(axis, 'X' | 'Y' | 'Z') {
        return Err(Error::invalid(format!(
            "axis must be X, Y or Z, got {axis:?}"
        )));
    }
    if n < 3 {
        return Err(Error::invalid(format!("n must be at least 3, got {n}")));
    }
    if c.len() != n + 1 {
        return Err(Error::invalid(format!(
            "c must have n + 1 = {} entries, got {}",
            n + 1,
            c.len()
        )));
    }
    if d.len() != n {
        return Err(Error::invalid(format!(
            "d must have n = {n} entries, got {}",
            d.len()
        )));
    }
    if c.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::invalid("every c_j must be finite and nonzero"));
    }
    let norm: f64 = c.iter().map(|v| v * v).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "sum of c_j^2 must be 1, got {norm}"
        )));
    }
    if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::invalid("every d_j must be finite and nonzero"));
    }
    if !theta.is_finite() || theta.sin().abs() < 1e-12 {
        return Err(Error::invalid("theta must not be a multiple of pi"));
    }

    let gens = anticommuting_generators(n)?;
    let a = PauliSum::from_real_terms(n, gens.into_iter().zip(c.iter().copied()))?;
    let mut u = rotation(theta, PauliString::single(n, 1, 'Z')?).sum_multiply(&a)?;
    for g in prefix.iter().rev() {
        u = g.to_sum(n)?.sum_multiply(&u)?;
    }
    let mut dterms = vec![(PauliString::identity(n), 1.0)];
    for (q, &dq) in d.iter().enumerate() {
        dterms.push((PauliString::single(n, q, axis)?, dq));
    }
    let dsum = PauliSum::from_real_terms(n, dterms)?;
    let h = real_part(&u.sum_multiply(&dsum)?.sum_multiply(&u.dagger())?)?;
    Ok(ExampleHams { h, u, d: dsum })
}

/// Pauli expansion of a dense eigenvector matrix of `h`, used as a starting
/// point for a nearby Hamiltonian.
pub fn warm_start_from_dense(h: &PauliSum, prune_tol: f64) -> Result<KParams> {
    let n = h.n();
    check_dense_n(n)?;
    let (_, vecs) = eigh(to_dense(h)?.matrix());
    let k = pauli_coefficients(&vecs, n);
    let (ansatz, coeffs): (Vec<_>, Vec<_>) = k
        .iter()
        .filter(|(_, c)| c.norm() >= prune_tol)
        .copied()
        .unzip();
    if ansatz.is_empty() {
        return Err(Error::invalid("prune tolerance removed every term"));
    }
    KParams::from_coefficients(ansatz, &coeffs)?.normalized()
}

/// Adds independent uniform noise of amplitude `scale` to every `r_j` and
/// `θ_j`, then renormalizes `r`.
pub fn perturb(kp: &KParams, scale: f64, seed: u64) -> Result<KParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = kp
        .r()
        .iter()
        .map(|v| v + scale * rng.gen_range(-1.0..=1.0))
        .collect();
    let theta = kp
        .theta()
        .iter()
        .map(|v| v + scale * rng.gen_range(-1.0..=1.0))
        .collect();
    kp.with_params(r, theta)?.normalized()
}

/// `count` distinct random strings, identity first when `with_identity`.
pub fn random_ansatz(
    n: usize,
    count: usize,
    with_identity: bool,
    seed: u64,
) -> Result<Vec<PauliString>> {
    if count as u64 > (1u64 << (2 * n)) {
        return Err(Error::invalid("more ansatz strings requested than exist"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    if with_identity && count > 0 {
        seen.insert(PauliString::identity(n));
        out.push(PauliString::identity(n));
    }
    while out.len() < count {
        let p = PauliString::random(n, &mut rng);
        if seen.insert(p) {
            out.push(p);
        }
    }
    out[usize::from(with_identity)..].shuffle(&mut rng);
    Ok(out)
}

/// A Hamiltonian family with its parameters, as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Xxz {
        n: usize,
        #[serde(default = "one")]
        j: f64,
        delta: f64,
    },
    Hubbard {
        sites: usize,
        #[serde(default = "one")]
        t: f64,
        u: f64,
    },
    RandomUdu {
        n: usize,
        n_diag: usize,
        n_rot: usize,
        #[serde(default)]
        seed: u64,
    },
    ExampleHams {
        n: usize,
        theta: f64,
        c: Vec<f64>,
        d: Vec<f64>,
        #[serde(default)]
        prefix: Vec<Gate>,
        /// Pauli axis of the `d_j` terms.
        #[serde(default = "y_axis")]
        d_axis: char,
    },
    /// A Hamiltonian read from a text file.
    File { path: std::path::PathBuf },
}

fn one() -> f64 {
    1.0
}

fn y_axis() -> char {
    'Y'
}

/// A built model: the Hamiltonian and, when the family provides one, its
/// known diagonalizing unitary.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub h: PauliSum,
    pub unitary: Option<PauliSum>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel> {
        Ok(match self {
            ModelSpec::Xxz { n, j, delta } => BuiltModel {
                h: build_xxz(*n, *j, *delta)?,
                unitary: None,
            },
            ModelSpec::Hubbard { sites, t, u } => BuiltModel {
                h: build_hubbard(*sites, *t, *u)?,
                unitary: None,
            },
            ModelSpec::RandomUdu {
                n,
                n_diag,
                n_rot,
                seed,
            } => {
                let inst = build_random_udu(*n, *n_diag, *n_rot, *seed)?;
                BuiltModel {
                    unitary: Some(inst.u.expand_on(*n)),
                    h: inst.h,
                }
            }
            ModelSpec::ExampleHams {
                n,
                theta,
                c,
                d,
                prefix,
                d_axis,
            } => {
                let ex = build_example_hams_on(*n, *theta, c, d, *d_axis, prefix)?;
                BuiltModel {
                    h: ex.h,
                    unitary: Some(ex.u),
                }
            }
            ModelSpec::File { path } => BuiltModel {
                h: PauliSum::read_file(path)?,
                unitary: None,
            },
        })
    }

    /// The same spec with its seed (if any) replaced.
    pub fn with_seed(&self, seed: u64) -> ModelSpec {
        match self {
            ModelSpec::RandomUdu {
                n, n_diag, n_rot, ..
            } => ModelSpec::RandomUdu {
                n: *n,
                n_diag: *n_diag,
                n_rot: *n_rot,
                seed,
            },
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{spectral_norm_hermitian, DenseOperator};
    use nalgebra::DMatrix;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn dense(a: &PauliSum) -> DMatrix<Complex64> {
        to_dense(a).unwrap().into_matrix()
    }

    fn sorted_eigs(a: &DMatrix<Complex64>) -> Vec<f64> {
        eigh(a).0
    }

    #[test]
    fn xxz_terms() {
        let h = build_xxz(2, 1.0, 1.0).unwrap();
        let expect =
            PauliSum::from_real_terms(2, [(ps("XX"), 1.0), (ps("YY"), 1.0), (ps("ZZ"), 1.0)])
                .unwrap();
        assert_eq!(h, expect);
        assert_eq!(build_xxz(4, 1.0, 0.5).unwrap().len(), 9);
        assert!(build_xxz(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn xxz_spectrum() {
        // Open Heisenberg chain, 4 sites, Σ σ·σ: the singlet ground state sits at
        // −3 − 2√3 and the fully polarized multiplet at +3.
        let h = build_xxz(4, 1.0, 1.0).unwrap();
        let e = sorted_eigs(&dense(&h));
        assert!((e[0] - (-3.0 - 2.0 * 3f64.sqrt())).abs() < 1e-10);
        assert!((e[15] - 3.0).abs() < 1e-10);
        // SU(2) symmetry: the +3 level is the 5-fold spin-2 multiplet.
        assert_eq!(e.iter().filter(|v| (*v - 3.0).abs() < 1e-9).count(), 5);
        assert!(e.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn hubbard_terms() {
        let h = build_hubbard(2, 1.0, 4.0).unwrap();
        assert_eq!(h.len(), 10);
        let count = |v: f64| h.iter().filter(|(_, c)| (c.re - v).abs() < 1e-15).count();
        assert_eq!(count(-0.5), 4);
        assert_eq!(count(-1.0), 4);
        assert_eq!(count(1.0), 2);
        assert_eq!(h.coeff(&ps("XIXI")).re, -0.5);
        assert_eq!(h.coeff(&ps("ZZII")).re, 1.0);
        assert_eq!(build_hubbard(1, 1.0, 4.0).unwrap().len(), 3);
    }

    #[test]
    fn hubbard_spin_swap() {
        let h = build_hubbard(3, 1.0, 2.5).unwrap();
        let n = h.n();
        let swapped = PauliSum::from_terms(
            n,
            h.iter().map(|(p, c)| {
                let ops: Vec<_> = (0..n).map(|q| (q ^ 1, p.op_at(q))).collect();
                (PauliString::from_ops(n, &ops).unwrap(), *c)
            }),
        )
        .unwrap();
        assert_eq!(swapped, h);
        let small = build_hubbard(2, 1.0, 3.0).unwrap();
        let e = sorted_eigs(&dense(&small));
        let swapped_small = PauliSum::from_terms(
            4,
            small.iter().map(|(p, c)| {
                let ops: Vec<_> = (0..4).map(|q| (q ^ 1, p.op_at(q))).collect();
                (PauliString::from_ops(4, &ops).unwrap(), *c)
            }),
        )
        .unwrap();
        let e2 = sorted_eigs(&dense(&swapped_small));
        assert!(e.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn rotation_expansion() {
        assert_eq!(
            RotationProduct::new(vec![]).unwrap().expand_on(2),
            PauliSum::identity(2)
        );
        let u = RotationProduct::new(vec![(std::f64::consts::FRAC_PI_4, ps("X"))])
            .unwrap()
            .expand();
        assert!((u.coeff(&ps("I")) - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((u.coeff(&ps("X")) - Complex64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);

        let rp = RotationProduct::new(vec![(0.3, ps("XY")), (-0.8, ps("ZX"))]).unwrap();
        let mut expect = DMatrix::<Complex64>::identity(4, 4);
        for &(c, p) in rp.factors() {
            let dp = dense(&PauliSum::single(p, ONE));
            let f = DMatrix::<Complex64>::identity(4, 4) * Complex64::new(c.cos(), 0.0)
                + dp * Complex64::new(0.0, c.sin());
            expect *= f;
        }
        assert!((dense(&rp.expand()) - expect).norm() < 1e-12);
    }

    #[test]
    fn random_udu() {
        let inst = build_random_udu(4, 3, 0, 1).unwrap();
        assert_eq!(inst.h, inst.d);
        assert!(build_random_udu(2, 4, 1, 0).is_err());

        for seed in 0..5 {
            let inst = build_random_udu(5, 4, 2, seed).unwrap();
            assert!(inst.h.len() <= 16);
            assert!(inst.h.is_hermitian());
            assert!(inst
                .d
                .iter()
                .all(|(p, _)| p.is_diagonal() && !p.is_identity()));
            assert!(inst
                .u
                .factors()
                .iter()
                .all(|(c, p)| !p.is_diagonal() && c.abs() <= FRAC_PI_2));
            let u = dense(&inst.u.expand());
            let dd = dense(&inst.d);
            assert!((&u * &dd * u.adjoint() - dense(&inst.h)).norm() < 1e-10);
            let e1 = sorted_eigs(&dense(&inst.h));
            let mut e2: Vec<f64> = dd.diagonal().iter().map(|z| z.re).collect();
            e2.sort_by(f64::total_cmp);
            assert!(e1.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-10));
        }
        // Same seed, same instance.
        assert_eq!(
            build_random_udu(6, 4, 4, 9).unwrap().h,
            build_random_udu(6, 4, 4, 9).unwrap().h
        );
    }

    fn valid_c(n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..=n).map(|j| 0.3 + 0.17 * j as f64).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn example_hams() {
        let gens = anticommuting_generators(5).unwrap();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                assert!(!a.commutes_unchecked(b), "{a} and {b} commute");
            }
        }
        let n = 3;
        let c = valid_c(n);
        let ex = build_example_hams(n, 0.7, &c, &[0.5, -0.4, 0.9], &[]).unwrap();
        let u = dense(&ex.u);
        assert!((u.adjoint() * &u - DMatrix::<Complex64>::identity(8, 8)).norm() < 1e-10);
        let id = ex.u.coeff(&PauliString::identity(n));
        assert!((id - Complex64::new(0.0, c[2] * 0.7f64.sin())).norm() < 1e-12);
        assert!(ex.h.is_hermitian());
        for q in 0..n {
            assert!(ex.h.coeff(&PauliString::single(n, q, 'Y').unwrap()).norm() > 1e-12 || q == 1);
        }
        let hd = dense(&ex.h);
        assert!((hd.clone() - &u * dense(&ex.d) * u.adjoint()).norm() < 1e-10);
        let _ = DenseOperator::new(n, hd).unwrap();
    }

    #[test]
    fn example_hams_with_prefix() {
        let c = valid_c(4);
        let prefix = vec![
            Gate::Hadamard { qubit: 0 },
            Gate::S { qubit: 2 },
            Gate::Cnot {
                control: 1,
                target: 3,
            },
            Gate::Rotation {
                angle: 0.4,
                pauli: ps("XYIZ"),
            },
        ];
        let ex = build_example_hams(4, 1.1, &c, &[0.2, 0.3, -0.5, 0.7], &prefix).unwrap();
        let u = dense(&ex.u);
        assert!((u.adjoint() * &u - DMatrix::<Complex64>::identity(16, 16)).norm() < 1e-10);
        let e1 = sorted_eigs(&dense(&ex.h));
        let e2 = sorted_eigs(&dense(&ex.d));
        assert!(e1.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn example_hams_closure_by_axis() {
        use crate::verify::lie_closure_dim;
        let c = valid_c(3);
        let d = [0.5, -0.4, 0.9];
        let dim = |axis| {
            let ex = build_example_hams_on(3, 0.7, &c, &d, axis, &[]).unwrap();
            let gens: Vec<PauliString> = ex.h.strings().collect();
            lie_closure_dim(&gens, 1 << 12).unwrap().dim
        };
        assert_eq!(dim('Y'), 36);
        assert_eq!(dim('X'), 63);
        assert!(build_example_hams_on(3, 0.7, &c, &d, 'Q', &[]).is_err());
    }

    #[test]
    fn example_hams_preconditions() {
        let c = valid_c(3);
        let d = [0.5, -0.4, 0.9];
        assert!(build_example_hams(2, 0.7, &c[..3], &d[..2], &[]).is_err());
        assert!(build_example_hams(3, std::f64::consts::PI, &c, &d, &[]).is_err());
        assert!(build_example_hams(3, 0.7, &[0.5, 0.5, 0.5, 0.5001], &d, &[]).is_err());
        let mut with_zero = c.clone();
        with_zero[1] = 0.0;
        assert!(build_example_hams(3, 0.7, &with_zero, &d, &[]).is_err());
        assert!(build_example_hams(3, 0.7, &c, &[0.5, 0.0, 0.9], &[]).is_err());
    }

    #[test]
    fn warm_start() {
        let h = build_xxz(3, 1.0, 0.6).unwrap();
        let (_, vecs) = eigh(&dense(&h));
        assert!((vecs.adjoint() * &vecs - DMatrix::<Complex64>::identity(8, 8)).norm() < 1e-10);
        let kp = warm_start_from_dense(&h, WARM_START_PRUNE_TOL).unwrap();
        assert!((kp.r_norm() - 1.0).abs() < 1e-12);
        let k = dense(&kp.to_sum());
        let khk = k.adjoint() * dense(&h) * &k;
        let off = &khk - DMatrix::from_diagonal(&khk.diagonal());
        assert!(off.norm() < 1e-10);
        assert!(
            spectral_norm_hermitian(&(k.adjoint() * &k - DMatrix::<Complex64>::identity(8, 8)))
                < 1e-10
        );

        let diag = PauliSum::from_real_terms(2, [(ps("ZI"), 1.0), (ps("IZ"), 0.3)]).unwrap();
        // Nondegenerate diagonal H: the eigenvector matrix is a permutation.
        let kp = warm_start_from_dense(&diag, 1e-9).unwrap();
        let k = dense(&kp.to_sum());
        assert!(k
            .iter()
            .all(|z| z.norm() < 1e-12 || (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn model_spec_toml() {
        let spec: ModelSpec = toml::from_str("family = \"xxz\"\nn = 4\ndelta = 0.8\n").unwrap();
        assert_eq!(
            spec,
            ModelSpec::Xxz {
                n: 4,
                j: 1.0,
                delta: 0.8
            }
        );
        let spec: ModelSpec = toml::from_str(
            "family = \"example_hams\"\nn = 3\ntheta = 0.7\nc = [0.5, 0.5, 0.5, 0.5]\nd = [1, 2, 3]\n\
             [[prefix]]\ngate = \"cnot\"\ncontrol = 0\ntarget = 2\n",
        )
        .unwrap();
        let built = spec.build().unwrap();
        assert!(built.unitary.is_some());
        assert!(
            toml::from_str::<ModelSpec>("family = \"xxz\"\nn = 4\ndelta = 0.8\nbogus = 1\n")
                .is_err()
        );
    }
}
