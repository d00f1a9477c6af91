// SPDX-License-Identifier: Apache-2.0

//! Dense ground truth for small systems, a posteriori error bounds,
//! eigenspace projector distances and Pauli Lie-algebra closure.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cost::KParams;
use crate::error::{Error, Result};
use crate::operator::PauliSum;
use crate::pauli::PauliString;

/// Qubit limit for anything that materializes a `2^n × 2^n` matrix.
pub const DENSE_LIMIT: usize = 12;

/// Qubit limit for projector comparisons.
pub const PROJECTOR_LIMIT: usize = 10;

/// Relative eigenvalue grouping threshold (times `‖H‖₂`).
pub const DEGENERACY_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DenseOperator {
    n: usize,
    m: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(n: usize, m: DMatrix<Complex64>) -> Result<Self> {
        check_dense_n(n)?;
        let dim = 1usize << n;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(DenseOperator { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }
}

/// Fails with [`Error::DenseInfeasible`] above [`DENSE_LIMIT`] qubits.
pub fn check_dense_n(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(Error::DenseInfeasible {
            n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Materializes a Pauli sum; qubit 0 is the leftmost tensor factor.
pub fn to_dense(a: &PauliSum) -> Result<DenseOperator> {
    let n = a.n();
    check_dense_n(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (p, c) in a.iter() {
        for col in 0..dim {
            let (row, ph) = p.apply_to_basis(col);
            m[(row, col)] += ph.apply(*c);
        }
    }
    Ok(DenseOperator { n, m })
}

/// Pauli-basis expansion `a_P = tr(A P) / 2^n` over all `4^n` strings.
pub fn pauli_coefficients(a: &DMatrix<Complex64>, n: usize) -> PauliSum {
    let dim = 1usize << n;
    let norm = 1.0 / dim as f64;
    let terms = PauliString::all(n).map(|p| {
        let mut tr = Complex64::default();
        for col in 0..dim {
            let (row, ph) = p.apply_to_basis(col);
            tr += ph.apply(a[(col, row)]);
        }
        (p, tr * norm)
    });
    PauliSum::from_terms(n, terms).expect("strings generated for n")
}

/// Hermitian eigendecomposition with ascending eigenvalues. Each
/// eigenvector is rotated so that its largest-magnitude entry (first such
/// index on ties) is real and positive.
pub fn eigh(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let dim = m.nrows();
    let mut vecs = DMatrix::<Complex64>::zeros(dim, dim);
    let mut vals = Vec::with_capacity(dim);
    for (k, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-9))
            .unwrap_or(0);
        let gauge = col[pivot].conj() / col[pivot].norm();
        vecs.set_column(k, &(col * gauge));
    }
    (vals, vecs)
}

/// Largest singular value of a Hermitian matrix.
pub fn spectral_norm_hermitian(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Dense diagnostics of a candidate diagonalizer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagReport {
    /// `‖H − H̃‖_F`
    pub frob_error: f64,
    /// `‖H − H̃‖₂`
    pub spec_error: f64,
    /// `‖K†K − I‖_F`
    pub unitarity_error: f64,
    /// `‖Δ‖_F`, the off-diagonal part of `K†HK`.
    pub offdiag_mass: f64,
    /// `√(F / 2^n)`
    pub bound_offdiag: f64,
    /// Spectral-norm bound `F/2^(n-1) + 6(1+√F)‖H‖_F√ε`; `None` when `ε > 1/4`.
    /// Not valid in general: with `ε = 0` it asks for `‖Δ‖₂ ≤ 2‖Δ‖_F²`.
    pub bound_spec: Option<f64>,
    /// `2√(F/2^n) + 6(1+√ε)‖H‖_F√ε`, a spectral bound that does hold
    /// for `ε ≤ 1/4`; `None` otherwise.
    pub bound_spec_rederived: Option<f64>,
    /// `2^n · Σ_{G₂} φ_P²`
    pub epsilon: f64,
    pub cost: f64,
    pub penalty: f64,
}

impl DiagReport {
    /// Both a posteriori bounds hold (the spectral one only where it applies).
    pub fn bounds_hold(&self) -> bool {
        self.offdiag_mass <= self.bound_offdiag + 1e-10
            && self.bound_spec.is_none_or(|b| self.spec_error <= b + 1e-10)
    }

    /// Off-diagonal bound plus [`Self::bound_spec_rederived`].
    pub fn rederived_bounds_hold(&self) -> bool {
        self.offdiag_mass <= self.bound_offdiag + 1e-10
            && self
                .bound_spec_rederived
                .is_none_or(|b| self.spec_error <= b + 1e-10)
    }
}

/// The approximation `H̃ = K h₀ K†` with `h₀` the diagonal of `K†HK`, plus
/// the pieces needed to report on it.
pub struct Reconstruction {
    pub k: DMatrix<Complex64>,
    pub h0: DMatrix<Complex64>,
    pub h_tilde: DMatrix<Complex64>,
    pub offdiag: DMatrix<Complex64>,
}

pub fn reconstruct(h: &PauliSum, kp: &KParams) -> Result<Reconstruction> {
    if kp.n() != h.n() {
        return Err(Error::DimensionMismatch {
            left: h.n(),
            right: kp.n(),
        });
    }
    let dh = to_dense(h)?.into_matrix();
    let k = to_dense(&kp.to_sum())?.into_matrix();
    let khk = k.adjoint() * &dh * &k;
    let h0 = DMatrix::from_diagonal(&khk.diagonal());
    let offdiag = &khk - &h0;
    let h_tilde = &k * &h0 * k.adjoint();
    Ok(Reconstruction {
        k,
        h0,
        h_tilde,
        offdiag,
    })
}

/// Dense comparison of `H` against `H̃ = K h₀ K†` with the cost-derived
/// bounds. `cost` is the total `F` and `penalty` its orthogonality part.
pub fn diag_report(h: &PauliSum, kp: &KParams, cost: f64, penalty: f64) -> Result<DiagReport> {
    let n = h.n();
    let rec = reconstruct(h, kp)?;
    let dh = to_dense(h)?.into_matrix();
    let dim = 1usize << n;
    let diff = &dh - &rec.h_tilde;
    let unit = rec.k.adjoint() * &rec.k - DMatrix::<Complex64>::identity(dim, dim);
    let scale = (n as f64).exp2();
    let epsilon = scale * penalty;
    let h_frob = dh.norm();
    let applies = epsilon <= 0.25;
    let bound_spec =
        applies.then(|| cost / (scale / 2.0) + 6.0 * (1.0 + cost.sqrt()) * h_frob * epsilon.sqrt());
    // ‖K⁻¹‖₂² ≤ 2 and ‖h₀‖_F ≤ ‖K‖₂²‖H‖_F ≤ (1+√ε)‖H‖_F.
    let bound_spec_rederived = applies.then(|| {
        2.0 * (cost / scale).sqrt() + 6.0 * (1.0 + epsilon.sqrt()) * h_frob * epsilon.sqrt()
    });
    Ok(DiagReport {
        frob_error: diff.norm(),
        spec_error: spectral_norm_hermitian(&diff),
        unitarity_error: unit.norm(),
        offdiag_mass: rec.offdiag.norm(),
        bound_offdiag: (cost / scale).sqrt(),
        bound_spec,
        bound_spec_rederived,
        epsilon,
        cost,
        penalty,
    })
}

/// `‖H − H̃‖_F` only.
pub fn frobenius_error(h: &PauliSum, kp: &KParams) -> Result<f64> {
    let rec = reconstruct(h, kp)?;
    Ok((to_dense(h)?.into_matrix() - rec.h_tilde).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorDistance {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub distance: f64,
}

/// For each eigenspace of `H` (eigenvalues grouped within
/// `1e-8 · ‖H‖₂`), the Frobenius distance between its projector and the
/// projector onto the equally many eigenvectors of `H̃` whose eigenvalues
/// are closest.
pub fn projector_distances(
    h: &PauliSum,
    h_tilde: &DenseOperator,
) -> Result<Vec<ProjectorDistance>> {
    if h.n() > PROJECTOR_LIMIT {
        return Err(Error::DenseInfeasible {
            n: h.n(),
            limit: PROJECTOR_LIMIT,
        });
    }
    if h_tilde.n() != h.n() {
        return Err(Error::DimensionMismatch {
            left: h.n(),
            right: h_tilde.n(),
        });
    }
    let (lam, v) = eigh(to_dense(h)?.matrix());
    let (mu, w) = eigh(h_tilde.matrix());
    let norm = lam.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = DEGENERACY_REL_TOL * norm.max(f64::MIN_POSITIVE);

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=lam.len() {
        if i == lam.len() || lam[i] - lam[i - 1] > tol {
            groups.push((start, i));
            start = i;
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; mu.len()];
    let mut out = Vec::with_capacity(groups.len());
    for (g, &(lo, hi)) in groups.iter().enumerate() {
        let center = lam[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        let m = hi - lo;
        let mut idx: Vec<usize> = (0..mu.len()).collect();
        idx.sort_by(|&a, &b| {
            (mu[a] - center)
                .abs()
                .total_cmp(&(mu[b] - center).abs())
                .then(a.cmp(&b))
        });
        if m < idx.len() {
            let last = (mu[idx[m - 1]] - center).abs();
            let next = (mu[idx[m]] - center).abs();
            if (next - last).abs() <= 1e-12 * norm.max(1.0) {
                return Err(Error::AmbiguousAssignment(vec![
                    center,
                    mu[idx[m - 1]],
                    mu[idx[m]],
                ]));
            }
        }
        for &i in &idx[..m] {
            if let Some(prev) = owner[i] {
                let (plo, phi) = groups[prev];
                let other = lam[plo..phi].iter().sum::<f64>() / (phi - plo) as f64;
                return Err(Error::AmbiguousAssignment(vec![other, center, mu[i]]));
            }
            owner[i] = Some(g);
        }
        let vs = v.columns(lo, m);
        let p_h = vs * vs.adjoint();
        let mut p_t = DMatrix::<Complex64>::zeros(lam.len(), lam.len());
        for &i in &idx[..m] {
            let col = w.column(i);
            p_t += col * col.adjoint();
        }
        out.push(ProjectorDistance {
            eigenvalue: center,
            multiplicity: m,
            distance: (p_t - p_h).norm(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Closure {
    pub dim: usize,
    /// The cap was reached before the closure saturated.
    pub overflow: bool,
}

/// Dimension of the real Lie algebra generated by `generators` under
/// commutators. Commutators of Pauli strings are single strings (or zero),
/// so the dimension is the size of the string set. The identity is central
/// and is excluded.
pub fn lie_closure_dim(generators: &[PauliString], cap: usize) -> Result<Closure> {
    let Some(first) = generators.first() else {
        return Err(Error::invalid("no generators"));
    };
    let n = first.n();
    let mut seen: HashSet<PauliString> = HashSet::new();
    let mut elems: Vec<PauliString> = Vec::new();
    for g in generators {
        if g.n() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: g.n(),
            });
        }
        if !g.is_identity() && seen.insert(*g) {
            elems.push(*g);
            if elems.len() >= cap {
                return Ok(Closure {
                    dim: cap,
                    overflow: true,
                });
            }
        }
    }
    // Every pair (i, j) with i < j is visited once: when j is processed it is
    // commuted against all earlier elements.
    let mut next = 0;
    while next < elems.len() {
        let b = elems[next];
        for i in 0..next {
            let a = elems[i];
            if !a.commutes_unchecked(&b) {
                let (_, c) = a.mul_unchecked(&b);
                if seen.insert(c) {
                    elems.push(c);
                    if elems.len() >= cap {
                        return Ok(Closure {
                            dim: cap,
                            overflow: true,
                        });
                    }
                }
            }
        }
        next += 1;
    }
    Ok(Closure {
        dim: elems.len(),
        overflow: false,
    })
}

/// The generating set `{Z₁, Z₂, X₁, X₂, Z₁Z₂} ∪ {X₂Y₃⋯Y_{j−1}Z_j,
/// Z₂Y₃⋯Y_{j−1}X_j : 3 ≤ j ≤ n}` (1-based qubits).
pub fn su_generating_set(n: usize) -> Result<Vec<PauliString>> {
    if n < 3 {
        return Err(Error::invalid("generating set needs n >= 3"));
    }
    let mut out = vec![
        PauliString::single(n, 0, 'Z')?,
        PauliString::single(n, 1, 'Z')?,
        PauliString::single(n, 0, 'X')?,
        PauliString::single(n, 1, 'X')?,
        PauliString::from_ops(n, &[(0, 'Z'), (1, 'Z')])?,
    ];
    for j in 2..n {
        let mut a = vec![(1, 'X'), (j, 'Z')];
        let mut b = vec![(1, 'Z'), (j, 'X')];
        for q in 2..j {
            a.push((q, 'Y'));
            b.push((q, 'Y'));
        }
        out.push(PauliString::from_ops(n, &a)?);
        out.push(PauliString::from_ops(n, &b)?);
    }
    Ok(out)
}

/// Whether [`su_generating_set`] closes to all `4^n − 1` non-identity
/// strings. Valid for `3 ≤ n ≤ 6`.
pub fn generating_set_check(n: usize) -> Result<bool> {
    if !(3..=6).contains(&n) {
        return Err(Error::invalid("generating_set_check supports 3 <= n <= 6"));
    }
    let full = (1usize << (2 * n)) - 1;
    let c = lie_closure_dim(&su_generating_set(n)?, full + 1)?;
    Ok(c.dim == full && !c.overflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn dense_basics() {
        let id = to_dense(&PauliSum::identity(2)).unwrap();
        assert_eq!(id.matrix(), &DMatrix::identity(4, 4));
        let z = to_dense(&PauliSum::single(ps("Z"), C::new(1.0, 0.0))).unwrap();
        assert_eq!(z.matrix()[(0, 0)], C::new(1.0, 0.0));
        assert_eq!(z.matrix()[(1, 1)], C::new(-1.0, 0.0));
        // qubit 0 is the leftmost factor: Z⊗I = diag(1, 1, -1, -1)
        let zi = to_dense(&PauliSum::single(ps("ZI"), C::new(1.0, 0.0))).unwrap();
        assert_eq!(zi.matrix()[(2, 2)], C::new(-1.0, 0.0));
        assert!(to_dense(&PauliSum::identity(13)).is_err());
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            let a = PauliSum::from_terms(
                n,
                (0..6).map(|_| {
                    (
                        PauliString::random(n, &mut rng),
                        C::new(rng.gen(), rng.gen()),
                    )
                }),
            )
            .unwrap();
            let d = to_dense(&a).unwrap();
            let direct: f64 = d.matrix().iter().map(|z| z.norm_sqr()).sum();
            assert!((direct - a.frobenius_norm_sq()).abs() < 1e-10);
            let back = pauli_coefficients(d.matrix(), n);
            assert!(back.sub(&a).unwrap().iter().all(|(_, c)| c.norm() < 1e-12));
        }
    }

    #[test]
    fn eigh_gauge_and_order() {
        let h = PauliSum::from_real_terms(2, [(ps("XX"), 1.0), (ps("ZI"), 0.3), (ps("IZ"), -0.2)])
            .unwrap();
        let d = to_dense(&h).unwrap();
        let (vals, vecs) = eigh(d.matrix());
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..4 {
            let col = vecs.column(k);
            let resid = d.matrix() * col - col * C::new(vals[k], 0.0);
            assert!(resid.norm() < 1e-12);
            let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = col.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap();
            assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
        }
    }

    #[test]
    fn closure_small() {
        assert_eq!(
            lie_closure_dim(&[ps("X")], 100).unwrap(),
            Closure {
                dim: 1,
                overflow: false
            }
        );
        assert_eq!(lie_closure_dim(&[ps("X"), ps("Z")], 100).unwrap().dim, 3);
        assert_eq!(
            lie_closure_dim(&[ps("X"), ps("Z")], 2).unwrap(),
            Closure {
                dim: 2,
                overflow: true
            }
        );
        assert_eq!(lie_closure_dim(&[ps("II"), ps("XI")], 100).unwrap().dim, 1);
        assert!(lie_closure_dim(&[], 10).is_err());
    }

    #[test]
    fn closure_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut gens: Vec<_> = (0..3).map(|_| PauliString::random(3, &mut rng)).collect();
            let before = lie_closure_dim(&gens, 64).unwrap().dim;
            gens.push(PauliString::random(3, &mut rng));
            assert!(lie_closure_dim(&gens, 64).unwrap().dim >= before);
        }
    }

    #[test]
    fn generating_set() {
        assert!(generating_set_check(3).unwrap());
        assert!(generating_set_check(4).unwrap());
        let mut reduced = su_generating_set(3).unwrap();
        reduced.retain(|p| *p != ps("XII"));
        assert!(lie_closure_dim(&reduced, 64).unwrap().dim < 63);
        assert!(generating_set_check(2).is_err());
    }

    #[test]
    fn projector_identity_and_ambiguity() {
        let h = PauliSum::from_real_terms(2, [(ps("ZI"), 1.0), (ps("IZ"), 0.4), (ps("XX"), 0.1)])
            .unwrap();
        let d = to_dense(&h).unwrap();
        let dist = projector_distances(&h, &d).unwrap();
        assert_eq!(dist.len(), 4);
        assert!(dist.iter().all(|p| p.distance < 1e-12));

        // H has eigenvalues ±1 (each doubly degenerate); H̃ with eigenvalue 0
        // sits equally far from both groups.
        let h = PauliSum::from_real_terms(2, [(ps("ZI"), 1.0)]).unwrap();
        let t =
            to_dense(&PauliSum::from_real_terms(2, [(ps("ZI"), 0.5), (ps("ZZ"), 0.5)]).unwrap())
                .unwrap();
        assert!(matches!(
            projector_distances(&h, &t),
            Err(Error::AmbiguousAssignment(_))
        ));
    }

    #[test]
    fn spectral_bound_counterexample() {
        // K = I is exactly unitary, so H - H̃ is the whole off-diagonal part.
        let h = PauliSum::from_real_terms(1, [(ps("X"), 0.1)]).unwrap();
        let kp = KParams::identity(1);
        let c = crate::cost::CostModel::new(&h, kp.ansatz())
            .unwrap()
            .eval(&kp)
            .unwrap();
        assert!((c.f_value - 0.04).abs() < 1e-14);
        let d = diag_report(&h, &kp, c.total, c.penalty).unwrap();
        assert!((d.spec_error - 0.1).abs() < 1e-12);
        assert!((d.bound_spec.unwrap() - 0.04).abs() < 1e-12);
        assert!(!d.bounds_hold());
        assert!(d.rederived_bounds_hold());
        assert!((d.offdiag_mass - d.bound_offdiag).abs() < 1e-12);
    }
}
