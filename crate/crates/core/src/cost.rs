// SPDX-License-Identifier: Apache-2.0

//! The diagonalization cost and its exact gradient.
//!
//! For `K = Σ_j k_j P_j` with `k_j = r_j e^{iθ_j}` the cost is
//!
//! ```text
//! F = f + Φ,   f = Σ_{P∈G₁} tr(K†HK·P)²,   Φ = Σ_{P∈G₂} φ_P²
//! ```
//!
//! where `φ_P` is the Pauli coefficient of `K†K`. Both `K†HK` and `K†K` are
//! Hermitian, so all their Pauli coefficients (and `φ_P` in particular) are
//! real.
//!
//! [`CostModel`] precomputes, for every triple `(a, m, b)`, the string and
//! phase of `P_a Q_m P_b`. One pass over that table yields every coefficient
//! of `K†HK`; one row of it (`a = j`) yields the partial derivatives in
//! coordinate `j`:
//!
//! ```text
//! ∂F/∂r_j = 4 Re(e^{-iθ_j} g_j),   ∂F/∂θ_j = 4 Im(conj(k_j) g_j)
//! g_j = 2^n Σ_{m,b} c_m k_b ω_{jmb} T_{S(j,m,b)} + Σ_b φ_{P_j P_b} k_b ω_{jb}
//! ```
//!
//! with `T_S = tr(K†HK·S)` on off-diagonal strings and zero elsewhere.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{build_support_sets, check_ansatz, PauliSum, SupportSets};
use crate::pauli::{PauliString, Phase};

/// The optimization variable: an ansatz of distinct Pauli strings with
/// radial and phase parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KParamsRepr", into = "KParamsRepr")]
pub struct KParams {
    ansatz: Vec<PauliString>,
    r: Vec<f64>,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KParamsRepr {
    ansatz: Vec<PauliString>,
    r: Vec<f64>,
    theta: Vec<f64>,
}

impl TryFrom<KParamsRepr> for KParams {
    type Error = Error;
    fn try_from(v: KParamsRepr) -> Result<Self> {
        KParams::new(v.ansatz, v.r, v.theta)
    }
}

impl From<KParams> for KParamsRepr {
    fn from(k: KParams) -> Self {
        KParamsRepr {
            ansatz: k.ansatz,
            r: k.r,
            theta: k.theta,
        }
    }
}

impl KParams {
    pub fn new(ansatz: Vec<PauliString>, r: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let n = ansatz
            .first()
            .map(|p| p.n())
            .ok_or_else(|| Error::invalid("empty ansatz"))?;
        check_ansatz(n, &ansatz)?;
        if r.len() != ansatz.len() || theta.len() != ansatz.len() {
            return Err(Error::invalid(format!(
                "parameter lengths r={}, theta={} do not match ansatz length {}",
                r.len(),
                theta.len(),
                ansatz.len()
            )));
        }
        if r.iter().chain(&theta).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(KParams { ansatz, r, theta })
    }

    /// `K = I` on `n` qubits.
    pub fn identity(n: usize) -> Self {
        KParams {
            ansatz: vec![PauliString::identity(n)],
            r: vec![1.0],
            theta: vec![0.0],
        }
    }

    /// Polar parameters of the given Pauli-basis coefficients.
    pub fn from_coefficients(ansatz: Vec<PauliString>, coeffs: &[Complex64]) -> Result<Self> {
        let r = coeffs.iter().map(|c| c.norm()).collect();
        let theta = coeffs.iter().map(|c| c.arg()).collect();
        Self::new(ansatz, r, theta)
    }

    pub fn from_sum(k: &PauliSum) -> Result<Self> {
        let (ansatz, coeffs): (Vec<_>, Vec<_>) = k.iter().copied().unzip();
        Self::from_coefficients(ansatz, &coeffs)
    }

    pub fn ansatz(&self) -> &[PauliString] {
        &self.ansatz
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn d(&self) -> usize {
        self.ansatz.len()
    }

    pub fn n(&self) -> usize {
        self.ansatz[0].n()
    }

    pub fn r_norm(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same ansatz, new parameters.
    pub fn with_params(&self, r: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.ansatz.clone(), r, theta)
    }

    /// `r` rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.r_norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("cannot normalize r = 0"));
        }
        Ok(KParams {
            ansatz: self.ansatz.clone(),
            r: self.r.iter().map(|v| v / norm).collect(),
            theta: self.theta.clone(),
        })
    }

    /// `k_j = r_j e^{iθ_j}`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &t)| Complex64::from_polar(r, t))
            .collect()
    }

    /// `K` as a Pauli sum.
    pub fn to_sum(&self) -> PauliSum {
        PauliSum::from_terms(
            self.n(),
            self.ansatz.iter().copied().zip(self.coefficients()),
        )
        .expect("ansatz shares n")
    }
}

/// One evaluation of the cost; gradients are empty for value-only
/// evaluations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub f_value: f64,
    pub penalty: f64,
    pub total: f64,
    pub grad_r: Vec<f64>,
    pub grad_theta: Vec<f64>,
}

impl CostReport {
    pub fn grad_norm(&self) -> f64 {
        self.grad_r
            .iter()
            .chain(&self.grad_theta)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

const NO_STRING: u32 = u32::MAX;

/// Partials of the two cost parts in one coordinate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradParts {
    pub f_r: f64,
    pub f_theta: f64,
    pub phi_r: f64,
    pub phi_theta: f64,
}

impl GradParts {
    pub(crate) fn new(kj: Complex64, theta_j: f64, gf: Complex64, gp: Complex64) -> Self {
        let (f_r, f_theta) = CostModel::partials(kj, theta_j, gf);
        let (phi_r, phi_theta) = CostModel::partials(kj, theta_j, gp);
        GradParts {
            f_r,
            f_theta,
            phi_r,
            phi_theta,
        }
    }

    /// `(∂/∂r, ∂/∂θ)` of `f + w Φ`.
    #[inline]
    pub fn weighted(&self, w: f64) -> (f64, f64) {
        (self.f_r + w * self.phi_r, self.f_theta + w * self.phi_theta)
    }
}

/// Precomputed structure of the cost for a fixed Hamiltonian and ansatz.
#[derive(Clone, Debug)]
pub struct CostModel {
    n: usize,
    d: usize,
    h_strings: Vec<PauliString>,
    h_coeffs: Vec<f64>,
    ansatz: Vec<PauliString>,
    support: SupportSets,
    /// Every string `P_a Q_m P_b`, canonical order.
    strings: Vec<PauliString>,
    offdiag: Vec<bool>,
    /// Row-major over `(a, m, b)`.
    triple_idx: Vec<u32>,
    triple_phase: Vec<Phase>,
    /// `[a * d + b]` → index into `support.g2` for `P_a P_b`, or
    /// `NO_STRING` when the product is the identity.
    pair_idx: Vec<u32>,
    pair_phase: Vec<Phase>,
    trace_scale: f64,
}

/// Below this many triples evaluation stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 1 << 16;
/// Fixed chunk count for parallel coefficient accumulation, so the
/// summation order does not depend on the thread count.
const COEFF_CHUNKS: usize = 8;

impl CostModel {
    pub fn new(h: &PauliSum, ansatz: &[PauliString]) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::invalid("Hamiltonian coefficients must be real"));
        }
        if h.is_empty() {
            return Err(Error::invalid("Hamiltonian has no terms"));
        }
        let support = build_support_sets(h, ansatz)?;
        let n = h.n();
        let d = ansatz.len();
        let (h_strings, h_coeffs): (Vec<_>, Vec<_>) = h.iter().map(|(p, c)| (*p, c.re)).unzip();
        let m = h_strings.len();

        let mut products = Vec::with_capacity(d * m * d);
        for pa in ansatz {
            for q in &h_strings {
                let (p1, aq) = pa.mul_unchecked(q);
                for pb in ansatz {
                    let (p2, s) = aq.mul_unchecked(pb);
                    products.push((s, p1 * p2));
                }
            }
        }
        let mut strings: Vec<PauliString> = products.iter().map(|(s, _)| *s).collect();
        strings.sort_unstable();
        strings.dedup();
        let lookup: std::collections::HashMap<PauliString, u32> = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i as u32))
            .collect();
        let triple_idx = products.iter().map(|(s, _)| lookup[s]).collect();
        let triple_phase = products.iter().map(|(_, ph)| *ph).collect();
        let offdiag = strings.iter().map(|s| !s.is_diagonal()).collect();

        let mut pair_idx = vec![NO_STRING; d * d];
        let mut pair_phase = vec![Phase::ONE; d * d];
        for (g, entries) in support.g2_pairs.iter().enumerate() {
            for e in entries {
                pair_idx[e.partner * d + e.j] = g as u32;
                pair_phase[e.partner * d + e.j] = e.phase;
            }
        }

        Ok(CostModel {
            n,
            d,
            h_strings,
            h_coeffs,
            ansatz: ansatz.to_vec(),
            support,
            strings,
            offdiag,
            triple_idx,
            triple_phase,
            pair_idx,
            pair_phase,
            trace_scale: (n as f64).exp2(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Strings of `H`, in the order of its coefficients.
    pub fn h_strings(&self) -> &[PauliString] {
        &self.h_strings
    }

    pub fn num_terms(&self) -> usize {
        self.h_coeffs.len()
    }

    pub fn ansatz(&self) -> &[PauliString] {
        &self.ansatz
    }

    pub fn support(&self) -> &SupportSets {
        &self.support
    }

    /// All strings of `K†HK` that can carry weight (`G₁ ∪` diagonal ones).
    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub(crate) fn is_offdiag(&self, s: usize) -> bool {
        self.offdiag[s]
    }

    pub(crate) fn trace_scale(&self) -> f64 {
        self.trace_scale
    }

    pub(crate) fn h_coeffs(&self) -> &[f64] {
        &self.h_coeffs
    }

    /// Row `(a, m, ·)` of the triple table.
    #[inline]
    pub(crate) fn triple_row(&self, a: usize, m: usize) -> (&[u32], &[Phase]) {
        let start = (a * self.h_coeffs.len() + m) * self.d;
        (
            &self.triple_idx[start..start + self.d],
            &self.triple_phase[start..start + self.d],
        )
    }

    #[inline]
    pub(crate) fn pair_row(&self, a: usize) -> (&[u32], &[Phase]) {
        let start = a * self.d;
        (
            &self.pair_idx[start..start + self.d],
            &self.pair_phase[start..start + self.d],
        )
    }

    fn check_params(&self, kp: &KParams) -> Result<()> {
        if kp.ansatz() != self.ansatz.as_slice() {
            return Err(Error::invalid(
                "parameters were built for a different ansatz",
            ));
        }
        Ok(())
    }

    /// Pauli coefficients of `K†HK` over [`strings`](Self::strings).
    pub fn khk_coefficients(&self, k: &[Complex64]) -> Vec<Complex64> {
        let total = self.d * self.d * self.h_coeffs.len();
        if total < PARALLEL_THRESHOLD || rayon::current_num_threads() == 1 {
            let mut acc = vec![Complex64::default(); self.strings.len()];
            self.accumulate_rows(k, 0..self.d, &mut acc);
            return acc;
        }
        let chunk = self.d.div_ceil(COEFF_CHUNKS);
        let parts: Vec<Vec<Complex64>> = (0..COEFF_CHUNKS)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::default(); self.strings.len()];
                let lo = (c * chunk).min(self.d);
                let hi = ((c + 1) * chunk).min(self.d);
                self.accumulate_rows(k, lo..hi, &mut acc);
                acc
            })
            .collect();
        let mut acc = vec![Complex64::default(); self.strings.len()];
        for part in parts {
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        acc
    }

    fn accumulate_rows(
        &self,
        k: &[Complex64],
        rows: std::ops::Range<usize>,
        acc: &mut [Complex64],
    ) {
        for a in rows {
            let ka = k[a].conj();
            for (m, &c) in self.h_coeffs.iter().enumerate() {
                let w = ka * c;
                let (idx, ph) = self.triple_row(a, m);
                for b in 0..self.d {
                    acc[idx[b] as usize] += ph[b].apply(w * k[b]);
                }
            }
        }
    }

    /// `φ_P` for every `P ∈ G₂` (real parts; imaginary parts vanish).
    pub fn phi_values(&self, k: &[Complex64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.support.g2.len()];
        for a in 0..self.d {
            let ka = k[a].conj();
            let (idx, ph) = self.pair_row(a);
            for b in 0..self.d {
                if idx[b] != NO_STRING {
                    phi[idx[b] as usize] += ph[b].apply(ka * k[b]).re;
                }
            }
        }
        phi
    }

    /// `T_S = tr(K†HK·S)` on off-diagonal strings, zero elsewhere.
    pub(crate) fn offdiag_traces(&self, coeffs: &[Complex64], scale: f64) -> Vec<f64> {
        coeffs
            .iter()
            .zip(&self.offdiag)
            .map(|(c, &off)| {
                if off {
                    self.trace_scale * scale * c.re
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `f` from off-diagonal traces, pairwise summed.
    pub(crate) fn f_from_traces(traces: &[f64]) -> f64 {
        let sq: Vec<f64> = traces.iter().map(|t| t * t).collect();
        pairwise_sum(&sq)
    }

    /// `g_j` of the module docs, split into its `f` and `Φ` parts. Both
    /// partials in coordinate `j` are projections of `g_f + g_Φ`.
    pub(crate) fn partial_kernels(
        &self,
        j: usize,
        k: &[Complex64],
        traces: &[f64],
        phi: &[f64],
    ) -> (Complex64, Complex64) {
        let mut gf = Complex64::default();
        for (m, &c) in self.h_coeffs.iter().enumerate() {
            let (idx, ph) = self.triple_row(j, m);
            let mut row = Complex64::default();
            for b in 0..self.d {
                let t = traces[idx[b] as usize];
                if t != 0.0 {
                    row += ph[b].apply(k[b] * t);
                }
            }
            gf += row * c;
        }
        gf *= self.trace_scale;
        let mut gp = Complex64::default();
        let (idx, ph) = self.pair_row(j);
        for b in 0..self.d {
            if idx[b] != NO_STRING {
                gp += ph[b].apply(k[b] * phi[idx[b] as usize]);
            }
        }
        (gf, gp)
    }

    /// `(∂F/∂r_j, ∂F/∂θ_j)` from the kernel.
    #[inline]
    pub(crate) fn partials(kj: Complex64, theta_j: f64, g: Complex64) -> (f64, f64) {
        let unit = Complex64::from_polar(1.0, -theta_j);
        (4.0 * (unit * g).re, 4.0 * (kj.conj() * g).im)
    }

    pub fn eval_f(&self, kp: &KParams) -> Result<f64> {
        self.check_params(kp)?;
        let coeffs = self.khk_coefficients(&kp.coefficients());
        Ok(Self::f_from_traces(&self.offdiag_traces(&coeffs, 1.0)))
    }

    /// `φ_P` for `P ∈ G₂ ∪ {I}`.
    pub fn eval_phi(&self, kp: &KParams, p: &PauliString) -> Result<Complex64> {
        self.check_params(kp)?;
        let k = kp.coefficients();
        if p.is_identity() {
            return Ok(Complex64::new(k.iter().map(|z| z.norm_sqr()).sum(), 0.0));
        }
        let g = self
            .support
            .g2_index(p)
            .ok_or_else(|| Error::invalid(format!("{p} is not a product of two ansatz strings")))?;
        let mut phi = Complex64::default();
        for e in &self.support.g2_pairs[g] {
            phi += e.phase.apply(k[e.partner].conj() * k[e.j]);
        }
        Ok(phi)
    }

    /// Values only.
    pub fn eval(&self, kp: &KParams) -> Result<CostReport> {
        self.check_params(kp)?;
        let k = kp.coefficients();
        let traces = self.offdiag_traces(&self.khk_coefficients(&k), 1.0);
        let f_value = Self::f_from_traces(&traces);
        let penalty = self.phi_values(&k).iter().map(|v| v * v).sum::<f64>();
        Ok(CostReport {
            f_value,
            penalty,
            total: f_value + penalty,
            ..Default::default()
        })
    }

    /// Values and the full gradient.
    pub fn eval_grad(&self, kp: &KParams) -> Result<CostReport> {
        self.check_params(kp)?;
        let k = kp.coefficients();
        let traces = self.offdiag_traces(&self.khk_coefficients(&k), 1.0);
        let phi = self.phi_values(&k);
        let f_value = Self::f_from_traces(&traces);
        let penalty = phi.iter().map(|v| v * v).sum::<f64>();
        let (grad_r, grad_theta) = self
            .gradient_parts(&k, kp.theta(), &traces, &phi)
            .into_iter()
            .map(|g| (g.f_r + g.phi_r, g.f_theta + g.phi_theta))
            .unzip();
        Ok(CostReport {
            f_value,
            penalty,
            total: f_value + penalty,
            grad_r,
            grad_theta,
        })
    }

    /// Per-coordinate partials of `f` and `Φ` separately.
    pub fn gradient_parts(
        &self,
        k: &[Complex64],
        theta: &[f64],
        traces: &[f64],
        phi: &[f64],
    ) -> Vec<GradParts> {
        let one = |j: usize| {
            let (gf, gp) = self.partial_kernels(j, k, traces, phi);
            GradParts::new(k[j], theta[j], gf, gp)
        };
        if self.d * self.d * self.h_coeffs.len() < PARALLEL_THRESHOLD {
            (0..self.d).map(one).collect()
        } else {
            (0..self.d).into_par_iter().map(one).collect()
        }
    }

    /// Traces and `φ` table at `k`, for use with [`gradient_parts`](Self::gradient_parts).
    pub fn tables(&self, k: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.offdiag_traces(&self.khk_coefficients(k), 1.0),
            self.phi_values(k),
        )
    }
}

/// Pairwise (tree) summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}
