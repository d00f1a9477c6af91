// SPDX-License-Identifier: Apache-2.0

//! Gradient descent on the unit sphere in `r`, in two flavors.
//!
//! [`run_gd`] takes full gradient steps. [`run_rcd`] samples `S` of the
//! `2d` coordinates per iteration and keeps the off-diagonal trace table
//! and the orthogonality table up to date by touching only the entries
//! reachable from the changed coefficients.
//!
//! Both optimizers step along `−∇(f + wΦ)` with length `a_t · m`, where
//! `a_t` comes from the schedule and `m` is the step scale. The default
//! scale is the inverse of the largest Hessian eigenvalue at the start, so
//! `a_t ∈ (0, 1)` is stable whatever the size of `H`. Traces, stopping and
//! α always use the unweighted `F` and `∇F`.

use std::io::{BufRead, Write};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{pairwise_sum, CostModel, GradParts, KParams};
use crate::error::{Error, Result};
use crate::operator::PauliSum;

/// Aborts when `‖r(y_t)‖` falls below this.
pub const COLLAPSE_TOL: f64 = 1e-14;
/// Accepted deviation of `‖r₀‖` from one.
pub const UNIT_NORM_TOL: f64 = 1e-10;
/// Window of the running α median.
pub const ALPHA_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant {
        a: f64,
    },
    /// `a₀ / (1 + rate · t)`.
    Decay {
        a0: f64,
        rate: f64,
    },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LrSchedule::Constant { a } => a > 0.0 && a < 1.0,
            LrSchedule::Decay { a0, rate } => {
                a0 > 0.0 && a0 < 1.0 && rate >= 0.0 && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "learning rate schedule {self:?} leaves (0, 1)"
            )))
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        match *self {
            LrSchedule::Constant { a } => a,
            LrSchedule::Decay { a0, rate } => a0 / (1.0 + rate * t as f64),
        }
    }
}

/// Multiplier applied to the scheduled rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScale {
    /// `1 / λ_max` from [`estimate_curvature`] at the starting point.
    #[default]
    Auto,
    Fixed(f64),
}

/// `4^n Σ c_m²`, the scale of the curvature of `f` on the unit sphere.
pub fn curvature_scale(model: &CostModel) -> f64 {
    let c2: f64 = model.h_coeffs().iter().map(|c| c * c).sum();
    model.trace_scale().powi(2) * c2
}

impl StepScale {
    pub fn resolve(&self, model: &CostModel, kp: &KParams, w: f64) -> Result<f64> {
        match *self {
            StepScale::Auto => Ok(1.0 / estimate_curvature(model, kp, w)?),
            StepScale::Fixed(m) => Ok(m),
        }
    }
}

fn weighted_gradient(
    model: &CostModel,
    r: &[f64],
    theta: &[f64],
    w: f64,
    like: &KParams,
) -> Result<Vec<f64>> {
    let kp = like.with_params(r.to_vec(), theta.to_vec())?;
    let k = kp.coefficients();
    let (traces, phi) = model.tables(&k);
    let parts = model.gradient_parts(&k, theta, &traces, &phi);
    let (gr, gt): (Vec<f64>, Vec<f64>) = parts.iter().map(|g| g.weighted(w)).unzip();
    Ok(gr.into_iter().chain(gt).collect())
}

/// Largest eigenvalue of the Hessian of `f + wΦ` at `kp`, by power
/// iteration on central-difference Hessian-vector products.
pub fn estimate_curvature(model: &CostModel, kp: &KParams, w: f64) -> Result<f64> {
    const ITERS: usize = 30;
    const EPS: f64 = 1e-5;
    let d = kp.d();
    let mut v: Vec<f64> = (0..2 * d)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    let mut lambda = 0.0;
    for _ in 0..ITERS {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let shifted = |sign: f64| {
            let r: Vec<f64> = kp
                .r()
                .iter()
                .zip(&v[..d])
                .map(|(a, b)| a + sign * EPS * b)
                .collect();
            let t: Vec<f64> = kp
                .theta()
                .iter()
                .zip(&v[d..])
                .map(|(a, b)| a + sign * EPS * b)
                .collect();
            weighted_gradient(model, &r, &t, w, kp)
        };
        let (gp, gm) = (shifted(1.0)?, shifted(-1.0)?);
        let hv: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(a, b)| (a - b) / (2.0 * EPS))
            .collect();
        lambda = hv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        v = hv;
        if v.iter().all(|x| *x == 0.0) {
            break;
        }
    }
    // Floor keeps the step finite at flat points.
    Ok(lambda
        .abs()
        .max(1e-12 * curvature_scale(model))
        .max(f64::MIN_POSITIVE))
}

/// Weight `w` of the orthogonality part in the descent direction: steps
/// follow `−∇(f + wΦ)`. Any `w > 0` has the same zero set as `F`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyWeight {
    /// `4^n Σ c_m²`, matching the curvature of the two parts.
    #[default]
    Auto,
    Fixed(f64),
}

impl PenaltyWeight {
    pub fn resolve(&self, model: &CostModel) -> f64 {
        match *self {
            PenaltyWeight::Auto => curvature_scale(model),
            PenaltyWeight::Fixed(w) => w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub max_iters: usize,
    pub lr: LrSchedule,
    pub step_scale: StepScale,
    pub penalty_weight: PenaltyWeight,
    /// Coordinates sampled per random-coordinate iteration.
    pub block_size: usize,
    pub seed: u64,
    /// Stop once `F` drops below this.
    pub stop_tol: f64,
    /// Stop once the full gradient norm drops below this.
    pub grad_tol: f64,
    /// Random-coordinate cache rebuild period.
    pub refresh_every: usize,
    /// Store per-iteration wall time in the trace. Off by default so that
    /// traces are reproducible byte for byte.
    pub record_wall_time: bool,
    /// Keep the parameters every this many iterations; 0 keeps none.
    pub snapshot_every: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            max_iters: 5000,
            lr: LrSchedule::Constant { a: 0.9 },
            step_scale: StepScale::Auto,
            penalty_weight: PenaltyWeight::Auto,
            block_size: 4,
            seed: 0,
            stop_tol: 1e-10,
            grad_tol: 1e-12,
            refresh_every: 50,
            record_wall_time: false,
            snapshot_every: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        self.lr.validate()?;
        if self.block_size == 0 {
            return Err(Error::invalid("block_size must be positive"));
        }
        if self.refresh_every == 0 {
            return Err(Error::invalid("refresh_every must be positive"));
        }
        if let StepScale::Fixed(m) = self.step_scale {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::invalid("step scale must be positive"));
            }
        }
        if let PenaltyWeight::Fixed(w) = self.penalty_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid("penalty weight must be positive"));
            }
        }
        Ok(())
    }
}

/// `α = ln(‖∇F‖² / 4) / ln F`; `None` where undefined.
pub fn estimate_alpha(f: f64, grad_norm: f64) -> Option<f64> {
    if !(f > 0.0 && grad_norm > 0.0) || f == 1.0 || !f.is_finite() {
        return None;
    }
    let alpha = (grad_norm * grad_norm / 4.0).ln() / f.ln();
    alpha.is_finite().then_some(alpha)
}

pub fn lr_schedule_eval(cfg: &OptConfig, t: usize) -> f64 {
    cfg.lr.at(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub f_total: f64,
    pub f_value: f64,
    pub penalty: f64,
    /// Norm of `∇F` (over the sampled coordinates for random-coordinate
    /// descent).
    pub grad_norm: f64,
    pub alpha: Option<f64>,
    pub alpha_median: Option<f64>,
    /// `‖r(y_t)‖` before normalization; absent on the final record.
    pub r_norm_pre: Option<f64>,
    /// Largest relative cache deviation found at a rebuild.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CostBelowTol,
    StationaryPoint,
    MaxIters,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptTrace {
    pub records: Vec<TraceRecord>,
    pub final_params: KParams,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iter: usize,
    pub params: KParams,
}

fn wants_snapshot(cfg: &OptConfig, t: usize) -> bool {
    cfg.snapshot_every > 0 && t.is_multiple_of(cfg.snapshot_every)
}

impl OptTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records
            .last()
            .expect("a trace has at least one record")
    }

    /// Steps taken.
    pub fn iterations(&self) -> usize {
        self.last().iter
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses JSON-lines records; blank lines are skipped.
pub fn read_trace_jsonl<R: BufRead>(r: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    Some(if s.len() % 2 == 1 {
        s[mid]
    } else {
        0.5 * (s[mid - 1] + s[mid])
    })
}

struct Recorder {
    records: Vec<TraceRecord>,
    alphas: Vec<f64>,
    start: Instant,
    timed: bool,
}

impl Recorder {
    fn new(timed: bool) -> Self {
        Recorder {
            records: Vec::new(),
            alphas: Vec::new(),
            start: Instant::now(),
            timed,
        }
    }

    fn push(
        &mut self,
        iter: usize,
        f_value: f64,
        penalty: f64,
        grad_norm: f64,
    ) -> &mut TraceRecord {
        let f_total = f_value + penalty;
        let alpha = estimate_alpha(f_total, grad_norm);
        if let Some(a) = alpha {
            self.alphas.push(a);
        }
        let lo = self.alphas.len().saturating_sub(ALPHA_WINDOW);
        self.records.push(TraceRecord {
            iter,
            f_total,
            f_value,
            penalty,
            grad_norm,
            alpha,
            alpha_median: median(&self.alphas[lo..]),
            r_norm_pre: None,
            cache_drift: None,
            wall_time: self.timed.then(|| self.start.elapsed().as_secs_f64()),
        });
        self.records.last_mut().expect("just pushed")
    }
}

fn check_start(model: &CostModel, kp0: &KParams, cfg: &OptConfig) -> Result<()> {
    cfg.validate()?;
    if kp0.ansatz() != model.ansatz() {
        return Err(Error::invalid("starting parameters use a different ansatz"));
    }
    if (kp0.r_norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!(
            "starting parameters must have |r| = 1, got {}",
            kp0.r_norm()
        )));
    }
    Ok(())
}

/// Full-gradient descent with normalization after every step.
pub fn run_gd(h: &PauliSum, kp0: &KParams, cfg: &OptConfig) -> Result<OptTrace> {
    let model = CostModel::new(h, kp0.ansatz())?;
    run_gd_with(&model, kp0, cfg)
}

/// [`run_gd`] on a prebuilt model.
pub fn run_gd_with(model: &CostModel, kp0: &KParams, cfg: &OptConfig) -> Result<OptTrace> {
    check_start(model, kp0, cfg)?;
    let w = cfg.penalty_weight.resolve(model);
    let mult = cfg.step_scale.resolve(model, kp0, w)?;
    let mut rec = Recorder::new(cfg.record_wall_time);
    let mut kp = kp0.clone();
    let mut snapshots = Vec::new();
    let mut t = 0;
    loop {
        let k = kp.coefficients();
        let (traces, phi) = model.tables(&k);
        let f_value = CostModel::f_from_traces(&traces);
        let penalty: f64 = phi.iter().map(|v| v * v).sum();
        let parts = model.gradient_parts(&k, kp.theta(), &traces, &phi);
        let gn = parts.iter().map(|g| {
            let (r, th) = g.weighted(1.0);
            r * r + th * th
        });
        let gn = gn.sum::<f64>().sqrt();
        rec.push(t, f_value, penalty, gn);
        if wants_snapshot(cfg, t) {
            snapshots.push(Snapshot {
                iter: t,
                params: kp.clone(),
            });
        }
        let stop = if f_value + penalty < cfg.stop_tol {
            Some(StopReason::CostBelowTol)
        } else if gn < cfg.grad_tol {
            Some(StopReason::StationaryPoint)
        } else if t >= cfg.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            return Ok(OptTrace {
                records: rec.records,
                final_params: kp,
                stop_reason,
                snapshots,
            });
        }
        let a = cfg.lr.at(t) * mult;
        let (mut y_r, mut y_theta) = (kp.r().to_vec(), kp.theta().to_vec());
        for (j, g) in parts.iter().enumerate() {
            let (gr, gt) = g.weighted(w);
            y_r[j] -= a * gr;
            y_theta[j] -= a * gt;
        }
        let norm = y_r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= COLLAPSE_TOL) {
            return Err(Error::RadialCollapse { iter: t, norm });
        }
        rec.records.last_mut().expect("recorded").r_norm_pre = Some(norm);
        kp = kp.with_params(y_r.iter().map(|v| v / norm).collect(), y_theta)?;
        t += 1;
    }
}

/// Cached tables for random-coordinate descent.
///
/// The tables hold values for unnormalized coefficients `k̃`. The true
/// coefficients are `k = k̃ / ρ` with `ρ = ‖r̃‖`, so traces and `φ` carry a
/// factor `ρ⁻²` and `f`, `Φ` a factor `ρ⁻⁴`. Normalization then only touches
/// the changed entries.
#[derive(Clone, Debug)]
pub struct IncrementalState {
    r: Vec<f64>,
    theta: Vec<f64>,
    k: Vec<Complex64>,
    traces: Vec<f64>,
    phi: Vec<f64>,
    f_raw: f64,
    phi_raw: f64,
    stamp_t: Vec<u32>,
    stamp_p: Vec<u32>,
    epoch: u32,
    touched_t: Vec<(usize, f64)>,
    touched_p: Vec<(usize, f64)>,
    since_refresh: usize,
}

impl IncrementalState {
    pub fn new(model: &CostModel, kp: &KParams) -> Result<Self> {
        if kp.ansatz() != model.ansatz() {
            return Err(Error::invalid("parameters use a different ansatz"));
        }
        let mut st = IncrementalState {
            r: kp.r().to_vec(),
            theta: kp.theta().to_vec(),
            k: Vec::new(),
            traces: Vec::new(),
            phi: Vec::new(),
            f_raw: 0.0,
            phi_raw: 0.0,
            stamp_t: vec![0; model.strings().len()],
            stamp_p: vec![0; model.support().g2.len()],
            epoch: 0,
            touched_t: Vec::new(),
            touched_p: Vec::new(),
            since_refresh: 0,
        };
        st.rebuild(model);
        Ok(st)
    }

    fn rho(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn rebuild(&mut self, model: &CostModel) {
        let rho = self.rho();
        for v in &mut self.r {
            *v /= rho;
        }
        self.k = self
            .r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &t)| Complex64::from_polar(r, t))
            .collect();
        self.traces = model.offdiag_traces(&model.khk_coefficients(&self.k), 1.0);
        self.phi = model.phi_values(&self.k);
        self.f_raw = CostModel::f_from_traces(&self.traces);
        self.phi_raw = pairwise_sum(&self.phi.iter().map(|v| v * v).collect::<Vec<_>>());
        self.since_refresh = 0;
    }

    /// Rebuilds from scratch and returns the largest deviation of the
    /// running tables, relative to the largest rebuilt entry.
    pub fn refresh(&mut self, model: &CostModel) -> f64 {
        let s = self.rho().powi(-2);
        let old_t: Vec<f64> = self.traces.iter().map(|v| v * s).collect();
        let old_p: Vec<f64> = self.phi.iter().map(|v| v * s).collect();
        self.rebuild(model);
        rel_dev(&old_t, &self.traces).max(rel_dev(&old_p, &self.phi))
    }

    /// `(f, Φ)` at the current normalized point.
    pub fn values(&self) -> (f64, f64) {
        let s = self.rho().powi(-4);
        (self.f_raw * s, self.phi_raw * s)
    }

    /// Partials of `f` and `Φ` in coordinate `j` at the current normalized point.
    pub fn partials(&self, model: &CostModel, j: usize) -> GradParts {
        let rho = self.rho();
        let s = rho.powi(-3);
        let (gf, gp) = model.partial_kernels(j, &self.k, &self.traces, &self.phi);
        GradParts::new(self.k[j] / rho, self.theta[j], gf * s, gp * s)
    }

    /// Current normalized parameters.
    pub fn params(&self, like: &KParams) -> Result<KParams> {
        let rho = self.rho();
        like.with_params(self.r.iter().map(|v| v / rho).collect(), self.theta.clone())
    }

    /// Sets `(r̃_j, θ_j)` for each `(j, r̃, θ)` and updates the tables.
    pub fn apply(&mut self, model: &CostModel, changes: &[(usize, f64, f64)]) {
        let d = model.d();
        let scale = model.trace_scale();
        let h = model.h_coeffs();
        let delta: Vec<(usize, Complex64)> = changes
            .iter()
            .map(|&(j, r, t)| (j, Complex64::from_polar(r, t) - self.k[j]))
            .collect();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp_t.fill(0);
            self.stamp_p.fill(0);
            self.epoch = 1;
        }
        self.touched_t.clear();
        self.touched_p.clear();
        let epoch = self.epoch;

        let add_t = |st: &mut Self, s: usize, v: f64| {
            if st.stamp_t[s] != epoch {
                st.stamp_t[s] = epoch;
                st.touched_t.push((s, st.traces[s]));
            }
            st.traces[s] += v;
        };

        // conj(k_a) δ_b summed over a, old k. Entry (b, m, a) of the triple
        // table is the adjoint of (a, m, b), so the real part can be read
        // along row b as conj(δ_b) k_a.
        for &(b, db) in &delta {
            let db = db.conj();
            for (m, &c) in h.iter().enumerate() {
                let w = db * c;
                let (idx, ph) = model.triple_row(b, m);
                for a in 0..d {
                    let s = idx[a] as usize;
                    if model.is_offdiag(s) {
                        let v = scale * ph[a].apply(w * self.k[a]).re;
                        add_t(self, s, v);
                    }
                }
            }
        }
        let pair_old: Vec<(usize, f64)> = {
            let mut out = Vec::new();
            for &(b, db) in &delta {
                let db = db.conj();
                let (idx, ph) = model.pair_row(b);
                for a in 0..d {
                    if idx[a] != u32::MAX {
                        out.push((idx[a] as usize, ph[a].apply(db * self.k[a]).re));
                    }
                }
            }
            out
        };

        for &(j, r, t) in changes {
            self.r[j] = r;
            self.theta[j] = t;
            self.k[j] = Complex64::from_polar(r, t);
        }

        // conj(δ_a) k'_b over all b, new k.
        for &(a, da) in &delta {
            let da = da.conj();
            for (m, &c) in h.iter().enumerate() {
                let w = da * c;
                let (idx, ph) = model.triple_row(a, m);
                for b in 0..d {
                    let s = idx[b] as usize;
                    if model.is_offdiag(s) {
                        let v = scale * ph[b].apply(w * self.k[b]).re;
                        add_t(self, s, v);
                    }
                }
            }
        }

        let add_p = |st: &mut Self, s: usize, v: f64| {
            if st.stamp_p[s] != epoch {
                st.stamp_p[s] = epoch;
                st.touched_p.push((s, st.phi[s]));
            }
            st.phi[s] += v;
        };
        for (s, v) in pair_old {
            add_p(self, s, v);
        }
        for &(a, da) in &delta {
            let da = da.conj();
            let (idx, ph) = model.pair_row(a);
            for b in 0..d {
                if idx[b] != u32::MAX {
                    let v = ph[b].apply(da * self.k[b]).re;
                    add_p(self, idx[b] as usize, v);
                }
            }
        }

        for &(s, old) in &self.touched_t {
            let new = self.traces[s];
            self.f_raw += (new - old) * (new + old);
        }
        for &(s, old) in &self.touched_p {
            let new = self.phi[s];
            self.phi_raw += (new - old) * (new + old);
        }
        self.since_refresh += 1;
    }
}

fn rel_dev(old: &[f64], new: &[f64]) -> f64 {
    let scale = new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = old
        .iter()
        .zip(new)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

/// Random-coordinate descent.
pub fn run_rcd(h: &PauliSum, kp0: &KParams, cfg: &OptConfig) -> Result<OptTrace> {
    let model = CostModel::new(h, kp0.ansatz())?;
    run_rcd_with(&model, kp0, cfg)
}

/// [`run_rcd`] on a prebuilt model.
pub fn run_rcd_with(model: &CostModel, kp0: &KParams, cfg: &OptConfig) -> Result<OptTrace> {
    check_start(model, kp0, cfg)?;
    let d = model.d();
    if cfg.block_size > 2 * d {
        return Err(Error::invalid(format!(
            "block_size {} exceeds 2d = {}",
            cfg.block_size,
            2 * d
        )));
    }
    let full = cfg.block_size == 2 * d;
    let w = cfg.penalty_weight.resolve(model);
    let mult = cfg.step_scale.resolve(model, kp0, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = IncrementalState::new(model, kp0)?;
    let mut rec = Recorder::new(cfg.record_wall_time);
    let mut drift = None;
    let mut snapshots = Vec::new();
    let mut t = 0;
    loop {
        let (f, phi) = st.values();
        let coords: Vec<usize> = if full {
            (0..2 * d).collect()
        } else {
            let mut c = rand::seq::index::sample(&mut rng, 2 * d, cfg.block_size).into_vec();
            c.sort_unstable();
            c
        };
        let mut js: Vec<usize> = coords.iter().map(|&c| c % d).collect();
        js.sort_unstable();
        js.dedup();
        let parts: Vec<GradParts> = js.iter().map(|&j| st.partials(model, j)).collect();
        let grad = |c: usize, weight: f64| {
            let (gr, gt) = parts[js.binary_search(&(c % d)).expect("sampled")].weighted(weight);
            if c >= d {
                gt
            } else {
                gr
            }
        };
        let gn = coords
            .iter()
            .map(|&c| grad(c, 1.0).powi(2))
            .sum::<f64>()
            .sqrt();
        let record = rec.push(t, f, phi, gn);
        record.cache_drift = drift.take();
        if wants_snapshot(cfg, t) {
            snapshots.push(Snapshot {
                iter: t,
                params: st.params(kp0)?,
            });
        }
        let stop = if f + phi < cfg.stop_tol {
            Some(StopReason::CostBelowTol)
        } else if full && gn < cfg.grad_tol {
            Some(StopReason::StationaryPoint)
        } else if t >= cfg.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            return Ok(OptTrace {
                records: rec.records,
                final_params: st.params(kp0)?,
                stop_reason,
                snapshots,
            });
        }

        let a = cfg.lr.at(t) * mult;
        let rho = st.rho();
        let mut changes: Vec<(usize, f64, f64)> = js
            .iter()
            .map(|&j| (j, st.r[j] / rho, st.theta[j]))
            .collect();
        for &c in &coords {
            let slot = js.binary_search(&(c % d)).expect("sampled");
            if c >= d {
                changes[slot].2 -= a * grad(c, w);
            } else {
                changes[slot].1 -= a * grad(c, w);
            }
        }
        // ‖y‖² = 1 − Σ_J r_j² + Σ_J y_j² on the normalized point.
        let mut norm2 = 1.0;
        for (&j, ch) in js.iter().zip(&changes) {
            norm2 += ch.1 * ch.1 - (st.r[j] / rho).powi(2);
        }
        let norm = norm2.max(0.0).sqrt();
        if !(norm >= COLLAPSE_TOL) {
            return Err(Error::RadialCollapse { iter: t, norm });
        }
        rec.records.last_mut().expect("recorded").r_norm_pre = Some(norm);
        for ch in &mut changes {
            ch.1 *= rho;
        }
        st.apply(model, &changes);
        t += 1;
        if st.since_refresh >= cfg.refresh_every {
            drift = Some(st.refresh(model));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_random_udu, build_xxz, random_ansatz};
    use crate::pauli::PauliString;
    use rand::Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn random_params(ansatz: Vec<PauliString>, seed: u64) -> KParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = ansatz.len();
        let r = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let theta = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        KParams::new(ansatz, r, theta)
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn schedules() {
        assert_eq!(LrSchedule::Constant { a: 0.05 }.at(100), 0.05);
        let dec = LrSchedule::Decay {
            a0: 0.1,
            rate: 0.01,
        };
        assert_eq!(dec.at(0), 0.1);
        assert!((dec.at(100) - 0.05).abs() < 1e-15);
        assert!(LrSchedule::Constant { a: 1.0 }.validate().is_err());
        assert!(LrSchedule::Decay {
            a0: 0.5,
            rate: -1.0
        }
        .validate()
        .is_err());
        let cfg = OptConfig::default();
        assert_eq!(lr_schedule_eval(&cfg, 7), 0.9);
    }

    #[test]
    fn alpha() {
        assert!((estimate_alpha(0.3, (4.0f64 * 0.3).sqrt()).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_alpha(1e-4, 4e-4f64.sqrt()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(estimate_alpha(0.0, 1.0), None);
        assert_eq!(estimate_alpha(1.0, 1.0), None);
        assert_eq!(estimate_alpha(0.5, 0.0), None);
    }

    #[test]
    fn median_window() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn fixed_point() {
        let h = PauliSum::single(ps("Z"), Complex64::new(1.0, 0.0));
        let kp = KParams::identity(1);
        let tr = run_gd(&h, &kp, &OptConfig::default()).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.stop_reason, StopReason::CostBelowTol);
        assert_eq!(tr.final_params, kp);
    }

    #[test]
    fn rejects_bad_start() {
        let h = build_xxz(2, 1.0, 1.0).unwrap();
        let kp = KParams::new(vec![ps("XI")], vec![0.5], vec![0.0]).unwrap();
        assert!(matches!(
            run_gd(&h, &kp, &OptConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            run_rcd(&h, &kp, &OptConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
        let kp = kp.normalized().unwrap();
        let cfg = OptConfig {
            block_size: 3,
            ..Default::default()
        };
        assert!(run_rcd(&h, &kp, &cfg).is_err());
    }

    #[test]
    fn radial_collapse() {
        let h = build_xxz(2, 1.0, 0.3).unwrap();
        let kp = random_params(vec![ps("XY"), ps("ZI"), ps("IY")], 3);
        let cfg = OptConfig {
            step_scale: StepScale::Fixed(1e9),
            max_iters: 10,
            ..Default::default()
        };
        match run_gd(&h, &kp, &cfg) {
            Err(Error::RadialCollapse { .. }) | Ok(_) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn gd_normalizes_and_descends() {
        let inst = build_random_udu(3, 3, 2, 5).unwrap();
        let u = crate::cost::KParams::from_sum(&inst.u.expand()).unwrap();
        let kp = crate::models::perturb(&u, 1e-2, 1).unwrap();
        let cfg = OptConfig {
            max_iters: 200,
            ..Default::default()
        };
        let tr = run_gd(&inst.h, &kp, &cfg).unwrap();
        assert!((tr.final_params.r_norm() - 1.0).abs() < 1e-12);
        assert!(tr.last().f_total < tr.records[0].f_total);
        for w in tr.records.windows(2) {
            assert_eq!(w[1].iter, w[0].iter + 1);
            assert!(w[0].r_norm_pre.unwrap() > 0.0);
        }
    }

    #[test]
    fn incremental_matches_scratch() {
        for seed in 0..6 {
            let ansatz = random_ansatz(2, 6, seed % 2 == 0, seed).unwrap();
            let h = PauliSum::from_real_terms(
                2,
                [
                    (ps("XX"), 0.7),
                    (ps("ZY"), -0.3),
                    (ps("IZ"), 1.1),
                    (ps("YI"), 0.4),
                ],
            )
            .unwrap();
            let model = CostModel::new(&h, &ansatz).unwrap();
            let kp = random_params(ansatz, 100 + seed);
            let mut st = IncrementalState::new(&model, &kp).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..30 {
                let j = rng.gen_range(0..6);
                let j2 = rng.gen_range(0..6);
                let mut ch = vec![(
                    j,
                    st.r[j] + rng.gen_range(-0.2..0.2),
                    st.theta[j] + rng.gen_range(-0.5..0.5),
                )];
                if j2 != j {
                    ch.push((j2, st.r[j2] * 1.1, st.theta[j2] - 0.2));
                }
                st.apply(&model, &ch);
                let kp_now = st.params(&kp).unwrap();
                let exact = model.eval_grad(&kp_now).unwrap();
                let (f, phi) = st.values();
                assert!((f - exact.f_value).abs() <= 1e-9 * exact.f_value.max(1e-12));
                assert!((phi - exact.penalty).abs() <= 1e-9 * exact.penalty.max(1e-12));
                for jj in 0..6 {
                    let (gr, gt) = st.partials(&model, jj).weighted(1.0);
                    assert!((gr - exact.grad_r[jj]).abs() <= 1e-9 * (1.0 + exact.grad_r[jj].abs()));
                    assert!(
                        (gt - exact.grad_theta[jj]).abs()
                            <= 1e-9 * (1.0 + exact.grad_theta[jj].abs())
                    );
                }
            }
            assert!(st.refresh(&model) < 1e-9);
        }
    }

    #[test]
    fn rcd_full_block_is_gd() {
        let inst = build_random_udu(3, 3, 2, 11).unwrap();
        let kp =
            crate::models::perturb(&KParams::from_sum(&inst.u.expand()).unwrap(), 0.05, 2).unwrap();
        let d = kp.d();
        let cfg = OptConfig {
            max_iters: 60,
            block_size: 2 * d,
            refresh_every: 7,
            ..Default::default()
        };
        let a = run_gd(&inst.h, &kp, &cfg).unwrap();
        let b = run_rcd(&inst.h, &kp, &cfg).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!((x.f_total - y.f_total).abs() <= 1e-10 * x.f_total.max(1.0));
        }
        assert!(b
            .records
            .iter()
            .filter_map(|r| r.cache_drift)
            .all(|v| v < 1e-9));
    }

    #[test]
    fn rcd_deterministic() {
        let h = build_xxz(3, 1.0, 0.7).unwrap();
        let kp =
            crate::models::warm_start_from_dense(&build_xxz(3, 1.0, 0.5).unwrap(), 1e-12).unwrap();
        let cfg = OptConfig {
            max_iters: 40,
            seed: 9,
            ..Default::default()
        };
        let a = run_rcd(&h, &kp, &cfg).unwrap();
        let b = run_rcd(&h, &kp, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        assert_eq!(read_trace_jsonl(buf.as_slice()).unwrap(), a.records);
        assert!(matches!(
            read_trace_jsonl(&b"{}\nnot json\n"[..]),
            Err(Error::Format { line: 1, .. })
        ));
    }
}
