// SPDX-License-Identifier: Apache-2.0

//! Run configuration (TOML) and the pipeline that turns one into a result.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, KParams};
use crate::error::{Error, Result};
use crate::models::{perturb, warm_start_from_dense, ModelSpec, WARM_START_PRUNE_TOL};
use crate::operator::PauliSum;
use crate::optimizer::{run_gd_with, run_rcd_with, OptConfig, OptTrace};
use crate::pauli::PauliString;
use crate::verify::{diag_report, frobenius_error, DiagReport};

/// Qubit limit for the full-basis ansatz.
pub const FULL_BASIS_LIMIT: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Gd,
    Rcd,
}

/// Where the ansatz and the starting point come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ansatz {
    /// Strings of the model's known unitary, starting at its coefficients.
    UduSupport {
        #[serde(default)]
        perturb: f64,
    },
    /// All `4^n` strings, starting at the identity.
    FullBasis {
        #[serde(default)]
        perturb: f64,
    },
    /// Pauli expansion of the eigenvector matrix of a reference model.
    WarmStart {
        reference: ModelSpec,
        #[serde(default = "default_prune")]
        prune_tol: f64,
        #[serde(default)]
        perturb: f64,
    },
    /// Parameters read from a JSON file.
    File {
        path: PathBuf,
        #[serde(default)]
        perturb: f64,
    },
}

fn default_prune() -> f64 {
    WARM_START_PRUNE_TOL
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; the `--out-dir` flag overrides it.
    pub dir: Option<PathBuf>,
    /// Skip the dense report (for systems beyond the dense limit).
    pub skip_report: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub ansatz: Ansatz,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Optimizer settings; unset fields take the defaults of `algorithm`.
    #[serde(default)]
    pub optimizer: Option<toml::Table>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for the starting-point perturbation.
    #[serde(default)]
    pub perturb_seed: u64,
}

fn toml_error(e: toml::de::Error, text: &str) -> Error {
    let message = e.message().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            Error::Config(format!("line {line}: {message}"))
        }
        None => Error::Config(message),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(e, text))
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ModelSpec::File { path } = &mut self.model {
            fix(path);
        }
        match &mut self.ansatz {
            Ansatz::File { path, .. } => fix(path),
            Ansatz::WarmStart {
                reference: ModelSpec::File { path },
                ..
            } => fix(path),
            _ => {}
        }
        if let Some(dir) = &mut self.output.dir {
            fix(dir);
        }
    }

    /// Optimizer settings with algorithm defaults filled in.
    pub fn opt_config(&self) -> Result<OptConfig> {
        let base = OptConfig::default();
        let Some(table) = &self.optimizer else {
            return Ok(base);
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in table {
            merged.insert(k.clone(), v.clone());
        }
        let cfg: OptConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[optimizer]: {}", e.message())))?;
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks that referenced files exist and the ansatz is allowed.
    pub fn validate(&self) -> Result<()> {
        if let ModelSpec::File { path } = &self.model {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "model file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Ansatz::File { path, .. } = &self.ansatz {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "parameter file {} does not exist",
                    path.display()
                )));
            }
        }
        self.opt_config()?;
        Ok(())
    }

    /// The config with every seed shifted by `offset`.
    pub fn with_seed_offset(&self, offset: u64) -> Self {
        let mut out = self.clone();
        if let ModelSpec::RandomUdu { seed, .. } = &self.model {
            out.model = self.model.with_seed(seed.wrapping_add(offset));
        }
        out.perturb_seed = self.perturb_seed.wrapping_add(offset);
        let mut table = self.optimizer.clone().unwrap_or_default();
        let seed = table.get("seed").and_then(|v| v.as_integer()).unwrap_or(0) as u64;
        table.insert(
            "seed".into(),
            toml::Value::Integer(seed.wrapping_add(offset) as i64),
        );
        out.optimizer = Some(table);
        out
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.model = self.model.with_seed(seed);
        out.perturb_seed = seed;
        let mut table = self.optimizer.clone().unwrap_or_default();
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
        out.optimizer = Some(table);
        out
    }
}

/// Builds the Hamiltonian and the starting parameters.
pub fn prepare(cfg: &RunConfig) -> Result<(PauliSum, KParams)> {
    let built = cfg.model.build()?;
    let h = built.h;
    let (kp, amount) = match &cfg.ansatz {
        Ansatz::UduSupport { perturb } => {
            let u = built.unitary.ok_or_else(|| {
                Error::Config("udu_support needs a model with a known unitary".into())
            })?;
            (KParams::from_sum(&u)?.normalized()?, *perturb)
        }
        Ansatz::FullBasis { perturb } => {
            let n = h.n();
            if n > FULL_BASIS_LIMIT {
                return Err(Error::Config(format!(
                    "full_basis allows n <= {FULL_BASIS_LIMIT}, model has {n}"
                )));
            }
            let ansatz: Vec<PauliString> = PauliString::all(n).collect();
            let mut r = vec![0.0; ansatz.len()];
            r[0] = 1.0;
            let theta = vec![0.0; ansatz.len()];
            (KParams::new(ansatz, r, theta)?, *perturb)
        }
        Ansatz::WarmStart {
            reference,
            prune_tol,
            perturb,
        } => {
            let reference = reference.build()?.h;
            if reference.n() != h.n() {
                return Err(Error::DimensionMismatch {
                    left: h.n(),
                    right: reference.n(),
                });
            }
            (warm_start_from_dense(&reference, *prune_tol)?, *perturb)
        }
        Ansatz::File { path, perturb } => {
            let text = std::fs::read_to_string(path)?;
            let kp: KParams = serde_json::from_str(&text)?;
            if kp.n() != h.n() {
                return Err(Error::DimensionMismatch {
                    left: h.n(),
                    right: kp.n(),
                });
            }
            (kp.normalized()?, *perturb)
        }
    };
    let kp = if amount > 0.0 {
        perturb(&kp, amount, cfg.perturb_seed)?
    } else {
        kp
    };
    Ok((h, kp))
}

/// Outcome of one configured run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub h: PauliSum,
    pub initial: KParams,
    pub trace: OptTrace,
    pub initial_error: Option<f64>,
    pub report: Option<DiagReport>,
}

impl RunOutcome {
    pub fn final_error(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.frob_error)
    }

    /// One line: initial error, final error, iterations, final cost.
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        format!(
            "initial error {}  final error {}  iterations {}  F {:.3e}",
            fmt(self.initial_error),
            fmt(self.final_error()),
            self.trace.iterations(),
            self.trace.last().f_total
        )
    }
}

/// Runs a config end to end (no file output).
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let opt = cfg.opt_config()?;
    let (h, kp0) = prepare(cfg)?;
    let model = CostModel::new(&h, kp0.ansatz())?;
    let dense = !cfg.output.skip_report;
    let initial_error = if dense {
        Some(frobenius_error(&h, &kp0)?)
    } else {
        None
    };
    let trace = match cfg.algorithm {
        Algorithm::Gd => run_gd_with(&model, &kp0, &opt)?,
        Algorithm::Rcd => run_rcd_with(&model, &kp0, &opt)?,
    };
    let report = if dense {
        let rep = model.eval(&trace.final_params)?;
        Some(diag_report(
            &h,
            &trace.final_params,
            rep.total,
            rep.penalty,
        )?)
    } else {
        None
    };
    Ok(RunOutcome {
        h,
        initial: kp0,
        trace,
        initial_error,
        report,
    })
}

/// Only the `[model]` table of a config; other keys are ignored.
#[derive(Clone, Debug, Deserialize)]
pub struct ModelOnly {
    pub model: ModelSpec,
}

impl ModelOnly {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut out: ModelOnly = toml::from_str(&text).map_err(|e| toml_error(e, &text))?;
        if let ModelSpec::File { path: p } = &mut out.model {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(out)
    }
}
