// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use paulidiag::config::{execute, ModelOnly, RunConfig, RunOutcome};
use paulidiag::optimizer::read_trace_jsonl;
use paulidiag::verify::{diag_report, lie_closure_dim};
use paulidiag::{CostModel, Error, KParams, PauliSum};

const THREADS_ENV: &str = "PAULI_DIAG_THREADS";
const EXIT_BOUNDS: u8 = 4;

// Like println!, but a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "paulidiag",
    version,
    about = "Diagonalize qubit Hamiltonians in the Pauli basis"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an optimizer from a TOML config.
    Diagonalize {
        /// Config file; repeat together with --sweep to run several.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Replace every seed in the config.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Run the configs concurrently; run `i` adds `i` to every seed.
        #[arg(long)]
        sweep: bool,
    },
    /// Check parameters against a Hamiltonian and print the report.
    Verify {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Dimension of the Lie algebra generated by a model's strings.
    Liedim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1 << 20)]
        cap: usize,
    },
    /// Convert a JSON-lines trace into cost and alpha CSV files.
    TraceExport {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::RadialCollapse { .. } => 2,
        Error::DenseInfeasible { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Diagonalize {
            config,
            out_dir,
            seed_override,
            sweep,
        } => diagonalize(&config, out_dir.as_deref(), seed_override, sweep),
        Cmd::Verify {
            hamiltonian,
            params,
        } => verify(&hamiltonian, &params),
        Cmd::Liedim { config, cap } => liedim(&config, cap),
        Cmd::TraceExport {
            trace,
            out_dir,
            format,
        } => trace_export(&trace, &out_dir, &format),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_outputs(dir: &Path, out: &RunOutcome) -> paulidiag::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("trace.jsonl"))?);
    out.trace.write_jsonl(&mut w)?;
    w.flush()?;
    let params = serde_json::to_string_pretty(&out.trace.final_params)?;
    std::fs::write(dir.join("params.json"), params + "\n")?;
    if let Some(rep) = &out.report {
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(rep)? + "\n",
        )?;
    }
    std::fs::write(dir.join("hamiltonian.txt"), out.h.to_text())?;
    Ok(())
}

fn diagonalize(
    paths: &[PathBuf],
    out_dir: Option<&Path>,
    seed: Option<u64>,
    sweep: bool,
) -> paulidiag::Result<u8> {
    if paths.len() > 1 && !sweep {
        return Err(Error::Config("several configs need --sweep".into()));
    }
    let mut cfgs = Vec::with_capacity(paths.len());
    for p in paths {
        let mut cfg = RunConfig::read(p)?;
        if let Some(s) = seed {
            cfg = cfg.with_seed(s);
        }
        cfg.validate()?;
        cfgs.push(cfg);
    }
    let dir_of = |i: usize, cfg: &RunConfig| -> PathBuf {
        let base = out_dir
            .map(Path::to_path_buf)
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| ".".into());
        if sweep {
            base.join(format!("run_{i}"))
        } else {
            base
        }
    };
    if !sweep {
        let out = execute(&cfgs[0])?;
        write_outputs(&dir_of(0, &cfgs[0]), &out)?;
        out!("{}", out.summary());
        return Ok(0);
    }
    let results: Vec<paulidiag::Result<RunOutcome>> = cfgs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let cfg = cfg.with_seed_offset(i as u64);
            let out = execute(&cfg)?;
            write_outputs(&dir_of(i, &cfg), &out)?;
            Ok(out)
        })
        .collect();
    let mut worst = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(out) => out!("run {i}: {}", out.summary()),
            Err(e) => {
                eprintln!("run {i}: error: {e}");
                worst = worst.max(exit_code(e));
            }
        }
    }
    Ok(worst)
}

fn verify(h_path: &Path, p_path: &Path) -> paulidiag::Result<u8> {
    let h = PauliSum::read_file(h_path)?;
    let kp: KParams = serde_json::from_reader(BufReader::new(File::open(p_path)?))?;
    if kp.n() != h.n() {
        return Err(Error::DimensionMismatch {
            left: h.n(),
            right: kp.n(),
        });
    }
    let norm = kp.r_norm();
    let kp = if (norm - 1.0).abs() > 1e-12 {
        eprintln!("warning: |r| = {norm}, renormalizing");
        kp.normalized()?
    } else {
        kp
    };
    let model = CostModel::new(&h, kp.ansatz())?;
    let cost = model.eval(&kp)?;
    let rep = diag_report(&h, &kp, cost.total, cost.penalty)?;
    out!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(if rep.bounds_hold() { 0 } else { EXIT_BOUNDS })
}

fn liedim(path: &Path, cap: usize) -> paulidiag::Result<u8> {
    let model = ModelOnly::read(path)?.model.build()?;
    let gens: Vec<_> = model.h.strings().collect();
    let n = model.h.n();
    let full = (1u128 << (2 * n)) - 1;
    let c = lie_closure_dim(&gens, cap)?;
    if c.overflow {
        out!("{} / {full} (cap {cap} reached)", c.dim);
    } else if c.dim as u128 == full {
        out!("{} / {full} (saturated)", c.dim);
    } else {
        out!("{} / {full} (not saturated)", c.dim);
    }
    Ok(0)
}

fn trace_export(trace: &Path, out_dir: &Path, format: &str) -> paulidiag::Result<u8> {
    if format != "csv" {
        return Err(Error::Config(format!(
            "unsupported export format {format:?}"
        )));
    }
    let records = read_trace_jsonl(BufReader::new(File::open(trace)?))?;
    std::fs::create_dir_all(out_dir)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut cost = BufWriter::new(File::create(out_dir.join("cost.csv"))?);
    writeln!(cost, "iter,f_total,f_value,penalty,grad_norm")?;
    let mut alpha = BufWriter::new(File::create(out_dir.join("alpha.csv"))?);
    writeln!(alpha, "iter,alpha,alpha_median")?;
    for r in &records {
        writeln!(
            cost,
            "{},{:e},{:e},{:e},{:e}",
            r.iter, r.f_total, r.f_value, r.penalty, r.grad_norm
        )?;
        writeln!(alpha, "{},{},{}", r.iter, opt(r.alpha), opt(r.alpha_median))?;
    }
    cost.flush()?;
    alpha.flush()?;
    out!("{} records", records.len());
    Ok(0)
}
