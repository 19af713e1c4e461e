//! The `opkernel` command line. One command runs one library operation and
//! emits a JSON report.
//!
//! Exit statuses: 0 success or affirmative answer, 1 well-formed negative
//! answer, 2 malformed input, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::algebra::{cyclic_group_table, symmetric_group_table, Algebra};
use crate::channel::{amplification_check, simulate_kernel, trace_nonincreasing_check, Effect};
use crate::domination::{commutant, dominates, is_irreducible, radon_nikodym};
use crate::error::{Error, Result};
use crate::io::{self, AlgebraSpec, CertificateFile, FactorizationFile};
use crate::kernel::{random_in_m, Membership, OperatorKernel, RandomParams, Witness};
use crate::stinespring::{factor_with, FactorOptions, Factorization, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Samples drawn by the trace and amplification checks of `channel-sim`.
const CHANNEL_SAMPLES: usize = 100;

#[derive(Debug, Clone, Parser)]
#[command(name = "opkernel", version, about = "Operator-valued positive definite kernels")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Slack of positivity tests (relative to max(1, lambda_max)).
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub psd_tol: f64,

    /// Relative eigenvalue cutoff for the factorization rank.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rank_tol: f64,

    /// Tolerance for certificates and verification residuals.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub cert_tol: f64,

    /// Write the report here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Test membership of a kernel in the positive class.
    Check { kernel: PathBuf },
    /// Minimal factorization; the report doubles as a factorization file.
    Factor { kernel: PathBuf },
    /// Decide K <= L.
    Dominate { k: PathBuf, l: PathBuf },
    /// Radon-Nikodym derivative dK/dL; the report doubles as a certificate file.
    Rn {
        k: PathBuf,
        l: PathBuf,
        #[arg(long)]
        fact: Option<PathBuf>,
    },
    /// Irreducibility of the minimal representation.
    Irreducible {
        kernel: PathBuf,
        #[arg(long)]
        fact: Option<PathBuf>,
    },
    /// Simulate a dominated kernel by effect post-processing of L.
    ChannelSim {
        l: PathBuf,
        #[arg(long)]
        fact: PathBuf,
        #[arg(long, conflicts_with = "scalar", required_unless_present = "scalar")]
        effect: Option<PathBuf>,
        #[arg(long)]
        scalar: Option<f64>,
        /// Write the simulated kernel file here.
        #[arg(long)]
        kernel_out: Option<PathBuf>,
        /// Compare the simulated kernel against this kernel file.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a seeded random instance with a ground-truth sidecar.
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Matrix block dimensions, e.g. `2,1`.
        #[arg(long, value_delimiter = ',', conflicts_with = "group")]
        blocks: Vec<usize>,
        /// `cyclic:N` or `symmetric:K`.
        #[arg(long)]
        group: Option<String>,
        /// Multiplicity of each block.
        #[arg(long, value_delimiter = ',')]
        mult: Vec<usize>,
        #[arg(long)]
        seed: u64,
        /// `scalar <lambda>` or `commutant`.
        #[arg(long, num_args = 1..=2)]
        dominated: Vec<String>,
        /// Output prefix: writes `<out>.kernel.json`, `<out>.truth.json` and
        /// optionally `<out>.dominated.kernel.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a factorization file against its kernel.
    Verify {
        kernel: PathBuf,
        #[arg(long)]
        fact: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Check { .. } => "check",
            Self::Factor { .. } => "factor",
            Self::Dominate { .. } => "dominate",
            Self::Rn { .. } => "rn",
            Self::Irreducible { .. } => "irreducible",
            Self::ChannelSim { .. } => "channel-sim",
            Self::Generate { .. } => "generate",
            Self::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: i32,
    pub report: Value,
}

pub fn exit_status(err: &Error) -> i32 {
    match err {
        Error::NotPositive { .. } | Error::NotDominated { .. } => EXIT_NEGATIVE,
        Error::IllConditioned { .. }
        | Error::ContractionViolation { .. }
        | Error::CertificateInvalid { .. }
        | Error::Inconsistency(_)
        | Error::NonCommutingEffect { .. } => EXIT_NUMERICAL,
        Error::InvalidArgument(_)
        | Error::MalformedKernel(_)
        | Error::InvalidEffect { .. }
        | Error::Parse(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_MALFORMED,
    }
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let mut report = json!({
        "command": cfg.command.name(),
        "tolerances": {
            "psd_tol": cfg.psd_tol,
            "rank_tol": cfg.rank_tol,
            "cert_tol": cfg.cert_tol,
        },
    });
    let result = validate(cfg).and_then(|()| dispatch(cfg));
    let status = match result {
        Ok((status, body)) => {
            merge(&mut report, body);
            status
        }
        Err(err) => {
            let status = exit_status(&err);
            let mut body = json!({ "error": err.to_string() });
            if let Error::NotPositive { witness, .. } | Error::NotDominated { witness, .. } = &err {
                body["witness"] = witness_json(witness);
            }
            merge(&mut report, body);
            status
        }
    };
    report["status"] = json!(status);
    Outcome { status, report }
}

fn validate(cfg: &RunConfig) -> Result<()> {
    for (name, v) in [("psd_tol", cfg.psd_tol), ("rank_tol", cfg.rank_tol), ("cert_tol", cfg.cert_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be strictly positive")));
        }
    }
    Ok(())
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn dispatch(cfg: &RunConfig) -> Result<(i32, Value)> {
    match &cfg.command {
        Command::Check { kernel } => {
            let k = io::read_kernel::<f64>(kernel)?;
            let mem = k.is_in_class_m(cfg.psd_tol)?;
            let status = if mem.in_class { EXIT_OK } else { EXIT_NEGATIVE };
            let mut body = membership_json(&mem);
            body["in_class_M"] = json!(mem.in_class);
            body["grid_size"] = json!(k.grid_size());
            Ok((status, body))
        }
        Command::Factor { kernel } => {
            let k = io::read_kernel::<f64>(kernel)?;
            let f = factor(cfg, &k)?;
            let rep = f.verify(cfg.cert_tol)?;
            let mut body = serde_json::to_value(io::factorization_to_file(&f))?;
            body["verify"] = verify_json(&rep);
            Ok((EXIT_OK, body))
        }
        Command::Dominate { k, l } => {
            let (k, l) = read_pair(k, l)?;
            let mem = dominates(&k, &l, cfg.psd_tol)?;
            let mut body = membership_json(&mem);
            body["dominated"] = json!(mem.in_class);
            Ok((if mem.in_class { EXIT_OK } else { EXIT_NEGATIVE }, body))
        }
        Command::Rn { k, l, fact } => {
            let (k, l) = read_pair(k, l)?;
            let fl = load_or_factor(cfg, &l, fact.as_deref())?;
            let cert = radon_nikodym(&k, &l, &fl, cfg.cert_tol)?;
            let mut body = serde_json::to_value(io::certificate_to_file(&cert))?;
            body["r"] = json!(fl.r());
            Ok((EXIT_OK, body))
        }
        Command::Irreducible { kernel, fact } => {
            let k = io::read_kernel::<f64>(kernel)?;
            let f = load_or_factor(cfg, &k, fact.as_deref())?;
            let irreducible = is_irreducible(&f)?;
            let body = json!({
                "r": f.r(),
                "commutant_dim": commutant(&f).len(),
                "irreducible": irreducible,
            });
            Ok((if irreducible { EXIT_OK } else { EXIT_NEGATIVE }, body))
        }
        Command::ChannelSim {
            l,
            fact,
            effect,
            scalar,
            kernel_out,
            compare,
            seed,
        } => {
            let l = io::read_kernel::<f64>(l)?;
            let fl = load_fact(fact, &l)?;
            let eff = match (effect, scalar) {
                (Some(path), _) => {
                    let file: CertificateFile = io::read_json(path)?;
                    Effect::from_matrix(&io::certificate_effect_matrix(&file)?, cfg.cert_tol)?
                }
                (None, Some(lambda)) => Effect::scalar(*lambda, fl.r())?,
                (None, None) => return Err(Error::InvalidArgument("need --effect or --scalar".into())),
            };
            let sim = simulate_kernel(&l, &fl, &eff)?;
            let trace = trace_nonincreasing_check(&eff, CHANNEL_SAMPLES, *seed)?;
            let amp = amplification_check(&eff, 2, CHANNEL_SAMPLES, *seed)?;
            let mut body = json!({
                "r": fl.r(),
                "commutator_residual": sim.commutator_residual,
                "range_residual": sim.range_residual,
                "trace_check": {
                    "samples": trace.samples,
                    "max_trace_excess": trace.max_trace_excess,
                    "min_eigenvalue": trace.min_eigenvalue,
                    "violations": trace.violations,
                },
                "amplification_check": {
                    "amplification": amp.amplification,
                    "samples": amp.samples,
                    "min_eigenvalue": amp.min_eigenvalue,
                    "pass": amp.pass,
                },
            });
            if let Some(path) = compare {
                let target = io::read_kernel::<f64>(path)?;
                body["fidelity_residual"] = json!(sim.kernel.max_block_residual(&target)?);
            }
            if let Some(path) = kernel_out {
                io::write_json(path, &io::kernel_to_file(&sim.kernel))?;
                body["kernel_out"] = json!(path.display().to_string());
            } else {
                body["kernel"] = serde_json::to_value(io::kernel_to_file(&sim.kernel))?;
            }
            let status = if trace.violations == 0 && amp.pass { EXIT_OK } else { EXIT_NUMERICAL };
            Ok((status, body))
        }
        Command::Generate {
            m,
            n,
            blocks,
            group,
            mult,
            seed,
            dominated,
            out,
        } => generate(*m, *n, blocks, group.as_deref(), mult, *seed, dominated, out),
        Command::Verify { kernel, fact } => {
            let k = io::read_kernel::<f64>(kernel)?;
            let f = load_fact(fact, &k)?;
            let rep = f.verify(cfg.cert_tol)?;
            let body = json!({
                "r": f.r(),
                "diagnostics": io::diagnostics_json(&f.diagnostics),
                "verify": verify_json(&rep),
                "all_pass": rep.all_pass(),
            });
            Ok((if rep.all_pass() { EXIT_OK } else { EXIT_NUMERICAL }, body))
        }
    }
}

fn factor(cfg: &RunConfig, k: &OperatorKernel<f64>) -> Result<Factorization<f64>> {
    factor_with(
        k,
        &FactorOptions {
            rank_tol: cfg.rank_tol,
            psd_tol: cfg.psd_tol,
            grid_order: None,
        },
    )
}

fn load_fact(path: &Path, k: &OperatorKernel<f64>) -> Result<Factorization<f64>> {
    let file: FactorizationFile = io::read_json(path)?;
    io::factorization_from_file(&file, k)
}

fn load_or_factor(cfg: &RunConfig, k: &OperatorKernel<f64>, path: Option<&Path>) -> Result<Factorization<f64>> {
    match path {
        Some(p) => load_fact(p, k),
        None => factor(cfg, k),
    }
}

/// Reads K and L over one shared algebra.
fn read_pair(k: &Path, l: &Path) -> Result<(OperatorKernel<f64>, OperatorKernel<f64>)> {
    let kf: io::KernelFile = io::read_json(k)?;
    let lf: io::KernelFile = io::read_json(l)?;
    let alg = Arc::new(lf.algebra.build::<f64>()?);
    if kf.algebra != lf.algebra {
        return Err(Error::InvalidArgument("K and L are over different algebras".into()));
    }
    let k = io::kernel_from_file_with(&kf, alg.clone())?;
    let l = io::kernel_from_file_with(&lf, alg)?;
    if !k.compatible(&l) {
        return Err(Error::InvalidArgument("K and L differ in points or hdim".into()));
    }
    Ok((k, l))
}

fn algebra_for(blocks: &[usize], group: Option<&str>) -> Result<Algebra<f64>> {
    match group {
        None => Algebra::from_matrix_blocks(blocks),
        Some(spec) => {
            let (kind, size) = spec
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("group {spec:?} is not kind:size")))?;
            let size: usize = size
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad group size in {spec:?}")))?;
            let table = match kind {
                "cyclic" if size >= 1 => cyclic_group_table(size),
                "symmetric" if (1..=5).contains(&size) => symmetric_group_table(size),
                _ => return Err(Error::InvalidArgument(format!("unsupported group {spec:?}"))),
            };
            Algebra::from_group_table(&table, 0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    m: usize,
    n: usize,
    blocks: &[usize],
    group: Option<&str>,
    mult: &[usize],
    seed: u64,
    dominated: &[String],
    out: &Path,
) -> Result<(i32, Value)> {
    let alg = Arc::new(algebra_for(blocks, group)?);
    let multiplicities = if mult.is_empty() {
        vec![1; alg.block_dims().len()]
    } else {
        mult.to_vec()
    };
    let params = RandomParams {
        m,
        n,
        multiplicities,
        seed,
    };
    let rk = random_in_m(alg.clone(), &params)?;
    let path = |suffix: &str| {
        let mut s = out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    let kernel_path = path(".kernel.json");
    io::write_json(&kernel_path, &io::kernel_to_file(&rk.kernel))?;
    let mut body = json!({
        "kernel": kernel_path.display().to_string(),
        "algebra": AlgebraSpec::of(&alg),
        "grid_size": rk.kernel.grid_size(),
        "r_ground_truth": rk.truth.r(),
    });

    let (weight, lambda) = match dominated.first().map(String::as_str) {
        None => (None, None),
        Some("scalar") => {
            let lambda: f64 = dominated
                .get(1)
                .ok_or_else(|| Error::InvalidArgument("--dominated scalar needs a value".into()))?
                .parse()
                .map_err(|_| Error::InvalidArgument("bad --dominated scalar value".into()))?;
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidArgument("--dominated scalar must lie in [0, 1]".into()));
            }
            let w = crate::linalg::identity::<f64>(rk.truth.r()) * crate::num::cr(lambda);
            (Some(w), Some(lambda))
        }
        Some("commutant") => {
            let w = rk.truth.random_commutant_contraction(seed ^ 0x5eed_c0de);
            (Some(w), None)
        }
        Some(other) => return Err(Error::InvalidArgument(format!("unknown --dominated mode {other:?}"))),
    };
    if let Some(w) = &weight {
        let k = rk.truth.kernel(rk.kernel.points().to_vec(), alg.clone(), Some(w))?;
        let dpath = path(".dominated.kernel.json");
        io::write_json(&dpath, &io::kernel_to_file(&k))?;
        body["dominated_kernel"] = json!(dpath.display().to_string());
    }
    let truth_path = path(".truth.json");
    io::write_json(&truth_path, &io::truth_to_file(&rk.truth, seed, weight.as_ref(), lambda))?;
    body["truth"] = json!(truth_path.display().to_string());
    Ok((EXIT_OK, body))
}

fn pair(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn witness_json(w: &Witness) -> Value {
    json!({
        "eigenvalue": w.eigenvalue,
        "terms": w.terms.iter().map(|t| json!({
            "point": t.point + 1,
            "label": t.label,
            "alpha": t.alpha + 1,
            "p": t.p + 1,
            "coeff": pair(t.coeff),
        })).collect::<Vec<_>>(),
    })
}

fn membership_json(mem: &Membership) -> Value {
    let mut v = json!({
        "min_eigenvalue": mem.min_eigenvalue,
        "max_eigenvalue": mem.max_eigenvalue,
        "threshold": mem.threshold,
    });
    if let Some(w) = &mem.witness {
        v["witness"] = witness_json(w);
    }
    v
}

fn verify_json(rep: &VerifyReport) -> Value {
    let check = |c: &crate::stinespring::Check| json!({ "pass": c.pass, "residual": c.residual });
    json!({
        "star_law": check(&rep.star_law),
        "homomorphism": check(&rep.homomorphism),
        "unitality": check(&rep.unitality),
        "reconstruction": check(&rep.reconstruction),
        "minimality": {
            "pass": rep.minimality.pass,
            "rank": rep.minimality.rank,
            "r": rep.minimality.r,
            "conditioning": rep.minimality.conditioning,
        },
    })
}

/// Caps the global thread pool from `OPKERNEL_THREADS` (0 or unset = auto).
pub fn configure_threads() {
    let threads = std::env::var("OPKERNEL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a pool may already exist when embedded; keep it in that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

pub fn write_report(cfg: &RunConfig, outcome: &Outcome) -> Result<()> {
    let text = io::to_json_string(&outcome.report)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
