//! Command-line front end: solver, MMD, bound checks, benchmarks,
//! convergence sweeps, and synthetic data generation.

use clap::{Args, Parser, Subcommand, ValueEnum};
use otkit::bounds::{
    convergence_sweep_energy, frobenius_bound, holder_balanced_trials, holder_check_balanced,
    holder_check_unbalanced, holder_unbalanced_trials, upper_bound_constant_uot,
    upper_bound_constant_uot_reg, wasserstein_bound_uot, HolderReport,
};
use otkit::divergences::{mmd_elementary_bound, mmd_squared_dense, mmd_squared_nfft};
use otkit::io::{read_measure, write_measure_csv};
use otkit::kernels::RadialKernel;
use otkit::measures::{sample_uniform, CostSpec, DiscreteMeasure, WeightMode};
use otkit::sinkhorn::{
    dual_objective, lambda_scaled_solve, marginals, primal_value, sinkhorn_divergence, Backend,
    Init, SinkhornConfig,
};
use otkit::OtError;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

const EXIT_INPUT: i32 = 2;
const EXIT_SOLVER: i32 = 3;
const EXIT_VIOLATION: i32 = 4;

#[derive(Parser)]
#[command(name = "otkit", version, about = "Unbalanced optimal transport and MMD toolkit")]
struct Cli {
    /// Cap internal data parallelism (also env OTKIT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve regularized unbalanced optimal transport between two measures.
    Uot(UotArgs),
    /// Compute the maximum mean discrepancy between two measures.
    Mmd(MmdArgs),
    /// Evaluate closed-form bounds and inequality checks.
    Bounds(BoundsArgs),
    /// Benchmark solver or MMD backends over problem sizes.
    Bench(BenchArgs),
    /// Sweep the Sinkhorn divergence toward the energy-distance limit.
    Sweep(SweepArgs),
    /// Generate a synthetic measure file.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Dense,
    Nfft,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Nfft => Backend::Nfft,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zeros,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Gauss,
    Laplace,
    Imq,
    Energy,
}

#[derive(Args)]
struct KernelFlags {
    /// Radial kernel.
    #[arg(long, value_enum, default_value = "gauss")]
    kernel: KernelArg,
    /// Length scale for gauss/laplace.
    #[arg(long, default_value_t = 1.0)]
    length_scale: f64,
    /// Shift parameter for the inverse multiquadric kernel.
    #[arg(long, default_value_t = 1.0)]
    imq_c: f64,
}

impl KernelFlags {
    fn build(&self) -> Result<RadialKernel, OtError> {
        Ok(match self.kernel {
            KernelArg::Gauss => RadialKernel::gauss(self.length_scale)?,
            KernelArg::Laplace => RadialKernel::laplace(self.length_scale)?,
            KernelArg::Imq => RadialKernel::imq(self.imq_c)?,
            KernelArg::Energy => RadialKernel::Energy,
        })
    }
    fn name(&self) -> &'static str {
        match self.kernel {
            KernelArg::Gauss => "gauss",
            KernelArg::Laplace => "laplace",
            KernelArg::Imq => "imq",
            KernelArg::Energy => "energy",
        }
    }
}

#[derive(Args)]
struct UotArgs {
    /// First measure file (CSV or PGM).
    mu: PathBuf,
    /// Second measure file (CSV or PGM).
    nu: PathBuf,
    /// Ground-cost exponent (dense backend accepts any r >= 1).
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Symmetric marginal parameter (overridden by --eta1/--eta2).
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long, value_enum, default_value = "dense")]
    backend: BackendArg,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Comma-separated increasing lambda schedule ending at --lambda.
    #[arg(long, value_delimiter = ',')]
    lambda_schedule: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "zeros")]
    init: InitArg,
    /// Also report the debiased Sinkhorn divergence.
    #[arg(long)]
    debias: bool,
    /// Keep zero-intensity pixels of PGM inputs.
    #[arg(long)]
    keep_zeros: bool,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MmdArgs {
    mu: PathBuf,
    nu: PathBuf,
    #[command(flatten)]
    kernel: KernelFlags,
    #[arg(long, value_enum, default_value = "dense")]
    backend: BackendArg,
    /// Compute both backends and report the residual.
    #[arg(long)]
    verify: bool,
    /// Allow the energy kernel on measures of unequal mass.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    keep_zeros: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    CStar,
    CStarReg,
    Wasserstein,
    Frobenius,
    Holder,
    HolderUnbalanced,
    Elementary,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    check: CheckArg,
    /// Measure files; omitted for trial-based checks.
    mu: Option<PathBuf>,
    nu: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[command(flatten)]
    kernel: KernelFlags,
    /// Number of random trials (holder checks without input files).
    #[arg(long, default_value_t = 0)]
    trials: usize,
    /// Sample count per synthetic trial measure.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    keep_zeros: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Uot,
    Mmd,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "dense")]
    backends: Vec<BackendArg>,
    #[command(flatten)]
    kernel: KernelFlags,
    #[arg(long, default_value_t = 20.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Permit dense runs above 20000 points.
    #[arg(long)]
    allow_dense_large: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    p: PathBuf,
    ptilde: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    #[arg(long, default_value_t = 0.001)]
    lambda: f64,
    #[arg(long)]
    keep_zeros: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenMode {
    Unbalanced,
    Probability,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "unbalanced")]
    mode: GenMode,
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("OTKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let code = match cli.cmd {
        Cmd::Uot(a) => run("uot", cmd_uot(&a)),
        Cmd::Mmd(a) => run("mmd", cmd_mmd(&a)),
        Cmd::Bounds(a) => run("bounds", cmd_bounds(&a)),
        Cmd::Bench(a) => run("bench", cmd_bench(&a)),
        Cmd::Sweep(a) => run("sweep", cmd_sweep(&a)),
        Cmd::Gen(a) => run("gen", cmd_gen(&a)),
    };
    std::process::exit(code);
}

fn run(name: &str, outcome: Result<i32, OtError>) -> i32 {
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("otkit {name}: {e}");
            match e {
                OtError::Numeric(_) | OtError::Overflow { .. } => EXIT_SOLVER,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn digest(path: &Path) -> Result<String, OtError> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn peak_mem_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

struct Manifest {
    subcommand: &'static str,
    params: Value,
    inputs: Vec<(String, String)>, // (path, sha256)
    seed: Option<u64>,
    backend: Option<String>,
    output: Option<String>,
    start: Instant,
}

impl Manifest {
    fn new(subcommand: &'static str, params: Value) -> Self {
        Self {
            subcommand,
            params,
            inputs: Vec::new(),
            seed: None,
            backend: None,
            output: None,
            start: Instant::now(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), OtError> {
        self.inputs.push((path.display().to_string(), digest(path)?));
        Ok(())
    }

    fn finish(&self) -> Value {
        json!({
            "subcommand": self.subcommand,
            "parameters": self.params,
            "inputs": self.inputs.iter().map(|(p, d)| json!({"path": p, "sha256": d})).collect::<Vec<_>>(),
            "seed": self.seed,
            "backend": self.backend,
            "output": self.output,
            "wall_time_secs": self.start.elapsed().as_secs_f64(),
            "peak_mem_bytes_estimate": peak_mem_bytes(),
        })
    }
}

fn emit_json(output: Option<&PathBuf>, doc: &Value) -> Result<(), OtError> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| OtError::Parse(e.to_string()))?;
    match output {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_text(output: Option<&PathBuf>, text: &str) -> Result<(), OtError> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Sidecar manifest for CSV outputs (JSON results embed theirs).
fn emit_sidecar_manifest(output: Option<&PathBuf>, manifest: Value) -> Result<(), OtError> {
    if let Some(path) = output {
        let mut sidecar = path.clone();
        sidecar.set_extension("manifest.json");
        emit_json(Some(&sidecar), &manifest)?;
    }
    Ok(())
}

fn sinkhorn_config(
    lambda: f64,
    eta: f64,
    eta1: Option<f64>,
    eta2: Option<f64>,
    tol: f64,
    max_iter: usize,
    schedule: Option<Vec<f64>>,
    init: InitArg,
) -> SinkhornConfig {
    let mut cfg = SinkhornConfig::new(lambda, eta);
    cfg.eta1 = eta1.unwrap_or(eta);
    cfg.eta2 = eta2.unwrap_or(eta);
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    cfg.lambda_schedule = schedule;
    cfg.init = match init {
        InitArg::Zeros => Init::Zeros,
        InitArg::UpperBound => Init::UpperBound,
    };
    cfg
}

fn cmd_uot(args: &UotArgs) -> Result<i32, OtError> {
    let mut manifest = Manifest::new(
        "uot",
        json!({
            "r": args.r, "lambda": args.lambda,
            "eta1": args.eta1.unwrap_or(args.eta), "eta2": args.eta2.unwrap_or(args.eta),
            "tol": args.tol, "max_iter": args.max_iter,
            "lambda_schedule": args.lambda_schedule,
            "debias": args.debias,
        }),
    );
    manifest.input(&args.mu)?;
    manifest.input(&args.nu)?;
    manifest.seed = Some(args.seed);
    let backend: Backend = args.backend.into();
    manifest.backend = Some(format!("{backend:?}").to_lowercase());
    let mu = read_measure(&args.mu, !args.keep_zeros)?;
    let nu = read_measure(&args.nu, !args.keep_zeros)?;
    let cost = CostSpec::euclidean(args.r)?;
    let cfg = sinkhorn_config(
        args.lambda,
        args.eta,
        args.eta1,
        args.eta2,
        args.tol,
        args.max_iter,
        args.lambda_schedule.clone(),
        args.init,
    );
    let (pots, stats) = lambda_scaled_solve(&mu, &nu, &cost, &cfg, backend)?;
    let primal = primal_value(&pots, &mu, &nu, &cost, &cfg, backend)?;
    let dual = dual_objective(&pots, &mu, &nu, &cost, &cfg, backend)?;
    let (rows, cols) = marginals(&pots, &mu, &nu, &cost, &cfg, backend)?;
    let plan_mass: f64 = rows.iter().sum();
    let sd = if args.debias {
        Some(sinkhorn_divergence(&mu, &nu, &cost, &cfg, backend)?)
    } else {
        None
    };
    if let Some(path) = &args.output {
        manifest.output = Some(path.display().to_string());
    }
    let doc = json!({
        "result": {
            "uot_value": primal,
            "dual_value": dual,
            "plan_mass": plan_mass,
            "iterations": stats.iterations,
            "stage_lambdas": stats.stage_lambdas,
            "final_change": stats.final_change,
            "marginal_mass_mu": rows.iter().sum::<f64>(),
            "marginal_mass_nu": cols.iter().sum::<f64>(),
            "mu_mass": mu.total_mass(),
            "nu_mass": nu.total_mass(),
            "sinkhorn_divergence": sd,
        },
        "manifest": manifest.finish(),
    });
    emit_json(args.output.as_ref(), &doc)?;
    Ok(0)
}

fn cmd_mmd(args: &MmdArgs) -> Result<i32, OtError> {
    let mut manifest = Manifest::new(
        "mmd",
        json!({
            "kernel": args.kernel.name(),
            "length_scale": args.kernel.length_scale,
            "imq_c": args.kernel.imq_c,
            "verify": args.verify,
            "force": args.force,
        }),
    );
    manifest.input(&args.mu)?;
    manifest.input(&args.nu)?;
    let backend: Backend = args.backend.into();
    manifest.backend = Some(format!("{backend:?}").to_lowercase());
    let mu = read_measure(&args.mu, !args.keep_zeros)?;
    let nu = read_measure(&args.nu, !args.keep_zeros)?;
    let k = args.kernel.build()?;
    let sq = match backend {
        Backend::Dense => mmd_squared_dense(&k, &mu, &nu, args.force)?,
        Backend::Nfft => mmd_squared_nfft(&k, &mu, &nu, args.force)?,
    };
    let residual = if args.verify {
        let dense = mmd_squared_dense(&k, &mu, &nu, args.force)?.raw;
        let fast = mmd_squared_nfft(&k, &mu, &nu, args.force)?.raw;
        Some((dense - fast).abs() / dense.abs().max(1.0))
    } else {
        None
    };
    if let Some(path) = &args.output {
        manifest.output = Some(path.display().to_string());
    }
    let doc = json!({
        "result": {
            "mmd_squared": sq.value,
            "mmd": sq.value.sqrt(),
            "raw": sq.raw,
            "residual_vs_dense": residual,
        },
        "manifest": manifest.finish(),
    });
    emit_json(args.output.as_ref(), &doc)?;
    Ok(0)
}

fn holder_summary(reports: &[HolderReport], floor: f64) -> (Value, bool) {
    let gaps: Vec<f64> = reports.iter().map(|r| r.gap).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let violated = min < floor;
    (
        json!({
            "trials": reports.len(),
            "mean_gap": mean,
            "min_gap": min,
            "violated": violated,
            "reports": if reports.len() <= 16 { serde_json::to_value(reports).unwrap() } else { Value::Null },
        }),
        violated,
    )
}

fn cmd_bounds(args: &BoundsArgs) -> Result<i32, OtError> {
    let mut manifest = Manifest::new(
        "bounds",
        json!({
            "check": format!("{:?}", args.check),
            "r": args.r, "lambda": args.lambda,
            "eta1": args.eta1.unwrap_or(args.eta), "eta2": args.eta2.unwrap_or(args.eta),
            "kernel": args.kernel.name(),
            "trials": args.trials, "n": args.n,
        }),
    );
    manifest.seed = Some(args.seed);
    let cost = CostSpec::euclidean(args.r)?;
    let eta1 = args.eta1.unwrap_or(args.eta);
    let eta2 = args.eta2.unwrap_or(args.eta);
    let load = |p: &Option<PathBuf>, m: &mut Manifest| -> Result<DiscreteMeasure, OtError> {
        let path = p.as_ref().ok_or_else(|| {
            OtError::InvalidParameter("this check needs measure file arguments".into())
        })?;
        m.input(path)?;
        read_measure(path, !args.keep_zeros)
    };
    let violation;
    let result = match args.check {
        CheckArg::CStar => {
            let mu = load(&args.mu, &mut manifest)?;
            let nu = load(&args.nu, &mut manifest)?;
            let rep = upper_bound_constant_uot(&mu, &nu, &cost, eta1, eta2, None)?;
            violation = !rep.certificate_holds(1e-12);
            serde_json::to_value(&rep).unwrap()
        }
        CheckArg::CStarReg => {
            let mu = load(&args.mu, &mut manifest)?;
            let nu = load(&args.nu, &mut manifest)?;
            let rep = upper_bound_constant_uot_reg(&mu, &nu, &cost, eta1, eta2, args.lambda)?;
            violation = !rep.certificate_holds(1e-12);
            serde_json::to_value(&rep).unwrap()
        }
        CheckArg::Wasserstein => {
            let mu = load(&args.mu, &mut manifest)?;
            let nu = load(&args.nu, &mut manifest)?;
            let rep = wasserstein_bound_uot(&mu, &nu, &cost, eta1, eta2)?;
            violation = rep.gap < -1e-8;
            serde_json::to_value(&rep).unwrap()
        }
        CheckArg::Frobenius => {
            let mu = load(&args.mu, &mut manifest)?;
            let nu = load(&args.nu, &mut manifest)?;
            let rep = frobenius_bound(&mu, &nu, &cost, eta1)?;
            violation = rep.gap < -1e-8;
            serde_json::to_value(&rep).unwrap()
        }
        CheckArg::Holder => {
            let k = args.kernel.build()?;
            if args.trials > 0 {
                let reports = holder_balanced_trials(&k, args.n, args.trials, args.seed)?;
                let (val, v) = holder_summary(&reports, -1e-10);
                violation = v;
                val
            } else {
                let mu = load(&args.mu, &mut manifest)?;
                let nu = load(&args.nu, &mut manifest)?;
                let rep = holder_check_balanced(&mu, &nu, &k)?;
                violation = rep.gap < -1e-10;
                serde_json::to_value(&rep).unwrap()
            }
        }
        CheckArg::HolderUnbalanced => {
            let k = args.kernel.build()?;
            if args.trials > 0 {
                let reports =
                    holder_unbalanced_trials(&k, args.eta, args.n, args.trials, args.seed)?;
                let (val, v) = holder_summary(&reports, -1e-8);
                violation = v;
                val
            } else {
                let mu = load(&args.mu, &mut manifest)?;
                let nu = load(&args.nu, &mut manifest)?;
                let rep = holder_check_unbalanced(&mu, &nu, &k, args.eta)?;
                violation = rep.gap < -1e-8;
                serde_json::to_value(&rep).unwrap()
            }
        }
        CheckArg::Elementary => {
            let mu = load(&args.mu, &mut manifest)?;
            let nu = load(&args.nu, &mut manifest)?;
            let k = args.kernel.build()?;
            let bound = mmd_elementary_bound(&k, &mu, &nu)?;
            let mmd = mmd_squared_dense(&k, &mu, &nu, true)?.value.sqrt();
            violation = mmd > bound + 1e-10;
            json!({"lhs": mmd, "rhs": bound, "gap": bound - mmd})
        }
    };
    if let Some(path) = &args.output {
        manifest.output = Some(path.display().to_string());
    }
    let doc = json!({ "result": result, "manifest": manifest.finish() });
    emit_json(args.output.as_ref(), &doc)?;
    Ok(if violation { EXIT_VIOLATION } else { 0 })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32, OtError> {
    let manifest = {
        let mut m = Manifest::new(
            "bench",
            json!({
                "task": format!("{:?}", args.task),
                "sizes": args.sizes, "dims": args.dims,
                "kernel": args.kernel.name(),
                "lambda": args.lambda, "eta": args.eta,
                "tol": args.tol, "max_iter": args.max_iter,
            }),
        );
        m.seed = Some(args.seed);
        m
    };
    let mut csv = String::from("task,backend,n,d,kernel,seconds,peak_mem_bytes_estimate,iterations\n");
    for &d in &args.dims {
        for &n in &args.sizes {
            for &backend in &args.backends {
                if backend == BackendArg::Dense && n > 20_000 && !args.allow_dense_large {
                    return Err(OtError::InvalidParameter(format!(
                        "dense backend refused at n = {n} > 20000; pass --allow-dense-large"
                    )));
                }
                let mu = sample_uniform(n, d, WeightMode::UniformRandom, args.seed)?;
                let nu = sample_uniform(n, d, WeightMode::UniformRandom, args.seed + 1)?;
                let be: Backend = backend.into();
                let mut iterations = 0usize;
                let mut seconds = 0.0;
                // one warmup run excluded from the timing
                for warm in [true, false] {
                    let t0 = Instant::now();
                    match args.task {
                        TaskArg::Uot => {
                            let cost = CostSpec::euclidean(2.0)?;
                            let mut cfg = SinkhornConfig::new(args.lambda, args.eta);
                            cfg.tol = args.tol;
                            cfg.max_iter = args.max_iter;
                            let (_, stats) = lambda_scaled_solve(&mu, &nu, &cost, &cfg, be)?;
                            iterations = stats.iterations;
                        }
                        TaskArg::Mmd => {
                            let k = args.kernel.build()?;
                            match be {
                                Backend::Dense => {
                                    mmd_squared_dense(&k, &mu, &nu, true)?;
                                }
                                Backend::Nfft => {
                                    mmd_squared_nfft(&k, &mu, &nu, true)?;
                                }
                            }
                            iterations = 1;
                        }
                    }
                    if !warm {
                        seconds = t0.elapsed().as_secs_f64();
                    }
                }
                let task = match args.task {
                    TaskArg::Uot => "uot",
                    TaskArg::Mmd => "mmd",
                };
                let backend_name = match backend {
                    BackendArg::Dense => "dense",
                    BackendArg::Nfft => "nfft",
                };
                csv.push_str(&format!(
                    "{task},{backend_name},{n},{d},{},{seconds},{},{iterations}\n",
                    args.kernel.name(),
                    peak_mem_bytes().map(|b| b.to_string()).unwrap_or_default(),
                ));
            }
        }
    }
    emit_text(args.output.as_ref(), &csv)?;
    emit_sidecar_manifest(args.output.as_ref(), manifest.finish())?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, OtError> {
    let mut manifest = Manifest::new(
        "sweep",
        json!({"etas": args.etas, "lambda": args.lambda}),
    );
    manifest.input(&args.p)?;
    manifest.input(&args.ptilde)?;
    let p = read_measure(&args.p, !args.keep_zeros)?;
    let pt = read_measure(&args.ptilde, !args.keep_zeros)?;
    let rows = convergence_sweep_energy(&p, &pt, args.lambda, &args.etas)?;
    let mut csv = String::from("eta,sd,mmd_energy,diff\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{},{}\n", row.eta, row.sd, row.mmd_energy, row.diff));
    }
    emit_text(args.output.as_ref(), &csv)?;
    emit_sidecar_manifest(args.output.as_ref(), manifest.finish())?;
    Ok(0)
}

fn cmd_gen(args: &GenArgs) -> Result<i32, OtError> {
    let mut manifest = Manifest::new(
        "gen",
        json!({"n": args.n, "d": args.d, "mode": format!("{:?}", args.mode)}),
    );
    manifest.seed = Some(args.seed);
    manifest.output = Some(args.output.display().to_string());
    let mode = match args.mode {
        GenMode::Unbalanced => WeightMode::UniformRandom,
        GenMode::Probability => WeightMode::Probability,
    };
    let m = sample_uniform(args.n, args.d, mode, args.seed)?;
    write_measure_csv(&args.output, &m)?;
    emit_sidecar_manifest(Some(&args.output), manifest.finish())?;
    Ok(0)
}
