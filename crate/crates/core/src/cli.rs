//! The `zslc` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Result, ZslError};
use crate::eval::{accuracy, grid_search, majority_vote_accuracy, CvMethod, GridSpec};
use crate::io::{
    build_dataset, generate_synthetic, load_labels, load_matrix, maybe_normalize, write_dataset,
    write_labels, write_matrix, Manifest, SynthConfig,
};
use crate::joint::assign_nearest_representative;
use crate::pipeline::{fit_joint, fit_simple, InitMode, ZslDataset};
use crate::types::{Assignment, FeatureMatrix, Hyperparams, MappingMatrix, SignatureMatrix};

#[derive(Debug, Parser)]
#[command(name = "zslc", version, about = "Zero-shot classification by constrained clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-truth synthetic dataset.
    Synth(SynthArgs),
    /// Fit a model and predict unseen-class labels.
    Fit(FitArgs),
    /// Label new unseen instances with a saved mapping.
    Predict(PredictArgs),
    /// Score predicted labels (and optionally a clustering) against truth.
    Eval(EvalArgs),
    /// Grid search over gamma and beta with validation-class splits.
    Cv(CvArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    ns: usize,
    #[arg(long)]
    nu: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 20.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record `normalize = true` in the written manifest.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Simple,
    #[value(name = "joint-initR")]
    JointInitR,
    #[value(name = "joint-initD")]
    JointInitD,
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// Ridge weight; required unless --params supplies it.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Cluster count (default: number of seen plus unseen classes).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = Hyperparams::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Hyperparams::DEFAULT_REPAIR_FRACTION)]
    repair_fraction: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "joint-initR")]
    method: Method,
    #[command(flatten)]
    hyper: HyperArgs,
    /// `selected` file written by `cv`; explicit --gamma/--beta win.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Independent runs with seeds seed, seed+1, ...; files come from the first.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    mapping: PathBuf,
    /// Take unseen features, signatures and normalization from a manifest.
    #[arg(long, conflicts_with_all = ["features", "signatures"])]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "signatures")]
    features: Option<PathBuf>,
    #[arg(long, requires = "features")]
    signatures: Option<PathBuf>,
    /// L1-normalize --features before assignment.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Cluster labels of the same instances for majority-vote scoring.
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CvMethodArg {
    Simple,
    Joint,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "joint")]
    method: CvMethodArg,
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Hyperparams::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = Hyperparams::DEFAULT_REPAIR_FRACTION)]
    repair_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(ZslError),
}

impl From<ZslError> for Failure {
    fn from(e: ZslError) -> Self {
        match e {
            ZslError::InvalidHyperparams(m) => Failure::Usage(m),
            other => Failure::Data(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Cv(a) => cv(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ZslError::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| ZslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        d: a.d,
        r: a.r,
        n_s: a.ns,
        n_u: a.nu,
        per_class: a.per_class,
        noise_std: a.noise,
        separation: a.separation,
        shift: a.shift,
        seed: a.seed,
    };
    if let Err(e) = cfg.validate() {
        return Err(Failure::Usage(e.to_string()));
    }
    let data = generate_synthetic(&cfg)?;
    let manifest = write_dataset(&a.out, &data.dataset, Some(&data.mapping), a.normalize)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// Reads `key = value` lines of a `selected` file.
fn read_params(path: &Path) -> Result<(Option<f64>, Option<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| ZslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let (mut gamma, mut beta) = (None, None);
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let parsed = v.trim().parse::<f64>().map_err(|_| ZslError::Parse {
            path: path.display().to_string(),
            msg: format!("bad value in '{line}'"),
        });
        match k.trim() {
            "gamma" => gamma = Some(parsed?),
            "beta" => beta = Some(parsed?),
            _ => {}
        }
    }
    Ok((gamma, beta))
}

fn resolve_hyper(h: &HyperArgs, params: Option<&Path>) -> CliResult<Hyperparams> {
    let (pg, pb) = match params {
        Some(p) => read_params(p)?,
        None => (None, None),
    };
    let gamma = h.gamma.or(pg).ok_or_else(|| {
        Failure::Usage("--gamma is required (or pass --params from a cv run)".into())
    })?;
    let hyper = Hyperparams {
        gamma,
        beta: h.beta.or(pb).unwrap_or(Hyperparams::DEFAULT_BETA),
        max_iters: h.max_iters,
        seed: h.seed,
        repair_fraction: h.repair_fraction,
        k: h.k,
    };
    hyper.validate()?;
    Ok(hyper)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct RunOutput {
    labels: Assignment,
    mapping: MappingMatrix,
    clusters: Option<Assignment>,
    report: String,
    trace: String,
}

fn fit_once(data: &ZslDataset, hyper: &Hyperparams, method: Method) -> Result<RunOutput> {
    let mut report = String::new();
    let mut trace = String::new();
    let n_seen_inst = data.x_s.len();
    let mut clusters = None;
    let mut push_clustering = |fit: &crate::pipeline::SimpleFit, report: &mut String, trace: &mut String| {
        let c = &fit.clustering;
        let _ = writeln!(report, "clustering_iterations = {}", c.iterations);
        let _ = writeln!(report, "clustering_converged = {}", c.converged);
        let _ = writeln!(report, "clustering_objective = {}", num(c.objective));
        for (i, v) in c.objective_trace.iter().enumerate() {
            let _ = writeln!(trace, "clustering\t{i}\t{}", num(*v));
        }
        clusters = Some(fit.unseen_clusters(n_seen_inst));
    };
    let (labels, mapping) = match method {
        Method::Simple => {
            let fit = fit_simple(data, hyper)?;
            push_clustering(&fit, &mut report, &mut trace);
            (fit.prediction.labels_u, fit.mapping)
        }
        Method::JointInitR | Method::JointInitD => {
            let mode = if matches!(method, Method::JointInitR) {
                InitMode::InitR
            } else {
                InitMode::InitD
            };
            let fit = fit_joint(data, hyper, mode)?;
            if let Some(init) = &fit.init {
                push_clustering(init, &mut report, &mut trace);
            }
            let r = &fit.result;
            let _ = writeln!(report, "joint_iterations = {}", r.iterations);
            let _ = writeln!(report, "joint_converged = {}", r.converged);
            let events: Vec<String> = r.repair_events.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(report, "repair_events = {}", events.join(","));
            if let Some(v) = r.objective_trace.last() {
                let _ = writeln!(report, "joint_objective = {}", num(*v));
            }
            for (i, v) in r.objective_trace.iter().enumerate() {
                let _ = writeln!(trace, "joint\t{i}\t{}", num(*v));
            }
            (fit.prediction.labels_u, r.d.clone())
        }
    };
    Ok(RunOutput {
        labels,
        mapping,
        clusters,
        report,
        trace,
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Simple => "simple",
        Method::JointInitR => "joint-initR",
        Method::JointInitD => "joint-initD",
    }
}

fn fit(a: FitArgs) -> CliResult<()> {
    let hyper = resolve_hyper(&a.hyper, a.params.as_deref())?;
    if a.runs == 0 {
        return Err(Failure::Usage("--runs must be >= 1".into()));
    }
    let data = build_dataset(&Manifest::load(&a.manifest)?)?;
    ensure_dir(&a.out)?;

    let mut report = String::new();
    let _ = writeln!(report, "method = {}", method_name(a.method));
    let _ = writeln!(report, "gamma = {}", num(hyper.gamma));
    let _ = writeln!(report, "beta = {}", num(hyper.beta));
    let _ = writeln!(
        report,
        "k = {}",
        hyper.k.unwrap_or(data.n_seen() + data.n_unseen())
    );
    let _ = writeln!(report, "max_iters = {}", hyper.max_iters);
    let _ = writeln!(report, "repair_fraction = {}", num(hyper.repair_fraction));
    let _ = writeln!(report, "runs = {}", a.runs);

    let mut trace = String::from("run\tphase\tstep\tobjective\n");
    let mut accuracies = Vec::new();
    for run in 0..a.runs {
        let h = Hyperparams {
            seed: hyper.seed.wrapping_add(run as u64),
            ..hyper.clone()
        };
        let out = fit_once(&data, &h, a.method)?;
        let _ = writeln!(report, "\n[run {}]\nseed = {}", run + 1, h.seed);
        report.push_str(&out.report);
        for line in out.trace.lines() {
            let _ = writeln!(trace, "{}\t{line}", run + 1);
        }
        if let Some(truth) = &data.truth_u {
            let acc = accuracy(&out.labels, truth)?;
            let _ = writeln!(report, "accuracy_overall = {}", num(acc.overall));
            let _ = writeln!(report, "accuracy_per_class = {}", num(acc.per_class));
            if let Some(c) = &out.clusters {
                let mv = majority_vote_accuracy(c, truth)?;
                let _ = writeln!(report, "cluster_majority_vote = {}", num(mv));
            }
            accuracies.push(acc.overall);
        }
        if run == 0 {
            write_labels(a.out.join("labels"), &out.labels)?;
            write_matrix(a.out.join("mapping"), out.mapping.data())?;
            if let Some(c) = &out.clusters {
                write_labels(a.out.join("clusters"), c)?;
            }
        }
    }
    if !accuracies.is_empty() {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let _ = writeln!(report, "\n[summary]\naccuracy_mean = {}\naccuracy_std = {}", num(mean), num(var.sqrt()));
    }
    write_file(&a.out.join("report.txt"), &report)?;
    write_file(&a.out.join("trace.tsv"), &trace)?;
    print!("{report}");
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let mapping = MappingMatrix::new(load_matrix(&a.mapping)?)?;
    let (x_u, s_u) = match (&a.manifest, &a.features, &a.signatures) {
        (Some(m), _, _) => {
            let data = build_dataset(&Manifest::load(m)?)?;
            (data.x_u, data.s_u)
        }
        (None, Some(f), Some(s)) => (
            maybe_normalize(FeatureMatrix::new(load_matrix(f)?)?, a.normalize)?,
            SignatureMatrix::new(load_matrix(s)?)?,
        ),
        _ => {
            return Err(Failure::Usage(
                "either --manifest or both --features and --signatures are required".into(),
            ))
        }
    };
    let labels = assign_nearest_representative(&x_u, &mapping, &s_u)?;
    write_labels(&a.out, &labels)?;
    println!("wrote {} labels to {}", labels.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let pred = load_labels(&a.pred)?;
    let truth = load_labels(&a.truth)?;
    let k = pred.iter().chain(&truth).copied().max().unwrap_or(1);
    let pred_a = Assignment::from_one_based(&pred, k)?;
    let truth_a = Assignment::from_one_based(&truth, k)?;
    let acc = accuracy(&pred_a, &truth_a)?;
    let mut text = format!(
        "accuracy_overall = {}\naccuracy_per_class = {}\n",
        num(acc.overall),
        num(acc.per_class)
    );
    if let Some(c) = &a.clusters {
        let clusters = Assignment::from_one_based_infer(&load_labels(c)?)?;
        let mv = majority_vote_accuracy(&clusters, &truth_a)?;
        let _ = writeln!(text, "cluster_majority_vote = {}", num(mv));
    }
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn cv(a: CvArgs) -> CliResult<()> {
    let grid = GridSpec {
        gamma_values: a.gammas.clone(),
        beta_values: a.betas.clone(),
    };
    if let Err(e) = grid.validate() {
        return Err(Failure::Usage(e.to_string()));
    }
    let base = Hyperparams {
        max_iters: a.max_iters,
        seed: a.seed,
        repair_fraction: a.repair_fraction,
        ..Hyperparams::new(grid.gamma_values[0])
    };
    base.validate()?;
    let data = build_dataset(&Manifest::load(&a.manifest)?)?;
    let method = match a.method {
        CvMethodArg::Simple => CvMethod::Simple,
        CvMethodArg::Joint => CvMethod::Joint,
    };
    let outcome = grid_search(&data, &grid, method, &base, a.folds, a.seed)?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join("cv_report.tsv"), &outcome.report.to_tsv())?;
    let table = outcome.report.to_table();
    write_file(&a.out.join("cv_report.txt"), &table)?;
    let selected = format!(
        "gamma = {}\nbeta = {}\nscore = {}\n",
        num(outcome.gamma),
        num(outcome.beta),
        num(outcome.score)
    );
    write_file(&a.out.join("selected"), &selected)?;
    print!("{table}\n{selected}");
    Ok(())
}
