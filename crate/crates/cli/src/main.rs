//! `mdh`: streaming minimum-density hyperplane clustering from the command line.

mod csvio;
mod error;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdh_core::diagnostics::{run_diagnostics_with, DiagnoseConfig};
use mdh_core::{metrics, ClusteringModel, GaussianMixture, KChoice, LearnConfig, TreeModel};

use crate::csvio::{output, read_labels, write_row, RowStream};
use crate::error::CliError;
use crate::report::{emit, FitRecord, Record, SelectionRecord};

#[derive(Parser, Debug)]
#[command(
    name = "mdh",
    version,
    about = "Streaming clustering with minimum-density hyperplanes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a tree on a CSV stream and write the pruned model.
    Fit(FitArgs),
    /// Label every row of a CSV file with a fitted model.
    Assign(AssignArgs),
    /// Compare predicted labels with ground truth (NMI, ARI).
    Eval(EvalArgs),
    /// Sample a labelled data set from a Gaussian mixture.
    Synth(SynthArgs),
    /// Track one hyperplane's convergence against a known mixture.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Clone)]
struct LearnArgs {
    /// Penalty weight C.
    #[arg(long = "c", default_value_t = 10.0)]
    c: f64,
    /// Penalty band half-width as a multiple of the projected standard deviation.
    #[arg(long, default_value_t = 0.1)]
    alpha_factor: f64,
    /// Bandwidth exponent q.
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    /// Learning-rate exponent r.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Normal-vector learning-rate scale, multiplied by sqrt(d).
    #[arg(long, default_value_t = 1.0)]
    gbar1_scale: f64,
    /// Offset learning-rate scale.
    #[arg(long, default_value_t = 1.0)]
    gbar2: f64,
    /// Theory constant used only in the schedule admissibility check.
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Lower bound on the bandwidth scale.
    #[arg(long, default_value_t = 0.01)]
    h_floor: f64,
    /// Observations per node before its hyperplane starts moving.
    #[arg(long, default_value_t = 10)]
    warmup: u64,
    /// Seed for hyperplane initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LearnArgs {
    fn config(&self) -> LearnConfig {
        LearnConfig {
            c: self.c,
            alpha_factor: self.alpha_factor,
            q: self.q,
            r: self.r,
            gbar1_scale: self.gbar1_scale,
            gbar2: self.gbar2,
            eta: self.eta,
            h_floor: self.h_floor,
            warmup: self.warmup,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long, short)]
    input: PathBuf,
    /// Where to write the fitted model (JSON).
    #[arg(long, short)]
    model: PathBuf,
    /// Selection report (JSON lines); standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-row routing log `row,leaf` in processing order.
    #[arg(long)]
    routing: Option<PathBuf>,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
    /// Process rows in a seeded random order instead of file order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Tree depth D (2^D − 1 nodes, 2^(D−1) leaves).
    #[arg(long, default_value_t = 8)]
    depth: u32,
    /// Return exactly this many clusters instead of voting.
    #[arg(long, conflicts_with = "kmax_range")]
    k: Option<usize>,
    /// Inclusive K_max range for elbow voting.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    kmax_range: Option<Vec<usize>>,
    #[command(flatten)]
    learn: LearnArgs,
}

#[derive(Args, Debug)]
struct AssignArgs {
    #[arg(long, short)]
    model: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    /// Label file, one label per line; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    /// Write the full-tree leaf id instead of the cluster label.
    #[arg(long)]
    leaf_ids: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth labels, one per line.
    #[arg(long)]
    truth: PathBuf,
    /// Both label files start with a header line.
    #[arg(long)]
    header: bool,
    /// Report file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Mixture specification (JSON with weights, means, covariances).
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    mixture: PathBuf,
    /// Number of streamed observations.
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    /// Seed of the sampled stream (the hyperplane seed is --seed).
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Draws per checkpoint for the Monte Carlo gradient-bias estimate; 0 disables it.
    #[arg(long, default_value_t = 10_000)]
    bias_samples: usize,
    /// Checkpoints per decade from t = 100.
    #[arg(long, default_value_t = 10)]
    per_decade: u32,
    /// Report file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    learn: LearnArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Assign(a) => assign(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Diagnose(a) => diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = a.learn.config();
    // fail on bad flags before touching the input
    cfg.validate()?;
    let choice = match (a.k, a.kmax_range.as_deref()) {
        (Some(k), _) => KChoice::Fixed(k),
        (None, Some(&[lo, hi])) => KChoice::Vote {
            kmax_min: lo,
            kmax_max: hi,
        },
        (None, Some(_)) => return Err(CliError::Usage("--kmax-range takes MIN MAX".into())),
        (None, None) => KChoice::Auto,
    };

    let mut rows = RowStream::open(&a.input, a.header, a.shuffle_seed)?;
    let mut routing = a.routing.as_deref().map(|p| output(Some(p))).transpose()?;
    let mut tree: Option<TreeModel> = None;
    let mut n: u64 = 0;
    while let Some(x) = rows.next_row()? {
        let t = match tree.as_mut() {
            Some(t) => t,
            None => tree.insert(TreeModel::new(a.depth, x.len(), cfg.clone())?),
        };
        let leaf = t.observe(x)?;
        if let Some(w) = routing.as_mut() {
            writeln!(w, "{},{leaf}", rows.row_index())?;
        }
        n += 1;
    }
    if let Some(mut w) = routing {
        w.flush()?;
    }
    let tree = tree.ok_or_else(|| CliError::Usage(format!("{} has no data rows", a.input.display())))?;
    let dim = tree.dim();
    let events = tree.events();
    let (model, summary) = ClusteringModel::from_tree(tree, &choice)?;
    std::fs::write(&a.model, model.to_json()?).map_err(|e| CliError::io(&a.model, e))?;

    let mut out = output(a.report.as_deref())?;
    emit(
        &mut out,
        &Record::Fit(FitRecord {
            n,
            dim,
            depth: a.depth,
            nodes: model.tree().n_nodes(),
            leaves: model.tree().n_leaves(),
            degenerate_steps: events.degenerate_steps,
            shuffle_seed: a.shuffle_seed,
            model: a.model.display().to_string(),
        }),
    )?;
    if let Some(sel) = &summary.selection {
        if sel.degenerate > 0 {
            emit(
                &mut out,
                &Record::Warning {
                    message: format!(
                        "sum-of-squares curve is flat for {} K_max value(s); those vote for K=1",
                        sel.degenerate
                    ),
                },
            )?;
        }
    }
    emit(
        &mut out,
        &Record::Selection(SelectionRecord::new(&summary, model.clusters())),
    )?;
    out.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> Result<ClusteringModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ClusteringModel::from_json(&text)?)
}

fn assign(a: AssignArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let mut rows = RowStream::open(&a.input, a.header, None)?;
    rows.expect_dim(model.tree().dim());
    let mut out = output(a.output.as_deref())?;
    while let Some(x) = rows.next_row()? {
        let leaf = model.tree().assign(x)?;
        let value = if a.leaf_ids { leaf } else { model.label_of(leaf) };
        writeln!(out, "{value}")?;
    }
    out.flush()?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let pred = read_labels(&a.pred, a.header)?;
    let truth = read_labels(&a.truth, a.header)?;
    let nmi = metrics::nmi(&truth, &pred)?;
    let ari = metrics::ari(&truth, &pred)?;
    let distinct = |v: &[String]| v.iter().collect::<std::collections::HashSet<_>>().len();
    let mut out = output(a.output.as_deref())?;
    emit(
        &mut out,
        &Record::Eval {
            n: pred.len(),
            k_pred: distinct(&pred),
            k_truth: distinct(&truth),
            nmi,
            ari,
        },
    )?;
    out.flush()?;
    Ok(())
}

fn read_mixture(path: &Path) -> Result<GaussianMixture, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(GaussianMixture::from_json(&text)?)
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mixture = read_mixture(&a.mixture)?;
    let mut data = output(Some(&a.data))?;
    let mut labels = output(Some(&a.labels))?;
    for (k, x) in mixture.sampler(a.seed).take(a.n) {
        write_row(&mut data, &x)?;
        writeln!(labels, "{k}")?;
    }
    data.flush()?;
    labels.flush()?;
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let mixture = read_mixture(&a.mixture)?;
    let cfg = DiagnoseConfig {
        steps: a.steps,
        data_seed: a.data_seed,
        learn: a.learn.config(),
        bias_samples: a.bias_samples,
        per_decade: a.per_decade,
    };
    let mut out = output(a.output.as_deref())?;
    let checkpoints = run_diagnostics_with(&mixture, &cfg, |cp| {
        emit(&mut out, &Record::Checkpoint(cp.clone())).map_err(|e| match e {
            CliError::Core(c) => c,
            CliError::Io { source, .. } => source.into(),
            other => mdh_core::Error::InvalidInput(other.to_string()),
        })
    })?;
    if let Some(last) = checkpoints.last() {
        emit(
            &mut out,
            &Record::Summary {
                steps: a.steps,
                checkpoints: checkpoints.len(),
                final_v: last.v.clone(),
                final_b: last.b,
                final_b_raw: last.b_raw,
                final_sigma_hat: last.sigma_hat,
                final_grad_v_tangent_norm: last.grad_v_tangent_norm,
                final_grad_b_abs: last.grad_b_abs,
            },
        )?;
    }
    out.flush()?;
    Ok(())
}
