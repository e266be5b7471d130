//! The `cfn` command line.
//!
//! Trees are Newick files whose branch lengths give `theta = exp(-length)`.
//! Parameter files (`--params`) are the JSON written by `fit` and
//! `simulate --truth-out`; they override the tree's lengths. Spin matrices
//! are CSV with one column per node name.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cfn_core::likelihood::{gradient_from_messages, view_log_likelihood};
use cfn_core::magnetization::{messages_on_view, view_magnetization};
use cfn_core::{
    broadcast_view, classify_trichotomy, default_constants, descendant_subtree, experiment_tree,
    fit, random_binary_tree, stream_rng, whole_tree_view, Dataset, EdgeParameters, Endpoints,
    ExperimentKind, FitConfig, NodeId, RootedView, SpinConfig, TreeTopology,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;

use crate::experiments::{
    emit_histogram, gradient_population_experiment, independence_experiment, init_sweep_experiment,
    scaling_experiment, tail_experiment, ExperimentConfig, SweepMode, TailOutcome, TreeKind,
    TreeSpec,
};
use crate::formats::{
    node_name, read_magnetization_csv, read_spin_matrix, read_text, resolve_node, write_json,
    write_loglik_csv, write_magnetization_csv, write_spin_matrix, write_text, FitReport,
    GradientReport, MagnetizationRow, ParamsFile,
};
use crate::newick::{parse_newick, write_newick, write_view};

#[derive(Debug, Parser)]
#[command(
    name = "cfn",
    version,
    about = "Broadcasting and branch-length estimation on binary trees"
)]
pub struct Cli {
    /// Worker threads for sampling and experiments (0 = all cores).
    #[arg(long, global = true, env = "CFN_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a tree and write it as Newick.
    GenTree(GenTreeArgs),
    /// Broadcast spins down a tree and write the leaf matrix.
    Simulate(SimulateArgs),
    /// Posterior root magnetization per sample.
    Magnetize(MagnetizeArgs),
    /// Per-sample log-likelihood of the leaf spins.
    Loglik(DataArgs),
    /// Mean log-likelihood gradient over the samples.
    Grad(DataArgs),
    /// Fit edge parameters by coordinate maximization.
    Fit(FitArgs),
    /// Run a Monte Carlo experiment.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
    /// Histogram of `sigma_u Z_u` from a magnetization table.
    Histogram(HistogramArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Random,
    Complete,
    Caterpillar,
    Balanced,
}

/// Closed theta interval `lo:hi` with `0 < lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaRange {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaRange {
    fn draw<R: Rng + ?Sized>(&self, edges: usize, rng: &mut R) -> EdgeParameters {
        let theta = (0..edges)
            .map(|_| self.lo + (self.hi - self.lo) * rng.random::<f64>())
            .collect();
        EdgeParameters::new(theta).expect("range lies in (0, 1]")
    }
}

fn parse_range(s: &str) -> Result<ThetaRange, String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(format!("need 0 < lo <= hi <= 1, got {lo}:{hi}"));
    }
    Ok(ThetaRange { lo, hi })
}

#[derive(Debug, Args)]
pub struct GenTreeArgs {
    #[arg(long, value_enum, default_value_t = GenKind::Random)]
    pub kind: GenKind,
    /// Leaf count (random, caterpillar, balanced).
    #[arg(long, required_unless_present = "depth")]
    pub leaves: Option<usize>,
    /// Depth of a complete tree (`2^depth` leaves).
    #[arg(long, conflicts_with = "leaves")]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Theta range for the branch parameters.
    #[arg(long = "box", value_parser = parse_range, default_value = "0.9:0.95")]
    pub theta_box: ThetaRange,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub tree: PathBuf,
    /// Draw fresh parameters from this theta range instead of using the
    /// tree's lengths.
    #[arg(long = "box", value_parser = parse_range)]
    pub theta_box: Option<ThetaRange>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write internal node spins.
    #[arg(long)]
    pub full: bool,
    /// Node the broadcast starts from; defaults to the tree's default root.
    #[arg(long)]
    pub root: Option<String>,
    /// Where to write the parameters used, as JSON.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TreeInput {
    #[arg(short, long)]
    pub tree: PathBuf,
    /// Parameter JSON overriding the tree's branch lengths.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub input: TreeInput,
    /// Spin matrix CSV.
    #[arg(short, long)]
    pub leaves: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MagnetizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Node `u` whose magnetization is computed; defaults to the tree's default root.
    #[arg(long)]
    pub root: Option<String>,
    /// Restrict to the subtree of `u` hanging away from this neighbour.
    #[arg(long)]
    pub away: Option<String>,
    /// Classify each sample into trichotomy tiers at this delta; needs a
    /// column for `u` in the spin matrix.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Search theta in [-0.999, 0.999] instead of [0.01, 1 - 1e-9].
    #[arg(long)]
    pub full_range: bool,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub max_sweeps: usize,
    /// Stop once no parameter moves by this much in a sweep.
    #[arg(long, default_value_t = 1e-8)]
    pub threshold: f64,
    /// Bisection tolerance on theta.
    #[arg(long, default_value_t = 1e-10)]
    pub root_tol: f64,
    /// Also write the fitted tree as Newick.
    #[arg(long)]
    pub newick_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Tier frequencies of the unsigned root magnetization.
    Tail(ExperimentArgs),
    /// Tail experiment plus log-log slopes of the failure tiers.
    Scaling(ExperimentArgs),
    /// Correlations between the two root subtrees.
    Independence(ExperimentArgs),
    /// Monte Carlo population gradient against its closed form.
    Gradient(ExperimentArgs),
    /// Error of one coordinate sweep from the hat box.
    InitSweep(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sampled,
    Population,
}

/// Flags override fields of `--config`.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON or TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<GenKind>,
    /// Depth for complete trees, leaf count otherwise.
    #[arg(long)]
    pub size: Option<usize>,
    /// Comma separated delta grid.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fixed_pair: bool,
    #[arg(long)]
    pub matched: bool,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub edge: Option<usize>,
    #[arg(long)]
    pub exact: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Tail only: also write the raw `(sigma_u, Z_u)` tables.
    #[arg(long)]
    pub dump_samples: bool,
    /// Output prefix: `<prefix>.json` plus CSV tables. Report to stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    /// Magnetization CSV as written by `magnetize`.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    log::info!("command: {:?}", cli.command);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()?;
    pool.install(|| match cli.command {
        Command::GenTree(a) => gen_tree(a),
        Command::Simulate(a) => simulate(a),
        Command::Magnetize(a) => magnetize(a),
        Command::Loglik(a) => loglik(a),
        Command::Grad(a) => grad(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Experiment { which } => experiment(which),
        Command::Histogram(a) => histogram_cmd(a),
    })
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    match path {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn gen_tree(a: GenTreeArgs) -> anyhow::Result<()> {
    let mut rng = stream_rng(a.seed, u64::MAX);
    let text = match a.kind {
        GenKind::Random => {
            let n = a.leaves.context("--leaves is required for random trees")?;
            let tree = random_binary_tree(n, &mut rng)?;
            let params = a.theta_box.draw(tree.edge_count(), &mut rng);
            write_newick(&tree, &params)?
        }
        kind => {
            let (kind, size) = match (kind, a.depth, a.leaves) {
                (GenKind::Complete, Some(d), _) => (ExperimentKind::Complete, d),
                (GenKind::Complete, None, _) => bail!("--depth is required for complete trees"),
                (_, Some(_), _) => bail!("--depth only applies to complete trees"),
                (GenKind::Caterpillar, None, Some(n)) => (ExperimentKind::Caterpillar, n),
                (_, None, n) => (ExperimentKind::Balanced, n.context("--leaves is required")?),
            };
            let (tree, view) = experiment_tree(kind, size)?;
            let params = a.theta_box.draw(tree.edge_count(), &mut rng);
            write_view(&tree, &view, &params)?
        }
    };
    log::info!(
        "gen-tree: kind={:?} seed={} box={:?}",
        a.kind,
        a.seed,
        a.theta_box
    );
    emit_text(a.output.as_deref(), &format!("{text}\n"))
}

fn load_tree(path: &Path) -> anyhow::Result<(TreeTopology, EdgeParameters)> {
    let text = read_text(path)?;
    parse_newick(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_input(input: &TreeInput) -> anyhow::Result<(TreeTopology, EdgeParameters)> {
    let (tree, mut params) = load_tree(&input.tree)?;
    if let Some(p) = &input.params {
        let file: ParamsFile = serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?;
        params = file.to_params(&tree)?;
    }
    Ok((tree, params))
}

fn load_data(a: &DataArgs) -> anyhow::Result<(TreeTopology, EdgeParameters, Vec<SpinConfig>)> {
    let (tree, params) = load_input(&a.input)?;
    let file = File::open(&a.leaves).with_context(|| format!("opening {}", a.leaves.display()))?;
    let samples = read_spin_matrix(&tree, BufReader::new(file))
        .with_context(|| format!("reading {}", a.leaves.display()))?;
    log::info!(
        "loaded {} leaves, {} samples from {}",
        tree.leaf_count(),
        samples.len(),
        a.leaves.display()
    );
    Ok((tree, params, samples))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let (tree, mut params) = load_tree(&a.tree)?;
    if let Some(range) = a.theta_box {
        params = range.draw(tree.edge_count(), &mut stream_rng(a.seed, u64::MAX));
    }
    if let Some((e, t)) = params
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, t)| **t <= 0.0)
    {
        bail!("edge {e} has theta {t}; sampling needs theta in (0, 1]");
    }
    let root = match &a.root {
        Some(name) => resolve_node(&tree, name)?,
        None => tree.default_root(),
    };
    log::info!(
        "simulate: samples={} seed={} box={:?} root={} full={}",
        a.samples,
        a.seed,
        a.theta_box,
        node_name(&tree, root),
        a.full
    );
    let view = whole_tree_view(&tree, root)?;
    let samples: Vec<SpinConfig> = (0..a.samples)
        .into_par_iter()
        .map_init(
            || vec![0i8; tree.node_count()],
            |spins, i| {
                broadcast_view(&view, &params, &mut stream_rng(a.seed, i as u64), spins);
                SpinConfig::full(spins.clone())
            },
        )
        .collect::<Result<_, _>>()?;
    let columns: Vec<NodeId> = if a.full {
        (0..tree.node_count()).map(NodeId).collect()
    } else {
        tree.leaves().to_vec()
    };
    write_spin_matrix(&tree, &samples, &columns, output(a.output.as_deref())?)?;
    if let Some(p) = &a.truth_out {
        write_json(p, &ParamsFile::new(&tree, &params))?;
    }
    Ok(())
}

fn magnetization_view(tree: &TreeTopology, a: &MagnetizeArgs) -> anyhow::Result<RootedView> {
    let root = match &a.root {
        Some(name) => resolve_node(tree, name)?,
        None => tree.default_root(),
    };
    Ok(match &a.away {
        Some(name) => descendant_subtree(tree, root, resolve_node(tree, name)?)?,
        None => whole_tree_view(tree, root)?,
    })
}

fn magnetize(a: MagnetizeArgs) -> anyhow::Result<()> {
    let (tree, params, samples) = load_data(&a.data)?;
    let view = magnetization_view(&tree, &a)?;
    let u = view.root();
    let consts = default_constants();
    log::info!(
        "magnetize: u={} view leaves={} delta={:?}",
        node_name(&tree, u),
        view.leaves().len(),
        a.delta
    );
    let mut scratch = Vec::new();
    let mut rows = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let z = view_magnetization(&view, &params, s.values(), Endpoints::Clamp, &mut scratch)?;
        let sigma = s.spin(u);
        let tier = match (a.delta, sigma) {
            (Some(d), Some(sg)) => Some(classify_trichotomy(sg, z, d, &consts)),
            (Some(_), None) => bail!(
                "sample {i}: --delta needs the spin of {}",
                node_name(&tree, u)
            ),
            (None, _) => None,
        };
        rows.push(MagnetizationRow { sigma, z, tier });
    }
    write_magnetization_csv(&rows, output(a.data.output.as_deref())?)?;
    Ok(())
}

fn loglik(a: DataArgs) -> anyhow::Result<()> {
    let (tree, params, samples) = load_data(&a)?;
    let view = whole_tree_view(&tree, tree.default_root())?;
    let values: Vec<f64> = samples
        .iter()
        .map(|s| view_log_likelihood(&view, &params, s.values()))
        .collect::<Result<_, _>>()?;
    log::info!(
        "mean log-likelihood {}",
        values.iter().sum::<f64>() / values.len() as f64
    );
    write_loglik_csv(&values, output(a.output.as_deref())?)?;
    Ok(())
}

fn grad(a: DataArgs) -> anyhow::Result<()> {
    let (tree, params, samples) = load_data(&a)?;
    let view = whole_tree_view(&tree, tree.default_root())?;
    let m = samples.len() as f64;
    let mut acc = vec![0.0; tree.edge_count()];
    let mut ll = 0.0;
    for s in &samples {
        let table = messages_on_view(&tree, &view, &params, s.values(), Endpoints::Clamp)?;
        for (a, g) in acc
            .iter_mut()
            .zip(gradient_from_messages(&params, &table)?.0)
        {
            *a += g / m;
        }
        ll += view_log_likelihood(&view, &params, s.values())? / m;
    }
    let report = GradientReport::new(&tree, &params, samples.len(), ll, &acc);
    emit_json(a.output.as_deref(), &report)
}

fn fit_cmd(a: FitArgs) -> anyhow::Result<()> {
    let (tree, init, samples) = load_data(&a.data)?;
    let mut cfg = if a.full_range {
        FitConfig::full_range()
    } else {
        FitConfig::default()
    };
    if let Some(t) = a.theta_min {
        cfg.theta_min = t;
    }
    if let Some(t) = a.theta_max {
        cfg.theta_max = t;
    }
    cfg.max_sweeps = a.max_sweeps;
    cfg.threshold = a.threshold;
    cfg.root_tol = a.root_tol;
    log::info!("fit: {cfg:?}");
    let clamped = EdgeParameters::new(
        init.as_slice()
            .iter()
            .map(|t| t.clamp(cfg.theta_min, cfg.theta_max))
            .collect(),
    )?;
    let data = Dataset::new(samples.into_iter().map(|s| s.leaves_only(&tree)).collect())?;
    let result = fit(&tree, &data, &clamped, &cfg)?;
    log::info!(
        "fit finished after {} sweeps: {}",
        result.sweeps(),
        result.termination.as_str()
    );
    if let Some(p) = &a.newick_out {
        write_text(p, &format!("{}\n", write_newick(&tree, &result.params)?))?;
    }
    emit_json(a.data.output.as_deref(), &FitReport::new(&tree, &result))
}

fn experiment_config(a: &ExperimentArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => {
            let (Some(kind), Some(size), Some(deltas), Some(samples)) =
                (a.kind, a.size, a.deltas.clone(), a.samples)
            else {
                bail!("without --config, --kind, --size, --deltas and --samples are required");
            };
            ExperimentConfig::new(
                TreeSpec {
                    kind: tree_kind(kind),
                    size,
                },
                deltas,
                samples,
                0,
            )
        }
    };
    if let Some(k) = a.kind {
        cfg.tree.kind = tree_kind(k);
    }
    if let Some(s) = a.size {
        cfg.tree.size = s;
    }
    if let Some(d) = &a.deltas {
        cfg.deltas = d.clone();
    }
    if let Some(n) = a.samples {
        cfg.samples = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.fixed_pair |= a.fixed_pair;
    cfg.matched |= a.matched;
    cfg.exact |= a.exact;
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    if a.edge.is_some() {
        cfg.edge = a.edge;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Sampled => SweepMode::Sampled,
            ModeArg::Population => SweepMode::Population,
        };
    }
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    cfg.validate()?;
    log::info!("experiment config: {}", serde_json::to_string(&cfg)?);
    Ok(cfg)
}

fn tree_kind(k: GenKind) -> TreeKind {
    match k {
        GenKind::Random => TreeKind::Random,
        GenKind::Complete => TreeKind::Complete,
        GenKind::Caterpillar => TreeKind::Caterpillar,
        GenKind::Balanced => TreeKind::Balanced,
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_tail_files(
    prefix: &Path,
    outcome: &TailOutcome,
    cfg: &ExperimentConfig,
    dump: bool,
) -> anyhow::Result<()> {
    write_json(&with_suffix(prefix, ".json"), &outcome.report)?;
    outcome
        .report
        .write_csv(output(Some(&with_suffix(prefix, ".csv")))?)?;
    for (k, samples) in outcome.samples.iter().enumerate() {
        let hist = with_suffix(prefix, &format!(".hist.{k}.csv"));
        emit_histogram(samples, cfg.bins, output(Some(&hist))?)?;
        if dump {
            let rows: Vec<MagnetizationRow> = samples
                .iter()
                .map(|&(s, z)| MagnetizationRow {
                    sigma: Some(s),
                    z,
                    tier: None,
                })
                .collect();
            let path = with_suffix(prefix, &format!(".samples.{k}.csv"));
            write_magnetization_csv(&rows, output(Some(&path))?)?;
        }
    }
    Ok(())
}

fn experiment(which: ExperimentCommand) -> anyhow::Result<()> {
    let (ExperimentCommand::Tail(a)
    | ExperimentCommand::Scaling(a)
    | ExperimentCommand::Independence(a)
    | ExperimentCommand::Gradient(a)
    | ExperimentCommand::InitSweep(a)) = &which;
    let cfg = experiment_config(a)?;
    let prefix = cfg.output.clone();
    let json_path = prefix.as_deref().map(|p| with_suffix(p, ".json"));
    match &which {
        ExperimentCommand::Tail(_) => {
            let outcome = tail_experiment(&cfg)?;
            match &prefix {
                Some(p) => write_tail_files(p, &outcome, &cfg, a.dump_samples)?,
                None => emit_json(None, &outcome.report)?,
            }
        }
        ExperimentCommand::Scaling(_) => {
            let (outcome, scaling) = scaling_experiment(&cfg)?;
            if let Some(p) = &prefix {
                write_tail_files(&with_suffix(p, ".tail"), &outcome, &cfg, a.dump_samples)?;
            }
            emit_json(json_path.as_deref(), &scaling)?;
        }
        ExperimentCommand::Independence(_) => {
            emit_json(json_path.as_deref(), &independence_experiment(&cfg)?)?
        }
        ExperimentCommand::Gradient(_) => {
            emit_json(json_path.as_deref(), &gradient_population_experiment(&cfg)?)?
        }
        ExperimentCommand::InitSweep(_) => {
            emit_json(json_path.as_deref(), &init_sweep_experiment(&cfg)?)?
        }
    }
    Ok(())
}

fn histogram_cmd(a: HistogramArgs) -> anyhow::Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let rows = read_magnetization_csv(BufReader::new(file))?;
    let samples: Vec<(i8, f64)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r.sigma {
            Some(s) => Ok((s, r.z)),
            None => bail!("row {i} has no sigma_u; simulate with --full and pass the root spin"),
        })
        .collect::<anyhow::Result<_>>()?;
    emit_histogram(&samples, a.bins, output(a.output.as_deref())?)?;
    Ok(())
}
