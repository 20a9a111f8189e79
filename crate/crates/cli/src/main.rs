use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, ExitCode, Stdio};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclo::io::{read_data_csv, read_trace, write_data_csv, write_trace};
use cyclo::sampler::ScanOrder;
use cyclo::summary::{medoid_from_table, MedoidReport};
use cyclo::{
    edge_inclusion_probs, motif_probability, posterior_interval, run_chains, simulate_sem,
    ChainConfig, GaussianMixture, Graph, GraphDistance, IntervalMethod, IntervalScope, ModelKind,
    MotifMode, MotifSpec, NoiseModel, PriorHyper, ShdMode, UniqueGraphSet, WeightedSem,
};

#[derive(Parser, Debug)]
#[command(name = "cyclo", version, about = "Bayesian causal discovery for linear non-Gaussian SEMs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample the posterior over acyclic graphs.
    SampleDag(SampleArgs),
    /// Sample the posterior over graphs that may contain cycles.
    SampleDcg {
        #[command(flatten)]
        common: SampleArgs,
        /// Random-walk step for coefficient moves.
        #[arg(long, default_value_t = 0.1)]
        mh_step: f64,
        /// Tune the step toward 0.44 acceptance during burn-in.
        #[arg(long)]
        adapt: bool,
    },
    /// Weighted-medoid point estimate of the graph.
    PointGraph {
        trace: PathBuf,
        /// shd, shd-hamming, sid or custom:<command>
        #[arg(long, default_value = "shd")]
        metric: String,
        /// Also write the chosen graph in adjacency format.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Credible intervals for every coefficient, as CSV.
    Intervals {
        trace: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Hpd)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = ScopeArg::Marginal)]
        scope: ScopeArg,
        /// Report on the standardized scale instead of the raw data scale.
        #[arg(long)]
        standardized_scale: bool,
    },
    /// Posterior probability of a motif.
    Motif {
        trace: PathBuf,
        /// Comma-separated 1-indexed edges "source>target".
        #[arg(long)]
        edges: String,
        /// Extra 1-indexed nodes to include in the node set.
        #[arg(long)]
        nodes: Option<String>,
        /// Require the induced subgraph to equal the motif exactly.
        #[arg(long)]
        exact_induced: bool,
    },
    /// Edge inclusion probabilities; entry (i, j) is P(j -> i).
    EdgeProbs { trace: PathBuf },
    /// Draw data from a linear SEM.
    Simulate {
        /// Adjacency file: p, then one 1-indexed "source target" per line.
        #[arg(long)]
        graph: PathBuf,
        /// p x p CSV; entry (i, j) is the effect of node j on node i.
        #[arg(long)]
        coeffs: PathBuf,
        /// "gaussian", "gaussian:<var>", "bimodal" or "w:m:v,w:m:v,...";
        /// separate per-node specs with '|'.
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Numeric CSV, one column per variable.
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Mixture components per node.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    anneal_t0: f64,
    #[arg(long, default_value_t = 1.0)]
    a_gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    b_gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    a_gamma1: f64,
    #[arg(long, default_value_t = 1.0)]
    b_gamma1: f64,
    /// Independent chains, run concurrently and concatenated in chain order.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long, value_enum, default_value_t = ScanArg::Systematic)]
    scan: ScanArg,
    /// Keep the raw data scale.
    #[arg(long)]
    no_standardize: bool,
    /// Progress line on stderr every N sweeps.
    #[arg(long)]
    progress: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScanArg {
    Systematic,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Hpd,
    EqualTailed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    Marginal,
    Conditional,
}

impl SampleArgs {
    fn config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iters,
            burn_in: self.burn_in,
            thin: self.thin,
            anneal_t0: self.anneal_t0,
            seed: self.seed,
            prior: PriorHyper {
                a_gamma: self.a_gamma,
                b_gamma: self.b_gamma,
                a_gamma1: self.a_gamma1,
                b_gamma1: self.b_gamma1,
            },
            k: self.k,
            scan: match self.scan {
                ScanArg::Systematic => ScanOrder::Systematic,
                ScanArg::Random => ScanOrder::Random,
            },
            progress_every: self.progress,
            ..ChainConfig::default()
        }
    }
}

#[derive(Debug)]
enum CliError {
    Core(cyclo::Error),
    Usage(String),
}

impl From<cyclo::Error> for CliError {
    fn from(e: cyclo::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn report(&self) -> String {
        let (kind, message) = match self {
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Usage(m) => ("Usage", m.clone()),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn sample(args: &SampleArgs, kind: ModelKind, mh_step: f64, adapt: bool) -> CliResult {
    let loaded = read_data_csv(&args.data, !args.no_standardize)?;
    let cfg = ChainConfig {
        mh_step,
        adapt,
        ..args.config()
    };
    let mut trace = run_chains(&loaded.data, &cfg, kind, args.chains)?;
    trace.meta.standardization = loaded.standardization;
    write_trace(&trace, &args.out)?;
    println!("wrote {} samples to {}", trace.len(), args.out.display());
    Ok(())
}

fn parse_metric(metric: &str) -> CliResult<Result<GraphDistance, String>> {
    Ok(match metric {
        "shd" => Ok(GraphDistance::Shd(ShdMode::Standard)),
        "shd-hamming" => Ok(GraphDistance::Shd(ShdMode::Hamming)),
        "sid" => Ok(GraphDistance::Sid),
        m => match m.strip_prefix("custom:") {
            Some(cmd) if !cmd.is_empty() => Err(cmd.to_string()),
            _ => return Err(CliError::Usage(format!("unknown metric {m:?}"))),
        },
    })
}

/// Distance table from an external command: stdin gets "p v" and the v
/// canonical keys, stdout must hold v rows of v reals.
fn subprocess_table(cmd: &str, set: &UniqueGraphSet) -> CliResult<Vec<Vec<f64>>> {
    let fail = |m: String| CliError::Core(cyclo::Error::CustomDistance(m));
    let p = set.graphs()[0].p();
    let mut input = format!("{p} {}\n", set.len());
    for key in set.keys() {
        input.push_str(key);
        input.push('\n');
    }
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()?;
    child
        .stdin
        .take()
        .expect("stdin is piped")
        .write_all(input.as_bytes())?;
    let out = child.wait_with_output()?;
    if !out.status.success() {
        return Err(fail(format!("command exited with {}", out.status)));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let table: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| fail(format!("cannot parse {t:?}"))))
                .collect()
        })
        .collect::<CliResult<_>>()?;
    if table.len() != set.len() || table.iter().any(|r| r.len() != set.len()) {
        return Err(fail(format!("expected a {0} x {0} table", set.len())));
    }
    Ok(table)
}

fn render_report(report: &MedoidReport) -> String {
    let mut out = String::from("canonical_key,weight,count,expected_loss,chosen\n");
    for (l, row) in report.rows.iter().enumerate() {
        let mark = if l == report.chosen { "*" } else { "" };
        let _ = writeln!(out, "{},{},{},{},{mark}", row.key, row.weight, row.count, row.expected_loss);
    }
    out.push('\n');
    out.push_str(&report.graph.to_adjacency_text());
    out
}

fn point_graph(trace: &PathBuf, metric: &str, graph_out: Option<&PathBuf>) -> CliResult {
    let trace = read_trace(trace)?;
    let set = UniqueGraphSet::from_trace(&trace)?;
    let report = match parse_metric(metric)? {
        Ok(d) => medoid_from_table(&set, &set.distance_table(&d)?)?,
        Err(cmd) => medoid_from_table(&set, &subprocess_table(&cmd, &set)?)?,
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", render_report(&report));
    if let Some(path) = graph_out {
        std::fs::write(path, report.graph.to_adjacency_text())?;
    }
    Ok(())
}

fn intervals(trace: &PathBuf, level: f64, method: MethodArg, scope: ScopeArg, standardized: bool) -> CliResult {
    let trace = read_trace(trace)?;
    if trace.is_empty() {
        return Err(cyclo::Error::EmptyTrace.into());
    }
    let (method, method_name) = match method {
        MethodArg::Hpd => (IntervalMethod::Hpd, "hpd"),
        MethodArg::EqualTailed => (IntervalMethod::EqualTailed, "equal-tailed"),
    };
    let (scope, scope_name) = match scope {
        ScopeArg::Marginal => (IntervalScope::Marginal, "marginal"),
        ScopeArg::Conditional => (IntervalScope::Conditional, "conditional"),
    };
    let p = trace.meta.p;
    let mut out = String::from("i,j,lower,upper,level,method,scope,inclusion_prob\n");
    for i in 0..p {
        for j in (0..p).filter(|&j| j != i) {
            let values = if standardized {
                trace.coefficient_values(i, j)
            } else {
                trace.coefficient_values_original(i, j)
            };
            let (lower, upper, incl) = match posterior_interval(&values, level, method, scope) {
                Ok(ci) => (ci.lower.to_string(), ci.upper.to_string(), ci.inclusion_prob),
                Err(cyclo::Error::EmptyConditional) => ("NA".into(), "NA".into(), 0.0),
                Err(e) => return Err(e.into()),
            };
            let _ = writeln!(
                out,
                "{},{},{lower},{upper},{level},{method_name},{scope_name},{incl}",
                i + 1,
                j + 1
            );
        }
    }
    print!("{out}");
    Ok(())
}

/// 1-indexed "a>b,c>d" into 0-indexed (source, target) pairs.
fn parse_edges(text: &str) -> CliResult<Vec<(usize, usize)>> {
    let node = |t: &str| -> CliResult<usize> {
        match t.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(CliError::Usage(format!("bad node {t:?}; nodes are 1-indexed"))),
        }
    };
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (s, d) = t
                .split_once('>')
                .ok_or_else(|| CliError::Usage(format!("edge {t:?} is not of the form source>target")))?;
            Ok((node(s)?, node(d)?))
        })
        .collect()
}

fn motif(trace: &PathBuf, edges: &str, nodes: Option<&str>, exact: bool) -> CliResult {
    let trace = read_trace(trace)?;
    let required = parse_edges(edges)?;
    let mut node_set: Vec<usize> = required.iter().flat_map(|&(s, t)| [s, t]).collect();
    if let Some(extra) = nodes {
        for t in extra.split(',').filter(|t| !t.trim().is_empty()) {
            match t.trim().parse::<usize>() {
                Ok(v) if v >= 1 => node_set.push(v - 1),
                _ => return Err(CliError::Usage(format!("bad node {t:?}"))),
            }
        }
    }
    let mode = if exact { MotifMode::ExactInduced } else { MotifMode::AllPresent };
    let spec = MotifSpec::new(required, node_set, mode)?;
    println!("{}", motif_probability(&trace, &spec)?);
    Ok(())
}

fn edge_probs(trace: &PathBuf) -> CliResult {
    let trace = read_trace(trace)?;
    let probs = edge_inclusion_probs(&trace)?;
    let mut out = trace.meta.names.join(",");
    out.push('\n');
    for row in probs {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn parse_mixture(spec: &str) -> CliResult<GaussianMixture> {
    let bad = |m: String| CliError::Usage(format!("noise spec {spec:?}: {m}"));
    let spec = spec.trim();
    if spec == "gaussian" {
        return Ok(GaussianMixture::gaussian(0.0, 1.0)?);
    }
    if spec == "bimodal" {
        return Ok(GaussianMixture::new(vec![0.5, 0.5], vec![-1.5, 1.5], vec![0.25, 0.25])?);
    }
    if let Some(var) = spec.strip_prefix("gaussian:") {
        let v = var.parse::<f64>().map_err(|_| bad("variance is not a number".into()))?;
        return Ok(GaussianMixture::gaussian(0.0, v)?);
    }
    let (mut w, mut m, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for comp in spec.split(',') {
        let parts: Vec<f64> = comp
            .split(':')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(format!("component {comp:?} is not weight:mean:variance")))?;
        if parts.len() != 3 {
            return Err(bad(format!("component {comp:?} is not weight:mean:variance")));
        }
        w.push(parts[0]);
        m.push(parts[1]);
        v.push(parts[2]);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(GaussianMixture::new(w, m, v)?)
}

fn simulate(graph: &PathBuf, coeffs: &PathBuf, noise: &str, n: usize, seed: u64, out: &PathBuf) -> CliResult {
    let graph = Graph::parse_adjacency_text(&std::fs::read_to_string(graph)?)?;
    let p = graph.p();
    let b = read_data_csv(coeffs, false)?.raw.matrix().clone();
    if b.nrows() != p || b.ncols() != p {
        return Err(cyclo::Error::DimensionMismatch {
            expected: p,
            found: b.nrows(),
        }
        .into());
    }
    let specs: Vec<&str> = noise.split('|').collect();
    let mixes = match specs.len() {
        1 => vec![parse_mixture(specs[0])?; p],
        k if k == p => specs.iter().map(|s| parse_mixture(s)).collect::<CliResult<_>>()?,
        k => return Err(CliError::Usage(format!("{k} noise specs for {p} nodes"))),
    };
    let sem = WeightedSem::new(graph, b)?;
    let sim = simulate_sem(&sem, &NoiseModel::new(mixes), n, seed)?;
    if !sim.is_stable() {
        eprintln!("warning: spectral radius {} >= 1", sim.spectral_radius);
    }
    write_data_csv(&sim.data, out)?;
    Ok(())
}

fn configure_threads() -> CliResult {
    if let Ok(v) = std::env::var("CYCLIN_THREADS") {
        let n = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("CYCLIN_THREADS must be a positive integer, got {v:?}")))?;
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Cmd::SampleDag(args) => sample(&args, ModelKind::Dag, ChainConfig::default().mh_step, false),
        Cmd::SampleDcg { common, mh_step, adapt } => sample(&common, ModelKind::Dcg, mh_step, adapt),
        Cmd::PointGraph { trace, metric, graph_out } => point_graph(&trace, &metric, graph_out.as_ref()),
        Cmd::Intervals {
            trace,
            level,
            method,
            scope,
            standardized_scale,
        } => intervals(&trace, level, method, scope, standardized_scale),
        Cmd::Motif {
            trace,
            edges,
            nodes,
            exact_induced,
        } => motif(&trace, &edges, nodes.as_deref(), exact_induced),
        Cmd::EdgeProbs { trace } => edge_probs(&trace),
        Cmd::Simulate {
            graph,
            coeffs,
            noise,
            n,
            seed,
            out,
        } => simulate(&graph, &coeffs, &noise, n, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            let msg = first.trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Usage(msg).report());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::FAILURE
        }
    }
}
