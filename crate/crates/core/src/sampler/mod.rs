//! MCMC samplers for acyclic ([`dag`]) and cyclic ([`dcg`]) structures.
//!
//! Both share the hierarchical prior
//!
//! ```text
//! E[i][j] | gamma   ~ Bernoulli(gamma),        gamma  ~ Beta(a_gamma, b_gamma)
//! B[i][j] | E, g1   ~ (1 - E[i][j]) delta_0 + E[i][j] N(0, g1),  g1 ~ InvGamma(a_g1, b_g1)
//! ```
//!
//! and the per-node Gaussian-mixture noise of [`crate::noise`].

pub mod dag;
pub mod dcg;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::{DataMatrix, Standardization};
use crate::noise::{GaussianMixture, MixtureHyper, NoiseModel};

pub use dag::{run_dag_chain, DagSampler};
pub use dcg::{run_dcg_chain, DcgSampler};

pub const FORMAT_VERSION: u32 = 1;

/// Hyperparameters of the edge and slab priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_gamma1: f64,
    pub b_gamma1: f64,
}

impl Default for PriorHyper {
    fn default() -> Self {
        PriorHyper {
            a_gamma: 1.0,
            b_gamma: 1.0,
            a_gamma1: 2.0,
            b_gamma1: 1.0,
        }
    }
}

impl PriorHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.a_gamma, self.b_gamma, self.a_gamma1, self.b_gamma1]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("prior hyperparameters must be positive".into()))
        }
    }

    fn gamma_start(&self) -> f64 {
        self.a_gamma / (self.a_gamma + self.b_gamma)
    }

    fn gamma1_start(&self) -> f64 {
        if self.a_gamma1 > 1.0 {
            self.b_gamma1 / (self.a_gamma1 - 1.0)
        } else {
            self.b_gamma1 / self.a_gamma1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOrder {
    #[default]
    Systematic,
    Random,
}

/// Which blocks of the state are refreshed each sweep. Disabled blocks keep
/// their current value; used to check individual kernels against exact
/// conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateMask {
    pub edges: bool,
    pub coefficients: bool,
    pub noise: bool,
    pub gamma: bool,
    pub gamma1: bool,
}

impl Default for UpdateMask {
    fn default() -> Self {
        UpdateMask {
            edges: true,
            coefficients: true,
            noise: true,
            gamma: true,
            gamma1: true,
        }
    }
}

impl UpdateMask {
    fn is_default(&self) -> bool {
        *self == UpdateMask::default()
    }
}

/// Run controls for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial annealing temperature; the likelihood is raised to `1/T`
    /// during burn-in only.
    pub anneal_t0: f64,
    pub seed: u64,
    pub prior: PriorHyper,
    /// Mixture components per node.
    pub k: usize,
    /// Random-walk standard deviation for coefficient moves (cyclic sampler only).
    pub mh_step: f64,
    /// Robbins-Monro tuning of `mh_step` toward 0.44 acceptance during burn-in.
    #[serde(default)]
    pub adapt: bool,
    #[serde(default)]
    pub mixture: MixtureHyper,
    #[serde(default)]
    pub scan: ScanOrder,
    /// Hold the edge probability fixed instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "UpdateMask::is_default")]
    pub updates: UpdateMask,
    /// Print a progress line to stderr every this many sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress_every: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            anneal_t0: 5.0,
            seed: 0,
            prior: PriorHyper::default(),
            k: 2,
            mh_step: 0.1,
            adapt: false,
            mixture: MixtureHyper::default(),
            scan: ScanOrder::Systematic,
            fixed_gamma: None,
            updates: UpdateMask::default(),
            progress_every: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.anneal_t0 >= 1.0 && self.anneal_t0.is_finite()) {
            return Err(Error::InvalidConfig("anneal_t0 must be a finite value >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.mh_step > 0.0 && self.mh_step.is_finite()) {
            return Err(Error::InvalidConfig("mh_step must be positive".into()));
        }
        if let Some(g) = self.fixed_gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::InvalidConfig("fixed_gamma must lie in [0, 1)".into()));
            }
        }
        self.prior.validate()?;
        self.mixture.validate()
    }

    /// Number of recorded samples per chain.
    pub fn sample_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    fn records(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in + 1).is_multiple_of(self.thin)
    }
}

/// Annealing temperature at sweep `iter`.
///
/// Geometric decay `T0^(1 - iter/burn_in)` from `T0` during burn-in and
/// exactly 1 afterwards.
pub fn temperature(iter: usize, cfg: &ChainConfig) -> f64 {
    if iter >= cfg.burn_in {
        1.0
    } else {
        cfg.anneal_t0.powf(1.0 - iter as f64 / cfg.burn_in as f64)
    }
}

/// `(alpha, beta)` of the Beta full conditional of the edge probability.
pub fn gamma_posterior(graph: &Graph, prior: &PriorHyper) -> (f64, f64) {
    let p = graph.p();
    let edges = graph.edge_count() as f64;
    let pairs = (p * (p - 1)) as f64;
    (prior.a_gamma + edges, prior.b_gamma + pairs - edges)
}

pub fn update_gamma<R: Rng + ?Sized>(graph: &Graph, prior: &PriorHyper, rng: &mut R) -> f64 {
    let (a, b) = gamma_posterior(graph, prior);
    dist::beta(rng, a, b)
}

/// `(shape, scale)` of the Inverse-Gamma full conditional of the slab variance.
pub fn gamma1_posterior(b: &DMatrix<f64>, graph: &Graph, prior: &PriorHyper) -> (f64, f64) {
    let mut ss = 0.0;
    for (s, t) in graph.edges() {
        ss += b[(t, s)] * b[(t, s)];
    }
    (
        prior.a_gamma1 + 0.5 * graph.edge_count() as f64,
        prior.b_gamma1 + 0.5 * ss,
    )
}

pub fn update_gamma1<R: Rng + ?Sized>(
    b: &DMatrix<f64>,
    graph: &Graph,
    prior: &PriorHyper,
    rng: &mut R,
) -> f64 {
    let (shape, scale) = gamma1_posterior(b, graph, prior);
    dist::inv_gamma(rng, shape, scale)
}

/// Full state of a running chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub graph: Graph,
    /// `coefficients[(i, j)]` is the effect of `j` on `i`; zero off the graph's support.
    pub coefficients: DMatrix<f64>,
    pub gamma: f64,
    pub gamma1: f64,
    pub noise: NoiseModel,
    /// `z[i][q]`: mixture component (0-based) of observation `q` at node `i`.
    pub z: Vec<Vec<usize>>,
}

impl ChainState {
    /// Empty graph, zero coefficients, prior-mean hyperparameters and a
    /// quantile-spread mixture per node.
    pub fn initial(data: &DataMatrix, cfg: &ChainConfig) -> Self {
        let p = data.p();
        let noise = NoiseModel::new(
            (0..p)
                .map(|i| GaussianMixture::initial(data.column(i), cfg.k))
                .collect(),
        );
        ChainState {
            graph: Graph::empty(p),
            coefficients: DMatrix::zeros(p, p),
            gamma: cfg.fixed_gamma.unwrap_or_else(|| cfg.prior.gamma_start()),
            gamma1: cfg.prior.gamma1_start(),
            noise,
            z: vec![vec![0; data.n()]; p],
        }
    }

    pub fn snapshot(&self, iteration: usize, chain: usize) -> Sample {
        Sample {
            iteration,
            chain,
            graph: self.graph.clone(),
            coefficients: self.coefficients.clone(),
            gamma: self.gamma,
            gamma1: self.gamma1,
            noise: self.noise.clone(),
        }
    }

    pub(crate) fn validate_for(&self, data: &DataMatrix, k: usize) -> Result<()> {
        let p = data.p();
        if self.graph.p() != p
            || self.coefficients.nrows() != p
            || self.coefficients.ncols() != p
            || self.noise.p() != p
            || self.z.len() != p
        {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.graph.p(),
            });
        }
        for i in 0..p {
            if self.noise.per_node[i].k() != k {
                return Err(Error::InvalidConfig(format!(
                    "node {i} mixture has {} components, config says {k}",
                    self.noise.per_node[i].k()
                )));
            }
            if self.z[i].len() != data.n() || self.z[i].iter().any(|&c| c >= k) {
                return Err(Error::InvalidParameter(format!("bad indicators at node {i}")));
            }
            for j in 0..p {
                if !self.graph.e(i, j) && self.coefficients[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "coefficient B[{i}][{j}] set off the graph support"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One recorded posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub chain: usize,
    pub graph: Graph,
    pub coefficients: DMatrix<f64>,
    pub gamma: f64,
    pub gamma1: f64,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dag,
    Dcg,
}

/// Per-chain Metropolis-Hastings acceptance summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub edge_acceptance: Option<f64>,
    pub coefficient_acceptance: Option<f64>,
    pub final_mh_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub chains: usize,
    pub config: ChainConfig,
    /// Unix seconds; absent unless explicitly stamped so that repeated runs
    /// produce identical files.
    pub created: Option<u64>,
    pub names: Vec<String>,
    pub standardization: Option<Standardization>,
    #[serde(default)]
    pub diagnostics: Vec<ChainDiagnostics>,
}

impl TraceMeta {
    pub fn new(kind: ModelKind, data: &DataMatrix, cfg: &ChainConfig) -> Self {
        TraceMeta {
            format_version: FORMAT_VERSION,
            model_kind: kind,
            p: data.p(),
            n: data.n(),
            k: cfg.k,
            seed: cfg.seed,
            chains: 1,
            config: cfg.clone(),
            created: None,
            names: data.names().to_vec(),
            standardization: None,
            diagnostics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub samples: Vec<Sample>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.samples.iter().map(|s| &s.graph)
    }

    /// Values of `B[i][j]` across samples.
    pub fn coefficient_values(&self, i: usize, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.coefficients[(i, j)]).collect()
    }

    /// Values of `B[i][j]` across samples, converted back to the scale of
    /// the raw data when the run standardized its input.
    pub fn coefficient_values_original(&self, i: usize, j: usize) -> Vec<f64> {
        match &self.meta.standardization {
            Some(t) => self
                .samples
                .iter()
                .map(|s| t.coefficient_to_original(i, j, s.coefficients[(i, j)]))
                .collect(),
            None => self.coefficient_values(i, j),
        }
    }
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Run `chains` independently seeded chains (seed fixed, ChaCha stream =
/// chain index) concurrently and concatenate their post-burn-in samples in
/// chain order. Chain 0 reproduces a single-chain run exactly.
pub fn run_chains(
    data: &DataMatrix,
    cfg: &ChainConfig,
    kind: ModelKind,
    chains: usize,
) -> Result<Trace> {
    if chains == 0 {
        return Err(Error::InvalidConfig("need at least one chain".into()));
    }
    let results: Vec<Result<Trace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                scope.spawn(move || match kind {
                    ModelKind::Dag => DagSampler::with_chain(data, cfg.clone(), c)?.run(),
                    ModelKind::Dcg => DcgSampler::with_chain(data, cfg.clone(), c)?.run(),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    let mut traces = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let mut merged = traces.next().expect("at least one chain");
    for t in traces {
        merged.meta.diagnostics.extend(t.meta.diagnostics);
        merged.samples.extend(t.samples);
    }
    merged.meta.chains = chains;
    Ok(merged)
}

pub(crate) fn progress(kind: &str, chain: usize, iter: usize, cfg: &ChainConfig, state: &ChainState) {
    if let Some(every) = cfg.progress_every {
        if every > 0 && (iter + 1).is_multiple_of(every) {
            eprintln!(
                "[{kind} chain {chain}] sweep {}/{} T={:.3} edges={} gamma={:.4} gamma1={:.4}",
                iter + 1,
                cfg.iterations,
                temperature(iter, cfg),
                state.graph.edge_count(),
                state.gamma,
                state.gamma1
            );
        }
    }
}
