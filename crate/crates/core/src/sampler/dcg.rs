//! Gibbs-within-Metropolis sampler over directed graphs that may contain cycles.
//!
//! Edges and coefficients move by Metropolis-Hastings under the
//! change-of-variables likelihood `n ln|det(I - B)| + sum ln p(e)`; the
//! mixture, the edge probability and the slab variance are refreshed by their
//! conjugate Gibbs draws exactly as in the acyclic sampler.
//!
//! Only row `i` of `I - B` changes when `B[i][j]` moves, so a move touches
//! one residual column and one determinant.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    chain_rng, progress, temperature, update_gamma, update_gamma1, ChainConfig, ChainDiagnostics,
    ChainState, ModelKind, ScanOrder, Trace, TraceMeta,
};
use crate::dist;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::{log_abs_det_i_minus_b, residual_matrix, DataMatrix};
use crate::noise::{gibbs_update_mixture, update_indicators_into, GaussianMixture};

const TARGET_ACCEPTANCE: f64 = 0.44;

#[derive(Debug, Clone, Copy, Default)]
struct Counter {
    proposed: u64,
    accepted: u64,
}

impl Counter {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }

    fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

pub struct DcgSampler<'a> {
    data: &'a DataMatrix,
    cfg: ChainConfig,
    chain: usize,
    state: ChainState,
    rng: ChaCha8Rng,
    temp: f64,
    mh_step: f64,
    // residual columns of (I - B) Y, column-major n x p
    resid: DMatrix<f64>,
    // per-node sum of ln p_i(residual)
    node_ll: Vec<f64>,
    log_det: f64,
    edge_mask: Option<Graph>,
    acyclic_only: bool,
    edge_moves: Counter,
    coef_moves: Counter,
    scratch: Vec<f64>,
}

impl<'a> DcgSampler<'a> {
    pub fn new(data: &'a DataMatrix, cfg: ChainConfig) -> Result<Self> {
        Self::with_chain(data, cfg, 0)
    }

    pub fn with_chain(data: &'a DataMatrix, cfg: ChainConfig, chain: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = chain_rng(cfg.seed, chain);
        let mut state = ChainState::initial(data, &cfg);
        for i in 0..data.p() {
            update_indicators_into(data.column(i), &state.noise.per_node[i], &mut state.z[i], &mut rng);
        }
        let mut sampler = DcgSampler {
            data,
            mh_step: cfg.mh_step,
            cfg,
            chain,
            state,
            rng,
            temp: 1.0,
            resid: DMatrix::zeros(0, 0),
            node_ll: Vec::new(),
            log_det: 0.0,
            edge_mask: None,
            acyclic_only: false,
            edge_moves: Counter::default(),
            coef_moves: Counter::default(),
            scratch: vec![0.0; data.n()],
        };
        sampler.refresh_caches()?;
        Ok(sampler)
    }

    /// Replace the starting state. `I - B` must pass the determinant guard.
    pub fn with_state(mut self, state: ChainState) -> Result<Self> {
        state.validate_for(self.data, self.cfg.k)?;
        self.state = state;
        self.refresh_caches()?;
        Ok(self)
    }

    /// Restrict edge toggles to pairs present in `mask`; other pairs keep
    /// their current state.
    pub fn with_edge_mask(mut self, mask: Graph) -> Result<Self> {
        if mask.p() != self.data.p() {
            return Err(Error::DimensionMismatch {
                expected: self.data.p(),
                found: mask.p(),
            });
        }
        self.edge_mask = Some(mask);
        Ok(self)
    }

    /// Skip births that would close a directed cycle, confining the chain
    /// to acyclic graphs. The start state must be acyclic.
    pub fn acyclic_only(mut self) -> Result<Self> {
        if !self.state.graph.is_acyclic() {
            return Err(Error::InvalidParameter("acyclic-only run needs an acyclic start".into()));
        }
        self.acyclic_only = true;
        Ok(self)
    }

    /// Fix the annealing temperature used by subsequent single moves.
    pub fn set_temperature(&mut self, temp: f64) {
        self.temp = temp;
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Current total log likelihood, `n ln|det(I - B)| + sum ln p(e)`.
    pub fn log_likelihood(&self) -> f64 {
        self.data.n() as f64 * self.log_det + self.node_ll.iter().sum::<f64>()
    }

    fn refresh_caches(&mut self) -> Result<()> {
        self.log_det = log_abs_det_i_minus_b(&self.state.coefficients)?;
        self.resid = residual_matrix(self.data, &self.state.coefficients);
        let n = self.data.n();
        self.node_ll = (0..self.data.p())
            .map(|i| {
                let mix = &self.state.noise.per_node[i];
                self.resid.as_slice()[i * n..(i + 1) * n]
                    .iter()
                    .map(|&e| mix.log_density(e))
                    .sum()
            })
            .collect();
        Ok(())
    }

    /// Log likelihood change and new log-determinant if `B[i][j]` became
    /// `value`; `None` when the move breaks the determinant guard. Leaves the
    /// candidate residual column in `self.scratch`.
    fn evaluate_move(&mut self, i: usize, j: usize, value: f64) -> Option<(f64, f64)> {
        let old = self.state.coefficients[(i, j)];
        self.state.coefficients[(i, j)] = value;
        let log_det = log_abs_det_i_minus_b(&self.state.coefficients);
        self.state.coefficients[(i, j)] = old;
        let log_det = log_det.ok()?;

        let n = self.data.n();
        let delta = value - old;
        let col = &self.resid.as_slice()[i * n..(i + 1) * n];
        let yj = self.data.column(j);
        let mix: &GaussianMixture = &self.state.noise.per_node[i];
        let mut ll = 0.0;
        for ((s, &r), &y) in self.scratch.iter_mut().zip(col).zip(yj) {
            *s = r - delta * y;
            ll += mix.log_density(*s);
        }
        let d_ll = n as f64 * (log_det - self.log_det) + ll - self.node_ll[i];
        Some((d_ll, ll))
    }

    fn commit_move(&mut self, i: usize, j: usize, value: f64, node_ll: f64) {
        let n = self.data.n();
        self.state.coefficients[(i, j)] = value;
        self.state.graph.set(i, j, value != 0.0);
        self.resid.as_mut_slice()[i * n..(i + 1) * n].copy_from_slice(&self.scratch);
        self.node_ll[i] = node_ll;
        // recomputed rather than carried to avoid drift
        self.log_det = log_abs_det_i_minus_b(&self.state.coefficients)
            .expect("committed state passed the determinant guard");
    }

    /// Log acceptance ratio of toggling `j -> i`, with `birth_value` as the
    /// coefficient a birth would propose. `None` if the toggled state breaks
    /// the determinant guard.
    pub fn edge_toggle_log_ratio(&mut self, i: usize, j: usize, birth_value: f64) -> Option<f64> {
        let present = self.state.graph.e(i, j);
        let (value, log_prior_odds) = if present {
            (0.0, (1.0 - self.state.gamma).ln() - self.state.gamma.ln())
        } else {
            (birth_value, self.state.gamma.ln() - (1.0 - self.state.gamma).ln())
        };
        self.evaluate_move(i, j, value)
            .map(|(d_ll, _)| d_ll / self.temp + log_prior_odds)
    }

    /// Birth/death move on the edge `j -> i`.
    ///
    /// A birth draws the new coefficient from the slab `N(0, gamma1)`; its
    /// prior density cancels against the proposal density, so the acceptance
    /// ratio is the tempered likelihood ratio times `gamma / (1 - gamma)`
    /// (inverted for a death). Returns whether the move was accepted.
    pub fn mh_edge_toggle(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "edge toggle on the diagonal");
        let present = self.state.graph.e(i, j);
        let (value, log_prior_odds) = if present {
            (0.0, (1.0 - self.state.gamma).ln() - self.state.gamma.ln())
        } else {
            let b = dist::normal(&mut self.rng, 0.0, self.state.gamma1);
            (b, self.state.gamma.ln() - (1.0 - self.state.gamma).ln())
        };
        let log_u = self.rng.random::<f64>().ln();
        let accepted = match self.evaluate_move(i, j, value) {
            Some((d_ll, ll)) if log_u < d_ll / self.temp + log_prior_odds => {
                self.commit_move(i, j, value, ll);
                true
            }
            _ => false,
        };
        self.edge_moves.record(accepted);
        accepted
    }

    /// Random-walk move on the coefficient of a present edge `j -> i`.
    pub fn mh_coefficient_update(&mut self, i: usize, j: usize) -> bool {
        assert!(self.state.graph.e(i, j), "coefficient move on an absent edge");
        let old = self.state.coefficients[(i, j)];
        let proposal = old + self.mh_step * dist::std_normal(&mut self.rng);
        let log_u = self.rng.random::<f64>().ln();
        // a proposal of exactly zero would leave the slab; treat as rejected
        let accepted = proposal != 0.0
            && match self.evaluate_move(i, j, proposal) {
                Some((d_ll, ll)) => {
                    let log_prior = (old * old - proposal * proposal) / (2.0 * self.state.gamma1);
                    if log_u < d_ll / self.temp + log_prior {
                        self.commit_move(i, j, proposal, ll);
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
        self.coef_moves.record(accepted);
        accepted
    }

    fn toggle_allowed(&self, i: usize, j: usize) -> bool {
        if self.acyclic_only && !self.state.graph.e(i, j) && self.state.graph.reaches(i, j) {
            return false;
        }
        self.edge_mask.as_ref().is_none_or(|m| m.e(i, j))
    }

    pub fn sweep(&mut self, iter: usize) -> Result<()> {
        self.temp = temperature(iter, &self.cfg);
        let p = self.data.p();
        let updates = self.cfg.updates;

        if updates.edges {
            let mut pairs: Vec<(usize, usize)> = (0..p)
                .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect();
            if self.cfg.scan == ScanOrder::Random {
                pairs.shuffle(&mut self.rng);
            }
            for (i, j) in pairs {
                if self.toggle_allowed(i, j) {
                    self.mh_edge_toggle(i, j);
                }
            }
        }

        if updates.coefficients {
            let before = self.coef_moves;
            let edges: Vec<(usize, usize)> = self.state.graph.edges().collect();
            for (s, t) in edges {
                self.mh_coefficient_update(t, s);
            }
            if self.cfg.adapt && iter < self.cfg.burn_in {
                let proposed = self.coef_moves.proposed - before.proposed;
                if proposed > 0 {
                    let rate = (self.coef_moves.accepted - before.accepted) as f64 / proposed as f64;
                    let gain = 1.0 / (iter as f64 + 1.0).powf(0.6);
                    self.mh_step *= (gain * (rate - TARGET_ACCEPTANCE)).exp();
                }
            }
        }

        if updates.noise {
            let n = self.data.n();
            for i in 0..p {
                let resid = &self.resid.as_slice()[i * n..(i + 1) * n];
                let mix = &self.state.noise.per_node[i];
                update_indicators_into(resid, mix, &mut self.state.z[i], &mut self.rng);
                let updated =
                    gibbs_update_mixture(resid, &self.state.z[i], mix, &self.cfg.mixture, &mut self.rng)?;
                self.node_ll[i] = resid.iter().map(|&e| updated.log_density(e)).sum();
                self.state.noise.per_node[i] = updated;
            }
        }

        if updates.gamma {
            self.state.gamma = match self.cfg.fixed_gamma {
                Some(g) => g,
                None => update_gamma(&self.state.graph, &self.cfg.prior, &mut self.rng),
            };
        }
        if updates.gamma1 {
            self.state.gamma1 = update_gamma1(
                &self.state.coefficients,
                &self.state.graph,
                &self.cfg.prior,
                &mut self.rng,
            );
        }
        Ok(())
    }

    pub fn diagnostics(&self) -> ChainDiagnostics {
        ChainDiagnostics {
            chain: self.chain,
            edge_acceptance: self.edge_moves.rate(),
            coefficient_acceptance: self.coef_moves.rate(),
            final_mh_step: Some(self.mh_step),
        }
    }

    pub fn run(mut self) -> Result<Trace> {
        let mut samples = Vec::with_capacity(self.cfg.sample_count());
        for iter in 0..self.cfg.iterations {
            if iter == self.cfg.burn_in {
                // acceptance is reported for the sampling phase only
                self.edge_moves = Counter::default();
                self.coef_moves = Counter::default();
            }
            self.sweep(iter)?;
            if self.cfg.records(iter) {
                samples.push(self.state.snapshot(iter, self.chain));
            }
            progress("dcg", self.chain, iter, &self.cfg, &self.state);
        }
        let mut meta = TraceMeta::new(ModelKind::Dcg, self.data, &self.cfg);
        meta.diagnostics.push(self.diagnostics());
        Ok(Trace { meta, samples })
    }
}

/// Run one cyclic-graph chain from the default starting state.
pub fn run_dcg_chain(data: &DataMatrix, cfg: &ChainConfig) -> Result<Trace> {
    DcgSampler::new(data, cfg.clone())?.run()
}
