//! Collapsed Gibbs sampler over DAGs with simulated annealing.
//!
//! Each sweep:
//!
//! 1. Edge indicators are refreshed pair by pair with the coefficients
//!    integrated out. For an unordered pair `{a, b}` the three states
//!    "no edge", `b -> a` and `a -> b` are drawn jointly from their exact
//!    conditional, with weights `prior * exp(l / T)` where `l` sums the
//!    collapsed marginals of nodes `a` and `b`. States that would close a
//!    directed cycle get weight zero. Drawing the pair jointly lets a single
//!    step reverse an edge.
//! 2. Coefficients on the current support are drawn from their Gaussian
//!    full conditional.
//! 3. Mixture labels and parameters are refreshed on the residuals.
//! 4. The edge probability and slab variance get conjugate draws.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    chain_rng, progress, temperature, update_gamma, update_gamma1, ChainConfig, ChainState,
    ModelKind, ScanOrder, Trace, TraceMeta,
};
use crate::dist;
use crate::error::{Error, Result};
use crate::likelihood::{DataMatrix, NodeStats};
use crate::noise::{gibbs_update_mixture, update_indicators_into};

pub struct DagSampler<'a> {
    data: &'a DataMatrix,
    cfg: ChainConfig,
    chain: usize,
    state: ChainState,
    rng: ChaCha8Rng,
}

impl<'a> DagSampler<'a> {
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
        Ok(DagSampler {
            data,
            cfg,
            chain,
            state,
            rng,
        })
    }

    /// Replace the starting state. The graph must be acyclic.
    pub fn with_state(mut self, state: ChainState) -> Result<Self> {
        state.validate_for(self.data, self.cfg.k)?;
        if !state.graph.is_acyclic() {
            return Err(Error::InvalidParameter("DAG sampler needs an acyclic start".into()));
        }
        self.state = state;
        Ok(self)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn run(mut self) -> Result<Trace> {
        let mut meta = TraceMeta::new(ModelKind::Dag, self.data, &self.cfg);
        meta.diagnostics.push(super::ChainDiagnostics {
            chain: self.chain,
            edge_acceptance: None,
            coefficient_acceptance: None,
            final_mh_step: None,
        });
        let mut samples = Vec::with_capacity(self.cfg.sample_count());
        for iter in 0..self.cfg.iterations {
            self.sweep(iter)?;
            if self.cfg.records(iter) {
                samples.push(self.state.snapshot(iter, self.chain));
            }
            progress("dag", self.chain, iter, &self.cfg, &self.state);
        }
        Ok(Trace { meta, samples })
    }

    fn node_stats(&self) -> Vec<NodeStats> {
        let p = self.data.p();
        let columns: Vec<&[f64]> = (0..p).map(|j| self.data.column(j)).collect();
        (0..p)
            .map(|i| {
                let mix = &self.state.noise.per_node[i];
                let z = &self.state.z[i];
                let y: Vec<f64> = columns[i]
                    .iter()
                    .zip(z)
                    .map(|(v, &c)| v - mix.means()[c])
                    .collect();
                let var: Vec<f64> = z.iter().map(|&c| mix.variances()[c]).collect();
                NodeStats::new(&y, &columns, &var)
            })
            .collect()
    }

    /// One full sweep at iteration `iter` (sets the annealing temperature).
    pub fn sweep(&mut self, iter: usize) -> Result<()> {
        let temp = temperature(iter, &self.cfg);
        let updates = self.cfg.updates;
        if updates.edges || updates.coefficients {
            let stats = self.node_stats();
            if updates.edges {
                self.update_edges(&stats, temp);
            }
            if updates.coefficients {
                self.draw_coefficients(&stats);
            }
        }
        if updates.noise {
            self.update_noise()?;
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

    fn update_edges(&mut self, stats: &[NodeStats], temp: f64) {
        let p = self.data.p();
        let mut pairs: Vec<(usize, usize)> =
            (0..p).flat_map(|a| ((a + 1)..p).map(move |b| (a, b))).collect();
        if self.cfg.scan == ScanOrder::Random {
            pairs.shuffle(&mut self.rng);
        }
        let ln_g = self.state.gamma.ln();
        let ln_1mg = (1.0 - self.state.gamma).ln();
        let gamma1 = self.state.gamma1;
        for (a, b) in pairs {
            let g = &mut self.state.graph;
            g.set(a, b, false);
            g.set(b, a, false);
            // b -> a closes a cycle iff a already reaches b, and vice versa
            let allow_ba = !g.reaches(a, b);
            let allow_ab = !g.reaches(b, a);

            let pa_a: Vec<usize> = g.parents(a).collect();
            let pa_b: Vec<usize> = g.parents(b).collect();
            let la0 = stats[a].log_marginal(&pa_a, gamma1);
            let lb0 = stats[b].log_marginal(&pa_b, gamma1);
            let la1 = if allow_ba {
                stats[a].log_marginal(&with_parent(&pa_a, b), gamma1)
            } else {
                f64::NEG_INFINITY
            };
            let lb1 = if allow_ab {
                stats[b].log_marginal(&with_parent(&pa_b, a), gamma1)
            } else {
                f64::NEG_INFINITY
            };

            let w = [
                2.0 * ln_1mg + (la0 + lb0) / temp,
                ln_g + ln_1mg + (la1 + lb0) / temp,
                ln_g + ln_1mg + (la0 + lb1) / temp,
            ];
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let probs = w.map(|x| if x == f64::NEG_INFINITY { 0.0 } else { (x - max).exp() });
            let u = self.rng.random::<f64>() * probs.iter().sum::<f64>();
            let choice = if u < probs[0] {
                0
            } else if u < probs[0] + probs[1] {
                1
            } else {
                2
            };
            match choice {
                1 => g.set(a, b, true),
                2 => g.set(b, a, true),
                _ => {}
            }
        }
        // coefficients of removed edges are re-drawn below; keep support consistent now
        for i in 0..p {
            for j in 0..p {
                if !self.state.graph.e(i, j) {
                    self.state.coefficients[(i, j)] = 0.0;
                }
            }
        }
    }

    fn draw_coefficients(&mut self, stats: &[NodeStats]) {
        let p = self.data.p();
        for i in 0..p {
            let parents: Vec<usize> = self.state.graph.parents(i).collect();
            let z: Vec<f64> = (0..parents.len()).map(|_| dist::std_normal(&mut self.rng)).collect();
            let draw = stats[i].draw_coefficients(&parents, self.state.gamma1, &z);
            for j in 0..p {
                self.state.coefficients[(i, j)] = 0.0;
            }
            for (&j, &b) in parents.iter().zip(&draw) {
                self.state.coefficients[(i, j)] = b;
            }
        }
    }

    fn update_noise(&mut self) -> Result<()> {
        let p = self.data.p();
        let n = self.data.n();
        let mut resid = vec![0.0; n];
        for i in 0..p {
            resid.copy_from_slice(self.data.column(i));
            for j in self.state.graph.parents(i) {
                let b = self.state.coefficients[(i, j)];
                for (r, y) in resid.iter_mut().zip(self.data.column(j)) {
                    *r -= b * y;
                }
            }
            let mix = &self.state.noise.per_node[i];
            update_indicators_into(&resid, mix, &mut self.state.z[i], &mut self.rng);
            self.state.noise.per_node[i] = gibbs_update_mixture(
                &resid,
                &self.state.z[i],
                mix,
                &self.cfg.mixture,
                &mut self.rng,
            )?;
        }
        Ok(())
    }
}

fn with_parent(parents: &[usize], extra: usize) -> Vec<usize> {
    let mut v = parents.to_vec();
    let pos = v.partition_point(|&x| x < extra);
    v.insert(pos, extra);
    v
}

/// Run one DAG chain from the default starting state.
pub fn run_dag_chain(data: &DataMatrix, cfg: &ChainConfig) -> Result<Trace> {
    DagSampler::new(data, cfg.clone())?.run()
}
