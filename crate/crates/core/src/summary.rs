//! Posterior summaries of a trace: edge inclusion probabilities, the
//! weighted-medoid graph estimate, credible intervals and motif probabilities.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{contains_motif, Graph, GraphDistance, MotifSpec};
use crate::sampler::Trace;

/// Fraction of samples containing each edge; entry `[i][j]` is for `j -> i`.
pub fn edge_inclusion_probs(trace: &Trace) -> Result<Vec<Vec<f64>>> {
    let first = trace.samples.first().ok_or(Error::EmptyTrace)?;
    let p = first.graph.p();
    let mut counts = vec![vec![0usize; p]; p];
    for g in trace.graphs() {
        for (s, t) in g.edges() {
            counts[t][s] += 1;
        }
    }
    let m = trace.len() as f64;
    Ok(counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / m).collect())
        .collect())
}

/// Distinct graphs of a trace with their multiplicities, ordered by
/// canonical key.
#[derive(Debug, Clone, PartialEq)]
pub struct UniqueGraphSet {
    keys: Vec<String>,
    graphs: Vec<Graph>,
    counts: Vec<usize>,
    total: usize,
}

impl UniqueGraphSet {
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> Result<Self> {
        let mut groups: BTreeMap<String, (Graph, usize)> = BTreeMap::new();
        let mut total = 0;
        let mut p = None;
        for g in graphs {
            match p {
                None => p = Some(g.p()),
                Some(p) if p != g.p() => {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: g.p(),
                    })
                }
                _ => {}
            }
            total += 1;
            groups
                .entry(g.canonical_key())
                .or_insert_with(|| (g.clone(), 0))
                .1 += 1;
        }
        if total == 0 {
            return Err(Error::EmptyTrace);
        }
        let mut keys = Vec::with_capacity(groups.len());
        let mut out = Vec::with_capacity(groups.len());
        let mut counts = Vec::with_capacity(groups.len());
        for (k, (g, c)) in groups {
            keys.push(k);
            out.push(g);
            counts.push(c);
        }
        Ok(UniqueGraphSet {
            keys,
            graphs: out,
            counts,
            total,
        })
    }

    pub fn from_trace(trace: &Trace) -> Result<Self> {
        Self::from_graphs(trace.graphs())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Posterior weight of each unique graph: multiplicity over trace length.
    pub fn weights(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `table[l][u] = d(graph_l, graph_u)`, computed in parallel.
    pub fn distance_table(&self, d: &GraphDistance) -> Result<Vec<Vec<f64>>> {
        if d.requires_acyclic() && self.graphs.iter().any(|g| !g.is_acyclic()) {
            return Err(Error::SidOnCyclic);
        }
        self.graphs
            .par_iter()
            .map(|a| self.graphs.iter().map(|b| d.distance(a, b)).collect())
            .collect()
    }
}

/// One row of the medoid report.
#[derive(Debug, Clone, PartialEq)]
pub struct MedoidRow {
    pub key: String,
    pub weight: f64,
    pub count: usize,
    /// Posterior-weighted total distance from this candidate to every unique graph.
    pub expected_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedoidReport {
    pub graph: Graph,
    /// Index of the chosen graph in `rows`.
    pub chosen: usize,
    pub rows: Vec<MedoidRow>,
    pub warnings: Vec<String>,
}

/// Weighted medoid from a precomputed distance table, `table[l][u] = d(G_l, G_u)`.
///
/// `D_l = sum_u w_u d(G_l, G_u)`, self-term included. The minimizer wins;
/// ties go to the smallest canonical key.
pub fn medoid_from_table(set: &UniqueGraphSet, table: &[Vec<f64>]) -> Result<MedoidReport> {
    let v = set.len();
    if table.len() != v || table.iter().any(|r| r.len() != v) {
        return Err(Error::DimensionMismatch {
            expected: v,
            found: table.len(),
        });
    }
    let mut warnings = Vec::new();
    for (l, row) in table.iter().enumerate() {
        if let Some(bad) = row.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::CustomDistance(format!(
                "distance {bad} is not a finite nonnegative real"
            )));
        }
        if row[l] != 0.0 {
            warnings.push(format!(
                "d(g, g) = {} for graph {:?}; the self-term is kept in D_l",
                row[l], set.keys[l]
            ));
        }
    }
    let m = set.total as f64;
    // sum of count * distance, divided once: exact for integer-valued metrics
    let losses: Vec<f64> = table
        .iter()
        .map(|row| {
            row.iter()
                .zip(&set.counts)
                .map(|(d, &c)| c as f64 * d)
                .sum::<f64>()
                / m
        })
        .collect();
    // keys are sorted, so the first strict minimum has the smallest key
    let mut chosen = 0;
    for l in 1..v {
        if losses[l] < losses[chosen] {
            chosen = l;
        }
    }
    let weights = set.weights();
    let rows = (0..v)
        .map(|l| MedoidRow {
            key: set.keys[l].clone(),
            weight: weights[l],
            count: set.counts[l],
            expected_loss: losses[l],
        })
        .collect();
    Ok(MedoidReport {
        graph: set.graphs[chosen].clone(),
        chosen,
        rows,
        warnings,
    })
}

/// Decision-theoretic point estimate: the sampled graph minimizing
/// posterior expected loss over the sampled graphs.
pub fn point_est_graph_from_set(set: &UniqueGraphSet, d: &GraphDistance) -> Result<MedoidReport> {
    let table = set.distance_table(d)?;
    medoid_from_table(set, &table)
}

pub fn point_est_graph(trace: &Trace, d: &GraphDistance) -> Result<MedoidReport> {
    point_est_graph_from_set(&UniqueGraphSet::from_trace(trace)?, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalMethod {
    #[default]
    Hpd,
    EqualTailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalScope {
    /// All samples, including the exact zeros of excluded edges.
    #[default]
    Marginal,
    /// Only samples where the coefficient is nonzero.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
    pub scope: IntervalScope,
    /// Fraction of all samples that are nonzero.
    pub inclusion_prob: f64,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (m - 1) prob`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Credible interval of a scalar trace.
///
/// Both methods return a window of `ceil(level * m)` consecutive order
/// statistics. Equal-tailed centres it, leaving `floor((m - w) / 2)` samples
/// below and the rest above; HPD takes the shortest such window (the lowest
/// one on ties).
pub fn posterior_interval(
    values: &[f64],
    level: f64,
    method: IntervalMethod,
    scope: IntervalScope,
) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    if values.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    let inclusion_prob = nonzero.len() as f64 / values.len() as f64;
    let mut sorted = match scope {
        IntervalScope::Marginal => values.to_vec(),
        IntervalScope::Conditional if nonzero.is_empty() => return Err(Error::EmptyConditional),
        IntervalScope::Conditional => nonzero,
    };
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let width = ((level * m as f64).ceil() as usize).clamp(1, m);
    let (lower, upper) = match method {
        IntervalMethod::EqualTailed => {
            let lo = (m - width) / 2;
            (sorted[lo], sorted[lo + width - 1])
        }
        IntervalMethod::Hpd => {
            let mut best = 0;
            for start in 1..=(m - width) {
                if sorted[start + width - 1] - sorted[start]
                    < sorted[best + width - 1] - sorted[best]
                {
                    best = start;
                }
            }
            (sorted[best], sorted[best + width - 1])
        }
    };
    Ok(CredibleInterval {
        lower,
        upper,
        level,
        method,
        scope,
        inclusion_prob,
    })
}

/// Fraction of samples whose graph contains the motif.
pub fn motif_probability(trace: &Trace, motif: &MotifSpec) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut hits = 0usize;
    for g in trace.graphs() {
        if contains_motif(g, motif)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / trace.len() as f64)
}
