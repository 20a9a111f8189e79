//! Independent brute-force oracles used by the integration and acceptance
//! tests. Nothing here calls the library routine it is meant to check.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use cyclo::Graph;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random DAG: random node order, each forward pair present with prob `density`.
pub fn random_dag<R: Rng>(p: usize, density: f64, rng: &mut R) -> Graph {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if rng.random::<f64>() < density {
                edges.push((order[a], order[b]));
            }
        }
    }
    Graph::from_edges(p, &edges).unwrap()
}

/// All DAGs on `p` nodes (by filtering the 2^(p(p-1)) edge sets).
pub fn all_dags(p: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|s| (0..p).map(move |t| (s, t)))
        .filter(|(s, t)| s != t)
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &e)| e)
            .collect();
        let g = Graph::from_edges(p, &edges).unwrap();
        if has_no_cycle_by_dfs(&g) {
            out.push(g);
        }
    }
    out
}

fn has_no_cycle_by_dfs(g: &Graph) -> bool {
    // colour-based DFS, independent of the library's Kahn ordering
    fn visit(g: &Graph, v: usize, colour: &mut [u8]) -> bool {
        colour[v] = 1;
        for c in 0..g.p() {
            if g.contains(v, c) {
                if colour[c] == 1 || (colour[c] == 0 && !visit(g, c, colour)) {
                    return false;
                }
            }
        }
        colour[v] = 2;
        true
    }
    let mut colour = vec![0u8; g.p()];
    (0..g.p()).all(|v| colour[v] != 0 || visit(g, v, &mut colour))
}

fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    (0..g.p())
        .map(|s| (0..g.p()).map(|t| g.contains(s, t)).collect())
        .collect()
}

/// Hamming SHD straight off the adjacency matrices.
pub fn shd_hamming_oracle(a: &Graph, b: &Graph) -> usize {
    let (ma, mb) = (adjacency(a), adjacency(b));
    let mut d = 0;
    for s in 0..a.p() {
        for t in 0..a.p() {
            if ma[s][t] != mb[s][t] {
                d += 1;
            }
        }
    }
    d
}

/// Standard SHD as a shortest path in the space of edge sets, with single
/// additions, deletions and reversals as unit-cost moves.
pub fn shd_standard_oracle(a: &Graph, b: &Graph) -> usize {
    let p = a.p();
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|s| (0..p).map(move |t| (s, t)))
        .filter(|(s, t)| s != t)
        .collect();
    let index: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let encode = |g: &Graph| -> u64 {
        pairs
            .iter()
            .enumerate()
            .filter(|(_, &(s, t))| g.contains(s, t))
            .map(|(k, _)| 1u64 << k)
            .sum()
    };
    let (start, goal) = (encode(a), encode(b));
    let mut dist: HashMap<u64, usize> = HashMap::new();
    dist.insert(start, 0);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        let d = dist[&state];
        if state == goal {
            return d;
        }
        let mut next = Vec::new();
        for (k, &(s, t)) in pairs.iter().enumerate() {
            next.push(state ^ (1 << k));
            let rev = index[&(t, s)];
            if state & (1 << k) != 0 && state & (1 << rev) == 0 {
                next.push(state & !(1 << k) | (1 << rev));
            }
        }
        for nx in next {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(nx) {
                e.insert(d + 1);
                queue.push_back(nx);
            }
        }
    }
    unreachable!("every edge set is reachable")
}

/// All simple paths between `from` and `to` in the skeleton, as node lists.
fn skeleton_paths(g: &Graph, from: usize, to: usize) -> Vec<Vec<usize>> {
    fn go(g: &Graph, path: &mut Vec<usize>, to: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == to {
            out.push(path.clone());
            return;
        }
        for w in 0..g.p() {
            if (g.contains(v, w) || g.contains(w, v)) && !path.contains(&w) {
                path.push(w);
                go(g, path, to, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![from], to, &mut out);
    out
}

fn descendants_by_paths(g: &Graph, v: usize) -> Vec<bool> {
    let mut d = vec![false; g.p()];
    d[v] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..g.p() {
            for t in 0..g.p() {
                if d[s] && g.contains(s, t) && !d[t] {
                    d[t] = true;
                    changed = true;
                }
            }
        }
    }
    d
}

/// SID by direct application of the adjustment criterion: enumerate every
/// path between each ordered pair in the true graph, collect the causal
/// ones, check the adjustment set against the forbidden descendants and
/// check that every non-causal path is blocked.
pub fn sid_oracle(g_true: &Graph, g_est: &Graph) -> usize {
    let p = g_true.p();
    let desc: Vec<Vec<bool>> = (0..p).map(|v| descendants_by_paths(g_true, v)).collect();
    let mut count = 0;
    for i in 0..p {
        let z: Vec<bool> = (0..p).map(|v| g_est.contains(v, i)).collect();
        for j in 0..p {
            if j == i {
                continue;
            }
            if z[j] {
                if desc[i][j] {
                    count += 1;
                }
                continue;
            }
            let paths = skeleton_paths(g_true, i, j);
            let is_causal =
                |path: &Vec<usize>| path.windows(2).all(|w| g_true.contains(w[0], w[1]));
            let mut forbidden = vec![false; p];
            for path in paths.iter().filter(|pth| is_causal(pth)) {
                for &w in &path[1..] {
                    for v in 0..p {
                        if desc[w][v] {
                            forbidden[v] = true;
                        }
                    }
                }
            }
            if (0..p).any(|v| z[v] && forbidden[v]) {
                count += 1;
                continue;
            }
            let blocked = |path: &Vec<usize>| {
                (1..path.len() - 1).any(|k| {
                    let (a, v, b) = (path[k - 1], path[k], path[k + 1]);
                    let collider = g_true.contains(a, v) && g_true.contains(b, v);
                    if collider {
                        !(0..p).any(|u| z[u] && desc[v][u])
                    } else {
                        z[v]
                    }
                })
            };
            if paths.iter().any(|pth| !is_causal(pth) && !blocked(pth)) {
                count += 1;
            }
        }
    }
    count
}

/// Exhaustive weighted-medoid: `argmin_l sum_u count_u d(l, u)` with ties to
/// the smallest canonical key. Returns `(index, losses)` over `graphs` in
/// the given order.
pub fn medoid_oracle(
    graphs: &[Graph],
    counts: &[usize],
    d: impl Fn(&Graph, &Graph) -> f64,
) -> (usize, Vec<f64>) {
    let total: usize = counts.iter().sum();
    let losses: Vec<f64> = graphs
        .iter()
        .map(|a| {
            graphs
                .iter()
                .zip(counts)
                .map(|(b, &c)| c as f64 * d(a, b))
                .sum::<f64>()
                / total as f64
        })
        .collect();
    let mut best = 0;
    for l in 1..graphs.len() {
        let better = losses[l] < losses[best]
            || (losses[l] == losses[best] && graphs[l].canonical_key() < graphs[best].canonical_key());
        if better {
            best = l;
        }
    }
    (best, losses)
}

/// Empirical quantile via order statistics: position `1 + (m-1) prob` in
/// 1-based ranks, interpolated linearly.
pub fn quantile_oracle(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = 1.0 + (v.len() as f64 - 1.0) * prob;
    let below = rank.floor();
    let frac = rank - below;
    let lo = v[below as usize - 1];
    let hi = if (below as usize) < v.len() { v[below as usize] } else { lo };
    lo * (1.0 - frac) + hi * frac
}

/// Trapezoid rule for `ln int exp(f(u)) du` on a uniform grid.
pub fn log_trapezoid(log_values: &[f64], step: f64) -> f64 {
    let m = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = log_values.len() - 1;
    let s: f64 = log_values
        .iter()
        .enumerate()
        .map(|(k, lv)| {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            w * (lv - m).exp()
        })
        .sum();
    m + (s * step).ln()
}

/// Exact posterior over all 3-node DAGs under the sampler's model with a
/// single Gaussian noise component: coefficients and the noise mean are
/// integrated analytically, the noise variances and the slab variance
/// numerically on log grids, and the edge probability analytically through
/// the Beta-Bernoulli prior.
pub struct ExactDagPosterior {
    pub graphs: Vec<Graph>,
    pub probs: Vec<f64>,
}

pub struct ModelPriors {
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_gamma1: f64,
    pub b_gamma1: f64,
    pub mean_prior_var: f64,
    pub var_shape: f64,
    pub var_scale: f64,
}

fn ln_inv_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn exact_dag_posterior(columns: &[Vec<f64>], priors: &ModelPriors) -> ExactDagPosterior {
    let p = columns.len();
    let n = columns[0].len();
    // Gram of [1, y_0, ..., y_{p-1}]
    let mut design: Vec<Vec<f64>> = vec![vec![1.0; n]];
    design.extend(columns.iter().cloned());
    let gram = DMatrix::from_fn(p + 1, p + 1, |a, b| {
        design[a].iter().zip(&design[b]).map(|(x, y)| x * y).sum::<f64>()
    });

    // ln int N(y_i | mu + X_S b, s2 I) N(mu; 0, v0) N(b; 0, g1 I) dmu db
    let gaussian_part = |i: usize, parents: &[usize], s2: f64, g1: f64| -> f64 {
        let idx: Vec<usize> = std::iter::once(0).chain(parents.iter().map(|&j| j + 1)).collect();
        let k = idx.len();
        let prior_var: Vec<f64> = (0..k)
            .map(|r| if r == 0 { priors.mean_prior_var } else { g1 })
            .collect();
        let a = DMatrix::from_fn(k, k, |r, c| {
            gram[(idx[r], idx[c])] / s2 + if r == c { 1.0 / prior_var[r] } else { 0.0 }
        });
        let cvec = DVector::from_fn(k, |r, _| gram[(idx[r], i + 1)] / s2);
        let yy = gram[(i + 1, i + 1)] / s2;
        let a_inv = a.clone().try_inverse().unwrap();
        let quad = (cvec.transpose() * &a_inv * &cvec)[(0, 0)];
        -0.5 * n as f64 * (2.0 * std::f64::consts::PI * s2).ln()
            - 0.5 * prior_var.iter().map(|v| v.ln()).sum::<f64>()
            - 0.5 * a.determinant().ln()
            - 0.5 * (yy - quad)
    };

    let s2_grid: Vec<f64> = {
        let (lo, hi, m) = (0.02f64.ln(), 8.0f64.ln(), 2400);
        (0..=m).map(|k| lo + (hi - lo) * k as f64 / m as f64).collect()
    };
    let s2_step = s2_grid[1] - s2_grid[0];
    let node_marginal = |i: usize, parents: &[usize], g1: f64| -> f64 {
        let vals: Vec<f64> = s2_grid
            .iter()
            .map(|&u| {
                let s2 = u.exp();
                gaussian_part(i, parents, s2, g1) + ln_inv_gamma_pdf(s2, priors.var_shape, priors.var_scale) + u
            })
            .collect();
        log_trapezoid(&vals, s2_step)
    };

    let g1_grid: Vec<f64> = {
        let (lo, hi, m) = (1e-4f64.ln(), 1e3f64.ln(), 400);
        (0..=m).map(|k| lo + (hi - lo) * k as f64 / m as f64).collect()
    };
    let g1_step = g1_grid[1] - g1_grid[0];

    // cache node marginals per (node, parent set) over the slab grid
    let mut cache: HashMap<(usize, Vec<usize>), Vec<f64>> = HashMap::new();
    let graphs = all_dags(p);
    let pairs = (p * (p - 1)) as f64;
    let ln_beta = statrs::function::beta::ln_beta;
    let mut log_post = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let mut per_g1 = vec![0.0; g1_grid.len()];
        for i in 0..p {
            let parents: Vec<usize> = (0..p).filter(|&j| g.contains(j, i)).collect();
            let vals = cache.entry((i, parents.clone())).or_insert_with(|| {
                g1_grid
                    .iter()
                    .map(|&u| node_marginal(i, &parents, u.exp()))
                    .collect()
            });
            for (acc, v) in per_g1.iter_mut().zip(vals.iter()) {
                *acc += v;
            }
        }
        let integrand: Vec<f64> = per_g1
            .iter()
            .zip(&g1_grid)
            .map(|(ll, &u)| ll + ln_inv_gamma_pdf(u.exp(), priors.a_gamma1, priors.b_gamma1) + u)
            .collect();
        let e = g.edge_count() as f64;
        let ln_prior = ln_beta(priors.a_gamma + e, priors.b_gamma + pairs - e)
            - ln_beta(priors.a_gamma, priors.b_gamma);
        log_post.push(ln_prior + log_trapezoid(&integrand, g1_step));
    }
    let m = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_post.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    ExactDagPosterior {
        graphs,
        probs: w.iter().map(|x| x / total).collect(),
    }
}

/// Total-variation distance between an exact distribution over `graphs` and
/// the empirical distribution of `samples`.
pub fn tv_distance(graphs: &[Graph], probs: &[f64], samples: &[&Graph]) -> f64 {
    let mut freq: HashMap<String, f64> = HashMap::new();
    for g in samples {
        *freq.entry(g.canonical_key()).or_default() += 1.0 / samples.len() as f64;
    }
    let mut tv = 0.0;
    for (g, &pr) in graphs.iter().zip(probs) {
        tv += (pr - freq.remove(&g.canonical_key()).unwrap_or(0.0)).abs();
    }
    // empirical mass on graphs outside the reference set
    tv += freq.values().sum::<f64>();
    0.5 * tv
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / m).abs().max(((k + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.628 / (m as f64).sqrt()
}

/// A trace holding the given graphs, with coefficient `1 + 0.01 k` on
/// every edge of sample `k` and unit Gaussian noise.
pub fn trace_from_graphs(graphs: &[Graph]) -> cyclo::Trace {
    use cyclo::{ChainConfig, DataMatrix, GaussianMixture, ModelKind, NoiseModel, Sample, TraceMeta};
    let p = graphs.first().map_or(2, Graph::p);
    let data = DataMatrix::new(DMatrix::from_fn(3, p, |q, i| (q * p + i) as f64)).unwrap();
    let meta = TraceMeta::new(ModelKind::Dag, &data, &ChainConfig::default());
    let samples = graphs
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mut coefficients = DMatrix::zeros(p, p);
            for (s, t) in g.edges() {
                coefficients[(t, s)] = 1.0 + 0.01 * k as f64;
            }
            Sample {
                iteration: k,
                chain: 0,
                graph: g.clone(),
                coefficients,
                gamma: 0.5,
                gamma1: 1.0,
                noise: NoiseModel::uniform(p, GaussianMixture::gaussian(0.0, 1.0).unwrap()),
            }
        })
        .collect();
    cyclo::Trace { meta, samples }
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

/// Brute-force `ln int prod_q N(y_q; x_q b, v_q) prod_j N(b_j; 0, g1) db`
/// on a uniform grid, k = 0, 1 or 2.
pub fn quadrature_marginal(y: &[f64], x: &DMatrix<f64>, v: &[f64], g1: f64) -> f64 {
    let k = x.ncols();
    let (lo, hi, m) = (-10.0, 10.0, 1600usize);
    let step = (hi - lo) / m as f64;
    let grid: Vec<f64> = (0..=m).map(|t| lo + step * t as f64).collect();
    let constant: f64 = v.iter().map(|&vq| ln_normal(0.0, 0.0, vq)).sum::<f64>()
        + k as f64 * ln_normal(0.0, 0.0, g1);
    let log_f = |b: &[f64]| -> f64 {
        let mut s = constant - 0.5 * b.iter().map(|bj| bj * bj).sum::<f64>() / g1;
        for q in 0..y.len() {
            let fit: f64 = (0..k).map(|c| x[(q, c)] * b[c]).sum();
            s -= 0.5 * (y[q] - fit).powi(2) / v[q];
        }
        s
    };
    match k {
        0 => log_f(&[]),
        1 => {
            let vals: Vec<f64> = grid.iter().map(|&b| log_f(&[b])).collect();
            log_trapezoid(&vals, step)
        }
        2 => {
            // nested: inner integral over b2 for each b1
            let inner: Vec<f64> = grid
                .iter()
                .map(|&b1| {
                    let vals: Vec<f64> = grid.iter().map(|&b2| log_f(&[b1, b2])).collect();
                    log_trapezoid(&vals, step)
                })
                .collect();
            log_trapezoid(&inner, step)
        }
        _ => unreachable!(),
    }
}
