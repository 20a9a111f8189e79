//! Structural Hamming distance and structural intervention distance.

use std::fmt;
use std::sync::Arc;

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShdMode {
    /// Minimum number of edge additions, deletions and reversals; a reversal costs 1.
    #[default]
    Standard,
    /// Number of entries where the edge indicator matrices differ; a reversal costs 2.
    Hamming,
}

/// Structural Hamming distance between two graphs on the same node set.
pub fn shd(g1: &Graph, g2: &Graph, mode: ShdMode) -> Result<usize> {
    if g1.p() != g2.p() {
        return Err(Error::DimensionMismatch {
            expected: g1.p(),
            found: g2.p(),
        });
    }
    let p = g1.p();
    let mut dist = 0;
    for a in 0..p {
        for b in (a + 1)..p {
            let (ab1, ba1) = (g1.contains(a, b), g1.contains(b, a));
            let (ab2, ba2) = (g2.contains(a, b), g2.contains(b, a));
            let diff = usize::from(ab1 != ab2) + usize::from(ba1 != ba2);
            dist += match mode {
                ShdMode::Hamming => diff,
                // a single edge on both sides pointing opposite ways is one reversal
                ShdMode::Standard if diff == 2 && (ab1 ^ ba1) && (ab2 ^ ba2) => 1,
                ShdMode::Standard => diff,
            };
        }
    }
    Ok(dist)
}

/// Structural intervention distance of `g_est` with respect to `g_true`.
///
/// Counts ordered pairs `(i, j)`, `i != j`, for which adjusting for the
/// parents of `i` in `g_est` does not identify the effect of `do(X_i)` on
/// `X_j` in `g_true`. When `j` is itself a parent of `i` in `g_est`, the
/// estimate implies no effect, which is correct iff `j` is not a descendant
/// of `i` in `g_true`. Otherwise validity is decided by the adjustment
/// criterion: the set must avoid descendants of every non-`i` node on a
/// causal path `i -> ... -> j`, and must d-separate `i` and `j` in the
/// proper back-door graph.
pub fn sid(g_true: &Graph, g_est: &Graph) -> Result<usize> {
    if g_true.p() != g_est.p() {
        return Err(Error::DimensionMismatch {
            expected: g_true.p(),
            found: g_est.p(),
        });
    }
    if !g_true.is_acyclic() || !g_est.is_acyclic() {
        return Err(Error::CyclicInput);
    }
    let p = g_true.p();
    let desc: Vec<Vec<bool>> = (0..p).map(|v| g_true.descendants(v)).collect();
    let anc: Vec<Vec<bool>> = (0..p).map(|v| g_true.ancestors(v)).collect();

    let mut mistakes = 0;
    for i in 0..p {
        let adjust: Vec<bool> = (0..p).map(|v| g_est.e(i, v)).collect();
        for j in (0..p).filter(|&j| j != i) {
            if adjust[j] {
                if desc[i][j] {
                    mistakes += 1;
                }
                continue;
            }
            // nodes other than i lying on a directed path i -> ... -> j
            let causal: Vec<usize> = (0..p)
                .filter(|&w| w != i && desc[i][w] && anc[j][w])
                .collect();
            let forbidden =
                (0..p).any(|v| adjust[v] && causal.iter().any(|&w| desc[w][v]));
            if forbidden {
                mistakes += 1;
                continue;
            }
            let mut backdoor = g_true.clone();
            for &w in &causal {
                backdoor.remove(i, w);
            }
            if !d_separated(&backdoor, i, j, &adjust) {
                mistakes += 1;
            }
        }
    }
    Ok(mistakes)
}

/// Reachability form of d-separation ("Bayes ball").
fn d_separated(g: &Graph, x: usize, y: usize, given: &[bool]) -> bool {
    let p = g.p();
    // nodes in `given` or with a descendant in `given` open colliders
    let mut opens_collider = given.to_vec();
    let mut stack: Vec<usize> = (0..p).filter(|&v| given[v]).collect();
    while let Some(v) = stack.pop() {
        for a in g.parents(v) {
            if !opens_collider[a] {
                opens_collider[a] = true;
                stack.push(a);
            }
        }
    }

    // (node, arrived_from_child)
    let mut visited = vec![[false; 2]; p];
    let mut queue = vec![(x, true)];
    while let Some((v, up)) = queue.pop() {
        if visited[v][usize::from(up)] {
            continue;
        }
        visited[v][usize::from(up)] = true;
        if v == y {
            return false;
        }
        if up {
            if !given[v] {
                queue.extend(g.parents(v).map(|a| (a, true)));
                queue.extend(g.children(v).map(|c| (c, false)));
            }
        } else {
            if !given[v] {
                queue.extend(g.children(v).map(|c| (c, false)));
            }
            if opens_collider[v] {
                queue.extend(g.parents(v).map(|a| (a, true)));
            }
        }
    }
    true
}

/// Discrepancy `d(candidate, reference)` between two graphs.
///
/// The candidate (the proposed point estimate) is always the first argument.
/// For SID the reference plays the role of the true graph.
#[derive(Clone)]
pub enum GraphDistance {
    Shd(ShdMode),
    Sid,
    Custom(Arc<dyn Fn(&Graph, &Graph) -> f64 + Send + Sync>),
}

impl GraphDistance {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&Graph, &Graph) -> f64 + Send + Sync + 'static,
    {
        GraphDistance::Custom(Arc::new(f))
    }

    pub fn distance(&self, candidate: &Graph, reference: &Graph) -> Result<f64> {
        match self {
            GraphDistance::Shd(mode) => shd(candidate, reference, *mode).map(|d| d as f64),
            GraphDistance::Sid => sid(reference, candidate).map(|d| d as f64),
            GraphDistance::Custom(f) => {
                let d = f(candidate, reference);
                if d.is_finite() && d >= 0.0 {
                    Ok(d)
                } else {
                    Err(Error::CustomDistance(format!(
                        "distance must be a finite nonnegative real, got {d}"
                    )))
                }
            }
        }
    }

    pub fn requires_acyclic(&self) -> bool {
        matches!(self, GraphDistance::Sid)
    }
}

impl fmt::Debug for GraphDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphDistance::Shd(ShdMode::Standard) => write!(f, "shd"),
            GraphDistance::Shd(ShdMode::Hamming) => write!(f, "shd-hamming"),
            GraphDistance::Sid => write!(f, "sid"),
            GraphDistance::Custom(_) => write!(f, "custom"),
        }
    }
}
