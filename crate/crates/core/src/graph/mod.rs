//! Labeled directed graphs over `p` nodes.
//!
//! Edges are stored as a `p x p` indicator matrix `E` where `E[i][j] = 1`
//! means the edge `j -> i` (node `j` is a parent of node `i`). Rows are
//! targets, columns are sources, matching the coefficient matrix `B` of the
//! structural equations `Y_i = sum_j B[i][j] Y_j + e_i`.

mod distance;
mod motif;

pub use distance::{shd, sid, GraphDistance, ShdMode};
pub use motif::{contains_motif, MotifMode, MotifSpec};

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    p: usize,
    edges: Vec<bool>,
}

impl Graph {
    /// Graph with `p` nodes and no edges. Panics if `p == 0`.
    pub fn empty(p: usize) -> Self {
        assert!(p >= 1, "a graph needs at least one node");
        Graph {
            p,
            edges: vec![false; p * p],
        }
    }

    /// Build from `(source, target)` pairs, 0-indexed.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidGraph("p must be at least 1".into()));
        }
        let mut g = Graph::empty(p);
        for &(s, t) in edges {
            g.check_node(s)?;
            g.check_node(t)?;
            if s == t {
                return Err(Error::InvalidGraph(format!("self-loop on node {s}")));
            }
            g.edges[t * p + s] = true;
        }
        Ok(g)
    }

    /// Build from a row-major indicator matrix with `rows[i][j] != 0` meaning `j -> i`.
    pub fn from_matrix<T: Copy + Into<f64>>(rows: &[Vec<T>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::InvalidGraph("p must be at least 1".into()));
        }
        let mut g = Graph::empty(p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v.into() != 0.0 {
                    if i == j {
                        return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
                    }
                    g.edges[i * p + j] = true;
                }
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Matrix entry `E[i][j]`, i.e. whether `j -> i` is present.
    #[inline]
    pub fn e(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.p + j]
    }

    #[inline]
    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.e(target, source)
    }

    /// Insert `source -> target`. Self-loops are rejected.
    pub fn insert(&mut self, source: usize, target: usize) -> Result<()> {
        self.check_node(source)?;
        self.check_node(target)?;
        if source == target {
            return Err(Error::InvalidGraph(format!("self-loop on node {source}")));
        }
        self.edges[target * self.p + source] = true;
        Ok(())
    }

    pub fn remove(&mut self, source: usize, target: usize) {
        self.edges[target * self.p + source] = false;
    }

    /// Set `E[i][j]` directly. Caller guarantees `i != j`.
    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, present: bool) {
        debug_assert!(i != j);
        self.edges[i * self.p + j] = present;
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    pub fn parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.e(i, j))
    }

    pub fn children(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&i| self.e(i, j))
    }

    /// Edges as `(source, target)` pairs sorted by `(target, source)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |t| self.parents(t).map(move |s| (s, t)))
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Kahn's algorithm; `None` when a directed cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p;
        let mut indegree: Vec<usize> = (0..p).map(|i| self.parents(i).count()).collect();
        let mut queue: VecDeque<usize> = (0..p).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in self.children(v) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == p).then_some(order)
    }

    /// Whether a directed path `from -> ... -> to` of length >= 0 exists.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for c in self.children(v) {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Descendant indicator of `v`, including `v` itself.
    pub fn descendants(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.p];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for c in self.children(u) {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Ancestor indicator of `v`, including `v` itself.
    pub fn ancestors(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.p];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for a in self.parents(u) {
                if !seen[a] {
                    seen[a] = true;
                    stack.push(a);
                }
            }
        }
        seen
    }

    /// Deterministic key identifying the labeled edge set.
    ///
    /// Edges are listed sorted by `(target, source)` as `"target<source"`
    /// (0-indexed) and joined by `;`. The empty graph maps to `""`.
    pub fn canonical_key(&self) -> String {
        let mut key = String::new();
        for (s, t) in self.edges() {
            if !key.is_empty() {
                key.push(';');
            }
            key.push_str(&t.to_string());
            key.push('<');
            key.push_str(&s.to_string());
        }
        key
    }

    /// Inverse of [`Graph::canonical_key`].
    pub fn from_canonical_key(p: usize, key: &str) -> Result<Self> {
        let mut edges = Vec::new();
        if !key.is_empty() {
            for part in key.split(';') {
                let (t, s) = part
                    .split_once('<')
                    .ok_or_else(|| Error::InvalidGraph(format!("bad key component {part:?}")))?;
                let parse = |x: &str| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidGraph(format!("bad node index {x:?}")))
                };
                edges.push((parse(s)?, parse(t)?));
            }
        }
        Graph::from_edges(p, &edges)
    }

    /// Adjacency text: `p` on the first line, then one `source target` pair
    /// per line, 1-indexed.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = format!("{}\n", self.p);
        for (s, t) in self.edges() {
            out.push_str(&format!("{} {}\n", s + 1, t + 1));
        }
        out
    }

    pub fn parse_adjacency_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::InvalidGraph("empty adjacency file".into()))?;
        let p: usize = first
            .parse()
            .map_err(|_| Error::InvalidGraph(format!("line 1: expected node count, got {first:?}")))?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split_whitespace().collect();
            let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed.as_deref() {
                Some(&[s, t]) if s >= 1 && t >= 1 => edges.push((s - 1, t - 1)),
                _ => {
                    return Err(Error::InvalidGraph(format!(
                        "line {line}: expected \"source target\" (1-indexed), got {l:?}"
                    )))
                }
            }
        }
        Graph::from_edges(p, &edges)
    }

    pub(crate) fn check_node(&self, index: usize) -> Result<()> {
        if index >= self.p {
            Err(Error::NodeOutOfRange { index, p: self.p })
        } else {
            Ok(())
        }
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(p={}, [", self.p)?;
        for (k, (s, t)) in self.edges().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}->{t}")?;
        }
        write!(f, "])")
    }
}
