use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotifMode {
    /// Every required edge is present; other edges are unconstrained.
    #[default]
    AllPresent,
    /// The subgraph induced on the node set equals the required edges exactly.
    ExactInduced,
}

/// A set of directed edges over a node subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifSpec {
    required_edges: Vec<(usize, usize)>,
    node_set: Vec<usize>,
    mode: MotifMode,
}

impl MotifSpec {
    /// `required_edges` are `(source, target)` pairs. Every endpoint must
    /// appear in `node_set`.
    pub fn new(
        required_edges: Vec<(usize, usize)>,
        mut node_set: Vec<usize>,
        mode: MotifMode,
    ) -> Result<Self> {
        node_set.sort_unstable();
        node_set.dedup();
        for &(s, t) in &required_edges {
            if s == t {
                return Err(Error::InvalidMotif(format!("self-loop on node {s}")));
            }
            for v in [s, t] {
                if node_set.binary_search(&v).is_err() {
                    return Err(Error::InvalidMotif(format!(
                        "edge endpoint {v} is not in the node set"
                    )));
                }
            }
        }
        Ok(MotifSpec {
            required_edges,
            node_set,
            mode,
        })
    }

    /// Motif whose node set is exactly the endpoints of its edges.
    pub fn from_edges(required_edges: Vec<(usize, usize)>, mode: MotifMode) -> Result<Self> {
        let nodes = required_edges.iter().flat_map(|&(s, t)| [s, t]).collect();
        MotifSpec::new(required_edges, nodes, mode)
    }

    pub fn required_edges(&self) -> &[(usize, usize)] {
        &self.required_edges
    }

    pub fn node_set(&self) -> &[usize] {
        &self.node_set
    }

    pub fn mode(&self) -> MotifMode {
        self.mode
    }

    pub(crate) fn check_range(&self, p: usize) -> Result<()> {
        match self.node_set.last() {
            Some(&v) if v >= p => Err(Error::NodeOutOfRange { index: v, p }),
            _ => Ok(()),
        }
    }
}

pub fn contains_motif(g: &Graph, m: &MotifSpec) -> Result<bool> {
    m.check_range(g.p())?;
    let all_present = m.required_edges.iter().all(|&(s, t)| g.contains(s, t));
    if !all_present || m.mode == MotifMode::AllPresent {
        return Ok(all_present);
    }
    let induced = m
        .node_set
        .iter()
        .flat_map(|&s| m.node_set.iter().map(move |&t| (s, t)))
        .filter(|&(s, t)| s != t && g.contains(s, t))
        .count();
    let mut required = m.required_edges.clone();
    required.sort_unstable();
    required.dedup();
    Ok(induced == required.len())
}
