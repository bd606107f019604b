//! Semi-Markovian causal graphs.
//!
//! A [`CausalGraph`] is a DAG over observed variables plus latent confounding
//! in two interchangeable forms: bidirected arcs (shorthand for a latent
//! common cause with exactly two observed children) and explicit latent
//! variables with arbitrarily many children. Latents never have parents.
//!
//! Graphs are immutable after construction; surgeries in [`crate::analysis`]
//! return new graphs, which keeps the cut-incoming / cut-outgoing algebra
//! referentially transparent. The [`ExpandedGraph`] view materializes one
//! fresh latent per bidirected arc for algorithms that need every latent as
//! an explicit node (d-separation, discrete SCM evaluation).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("variable name must be non-empty")]
    EmptyName,
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("directed edge into latent `{0}` (latents must be parentless)")]
    EdgeIntoLatent(String),
    #[error("bidirected arc endpoint `{0}` is not an observed variable")]
    BidirectedEndpointNotObserved(String),
    #[error("cycle detected among the directed edges")]
    Cycle,
    #[error("node sets must be disjoint, `{0}` appears twice")]
    OverlappingSets(String),
    #[error("graph has {got} observed nodes, exceeding the configured cap of {cap}")]
    NodeCapExceeded { got: usize, cap: usize },
}

/// Name of an observed or latent variable. Non-empty; unique within a graph
/// or dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() {
            return Err(GraphError::EmptyName);
        }
        Ok(VariableId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for VariableId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Set of variable names, ordered for deterministic iteration.
pub type NodeSet = BTreeSet<VariableId>;

/// Build a [`NodeSet`] from string names. Panics on an empty name; intended
/// for literals in tests and call sites that already validated input.
pub fn node_set<I, S>(names: I) -> NodeSet
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    names
        .into_iter()
        .map(|s| VariableId::new(s.as_ref().to_owned()).expect("non-empty name"))
        .collect()
}

/// Internal reference to a node: observed index or latent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeRef {
    Observed(usize),
    Latent(usize),
}

/// Immutable semi-Markovian causal graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    observed: Vec<VariableId>,
    latents: Vec<VariableId>,
    index: BTreeMap<VariableId, NodeRef>,
    /// Directed edges between observed variables, as (parent, child) indices.
    obs_edges: BTreeSet<(usize, usize)>,
    /// Directed edges from explicit latents to observed children.
    latent_edges: BTreeSet<(usize, usize)>,
    /// Bidirected arcs over observed variables, normalized to (lo, hi).
    bidirected: BTreeSet<(usize, usize)>,
}

/// JSON form of a graph file:
/// `{"observed": [...], "directed": [["A","B"],...], "bidirected": [["X","Y"],...]}`
/// with an optional `"latents": [...]` listing explicit latent variables
/// whose outgoing edges appear in `directed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub observed: Vec<String>,
    #[serde(default)]
    pub latents: Vec<String>,
    #[serde(default)]
    pub directed: Vec<(String, String)>,
    #[serde(default)]
    pub bidirected: Vec<(String, String)>,
}

impl CausalGraph {
    /// Build a graph over observed variables only (no explicit latents).
    pub fn build(
        observed: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        Self::build_with_latents(observed, &[], directed, bidirected)
    }

    /// Build a graph with explicit latent variables. Directed edges may run
    /// observed→observed or latent→observed; anything into a latent is an
    /// error. Duplicate edges collapse under set semantics.
    pub fn build_with_latents(
        observed: &[&str],
        latents: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        let mut obs_ids = Vec::with_capacity(observed.len());
        for (i, name) in observed.iter().enumerate() {
            let id = VariableId::new(*name)?;
            if index.insert(id.clone(), NodeRef::Observed(i)).is_some() {
                return Err(GraphError::DuplicateVariable(name.to_string()));
            }
            obs_ids.push(id);
        }
        let mut lat_ids = Vec::with_capacity(latents.len());
        for (i, name) in latents.iter().enumerate() {
            let id = VariableId::new(*name)?;
            if index.insert(id.clone(), NodeRef::Latent(i)).is_some() {
                return Err(GraphError::DuplicateVariable(name.to_string()));
            }
            lat_ids.push(id);
        }

        let mut obs_edges = BTreeSet::new();
        let mut latent_edges = BTreeSet::new();
        for (src, dst) in directed {
            if src == dst {
                return Err(GraphError::SelfLoop(src.to_string()));
            }
            let to = match index.get(*dst) {
                Some(NodeRef::Observed(i)) => *i,
                Some(NodeRef::Latent(_)) => return Err(GraphError::EdgeIntoLatent(dst.to_string())),
                None => return Err(GraphError::UnknownVariable(dst.to_string())),
            };
            match index.get(*src) {
                Some(NodeRef::Observed(i)) => {
                    obs_edges.insert((*i, to));
                }
                Some(NodeRef::Latent(i)) => {
                    latent_edges.insert((*i, to));
                }
                None => return Err(GraphError::UnknownVariable(src.to_string())),
            }
        }

        let mut bidir = BTreeSet::new();
        for (a, b) in bidirected {
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            let ia = match index.get(*a) {
                Some(NodeRef::Observed(i)) => *i,
                Some(NodeRef::Latent(_)) => {
                    return Err(GraphError::BidirectedEndpointNotObserved(a.to_string()))
                }
                None => return Err(GraphError::UnknownVariable(a.to_string())),
            };
            let ib = match index.get(*b) {
                Some(NodeRef::Observed(i)) => *i,
                Some(NodeRef::Latent(_)) => {
                    return Err(GraphError::BidirectedEndpointNotObserved(b.to_string()))
                }
                None => return Err(GraphError::UnknownVariable(b.to_string())),
            };
            bidir.insert((ia.min(ib), ia.max(ib)));
        }

        let g = CausalGraph {
            observed: obs_ids,
            latents: lat_ids,
            index,
            obs_edges,
            latent_edges,
            bidirected: bidir,
        };
        if g.has_cycle() {
            return Err(GraphError::Cycle);
        }
        Ok(g)
    }

    pub fn from_file(file: &GraphFile) -> Result<Self, GraphError> {
        let observed: Vec<&str> = file.observed.iter().map(String::as_str).collect();
        let latents: Vec<&str> = file.latents.iter().map(String::as_str).collect();
        let directed: Vec<(&str, &str)> = file
            .directed
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let bidirected: Vec<(&str, &str)> = file
            .bidirected
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        Self::build_with_latents(&observed, &latents, &directed, &bidirected)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            observed: self.observed.iter().map(|v| v.0.clone()).collect(),
            latents: self.latents.iter().map(|v| v.0.clone()).collect(),
            directed: self
                .obs_edges
                .iter()
                .map(|&(a, b)| (self.observed[a].0.clone(), self.observed[b].0.clone()))
                .chain(
                    self.latent_edges
                        .iter()
                        .map(|&(u, b)| (self.latents[u].0.clone(), self.observed[b].0.clone())),
                )
                .collect(),
            bidirected: self
                .bidirected
                .iter()
                .map(|&(a, b)| (self.observed[a].0.clone(), self.observed[b].0.clone()))
                .collect(),
        }
    }

    // Only observed→observed edges can close a cycle: latents are sources.
    fn has_cycle(&self) -> bool {
        let n = self.observed.len();
        let mut indegree = vec![0usize; n];
        for &(_, b) in &self.obs_edges {
            indegree[b] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &(a, b) in self.obs_edges.range((v, 0)..(v + 1, 0)) {
                debug_assert_eq!(a, v);
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    stack.push(b);
                }
            }
        }
        seen != n
    }

    pub fn observed(&self) -> &[VariableId] {
        &self.observed
    }

    pub fn latents(&self) -> &[VariableId] {
        &self.latents
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn is_observed(&self, name: &str) -> bool {
        matches!(self.index.get(name), Some(NodeRef::Observed(_)))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Directed observed→observed edges by name.
    pub fn directed_edges(&self) -> impl Iterator<Item = (&VariableId, &VariableId)> {
        self.obs_edges
            .iter()
            .map(move |&(a, b)| (&self.observed[a], &self.observed[b]))
    }

    /// Bidirected arcs by name, normalized (lexicographically smaller first).
    pub fn bidirected_arcs(&self) -> impl Iterator<Item = (&VariableId, &VariableId)> {
        self.bidirected
            .iter()
            .map(move |&(a, b)| (&self.observed[a], &self.observed[b]))
    }

    pub(crate) fn observed_index(&self, name: &str) -> Result<usize, GraphError> {
        match self.index.get(name) {
            Some(NodeRef::Observed(i)) => Ok(*i),
            _ => Err(GraphError::UnknownVariable(name.to_string())),
        }
    }

    pub(crate) fn resolve_observed(&self, names: &NodeSet) -> Result<Vec<usize>, GraphError> {
        names
            .iter()
            .map(|n| self.observed_index(n.as_str()))
            .collect()
    }

    pub(crate) fn observed_name(&self, idx: usize) -> &VariableId {
        &self.observed[idx]
    }

    pub(crate) fn obs_children_of(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.obs_edges
            .range((idx, 0)..(idx + 1, 0))
            .map(|&(_, b)| b)
    }

    pub(crate) fn obs_parents_of(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.obs_edges
            .iter()
            .filter(move |&&(_, b)| b == idx)
            .map(|&(a, _)| a)
    }

    pub(crate) fn obs_edge_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.obs_edges
    }

    pub(crate) fn latent_edge_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.latent_edges
    }

    pub(crate) fn bidirected_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.bidirected
    }

    pub(crate) fn rebuild(
        &self,
        obs_edges: BTreeSet<(usize, usize)>,
        latent_edges: BTreeSet<(usize, usize)>,
        bidirected: BTreeSet<(usize, usize)>,
    ) -> CausalGraph {
        CausalGraph {
            observed: self.observed.clone(),
            latents: self.latents.clone(),
            index: self.index.clone(),
            obs_edges,
            latent_edges,
            bidirected,
        }
    }

    /// Confounding adjacency over observed indices: `i ~ j` iff a bidirected
    /// arc joins them or some explicit latent has both as children. This is
    /// the edge relation whose spanning trees define C-components.
    pub(crate) fn confounding_adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.observed.len();
        let mut adj = vec![BTreeSet::new(); n];
        for &(a, b) in &self.bidirected {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        for lat in 0..self.latents.len() {
            let children: Vec<usize> = self
                .latent_edges
                .range((lat, 0)..(lat + 1, 0))
                .map(|&(_, c)| c)
                .collect();
            for (k, &a) in children.iter().enumerate() {
                for &b in &children[k + 1..] {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Expand bidirected arcs into fresh two-child latents, yielding a graph
    /// where every source of confounding is an explicit node.
    pub fn expanded(&self) -> ExpandedGraph {
        let n = self.observed.len();
        let mut names: Vec<VariableId> = self.observed.clone();
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.obs_edges {
            parents[b].push(a);
        }

        let mut latent_names = Vec::new();
        let mut latent_children: Vec<Vec<usize>> = Vec::new();
        for (li, name) in self.latents.iter().enumerate() {
            latent_names.push(name.clone());
            latent_children.push(
                self.latent_edges
                    .range((li, 0)..(li + 1, 0))
                    .map(|&(_, c)| c)
                    .collect(),
            );
        }
        for &(a, b) in &self.bidirected {
            let mut candidate = format!("U({}<->{})", self.observed[a], self.observed[b]);
            while self.index.contains_key(candidate.as_str())
                || latent_names.iter().any(|l| l.as_str() == candidate)
            {
                candidate.push('\'');
            }
            latent_names.push(VariableId(candidate));
            latent_children.push(vec![a, b]);
        }

        let n_lat = latent_names.len();
        for (li, children) in latent_children.iter().enumerate() {
            for &c in children {
                parents[c].push(n + li);
            }
        }
        names.extend(latent_names);
        parents.extend(std::iter::repeat(Vec::new()).take(n_lat));

        let mut children = vec![Vec::new(); names.len()];
        for (v, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(v);
            }
        }

        ExpandedGraph {
            names,
            n_observed: n,
            parents,
            children,
        }
    }
}

/// Latent-expanded view: nodes `0..n_observed` are the observed variables in
/// graph order, the rest are latents (explicit ones first, then one per
/// bidirected arc).
#[derive(Debug, Clone)]
pub struct ExpandedGraph {
    pub names: Vec<VariableId>,
    pub n_observed: usize,
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl ExpandedGraph {
    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn is_latent(&self, idx: usize) -> bool {
        idx >= self.n_observed
    }
}
