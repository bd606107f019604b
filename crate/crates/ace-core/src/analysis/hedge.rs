//! Hedges and the identifiability tests built on them.
//!
//! A hedge witnesses non-identifiability of an interventional distribution:
//! two nested confounding-connected forests `F' ⊂ F` sharing a root set `R`,
//! where `F` meets the treatments, `F'` avoids them, and `R` sits among the
//! (inclusive) ancestors of the targets once arrows into the treatments are
//! cut. The effect of `x` on `y` is identifiable exactly when no hedge
//! exists for any sub-pair of `(x, y)`.
//!
//! The search is exhaustive over node subsets, bounded by a configurable
//! observed-node cap; exceeding the cap is a hard error, never a silent
//! guess. Two reductions keep it sound and complete:
//!
//! * a hedge for some `X' ⊆ x` implies one certified by a single treatment
//!   node (cutting arrows into fewer nodes only grows the ancestor set), so
//!   only singleton `X'` need be tried;
//! * a hedge for some `Y' ⊆ y` implies one for the full `y` (ancestors of a
//!   superset contain ancestors of the subset), so only `Y' = y` is tried.
//!
//! Forests are realized as subgraphs: a node set qualifies when every
//! non-root member keeps at least one child inside the set (roots simply
//! omit their outgoing edges), so the search over subsets loses nothing
//! against the subgraph-level definition.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError, NodeSet, VariableId};

use super::{require_disjoint, surgery};

/// Default cap on observed nodes for the exhaustive hedge search.
pub const DEFAULT_NODE_CAP: usize = 12;

/// A hedge witness: nested forests `F' ⊂ F` with shared root set `R`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hedge {
    pub forest_f: NodeSet,
    pub forest_f_prime: NodeSet,
    pub root_set: NodeSet,
}

/// A specific clause of the hedge definition that a candidate witness
/// violates.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HedgeViolation {
    #[error("unknown node `{0}` in the witness")]
    UnknownNode(String),
    #[error("forest or root set is empty")]
    EmptyPart,
    #[error("F' must be a proper subset of F")]
    NotNested,
    #[error("root set must lie inside F'")]
    RootsOutsideInnerForest,
    #[error("no treatment node certifies the witness (F must meet the treatments, F' must avoid the certifying one, and the roots must be ancestors of the targets once arrows into it are cut)")]
    NoCertifyingTreatment,
    #[error("F is not spanned by confounding arcs")]
    OuterNotConfounded,
    #[error("F' is not spanned by confounding arcs")]
    InnerNotConfounded,
    #[error("non-root node `{0}` of F has no child inside F")]
    OuterNodeWithoutChild(String),
    #[error("non-root node `{0}` of F' has no child inside F'")]
    InnerNodeWithoutChild(String),
}

struct SearchSpace {
    child_mask: Vec<u64>,
    parent_mask: Vec<u64>,
    conf_mask: Vec<u64>,
}

impl SearchSpace {
    fn new(g: &CausalGraph) -> Self {
        let n = g.n_observed();
        let mut child_mask = vec![0u64; n];
        let mut parent_mask = vec![0u64; n];
        for &(a, b) in g.obs_edge_set() {
            child_mask[a] |= 1 << b;
            parent_mask[b] |= 1 << a;
        }
        let mut conf_mask = vec![0u64; n];
        for (v, adj) in g.confounding_adjacency().into_iter().enumerate() {
            for w in adj {
                conf_mask[v] |= 1 << w;
            }
        }
        SearchSpace {
            child_mask,
            parent_mask,
            conf_mask,
        }
    }

    /// Inclusive ancestors of `targets` with all arrows into `cut` removed.
    fn ancestors_with_cut(&self, targets: u64, cut: u64) -> u64 {
        let mut seen = targets;
        let mut frontier = targets;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                if (1u64 << v) & cut == 0 {
                    next |= self.parent_mask[v] & !seen;
                }
            }
            seen |= next;
            frontier = next;
        }
        seen
    }

    /// Is `mask` spanned by the confounding adjacency? Memoized per graph.
    fn connected(&self, mask: u64, memo: &mut HashMap<u64, bool>) -> bool {
        if mask.count_ones() <= 1 {
            return true;
        }
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let start = 1u64 << mask.trailing_zeros();
        let mut seen = start;
        let mut frontier = start;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= self.conf_mask[v] & mask & !seen;
            }
            seen |= next;
            frontier = next;
        }
        let ok = seen == mask;
        memo.insert(mask, ok);
        ok
    }
}

fn names_of(g: &CausalGraph, mask: u64) -> NodeSet {
    let mut out = NodeSet::new();
    let mut m = mask;
    while m != 0 {
        let v = m.trailing_zeros() as usize;
        m &= m - 1;
        out.insert(g.observed_name(v).clone());
    }
    out
}

/// Search for a hedge certifying that `P(y | do(x))` is not identifiable,
/// with the default node cap.
pub fn find_hedge(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
) -> Result<Option<Hedge>, GraphError> {
    find_hedge_capped(g, x, y, DEFAULT_NODE_CAP)
}

pub fn find_hedge_capped(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    cap: usize,
) -> Result<Option<Hedge>, GraphError> {
    require_disjoint(&[x, y])?;
    let n = g.n_observed();
    if n > cap || cap > 63 {
        return Err(GraphError::NodeCapExceeded {
            got: n,
            cap: cap.min(63),
        });
    }
    let x_idx = g.resolve_observed(x)?;
    let y_idx = g.resolve_observed(y)?;
    let space = SearchSpace::new(g);
    let y_mask = y_idx.iter().fold(0u64, |m, &v| m | 1 << v);
    let mut memo = HashMap::new();

    for &x0 in &x_idx {
        let x0_bit = 1u64 << x0;
        let reachable = space.ancestors_with_cut(y_mask, x0_bit);
        for s in 1u64..(1 << n) {
            if s & x0_bit == 0 || !space.connected(s, &mut memo) {
                continue;
            }
            let rest = s & !x0_bit;
            let mut sub = rest;
            while sub != 0 {
                let s_prime = sub;
                sub = (sub - 1) & rest;
                if !space.connected(s_prime, &mut memo) {
                    continue;
                }
                // Maximal root set of F': members with no child inside F'.
                let mut roots = 0u64;
                let mut m = s_prime;
                while m != 0 {
                    let v = m.trailing_zeros() as usize;
                    m &= m - 1;
                    if space.child_mask[v] & s_prime == 0 {
                        roots |= 1 << v;
                    }
                }
                if roots & !reachable != 0 {
                    continue;
                }
                // Every member of F outside F' must keep a child inside F.
                let mut ok = true;
                let mut outer = s & !s_prime;
                while outer != 0 {
                    let v = outer.trailing_zeros() as usize;
                    outer &= outer - 1;
                    if space.child_mask[v] & s == 0 {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    return Ok(Some(Hedge {
                        forest_f: names_of(g, s),
                        forest_f_prime: names_of(g, s_prime),
                        root_set: names_of(g, roots),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Hedge criterion: `P(y | do(x))` is identifiable iff no hedge exists for
/// any sub-pair of `(x, y)`.
pub fn is_identifiable(g: &CausalGraph, x: &NodeSet, y: &NodeSet) -> Result<bool, GraphError> {
    is_identifiable_capped(g, x, y, DEFAULT_NODE_CAP)
}

pub fn is_identifiable_capped(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    cap: usize,
) -> Result<bool, GraphError> {
    Ok(find_hedge_capped(g, x, y, cap)?.is_none())
}

/// Identifiability of the conditional effect `P(y | do(x), z)`.
///
/// Computes the maximal `Z' ⊆ z` whose members can be exchanged from
/// conditioning to intervention by rule R2 (a monotone fixed point, so
/// insertion order is irrelevant; members are tried in name order), then
/// applies the hedge criterion to `P(y ∪ (z \ Z') | do(x ∪ Z'))`.
pub fn is_identifiable_conditional(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<bool, GraphError> {
    is_identifiable_conditional_capped(g, x, y, z, DEFAULT_NODE_CAP)
}

pub fn is_identifiable_conditional_capped(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
    cap: usize,
) -> Result<bool, GraphError> {
    require_disjoint(&[x, y, z])?;
    let z_moved = maximal_promotable(g, x, y, z)?;
    let x_star: NodeSet = x.union(&z_moved).cloned().collect();
    let y_star: NodeSet = y
        .union(&z.difference(&z_moved).cloned().collect())
        .cloned()
        .collect();
    is_identifiable_capped(g, &x_star, &y_star, cap)
}

/// The maximal `Z' ⊆ z` exchangeable into the do-set by repeated R2: a
/// member `w` moves when `(y ⫫ w | x ∪ (z \ {w}))` holds in the graph with
/// arrows into the current do-set removed and arrows out of `w` removed.
fn maximal_promotable(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<NodeSet, GraphError> {
    let mut moved = NodeSet::new();
    loop {
        let mut progressed = false;
        for w in z.iter() {
            if moved.contains(w) {
                continue;
            }
            let w_set: NodeSet = [w.clone()].into_iter().collect();
            let do_set: NodeSet = x.union(&moved).cloned().collect();
            let surgered = surgery(g, &do_set, &w_set)?;
            let mut cond: NodeSet = x.union(z).cloned().collect();
            cond.remove(w.as_str());
            if super::d_separated(&surgered, y, &w_set, &cond)? {
                moved.insert(w.clone());
                progressed = true;
            }
        }
        if !progressed {
            return Ok(moved);
        }
    }
}

/// A graph admits direct modeling of `E[y | do(x), z]` from observational
/// data iff (1) the conditional effect is identifiable and (2) no observed
/// arrow points into any treatment, so cutting arrows into `x` leaves the
/// observed projection unchanged.
pub fn is_available_for_modeling(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<bool, GraphError> {
    require_disjoint(&[x, y, z])?;
    for xi in x.iter() {
        let idx = g.observed_index(xi.as_str())?;
        if g.obs_parents_of(idx).next().is_some() {
            return Ok(false);
        }
    }
    is_identifiable_conditional(g, x, y, z)
}

/// Independent clause-by-clause validator for a hedge witness. Deliberately
/// avoids the bitmask search machinery: it re-derives connectivity,
/// child coverage and the ancestral condition from the graph's edge lists.
pub fn validate_hedge(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    h: &Hedge,
) -> Result<(), HedgeViolation> {
    let f = &h.forest_f;
    let fp = &h.forest_f_prime;
    let r = &h.root_set;
    for v in f.iter().chain(fp.iter()).chain(r.iter()) {
        if !g.is_observed(v.as_str()) {
            return Err(HedgeViolation::UnknownNode(v.to_string()));
        }
    }
    if f.is_empty() || fp.is_empty() || r.is_empty() {
        return Err(HedgeViolation::EmptyPart);
    }
    if !fp.is_subset(f) || fp == f {
        return Err(HedgeViolation::NotNested);
    }
    if !r.is_subset(fp) {
        return Err(HedgeViolation::RootsOutsideInnerForest);
    }

    if !confounding_spans(g, f) {
        return Err(HedgeViolation::OuterNotConfounded);
    }
    if !confounding_spans(g, fp) {
        return Err(HedgeViolation::InnerNotConfounded);
    }

    let has_child_in = |v: &VariableId, set: &NodeSet| -> bool {
        let idx = g.observed_index(v.as_str()).expect("validated above");
        g.obs_children_of(idx)
            .any(|c| set.contains(g.observed_name(c).as_str()))
    };
    for v in f.iter() {
        if !r.contains(v.as_str()) && !fp.contains(v.as_str()) && !has_child_in(v, f) {
            return Err(HedgeViolation::OuterNodeWithoutChild(v.to_string()));
        }
    }
    for v in fp.iter() {
        if !r.contains(v.as_str()) && !has_child_in(v, fp) {
            return Err(HedgeViolation::InnerNodeWithoutChild(v.to_string()));
        }
    }

    // Some treatment inside F \ F' must certify the witness: with arrows
    // into it cut, every root stays an inclusive ancestor of the targets.
    let certifies = x.iter().any(|x0| {
        f.contains(x0.as_str())
            && !fp.contains(x0.as_str())
            && r.is_subset(&inclusive_ancestors_with_cut(g, y, x0))
    });
    if !certifies {
        return Err(HedgeViolation::NoCertifyingTreatment);
    }
    Ok(())
}

fn confounding_spans(g: &CausalGraph, set: &NodeSet) -> bool {
    if set.len() <= 1 {
        return true;
    }
    let adj = g.confounding_adjacency();
    let members: Vec<usize> = set
        .iter()
        .map(|v| g.observed_index(v.as_str()).expect("validated"))
        .collect();
    let inside = |v: usize| members.contains(&v);
    let mut seen = vec![members[0]];
    let mut stack = vec![members[0]];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if inside(w) && !seen.contains(&w) {
                seen.push(w);
                stack.push(w);
            }
        }
    }
    seen.len() == members.len()
}

fn inclusive_ancestors_with_cut(g: &CausalGraph, targets: &NodeSet, cut: &VariableId) -> NodeSet {
    let mut seen: Vec<usize> = targets
        .iter()
        .map(|v| g.observed_index(v.as_str()).expect("validated"))
        .collect();
    let mut stack = seen.clone();
    let cut_idx = g.observed_index(cut.as_str()).expect("validated");
    while let Some(v) = stack.pop() {
        if v == cut_idx {
            continue;
        }
        for p in g.obs_parents_of(v) {
            if !seen.contains(&p) {
                seen.push(p);
                stack.push(p);
            }
        }
    }
    seen.into_iter().map(|v| g.observed_name(v).clone()).collect()
}
