//! d-separation on the latent-expanded graph.

use std::collections::{BTreeSet, VecDeque};

use crate::graph::{CausalGraph, GraphError, NodeSet};

use super::require_disjoint;

/// True iff every path between `a` and `b` is blocked by `c`, evaluated on
/// the latent-expanded graph with the standard reachability (Bayes-ball)
/// rules. Bidirected arcs behave as open forks unless a collider closes
/// them.
pub fn d_separated(
    g: &CausalGraph,
    a: &NodeSet,
    b: &NodeSet,
    c: &NodeSet,
) -> Result<bool, GraphError> {
    require_disjoint(&[a, b, c])?;
    let a_idx = g.resolve_observed(a)?;
    let b_idx: BTreeSet<usize> = g.resolve_observed(b)?.into_iter().collect();
    let c_idx: BTreeSet<usize> = g.resolve_observed(c)?.into_iter().collect();
    if a_idx.is_empty() || b_idx.is_empty() {
        return Ok(true);
    }

    let ex = g.expanded();
    let n = ex.n_nodes();

    // Nodes with a descendant in the conditioning set (including c itself):
    // these open colliders.
    let mut opens_collider = vec![false; n];
    let mut queue: VecDeque<usize> = c_idx.iter().copied().collect();
    for &v in &c_idx {
        opens_collider[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &p in &ex.parents[v] {
            if !opens_collider[p] {
                opens_collider[p] = true;
                queue.push_back(p);
            }
        }
    }

    // State (v, from_child): the trail entered v moving against an edge
    // (from one of its children) or along one (from a parent).
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(usize, bool)> = a_idx.iter().map(|&v| (v, true)).collect();
    while let Some((v, from_child)) = stack.pop() {
        let slot = usize::from(from_child);
        if visited[v][slot] {
            continue;
        }
        visited[v][slot] = true;
        if b_idx.contains(&v) {
            return Ok(false);
        }
        let conditioned = c_idx.contains(&v);
        if from_child {
            if !conditioned {
                for &p in &ex.parents[v] {
                    stack.push((p, true));
                }
                for &ch in &ex.children[v] {
                    stack.push((ch, false));
                }
            }
        } else {
            if !conditioned {
                for &ch in &ex.children[v] {
                    stack.push((ch, false));
                }
            }
            if opens_collider[v] {
                for &p in &ex.parents[v] {
                    stack.push((p, true));
                }
            }
        }
    }
    Ok(true)
}
