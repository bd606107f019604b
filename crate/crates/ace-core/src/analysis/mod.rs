//! Structural queries on causal graphs: kinship sets, surgeries,
//! d-separation, do-calculus side conditions, C-components, hedges and the
//! identifiability tests built on them.

mod docalc;
mod dsep;
mod hedge;

pub use docalc::{docalc_rule_applicable, DoCalcRule};
pub use dsep::d_separated;
pub use hedge::{
    find_hedge, find_hedge_capped, is_available_for_modeling, is_identifiable,
    is_identifiable_capped, is_identifiable_conditional, is_identifiable_conditional_capped,
    validate_hedge, Hedge, HedgeViolation, DEFAULT_NODE_CAP,
};

use std::collections::BTreeSet;

use crate::graph::{CausalGraph, GraphError, NodeSet, VariableId};

/// The six kinship relations over a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinshipKind {
    Parents,
    Children,
    /// Proper ancestors: the query set itself is excluded.
    Ancestors,
    /// Proper descendants: the query set itself is excluded.
    Descendants,
    /// Latent parents; bidirected arcs contribute their canonical
    /// expansion latents (see [`CausalGraph::expanded`]).
    LatentParents,
    /// Observed variables with no connecting path (of any orientation,
    /// including paths through latents) to the query set.
    Independents,
}

/// Kinship set of `a` in `g`. `Ancestors`/`Descendants` exclude `a` itself;
/// `LatentParents` returns latent names, everything else observed names.
pub fn relatives(
    g: &CausalGraph,
    a: &NodeSet,
    kind: KinshipKind,
) -> Result<NodeSet, GraphError> {
    let seeds = g.resolve_observed(a)?;
    let in_query = |idx: usize| a.contains(g.observed_name(idx).as_str());
    let mut out = NodeSet::new();
    match kind {
        KinshipKind::Parents => {
            for &s in &seeds {
                for p in g.obs_parents_of(s) {
                    out.insert(g.observed_name(p).clone());
                }
            }
        }
        KinshipKind::Children => {
            for &s in &seeds {
                for c in g.obs_children_of(s) {
                    out.insert(g.observed_name(c).clone());
                }
            }
        }
        KinshipKind::Ancestors => {
            for idx in walk(&seeds, |v| g.obs_parents_of(v).collect()) {
                if !in_query(idx) {
                    out.insert(g.observed_name(idx).clone());
                }
            }
        }
        KinshipKind::Descendants => {
            for idx in walk(&seeds, |v| g.obs_children_of(v).collect()) {
                if !in_query(idx) {
                    out.insert(g.observed_name(idx).clone());
                }
            }
        }
        KinshipKind::LatentParents => {
            let expanded = g.expanded();
            for &s in &seeds {
                for &p in &expanded.parents[s] {
                    if expanded.is_latent(p) {
                        out.insert(expanded.names[p].clone());
                    }
                }
            }
        }
        KinshipKind::Independents => {
            let connected = connected_component(g, &seeds);
            for idx in 0..g.n_observed() {
                if !connected.contains(&idx) && !in_query(idx) {
                    out.insert(g.observed_name(idx).clone());
                }
            }
        }
    }
    Ok(out)
}

/// Proper ancestors of `a` as a convenience wrapper.
pub fn ancestors(g: &CausalGraph, a: &NodeSet) -> Result<NodeSet, GraphError> {
    relatives(g, a, KinshipKind::Ancestors)
}

/// Proper descendants of `a`.
pub fn descendants(g: &CausalGraph, a: &NodeSet) -> Result<NodeSet, GraphError> {
    relatives(g, a, KinshipKind::Descendants)
}

/// BFS closure of `seeds` under `next`, excluding nothing.
fn walk(seeds: &[usize], next: impl Fn(usize) -> Vec<usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        for w in next(v) {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Observed nodes connected to the seeds by a path of any orientation in the
/// latent-expanded graph.
fn connected_component(g: &CausalGraph, seeds: &[usize]) -> BTreeSet<usize> {
    let expanded = g.expanded();
    let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut stack: Vec<usize> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        for &w in expanded.parents[v].iter().chain(expanded.children[v].iter()) {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.into_iter().filter(|&v| v < g.n_observed()).collect()
}

/// Graph surgery: first delete every arrow into `cut_incoming` (including
/// latent edges and bidirected incidences), then every arrow out of
/// `cut_outgoing`.
pub fn surgery(
    g: &CausalGraph,
    cut_incoming: &NodeSet,
    cut_outgoing: &NodeSet,
) -> Result<CausalGraph, GraphError> {
    let incoming: BTreeSet<usize> = g.resolve_observed(cut_incoming)?.into_iter().collect();
    let outgoing: BTreeSet<usize> = g.resolve_observed(cut_outgoing)?.into_iter().collect();

    let obs_edges = g
        .obs_edge_set()
        .iter()
        .copied()
        .filter(|&(a, b)| !incoming.contains(&b) && !outgoing.contains(&a))
        .collect();
    let latent_edges = g
        .latent_edge_set()
        .iter()
        .copied()
        .filter(|&(_, b)| !incoming.contains(&b))
        .collect();
    let bidirected = g
        .bidirected_set()
        .iter()
        .copied()
        .filter(|&(a, b)| !incoming.contains(&a) && !incoming.contains(&b))
        .collect();
    Ok(g.rebuild(obs_edges, latent_edges, bidirected))
}

/// The graph restricted to arrows between observed variables: latent nodes,
/// their edges and all bidirected arcs are dropped.
pub fn observed_projection(g: &CausalGraph) -> CausalGraph {
    let observed: Vec<&str> = g.observed().iter().map(|v| v.as_str()).collect();
    let directed: Vec<(&str, &str)> = g
        .directed_edges()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    CausalGraph::build(&observed, &directed, &[])
        .expect("projection of a valid graph is valid")
}

/// True iff some subset of the bidirected arcs (including arcs induced by
/// shared explicit latents) spans all observed vertices as a tree, i.e. the
/// confounding adjacency is connected. Degenerate cases (zero or one
/// vertex) count as spanned.
pub fn is_c_component(g: &CausalGraph) -> bool {
    let n = g.n_observed();
    if n <= 1 {
        return true;
    }
    let adj = g.confounding_adjacency();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

/// Report of the two structural hypotheses behind the residualization
/// cascade, for outcome `y` and treatments `x` with covariates
/// `Z = V \ ({y} ∪ x)`: `x ⊆ An(y)` and `Z ∩ De(x) ∩ De(y) = ∅`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Theorem1Report {
    pub x_in_ancestors: bool,
    pub z_de_empty: bool,
    pub z_de: Vec<String>,
}

pub fn check_theorem1_preconditions(
    g: &CausalGraph,
    x: &NodeSet,
    y: &str,
) -> Result<Theorem1Report, GraphError> {
    let y_idx = g.observed_index(y)?;
    if x.contains(y) {
        return Err(GraphError::OverlappingSets(y.to_string()));
    }
    let y_set: NodeSet = [g.observed_name(y_idx).clone()].into_iter().collect();
    let an_y = ancestors(g, &y_set)?;
    let x_in_ancestors = x.iter().all(|v| an_y.contains(v.as_str()));

    let de_x = descendants(g, x)?;
    let de_y = descendants(g, &y_set)?;
    let z_de: Vec<String> = g
        .observed()
        .iter()
        .filter(|v| v.as_str() != y && !x.contains(v.as_str()))
        .filter(|v| de_x.contains(v.as_str()) && de_y.contains(v.as_str()))
        .map(|v| v.to_string())
        .collect();
    Ok(Theorem1Report {
        x_in_ancestors,
        z_de_empty: z_de.is_empty(),
        z_de,
    })
}

/// Require that the given named sets are pairwise disjoint.
pub(crate) fn require_disjoint(sets: &[&NodeSet]) -> Result<(), GraphError> {
    let mut seen: BTreeSet<&VariableId> = BTreeSet::new();
    for set in sets {
        for v in set.iter() {
            if !seen.insert(v) {
                return Err(GraphError::OverlappingSets(v.to_string()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::node_set;

    fn backdoor() -> CausalGraph {
        CausalGraph::build(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[]).unwrap()
    }

    fn bow() -> CausalGraph {
        CausalGraph::build(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap()
    }

    #[test]
    fn kinship_on_backdoor() {
        let g = backdoor();
        assert_eq!(
            relatives(&g, &node_set(["Y"]), KinshipKind::Ancestors).unwrap(),
            node_set(["X", "Z"])
        );
        assert_eq!(
            relatives(&g, &node_set(["Z"]), KinshipKind::Descendants).unwrap(),
            node_set(["X", "Y"])
        );
        assert_eq!(
            relatives(&g, &node_set(["Y"]), KinshipKind::Parents).unwrap(),
            node_set(["X", "Z"])
        );
        assert_eq!(
            relatives(&g, &node_set(["Z"]), KinshipKind::Children).unwrap(),
            node_set(["X", "Y"])
        );
    }

    #[test]
    fn independents_need_full_disconnection() {
        let g = CausalGraph::build(&["Z", "X", "Y", "W"], &[("Z", "X"), ("X", "Y")], &[]).unwrap();
        assert_eq!(
            relatives(&g, &node_set(["Y"]), KinshipKind::Independents).unwrap(),
            node_set(["W"])
        );
        // A bidirected arc connects, so it defeats independence.
        let g2 =
            CausalGraph::build(&["X", "Y", "W"], &[("X", "Y")], &[("Y", "W")]).unwrap();
        assert!(relatives(&g2, &node_set(["X"]), KinshipKind::Independents)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn latent_parents_cover_arcs_and_explicit_latents() {
        let g = CausalGraph::build_with_latents(
            &["X", "Y", "Z"],
            &["U"],
            &[("U", "X"), ("U", "Z")],
            &[("X", "Y")],
        )
        .unwrap();
        let lp = relatives(&g, &node_set(["X"]), KinshipKind::LatentParents).unwrap();
        assert_eq!(lp, node_set(["U", "U(X<->Y)"]));
        assert!(relatives(&g, &node_set(["Z"]), KinshipKind::LatentParents)
            .unwrap()
            .contains("U"));
    }

    #[test]
    fn unknown_node_is_an_error() {
        let g = backdoor();
        assert!(relatives(&g, &node_set(["Q"]), KinshipKind::Parents).is_err());
    }

    #[test]
    fn surgery_on_bow_removes_arc_into_cut() {
        let g = bow();
        let cut = surgery(&g, &node_set(["X"]), &NodeSet::new()).unwrap();
        assert_eq!(cut.directed_edges().count(), 1);
        assert_eq!(cut.bidirected_arcs().count(), 0);
    }

    #[test]
    fn surgery_identity_and_outgoing_cut() {
        let g = CausalGraph::build(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[]).unwrap();
        let same = surgery(&g, &NodeSet::new(), &NodeSet::new()).unwrap();
        assert_eq!(g, same);
        let cut = surgery(&g, &NodeSet::new(), &node_set(["B"])).unwrap();
        let edges: Vec<String> = cut
            .directed_edges()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect();
        assert_eq!(edges, vec!["A->B"]);
    }

    #[test]
    fn surgery_is_idempotent() {
        let g = CausalGraph::build_with_latents(
            &["A", "B", "C"],
            &["U"],
            &[("A", "B"), ("B", "C"), ("U", "A"), ("U", "C")],
            &[("A", "C")],
        )
        .unwrap();
        let once = surgery(&g, &node_set(["B"]), &node_set(["C"])).unwrap();
        let twice = surgery(&once, &node_set(["B"]), &node_set(["C"])).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn projection_drops_all_latent_structure() {
        let g = bow();
        let p = observed_projection(&g);
        assert_eq!(p.bidirected_arcs().count(), 0);
        assert_eq!(p.directed_edges().count(), 1);
        let markovian = backdoor();
        assert_eq!(observed_projection(&markovian), markovian);
        let g3 = CausalGraph::build(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y")], &[("X", "Y")])
            .unwrap();
        let p3 = observed_projection(&g3);
        assert_eq!(p3.directed_edges().count(), 2);
        assert_eq!(p3.bidirected_arcs().count(), 0);
    }

    #[test]
    fn c_component_cases() {
        let two = CausalGraph::build(&["A", "B"], &[], &[("A", "B")]).unwrap();
        assert!(is_c_component(&two));
        let one = CausalGraph::build(&["A"], &[], &[]).unwrap();
        assert!(is_c_component(&one));
        let three = CausalGraph::build(&["A", "B", "C"], &[], &[("A", "B")]).unwrap();
        assert!(!is_c_component(&three));
    }

    #[test]
    fn theorem1_preconditions() {
        let chain = CausalGraph::build(&["Z", "X", "Y"], &[("Z", "X"), ("X", "Y")], &[]).unwrap();
        let r = check_theorem1_preconditions(&chain, &node_set(["X"]), "Y").unwrap();
        assert!(r.x_in_ancestors && r.z_de_empty);

        let post = CausalGraph::build(&["X", "Y", "W"], &[("X", "Y"), ("Y", "W")], &[]).unwrap();
        let r = check_theorem1_preconditions(&post, &node_set(["X"]), "Y").unwrap();
        assert!(r.x_in_ancestors);
        assert!(!r.z_de_empty);
        assert_eq!(r.z_de, vec!["W".to_string()]);

        let split = CausalGraph::build(&["X", "Y"], &[], &[]).unwrap();
        let r = check_theorem1_preconditions(&split, &node_set(["X"]), "Y").unwrap();
        assert!(!r.x_in_ancestors);
    }

    #[test]
    fn ancestor_descendant_duality_on_random_dags() {
        use crate::sim::random_dag;
        for seed in 0..200u64 {
            let g = random_dag(seed, 8, 0.3, 0.0);
            let names: Vec<VariableId> = g.observed().to_vec();
            for v in &names {
                let vset: NodeSet = [v.clone()].into_iter().collect();
                let an = ancestors(&g, &vset).unwrap();
                for w in &an {
                    let wset: NodeSet = [w.clone()].into_iter().collect();
                    let de = descendants(&g, &wset).unwrap();
                    assert!(de.contains(v.as_str()), "duality failed seed {seed}");
                }
            }
        }
    }
}
