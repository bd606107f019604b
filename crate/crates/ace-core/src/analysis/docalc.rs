//! Side conditions of the three do-calculus transformation rules.

use crate::graph::{CausalGraph, GraphError, NodeSet};

use super::{ancestors, d_separated, require_disjoint, surgery};

/// The three rules of do-calculus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoCalcRule {
    /// Insertion/deletion of observations:
    /// `P(y | do(x), z, w) = P(y | do(x), w)` if `(Y ⫫ Z | X, W)` in the
    /// graph with arrows into `x` removed.
    R1,
    /// Action/observation exchange:
    /// `P(y | do(x), do(z), w) = P(y | do(x), z, w)` if `(Y ⫫ Z | X, W)` in
    /// the graph with arrows into `x` and out of `z` removed.
    R2,
    /// Insertion/deletion of actions:
    /// `P(y | do(x), do(z), w) = P(y | do(x), w)` if `(Y ⫫ Z | X, W)` in the
    /// graph with arrows into `x ∪ z*` removed, where
    /// `z* = z \ An(w)` taken in the graph with arrows into `x` removed.
    R3,
}

/// Evaluate the side condition of `rule` exactly; `true` means the rewrite
/// is licensed.
pub fn docalc_rule_applicable(
    g: &CausalGraph,
    rule: DoCalcRule,
    y: &NodeSet,
    x: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<bool, GraphError> {
    require_disjoint(&[y, x, z, w])?;
    let cond: NodeSet = x.union(w).cloned().collect();
    let surgered = match rule {
        DoCalcRule::R1 => surgery(g, x, &NodeSet::new())?,
        DoCalcRule::R2 => surgery(g, x, z)?,
        DoCalcRule::R3 => {
            let g_bar_x = surgery(g, x, &NodeSet::new())?;
            let an_w_inclusive: NodeSet = ancestors(&g_bar_x, w)?.union(w).cloned().collect();
            let z_star: NodeSet = z.difference(&an_w_inclusive).cloned().collect();
            let cut: NodeSet = x.union(&z_star).cloned().collect();
            surgery(g, &cut, &NodeSet::new())?
        }
    };
    d_separated(&surgered, y, z, &cond)
}
