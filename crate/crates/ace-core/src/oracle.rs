//! Exact evaluation of finite discrete structural causal models: joint
//! distributions, interventional distributions by truncated factorization
//! and by the sum-of-ratios form, conditional interventional distributions,
//! and the observational-only formula that rewrites a conditional effect in
//! terms of plain conditionals.
//!
//! Everything here enumerates the full product domain; exactness over scale.
//! The enumeration size is capped (default 10^7 cells) and exceeding the cap
//! is a hard error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::graph::{CausalGraph, ExpandedGraph, GraphError, GraphFile, NodeSet, VariableId};
use crate::{real, Real};

/// Default cap on enumerated cells.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("missing cardinality for `{0}`")]
    MissingCardinality(String),
    #[error("cardinality of `{0}` must be at least 2")]
    CardinalityTooSmall(String),
    #[error("missing probability table for `{0}`")]
    MissingTable(String),
    #[error("table for `{name}` has {got} entries, expected {expected}")]
    BadTableShape { name: String, got: usize, expected: usize },
    #[error("table for `{name}`, row {row}: probabilities sum to {sum}, not 1")]
    RowSumNotOne { name: String, row: usize, sum: f64 },
    #[error("table for `{0}` contains a negative entry")]
    NegativeEntry(String),
    #[error("enumeration would need {cells} cells, exceeding the cap of {cap}")]
    CapExceeded { cells: usize, cap: usize },
    #[error("value {value} out of domain for `{name}` (cardinality {card})")]
    ValueOutOfDomain { name: String, value: usize, card: usize },
    #[error("`{0}` appears both as intervention and target/condition")]
    RoleOverlap(String),
    #[error("conditioning event has probability zero")]
    ZeroProbability,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("nested table for `{0}` is not a well-formed probability array")]
    MalformedNestedTable(String),
}

/// Dense probability table over an ordered list of discrete variables,
/// row-major with the last variable's index moving fastest. Entries are
/// non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTable<F> {
    variables: Vec<VariableId>,
    cardinalities: Vec<usize>,
    probabilities: Vec<F>,
}

impl<F: Real> JointTable<F> {
    pub fn new(
        variables: Vec<VariableId>,
        cardinalities: Vec<usize>,
        probabilities: Vec<F>,
    ) -> Result<Self, OracleError> {
        let cells: usize = cardinalities.iter().product();
        if probabilities.len() != cells {
            return Err(OracleError::BadTableShape {
                name: "<joint>".into(),
                got: probabilities.len(),
                expected: cells,
            });
        }
        if probabilities.iter().any(|p| *p < F::zero()) {
            return Err(OracleError::NegativeEntry("<joint>".into()));
        }
        let sum: F = probabilities.iter().copied().sum();
        let tol = real::<F>(1e-10).max(F::epsilon() * real(64.0) * real(cells as f64));
        if (sum - F::one()).abs() > tol {
            return Err(OracleError::RowSumNotOne {
                name: "<joint>".into(),
                row: 0,
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(JointTable {
            variables,
            cardinalities,
            probabilities,
        })
    }

    pub fn variables(&self) -> &[VariableId] {
        &self.variables
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn probabilities(&self) -> &[F] {
        &self.probabilities
    }

    fn flat_index(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.cardinalities.len());
        let mut idx = 0;
        for (v, k) in values.iter().zip(self.cardinalities.iter()) {
            idx = idx * k + v;
        }
        idx
    }

    /// Probability of a full assignment given by name.
    pub fn prob(&self, assignment: &BTreeMap<String, usize>) -> Result<F, OracleError> {
        let mut values = Vec::with_capacity(self.variables.len());
        for (var, k) in self.variables.iter().zip(self.cardinalities.iter()) {
            let v = *assignment
                .get(var.as_str())
                .ok_or_else(|| OracleError::MissingCardinality(var.to_string()))?;
            if v >= *k {
                return Err(OracleError::ValueOutOfDomain {
                    name: var.to_string(),
                    value: v,
                    card: *k,
                });
            }
            values.push(v);
        }
        Ok(self.probabilities[self.flat_index(&values)])
    }

    /// Marginal over a subset of variables (kept in this table's order).
    pub fn marginal(&self, keep: &NodeSet) -> Result<JointTable<F>, OracleError> {
        let kept: Vec<usize> = (0..self.variables.len())
            .filter(|&i| keep.contains(self.variables[i].as_str()))
            .collect();
        let out_vars: Vec<VariableId> = kept.iter().map(|&i| self.variables[i].clone()).collect();
        let out_cards: Vec<usize> = kept.iter().map(|&i| self.cardinalities[i]).collect();
        let out_cells: usize = out_cards.iter().product();
        let mut probs = vec![F::zero(); out_cells];
        let mut values = vec![0usize; self.variables.len()];
        for (flat, p) in self.probabilities.iter().enumerate() {
            decode(flat, &self.cardinalities, &mut values);
            let mut idx = 0;
            for (pos, &i) in kept.iter().enumerate() {
                idx = idx * out_cards[pos] + values[i];
            }
            probs[idx] += *p;
        }
        JointTable::new(out_vars, out_cards, probs)
    }

    /// Conditional table `P(targets | given)` computed from this joint.
    pub fn conditional(
        &self,
        targets: &NodeSet,
        given: &BTreeMap<String, usize>,
    ) -> Result<JointTable<F>, OracleError> {
        for t in targets.iter() {
            if given.contains_key(t.as_str()) {
                return Err(OracleError::RoleOverlap(t.to_string()));
            }
        }
        let t_pos: Vec<usize> = (0..self.variables.len())
            .filter(|&i| targets.contains(self.variables[i].as_str()))
            .collect();
        let out_vars: Vec<VariableId> = t_pos.iter().map(|&i| self.variables[i].clone()).collect();
        let out_cards: Vec<usize> = t_pos.iter().map(|&i| self.cardinalities[i]).collect();
        let out_cells: usize = out_cards.iter().product();
        let mut num = vec![F::zero(); out_cells];
        let mut den = F::zero();
        let mut values = vec![0usize; self.variables.len()];
        for (flat, p) in self.probabilities.iter().enumerate() {
            decode(flat, &self.cardinalities, &mut values);
            let consistent = self
                .variables
                .iter()
                .enumerate()
                .all(|(i, var)| given.get(var.as_str()).is_none_or(|&v| values[i] == v));
            if !consistent {
                continue;
            }
            den += *p;
            let mut idx = 0;
            for (pos, &i) in t_pos.iter().enumerate() {
                idx = idx * out_cards[pos] + values[i];
            }
            num[idx] += *p;
        }
        if den <= F::zero() {
            return Err(OracleError::ZeroProbability);
        }
        JointTable::new(out_vars, out_cards, num.into_iter().map(|v| v / den).collect())
    }

    /// Largest absolute cellwise difference against a table over the same
    /// variables (in any order is not supported; orders must match).
    pub fn max_abs_diff(&self, other: &JointTable<F>) -> F {
        debug_assert_eq!(self.variables, other.variables);
        self.probabilities
            .iter()
            .zip(other.probabilities.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(F::zero(), F::max)
    }
}

fn decode(flat: usize, cards: &[usize], out: &mut [usize]) {
    let mut rest = flat;
    for i in (0..cards.len()).rev() {
        out[i] = rest % cards[i];
        rest /= cards[i];
    }
}

/// JSON form of an SCM file: graph, per-variable cardinalities, nested-array
/// CPTs for observed variables and priors for latents. Table axes are the
/// variable's parents sorted by name (outermost first), then the variable's
/// own value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmFile {
    pub graph: GraphFile,
    pub cardinalities: BTreeMap<String, usize>,
    pub cpts: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub latent_priors: BTreeMap<String, serde_json::Value>,
}

/// Finite-cardinality SCM over a causal graph. Bidirected arcs are expanded
/// into canonical two-child latents (see [`CausalGraph::expanded`]); their
/// priors are keyed by the canonical names.
#[derive(Debug, Clone)]
pub struct DiscreteScm<F> {
    graph: CausalGraph,
    expanded: ExpandedGraph,
    /// Per expanded node, in expanded index order.
    cards: Vec<usize>,
    /// Parents of each expanded node, sorted by name.
    parents: Vec<Vec<usize>>,
    /// CPT per expanded node, row-major over [parents..., own value].
    tables: Vec<Vec<F>>,
    cell_cap: usize,
}

impl<F: Real> DiscreteScm<F> {
    /// Build from flat tables keyed by variable name. Latent priors (for
    /// explicit latents and canonical arc latents) live in the same map.
    pub fn from_tables(
        graph: CausalGraph,
        cardinalities: &BTreeMap<String, usize>,
        tables: &BTreeMap<String, Vec<F>>,
    ) -> Result<Self, OracleError> {
        let expanded = graph.expanded();
        let n = expanded.n_nodes();
        let mut cards = Vec::with_capacity(n);
        for name in &expanded.names {
            let k = *cardinalities
                .get(name.as_str())
                .ok_or_else(|| OracleError::MissingCardinality(name.to_string()))?;
            if k < 2 {
                return Err(OracleError::CardinalityTooSmall(name.to_string()));
            }
            cards.push(k);
        }
        let mut parents: Vec<Vec<usize>> = Vec::with_capacity(n);
        for v in 0..n {
            let mut ps = expanded.parents[v].clone();
            ps.sort_by(|&a, &b| expanded.names[a].cmp(&expanded.names[b]));
            parents.push(ps);
        }
        let mut cpts = Vec::with_capacity(n);
        for v in 0..n {
            let name = &expanded.names[v];
            let table = tables
                .get(name.as_str())
                .ok_or_else(|| OracleError::MissingTable(name.to_string()))?;
            let rows: usize = parents[v].iter().map(|&p| cards[p]).product();
            let expected = rows * cards[v];
            if table.len() != expected {
                return Err(OracleError::BadTableShape {
                    name: name.to_string(),
                    got: table.len(),
                    expected,
                });
            }
            if table.iter().any(|p| *p < F::zero()) {
                return Err(OracleError::NegativeEntry(name.to_string()));
            }
            let tol = real::<F>(1e-12).max(F::epsilon() * real(64.0));
            for row in 0..rows {
                let sum: F = table[row * cards[v]..(row + 1) * cards[v]]
                    .iter()
                    .copied()
                    .sum();
                if (sum - F::one()).abs() > tol {
                    return Err(OracleError::RowSumNotOne {
                        name: name.to_string(),
                        row,
                        sum: sum.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            cpts.push(table.clone());
        }
        Ok(DiscreteScm {
            graph,
            expanded,
            cards,
            parents,
            tables: cpts,
            cell_cap: DEFAULT_CELL_CAP,
        })
    }

    pub fn from_file(file: &ScmFile) -> Result<Self, OracleError> {
        let graph = CausalGraph::from_file(&file.graph)?;
        let mut tables = BTreeMap::new();
        for (name, value) in file.cpts.iter().chain(file.latent_priors.iter()) {
            tables.insert(name.clone(), flatten_nested(name, value)?);
        }
        Self::from_tables(graph, &file.cardinalities, &tables)
    }

    pub fn with_cell_cap(mut self, cap: usize) -> Self {
        self.cell_cap = cap;
        self
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn cardinality(&self, name: &str) -> Option<usize> {
        self.expanded
            .names
            .iter()
            .position(|n| n.as_str() == name)
            .map(|i| self.cards[i])
    }

    fn node_index(&self, name: &str) -> Result<usize, OracleError> {
        self.expanded
            .names
            .iter()
            .position(|n| n.as_str() == name)
            .ok_or_else(|| OracleError::Graph(GraphError::UnknownVariable(name.to_string())))
    }

    fn check_cap(&self) -> Result<(), OracleError> {
        let mut cells: usize = 1;
        for &k in &self.cards {
            cells = cells.checked_mul(k).unwrap_or(usize::MAX);
            if cells > self.cell_cap {
                return Err(OracleError::CapExceeded {
                    cells,
                    cap: self.cell_cap,
                });
            }
        }
        Ok(())
    }

    fn factor(&self, v: usize, config: &[usize]) -> F {
        let mut row = 0usize;
        for &p in &self.parents[v] {
            row = row * self.cards[p] + config[p];
        }
        self.tables[v][row * self.cards[v] + config[v]]
    }

    /// Enumerate the full expanded configuration space, calling `visit` with
    /// each configuration and the product of all factors except `skip`.
    /// Dimensions listed in `fixed` are clamped.
    fn enumerate(
        &self,
        fixed: &BTreeMap<usize, usize>,
        skip: &[usize],
        mut visit: impl FnMut(&[usize], F),
    ) -> Result<(), OracleError> {
        self.check_cap()?;
        let n = self.expanded.n_nodes();
        let mut config = vec![0usize; n];
        for (&v, &val) in fixed {
            config[v] = val;
        }
        let free: Vec<usize> = (0..n).filter(|v| !fixed.contains_key(v)).collect();
        loop {
            let mut w = F::one();
            for v in 0..n {
                if !skip.contains(&v) {
                    w = w * self.factor(v, &config);
                }
            }
            visit(&config, w);
            // Advance the mixed-radix counter over free dimensions.
            let mut pos = free.len();
            loop {
                if pos == 0 {
                    return Ok(());
                }
                let dim = free[pos - 1];
                config[dim] += 1;
                if config[dim] < self.cards[dim] {
                    break;
                }
                config[dim] = 0;
                pos -= 1;
            }
        }
    }

    fn observed_targets(&self, targets: &NodeSet) -> Result<Vec<usize>, OracleError> {
        let mut out = Vec::new();
        for name in self.graph.observed() {
            if targets.contains(name.as_str()) {
                out.push(self.node_index(name.as_str())?);
            }
        }
        if out.len() != targets.len() {
            for t in targets {
                self.graph.observed_index(t.as_str())?;
            }
        }
        Ok(out)
    }

    fn table_from(
        &self,
        target_idx: &[usize],
        fixed: &BTreeMap<usize, usize>,
        skip: &[usize],
    ) -> Result<JointTable<F>, OracleError> {
        let out_cards: Vec<usize> = target_idx.iter().map(|&i| self.cards[i]).collect();
        let out_cells: usize = out_cards.iter().product();
        let mut probs = vec![F::zero(); out_cells];
        self.enumerate(fixed, skip, |config, w| {
            let mut idx = 0;
            for (pos, &i) in target_idx.iter().enumerate() {
                idx = idx * out_cards[pos] + config[i];
            }
            probs[idx] += w;
        })?;
        let vars: Vec<VariableId> = target_idx
            .iter()
            .map(|&i| self.expanded.names[i].clone())
            .collect();
        JointTable::new(vars, out_cards, probs)
    }

    /// Exact observed joint: the full factorization summed over all latent
    /// configurations.
    pub fn joint_distribution(&self) -> Result<JointTable<F>, OracleError> {
        let all: NodeSet = self.graph.observed().iter().cloned().collect();
        let idx = self.observed_targets(&all)?;
        self.table_from(&idx, &BTreeMap::new(), &[])
    }

    fn resolve_assignment(
        &self,
        values: &BTreeMap<String, usize>,
    ) -> Result<BTreeMap<usize, usize>, OracleError> {
        let mut out = BTreeMap::new();
        for (name, &v) in values {
            let idx = self.node_index(name)?;
            if v >= self.cards[idx] {
                return Err(OracleError::ValueOutOfDomain {
                    name: name.clone(),
                    value: v,
                    card: self.cards[idx],
                });
            }
            out.insert(idx, v);
        }
        Ok(out)
    }

    /// Interventional distribution of `targets` under `do(interventions)`,
    /// by truncated factorization: the intervened variables' CPTs are
    /// replaced by point masses and everything else is summed out.
    pub fn do_effect(
        &self,
        interventions: &BTreeMap<String, usize>,
        targets: &NodeSet,
    ) -> Result<JointTable<F>, OracleError> {
        for t in targets.iter() {
            if interventions.contains_key(t.as_str()) {
                return Err(OracleError::RoleOverlap(t.to_string()));
            }
        }
        let fixed = self.resolve_assignment(interventions)?;
        let skip: Vec<usize> = fixed.keys().copied().collect();
        let idx = self.observed_targets(targets)?;
        self.table_from(&idx, &fixed, &skip)
    }

    /// The same distribution by the sum-of-ratios form: each full
    /// configuration consistent with the interventions contributes its joint
    /// probability divided by the intervened variables' own factors. With
    /// strictly positive tables this equals [`Self::do_effect`] exactly;
    /// zero-probability rows contribute nothing.
    pub fn do_effect_by_ratio(
        &self,
        interventions: &BTreeMap<String, usize>,
        targets: &NodeSet,
    ) -> Result<JointTable<F>, OracleError> {
        for t in targets.iter() {
            if interventions.contains_key(t.as_str()) {
                return Err(OracleError::RoleOverlap(t.to_string()));
            }
        }
        let fixed = self.resolve_assignment(interventions)?;
        let target_idx = self.observed_targets(targets)?;
        let out_cards: Vec<usize> = target_idx.iter().map(|&i| self.cards[i]).collect();
        let out_cells: usize = out_cards.iter().product();
        let mut probs = vec![F::zero(); out_cells];
        self.enumerate(&BTreeMap::new(), &[], |config, w| {
            if fixed.iter().any(|(&v, &val)| config[v] != val) {
                return;
            }
            let mut denom = F::one();
            for &v in fixed.keys() {
                denom = denom * self.factor(v, config);
            }
            if denom <= F::zero() {
                return;
            }
            let mut idx = 0;
            for (pos, &i) in target_idx.iter().enumerate() {
                idx = idx * out_cards[pos] + config[i];
            }
            probs[idx] += w / denom;
        })?;
        let vars: Vec<VariableId> = target_idx
            .iter()
            .map(|&i| self.expanded.names[i].clone())
            .collect();
        JointTable::new(vars, out_cards, probs)
    }

    /// Conditional interventional distribution
    /// `P(targets | do(interventions), conditions)`, as the ratio of two
    /// interventional joints.
    pub fn conditional_do_effect(
        &self,
        interventions: &BTreeMap<String, usize>,
        targets: &NodeSet,
        conditions: &BTreeMap<String, usize>,
    ) -> Result<JointTable<F>, OracleError> {
        for name in conditions.keys() {
            if interventions.contains_key(name) || targets.contains(name.as_str()) {
                return Err(OracleError::RoleOverlap(name.clone()));
            }
        }
        if conditions.is_empty() {
            return self.do_effect(interventions, targets);
        }
        let mut wide = targets.clone();
        for name in conditions.keys() {
            wide.insert(VariableId::new(name.clone()).map_err(OracleError::Graph)?);
        }
        let joint = self.do_effect(interventions, &wide)?;
        joint.conditional(targets, conditions)
    }

    /// Observational-only evaluation of the conditional effect: with
    /// `Z_de = Z ∩ De(X) ∩ De(Y)`, returns `P(Y | X, Z)` when `Z_de` is
    /// empty and otherwise
    /// `P(Y | X, Z \ Z_de) · P(Z_de | Y, X, Z \ Z_de) / P(Z_de | X, Z \ Z_de)`.
    /// Requires `X ⊆ An(Y)`.
    pub fn lemma1_rhs(
        &self,
        x: &BTreeMap<String, usize>,
        y: &NodeSet,
        z: &BTreeMap<String, usize>,
    ) -> Result<JointTable<F>, OracleError> {
        let x_set: NodeSet = x
            .keys()
            .map(|n| VariableId::new(n.clone()).map_err(OracleError::Graph))
            .collect::<Result<_, _>>()?;
        let an_y = analysis::ancestors(&self.graph, y)?;
        for xi in &x_set {
            if !an_y.contains(xi.as_str()) {
                return Err(OracleError::HypothesisViolated(format!(
                    "treatment `{xi}` is not an ancestor of the targets"
                )));
            }
        }
        let de_x = analysis::descendants(&self.graph, &x_set)?;
        let de_y = analysis::descendants(&self.graph, y)?;
        let z_de: Vec<&String> = z
            .keys()
            .filter(|n| de_x.contains(n.as_str()) && de_y.contains(n.as_str()))
            .collect();

        let joint = self.joint_distribution()?;
        let mut x_and_z_rest: BTreeMap<String, usize> = x.clone();
        for (name, &v) in z {
            if !z_de.contains(&name) {
                x_and_z_rest.insert(name.clone(), v);
            }
        }
        if z_de.is_empty() {
            return joint.conditional(y, &x_and_z_rest);
        }

        let z_de_values: BTreeMap<String, usize> =
            z_de.iter().map(|&n| (n.clone(), z[n])).collect();
        let z_de_set: NodeSet = z_de
            .iter()
            .map(|&n| VariableId::new(n.clone()).map_err(OracleError::Graph))
            .collect::<Result<_, _>>()?;

        // P(Y | X, Z \ Z_de)
        let p_y = joint.conditional(y, &x_and_z_rest)?;
        // P(Z_de | X, Z \ Z_de), evaluated at the requested z_de values.
        let p_zde = joint
            .conditional(&z_de_set, &x_and_z_rest)?
            .prob(&z_de_values.clone())?;
        if p_zde <= F::zero() {
            return Err(OracleError::ZeroProbability);
        }

        // P(Z_de | Y, X, Z \ Z_de) for each value of Y.
        let y_vars = p_y.variables().to_vec();
        let y_cards = p_y.cardinalities().to_vec();
        let mut probs = Vec::with_capacity(p_y.probabilities().len());
        let mut y_values = vec![0usize; y_vars.len()];
        for (flat, &base) in p_y.probabilities().iter().enumerate() {
            decode(flat, &y_cards, &mut y_values);
            let mut given = x_and_z_rest.clone();
            for (var, &v) in y_vars.iter().zip(y_values.iter()) {
                given.insert(var.to_string(), v);
            }
            let p_zde_given_y = match joint.conditional(&z_de_set, &given) {
                Ok(t) => t.prob(&z_de_values.clone())?,
                // P(y | x, z_rest) = 0 rows cannot be conditioned on; they
                // contribute zero mass anyway.
                Err(OracleError::ZeroProbability) => F::zero(),
                Err(e) => return Err(e),
            };
            probs.push(base * p_zde_given_y / p_zde);
        }
        JointTable::new(y_vars, y_cards, probs)
    }
}

fn flatten_nested<F: Real>(name: &str, value: &serde_json::Value) -> Result<Vec<F>, OracleError> {
    let mut out = Vec::new();
    fn walk<F: Real>(
        name: &str,
        value: &serde_json::Value,
        out: &mut Vec<F>,
    ) -> Result<(), OracleError> {
        match value {
            serde_json::Value::Array(items) => {
                for item in items {
                    walk(name, item, out)?;
                }
                Ok(())
            }
            serde_json::Value::Number(n) => {
                let v = n
                    .as_f64()
                    .ok_or_else(|| OracleError::MalformedNestedTable(name.to_string()))?;
                out.push(real(v));
                Ok(())
            }
            _ => Err(OracleError::MalformedNestedTable(name.to_string())),
        }
    }
    walk(name, value, &mut out)?;
    if out.is_empty() {
        return Err(OracleError::MalformedNestedTable(name.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::node_set;

    fn assign(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    fn single_binary(p1: f64) -> DiscreteScm<f64> {
        let g = CausalGraph::build(&["V"], &[], &[]).unwrap();
        let cards = assign(&[("V", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("V".to_string(), vec![1.0 - p1, p1]);
        DiscreteScm::from_tables(g, &cards, &tables).unwrap()
    }

    /// The spec'd three-node confounded model: Z -> X, Z -> Y, X -> Y.
    fn backdoor_scm() -> DiscreteScm<f64> {
        let g = CausalGraph::build(&["Z", "X", "Y"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[])
            .unwrap();
        let cards = assign(&[("Z", 2), ("X", 2), ("Y", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("Z".to_string(), vec![0.5, 0.5]);
        // P(X | Z): rows Z=0, Z=1.
        tables.insert("X".to_string(), vec![0.8, 0.2, 0.2, 0.8]);
        // P(Y | X, Z): parents sorted by name -> (X, Z); rows (0,0),(0,1),(1,0),(1,1).
        tables.insert(
            "Y".to_string(),
            vec![0.9, 0.1, 0.6, 0.4, 0.4, 0.6, 0.1, 0.9],
        );
        DiscreteScm::from_tables(g, &cards, &tables).unwrap()
    }

    #[test]
    fn single_binary_joint() {
        let scm = single_binary(0.3);
        let j = scm.joint_distribution().unwrap();
        assert_eq!(j.probabilities(), &[0.7, 0.3]);
    }

    #[test]
    fn independent_binaries_joint() {
        let g = CausalGraph::build(&["A", "B"], &[], &[]).unwrap();
        let cards = assign(&[("A", 2), ("B", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("A".to_string(), vec![0.5, 0.5]);
        tables.insert("B".to_string(), vec![0.5, 0.5]);
        let scm = DiscreteScm::from_tables(g, &cards, &tables).unwrap();
        let j = scm.joint_distribution().unwrap();
        assert_eq!(j.probabilities(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn backdoor_adjustment_values() {
        // P(Y=1|X=1,Z=1)=0.9, (1,0)=0.6, (0,1)=0.4, (0,0)=0.1 with
        // P(X=1|Z=1)=0.8, P(X=1|Z=0)=0.2, P(Z=1)=0.5 gives
        // P(Y=1|do(X=1)) = 0.75 while P(Y=1|X=1) = 0.84.
        let g = CausalGraph::build(&["Z", "X", "Y"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[])
            .unwrap();
        let cards = assign(&[("Z", 2), ("X", 2), ("Y", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("Z".to_string(), vec![0.5, 0.5]);
        tables.insert("X".to_string(), vec![0.8, 0.2, 0.2, 0.8]);
        // P(Y=1 | X, Z): (X=0,Z=0)=0.1, (0,1)=0.4, (1,0)=0.6, (1,1)=0.9.
        tables.insert(
            "Y".to_string(),
            vec![0.9, 0.1, 0.6, 0.4, 0.4, 0.6, 0.1, 0.9],
        );
        let scm: DiscreteScm<f64> = DiscreteScm::from_tables(g, &cards, &tables).unwrap();

        let do_x = scm
            .do_effect(&assign(&[("X", 1)]), &node_set(["Y"]))
            .unwrap();
        assert!((do_x.probabilities()[1] - 0.75).abs() < 1e-12);

        let obs = scm
            .joint_distribution()
            .unwrap()
            .conditional(&node_set(["Y"]), &assign(&[("X", 1)]))
            .unwrap();
        assert!((obs.probabilities()[1] - 0.84).abs() < 1e-12);

        let cond = scm
            .conditional_do_effect(&assign(&[("X", 1)]), &node_set(["Y"]), &assign(&[("Z", 1)]))
            .unwrap();
        assert!((cond.probabilities()[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn confounder_free_do_equals_conditional() {
        let g = CausalGraph::build(&["X", "Y"], &[("X", "Y")], &[]).unwrap();
        let cards = assign(&[("X", 2), ("Y", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("X".to_string(), vec![0.4, 0.6]);
        tables.insert("Y".to_string(), vec![0.7, 0.3, 0.2, 0.8]);
        let scm: DiscreteScm<f64> = DiscreteScm::from_tables(g, &cards, &tables).unwrap();
        let d = scm
            .do_effect(&assign(&[("X", 1)]), &node_set(["Y"]))
            .unwrap();
        assert!((d.probabilities()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn null_intervention_is_the_marginal() {
        let scm = backdoor_scm();
        let d = scm.do_effect(&BTreeMap::new(), &node_set(["Y"])).unwrap();
        let m = scm
            .joint_distribution()
            .unwrap()
            .marginal(&node_set(["Y"]))
            .unwrap();
        assert!(d.max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn empty_conditions_reduce_to_do_effect() {
        let scm = backdoor_scm();
        let a = scm
            .conditional_do_effect(&assign(&[("X", 1)]), &node_set(["Y"]), &BTreeMap::new())
            .unwrap();
        let b = scm.do_effect(&assign(&[("X", 1)]), &node_set(["Y"])).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn lemma1_first_branch_equals_observational_conditional() {
        let scm = backdoor_scm();
        // Z_de is empty here, so the formula is plain P(Y | X, Z).
        let rhs = scm
            .lemma1_rhs(&assign(&[("X", 1)]), &node_set(["Y"]), &assign(&[("Z", 1)]))
            .unwrap();
        let direct = scm
            .joint_distribution()
            .unwrap()
            .conditional(&node_set(["Y"]), &assign(&[("X", 1), ("Z", 1)]))
            .unwrap();
        assert!(rhs.max_abs_diff(&direct) < 1e-14);
    }

    #[test]
    fn lemma1_z_empty_is_p_y_given_x() {
        let g = CausalGraph::build(&["X", "Y"], &[("X", "Y")], &[]).unwrap();
        let cards = assign(&[("X", 2), ("Y", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("X".to_string(), vec![0.4, 0.6]);
        tables.insert("Y".to_string(), vec![0.7, 0.3, 0.2, 0.8]);
        let scm: DiscreteScm<f64> = DiscreteScm::from_tables(g, &cards, &tables).unwrap();
        let rhs = scm
            .lemma1_rhs(&assign(&[("X", 1)]), &node_set(["Y"]), &BTreeMap::new())
            .unwrap();
        assert!((rhs.probabilities()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn lemma1_requires_ancestral_treatments() {
        let g = CausalGraph::build(&["X", "Y"], &[("Y", "X")], &[]).unwrap();
        let cards = assign(&[("X", 2), ("Y", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("Y".to_string(), vec![0.4, 0.6]);
        tables.insert("X".to_string(), vec![0.7, 0.3, 0.2, 0.8]);
        let scm = DiscreteScm::from_tables(g, &cards, &tables).unwrap();
        let err = scm
            .lemma1_rhs(&assign(&[("X", 1)]), &node_set(["Y"]), &BTreeMap::new())
            .unwrap_err();
        assert!(matches!(err, OracleError::HypothesisViolated(_)));
    }

    #[test]
    fn zero_probability_conditioning_is_a_hard_error() {
        // X deterministically copies Z, so conditioning on the impossible
        // combination (Z=0, X=1) must error rather than propagate NaN.
        let g = CausalGraph::build(&["Z", "X"], &[("Z", "X")], &[]).unwrap();
        let cards = assign(&[("Z", 2), ("X", 2)]);
        let mut tables = BTreeMap::new();
        tables.insert("Z".to_string(), vec![0.5, 0.5]);
        tables.insert("X".to_string(), vec![1.0, 0.0, 0.0, 1.0]);
        let scm: DiscreteScm<f64> = DiscreteScm::from_tables(g, &cards, &tables).unwrap();
        let err = scm
            .joint_distribution()
            .unwrap()
            .conditional(&node_set(["Z"]), &assign(&[("X", 1), ("Z", 0)]));
        assert!(matches!(err, Err(OracleError::RoleOverlap(_))));
        let err = scm.do_effect(&assign(&[("X", 5)]), &node_set(["Z"]));
        assert!(matches!(err, Err(OracleError::ValueOutOfDomain { .. })));

        let g2 = CausalGraph::build(&["Z", "X", "W"], &[("Z", "X")], &[]).unwrap();
        let cards2 = assign(&[("Z", 2), ("X", 2), ("W", 2)]);
        let mut tables2 = BTreeMap::new();
        tables2.insert("Z".to_string(), vec![0.5, 0.5]);
        tables2.insert("X".to_string(), vec![1.0, 0.0, 0.0, 1.0]);
        tables2.insert("W".to_string(), vec![0.5, 0.5]);
        let scm2: DiscreteScm<f64> = DiscreteScm::from_tables(g2, &cards2, &tables2).unwrap();
        let err = scm2.conditional_do_effect(
            &assign(&[("W", 0)]),
            &node_set(["Z"]),
            &assign(&[("X", 1), ("Z", 0)]),
        );
        assert!(matches!(err, Err(OracleError::RoleOverlap(_))));
        let err = scm2
            .joint_distribution()
            .unwrap()
            .conditional(&node_set(["W"]), &assign(&[("X", 1), ("Z", 0)]));
        assert!(matches!(err, Err(OracleError::ZeroProbability)));
    }

    #[test]
    fn cap_is_enforced() {
        let scm = single_binary(0.5).with_cell_cap(1);
        assert!(matches!(
            scm.joint_distribution().unwrap_err(),
            OracleError::CapExceeded { .. }
        ));
    }

    #[test]
    fn invalid_tables_rejected() {
        let g = CausalGraph::build(&["V"], &[], &[]).unwrap();
        let cards = assign(&[("V", 2)]);
        let mut bad_sum = BTreeMap::new();
        bad_sum.insert("V".to_string(), vec![0.5, 0.6]);
        assert!(matches!(
            DiscreteScm::from_tables(g.clone(), &cards, &bad_sum).unwrap_err(),
            OracleError::RowSumNotOne { .. }
        ));
        let mut bad_shape = BTreeMap::new();
        bad_shape.insert("V".to_string(), vec![1.0]);
        assert!(matches!(
            DiscreteScm::from_tables(g, &cards, &bad_shape).unwrap_err(),
            OracleError::BadTableShape { .. }
        ));
    }

    #[test]
    fn scm_file_round_trip() {
        let json = r#"{
            "graph": {"observed": ["X", "Y"], "directed": [["X", "Y"]], "bidirected": []},
            "cardinalities": {"X": 2, "Y": 2},
            "cpts": {"X": [0.4, 0.6], "Y": [[0.7, 0.3], [0.2, 0.8]]}
        }"#;
        let file: ScmFile = serde_json::from_str(json).unwrap();
        let scm: DiscreteScm<f64> = DiscreteScm::from_file(&file).unwrap();
        let d = scm
            .do_effect(&assign(&[("X", 1)]), &node_set(["Y"]))
            .unwrap();
        assert!((d.probabilities()[1] - 0.8).abs() < 1e-15);
    }
}
