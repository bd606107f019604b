//! Seeded synthetic data: the sinusoidal benchmark model, linear-Gaussian
//! structural models with analytic do-expectations, and random graph / SCM
//! generators for property tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::graph::{CausalGraph, VariableId};
use crate::oracle::DiscreteScm;
use crate::rng::Rng;
use crate::{real, Real};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("variable `{child}` uses parent `{parent}` before it is declared; specs must be in topological order (cycles are impossible to declare)")]
    ParentNotDeclared { child: String, parent: String },
    #[error("duplicate variable `{0}` in the generator spec")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}` requested from the generator")]
    UnknownVariable(String),
    #[error("noise scale of `{0}` must be finite and non-negative")]
    BadNoise(String),
    #[error("covariate `{covariate}` is a descendant of treatment `{treatment}`; the closed-form do-expectation requires covariates upstream of treatments")]
    CovariateDownstream { covariate: String, treatment: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Benchmark data: `Z ~ U(0,1)`, `X = sin(Z) + U(-0.5, 0.5)`,
/// `Y = X*Z + N(0, 0.05)` with 0.05 a standard deviation. Per row the draws
/// are `Z`, then the X-noise, then the Y-noise, on one xoshiro256++ stream.
pub fn gen_paper_model<F: Real>(n: usize, seed: u64) -> Dataset<F> {
    assert!(n >= 1, "need at least one sample");
    let mut rng = Rng::from_seed(seed);
    let mut z = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zv = rng.uniform01();
        let xv = zv.sin() + rng.uniform(-0.5, 0.5);
        let yv = xv * zv + rng.normal(0.0, 0.05);
        z.push(real(zv));
        x.push(real(xv));
        y.push(real(yv));
    }
    Dataset::from_columns(
        vec![
            VariableId::new("Z").unwrap(),
            VariableId::new("X").unwrap(),
            VariableId::new("Y").unwrap(),
        ],
        vec![z, x, y],
    )
    .expect("generated columns are finite and rectangular")
}

/// The interventional mean of the benchmark model:
/// `E[Y | do(X=x), Z=z] = x * z`.
pub fn paper_model_theory(x: f64, z: f64) -> f64 {
    x * z
}

/// One structural equation: `value = sum(coeff * parent) + noise * N(0,1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearVariableSpec {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<(String, f64)>,
    #[serde(default)]
    pub noise: f64,
}

/// A linear-Gaussian structural model, declared in topological order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearScmSpec {
    pub variables: Vec<LinearVariableSpec>,
}

impl LinearScmSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let mut seen: Vec<&str> = Vec::new();
        for v in &self.variables {
            if seen.contains(&v.name.as_str()) {
                return Err(SimError::DuplicateVariable(v.name.clone()));
            }
            if !(v.noise >= 0.0 && v.noise.is_finite()) {
                return Err(SimError::BadNoise(v.name.clone()));
            }
            for (p, _) in &v.parents {
                if !seen.contains(&p.as_str()) {
                    return Err(SimError::ParentNotDeclared {
                        child: v.name.clone(),
                        parent: p.clone(),
                    });
                }
            }
            seen.push(v.name.as_str());
        }
        Ok(())
    }

    /// Sample a dataset. Per row, one standard-normal draw per variable in
    /// declaration order.
    pub fn sample<F: Real>(&self, n: usize, seed: u64) -> Result<Dataset<F>, SimError> {
        self.validate()?;
        let mut rng = Rng::from_seed(seed);
        let k = self.variables.len();
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); k];
        let index: BTreeMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        for _ in 0..n {
            for (i, var) in self.variables.iter().enumerate() {
                let mut value = rng.normal(0.0, var.noise);
                for (p, coeff) in &var.parents {
                    let pi = index[p.as_str()];
                    value += coeff * columns[pi].last().copied().unwrap_or(0.0);
                }
                columns[i].push(value);
            }
        }
        // The loop above pushes the parent value of the *current* row before
        // any child reads it, because declaration order is topological.
        let names = self
            .variables
            .iter()
            .map(|v| VariableId::new(v.name.clone()).expect("validated"))
            .collect();
        let cols = columns
            .into_iter()
            .map(|c| c.into_iter().map(real).collect())
            .collect();
        Ok(Dataset::from_columns(names, cols)?)
    }

    /// The model's causal graph (an edge per nonzero-or-not coefficient;
    /// coefficients declared with value zero still count as edges).
    pub fn graph(&self) -> Result<CausalGraph, SimError> {
        self.validate()?;
        let names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        let mut edges = Vec::new();
        for v in &self.variables {
            for (p, _) in &v.parents {
                edges.push((p.as_str(), v.name.as_str()));
            }
        }
        CausalGraph::build(&names, &edges, &[])
            .map_err(|_| SimError::DuplicateVariable("graph".into()))
    }

    /// Closed-form `E[outcome | do(treatments), covariates]`: clamp the
    /// treatments and covariates, propagate means (noises are centered)
    /// through the remaining equations. Requires that no covariate descends
    /// from a treatment, otherwise conditioning is not plain substitution.
    pub fn do_expectation(
        &self,
        outcome: &str,
        treatments: &[String],
        covariates: &[String],
    ) -> Result<DoExpectation, SimError> {
        self.validate()?;
        let index: BTreeMap<String, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        for name in treatments
            .iter()
            .chain(covariates.iter())
            .chain(std::iter::once(&outcome.to_string()))
        {
            if !index.contains_key(name) {
                return Err(SimError::UnknownVariable(name.clone()));
            }
        }
        // Descendant check: walk declaration order marking reachability.
        let mut downstream: Vec<bool> = vec![false; self.variables.len()];
        for (i, v) in self.variables.iter().enumerate() {
            if treatments.contains(&v.name) {
                downstream[i] = true;
                continue;
            }
            if v.parents.iter().any(|(p, _)| downstream[index[p]]) {
                downstream[i] = true;
                if let Some(cov) = covariates.iter().find(|c| **c == v.name) {
                    let t = treatments.first().cloned().unwrap_or_default();
                    return Err(SimError::CovariateDownstream {
                        covariate: cov.clone(),
                        treatment: t,
                    });
                }
            }
        }
        Ok(DoExpectation {
            spec: self.clone(),
            outcome: outcome.to_string(),
            treatments: treatments.to_vec(),
            covariates: covariates.to_vec(),
        })
    }
}

/// Evaluable closed-form interventional mean of a [`LinearScmSpec`].
#[derive(Debug, Clone)]
pub struct DoExpectation {
    spec: LinearScmSpec,
    outcome: String,
    treatments: Vec<String>,
    covariates: Vec<String>,
}

impl DoExpectation {
    pub fn eval(&self, x_values: &[f64], z_values: &[f64]) -> f64 {
        assert_eq!(x_values.len(), self.treatments.len(), "treatment arity");
        assert_eq!(z_values.len(), self.covariates.len(), "covariate arity");
        let mut values: BTreeMap<&str, f64> = BTreeMap::new();
        for (name, v) in self.treatments.iter().zip(x_values) {
            values.insert(name.as_str(), *v);
        }
        for (name, v) in self.covariates.iter().zip(z_values) {
            values.insert(name.as_str(), *v);
        }
        for var in &self.spec.variables {
            if values.contains_key(var.name.as_str()) {
                continue;
            }
            let mean: f64 = var
                .parents
                .iter()
                .map(|(p, coeff)| coeff * values[p.as_str()])
                .sum();
            values.insert(var.name.as_str(), mean);
        }
        values[self.outcome.as_str()]
    }
}

/// Random semi-Markovian DAG over `2..=max_nodes` nodes named `V0, V1, ...`;
/// each forward pair gets a directed edge with probability `edge_prob` and a
/// bidirected arc with probability `bidir_prob`.
pub fn random_dag(seed: u64, max_nodes: usize, edge_prob: f64, bidir_prob: f64) -> CausalGraph {
    let mut rng = Rng::from_seed(seed ^ 0xD1CE_5EED);
    let n = 2 + rng.below((max_nodes.max(2) - 1) as u64) as usize;
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform01() < edge_prob {
                directed.push((refs[i], refs[j]));
            }
            if rng.uniform01() < bidir_prob {
                bidirected.push((refs[i], refs[j]));
            }
        }
    }
    CausalGraph::build(&refs, &directed, &bidirected).expect("forward edges cannot cycle")
}

/// Random discrete SCM on `graph`: every variable (and expanded latent) gets
/// cardinality 2..=max_card and CPT rows sampled uniformly from
/// `[0.05, 1]` then normalized, so all probabilities stay well away from
/// zero.
pub fn random_scm<F: Real>(seed: u64, graph: &CausalGraph, max_card: usize) -> DiscreteScm<F> {
    let mut rng = Rng::from_seed(seed ^ 0x5C3_15EED);
    let expanded = graph.expanded();
    let mut cards: BTreeMap<String, usize> = BTreeMap::new();
    for name in &expanded.names {
        let k = if max_card <= 2 {
            2
        } else {
            2 + rng.below((max_card - 1) as u64) as usize
        };
        cards.insert(name.to_string(), k);
    }
    let mut tables: BTreeMap<String, Vec<F>> = BTreeMap::new();
    for (v, name) in expanded.names.iter().enumerate() {
        let mut parents = expanded.parents[v].clone();
        parents.sort_by(|&a, &b| expanded.names[a].cmp(&expanded.names[b]));
        let rows: usize = parents
            .iter()
            .map(|&p| cards[expanded.names[p].as_str()])
            .product();
        let k = cards[name.as_str()];
        let mut table = Vec::with_capacity(rows * k);
        for _ in 0..rows {
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform(0.05, 1.0)).collect();
            let sum: f64 = raw.iter().sum();
            table.extend(raw.into_iter().map(|p| real::<F>(p / sum)));
        }
        tables.insert(name.to_string(), table);
    }
    DiscreteScm::from_tables(graph.clone(), &cards, &tables)
        .expect("generated tables are well-formed")
}

/// Convenience used by the oracle property tests.
pub fn random_binary_scm<F: Real>(seed: u64, max_nodes: usize, bidir_prob: f64) -> DiscreteScm<F> {
    let g = random_dag(seed, max_nodes, 0.45, bidir_prob);
    random_scm(seed.wrapping_add(1), &g, 2)
}

/// Random linear-Gaussian model with exogenous covariates `Z1..`, treatments
/// `X1..` depending on the covariates and earlier treatments, and an outcome
/// `Y` depending on everything. Coefficients are uniform in `[-2, 2]`, so
/// the structural hypotheses of the residualization cascade hold by
/// construction.
pub fn random_linear_spec(seed: u64, n_treatments: usize, n_covariates: usize) -> LinearScmSpec {
    let mut rng = Rng::from_seed(seed ^ 0x11EA4);
    let mut variables = Vec::new();
    let mut coeff = |rng: &mut Rng| {
        let c = rng.uniform(-2.0, 2.0);
        // Keep signal above the noise floor.
        if c.abs() < 0.2 {
            c.signum() * 0.2
        } else {
            c
        }
    };
    for i in 0..n_covariates {
        variables.push(LinearVariableSpec {
            name: format!("Z{}", i + 1),
            parents: Vec::new(),
            noise: rng.uniform(0.6, 1.2),
        });
    }
    for i in 0..n_treatments {
        let mut parents: Vec<(String, f64)> = (0..n_covariates)
            .map(|j| (format!("Z{}", j + 1), coeff(&mut rng)))
            .collect();
        for j in 0..i {
            if rng.uniform01() < 0.5 {
                parents.push((format!("X{}", j + 1), coeff(&mut rng)));
            }
        }
        variables.push(LinearVariableSpec {
            name: format!("X{}", i + 1),
            parents,
            noise: rng.uniform(0.5, 1.0),
        });
    }
    let mut y_parents: Vec<(String, f64)> = (0..n_treatments)
        .map(|i| (format!("X{}", i + 1), coeff(&mut rng)))
        .collect();
    y_parents.extend((0..n_covariates).map(|j| (format!("Z{}", j + 1), coeff(&mut rng))));
    variables.push(LinearVariableSpec {
        name: "Y".into(),
        parents: y_parents,
        noise: rng.uniform(0.3, 0.8),
    });
    LinearScmSpec { variables }
}
