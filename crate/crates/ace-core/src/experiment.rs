//! Experiment orchestration: generate (or load) data, build a pipeline,
//! sweep the estimator over a treatment grid at a fixed covariate row, join
//! closed-form interventional means where available, and emit CSV plot data
//! plus a JSON summary.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::pipeline::{self, PipelineConfig, PipelineError};
use crate::sim::{self, LinearScmSpec, SimError};
use crate::{real, Real};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Data source for an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// The sinusoidal benchmark model (`Z`, `X`, `Y` columns).
    PaperModel,
    /// A linear-Gaussian structural model with its analytic closure.
    LinearGaussian { variables: Vec<sim::LinearVariableSpec> },
    /// A CSV file on disk; no closed-form reference values.
    ExternalCsv { path: String },
}

/// Which reference values to join against the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheorySpec {
    /// `x * z` for the benchmark model.
    Paper,
    /// The generator's structural do-expectation.
    Generator,
    /// No reference column.
    None,
}

/// Linear spacing shorthand for single-treatment grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Linspace {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

/// Evaluation grid: rows of treatment values plus one fixed covariate row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Explicit rows, one value per treatment.
    #[serde(default)]
    pub rows: Vec<Vec<f64>>,
    /// Single-treatment shorthand.
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub linspace: Option<Linspace>,
    /// Covariate values, one per covariate, fixed across the grid.
    #[serde(default)]
    pub z: Vec<f64>,
}

impl GridSpec {
    fn resolve(&self) -> Result<Vec<Vec<f64>>, ExperimentError> {
        let rows = if !self.rows.is_empty() {
            self.rows.clone()
        } else if !self.x.is_empty() {
            self.x.iter().map(|&v| vec![v]).collect()
        } else if let Some(l) = &self.linspace {
            l.values().into_iter().map(|v| vec![v]).collect()
        } else {
            Vec::new()
        };
        if rows.is_empty() {
            return Err(ExperimentError::InvalidConfig("empty grid".into()));
        }
        Ok(rows)
    }
}

/// Full experiment description; TOML-friendly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Independent repetitions with seeds `seed, seed+1, ...`; the emitted
    /// curve is the first replication's, the summary reports all.
    #[serde(default = "one")]
    pub replications: usize,
    pub generator: GeneratorSpec,
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mae: Option<f64>,
}

fn one() -> usize {
    1
}

/// The benchmark grid: 17 points spanning `sin(0.5) ± 0.4` in steps of
/// 0.05, evaluated at the covariate value 0.5.
pub fn default_paper_grid() -> GridSpec {
    let center = 0.5f64.sin();
    GridSpec {
        rows: Vec::new(),
        x: (0..17).map(|i| center - 0.4 + 0.05 * i as f64).collect(),
        linspace: None,
        z: vec![0.5],
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }

    fn effective_grid(&self) -> Result<GridSpec, ExperimentError> {
        match (&self.grid, &self.generator) {
            (Some(g), _) => Ok(g.clone()),
            (None, GeneratorSpec::PaperModel) => Ok(default_paper_grid()),
            (None, _) => Err(ExperimentError::InvalidConfig(
                "a grid is required unless the generator is the benchmark model".into(),
            )),
        }
    }

    fn effective_theory(&self) -> TheorySpec {
        self.theory.unwrap_or(match &self.generator {
            GeneratorSpec::PaperModel => TheorySpec::Paper,
            GeneratorSpec::LinearGaussian { .. } => TheorySpec::Generator,
            GeneratorSpec::ExternalCsv { .. } => TheorySpec::None,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_samples < 10 {
            return Err(ExperimentError::InvalidConfig(
                "n_samples must be at least 10".into(),
            ));
        }
        if self.replications < 1 {
            return Err(ExperimentError::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        self.pipeline.validate()?;
        if matches!(self.effective_theory(), TheorySpec::Paper)
            && !matches!(self.generator, GeneratorSpec::PaperModel)
        {
            return Err(ExperimentError::InvalidConfig(
                "paper theory requires the benchmark generator".into(),
            ));
        }
        if matches!(self.effective_theory(), TheorySpec::Generator)
            && !matches!(self.generator, GeneratorSpec::LinearGaussian { .. })
        {
            return Err(ExperimentError::InvalidConfig(
                "generator theory requires a linear-gaussian generator".into(),
            ));
        }
        Ok(())
    }
}

/// One grid point: treatment values, the estimate, and the reference value
/// where one exists.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow<F> {
    pub x: Vec<F>,
    pub estimate: F,
    pub theory: Option<F>,
    pub abs_error: Option<F>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub mae: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub runtime_seconds: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub replications: usize,
    /// Per-replication MAE (first entry corresponds to the emitted rows).
    pub replication_maes: Vec<Option<f64>>,
    pub replication_mae_median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult<F> {
    pub rows: Vec<ExperimentRow<F>>,
    pub summary: ExperimentSummary,
}

fn generate<F: Real>(
    generator: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset<F>, ExperimentError> {
    match generator {
        GeneratorSpec::PaperModel => Ok(sim::gen_paper_model(n, seed)),
        GeneratorSpec::LinearGaussian { variables } => {
            let spec = LinearScmSpec {
                variables: variables.clone(),
            };
            Ok(spec.sample(n, seed)?)
        }
        GeneratorSpec::ExternalCsv { path } => {
            let file = std::fs::File::open(path)?;
            Ok(Dataset::from_csv(file)?)
        }
    }
}

/// Run one experiment: per replication, generate data, build the pipeline,
/// estimate over the grid, and join reference values.
pub fn run_experiment<F: Real>(
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult<F>, ExperimentError> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = cfg.effective_grid()?;
    let x_rows = grid.resolve()?;
    let n_treat = cfg.pipeline.treatments.len();
    for row in &x_rows {
        if row.len() != n_treat {
            return Err(ExperimentError::InvalidConfig(format!(
                "grid row has {} values for {} treatments",
                row.len(),
                n_treat
            )));
        }
    }

    let theory_kind = cfg.effective_theory();
    let closure = match (&theory_kind, &cfg.generator) {
        (TheorySpec::Generator, GeneratorSpec::LinearGaussian { variables }) => {
            let spec = LinearScmSpec {
                variables: variables.clone(),
            };
            let covariates = cfg
                .pipeline
                .covariates
                .clone()
                .unwrap_or_else(|| {
                    spec.variables
                        .iter()
                        .map(|v| v.name.clone())
                        .filter(|n| *n != cfg.pipeline.outcome && !cfg.pipeline.treatments.contains(n))
                        .collect()
                });
            Some(spec.do_expectation(&cfg.pipeline.outcome, &cfg.pipeline.treatments, &covariates)?)
        }
        _ => None,
    };
    let theory_at = |x: &[f64], z: &[f64]| -> Option<f64> {
        match theory_kind {
            TheorySpec::Paper => Some(sim::paper_model_theory(x[0], z[0])),
            TheorySpec::Generator => closure.as_ref().map(|c| c.eval(x, z)),
            TheorySpec::None => None,
        }
    };

    let z_row_f: Vec<F> = grid.z.iter().map(|&v| real(v)).collect();
    let mut rows: Vec<ExperimentRow<F>> = Vec::new();
    let mut replication_maes: Vec<Option<f64>> = Vec::new();

    for rep in 0..cfg.replications {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let data: Dataset<F> = generate(&cfg.generator, cfg.n_samples, seed)?;
        let (pipeline, _) = pipeline::build(&data, &cfg.pipeline)?;
        let mut abs_errors: Vec<f64> = Vec::new();
        let mut rep_rows = Vec::with_capacity(x_rows.len());
        for x in &x_rows {
            let x_f: Vec<F> = x.iter().map(|&v| real(v)).collect();
            let estimate = pipeline.estimate(&x_f, &z_row_f)?;
            let theory = theory_at(x, &grid.z);
            let abs_error = theory.map(|t| {
                let e = (estimate.to_f64().unwrap_or(f64::NAN) - t).abs();
                abs_errors.push(e);
                e
            });
            rep_rows.push(ExperimentRow {
                x: x_f,
                estimate,
                theory: theory.map(real),
                abs_error: abs_error.map(real),
            });
        }
        let mae = (!abs_errors.is_empty())
            .then(|| abs_errors.iter().sum::<f64>() / abs_errors.len() as f64);
        replication_maes.push(mae);
        if rep == 0 {
            rows = rep_rows;
        }
    }

    let mae = replication_maes[0];
    let max_abs_error = rows
        .iter()
        .filter_map(|r| r.abs_error.and_then(|e| e.to_f64()))
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    let mut sorted: Vec<f64> = replication_maes.iter().filter_map(|m| *m).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite maes"));
    let replication_mae_median = if sorted.is_empty() {
        None
    } else {
        Some(median_of_sorted(&sorted))
    };

    Ok(ExperimentResult {
        rows,
        summary: ExperimentSummary {
            mae,
            max_abs_error,
            runtime_seconds: started.elapsed().as_secs_f64(),
            n_samples: cfg.n_samples,
            seed: cfg.seed,
            grid_points: x_rows.len(),
            replications: cfg.replications,
            replication_maes,
            replication_mae_median,
        },
    })
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Write the plot CSV (`x,estimate,theory,abs_error`, with one `x` column
/// per treatment for joint interventions) and the JSON summary.
pub fn emit_plot_data<F: Real>(
    result: &ExperimentResult<F>,
    n_treatments: usize,
    mut csv_sink: impl Write,
    mut summary_sink: impl Write,
) -> Result<(), ExperimentError> {
    let header: Vec<String> = if n_treatments == 1 {
        vec!["x".into()]
    } else {
        (1..=n_treatments).map(|i| format!("x{i}")).collect()
    };
    let mut w = csv::Writer::from_writer(&mut csv_sink);
    let mut record: Vec<String> = header;
    record.extend(["estimate".into(), "theory".into(), "abs_error".into()]);
    w.write_record(&record)?;
    for row in &result.rows {
        record.clear();
        record.extend(row.x.iter().map(|v| v.to_string()));
        record.push(row.estimate.to_string());
        record.push(row.theory.map(|v| v.to_string()).unwrap_or_default());
        record.push(row.abs_error.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    drop(w);
    serde_json::to_writer_pretty(&mut summary_sink, &result.summary)?;
    summary_sink.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::LearnerSpec;
    use crate::pipeline::LearnerRoles;

    fn paper_cfg(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_samples: 400,
            seed,
            replications: 1,
            generator: GeneratorSpec::PaperModel,
            pipeline: PipelineConfig::new("Y", vec!["X".into()])
                .with_covariates(vec!["Z".into()])
                .with_learners(LearnerRoles::uniform(LearnerSpec::least_squares(2))),
            grid: None,
            theory: None,
            max_mae: None,
        }
    }

    #[test]
    fn default_grid_has_17_points_and_exact_theory() {
        let result: ExperimentResult<f64> = run_experiment(&paper_cfg(5)).unwrap();
        assert_eq!(result.rows.len(), 17);
        for row in &result.rows {
            let x = row.x[0];
            assert_eq!(row.theory.unwrap(), 0.5 * x);
        }
        assert!(result.summary.mae.is_some());
    }

    #[test]
    fn emitted_csv_is_deterministic_and_consistent() {
        let cfg = paper_cfg(9);
        let r1: ExperimentResult<f64> = run_experiment(&cfg).unwrap();
        let r2: ExperimentResult<f64> = run_experiment(&cfg).unwrap();
        let mut c1 = Vec::new();
        let mut s1 = Vec::new();
        emit_plot_data(&r1, 1, &mut c1, &mut s1).unwrap();
        let mut c2 = Vec::new();
        let mut s2 = Vec::new();
        emit_plot_data(&r2, 1, &mut c2, &mut s2).unwrap();
        assert_eq!(c1, c2);

        // 17 data rows plus the header.
        let text = String::from_utf8(c1).unwrap();
        assert_eq!(text.lines().count(), 18);
        assert!(text.starts_with("x,estimate,theory,abs_error"));

        // Summary MAE equals recomputation from rows.
        let recomputed: f64 = r1
            .rows
            .iter()
            .map(|r| r.abs_error.unwrap())
            .sum::<f64>()
            / r1.rows.len() as f64;
        assert!((r1.summary.mae.unwrap() - recomputed).abs() < 1e-15);
    }

    #[test]
    fn replications_report_every_mae() {
        let mut cfg = paper_cfg(11);
        cfg.replications = 3;
        let r: ExperimentResult<f64> = run_experiment(&cfg).unwrap();
        assert_eq!(r.summary.replication_maes.len(), 3);
        assert!(r.summary.replication_mae_median.is_some());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            n_samples = 400
            seed = 3

            [generator]
            kind = "linear-gaussian"
            [[generator.variables]]
            name = "Z"
            noise = 1.0
            [[generator.variables]]
            name = "X"
            parents = [["Z", 0.7]]
            noise = 0.5
            [[generator.variables]]
            name = "Y"
            parents = [["X", 1.5], ["Z", -0.8]]
            noise = 0.3

            [pipeline]
            outcome = "Y"
            treatments = ["X"]
            [pipeline.learners.default]
            kind = "least-squares"

            [grid]
            x = [-1.0, 0.0, 1.0]
            z = [0.5]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let r: ExperimentResult<f64> = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        // Closed form 1.5x - 0.8z.
        assert_eq!(r.rows[2].theory.unwrap(), 1.5 - 0.4);
    }

    #[test]
    fn missing_grid_for_linear_generator_is_an_error() {
        let cfg = ExperimentConfig {
            generator: GeneratorSpec::LinearGaussian { variables: vec![] },
            grid: None,
            ..paper_cfg(1)
        };
        assert!(matches!(
            run_experiment::<f64>(&cfg).unwrap_err(),
            ExperimentError::InvalidConfig(_)
        ));
    }

    #[test]
    fn small_n_is_rejected() {
        let mut cfg = paper_cfg(1);
        cfg.n_samples = 5;
        assert!(matches!(
            run_experiment::<f64>(&cfg).unwrap_err(),
            ExperimentError::InvalidConfig(_)
        ));
    }
}
