//! The sequential-residualization estimator.
//!
//! **Model building** fits, on one dataset:
//!
//! 1. a covariate model for the outcome, `M[Z -> Y]`, and the stage-1
//!    residual `Ỹ = Y - M[Z -> Y](Z)`;
//! 2. a covariate model per treatment, `M[Z -> Xi]`, and residuals
//!    `X̃i = Xi - M[Z -> Xi](Z)`;
//! 3. for `i = 1..n-1`: a single-feature model `M[X̃i -> Ỹ]`, after which
//!    the outcome residual advances one stage, and models
//!    `M[X̃i -> X̃j]` for every later treatment `j`, advancing their
//!    residuals likewise; finally `M[X̃n -> Ỹ]` for the last treatment.
//!
//! **Estimation** replays the cascade on a requested `(x, z)`: residualize
//! the treatment values against the covariate models, cascade the
//! cross-treatment corrections, and sum the covariate prediction of the
//! outcome with every per-stage outcome correction.
//!
//! The treatment order is the configured order and is significant in finite
//! samples; [`diagnostics`] surfaces the cross-stage residual correlations
//! that would reveal order sensitivity. Models are fit and residualized on
//! the same rows by default; cross-fitting (out-of-fold residuals) is an
//! opt-in extension.

mod diagnostics;
mod persist;

pub use diagnostics::{diagnostics, DiagnosticsReport, DEFAULT_DIAGNOSTIC_TOLERANCE};
pub use persist::{load_pipeline, save_pipeline, PersistError, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::learn::{self, FeatureMatrix, FittedModel, LearnError, LearnerSpec};
use crate::Real;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("column `{0}` missing from the dataset")]
    MissingColumn(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: LearnError,
    },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{what}: expected {expected} values, got {got}")]
    ArityMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("non-finite intermediate in {0}")]
    NonFinite(String),
    #[error("residual trace does not match this dataset/config: {0}")]
    TraceMismatch(String),
}

/// Learner choice per model role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawLearnerRoles")]
pub struct LearnerRoles {
    pub z_to_y: LearnerSpec,
    pub z_to_x: LearnerSpec,
    pub xtilde_to_ytilde: LearnerSpec,
    pub xtilde_to_xtilde: LearnerSpec,
}

impl LearnerRoles {
    pub fn uniform(spec: LearnerSpec) -> Self {
        LearnerRoles {
            z_to_y: spec.clone(),
            z_to_x: spec.clone(),
            xtilde_to_ytilde: spec.clone(),
            xtilde_to_xtilde: spec,
        }
    }
}

impl Default for LearnerRoles {
    fn default() -> Self {
        LearnerRoles::uniform(LearnerSpec::boosted_trees_default(0))
    }
}

/// Serde surface for roles: a `default` entry plus per-role overrides.
#[derive(Debug, Clone, Deserialize)]
struct RawLearnerRoles {
    #[serde(default)]
    default: Option<LearnerSpec>,
    #[serde(default)]
    z_to_y: Option<LearnerSpec>,
    #[serde(default)]
    z_to_x: Option<LearnerSpec>,
    #[serde(default)]
    xtilde_to_ytilde: Option<LearnerSpec>,
    #[serde(default)]
    xtilde_to_xtilde: Option<LearnerSpec>,
}

impl From<RawLearnerRoles> for LearnerRoles {
    fn from(raw: RawLearnerRoles) -> Self {
        let default = raw
            .default
            .unwrap_or_else(|| LearnerSpec::boosted_trees_default(0));
        LearnerRoles {
            z_to_y: raw.z_to_y.unwrap_or_else(|| default.clone()),
            z_to_x: raw.z_to_x.unwrap_or_else(|| default.clone()),
            xtilde_to_ytilde: raw.xtilde_to_ytilde.unwrap_or_else(|| default.clone()),
            xtilde_to_xtilde: raw.xtilde_to_xtilde.unwrap_or(default),
        }
    }
}

/// What to estimate and with which learners. Treatment order is
/// significant. `covariates = None` means every remaining column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub outcome: String,
    pub treatments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub learners: LearnerRoles,
    /// Use out-of-fold predictions when forming training residuals.
    #[serde(default)]
    pub cross_fit: bool,
}

impl PipelineConfig {
    pub fn new(outcome: impl Into<String>, treatments: Vec<String>) -> Self {
        PipelineConfig {
            outcome: outcome.into(),
            treatments,
            covariates: None,
            learners: LearnerRoles::default(),
            cross_fit: false,
        }
    }

    pub fn with_learners(mut self, roles: LearnerRoles) -> Self {
        self.learners = roles;
        self
    }

    pub fn with_covariates(mut self, covariates: Vec<String>) -> Self {
        self.covariates = Some(covariates);
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.treatments.is_empty() {
            return Err(PipelineError::InvalidConfig("no treatments".into()));
        }
        for (i, t) in self.treatments.iter().enumerate() {
            if self.treatments[..i].contains(t) {
                return Err(PipelineError::InvalidConfig(format!(
                    "duplicate treatment `{t}`"
                )));
            }
            if *t == self.outcome {
                return Err(PipelineError::InvalidConfig(
                    "outcome cannot be a treatment".into(),
                ));
            }
        }
        if let Some(cov) = &self.covariates {
            for (i, c) in cov.iter().enumerate() {
                if cov[..i].contains(c) {
                    return Err(PipelineError::InvalidConfig(format!(
                        "duplicate covariate `{c}`"
                    )));
                }
                if *c == self.outcome || self.treatments.contains(c) {
                    return Err(PipelineError::InvalidConfig(format!(
                        "`{c}` cannot be both a covariate and an outcome/treatment"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Covariates actually used with this dataset: the configured list, or
    /// every remaining column in dataset order.
    pub fn resolved_covariates<F: Real>(
        &self,
        data: &Dataset<F>,
    ) -> Result<Vec<String>, PipelineError> {
        match &self.covariates {
            Some(cov) => Ok(cov.clone()),
            None => Ok(data
                .names()
                .iter()
                .map(|v| v.to_string())
                .filter(|n| *n != self.outcome && !self.treatments.contains(n))
                .collect()),
        }
    }
}

/// Per-stage residual matrices over the training rows: stage `k` holds the
/// treatment residual columns `X̃(k)` and the outcome residual `Ỹ(k)`,
/// for `k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace<F> {
    pub stages: Vec<ResidualStage<F>>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStage<F> {
    /// One column per treatment, configured order.
    pub x_tilde: Vec<Vec<F>>,
    pub y_tilde: Vec<F>,
}

/// The trained model inventory: one covariate model for the outcome, one
/// per treatment, one outcome correction per treatment, and one
/// cross-treatment model per ordered pair `i < j`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainedPipeline<F> {
    config: PipelineConfig,
    covariates: Vec<String>,
    m_z_y: FittedModel<F>,
    m_z_x: Vec<FittedModel<F>>,
    m_xy: Vec<FittedModel<F>>,
    /// `m_xx[i]` holds models for targets `j = i+1..n`.
    m_xx: Vec<Vec<FittedModel<F>>>,
}

impl<F: Real> TrainedPipeline<F> {
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn n_treatments(&self) -> usize {
        self.config.treatments.len()
    }

    /// Every model with a stable label, for inventory checks and
    /// instrumentation.
    pub fn models(&self) -> Vec<(String, &FittedModel<F>)> {
        let t = &self.config.treatments;
        let mut out = vec![("Z->Y".to_string(), &self.m_z_y)];
        for (i, m) in self.m_z_x.iter().enumerate() {
            out.push((format!("Z->{}", t[i]), m));
        }
        for (i, m) in self.m_xy.iter().enumerate() {
            out.push((format!("{}~->Y~", t[i]), m));
        }
        for (i, row) in self.m_xx.iter().enumerate() {
            for (off, m) in row.iter().enumerate() {
                out.push((format!("{}~->{}~", t[i], t[i + 1 + off]), m));
            }
        }
        out
    }

    pub fn model_count(&self) -> usize {
        self.models().len()
    }

    fn z_matrix_for(&self, z_values: &[F]) -> Result<FeatureMatrix<F>, PipelineError> {
        if z_values.len() != self.covariates.len() {
            return Err(PipelineError::ArityMismatch {
                what: "covariates".into(),
                expected: self.covariates.len(),
                got: z_values.len(),
            });
        }
        if self.covariates.is_empty() {
            return Ok(FeatureMatrix::empty(1));
        }
        Ok(FeatureMatrix::from_columns(
            self.covariates.clone(),
            z_values.iter().map(|v| vec![*v]).collect(),
        )?)
    }

    /// The interventional-mean estimate at treatment values `x_values` and
    /// covariate row `z_values`.
    pub fn estimate(&self, x_values: &[F], z_values: &[F]) -> Result<F, PipelineError> {
        let n = self.n_treatments();
        if x_values.len() != n {
            return Err(PipelineError::ArityMismatch {
                what: "treatments".into(),
                expected: n,
                got: x_values.len(),
            });
        }
        let z_row = self.z_matrix_for(z_values)?;

        // Stage-1 treatment residuals.
        let mut x_tilde = Vec::with_capacity(n);
        for (i, model) in self.m_z_x.iter().enumerate() {
            let pred = model.predict(&z_row)?[0];
            x_tilde.push(x_values[i] - pred);
        }
        // Cascade: later residuals lose their projection on earlier ones.
        for i in 0..n.saturating_sub(1) {
            let xi = single(&self.config.treatments[i], x_tilde[i])?;
            for j in i + 1..n {
                let pred = self.m_xx[i][j - i - 1].predict(&xi)?[0];
                x_tilde[j] = x_tilde[j] - pred;
            }
        }
        // Corollary sum: covariate prediction plus per-stage corrections.
        let mut estimate = self.m_z_y.predict(&z_row)?[0];
        for i in 0..n {
            let xi = single(&self.config.treatments[i], x_tilde[i])?;
            estimate += self.m_xy[i].predict(&xi)?[0];
        }
        if !estimate.is_finite() {
            return Err(PipelineError::NonFinite("estimate".into()));
        }
        Ok(estimate)
    }

    /// Row-wise [`Self::estimate`], order preserving.
    pub fn estimate_batch(
        &self,
        requests: &[(Vec<F>, Vec<F>)],
    ) -> Result<Vec<F>, PipelineError> {
        requests
            .iter()
            .map(|(x, z)| self.estimate(x, z))
            .collect()
    }
}

fn single<F: Real>(name: &str, value: F) -> Result<FeatureMatrix<F>, PipelineError> {
    Ok(FeatureMatrix::single(name, vec![value])?)
}

/// Model building: fit the whole inventory on `data` and return it together
/// with the per-stage residual trace.
pub fn build<F: Real>(
    data: &Dataset<F>,
    cfg: &PipelineConfig,
) -> Result<(TrainedPipeline<F>, ResidualTrace<F>), PipelineError> {
    cfg.validate()?;
    for spec in [
        &cfg.learners.z_to_y,
        &cfg.learners.z_to_x,
        &cfg.learners.xtilde_to_ytilde,
        &cfg.learners.xtilde_to_xtilde,
    ] {
        spec.validate()?;
    }
    let covariates = cfg.resolved_covariates(data)?;
    for name in std::iter::once(&cfg.outcome)
        .chain(cfg.treatments.iter())
        .chain(covariates.iter())
    {
        if !data.has_column(name) {
            return Err(PipelineError::MissingColumn(name.clone()));
        }
    }
    let n_rows = data.n_rows();
    let n = cfg.treatments.len();

    let z_matrix = if covariates.is_empty() {
        FeatureMatrix::empty(n_rows)
    } else {
        FeatureMatrix::from_columns(
            covariates.clone(),
            covariates
                .iter()
                .map(|c| data.column(c).map(|s| s.to_vec()))
                .collect::<Result<_, _>>()
                .map_err(|e: crate::data::DataError| {
                    PipelineError::MissingColumn(e.to_string())
                })?,
        )?
    };

    let fit_role = |spec: &LearnerSpec,
                    x: &FeatureMatrix<F>,
                    y: &[F],
                    stage: String|
     -> Result<(FittedModel<F>, Vec<F>), PipelineError> {
        let result = if cfg.cross_fit {
            let folds = spec.cross_fit_folds.unwrap_or(5);
            learn::fit_with_oof(spec, x, y, folds)
        } else {
            learn::fit(spec, x, y).and_then(|m| {
                let preds = m.predict(x)?;
                Ok((m, preds))
            })
        };
        result.map_err(|source| PipelineError::Stage { stage, source })
    };

    // Covariate stage.
    let y_col = data.column(&cfg.outcome).expect("checked").to_vec();
    let (m_z_y, y_hat) = fit_role(&cfg.learners.z_to_y, &z_matrix, &y_col, "Z->Y".into())?;
    let mut y_tilde: Vec<F> = y_col.iter().zip(&y_hat).map(|(y, p)| *y - *p).collect();

    let mut m_z_x = Vec::with_capacity(n);
    let mut x_tilde: Vec<Vec<F>> = Vec::with_capacity(n);
    for t in &cfg.treatments {
        let x_col = data.column(t).expect("checked").to_vec();
        let (model, x_hat) =
            fit_role(&cfg.learners.z_to_x, &z_matrix, &x_col, format!("Z->{t}"))?;
        m_z_x.push(model);
        x_tilde.push(x_col.iter().zip(&x_hat).map(|(x, p)| *x - *p).collect());
    }

    let mut trace = ResidualTrace {
        stages: vec![ResidualStage {
            x_tilde: x_tilde.clone(),
            y_tilde: y_tilde.clone(),
        }],
        n_rows,
    };

    // Treatment cascade.
    let mut m_xy = Vec::with_capacity(n);
    let mut m_xx: Vec<Vec<FittedModel<F>>> = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let xi_name = &cfg.treatments[i];
        let xi = FeatureMatrix::single(xi_name.clone(), x_tilde[i].clone())?;
        let (model, y_pred) = fit_role(
            &cfg.learners.xtilde_to_ytilde,
            &xi,
            &y_tilde,
            format!("{xi_name}~->Y~"),
        )?;
        m_xy.push(model);
        if i + 1 == n {
            break;
        }
        for (t, p) in y_tilde.iter_mut().zip(&y_pred) {
            *t = *t - *p;
        }
        let mut row = Vec::with_capacity(n - i - 1);
        for j in i + 1..n {
            let xj_name = &cfg.treatments[j];
            let (model, x_pred) = fit_role(
                &cfg.learners.xtilde_to_xtilde,
                &xi,
                &x_tilde[j],
                format!("{xi_name}~->{xj_name}~"),
            )?;
            for (t, p) in x_tilde[j].iter_mut().zip(&x_pred) {
                *t = *t - *p;
            }
            row.push(model);
        }
        m_xx.push(row);
        trace.stages.push(ResidualStage {
            x_tilde: x_tilde.clone(),
            y_tilde: y_tilde.clone(),
        });
    }

    let pipeline = TrainedPipeline {
        config: cfg.clone(),
        covariates,
        m_z_y,
        m_z_x,
        m_xy,
        m_xx,
    };
    Ok((pipeline, trace))
}
