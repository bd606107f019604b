//! Empirical checks of the residual-independence claims the cascade relies
//! on: every per-stage residual should be mean-zero and uncorrelated with
//! the covariates and with the other treatments' final residuals.

use serde::Serialize;

use crate::data::Dataset;
use crate::{real, Real};

use super::{PipelineConfig, PipelineError, ResidualTrace};

/// Flagging tolerance that exact least-squares fits meet comfortably.
pub const DEFAULT_DIAGNOSTIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport<F> {
    pub tolerance: F,
    /// Mean of each treatment's final-stage residual, by treatment name.
    pub treatment_residual_means: Vec<(String, F)>,
    /// Mean of the outcome residual at every stage.
    pub outcome_residual_means: Vec<(usize, F)>,
    /// Correlation of each final treatment residual with each covariate.
    pub covariate_correlations: Vec<(String, String, F)>,
    /// Correlation between final residuals of treatment pairs `i < j`.
    pub cross_stage_correlations: Vec<(String, String, F)>,
    /// Labels of every quantity whose magnitude exceeded the tolerance.
    pub flagged: Vec<String>,
}

impl<F: Real> DiagnosticsReport<F> {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }

    /// Largest reported magnitude.
    pub fn worst(&self) -> F {
        let mut worst = F::zero();
        for (_, v) in &self.treatment_residual_means {
            worst = worst.max(v.abs());
        }
        for (_, v) in &self.outcome_residual_means {
            worst = worst.max(v.abs());
        }
        for (_, _, v) in self
            .covariate_correlations
            .iter()
            .chain(self.cross_stage_correlations.iter())
        {
            worst = worst.max(v.abs());
        }
        worst
    }
}

/// Compute the report for a trace produced by [`super::build`] on `data`
/// under `cfg`.
pub fn diagnostics<F: Real>(
    trace: &ResidualTrace<F>,
    data: &Dataset<F>,
    cfg: &PipelineConfig,
    tolerance: F,
) -> Result<DiagnosticsReport<F>, PipelineError> {
    let n = cfg.treatments.len();
    if trace.stages.len() != n {
        return Err(PipelineError::TraceMismatch(format!(
            "{} stages for {} treatments",
            trace.stages.len(),
            n
        )));
    }
    if trace.n_rows != data.n_rows() {
        return Err(PipelineError::TraceMismatch(format!(
            "trace has {} rows, dataset {}",
            trace.n_rows,
            data.n_rows()
        )));
    }
    let covariates = cfg.resolved_covariates(data)?;
    let mut flagged = Vec::new();

    // Final residual of treatment i is its column at stage i (stages are
    // 0-indexed here; the column is frozen from that stage on).
    let final_resid = |i: usize| -> &[F] { &trace.stages[i].x_tilde[i] };

    let mut treatment_residual_means = Vec::with_capacity(n);
    for (i, t) in cfg.treatments.iter().enumerate() {
        let m = mean(final_resid(i));
        if m.abs() > tolerance {
            flagged.push(format!("mean(residual {t})"));
        }
        treatment_residual_means.push((t.clone(), m));
    }

    let mut outcome_residual_means = Vec::with_capacity(n);
    for (k, stage) in trace.stages.iter().enumerate() {
        let m = mean(&stage.y_tilde);
        if m.abs() > tolerance {
            flagged.push(format!("mean(outcome residual, stage {})", k + 1));
        }
        outcome_residual_means.push((k + 1, m));
    }

    let mut covariate_correlations = Vec::new();
    for (i, t) in cfg.treatments.iter().enumerate() {
        for c in &covariates {
            let col = data
                .column(c)
                .map_err(|_| PipelineError::MissingColumn(c.clone()))?;
            let r = correlation(final_resid(i), col);
            if r.abs() > tolerance {
                flagged.push(format!("corr(residual {t}, {c})"));
            }
            covariate_correlations.push((t.clone(), c.clone(), r));
        }
    }

    let mut cross_stage_correlations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let r = correlation(final_resid(i), &trace.stages[j].x_tilde[j]);
            if r.abs() > tolerance {
                flagged.push(format!(
                    "corr(residual {}, residual {})",
                    cfg.treatments[i], cfg.treatments[j]
                ));
            }
            cross_stage_correlations.push((
                cfg.treatments[i].clone(),
                cfg.treatments[j].clone(),
                r,
            ));
        }
    }

    Ok(DiagnosticsReport {
        tolerance,
        treatment_residual_means,
        outcome_residual_means,
        covariate_correlations,
        cross_stage_correlations,
        flagged,
    })
}

fn mean<F: Real>(v: &[F]) -> F {
    let sum: F = v.iter().copied().sum();
    sum / real(v.len() as f64)
}

/// Pearson correlation; zero-variance inputs report zero (no measurable
/// linear association).
fn correlation<F: Real>(a: &[F], b: &[F]) -> F {
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = F::zero();
    let mut va = F::zero();
    let mut vb = F::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = *x - ma;
        let dy = *y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    let floor = F::epsilon() * real(a.len() as f64);
    if va <= floor || vb <= floor {
        return F::zero();
    }
    cov / (va.sqrt() * vb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VariableId;
    use crate::learn::LearnerSpec;
    use crate::pipeline::{build, LearnerRoles};
    use crate::rng::Rng;

    fn ds(names: &[&str], cols: Vec<Vec<f64>>) -> Dataset<f64> {
        Dataset::from_columns(
            names.iter().map(|n| VariableId::new(*n).unwrap()).collect(),
            cols,
        )
        .unwrap()
    }

    fn confounded_data(seed: u64, n: usize) -> Dataset<f64> {
        let mut rng = Rng::from_seed(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let x1: Vec<f64> = z.iter().map(|z| 0.8 * z + rng.normal(0.0, 0.6)).collect();
        let x2: Vec<f64> = z
            .iter()
            .zip(x1.iter())
            .map(|(z, x1)| -0.4 * z + 0.5 * x1 + rng.normal(0.0, 0.6))
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.5 * x1[i] - 0.7 * x2[i] + 0.9 * z[i] + rng.normal(0.0, 0.3))
            .collect();
        ds(&["Z", "X1", "X2", "Y"], vec![z, x1, x2, y])
    }

    #[test]
    fn least_squares_diagnostics_are_clean() {
        let data = confounded_data(1, 800);
        let cfg = crate::pipeline::PipelineConfig::new(
            "Y",
            vec!["X1".into(), "X2".into()],
        )
        .with_learners(LearnerRoles::uniform(LearnerSpec::least_squares(1)));
        let (_, trace) = build(&data, &cfg).unwrap();
        let report = diagnostics(&trace, &data, &cfg, 1e-6).unwrap();
        assert!(report.is_clean(), "flags: {:?}", report.flagged);
        assert!(report.worst() < 1e-6, "worst {}", report.worst());
    }

    #[test]
    fn mean_learner_on_independent_columns_centers_exactly() {
        let mut rng = Rng::from_seed(2);
        let n = 400;
        let z: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let data = ds(&["Z", "X", "Y"], vec![z, x, y]);
        let cfg = crate::pipeline::PipelineConfig::new("Y", vec!["X".into()])
            .with_learners(LearnerRoles::uniform(LearnerSpec::mean()));
        let (_, trace) = build(&data, &cfg).unwrap();
        let report = diagnostics(&trace, &data, &cfg, 1e-9).unwrap();
        for (_, m) in &report.treatment_residual_means {
            assert!(m.abs() < 1e-10);
        }
    }

    #[test]
    fn misconfigured_constant_learner_raises_flags() {
        let data = confounded_data(3, 800);
        let cfg = crate::pipeline::PipelineConfig::new(
            "Y",
            vec!["X1".into(), "X2".into()],
        )
        .with_learners(LearnerRoles::uniform(LearnerSpec::mean()));
        let (_, trace) = build(&data, &cfg).unwrap();
        let report = diagnostics(&trace, &data, &cfg, 1e-3).unwrap();
        assert!(!report.is_clean());
        assert!(report
            .flagged
            .iter()
            .any(|f| f.contains("corr(residual X1, Z)")));
    }

    #[test]
    fn trace_mismatch_is_detected() {
        let data = confounded_data(4, 100);
        let cfg = crate::pipeline::PipelineConfig::new("Y", vec!["X1".into()])
            .with_learners(LearnerRoles::uniform(LearnerSpec::least_squares(1)));
        let (_, trace) = build(&data, &cfg).unwrap();
        let other = confounded_data(4, 50);
        assert!(matches!(
            diagnostics(&trace, &other, &cfg, 1e-6).unwrap_err(),
            PipelineError::TraceMismatch(_)
        ));
    }
}
