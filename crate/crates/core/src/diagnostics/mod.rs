//! Alias matrices, bias/variance summaries, design comparison and t-test
//! power.

pub mod power;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::criteria::{
    effect_variances, evaluate, CriterionConfig, CriterionError, CriterionValue, Family,
};
use crate::matrix::{dot, Cholesky, LinalgError, Matrix};
use crate::model::{Design, ModelError, ModelSpec, TermKind};

pub use power::{noncentral_t_cdf, two_sided_t_power};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error("no residual degrees of freedom: {n} runs, {params} fitted parameters")]
    NoResidualDf { n: usize, params: usize },
    #[error("invalid power query: {0}")]
    InvalidQuery(String),
}

impl From<LinalgError> for DiagnosticsError {
    fn from(e: LinalgError) -> Self {
        DiagnosticsError::Criterion(CriterionError::Singular(e))
    }
}

impl From<ModelError> for DiagnosticsError {
    fn from(e: ModelError) -> Self {
        DiagnosticsError::Criterion(CriterionError::Model(e))
    }
}

/// `(L₁ᵀL₁)⁻¹L₁ᵀF₂` with rows for primary terms then nuisance parameters
/// and one column per potential term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AliasMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl AliasMatrix {
    /// `tr(AᵀA)`, the sum of squared entries.
    pub fn tr_ata(&self) -> f64 {
        self.entries.iter().flatten().map(|a| a * a).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn row_max_abs(&self, r: usize) -> f64 {
        self.entries[r].iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

fn nuisance_labels(spec: &ModelSpec) -> Vec<String> {
    match spec.b() {
        1 if matches!(spec.nuisance(), crate::model::Nuisance::Intercept) => {
            vec!["intercept".into()]
        }
        b => (1..=b).map(|h| format!("block{h}")).collect(),
    }
}

pub fn alias_matrix(d: &Design, spec: &ModelSpec) -> Result<AliasMatrix, DiagnosticsError> {
    let mats = spec.build_matrices(d)?;
    let mut l1_cols = spec.primary_cols();
    l1_cols.extend(spec.nuisance_cols());
    let pot = spec.potential_cols();
    let labels = spec.term_labels();
    let mut row_labels: Vec<String> = spec
        .primary_cols()
        .iter()
        .map(|&t| labels[t].clone())
        .collect();
    row_labels.extend(nuisance_labels(spec));
    let col_labels: Vec<String> = pot.iter().map(|&t| labels[t].clone()).collect();
    if pot.is_empty() {
        return Ok(AliasMatrix {
            entries: vec![Vec::new(); row_labels.len()],
            row_labels,
            col_labels,
        });
    }
    let l1 = mats.l.select_cols(&l1_cols);
    let f2 = mats.l.select_cols(&pot);
    let chol = Cholesky::new(&l1.gram())?;
    let a = chol.solve_matrix(&l1.t_matmul(&f2));
    let entries = (0..a.rows()).map(|r| a.row(r).to_vec()).collect();
    Ok(AliasMatrix {
        row_labels,
        col_labels,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct BiasVarianceMetrics {
    /// Sum of main-effect variances under the main-effect model.
    pub A_M: f64,
    /// Sum of squared off-diagonal entries of `F_QᵀF_Q`.
    pub SS_Q: f64,
    /// Sum of squared entries of `F_MᵀF_I` (main-effect columns only).
    pub SS_MI: f64,
}

/// `SS_Q` and `SS_MI` from the model's quadratic and interaction columns.
pub fn aliasing_sums(d: &Design, spec: &ModelSpec) -> Result<(f64, f64), DiagnosticsError> {
    let mats = spec.build_matrices(d)?;
    let cols = |kind| -> Vec<Vec<f64>> {
        spec.cols_of_kind(kind)
            .iter()
            .map(|&c| mats.l.column(c))
            .collect()
    };
    let (fm, fi, fq) = (
        cols(TermKind::Main),
        cols(TermKind::Interaction),
        cols(TermKind::Quadratic),
    );
    let mut ss_q = 0.0;
    for a in 0..fq.len() {
        for b in 0..fq.len() {
            if a != b {
                ss_q += dot(&fq[a], &fq[b]).powi(2);
            }
        }
    }
    let ss_mi = fm
        .iter()
        .flat_map(|m| fi.iter().map(move |i| dot(m, i).powi(2)))
        .sum();
    Ok((ss_q, ss_mi))
}

pub fn bias_variance_metrics(
    d: &Design,
    spec: &ModelSpec,
) -> Result<BiasVarianceMetrics, DiagnosticsError> {
    let main = spec.main_effect_submodel();
    let a_m = effect_variances(d, &main, false)?.iter().sum();
    let (ss_q, ss_mi) = aliasing_sums(d, spec)?;
    Ok(BiasVarianceMetrics {
        A_M: a_m,
        SS_Q: ss_q,
        SS_MI: ss_mi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerQuery {
    /// 0-based index into the primary terms.
    pub effect_index: usize,
    pub beta_over_sigma: f64,
    pub alpha: f64,
}

impl PowerQuery {
    pub fn new(effect_index: usize, beta_over_sigma: f64) -> Self {
        Self {
            effect_index,
            beta_over_sigma,
            alpha: 0.05,
        }
    }
}

/// Residual degrees of freedom of the primary-term fit.
pub fn residual_df(d: &Design, spec: &ModelSpec) -> usize {
    d.n().saturating_sub(spec.p() + spec.b())
}

/// Power of the two-sided level-α t test of one primary effect, fitted
/// with the primary-term model.
pub fn t_test_power(d: &Design, spec: &ModelSpec, q: &PowerQuery) -> Result<f64, DiagnosticsError> {
    if !(q.alpha > 0.0 && q.alpha < 1.0) {
        return Err(DiagnosticsError::InvalidQuery(format!(
            "alpha {} is outside (0, 1)",
            q.alpha
        )));
    }
    if q.effect_index >= spec.p() {
        return Err(DiagnosticsError::InvalidQuery(format!(
            "effect {} does not exist; the model has {} primary terms",
            q.effect_index + 1,
            spec.p()
        )));
    }
    let df = residual_df(d, spec);
    if df < 1 {
        return Err(DiagnosticsError::NoResidualDf {
            n: d.n(),
            params: spec.p() + spec.b(),
        });
    }
    let var = effect_variances(d, spec, true)?[q.effect_index];
    let delta = q.beta_over_sigma / var.sqrt();
    Ok(two_sided_t_power(delta, df as f64, q.alpha))
}

/// Criterion values for every family that can be evaluated on the design.
pub fn criterion_values(d: &Design, spec: &ModelSpec) -> BTreeMap<String, CriterionValue> {
    Family::ALL
        .iter()
        .filter(|f| !f.is_bayes() || spec.has_potential_terms())
        .filter_map(|&f| {
            evaluate(d, spec, &CriterionConfig::new(f))
                .ok()
                .map(|v| (f.name().to_string(), v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct DiagnosticsReport {
    pub term_labels: Vec<String>,
    /// Primary-effect variances from the primary-term fit.
    pub variances: Vec<f64>,
    pub alias: AliasMatrix,
    pub tr_ata: f64,
    pub A_M: f64,
    pub SS_Q: f64,
    pub SS_MI: f64,
    pub criterion_values: BTreeMap<String, CriterionValue>,
}

pub fn diagnose(d: &Design, spec: &ModelSpec) -> Result<DiagnosticsReport, DiagnosticsError> {
    let variances = effect_variances(d, spec, true)?;
    let alias = alias_matrix(d, spec)?;
    let metrics = bias_variance_metrics(d, spec)?;
    let labels = spec.term_labels();
    Ok(DiagnosticsReport {
        term_labels: spec
            .primary_cols()
            .iter()
            .map(|&t| labels[t].clone())
            .collect(),
        variances,
        tr_ata: alias.tr_ata(),
        alias,
        A_M: metrics.A_M,
        SS_Q: metrics.SS_Q,
        SS_MI: metrics.SS_MI,
        criterion_values: criterion_values(d, spec),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub id: String,
    /// Ascending primary-effect variances, or the error that prevented them.
    pub sorted_variances: Result<Vec<f64>, String>,
    pub criterion_values: BTreeMap<String, CriterionValue>,
    pub tr_ata: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedDifference {
    pub first: String,
    pub second: String,
    /// `first[r] − second[r]` over the sorted variances.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub entries: Vec<ComparisonEntry>,
    pub paired: Vec<PairedDifference>,
}

/// Sorted variances, criterion values and `tr(AᵀA)` per design, plus
/// paired differences of sorted variances for every ordered pair in input
/// order.
pub fn compare_designs(designs: &[(String, Design)], spec: &ModelSpec) -> Comparison {
    let entries: Vec<ComparisonEntry> = designs
        .iter()
        .map(|(id, d)| {
            let sorted_variances = effect_variances(d, spec, true)
                .map(|mut v| {
                    v.sort_by(f64::total_cmp);
                    v
                })
                .map_err(|e| e.to_string());
            ComparisonEntry {
                id: id.clone(),
                sorted_variances,
                criterion_values: criterion_values(d, spec),
                tr_ata: alias_matrix(d, spec).ok().map(|a| a.tr_ata()),
            }
        })
        .collect();
    let mut paired = Vec::new();
    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            if let (Ok(va), Ok(vb)) = (&entries[a].sorted_variances, &entries[b].sorted_variances) {
                paired.push(PairedDifference {
                    first: entries[a].id.clone(),
                    second: entries[b].id.clone(),
                    differences: va.iter().zip(vb).map(|(x, y)| x - y).collect(),
                });
            }
        }
    }
    Comparison { entries, paired }
}

/// Least-squares fit of `y` on the primary-term model `L₁ = (F₁ | Z)`.
pub fn fit_submodel(d: &Design, spec: &ModelSpec, y: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let mats = spec.build_matrices(d)?;
    let mut cols = spec.primary_cols();
    cols.extend(spec.nuisance_cols());
    let l1 = mats.l.select_cols(&cols);
    let rhs = l1.transpose().mul_vec(y);
    Ok(Cholesky::new(&l1.gram())?.solve(&rhs))
}

/// Dense matrix view of an alias matrix (for tests and numeric use).
pub fn alias_as_matrix(a: &AliasMatrix) -> Option<Matrix> {
    if a.col_labels.is_empty() {
        None
    } else {
        Some(Matrix::from_rows(&a.entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FactorDomain, Nuisance, Term, DEFAULT_W};

    fn full_factorial3() -> Design {
        let mut rows = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                for c in [-1.0, 1.0] {
                    rows.push([a, b, c]);
                }
            }
        }
        Design::from_rows(&rows)
    }

    fn spec_with_potential_12() -> ModelSpec {
        let terms = vec![
            Term::main(0),
            Term::main(1),
            Term::main(2),
            Term::interaction(&[0, 1]).unwrap(),
        ];
        ModelSpec::new(
            vec![FactorDomain::TwoLevel; 3],
            terms,
            vec![true, true, true, false],
            vec![0.0, 0.0, 0.0, 1.0],
            Nuisance::Intercept,
            DEFAULT_W,
        )
        .unwrap()
    }

    #[test]
    fn orthogonal_alias_column_is_zero() {
        let a = alias_matrix(&full_factorial3(), &spec_with_potential_12()).unwrap();
        assert_eq!(a.entries.len(), 4);
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(a.tr_ata(), 0.0);
        assert_eq!(a.col_labels, ["x1x2"]);
    }

    #[test]
    fn full_factorial_metrics() {
        let m = bias_variance_metrics(&full_factorial3(), &spec_with_potential_12()).unwrap();
        assert!((m.A_M - 3.0 / 8.0).abs() < 1e-14);
        assert_eq!(m.SS_Q, 0.0);
        assert_eq!(m.SS_MI, 0.0);
    }

    #[test]
    fn power_query_validation() {
        let spec = ModelSpec::main_effects(vec![FactorDomain::TwoLevel; 3]).unwrap();
        let d = full_factorial3();
        assert!(t_test_power(&d, &spec, &PowerQuery::new(5, 1.0)).is_err());
        let mut q = PowerQuery::new(0, 1.0);
        q.alpha = 1.5;
        assert!(t_test_power(&d, &spec, &q).is_err());
        let sat = Design::from_rows(&[
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]);
        assert!(matches!(
            t_test_power(&sat, &spec, &PowerQuery::new(0, 1.0)),
            Err(DiagnosticsError::NoResidualDf { .. })
        ));
    }

    #[test]
    fn identical_designs_have_zero_differences() {
        let spec = ModelSpec::main_effects(vec![FactorDomain::TwoLevel; 3]).unwrap();
        let d = full_factorial3();
        let c = compare_designs(&[("a".into(), d.clone()), ("b".into(), d)], &spec);
        assert_eq!(c.paired.len(), 1);
        assert!(c.paired[0].differences.iter().all(|&x| x == 0.0));
    }
}
