//! D- and A-family criteria and effect variances.
//!
//! D-family values are log-determinants (maximized); A-family values are
//! traces of (weighted) inverse information matrices (minimized). Non-Bayes
//! families use the full model row `L = (F | Z)` with no prior; Bayes
//! families add `τ⁻²K` to `LᵀL`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{logdet, spd_inverse, Cholesky, LinalgError, Matrix};
use crate::model::{Design, ModelError, ModelMatrices, ModelSpec, DEFAULT_W};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("singular information matrix: {0}")]
    Singular(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    D,
    Ds,
    A,
    As,
    AW,
    BayesD,
    BayesDs,
    BayesA,
    BayesAs,
    BayesAW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::D,
        Family::Ds,
        Family::A,
        Family::As,
        Family::AW,
        Family::BayesD,
        Family::BayesDs,
        Family::BayesA,
        Family::BayesAs,
        Family::BayesAW,
    ];

    pub fn is_d_family(self) -> bool {
        matches!(
            self,
            Family::D | Family::Ds | Family::BayesD | Family::BayesDs
        )
    }

    pub fn is_bayes(self) -> bool {
        matches!(
            self,
            Family::BayesD | Family::BayesDs | Family::BayesA | Family::BayesAs | Family::BayesAW
        )
    }

    /// True for the nuisance-adjusted families (Ds, As and their Bayes forms).
    pub fn is_restricted(self) -> bool {
        matches!(
            self,
            Family::Ds | Family::As | Family::BayesDs | Family::BayesAs
        )
    }

    /// True when the family puts weight `w` on nuisance positions.
    pub fn is_weighted(self) -> bool {
        matches!(
            self,
            Family::As | Family::AW | Family::BayesAs | Family::BayesAW
        )
    }

    pub fn orientation(self) -> Orientation {
        if self.is_d_family() {
            Orientation::Maximize
        } else {
            Orientation::Minimize
        }
    }

    /// Non-Bayes counterpart.
    pub fn plain(self) -> Family {
        match self {
            Family::BayesD => Family::D,
            Family::BayesDs => Family::Ds,
            Family::BayesA => Family::A,
            Family::BayesAs => Family::As,
            Family::BayesAW => Family::AW,
            f => f,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::D => "D",
            Family::Ds => "Ds",
            Family::A => "A",
            Family::As => "As",
            Family::AW => "AW",
            Family::BayesD => "bayes-D",
            Family::BayesDs => "bayes-Ds",
            Family::BayesA => "bayes-A",
            Family::BayesAs => "bayes-As",
            Family::BayesAW => "bayes-AW",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Family::ALL
            .into_iter()
            .find(|f| f.name().replace('-', "").to_ascii_lowercase() == key)
            .ok_or_else(|| format!("unknown criterion '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionConfig {
    pub family: Family,
    /// Nuisance weight for weighted families; `None` takes the model's `w`.
    pub w: Option<f64>,
}

impl CriterionConfig {
    pub fn new(family: Family) -> Self {
        Self { family, w: None }
    }

    pub fn with_w(family: Family, w: f64) -> Self {
        Self { family, w: Some(w) }
    }

    pub fn uses_tau(&self) -> bool {
        self.family.is_bayes()
    }

    /// Effective nuisance weight.
    pub fn weight(&self, spec: &ModelSpec) -> f64 {
        self.w.unwrap_or_else(|| spec.w())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionValue {
    pub family: Family,
    pub value: f64,
    pub orientation: Orientation,
    /// Exact nuisance-adjusted trace of the term block, reported for the
    /// As families next to the weighted surrogate in `value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_trace: Option<f64>,
}

impl CriterionValue {
    /// True when `self` is better than `other` by more than `rel_tol`.
    pub fn better_than(&self, other: &CriterionValue, rel_tol: f64) -> bool {
        is_better(self.orientation, self.value, other.value, rel_tol)
    }
}

/// Strict improvement of `a` over `b` beyond a relative tolerance.
pub fn is_better(orientation: Orientation, a: f64, b: f64, rel_tol: f64) -> bool {
    let slack = rel_tol * a.abs().max(b.abs()).max(1.0);
    match orientation {
        Orientation::Maximize => a > b + slack,
        Orientation::Minimize => a < b - slack,
    }
}

/// Values equal within a relative tolerance.
pub fn is_tied(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0)
}

/// What a search run optimizes: a log-determinant or a weighted trace of
/// `(LᵀL + prior)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub family: Family,
    /// Diagonal added to `LᵀL` (zero for non-Bayes families).
    pub prior: Vec<f64>,
    /// Trace weights for the A family; empty for the D family.
    pub weights: Vec<f64>,
}

impl Objective {
    pub fn new(spec: &ModelSpec, cfg: &CriterionConfig) -> Self {
        let family = cfg.family;
        let prior = if family.is_bayes() {
            spec.prior_diag()
        } else {
            vec![0.0; spec.row_len()]
        };
        let weights = if family.is_d_family() {
            Vec::new()
        } else if family.is_weighted() {
            spec.weight_diag(cfg.weight(spec))
        } else {
            vec![1.0; spec.row_len()]
        };
        Self {
            family,
            prior,
            weights,
        }
    }

    pub fn is_log_det(&self) -> bool {
        self.family.is_d_family()
    }

    pub fn orientation(&self) -> Orientation {
        self.family.orientation()
    }

    pub fn information(&self, l: &Matrix) -> Matrix {
        let mut m = l.gram();
        m.add_diag(&self.prior);
        m
    }

    /// Objective value from a factorized information matrix and its inverse.
    /// Ds families differ from D only by the constant `log|ZᵀZ|`, which is
    /// not included here.
    pub fn value(&self, chol: &Cholesky, inverse: &Matrix) -> f64 {
        if self.is_log_det() {
            chol.logdet()
        } else {
            weighted_trace(inverse, &self.weights)
        }
    }

    /// `D W D` for the A family.
    pub fn dwd(&self, d: &Matrix) -> Option<Matrix> {
        if self.is_log_det() {
            return None;
        }
        let p = d.rows();
        let mut out = Matrix::zeros(p, p);
        for r in 0..p {
            for c in r..p {
                let s: f64 = (0..p)
                    .map(|t| d[(r, t)] * self.weights[t] * d[(t, c)])
                    .sum();
                out[(r, c)] = s;
                out[(c, r)] = s;
            }
        }
        Some(out)
    }
}

pub fn weighted_trace(inverse: &Matrix, weights: &[f64]) -> f64 {
    inverse
        .diagonal()
        .iter()
        .zip(weights)
        .map(|(d, w)| d * w)
        .sum()
}

/// `LᵀL`, plus `τ⁻²K` when `with_prior` is set.
pub fn information_matrix(
    d: &Design,
    spec: &ModelSpec,
    with_prior: bool,
) -> Result<Matrix, CriterionError> {
    let mats = spec.build_matrices(d)?;
    Ok(information_from(&mats, with_prior))
}

pub fn information_from(mats: &ModelMatrices, with_prior: bool) -> Matrix {
    let mut m = mats.l.gram();
    if with_prior {
        m.add_diag(&mats.prior);
    }
    m
}

/// `Fᵀ(I − P_Z)F`, plus the term part of the prior when `with_prior` is set.
pub fn adjusted_term_information(
    mats: &ModelMatrices,
    with_prior: bool,
) -> Result<Matrix, CriterionError> {
    let ztz = mats.z.gram();
    let ztf = mats.z.t_matmul(&mats.f);
    let chol = Cholesky::new(&ztz)?;
    let proj = chol.solve_matrix(&ztf);
    let mut m = mats.f.gram().sub(&ztf.t_matmul(&proj));
    m.symmetrize();
    if with_prior {
        m.add_diag(&mats.prior[..mats.f.cols()]);
    }
    Ok(m)
}

pub fn evaluate(
    d: &Design,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
) -> Result<CriterionValue, CriterionError> {
    let mats = spec.build_matrices(d)?;
    evaluate_matrices(&mats, spec, cfg)
}

pub fn evaluate_matrices(
    mats: &ModelMatrices,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
) -> Result<CriterionValue, CriterionError> {
    let family = cfg.family;
    let bayes = family.is_bayes();
    let m = information_from(mats, bayes);
    let chol = Cholesky::new(&m)?;
    let mut beta_trace = None;
    let value = match family.plain() {
        Family::D => chol.logdet(),
        Family::Ds => chol.logdet() - logdet(&mats.z.gram())?,
        Family::A => chol.inverse().trace(),
        Family::AW => weighted_trace(&chol.inverse(), &spec.weight_diag(cfg.weight(spec))),
        Family::As => {
            let adjusted = adjusted_term_information(mats, bayes)?;
            beta_trace = Some(spd_inverse(&adjusted)?.trace());
            weighted_trace(&chol.inverse(), &spec.weight_diag(cfg.weight(spec)))
        }
        _ => unreachable!("plain() maps onto non-Bayes families"),
    };
    Ok(CriterionValue {
        family,
        value,
        orientation: family.orientation(),
        beta_trace,
    })
}

/// Diagonal of the term block of `(LᵀL)⁻¹` in term order. With `submodel`
/// set, only primary terms are fitted (`L₁ = (F₁ | Z)`).
pub fn effect_variances(
    d: &Design,
    spec: &ModelSpec,
    submodel: bool,
) -> Result<Vec<f64>, CriterionError> {
    let fitted = if submodel {
        spec.submodel()
    } else {
        spec.clone()
    };
    let mats = fitted.build_matrices(d)?;
    let inv = spd_inverse(&mats.l.gram())?;
    Ok(inv.diagonal()[..mats.f.cols()].to_vec())
}

/// Default surrogate weight for the As families.
pub const AS_SURROGATE_W: f64 = DEFAULT_W;
