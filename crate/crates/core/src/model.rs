//! Factors, model terms and the model matrices built from a design.
//!
//! A model row is laid out as `l(x) = (f(x) | z)`: the term values in term
//! order followed by the nuisance indicators. Term order is canonical: main
//! effects by factor, then interactions by order and lexicographically, then
//! pure quadratics by factor.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Default nuisance weight for the weighted A criteria.
pub const DEFAULT_W: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("setting {value} of factor {factor} (run {run}) is outside its {domain} domain")]
    DomainViolation {
        run: usize,
        factor: usize,
        value: f64,
        domain: FactorDomain,
    },
    #[error("invalid term {0}")]
    InvalidTerm(String),
    #[error("inconsistent model specification: {0}")]
    InconsistentSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorDomain {
    #[serde(rename = "2level")]
    TwoLevel,
    #[serde(rename = "3level")]
    ThreeLevel,
    #[serde(rename = "continuous")]
    Continuous,
}

impl FactorDomain {
    pub fn admits(self, x: f64) -> bool {
        match self {
            FactorDomain::TwoLevel => x == 1.0 || x == -1.0,
            FactorDomain::ThreeLevel => x == 1.0 || x == -1.0 || x == 0.0,
            FactorDomain::Continuous => (-1.0..=1.0).contains(&x),
        }
    }

    /// Finite level set, or `None` for a continuous factor.
    pub fn levels(self) -> Option<&'static [f64]> {
        match self {
            FactorDomain::TwoLevel => Some(&[-1.0, 1.0]),
            FactorDomain::ThreeLevel => Some(&[-1.0, 0.0, 1.0]),
            FactorDomain::Continuous => None,
        }
    }
}

impl fmt::Display for FactorDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorDomain::TwoLevel => "2level",
            FactorDomain::ThreeLevel => "3level",
            FactorDomain::Continuous => "continuous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Main,
    Interaction,
    Quadratic,
}

/// A model term: a sorted multiset of 0-based factor indices. `{j}` is a
/// main effect, `{j, j'}` with distinct factors an interaction and `{j, j}`
/// a pure quadratic.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Term(Vec<usize>);

impl Term {
    pub fn main(j: usize) -> Self {
        Term(vec![j])
    }

    pub fn quadratic(j: usize) -> Self {
        Term(vec![j, j])
    }

    /// Interaction of distinct factors (order ≥ 2).
    pub fn interaction(factors: &[usize]) -> Result<Self, ModelError> {
        let t = Term::from_factors(factors)?;
        if t.kind() != TermKind::Interaction {
            return Err(ModelError::InvalidTerm(format!(
                "{t} is not an interaction"
            )));
        }
        Ok(t)
    }

    /// Any valid term. Repeated factors are only allowed as `{j, j}`.
    pub fn from_factors(factors: &[usize]) -> Result<Self, ModelError> {
        let mut f = factors.to_vec();
        f.sort_unstable();
        if f.is_empty() {
            return Err(ModelError::InvalidTerm("empty term".into()));
        }
        let has_repeat = f.windows(2).any(|w| w[0] == w[1]);
        if has_repeat && f.len() != 2 {
            return Err(ModelError::InvalidTerm(format!(
                "{:?}: only pure quadratics may repeat a factor",
                f.iter().map(|j| j + 1).collect::<Vec<_>>()
            )));
        }
        Ok(Term(f))
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn kind(&self) -> TermKind {
        match self.0.as_slice() {
            [_] => TermKind::Main,
            [a, b] if a == b => TermKind::Quadratic,
            _ => TermKind::Interaction,
        }
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&j| x[j]).product()
    }

    /// Product of the other coordinates when the term is linear in `j`.
    fn multiplier_without(&self, j: usize, x: &[f64]) -> f64 {
        self.0.iter().filter(|&&f| f != j).map(|&f| x[f]).product()
    }

    fn canonical_cmp(&self, other: &Term) -> Ordering {
        self.kind()
            .cmp(&other.kind())
            .then(self.order().cmp(&other.order()))
            .then(self.0.cmp(&other.0))
    }

    /// 1-based label such as `x1`, `x1x3` or `x2^2`.
    pub fn label(&self) -> String {
        match self.kind() {
            TermKind::Quadratic => format!("x{}^2", self.0[0] + 1),
            _ => self.0.iter().map(|j| format!("x{}", j + 1)).collect(),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Nuisance {
    Intercept,
    /// Consecutive block sizes; runs are assigned to blocks in order unless
    /// the design carries explicit block labels.
    Blocks(Vec<usize>),
}

impl Nuisance {
    pub fn count(&self) -> usize {
        match self {
            Nuisance::Intercept => 1,
            Nuisance::Blocks(sizes) => sizes.len(),
        }
    }

    /// Block label per run for an `n`-run design.
    pub fn default_assignment(&self, n: usize) -> Option<Vec<usize>> {
        match self {
            Nuisance::Intercept => None,
            Nuisance::Blocks(sizes) => {
                let mut out = Vec::with_capacity(n);
                for (b, &s) in sizes.iter().enumerate() {
                    out.extend(std::iter::repeat_n(b, s));
                }
                Some(out)
            }
        }
    }
}

/// Which terms a criterion treats as primary and which as potential, plus
/// the nuisance structure and prior precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    k: usize,
    domains: Vec<FactorDomain>,
    order: usize,
    terms: Vec<Term>,
    primary: Vec<bool>,
    nuisance: Nuisance,
    tau2_inv: Vec<f64>,
    w: f64,
}

impl ModelSpec {
    /// Validates and canonicalizes a model. `primary[t]` flags term `t`;
    /// `tau2_inv[t]` is ignored for primary terms.
    pub fn new(
        domains: Vec<FactorDomain>,
        terms: Vec<Term>,
        primary: Vec<bool>,
        tau2_inv: Vec<f64>,
        nuisance: Nuisance,
        w: f64,
    ) -> Result<Self, ModelError> {
        let k = domains.len();
        if k == 0 {
            return Err(ModelError::InconsistentSpec(
                "model needs at least one factor".into(),
            ));
        }
        if primary.len() != terms.len() || tau2_inv.len() != terms.len() {
            return Err(ModelError::InconsistentSpec(
                "per-term flags must match the term list".into(),
            ));
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(ModelError::InconsistentSpec(format!(
                "w must be positive, got {w}"
            )));
        }
        let mut rows: Vec<(Term, bool, f64)> = Vec::with_capacity(terms.len());
        for ((t, p), tau) in terms.into_iter().zip(primary).zip(tau2_inv) {
            if let Some(&j) = t.factors().iter().find(|&&j| j >= k) {
                return Err(ModelError::InvalidTerm(format!(
                    "{t} uses factor {} but k = {k}",
                    j + 1
                )));
            }
            if t.kind() == TermKind::Quadratic && domains[t.factors()[0]] == FactorDomain::TwoLevel
            {
                return Err(ModelError::InvalidTerm(format!(
                    "{t}: quadratic term on a two-level factor"
                )));
            }
            if !tau.is_finite() || tau < 0.0 {
                return Err(ModelError::InconsistentSpec(format!(
                    "prior precision for {t} must be finite and non-negative"
                )));
            }
            if rows.iter().any(|(u, _, _)| *u == t) {
                return Err(ModelError::InvalidTerm(format!("duplicate term {t}")));
            }
            rows.push((t, p, if p { 0.0 } else { tau }));
        }
        for j in 0..k {
            if !rows.iter().any(|(t, _, _)| *t == Term::main(j)) {
                return Err(ModelError::InconsistentSpec(format!(
                    "main effect of x{} is missing",
                    j + 1
                )));
            }
        }
        rows.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        let order = rows
            .iter()
            .filter(|(t, _, _)| t.kind() != TermKind::Quadratic)
            .map(|(t, _, _)| t.order())
            .max()
            .unwrap_or(1);
        if let Nuisance::Blocks(sizes) = &nuisance {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(ModelError::InconsistentSpec(
                    "every block must hold at least one run".into(),
                ));
            }
        }
        let (terms, rest): (Vec<Term>, Vec<(bool, f64)>) =
            rows.into_iter().map(|(t, p, tau)| (t, (p, tau))).unzip();
        let (primary, tau2_inv) = rest.into_iter().unzip();
        Ok(Self {
            k,
            domains,
            order,
            terms,
            primary,
            nuisance,
            tau2_inv,
            w,
        })
    }

    /// Main-effect model with an intercept, every term primary.
    pub fn main_effects(domains: Vec<FactorDomain>) -> Result<Self, ModelError> {
        let k = domains.len();
        let terms: Vec<Term> = (0..k).map(Term::main).collect();
        let n = terms.len();
        Self::new(
            domains,
            terms,
            vec![true; n],
            vec![0.0; n],
            Nuisance::Intercept,
            DEFAULT_W,
        )
    }

    /// Main effects plus every interaction up to `order`; interactions are
    /// potential terms with precision `tau2_inv` when `potential` is set.
    pub fn interactions(
        domains: Vec<FactorDomain>,
        order: usize,
        potential: bool,
        tau2_inv: f64,
    ) -> Result<Self, ModelError> {
        let k = domains.len();
        let mut terms: Vec<Term> = (0..k).map(Term::main).collect();
        terms.extend(interaction_terms(k, order));
        let primary: Vec<bool> = terms.iter().map(|t| !potential || t.order() == 1).collect();
        let tau = vec![tau2_inv; terms.len()];
        Self::new(domains, terms, primary, tau, Nuisance::Intercept, DEFAULT_W)
    }

    pub fn with_nuisance(mut self, nuisance: Nuisance) -> Result<Self, ModelError> {
        if let Nuisance::Blocks(sizes) = &nuisance {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(ModelError::InconsistentSpec(
                    "every block must hold at least one run".into(),
                ));
            }
        }
        self.nuisance = nuisance;
        Ok(self)
    }

    pub fn with_w(mut self, w: f64) -> Result<Self, ModelError> {
        if !w.is_finite() || w <= 0.0 {
            return Err(ModelError::InconsistentSpec(format!(
                "w must be positive, got {w}"
            )));
        }
        self.w = w;
        Ok(self)
    }

    /// Sets the prior precision of every potential term of `kind`.
    pub fn with_tau2_inv(mut self, kind: TermKind, tau2_inv: f64) -> Result<Self, ModelError> {
        if !tau2_inv.is_finite() || tau2_inv < 0.0 {
            return Err(ModelError::InconsistentSpec(
                "prior precision must be finite and non-negative".into(),
            ));
        }
        for (t, (p, tau)) in self
            .terms
            .iter()
            .zip(self.primary.iter().zip(self.tau2_inv.iter_mut()))
        {
            if !p && t.kind() == kind {
                *tau = tau2_inv;
            }
        }
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domains(&self) -> &[FactorDomain] {
        &self.domains
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn nuisance(&self) -> &Nuisance {
        &self.nuisance
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn is_primary(&self, t: usize) -> bool {
        self.primary[t]
    }

    /// Prior precision per term (0 for primary terms).
    pub fn tau2_inv(&self) -> &[f64] {
        &self.tau2_inv
    }

    /// Number of primary terms.
    pub fn p(&self) -> usize {
        self.primary.iter().filter(|&&p| p).count()
    }

    /// Number of potential terms.
    pub fn q(&self) -> usize {
        self.terms.len() - self.p()
    }

    /// Number of nuisance parameters.
    pub fn b(&self) -> usize {
        self.nuisance.count()
    }

    /// Length of a full model row, `p + q + b`.
    pub fn row_len(&self) -> usize {
        self.terms.len() + self.b()
    }

    pub fn primary_cols(&self) -> Vec<usize> {
        (0..self.terms.len()).filter(|&t| self.primary[t]).collect()
    }

    pub fn potential_cols(&self) -> Vec<usize> {
        (0..self.terms.len())
            .filter(|&t| !self.primary[t])
            .collect()
    }

    pub fn nuisance_cols(&self) -> Vec<usize> {
        (self.terms.len()..self.row_len()).collect()
    }

    pub fn cols_of_kind(&self, kind: TermKind) -> Vec<usize> {
        (0..self.terms.len())
            .filter(|&t| self.terms[t].kind() == kind)
            .collect()
    }

    /// True when no factor carries a pure quadratic term, i.e. every model
    /// row is multilinear in each coordinate.
    pub fn is_interaction_model(&self) -> bool {
        self.terms.iter().all(|t| t.kind() != TermKind::Quadratic)
    }

    pub fn has_quadratic_in(&self, j: usize) -> bool {
        self.terms.contains(&Term::quadratic(j))
    }

    pub fn has_potential_terms(&self) -> bool {
        self.primary.iter().any(|p| !p)
    }

    /// The primary-only submodel with the same nuisance structure.
    pub fn submodel(&self) -> ModelSpec {
        let idx = self.primary_cols();
        ModelSpec {
            k: self.k,
            domains: self.domains.clone(),
            order: self.order,
            terms: idx.iter().map(|&t| self.terms[t].clone()).collect(),
            primary: vec![true; idx.len()],
            nuisance: self.nuisance.clone(),
            tau2_inv: vec![0.0; idx.len()],
            w: self.w,
        }
    }

    /// Main effects only, with the same domains and nuisance structure.
    pub fn main_effect_submodel(&self) -> ModelSpec {
        ModelSpec {
            k: self.k,
            domains: self.domains.clone(),
            order: 1,
            terms: (0..self.k).map(Term::main).collect(),
            primary: vec![true; self.k],
            nuisance: self.nuisance.clone(),
            tau2_inv: vec![0.0; self.k],
            w: self.w,
        }
    }

    pub fn check_row(&self, run: usize, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.k {
            return Err(ModelError::InconsistentSpec(format!(
                "run {} has {} settings, model has {} factors",
                run + 1,
                x.len(),
                self.k
            )));
        }
        for (factor, (&value, &domain)) in x.iter().zip(&self.domains).enumerate() {
            if !domain.admits(value) {
                return Err(ModelError::DomainViolation {
                    run: run + 1,
                    factor: factor + 1,
                    value,
                    domain,
                });
            }
        }
        Ok(())
    }

    /// Term values `f(x)` in term order.
    pub fn expand_row(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_row(0, x)?;
        Ok(self.expand_unchecked(x))
    }

    pub(crate) fn expand_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(x)).collect()
    }

    /// Nuisance indicator vector `z` for a run in `block` (ignored for an
    /// intercept).
    pub fn nuisance_row(&self, block: Option<usize>) -> Vec<f64> {
        match &self.nuisance {
            Nuisance::Intercept => vec![1.0],
            Nuisance::Blocks(sizes) => {
                let mut z = vec![0.0; sizes.len()];
                if let Some(b) = block {
                    z[b] = 1.0;
                }
                z
            }
        }
    }

    /// Full model row `l(x) = (f(x) | z)`.
    pub(crate) fn model_row(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut l = self.expand_unchecked(x);
        l.extend_from_slice(z);
        l
    }

    /// Splits model row positions into those that depend on coordinate `j`
    /// and the rest.
    pub fn partition_row(&self, x: &[f64], z: &[f64], j: usize) -> RowPartition {
        let mut f1_index = Vec::new();
        let mut f1_basis = Vec::new();
        let mut quadratic_index = None;
        let mut l2_index = Vec::new();
        let mut l2 = Vec::new();
        for (t, term) in self.terms.iter().enumerate() {
            if !term.contains(j) {
                l2_index.push(t);
                l2.push(term.value(x));
            } else if term.kind() == TermKind::Quadratic {
                quadratic_index = Some(t);
            } else {
                f1_index.push(t);
                f1_basis.push(term.multiplier_without(j, x));
            }
        }
        let offset = self.terms.len();
        for (h, &zh) in z.iter().enumerate() {
            l2_index.push(offset + h);
            l2.push(zh);
        }
        RowPartition {
            f1_index,
            f1_basis,
            quadratic_index,
            l2_index,
            l2,
        }
    }

    pub fn check_design(&self, d: &Design) -> Result<(), ModelError> {
        if d.k() != self.k {
            return Err(ModelError::InconsistentSpec(format!(
                "design has {} factors, model has {}",
                d.k(),
                self.k
            )));
        }
        for i in 0..d.n() {
            self.check_row(i, d.row(i))?;
        }
        self.block_assignment(d).map(|_| ())
    }

    /// Block label of every run, or `None` for an intercept-only model.
    pub fn block_assignment(&self, d: &Design) -> Result<Option<Vec<usize>>, ModelError> {
        match &self.nuisance {
            Nuisance::Intercept => Ok(None),
            Nuisance::Blocks(sizes) => {
                let total: usize = sizes.iter().sum();
                if total != d.n() {
                    return Err(ModelError::InconsistentSpec(format!(
                        "block sizes sum to {total} but the design has {} runs",
                        d.n()
                    )));
                }
                match d.blocks() {
                    None => Ok(self.nuisance.default_assignment(d.n())),
                    Some(labels) => {
                        let mut counts = vec![0usize; sizes.len()];
                        for &b in labels {
                            if b >= sizes.len() {
                                return Err(ModelError::InconsistentSpec(format!(
                                    "block label {} exceeds the {} declared blocks",
                                    b + 1,
                                    sizes.len()
                                )));
                            }
                            counts[b] += 1;
                        }
                        if counts != *sizes {
                            return Err(ModelError::InconsistentSpec(format!(
                                "design block sizes {counts:?} differ from declared {sizes:?}"
                            )));
                        }
                        Ok(Some(labels.to_vec()))
                    }
                }
            }
        }
    }

    /// `F`, `Z`, `L = (F | Z)`, the prior precision diagonal `τ⁻²K` and the
    /// weight diagonal `W`.
    pub fn build_matrices(&self, d: &Design) -> Result<ModelMatrices, ModelError> {
        self.check_design(d)?;
        let blocks = self.block_assignment(d)?;
        let n = d.n();
        let nt = self.terms.len();
        let b = self.b();
        let mut f = Matrix::zeros(n, nt);
        let mut z = Matrix::zeros(n, b);
        let mut l = Matrix::zeros(n, nt + b);
        for i in 0..n {
            let zi = self.nuisance_row(blocks.as_ref().map(|bl| bl[i]));
            let li = self.model_row(d.row(i), &zi);
            f.row_mut(i).copy_from_slice(&li[..nt]);
            z.row_mut(i).copy_from_slice(&zi);
            l.row_mut(i).copy_from_slice(&li);
        }
        Ok(ModelMatrices {
            f,
            z,
            l,
            prior: self.prior_diag(),
            weights: self.weight_diag(self.w),
        })
    }

    /// `τ⁻²K` as a diagonal of length `p + q + b`.
    pub fn prior_diag(&self) -> Vec<f64> {
        let mut k = self.tau2_inv.clone();
        k.extend(std::iter::repeat_n(0.0, self.b()));
        k
    }

    /// Weight diagonal with 1 on every term position and `w` on nuisance.
    pub fn weight_diag(&self, w: f64) -> Vec<f64> {
        let mut out = vec![1.0; self.terms.len()];
        out.extend(std::iter::repeat_n(w, self.b()));
        out
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::label).collect()
    }
}

/// All interactions of order `2..=order` on `k` factors, ordered by order
/// and then lexicographically.
pub fn interaction_terms(k: usize, order: usize) -> Vec<Term> {
    let mut out = Vec::new();
    for m in 2..=order.min(k) {
        let mut combo: Vec<usize> = (0..m).collect();
        loop {
            out.push(Term(combo.clone()));
            let mut i = m;
            while i > 0 && combo[i - 1] == k - m + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for t in i..m {
                combo[t] = combo[t - 1] + 1;
            }
        }
    }
    out
}

/// Positions of a model row split around coordinate `j`.
///
/// For terms linear in `x_j` the entry equals `x_j * f1_basis[..]`; a pure
/// quadratic `x_j²` is listed separately because it is not linear.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPartition {
    pub f1_index: Vec<usize>,
    pub f1_basis: Vec<f64>,
    pub quadratic_index: Option<usize>,
    pub l2_index: Vec<usize>,
    pub l2: Vec<f64>,
}

impl RowPartition {
    /// Model row for coordinate value `x`, in full row order.
    pub fn row_at(&self, x: f64, len: usize) -> Vec<f64> {
        let mut l = vec![0.0; len];
        for (&i, &v) in self.l2_index.iter().zip(&self.l2) {
            l[i] = v;
        }
        for (&i, &b) in self.f1_index.iter().zip(&self.f1_basis) {
            l[i] = x * b;
        }
        if let Some(q) = self.quadratic_index {
            l[q] = x * x;
        }
        l
    }

    /// Row at `x = 0` and the direction multiplying `x`, both in full row
    /// order; exact when there is no quadratic term in `j`.
    pub fn affine_parts(&self, len: usize) -> (Vec<f64>, Vec<f64>) {
        let mut base = vec![0.0; len];
        for (&i, &v) in self.l2_index.iter().zip(&self.l2) {
            base[i] = v;
        }
        let mut dir = vec![0.0; len];
        for (&i, &b) in self.f1_index.iter().zip(&self.f1_basis) {
            dir[i] = b;
        }
        (base, dir)
    }
}

/// An `n x k` matrix of settings with optional 0-based block labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    settings: Matrix,
    blocks: Option<Vec<usize>>,
}

impl Design {
    pub fn new(settings: Matrix, blocks: Option<Vec<usize>>) -> Result<Self, ModelError> {
        if let Some(b) = &blocks {
            if b.len() != settings.rows() {
                return Err(ModelError::InconsistentSpec(format!(
                    "{} block labels for {} runs",
                    b.len(),
                    settings.rows()
                )));
            }
        }
        Ok(Self { settings, blocks })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        Self {
            settings: Matrix::from_rows(rows),
            blocks: None,
        }
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self, ModelError> {
        if blocks.len() != self.n() {
            return Err(ModelError::InconsistentSpec(format!(
                "{} block labels for {} runs",
                blocks.len(),
                self.n()
            )));
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.settings.rows()
    }

    pub fn k(&self) -> usize {
        self.settings.cols()
    }

    pub fn settings(&self) -> &Matrix {
        &self.settings
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.settings.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.settings[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.settings[(i, j)] = x;
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }

    /// Flips each column so its first nonzero entry is positive, then sorts
    /// runs lexicographically by (block, settings).
    pub fn canonicalize(&self) -> Design {
        let mut s = self.settings.clone();
        for j in 0..s.cols() {
            let first = (0..s.rows()).map(|i| s[(i, j)]).find(|&v| v != 0.0);
            if matches!(first, Some(v) if v < 0.0) {
                for i in 0..s.rows() {
                    s[(i, j)] = -s[(i, j)];
                }
            }
        }
        let mut idx: Vec<usize> = (0..s.rows()).collect();
        let block = |i: usize| self.blocks.as_ref().map_or(0, |b| b[i]);
        idx.sort_by(|&a, &b| {
            block(a).cmp(&block(b)).then_with(|| {
                s.row(a)
                    .iter()
                    .zip(s.row(b))
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        });
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| s.row(i).to_vec()).collect();
        Design {
            settings: Matrix::from_rows(&rows),
            blocks: self
                .blocks
                .as_ref()
                .map(|b| idx.iter().map(|&i| b[i]).collect()),
        }
    }

    /// Lexicographic comparison of the settings, used for tie-breaking.
    pub fn lex_cmp(&self, other: &Design) -> Ordering {
        self.settings
            .as_slice()
            .iter()
            .zip(other.settings.as_slice())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

#[derive(Debug, Clone)]
pub struct ModelMatrices {
    pub f: Matrix,
    pub z: Matrix,
    pub l: Matrix,
    /// Diagonal of `τ⁻²K`.
    pub prior: Vec<f64>,
    /// Diagonal of `W`.
    pub weights: Vec<f64>,
}

impl ModelMatrices {
    pub fn prior_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.prior)
    }

    pub fn weight_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.weights)
    }
}
