//! Design CSV and model JSON formats.
//!
//! Design CSV: header `x1,...,xk[,block]`, one run per line, block labels
//! 1-based. Model JSON fields: `k`, `domains`, `order`, `terms`,
//! `potential`, `nuisance`, `tau2_inv`, `w`. Factor indices in term lists
//! are 1-based. Without `terms` the model is main effects only, or all
//! interactions up to `order` when that is given.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{
    interaction_terms, Design, FactorDomain, ModelError, ModelSpec, Nuisance, Term, TermKind,
    DEFAULT_W,
};

/// Prior precision used when a model with potential terms gives none.
pub const DEFAULT_TAU2_INV: f64 = 1.0;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("design CSV: {0}")]
    Csv(String),
    #[error("model JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_design(path: &Path) -> Result<Design, IoError> {
    parse_design_csv(&read(path)?)
}

pub fn parse_design_csv(text: &str) -> Result<Design, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::Csv(e.to_string()))?
        .clone();
    let mut k = 0;
    let mut has_block = false;
    for (c, h) in headers.iter().enumerate() {
        if h.eq_ignore_ascii_case("block") {
            if c + 1 != headers.len() {
                return Err(IoError::Csv("the block column must come last".into()));
            }
            has_block = true;
        } else if h == format!("x{}", c + 1) {
            k += 1;
        } else {
            return Err(IoError::Csv(format!(
                "column {} is named '{h}', expected 'x{}' or 'block'",
                c + 1,
                c + 1
            )));
        }
    }
    if k == 0 {
        return Err(IoError::Csv("no factor columns".into()));
    }
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(IoError::Csv(format!(
                "run {} has {} fields, expected {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        let row = (0..k)
            .map(|j| {
                record[j].parse::<f64>().map_err(|_| {
                    IoError::Csv(format!(
                        "run {}, x{}: '{}' is not a number",
                        i + 1,
                        j + 1,
                        &record[j]
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(IoError::Csv(format!(
                "run {} has a non-finite setting",
                i + 1
            )));
        }
        rows.push(row);
        if has_block {
            let b: usize = record[k]
                .parse()
                .ok()
                .filter(|&b: &usize| b >= 1)
                .ok_or_else(|| {
                    IoError::Csv(format!("run {}: block must be a positive integer", i + 1))
                })?;
            blocks.push(b - 1);
        }
    }
    if rows.is_empty() {
        return Err(IoError::Csv("design has no runs".into()));
    }
    let design = Design::new(Matrix::from_rows(&rows), has_block.then_some(blocks))?;
    Ok(design)
}

/// CSV text for a design. Settings use the shortest decimal form that
/// parses back to the same `f64`.
pub fn design_to_csv(d: &Design) -> String {
    let mut out = (1..=d.k())
        .map(|j| format!("x{j}"))
        .collect::<Vec<_>>()
        .join(",");
    if d.blocks().is_some() {
        out.push_str(",block");
    }
    out.push('\n');
    for i in 0..d.n() {
        let fields: Vec<String> = d.row(i).iter().map(|v| format_number(*v)).collect();
        out.push_str(&fields.join(","));
        if let Some(b) = d.blocks() {
            out.push_str(&format!(",{}", b[i] + 1));
        }
        out.push('\n');
    }
    out
}

pub fn write_design(path: &Path, d: &Design) -> Result<(), IoError> {
    fs::write(path, design_to_csv(d)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Shortest round-trip decimal; negative zero prints as `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    k: usize,
    domains: Option<Domains>,
    order: Option<usize>,
    terms: Option<Terms>,
    potential: Option<Potential>,
    nuisance: Option<Value>,
    tau2_inv: Option<Tau>,
    w: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Domains {
    All(FactorDomain),
    Each(Vec<FactorDomain>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Terms {
    Named(String),
    List(Vec<Vec<usize>>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Potential {
    Group(String),
    Groups(Vec<String>),
    List(Vec<Vec<usize>>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Tau {
    Single(f64),
    Groups {
        interactions: Option<f64>,
        quadratics: Option<f64>,
    },
}

pub fn read_model(path: &Path) -> Result<ModelSpec, IoError> {
    parse_model_json(&read(path)?)
}

pub fn parse_model_json(text: &str) -> Result<ModelSpec, IoError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    let k = file.k;
    if k == 0 {
        return Err(IoError::Json("k must be at least 1".into()));
    }
    let domains = match file.domains {
        None => vec![FactorDomain::Continuous; k],
        Some(Domains::All(d)) => vec![d; k],
        Some(Domains::Each(v)) if v.len() == k => v,
        Some(Domains::Each(v)) => {
            return Err(IoError::Json(format!("{} domains for k = {k}", v.len())));
        }
    };
    let order = file.order.unwrap_or(1);
    let to_term = |t: &Vec<usize>| -> Result<Term, IoError> {
        if t.iter().any(|&j| j == 0 || j > k) {
            return Err(IoError::Json(format!(
                "term {t:?}: factor indices run from 1 to {k}"
            )));
        }
        let zero: Vec<usize> = t.iter().map(|j| j - 1).collect();
        Ok(Term::from_factors(&zero)?)
    };
    let terms: Vec<Term> = match &file.terms {
        None if file.order.is_none() => (0..k).map(Term::main).collect(),
        None => {
            let mut t: Vec<Term> = (0..k).map(Term::main).collect();
            t.extend(interaction_terms(k, order));
            t
        }
        Some(Terms::Named(name)) => match name.as_str() {
            "auto_order_m" => {
                let mut t: Vec<Term> = (0..k).map(Term::main).collect();
                t.extend(interaction_terms(k, order));
                t
            }
            "full_quadratic" => {
                let mut t: Vec<Term> = (0..k).map(Term::main).collect();
                t.extend(interaction_terms(k, order.max(2)));
                t.extend(
                    (0..k)
                        .filter(|&j| domains[j] != FactorDomain::TwoLevel)
                        .map(Term::quadratic),
                );
                t
            }
            other => {
                return Err(IoError::Json(format!(
                    "unknown term list '{other}' (expected \"auto_order_m\", \"full_quadratic\" or a list)"
                )))
            }
        },
        Some(Terms::List(list)) => list.iter().map(to_term).collect::<Result<_, _>>()?,
    };
    if let Some(m) = file.order {
        if let Some(t) = terms
            .iter()
            .find(|t| t.kind() == TermKind::Interaction && t.order() > m)
        {
            return Err(ModelError::InconsistentSpec(format!(
                "term {t} exceeds the declared order {m}"
            ))
            .into());
        }
    }
    let potential_kind = |kinds: &[String]| -> Result<Vec<bool>, IoError> {
        let mut want = Vec::new();
        for g in kinds {
            match g.as_str() {
                "interactions" => want.push(TermKind::Interaction),
                "quadratics" => want.push(TermKind::Quadratic),
                "none" => {}
                other => return Err(IoError::Json(format!("unknown potential group '{other}'"))),
            }
        }
        Ok(terms.iter().map(|t| !want.contains(&t.kind())).collect())
    };
    let primary: Vec<bool> = match &file.potential {
        None => vec![true; terms.len()],
        Some(Potential::Group(g)) => potential_kind(std::slice::from_ref(g))?,
        Some(Potential::Groups(g)) => potential_kind(g)?,
        Some(Potential::List(list)) => {
            let pot: Vec<Term> = list.iter().map(to_term).collect::<Result<_, _>>()?;
            if let Some(t) = pot.iter().find(|t| !terms.contains(t)) {
                return Err(ModelError::InconsistentSpec(format!(
                    "potential term {t} is not in the term list"
                ))
                .into());
            }
            terms.iter().map(|t| !pot.contains(t)).collect()
        }
    };
    if terms
        .iter()
        .zip(&primary)
        .any(|(t, &p)| !p && t.kind() == TermKind::Main)
    {
        return Err(ModelError::InconsistentSpec("main effects must be primary".into()).into());
    }
    let (tau_i, tau_q) = match file.tau2_inv {
        None => (DEFAULT_TAU2_INV, DEFAULT_TAU2_INV),
        Some(Tau::Single(v)) => (v, v),
        Some(Tau::Groups {
            interactions,
            quadratics,
        }) => (
            interactions.unwrap_or(DEFAULT_TAU2_INV),
            quadratics.unwrap_or(DEFAULT_TAU2_INV),
        ),
    };
    let tau: Vec<f64> = terms
        .iter()
        .map(|t| match t.kind() {
            TermKind::Quadratic => tau_q,
            _ => tau_i,
        })
        .collect();
    let nuisance = parse_nuisance(file.nuisance.as_ref())?;
    Ok(ModelSpec::new(
        domains,
        terms,
        primary,
        tau,
        nuisance,
        file.w.unwrap_or(DEFAULT_W),
    )?)
}

fn parse_nuisance(v: Option<&Value>) -> Result<Nuisance, IoError> {
    let bad = || {
        IoError::Json(
            "nuisance must be \"intercept\", {\"intercept\": ..} or {\"blocks\": [sizes]}".into(),
        )
    };
    match v {
        None => Ok(Nuisance::Intercept),
        Some(Value::String(s)) if s == "intercept" => Ok(Nuisance::Intercept),
        Some(Value::Object(map)) if map.len() == 1 => {
            if map.contains_key("intercept") {
                return Ok(Nuisance::Intercept);
            }
            let sizes = map
                .get("blocks")
                .and_then(Value::as_array)
                .ok_or_else(bad)?;
            let sizes = sizes
                .iter()
                .map(|s| s.as_u64().filter(|&s| s >= 1).map(|s| s as usize))
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| IoError::Json("block sizes must be positive integers".into()))?;
            Ok(Nuisance::Blocks(sizes))
        }
        Some(_) => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Design::from_rows(&[[0.1 + 0.2, -1.0], [1.0 / 3.0, 0.0]])
            .with_blocks(vec![0, 1])
            .unwrap();
        let back = parse_design_csv(&design_to_csv(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_design_csv("a,b\n1,2\n").is_err());
        assert!(parse_design_csv("x1,x2\n1\n").is_err());
        assert!(parse_design_csv("x1,x2\n1,zz\n").is_err());
        assert!(parse_design_csv("x1,block\n1,0\n").is_err());
        assert!(parse_design_csv("x1,x2\n").is_err());
    }

    #[test]
    fn auto_order_model() {
        let spec = parse_model_json(
            r#"{"k":3,"domains":"2level","order":2,"terms":"auto_order_m","potential":"interactions","tau2_inv":16}"#,
        )
        .unwrap();
        assert_eq!(spec.p(), 3);
        assert_eq!(spec.q(), 3);
        assert_eq!(spec.tau2_inv(), &[0.0, 0.0, 0.0, 16.0, 16.0, 16.0]);
    }

    #[test]
    fn explicit_quadratic_model_with_group_priors() {
        let spec = parse_model_json(
            r#"{"k":2,"terms":[[1],[2],[1,2],[1,1],[2,2]],"potential":["interactions","quadratics"],
                "tau2_inv":{"interactions":1,"quadratics":16},"nuisance":{"blocks":[2,3]},"w":0.01}"#,
        )
        .unwrap();
        assert_eq!(spec.term_labels(), ["x1", "x2", "x1x2", "x1^2", "x2^2"]);
        assert_eq!(spec.tau2_inv(), &[0.0, 0.0, 1.0, 16.0, 16.0]);
        assert_eq!(spec.nuisance(), &Nuisance::Blocks(vec![2, 3]));
        assert_eq!(spec.w(), 0.01);
    }

    #[test]
    fn model_errors() {
        assert!(parse_model_json(r#"{"k":2,"terms":[[1],[1,2]]}"#).is_err());
        assert!(parse_model_json(r#"{"k":2,"terms":[[1],[2],[1,2]],"order":1}"#).is_err());
        assert!(parse_model_json(r#"{"k":2,"domains":["2level"]}"#).is_err());
        assert!(parse_model_json(r#"{"k":2,"nuisance":{"blocks":[0]}}"#).is_err());
        assert!(parse_model_json(r#"{"k":1,"terms":[[1],[1,1]],"domains":"2level"}"#).is_err());
        assert!(parse_model_json(r#"{"k":2,"colour":1}"#).is_err());
    }
}
