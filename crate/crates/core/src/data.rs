//! Designs shipped with the crate and the models they are evaluated under.

use crate::io::parse_design_csv;
use crate::model::{Design, FactorDomain, ModelSpec, Nuisance};

const FIG1: &str = include_str!("../data/fig1.csv");
const A5_8X4: &str = include_str!("../data/a5_8x4.csv");
const A5_6X4: &str = include_str!("../data/a5_6x4.csv");
const BLOCKED32: &str = include_str!("../data/blocked32.csv");
const S1_AS: &str = include_str!("../data/s1_as.csv");
const S1_DS: &str = include_str!("../data/s1_ds.csv");
const S2_BAYES_AS: &str = include_str!("../data/s2_bayes_as.csv");
const S2_BAYES_DS: &str = include_str!("../data/s2_bayes_ds.csv");
const S3_BAYES_AS_TAU10: &str = include_str!("../data/s3_bayes_as_tau10.csv");

fn load(text: &str) -> Design {
    parse_design_csv(text).expect("bundled design parses")
}

/// 7-run, 5-factor A-optimal main-effect design with `x14 = x15 = 0`.
pub fn fig1() -> Design {
    load(FIG1)
}

/// The 7-run design with `(x14, x15)` replaced, e.g. `(1, 1)` or `(-1, 1)`.
pub fn fig1_variant(x14: f64, x15: f64) -> Design {
    let mut d = fig1();
    d.set(0, 3, x14);
    d.set(0, 4, x15);
    d
}

/// 8-run, 4-factor continuous design used for the fractional-programming
/// worked example (coordinate `(1, 3)` at −0.45).
pub fn a5_eight_run() -> Design {
    load(A5_8X4)
}

/// 6-run, 4-factor design used for the row-exchange example, with
/// `x44 = 0`.
pub fn a5_six_run() -> Design {
    load(A5_6X4)
}

/// 32-run, 6-factor design in 8 blocks of 4.
pub fn blocked32() -> Design {
    load(BLOCKED32)
}

/// 15-run, 6-factor designs: As- and Ds-optimal for main effects, Bayesian
/// As and Ds with potential interactions, and the Bayesian As design at
/// `τ⁻² = 10`.
pub fn fifteen_run_designs() -> Vec<(&'static str, Design)> {
    vec![
        ("As", load(S1_AS)),
        ("Ds", load(S1_DS)),
        ("bayes-As", load(S2_BAYES_AS)),
        ("bayes-Ds", load(S2_BAYES_DS)),
        ("bayes-As-tau10", load(S3_BAYES_AS_TAU10)),
    ]
}

pub fn main_effect_model(k: usize) -> ModelSpec {
    ModelSpec::main_effects(vec![FactorDomain::Continuous; k]).expect("valid main-effect model")
}

/// Main effects primary, all two-factor interactions potential, intercept.
pub fn potential_interaction_model(k: usize, tau2_inv: f64) -> ModelSpec {
    ModelSpec::interactions(vec![FactorDomain::Continuous; k], 2, true, tau2_inv)
        .expect("valid interaction model")
}

/// Six two-level factors, main effects primary, all two-factor
/// interactions potential, eight blocks of four runs.
pub fn blocked_model(tau2_inv: f64) -> ModelSpec {
    ModelSpec::interactions(vec![FactorDomain::TwoLevel; 6], 2, true, tau2_inv)
        .and_then(|s| s.with_nuisance(Nuisance::Blocks(vec![4; 8])))
        .expect("valid blocked model")
}

/// Six-factor definitive screening design from a conference matrix of
/// order 6: the matrix, its foldover and one center run.
pub fn dsd6() -> Design {
    const C: [[f64; 6]; 6] = [
        [0.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 0.0, 1.0, -1.0, -1.0, 1.0],
        [1.0, 1.0, 0.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, 0.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0, 0.0, 1.0],
        [1.0, 1.0, -1.0, -1.0, 1.0, 0.0],
    ];
    let mut rows: Vec<[f64; 6]> = C.to_vec();
    rows.extend(C.iter().map(|r| r.map(|v| -v)));
    rows.push([0.0; 6]);
    Design::from_rows(&rows)
}
