//! Multi-start coordinate exchange.

use std::cmp::Ordering;

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{
    evaluate, is_better, is_tied, CriterionConfig, CriterionError, CriterionValue, Objective,
};
use crate::exchange::{best_coord_continuous, best_coord_discrete, DeltaKind, ExchangeContext};
use crate::matrix::{smw_rank2_inverse_update, Cholesky, LinalgError, Matrix};
use crate::model::{Design, FactorDomain, ModelError, ModelSpec, RowPartition};

pub const MAX_START_ATTEMPTS: usize = 1000;
pub const DUAL_START_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no nonsingular random start found after {attempts} attempts")]
    CannotFindNonsingularStart { attempts: usize },
    #[error("all {starts} starts failed; last error: {last}")]
    AllStartsFailed { starts: usize, last: String },
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainMode {
    /// Every factor at ±1.
    #[serde(rename = "pm1")]
    PM1,
    /// Every factor in {−1, 0, 1}; two-level factors stay at ±1.
    #[serde(rename = "pm1_0")]
    PM1_0,
    /// Continuous factors on [−1, 1]; discrete factors keep their levels.
    #[serde(rename = "continuous")]
    Continuous,
    /// Each factor in its declared domain.
    #[serde(rename = "per_factor")]
    PerFactor,
}

impl DomainMode {
    /// Level set per factor, `None` for a continuous coordinate.
    pub fn levels(self, domains: &[FactorDomain]) -> Vec<Option<Vec<f64>>> {
        domains
            .iter()
            .map(|&d| match (self, d) {
                (DomainMode::PM1, _) | (_, FactorDomain::TwoLevel) => Some(vec![-1.0, 1.0]),
                (DomainMode::PM1_0, _) | (_, FactorDomain::ThreeLevel) => {
                    Some(vec![-1.0, 0.0, 1.0])
                }
                (_, FactorDomain::Continuous) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub starts: usize,
    pub seed: u64,
    pub domain_mode: DomainMode,
    pub max_passes: usize,
    pub improve_tol: f64,
    pub equal_tol: f64,
    pub refresh_every_pass: bool,
    /// Worker threads for independent starts; `None` uses rayon's default.
    pub parallel_starts: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 100,
            seed: 0,
            domain_mode: DomainMode::Continuous,
            max_passes: 100,
            improve_tol: 1e-10,
            equal_tol: 1e-8,
            refresh_every_pass: true,
            parallel_starts: None,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if self.starts == 0 {
            return Err(SearchError::InvalidConfig(
                "starts must be at least 1".into(),
            ));
        }
        if self.improve_tol.is_nan()
            || self.improve_tol <= 0.0
            || self.equal_tol.is_nan()
            || self.equal_tol <= 0.0
        {
            return Err(SearchError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_passes == 0 {
            return Err(SearchError::InvalidConfig(
                "max_passes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub seed: u64,
    /// Final value on the family's reporting scale; `None` if the start failed.
    pub value: Option<f64>,
    pub passes: usize,
    pub exchanges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub domain_mode: DomainMode,
    pub seed: u64,
    pub starts: usize,
    pub best_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Canonicalized best design.
    pub best_design: Design,
    pub best_value: CriterionValue,
    pub per_start: Vec<StartSummary>,
    pub passes_used: usize,
    pub exchanges_made: usize,
    pub success_count_at_best: usize,
    pub batches: Vec<BatchSummary>,
}

impl SearchResult {
    pub fn per_start_values(&self) -> Vec<Option<f64>> {
        self.per_start.iter().map(|s| s.value).collect()
    }
}

/// Cached quantities for one coordinate-exchange run.
#[derive(Debug, Clone)]
pub struct CeaState {
    pub design: Design,
    z: Vec<Vec<f64>>,
    l: Matrix,
    d: Matrix,
    dwd: Option<Matrix>,
    /// Objective value: `log|M|` for the D family, `tr(W M⁻¹)` otherwise.
    pub value: f64,
}

impl CeaState {
    pub fn new(
        design: Design,
        spec: &ModelSpec,
        objective: &Objective,
    ) -> Result<Self, SearchError> {
        let blocks = spec.block_assignment(&design)?;
        let z: Vec<Vec<f64>> = (0..design.n())
            .map(|i| spec.nuisance_row(blocks.as_ref().map(|b| b[i])))
            .collect();
        let (l, d, dwd, value) = Self::factorize(&design, &z, spec, objective)?;
        Ok(Self {
            design,
            z,
            l,
            d,
            dwd,
            value,
        })
    }

    fn factorize(
        design: &Design,
        z: &[Vec<f64>],
        spec: &ModelSpec,
        objective: &Objective,
    ) -> Result<(Matrix, Matrix, Option<Matrix>, f64), SearchError> {
        let mut l = Matrix::zeros(design.n(), spec.row_len());
        for i in 0..design.n() {
            l.row_mut(i)
                .copy_from_slice(&spec.model_row(design.row(i), &z[i]));
        }
        let chol = Cholesky::new(&objective.information(&l))?;
        let d = chol.inverse();
        let value = objective.value(&chol, &d);
        let dwd = objective.dwd(&d);
        Ok((l, d, dwd, value))
    }

    /// Rebuilds `L`, the inverse and the objective value from the settings.
    pub fn refresh(&mut self, spec: &ModelSpec, objective: &Objective) -> Result<(), SearchError> {
        let (l, d, dwd, value) = Self::factorize(&self.design, &self.z, spec, objective)?;
        self.l = l;
        self.d = d;
        self.dwd = dwd;
        self.value = value;
        Ok(())
    }

    pub fn inverse(&self) -> &Matrix {
        &self.d
    }

    pub fn model_matrix(&self) -> &Matrix {
        &self.l
    }

    /// Exchange quantities for replacing run `i`.
    pub fn context(&self, i: usize) -> ExchangeContext<'_> {
        ExchangeContext::new(&self.d, self.dwd.as_ref(), self.l.row(i).to_vec())
    }

    pub fn partition(&self, spec: &ModelSpec, i: usize, j: usize) -> RowPartition {
        spec.partition_row(self.design.row(i), &self.z[i], j)
    }
}

/// Random design in the given domain mode. Runs are assigned to blocks in
/// order of the declared block sizes. Draws are repeated until the
/// information matrix (with prior, for Bayes families) is nonsingular.
pub fn random_start<R: Rng>(
    n: usize,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
    mode: DomainMode,
    rng: &mut R,
) -> Result<Design, SearchError> {
    let objective = Objective::new(spec, cfg);
    let params = spec.row_len();
    if !cfg.family.is_bayes() && n < params {
        warn!(
            "{n} runs cannot estimate {params} parameters under {}",
            cfg.family
        );
        return Err(SearchError::CannotFindNonsingularStart { attempts: 0 });
    }
    let levels = mode.levels(spec.domains());
    let blocks = spec.nuisance().default_assignment(n);
    for _ in 0..MAX_START_ATTEMPTS {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                levels
                    .iter()
                    .map(|lv| match lv {
                        Some(set) => set[rng.gen_range(0..set.len())],
                        None => rng.gen_range(-1.0..=1.0),
                    })
                    .collect()
            })
            .collect();
        let mut design = Design::from_rows(&rows);
        if let Some(b) = &blocks {
            design = design.with_blocks(b.clone())?;
        }
        let l = spec.build_matrices(&design)?.l;
        if Cholesky::new(&objective.information(&l)).is_ok() {
            return Ok(design);
        }
    }
    warn!("no nonsingular start after {MAX_START_ATTEMPTS} attempts");
    Err(SearchError::CannotFindNonsingularStart {
        attempts: MAX_START_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOutcome {
    pub improved: bool,
    pub exchanges: usize,
}

/// One sweep over all coordinates in row-major order.
///
/// A move is applied when it improves the objective by more than
/// `improve_tol` (relative for the A family). A coordinate outside its
/// candidate set, such as an interior value under the D family, is moved
/// to the best candidate even when that is only a tie.
pub fn cea_pass(
    state: &mut CeaState,
    spec: &ModelSpec,
    objective: &Objective,
    mode: DomainMode,
    cfg: &SearchConfig,
) -> Result<PassOutcome, SearchError> {
    let levels = mode.levels(spec.domains());
    let kind = if objective.is_log_det() {
        DeltaKind::Det
    } else {
        DeltaKind::Trace
    };
    let (n, k) = (state.design.n(), spec.k());
    let mut improved = false;
    let mut exchanges = 0;
    for i in 0..n {
        for j in 0..k {
            let current = state.design.get(i, j);
            let part = state.partition(spec, i, j);
            let ctx = state.context(i);
            let (mv, admissible) = match &levels[j] {
                Some(set) => (
                    best_coord_discrete(&ctx, kind, &part, current, set),
                    set.contains(&current),
                ),
                None if kind == DeltaKind::Det && part.quadratic_index.is_none() => (
                    best_coord_discrete(&ctx, kind, &part, current, &[-1.0, 1.0]),
                    current.abs() == 1.0,
                ),
                None => (best_coord_continuous(&ctx, kind, &part, current), true),
            };
            let mv = match mv {
                Ok(mv) => mv,
                Err(err) => {
                    debug!("coordinate ({i}, {j}) skipped: {err}");
                    continue;
                }
            };
            if mv.x == current {
                continue;
            }
            let gain = match kind {
                DeltaKind::Det => mv.delta - 1.0,
                DeltaKind::Trace => mv.delta,
            };
            let threshold = match kind {
                DeltaKind::Det => cfg.improve_tol,
                DeltaKind::Trace => cfg.improve_tol * state.value.abs(),
            };
            let improves = gain > threshold;
            if !improves && (admissible || gain < -threshold) {
                continue;
            }
            let l_new = part.row_at(mv.x, spec.row_len());
            let d_new = match smw_rank2_inverse_update(&state.d, &l_new, state.l.row(i)) {
                Ok(d) => d,
                Err(err) => {
                    debug!("coordinate ({i}, {j}) update rejected: {err}");
                    continue;
                }
            };
            state.design.set(i, j, mv.x);
            state.l.row_mut(i).copy_from_slice(&l_new);
            state.dwd = objective.dwd(&d_new);
            state.d = d_new;
            match kind {
                DeltaKind::Det => state.value += mv.delta.ln(),
                DeltaKind::Trace => state.value -= mv.delta,
            }
            exchanges += 1;
            improved |= improves;
        }
    }
    if cfg.refresh_every_pass {
        let tracked = state.value;
        state.refresh(spec, objective)?;
        let drift = (state.value - tracked).abs();
        if drift > 1e-8 * tracked.abs().max(1.0) {
            warn!("tracked objective drifted by {drift:e} over one pass");
        }
    }
    Ok(PassOutcome {
        improved,
        exchanges,
    })
}

struct RunOutcome {
    design: Design,
    value: f64,
    passes: usize,
    exchanges: usize,
}

fn single_run(
    n: usize,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
    objective: &Objective,
    search: &SearchConfig,
    seed: u64,
) -> Result<RunOutcome, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = random_start(n, spec, cfg, search.domain_mode, &mut rng)?;
    let mut state = CeaState::new(design, spec, objective)?;
    let mut exchanges = 0;
    let mut passes = 0;
    loop {
        let before = state.value;
        let out = cea_pass(&mut state, spec, objective, search.domain_mode, search)?;
        passes += 1;
        exchanges += out.exchanges;
        if is_better(
            objective.orientation(),
            before,
            state.value,
            search.improve_tol,
        ) {
            warn!(
                "pass {passes} worsened the objective from {before} to {}",
                state.value
            );
        }
        if !out.improved {
            break;
        }
        if passes >= search.max_passes {
            warn!(
                "run stopped at the {}-pass cap before converging",
                search.max_passes
            );
            break;
        }
    }
    Ok(RunOutcome {
        design: state.design,
        value: state.value,
        passes,
        exchanges,
    })
}

/// Offset from the objective's scale to the reported scale: `−log|ZᵀZ|`
/// for the Ds families, 0 otherwise.
fn report_offset(n: usize, spec: &ModelSpec, cfg: &CriterionConfig) -> f64 {
    if !matches!(cfg.family.plain(), crate::criteria::Family::Ds) {
        return 0.0;
    }
    match spec.nuisance() {
        crate::model::Nuisance::Intercept => -(n as f64).ln(),
        crate::model::Nuisance::Blocks(sizes) => {
            -sizes.iter().map(|&s| (s as f64).ln()).sum::<f64>()
        }
    }
}

fn run_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(err) => {
                warn!("could not build a {t}-thread pool ({err}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}

/// Runs `starts` independent exchange runs seeded `seed + start` and keeps
/// the best. Ties within `equal_tol` go to the lexicographically smallest
/// canonical design.
pub fn construct(
    n: usize,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
    search: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    search.validate()?;
    if n == 0 {
        return Err(SearchError::InvalidConfig("n must be at least 1".into()));
    }
    let objective = Objective::new(spec, cfg);
    let offset = report_offset(n, spec, cfg);
    let outcomes: Vec<Result<RunOutcome, SearchError>> = run_pool(search.parallel_starts, || {
        (0..search.starts)
            .into_par_iter()
            .map(|s| {
                single_run(
                    n,
                    spec,
                    cfg,
                    &objective,
                    search,
                    search.seed.wrapping_add(s as u64),
                )
            })
            .collect()
    });

    let orientation = objective.orientation();
    let mut per_start = Vec::with_capacity(outcomes.len());
    let mut best: Option<(f64, Design)> = None;
    let mut last_error = String::new();
    let (mut passes_used, mut exchanges_made) = (0, 0);
    for (s, outcome) in outcomes.into_iter().enumerate() {
        let seed = search.seed.wrapping_add(s as u64);
        match outcome {
            Ok(run) => {
                let value = run.value + offset;
                passes_used += run.passes;
                exchanges_made += run.exchanges;
                per_start.push(StartSummary {
                    start: s,
                    seed,
                    value: Some(value),
                    passes: run.passes,
                    exchanges: run.exchanges,
                    error: None,
                });
                let canon = run.design.canonicalize();
                best = match best {
                    None => Some((value, canon)),
                    Some((bv, bd)) => {
                        let replace = is_better(orientation, value, bv, search.equal_tol)
                            || (is_tied(value, bv, search.equal_tol)
                                && canon.lex_cmp(&bd) == Ordering::Less
                                && !is_better(orientation, bv, value, 0.0));
                        if replace {
                            Some((value, canon))
                        } else {
                            Some((bv, bd))
                        }
                    }
                };
            }
            Err(err) => {
                last_error = err.to_string();
                per_start.push(StartSummary {
                    start: s,
                    seed,
                    value: None,
                    passes: 0,
                    exchanges: 0,
                    error: Some(last_error.clone()),
                });
            }
        }
    }
    let Some((best_raw, best_design)) = best else {
        return Err(SearchError::AllStartsFailed {
            starts: search.starts,
            last: last_error,
        });
    };
    let success_count_at_best = per_start
        .iter()
        .filter_map(|s| s.value)
        .filter(|&v| is_tied(v, best_raw, search.equal_tol))
        .count();
    let best_value = evaluate(&best_design, spec, cfg)?;
    info!(
        "{}: best {} = {} ({} of {} starts within tolerance)",
        cfg.family, cfg.family, best_value.value, success_count_at_best, search.starts
    );
    Ok(SearchResult {
        best_design,
        best_value,
        batches: vec![BatchSummary {
            domain_mode: search.domain_mode,
            seed: search.seed,
            starts: search.starts,
            best_value: Some(best_raw),
        }],
        per_start,
        passes_used,
        exchanges_made,
        success_count_at_best,
    })
}

/// Alternating discrete ({−1, 0, 1}) and continuous batches of `batch`
/// starts. The batch with the worse incumbent is rerun on fresh seeds until
/// a rerun fails to improve the overall best, the two incumbents tie, or
/// the total start count reaches the cap.
pub fn dual_protocol(
    n: usize,
    spec: &ModelSpec,
    cfg: &CriterionConfig,
    search: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    search.validate()?;
    let batch = search.starts;
    if spec.domains().iter().all(|&d| d == FactorDomain::TwoLevel) {
        let single = SearchConfig {
            domain_mode: DomainMode::PM1,
            ..search.clone()
        };
        return construct(n, spec, cfg, &single);
    }
    let orientation = cfg.family.orientation();
    let run = |mode: DomainMode, seed: u64| {
        construct(
            n,
            spec,
            cfg,
            &SearchConfig {
                domain_mode: mode,
                seed,
                starts: batch,
                ..search.clone()
            },
        )
    };
    let modes = [DomainMode::PM1_0, DomainMode::Continuous];
    let mut used = 0usize;
    let mut incumbents: [Option<SearchResult>; 2] = [None, None];
    let mut batches = Vec::new();
    let mut all_starts = Vec::new();
    let mut totals = (0usize, 0usize);
    let mut absorb = |slot: usize,
                      seed: u64,
                      result: Result<SearchResult, SearchError>,
                      used: &mut usize,
                      incumbents: &mut [Option<SearchResult>; 2]|
     -> Result<bool, SearchError> {
        let offset = *used;
        *used += batch;
        let mut result = match result {
            Ok(r) => r,
            Err(SearchError::AllStartsFailed { .. }) => {
                batches.push(BatchSummary {
                    domain_mode: modes[slot],
                    seed,
                    starts: batch,
                    best_value: None,
                });
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        batches.append(&mut result.batches);
        totals.0 += result.passes_used;
        totals.1 += result.exchanges_made;
        for s in &result.per_start {
            let mut s = s.clone();
            s.start += offset;
            all_starts.push(s);
        }
        let overall = incumbents
            .iter()
            .flatten()
            .map(score)
            .fold(None, |acc: Option<f64>, v| {
                Some(match acc {
                    None => v,
                    Some(a) if is_better(orientation, v, a, 0.0) => v,
                    Some(a) => a,
                })
            });
        let improved =
            overall.is_none_or(|o| is_better(orientation, score(&result), o, search.equal_tol));
        let replace = incumbents[slot]
            .as_ref()
            .is_none_or(|cur| is_better(orientation, score(&result), score(cur), search.equal_tol));
        if replace {
            incumbents[slot] = Some(result);
        }
        Ok(improved)
    };

    // both first batches share the seed base; later batches use fresh seeds
    absorb(
        0,
        search.seed,
        run(modes[0], search.seed),
        &mut used,
        &mut incumbents,
    )?;
    absorb(
        1,
        search.seed,
        run(modes[1], search.seed),
        &mut used,
        &mut incumbents,
    )?;
    while used + batch <= DUAL_START_CAP {
        let inferior = match (&incumbents[0], &incumbents[1]) {
            (Some(a), Some(b)) => {
                if is_tied(score(a), score(b), search.equal_tol) {
                    break;
                }
                if is_better(orientation, score(a), score(b), 0.0) {
                    1
                } else {
                    0
                }
            }
            (None, Some(_)) => 0,
            (Some(_), None) => 1,
            (None, None) => break,
        };
        let seed = search.seed.wrapping_add(used as u64);
        let improved = absorb(
            inferior,
            seed,
            run(modes[inferior], seed),
            &mut used,
            &mut incumbents,
        )?;
        if !improved {
            break;
        }
    }

    let [discrete, continuous] = incumbents;
    let best = match (discrete, continuous) {
        (Some(a), Some(b)) => {
            let tied_and_smaller = is_tied(score(&a), score(&b), search.equal_tol)
                && b.best_design.lex_cmp(&a.best_design) == Ordering::Less;
            if is_better(orientation, score(&b), score(&a), search.equal_tol) || tied_and_smaller {
                b
            } else {
                a
            }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(SearchError::AllStartsFailed {
                starts: used,
                last: "every batch failed".into(),
            })
        }
    };
    let best_raw = score(&best);
    let success_count_at_best = all_starts
        .iter()
        .filter_map(|s| s.value)
        .filter(|&v| is_tied(v, best_raw, search.equal_tol))
        .count();
    Ok(SearchResult {
        best_design: best.best_design,
        best_value: best.best_value,
        per_start: all_starts,
        passes_used: totals.0,
        exchanges_made: totals.1,
        success_count_at_best,
        batches,
    })
}

/// Value a batch was ranked by (the search objective on the report scale).
fn score(r: &SearchResult) -> f64 {
    r.batches
        .last()
        .and_then(|b| b.best_value)
        .unwrap_or(r.best_value.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Family;

    fn me(k: usize) -> ModelSpec {
        ModelSpec::main_effects(vec![FactorDomain::Continuous; k]).unwrap()
    }

    #[test]
    fn random_start_is_reproducible() {
        let spec = me(3);
        let cfg = CriterionConfig::new(Family::D);
        let a = random_start(
            4,
            &spec,
            &cfg,
            DomainMode::PM1,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let b = random_start(
            4,
            &spec,
            &cfg,
            DomainMode::PM1,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a
            .settings()
            .as_slice()
            .iter()
            .all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn rank_deficient_start_fails() {
        let spec = me(3);
        let cfg = CriterionConfig::new(Family::A);
        let r = random_start(
            3,
            &spec,
            &cfg,
            DomainMode::Continuous,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(matches!(
            r,
            Err(SearchError::CannotFindNonsingularStart { .. })
        ));
    }

    #[test]
    fn two_run_as_design() {
        let spec = me(1);
        let cfg = CriterionConfig::new(Family::As);
        let search = SearchConfig {
            starts: 5,
            seed: 3,
            ..SearchConfig::default()
        };
        let r = construct(2, &spec, &cfg, &search).unwrap();
        assert!((r.best_value.beta_trace.unwrap() - 0.5).abs() < 1e-12);
        let mut xs: Vec<f64> = r.best_design.settings().as_slice().to_vec();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![-1.0, 1.0]);
    }

    #[test]
    fn local_optimum_is_fixed_point() {
        let spec = me(3);
        let cfg = CriterionConfig::new(Family::D);
        let objective = Objective::new(&spec, &cfg);
        let d = Design::from_rows(&[
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]);
        let mut state = CeaState::new(d.clone(), &spec, &objective).unwrap();
        let out = cea_pass(
            &mut state,
            &spec,
            &objective,
            DomainMode::PM1,
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(!out.improved);
        assert_eq!(state.design, d);
    }

    #[test]
    fn levels_per_mode() {
        let doms = [
            FactorDomain::TwoLevel,
            FactorDomain::ThreeLevel,
            FactorDomain::Continuous,
        ];
        assert_eq!(DomainMode::PM1.levels(&doms)[2], Some(vec![-1.0, 1.0]));
        assert_eq!(DomainMode::PM1_0.levels(&doms)[0], Some(vec![-1.0, 1.0]));
        assert_eq!(
            DomainMode::PM1_0.levels(&doms)[2],
            Some(vec![-1.0, 0.0, 1.0])
        );
        assert_eq!(
            DomainMode::Continuous.levels(&doms)[1],
            Some(vec![-1.0, 0.0, 1.0])
        );
        assert_eq!(DomainMode::Continuous.levels(&doms)[2], None);
    }
}
