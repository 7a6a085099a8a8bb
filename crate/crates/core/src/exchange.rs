//! Closed-form criterion changes for row and coordinate exchanges, and the
//! coordinate optimizers built on them.
//!
//! With `D = (LᵀL + prior)⁻¹`, current row `l`, `v = lᵀDl` and
//! `φ = lᵀDWDl`, replacing `l` by `l̃` gives
//!
//! ```text
//! Δ_D = l̃ᵀV l̃ + (1 − v)                  V = (1 − v)D + DllᵀD
//! Δ_A = (l̃ᵀU l̃ − φ) / Δ_D                U = (1 − v)DWD + DllᵀDWD + DWDllᵀD − φD
//! ```
//!
//! `Δ_D` is the determinant ratio new/old and `Δ_A` the decrease in
//! `tr(W D)`. Both quadratic forms are evaluated through `u = Dl` and
//! `g = DWDl` so no `P x P` matrix is formed per exchange.

use log::{debug, trace};
use thiserror::Error;

use crate::matrix::{dot, Matrix};
use crate::model::RowPartition;

/// Exchanges with `Δ_D` at or below this value are treated as singular.
pub const SINGULAR_DELTA: f64 = 1e-12;
/// Deltas within this tolerance of the current coordinate's count as ties.
pub const TIE_TOL: f64 = 1e-10;
pub const DINKELBACH_TOL: f64 = 1e-10;
pub const DINKELBACH_MAX_ITER: usize = 100;
pub const GRID_POINTS: usize = 41;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExchangeError {
    #[error("exchange makes the information matrix singular (determinant ratio {delta_d:e})")]
    SingularExchange { delta_d: f64 },
    #[error("every candidate makes the information matrix singular")]
    AllSingular,
    #[error("fractional iteration did not converge in {iterations} steps")]
    NoConvergence { iterations: usize },
}

/// Quantities derived from the current inverse and one design row.
#[derive(Debug, Clone)]
pub struct ExchangeContext<'a> {
    d: &'a Matrix,
    dwd: Option<&'a Matrix>,
    l_old: Vec<f64>,
    u: Vec<f64>,
    g: Vec<f64>,
    v: f64,
    phi_w: f64,
}

impl<'a> ExchangeContext<'a> {
    /// `dwd` is `D W D`; it is only needed for the A family.
    pub fn new(d: &'a Matrix, dwd: Option<&'a Matrix>, l_old: Vec<f64>) -> Self {
        let u = d.mul_vec(&l_old);
        let v = dot(&l_old, &u);
        let (g, phi_w) = match dwd {
            Some(m) => {
                let g = m.mul_vec(&l_old);
                let phi = dot(&l_old, &g);
                (g, phi)
            }
            None => (Vec::new(), 0.0),
        };
        Self {
            d,
            dwd,
            l_old,
            u,
            g,
            v,
            phi_w,
        }
    }

    pub fn l_old(&self) -> &[f64] {
        &self.l_old
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn phi_w(&self) -> f64 {
        self.phi_w
    }

    pub fn dim(&self) -> usize {
        self.l_old.len()
    }

    /// `V = (1 − v)D + DllᵀD`.
    pub fn v_matrix(&self) -> Matrix {
        let p = self.dim();
        let mut out = self.d.scale(1.0 - self.v);
        for r in 0..p {
            for c in 0..p {
                out[(r, c)] += self.u[r] * self.u[c];
            }
        }
        out
    }

    /// `U = (1 − v)DWD + DllᵀDWD + DWDllᵀD − φD`.
    pub fn u_matrix(&self) -> Option<Matrix> {
        let dwd = self.dwd?;
        let p = self.dim();
        let mut out = dwd.scale(1.0 - self.v).sub(&self.d.scale(self.phi_w));
        for r in 0..p {
            for c in 0..p {
                out[(r, c)] += self.u[r] * self.g[c] + self.g[r] * self.u[c];
            }
        }
        Some(out)
    }

    /// Determinant ratio for replacing the row by `l_new`.
    pub fn delta_d_row(&self, l_new: &[f64]) -> f64 {
        let s_d = self.d.quad_form(l_new);
        let s_u = dot(&self.u, l_new);
        (1.0 - self.v) * s_d + s_u * s_u + (1.0 - self.v)
    }

    /// Decrease of `tr(W D)` for replacing the row by `l_new`.
    pub fn delta_a_row(&self, l_new: &[f64]) -> Result<f64, ExchangeError> {
        let dwd = self.dwd.expect("A-family exchange needs DWD");
        let s_d = self.d.quad_form(l_new);
        let s_u = dot(&self.u, l_new);
        let delta_d = (1.0 - self.v) * s_d + s_u * s_u + (1.0 - self.v);
        if delta_d <= SINGULAR_DELTA {
            return Err(ExchangeError::SingularExchange { delta_d });
        }
        let s_g = dot(&self.g, l_new);
        let num =
            (1.0 - self.v) * dwd.quad_form(l_new) + 2.0 * s_u * s_g - self.phi_w * s_d - self.phi_w;
        Ok(num / delta_d)
    }

    /// Determinant ratio for setting coordinate `j` of the row to `x`.
    pub fn delta_d_coord(&self, part: &RowPartition, x: f64) -> f64 {
        self.delta_d_row(&part.row_at(x, self.dim()))
    }

    /// Weighted-trace decrease for setting the coordinate to `x`.
    pub fn delta_aw_coord(&self, part: &RowPartition, x: f64) -> Result<f64, ExchangeError> {
        self.delta_a_row(&part.row_at(x, self.dim()))
    }

    /// Numerator and denominator of the coordinate objective as quadratics
    /// in the new coordinate value. Requires a row linear in the coordinate
    /// and the A family. The denominator is `Δ_D`.
    pub fn coord_ratio(&self, part: &RowPartition) -> QuadRatio {
        assert!(
            part.quadratic_index.is_none(),
            "closed-form coefficients need a row linear in the coordinate"
        );
        let dwd = self.dwd.expect("A-family exchange needs DWD");
        let (e, h) = part.affine_parts(self.dim());
        let de = self.d.mul_vec(&e);
        let dh = self.d.mul_vec(&h);
        let ge = dwd.mul_vec(&e);
        let gh = dwd.mul_vec(&h);
        let (d_ee, d_eh, d_hh) = (dot(&e, &de), dot(&h, &de), dot(&h, &dh));
        let (g_ee, g_eh, g_hh) = (dot(&e, &ge), dot(&h, &ge), dot(&h, &gh));
        let (ue, uh) = (dot(&self.u, &e), dot(&self.u, &h));
        let (we, wh) = (dot(&self.g, &e), dot(&self.g, &h));
        let r = 1.0 - self.v;
        let phi = self.phi_w;
        QuadRatio {
            num: [
                r * g_hh + 2.0 * uh * wh - phi * d_hh,
                2.0 * r * g_eh + 2.0 * (ue * wh + uh * we) - 2.0 * phi * d_eh,
                r * g_ee + 2.0 * ue * we - phi * d_ee - phi,
            ],
            den: [
                r * d_hh + uh * uh,
                2.0 * r * d_eh + 2.0 * ue * uh,
                r * d_ee + ue * ue + r,
            ],
        }
    }

    /// `Δ_D` as a quadratic in the coordinate (linear rows only).
    pub fn coord_delta_d_poly(&self, part: &RowPartition) -> [f64; 3] {
        let (e, h) = part.affine_parts(self.dim());
        let de = self.d.mul_vec(&e);
        let dh = self.d.mul_vec(&h);
        let (ue, uh) = (dot(&self.u, &e), dot(&self.u, &h));
        let r = 1.0 - self.v;
        [
            r * dot(&h, &dh) + uh * uh,
            2.0 * r * dot(&h, &de) + 2.0 * ue * uh,
            r * dot(&e, &de) + ue * ue + r,
        ]
    }
}

/// `(a_N x² + b_N x + c_N) / (a_D x² + b_D x + c_D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadRatio {
    pub num: [f64; 3],
    pub den: [f64; 3],
}

fn poly(c: &[f64; 3], x: f64) -> f64 {
    (c[0] * x + c[1]) * x + c[2]
}

impl QuadRatio {
    pub fn numerator(&self, x: f64) -> f64 {
        poly(&self.num, x)
    }

    pub fn denominator(&self, x: f64) -> f64 {
        poly(&self.den, x)
    }

    pub fn ratio(&self, x: f64) -> f64 {
        self.numerator(x) / self.denominator(x)
    }

    /// Coefficients `(a(q), b(q), c(q))` of `G_q(x) = N(x) − q·D(x)`.
    pub fn parametric(&self, q: f64) -> [f64; 3] {
        [
            self.num[0] - q * self.den[0],
            self.num[1] - q * self.den[1],
            self.num[2] - q * self.den[2],
        ]
    }

    pub fn g(&self, q: f64, x: f64) -> f64 {
        poly(&self.parametric(q), x)
    }

    /// Maximizer of `G_q` on `[−1, 1]`. When `G_q` is flat the current
    /// coordinate is kept.
    pub fn argmax_g(&self, q: f64, current: f64) -> f64 {
        let c = self.parametric(q);
        let scale = c
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let (a, b) = (c[0], c[1]);
        if a.abs() <= 1e-14 * scale && b.abs() <= 1e-14 * scale {
            trace!("flat parametric objective at q = {q:e}; keeping x = {current}");
            return current;
        }
        if a < 0.0 {
            let vertex = -b / (2.0 * a);
            if (-1.0..=1.0).contains(&vertex) {
                return vertex;
            }
        }
        let (lo, hi) = (poly(&c, -1.0), poly(&c, 1.0));
        if hi > lo {
            1.0
        } else if lo > hi {
            -1.0
        } else if a > 0.0 || b != 0.0 {
            // equal endpoints of a convex or linear function
            if current.abs() == 1.0 {
                current
            } else {
                -1.0
            }
        } else {
            current
        }
    }

    /// Dinkelbach iteration for `max N/D` on `[−1, 1]`, started at `q0`.
    /// Returns `(x*, q*)`.
    pub fn dinkelbach(&self, q0: f64, current: f64) -> Result<(f64, f64), ExchangeError> {
        let mut q = q0;
        for _ in 0..DINKELBACH_MAX_ITER {
            let x = self.argmax_g(q, current);
            let den = self.denominator(x);
            if den <= SINGULAR_DELTA {
                return Err(ExchangeError::SingularExchange { delta_d: den });
            }
            let next = self.numerator(x) / den;
            if (next - q).abs() <= DINKELBACH_TOL * q.abs().max(1.0) {
                return Ok((x, next.max(q)));
            }
            q = next;
        }
        Err(ExchangeError::NoConvergence {
            iterations: DINKELBACH_MAX_ITER,
        })
    }
}

/// Outcome of a coordinate optimization: the chosen value and its delta
/// (a determinant ratio for the D family, a trace decrease for the A family).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordMove {
    pub x: f64,
    pub delta: f64,
}

/// Which delta a solver maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    /// Determinant ratio; identity value 1.
    Det,
    /// Weighted trace decrease; identity value 0.
    Trace,
}

impl DeltaKind {
    pub fn identity(self) -> f64 {
        match self {
            DeltaKind::Det => 1.0,
            DeltaKind::Trace => 0.0,
        }
    }
}

fn delta_at(
    ctx: &ExchangeContext<'_>,
    kind: DeltaKind,
    part: &RowPartition,
    x: f64,
) -> Option<f64> {
    let l = part.row_at(x, ctx.dim());
    match kind {
        DeltaKind::Det => {
            let d = ctx.delta_d_row(&l);
            (d > SINGULAR_DELTA).then_some(d)
        }
        DeltaKind::Trace => ctx.delta_a_row(&l).ok(),
    }
}

/// Picks the best of `candidates`. Ties within [`TIE_TOL`] of the current
/// coordinate keep it; otherwise ties go to the smallest `|x|`.
pub fn best_coord_discrete(
    ctx: &ExchangeContext<'_>,
    kind: DeltaKind,
    part: &RowPartition,
    current: f64,
    candidates: &[f64],
) -> Result<CoordMove, ExchangeError> {
    let evaluated: Vec<(f64, f64)> = candidates
        .iter()
        .filter_map(|&x| delta_at(ctx, kind, part, x).map(|d| (x, d)))
        .collect();
    choose(kind, current, evaluated)
}

fn choose(
    kind: DeltaKind,
    current: f64,
    evaluated: Vec<(f64, f64)>,
) -> Result<CoordMove, ExchangeError> {
    let best = evaluated
        .iter()
        .map(|&(_, d)| d)
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(ExchangeError::AllSingular);
    }
    let tol = TIE_TOL * best.abs().max(1.0);
    let tied: Vec<(f64, f64)> = evaluated
        .into_iter()
        .filter(|&(_, d)| d >= best - tol)
        .collect();
    if let Some(&(x, d)) = tied.iter().find(|&&(x, _)| x == current) {
        return Ok(CoordMove { x, delta: d });
    }
    if best <= kind.identity() + tol {
        return Ok(CoordMove {
            x: current,
            delta: kind.identity(),
        });
    }
    let &(x, d) = tied
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .expect("the maximum is attained");
    Ok(CoordMove { x, delta: d })
}

/// Best value of a continuous coordinate on `[−1, 1]`.
///
/// D family on a row linear in the coordinate: only the endpoints can win
/// (`Δ_D` is a convex quadratic). A family on a linear row: Dinkelbach
/// iteration on the closed-form ratio. Rows containing the coordinate's
/// square: grid search plus golden-section refinement on exact deltas.
pub fn best_coord_continuous(
    ctx: &ExchangeContext<'_>,
    kind: DeltaKind,
    part: &RowPartition,
    current: f64,
) -> Result<CoordMove, ExchangeError> {
    if part.quadratic_index.is_some() {
        return grid_golden(ctx, kind, part, current);
    }
    match kind {
        DeltaKind::Det => best_coord_discrete(ctx, kind, part, current, &[-1.0, 1.0, current]),
        DeltaKind::Trace => {
            let ratio = ctx.coord_ratio(part);
            let q0 = ratio.ratio(current);
            match ratio.dinkelbach(q0, current) {
                Ok((x, _)) => {
                    let mut cands = vec![(current, ratio.ratio(current))];
                    if ratio.denominator(x) > SINGULAR_DELTA {
                        cands.push((x, ratio.ratio(x)));
                    }
                    choose(kind, current, cands)
                }
                Err(err) => {
                    debug!("{err}; using grid search");
                    grid_golden(ctx, kind, part, current)
                }
            }
        }
    }
}

/// 41-point grid on `[−1, 1]` followed by golden-section search around the
/// best grid point.
pub fn grid_golden(
    ctx: &ExchangeContext<'_>,
    kind: DeltaKind,
    part: &RowPartition,
    current: f64,
) -> Result<CoordMove, ExchangeError> {
    let f = |x: f64| delta_at(ctx, kind, part, x);
    let step = 2.0 / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| -1.0 + step * i as f64).collect();
    let mut evaluated: Vec<(f64, f64)> =
        grid.iter().filter_map(|&x| f(x).map(|d| (x, d))).collect();
    let Some(&(x0, _)) = evaluated.iter().max_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Err(ExchangeError::AllSingular);
    };
    let (mut lo, mut hi) = ((x0 - step).max(-1.0), (x0 + step).min(1.0));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let score = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..80 {
        if hi - lo <= 1e-12 {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = score(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = score(d);
        }
    }
    let xr = 0.5 * (lo + hi);
    if let Some(dr) = f(xr) {
        evaluated.push((xr, dr));
    }
    if let Some(dc) = f(current) {
        evaluated.push((current, dc));
    }
    choose(kind, current, evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{logdet, spd_inverse};
    use crate::model::{Design, FactorDomain, ModelSpec};

    fn setup(rows: &[[f64; 3]], spec: &ModelSpec) -> (Matrix, Matrix) {
        let l = spec.build_matrices(&Design::from_rows(rows)).unwrap().l;
        let d = spd_inverse(&l.gram()).unwrap();
        (l, d)
    }

    fn rows6() -> Vec<[f64; 3]> {
        vec![
            [1.0, 0.3, -1.0],
            [-0.5, 1.0, 1.0],
            [1.0, -1.0, 0.2],
            [-1.0, -0.7, -1.0],
            [0.1, 1.0, -0.4],
            [-1.0, 0.6, 1.0],
        ]
    }

    #[test]
    fn identity_exchange() {
        let spec = ModelSpec::main_effects(vec![FactorDomain::Continuous; 3]).unwrap();
        let (l, d) = setup(&rows6(), &spec);
        let dwd = d.matmul(&d);
        let ctx = ExchangeContext::new(&d, Some(&dwd), l.row(2).to_vec());
        assert!((ctx.delta_d_row(l.row(2)) - 1.0).abs() < 1e-12);
        assert!(ctx.delta_a_row(l.row(2)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn row_deltas_match_recomputation() {
        let spec = ModelSpec::main_effects(vec![FactorDomain::Continuous; 3]).unwrap();
        let rows = rows6();
        let (l, d) = setup(&rows, &spec);
        let dwd = d.matmul(&d);
        let ctx = ExchangeContext::new(&d, Some(&dwd), l.row(1).to_vec());
        let new_x = [0.25, -0.8, 0.9];
        let mut changed = rows.clone();
        changed[1] = new_x;
        let (l2, d2) = setup(&changed, &spec);
        let ratio = (logdet(&l2.gram()).unwrap() - logdet(&l.gram()).unwrap()).exp();
        assert!((ctx.delta_d_row(l2.row(1)) - ratio).abs() < 1e-10 * ratio);
        let decrease = d.trace() - d2.trace();
        assert!((ctx.delta_a_row(l2.row(1)).unwrap() - decrease).abs() < 1e-10);
        let vm = ctx.v_matrix();
        assert!((vm.quad_form(l2.row(1)) + 1.0 - ctx.v() - ratio).abs() < 1e-10);
        let um = ctx.u_matrix().unwrap();
        let n = um.quad_form(l2.row(1)) - ctx.phi_w();
        assert!((n / ratio - decrease).abs() < 1e-10);
    }

    #[test]
    fn duplicate_row_exchange_is_singular() {
        let spec = ModelSpec::main_effects(vec![FactorDomain::Continuous; 1]).unwrap();
        let rows = [[1.0], [-1.0]];
        let l = spec.build_matrices(&Design::from_rows(&rows)).unwrap().l;
        let d = spd_inverse(&l.gram()).unwrap();
        let ctx = ExchangeContext::new(&d, Some(&d), l.row(1).to_vec());
        assert!(ctx.delta_d_row(l.row(0)).abs() < 1e-10);
        assert!(matches!(
            ctx.delta_a_row(l.row(0)),
            Err(ExchangeError::SingularExchange { .. })
        ));
    }

    #[test]
    fn ratio_coefficients_reproduce_delta() {
        let spec =
            ModelSpec::interactions(vec![FactorDomain::Continuous; 3], 2, false, 0.0).unwrap();
        let mut rows = rows6();
        rows.push([0.5, 0.5, 0.5]);
        rows.push([-0.2, -1.0, 0.8]);
        let (l, d) = setup(&rows, &spec);
        let dwd = d.matmul(&d);
        let i = 3;
        let ctx = ExchangeContext::new(&d, Some(&dwd), l.row(i).to_vec());
        let part = spec.partition_row(&rows[i], &[1.0], 1);
        let r = ctx.coord_ratio(&part);
        let dd = ctx.coord_delta_d_poly(&part);
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let direct = ctx.delta_aw_coord(&part, x).unwrap();
            assert!((r.ratio(x) - direct).abs() < 1e-10);
            assert!((poly(&dd, x) - ctx.delta_d_coord(&part, x)).abs() < 1e-10);
        }
        assert!(r.ratio(rows[i][1]).abs() < 1e-12);
    }

    #[test]
    fn continuous_beats_grid() {
        let spec =
            ModelSpec::interactions(vec![FactorDomain::Continuous; 3], 2, false, 0.0).unwrap();
        let mut rows = rows6();
        rows.push([0.5, 0.5, 0.5]);
        rows.push([-0.2, -1.0, 0.8]);
        let (l, d) = setup(&rows, &spec);
        let dwd = d.matmul(&d);
        for i in 0..rows.len() {
            let ctx = ExchangeContext::new(&d, Some(&dwd), l.row(i).to_vec());
            for j in 0..3 {
                let part = spec.partition_row(&rows[i], &[1.0], j);
                let m = best_coord_continuous(&ctx, DeltaKind::Trace, &part, rows[i][j]).unwrap();
                let grid_best = (0..=2000)
                    .map(|t| ctx.delta_aw_coord(&part, -1.0 + t as f64 / 1000.0).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    m.delta >= grid_best - 1e-9,
                    "({i},{j}) {} < {}",
                    m.delta,
                    grid_best
                );
            }
        }
    }

    #[test]
    fn argmax_cases() {
        let concave = QuadRatio {
            num: [-1.0, 0.5, 0.0],
            den: [0.0, 0.0, 1.0],
        };
        assert!((concave.argmax_g(0.0, 0.9) - 0.25).abs() < 1e-15);
        let convex = QuadRatio {
            num: [1.0, 0.1, 0.0],
            den: [0.0, 0.0, 1.0],
        };
        assert_eq!(convex.argmax_g(0.0, 0.0), 1.0);
        let flat = QuadRatio {
            num: [0.0, 0.0, 0.3],
            den: [0.0, 0.0, 1.0],
        };
        assert_eq!(flat.argmax_g(0.3, 0.42), 0.42);
        let outside = QuadRatio {
            num: [-1.0, 4.0, 0.0],
            den: [0.0, 0.0, 1.0],
        };
        assert_eq!(outside.argmax_g(0.0, 0.0), 1.0);
    }

    #[test]
    fn discrete_tie_keeps_current() {
        let moves = vec![(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)];
        assert_eq!(choose(DeltaKind::Det, 1.0, moves.clone()).unwrap().x, 1.0);
        let moves = vec![(-1.0, 2.0), (1.0, 2.0), (0.0, 1.0)];
        assert_eq!(choose(DeltaKind::Det, 0.0, moves).unwrap().x, -1.0);
        assert!(matches!(
            choose(DeltaKind::Trace, 0.0, vec![]),
            Err(ExchangeError::AllSingular)
        ));
    }
}
