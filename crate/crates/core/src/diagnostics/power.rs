//! Power of the two-sided t test through the noncentral t distribution.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const QUAD_TOL: f64 = 1e-12;
const PANELS: usize = 256;
const HALF_WIDTH: f64 = 40.0;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(T ≤ t)` for `T` noncentral t with `df` degrees of freedom and
/// noncentrality `delta`, from
/// `∫ Φ(t·u/√df − delta) χ_df(u) du` over the chi density `χ_df`.
pub fn noncentral_t_cdf(t: f64, df: f64, delta: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    let log_norm = (df / 2.0 - 1.0) * std::f64::consts::LN_2 + ln_gamma(df / 2.0);
    let sqrt_df = df.sqrt();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let log_chi = (df - 1.0) * u.ln() - 0.5 * u * u - log_norm;
        std_normal_cdf(t * u / sqrt_df - delta) * log_chi.exp()
    };
    let lo = (sqrt_df - HALF_WIDTH).max(0.0);
    let hi = sqrt_df + HALF_WIDTH;
    let h = (hi - lo) / PANELS as f64;
    (0..PANELS)
        .map(|p| {
            let a = lo + h * p as f64;
            let b = a + h;
            let (fa, fm, fb) = (integrand(a), integrand(0.5 * (a + b)), integrand(b));
            let whole = simpson(a, b, fa, fm, fb);
            adaptive_simpson(
                &integrand,
                a,
                b,
                fa,
                fm,
                fb,
                whole,
                QUAD_TOL / PANELS as f64,
                40,
            )
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Power of the level-`alpha` two-sided t test with `df` residual degrees
/// of freedom when the standardized effect is `delta`.
pub fn two_sided_t_power(delta: f64, df: f64, alpha: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let crit = t.inverse_cdf(1.0 - alpha / 2.0);
    let upper = 1.0 - noncentral_t_cdf(crit, df, delta);
    let lower = noncentral_t_cdf(-crit, df, delta);
    (upper + lower).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_case_matches_students_t() {
        for df in [1.0, 3.0, 10.0, 50.0] {
            let t = StudentsT::new(0.0, 1.0, df).unwrap();
            for x in [-3.0, -0.5, 0.0, 1.2, 4.0] {
                assert!(
                    (noncentral_t_cdf(x, df, 0.0) - t.cdf(x)).abs() < 1e-9,
                    "df {df} x {x}"
                );
            }
        }
    }

    #[test]
    fn size_of_test() {
        for df in [1.0, 5.0, 30.0] {
            assert!((two_sided_t_power(0.0, df, 0.05) - 0.05).abs() < 1e-8);
        }
    }

    #[test]
    fn reference_values() {
        // scipy.stats.nct: 1 - cdf(tc) + cdf(-tc)
        let cases = [
            (1.0 / 0.1875f64.sqrt(), 1.0, 0.14423141705123868),
            (1.0 / 0.15625f64.sqrt(), 1.0, 0.15756565956559265),
            (1.0 / 0.1875f64.sqrt(), 10.0, 0.5499873565528078),
            (1.0 / 0.15625f64.sqrt(), 10.0, 0.6266881660896327),
        ];
        for (delta, df, want) in cases {
            let got = two_sided_t_power(delta, df, 0.05);
            assert!(
                (got - want).abs() < 1e-7,
                "delta {delta} df {df}: {got} vs {want}"
            );
        }
    }
}
