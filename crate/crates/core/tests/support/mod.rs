//! Reference linear algebra for tests, kept separate from the crate's
//! Cholesky path: Gauss-Jordan inversion and LU determinants on nested
//! vectors.

#![allow(dead_code, clippy::needless_range_loop)]

pub type Dense = Vec<Vec<f64>>;

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a[0].len());
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (r, m, c) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), m);
    (0..r)
        .map(|i| {
            (0..c)
                .map(|j| (0..m).map(|t| a[i][t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

pub fn gram(l: &Dense) -> Dense {
    matmul(&transpose(l), l)
}

/// Inverse with partial pivoting; `None` when a pivot falls below `1e-12`
/// relative to the largest entry.
pub fn gj_inverse(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `log|det A|` by LU with partial pivoting; `None` for a zero pivot or a
/// non-positive determinant.
pub fn lu_logdet(a: &Dense) -> Option<f64> {
    let n = a.len();
    let mut m = a.clone();
    let mut sign = 1.0;
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        if piv != col {
            m.swap(col, piv);
            sign = -sign;
        }
        let p = m[col][col];
        if p < 0.0 {
            sign = -sign;
        }
        acc += p.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    (sign > 0.0).then_some(acc)
}

pub fn trace(a: &Dense) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// `(1, x_1, .., x_k)` rows.
pub fn intercept_main_rows(rows: &[Vec<f64>]) -> Dense {
    rows.iter()
        .map(|x| std::iter::once(1.0).chain(x.iter().copied()).collect())
        .collect()
}

/// All products `x_j x_l` for `j < l`, ordered `(1,2), (1,3), .., (k-1,k)`.
pub fn two_factor_products(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut out = Vec::new();
    for j in 0..k {
        for l in j + 1..k {
            out.push(x[j] * x[l]);
        }
    }
    out
}

pub fn design_rows(d: &screenopt::model::Design) -> Vec<Vec<f64>> {
    (0..d.n()).map(|i| d.row(i).to_vec()).collect()
}

/// Diagonal of `(LᵀL)⁻¹`.
pub fn variances(l: &Dense) -> Vec<f64> {
    let inv = gj_inverse(&gram(l)).expect("nonsingular reference model");
    (0..inv.len()).map(|i| inv[i][i]).collect()
}

/// `(L₁ᵀL₁)⁻¹L₁ᵀF₂`.
pub fn alias(l1: &Dense, f2: &Dense) -> Dense {
    let inv = gj_inverse(&gram(l1)).expect("nonsingular fitted model");
    matmul(&matmul(&inv, &transpose(l1)), f2)
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}
