//! Small dense integer matrices: determinants and inverses of unimodular matrices.
//!
//! Matrices are row-major `Vec<Vec<i64>>`. Intermediate values are kept in `i128`
//! with checked arithmetic; `None` means overflow (or, for the inverse, a matrix
//! that is not unimodular).

fn widen(m: &[Vec<i64>]) -> Vec<Vec<i128>> {
    m.iter()
        .map(|row| row.iter().map(|&v| v as i128).collect())
        .collect()
}

/// Fraction-free (Bareiss) determinant.
pub fn determinant(m: &[Vec<i64>]) -> Option<i64> {
    let n = m.len();
    if n == 0 {
        return Some(1);
    }
    debug_assert!(m.iter().all(|r| r.len() == n));
    let mut a = widen(m);
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return Some(0);
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let lhs = a[i][j].checked_mul(a[k][k])?;
                let rhs = a[i][k].checked_mul(a[k][j])?;
                a[i][j] = lhs.checked_sub(rhs)? / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    i64::try_from(sign.checked_mul(a[n - 1][n - 1])?).ok()
}

/// Inverse of a unimodular matrix by Euclidean row reduction of `[M | I]`.
///
/// Returns `None` when the determinant is not ±1.
pub fn unimodular_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    let mut a = widen(m);
    let mut inv: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect();

    for col in 0..n {
        // Euclid on the rows below the diagonal until only one nonzero entry remains.
        loop {
            let mut pivot: Option<usize> = None;
            for r in col..n {
                if a[r][col] != 0 && pivot.is_none_or(|p| a[r][col].abs() < a[p][col].abs()) {
                    pivot = Some(r);
                }
            }
            let p = pivot?;
            a.swap(col, p);
            inv.swap(col, p);
            let mut done = true;
            for r in col + 1..n {
                if a[r][col] != 0 {
                    let q = a[r][col] / a[col][col];
                    for j in 0..n {
                        a[r][j] = a[r][j].checked_sub(q.checked_mul(a[col][j])?)?;
                        inv[r][j] = inv[r][j].checked_sub(q.checked_mul(inv[col][j])?)?;
                    }
                    if a[r][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        match a[col][col] {
            1 => {}
            -1 => {
                for j in 0..n {
                    a[col][j] = -a[col][j];
                    inv[col][j] = -inv[col][j];
                }
            }
            _ => return None,
        }
    }
    for col in (0..n).rev() {
        for r in 0..col {
            let q = a[r][col];
            if q != 0 {
                for j in 0..n {
                    a[r][j] = a[r][j].checked_sub(q.checked_mul(a[col][j])?)?;
                    inv[r][j] = inv[r][j].checked_sub(q.checked_mul(inv[col][j])?)?;
                }
            }
        }
    }
    inv.into_iter()
        .map(|row| row.into_iter().map(|v| i64::try_from(v).ok()).collect())
        .collect()
}

pub fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            debug_assert_eq!(row.len(), inner);
            (0..cols)
                .map(|j| {
                    (0..inner).try_fold(0i64, |acc, k| acc.checked_add(row[k].checked_mul(b[k][j])?))
                })
                .collect()
        })
        .collect()
}
